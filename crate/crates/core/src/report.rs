//! Human statistics ingest, difficulty rankings and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{AgentMetric, ChallengeAggregate};
use crate::stats::{format_p, join_key, CorrelationRow, MetricPair, StatsError};
use crate::wordle::Word;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanStatRecord {
    pub challenge_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Word>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_avg_metric: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_win_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanMetric {
    AvgMetric,
    WinRate,
}

impl HumanMetric {
    pub fn key(self) -> &'static str {
        match self {
            HumanMetric::AvgMetric => "human_avg_metric",
            HumanMetric::WinRate => "human_win_rate",
        }
    }

    pub fn value(self, h: &HumanStatRecord) -> Option<f64> {
        match self {
            HumanMetric::AvgMetric => h.human_avg_metric,
            HumanMetric::WinRate => h.human_win_rate,
        }
    }
}

impl FromStr for HumanMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "human_avg_metric" | "avg_metric" | "avg" => Ok(HumanMetric::AvgMetric),
            "human_win_rate" | "win_rate" => Ok(HumanMetric::WinRate),
            other => Err(format!("unknown human metric {other:?}")),
        }
    }
}

impl FromStr for MetricPair {
    type Err = String;

    /// `agent_metric~human_metric`, e.g. `avg_guesses~avg_metric`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, h) = s
            .split_once('~')
            .ok_or_else(|| format!("metric pair {s:?} must look like agent~human"))?;
        Ok(MetricPair {
            agent: a.parse()?,
            human: h.parse()?,
        })
    }
}

/// Maps record fields to CSV column names. Only `challenge_id` must exist;
/// other mapped columns that are absent from the header load as empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub challenge_id: String,
    pub date: String,
    pub answer: String,
    pub avg_metric: String,
    pub win_rate: String,
    pub sample_size: String,
    /// Win rates given as percentages (0-100) instead of fractions.
    pub win_rate_percent: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            challenge_id: "challenge_id".into(),
            date: "date".into(),
            answer: "answer".into(),
            avg_metric: "avg_guesses".into(),
            win_rate: "win_rate".into(),
            sample_size: "sample_size".into(),
            win_rate_percent: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} row {row}: {message}")]
    Schema {
        path: String,
        row: u64,
        message: String,
    },
    #[error("{path} row {row}: {message}")]
    Range {
        path: String,
        row: u64,
        message: String,
    },
    #[error("{path} row {row}: duplicate challenge id {id}")]
    Duplicate { path: String, row: u64, id: String },
    #[error("no challenge appears in both the agent aggregates and the human data")]
    EmptyJoin,
    #[error("challenge {challenge} lacks metric {metric}")]
    MissingMetric { challenge: String, metric: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_human_csv(
    path: &Path,
    schema: &CsvSchema,
) -> Result<Vec<HumanStatRecord>, ReportError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_human_csv(file, &path.display().to_string(), schema)
}

/// Parses human statistics from any reader; `source` names it in errors.
pub fn read_human_csv(
    reader: impl std::io::Read,
    source: &str,
    schema: &CsvSchema,
) -> Result<Vec<HumanStatRecord>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let schema_err = |row: u64, message: String| ReportError::Schema {
        path: source.to_string(),
        row,
        message,
    };
    let headers = rdr
        .headers()
        .map_err(|e| schema_err(1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col(&schema.challenge_id)
        .ok_or_else(|| schema_err(1, format!("missing column {:?}", schema.challenge_id)))?;
    let date_col = col(&schema.date);
    let answer_col = col(&schema.answer);
    let avg_col = col(&schema.avg_metric);
    let win_col = col(&schema.win_rate);
    let size_col = col(&schema.sample_size);
    if avg_col.is_none() && win_col.is_none() {
        return Err(schema_err(
            1,
            format!(
                "need at least one of the columns {:?} or {:?}",
                schema.avg_metric, schema.win_rate
            ),
        ));
    }

    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for result in rdr.records() {
        let record = result.map_err(|e| {
            let row = e.position().map(|p| p.line()).unwrap_or(0);
            schema_err(row, e.to_string())
        })?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |c: Option<usize>| {
            c.and_then(|i| record.get(i))
                .map(str::trim)
                .filter(|s| !s.is_empty())
        };
        let number = |c: Option<usize>, name: &str| -> Result<Option<f64>, ReportError> {
            cell(c)
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| schema_err(row, format!("{name}: {s:?} is not a number")))
                })
                .transpose()
        };
        let range = |message: String| ReportError::Range {
            path: source.to_string(),
            row,
            message,
        };

        let id = cell(Some(id_col))
            .ok_or_else(|| schema_err(row, "empty challenge id".into()))?
            .to_string();
        let answer = cell(answer_col)
            .map(|s| Word::parse(s).map_err(|e| schema_err(row, format!("answer: {e}"))))
            .transpose()?;
        let avg = number(avg_col, &schema.avg_metric)?;
        if let Some(v) = avg {
            if !v.is_finite() {
                return Err(range(format!("{} must be finite", schema.avg_metric)));
            }
        }
        let mut win = number(win_col, &schema.win_rate)?;
        if schema.win_rate_percent {
            win = win.map(|w| w / 100.0);
        }
        if let Some(w) = win {
            if !(0.0..=1.0).contains(&w) {
                return Err(range(format!("win rate {w} outside [0, 1]")));
            }
        }
        let sample_size = cell(size_col)
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|_| schema_err(row, format!("sample_size: {s:?} is not an integer")))
            })
            .transpose()?;
        if sample_size == Some(0) {
            return Err(range("sample_size must be positive".into()));
        }
        if !seen.insert(join_key(&id)) {
            return Err(ReportError::Duplicate {
                path: source.to_string(),
                row,
                id,
            });
        }
        out.push(HumanStatRecord {
            challenge_id: id,
            date: cell(date_col).map(str::to_string),
            answer,
            human_avg_metric: avg,
            human_win_rate: win,
            sample_size,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Rank 1 is the smallest value.
    Ascending,
    /// Rank 1 is the largest value.
    Descending,
}

impl Direction {
    /// Direction that ranks the easiest challenge first.
    pub fn easiest_first(metric: AgentMetric) -> Self {
        if metric.higher_is_easier() {
            Direction::Descending
        } else {
            Direction::Ascending
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedChallenge {
    pub challenge_id: String,
    pub value: f64,
    pub rank: usize,
}

/// Dense ranking of `(id, value)` pairs; ties share a rank.
pub fn dense_rank(values: &[(String, f64)], direction: Direction) -> Vec<RankedChallenge> {
    let mut sorted: Vec<&(String, f64)> = values.iter().collect();
    sorted.sort_by(|a, b| {
        let ord = a.1.total_cmp(&b.1);
        let ord = match direction {
            Direction::Ascending => ord,
            Direction::Descending => ord.reverse(),
        };
        ord.then_with(|| a.0.cmp(&b.0))
    });
    let mut out = Vec::with_capacity(sorted.len());
    let mut rank = 0;
    let mut prev: Option<f64> = None;
    for (id, v) in sorted {
        if prev != Some(*v) {
            rank += 1;
            prev = Some(*v);
        }
        out.push(RankedChallenge {
            challenge_id: id.clone(),
            value: *v,
            rank,
        });
    }
    out
}

pub fn rank_challenges(
    aggregates: &[ChallengeAggregate],
    metric: AgentMetric,
    direction: Direction,
) -> Result<Vec<RankedChallenge>, ReportError> {
    let values = aggregates
        .iter()
        .map(|a| {
            metric
                .value(a)
                .map(|v| (a.challenge_id.clone(), v))
                .ok_or_else(|| ReportError::MissingMetric {
                    challenge: a.challenge_id.clone(),
                    metric: metric.key().to_string(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(dense_rank(&values, direction))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFormats {
    pub markdown: bool,
    pub svg: bool,
}

impl Default for ReportFormats {
    fn default() -> Self {
        ReportFormats {
            markdown: true,
            svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCell {
    #[serde(flatten)]
    pub aggregate: ChallengeAggregate,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub challenge_id: String,
    pub human: HumanStatRecord,
    pub human_rank: usize,
    pub agents: BTreeMap<String, AgentCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_hash: Option<String>,
    pub primary_metric: String,
    pub rows: Vec<ReportRow>,
    pub correlations: Vec<CorrelationRow>,
}

fn human_direction(metric: HumanMetric) -> Direction {
    match metric {
        HumanMetric::AvgMetric => Direction::Ascending,
        HumanMetric::WinRate => Direction::Descending,
    }
}

/// Joins aggregates with human records. Rows are ordered by challenge id.
pub fn build_report(
    aggregates: &BTreeMap<String, Vec<ChallengeAggregate>>,
    human: &[HumanStatRecord],
    correlations: &[CorrelationRow],
    primary: MetricPair,
    manifest_hash: Option<String>,
) -> Result<DifficultyReport, ReportError> {
    let humans: BTreeMap<String, &HumanStatRecord> = human
        .iter()
        .map(|h| (join_key(&h.challenge_id), h))
        .collect();
    let mut cells: BTreeMap<String, BTreeMap<String, ChallengeAggregate>> = BTreeMap::new();
    for (agent, aggs) in aggregates {
        for a in aggs {
            let key = join_key(&a.challenge_id);
            if humans.contains_key(&key) {
                cells
                    .entry(key)
                    .or_default()
                    .insert(agent.clone(), a.clone());
            }
        }
    }
    if cells.is_empty() {
        return Err(ReportError::EmptyJoin);
    }

    let human_values: Vec<(String, f64)> = cells
        .keys()
        .filter_map(|k| primary.human.value(humans[k]).map(|v| (k.clone(), v)))
        .collect();
    let human_ranks: BTreeMap<String, usize> =
        dense_rank(&human_values, human_direction(primary.human))
            .into_iter()
            .map(|r| (r.challenge_id, r.rank))
            .collect();
    let mut agent_ranks: BTreeMap<(String, String), usize> = BTreeMap::new();
    for agent in aggregates.keys() {
        let values: Vec<(String, f64)> = cells
            .iter()
            .filter_map(|(k, m)| {
                m.get(agent)
                    .and_then(|a| primary.agent.value(a))
                    .map(|v| (k.clone(), v))
            })
            .collect();
        for r in dense_rank(&values, Direction::easiest_first(primary.agent)) {
            agent_ranks.insert((agent.clone(), r.challenge_id), r.rank);
        }
    }

    let rows = cells
        .into_iter()
        .map(|(key, m)| ReportRow {
            challenge_id: humans[&key].challenge_id.clone(),
            human: humans[&key].clone(),
            human_rank: human_ranks.get(&key).copied().unwrap_or(0),
            agents: m
                .into_iter()
                .map(|(agent, aggregate)| {
                    let rank = agent_ranks
                        .get(&(agent.clone(), key.clone()))
                        .copied()
                        .unwrap_or(0);
                    (agent, AgentCell { aggregate, rank })
                })
                .collect(),
        })
        .collect();
    Ok(DifficultyReport {
        manifest_hash,
        primary_metric: primary.label(),
        rows,
        correlations: correlations.to_vec(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render_csv(report: &DifficultyReport, agents: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "challenge_id".to_string(),
        "human_avg_metric".into(),
        "human_win_rate".into(),
        "sample_size".into(),
        "human_rank".into(),
    ];
    for a in agents {
        for col in [
            "n_trials",
            "win_rate",
            "avg_guesses",
            "avg_guesses_solved",
            "avg_hp_remaining",
            "protocol_failures",
            "rank",
        ] {
            header.push(format!("{a}.{col}"));
        }
    }
    w.write_record(&header).expect("in-memory csv");
    for row in &report.rows {
        let mut rec = vec![
            row.challenge_id.clone(),
            opt(row.human.human_avg_metric),
            opt(row.human.human_win_rate),
            row.human
                .sample_size
                .map(|s| s.to_string())
                .unwrap_or_default(),
            row.human_rank.to_string(),
        ];
        for a in agents {
            match row.agents.get(a) {
                Some(c) => {
                    let g = &c.aggregate;
                    rec.extend([
                        g.n_trials.to_string(),
                        g.win_rate.to_string(),
                        opt(g.avg_guesses),
                        opt(g.avg_guesses_solved),
                        opt(g.avg_hp_remaining),
                        g.protocol_failure_count.to_string(),
                        c.rank.to_string(),
                    ]);
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 7)),
            }
        }
        w.write_record(&rec).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Correlation table by agent, then per-challenge values.
pub fn render_markdown(report: &DifficultyReport, agents: &[String]) -> String {
    let mut md = String::from("# Difficulty report\n\n");
    if let Some(h) = &report.manifest_hash {
        let _ = writeln!(md, "Run manifest: `{h}`\n");
    }
    md.push_str("## Correlation with human data\n\n");
    md.push_str("| Agent | Metric | n | r | p | Strength |\n|---|---|---|---|---|---|\n");
    for c in &report.correlations {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.3} | {} | {} |",
            c.agent,
            c.metric,
            c.result.n,
            c.result.r,
            format_p(c.result.p),
            c.result.bucket
        );
    }
    let _ = writeln!(
        md,
        "\n## Per-challenge values ({})\n",
        report.primary_metric
    );
    md.push_str("| Challenge | Human avg | Human win rate | Human rank |");
    for a in agents {
        let _ = write!(
            md,
            " {a} win rate | {a} avg guesses | {a} avg HP | {a} rank |"
        );
    }
    md.push('\n');
    md.push_str(&"|---".repeat(4 + agents.len() * 4));
    md.push_str("|\n");
    let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    for row in &report.rows {
        let _ = write!(
            md,
            "| {} | {} | {} | {} |",
            row.challenge_id,
            f(row.human.human_avg_metric),
            f(row.human.human_win_rate),
            row.human_rank
        );
        for a in agents {
            match row.agents.get(a) {
                Some(c) => {
                    let _ = write!(
                        md,
                        " {} | {} | {} | {} |",
                        f(Some(c.aggregate.win_rate)),
                        f(c.aggregate.avg_guesses),
                        f(c.aggregate.avg_hp_remaining),
                        c.rank
                    );
                }
                None => md.push_str(" - | - | - | - |"),
            }
        }
        md.push('\n');
    }
    md
}

/// Least-squares fit `y = a + b x`; `None` when x has no spread.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

pub const SVG_WIDTH: f64 = 640.0;
pub const SVG_HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Scatter plot of agent metric (x) against human metric (y), one point per
/// challenge, with the least-squares line.
pub fn render_svg(
    points: &[(String, f64, f64)],
    x_label: &str,
    y_label: &str,
    title: &str,
) -> String {
    let xs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2).collect();
    let bounds = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            let pad = (hi - lo) * 0.05;
            (lo - pad, hi + pad)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (SVG_WIDTH - 2.0 * MARGIN);
    let py = |y: f64| SVG_HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (SVG_HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    svg.push('\n');
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        SVG_WIDTH / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (MARGIN, SVG_WIDTH - MARGIN, MARGIN, SVG_HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        SVG_WIDTH / 2.0,
        SVG_HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" x="18" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {})">{}</text>"#,
        SVG_HEIGHT / 2.0,
        SVG_HEIGHT / 2.0,
        escape(y_label)
    );
    for (v, anchor_x) in [(x0, l), (x1, r)] {
        let _ = writeln!(
            svg,
            r#"<text x="{anchor_x}" y="{}" text-anchor="middle" font-size="11">{v:.3}</text>"#,
            b + 16.0
        );
    }
    for (v, anchor_y) in [(y0, b), (y1, t)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{anchor_y}" text-anchor="end" font-size="11">{v:.3}</text>"#,
            l - 6.0
        );
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.1, p.2)).collect();
    if let Some((a, slope)) = least_squares(&pairs) {
        let _ = writeln!(
            svg,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="crimson" stroke-width="1.5"/>"#,
            px(x0),
            py(a + slope * x0),
            px(x1),
            py(a + slope * x1)
        );
    }
    for (id, x, y) in points {
        let _ = writeln!(
            svg,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"><title>{}</title></circle>"#,
            px(*x),
            py(*y),
            escape(id)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes every output into a staging directory first, then moves the files
/// into `out_dir`, so a failure never leaves a partial report behind.
pub fn render_report(
    report: &DifficultyReport,
    out_dir: &Path,
    formats: ReportFormats,
) -> Result<Vec<PathBuf>, ReportError> {
    if report.rows.is_empty() {
        return Err(ReportError::EmptyJoin);
    }
    let agents: Vec<String> = report
        .rows
        .iter()
        .flat_map(|r| r.agents.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut files: Vec<(String, String)> = vec![
        ("report.csv".into(), render_csv(report, &agents)),
        (
            "report.json".into(),
            serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        ),
    ];
    if formats.markdown {
        files.push(("report.md".into(), render_markdown(report, &agents)));
    }
    if formats.svg {
        let (agent_metric, human_metric) = report
            .primary_metric
            .parse::<MetricPair>()
            .map(|p| (p.agent, p.human))
            .unwrap_or((AgentMetric::AvgGuesses, HumanMetric::AvgMetric));
        for agent in &agents {
            let points: Vec<(String, f64, f64)> = report
                .rows
                .iter()
                .filter_map(|r| {
                    let x = r
                        .agents
                        .get(agent)
                        .and_then(|c| agent_metric.value(&c.aggregate))?;
                    let y = human_metric.value(&r.human)?;
                    Some((r.challenge_id.clone(), x, y))
                })
                .collect();
            if points.is_empty() {
                continue;
            }
            let svg = render_svg(
                &points,
                &format!("{agent} {}", agent_metric.key()),
                &format!("human {}", human_metric.key()),
                &format!("{agent} vs human"),
            );
            files.push((format!("scatter_{}.svg", sanitize_file(agent)), svg));
        }
    }

    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let staging = out_dir.join(format!(".report-staging-{}", std::process::id()));
    std::fs::create_dir_all(&staging).map_err(io_err(&staging))?;
    let write_all = || -> Result<(), ReportError> {
        for (name, content) in &files {
            let p = staging.join(name);
            std::fs::write(&p, content).map_err(io_err(&p))?;
        }
        Ok(())
    };
    if let Err(e) = write_all() {
        let _ = std::fs::remove_dir_all(&staging);
        return Err(e);
    }
    let mut written = Vec::new();
    for (name, _) in &files {
        let dest = out_dir.join(name);
        std::fs::rename(staging.join(name), &dest).map_err(io_err(&dest))?;
        written.push(dest);
    }
    let _ = std::fs::remove_dir_all(&staging);
    Ok(written)
}

fn sanitize_file(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
