//! A compact deck-battle game: energy, block, strength, vulnerable and
//! scripted boss intents. Every transition is a pure function of the state,
//! including the seeded shuffle.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::agent::action::{GameAction, BATTLE};
use crate::agent::{Agent, AgentError, Observation};
use crate::game::{play_game, Game, GameOutcome};

pub const ENERGY_PER_TURN: u32 = 3;
pub const HAND_SIZE: usize = 5;
pub const MAX_HAND: usize = 10;
pub const DEBUFF_VULNERABLE_TURNS: u32 = 2;
/// Consecutive illegal actions after which the game ends the turn itself.
pub const MAX_CONSECUTIVE_ILLEGAL: usize = 3;

const DEFAULT_ROSTER: &str = include_str!("../data/battle_roster.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CardCondition {
    EnemyIntendsAttack,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Card {
    pub name: String,
    pub cost: u32,
    #[serde(default)]
    pub damage: u32,
    #[serde(default)]
    pub block: u32,
    /// Strength is added this many times to the damage.
    #[serde(default)]
    pub strength_multiplier: i32,
    #[serde(default)]
    pub applies_vulnerable: u32,
    #[serde(default)]
    pub grants_strength: i32,
    #[serde(default)]
    pub draw: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<CardCondition>,
}

impl Card {
    pub fn is_valid(&self) -> bool {
        self.damage > 0
            || self.block > 0
            || self.applies_vulnerable > 0
            || self.grants_strength != 0
            || self.draw > 0
    }

    pub fn needs_target(&self) -> bool {
        self.damage > 0 || self.applies_vulnerable > 0 || self.condition.is_some()
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.damage > 0 {
            if self.strength_multiplier > 1 {
                parts.push(format!(
                    "Deal {} damage; strength counts {} times.",
                    self.damage, self.strength_multiplier
                ));
            } else {
                parts.push(format!("Deal {} damage.", self.damage));
            }
        }
        if self.block > 0 {
            parts.push(format!("Gain {} block.", self.block));
        }
        if self.applies_vulnerable > 0 {
            parts.push(format!(
                "Apply {} turn(s) of vulnerable.",
                self.applies_vulnerable
            ));
        }
        if self.grants_strength != 0 {
            let when = match self.condition {
                Some(CardCondition::EnemyIntendsAttack) => " if the target intends to attack",
                None => "",
            };
            parts.push(format!("Gain {} strength{when}.", self.grants_strength));
        }
        if self.draw > 0 {
            parts.push(format!("Draw {} card(s).", self.draw));
        }
        format!("{} (cost {}): {}", self.name, self.cost, parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Attack(u32),
    Debuff,
    Block(u32),
}

impl Intent {
    pub fn describe(&self) -> String {
        match self {
            Intent::Attack(n) => format!("Attack, {n} damage"),
            Intent::Debuff => "Debuff".into(),
            Intent::Block(n) => format!("Block {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combatant {
    pub name: String,
    pub hp: u32,
    pub max_hp: u32,
    pub block: u32,
    pub strength: i32,
    pub vulnerable_turns: u32,
}

impl Combatant {
    pub fn new(name: impl Into<String>, hp: u32) -> Self {
        Combatant {
            name: name.into(),
            hp,
            max_hp: hp,
            block: 0,
            strength: 0,
            vulnerable_turns: 0,
        }
    }

    pub fn is_dead(&self) -> bool {
        self.hp == 0
    }

    pub fn is_vulnerable(&self) -> bool {
        self.vulnerable_turns > 0
    }

    /// Block absorbs first; returns HP actually lost.
    fn take_damage(&mut self, amount: u32) -> u32 {
        let absorbed = amount.min(self.block);
        self.block -= absorbed;
        let lost = (amount - absorbed).min(self.hp);
        self.hp -= lost;
        lost
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BossSpec {
    pub name: String,
    pub hp: u32,
    pub intent_script: Vec<Intent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enemy {
    pub combatant: Combatant,
    pub intent_script: Vec<Intent>,
    pub intent_index: usize,
}

impl Enemy {
    pub fn from_spec(spec: &BossSpec) -> Self {
        assert!(
            !spec.intent_script.is_empty(),
            "intent script must be non-empty"
        );
        Enemy {
            combatant: Combatant::new(spec.name.clone(), spec.hp),
            intent_script: spec.intent_script.clone(),
            intent_index: 0,
        }
    }

    pub fn intent(&self) -> Intent {
        self.intent_script[self.intent_index % self.intent_script.len()]
    }
}

/// `base + multiplier * strength`, then ×1.5 rounded down when vulnerable.
pub fn compute_damage(base: u32, strength: i32, multiplier: i32, target_vulnerable: bool) -> u32 {
    let raw = (base as i64 + multiplier as i64 * strength as i64).max(0) as u64;
    let dealt = if target_vulnerable { raw * 3 / 2 } else { raw };
    dealt as u32
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IllegalPlay {
    #[error("no card named {0:?} in hand")]
    NotInHand(String),
    #[error("{card} costs {cost} but only {energy} energy is left")]
    InsufficientEnergy {
        card: String,
        cost: u32,
        energy: u32,
    },
    #[error("invalid target {0:?}")]
    BadTarget(String),
    #[error("{0} can only be played against an enemy that intends to attack")]
    ConditionUnmet(String),
    #[error("the battle is over")]
    BattleOver,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BattleState {
    pub player: Combatant,
    pub enemies: Vec<Enemy>,
    pub energy: u32,
    pub hand: Vec<Card>,
    pub draw_pile: Vec<Card>,
    pub discard_pile: Vec<Card>,
    pub turn: u32,
    pub rng_seed: u64,
    #[serde(skip, default = "default_rng")]
    rng: ChaCha8Rng,
}

fn default_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl BattleState {
    /// Shuffles the deck, then starts turn 1 with a full hand.
    pub fn new(player_hp: u32, enemies: &[BossSpec], deck: &[Card], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw_pile = deck.to_vec();
        draw_pile.shuffle(&mut rng);
        let mut state = BattleState {
            player: Combatant::new("Player", player_hp),
            enemies: enemies.iter().map(Enemy::from_spec).collect(),
            energy: ENERGY_PER_TURN,
            hand: Vec::new(),
            draw_pile,
            discard_pile: Vec::new(),
            turn: 1,
            rng_seed: seed,
            rng,
        };
        state.draw(HAND_SIZE);
        state
    }

    pub fn all_enemies_dead(&self) -> bool {
        self.enemies.iter().all(|e| e.combatant.is_dead())
    }

    pub fn is_over(&self) -> bool {
        self.player.is_dead() || self.all_enemies_dead()
    }

    /// Draws up to `n` cards, shuffling the discard pile into an empty draw pile.
    fn draw(&mut self, n: usize) {
        for _ in 0..n {
            if self.hand.len() >= MAX_HAND {
                break;
            }
            if self.draw_pile.is_empty() {
                if self.discard_pile.is_empty() {
                    break;
                }
                self.draw_pile.append(&mut self.discard_pile);
                self.draw_pile.shuffle(&mut self.rng);
            }
            // Top of the pile is the end of the vector.
            if let Some(card) = self.draw_pile.pop() {
                self.hand.push(card);
            }
        }
    }

    pub fn resolve_target(&self, target: Option<&str>) -> Result<usize, IllegalPlay> {
        let living: Vec<usize> = (0..self.enemies.len())
            .filter(|i| !self.enemies[*i].combatant.is_dead())
            .collect();
        match target {
            None if living.len() == 1 => Ok(living[0]),
            None => Err(IllegalPlay::BadTarget("<none>".into())),
            Some(t) => {
                let t = t.trim();
                let idx = t.parse::<usize>().ok().or_else(|| {
                    living
                        .iter()
                        .copied()
                        .find(|i| self.enemies[*i].combatant.name.eq_ignore_ascii_case(t))
                });
                match idx {
                    Some(i) if living.contains(&i) => Ok(i),
                    _ => Err(IllegalPlay::BadTarget(t.to_string())),
                }
            }
        }
    }

    /// Checks whether the hand card at `hand_index` can be played on `target`.
    pub fn check_play(&self, hand_index: usize, target: Option<usize>) -> Result<(), IllegalPlay> {
        if self.is_over() {
            return Err(IllegalPlay::BattleOver);
        }
        let card = self
            .hand
            .get(hand_index)
            .ok_or_else(|| IllegalPlay::NotInHand(format!("#{hand_index}")))?;
        if card.cost > self.energy {
            return Err(IllegalPlay::InsufficientEnergy {
                card: card.name.clone(),
                cost: card.cost,
                energy: self.energy,
            });
        }
        if card.needs_target() {
            let t = target.ok_or_else(|| IllegalPlay::BadTarget("<none>".into()))?;
            let enemy = self
                .enemies
                .get(t)
                .filter(|e| !e.combatant.is_dead())
                .ok_or_else(|| IllegalPlay::BadTarget(t.to_string()))?;
            if card.condition == Some(CardCondition::EnemyIntendsAttack)
                && !matches!(enemy.intent(), Intent::Attack(_))
            {
                return Err(IllegalPlay::ConditionUnmet(card.name.clone()));
            }
        }
        Ok(())
    }
}

/// Plays the hand card at `hand_index`. On error the state is unchanged.
pub fn play_card(
    state: &BattleState,
    hand_index: usize,
    target: Option<usize>,
) -> Result<BattleState, IllegalPlay> {
    state.check_play(hand_index, target)?;
    let mut next = state.clone();
    let card = next.hand.remove(hand_index);
    next.energy -= card.cost;
    if card.damage > 0 {
        let t = target.expect("checked");
        let enemy = &mut next.enemies[t].combatant;
        let amount = compute_damage(
            card.damage,
            next.player.strength,
            card.strength_multiplier,
            enemy.is_vulnerable(),
        );
        enemy.take_damage(amount);
    }
    if card.applies_vulnerable > 0 {
        let t = target.expect("checked");
        next.enemies[t].combatant.vulnerable_turns += card.applies_vulnerable;
    }
    next.player.block += card.block;
    next.player.strength += card.grants_strength;
    next.draw(card.draw as usize);
    next.discard_pile.push(card);
    Ok(next)
}

/// Plays the first hand card with the given name.
pub fn play_named(
    state: &BattleState,
    card_name: &str,
    target: Option<&str>,
) -> Result<BattleState, IllegalPlay> {
    let idx = state
        .hand
        .iter()
        .position(|c| c.name.eq_ignore_ascii_case(card_name.trim()))
        .ok_or_else(|| IllegalPlay::NotInHand(card_name.to_string()))?;
    let target = if state.hand[idx].needs_target() {
        Some(state.resolve_target(target)?)
    } else {
        None
    };
    play_card(state, idx, target)
}

/// Every living enemy performs its current intent and advances its script.
pub fn enemy_actions(state: &BattleState) -> BattleState {
    let mut next = state.clone();
    for i in 0..next.enemies.len() {
        if next.enemies[i].combatant.is_dead() || next.player.is_dead() {
            continue;
        }
        let enemy = &mut next.enemies[i];
        enemy.combatant.block = 0;
        match enemy.intent() {
            Intent::Attack(base) => {
                let amount = compute_damage(
                    base,
                    enemy.combatant.strength,
                    1,
                    next.player.is_vulnerable(),
                );
                next.player.take_damage(amount);
            }
            Intent::Debuff => next.player.vulnerable_turns += DEBUFF_VULNERABLE_TURNS,
            Intent::Block(n) => enemy.combatant.block += n,
        }
        let enemy = &mut next.enemies[i];
        enemy.intent_index = (enemy.intent_index + 1) % enemy.intent_script.len();
    }
    next
}

/// Enemy phase followed by the start of the next player turn.
pub fn enemy_turn(state: &BattleState) -> BattleState {
    let mut next = enemy_actions(state);
    next.player.vulnerable_turns = next.player.vulnerable_turns.saturating_sub(1);
    for e in &mut next.enemies {
        e.combatant.vulnerable_turns = e.combatant.vulnerable_turns.saturating_sub(1);
    }
    if !next.player.is_dead() {
        next.turn += 1;
        next.player.block = 0;
        next.energy = ENERGY_PER_TURN;
        next.draw(HAND_SIZE);
    }
    next
}

/// Discards the hand and runs the enemy turn.
pub fn end_turn(state: &BattleState) -> BattleState {
    let mut next = state.clone();
    let hand = std::mem::take(&mut next.hand);
    next.discard_pile.extend(hand);
    enemy_turn(&next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BattleOutcome {
    Win,
    Loss,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BattleResult {
    pub outcome: BattleOutcome,
    pub hp_remaining: u32,
    pub turns: u32,
    pub turn_cap_exceeded: bool,
}

/// One boss fight exposed through the generic [`Game`] interface.
#[derive(Debug, Clone)]
pub struct BattleGame {
    state: BattleState,
    turn_cap: u32,
    steps: usize,
    illegal_actions: usize,
    consecutive_illegal: usize,
    last_error: Option<String>,
    flags: Vec<String>,
    forfeited: bool,
}

impl BattleGame {
    pub fn new(boss: &BossSpec, deck: &[Card], player_hp: u32, seed: u64, turn_cap: u32) -> Self {
        assert!(!deck.is_empty(), "deck must be non-empty");
        BattleGame {
            state: BattleState::new(player_hp, std::slice::from_ref(boss), deck, seed),
            turn_cap: turn_cap.max(1),
            steps: 0,
            illegal_actions: 0,
            consecutive_illegal: 0,
            last_error: None,
            flags: Vec::new(),
            forfeited: false,
        }
    }

    pub fn state(&self) -> &BattleState {
        &self.state
    }

    fn turn_cap_exceeded(&self) -> bool {
        self.state.turn > self.turn_cap && !self.state.is_over()
    }

    fn finish_turn(&mut self) {
        self.state = end_turn(&self.state);
        if self.turn_cap_exceeded() && !self.flags.iter().any(|f| f == "turn_cap") {
            self.flags.push("turn_cap".into());
        }
    }

    pub fn legal_actions(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = Vec::new();
        for (i, card) in self.state.hand.iter().enumerate() {
            if seen.contains(&card.name) {
                continue;
            }
            seen.push(card.name.clone());
            if card.needs_target() {
                for (t, enemy) in self.state.enemies.iter().enumerate() {
                    if self.state.check_play(i, Some(t)).is_ok() {
                        out.push(
                            GameAction::Play {
                                card: card.name.clone(),
                                target: Some(enemy.combatant.name.clone()),
                            }
                            .canonical(),
                        );
                    }
                }
            } else if self.state.check_play(i, None).is_ok() {
                out.push(
                    GameAction::Play {
                        card: card.name.clone(),
                        target: None,
                    }
                    .canonical(),
                );
            }
        }
        out.push(GameAction::EndTurn.canonical());
        out
    }

    fn state_text(&self) -> String {
        let s = &self.state;
        let mut text = format!(
            "Turn {}\nCurrent Energy: {}\nCurrent HP: {}/{}\nCurrent Block: {}\nCurrent Strength: {}\n",
            s.turn, s.energy, s.player.hp, s.player.max_hp, s.player.block, s.player.strength
        );
        if s.player.is_vulnerable() {
            text.push_str(&format!(
                "You are vulnerable for {} more turn(s).\n",
                s.player.vulnerable_turns
            ));
        }
        text.push_str("\nEnemies:\n");
        for e in &s.enemies {
            if e.combatant.is_dead() {
                text.push_str(&format!("- {}: defeated\n", e.combatant.name));
                continue;
            }
            let mut line = format!(
                "- {}: {} HP, Block {}, Intent: {}",
                e.combatant.name,
                e.combatant.hp,
                e.combatant.block,
                e.intent().describe()
            );
            if e.combatant.is_vulnerable() {
                line.push_str(&format!(
                    ", vulnerable ({} turns)",
                    e.combatant.vulnerable_turns
                ));
            }
            text.push_str(&line);
            text.push('\n');
        }
        text.push_str("\nCards in hand:\n");
        for c in &s.hand {
            text.push_str(&format!("- {}\n", c.describe()));
        }
        text.push_str(&format!(
            "\nDraw pile: {} card(s). Discard pile: {} card(s).\n",
            s.draw_pile.len(),
            s.discard_pile.len()
        ));
        if let Some(err) = &self.last_error {
            text.push_str(&format!("\nYour previous action was not allowed: {err}\n"));
        }
        text
    }

    fn metrics(&self, won: bool) -> BTreeMap<String, f64> {
        let s = &self.state;
        let mut m = BTreeMap::new();
        let hp = if won { s.player.hp } else { 0 };
        m.insert("hp_remaining".into(), hp as f64);
        m.insert("turns".into(), s.turn.min(self.turn_cap) as f64);
        m.insert("illegal_actions".into(), self.illegal_actions as f64);
        let enemy_hp: u32 = s.enemies.iter().map(|e| e.combatant.hp).sum();
        m.insert("enemy_hp_remaining".into(), enemy_hp as f64);
        m
    }

    pub fn result(&self) -> Option<BattleResult> {
        self.outcome().map(|o| BattleResult {
            outcome: if o.won {
                BattleOutcome::Win
            } else {
                BattleOutcome::Loss
            },
            hp_remaining: o.metrics["hp_remaining"] as u32,
            turns: o.metrics["turns"] as u32,
            turn_cap_exceeded: o.flags.iter().any(|f| f == "turn_cap"),
        })
    }
}

impl Game for BattleGame {
    fn game_id(&self) -> &str {
        BATTLE
    }

    fn observe(&self) -> Observation {
        let s = &self.state;
        let enemies: Vec<_> = s
            .enemies
            .iter()
            .map(|e| {
                json!({
                    "name": e.combatant.name,
                    "hp": e.combatant.hp,
                    "max_hp": e.combatant.max_hp,
                    "block": e.combatant.block,
                    "strength": e.combatant.strength,
                    "vulnerable_turns": e.combatant.vulnerable_turns,
                    "intent": e.intent(),
                    "alive": !e.combatant.is_dead(),
                })
            })
            .collect();
        let mut structured = serde_json::Map::new();
        structured.insert("turn".into(), json!(s.turn));
        structured.insert("energy".into(), json!(s.energy));
        structured.insert("player".into(), json!(s.player));
        structured.insert("enemies".into(), json!(enemies));
        structured.insert("hand".into(), json!(s.hand));
        structured.insert("draw_pile_size".into(), json!(s.draw_pile.len()));
        structured.insert("discard_pile_size".into(), json!(s.discard_pile.len()));
        Observation {
            game_id: BATTLE.into(),
            turn_index: self.steps,
            state_text: self.state_text(),
            structured_state: structured,
            legal_actions: Some(self.legal_actions()),
        }
    }

    fn apply(&mut self, action: &str) -> Result<(), String> {
        if self.outcome().is_some() {
            return Err(IllegalPlay::BattleOver.to_string());
        }
        self.steps += 1;
        let parsed = GameAction::from_canonical(BATTLE, action).map_err(|e| e.to_string());
        let result = match parsed {
            Ok(GameAction::EndTurn) => {
                self.finish_turn();
                Ok(())
            }
            Ok(GameAction::Play { card, target }) => {
                play_named(&self.state, &card, target.as_deref())
                    .map(|next| self.state = next)
                    .map_err(|e| e.to_string())
            }
            Ok(other) => Err(format!("unsupported action {other}")),
            Err(e) => Err(e),
        };
        match &result {
            Ok(()) => {
                self.consecutive_illegal = 0;
                self.last_error = None;
            }
            Err(e) => {
                self.illegal_actions += 1;
                self.consecutive_illegal += 1;
                self.last_error = Some(e.clone());
                if self.consecutive_illegal >= MAX_CONSECUTIVE_ILLEGAL {
                    self.consecutive_illegal = 0;
                    self.finish_turn();
                }
            }
        }
        result
    }

    fn outcome(&self) -> Option<GameOutcome> {
        let won = self.state.all_enemies_dead() && !self.forfeited;
        if won || self.state.player.is_dead() || self.turn_cap_exceeded() || self.forfeited {
            Some(GameOutcome {
                won,
                metrics: self.metrics(won),
                flags: self.flags.clone(),
            })
        } else {
            None
        }
    }

    fn forfeit(&mut self, flag: &str) -> GameOutcome {
        self.forfeited = true;
        self.flags.push(flag.to_string());
        self.outcome().expect("forfeited game has an outcome")
    }

    fn live_metrics(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("player_hp".into(), self.state.player.hp as f64);
        m.insert("turn".into(), self.state.turn as f64);
        m
    }
}

/// Runs one fight to completion with `agent` choosing every action.
pub fn run_battle(
    boss: &BossSpec,
    deck: &[Card],
    agent: &mut dyn Agent,
    seed: u64,
    turn_cap: u32,
    player_hp: u32,
) -> Result<BattleResult, AgentError> {
    let mut game = BattleGame::new(boss, deck, player_hp, seed, turn_cap);
    play_game(&mut game, agent, usize::MAX)?;
    Ok(game.result().expect("finished game"))
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid fixture: {0}")]
    Invalid(String),
}

/// Boss roster, card library and named decks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    #[serde(default)]
    pub note: String,
    pub player_hp: u32,
    pub cards: Vec<Card>,
    pub decks: BTreeMap<String, Vec<String>>,
    pub bosses: Vec<BossSpec>,
}

impl Roster {
    pub fn default_roster() -> Self {
        Roster::from_json(DEFAULT_ROSTER).expect("bundled roster is valid")
    }

    pub fn default_json() -> &'static str {
        DEFAULT_ROSTER
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Roster::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let roster: Roster = serde_json::from_str(text)?;
        roster.validate()?;
        Ok(roster)
    }

    fn validate(&self) -> Result<(), FixtureError> {
        if self.bosses.is_empty() {
            return Err(FixtureError::Invalid("no bosses".into()));
        }
        for b in &self.bosses {
            if b.intent_script.is_empty() {
                return Err(FixtureError::Invalid(format!(
                    "{} has an empty intent script",
                    b.name
                )));
            }
            if b.hp == 0 {
                return Err(FixtureError::Invalid(format!("{} has 0 hp", b.name)));
            }
        }
        for c in &self.cards {
            if !c.is_valid() {
                return Err(FixtureError::Invalid(format!(
                    "card {} has no effect",
                    c.name
                )));
            }
        }
        for (name, cards) in &self.decks {
            if cards.is_empty() {
                return Err(FixtureError::Invalid(format!("deck {name} is empty")));
            }
            for c in cards {
                self.card(c).ok_or_else(|| {
                    FixtureError::Invalid(format!("deck {name}: unknown card {c}"))
                })?;
            }
        }
        Ok(())
    }

    pub fn card(&self, name: &str) -> Option<&Card> {
        self.cards
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn boss(&self, name: &str) -> Option<&BossSpec> {
        self.bosses
            .iter()
            .find(|b| b.name.eq_ignore_ascii_case(name))
    }

    pub fn deck(&self, name: &str) -> Result<Vec<Card>, FixtureError> {
        let names = self
            .decks
            .get(name)
            .ok_or_else(|| FixtureError::Invalid(format!("unknown deck {name}")))?;
        Ok(names
            .iter()
            .map(|n| self.card(n).expect("validated").clone())
            .collect())
    }
}
