use std::sync::Arc;

use super::action::{parse_action, WORDLE};
use super::prompt::{bracketize, build_prompt, in_play_words};
use super::{Agent, AgentAction, AgentConfig, AgentContext, AgentError, ChatMessage, Observation};
use super::{Transcript, Transport};

/// Prompted chat-model player with corrective retries on unparseable replies.
pub struct LlmAgent {
    config: AgentConfig,
    ctx: AgentContext,
    transport: Arc<dyn Transport>,
    transcript: Transcript,
}

impl LlmAgent {
    pub fn new(config: AgentConfig, ctx: AgentContext, transport: Arc<dyn Transport>) -> Self {
        LlmAgent {
            config,
            ctx,
            transport,
            transcript: Transcript::new(),
        }
    }

    fn correction(game_id: &str, reason: &str) -> String {
        let form = match game_id {
            WORDLE => "GUESS: [A, B, C, D, E]",
            super::action::BATTLE => "PLAY: <card> | TARGET: <enemy>, PLAY: <card>, or END TURN",
            _ => "ACTION: <action>",
        };
        format!(
            "I could not read an action from your reply ({reason}). \
             End your reply with exactly one line of the form {form}."
        )
    }
}

impl Agent for LlmAgent {
    fn act(&mut self, obs: &Observation) -> Result<AgentAction, AgentError> {
        let bundle = self.ctx.bundle_for(&obs.game_id);
        let mut messages = build_prompt(&self.config, &bundle, obs, &self.transcript)?;
        let words = if obs.game_id == WORDLE {
            in_play_words(obs)
        } else {
            Vec::new()
        };
        let observation = messages
            .last()
            .expect("prompt ends with the observation")
            .clone();
        self.transcript.push(observation);

        let attempts = self.config.max_parse_retries + 1;
        let mut reason = String::new();
        for _ in 0..attempts {
            let completion = self.transport.complete(
                &messages,
                &self.config.model_name,
                self.config.temperature,
            )?;
            self.transcript.push_with_usage(
                ChatMessage::assistant(completion.text.clone()),
                completion.prompt_tokens,
                completion.completion_tokens,
            );
            match parse_action(&completion.text, &obs.game_id) {
                Ok(action) => return Ok(action),
                Err(e) => {
                    reason = e.to_string();
                    let fix = ChatMessage::user(Self::correction(&obs.game_id, &reason));
                    messages.push(ChatMessage::assistant(bracketize(&completion.text, &words)));
                    messages.push(fix.clone());
                    self.transcript.push(fix);
                }
            }
        }
        Err(AgentError::ProtocolFailure { reason, attempts })
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}
