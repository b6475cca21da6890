use serde::{Deserialize, Serialize};

use super::SessionState;
use crate::prompt::{is_struggling, ReasoningStrategy, Tone};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adaptation {
    pub tone: Tone,
    pub reasoning: ReasoningStrategy,
}

/// Two incorrect outcomes in a row switch to an encouraging tone; an
/// abstract lesson switches to analogies. Without either signal the
/// current strategy is kept.
pub fn adapt_strategy(state: &SessionState) -> Adaptation {
    let tone = if is_struggling(&state.outcomes()) { Tone::Encouraging } else { state.tone_current };
    let reasoning = if state.current_lesson().is_some_and(|l| l.is_abstract) {
        ReasoningStrategy::Analogical
    } else {
        state.reasoning_current
    };
    Adaptation { tone, reasoning }
}
