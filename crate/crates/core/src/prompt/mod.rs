//! Four-layer prompt composition.
//!
//! A [`LayeredPrompt`] is assembled from one template per layer, looked up in
//! a [`TemplateCatalog`] by the context's task kind. Every variable comes from
//! the [`PromptContext`]; composition is a pure function of the context.

mod select;
pub mod template;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use select::{select_reasoning, select_tone, SelectionRules, SubjectCategory};
pub use template::{has_placeholder_marker, CatalogError, Template, TemplateCatalog, TemplateError, TemplateRecord};

use crate::model::{AssistantConfig, EducationLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tone {
    Encouraging,
    Friendly,
    Informative,
    Humorous,
    Neutral,
}

impl Tone {
    pub const ALL: [Tone; 5] = [Tone::Encouraging, Tone::Friendly, Tone::Informative, Tone::Humorous, Tone::Neutral];

    fn guidance(self) -> &'static str {
        match self {
            Tone::Encouraging => "be warm and reassuring, acknowledge effort and treat mistakes as normal",
            Tone::Friendly => "be approachable and conversational, with plain words",
            Tone::Informative => "be precise and focused on facts and exam-relevant detail",
            Tone::Humorous => "keep it light with occasional gentle humor that never distracts from the content",
            Tone::Neutral => "be clear and even-handed",
        }
    }
}

impl fmt::Display for Tone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format!("{self:?}").to_lowercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReasoningStrategy {
    Deductive,
    Inductive,
    Analogical,
    Causal,
    Abductive,
}

impl ReasoningStrategy {
    pub const ALL: [ReasoningStrategy; 5] = [
        ReasoningStrategy::Deductive,
        ReasoningStrategy::Inductive,
        ReasoningStrategy::Analogical,
        ReasoningStrategy::Causal,
        ReasoningStrategy::Abductive,
    ];

    fn guidance(self) -> &'static str {
        match self {
            ReasoningStrategy::Deductive => "start from definitions and general rules and derive each conclusion step by step",
            ReasoningStrategy::Inductive => "start from concrete observations or examples and generalize to the pattern behind them",
            ReasoningStrategy::Analogical => "tie every new idea to something the learner already knows through an explicit analogy",
            ReasoningStrategy::Causal => "make cause and effect explicit, showing how each step leads to the next",
            ReasoningStrategy::Abductive => "open with a puzzling observation and guide the learner toward the most plausible explanation",
        }
    }
}

impl fmt::Display for ReasoningStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format!("{self:?}").to_lowercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    Plan,
    Deliver,
    Feedback,
    Quiz,
    Review,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [TaskKind::Plan, TaskKind::Deliver, TaskKind::Feedback, TaskKind::Quiz, TaskKind::Review];

    fn intent(self) -> &'static str {
        match self {
            TaskKind::Plan => "lesson planning",
            TaskKind::Deliver => "micro-lesson delivery",
            TaskKind::Feedback => "feedback on a practice answer",
            TaskKind::Quiz => "quiz",
            TaskKind::Review => "targeted review",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    GlobalContext,
    InstructionalLogic,
    AdaptiveVariables,
    PostInteraction,
}

impl Layer {
    pub const ORDER: [Layer; 4] = [
        Layer::GlobalContext,
        Layer::InstructionalLogic,
        Layer::AdaptiveVariables,
        Layer::PostInteraction,
    ];
}

/// Multi-stage tutoring tasks that expand into a chain of prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainKind {
    FullSession,
    QuizOnly,
    ReviewOnly,
}

impl FromStr for ChainKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FullSession" => Ok(ChainKind::FullSession),
            "QuizOnly" => Ok(ChainKind::QuizOnly),
            "ReviewOnly" => Ok(ChainKind::ReviewOnly),
            other => Err(PromptError::UnknownTaskKind(other.to_owned())),
        }
    }
}

pub fn chain_for(kind: ChainKind) -> Vec<TaskKind> {
    match kind {
        ChainKind::FullSession => vec![TaskKind::Plan, TaskKind::Deliver, TaskKind::Feedback, TaskKind::Quiz],
        ChainKind::QuizOnly => vec![TaskKind::Quiz],
        ChainKind::ReviewOnly => vec![TaskKind::Review],
    }
}

/// Parses a chain name and returns its ordered stages.
pub fn chain_for_task(kind: &str) -> Result<Vec<TaskKind>, PromptError> {
    kind.parse().map(chain_for)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeSource {
    Practice,
    Quiz,
}

/// A graded practice or quiz answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub source: OutcomeSource,
    pub correct: bool,
}

/// Two most recent outcomes both incorrect.
pub fn is_struggling(history: &[Outcome]) -> bool {
    history.len() >= 2 && history[history.len() - 2..].iter().all(|o| !o.correct)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptContext {
    pub assistant_config: AssistantConfig,
    pub task_kind: TaskKind,
    /// `None` leaves the `learner_level` variable unbound.
    pub learner_level: Option<EducationLevel>,
    pub topic: String,
    pub session_index: u32,
    pub progress_summary: String,
    pub performance_history: Vec<Outcome>,
    pub retrieved_context: String,
    pub tone_override: Option<Tone>,
    pub reasoning_override: Option<ReasoningStrategy>,
}

impl PromptContext {
    pub fn tone(&self) -> Tone {
        self.tone_override.unwrap_or(if is_struggling(&self.performance_history) {
            Tone::Encouraging
        } else {
            self.assistant_config.default_tone
        })
    }

    pub fn reasoning(&self) -> ReasoningStrategy {
        self.reasoning_override.unwrap_or(self.assistant_config.default_reasoning)
    }

    fn bindings(&self) -> BTreeMap<String, String> {
        let mut b = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            b.insert(k.to_owned(), neutralize_markers(&v));
        };
        let tone = self.tone();
        let reasoning = self.reasoning();
        put("intent", self.task_kind.intent().to_owned());
        put("topic", self.topic.trim().to_owned());
        put("session_index", self.session_index.to_string());
        put("session_target_minutes", self.assistant_config.session_target_minutes.to_string());
        put("content_language", self.assistant_config.content_language.clone());
        put("tone", tone.to_string());
        put("tone_guidance", tone.guidance().to_owned());
        put("reasoning", reasoning.to_string());
        put("reasoning_guidance", reasoning.guidance().to_owned());
        if let Some(level) = self.learner_level {
            put("learner_level", level.label().to_owned());
        }
        put(
            "progress_summary",
            non_empty_or(&self.progress_summary, "nothing recorded yet"),
        );
        put("performance_summary", summarize_performance(&self.performance_history));
        put(
            "retrieved_context",
            non_empty_or(&self.retrieved_context, "(no course material retrieved for this turn)"),
        );
        b
    }
}

fn non_empty_or(text: &str, fallback: &str) -> String {
    let t = text.trim();
    if t.is_empty() { fallback.to_owned() } else { t.to_owned() }
}

/// Values come from learners and documents; a `{{x}}` inside them must not
/// survive into the prompt as if it were an unresolved marker.
fn neutralize_markers(value: &str) -> String {
    value.replace("{{", "{ {").replace("}}", "} }")
}

fn summarize_performance(history: &[Outcome]) -> String {
    if history.is_empty() {
        return "no graded answers yet".to_owned();
    }
    let correct = history.iter().filter(|o| o.correct).count();
    let recent: Vec<&str> = history
        .iter()
        .rev()
        .take(3)
        .map(|o| if o.correct { "correct" } else { "incorrect" })
        .collect();
    format!(
        "{correct} of {} graded answers correct; most recent first: {}",
        history.len(),
        recent.join(", ")
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayeredPrompt {
    pub global_context: String,
    pub instructional_logic: String,
    pub adaptive_variables: String,
    pub post_interaction: String,
    pub rendered: String,
}

impl LayeredPrompt {
    pub const SEPARATOR: &'static str = "\n\n";

    fn from_blocks([global, instructional, adaptive, post]: [String; 4]) -> Self {
        let rendered = [&global, &instructional, &adaptive, &post]
            .map(String::as_str)
            .join(Self::SEPARATOR);
        LayeredPrompt {
            global_context: global,
            instructional_logic: instructional,
            adaptive_variables: adaptive,
            post_interaction: post,
            rendered,
        }
    }

    /// Blocks in their fixed order.
    pub fn blocks(&self) -> [(Layer, &str); 4] {
        [
            (Layer::GlobalContext, &self.global_context),
            (Layer::InstructionalLogic, &self.instructional_logic),
            (Layer::AdaptiveVariables, &self.adaptive_variables),
            (Layer::PostInteraction, &self.post_interaction),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("unknown task kind `{0}`")]
    UnknownTaskKind(String),
    #[error("unresolved variable `{0}`")]
    UnresolvedVariable(String),
    #[error("template for {0:?} rendered empty")]
    EmptyLayer(Layer),
    #[error("session index must start at 1")]
    InvalidSessionIndex,
}

impl From<TemplateError> for PromptError {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::UnresolvedVariable(v) => PromptError::UnresolvedVariable(v),
            // catalog templates are parsed at load time; only lookups can fail here
            TemplateError::UnknownTemplate(id) => PromptError::UnknownTaskKind(id),
            TemplateError::Malformed { .. } => PromptError::UnknownTaskKind(e.to_string()),
        }
    }
}

pub fn compose_prompt(catalog: &TemplateCatalog, ctx: &PromptContext) -> Result<LayeredPrompt, PromptError> {
    if ctx.session_index == 0 {
        return Err(PromptError::InvalidSessionIndex);
    }
    if !catalog.supports(ctx.task_kind) {
        return Err(PromptError::UnknownTaskKind(format!("{:?}", ctx.task_kind)));
    }
    let bindings = ctx.bindings();
    let mut blocks: [String; 4] = Default::default();
    for (slot, layer) in blocks.iter_mut().zip(Layer::ORDER) {
        let template = catalog.slot(ctx.task_kind, layer).expect("checked by supports");
        let text = template.render(&bindings)?.trim().to_owned();
        if text.is_empty() {
            return Err(PromptError::EmptyLayer(layer));
        }
        *slot = text;
    }
    Ok(LayeredPrompt::from_blocks(blocks))
}
