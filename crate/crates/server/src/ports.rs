//! Tutor ports backed by the LLM gateway.
//!
//! The driver is synchronous, so these run on a blocking thread and wait on
//! the gateway through a runtime handle.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use tokio::runtime::Handle;
use tutorflow_core::model::{AssistantConfig, EducationLevel, SupportRequest};
use tutorflow_core::prompt::{compose_prompt, PromptContext, TaskKind, TemplateCatalog};
use tutorflow_core::rag::CorpusIndex;
use tutorflow_core::tutor::{
    extract_concepts, parse_generated_questions, parse_verdict, plan_lessons, ExactMatchJudge, Judgement, LessonPlan,
    PortError, PracticeFeedback, QuizQuestion, QuizRequest, SessionState, TutorPorts,
};
use tutorflow_core::{PlanId, SupportId};
use tutorflow_gateway::{ChatMessage, Gateway};

/// Retrieved chunks per turn.
pub const RETRIEVAL_K: usize = 4;
/// Token budget for fused context in a prompt.
pub const CONTEXT_BUDGET: usize = 600;

/// Prompt inputs that do not change during a request.
#[derive(Clone)]
pub struct PromptInputs {
    pub catalog: Arc<TemplateCatalog>,
    pub corpus: Arc<RwLock<CorpusIndex>>,
    pub config: AssistantConfig,
    pub level: EducationLevel,
    pub support_id: SupportId,
}

impl PromptInputs {
    /// Layered system prompt for `task` with material retrieved for `query`.
    pub fn system_prompt(&self, state: &SessionState, task: TaskKind, query: &str) -> Result<String, PortError> {
        let retrieved_context = {
            let corpus = self.corpus.read().unwrap();
            let hits = corpus.retrieve(query, RETRIEVAL_K, Some(&self.support_id));
            corpus.fuse_context(&hits, CONTEXT_BUDGET)
        };
        let ctx = PromptContext {
            assistant_config: self.config.clone(),
            task_kind: task,
            learner_level: Some(self.level),
            topic: state.current_title().to_owned(),
            session_index: state.current_index.max(1),
            progress_summary: state.progress_summary(),
            performance_history: state.outcomes(),
            retrieved_context,
            tone_override: Some(state.tone_current),
            reasoning_override: Some(state.reasoning_current),
        };
        compose_prompt(&self.catalog, &ctx).map(|p| p.rendered).map_err(|e| PortError(e.to_string()))
    }

    fn render(&self, id: &str, vars: &[(&str, String)]) -> Result<String, PortError> {
        let bindings: BTreeMap<String, String> = vars.iter().map(|(k, v)| ((*k).to_owned(), v.clone())).collect();
        self.catalog.render_template(id, &bindings).map_err(|e| PortError(e.to_string()))
    }
}

pub struct GatewayPorts {
    pub handle: Handle,
    pub gateway: Gateway,
    pub inputs: PromptInputs,
    pub request: SupportRequest,
    pub next_plan_id: Box<dyn FnMut() -> PlanId + Send>,
    /// Set when a rejected plan was replaced, so the caller can store it.
    pub revised: Option<LessonPlan>,
}

impl GatewayPorts {
    fn ask(&self, system: String, user: String) -> Result<String, PortError> {
        let stream = self.gateway.complete(vec![ChatMessage::system(system), ChatMessage::user(user)], Default::default());
        let (_, outcome) = self.handle.block_on(stream.collect_all());
        outcome.map(|(text, _)| text).map_err(|e| PortError(e.to_string()))
    }
}

impl TutorPorts for GatewayPorts {
    fn deliver_lesson(&mut self, state: &SessionState) -> Result<String, PortError> {
        let system = self.inputs.system_prompt(state, TaskKind::Deliver, state.current_title())?;
        self.ask(system, format!("Start the lesson on {}.", state.current_title()))
    }

    fn practice_feedback(&mut self, state: &SessionState, answer: &str) -> Result<PracticeFeedback, PortError> {
        let system = self.inputs.system_prompt(state, TaskKind::Feedback, answer)?;
        let user = self.inputs.render("practice.submission", &[("answer", answer.to_owned())])?;
        let reply = self.ask(system, user)?;
        Ok(match parse_verdict(&reply) {
            Some((correct, rest)) if !rest.is_empty() => PracticeFeedback { text: rest, correct: Some(correct) },
            Some((correct, _)) => PracticeFeedback { text: reply, correct: Some(correct) },
            None => PracticeFeedback { text: reply, correct: None },
        })
    }

    fn generate_questions(&mut self, request: &QuizRequest) -> Result<Vec<QuizQuestion>, PortError> {
        let prior = if request.prior_topics.is_empty() { "none".to_owned() } else { request.prior_topics.join(", ") };
        let user = self.inputs.render(
            "quiz.generate",
            &[
                ("total", (request.current_count + request.prior_count).to_string()),
                ("topic", request.topic.clone()),
                ("current_count", request.current_count.to_string()),
                ("prior_count", request.prior_count.to_string()),
                ("prior_topics", prior),
            ],
        )?;
        let system = "You write short, unambiguous quiz questions with brief answer keys.".to_owned();
        let reply = self.ask(system, user)?;
        parse_generated_questions(&reply).map_err(PortError)
    }

    /// Asks the model for a verdict; an unparseable reply falls back to an
    /// exact comparison with the answer key.
    fn judge_answer(&mut self, question: &QuizQuestion, given: &str) -> Result<Judgement, PortError> {
        let user = self.inputs.render(
            "answer.judge",
            &[
                ("question", question.question_text.clone()),
                ("expected", question.expected_answer_key.clone()),
                ("given", given.to_owned()),
            ],
        )?;
        let system = "You grade quiz answers fairly and briefly.".to_owned();
        let reply = self.ask(system, user)?;
        let (correct, feedback) = match parse_verdict(&reply) {
            Some((c, fb)) if !fb.is_empty() => (c, fb),
            Some((c, _)) => (c, if c { "Correct.".to_owned() } else { "Not quite.".to_owned() }),
            None => ExactMatchJudge.judge(question, given),
        };
        Ok(Judgement { correct, feedback })
    }

    fn revise_plan(&mut self, state: &SessionState) -> Result<Option<LessonPlan>, PortError> {
        let current: Vec<&str> = state.lessons.iter().map(|l| l.title.as_str()).collect();
        let user = format!(
            "The learner rejected this lesson plan for \"{}\": {}. Propose a revised plan as a markdown list of headings, one `# Title` line per lesson, and nothing else.",
            self.request.learning_objective,
            current.join(", ")
        );
        let system = "You design short lesson sequences.".to_owned();
        let reply = self.ask(system, user)?;
        let concepts = extract_concepts(&reply);
        if concepts.is_empty() {
            return Ok(None);
        }
        let plan = plan_lessons(&self.request, &concepts, (self.next_plan_id)()).map_err(|e| PortError(e.to_string()))?;
        self.revised = Some(plan.clone());
        Ok(Some(plan))
    }
}
