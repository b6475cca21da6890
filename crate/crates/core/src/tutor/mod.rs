//! The tutoring state machine.
//!
//! ```text
//!  PlanProposed --ApprovePlan--> PlanApproved --RequestDelivery--> Delivering
//!       ^  |                                                           |
//!       +--+ RejectPlan                                   DeliveryComplete
//!                                                                      v
//!  PostSessionChoice <--FeedbackDelivered-- FeedbackGiven <--SubmitPractice-- PracticeAwaitingInput
//!    |          |
//!    | ChooseNext --> Delivering (next lesson) | Completed
//!    | ChooseQuiz --> QuizInProgress --(5 graded answers)--> ReviewOffered | Reinforcing | next lesson
//!
//!  ReviewOffered --AcceptReview--> Reinforcing     ReviewOffered --DeclineReview--> next lesson
//!  Reinforcing --ChooseQuiz--> QuizInProgress      Reinforcing --ChooseNext--> next lesson
//! ```
//!
//! [`advance`] is pure: it returns the next state and the side effects the
//! caller must carry out. Effects that produce data (quiz questions, grades,
//! feedback) come back in as [`SystemEvent`]s.

mod adapt;
mod driver;
mod fsm;
mod plan;
mod quiz;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use adapt::{adapt_strategy, Adaptation};
pub use driver::{DriverError, Judgement, PortError, PracticeFeedback, SessionDriver, Step, TutorPorts};
pub use fsm::{advance, TransitionError};
pub use plan::{extract_concepts, plan_lessons, LessonPlan, PlanError, PlanStatus, PlannedSession, MAX_HEURISTIC_SESSIONS};
pub use quiz::{
    advance_or_reinforce, assemble_quiz, grade_answer, parse_generated_questions, parse_verdict, quiz_request,
    start_quiz, ExactMatchJudge, QuestionGenerator, QuestionOrigin, QuizAnswer, QuizDecision, QuizError,
    QuizQuestion, QuizRequest, QuizState, ADVANCE_THRESHOLD, MAX_REINFORCE_ROUNDS, QUIZ_LENGTH,
};

use crate::ids::{PlanId, QuizId, SessionId};
use crate::model::AssistantConfig;
use crate::prompt::{Outcome, OutcomeSource, ReasoningStrategy, SelectionRules, TaskKind, Tone};
use crate::TimestampMs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    PlanProposed,
    PlanApproved,
    Delivering,
    PracticeAwaitingInput,
    FeedbackGiven,
    PostSessionChoice,
    QuizInProgress,
    ReviewOffered,
    Reinforcing,
    Completed,
}

impl Phase {
    pub const ALL: [Phase; 10] = [
        Phase::PlanProposed,
        Phase::PlanApproved,
        Phase::Delivering,
        Phase::PracticeAwaitingInput,
        Phase::FeedbackGiven,
        Phase::PostSessionChoice,
        Phase::QuizInProgress,
        Phase::ReviewOffered,
        Phase::Reinforcing,
        Phase::Completed,
    ];

    /// Phases in which free-form chat with the tutor is allowed.
    pub fn accepts_dialogue(self) -> bool {
        matches!(
            self,
            Phase::Delivering | Phase::PracticeAwaitingInput | Phase::QuizInProgress | Phase::Reinforcing
        )
    }

    /// Prompt task used for chat turns in this phase.
    pub fn dialogue_task(self) -> Option<TaskKind> {
        match self {
            Phase::Delivering | Phase::PracticeAwaitingInput => Some(TaskKind::Deliver),
            Phase::QuizInProgress => Some(TaskKind::Quiz),
            Phase::Reinforcing => Some(TaskKind::Review),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Events a learner can send.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum LearnerEvent {
    ApprovePlan,
    RejectPlan,
    RequestDelivery,
    SubmitPractice { text: String },
    ChooseNext,
    ChooseQuiz,
    SubmitAnswer { text: String },
    AcceptReview,
    DeclineReview,
}

impl LearnerEvent {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerEvent::ApprovePlan => "ApprovePlan",
            LearnerEvent::RejectPlan => "RejectPlan",
            LearnerEvent::RequestDelivery => "RequestDelivery",
            LearnerEvent::SubmitPractice { .. } => "SubmitPractice",
            LearnerEvent::ChooseNext => "ChooseNext",
            LearnerEvent::ChooseQuiz => "ChooseQuiz",
            LearnerEvent::SubmitAnswer { .. } => "SubmitAnswer",
            LearnerEvent::AcceptReview => "AcceptReview",
            LearnerEvent::DeclineReview => "DeclineReview",
        }
    }
}

/// Results of effects, fed back into the machine by the driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum SystemEvent {
    DeliveryComplete,
    FeedbackDelivered { correct: Option<bool> },
    QuizGenerated { quiz: QuizState },
    AnswerJudged { question_index: usize, correct: bool, feedback: String },
}

impl SystemEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SystemEvent::DeliveryComplete => "DeliveryComplete",
            SystemEvent::FeedbackDelivered { .. } => "FeedbackDelivered",
            SystemEvent::QuizGenerated { .. } => "QuizGenerated",
            SystemEvent::AnswerJudged { .. } => "AnswerJudged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "origin", content = "event")]
pub enum SessionEvent {
    Learner(LearnerEvent),
    System(SystemEvent),
}

impl SessionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::Learner(e) => e.name(),
            SessionEvent::System(e) => e.name(),
        }
    }
}

impl From<LearnerEvent> for SessionEvent {
    fn from(e: LearnerEvent) -> Self {
        SessionEvent::Learner(e)
    }
}

impl From<SystemEvent> for SessionEvent {
    fn from(e: SystemEvent) -> Self {
        SessionEvent::System(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub event: SessionEvent,
    pub at: TimestampMs,
}

/// Side effects requested by a transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action")]
pub enum Action {
    MarkPlan { status: PlanStatus },
    RevisePlan,
    ComposePrompt { task: TaskKind, session_index: u32 },
    StartQuiz { request: QuizRequest },
    GradeAnswer { question_index: usize, given: String },
    QuizFinished { quiz: QuizState, decision: QuizDecision },
    SessionsComplete,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::MarkPlan { .. } => "mark_plan",
            Action::RevisePlan => "revise_plan",
            Action::ComposePrompt { .. } => "compose_prompt",
            Action::StartQuiz { .. } => "start_quiz",
            Action::GradeAnswer { .. } => "grade_answer",
            Action::QuizFinished { .. } => "quiz_finished",
            Action::SessionsComplete => "sessions_complete",
        }
    }
}

/// One lesson of the approved plan as the session sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lesson {
    pub title: String,
    /// Flagged by the abstract-concept keyword table.
    pub is_abstract: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: SessionId,
    pub plan_id: PlanId,
    /// 1-based index of the lesson in progress.
    pub current_index: u32,
    pub lessons: Vec<Lesson>,
    pub phase: Phase,
    pub tone_current: Tone,
    pub reasoning_current: ReasoningStrategy,
    pub reinforce_rounds: u32,
    #[serde(default)]
    pub review_recommended: bool,
    #[serde(default)]
    pub quiz: Option<QuizState>,
    /// Quiz answer submitted and waiting for its grade.
    #[serde(default)]
    pub pending_answer: Option<String>,
    pub trace: Vec<TraceEntry>,
}

impl SessionState {
    pub fn new(session_id: SessionId, plan: &LessonPlan, config: &AssistantConfig, rules: &SelectionRules) -> Self {
        SessionState {
            session_id,
            plan_id: plan.plan_id.clone(),
            current_index: 1,
            lessons: lessons_for(plan, rules),
            phase: Phase::PlanProposed,
            tone_current: config.default_tone,
            reasoning_current: config.default_reasoning,
            reinforce_rounds: 0,
            review_recommended: false,
            quiz: None,
            pending_answer: None,
            trace: Vec::new(),
        }
    }

    /// Swaps in a revised plan. Only possible before approval.
    pub fn replace_plan(&mut self, plan: &LessonPlan, rules: &SelectionRules) -> bool {
        if self.phase != Phase::PlanProposed {
            return false;
        }
        self.plan_id = plan.plan_id.clone();
        self.lessons = lessons_for(plan, rules);
        true
    }

    pub fn total_sessions(&self) -> u32 {
        self.lessons.len() as u32
    }

    pub fn current_lesson(&self) -> Option<&Lesson> {
        self.lessons.get(self.current_index.checked_sub(1)? as usize)
    }

    pub fn current_title(&self) -> &str {
        self.current_lesson().map(|l| l.title.as_str()).unwrap_or_default()
    }

    /// Graded practice and quiz answers, oldest first.
    pub fn outcomes(&self) -> Vec<Outcome> {
        self.trace
            .iter()
            .filter_map(|t| match &t.event {
                SessionEvent::System(SystemEvent::FeedbackDelivered { correct: Some(c) }) => {
                    Some(Outcome { source: OutcomeSource::Practice, correct: *c })
                }
                SessionEvent::System(SystemEvent::AnswerJudged { correct, .. }) => {
                    Some(Outcome { source: OutcomeSource::Quiz, correct: *correct })
                }
                _ => None,
            })
            .collect()
    }

    pub fn quizzes_started(&self) -> usize {
        self.trace
            .iter()
            .filter(|t| matches!(t.event, SessionEvent::System(SystemEvent::QuizGenerated { .. })))
            .count()
    }

    /// Deterministic id for the next quiz of this session.
    pub fn next_quiz_id(&self) -> QuizId {
        QuizId::new(format!("{}-quiz-{}", self.session_id, self.quizzes_started() + 1))
    }

    pub fn progress_summary(&self) -> String {
        if self.lessons.is_empty() {
            return String::new();
        }
        let done: Vec<&str> = self
            .lessons
            .iter()
            .take(self.current_index.saturating_sub(1) as usize)
            .map(|l| l.title.as_str())
            .collect();
        if self.phase == Phase::Completed {
            return format!("all {} lessons completed", self.lessons.len());
        }
        if done.is_empty() {
            format!("lesson {} of {}: {}", self.current_index, self.lessons.len(), self.current_title())
        } else {
            format!(
                "lesson {} of {}: {}; already covered: {}",
                self.current_index,
                self.lessons.len(),
                self.current_title(),
                done.join(", ")
            )
        }
    }
}

fn lessons_for(plan: &LessonPlan, rules: &SelectionRules) -> Vec<Lesson> {
    plan.sessions
        .iter()
        .map(|s| Lesson { title: s.concept_title.clone(), is_abstract: rules.is_abstract(&s.concept_title) })
        .collect()
}

/// A line of the tutoring dialogue, kept alongside the session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub role: Speaker,
    pub text: String,
    pub at: TimestampMs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Learner,
    Tutor,
}
