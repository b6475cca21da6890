//! Synchronous driver that carries out transition actions through ports.
//!
//! Port calls may block. The HTTP service runs the driver on a blocking
//! thread and bridges the ports to its async LLM gateway.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fsm::{advance, TransitionError};
use super::quiz::{assemble_quiz, QuizError, QuizQuestion, QuizRequest};
use super::{Action, LearnerEvent, LessonPlan, SessionEvent, SessionState, SystemEvent};
use crate::prompt::{SelectionRules, TaskKind};
use crate::TimestampMs;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct PortError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub correct: bool,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PracticeFeedback {
    pub text: String,
    /// `None` when the feedback does not grade the answer.
    pub correct: Option<bool>,
}

pub trait TutorPorts {
    fn deliver_lesson(&mut self, state: &SessionState) -> Result<String, PortError>;
    fn practice_feedback(&mut self, state: &SessionState, answer: &str) -> Result<PracticeFeedback, PortError>;
    fn generate_questions(&mut self, request: &QuizRequest) -> Result<Vec<QuizQuestion>, PortError>;
    fn judge_answer(&mut self, question: &QuizQuestion, given: &str) -> Result<Judgement, PortError>;
    fn revise_plan(&mut self, _state: &SessionState) -> Result<Option<LessonPlan>, PortError> {
        Ok(None)
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Quiz(#[from] QuizError),
    #[error("backend call failed: {0}")]
    Port(#[from] PortError),
}

/// Outcome of one learner event after all follow-up effects ran.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: SessionState,
    pub actions: Vec<Action>,
    /// Tutor output produced along the way (lessons, feedback).
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SessionDriver {
    pub rules: SelectionRules,
}

impl SessionDriver {
    pub fn new(rules: SelectionRules) -> Self {
        SessionDriver { rules }
    }

    /// Runs `event` and every effect it triggers. Any failure leaves the
    /// caller's state as it was.
    pub fn handle(
        &self,
        ports: &mut dyn TutorPorts,
        state: &SessionState,
        event: LearnerEvent,
        at: TimestampMs,
    ) -> Result<Step, DriverError> {
        let practice = match &event {
            LearnerEvent::SubmitPractice { text } => Some(text.clone()),
            _ => None,
        };
        let (mut current, first) = advance(state, SessionEvent::Learner(event), at)?;
        let mut queue: VecDeque<Action> = first.into();
        let mut done = Vec::new();
        let mut messages = Vec::new();

        while let Some(action) = queue.pop_front() {
            let follow_up = match &action {
                Action::ComposePrompt { task: TaskKind::Deliver, .. } => {
                    messages.push(ports.deliver_lesson(&current)?);
                    Some(SystemEvent::DeliveryComplete)
                }
                Action::ComposePrompt { task: TaskKind::Feedback, .. } => {
                    let fb = ports.practice_feedback(&current, practice.as_deref().unwrap_or_default())?;
                    messages.push(fb.text);
                    Some(SystemEvent::FeedbackDelivered { correct: fb.correct })
                }
                Action::StartQuiz { request } => {
                    let generated = ports.generate_questions(request)?;
                    let quiz = assemble_quiz(request, generated, current.next_quiz_id())?;
                    Some(SystemEvent::QuizGenerated { quiz })
                }
                Action::GradeAnswer { question_index, given } => {
                    let question = current
                        .quiz
                        .as_ref()
                        .and_then(|q| q.questions.get(*question_index))
                        .ok_or(QuizError::QuizAlreadyComplete)?;
                    let j = ports.judge_answer(question, given)?;
                    messages.push(j.feedback.clone());
                    Some(SystemEvent::AnswerJudged {
                        question_index: *question_index,
                        correct: j.correct,
                        feedback: j.feedback,
                    })
                }
                Action::RevisePlan => {
                    if let Some(plan) = ports.revise_plan(&current)? {
                        current.replace_plan(&plan, &self.rules);
                    }
                    None
                }
                _ => None,
            };
            done.push(action);
            if let Some(ev) = follow_up {
                let (next, more) = advance(&current, SessionEvent::System(ev), at)?;
                current = next;
                queue.extend(more);
            }
        }
        Ok(Step { state: current, actions: done, messages })
    }
}
