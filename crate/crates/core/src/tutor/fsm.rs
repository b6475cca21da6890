use thiserror::Error;

use super::adapt::adapt_strategy;
use super::quiz::{advance_or_reinforce, grade_answer, quiz_request, QuizDecision, QuizError, QUIZ_LENGTH};
use super::{Action, LearnerEvent, Phase, PlanStatus, SessionEvent, SessionState, SystemEvent, TraceEntry};
use crate::prompt::TaskKind;
use crate::TimestampMs;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("event {event} is not allowed in phase {phase}")]
    InvalidTransition { phase: Phase, event: &'static str },
    #[error(transparent)]
    Quiz(#[from] QuizError),
}

/// Applies one event. On success the event is appended to the trace and
/// the strategy is re-adapted; on error the input state is untouched.
pub fn advance(
    state: &SessionState,
    event: SessionEvent,
    at: TimestampMs,
) -> Result<(SessionState, Vec<Action>), TransitionError> {
    use LearnerEvent as L;
    use Phase as P;
    use SystemEvent as S;

    let invalid = || TransitionError::InvalidTransition { phase: state.phase, event: event.name() };
    let mut next = state.clone();
    let mut actions = Vec::new();

    match (state.phase, &event) {
        (P::PlanProposed, SessionEvent::Learner(L::ApprovePlan)) => {
            next.phase = P::PlanApproved;
            actions.push(Action::MarkPlan { status: PlanStatus::Approved });
        }
        (P::PlanProposed, SessionEvent::Learner(L::RejectPlan)) => {
            actions.push(Action::MarkPlan { status: PlanStatus::Rejected });
            actions.push(Action::RevisePlan);
        }
        (P::PlanApproved, SessionEvent::Learner(L::RequestDelivery)) => {
            next.phase = P::Delivering;
            actions.push(compose(TaskKind::Deliver, &next));
        }
        (P::Delivering, SessionEvent::System(S::DeliveryComplete)) => {
            next.phase = P::PracticeAwaitingInput;
        }
        (P::PracticeAwaitingInput, SessionEvent::Learner(L::SubmitPractice { .. })) => {
            next.phase = P::FeedbackGiven;
            actions.push(compose(TaskKind::Feedback, &next));
        }
        (P::FeedbackGiven, SessionEvent::System(S::FeedbackDelivered { .. })) => {
            next.phase = P::PostSessionChoice;
        }
        (P::PostSessionChoice | P::Reinforcing, SessionEvent::Learner(L::ChooseQuiz)) => {
            let request = quiz_request(state)?;
            next.phase = P::QuizInProgress;
            next.quiz = None;
            next.pending_answer = None;
            actions.push(Action::StartQuiz { request });
        }
        (P::PostSessionChoice | P::Reinforcing, SessionEvent::Learner(L::ChooseNext)) => {
            move_on(&mut next, &mut actions);
        }
        (P::QuizInProgress, SessionEvent::System(S::QuizGenerated { quiz })) => {
            if state.quiz.is_some() {
                return Err(invalid());
            }
            if quiz.questions.len() != QUIZ_LENGTH || quiz.cursor != 0 || !quiz.answers.is_empty() {
                return Err(QuizError::WrongLength(quiz.questions.len()).into());
            }
            next.quiz = Some(quiz.clone());
        }
        (P::QuizInProgress, SessionEvent::Learner(L::SubmitAnswer { text })) => {
            let quiz = state.quiz.as_ref().ok_or_else(invalid)?;
            if quiz.is_complete() {
                return Err(QuizError::QuizAlreadyComplete.into());
            }
            if state.pending_answer.is_some() {
                return Err(invalid());
            }
            next.pending_answer = Some(text.clone());
            actions.push(Action::GradeAnswer { question_index: quiz.cursor, given: text.clone() });
        }
        (P::QuizInProgress, SessionEvent::System(S::AnswerJudged { question_index, correct, feedback })) => {
            let quiz = state.quiz.as_ref().ok_or_else(invalid)?;
            let given = state.pending_answer.as_deref().ok_or_else(invalid)?;
            let graded = grade_answer(quiz, *question_index, given, *correct, feedback)?;
            next.pending_answer = None;
            if graded.is_complete() {
                let decision = advance_or_reinforce(&graded, state.reinforce_rounds)?;
                actions.push(Action::QuizFinished { quiz: graded.clone(), decision });
                next.quiz = Some(graded.clone());
                match decision {
                    QuizDecision::Reinforce => {
                        next.reinforce_rounds += 1;
                        next.phase = P::Reinforcing;
                        actions.push(compose(TaskKind::Review, &next));
                    }
                    QuizDecision::Advance { review_recommended } => {
                        next.review_recommended = review_recommended;
                        if review_recommended || graded.answers.iter().any(|a| a.review_offered) {
                            next.phase = P::ReviewOffered;
                        } else {
                            move_on(&mut next, &mut actions);
                        }
                    }
                }
            } else {
                next.quiz = Some(graded);
            }
        }
        (P::ReviewOffered, SessionEvent::Learner(L::AcceptReview)) => {
            next.phase = P::Reinforcing;
            actions.push(compose(TaskKind::Review, &next));
        }
        (P::ReviewOffered, SessionEvent::Learner(L::DeclineReview)) => {
            move_on(&mut next, &mut actions);
        }
        _ => return Err(invalid()),
    }

    next.trace.push(TraceEntry { event, at });
    let adapted = adapt_strategy(&next);
    next.tone_current = adapted.tone;
    next.reasoning_current = adapted.reasoning;
    Ok((next, actions))
}

fn compose(task: TaskKind, state: &SessionState) -> Action {
    Action::ComposePrompt { task, session_index: state.current_index }
}

/// Next lesson, or completion after the last one.
fn move_on(state: &mut SessionState, actions: &mut Vec<Action>) {
    state.reinforce_rounds = 0;
    state.review_recommended = false;
    state.quiz = None;
    state.pending_answer = None;
    if state.current_index < state.total_sessions() {
        state.current_index += 1;
        state.phase = Phase::Delivering;
        actions.push(compose(TaskKind::Deliver, state));
    } else {
        state.phase = Phase::Completed;
        actions.push(Action::SessionsComplete);
    }
}
