use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Phase, SessionState};
use crate::ids::QuizId;

pub const QUIZ_LENGTH: usize = 5;
/// Minimum score that lets the learner move on.
pub const ADVANCE_THRESHOLD: usize = 3;
pub const MAX_REINFORCE_ROUNDS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum QuestionOrigin {
    #[default]
    Current,
    Prior,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizQuestion {
    pub question_text: String,
    pub expected_answer_key: String,
    pub source: QuestionOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizAnswer {
    pub given: String,
    pub correct: bool,
    pub feedback_text: String,
    /// Set on incorrect answers: the learner may ask for a review.
    pub review_offered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizState {
    pub quiz_id: QuizId,
    pub session_index: u32,
    pub questions: Vec<QuizQuestion>,
    pub cursor: usize,
    pub answers: Vec<QuizAnswer>,
}

impl QuizState {
    pub fn score(&self) -> usize {
        self.answers.iter().filter(|a| a.correct).count()
    }

    pub fn is_complete(&self) -> bool {
        self.cursor >= QUIZ_LENGTH
    }

    pub fn current_question(&self) -> Option<&QuizQuestion> {
        self.questions.get(self.cursor)
    }

    /// Structural checks every quiz must pass.
    pub fn is_well_formed(&self) -> bool {
        self.questions.len() == QUIZ_LENGTH && self.cursor == self.answers.len() && self.cursor <= QUIZ_LENGTH
    }
}

/// What to ask a question generator for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizRequest {
    pub session_index: u32,
    pub topic: String,
    pub prior_topics: Vec<String>,
    pub current_count: usize,
    pub prior_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision")]
pub enum QuizDecision {
    Advance { review_recommended: bool },
    Reinforce,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuizError {
    #[error("a quiz cannot start in phase {0}")]
    WrongPhase(Phase),
    #[error("question generation failed: {0}")]
    QuestionGenerationFailed(String),
    #[error("the quiz is already complete")]
    QuizAlreadyComplete,
    #[error("question {0} has already been answered")]
    QuestionAlreadyAnswered(usize),
    #[error("question {index} is not the current question ({cursor})")]
    OutOfOrder { index: usize, cursor: usize },
    #[error("the quiz has {0} answers; a decision needs {QUIZ_LENGTH}")]
    QuizIncomplete(usize),
    #[error("a quiz must have exactly {QUIZ_LENGTH} questions, got {0}")]
    WrongLength(usize),
}

/// Produces quiz questions, typically by prompting an LLM.
pub trait QuestionGenerator {
    fn generate(&mut self, request: &QuizRequest) -> Result<Vec<QuizQuestion>, String>;
}

/// Sizes the quiz for the current lesson. From the second lesson on, one or
/// two of the five questions revisit earlier lessons.
pub fn quiz_request(state: &SessionState) -> Result<QuizRequest, QuizError> {
    if !matches!(state.phase, Phase::PostSessionChoice | Phase::Reinforcing) {
        return Err(QuizError::WrongPhase(state.phase));
    }
    let prior_count = (state.current_index.saturating_sub(1) as usize).min(2);
    let prior_topics = state
        .lessons
        .iter()
        .take(state.current_index.saturating_sub(1) as usize)
        .map(|l| l.title.clone())
        .collect();
    Ok(QuizRequest {
        session_index: state.current_index,
        topic: state.current_title().to_owned(),
        prior_topics,
        current_count: QUIZ_LENGTH - prior_count,
        prior_count,
    })
}

/// Picks the requested mix out of generated questions, keeping their order.
/// Surplus questions are dropped; a shortfall of either kind is an error.
pub fn assemble_quiz(
    request: &QuizRequest,
    generated: Vec<QuizQuestion>,
    quiz_id: QuizId,
) -> Result<QuizState, QuizError> {
    let (mut current, mut prior) = (0, 0);
    let mut questions = Vec::with_capacity(QUIZ_LENGTH);
    for q in generated {
        if q.question_text.trim().is_empty() || q.expected_answer_key.trim().is_empty() {
            continue;
        }
        let slot = match q.source {
            QuestionOrigin::Current => &mut current,
            QuestionOrigin::Prior => &mut prior,
        };
        let limit = match q.source {
            QuestionOrigin::Current => request.current_count,
            QuestionOrigin::Prior => request.prior_count,
        };
        if *slot < limit {
            *slot += 1;
            questions.push(q);
        }
    }
    if current < request.current_count || prior < request.prior_count {
        return Err(QuizError::QuestionGenerationFailed(format!(
            "needed {} current and {} prior questions, got {current} and {prior}",
            request.current_count, request.prior_count
        )));
    }
    Ok(QuizState { quiz_id, session_index: request.session_index, questions, cursor: 0, answers: Vec::new() })
}

pub fn start_quiz(
    state: &SessionState,
    generator: &mut dyn QuestionGenerator,
    quiz_id: QuizId,
) -> Result<QuizState, QuizError> {
    let request = quiz_request(state)?;
    let generated = generator.generate(&request).map_err(QuizError::QuestionGenerationFailed)?;
    assemble_quiz(&request, generated, quiz_id)
}

/// Records the judged answer to `question_index`, which must be the
/// question under the cursor.
pub fn grade_answer(
    quiz: &QuizState,
    question_index: usize,
    given: &str,
    correct: bool,
    feedback_text: &str,
) -> Result<QuizState, QuizError> {
    if quiz.is_complete() {
        return Err(QuizError::QuizAlreadyComplete);
    }
    if question_index < quiz.cursor {
        return Err(QuizError::QuestionAlreadyAnswered(question_index));
    }
    if question_index > quiz.cursor {
        return Err(QuizError::OutOfOrder { index: question_index, cursor: quiz.cursor });
    }
    let mut next = quiz.clone();
    next.answers.push(QuizAnswer {
        given: given.to_owned(),
        correct,
        feedback_text: feedback_text.to_owned(),
        review_offered: !correct,
    });
    next.cursor += 1;
    Ok(next)
}

pub fn advance_or_reinforce(quiz: &QuizState, reinforce_rounds: u32) -> Result<QuizDecision, QuizError> {
    if !quiz.is_complete() {
        return Err(QuizError::QuizIncomplete(quiz.cursor));
    }
    Ok(if quiz.score() >= ADVANCE_THRESHOLD {
        QuizDecision::Advance { review_recommended: false }
    } else if reinforce_rounds < MAX_REINFORCE_ROUNDS {
        QuizDecision::Reinforce
    } else {
        QuizDecision::Advance { review_recommended: true }
    })
}

#[derive(Deserialize)]
struct GeneratedQuestion {
    question: String,
    answer: String,
    #[serde(default)]
    source: Option<String>,
}

#[derive(Deserialize)]
struct GeneratedEnvelope {
    questions: Vec<GeneratedQuestion>,
}

/// Reads questions from a model reply. Accepts `{"questions": [...]}` or a
/// bare array, optionally surrounded by prose or a code fence.
pub fn parse_generated_questions(reply: &str) -> Result<Vec<QuizQuestion>, String> {
    let parsed = parse_envelope(reply.trim())
        .or_else(|| slice_between(reply, '{', '}').and_then(parse_envelope))
        .or_else(|| slice_between(reply, '[', ']').and_then(parse_envelope));
    let items = parsed.ok_or_else(|| "reply does not contain a question list".to_owned())?;
    items
        .into_iter()
        .map(|q| {
            let source = match q.source.as_deref().map(str::to_ascii_lowercase).as_deref() {
                None | Some("current") => QuestionOrigin::Current,
                Some("prior") => QuestionOrigin::Prior,
                Some(other) => return Err(format!("unknown question source `{other}`")),
            };
            Ok(QuizQuestion { question_text: q.question.trim().to_owned(), expected_answer_key: q.answer.trim().to_owned(), source })
        })
        .collect()
}

fn parse_envelope(text: &str) -> Option<Vec<GeneratedQuestion>> {
    serde_json::from_str::<GeneratedEnvelope>(text)
        .map(|e| e.questions)
        .or_else(|_| serde_json::from_str::<Vec<GeneratedQuestion>>(text))
        .ok()
}

fn slice_between(text: &str, open: char, close: char) -> Option<&str> {
    let start = text.find(open)?;
    let end = text.rfind(close)?;
    (end > start).then(|| &text[start..=end])
}

/// Reads `VERDICT: correct|incorrect` from the first non-empty line of a
/// judge reply. The remaining text is the feedback.
pub fn parse_verdict(reply: &str) -> Option<(bool, String)> {
    let reply = reply.trim_start();
    let (first, rest) = reply.split_once('\n').unwrap_or((reply, ""));
    let (label, value) = first.split_once(':')?;
    if !label.trim().eq_ignore_ascii_case("verdict") {
        return None;
    }
    let value = value.trim().trim_end_matches('.').to_ascii_lowercase();
    let correct = match value.as_str() {
        "correct" => true,
        "incorrect" => false,
        _ => return None,
    };
    Some((correct, rest.trim().to_owned()))
}

/// Test judge: an answer is correct when it equals the key after trimming.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatchJudge;

impl ExactMatchJudge {
    pub fn judge(&self, question: &QuizQuestion, given: &str) -> (bool, String) {
        let correct = given.trim() == question.expected_answer_key.trim();
        let feedback = if correct {
            "Correct.".to_owned()
        } else {
            format!("Not quite. The expected answer is: {}", question.expected_answer_key)
        };
        (correct, feedback)
    }
}
