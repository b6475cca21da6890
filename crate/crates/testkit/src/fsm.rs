//! Transition-table enumeration and seeded random walks.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tutorflow_core::model::AssistantConfig;
use tutorflow_core::prompt::{ReasoningStrategy, SelectionRules, Tone};
use tutorflow_core::tutor::{
    advance, Action, Judgement, LearnerEvent, LessonPlan, Phase, PlanStatus, PlannedSession, PortError,
    PracticeFeedback, QuestionOrigin, QuizQuestion, QuizRequest, QuizState, SessionDriver, SessionEvent,
    SessionState, SystemEvent, TransitionError, TutorPorts, MAX_REINFORCE_ROUNDS, QUIZ_LENGTH,
};
use tutorflow_core::{PlanId, QuizId, SupportId};

use crate::gen;

/// Declared transitions: (state, event, resulting phase). Every pair not
/// listed must be rejected.
pub const TABLE: &[(&str, &str, Phase)] = &[
    ("PlanProposed", "ApprovePlan", Phase::PlanApproved),
    ("PlanProposed", "RejectPlan", Phase::PlanProposed),
    ("PlanApproved", "RequestDelivery", Phase::Delivering),
    ("Delivering", "DeliveryComplete", Phase::PracticeAwaitingInput),
    ("PracticeAwaitingInput", "SubmitPractice", Phase::FeedbackGiven),
    ("FeedbackGiven", "FeedbackDelivered", Phase::PostSessionChoice),
    ("PostSessionChoice", "ChooseQuiz", Phase::QuizInProgress),
    ("PostSessionChoice", "ChooseNext", Phase::Delivering),
    ("PostSessionChoice/last", "ChooseQuiz", Phase::QuizInProgress),
    ("PostSessionChoice/last", "ChooseNext", Phase::Completed),
    ("QuizInProgress/awaiting-questions", "QuizGenerated", Phase::QuizInProgress),
    ("QuizInProgress/answering", "SubmitAnswer", Phase::QuizInProgress),
    ("QuizInProgress/judging", "AnswerJudged", Phase::QuizInProgress),
    ("ReviewOffered", "AcceptReview", Phase::Reinforcing),
    ("ReviewOffered", "DeclineReview", Phase::Delivering),
    ("Reinforcing", "ChooseQuiz", Phase::QuizInProgress),
    ("Reinforcing", "ChooseNext", Phase::Delivering),
];

pub const EVENT_NAMES: [&str; 13] = [
    "ApprovePlan",
    "RejectPlan",
    "RequestDelivery",
    "SubmitPractice",
    "ChooseNext",
    "ChooseQuiz",
    "SubmitAnswer",
    "AcceptReview",
    "DeclineReview",
    "DeliveryComplete",
    "FeedbackDelivered",
    "QuizGenerated",
    "AnswerJudged",
];

pub fn plan(titles: &[&str]) -> LessonPlan {
    LessonPlan {
        plan_id: PlanId::new("plan-1"),
        support_id: SupportId::new("S1"),
        sessions: titles
            .iter()
            .enumerate()
            .map(|(i, t)| PlannedSession {
                index: i as u32 + 1,
                concept_title: (*t).to_owned(),
                scope_summary: format!("about {t}"),
            })
            .collect(),
        estimated_total: titles.len() as u32,
        status: PlanStatus::AwaitingApproval,
    }
}

pub fn config() -> AssistantConfig {
    AssistantConfig {
        support_id: SupportId::new("S1"),
        default_tone: Tone::Neutral,
        default_reasoning: ReasoningStrategy::Causal,
        content_language: "en".into(),
        depth_level: tutorflow_core::model::EducationLevel::University,
        session_target_minutes: 25,
        persona: None,
    }
}

pub fn canned_quiz(id: &str) -> QuizState {
    QuizState {
        quiz_id: QuizId::new(id),
        session_index: 1,
        questions: (0..QUIZ_LENGTH)
            .map(|i| QuizQuestion {
                question_text: format!("question {i}"),
                expected_answer_key: format!("a{i}"),
                source: QuestionOrigin::Current,
            })
            .collect(),
        cursor: 0,
        answers: Vec::new(),
    }
}

pub fn event(name: &str, state: &SessionState) -> SessionEvent {
    use LearnerEvent as L;
    use SystemEvent as S;
    match name {
        "ApprovePlan" => L::ApprovePlan.into(),
        "RejectPlan" => L::RejectPlan.into(),
        "RequestDelivery" => L::RequestDelivery.into(),
        "SubmitPractice" => L::SubmitPractice { text: "my attempt".into() }.into(),
        "ChooseNext" => L::ChooseNext.into(),
        "ChooseQuiz" => L::ChooseQuiz.into(),
        "SubmitAnswer" => L::SubmitAnswer { text: "a0".into() }.into(),
        "AcceptReview" => L::AcceptReview.into(),
        "DeclineReview" => L::DeclineReview.into(),
        "DeliveryComplete" => S::DeliveryComplete.into(),
        "FeedbackDelivered" => S::FeedbackDelivered { correct: Some(false) }.into(),
        "QuizGenerated" => S::QuizGenerated { quiz: canned_quiz("canned") }.into(),
        "AnswerJudged" => S::AnswerJudged {
            question_index: state.quiz.as_ref().map_or(0, |q| q.cursor),
            correct: true,
            feedback: "ok".into(),
        }
        .into(),
        other => panic!("unknown event {other}"),
    }
}

fn step(state: &SessionState, name: &str) -> SessionState {
    advance(state, event(name, state), 0).unwrap_or_else(|e| panic!("{name} from {}: {e}", state.phase)).0
}

fn judged(state: &SessionState, correct: bool) -> SessionState {
    let s = step(state, "SubmitAnswer");
    let ev = SystemEvent::AnswerJudged {
        question_index: s.quiz.as_ref().unwrap().cursor,
        correct,
        feedback: String::new(),
    };
    advance(&s, ev.into(), 0).unwrap().0
}

/// One representative state per row label of [`TABLE`], plus Completed.
pub fn canonical_states() -> Vec<(&'static str, SessionState)> {
    let rules = SelectionRules::default();
    let fresh = SessionState::new("s".into(), &plan(&["Basics", "Abstract theory", "Practice"]), &config(), &rules);
    let approved = step(&fresh, "ApprovePlan");
    let delivering = step(&approved, "RequestDelivery");
    let practice = step(&delivering, "DeliveryComplete");
    let feedback = step(&practice, "SubmitPractice");
    let choice = step(&feedback, "FeedbackDelivered");
    let awaiting = step(&choice, "ChooseQuiz");
    let answering = step(&awaiting, "QuizGenerated");
    let judging = step(&answering, "SubmitAnswer");
    let mut review = answering.clone();
    for i in 0..QUIZ_LENGTH {
        review = judged(&review, i < 3);
    }
    let mut reinforcing = answering.clone();
    for _ in 0..QUIZ_LENGTH {
        reinforcing = judged(&reinforcing, false);
    }

    let single = SessionState::new("s1".into(), &plan(&["Only"]), &config(), &rules);
    let mut last = single;
    for e in ["ApprovePlan", "RequestDelivery", "DeliveryComplete", "SubmitPractice", "FeedbackDelivered"] {
        last = step(&last, e);
    }
    let completed = step(&last, "ChooseNext");

    vec![
        ("PlanProposed", fresh),
        ("PlanApproved", approved),
        ("Delivering", delivering),
        ("PracticeAwaitingInput", practice),
        ("FeedbackGiven", feedback),
        ("PostSessionChoice", choice),
        ("PostSessionChoice/last", last),
        ("QuizInProgress/awaiting-questions", awaiting),
        ("QuizInProgress/answering", answering),
        ("QuizInProgress/judging", judging),
        ("ReviewOffered", review),
        ("Reinforcing", reinforcing),
        ("Completed", completed),
    ]
}

/// Tries every event in every canonical state and compares with [`TABLE`].
/// Returns the number of pairs checked.
pub fn check_transition_table() -> Result<usize, String> {
    let states = canonical_states();
    let mut covered_phases: Vec<Phase> = states.iter().map(|(_, s)| s.phase).collect();
    covered_phases.sort();
    covered_phases.dedup();
    if covered_phases != Phase::ALL.to_vec() {
        return Err(format!("canonical states cover only {covered_phases:?}"));
    }
    let mut pairs = 0;
    for (label, state) in &states {
        for name in EVENT_NAMES {
            pairs += 1;
            let expected = TABLE.iter().find(|(l, e, _)| l == label && *e == name).map(|(_, _, p)| *p);
            let before = state.clone();
            let got = advance(state, event(name, state), 1);
            if *state != before {
                return Err(format!("{label} + {name} mutated its input"));
            }
            match (expected, got) {
                (Some(p), Ok((next, _))) if next.phase == p => {
                    if next.trace.len() != state.trace.len() + 1 {
                        return Err(format!("{label} + {name} did not append to the trace"));
                    }
                }
                (Some(p), Ok((next, _))) => {
                    return Err(format!("{label} + {name}: expected {p}, got {}", next.phase));
                }
                (Some(p), Err(e)) => return Err(format!("{label} + {name}: expected {p}, got error {e}")),
                (None, Err(TransitionError::InvalidTransition { phase, event })) => {
                    if phase != state.phase || event != name {
                        return Err(format!("{label} + {name}: error names {phase}/{event}"));
                    }
                }
                (None, Err(e)) => return Err(format!("{label} + {name}: wrong error {e}")),
                (None, Ok((next, _))) => {
                    return Err(format!("{label} + {name}: undeclared transition to {}", next.phase));
                }
            }
        }
    }
    Ok(pairs)
}

/// Ports whose answers come from a seeded generator.
pub struct RandomPorts<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub failure_rate: f64,
}

impl RandomPorts<'_> {
    fn maybe_fail(&mut self, what: &str) -> Result<(), PortError> {
        if self.rng.gen_bool(self.failure_rate) {
            Err(PortError(format!("{what} unavailable")))
        } else {
            Ok(())
        }
    }
}

impl TutorPorts for RandomPorts<'_> {
    fn deliver_lesson(&mut self, state: &SessionState) -> Result<String, PortError> {
        self.maybe_fail("delivery")?;
        Ok(format!("lesson on {}", state.current_title()))
    }

    fn practice_feedback(&mut self, _state: &SessionState, _answer: &str) -> Result<PracticeFeedback, PortError> {
        self.maybe_fail("feedback")?;
        let correct = match self.rng.gen_range(0..3) {
            0 => None,
            1 => Some(true),
            _ => Some(false),
        };
        Ok(PracticeFeedback { text: "feedback".into(), correct })
    }

    fn generate_questions(&mut self, request: &QuizRequest) -> Result<Vec<QuizQuestion>, PortError> {
        self.maybe_fail("generator")?;
        let mk = |i: usize, source| QuizQuestion {
            question_text: format!("q{i}"),
            expected_answer_key: format!("a{i}"),
            source,
        };
        let mut qs: Vec<QuizQuestion> = (0..request.current_count).map(|i| mk(i, QuestionOrigin::Current)).collect();
        qs.extend((0..request.prior_count).map(|i| mk(10 + i, QuestionOrigin::Prior)));
        // sometimes over-supply, sometimes under-supply
        match self.rng.gen_range(0..10) {
            0 => {
                qs.pop();
            }
            1 => qs.push(mk(99, QuestionOrigin::Current)),
            _ => {}
        }
        qs.shuffle(self.rng);
        Ok(qs)
    }

    fn judge_answer(&mut self, _q: &QuizQuestion, _given: &str) -> Result<Judgement, PortError> {
        self.maybe_fail("judge")?;
        Ok(Judgement { correct: self.rng.gen_bool(0.55), feedback: "judged".into() })
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct WalkStats {
    pub walks: usize,
    pub events: usize,
    pub rejected: usize,
    pub quizzes_finished: usize,
    pub reinforcements: usize,
    pub completions: usize,
}

fn random_event(rng: &mut ChaCha8Rng, phase: Phase) -> LearnerEvent {
    use LearnerEvent as L;
    let answer = if rng.gen_bool(0.5) { "a0" } else { "wrong" }.to_owned();
    let all = [
        L::ApprovePlan,
        L::RejectPlan,
        L::RequestDelivery,
        L::SubmitPractice { text: "attempt".into() },
        L::ChooseNext,
        L::ChooseQuiz,
        L::SubmitAnswer { text: answer },
        L::AcceptReview,
        L::DeclineReview,
    ];
    let likely: Vec<&LearnerEvent> = all
        .iter()
        .filter(|e| match phase {
            Phase::PlanProposed => matches!(e, L::ApprovePlan | L::RejectPlan),
            Phase::PlanApproved => matches!(e, L::RequestDelivery),
            Phase::PracticeAwaitingInput => matches!(e, L::SubmitPractice { .. }),
            Phase::PostSessionChoice | Phase::Reinforcing => matches!(e, L::ChooseQuiz | L::ChooseNext),
            Phase::QuizInProgress => matches!(e, L::SubmitAnswer { .. }),
            Phase::ReviewOffered => matches!(e, L::AcceptReview | L::DeclineReview),
            _ => false,
        })
        .collect();
    if !likely.is_empty() && rng.gen_bool(0.8) {
        (*likely.choose(rng).unwrap()).clone()
    } else {
        all.choose(rng).unwrap().clone()
    }
}

/// Checks the trace-level and state-level safety properties.
pub fn check_invariants(state: &SessionState) -> Result<(), String> {
    if state.reinforce_rounds > MAX_REINFORCE_ROUNDS {
        return Err(format!("reinforce_rounds = {}", state.reinforce_rounds));
    }
    if let Some(q) = &state.quiz {
        if q.questions.len() != QUIZ_LENGTH {
            return Err(format!("quiz with {} questions", q.questions.len()));
        }
        if q.cursor != q.answers.len() || q.cursor > QUIZ_LENGTH {
            return Err(format!("cursor {} with {} answers", q.cursor, q.answers.len()));
        }
    }
    let names: Vec<&str> = state.trace.iter().map(|t| t.event.name()).collect();
    let approved_at = names.iter().position(|n| *n == "ApprovePlan");
    let delivered_at = names.iter().position(|n| matches!(*n, "RequestDelivery" | "DeliveryComplete"));
    match (approved_at, delivered_at) {
        (None, Some(_)) => return Err("delivery without approval".into()),
        (Some(a), Some(d)) if d < a => return Err("delivery before approval".into()),
        _ => {}
    }
    if !matches!(state.phase, Phase::PlanProposed | Phase::PlanApproved) && approved_at.is_none() {
        return Err(format!("phase {} without approval", state.phase));
    }
    let mut graded_in_quiz = 0;
    let mut awaiting_grade = false;
    let mut awaiting_feedback = false;
    for n in &names {
        match *n {
            "QuizGenerated" => {
                graded_in_quiz = 0;
                awaiting_grade = false;
            }
            "SubmitAnswer" => {
                if awaiting_grade {
                    return Err("two answers in flight".into());
                }
                awaiting_grade = true;
            }
            "AnswerJudged" => {
                if !awaiting_grade {
                    return Err("grade without an answer".into());
                }
                awaiting_grade = false;
                graded_in_quiz += 1;
                if graded_in_quiz > QUIZ_LENGTH {
                    return Err("sixth grade in one quiz".into());
                }
            }
            "SubmitPractice" => awaiting_feedback = true,
            "FeedbackDelivered" => {
                if !awaiting_feedback {
                    return Err("feedback without practice".into());
                }
                awaiting_feedback = false;
            }
            _ => {}
        }
    }
    Ok(())
}

/// Runs `walks` seeded walks of `steps` learner events each.
pub fn random_walks(seed: u64, walks: usize, steps: usize) -> Result<WalkStats, String> {
    let rules = SelectionRules::default();
    let driver = SessionDriver::new(rules.clone());
    let titles = ["Basics", "Abstract theory", "Applications", "Review"];
    let mut stats = WalkStats { walks, ..Default::default() };
    let mut rng = gen::rng(seed);
    for w in 0..walks {
        let n = rng.gen_range(1..=titles.len());
        let mut state = SessionState::new(format!("walk-{w}").into(), &plan(&titles[..n]), &config(), &rules);
        for _ in 0..steps {
            let ev = random_event(&mut rng, state.phase);
            stats.events += 1;
            let mut ports = RandomPorts { rng: &mut rng, failure_rate: 0.05 };
            match driver.handle(&mut ports, &state, ev.clone(), 0) {
                Ok(step) => {
                    for a in &step.actions {
                        match a {
                            Action::QuizFinished { quiz, decision } => {
                                if quiz.answers.len() != QUIZ_LENGTH {
                                    return Err(format!("walk {w}: quiz finished with {} answers", quiz.answers.len()));
                                }
                                stats.quizzes_finished += 1;
                                if matches!(decision, tutorflow_core::tutor::QuizDecision::Reinforce) {
                                    stats.reinforcements += 1;
                                }
                            }
                            Action::SessionsComplete => stats.completions += 1,
                            _ => {}
                        }
                    }
                    state = step.state;
                }
                Err(_) => stats.rejected += 1,
            }
            check_invariants(&state).map_err(|e| format!("walk {w} after {}: {e}", ev.name()))?;
        }
    }
    Ok(stats)
}
