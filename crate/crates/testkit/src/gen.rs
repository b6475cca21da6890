//! Seeded generators.

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tutorflow_core::analytics::{EngagementEvent, EngagementKind};
use tutorflow_core::model::{AssistantConfig, EducationLevel, SupportDraft};
use tutorflow_core::prompt::{Outcome, OutcomeSource, PromptContext, ReasoningStrategy, TaskKind, Tone};
use tutorflow_core::{DocId, EventId, LearnerId, SupportId};

use crate::engagement::{EngagementFixture, PlainEvent};

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const VOCAB: &[&str] = &[
    "data", "node", "block", "replica", "map", "reduce", "yarn", "cluster", "scheduler", "file", "Storage",
    "network", "latency", "Throughput", "job", "task", "shuffle", "sort", "key", "value", "heap", "disk",
    "rack", "failure", "recovery", "the", "a", "of", "and", "to", "(HDFS)", "name-node", "co-ordinate",
    "élan", "naïve", "2024", "x86", "io!", "--", "...",
];

pub fn words(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone)]
pub struct GeneratedDoc {
    pub doc_id: String,
    pub text: String,
    /// `None` for curated documents, otherwise the uploading support.
    pub scope: Option<String>,
}

/// Up to 25 documents of 1..1400 tokens split between the curated corpus
/// and two support scopes.
pub fn corpus(rng: &mut ChaCha8Rng) -> Vec<GeneratedDoc> {
    let n_docs = rng.gen_range(1..=25);
    (0..n_docs)
        .map(|i| {
            let len = if rng.gen_bool(0.3) { rng.gen_range(1..60) } else { rng.gen_range(60..1400) };
            let scope = match rng.gen_range(0..3) {
                0 => None,
                1 => Some("S1".to_owned()),
                _ => Some("S2".to_owned()),
            };
            GeneratedDoc { doc_id: format!("doc{:02}", rng.gen_range(0..40) * 100 + i), text: words(rng, len), scope }
        })
        .collect()
}

pub fn query(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..5);
    words(rng, n)
}

pub fn engagement_fixture(rng: &mut ChaCha8Rng) -> EngagementFixture {
    let mut events = Vec::new();
    let mut t: i64 = rng.gen_range(0..10_000);
    for _ in 0..rng.gen_range(0..25) {
        t += rng.gen_range(0..120_000);
        let step = rng.gen_range(1..=7);
        let ev = match rng.gen_range(0..10) {
            0..=3 => PlainEvent::Enter { step, at: t },
            4..=7 => PlainEvent::Exit { step, at: t },
            8 => PlainEvent::Upload { at: t },
            _ => PlainEvent::Edit { at: t },
        };
        events.push(ev);
    }
    events.shuffle(rng);
    let goals = ["BuildNewSkill", "review course", "prepare_for_exam", "unknown", ""];
    let (n_obj, n_desc) = (rng.gen_range(0..12), rng.gen_range(0..35));
    EngagementFixture {
        objective: words(rng, n_obj),
        description: words(rng, n_desc),
        goal: if rng.gen_bool(0.7) { Some((*goals.choose(rng).unwrap()).to_owned()) } else { None },
        start_day: rng.gen_bool(0.7).then(|| rng.gen_range(0..30)),
        end_day: rng.gen_bool(0.7).then(|| rng.gen_range(0..60)),
        events,
    }
}

fn day(n: i32) -> NaiveDate {
    let base = NaiveDate::from_ymd_opt(2025, 1, 1).unwrap();
    base.checked_add_days(Days::new(n as u64)).unwrap()
}

pub fn to_draft(f: &EngagementFixture) -> SupportDraft {
    SupportDraft {
        learning_objective: f.objective.clone(),
        short_description: f.description.clone(),
        goal_type: f.goal.clone(),
        start_date: f.start_day.map(day),
        end_date: f.end_day.map(day),
        ..Default::default()
    }
}

pub fn to_events(f: &EngagementFixture, learner: &str) -> Vec<EngagementEvent> {
    f.events
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let kind = match *e {
                PlainEvent::Enter { step, .. } => EngagementKind::StepEntered { step },
                PlainEvent::Exit { step, .. } => EngagementKind::StepExited { step },
                PlainEvent::Upload { .. } => EngagementKind::MaterialUploaded { doc_id: DocId::new(format!("d{i}")) },
                PlainEvent::Edit { .. } => EngagementKind::FieldEdited { field: "objective".into(), text_length: 10 },
                PlainEvent::Quiz { score, .. } => EngagementKind::QuizCompleted { score },
            };
            EngagementEvent::new(EventId::new(format!("e{i}")), LearnerId::new(learner), None, kind, e.at())
        })
        .collect()
}

const NASTY: &[&str] = &[
    "",
    "   ",
    "{{topic}}",
    "{{ tone }} and }} {{",
    "{{{{",
    "line\nbreak",
    "emoji 🚀 text",
    "Ünïcödé",
    "<script>alert(1)</script>",
];

fn text(rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.3) {
        (*NASTY.choose(rng).unwrap()).to_owned()
    } else {
        let n = rng.gen_range(1..20);
        words(rng, n)
    }
}

pub fn prompt_context(rng: &mut ChaCha8Rng, task: TaskKind) -> PromptContext {
    let tones = [Tone::Encouraging, Tone::Friendly, Tone::Informative, Tone::Humorous, Tone::Neutral];
    let strategies = [
        ReasoningStrategy::Deductive,
        ReasoningStrategy::Inductive,
        ReasoningStrategy::Analogical,
        ReasoningStrategy::Causal,
        ReasoningStrategy::Abductive,
    ];
    let history = (0..rng.gen_range(0..6))
        .map(|_| Outcome {
            source: if rng.gen_bool(0.5) { OutcomeSource::Practice } else { OutcomeSource::Quiz },
            correct: rng.gen_bool(0.5),
        })
        .collect();
    PromptContext {
        assistant_config: AssistantConfig {
            support_id: SupportId::new(format!("S{}", rng.gen_range(0..100))),
            default_tone: *tones.choose(rng).unwrap(),
            default_reasoning: *strategies.choose(rng).unwrap(),
            content_language: ["en", "fr", "pt-BR", "de"].choose(rng).unwrap().to_string(),
            depth_level: *EducationLevel::ALL.choose(rng).unwrap(),
            session_target_minutes: rng.gen_range(5..=90),
            persona: None,
        },
        task_kind: task,
        learner_level: Some(*EducationLevel::ALL.choose(rng).unwrap()),
        topic: text(rng),
        session_index: rng.gen_range(1..10),
        progress_summary: text(rng),
        performance_history: history,
        retrieved_context: text(rng),
        tone_override: rng.gen_bool(0.2).then(|| *tones.choose(rng).unwrap()),
        reasoning_override: rng.gen_bool(0.2).then(|| *strategies.choose(rng).unwrap()),
    }
}
