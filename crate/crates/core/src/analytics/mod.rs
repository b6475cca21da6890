//! Engagement events, the cognitive engagement score and dashboard
//! aggregates.

mod events;
mod score;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use events::{
    CorruptLine, EngagementEvent, EngagementKind, EventLog, RecordOutcome, StoredEvent, WizardStep,
    EVENT_SCHEMA_VERSION,
};
pub use score::{
    completion_rate, engagement_score, objective_quality, step_durations, time_investment,
    CognitiveEngagementScore, StepDurations, SubScores, MANDATORY_STEPS, OPTIONAL_STEPS, TIME_CAP_MS,
    W_COMPLETION_RATE, W_GOAL_PREFERENCE, W_MATERIAL_UPLOAD, W_OBJECTIVE_QUALITY, W_PLANNING_HORIZON,
    W_TIME_INVESTMENT,
};

use crate::ids::LearnerId;
use crate::model::SupportDraft;
use crate::tutor::{LessonPlan, Phase, QuizState, SessionState, TranscriptLine};
use crate::TimestampMs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathStatus {
    Completed,
    InProgress,
    Pending,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathEntry {
    pub session_index: u32,
    pub title: String,
    pub status: PathStatus,
}

/// Status of every planned lesson given the session's latest state.
/// Without a session the first lesson is in progress.
pub fn path_progress(plan: &LessonPlan, state: Option<&SessionState>) -> Vec<PathEntry> {
    let (current, finished) = match state {
        Some(s) => (s.current_index, s.phase == Phase::Completed),
        None => (1, false),
    };
    plan.sessions
        .iter()
        .map(|s| {
            let status = if s.index < current || (finished && s.index == current) {
                PathStatus::Completed
            } else if s.index == current {
                PathStatus::InProgress
            } else {
                PathStatus::Pending
            };
            PathEntry { session_index: s.index, title: s.concept_title.clone(), status }
        })
        .collect()
}

/// Half-open interval `[from, to)` of epoch milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub from: TimestampMs,
    pub to: TimestampMs,
}

impl TimeWindow {
    pub const ALL: TimeWindow = TimeWindow { from: TimestampMs::MIN, to: TimestampMs::MAX };

    pub fn contains(&self, at: TimestampMs) -> bool {
        self.from <= at && at < self.to
    }
}

/// Everything the dashboard is computed from.
#[derive(Debug, Clone, Copy, Default)]
pub struct DashboardInput<'a> {
    pub events: &'a [EngagementEvent],
    pub request: Option<&'a SupportDraft>,
    pub plan: Option<&'a LessonPlan>,
    pub session: Option<&'a SessionState>,
    pub quizzes: &'a [QuizState],
    pub transcript: &'a [TranscriptLine],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardSummary {
    pub learner_id: LearnerId,
    pub window: TimeWindow,
    pub engagement: CognitiveEngagementScore,
    pub step_durations: BTreeMap<WizardStep, u64>,
    pub open_steps: Vec<WizardStep>,
    pub quiz_history: Vec<u32>,
    pub path: Vec<PathEntry>,
    pub sessions_total: u32,
    pub sessions_completed: u32,
    /// Raw dialogue; stripped from parent views.
    pub recent_messages: Vec<TranscriptLine>,
    /// Raw quiz answers; stripped from parent views.
    pub quiz_answers: Vec<String>,
    /// Event-level log; stripped from parent views.
    pub events: Vec<EngagementEvent>,
}

impl DashboardSummary {
    pub fn zeroed(learner_id: LearnerId, window: TimeWindow) -> Self {
        DashboardSummary {
            learner_id,
            window,
            engagement: CognitiveEngagementScore::default(),
            step_durations: BTreeMap::new(),
            open_steps: Vec::new(),
            quiz_history: Vec::new(),
            path: Vec::new(),
            sessions_total: 0,
            sessions_completed: 0,
            recent_messages: Vec::new(),
            quiz_answers: Vec::new(),
            events: Vec::new(),
        }
    }
}

/// Aggregates over the learner's events inside `window`. No events in the
/// window gives a zeroed summary.
pub fn dashboard_summary(learner_id: &LearnerId, window: TimeWindow, input: DashboardInput<'_>) -> DashboardSummary {
    let events: Vec<&EngagementEvent> = input
        .events
        .iter()
        .filter(|e| &e.learner_id == learner_id && window.contains(e.at))
        .collect();
    if events.is_empty() {
        return DashboardSummary::zeroed(learner_id.clone(), window);
    }
    let empty = SupportDraft::default();
    let durations = step_durations(events.iter().copied());
    let path = input.plan.map(|p| path_progress(p, input.session)).unwrap_or_default();
    DashboardSummary {
        learner_id: learner_id.clone(),
        window,
        engagement: engagement_score(events.iter().copied(), input.request.unwrap_or(&empty)),
        open_steps: durations.open.iter().copied().collect(),
        step_durations: durations.durations,
        quiz_history: events
            .iter()
            .filter_map(|e| match e.kind {
                EngagementKind::QuizCompleted { score } => Some(score),
                _ => None,
            })
            .collect(),
        sessions_total: path.len() as u32,
        sessions_completed: path.iter().filter(|p| p.status == PathStatus::Completed).count() as u32,
        path,
        recent_messages: input.transcript.iter().filter(|l| window.contains(l.at)).cloned().collect(),
        quiz_answers: input.quizzes.iter().flat_map(|q| q.answers.iter().map(|a| a.given.clone())).collect(),
        events: events.into_iter().cloned().collect(),
    }
}
