use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::events::{EngagementEvent, EngagementKind, WizardStep};
use crate::model::{GoalType, SupportDraft};

/// Steps every learner must pass through.
pub const MANDATORY_STEPS: [WizardStep; 4] = [1, 2, 4, 5];
/// Steps that count half toward completion.
pub const OPTIONAL_STEPS: [WizardStep; 2] = [3, 6];
/// Step time at which time investment saturates.
pub const TIME_CAP_MS: u64 = 600_000;

/// Indicator weights in percent. They sum to 100.
pub const W_OBJECTIVE_QUALITY: u32 = 25;
pub const W_COMPLETION_RATE: u32 = 25;
pub const W_TIME_INVESTMENT: u32 = 15;
pub const W_MATERIAL_UPLOAD: u32 = 15;
pub const W_GOAL_PREFERENCE: u32 = 10;
pub const W_PLANNING_HORIZON: u32 = 10;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDurations {
    pub durations: BTreeMap<WizardStep, u64>,
    /// Steps entered and not exited.
    pub open: BTreeSet<WizardStep>,
    /// Steps with at least one matched visit.
    pub completed: BTreeSet<WizardStep>,
}

impl StepDurations {
    pub fn total_ms(&self) -> u64 {
        self.durations.values().sum()
    }
}

/// Sums matched Entered/Exited pairs per step after sorting by time.
/// A second Entered while a visit is open restarts that visit; an Exited
/// with no open visit is ignored.
pub fn step_durations<'a>(events: impl IntoIterator<Item = &'a EngagementEvent>) -> StepDurations {
    let mut steps: Vec<(i64, &EngagementKind)> = events
        .into_iter()
        .filter(|e| matches!(e.kind, EngagementKind::StepEntered { .. } | EngagementKind::StepExited { .. }))
        .map(|e| (e.at, &e.kind))
        .collect();
    steps.sort_by_key(|(at, _)| *at);

    let mut out = StepDurations::default();
    let mut open_at: BTreeMap<WizardStep, i64> = BTreeMap::new();
    for (at, kind) in steps {
        match *kind {
            EngagementKind::StepEntered { step } => {
                out.durations.entry(step).or_insert(0);
                open_at.insert(step, at);
            }
            EngagementKind::StepExited { step } => {
                if let Some(start) = open_at.remove(&step) {
                    *out.durations.entry(step).or_insert(0) += (at - start).max(0) as u64;
                    out.completed.insert(step);
                }
            }
            _ => {}
        }
    }
    out.open = open_at.into_keys().collect();
    out
}

fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn objective_quality(objective: &str, description: &str) -> f64 {
    0.5 * (word_count(objective) as f64 / 8.0).min(1.0) + 0.5 * (word_count(description) as f64 / 25.0).min(1.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SubScores {
    pub objective_quality: f64,
    pub completion_rate: f64,
    pub time_investment: f64,
    pub material_upload: f64,
    pub goal_preference_set: f64,
    pub planning_horizon_set: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CognitiveEngagementScore {
    pub total: f64,
    pub sub_scores: SubScores,
}

pub fn completion_rate(durations: &StepDurations) -> f64 {
    let mandatory = MANDATORY_STEPS.iter().filter(|s| durations.completed.contains(s)).count() as f64;
    let optional = OPTIONAL_STEPS.iter().filter(|s| durations.completed.contains(s)).count() as f64;
    ((mandatory + 0.5 * optional) / MANDATORY_STEPS.len() as f64).min(1.0)
}

pub fn time_investment(durations: &StepDurations) -> f64 {
    (durations.total_ms() as f64 / TIME_CAP_MS as f64).min(1.0)
}

fn planning_horizon_set(request: &SupportDraft) -> bool {
    match (request.start_date, request.end_date) {
        (Some(start), Some(end)) => (end - start).num_days() >= 1,
        _ => false,
    }
}

fn goal_preference_set(request: &SupportDraft) -> bool {
    request.goal_type.as_deref().is_some_and(|g| g.parse::<GoalType>().is_ok())
}

/// Weighted sum of the six indicators, scaled to 0..=100.
pub fn engagement_score<'a>(
    events: impl IntoIterator<Item = &'a EngagementEvent>,
    request: &SupportDraft,
) -> CognitiveEngagementScore {
    let events: Vec<&EngagementEvent> = events.into_iter().collect();
    let durations = step_durations(events.iter().copied());
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let sub = SubScores {
        objective_quality: objective_quality(&request.learning_objective, &request.short_description),
        completion_rate: completion_rate(&durations),
        time_investment: time_investment(&durations),
        material_upload: flag(events.iter().any(|e| matches!(e.kind, EngagementKind::MaterialUploaded { .. }))),
        goal_preference_set: flag(goal_preference_set(request)),
        planning_horizon_set: flag(planning_horizon_set(request)),
    };
    let total = W_OBJECTIVE_QUALITY as f64 * sub.objective_quality
        + W_COMPLETION_RATE as f64 * sub.completion_rate
        + W_TIME_INVESTMENT as f64 * sub.time_investment
        + W_MATERIAL_UPLOAD as f64 * sub.material_upload
        + W_GOAL_PREFERENCE as f64 * sub.goal_preference_set
        + W_PLANNING_HORIZON as f64 * sub.planning_horizon_set;
    CognitiveEngagementScore { total, sub_scores: sub }
}
