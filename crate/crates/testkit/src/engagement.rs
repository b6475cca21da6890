//! Engagement arithmetic from plain data.
//!
//! Indicator weights (percent): objective quality 25, completion 25,
//! time 15, uploads 15, goal 10, horizon 10.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlainEvent {
    Enter { step: u8, at: i64 },
    Exit { step: u8, at: i64 },
    Upload { at: i64 },
    Edit { at: i64 },
    Quiz { score: u32, at: i64 },
}

impl PlainEvent {
    pub fn at(&self) -> i64 {
        match *self {
            PlainEvent::Enter { at, .. }
            | PlainEvent::Exit { at, .. }
            | PlainEvent::Upload { at }
            | PlainEvent::Edit { at }
            | PlainEvent::Quiz { at, .. } => at,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngagementFixture {
    pub objective: String,
    pub description: String,
    pub goal: Option<String>,
    /// Planning dates as day numbers.
    pub start_day: Option<i32>,
    pub end_day: Option<i32>,
    pub events: Vec<PlainEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScore {
    pub objective_quality: f64,
    pub completion_rate: f64,
    pub time_investment: f64,
    pub material_upload: f64,
    pub goal_preference_set: f64,
    pub planning_horizon_set: f64,
    pub total: f64,
}

/// Per step: (accumulated ms, visited to completion, left open).
pub fn step_table(events: &[PlainEvent]) -> Vec<(u8, u64, bool, bool)> {
    let mut sorted: Vec<PlainEvent> = events.to_vec();
    sorted.sort_by_key(|e| e.at());
    let mut steps: Vec<u8> = sorted
        .iter()
        .filter_map(|e| match e {
            PlainEvent::Enter { step, .. } => Some(*step),
            PlainEvent::Exit { step, .. } => Some(*step),
            _ => None,
        })
        .collect();
    steps.sort_unstable();
    steps.dedup();

    let mut table = Vec::new();
    for step in steps {
        let mut open: Option<i64> = None;
        let mut total = 0u64;
        let mut entered = false;
        let mut matched = false;
        for e in &sorted {
            match *e {
                PlainEvent::Enter { step: s, at } if s == step => {
                    open = Some(at);
                    entered = true;
                }
                PlainEvent::Exit { step: s, at } if s == step => {
                    if let Some(start) = open.take() {
                        total += (at - start).max(0) as u64;
                        matched = true;
                    }
                }
                _ => {}
            }
        }
        if entered || matched {
            table.push((step, total, matched, open.is_some()));
        }
    }
    table
}

fn words(s: &str) -> f64 {
    s.split_whitespace().count() as f64
}

pub fn score(f: &EngagementFixture) -> OracleScore {
    let table = step_table(&f.events);
    let done = |s: u8| table.iter().any(|(step, _, matched, _)| *step == s && *matched);

    let objective_quality = 0.5 * (words(&f.objective) / 8.0).min(1.0) + 0.5 * (words(&f.description) / 25.0).min(1.0);

    let mut mandatory = 0.0;
    for s in [1, 2, 4, 5] {
        if done(s) {
            mandatory += 1.0;
        }
    }
    let mut optional = 0.0;
    for s in [3, 6] {
        if done(s) {
            optional += 1.0;
        }
    }
    let completion_rate = ((mandatory + 0.5 * optional) / 4.0_f64).min(1.0);

    let total_ms: u64 = table.iter().map(|(_, ms, _, _)| ms).sum();
    let time_investment = (total_ms as f64 / 600_000.0).min(1.0);

    let material_upload = if f.events.iter().any(|e| matches!(e, PlainEvent::Upload { .. })) { 1.0 } else { 0.0 };

    let goal_ok = f.goal.as_ref().is_some_and(|g| {
        let c: String = g.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        ["buildnewskill", "reviewcourse", "prepareforexam"].contains(&c.as_str())
    });
    let goal_preference_set = if goal_ok { 1.0 } else { 0.0 };

    let horizon_ok = matches!((f.start_day, f.end_day), (Some(s), Some(e)) if e - s >= 1);
    let planning_horizon_set = if horizon_ok { 1.0 } else { 0.0 };

    let total = 25.0 * objective_quality
        + 25.0 * completion_rate
        + 15.0 * time_investment
        + 15.0 * material_upload
        + 10.0 * goal_preference_set
        + 10.0 * planning_horizon_set;

    OracleScore {
        objective_quality,
        completion_rate,
        time_investment,
        material_upload,
        goal_preference_set,
        planning_horizon_set,
        total,
    }
}

/// Fixture F1: a partly completed onboarding.
///
/// Hand evaluation:
/// objective 6 words -> 6/8 = 0.75; description 10 words -> 10/25 = 0.4;
/// quality = 0.5*0.75 + 0.5*0.4 = 0.575.
/// Steps 1, 2, 3, 4 completed (3 optional), 5 left open:
/// completion = (3 + 0.5) / 4 = 0.875.
/// Time = 60 000 + 45 000 + 30 000 + 2 * 40 000 = 215 000 ms -> 0.358333...
/// One upload -> 1. Goal set -> 1. Horizon 14 days -> 1.
/// total = 25*0.575 + 25*0.875 + 15*0.358333... + 15 + 10 + 10
///       = 14.375 + 21.875 + 5.375 + 35 = 76.625
pub fn fixture_f1() -> EngagementFixture {
    use PlainEvent::*;
    EngagementFixture {
        objective: "Understand how HDFS stores large files".into(),
        description: "I build data pipelines and want to understand the storage".into(),
        goal: Some("BuildNewSkill".into()),
        start_day: Some(0),
        end_day: Some(14),
        events: vec![
            Enter { step: 1, at: 1_000 },
            Exit { step: 1, at: 61_000 },
            Enter { step: 2, at: 61_000 },
            Exit { step: 2, at: 106_000 },
            Enter { step: 3, at: 106_000 },
            Upload { at: 120_000 },
            Exit { step: 3, at: 136_000 },
            Enter { step: 4, at: 136_000 },
            Exit { step: 4, at: 176_000 },
            Enter { step: 4, at: 200_000 },
            Edit { at: 210_000 },
            Exit { step: 4, at: 240_000 },
            Enter { step: 5, at: 240_000 },
            Quiz { score: 4, at: 300_000 },
        ],
    }
}

pub const F1_TOTAL: f64 = 76.625;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_by_hand() {
        let s = score(&fixture_f1());
        assert_eq!(s.objective_quality, 0.575);
        assert_eq!(s.completion_rate, 0.875);
        assert!((s.total - F1_TOTAL).abs() < 1e-12, "{}", s.total);
    }
}
