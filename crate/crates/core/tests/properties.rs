use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;
use tutorflow_core::access::{
    authorize, issue_token, verify_token, Action, Decision, DenyReason, Effect, ParentLinks, PermissionMatrix, Role,
    TokenKey,
};
use tutorflow_core::analytics::{engagement_score, step_durations, EngagementEvent, EngagementKind, EventLog};
use tutorflow_core::model::SupportDraft;
use tutorflow_core::prompt::{has_placeholder_marker, Template};
use tutorflow_core::rag::{chunk_spans, tokenize, CorpusIndex, DocumentSource, CHUNK_STRIDE, CHUNK_TOKENS};
use tutorflow_core::{DocId, EventId, LearnerId, SupportId, UserId};

const NOW: i64 = 1_700_000_000_000;

fn kind() -> impl Strategy<Value = EngagementKind> {
    prop_oneof![
        (1u8..=7).prop_map(|step| EngagementKind::StepEntered { step }),
        (1u8..=7).prop_map(|step| EngagementKind::StepExited { step }),
        Just(EngagementKind::MaterialUploaded { doc_id: DocId::new("d") }),
        (0u32..=5).prop_map(|score| EngagementKind::QuizCompleted { score }),
    ]
}

fn events() -> impl Strategy<Value = Vec<EngagementEvent>> {
    prop::collection::vec((kind(), 0i64..2_000_000), 0..30).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (k, at))| EngagementEvent::new(EventId::new(format!("e{i}")), LearnerId::new("L1"), None, k, at))
            .collect()
    })
}

fn draft() -> impl Strategy<Value = SupportDraft> {
    ("[a-z ]{0,80}", "[a-z ]{0,200}", prop::option::of("BuildNewSkill|ReviewCourse|nonsense")).prop_map(
        |(objective, description, goal)| SupportDraft {
            learning_objective: objective,
            short_description: description,
            goal_type: goal,
            ..Default::default()
        },
    )
}

proptest! {
    #[test]
    fn engagement_total_in_range(evs in events(), d in draft()) {
        let s = engagement_score(&evs, &d);
        prop_assert!((0.0..=100.0).contains(&s.total));
        for sub in [s.sub_scores.objective_quality, s.sub_scores.completion_rate, s.sub_scores.time_investment] {
            prop_assert!((0.0..=1.0).contains(&sub));
        }
    }

    #[test]
    fn step_durations_ignore_arrival_order(evs in events(), seed in any::<u64>()) {
        let mut distinct: Vec<EngagementEvent> = Vec::new();
        for e in evs {
            if distinct.iter().all(|d| d.at != e.at) {
                distinct.push(e);
            }
        }
        let mut shuffled = distinct.clone();
        let n = shuffled.len();
        if n > 1 {
            for i in 0..n {
                let j = (seed.rotate_left(i as u32) as usize) % n;
                shuffled.swap(i, j);
            }
        }
        prop_assert_eq!(step_durations(&distinct), step_durations(&shuffled));
    }

    #[test]
    fn event_log_replay_is_identity(evs in events(), dupes in 0usize..5) {
        let mut log = EventLog::new();
        for e in evs.iter().chain(evs.iter().take(dupes)) {
            log.record_event(e.clone());
        }
        let (again, corrupt) = EventLog::replay_jsonl(&log.to_jsonl());
        prop_assert!(corrupt.is_empty());
        prop_assert_eq!(again.to_jsonl(), log.to_jsonl());
        prop_assert_eq!(again.len(), evs.len());
    }

    #[test]
    fn tampered_tokens_never_verify(pos in any::<prop::sample::Index>(), byte in any::<u8>(), role in 0usize..4) {
        let key = TokenKey::new("integration-secret");
        let dir: HashMap<UserId, Role> = [(UserId::new("U1"), Role::ALL[role])].into_iter().collect();
        let token = issue_token(&key, &dir, &UserId::new("U1"), Role::ALL[role], 60_000, NOW).unwrap();
        let mut raw = token.as_str().as_bytes().to_vec();
        let i = pos.index(raw.len());
        raw[i] = byte;
        let tampered = String::from_utf8_lossy(&raw).into_owned();
        if tampered != token.as_str() {
            let links = ParentLinks::default();
            for action in Action::ALL {
                let d = authorize(&key, &PermissionMatrix::default(), &links, &tampered, action, &UserId::new("U1"), NOW);
                prop_assert!(!d.is_allow(), "tampered token allowed: {tampered}");
            }
        }
    }

    #[test]
    fn expired_tokens_never_allow(ttl in 1i64..1_000_000, late in 0i64..1_000_000) {
        let key = TokenKey::new("integration-secret");
        let dir: HashMap<UserId, Role> = [(UserId::new("A"), Role::Administrator)].into_iter().collect();
        let token = issue_token(&key, &dir, &UserId::new("A"), Role::Administrator, ttl, NOW).unwrap();
        prop_assert_eq!(verify_token(&key, token.as_str(), NOW + ttl + late), Err(DenyReason::Expired));
    }

    #[test]
    fn absent_pairs_deny(grants in prop::collection::vec((0usize..4, 0usize..10), 0..20)) {
        let mut m = PermissionMatrix::deny_all();
        for (r, a) in &grants {
            m.set(Role::ALL[*r], Action::ALL[*a], Effect::Allow);
        }
        let parsed = PermissionMatrix::from_json(&m.to_json()).unwrap();
        for (ri, role) in Role::ALL.into_iter().enumerate() {
            for (ai, action) in Action::ALL.into_iter().enumerate() {
                let granted = grants.contains(&(ri, ai));
                prop_assert_eq!(parsed.effect(role, action) == Effect::Allow, granted);
            }
        }
    }

    #[test]
    fn rendered_values_are_never_rescanned(a in ".{0,40}", b in ".{0,40}") {
        let t = Template::parse("Topic: {{a}} / {{ b }}.").unwrap();
        let bindings: BTreeMap<String, String> = [("a".to_owned(), a.clone()), ("b".to_owned(), b.clone())].into_iter().collect();
        let out = t.render(&bindings).unwrap();
        prop_assert_eq!(out, format!("Topic: {a} / {b}."));
    }

    #[test]
    fn chunk_spans_cover_the_document(n in 0usize..5000) {
        let spans = chunk_spans(n);
        if n == 0 {
            prop_assert!(spans.is_empty());
        } else {
            prop_assert_eq!(spans[0].0, 0);
            prop_assert_eq!(spans.last().unwrap().1, n);
            for w in spans.windows(2) {
                prop_assert_eq!(w[1].0, w[0].0 + CHUNK_STRIDE);
                prop_assert!(w[1].0 < w[0].1);
            }
            for (s, e) in &spans[..spans.len() - 1] {
                prop_assert_eq!(e - s, CHUNK_TOKENS);
            }
        }
    }

    #[test]
    fn fused_context_fits_budget(words in prop::collection::vec("[a-z]{1,8}", 1..1500), budget in 0usize..2000) {
        let mut index = CorpusIndex::new();
        index.ingest_document(&DocId::new("d"), &words.join(" "), DocumentSource::Uploaded(SupportId::new("S"))).unwrap();
        let results = index.retrieve(&words[0], 10, Some(&SupportId::new("S")));
        let fused = index.fuse_context(&results, budget);
        prop_assert!(tokenize(&fused).len() <= budget);
        prop_assert!(!has_placeholder_marker(&fused) || fused.contains("{{"));
    }
}

#[test]
fn decision_reports_reason() {
    let key = TokenKey::new("k");
    let d = authorize(&key, &PermissionMatrix::default(), &ParentLinks::default(), "garbage", Action::ViewOwnPath, &UserId::new("x"), NOW);
    assert_eq!(d, Decision::Deny(DenyReason::BadSignature));
}
