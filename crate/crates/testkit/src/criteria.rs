//! Library-level acceptance checks. Each returns a one-line summary on
//! success and a description of the first violation on failure.

use rand::Rng;
use tutorflow_core::analytics::{engagement_score, EngagementEvent, EngagementKind};
use tutorflow_core::prompt::{compose_prompt, has_placeholder_marker, LayeredPrompt, TaskKind, TemplateCatalog};
use tutorflow_core::rag::{tokenize, CorpusIndex, DocumentSource};
use tutorflow_core::{DocId, EventId, LearnerId, SupportId};

use crate::bm25::{self, OracleChunk};
use crate::engagement::{self, PlainEvent};
use crate::{fsm, gen};

pub const SCORE_TOLERANCE: f64 = 1e-9;

/// Index scores against the brute-force oracle on `corpora` generated
/// corpora, several queries and scopes each; fusion budgets checked too.
pub fn retrieval_parity(seed: u64, corpora: usize) -> Result<String, String> {
    let mut rng = gen::rng(seed);
    let mut queries = 0;
    let mut fused = 0;
    for c in 0..corpora {
        let docs = gen::corpus(&mut rng);
        let mut index = CorpusIndex::new();
        let mut oracle_docs: Vec<(Option<String>, Vec<OracleChunk>)> = Vec::new();
        for d in &docs {
            let source = match &d.scope {
                None => DocumentSource::Curated,
                Some(s) => DocumentSource::Uploaded(SupportId::new(s.clone())),
            };
            index
                .ingest_document(&DocId::new(d.doc_id.clone()), &d.text, source)
                .map_err(|e| format!("corpus {c}: {e}"))?;
            oracle_docs.retain(|(_, chunks)| chunks.first().map(|ch| ch.doc_id.as_str()) != Some(d.doc_id.as_str()));
            oracle_docs.push((d.scope.clone(), bm25::chunk_tokens(&d.doc_id, &d.text)));
        }
        for scope in [None, Some("S1"), Some("S2"), Some("S3")] {
            let visible: Vec<OracleChunk> = oracle_docs
                .iter()
                .filter(|(s, _)| s.is_none() || s.as_deref() == scope)
                .flat_map(|(_, chunks)| chunks.iter().cloned())
                .collect();
            for _ in 0..5 {
                let q = gen::query(&mut rng);
                let k = rng.gen_range(1..=visible.len().max(1) + 3);
                let support = scope.map(SupportId::new);
                let got = index.retrieve(&q, k, support.as_ref());
                let want = bm25::rank(&visible, &q);
                queries += 1;
                if got.len() != want.len().min(k) {
                    return Err(format!("corpus {c} scope {scope:?} `{q}`: {} results, oracle {}", got.len(), want.len().min(k)));
                }
                for (g, w) in got.iter().zip(&want) {
                    if g.doc_id.as_str() != w.0 || g.ordinal != w.1 || (g.score - w.2).abs() > SCORE_TOLERANCE {
                        return Err(format!(
                            "corpus {c} scope {scope:?} `{q}` rank {}: got {}#{} {:.12}, oracle {}#{} {:.12}",
                            g.rank, g.doc_id, g.ordinal, g.score, w.0, w.1, w.2
                        ));
                    }
                    let owner = docs.iter().rev().find(|d| d.doc_id == g.doc_id.as_str()).and_then(|d| d.scope.as_deref());
                    if owner.is_some() && owner != scope {
                        return Err(format!("corpus {c}: chunk from scope {owner:?} leaked into {scope:?}"));
                    }
                }
                for budget in [1, 20, 100, 515, 1000, 3000] {
                    let text = index.fuse_context(&got, budget);
                    fused += 1;
                    if tokenize(&text).len() > budget {
                        return Err(format!("corpus {c}: fused context over budget {budget}"));
                    }
                }
            }
        }
    }
    Ok(format!("{corpora} corpora, {queries} queries within {SCORE_TOLERANCE:e}, {fused} fusions within budget"))
}

fn with_extra(events: &[EngagementEvent], kind: EngagementKind, at: i64, id: &str) -> Vec<EngagementEvent> {
    let mut out = events.to_vec();
    out.push(EngagementEvent::new(EventId::new(id), LearnerId::new("L1"), None, kind, at));
    out
}

/// Exact equality with the arithmetic oracle, monotonicity on generated
/// pairs, and the [0, 100] range.
pub fn engagement_oracle(seed: u64, fixtures: usize, pairs: usize) -> Result<String, String> {
    let mut rng = gen::rng(seed);
    let f1 = engagement::fixture_f1();
    let f1_score = engagement_score(&gen::to_events(&f1, "L1"), &gen::to_draft(&f1));
    if f1_score.total != engagement::score(&f1).total {
        return Err(format!("F1: {} vs oracle {}", f1_score.total, engagement::score(&f1).total));
    }
    for i in 0..fixtures {
        let f = gen::engagement_fixture(&mut rng);
        let got = engagement_score(&gen::to_events(&f, "L1"), &gen::to_draft(&f));
        let want = engagement::score(&f);
        let subs = [
            (got.sub_scores.objective_quality, want.objective_quality),
            (got.sub_scores.completion_rate, want.completion_rate),
            (got.sub_scores.time_investment, want.time_investment),
            (got.sub_scores.material_upload, want.material_upload),
            (got.sub_scores.goal_preference_set, want.goal_preference_set),
            (got.sub_scores.planning_horizon_set, want.planning_horizon_set),
        ];
        if got.total != want.total || subs.iter().any(|(a, b)| a != b) {
            return Err(format!("fixture {i}: {got:?} vs oracle {want:?}"));
        }
        if !(0.0..=100.0).contains(&got.total) {
            return Err(format!("fixture {i}: total {} out of range", got.total));
        }
    }
    for i in 0..pairs {
        let f = gen::engagement_fixture(&mut rng);
        let draft = gen::to_draft(&f);
        let events = gen::to_events(&f, "L1");
        let base = engagement_score(&events, &draft).total;
        let last = f.events.iter().map(PlainEvent::at).max().unwrap_or(0);
        let upload = with_extra(&events, EngagementKind::MaterialUploaded { doc_id: "extra".into() }, last + 1, "m");
        let step: u8 = rng.gen_range(1..=6);
        let visit = with_extra(
            &with_extra(&events, EngagementKind::StepEntered { step }, last + 10, "in"),
            EngagementKind::StepExited { step },
            last + 10 + rng.gen_range(0..200_000),
            "out",
        );
        for (what, evs) in [("upload", upload), ("step", visit)] {
            let after = engagement_score(&evs, &draft).total;
            if after < base {
                return Err(format!("pair {i}: adding a {what} lowered {base} to {after}"));
            }
            if !(0.0..=100.0).contains(&after) {
                return Err(format!("pair {i}: total {after} out of range"));
            }
        }
    }
    Ok(format!("F1 = {}, {fixtures} fixtures exact, {pairs} monotone pairs", f1_score.total))
}

fn layers_ok(p: &LayeredPrompt) -> Result<(), String> {
    for (layer, text) in p.blocks() {
        if text.trim().is_empty() {
            return Err(format!("{layer:?} empty"));
        }
        if has_placeholder_marker(text) {
            return Err(format!("{layer:?} has a placeholder marker"));
        }
    }
    let joined = p.blocks().map(|(_, t)| t).join(LayeredPrompt::SEPARATOR);
    if joined != p.rendered {
        return Err("rendered prompt is not the ordered layers".into());
    }
    Ok(())
}

/// `contexts` random contexts for every task kind.
pub fn prompt_integrity(seed: u64, contexts: usize) -> Result<String, String> {
    let catalog = TemplateCatalog::builtin();
    let mut rng = gen::rng(seed);
    let mut composed = 0;
    for i in 0..contexts {
        for task in TaskKind::ALL {
            let ctx = gen::prompt_context(&mut rng, task);
            let a = compose_prompt(&catalog, &ctx).map_err(|e| format!("context {i} {task:?}: {e}"))?;
            let b = compose_prompt(&catalog, &ctx.clone()).map_err(|e| format!("context {i} {task:?}: {e}"))?;
            layers_ok(&a).map_err(|e| format!("context {i} {task:?}: {e}"))?;
            if a.rendered.as_bytes() != b.rendered.as_bytes() {
                return Err(format!("context {i} {task:?}: not deterministic"));
            }
            composed += 1;
        }
    }
    Ok(format!("{composed} prompts, four ordered layers, no markers, deterministic"))
}

pub fn fsm_soundness(seed: u64, walks: usize, steps: usize) -> Result<String, String> {
    let pairs = fsm::check_transition_table()?;
    let stats = fsm::random_walks(seed, walks, steps)?;
    if stats.quizzes_finished == 0 || stats.reinforcements == 0 || stats.completions == 0 {
        return Err(format!("walks did not reach every outcome: {stats:?}"));
    }
    Ok(format!(
        "{pairs} (state, event) pairs match the table; {} walks, {} events, {} quizzes, {} reinforcements, {} completions",
        stats.walks, stats.events, stats.quizzes_finished, stats.reinforcements, stats.completions
    ))
}
