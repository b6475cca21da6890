use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{PlanId, SupportId};
use crate::model::SupportRequest;

/// Upper bound on sessions produced by the topic heuristic.
pub const MAX_HEURISTIC_SESSIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlanStatus {
    AwaitingApproval,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedSession {
    pub index: u32,
    pub concept_title: String,
    pub scope_summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LessonPlan {
    pub plan_id: PlanId,
    pub support_id: SupportId,
    pub sessions: Vec<PlannedSession>,
    pub estimated_total: u32,
    pub status: PlanStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("the learning objective is empty and no concepts were supplied")]
    EmptyTopic,
}

/// One session per concept, in order. Without concepts the learning
/// objective is split heuristically.
pub fn plan_lessons(
    request: &SupportRequest,
    material_concepts: &[String],
    plan_id: PlanId,
) -> Result<LessonPlan, PlanError> {
    let concepts = dedupe(material_concepts.iter().map(|c| c.trim().to_owned()));
    let titles = if concepts.is_empty() {
        heuristic_titles(&request.learning_objective, &request.keywords)
    } else {
        concepts
    };
    if titles.is_empty() {
        return Err(PlanError::EmptyTopic);
    }
    let objective = request.learning_objective.trim();
    let sessions: Vec<PlannedSession> = titles
        .into_iter()
        .enumerate()
        .map(|(i, title)| PlannedSession {
            index: i as u32 + 1,
            scope_summary: scope_summary(&title, objective),
            concept_title: title,
        })
        .collect();
    Ok(LessonPlan {
        plan_id,
        support_id: request.support_id.clone(),
        estimated_total: sessions.len() as u32,
        sessions,
        status: PlanStatus::AwaitingApproval,
    })
}

fn scope_summary(title: &str, objective: &str) -> String {
    if objective.is_empty() || title.eq_ignore_ascii_case(objective) {
        format!("Core ideas of {title}, a worked example and a practice task.")
    } else {
        format!("Core ideas of {title} toward \"{objective}\", a worked example and a practice task.")
    }
}

fn dedupe(items: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.filter(|s| !s.is_empty() && seen.insert(s.to_lowercase())).collect()
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn split_topic(topic: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for piece in topic.split([',', ';', '/', '|', '\n']) {
        let mut rest = piece;
        loop {
            let lower = rest.to_lowercase();
            let hit = [" and ", " & ", " then ", " vs ", " versus "]
                .iter()
                .filter_map(|sep| lower.find(sep).map(|i| (i, sep.len())))
                .min();
            match hit {
                Some((i, len)) => {
                    parts.push(rest[..i].trim().to_owned());
                    rest = &rest[i + len..];
                }
                None => {
                    parts.push(rest.trim().to_owned());
                    break;
                }
            }
        }
    }
    parts.retain(|p| !p.is_empty());
    parts
}

fn heuristic_titles(topic: &str, keywords: &[String]) -> Vec<String> {
    let topic = topic.trim();
    if topic.is_empty() {
        return Vec::new();
    }
    // "Topic: a, b and c" names the topic before the colon
    let (topic, body) = match topic.split_once(':') {
        Some((head, body)) if !head.trim().is_empty() && !body.trim().is_empty() => (head.trim(), body),
        _ => (topic, topic),
    };
    let parts = split_topic(body);
    let named = body != topic;
    let mut subtopics: Vec<String> = if parts.len() > 1 || named { parts } else { Vec::new() };
    subtopics.extend(keywords.iter().cloned());
    let subtopics = dedupe(subtopics.iter().map(|s| capitalize(s.trim())));
    if subtopics.is_empty() {
        return vec![capitalize(topic)];
    }
    let mut titles = vec![format!("Introduction to {topic}")];
    titles.extend(subtopics.into_iter().filter(|s| !s.eq_ignore_ascii_case(topic)));
    titles.truncate(MAX_HEURISTIC_SESSIONS);
    titles
}

/// Pulls concept titles out of course material.
///
/// Markdown headings win when present, and only those at the shallowest
/// level used. Otherwise lines such as `Chapter 2: Trees` or `Week 3 - Graphs`
/// are taken, and failing that short numbered lines (`1. Arrays`).
pub fn extract_concepts(text: &str) -> Vec<String> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();

    let headings: Vec<(usize, &str)> = lines.iter().filter_map(|l| markdown_heading(l)).collect();
    if let Some(top) = headings.iter().map(|(lvl, _)| *lvl).min() {
        return dedupe(
            headings.iter().filter(|(lvl, _)| *lvl == top).map(|(_, t)| clean_title(t)),
        );
    }

    let units: Vec<String> = lines.iter().filter_map(|l| unit_heading(l)).collect();
    if !units.is_empty() {
        return dedupe(units.into_iter());
    }

    dedupe(lines.iter().filter_map(|l| numbered_line(l)))
}

fn clean_title(t: &str) -> String {
    t.trim().trim_end_matches('#').trim().trim_end_matches(':').trim().to_owned()
}

fn markdown_heading(line: &str) -> Option<(usize, &str)> {
    let level = line.chars().take_while(|c| *c == '#').count();
    if !(1..=6).contains(&level) {
        return None;
    }
    let rest = &line[level..];
    if !rest.starts_with(' ') || rest.trim().trim_end_matches('#').trim().is_empty() {
        return None;
    }
    Some((level, rest))
}

const UNIT_WORDS: [&str; 6] = ["chapter", "module", "unit", "week", "lesson", "part"];

fn unit_heading(line: &str) -> Option<String> {
    let mut words = line.splitn(2, char::is_whitespace);
    let first = words.next()?.to_lowercase();
    if !UNIT_WORDS.contains(&first.as_str()) {
        return None;
    }
    let rest = words.next()?.trim_start();
    let num_len = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '.'))
        .unwrap_or(rest.len());
    let number = rest[..num_len].trim_end_matches('.');
    let is_number = !number.is_empty()
        && (number.chars().all(|c| c.is_ascii_digit() || c == '.') || is_roman(number));
    if !is_number {
        return None;
    }
    let title = rest[num_len..].trim_start_matches([':', '-', '.', ')', ' ', '\t', '\u{2013}']);
    let title = clean_title(title);
    (!title.is_empty()).then_some(title)
}

fn is_roman(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| matches!(c.to_ascii_lowercase(), 'i' | 'v' | 'x'))
}

fn numbered_line(line: &str) -> Option<String> {
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 || digits > 2 {
        return None;
    }
    let rest = &line[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    if !rest.starts_with(' ') {
        return None;
    }
    let title = clean_title(rest);
    let words = title.split_whitespace().count();
    (words > 0 && words <= 8 && !title.ends_with('.')).then_some(title)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::submitted_request;

    fn concepts(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| (*s).to_owned()).collect()
    }

    #[test]
    fn one_session_per_concept_in_order() {
        let req = submitted_request();
        let plan =
            plan_lessons(&req, &concepts(&["Introduction", "HDFS", "MapReduce", "YARN"]), PlanId::new("p")).unwrap();
        let titles: Vec<_> = plan.sessions.iter().map(|s| s.concept_title.as_str()).collect();
        assert_eq!(titles, ["Introduction", "HDFS", "MapReduce", "YARN"]);
        assert_eq!(plan.sessions.iter().map(|s| s.index).collect::<Vec<_>>(), [1, 2, 3, 4]);
        assert_eq!(plan.estimated_total, 4);
        assert_eq!(plan.status, PlanStatus::AwaitingApproval);
    }

    #[test]
    fn single_concept() {
        let plan = plan_lessons(&submitted_request(), &concepts(&["Recursion"]), PlanId::new("p")).unwrap();
        assert_eq!(plan.sessions.len(), 1);
    }

    #[test]
    fn heuristic_without_concepts() {
        let mut req = submitted_request();
        req.learning_objective = "Sorting algorithms".into();
        req.keywords = vec!["bubble sort".into(), "merge sort".into(), "quicksort".into()];
        let plan = plan_lessons(&req, &[], PlanId::new("p")).unwrap();
        let titles: Vec<_> = plan.sessions.iter().map(|s| s.concept_title.as_str()).collect();
        assert_eq!(titles, ["Introduction to Sorting algorithms", "Bubble sort", "Merge sort", "Quicksort"]);

        req.keywords.clear();
        let plan = plan_lessons(&req, &[], PlanId::new("p")).unwrap();
        assert_eq!(plan.sessions.len(), 1);

        req.learning_objective = "Arrays, linked lists and trees".into();
        let plan = plan_lessons(&req, &[], PlanId::new("p")).unwrap();
        assert_eq!(plan.sessions.len(), 4);
    }

    #[test]
    fn heuristic_is_capped() {
        let mut req = submitted_request();
        req.keywords = (0..20).map(|i| format!("k{i}")).collect();
        let plan = plan_lessons(&req, &[], PlanId::new("p")).unwrap();
        assert_eq!(plan.sessions.len(), MAX_HEURISTIC_SESSIONS);
    }

    #[test]
    fn empty_topic() {
        let mut req = submitted_request();
        req.learning_objective = "  ".into();
        assert_eq!(plan_lessons(&req, &[], PlanId::new("p")), Err(PlanError::EmptyTopic));
        assert_eq!(plan_lessons(&req, &concepts(&["", " "]), PlanId::new("p")), Err(PlanError::EmptyTopic));
    }

    #[test]
    fn markdown_headings_use_top_level() {
        let text = "# Introduction\nsome text\n## detail\n# HDFS\n# MapReduce ##\n#nope\n# YARN";
        assert_eq!(extract_concepts(text), ["Introduction", "HDFS", "MapReduce", "YARN"]);
    }

    #[test]
    fn unit_lines() {
        let text = "Course outline\nChapter 1: Arrays\nWeek 2 - Linked lists\nModule IV. Trees\nchapterhouse";
        assert_eq!(extract_concepts(text), ["Arrays", "Linked lists", "Trees"]);
    }

    #[test]
    fn numbered_lines() {
        let text = "1. Arrays\n2) Hash maps\n3. This line is a full sentence and not a heading.\n2024. no";
        assert_eq!(extract_concepts(text), ["Arrays", "Hash maps"]);
        assert!(extract_concepts("plain prose only").is_empty());
    }
}
