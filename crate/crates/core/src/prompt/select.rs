use serde::{Deserialize, Serialize};

use super::{ReasoningStrategy, Tone};
use crate::model::{EducationLevel, GoalType};

/// Coarse subject classification used to pick a reasoning strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubjectCategory {
    LogicMath,
    Empirical,
    Process,
    Bridging,
    Creative,
}

impl SubjectCategory {
    pub const ALL: [SubjectCategory; 5] = [
        SubjectCategory::LogicMath,
        SubjectCategory::Empirical,
        SubjectCategory::Process,
        SubjectCategory::Bridging,
        SubjectCategory::Creative,
    ];
}

/// Keyword tables behind tone selection and subject classification.
///
/// Classification tokenizes the subject on non-alphanumeric characters and
/// returns the first category (in table order) owning one of its tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRules {
    pub categories: Vec<(SubjectCategory, Vec<String>)>,
    /// Subjects that mark a casual learning context.
    pub casual_subjects: Vec<String>,
    /// Concept-title words that flag a concept as abstract.
    pub abstract_markers: Vec<String>,
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| (*s).to_owned()).collect()
}

impl Default for SelectionRules {
    fn default() -> Self {
        SelectionRules {
            categories: vec![
                (
                    SubjectCategory::LogicMath,
                    words(&[
                        "math", "maths", "mathematics", "logic", "algebra", "geometry", "calculus",
                        "arithmetic", "statistics", "probability", "trigonometry", "proof",
                    ]),
                ),
                (
                    SubjectCategory::Process,
                    words(&[
                        "engineering", "computer", "systems", "distributed", "computing", "programming",
                        "manufacturing", "economics", "history", "networking", "operations",
                    ]),
                ),
                (
                    SubjectCategory::Empirical,
                    words(&[
                        "physics", "biology", "chemistry", "science", "sciences", "astronomy",
                        "geology", "ecology", "medicine", "anatomy", "psychology",
                    ]),
                ),
                (
                    SubjectCategory::Creative,
                    words(&[
                        "art", "arts", "design", "music", "writing", "literature", "poetry",
                        "creative", "entrepreneurship", "innovation",
                    ]),
                ),
            ],
            casual_subjects: words(&["hobby", "hobbies", "trivia", "games", "fun", "cooking"]),
            abstract_markers: words(&[
                "abstract", "theory", "theorem", "theoretical", "paradigm", "model", "models",
                "architecture", "philosophy", "concept", "concepts", "quantum", "topology",
                "recursion", "ontology",
            ]),
        }
    }
}

pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

impl SelectionRules {
    /// Unmatched subjects fall back to [`SubjectCategory::Bridging`].
    pub fn classify(&self, subject: &str) -> SubjectCategory {
        let toks: Vec<String> = tokens(subject).collect();
        self.categories
            .iter()
            .find(|(_, kws)| kws.iter().any(|k| toks.contains(k)))
            .map(|(cat, _)| *cat)
            .unwrap_or(SubjectCategory::Bridging)
    }

    pub fn is_casual(&self, subject: &str, goal_type: GoalType) -> bool {
        goal_type == GoalType::BuildNewSkill
            || tokens(subject).any(|t| self.casual_subjects.contains(&t))
    }

    pub fn is_abstract(&self, concept_title: &str) -> bool {
        tokens(concept_title).any(|t| self.abstract_markers.contains(&t))
    }
}

/// Tone rule table, first match wins:
///
/// | condition                                        | tone        |
/// |--------------------------------------------------|-------------|
/// | learner is struggling                            | Encouraging |
/// | goal is exam preparation                         | Informative |
/// | primary/middle school and building a new skill   | Friendly    |
/// | casual context and high school or above          | Humorous    |
/// | otherwise                                        | Neutral     |
pub fn select_tone(
    rules: &SelectionRules,
    level: EducationLevel,
    subject: &str,
    goal_type: GoalType,
    struggling: bool,
) -> Tone {
    if struggling {
        Tone::Encouraging
    } else if goal_type == GoalType::PrepareForExam {
        Tone::Informative
    } else if level <= EducationLevel::MiddleSchool && goal_type == GoalType::BuildNewSkill {
        Tone::Friendly
    } else if level >= EducationLevel::HighSchool && rules.is_casual(subject, goal_type) {
        Tone::Humorous
    } else {
        Tone::Neutral
    }
}

pub fn select_reasoning(category: SubjectCategory) -> ReasoningStrategy {
    match category {
        SubjectCategory::LogicMath => ReasoningStrategy::Deductive,
        SubjectCategory::Empirical => ReasoningStrategy::Inductive,
        SubjectCategory::Bridging => ReasoningStrategy::Analogical,
        SubjectCategory::Process => ReasoningStrategy::Causal,
        SubjectCategory::Creative => ReasoningStrategy::Abductive,
    }
}
