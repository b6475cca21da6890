//! Learner profiles, onboarding support requests and the assistant
//! configuration derived from them.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{DocId, LearnerId, SupportId};
use crate::prompt::{select_reasoning, select_tone, ReasoningStrategy, SelectionRules, Tone};
use crate::TimestampMs;

/// Default length of one micro-lesson.
pub const DEFAULT_SESSION_MINUTES: u32 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EducationLevel {
    PrimarySchool,
    MiddleSchool,
    HighSchool,
    University,
}

impl EducationLevel {
    pub const ALL: [EducationLevel; 4] = [
        EducationLevel::PrimarySchool,
        EducationLevel::MiddleSchool,
        EducationLevel::HighSchool,
        EducationLevel::University,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EducationLevel::PrimarySchool => "primary school",
            EducationLevel::MiddleSchool => "middle school",
            EducationLevel::HighSchool => "high school",
            EducationLevel::University => "university",
        }
    }
}

impl fmt::Display for EducationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EducationLevel {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match canonical(s).as_str() {
            "primaryschool" => Ok(EducationLevel::PrimarySchool),
            "middleschool" => Ok(EducationLevel::MiddleSchool),
            "highschool" => Ok(EducationLevel::HighSchool),
            "university" => Ok(EducationLevel::University),
            _ => Err(ValidationError::UnknownEducationLevel(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GoalType {
    BuildNewSkill,
    ReviewCourse,
    PrepareForExam,
}

impl GoalType {
    pub const ALL: [GoalType; 3] = [
        GoalType::BuildNewSkill,
        GoalType::ReviewCourse,
        GoalType::PrepareForExam,
    ];

    pub fn label(self) -> &'static str {
        match self {
            GoalType::BuildNewSkill => "build a new skill",
            GoalType::ReviewCourse => "review a course",
            GoalType::PrepareForExam => "prepare for an exam",
        }
    }
}

impl FromStr for GoalType {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match canonical(s).as_str() {
            "buildnewskill" => Ok(GoalType::BuildNewSkill),
            "reviewcourse" => Ok(GoalType::ReviewCourse),
            "prepareforexam" => Ok(GoalType::PrepareForExam),
            _ => Err(ValidationError::UnknownGoalType(s.to_owned())),
        }
    }
}

/// Accepts `PrimarySchool`, `primary_school` and `primary school` alike.
fn canonical(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Tutor persona picked during onboarding. Presentation metadata only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AvatarChoice {
    pub persona_id: String,
    pub display_name: String,
}

/// The configured persona catalog.
pub const PERSONA_CATALOG: &[(&str, &str)] = &[
    ("sage", "Sage"),
    ("coach", "Coach"),
    ("explorer", "Explorer"),
    ("buddy", "Study Buddy"),
    ("professor", "Professor"),
];

impl AvatarChoice {
    pub fn from_catalog(persona_id: &str) -> Option<AvatarChoice> {
        PERSONA_CATALOG
            .iter()
            .find(|(id, _)| *id == persona_id)
            .map(|(id, name)| AvatarChoice {
                persona_id: (*id).to_owned(),
                display_name: (*name).to_owned(),
            })
    }

    pub fn catalog() -> Vec<AvatarChoice> {
        PERSONA_CATALOG
            .iter()
            .filter_map(|(id, _)| AvatarChoice::from_catalog(id))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerProfile {
    pub learner_id: LearnerId,
    pub display_name: String,
    pub education_level: EducationLevel,
    pub preferred_language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avatar_persona: Option<AvatarChoice>,
    pub created_at: TimestampMs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum SupportStatus {
    #[default]
    Draft,
    Submitted,
}

/// An onboarding request as collected by the wizard, before validation.
///
/// Enumerations are kept as raw text so that unknown values can be reported
/// as field errors instead of failing deserialization.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SupportDraft {
    pub support_id: Option<SupportId>,
    pub learner_id: Option<LearnerId>,
    pub learning_objective: String,
    pub short_description: String,
    pub subject_area: String,
    pub goal_type: Option<String>,
    pub material_ids: Vec<DocId>,
    pub education_level: Option<String>,
    pub content_language: String,
    pub estimated_duration_minutes: Option<i64>,
    pub keywords: Vec<String>,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    /// Free-form availability note. Stored, never interpreted.
    pub availability: Option<String>,
    pub status: SupportStatus,
}

/// A support request that passed validation. `status` is always
/// [`SupportStatus::Submitted`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportRequest {
    pub support_id: SupportId,
    pub learner_id: LearnerId,
    pub learning_objective: String,
    pub short_description: String,
    pub subject_area: String,
    pub goal_type: GoalType,
    pub material_ids: Vec<DocId>,
    pub education_level: EducationLevel,
    pub content_language: String,
    pub estimated_duration_minutes: Option<u32>,
    pub keywords: Vec<String>,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub availability: Option<String>,
    pub status: SupportStatus,
}

pub type ValidatedSupportRequest = SupportRequest;

impl From<&SupportRequest> for SupportDraft {
    fn from(req: &SupportRequest) -> Self {
        SupportDraft {
            support_id: Some(req.support_id.clone()),
            learner_id: Some(req.learner_id.clone()),
            learning_objective: req.learning_objective.clone(),
            short_description: req.short_description.clone(),
            subject_area: req.subject_area.clone(),
            goal_type: Some(format!("{:?}", req.goal_type)),
            material_ids: req.material_ids.clone(),
            education_level: Some(format!("{:?}", req.education_level)),
            content_language: req.content_language.clone(),
            estimated_duration_minutes: req.estimated_duration_minutes.map(i64::from),
            keywords: req.keywords.clone(),
            start_date: req.start_date,
            end_date: req.end_date,
            availability: req.availability.clone(),
            status: req.status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", content = "detail")]
pub enum ValidationError {
    #[error("missing mandatory field `{0}`")]
    MissingMandatoryField(String),
    #[error("end date precedes start date")]
    InvalidPlanningHorizon,
    #[error("unknown education level `{0}`")]
    UnknownEducationLevel(String),
    #[error("unknown goal type `{0}`")]
    UnknownGoalType(String),
    #[error("`{0}` is not a language tag")]
    InvalidLanguageTag(String),
    #[error("estimated duration must be a positive number of minutes")]
    InvalidDuration,
}

impl ValidationError {
    /// The draft field the error refers to.
    pub fn field(&self) -> &str {
        match self {
            ValidationError::MissingMandatoryField(f) => f,
            ValidationError::InvalidPlanningHorizon => "end_date",
            ValidationError::UnknownEducationLevel(_) => "education_level",
            ValidationError::UnknownGoalType(_) => "goal_type",
            ValidationError::InvalidLanguageTag(_) => "content_language",
            ValidationError::InvalidDuration => "estimated_duration_minutes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationErrors(pub Vec<ValidationError>);

/// Checks every mandatory field of a draft and returns the submitted request,
/// or every field error found. The draft itself is never touched.
pub fn validate_support_request(draft: &SupportDraft) -> Result<SupportRequest, ValidationErrors> {
    let mut errors = Vec::new();
    let missing = |field: &str| ValidationError::MissingMandatoryField(field.to_owned());

    let support_id = draft.support_id.clone().filter(|id| !id.as_str().is_empty());
    if support_id.is_none() {
        errors.push(missing("support_id"));
    }
    let learner_id = draft.learner_id.clone().filter(|id| !id.as_str().is_empty());
    if learner_id.is_none() {
        errors.push(missing("learner_id"));
    }

    let objective = draft.learning_objective.trim();
    if objective.is_empty() {
        errors.push(missing("learning_objective"));
    }
    let subject = draft.subject_area.trim();
    if subject.is_empty() {
        errors.push(missing("subject_area"));
    }

    let goal_type = match draft.goal_type.as_deref().map(str::trim) {
        None | Some("") => {
            errors.push(missing("goal_type"));
            None
        }
        Some(raw) => raw.parse::<GoalType>().map_err(|e| errors.push(e)).ok(),
    };
    let education_level = match draft.education_level.as_deref().map(str::trim) {
        None | Some("") => {
            errors.push(missing("education_level"));
            None
        }
        Some(raw) => raw.parse::<EducationLevel>().map_err(|e| errors.push(e)).ok(),
    };

    let language = draft.content_language.trim();
    if language.is_empty() {
        errors.push(missing("content_language"));
    } else if !is_language_tag(language) {
        errors.push(ValidationError::InvalidLanguageTag(language.to_owned()));
    }

    let duration = match draft.estimated_duration_minutes {
        None => None,
        Some(m) if m > 0 && m <= i64::from(u32::MAX) => Some(m as u32),
        Some(_) => {
            errors.push(ValidationError::InvalidDuration);
            None
        }
    };

    // An end date without a start date has no defined horizon.
    match (draft.start_date, draft.end_date) {
        (Some(start), Some(end)) if end < start => errors.push(ValidationError::InvalidPlanningHorizon),
        (None, Some(_)) => errors.push(ValidationError::InvalidPlanningHorizon),
        _ => {}
    }

    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    Ok(SupportRequest {
        support_id: support_id.expect("checked above"),
        learner_id: learner_id.expect("checked above"),
        learning_objective: objective.to_owned(),
        short_description: draft.short_description.trim().to_owned(),
        subject_area: subject.to_owned(),
        goal_type: goal_type.expect("checked above"),
        material_ids: draft.material_ids.clone(),
        education_level: education_level.expect("checked above"),
        content_language: language.to_owned(),
        estimated_duration_minutes: duration,
        keywords: normalize_keywords(&draft.keywords),
        start_date: draft.start_date,
        end_date: draft.end_date,
        availability: draft.availability.clone(),
        status: SupportStatus::Submitted,
    })
}

/// Loose BCP 47 shape check: a 2–8 letter primary subtag followed by
/// 1–8 character alphanumeric subtags.
pub fn is_language_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let primary = parts.next().unwrap_or_default();
    if !(2..=8).contains(&primary.len()) || !primary.chars().all(|c| c.is_ascii_alphabetic()) {
        return false;
    }
    parts.all(|p| (1..=8).contains(&p.len()) && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

/// Lowercases and trims every keyword, drops empties and keeps the first
/// occurrence of each.
pub fn normalize_keywords<S: AsRef<str>>(raw: &[S]) -> Vec<String> {
    let mut seen = HashSet::new();
    raw.iter()
        .map(|k| k.as_ref().trim().to_lowercase())
        .filter(|k| !k.is_empty())
        .filter(|k| seen.insert(k.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistantConfig {
    pub support_id: SupportId,
    pub default_tone: Tone,
    pub default_reasoning: ReasoningStrategy,
    pub content_language: String,
    pub depth_level: EducationLevel,
    pub session_target_minutes: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<AvatarChoice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("session target must be a positive number of minutes")]
pub struct InvalidSessionTarget;

impl AssistantConfig {
    pub fn with_session_target(mut self, minutes: u32) -> Result<Self, InvalidSessionTarget> {
        if minutes == 0 {
            return Err(InvalidSessionTarget);
        }
        self.session_target_minutes = minutes;
        Ok(self)
    }
}

pub fn derive_assistant_config(profile: &LearnerProfile, request: &SupportRequest) -> AssistantConfig {
    derive_assistant_config_with(profile, request, &SelectionRules::default())
}

pub fn derive_assistant_config_with(
    profile: &LearnerProfile,
    request: &SupportRequest,
    rules: &SelectionRules,
) -> AssistantConfig {
    let default_tone = select_tone(
        rules,
        request.education_level,
        &request.subject_area,
        request.goal_type,
        false,
    );
    let default_reasoning = select_reasoning(rules.classify(&request.subject_area));
    AssistantConfig {
        support_id: request.support_id.clone(),
        default_tone,
        default_reasoning,
        content_language: request.content_language.clone(),
        depth_level: request.education_level,
        session_target_minutes: DEFAULT_SESSION_MINUTES,
        persona: profile.avatar_persona.clone(),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    pub(crate) fn hdfs_draft() -> SupportDraft {
        SupportDraft {
            support_id: Some("S1".into()),
            learner_id: Some("L1".into()),
            learning_objective: "Master HDFS basics".into(),
            subject_area: "Computer Science".into(),
            goal_type: Some("BuildNewSkill".into()),
            education_level: Some("University".into()),
            content_language: "en".into(),
            start_date: Some(date("2025-01-01")),
            end_date: Some(date("2025-02-01")),
            ..Default::default()
        }
    }

    pub(crate) fn submitted_request() -> SupportRequest {
        validate_support_request(&hdfs_draft()).unwrap()
    }

    pub(crate) fn profile(level: EducationLevel) -> LearnerProfile {
        LearnerProfile {
            learner_id: "L1".into(),
            display_name: "Ada".into(),
            education_level: level,
            preferred_language: "en".into(),
            avatar_persona: AvatarChoice::from_catalog("sage"),
            created_at: 0,
        }
    }

    #[test]
    fn complete_draft_is_submitted() {
        let req = validate_support_request(&hdfs_draft()).unwrap();
        assert_eq!(req.status, SupportStatus::Submitted);
        assert_eq!(req.goal_type, GoalType::BuildNewSkill);
        assert_eq!(req.education_level, EducationLevel::University);
    }

    #[test]
    fn empty_objective_is_reported() {
        let draft = SupportDraft { learning_objective: "  ".into(), ..hdfs_draft() };
        let err = validate_support_request(&draft).unwrap_err();
        assert_eq!(err.0, vec![ValidationError::MissingMandatoryField("learning_objective".into())]);
    }

    #[test]
    fn reversed_dates_are_rejected() {
        let draft = SupportDraft {
            start_date: Some(date("2025-02-01")),
            end_date: Some(date("2025-01-01")),
            ..hdfs_draft()
        };
        let err = validate_support_request(&draft).unwrap_err();
        assert_eq!(err.0, vec![ValidationError::InvalidPlanningHorizon]);
    }

    #[test]
    fn unknown_enumerations_are_field_errors() {
        let draft = SupportDraft {
            goal_type: Some("Procrastinate".into()),
            education_level: Some("Kindergarten".into()),
            ..hdfs_draft()
        };
        let err = validate_support_request(&draft).unwrap_err();
        assert!(err.0.contains(&ValidationError::UnknownGoalType("Procrastinate".into())));
        assert!(err.0.contains(&ValidationError::UnknownEducationLevel("Kindergarten".into())));
    }

    #[test]
    fn empty_draft_lists_every_mandatory_field() {
        let err = validate_support_request(&SupportDraft::default()).unwrap_err();
        let fields: Vec<_> = err.0.iter().map(|e| e.field().to_owned()).collect();
        for f in [
            "support_id",
            "learner_id",
            "learning_objective",
            "subject_area",
            "goal_type",
            "education_level",
            "content_language",
        ] {
            assert!(fields.iter().any(|x| x == f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn bad_language_and_duration() {
        let draft = SupportDraft {
            content_language: "english please".into(),
            estimated_duration_minutes: Some(0),
            ..hdfs_draft()
        };
        let err = validate_support_request(&draft).unwrap_err();
        assert!(err.0.contains(&ValidationError::InvalidDuration));
        assert!(matches!(err.0[0], ValidationError::InvalidLanguageTag(_)));
        assert!(is_language_tag("pt-BR"));
        assert!(is_language_tag("zh-Hant-TW"));
        assert!(!is_language_tag("e"));
    }

    #[test]
    fn keyword_normalization() {
        assert_eq!(normalize_keywords(&["HDFS", "hdfs ", "YARN"]), vec!["hdfs", "yarn"]);
        assert_eq!(normalize_keywords::<&str>(&[]), Vec::<String>::new());
        assert_eq!(normalize_keywords(&[" MapReduce"]), vec!["mapreduce"]);
    }

    #[test]
    fn math_exam_prep_reasons_deductively() {
        let draft = SupportDraft {
            subject_area: "math".into(),
            goal_type: Some("PrepareForExam".into()),
            ..hdfs_draft()
        };
        let req = validate_support_request(&draft).unwrap();
        let cfg = derive_assistant_config(&profile(EducationLevel::University), &req);
        assert_eq!(cfg.default_reasoning, ReasoningStrategy::Deductive);
        assert_eq!(cfg.default_tone, Tone::Informative);
        assert_eq!(cfg.session_target_minutes, DEFAULT_SESSION_MINUTES);
        assert_eq!(cfg.depth_level, req.education_level);
    }

    #[test]
    fn young_learner_new_skill_is_friendly() {
        let draft = SupportDraft {
            subject_area: "science".into(),
            education_level: Some("PrimarySchool".into()),
            ..hdfs_draft()
        };
        let req = validate_support_request(&draft).unwrap();
        let cfg = derive_assistant_config(&profile(EducationLevel::PrimarySchool), &req);
        assert_eq!(cfg.default_tone, Tone::Friendly);
        assert_eq!(cfg.default_reasoning, ReasoningStrategy::Inductive);
    }

    #[test]
    fn config_is_deterministic() {
        let req = validate_support_request(&hdfs_draft()).unwrap();
        let p = profile(EducationLevel::University);
        let a = serde_json::to_vec(&derive_assistant_config(&p, &req)).unwrap();
        let b = serde_json::to_vec(&derive_assistant_config(&p, &req)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn session_target_override() {
        let req = validate_support_request(&hdfs_draft()).unwrap();
        let cfg = derive_assistant_config(&profile(EducationLevel::University), &req);
        assert_eq!(cfg.clone().with_session_target(40).unwrap().session_target_minutes, 40);
        assert_eq!(cfg.with_session_target(0), Err(InvalidSessionTarget));
    }

    #[test]
    fn persona_catalog_has_at_least_four_entries() {
        assert!(AvatarChoice::catalog().len() >= 4);
        assert!(AvatarChoice::from_catalog("dragon").is_none());
    }

    #[test]
    fn enum_parsing_accepts_common_spellings() {
        assert_eq!("high_school".parse::<EducationLevel>().unwrap(), EducationLevel::HighSchool);
        assert_eq!("Prepare for exam".parse::<GoalType>().unwrap(), GoalType::PrepareForExam);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in proptest::collection::vec("[ a-zA-Z]{0,6}", 0..12)) {
            let once = normalize_keywords(&raw);
            prop_assert_eq!(normalize_keywords(&once), once.clone());
            let unique: HashSet<_> = once.iter().collect();
            prop_assert_eq!(unique.len(), once.len());
        }

        #[test]
        fn validation_is_idempotent_and_pure(
            objective in "[a-zA-Z ]{0,20}",
            keywords in proptest::collection::vec("[ a-zA-Z]{0,6}", 0..6),
            level in proptest::sample::select(vec!["University", "HighSchool", "Nope", ""]),
            gap in -40i64..40,
        ) {
            let start = date("2025-03-01");
            let draft = SupportDraft {
                learning_objective: objective,
                keywords,
                education_level: Some(level.to_owned()),
                end_date: Some(start + chrono::Duration::days(gap)),
                start_date: Some(start),
                ..hdfs_draft()
            };
            let before = draft.clone();
            let result = validate_support_request(&draft);
            prop_assert_eq!(&draft, &before);
            if let Ok(req) = result {
                let again = validate_support_request(&SupportDraft::from(&req)).unwrap();
                prop_assert_eq!(again, req);
            }
        }
    }
}
