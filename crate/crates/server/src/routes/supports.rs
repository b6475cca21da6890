use axum::extract::{Multipart, Path, State};
use axum::http::StatusCode;
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};
use tutorflow_core::access::{Action, Claims};
use tutorflow_core::analytics::{EngagementEvent, EngagementKind};
use tutorflow_core::model::{derive_assistant_config, validate_support_request, AvatarChoice, LearnerProfile, SupportDraft};
use tutorflow_core::rag::DocumentSource;
use tutorflow_core::tutor::{extract_concepts, plan_lessons, LessonPlan, Phase, SessionState};
use tutorflow_core::{DocId, LearnerId, PlanId, SessionId, SupportId, UserId};

use crate::auth::Authed;
use crate::error::{ApiError, ApiResult, JsonBody, SCHEMA_VERSION};
use crate::state::{AppState, DocumentRecord, SessionRecord, SupportRecord};

#[derive(Deserialize)]
pub struct CreateSupportBody {
    #[serde(flatten)]
    draft: SupportDraft,
    #[serde(default)]
    persona_id: Option<String>,
    #[serde(default)]
    display_name: Option<String>,
    /// Wizard events the client buffered before submitting.
    #[serde(default)]
    events: Vec<EngagementEvent>,
}

fn check_events(events: &[EngagementEvent], learner: &LearnerId) -> ApiResult<()> {
    match events.iter().find(|e| &e.learner_id != learner) {
        Some(e) => Err(ApiError::bad_request(format!("event `{}` belongs to another learner", e.event_id))),
        None => Ok(()),
    }
}

/// Concepts found in the given documents, in order, for the learner's own
/// uploads and curated material.
fn material_concepts(app: &AppState, docs: &[DocId], owner: &UserId) -> Vec<String> {
    docs.iter()
        .filter_map(|id| app.documents.get(id.as_str()))
        .filter(|d| &d.owner == owner || d.source == DocumentSource::Curated)
        .flat_map(|d| extract_concepts(&d.text))
        .collect()
}

pub async fn create(
    State(app): State<AppState>,
    Authed(claims): Authed,
    JsonBody(body): JsonBody<CreateSupportBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    app.require(&claims, Action::SetGoals)?;
    let mut draft = body.draft;
    let learner: LearnerId = draft.learner_id.clone().unwrap_or_else(|| claims.sub.clone().into());
    app.authorize(&claims, Action::SetGoals, &UserId::from(&learner))?;
    draft.learner_id = Some(learner.clone());
    if draft.support_id.is_none() {
        draft.support_id = Some(SupportId::new(app.ids.next("support")));
    }
    check_events(&body.events, &learner)?;
    let request = validate_support_request(&draft)?;
    // held until the support is written so two creates with one id cannot both pass the check
    let lock = app.session_lock(&format!("support:{}", request.support_id));
    let _guard = lock.lock().await;
    if app.supports.contains(request.support_id.as_str()) {
        return Err(ApiError::conflict("duplicate_support", format!("support `{}` already exists", request.support_id)));
    }
    let persona = match body.persona_id.as_deref() {
        Some(id) => Some(AvatarChoice::from_catalog(id).ok_or_else(|| ApiError::bad_request(format!("unknown persona `{id}`")))?),
        None => None,
    };

    let now = app.now();
    let profile = match app.profiles.get(learner.as_str()) {
        Some(mut p) => {
            p.education_level = request.education_level;
            p.avatar_persona = persona.or(p.avatar_persona);
            p
        }
        None => LearnerProfile {
            learner_id: learner.clone(),
            display_name: body
                .display_name
                .or_else(|| app.accounts.get(learner.as_str()).map(|a| a.display_name))
                .unwrap_or_else(|| learner.to_string()),
            education_level: request.education_level,
            preferred_language: request.content_language.clone(),
            avatar_persona: persona,
            created_at: now,
        },
    };
    let config = derive_assistant_config(&profile, &request);
    let concepts = material_concepts(&app, &request.material_ids, &UserId::from(&learner));
    let plan = plan_lessons(&request, &concepts, PlanId::new(app.ids.next("plan")))
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let session_id = SessionId::new(app.ids.next("session"));
    let state = SessionState::new(session_id.clone(), &plan, &config, &app.driver.rules);

    app.profiles.put(learner.as_str(), &profile, now)?;
    app.plans.put(plan.plan_id.as_str(), &plan, now)?;
    let record = SupportRecord {
        request: request.clone(),
        config: config.clone(),
        plan_id: plan.plan_id.clone(),
        session_id: session_id.clone(),
        created_at: now,
    };
    app.supports.put(request.support_id.as_str(), &record, now)?;
    let session = SessionRecord { learner_id: learner.clone(), support_id: request.support_id.clone(), state };
    app.sessions.put(session_id.as_str(), &session, now)?;
    for e in body.events {
        app.events.append(e)?;
    }
    app.record(&learner, Some(&request.support_id), EngagementKind::SessionPhaseChanged { phase: Phase::PlanProposed })?;

    Ok((
        StatusCode::CREATED,
        Json(json!({
            "schema_version": SCHEMA_VERSION,
            "support_id": request.support_id,
            "learner_id": learner,
            "session_id": session_id,
            "phase": Phase::PlanProposed,
            "plan": plan,
            "config": config,
        })),
    ))
}

fn owned_support(app: &AppState, claims: &Claims, id: &str, action: Action) -> ApiResult<SupportRecord> {
    app.require(claims, action)?;
    let record = app.supports.get(id).ok_or_else(|| ApiError::not_found(format!("support `{id}`")))?;
    app.authorize(claims, action, &UserId::from(&record.request.learner_id))?;
    Ok(record)
}

pub async fn show(State(app): State<AppState>, Authed(claims): Authed, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let record = owned_support(&app, &claims, &id, Action::ViewOwnPath)?;
    let plan = app.plans.get(record.plan_id.as_str());
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "support": SupportDraft::from(&record.request),
        "config": record.config,
        "plan": plan,
        "session_id": record.session_id,
    })))
}

pub async fn upload(
    State(app): State<AppState>,
    Authed(claims): Authed,
    Path(id): Path<String>,
    mut multipart: Multipart,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let support = owned_support(&app, &claims, &id, Action::UploadMaterial)?;
    let cap = app.config.upload_cap_bytes;
    let multipart_error = |e: axum::extract::multipart::MultipartError| ApiError::new(e.status(), "bad_upload", e.body_text());

    let mut file = None;
    while let Some(mut field) = multipart.next_field().await.map_err(multipart_error)? {
        if field.name() != Some("file") {
            continue;
        }
        let filename = field.file_name().unwrap_or("upload").to_owned();
        let content_type = field.content_type().map(str::to_owned);
        let mut bytes = Vec::new();
        while let Some(chunk) = field.chunk().await.map_err(multipart_error)? {
            if bytes.len() + chunk.len() > cap {
                return Err(ApiError::new(
                    StatusCode::PAYLOAD_TOO_LARGE,
                    "too_large",
                    format!("uploads are limited to {cap} bytes"),
                ));
            }
            bytes.extend_from_slice(&chunk);
        }
        file = Some((filename, content_type, bytes));
        break;
    }
    let (filename, content_type, bytes) = file.ok_or_else(|| ApiError::bad_request("multipart field `file` is required"))?;
    let text = app.extractor.extract(&filename, content_type.as_deref(), &bytes).ok_or_else(|| {
        ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_format", "no text could be extracted from the file")
    })?;

    let doc_id = DocId::new(app.ids.next("doc"));
    let source = DocumentSource::Uploaded(support.request.support_id.clone());
    let chunks = {
        let mut corpus = app.corpus.write().unwrap();
        corpus
            .ingest_document(&doc_id, &text, source.clone())
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_document", e.to_string()))?
            .len()
    };
    let now = app.now();
    let record = DocumentRecord {
        doc_id: doc_id.clone(),
        source,
        owner: UserId::from(&support.request.learner_id),
        filename,
        content_type,
        size_bytes: bytes.len() as u64,
        text,
        created_at: now,
    };
    let stored = app
        .store
        .write_blob(crate::store::EntityKind::Document, doc_id.as_str(), &bytes)
        .and_then(|_| app.documents.put(doc_id.as_str(), &record, now));
    if let Err(e) = stored {
        app.corpus.write().unwrap().remove_document(&doc_id);
        return Err(e.into());
    }

    let replanned = replan_from_materials(&app, &support, &doc_id).await?;
    app.record(
        &support.request.learner_id,
        Some(&support.request.support_id),
        EngagementKind::MaterialUploaded { doc_id: doc_id.clone() },
    )?;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "schema_version": SCHEMA_VERSION,
            "doc_id": doc_id,
            "chunks": chunks,
            "replanned": replanned.is_some(),
            "plan": replanned,
        })),
    ))
}

/// Adds the document to the support. While the plan still awaits approval
/// it is rebuilt from the concepts in all of the support's material.
async fn replan_from_materials(app: &AppState, support: &SupportRecord, doc_id: &DocId) -> ApiResult<Option<LessonPlan>> {
    let lock = app.session_lock(support.session_id.as_str());
    let _guard = lock.lock().await;
    let now = app.now();
    let support_id = support.request.support_id.as_str();
    let mut record = app
        .supports
        .update(support_id, now, |cur| {
            let mut s = cur.expect("support exists");
            s.request.material_ids.push(doc_id.clone());
            s
        })?;
    let Some(mut session) = app.sessions.get(record.session_id.as_str()) else {
        return Ok(None);
    };
    if session.state.phase != Phase::PlanProposed {
        return Ok(None);
    }
    let owner = UserId::from(&record.request.learner_id);
    let concepts = material_concepts(app, &record.request.material_ids, &owner);
    if concepts.is_empty() {
        return Ok(None);
    }
    let plan = plan_lessons(&record.request, &concepts, PlanId::new(app.ids.next("plan")))
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    session.state.replace_plan(&plan, &app.driver.rules);
    app.plans.put(plan.plan_id.as_str(), &plan, now)?;
    record.plan_id = plan.plan_id.clone();
    app.supports.put(support_id, &record, now)?;
    app.sessions.put(record.session_id.as_str(), &session, now)?;
    Ok(Some(plan))
}

#[derive(Deserialize)]
pub struct CuratedBody {
    #[serde(default)]
    doc_id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    text: String,
}

pub async fn curated(
    State(app): State<AppState>,
    Authed(claims): Authed,
    JsonBody(body): JsonBody<CuratedBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    app.require(&claims, Action::ConfigureContent)?;
    app.authorize(&claims, Action::ConfigureContent, &claims.sub)?;
    let doc_id = DocId::new(body.doc_id.unwrap_or_else(|| format!("curated-{}", app.ids.next("doc"))));
    if !crate::store::valid_id(doc_id.as_str()) {
        return Err(ApiError::bad_request(format!("invalid document id `{doc_id}`")));
    }
    if app.documents.get(doc_id.as_str()).is_some_and(|d| d.source != DocumentSource::Curated) {
        return Err(ApiError::conflict("duplicate_document", format!("`{doc_id}` is an uploaded document")));
    }
    let chunks = app
        .corpus
        .write()
        .unwrap()
        .ingest_document(&doc_id, &body.text, DocumentSource::Curated)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_document", e.to_string()))?
        .len();
    let now = app.now();
    let record = DocumentRecord {
        doc_id: doc_id.clone(),
        source: DocumentSource::Curated,
        owner: claims.sub.clone(),
        filename: body.title.unwrap_or_else(|| doc_id.to_string()),
        content_type: Some("text/plain".into()),
        size_bytes: body.text.len() as u64,
        text: body.text,
        created_at: now,
    };
    if let Err(e) = app.documents.put(doc_id.as_str(), &record, now) {
        app.corpus.write().unwrap().remove_document(&doc_id);
        return Err(e.into());
    }
    Ok((StatusCode::CREATED, Json(json!({ "schema_version": SCHEMA_VERSION, "doc_id": doc_id, "chunks": chunks }))))
}
