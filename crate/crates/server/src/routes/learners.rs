use axum::extract::{Path, Query, State};
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};
use tutorflow_core::access::{parent_scope_filter, Action, Role};
use tutorflow_core::analytics::{dashboard_summary, path_progress, DashboardInput, EngagementEvent, RecordOutcome, TimeWindow};
use tutorflow_core::model::SupportDraft;
use tutorflow_core::tutor::QuizState;
use tutorflow_core::{LearnerId, TimestampMs, UserId};

use crate::auth::Authed;
use crate::error::{ApiError, ApiResult, JsonBody, SCHEMA_VERSION};
use crate::state::AppState;

fn known_learner(app: &AppState, id: &str) -> ApiResult<()> {
    let is_learner = app.accounts.get(id).is_some_and(|a| a.role == Role::Learner);
    if is_learner || app.profiles.contains(id) {
        Ok(())
    } else {
        Err(ApiError::not_found(format!("learner `{id}`")))
    }
}

#[derive(Deserialize)]
pub struct EventsBody {
    events: Vec<EngagementEvent>,
}

/// Wizard telemetry. Duplicates by event id are ignored.
pub async fn events(
    State(app): State<AppState>,
    Authed(claims): Authed,
    Path(id): Path<String>,
    JsonBody(body): JsonBody<EventsBody>,
) -> ApiResult<Json<Value>> {
    app.require(&claims, Action::SetGoals)?;
    app.authorize(&claims, Action::SetGoals, &UserId::new(&id))?;
    if let Some(e) = body.events.iter().find(|e| e.learner_id.as_str() != id) {
        return Err(ApiError::bad_request(format!("event `{}` belongs to another learner", e.event_id)));
    }
    let (mut accepted, mut duplicates, mut late) = (0, 0, 0);
    for e in body.events {
        match app.events.append(e)? {
            RecordOutcome::Accepted { late: l } => {
                accepted += 1;
                late += usize::from(l);
            }
            RecordOutcome::DuplicateIgnored => duplicates += 1,
        }
    }
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "accepted": accepted,
        "duplicates": duplicates,
        "late": late,
    })))
}

#[derive(Deserialize)]
pub struct WindowQuery {
    from: Option<TimestampMs>,
    to: Option<TimestampMs>,
}

pub async fn dashboard(
    State(app): State<AppState>,
    Authed(claims): Authed,
    Path(id): Path<String>,
    Query(q): Query<WindowQuery>,
) -> ApiResult<Json<Value>> {
    let action = match claims.role {
        Role::Learner => Action::ViewOwnDashboard,
        Role::Parent => Action::ViewChildSummary,
        Role::Teacher | Role::Administrator => Action::ViewStudentAnalytics,
    };
    app.require(&claims, action)?;
    app.authorize(&claims, action, &UserId::new(&id))?;
    known_learner(&app, &id)?;

    let window = TimeWindow { from: q.from.unwrap_or(TimeWindow::ALL.from), to: q.to.unwrap_or(TimeWindow::ALL.to) };
    if window.from >= window.to {
        return Err(ApiError::bad_request("`from` must be before `to`"));
    }
    let learner = LearnerId::new(&id);
    let events = app.events.for_learner(&learner);
    let support = app.latest_support(&learner);
    let draft = support.as_ref().map(|s| SupportDraft::from(&s.request));
    let plan = support.as_ref().and_then(|s| app.plans.get(s.plan_id.as_str()));
    let session = support.as_ref().and_then(|s| app.sessions.get(s.session_id.as_str()));
    let transcript = support.as_ref().and_then(|s| app.transcripts.get(s.session_id.as_str())).unwrap_or_default();
    let mut quiz_records = app.quizzes.filter(|r| r.learner_id == learner);
    quiz_records.sort_by(|a, b| a.finished_at.cmp(&b.finished_at).then_with(|| a.quiz.quiz_id.cmp(&b.quiz.quiz_id)));
    let quizzes: Vec<QuizState> = quiz_records.into_iter().map(|r| r.quiz).collect();

    let summary = dashboard_summary(
        &learner,
        window,
        DashboardInput {
            events: &events,
            request: draft.as_ref(),
            plan: plan.as_ref(),
            session: session.as_ref().map(|s| &s.state),
            quizzes: &quizzes,
            transcript: &transcript,
        },
    );
    if claims.role == Role::Parent {
        let scoped = parent_scope_filter(&app.links(), &claims.sub, &summary).map_err(ApiError::deny)?;
        return Ok(Json(json!({ "schema_version": SCHEMA_VERSION, "view": "parent", "summary": scoped })));
    }
    Ok(Json(json!({ "schema_version": SCHEMA_VERSION, "view": "full", "summary": summary })))
}

pub async fn path(State(app): State<AppState>, Authed(claims): Authed, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    app.require(&claims, Action::ViewOwnPath)?;
    app.authorize(&claims, Action::ViewOwnPath, &UserId::new(&id))?;
    let learner = LearnerId::new(&id);
    let support = app.latest_support(&learner);
    let entries = support
        .as_ref()
        .and_then(|s| {
            let plan = app.plans.get(s.plan_id.as_str())?;
            let session = app.sessions.get(s.session_id.as_str());
            Some(path_progress(&plan, session.as_ref().map(|r| &r.state)))
        })
        .unwrap_or_default();
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "learner_id": learner,
        "support_id": support.map(|s| s.request.support_id),
        "path": entries,
    })))
}
