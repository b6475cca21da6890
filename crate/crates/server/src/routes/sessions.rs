use std::convert::Infallible;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, Sse};
use axum::response::{IntoResponse, Response};
use axum::Json;
use futures::StreamExt;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::mpsc;
use tutorflow_core::access::{Action as Perm, Claims};
use tutorflow_core::analytics::EngagementKind;
use tutorflow_core::tutor::{
    advance, Action, DriverError, LearnerEvent, PlanStatus, SessionState, Speaker, TranscriptLine, TransitionError,
};
use tutorflow_core::{PlanId, TimestampMs, UserId};
use tutorflow_gateway::{ChatMessage, StreamEvent};

use crate::auth::Authed;
use crate::error::{ApiError, ApiResult, JsonBody, SCHEMA_VERSION};
use crate::ports::{GatewayPorts, PromptInputs};
use crate::state::{AppState, QuizRecord, SessionRecord, SupportRecord};

/// Transcript lines replayed to the model on each chat turn.
pub const CHAT_HISTORY: usize = 6;

fn owned_session(app: &AppState, claims: &Claims, id: &str, action: Perm) -> ApiResult<SessionRecord> {
    app.require(claims, action)?;
    let record = app.sessions.get(id).ok_or_else(|| ApiError::not_found(format!("session `{id}`")))?;
    app.authorize(claims, action, &UserId::from(&record.learner_id))?;
    Ok(record)
}

fn support_of(app: &AppState, record: &SessionRecord) -> ApiResult<SupportRecord> {
    app.supports
        .get(record.support_id.as_str())
        .ok_or_else(|| ApiError::internal(format!("support `{}` of session is missing", record.support_id)))
}

fn prompt_inputs(app: &AppState, support: &SupportRecord) -> PromptInputs {
    PromptInputs {
        catalog: app.catalog.clone(),
        corpus: app.corpus.clone(),
        config: support.config.clone(),
        level: support.config.depth_level,
        support_id: support.request.support_id.clone(),
    }
}

/// Learner events the machine would accept right now.
pub fn legal_events(state: &SessionState, at: TimestampMs) -> Vec<&'static str> {
    let text = || String::from("?");
    [
        LearnerEvent::ApprovePlan,
        LearnerEvent::RejectPlan,
        LearnerEvent::RequestDelivery,
        LearnerEvent::SubmitPractice { text: text() },
        LearnerEvent::ChooseNext,
        LearnerEvent::ChooseQuiz,
        LearnerEvent::SubmitAnswer { text: text() },
        LearnerEvent::AcceptReview,
        LearnerEvent::DeclineReview,
    ]
    .into_iter()
    .filter(|e| advance(state, e.clone().into(), at).is_ok())
    .map(|e| e.name())
    .collect()
}

/// The session as a client sees it. Answer keys are never included.
pub fn session_view(record: &SessionRecord, at: TimestampMs) -> Value {
    let s = &record.state;
    let quiz = s.quiz.as_ref().map(|q| {
        json!({
            "quiz_id": q.quiz_id,
            "session_index": q.session_index,
            "cursor": q.cursor,
            "total": q.questions.len(),
            "score": q.score(),
            "current_question": q.current_question().map(|c| &c.question_text),
            "answers": q.answers.iter().map(|a| json!({
                "given": a.given,
                "correct": a.correct,
                "feedback": a.feedback_text,
                "review_offered": a.review_offered,
            })).collect::<Vec<_>>(),
        })
    });
    json!({
        "schema_version": SCHEMA_VERSION,
        "session_id": s.session_id,
        "support_id": record.support_id,
        "learner_id": record.learner_id,
        "plan_id": s.plan_id,
        "phase": s.phase,
        "current_index": s.current_index,
        "total_sessions": s.total_sessions(),
        "current_title": s.current_title(),
        "lessons": s.lessons,
        "tone": s.tone_current,
        "reasoning": s.reasoning_current,
        "reinforce_rounds": s.reinforce_rounds,
        "review_recommended": s.review_recommended,
        "accepts_dialogue": s.phase.accepts_dialogue(),
        "legal_events": legal_events(s, at),
        "quiz": quiz,
    })
}

pub async fn show(State(app): State<AppState>, Authed(claims): Authed, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let record = owned_session(&app, &claims, &id, Perm::ViewOwnPath)?;
    Ok(Json(session_view(&record, app.now())))
}

pub async fn transcript(
    State(app): State<AppState>,
    Authed(claims): Authed,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    owned_session(&app, &claims, &id, Perm::ViewOwnPath)?;
    let lines = app.transcripts.get(&id).unwrap_or_default();
    Ok(Json(json!({ "schema_version": SCHEMA_VERSION, "session_id": id, "lines": lines })))
}

#[derive(Deserialize)]
pub struct EventBody {
    #[serde(flatten)]
    event: LearnerEvent,
}

fn driver_error(e: DriverError) -> ApiError {
    match e {
        DriverError::Transition(TransitionError::InvalidTransition { phase, event }) => {
            ApiError::conflict("invalid_transition", format!("{event} is not allowed in phase {phase}"))
                .with_detail(json!({ "phase": phase, "event": event }))
        }
        DriverError::Transition(TransitionError::Quiz(q)) => ApiError::conflict("quiz_rejected", q.to_string()),
        DriverError::Quiz(q) => ApiError::new(StatusCode::BAD_GATEWAY, "llm_output_invalid", q.to_string()),
        DriverError::Port(p) => ApiError::new(StatusCode::BAD_GATEWAY, "llm_failure", p.to_string()),
    }
}

pub async fn event(
    State(app): State<AppState>,
    Authed(claims): Authed,
    Path(id): Path<String>,
    JsonBody(body): JsonBody<EventBody>,
) -> ApiResult<Json<Value>> {
    owned_session(&app, &claims, &id, Perm::ChatWithTutor)?;
    let lock = app.session_lock(&id);
    let _guard = lock.lock().await;
    // reread under the lock; the first read only served authorization
    let record = app.sessions.get(&id).ok_or_else(|| ApiError::not_found(format!("session `{id}`")))?;
    let support = support_of(&app, &record)?;

    let learner_text = match &body.event {
        LearnerEvent::SubmitPractice { text } | LearnerEvent::SubmitAnswer { text } => Some(text.clone()),
        _ => None,
    };
    let at = app.now();
    let plan_ids = app.clone();
    let ports = GatewayPorts {
        handle: tokio::runtime::Handle::current(),
        gateway: app.gateway.clone(),
        inputs: prompt_inputs(&app, &support),
        request: support.request.clone(),
        next_plan_id: Box::new(move || PlanId::new(plan_ids.ids.next("plan"))),
        revised: None,
    };
    let worker = app.clone();
    let before = record.state.clone();
    let event = body.event;
    let (ports, result) = tokio::task::spawn_blocking(move || {
        let mut ports = ports;
        let result = worker.driver.handle(&mut ports, &before, event, at);
        (ports, result)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    let step = result.map_err(driver_error)?;

    let now = app.now();
    if let Some(plan) = &ports.revised {
        app.plans.put(plan.plan_id.as_str(), plan, now)?;
        let plan_id = plan.plan_id.clone();
        app.supports.update(support.request.support_id.as_str(), now, |cur| {
            let mut s = cur.expect("support exists");
            s.plan_id = plan_id;
            s
        })?;
    }
    for action in &step.actions {
        match action {
            Action::MarkPlan { status } => {
                let status = *status;
                if app.plans.contains(record.state.plan_id.as_str()) {
                    app.plans.update(record.state.plan_id.as_str(), now, |cur| {
                        let mut p = cur.expect("plan exists");
                        p.status = status;
                        p
                    })?;
                }
            }
            Action::QuizFinished { quiz, decision } => {
                let q = QuizRecord {
                    learner_id: record.learner_id.clone(),
                    session_id: record.state.session_id.clone(),
                    quiz: quiz.clone(),
                    decision: *decision,
                    finished_at: now,
                };
                app.quizzes.put(quiz.quiz_id.as_str(), &q, now)?;
                app.record(
                    &record.learner_id,
                    Some(&record.support_id),
                    EngagementKind::QuizCompleted { score: quiz.score() as u32 },
                )?;
            }
            _ => {}
        }
    }
    let mut lines: Vec<TranscriptLine> = Vec::new();
    if let Some(text) = learner_text {
        lines.push(TranscriptLine { role: Speaker::Learner, text, at });
    }
    lines.extend(step.messages.iter().map(|m| TranscriptLine { role: Speaker::Tutor, text: m.clone(), at }));
    if !lines.is_empty() {
        app.transcripts.update(&id, now, |cur| {
            let mut all = cur.unwrap_or_default();
            all.extend(lines);
            all
        })?;
    }
    let updated = SessionRecord { state: step.state, ..record.clone() };
    app.sessions.put(&id, &updated, now)?;
    if updated.state.phase != record.state.phase {
        app.record(
            &record.learner_id,
            Some(&record.support_id),
            EngagementKind::SessionPhaseChanged { phase: updated.state.phase },
        )?;
    }

    let mut view = session_view(&updated, now);
    view["actions"] = json!(step.actions.iter().map(Action::name).collect::<Vec<_>>());
    view["messages"] = json!(step.messages);
    view["plan_status"] = json!(app.plans.get(updated.state.plan_id.as_str()).map(|p| p.status).unwrap_or(PlanStatus::AwaitingApproval));
    Ok(Json(view))
}

#[derive(Deserialize)]
pub struct ChatBody {
    message: String,
}

/// Streams one tutor reply as server-sent events.
///
/// Each delta is a `data: {"delta": ...}` event. The stream ends with
/// either `event: done` carrying the final text and usage, sent only after
/// the exchange is on disk, or `event: error` carrying the gateway failure.
pub async fn chat(
    State(app): State<AppState>,
    Authed(claims): Authed,
    Path(id): Path<String>,
    JsonBody(body): JsonBody<ChatBody>,
) -> ApiResult<Response> {
    let record = owned_session(&app, &claims, &id, Perm::ChatWithTutor)?;
    let message = body.message.trim().to_owned();
    if message.is_empty() {
        return Err(ApiError::bad_request("message must not be empty"));
    }
    let state = &record.state;
    let task = state.phase.dialogue_task().ok_or_else(|| {
        ApiError::conflict("dialogue_not_accepted", format!("phase {} does not accept chat", state.phase))
            .with_detail(json!({ "phase": state.phase }))
    })?;
    let support = support_of(&app, &record)?;
    let system = prompt_inputs(&app, &support)
        .system_prompt(state, task, &message)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let history = app.transcripts.get(&id).unwrap_or_default();
    let mut messages = vec![ChatMessage::system(system)];
    messages.extend(history.iter().rev().take(CHAT_HISTORY).rev().map(|l| match l.role {
        Speaker::Learner => ChatMessage::user(&l.text),
        Speaker::Tutor => ChatMessage::assistant(&l.text),
    }));
    messages.push(ChatMessage::user(&message));
    let asked_at = app.now();
    let mut completion = app.gateway.complete(messages, Default::default());

    let (tx, rx) = mpsc::channel::<Event>(32);
    tokio::spawn(async move {
        while let Some(ev) = completion.next().await {
            let out = match ev {
                StreamEvent::Delta(d) => Event::default().data(json!({ "delta": d }).to_string()),
                StreamEvent::Final { text, usage } => {
                    let lock = app.session_lock(&id);
                    let _guard = lock.lock().await;
                    let now = app.now();
                    let exchange = [
                        TranscriptLine { role: Speaker::Learner, text: message.clone(), at: asked_at },
                        TranscriptLine { role: Speaker::Tutor, text: text.clone(), at: now },
                    ];
                    let saved = app.transcripts.update(&id, now, |cur| {
                        let mut all = cur.unwrap_or_default();
                        all.extend(exchange);
                        all
                    });
                    match saved {
                        Ok(_) => Event::default()
                            .event("done")
                            .data(json!({ "schema_version": SCHEMA_VERSION, "text": text, "usage": usage }).to_string()),
                        Err(e) => {
                            tracing::error!(error = %e, "could not persist chat exchange");
                            Event::default().event("error").data(
                                json!({
                                    "schema_version": SCHEMA_VERSION,
                                    "kind": "storage",
                                    "retryable": true,
                                    "message": "the reply could not be saved",
                                })
                                .to_string(),
                            )
                        }
                    }
                }
                StreamEvent::Failure(e) => {
                    let mut payload = json!(e);
                    payload["schema_version"] = json!(SCHEMA_VERSION);
                    Event::default().event("error").data(payload.to_string())
                }
            };
            if tx.send(out).await.is_err() {
                return;
            }
        }
    });
    let events = futures::stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|e| (Ok::<_, Infallible>(e), rx)) });
    Ok(Sse::new(events).into_response())
}
