use std::collections::HashMap;
use std::sync::atomic::AtomicBool;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::Router;
use pmresched::disruption::{self, ImpactReport};
use pmresched::generator::{self, GeneratorParams, Preset};
use pmresched::heuristics::construct;
use pmresched::recommend::{self, RepairOption, RepairProfile, Suggestion, DEFAULT_SUGGESTION_COUNT};
use pmresched::scoring::Breakdown;
use pmresched::search::{self, Algorithm, SearchConfig, StepLog};
use pmresched::{Assignment, Instance, Schedule, Score};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};
use crate::extract::{EventBody, Json};
use crate::state::{AppState, JobStatus, LoggedEvent};

/// Unimproved-step limit used when a request gives no stopping rule.
pub const DEFAULT_UNIMPROVED_LIMIT: u64 = 20_000;
/// Time limit for recovery jobs when the request gives no stopping rule.
pub const DEFAULT_RECOVERY_MILLIS: u64 = 10_000;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/instances", post(upload_instance))
        .route("/instances/generate", post(generate_instance))
        .route("/instances/{id}", get(get_instance))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/schedule", get(get_schedule))
        .route("/sessions/{id}/events", post(post_event).get(list_events))
        .route("/sessions/{id}/options", get(get_options))
        .route("/sessions/{id}/suggestions", get(get_suggestions))
        .route("/sessions/{id}/assign", post(assign))
        .route("/sessions/{id}/auto", post(auto))
        .route("/sessions/{id}/recover", post(recover))
        .route("/sessions/{id}/jobs/{job_id}", get(get_job))
        .route("/sessions/{id}/jobs/{job_id}/cancel", post(cancel_job))
        .route("/sessions/{id}/pins", post(set_pins))
        .route("/sessions/{id}/reschedule", post(reschedule))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state)
}

/// Body of the solving endpoints: search settings plus the revision the
/// caller last saw.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    pub algorithm: Option<Algorithm>,
    pub late_acceptance_length: Option<usize>,
    pub time_limit_ms: Option<u64>,
    pub unimproved_limit: Option<u64>,
    pub seed: Option<u64>,
    pub revision: Option<u64>,
}

impl SolveRequest {
    fn search(&self) -> SearchRequest {
        SearchRequest {
            algorithm: self.algorithm,
            late_acceptance_length: self.late_acceptance_length,
            time_limit_ms: self.time_limit_ms,
            unimproved_limit: self.unimproved_limit,
            seed: self.seed,
        }
    }
}

/// Optional search settings; fields left out take the search defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    pub algorithm: Option<Algorithm>,
    pub late_acceptance_length: Option<usize>,
    pub time_limit_ms: Option<u64>,
    pub unimproved_limit: Option<u64>,
    pub seed: Option<u64>,
}

impl SearchRequest {
    fn config(&self, default: SearchConfig) -> SearchConfig {
        let mut config = if self.time_limit_ms.is_some() || self.unimproved_limit.is_some() {
            SearchConfig {
                time_limit_ms: self.time_limit_ms,
                unimproved_limit: self.unimproved_limit,
                ..default
            }
        } else {
            default
        };
        if let Some(algorithm) = self.algorithm {
            config.algorithm = algorithm;
        }
        if let Some(length) = self.late_acceptance_length {
            config.late_acceptance_length = length;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config
    }
}

fn step_limited() -> SearchConfig {
    SearchConfig::step_limited(DEFAULT_UNIMPROVED_LIMIT, 0)
}

pub(crate) fn check_revision(expected: Option<u64>, schedule: &Schedule) -> ApiResult<()> {
    match expected {
        Some(expected) if expected != schedule.revision() => Err(pmresched::Error::Stale {
            expected,
            actual: schedule.revision(),
        }
        .into()),
        _ => Ok(()),
    }
}

fn parse_profile(raw: Option<&str>, field: &str) -> ApiResult<RepairProfile> {
    match raw {
        None => Ok(RepairProfile::default()),
        Some(raw) => raw
            .parse()
            .map_err(|e: pmresched::Error| ApiError::validation(field, e.to_string())),
    }
}

async fn blocking<T: Send + 'static>(work: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

// Instances

#[derive(Debug, Serialize)]
struct InstanceCreated {
    instance_id: String,
    tasks: usize,
    technicians: usize,
    horizon_days: u32,
    occupancy: f64,
}

fn instance_created(id: String, instance: &Instance) -> (StatusCode, axum::Json<InstanceCreated>) {
    (
        StatusCode::CREATED,
        axum::Json(InstanceCreated {
            instance_id: id,
            tasks: instance.tasks().len(),
            technicians: instance.technicians().len(),
            horizon_days: instance.grid().horizon_days(),
            occupancy: instance.measured_occupancy(),
        }),
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    preset: Option<String>,
    params: Option<GeneratorParams>,
    seed: Option<u64>,
}

async fn generate_instance(
    State(state): State<AppState>,
    Json(req): Json<GenerateRequest>,
) -> ApiResult<impl IntoResponse> {
    let params = match (req.preset, req.params) {
        (Some(name), None) => {
            let preset: Preset = name
                .parse()
                .map_err(|e: pmresched::Error| ApiError::validation("preset", e.to_string()))?;
            preset.params(req.seed.unwrap_or(0))
        }
        (None, Some(params)) => match req.seed {
            Some(seed) => params.with_seed(seed),
            None => params,
        },
        _ => {
            return Err(ApiError::validation(
                "preset",
                "give exactly one of `preset` and `params`",
            ))
        }
    };
    let instance = blocking(move || Ok(generator::generate(&params)?)).await?;
    let (id, instance) = state.add_instance(instance)?;
    Ok(instance_created(id, &instance))
}

async fn upload_instance(
    State(state): State<AppState>,
    Json(instance): Json<Instance>,
) -> ApiResult<impl IntoResponse> {
    let (id, instance) = state.add_instance(instance)?;
    Ok(instance_created(id, &instance))
}

async fn get_instance(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let instance = state.instance(&id)?;
    Ok(axum::Json(instance.as_ref().clone()))
}

// Sessions

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    instance_id: String,
    #[serde(default)]
    search: SearchRequest,
    profile: Option<String>,
}

#[derive(Debug, Serialize)]
struct SessionCreated {
    session_id: String,
    revision: u64,
    score: Score,
    initialized: bool,
}

async fn create_session(State(state): State<AppState>, Json(req): Json<CreateSession>) -> ApiResult<impl IntoResponse> {
    let instance = state.instance(&req.instance_id)?;
    let profile = parse_profile(req.profile.as_deref(), "profile")?;
    let config = req.search.config(step_limited());
    config.validate()?;
    let schedule = blocking(move || {
        let built = construct(&Schedule::new(instance), &profile.heuristic, None)?;
        Ok(search::improve(&built.schedule, &config)?.schedule)
    })
    .await?;
    let session = state.open_session(&req.instance_id, schedule)?;
    let snapshot = session.snapshot();
    tracing::info!(session = %session.id, score = %snapshot.score, "session opened");
    Ok((
        StatusCode::CREATED,
        axum::Json(SessionCreated {
            session_id: session.id.clone(),
            revision: snapshot.revision(),
            score: snapshot.score,
            initialized: snapshot.schedule.is_initialized(),
        }),
    ))
}

async fn list_sessions(State(state): State<AppState>) -> impl IntoResponse {
    axum::Json(serde_json::json!({ "sessions": state.session_ids() }))
}

#[derive(Serialize)]
struct ScheduleView<'a> {
    session_id: &'a str,
    instance_id: &'a str,
    revision: u64,
    score: Score,
    breakdown: &'a Breakdown,
    initialized: bool,
    unassigned: Vec<String>,
    pins: Vec<String>,
    solving: Option<&'a str>,
    schedule: &'a Schedule,
}

async fn get_schedule(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let session = state.session(&id)?;
    let snapshot = session.snapshot();
    let view = ScheduleView {
        session_id: &session.id,
        instance_id: &session.instance_id,
        revision: snapshot.revision(),
        score: snapshot.score,
        breakdown: &snapshot.breakdown,
        initialized: snapshot.schedule.is_initialized(),
        unassigned: snapshot.schedule.unassigned_ids(),
        pins: snapshot.schedule.pinned_ids(),
        solving: snapshot.solving.as_deref(),
        schedule: &snapshot.schedule,
    };
    Ok(axum::Json(
        serde_json::to_value(view).map_err(|e| ApiError::internal(e.to_string()))?,
    ))
}

// Events

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RevisionQuery {
    revision: Option<u64>,
}

#[derive(Debug, Serialize)]
struct EventApplied {
    revision: u64,
    score: Score,
    report: ImpactReport,
}

async fn post_event(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<RevisionQuery>, axum::extract::rejection::QueryRejection>,
    EventBody(event): EventBody,
) -> ApiResult<impl IntoResponse> {
    let Query(query) = query.map_err(|e| ApiError::validation("revision", e.body_text()))?;
    let session = state.session(&id)?;
    let logged = event.clone();
    let (report, snapshot) = session
        .mutate(Some(logged), move |schedule| {
            check_revision(query.revision, schedule)?;
            Ok(disruption::apply_event(schedule, &event)?)
        })
        .await?;
    tracing::info!(session = %session.id, kind = %report.kind, revision = snapshot.revision(), "event applied");
    Ok(axum::Json(EventApplied {
        revision: snapshot.revision(),
        score: snapshot.score,
        report,
    }))
}

#[derive(Serialize)]
struct EventLog<'a> {
    revision: u64,
    events: &'a [LoggedEvent],
}

async fn list_events(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let snapshot = state.session(&id)?.snapshot();
    let body = serde_json::to_value(EventLog {
        revision: snapshot.revision(),
        events: &snapshot.events,
    })
    .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(axum::Json(body))
}

// Recommendation workflow

#[derive(Debug, Serialize)]
struct OptionView {
    id: RepairOption,
    name: &'static str,
}

#[derive(Debug, Serialize)]
struct Options {
    revision: u64,
    options: Vec<RepairOption>,
    details: Vec<OptionView>,
}

async fn get_options(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let snapshot = state.session(&id)?.snapshot();
    let options = recommend::available_options(&snapshot.schedule);
    Ok(axum::Json(Options {
        revision: snapshot.revision(),
        details: options.iter().map(|&id| OptionView { id, name: id.name() }).collect(),
        options,
    }))
}

#[derive(Debug, Serialize)]
struct Suggestions {
    revision: u64,
    task: String,
    profile: String,
    suggestions: Vec<Suggestion>,
}

async fn get_suggestions(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    let task = query
        .get("task")
        .cloned()
        .ok_or_else(|| ApiError::validation("task", "missing query parameter `task`"))?;
    let k = match query.get("k") {
        None => DEFAULT_SUGGESTION_COUNT,
        Some(raw) => raw
            .parse()
            .map_err(|_| ApiError::validation("k", format!("`{raw}` is not a non-negative integer")))?,
    };
    let profile = parse_profile(query.get("profile").map(String::as_str), "profile")?;
    let snapshot = state.session(&id)?.snapshot();
    let revision = snapshot.revision();
    let name = profile.name.clone();
    let (task, suggestions) = blocking(move || {
        let list = recommend::suggest(&snapshot.schedule, &task, k, &profile)?;
        Ok((task, list))
    })
    .await?;
    Ok(axum::Json(Suggestions {
        revision,
        task,
        profile: name,
        suggestions,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignRequest {
    task: String,
    technician: String,
    start: u32,
    revision: u64,
}

#[derive(Debug, Serialize)]
struct AssignApplied {
    revision: u64,
    score: Score,
    delta: Score,
    breakdown: Breakdown,
    initialized: bool,
}

async fn assign(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<AssignRequest>,
) -> ApiResult<impl IntoResponse> {
    let session = state.session(&id)?;
    let ((delta, breakdown), snapshot) = session
        .mutate(None, move |schedule| {
            let assignment = Assignment {
                technician: req.technician,
                start: req.start,
            };
            let applied = recommend::apply_assignment(schedule, &req.task, &assignment, req.revision)?;
            Ok((applied.schedule, (applied.delta, applied.breakdown)))
        })
        .await?;
    Ok(axum::Json(AssignApplied {
        revision: snapshot.revision(),
        score: snapshot.score,
        delta,
        breakdown,
        initialized: snapshot.schedule.is_initialized(),
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AutoRequest {
    profile: Option<String>,
    revision: Option<u64>,
}

#[derive(Debug, Serialize)]
struct AutoApplied {
    revision: u64,
    score: Score,
    initialized: bool,
    placements: Vec<Suggestion>,
}

async fn auto(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<AutoRequest>,
) -> ApiResult<impl IntoResponse> {
    let profile = parse_profile(req.profile.as_deref(), "profile")?;
    let session = state.session(&id)?;
    let (placements, snapshot) = session
        .mutate(None, move |schedule| {
            check_revision(req.revision, schedule)?;
            if !recommend::available_options(schedule).contains(&RepairOption::AutomaticAssignment) {
                return Err(pmresched::Error::State("schedule is initialized; nothing to assign".into()).into());
            }
            let auto = recommend::auto_assign(schedule, &profile)?;
            Ok((auto.schedule, auto.log))
        })
        .await?;
    Ok(axum::Json(AutoApplied {
        revision: snapshot.revision(),
        score: snapshot.score,
        initialized: snapshot.schedule.is_initialized(),
        placements,
    }))
}

// Recovery jobs and rescheduling

async fn recover(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SolveRequest>,
) -> ApiResult<impl IntoResponse> {
    let session = state.session(&id)?;
    let config = req.search().config(SearchConfig::time_limited(
        Duration::from_millis(DEFAULT_RECOVERY_MILLIS),
        0,
    ));
    let status = session.start_recovery(config, req.revision).await?;
    tracing::info!(session = %session.id, job = %status.job_id, "recovery started");
    Ok((StatusCode::ACCEPTED, axum::Json(status)))
}

async fn get_job(
    State(state): State<AppState>,
    Path((id, job_id)): Path<(String, String)>,
) -> ApiResult<axum::Json<JobStatus>> {
    let job = state.session(&id)?.job(&job_id)?;
    Ok(axum::Json(job.status()))
}

async fn cancel_job(
    State(state): State<AppState>,
    Path((id, job_id)): Path<(String, String)>,
) -> ApiResult<impl IntoResponse> {
    let job = state.session(&id)?.job(&job_id)?;
    job.cancel();
    Ok((StatusCode::ACCEPTED, axum::Json(job.status())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PinsRequest {
    task_ids: Vec<String>,
    revision: Option<u64>,
}

#[derive(Debug, Serialize)]
struct PinsApplied {
    revision: u64,
    pins: Vec<String>,
}

async fn set_pins(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<PinsRequest>,
) -> ApiResult<impl IntoResponse> {
    let session = state.session(&id)?;
    let ((), snapshot) = session
        .mutate(None, move |schedule| {
            check_revision(req.revision, schedule)?;
            let mut next = schedule.clone();
            next.set_pins(&req.task_ids)?;
            Ok((next, ()))
        })
        .await?;
    Ok(axum::Json(PinsApplied {
        revision: snapshot.revision(),
        pins: snapshot.schedule.pinned_ids(),
    }))
}

#[derive(Debug, Serialize)]
struct Rescheduled {
    revision: u64,
    score: Score,
    pins: Vec<String>,
    log: StepLog,
}

async fn reschedule(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SolveRequest>,
) -> ApiResult<impl IntoResponse> {
    let session = state.session(&id)?;
    let config = req.search().config(step_limited());
    config.validate()?;
    let revision = req.revision;
    let (log, snapshot) = session
        .mutate(None, move |schedule| {
            check_revision(revision, schedule)?;
            let pins = schedule.pinned_ids();
            let improved = recommend::dynamic_reschedule(schedule, &pins, &config, &AtomicBool::new(false))?;
            Ok((improved.schedule, improved.log))
        })
        .await?;
    Ok(axum::Json(Rescheduled {
        revision: snapshot.revision(),
        score: snapshot.score,
        pins: snapshot.schedule.pinned_ids(),
        log,
    }))
}
