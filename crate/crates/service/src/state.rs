//! Sessions, their single-writer discipline and recovery jobs.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use pmresched::disruption::Event;
use pmresched::recommend::{self, ConstructionSummary};
use pmresched::scoring::{evaluate_full, Breakdown};
use pmresched::search::{SearchConfig, StepLog};
use pmresched::{Instance, Schedule, Score};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};
use crate::store::{SessionRecord, Store};

/// Shared handle to everything the service holds.
#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

struct Shared {
    instances: RwLock<HashMap<String, Arc<Instance>>>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    store: Option<Arc<Store>>,
}

impl AppState {
    /// In-memory state with nothing persisted.
    pub fn in_memory() -> Self {
        AppState::with_store(None)
    }

    /// State persisted under `dir`; instances and sessions already stored
    /// there are loaded.
    pub fn persistent(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let store = Store::open(dir.into())?;
        let (instances, sessions) = store.load()?;
        let state = AppState::with_store(Some(Arc::new(store)));
        {
            let mut map = state.shared.instances.write().expect("instance map poisoned");
            for (id, instance) in instances {
                map.insert(id, Arc::new(instance));
            }
        }
        for record in sessions {
            let session = Session::restore(record, state.shared.store.clone());
            state.insert_session(session);
        }
        Ok(state)
    }

    fn with_store(store: Option<Arc<Store>>) -> Self {
        AppState {
            shared: Arc::new(Shared {
                instances: RwLock::default(),
                sessions: RwLock::default(),
                store,
            }),
        }
    }

    pub fn add_instance(&self, instance: Instance) -> ApiResult<(String, Arc<Instance>)> {
        let id = uuid::Uuid::new_v4().to_string();
        if let Some(store) = &self.shared.store {
            store.save_instance(&id, &instance).map_err(persist_error)?;
        }
        let instance = Arc::new(instance);
        self.shared
            .instances
            .write()
            .expect("instance map poisoned")
            .insert(id.clone(), instance.clone());
        Ok((id, instance))
    }

    pub fn instance(&self, id: &str) -> ApiResult<Arc<Instance>> {
        self.shared
            .instances
            .read()
            .expect("instance map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("instance", id))
    }

    /// Registers a session around an already solved schedule.
    pub fn open_session(&self, instance_id: &str, schedule: Schedule) -> ApiResult<Arc<Session>> {
        let record = SessionRecord {
            id: uuid::Uuid::new_v4().to_string(),
            instance_id: instance_id.to_string(),
            schedule,
            events: Vec::new(),
        };
        if let Some(store) = &self.shared.store {
            store.save_session(&record).map_err(persist_error)?;
        }
        let session = Session::restore(record, self.shared.store.clone());
        self.insert_session(session.clone());
        Ok(session)
    }

    fn insert_session(&self, session: Arc<Session>) {
        self.shared
            .sessions
            .write()
            .expect("session map poisoned")
            .insert(session.id.clone(), session);
    }

    pub fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        self.shared
            .sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .shared
            .sessions
            .read()
            .expect("session map poisoned")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }
}

fn persist_error(err: std::io::Error) -> ApiError {
    ApiError::internal(format!("could not persist state: {err}"))
}

/// An event as recorded in a session's log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoggedEvent {
    /// Revision the event produced.
    pub revision: u64,
    pub event: Event,
}

/// Read-only view published after every mutation.
#[derive(Debug)]
pub struct Snapshot {
    pub schedule: Schedule,
    pub score: Score,
    pub breakdown: Breakdown,
    pub solving: Option<String>,
    pub events: Vec<LoggedEvent>,
}

impl Snapshot {
    pub fn revision(&self) -> u64 {
        self.schedule.revision()
    }
}

struct Writer {
    schedule: Schedule,
    events: Vec<LoggedEvent>,
    solving: Option<String>,
}

/// One schedule under repair.
///
/// Mutations queue on an async mutex and run one at a time; reads take the
/// latest [`Snapshot`] without waiting for them.
pub struct Session {
    pub id: String,
    pub instance_id: String,
    writer: tokio::sync::Mutex<Writer>,
    snapshot: RwLock<Arc<Snapshot>>,
    jobs: Mutex<HashMap<String, Arc<Job>>>,
    store: Option<Arc<Store>>,
}

impl Session {
    fn restore(record: SessionRecord, store: Option<Arc<Store>>) -> Arc<Session> {
        let writer = Writer {
            schedule: record.schedule,
            events: record.events,
            solving: None,
        };
        let snapshot = publish(&writer);
        Arc::new(Session {
            id: record.id,
            instance_id: record.instance_id,
            writer: tokio::sync::Mutex::new(writer),
            snapshot: RwLock::new(snapshot),
            jobs: Mutex::default(),
            store,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot poisoned").clone()
    }

    /// Runs `change` against the current schedule on the blocking pool and
    /// installs its result. Refused while a recovery job is running.
    pub async fn mutate<R, F>(&self, event: Option<Event>, change: F) -> ApiResult<(R, Arc<Snapshot>)>
    where
        F: FnOnce(&Schedule) -> ApiResult<(Schedule, R)> + Send + 'static,
        R: Send + 'static,
    {
        let mut writer = self.writer.lock().await;
        if let Some(job) = &writer.solving {
            return Err(ApiError::solving(job));
        }
        let current = writer.schedule.clone();
        let (next, value) = tokio::task::spawn_blocking(move || change(&current))
            .await
            .map_err(|e| ApiError::internal(format!("worker failed: {e}")))??;
        writer.schedule = next;
        if let Some(event) = event {
            let revision = writer.schedule.revision();
            writer.events.push(LoggedEvent { revision, event });
        }
        let snapshot = self.install(&writer)?;
        Ok((value, snapshot))
    }

    fn install(&self, writer: &Writer) -> ApiResult<Arc<Snapshot>> {
        let snapshot = publish(writer);
        *self.snapshot.write().expect("snapshot poisoned") = snapshot.clone();
        if let Some(store) = &self.store {
            store
                .save_session(&SessionRecord {
                    id: self.id.clone(),
                    instance_id: self.instance_id.clone(),
                    schedule: writer.schedule.clone(),
                    events: writer.events.clone(),
                })
                .map_err(persist_error)?;
        }
        Ok(snapshot)
    }

    /// Starts full recovery in the background. The session refuses other
    /// mutations until the job finishes or is cancelled.
    pub async fn start_recovery(
        self: &Arc<Self>,
        config: SearchConfig,
        expected_revision: Option<u64>,
    ) -> ApiResult<JobStatus> {
        config.validate()?;
        let mut writer = self.writer.lock().await;
        if let Some(job) = &writer.solving {
            return Err(ApiError::solving(job));
        }
        crate::routes::check_revision(expected_revision, &writer.schedule)?;
        let job = Arc::new(Job::new(writer.schedule.revision()));
        self.jobs
            .lock()
            .expect("job map poisoned")
            .insert(job.id.clone(), job.clone());
        writer.solving = Some(job.id.clone());
        let status = job.status();
        let schedule = writer.schedule.clone();
        *self.snapshot.write().expect("snapshot poisoned") = publish(&writer);
        drop(writer);

        let session = self.clone();
        tokio::spawn(async move {
            let cancel = job.cancel.clone();
            let outcome =
                tokio::task::spawn_blocking(move || recommend::full_recovery(&schedule, &config, &cancel)).await;
            let mut writer = session.writer.lock().await;
            writer.solving = None;
            let finished = match outcome {
                Ok(Ok(recovery)) => {
                    writer.schedule = recovery.schedule;
                    Ok((recovery.construction, recovery.search))
                }
                Ok(Err(err)) => Err(ApiError::from(err)),
                Err(err) => Err(ApiError::internal(format!("worker failed: {err}"))),
            };
            let installed = session.install(&writer);
            job.finish(finished, installed);
        });
        Ok(status)
    }

    pub fn job(&self, id: &str) -> ApiResult<Arc<Job>> {
        self.jobs
            .lock()
            .expect("job map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("job", id))
    }
}

fn publish(writer: &Writer) -> Arc<Snapshot> {
    let (score, breakdown) = evaluate_full(&writer.schedule).expect("sessions hold consistent schedules");
    Arc::new(Snapshot {
        schedule: writer.schedule.clone(),
        score,
        breakdown,
        solving: writer.solving.clone(),
        events: writer.events.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Completed,
    Cancelled,
    Failed,
}

/// Pollable state of a recovery job.
#[derive(Debug, Clone, Serialize)]
pub struct JobStatus {
    pub job_id: String,
    pub state: JobState,
    /// Revision the job started from.
    pub started_revision: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<Score>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construction: Option<ConstructionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<StepLog>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
    pub elapsed_ms: u64,
}

pub struct Job {
    pub id: String,
    cancel: Arc<AtomicBool>,
    started: Instant,
    status: Mutex<JobStatus>,
}

impl Job {
    fn new(revision: u64) -> Job {
        let id = uuid::Uuid::new_v4().to_string();
        Job {
            cancel: Arc::new(AtomicBool::new(false)),
            started: Instant::now(),
            status: Mutex::new(JobStatus {
                job_id: id.clone(),
                state: JobState::Running,
                started_revision: revision,
                revision: None,
                score: None,
                construction: None,
                search: None,
                error: None,
                elapsed_ms: 0,
            }),
            id,
        }
    }

    pub fn status(&self) -> JobStatus {
        let mut status = self.status.lock().expect("job status poisoned").clone();
        if status.state == JobState::Running {
            status.elapsed_ms = self.started.elapsed().as_millis() as u64;
        }
        status
    }

    /// Asks the search to stop; it keeps the best schedule found so far.
    pub fn cancel(&self) {
        self.cancel.store(true, Ordering::Relaxed);
    }

    fn finish(
        &self,
        outcome: ApiResult<(Option<ConstructionSummary>, Option<StepLog>)>,
        installed: ApiResult<Arc<Snapshot>>,
    ) {
        let mut status = self.status.lock().expect("job status poisoned");
        status.elapsed_ms = self.started.elapsed().as_millis() as u64;
        if let Ok(snapshot) = &installed {
            status.revision = Some(snapshot.revision());
            status.score = Some(snapshot.score);
        }
        match outcome.and_then(|parts| installed.map(|_| parts)) {
            Ok((construction, search)) => {
                let cancelled = self.cancel.load(Ordering::Relaxed) || search.as_ref().is_some_and(|log| log.cancelled);
                status.state = if cancelled {
                    JobState::Cancelled
                } else {
                    JobState::Completed
                };
                status.construction = construction;
                status.search = search;
            }
            Err(err) => {
                status.state = JobState::Failed;
                status.error = Some(err);
            }
        }
    }
}
