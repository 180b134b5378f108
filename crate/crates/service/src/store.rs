//! JSON snapshots of instances and sessions on disk.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use pmresched::{Instance, Schedule};
use serde::{Deserialize, Serialize};

use crate::state::LoggedEvent;

/// Everything loaded back at start-up.
pub type Loaded = (Vec<(String, Instance)>, Vec<SessionRecord>);

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub instance_id: String,
    pub schedule: Schedule,
    #[serde(default)]
    pub events: Vec<LoggedEvent>,
}

/// Layout: `<dir>/instances/<id>.json` and `<dir>/sessions/<id>.json`.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: PathBuf) -> io::Result<Store> {
        fs::create_dir_all(dir.join("instances"))?;
        fs::create_dir_all(dir.join("sessions"))?;
        Ok(Store { dir })
    }

    pub fn save_instance(&self, id: &str, instance: &Instance) -> io::Result<()> {
        write_atomic(&self.dir.join("instances").join(format!("{id}.json")), instance)
    }

    pub fn save_session(&self, record: &SessionRecord) -> io::Result<()> {
        write_atomic(&self.dir.join("sessions").join(format!("{}.json", record.id)), record)
    }

    pub fn load(&self) -> io::Result<Loaded> {
        let instances = read_dir::<Instance>(&self.dir.join("instances"))?.into_iter().collect();
        let sessions = read_dir::<SessionRecord>(&self.dir.join("sessions"))?
            .into_iter()
            .map(|(_, record)| record)
            .collect();
        Ok((instances, sessions))
    }
}

fn write_atomic<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(value)?)?;
    fs::rename(tmp, path)
}

fn read_dir<T: for<'de> Deserialize<'de>>(dir: &Path) -> io::Result<Vec<(String, T)>> {
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    paths.sort();
    for path in paths {
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
            continue;
        };
        let value = serde_json::from_slice(&fs::read(&path)?)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
        out.push((id, value));
    }
    Ok(out)
}
