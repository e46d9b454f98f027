//! On-disk layout: one directory per session holding `session.json` (the
//! creation payload) and `records.jsonl` (one judgment per line, in order).

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicbe::judges::ReplayLine;
use unicbe::session::PreferenceRecord;

use crate::api::CreateSession;
use crate::error::ServiceError;
use crate::live::LiveSession;

pub const SESSION_FILE: &str = "session.json";
pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Serialize, Deserialize)]
struct Stored {
    id: String,
    spec: CreateSession,
}

fn dir(root: &Path, id: &str) -> PathBuf {
    root.join(id)
}

pub fn save_new(root: &Path, live: &LiveSession) -> Result<(), ServiceError> {
    let d = dir(root, &live.id);
    fs::create_dir_all(&d).map_err(ServiceError::store)?;
    let stored = Stored {
        id: live.id.clone(),
        spec: live.spec.clone(),
    };
    let text = serde_json::to_string_pretty(&stored).map_err(ServiceError::store)?;
    fs::write(d.join(SESSION_FILE), text).map_err(ServiceError::store)?;
    fs::write(d.join(RECORDS_FILE), "").map_err(ServiceError::store)
}

/// The export line of a record.
pub fn line(live: &LiveSession, rec: &PreferenceRecord) -> Result<String, ServiceError> {
    let (a, b, k) = live.names(rec);
    serde_json::to_string(&ReplayLine::new(a, b, k, rec.r)).map_err(ServiceError::store)
}

pub fn append(root: &Path, live: &LiveSession, rec: &PreferenceRecord) -> Result<(), ServiceError> {
    let mut text = line(live, rec)?;
    text.push('\n');
    let mut f = OpenOptions::new()
        .append(true)
        .open(dir(root, &live.id).join(RECORDS_FILE))
        .map_err(ServiceError::store)?;
    f.write_all(text.as_bytes()).map_err(ServiceError::store)
}

/// Every session under `root`, rebuilt by replaying its log.
pub fn load_all(root: &Path) -> Result<Vec<LiveSession>, ServiceError> {
    let mut out = Vec::new();
    if !root.exists() {
        return Ok(out);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(root)
        .map_err(ServiceError::store)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SESSION_FILE).is_file())
        .collect();
    entries.sort();
    for d in entries {
        let text = fs::read_to_string(d.join(SESSION_FILE)).map_err(ServiceError::store)?;
        let stored: Stored =
            serde_json::from_str(&text).map_err(|e| ServiceError::store(format!("{}: {e}", d.display())))?;
        let mut live = LiveSession::create(stored.id, stored.spec)?;
        let log = d.join(RECORDS_FILE);
        if log.is_file() {
            let reader = BufReader::new(fs::File::open(&log).map_err(ServiceError::store)?);
            for (n, l) in reader.lines().enumerate() {
                let l = l.map_err(ServiceError::store)?;
                if l.trim().is_empty() {
                    continue;
                }
                let at = |e: String| ServiceError::store(format!("{}:{}: {e}", log.display(), n + 1));
                let rec: ReplayLine = serde_json::from_str(&l).map_err(|e| at(e.to_string()))?;
                let r = rec.preference().map_err(at)?;
                live.restore(&rec.model_a, &rec.model_b, &rec.sample(), r)?;
            }
        }
        out.push(live);
    }
    Ok(out)
}
