//! JSON Lines trace logs: an optional header line, then one event per line.

use serde::{Deserialize, Serialize};

use super::ShellError;
use crate::simulator::{CampaignHeader, Mission, TraceEvent};

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: CampaignHeader,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub header: Option<CampaignHeader>,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    /// Event ids in order of first appearance.
    pub fn mission_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = Vec::new();
        for e in &self.events {
            if ids.last() != Some(&e.mission) && !ids.contains(&e.mission) {
                ids.push(e.mission);
            }
        }
        ids
    }

    pub fn events_of(&self, mission: u64) -> Vec<TraceEvent> {
        self.events.iter().filter(|e| e.mission == mission).cloned().collect()
    }
}

fn line<T: Serialize>(v: &T) -> Result<String, ShellError> {
    serde_json::to_string(v)
        .map(|s| s + "\n")
        .map_err(|e| ShellError::Other(e.to_string()))
}

pub fn render_trace(header: Option<&CampaignHeader>, missions: &[Mission]) -> Result<String, ShellError> {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&line(&HeaderLine { header: h.clone() })?);
    }
    for m in missions {
        for e in &m.events {
            out.push_str(&line(e)?);
        }
    }
    Ok(out)
}

pub fn parse_trace(text: &str) -> Result<Trace, ShellError> {
    let mut trace = Trace::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| ShellError::Parse {
            line: Some(i + 1),
            message: e.to_string(),
        };
        if line.trim_start().starts_with("{\"header\"") {
            let h: HeaderLine = serde_json::from_str(line).map_err(bad)?;
            trace.header = Some(h.header);
        } else {
            trace.events.push(serde_json::from_str(line).map_err(bad)?);
        }
    }
    Ok(trace)
}
