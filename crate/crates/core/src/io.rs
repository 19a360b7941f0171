//! Canonical sequence files: CSV rows `user_id,timestamp,symbol`, one row per
//! symbol, rows of a user in temporal order. Symbols are dataset-wide ids;
//! the timestamp column may be empty for sequences without time.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::SymbolSequence;

pub const HEADER: [&str; 3] = ["user_id", "timestamp", "symbol"];

/// One user's sequence with dataset-wide symbol ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSequence {
    pub user: String,
    pub labels: Vec<u64>,
    pub timestamps: Option<Vec<f64>>,
}

impl UserSequence {
    pub fn new(user: impl Into<String>, labels: Vec<u64>, timestamps: Option<Vec<f64>>) -> Result<Self> {
        if let Some(ts) = &timestamps {
            if ts.len() != labels.len() {
                return Err(Error::invalid(format!(
                    "{} timestamps for {} symbols",
                    ts.len(),
                    labels.len()
                )));
            }
        }
        Ok(Self { user: user.into(), labels, timestamps })
    }

    /// Wraps a dense sequence, keeping its ids as labels.
    pub fn from_sequence(user: impl Into<String>, seq: &SymbolSequence) -> Self {
        Self {
            user: user.into(),
            labels: seq.symbols().iter().map(|&s| s as u64).collect(),
            timestamps: seq.timestamps().map(<[f64]>::to_vec),
        }
    }

    /// Densely re-encoded sequence for analysis.
    pub fn to_sequence(&self) -> Result<SymbolSequence> {
        SymbolSequence::encode(self.labels.iter().copied(), self.timestamps.clone())
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    user_id: String,
    timestamp: Option<f64>,
    symbol: u64,
}

/// Writes users in the given order.
pub fn write_canonical<W: Write>(writer: W, users: &[UserSequence]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for u in users {
        for (i, label) in u.labels.iter().enumerate() {
            let t = u.timestamps.as_ref().map(|ts| ts[i].to_string()).unwrap_or_default();
            w.write_record([u.user.as_str(), t.as_str(), label.to_string().as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a canonical file; users come back sorted by id. A user's rows need
/// not be contiguous, but must be in temporal order.
pub fn read_canonical<R: Read>(reader: R) -> Result<Vec<UserSequence>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }
    let mut users: std::collections::BTreeMap<String, (Vec<u64>, Vec<Option<f64>>)> = Default::default();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let entry = users.entry(row.user_id).or_default();
        entry.0.push(row.symbol);
        entry.1.push(row.timestamp);
    }
    if users.is_empty() {
        return Err(Error::invalid("sequence file has no rows"));
    }
    users
        .into_iter()
        .map(|(user, (labels, ts))| {
            let timestamps = if ts.iter().all(Option::is_some) {
                Some(ts.into_iter().flatten().collect())
            } else if ts.iter().all(Option::is_none) {
                None
            } else {
                return Err(Error::invalid(format!("user {user} has some rows without timestamps")));
            };
            UserSequence::new(user, labels, timestamps)
        })
        .collect()
}
