//! CSV event files with a JSON sidecar.
//!
//! The CSV header is `alpha_idx,beta_idx,a,b`; column `a` is omitted when
//! the first-polariser outcome has been projected away.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DemonPolicy, EventBatch, EventRecord, Grid, SettingPolicy};
use crate::corestats::ExperimentKind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub experiment: ExperimentKind,
    pub grid: Grid,
    pub seed: u64,
    pub policy: SettingPolicy,
    pub demon: DemonPolicy,
    pub n: u64,
    pub columns: Vec<String>,
}

impl EventBatch {
    pub fn meta(&self) -> BatchMeta {
        BatchMeta {
            experiment: self.experiment,
            grid: self.grid.clone(),
            seed: self.seed,
            policy: self.policy,
            demon: self.demon,
            n: self.events.len() as u64,
            columns: self.columns().iter().map(|c| c.to_string()).collect(),
        }
    }

    fn columns(&self) -> &'static [&'static str] {
        if self.first_visible {
            &["alpha_idx", "beta_idx", "a", "b"]
        } else {
            &["alpha_idx", "beta_idx", "b"]
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns())?;
        let mut row: Vec<String> = Vec::with_capacity(4);
        for e in &self.events {
            row.clear();
            row.push(e.alpha_index.to_string());
            row.push(e.beta_index.to_string());
            if let Some(a) = e.first_outcome {
                row.push(a.to_string());
            }
            row.push(e.second_outcome.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?))?;
        let mut side = BufWriter::new(File::create(dir.join(format!("{stem}.json")))?);
        serde_json::to_writer_pretty(&mut side, &self.meta())?;
        side.write_all(b"\n")?;
        side.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, meta: BatchMeta) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let with_a = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["alpha_idx", "beta_idx", "a", "b"] => true,
            ["alpha_idx", "beta_idx", "b"] => false,
            other => return Err(Error::MalformedBatch(format!("unexpected header {other:?}"))),
        };
        if header != meta.columns {
            return Err(Error::MalformedBatch(format!(
                "CSV columns {header:?} disagree with sidecar {:?}",
                meta.columns
            )));
        }
        let mut events = Vec::with_capacity(meta.n as usize);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<u16> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::MalformedBatch(format!("row {}: bad field {k}", line + 1)))
            };
            let (first, b) = if with_a {
                (Some(field(2)? as u8), field(3)? as u8)
            } else {
                (None, field(2)? as u8)
            };
            events.push(EventRecord {
                alpha_index: field(0)?,
                beta_index: field(1)?,
                first_outcome: first,
                second_outcome: b,
            });
        }
        if events.len() as u64 != meta.n {
            return Err(Error::MalformedBatch(format!(
                "sidecar declares {} events, CSV has {}",
                meta.n,
                events.len()
            )));
        }
        let batch = EventBatch::from_parts(meta.experiment, meta.grid, meta.seed, meta.policy, meta.demon, events)?;
        if batch.first_visible != with_a && !batch.events.is_empty() {
            return Err(Error::MalformedBatch("column `a` mismatch".into()));
        }
        Ok(batch)
    }

    /// Loads a CSV and its sidecar (the CSV path with a `.json` extension).
    pub fn load(csv_path: &Path) -> Result<Self> {
        let meta: BatchMeta = serde_json::from_reader(BufReader::new(File::open(csv_path.with_extension("json"))?))?;
        Self::read_csv(BufReader::new(File::open(csv_path)?), meta)
    }
}
