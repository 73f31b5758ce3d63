//! CSV form of a [`SimTrace`]: one row per vehicle per step.
//!
//! Columns are `t, id, r, theta, v, status, accel, est_agg, override_flag`.
//! `accel` is empty on the final row of a run. `est_agg` lists the writer's
//! table as `id=value` pairs joined by `;`, its own entry carrying its true
//! aggressiveness. Numbers use the shortest decimal that reads back to the
//! same `f64`, so metrics computed from a file match those of the run.
//!
//! ```
//! use std::sync::Arc;
//! use roundabout::agent::{AgentParams, DecisionModel};
//! use roundabout::cost::CostParams;
//! use roundabout::game::StrategySet;
//! use roundabout::geometry::{build_roundabout, RoundaboutSpec};
//! use roundabout::sim::{init_scenario, run, SimParams};
//! use roundabout::trace::{read_trace, write_trace};
//!
//! let model = Arc::new(DecisionModel {
//!     geometry: build_roundabout(RoundaboutSpec::default()).unwrap(),
//!     cost: CostParams::default(),
//!     strategies: StrategySet::default_alphabet(4),
//!     agent: AgentParams::default(),
//!     delta: 0.25,
//! });
//! let trace = run(init_scenario(4, 7, model, SimParams::default()).unwrap()).unwrap();
//! let mut buf = Vec::new();
//! write_trace(&trace, &mut buf).unwrap();
//! let table = read_trace(buf.as_slice()).unwrap();
//! assert_eq!(table.metrics(), trace.metrics());
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::Status;
use crate::sim::{RunMetrics, SimTrace, StateSample};
use crate::VehicleId;

pub const HEADER: [&str; 9] = ["t", "id", "r", "theta", "v", "status", "accel", "est_agg", "override_flag"];

/// File name for the trace of run `seed` with `n` vehicles.
pub fn trace_file_name(n: usize, seed: u64) -> String {
    format!("trace_n{n}_seed{seed}.csv")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Trace(e.to_string())
}

pub fn write_trace<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    for step in &trace.steps {
        let t = step.step as f64 * trace.delta;
        for v in &step.vehicles {
            let est = v
                .estimates
                .iter()
                .map(|(id, w)| format!("{id}={w}"))
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                t.to_string(),
                v.id.to_string(),
                v.config.r.to_string(),
                v.config.theta.to_string(),
                v.config.v.to_string(),
                v.config.status.to_string(),
                v.accel.map(|a| a.0.to_string()).unwrap_or_default(),
                est,
                u8::from(v.overridden).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Trace(e.to_string()))
}

/// One parsed row.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub sample: StateSample,
    pub v: f64,
    pub accel: Option<f64>,
    pub estimates: Vec<(VehicleId, f64)>,
    pub overridden: bool,
}

/// Rows read back from a trace file.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TraceTable {
    pub rows: Vec<TraceRow>,
    /// True aggressiveness, taken from each vehicle's own table entry.
    pub aggressiveness: BTreeMap<VehicleId, f64>,
}

impl TraceTable {
    pub fn samples(&self) -> Vec<StateSample> {
        self.rows.iter().map(|r| r.sample).collect()
    }

    pub fn metrics(&self) -> RunMetrics {
        RunMetrics::from_samples(&self.samples(), &self.aggressiveness)
    }
}

fn parse_f64(field: &str, name: &str, line: u64) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {name} `{field}`")))
}

fn parse_id(field: &str, line: u64) -> Result<VehicleId> {
    field
        .parse()
        .map(VehicleId)
        .map_err(|_| Error::Parse(format!("line {line}: bad id `{field}`")))
}

fn parse_estimates(field: &str, line: u64) -> Result<Vec<(VehicleId, f64)>> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|pair| {
            let (id, w) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {line}: bad estimate `{pair}`")))?;
            Ok((parse_id(id, line)?, parse_f64(w, "estimate", line)?))
        })
        .collect()
}

pub fn read_trace<R: Read>(input: R) -> Result<TraceTable> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if !header.iter().eq(HEADER) {
        return Err(Error::Parse(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut table = TraceTable::default();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let id = parse_id(&record[1], line)?;
        let estimates = parse_estimates(&record[7], line)?;
        if let Some((_, w)) = estimates.iter().find(|(k, _)| *k == id) {
            table.aggressiveness.entry(id).or_insert(*w);
        }
        let status: Status = record[5].parse().map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("line {line}: {m}")),
            other => other,
        })?;
        table.rows.push(TraceRow {
            sample: StateSample {
                t: parse_f64(&record[0], "t", line)?,
                id,
                r: parse_f64(&record[2], "r", line)?,
                theta: parse_f64(&record[3], "theta", line)?,
                status,
            },
            v: parse_f64(&record[4], "v", line)?,
            accel: match &record[6] {
                "" => None,
                a => Some(parse_f64(a, "accel", line)?),
            },
            estimates,
            overridden: match &record[8] {
                "0" => false,
                "1" => true,
                other => return Err(Error::Parse(format!("line {line}: bad override_flag `{other}`"))),
            },
        });
    }
    Ok(table)
}
