//! File formats.
//!
//! Models, policies and solve reports are JSON documents. Value functions,
//! traces and comparisons are CSV. CSV writers accept an optional
//! provenance string emitted as a leading `# ` comment line; CSV readers
//! skip such lines.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::learner::TraceRow;
use crate::metrics::ComparisonRow;
use crate::model::Model;
use crate::policy::JointPolicy;
use crate::solver::SolveReport;
use crate::value::ValueFunction;

/// On-disk form of a [`Model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub n_agents: usize,
    pub space_sizes: Vec<usize>,
    pub gamma: f64,
    pub cost: Vec<f64>,
    /// `kernels[agent][joint_state]` is a list of `(substate, prob)` pairs.
    pub kernels: Vec<Vec<Vec<(usize, f64)>>>,
}

impl From<&Model> for ModelDocument {
    fn from(model: &Model) -> Self {
        Self {
            n_agents: model.n_agents(),
            space_sizes: model.space().sizes().to_vec(),
            gamma: model.gamma(),
            cost: model.cost().to_vec(),
            kernels: model
                .kernels()
                .iter()
                .map(|rows| rows.iter().map(|r| r.iter().collect()).collect())
                .collect(),
        }
    }
}

impl TryFrom<ModelDocument> for Model {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Model> {
        if doc.n_agents != doc.space_sizes.len() {
            return Err(Error::InvalidModel(format!(
                "n_agents is {} but {} space sizes given",
                doc.n_agents,
                doc.space_sizes.len()
            )));
        }
        let kernels = doc
            .kernels
            .into_iter()
            .map(|rows| rows.into_iter().map(Distribution::new).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Model::new(doc.space_sizes, kernels, doc.cost, doc.gamma)
    }
}

pub fn model_to_json(model: &Model) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelDocument::from(model))?)
}

pub fn model_from_json(text: &str) -> Result<Model> {
    serde_json::from_str::<ModelDocument>(text)?.try_into()
}

pub fn read_model<R: Read>(reader: R) -> Result<Model> {
    serde_json::from_reader::<_, ModelDocument>(reader)?.try_into()
}

/// A policy file: the rows plus optional free-form provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub rows: JointPolicy,
}

pub fn write_policy<W: Write>(mut writer: W, policy: &JointPolicy, config: Option<&serde_json::Value>) -> Result<()> {
    let doc = PolicyDocument {
        config: config.cloned(),
        rows: policy.clone(),
    };
    serde_json::to_writer(&mut writer, &doc)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_policy<R: Read>(reader: R, model: &Model) -> Result<JointPolicy> {
    let doc: PolicyDocument = serde_json::from_reader(reader)?;
    doc.rows.validate(model)?;
    Ok(doc.rows)
}

#[derive(Serialize)]
struct SolveDocument<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a serde_json::Value>,
    #[serde(flatten)]
    report: &'a SolveReport,
}

pub fn write_solve_report<W: Write>(mut writer: W, report: &SolveReport, config: Option<&serde_json::Value>) -> Result<()> {
    serde_json::to_writer(&mut writer, &SolveDocument { config, report })?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_solve_report<R: Read>(reader: R) -> Result<SolveReport> {
    Ok(serde_json::from_reader(reader)?)
}

fn write_comment<W: Write>(writer: &mut W, provenance: Option<&str>) -> Result<()> {
    if let Some(text) = provenance {
        for line in text.lines() {
            writeln!(writer, "# {line}")?;
        }
    }
    Ok(())
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader)
}

/// `state_index,<column>` rows.
pub fn write_values_csv<W: Write>(mut writer: W, column: &str, v: &ValueFunction, provenance: Option<&str>) -> Result<()> {
    write_comment(&mut writer, provenance)?;
    let mut w = csv_writer(writer);
    w.write_record(["state_index", column])?;
    for (s, value) in v.iter().enumerate() {
        w.write_record([s.to_string(), value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a two-column value CSV; rows must cover `0..n` in order.
pub fn read_values_csv<R: Read>(reader: R) -> Result<ValueFunction> {
    let mut values = Vec::new();
    for (i, record) in csv_reader(reader).records().enumerate() {
        let record = record?;
        let missing = || Error::Parse(format!("row {i}: missing column"));
        let index: usize = record.get(0).ok_or_else(missing)?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
        if index != i {
            return Err(Error::Parse(format!("row {i} has state index {index}")));
        }
        let value: f64 = record.get(1).ok_or_else(missing)?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
        values.push(value);
    }
    Ok(ValueFunction::new(values))
}

pub const TRACE_HEADER: [&str; 6] = ["k", "sup_err_vstar", "bellman_residual", "mean_return", "alpha", "d_size"];

pub fn write_trace_csv<W: Write>(mut writer: W, trace: &[TraceRow], provenance: Option<&str>) -> Result<()> {
    write_comment(&mut writer, provenance)?;
    let mut w = csv_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for row in trace {
        w.write_record([
            row.k.to_string(),
            row.sup_err_vstar.map(|e| e.to_string()).unwrap_or_default(),
            row.bellman_residual.to_string(),
            row.mean_return.to_string(),
            row.alpha.to_string(),
            row.d_size.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per trace row, including the sampled-state sets.
pub fn write_trace_jsonl<W: Write>(mut writer: W, trace: &[TraceRow]) -> Result<()> {
    for row in trace {
        serde_json::to_writer(&mut writer, row)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace_csv<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for record in csv_reader(reader).records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let num = |i: usize| -> Result<f64> { field(i).parse().map_err(|e| Error::Parse(format!("{e}"))) };
        let int = |i: usize| -> Result<usize> { field(i).parse().map_err(|e| Error::Parse(format!("{e}"))) };
        rows.push(TraceRow {
            k: int(0)?,
            sup_err_vstar: if field(1).is_empty() { None } else { Some(num(1)?) },
            bellman_residual: num(2)?,
            mean_return: num(3)?,
            alpha: num(4)?,
            d_size: int(5)?,
            sampled: None,
        });
    }
    Ok(rows)
}

/// Formats a sub-state tuple as `a:b:…`, the start-state column format.
pub fn format_tuple(tuple: &[usize]) -> String {
    tuple
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(":")
}

pub fn parse_tuple(text: &str) -> Result<Vec<usize>> {
    text.split([':', ',', ' '])
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|e| Error::Parse(format!("bad state {text:?}: {e}"))))
        .collect()
}

pub const COMPARE_HEADER: [&str; 6] = ["start_state", "policy", "mean_return", "std_return", "n_episodes", "horizon"];

pub fn write_compare_csv<W: Write>(mut writer: W, rows: &[ComparisonRow], provenance: Option<&str>) -> Result<()> {
    write_comment(&mut writer, provenance)?;
    let mut w = csv_writer(writer);
    w.write_record(COMPARE_HEADER)?;
    for row in rows {
        w.write_record([
            format_tuple(&row.start_state),
            row.policy.clone(),
            row.mean_return.to_string(),
            row.std_return.to_string(),
            row.n_episodes.to_string(),
            row.horizon.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the `# ` comment lines at the top of a CSV, without the prefix.
pub fn read_provenance<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        match line.strip_prefix("# ") {
            Some(rest) => out.push(rest.to_string()),
            None => break,
        }
    }
    Ok(out)
}
