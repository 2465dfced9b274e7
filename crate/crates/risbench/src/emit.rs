//! Result serialization: a fixed-schema CSV and a JSON mirror.
//!
//! Floats are printed at 17 significant digits so every finite value
//! round-trips exactly. A failed cell's objective is NaN in memory, `NaN` in
//! CSV, and `null` in JSON.

use anyhow::{bail, Context, Result};
use risopt::phase::json17;

use crate::experiment::{ResultRow, ResultTable};

/// The CSV schema. Consumers key on this exact string.
pub const CSV_HEADER: &str =
    "experiment_id,method,grid_param,grid_value,trial,seed,objective,wall_time_s,iterations,status";

fn csv_float(v: f64) -> String {
    if v.is_finite() {
        json17::fmt_f64(v)
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn csv_line(row: &ResultRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        row.experiment_id,
        row.method,
        row.grid_param,
        csv_float(row.grid_value),
        row.trial,
        row.seed,
        csv_float(row.objective),
        csv_float(row.wall_time_s),
        row.iterations,
        row.status
    )
}

/// Renders the table as CSV: header plus one line per row. An empty table
/// yields the header alone.
pub fn to_csv(table: &ResultTable) -> String {
    let mut out = String::with_capacity(64 + table.rows.len() * 96);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &table.rows {
        out.push_str(&csv_line(row));
        out.push('\n');
    }
    out
}

/// Renders the table as a JSON array of records mirroring the CSV columns.
pub fn to_json(table: &ResultTable) -> String {
    json17::to_string(&table.rows)
}

fn field<'a>(
    record: &'a serde_json::Value,
    key: &str,
) -> Result<&'a serde_json::Value> {
    record
        .get(key)
        .with_context(|| format!("record missing field '{key}'"))
}

fn float_field(record: &serde_json::Value, key: &str) -> Result<f64> {
    let v = field(record, key)?;
    if v.is_null() {
        // Non-finite floats serialize as null.
        return Ok(f64::NAN);
    }
    v.as_f64()
        .with_context(|| format!("field '{key}' is not a number: {v}"))
}

fn string_field(record: &serde_json::Value, key: &str) -> Result<String> {
    Ok(field(record, key)?
        .as_str()
        .with_context(|| format!("field '{key}' is not a string"))?
        .to_string())
}

fn int_field(record: &serde_json::Value, key: &str) -> Result<u64> {
    field(record, key)?
        .as_u64()
        .with_context(|| format!("field '{key}' is not an unsigned integer"))
}

/// Parses JSON produced by [`to_json`] back into rows.
pub fn parse_json(text: &str) -> Result<Vec<ResultRow>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let records = match value.as_array() {
        Some(a) => a,
        None => bail!("expected a JSON array of records"),
    };
    records
        .iter()
        .map(|r| {
            Ok(ResultRow {
                experiment_id: string_field(r, "experiment_id")?,
                method: string_field(r, "method")?,
                grid_param: string_field(r, "grid_param")?,
                grid_value: float_field(r, "grid_value")?,
                trial: int_field(r, "trial")?,
                seed: int_field(r, "seed")?,
                objective: float_field(r, "objective")?,
                wall_time_s: float_field(r, "wall_time_s")?,
                iterations: int_field(r, "iterations")?,
                status: string_field(r, "status")?,
            })
        })
        .collect()
}

/// Row equality with NaN treated as equal to NaN, for round-trip checks.
pub fn rows_match(a: &ResultRow, b: &ResultRow) -> bool {
    let floats_eq = |x: f64, y: f64| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan());
    a.experiment_id == b.experiment_id
        && a.method == b.method
        && a.grid_param == b.grid_param
        && floats_eq(a.grid_value, b.grid_value)
        && a.trial == b.trial
        && a.seed == b.seed
        && floats_eq(a.objective, b.objective)
        && floats_eq(a.wall_time_s, b.wall_time_s)
        && a.iterations == b.iterations
        && a.status == b.status
}

/// Replaces the wall-time column of a CSV rendering with `-`, leaving
/// everything else byte-identical. Used to compare reruns.
pub fn mask_wall_time(csv: &str) -> String {
    let wall_idx = CSV_HEADER
        .split(',')
        .position(|c| c == "wall_time_s")
        .expect("schema has a wall_time_s column");
    csv.lines()
        .enumerate()
        .map(|(i, line)| {
            if i == 0 {
                return line.to_string();
            }
            let mut cols: Vec<&str> = line.split(',').collect();
            if cols.len() > wall_idx {
                cols[wall_idx] = "-";
            }
            cols.join(",")
        })
        .collect::<Vec<String>>()
        .join("\n")
        + "\n"
}
