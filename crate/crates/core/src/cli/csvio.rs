//! CSV emission and ingestion for state/control traces, prediction tables and
//! raw matrix grids.
//!
//! Numbers are written with Rust's shortest round-trip `Display` form, so a
//! value read back parses to the identical `f64` and re-emits identically.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::simqueue::{Movement, SimTrace, N_MOVEMENTS};
use crate::snapshots::{ControlSequence, TimeSeries};

/// A state trace with its aligned controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub series: TimeSeries,
    pub controls: ControlSequence,
    /// Value of `t` in the first row.
    pub first_second: u64,
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
}

fn default_names(count: usize) -> Vec<String> {
    if count == N_MOVEMENTS {
        Movement::ALL.iter().map(|m| m.name().to_string()).collect()
    } else {
        (0..count).map(|i| i.to_string()).collect()
    }
}

impl Dataset {
    pub fn new(series: TimeSeries, controls: ControlSequence, first_second: u64) -> Result<Self> {
        if series.n_steps() != controls.n_steps() {
            return Err(Error::Mismatch(format!(
                "{} state steps vs {} control steps",
                series.n_steps(),
                controls.n_steps()
            )));
        }
        Ok(Self {
            state_names: default_names(series.n_states()),
            input_names: default_names(controls.n_inputs()),
            series,
            controls,
            first_second,
        })
    }

    pub fn from_trace(trace: &SimTrace) -> Self {
        Self::new(trace.queues.clone(), trace.controls.clone(), trace.start_second)
            .expect("simulator emits aligned traces")
    }

    pub fn n_steps(&self) -> usize {
        self.series.n_steps()
    }
}

fn header(prefix: &str, names: &[String]) -> String {
    let mut h = String::from("t");
    for n in names {
        h.push(',');
        h.push_str(prefix);
        h.push_str(n);
    }
    h
}

fn table(first_t: u64, prefix: &str, names: &[String], m: &DMatrix<f64>) -> String {
    let mut out = header(prefix, names);
    out.push('\n');
    for k in 0..m.ncols() {
        out.push_str(&(first_t + k as u64).to_string());
        for v in m.column(k).iter() {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn states_csv(ds: &Dataset) -> String {
    table(ds.first_second, "q_", &ds.state_names, ds.series.values())
}

pub fn controls_csv(ds: &Dataset) -> String {
    table(ds.first_second, "u_", &ds.input_names, ds.controls.values())
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn emit_csv(ds: &Dataset, state_path: &Path, control_path: &Path) -> Result<()> {
    write_file(state_path, &states_csv(ds))?;
    write_file(control_path, &controls_csv(ds))
}

struct Table {
    names: Vec<String>,
    first_t: u64,
    values: DMatrix<f64>,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_table(text: &str, path: &Path, prefix: &str) -> Result<Table> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "missing header"))?;
    let mut cols = head.split(',');
    if cols.next() != Some("t") {
        return Err(parse_error(path, 1, "header must start with `t`"));
    }
    let names = cols
        .map(|c| {
            c.strip_prefix(prefix)
                .filter(|n| !n.is_empty())
                .map(str::to_string)
                .ok_or_else(|| parse_error(path, 1, format!("column `{c}` lacks the `{prefix}` prefix")))
        })
        .collect::<Result<Vec<String>>>()?;
    if names.is_empty() {
        return Err(parse_error(path, 1, "no value columns"));
    }

    let mut first_t = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() + 1 {
            return Err(parse_error(
                path,
                lineno,
                format!("expected {} fields, found {}", names.len() + 1, fields.len()),
            ));
        }
        let t: u64 = fields[0]
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad time `{}`", fields[0])))?;
        let expected = *first_t.get_or_insert(t) + rows as u64;
        if t != expected {
            return Err(parse_error(
                path,
                lineno,
                format!("time {t} out of sequence, expected {expected}"),
            ));
        }
        for (j, f) in fields[1..].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                parse_error(path, lineno, format!("bad number `{f}` in column {}", j + 1))
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("non-finite value in column {}", j + 1),
                ));
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_error(path, 2, "no data rows"));
    }
    // rows were read state-by-state per time step, i.e. column-major
    Ok(Table {
        values: DMatrix::from_vec(names.len(), rows, data),
        names,
        first_t: first_t.unwrap_or(0),
    })
}

pub fn ingest_csv(state_path: &Path, control_path: &Path) -> Result<Dataset> {
    let states = parse_table(&read_file(state_path)?, state_path, "q_")?;
    let controls = parse_table(&read_file(control_path)?, control_path, "u_")?;
    if states.first_t != controls.first_t || states.values.ncols() != controls.values.ncols() {
        return Err(Error::Mismatch(format!(
            "states cover t={}..{} but controls cover t={}..{}",
            states.first_t,
            states.first_t + states.values.ncols() as u64 - 1,
            controls.first_t,
            controls.first_t + controls.values.ncols() as u64 - 1
        )));
    }
    let mut bad = Vec::new();
    for (k, col) in controls.values.column_iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            if v != 0.0 && v != 1.0 {
                bad.push(format!(
                    "{}: row {} (t={}), column u_{}: value {v} is not 0 or 1",
                    control_path.display(),
                    k + 2,
                    controls.first_t + k as u64,
                    controls.names[i]
                ));
            }
        }
    }
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    Ok(Dataset {
        series: TimeSeries::new(states.values)?,
        controls: ControlSequence::new(controls.values)?,
        first_second: states.first_t,
        state_names: states.names,
        input_names: controls.names,
    })
}

/// Predicted and actual states side by side: `t,pred_<x>…,actual_<x>…`.
pub fn predictions_csv(
    first_t: u64,
    names: &[String],
    predicted: &DMatrix<f64>,
    actual: &DMatrix<f64>,
) -> String {
    let mut out = String::from("t");
    for n in names {
        out.push_str(",pred_");
        out.push_str(n);
    }
    for n in names {
        out.push_str(",actual_");
        out.push_str(n);
    }
    out.push('\n');
    for k in 0..predicted.ncols() {
        out.push_str(&(first_t + k as u64).to_string());
        for v in predicted.column(k).iter().chain(actual.column(k).iter()) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Reads a [`predictions_csv`] table back as `(predicted, actual)`.
pub fn read_predictions_csv(path: &Path) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let text = read_file(path)?;
    let head = text
        .lines()
        .next()
        .ok_or_else(|| parse_error(path, 1, "missing header"))?;
    let width = head.split(',').count().saturating_sub(1);
    if width == 0 || width % 2 != 0 {
        return Err(parse_error(path, 1, "expected equal pred_/actual_ column groups"));
    }
    let n = width / 2;
    let renamed: String = std::iter::once("t".to_string())
        .chain((0..width).map(|j| format!("v_{j}")))
        .collect::<Vec<_>>()
        .join(",");
    for (j, c) in head.split(',').skip(1).enumerate() {
        let want = if j < n { "pred_" } else { "actual_" };
        if !c.starts_with(want) {
            return Err(parse_error(path, 1, format!("column `{c}` should start with `{want}`")));
        }
    }
    let body = text.split_once('\n').map(|(_, b)| b).unwrap_or("");
    let t = parse_table(&format!("{renamed}\n{body}"), path, "v_")?;
    Ok((
        t.values.rows(0, n).into_owned(),
        t.values.rows(n, n).into_owned(),
    ))
}

/// Bare matrix grid, one CSV line per row.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    const STATE_HEADER: &str = "t,q_EB,q_WB,q_NB,q_SB,q_EBL,q_WBL,q_NBL,q_SBL";
    const CONTROL_HEADER: &str = "t,u_EB,u_WB,u_NB,u_SB,u_EBL,u_WBL,u_NBL,u_SBL";

    #[test]
    fn ingest_two_rows_of_eight_states() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(
            dir.path(),
            "s.csv",
            &format!("{STATE_HEADER}\n0,1,2,3,4,5,6,7,8\n1,1.5,0,0,0,0,0,0,9\n"),
        );
        let c = write(
            dir.path(),
            "c.csv",
            &format!("{CONTROL_HEADER}\n0,1,1,0,0,0,0,0,0\n1,0,0,1,1,0,0,0,0\n"),
        );
        let ds = ingest_csv(&s, &c).unwrap();
        assert_eq!(ds.series.n_states(), 8);
        assert_eq!(ds.series.n_steps(), 2);
        assert_eq!(ds.series.values()[(0, 1)], 1.5);
        assert_eq!(ds.state_names[4], "EBL");
        assert_eq!(states_csv(&ds), fs::read_to_string(&s).unwrap());
        assert_eq!(controls_csv(&ds), fs::read_to_string(&c).unwrap());
    }

    #[test]
    fn non_binary_control_named() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "s.csv", "t,q_A\n0,1\n1,2\n");
        let c = write(dir.path(), "c.csv", "t,u_A\n0,1\n1,2\n");
        let Err(Error::Validation(v)) = ingest_csv(&s, &c) else {
            panic!("expected validation error")
        };
        assert!(v[0].contains("row 3") && v[0].contains("u_A"), "{v:?}");
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(dir.path(), "c.csv", "t,u_A\n0,1\n1,0\n");
        for (body, line) in [
            ("t,q_A\n0,1\n1,2,3\n", 3),
            ("t,q_A\n0,1\n2,2\n", 3),
            ("t,q_A\n0,x\n", 2),
            ("x,q_A\n0,1\n", 1),
            ("t,A\n0,1\n", 1),
        ] {
            let s = write(dir.path(), "s.csv", body);
            match ingest_csv(&s, &c) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{body}"),
                other => panic!("{body}: {other:?}"),
            }
        }
    }

    #[test]
    fn misaligned_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "s.csv", "t,q_A\n5,1\n6,2\n");
        let c = write(dir.path(), "c.csv", "t,u_A\n0,1\n1,0\n");
        assert!(matches!(ingest_csv(&s, &c), Err(Error::Mismatch(_))));
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pred = dmatrix![0.1, -0.25; 3.0, 1e-7];
        let act = dmatrix![1.0, 2.0; 3.0, 4.0];
        let names = vec!["A".to_string(), "B".to_string()];
        let text = predictions_csv(401, &names, &pred, &act);
        assert!(text.starts_with("t,pred_A,pred_B,actual_A,actual_B\n401,0.1,3,1,3\n"));
        let p = write(dir.path(), "p.csv", &text);
        let (p2, a2) = read_predictions_csv(&p).unwrap();
        assert_eq!((p2, a2), (pred, act));
    }

    #[test]
    fn matrix_grid_layout() {
        assert_eq!(matrix_csv(&dmatrix![1.0, 2.5; -3.0, 0.0]), "1,2.5\n-3,0\n");
    }
}
