//! Plain-text container for identified models.
//!
//! ```text
//! # sigdmd linear model
//! h = 9
//! n = 8
//! q = 8
//! rank_used = 100
//! training_columns = 392
//! A 72 72
//! <72 rows of 72 comma-separated values>
//! B 72 72
//! <72 rows of 72 comma-separated values>
//! ```
//!
//! Matrix entries are row-major scientific notation with 17 significant
//! digits, which round-trips every `f64` exactly.

use std::path::Path;

use nalgebra::DMatrix;

use super::csvio::{read_file, write_file};
use crate::error::{Error, Result};
use crate::sysid::LinearModel;

const MAGIC: &str = "# sigdmd linear model";

fn push_matrix(out: &mut String, label: &str, m: &DMatrix<f64>) {
    out.push_str(&format!("{label} {} {}\n", m.nrows(), m.ncols()));
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
}

pub fn model_to_string(model: &LinearModel) -> String {
    let mut out = format!(
        "{MAGIC}\nh = {}\nn = {}\nq = {}\nrank_used = {}\ntraining_columns = {}\n",
        model.depth, model.n_states, model.n_inputs, model.rank_used, model.training_columns
    );
    push_matrix(&mut out, "A", &model.a);
    push_matrix(&mut out, "B", &model.b);
    out
}

pub fn write_model(path: &Path, model: &LinearModel) -> Result<()> {
    write_file(path, &model_to_string(model))
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        let eof = self.path;
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Parse {
                path: eof.to_path_buf(),
                line: 0,
                message: "unexpected end of file".into(),
            })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn field(&mut self, key: &str) -> Result<usize> {
        let (no, line) = self.next()?;
        let value = line
            .split_once('=')
            .filter(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim())
            .ok_or_else(|| self.err(no, format!("expected `{key} = <value>`")))?;
        value
            .parse()
            .map_err(|_| self.err(no, format!("bad value `{value}` for {key}")))
    }

    fn matrix(&mut self, label: &str) -> Result<DMatrix<f64>> {
        let (no, line) = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(label) {
            return Err(self.err(no, format!("expected `{label} <rows> <cols>`")));
        }
        let dims: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| self.err(no, format!("bad dimension `{p}`"))))
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(self.err(no, "expected two dimensions"));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (no, line) = self.next()?;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != cols {
                return Err(self.err(no, format!("expected {cols} values, found {}", cells.len())));
            }
            for c in cells {
                let v: f64 = c
                    .trim()
                    .parse()
                    .map_err(|_| self.err(no, format!("bad number `{c}`")))?;
                data.push(v);
            }
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }
}

pub fn parse_model(text: &str, path: &Path) -> Result<LinearModel> {
    let mut lines = Lines {
        path,
        inner: text.lines().enumerate(),
    };
    let (no, first) = lines.next()?;
    if first != MAGIC {
        return Err(lines.err(no, format!("missing `{MAGIC}` header")));
    }
    let depth = lines.field("h")?;
    let n = lines.field("n")?;
    let q = lines.field("q")?;
    let rank_used = lines.field("rank_used")?;
    let training_columns = lines.field("training_columns")?;
    let a = lines.matrix("A")?;
    let b = lines.matrix("B")?;
    LinearModel::new(a, b, depth, n, q, rank_used, training_columns)
}

pub fn read_model(path: &Path) -> Result<LinearModel> {
    parse_model(&read_file(path)?, path)
}
