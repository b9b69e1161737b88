//! Plain-text checkpoint format.
//!
//! ```text
//! vcn-checkpoint 1
//! config {"d_x":2,...}            <- ModelConfig as one JSON line
//! params <count>
//! <name> <rows> <cols> <v_0> <v_1> ... <v_{rows*cols-1}>
//! ...
//! ```
//!
//! Values are row-major and written with Rust's shortest round-trip
//! exponent formatting (`{:e}`), so a load reproduces every bit. Parameter
//! lines appear in store order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{ModelConfig, Vcn};
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &str = "vcn-checkpoint 1";

pub fn write_checkpoint<W: Write>(model: &Vcn, mut out: W) -> Result<()> {
    let config =
        serde_json::to_string(model.config()).map_err(|e| Error::Checkpoint(e.to_string()))?;
    writeln!(out, "{CHECKPOINT_MAGIC}")?;
    writeln!(out, "config {config}")?;
    writeln!(out, "params {}", model.store().len())?;
    for (_, name, t) in model.store().iter() {
        write!(out, "{name} {} {}", t.rows(), t.cols())?;
        for v in t.data() {
            write!(out, " {v:e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_checkpoint(model: &Vcn, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn corrupt(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Checkpoint(format!("line {line}: {msg}"))
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Vcn> {
    let mut lines = BufReader::new(input).lines();
    let mut next = |n: usize| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| corrupt(n, "unexpected end of file"))?
            .map_err(Error::from)
    };
    if next(1)? != CHECKPOINT_MAGIC {
        return Err(corrupt(1, "not a vcn checkpoint"));
    }
    let cfg_line = next(2)?;
    let cfg_json = cfg_line
        .strip_prefix("config ")
        .ok_or_else(|| corrupt(2, "expected `config`"))?;
    let config: ModelConfig = serde_json::from_str(cfg_json).map_err(|e| corrupt(2, e))?;
    let count_line = next(3)?;
    let count: usize = count_line
        .strip_prefix("params ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| corrupt(3, "expected `params <count>`"))?;

    let mut store = ParamStore::new();
    for k in 0..count {
        let n = 4 + k;
        let line = next(n)?;
        let mut fields = line.split(' ');
        let name = fields
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| corrupt(n, "missing name"))?;
        let mut dim = || -> Result<usize> {
            fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| corrupt(n, "bad shape"))
        };
        let rows = dim()?;
        let cols = dim()?;
        let data = fields
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| corrupt(n, format!("`{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(corrupt(n, "non-finite value"));
        }
        let t = Tensor::from_vec(rows, cols, data).map_err(|e| corrupt(n, e))?;
        store.insert(name, t).map_err(|e| corrupt(n, e))?;
    }
    if let Some(extra) = lines.next() {
        if !extra?.trim().is_empty() {
            return Err(corrupt(4 + count, "trailing data"));
        }
    }
    Vcn::from_parts(config, store)
}

pub fn load_checkpoint(path: &Path) -> Result<Vcn> {
    read_checkpoint(fs::File::open(path)?)
}
