//! Ensemble files.
//!
//! Binary layout: three little-endian `u64` header fields `(len, m, d)`
//! followed by `len·m·d` little-endian `f64` values, row-major over
//! `(replica, time, coordinate)`. `len` is the number of stored time
//! points per replica: `n` for observable ensembles, `n + 1` for paths.
//!
//! CSV layout: header `replica,index,c0,…,c{d-1}` and one line per stored
//! time point.

use std::io::{Read, Write};

use crate::dynamics::Ensemble;
use crate::error::{Error, Result};
use crate::paths::{PathEnsemble, StepPath};

/// A dense `(len, m, d)` array as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix3 {
    pub len: usize,
    pub m: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

pub fn write_binary<W: Write>(mut w: W, len: usize, m: usize, d: usize, data: &[f64]) -> Result<()> {
    if data.len() != len * m * d {
        return Err(Error::SizeMismatch { left: data.len(), right: len * m * d });
    }
    for field in [len, m, d] {
        w.write_all(&(field as u64).to_le_bytes())?;
    }
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Matrix3> {
    let mut word = [0u8; 8];
    let mut header = [0usize; 3];
    for h in &mut header {
        r.read_exact(&mut word)?;
        *h = usize::try_from(u64::from_le_bytes(word)).map_err(|_| Error::Format("header field too large".into()))?;
    }
    let [len, m, d] = header;
    let count = len
        .checked_mul(m)
        .and_then(|x| x.checked_mul(d))
        .ok_or_else(|| Error::Format("header overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!("expected {} payload bytes, found {}", count * 8, bytes.len())));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(Matrix3 { len, m, d, data })
}

pub fn write_csv<W: Write>(mut w: W, len: usize, m: usize, d: usize, data: &[f64]) -> Result<()> {
    if data.len() != len * m * d {
        return Err(Error::SizeMismatch { left: data.len(), right: len * m * d });
    }
    let cols: Vec<String> = (0..d).map(|c| format!("c{c}")).collect();
    writeln!(w, "replica,index,{}", cols.join(","))?;
    for i in 0..m {
        for t in 0..len {
            let row = &data[(i * len + t) * d..(i * len + t + 1) * d];
            let vals: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{i},{t},{}", vals.join(","))?;
        }
    }
    Ok(())
}

impl Ensemble {
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_binary(w, self.n, self.m, self.d, &self.data)
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let x = read_binary(r)?;
        Ensemble::new(x.len, x.m, x.d, x.data)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, self.n, self.m, self.d, &self.data)
    }
}

impl PathEnsemble {
    fn flat(&self) -> Vec<f64> {
        self.paths().iter().flat_map(|p| p.values().iter().copied()).collect()
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_binary(w, self.n() + 1, self.len(), self.d(), &self.flat())
    }

    pub fn read_binary<R: Read>(r: R, provenance: &str) -> Result<Self> {
        let x = read_binary(r)?;
        if x.len == 0 {
            return Err(Error::Format("path files store at least one time point".into()));
        }
        let width = x.len * x.d;
        let paths = x
            .data
            .chunks_exact(width.max(1))
            .take(x.m)
            .map(|c| StepPath::new(x.len - 1, x.d, c.to_vec()))
            .collect::<Result<_>>()?;
        PathEnsemble::new(paths, provenance)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, self.n() + 1, self.len(), self.d(), &self.flat())
    }
}
