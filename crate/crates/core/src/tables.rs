//! CSV tables written by the experiment runner and read back by the plotter.

use crate::error::{Error, Result};
use crate::readout::{Evaluation, MemoryCurve};
use std::io::{BufRead, Write};

pub const RESULTS_HEADER: &str = "H,k,offset,lambda,n_components,nrmse,correlation";
pub const CORRELATION_HEADER: &str = "k,H,correlation";
pub const MEMORY_HEADER: &str = "d,r2";
pub const MEMORY_SUMMARY_HEADER: &str = "d_max,mc,h_star";

/// Per-offset rows followed by one `median` row for every (H, k).
pub fn write_results<W: Write>(evals: &[Evaluation], out: &mut W) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for e in evals {
        for r in &e.records {
            writeln!(out, "{},{},{},{},{},{},{}", r.h, r.k, r.offset, r.lambda, r.n_components, r.nrmse, r.correlation)?;
        }
        writeln!(
            out,
            "{},{},median,{},{},{},{}",
            e.h, e.k, e.median_lambda, e.median_components, e.median_nrmse, e.median_correlation
        )?;
    }
    Ok(())
}

/// Median NRMSE on a k × H grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub hs: Vec<usize>,
    pub ks: Vec<usize>,
    /// `values[row_of_k][col_of_h]`.
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn from_evaluations(evals: &[Evaluation]) -> Self {
        let mut hs: Vec<usize> = evals.iter().map(|e| e.h).collect();
        let mut ks: Vec<usize> = evals.iter().map(|e| e.k).collect();
        hs.sort_unstable();
        hs.dedup();
        ks.sort_unstable();
        ks.dedup();
        let mut values = vec![vec![f64::NAN; hs.len()]; ks.len()];
        for e in evals {
            let r = ks.binary_search(&e.k).expect("k present");
            let c = hs.binary_search(&e.h).expect("H present");
            values[r][c] = e.median_nrmse;
        }
        Self { hs, ks, values }
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        let cols: Vec<String> = self.hs.iter().map(|h| h.to_string()).collect();
        writeln!(out, "k,{}", cols.join(","))?;
        for (k, row) in self.ks.iter().zip(&self.values) {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{k},{}", vals.join(","))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = data_lines(input);
        let header = lines.next().ok_or_else(|| Error::schema("heatmap: empty file"))??;
        let mut cols = header.split(',');
        if cols.next() != Some("k") {
            return Err(Error::schema("heatmap: first column must be `k`"));
        }
        let hs = cols.map(|c| parse::<usize>(c, "heatmap header")).collect::<Result<Vec<_>>>()?;
        if hs.is_empty() {
            return Err(Error::schema("heatmap: no H columns"));
        }
        let (mut ks, mut values) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != hs.len() + 1 {
                return Err(Error::schema(format!("heatmap row {}: {} fields, expected {}", i + 2, fields.len(), hs.len() + 1)));
            }
            ks.push(parse(fields[0], "heatmap k")?);
            values.push(fields[1..].iter().map(|f| parse::<f64>(f, "heatmap value")).collect::<Result<Vec<_>>>()?);
        }
        Ok(Self { hs, ks, values })
    }
}

/// Median correlation per (k, H), sorted by k then H.
pub fn write_correlation<W: Write>(evals: &[Evaluation], out: &mut W) -> Result<()> {
    let mut rows: Vec<(usize, usize, f64)> = evals.iter().map(|e| (e.k, e.h, e.median_correlation)).collect();
    rows.sort_by_key(|r| (r.0, r.1));
    writeln!(out, "{CORRELATION_HEADER}")?;
    for (k, h, c) in rows {
        writeln!(out, "{k},{h},{c}")?;
    }
    Ok(())
}

pub fn read_correlation<R: BufRead>(input: R) -> Result<Vec<(usize, usize, f64)>> {
    read_rows(input, CORRELATION_HEADER, |f| Ok((parse(f[0], "k")?, parse(f[1], "H")?, parse(f[2], "correlation")?)))
}

pub fn write_memory<W: Write>(curve: &MemoryCurve, out: &mut W) -> Result<()> {
    writeln!(out, "{MEMORY_HEADER}")?;
    for (i, r) in curve.r2.iter().enumerate() {
        writeln!(out, "{},{r}", i + 1)?;
    }
    Ok(())
}

pub fn read_memory<R: BufRead>(input: R) -> Result<Vec<(usize, f64)>> {
    read_rows(input, MEMORY_HEADER, |f| Ok((parse(f[0], "d")?, parse(f[1], "r2")?)))
}

/// Capacity and the horizon marker `H* = 0.7 · MC`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemorySummary {
    pub d_max: usize,
    pub mc: f64,
    pub h_star: f64,
}

impl MemorySummary {
    pub fn new(curve: &MemoryCurve) -> Self {
        Self { d_max: curve.r2.len(), mc: curve.mc, h_star: 0.7 * curve.mc }
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{MEMORY_SUMMARY_HEADER}")?;
        writeln!(out, "{},{},{}", self.d_max, self.mc, self.h_star)?;
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let rows = read_rows(input, MEMORY_SUMMARY_HEADER, |f| {
            Ok(Self { d_max: parse(f[0], "d_max")?, mc: parse(f[1], "mc")?, h_star: parse(f[2], "h_star")? })
        })?;
        match rows.as_slice() {
            [one] => Ok(*one),
            _ => Err(Error::schema(format!("memory summary: expected 1 row, found {}", rows.len()))),
        }
    }
}

fn data_lines<R: BufRead>(input: R) -> impl Iterator<Item = std::io::Result<String>> {
    input.lines().filter(|l| l.as_ref().map(|s| !s.is_empty()).unwrap_or(true))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::schema(format!("cannot parse {what} from `{s}`")))
}

fn read_rows<R: BufRead, T>(input: R, header: &str, row: impl Fn(&[&str]) -> Result<T>) -> Result<Vec<T>> {
    let mut lines = data_lines(input);
    let found = lines.next().ok_or_else(|| Error::schema(format!("empty file, expected header `{header}`")))??;
    if found.trim() != header {
        return Err(Error::schema(format!("header `{found}` does not match `{header}`")));
    }
    let width = header.split(',').count();
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::schema(format!("row {}: {} fields, expected {width}", i + 2, fields.len())));
        }
        out.push(row(&fields)?);
    }
    Ok(out)
}
