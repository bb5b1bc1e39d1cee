//! Tabular sweep output and its CSV form.

use std::io::{Read, Write};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// One swept axis. Names carry their unit, e.g. `eps_q_MHz`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Axis { name: name.into(), values }
    }
}

/// One observable over the full grid, in row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observable {
    pub name: String,
    pub values: Vec<f64>,
}

/// Result of one experiment: an outer-product grid of axes, any number of
/// observables over it, and a per-cell error marker.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub experiment: String,
    /// Model tags contributing columns (`late`, `late_no_h2`, `early`, `oracle`).
    pub models: Vec<String>,
    pub axes: Vec<Axis>,
    pub observables: Vec<Observable>,
    /// Empty string for a clean cell, otherwise a short error tag.
    pub errors: Vec<String>,
    /// Config echo, runtime, solver statistics and experiment extras.
    pub metadata: Value,
}

impl SweepResult {
    pub fn new(experiment: impl Into<String>, axes: Vec<Axis>) -> Self {
        let n = axes.iter().map(|a| a.values.len()).product();
        SweepResult {
            experiment: experiment.into(),
            models: Vec::new(),
            axes,
            observables: Vec::new(),
            errors: vec![String::new(); n],
            metadata: Value::Object(Default::default()),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }

    pub fn cells(&self) -> usize {
        self.shape().iter().product()
    }

    /// Flat index of a multi-index.
    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(self.shape())
            .fold(0, |acc, (&i, n)| acc * n + i)
    }

    /// Axis values of a flat cell index.
    pub fn coordinates(&self, mut cell: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            out[k] = axis.values[cell % n];
            cell /= n;
        }
        out
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables
            .iter()
            .find(|o| o.name == name)
            .map(|o| o.values.as_slice())
    }

    pub fn push_observable(&mut self, name: impl Into<String>, values: Vec<f64>) {
        assert_eq!(values.len(), self.cells(), "observable does not cover the grid");
        self.observables.push(Observable { name: name.into(), values });
    }

    /// Marks a cell as failed. Keeps the first tag if several errors hit it.
    pub fn mark(&mut self, cell: usize, tag: &str) {
        if self.errors[cell].is_empty() {
            self.errors[cell] = tag.to_string();
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl Serialize) {
        if let Value::Object(map) = &mut self.metadata {
            map.insert(key.to_string(), serde_json::to_value(value).expect("metadata serializes"));
        }
    }

    /// Value at `idx` of a named observable.
    pub fn at(&self, name: &str, idx: &[usize]) -> Option<f64> {
        self.observable(name).map(|v| v[self.index(idx)])
    }
}

/// Writes one header row plus one row per cell. Floats use the shortest
/// round-tripping decimal form; failed values appear as `NaN`.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = result.axes.iter().map(|a| a.name.as_str()).collect();
    header.extend(result.observables.iter().map(|o| o.name.as_str()));
    header.push("error");
    w.write_record(&header)?;
    for cell in 0..result.cells() {
        let mut row: Vec<String> = result.coordinates(cell).iter().map(|v| fmt_f64(*v)).collect();
        row.extend(result.observables.iter().map(|o| fmt_f64(o.values[cell])));
        row.push(result.errors[cell].clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:?}")
    }
}

/// Reads a CSV written by [`write_sweep_csv`]. The first `n_axes` columns are
/// axes; the grid is rebuilt from their distinct values in order of
/// appearance. Metadata is not stored in the CSV and comes back empty.
pub fn read_sweep_csv<R: Read>(input: R, n_axes: usize) -> Result<SweepResult> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.last().map(String::as_str) != Some("error") || header.len() < n_axes + 1 {
        return Err(Error::validation("csv", "expected axis columns, observables and a trailing `error` column"));
    }
    let n_obs = header.len() - n_axes - 1;
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); n_axes];
    let mut obs: Vec<Vec<f64>> = vec![Vec::new(); n_obs];
    let mut errors = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        for (k, field) in rec.iter().enumerate() {
            if k == header.len() - 1 {
                errors.push(field.to_string());
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| Error::validation(header[k].clone(), format!("not a number: `{field}`")))?;
            if k < n_axes {
                if !axes[k].iter().any(|x| x.to_bits() == v.to_bits()) {
                    axes[k].push(v);
                }
            } else {
                obs[k - n_axes].push(v);
            }
        }
    }
    let axes: Vec<Axis> = header.iter().zip(axes).map(|(n, v)| Axis::new(n.clone(), v)).collect();
    let mut result = SweepResult::new("", axes);
    if result.cells() != errors.len() {
        return Err(Error::validation("csv", "rows do not form a full grid"));
    }
    result.errors = errors;
    for (name, values) in header[n_axes..header.len() - 1].iter().zip(obs) {
        result.push_observable(name.clone(), values);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> SweepResult {
        let mut r = SweepResult::new(
            "demo",
            vec![Axis::new("eps_q_MHz", vec![0.0, 1.5]), Axis::new("eps_c_MHz", vec![0.0, 0.1])],
        );
        r.push_observable("P_e_late", vec![0.0, 0.25, 1.0 / 3.0, f64::NAN]);
        r.mark(3, "degenerate_drive");
        r
    }

    #[test]
    fn header_and_rows() {
        let mut buf = Vec::new();
        write_sweep_csv(&two_by_two(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "eps_q_MHz,eps_c_MHz,P_e_late,error");
        assert_eq!(lines[2], "0.0,0.1,0.25,");
        assert_eq!(lines[4], "1.5,0.1,NaN,degenerate_drive");
    }

    #[test]
    fn round_trip_is_exact() {
        let r = two_by_two();
        let mut buf = Vec::new();
        write_sweep_csv(&r, &mut buf).unwrap();
        let back = read_sweep_csv(buf.as_slice(), 2).unwrap();
        assert_eq!(back.axes, r.axes);
        assert_eq!(back.errors, r.errors);
        let (a, b) = (&r.observables[0].values, &back.observables[0].values);
        for (x, y) in a.iter().zip(b) {
            assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
        }
    }

    #[test]
    fn quoting_follows_rfc4180() {
        let mut r = SweepResult::new("demo", vec![Axis::new("x", vec![1.0])]);
        r.push_observable("y", vec![2.0]);
        r.mark(0, "bad, \"quoted\"");
        let mut buf = Vec::new();
        write_sweep_csv(&r, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("1.0,2.0,\"bad, \"\"quoted\"\"\"\n"));
    }

    #[test]
    fn index_and_coordinates_agree() {
        let r = two_by_two();
        assert_eq!(r.index(&[1, 0]), 2);
        assert_eq!(r.coordinates(2), vec![1.5, 0.0]);
    }
}
