//! Trace and surface files.
//!
//! Both are comma-separated text with a header row, preceded by a single
//! `# ... format_version=1` comment line. Real numbers are written in
//! scientific notation with 12 significant digits.
//!
//! Trace columns: `iteration,node_id,x,y,flow_min_sinr_1..flow_min_sinr_n,global_min_sinr`,
//! one row per node per recorded iteration.
//!
//! Surface columns: `param_a,param_b,min_sinr`, one row per grid cell, with
//! `param_b` varying fastest.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{NetworkState, NodeId};

pub const FORMAT_VERSION: u32 = 1;

/// Formats `v` with 12 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.11e}")
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::validation("path", format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub node_id: NodeId,
    pub x: f64,
    pub y: f64,
    pub flow_min_sinr: Vec<f64>,
    pub global_min_sinr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub flow_count: usize,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new(flow_count: usize) -> Self {
        Trace {
            flow_count,
            rows: Vec::new(),
        }
    }

    /// Appends one row per node of `state`.
    pub fn push_state(&mut self, iteration: u64, state: &NetworkState, flow_costs: &[f64]) {
        debug_assert_eq!(flow_costs.len(), self.flow_count);
        let global = flow_costs.iter().copied().fold(f64::INFINITY, f64::min);
        for (&id, p) in &state.positions {
            self.rows.push(TraceRow {
                iteration,
                node_id: id,
                x: p.x,
                y: p.y,
                flow_min_sinr: flow_costs.to_vec(),
                global_min_sinr: global,
            });
        }
    }

    /// Distinct iterations in row order.
    pub fn iterations(&self) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.iteration) {
                out.push(r.iteration);
            }
        }
        out
    }

    /// Per-flow minimum SINR for each recorded iteration.
    pub fn flow_series(&self) -> Vec<(u64, Vec<f64>)> {
        let mut out: Vec<(u64, Vec<f64>)> = Vec::new();
        for r in &self.rows {
            if out.last().map(|(i, _)| *i) != Some(r.iteration) {
                out.push((r.iteration, r.flow_min_sinr.clone()));
            }
        }
        out
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["iteration", "node_id", "x", "y"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((1..=self.flow_count).map(|i| format!("flow_min_sinr_{i}")));
        h.push("global_min_sinr".into());
        h
    }
}

pub fn write_trace_to<W: Write>(trace: &Trace, mut out: W) -> Result<()> {
    if trace.rows.is_empty() {
        return Err(Error::validation("trace", "nothing to write"));
    }
    writeln!(out, "# routerplace trace format_version={FORMAT_VERSION}").map_err(|e| Error::io("<trace>", e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace.header())?;
    for (n, r) in trace.rows.iter().enumerate() {
        if r.flow_min_sinr.len() != trace.flow_count {
            return Err(Error::validation(
                format!("trace row {n}"),
                format!(
                    "expected {} flow columns, got {}",
                    trace.flow_count,
                    r.flow_min_sinr.len()
                ),
            ));
        }
        let mut rec = vec![
            r.iteration.to_string(),
            r.node_id.to_string(),
            fmt_real(r.x),
            fmt_real(r.y),
        ];
        rec.extend(r.flow_min_sinr.iter().map(|&v| fmt_real(v)));
        rec.push(fmt_real(r.global_min_sinr));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

pub fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_trace_to(trace, &mut buf)?;
    write_atomic(path, &buf)
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input)
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec
        .get(i)
        .ok_or_else(|| Error::Parse(format!("line {line}: missing column {i}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad value {raw:?} in column {i}")))
}

pub fn read_trace_from<R: Read>(input: R) -> Result<Trace> {
    let mut rd = reader(input);
    let header = rd.headers()?.clone();
    let flow_count = header.iter().filter(|h| h.starts_with("flow_min_sinr_")).count();
    if header.len() != flow_count + 5 {
        return Err(Error::Parse(format!("unexpected trace header {header:?}")));
    }
    let mut trace = Trace::new(flow_count);
    for (n, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(n + 2, |p| p.line() as usize);
        trace.rows.push(TraceRow {
            iteration: parse_field(&rec, 0, line)?,
            node_id: NodeId(parse_field(&rec, 1, line)?),
            x: parse_field(&rec, 2, line)?,
            y: parse_field(&rec, 3, line)?,
            flow_min_sinr: (0..flow_count)
                .map(|k| parse_field(&rec, 4 + k, line))
                .collect::<Result<_>>()?,
            global_min_sinr: parse_field(&rec, 4 + flow_count, line)?,
        });
    }
    Ok(trace)
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace_from(f)
}

/// Global cost sampled on a rectangular parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub axis_a: Vec<f64>,
    pub axis_b: Vec<f64>,
    /// `values[i][j]` is the cost at `(axis_a[i], axis_b[j])`.
    pub values: Vec<Vec<f64>>,
}

impl Surface {
    pub fn new(axis_a: Vec<f64>, axis_b: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != axis_a.len() || values.iter().any(|row| row.len() != axis_b.len()) {
            return Err(Error::validation(
                "surface",
                "grid is not rectangular or does not match its axes",
            ));
        }
        Ok(Surface { axis_a, axis_b, values })
    }

    pub fn max(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((i, j, v));
                }
            }
        }
        best
    }

    /// Interior cells strictly greater than all eight neighbours.
    pub fn strict_local_maxima(&self) -> Vec<(usize, usize, f64)> {
        let (na, nb) = (self.axis_a.len(), self.axis_b.len());
        let mut out = Vec::new();
        for i in 1..na.saturating_sub(1) {
            for j in 1..nb.saturating_sub(1) {
                let v = self.values[i][j];
                let peak = (i - 1..=i + 1)
                    .flat_map(|a| (j - 1..=j + 1).map(move |b| (a, b)))
                    .filter(|&(a, b)| (a, b) != (i, j))
                    .all(|(a, b)| v > self.values[a][b]);
                if peak {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

pub fn write_surface_to<W: Write>(surface: &Surface, mut out: W) -> Result<()> {
    writeln!(out, "# routerplace surface format_version={FORMAT_VERSION}").map_err(|e| Error::io("<surface>", e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param_a", "param_b", "min_sinr"])?;
    for (i, &a) in surface.axis_a.iter().enumerate() {
        for (j, &b) in surface.axis_b.iter().enumerate() {
            w.write_record([fmt_real(a), fmt_real(b), fmt_real(surface.values[i][j])])?;
        }
    }
    w.flush().map_err(|e| Error::io("<surface>", e))?;
    Ok(())
}

pub fn write_surface(surface: &Surface, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_surface_to(surface, &mut buf)?;
    write_atomic(path, &buf)
}

/// Reads the `(param_a, param_b, min_sinr)` rows of a surface file.
pub fn read_surface_rows<R: Read>(input: R) -> Result<Vec<(f64, f64, f64)>> {
    let mut rd = reader(input);
    rd.records()
        .enumerate()
        .map(|(n, rec)| {
            let rec = rec?;
            let line = n + 2;
            Ok((
                parse_field(&rec, 0, line)?,
                parse_field(&rec, 1, line)?,
                parse_field(&rec, 2, line)?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Position;
    use proptest::prelude::*;

    fn eight_node_state() -> NetworkState {
        let mut s = NetworkState::default();
        for i in 1..=8u32 {
            s.set_position(NodeId(i), Position::new(i as f64 * 1.25 - 3.0, -(i as f64) / 3.0));
        }
        s
    }

    #[test]
    fn one_iteration_eight_nodes() {
        let mut t = Trace::new(2);
        t.push_state(0, &eight_node_state(), &[0.03, 0.02]);
        let mut buf = Vec::new();
        write_trace_to(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(
            lines[0],
            "iteration,node_id,x,y,flow_min_sinr_1,flow_min_sinr_2,global_min_sinr"
        );
        let back = read_trace_from(buf.as_slice()).unwrap();
        assert_eq!(back.rows.len(), 8);
        assert_eq!(back.rows[0].global_min_sinr, 0.02);
    }

    #[test]
    fn empty_trace_rejected() {
        assert!(write_trace_to(&Trace::new(1), Vec::new()).is_err());
    }

    #[test]
    fn unwritable_destination() {
        let mut t = Trace::new(1);
        t.push_state(0, &eight_node_state(), &[0.1]);
        let err = write_trace(&t, Path::new("/nonexistent-dir/trace.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn surface_rows_and_peaks() {
        let s = Surface::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut buf = Vec::new();
        write_surface_to(&s, &mut buf).unwrap();
        let rows = read_surface_rows(buf.as_slice()).unwrap();
        assert_eq!(
            rows,
            vec![(0.0, 0.0, 1.0), (0.0, 1.0, 2.0), (1.0, 0.0, 3.0), (1.0, 1.0, 4.0)]
        );
        assert!(s.strict_local_maxima().is_empty());
        assert_eq!(s.max(), Some((1, 1, 4.0)));

        let flat = Surface::new(vec![0.0; 5], vec![0.0; 5], vec![vec![0.5; 5]; 5]).unwrap();
        assert!(flat.strict_local_maxima().is_empty());

        let mut bumpy = vec![vec![0.0; 7]; 7];
        bumpy[2][2] = 2.0;
        bumpy[4][5] = 1.0;
        let bumpy = Surface::new(vec![0.0; 7], vec![0.0; 7], bumpy).unwrap();
        assert_eq!(bumpy.strict_local_maxima(), vec![(2, 2, 2.0), (4, 5, 1.0)]);

        assert!(Surface::new(vec![0.0], vec![0.0, 1.0], vec![vec![1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn trace_round_trips_at_twelve_digits(
            xs in proptest::collection::vec((-1e4..1e4f64, -1e4..1e4f64), 1..10),
            costs in proptest::collection::vec(1e-9..10.0f64, 1..4),
        ) {
            let mut s = NetworkState::default();
            for (i, (x, y)) in xs.iter().enumerate() {
                s.set_position(NodeId(i as u32 + 1), Position::new(*x, *y));
            }
            let mut t = Trace::new(costs.len());
            t.push_state(3, &s, &costs);
            let mut buf = Vec::new();
            write_trace_to(&t, &mut buf).unwrap();
            let back = read_trace_from(buf.as_slice()).unwrap();
            prop_assert_eq!(back.rows.len(), t.rows.len());
            for (a, b) in t.rows.iter().zip(&back.rows) {
                prop_assert_eq!(a.iteration, b.iteration);
                prop_assert_eq!(a.node_id, b.node_id);
                prop_assert_eq!(fmt_real(a.x), fmt_real(b.x));
                prop_assert_eq!(fmt_real(a.y), fmt_real(b.y));
                prop_assert!((a.x - b.x).abs() <= 1e-11 * a.x.abs().max(1e-300));
                for (u, v) in a.flow_min_sinr.iter().zip(&b.flow_min_sinr) {
                    prop_assert_eq!(fmt_real(*u), fmt_real(*v));
                }
            }
            // a second write of the read-back trace is byte-identical
            let mut again = Vec::new();
            write_trace_to(&back, &mut again).unwrap();
            prop_assert_eq!(buf, again);
        }
    }
}
