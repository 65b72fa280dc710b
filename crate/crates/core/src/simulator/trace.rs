use std::io::Write;

use crate::error::{Error, Result};

/// Sizes that fix the column layout of a trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceDims {
    pub n_agents: usize,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub nz: usize,
    /// Whether observer states are recorded (output feedback).
    pub has_xi: bool,
}

/// Everything recorded at one time step, indexed `[agent][component]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    pub v: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// Empty in state-feedback mode.
    pub xi: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub ev: Vec<Vec<f64>>,
}

impl TraceStep {
    /// Row in the column order of [`SimulationTrace::columns`], without `t`.
    pub fn to_row(&self) -> Vec<f64> {
        let mut row = self.v.clone();
        for block in [&self.x, &self.z, &self.xi, &self.u, &self.y, &self.e, &self.ev] {
            row.extend(block.iter().flatten());
        }
        row
    }

    pub fn max_abs_error(&self) -> f64 {
        self.e.iter().flatten().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    pub dims: TraceDims,
    pub steps: Vec<TraceStep>,
}

impl SimulationTrace {
    pub fn new(dims: TraceDims) -> Self {
        SimulationTrace { dims, steps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Column names after `t`: `v_k`, then `x_i_k`, `z_i_k`, `xi_i_k`
    /// (output feedback only), `u_i_k`, `y_i_k`, `e_i_k`, `ev_i_k`.
    /// Agents and components are 1-based.
    pub fn columns(&self) -> Vec<String> {
        let d = &self.dims;
        let mut cols: Vec<String> = (1..=d.q).map(|k| format!("v_{k}")).collect();
        let mut group = |name: &str, len: usize| {
            for i in 1..=d.n_agents {
                cols.extend((1..=len).map(|k| format!("{name}_{i}_{k}")));
            }
        };
        group("x", d.n);
        group("z", d.nz);
        if d.has_xi {
            group("xi", d.n);
        }
        group("u", d.m);
        group("y", d.p);
        group("e", d.p);
        group("ev", d.p);
        cols
    }

    /// `max_i |e_i(t)|` over the last `window` steps (all steps if shorter).
    pub fn final_window_max_error(&self, window: usize) -> f64 {
        let start = self.steps.len().saturating_sub(window);
        self.steps[start..]
            .iter()
            .map(TraceStep::max_abs_error)
            .fold(0.0, f64::max)
    }

    /// Tracking errors of every step, flattened agent-major.
    pub fn error_rows(&self) -> Vec<Vec<f64>> {
        self.steps
            .iter()
            .map(|s| s.e.iter().flatten().copied().collect())
            .collect()
    }

    /// CSV export: `#` comment lines describing the layout, a header row, then
    /// one row per step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = &self.dims;
        writeln!(out, "# delayreg simulation trace")?;
        writeln!(
            out,
            "# agents={} n={} m={} p={} q={} nz={} mode={}",
            d.n_agents,
            d.n,
            d.m,
            d.p,
            d.q,
            d.nz,
            if d.has_xi { "output" } else { "state" }
        )?;
        writeln!(out, "# t: step index; v_k: exosystem state")?;
        writeln!(out, "# x_i_k: plant state of follower i; z_i_k: internal-model state")?;
        if d.has_xi {
            writeln!(out, "# xi_i_k: observer state")?;
        }
        writeln!(out, "# u_i_k: control computed at t (applied after the input delay)")?;
        writeln!(out, "# y_i_k: output; e_i_k: tracking error y_i + F v; ev_i_k: virtual error")?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.columns());
        w.write_record(&header)?;
        for step in &self.steps {
            let mut rec = vec![step.t.to_string()];
            rec.extend(step.to_row().iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::numerical("trace export", e.to_string()))
    }
}

/// Largest entrywise deviation `|a − b| / max(1, |a|, |b|)` between two traces
/// with the same layout. `None` when the layouts or lengths differ.
pub fn max_relative_deviation(a: &SimulationTrace, b: &SimulationTrace) -> Option<f64> {
    if a.dims != b.dims || a.len() != b.len() {
        return None;
    }
    let mut worst = 0.0_f64;
    for (sa, sb) in a.steps.iter().zip(&b.steps) {
        if sa.t != sb.t {
            return None;
        }
        let (ra, rb) = (sa.to_row(), sb.to_row());
        if ra.len() != rb.len() {
            return None;
        }
        for (x, y) in ra.iter().zip(&rb) {
            let scale = 1.0_f64.max(x.abs()).max(y.abs());
            worst = worst.max((x - y).abs() / scale);
        }
    }
    Some(worst)
}
