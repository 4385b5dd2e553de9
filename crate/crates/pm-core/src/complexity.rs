//! Cost model for both interpreters and the speedup predictions built on
//! it. Times are abstract operation counts: every constant is a knob, so
//! the same formulas price anything from a toy method to a tuned kernel.
//!
//! The round counts are integer-exact; only the final ratios are floats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cost knobs, preset to the reference configuration used by the built-in
/// speedup tables: two dimensions, 900 cells of one particle each, unit
/// index-arithmetic constants, interaction and evolution three times the
/// price of the bookkeeping steps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexityParams {
    /// Grid dimension.
    pub d: usize,
    /// Number of grid cells.
    pub n_cells: u64,
    /// Largest particle count of any cell.
    pub n_max: u64,
    /// Total particle bound; the cell model sweeps over it.
    pub n_p_max: u64,
    /// Cost of one interaction.
    pub tau_i: f64,
    /// Cost of one particle evolution.
    pub tau_e: f64,
    /// Cost of the stop condition.
    pub tau_f: f64,
    /// Cost of one global-variable evolution.
    pub tau_edot: f64,
    /// Cost of one neighborhood check, per axis.
    pub c_u: f64,
    /// Cost of mapping a position to a compartment, per axis.
    pub c_alpha: f64,
    /// Cost of resolving a neighbor process, per axis.
    pub c_beta: f64,
    /// Cost of resolving an active process, per axis.
    pub c_gamma: f64,
    /// Cost of the mirror-compartment lookup, per axis.
    pub c_c: f64,
    /// Transitions to run.
    pub steps: u64,
}

impl Default for ComplexityParams {
    fn default() -> Self {
        ComplexityParams {
            d: 2,
            n_cells: 900,
            n_max: 1,
            n_p_max: 900,
            tau_i: 3.0,
            tau_e: 3.0,
            tau_f: 1.0,
            tau_edot: 1.0,
            c_u: 1.0,
            c_alpha: 1.0,
            c_beta: 1.0,
            c_gamma: 1.0,
            c_c: 1.0,
            steps: 1,
        }
    }
}

impl ComplexityParams {
    pub fn block(&self) -> Result<u64> {
        crate::index::block_size(self.d)
    }

    /// Checks the knob ranges and the even-split assumption the round
    /// formulas rest on: the cell count divides into whole checkerboard
    /// patterns.
    pub fn validate(&self) -> Result<()> {
        let b = self.block()?;
        if self.n_cells == 0 || self.n_cells % b != 0 {
            return Err(Error::NotDivisible {
                value: self.n_cells,
                divisor: b,
            });
        }
        let knobs = [
            self.tau_i,
            self.tau_e,
            self.tau_f,
            self.tau_edot,
            self.c_u,
            self.c_alpha,
            self.c_beta,
            self.c_gamma,
            self.c_c,
        ];
        if knobs.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParams(
                "cost constants must be finite and non-negative".into(),
            ));
        }
        if self.n_max == 0 || self.steps == 0 {
            return Err(Error::InvalidParams(
                "n_max and steps must be positive".into(),
            ));
        }
        Ok(())
    }

    fn with_cells(&self, n_cells: u64) -> ComplexityParams {
        ComplexityParams { n_cells, ..self.clone() }
    }
}

fn check_processors(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParams("zero processors".into()));
    }
    Ok(())
}

/// Calculation rounds per transition on `n` processors: how many cells the
/// busiest processor works off before a phase can end.
pub fn xi_calc(n: u64, p: &ComplexityParams) -> Result<u64> {
    p.validate()?;
    check_processors(n)?;
    let b = p.block()?;
    let nc = p.n_cells;
    if n <= b {
        // Whole checkerboard patterns per processor, times pattern size.
        Ok(b.div_ceil(n) * (nc / b))
    } else if n <= nc {
        // Patterns split across processors; the thinnest split dominates.
        Ok(nc.div_ceil(b * (n / b)))
    } else {
        Ok(1)
    }
}

/// Communication rounds per transition on `n` processors. Patterns talk
/// one after another; within one pattern its processors talk in parallel.
pub fn xi_com(n: u64, p: &ComplexityParams) -> Result<u64> {
    p.validate()?;
    check_processors(n)?;
    let b = p.block()?;
    let nc = p.n_cells;
    if n <= b {
        Ok(nc)
    } else if n <= nc {
        // n1 patterns get one processor more than the n2 others.
        let n1 = n % b;
        let n2 = b - n1;
        let m1 = nc.div_ceil(b * n.div_ceil(b));
        let m2 = nc.div_ceil(b * (n / b));
        Ok(n1 * m1 + n2 * m2)
    } else {
        Ok(b)
    }
}

/// Aggregate per-cell costs of the distributed pipeline.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AggregateConstants {
    pub c_edot: f64,
    pub c_dist: f64,
    pub c_step: f64,
    pub c_collect: f64,
    pub c_copy: f64,
    pub c_f: f64,
}

pub fn aggregate(p: &ComplexityParams) -> Result<AggregateConstants> {
    p.validate()?;
    let b = p.block()? as f64;
    let d = p.d as f64;
    let n_max = p.n_max as f64;
    Ok(AggregateConstants {
        c_edot: p.tau_edot,
        c_dist: n_max * (p.c_alpha * d + 1.0),
        c_step: n_max * (p.tau_e + b * n_max * p.c_u * d + b * n_max * p.tau_i),
        c_collect: p.c_gamma * d + b * (p.c_beta * d + p.c_c * d + n_max),
        c_copy: p.c_gamma * d + b * (p.c_beta * d + n_max),
        c_f: p.tau_f,
    })
}

impl AggregateConstants {
    /// Per-cell cost of a whole transition on one processor.
    fn per_cell(&self) -> f64 {
        self.c_edot + self.c_collect + self.c_dist + self.c_step + self.c_copy
    }
}

/// Running time of the sequential interpreter: the neighborhood search
/// checks every particle pair, interactions run only over the bounded
/// neighborhoods.
pub fn time_bound_sequential(p: &ComplexityParams) -> Result<f64> {
    p.validate()?;
    let b = p.block()? as f64;
    let n = p.n_p_max as f64;
    let d = p.d as f64;
    let t = p.steps as f64;
    let sigma_u = b * p.n_max as f64;
    let tau_u = n * p.c_u * d;
    Ok(t * (n * (sigma_u * p.tau_i + tau_u + p.tau_e) + p.tau_f + p.tau_edot))
}

/// Running time of the distributed interpreter on `n` processors.
pub fn time_bound_parallel(n: u64, p: &ComplexityParams) -> Result<f64> {
    let a = aggregate(p)?;
    let calc = xi_calc(n, p)? as f64;
    let com = xi_com(n, p)? as f64;
    let t = p.steps as f64;
    Ok(t * (a.c_f
        + calc * (a.c_edot + a.c_dist + a.c_step)
        + com * (a.c_collect + a.c_copy)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpeedupModel {
    /// Cell lists on one processor against the all-pairs interpreter,
    /// swept over the particle bound.
    Cell,
    /// Fixed problem size, swept over the processor count.
    Amdahl,
    /// Problem size grows with the processor count.
    Gustafson,
}

impl std::str::FromStr for SpeedupModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cell" => Ok(SpeedupModel::Cell),
            "amdahl" => Ok(SpeedupModel::Amdahl),
            "gustafson" => Ok(SpeedupModel::Gustafson),
            other => Err(Error::InvalidParams(format!("unknown model: {other}"))),
        }
    }
}

impl std::fmt::Display for SpeedupModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpeedupModel::Cell => "cell",
            SpeedupModel::Amdahl => "amdahl",
            SpeedupModel::Gustafson => "gustafson",
        })
    }
}

/// Predicted speedup at one sweep point `x`: the particle bound for the
/// cell model, the processor count for the other two.
pub fn speedup(model: SpeedupModel, x: u64, p: &ComplexityParams) -> Result<f64> {
    let a = aggregate(p)?;
    match model {
        SpeedupModel::Cell => {
            check_processors(x)?;
            let n = x as f64;
            let d = p.d as f64;
            let bn = p.block()? as f64 * p.n_max as f64;
            let n_max = p.n_max as f64;
            let num = n * n * p.c_u * d + n * (bn * p.tau_i + p.tau_e) + p.tau_f + p.tau_edot;
            let den = n
                * (bn * p.c_u * d
                    + bn * p.tau_i
                    + p.tau_e
                    + (p.tau_edot + a.c_collect + a.c_dist + a.c_copy) / n_max)
                + p.tau_f;
            Ok(num / den)
        }
        SpeedupModel::Amdahl => {
            let num = a.c_f + p.n_cells as f64 * a.per_cell();
            let den = time_bound_parallel(x, p)? / p.steps as f64;
            Ok(num / den)
        }
        SpeedupModel::Gustafson => {
            check_processors(x)?;
            // The per-processor share stays fixed: x processors work
            // x times the cells.
            let cells = p
                .n_cells
                .checked_mul(x)
                .ok_or(Error::Overflow)?;
            let scaled = p.with_cells(cells);
            let num = a.c_f + cells as f64 * a.per_cell();
            let den = time_bound_parallel(x, &scaled)? / p.steps as f64;
            Ok(num / den)
        }
    }
}

/// Inclusive `start:end:step` sweep.
#[derive(Clone, Copy, Debug)]
pub struct Sweep {
    pub start: u64,
    pub end: u64,
    pub step: u64,
}

impl std::str::FromStr for Sweep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidSweep(s.to_string());
        let (start, end, step) = match parts.as_slice() {
            [a, b] => (
                a.parse().map_err(|_| bad())?,
                b.parse().map_err(|_| bad())?,
                1,
            ),
            [a, b, c] => (
                a.parse().map_err(|_| bad())?,
                b.parse().map_err(|_| bad())?,
                c.parse().map_err(|_| bad())?,
            ),
            _ => return Err(bad()),
        };
        if start == 0 || step == 0 || end < start {
            return Err(bad());
        }
        Ok(Sweep { start, end, step })
    }
}

impl Sweep {
    pub fn values(&self) -> impl Iterator<Item = u64> + '_ {
        (self.start..=self.end).step_by(self.step as usize)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpeedupRow {
    pub x: u64,
    pub speedup: f64,
}

pub fn speedup_sweep(
    model: SpeedupModel,
    sweep: &Sweep,
    p: &ComplexityParams,
) -> Result<Vec<SpeedupRow>> {
    sweep
        .values()
        .map(|x| {
            speedup(model, x, p).map(|s| SpeedupRow { x, speedup: s })
        })
        .collect()
}

/// Renders sweep rows as CSV with six significant digits.
pub fn sweep_to_csv(model: SpeedupModel, rows: &[SpeedupRow]) -> String {
    let mut out = String::from("model,x,speedup\n");
    for row in rows {
        out.push_str(&format!("{},{},{:.5e}\n", model, row.x, row.speedup));
    }
    out
}
