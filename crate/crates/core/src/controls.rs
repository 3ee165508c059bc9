//! Partition-sup control functions on a grid and greedy partitions.
//!
//! A control table stores, for every grid pair i ≤ k,
//!
//! W[i][k] = max over grid partitions π of [t_i, t_k] of Σ_π f(τ, τ')^q / (τ' − τ)^r,
//!
//! computed by the first-breakpoint recursion W[i][k] = max_{i<j≤k} term(i,j) + W[j][k].
//! Tables always hold raw W; callers apply powers such as W^{γ−p}.

use std::fmt::Write as _;

use crate::error::{Result, RoughError};
use crate::exec::Execution;
use crate::tensor::RoughPathGrid;

/// Dense table of two-parameter values f(t_i, t_k), meaningful for i ≤ k.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    n: usize,
    data: Vec<f64>,
}

impl PairTable {
    pub fn zeros(n: usize) -> Self {
        PairTable { n, data: vec![0.0; n * n] }
    }

    /// Fills f(i,k) for all i ≤ k; rows are evaluated independently.
    pub fn from_fn<F>(n: usize, exec: Execution, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        let mut data = vec![0.0; n * n];
        exec.for_each_chunk(&mut data, n, |i, row| {
            for (k, v) in row.iter_mut().enumerate().skip(i + 1) {
                *v = f(i, k);
            }
        });
        PairTable { n, data }
    }

    /// Fills whole rows at once: `f(i, row)` must write row[k] for k > i.
    pub fn from_rows<F>(n: usize, exec: Execution, f: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let mut data = vec![0.0; n * n];
        exec.for_each_chunk(&mut data, n, f);
        for i in 0..n {
            data[i * n + i] = 0.0;
        }
        PairTable { n, data }
    }

    pub fn points(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.n + k]
    }

    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.data[i * self.n + k] = v;
    }

    pub fn scaled(&self, c: f64) -> Self {
        PairTable { n: self.n, data: self.data.iter().map(|x| c * x).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlTable {
    times: Vec<f64>,
    /// Term power q; `None` for sums of tables with different powers.
    q: Option<f64>,
    r: f64,
    level: Option<usize>,
    data: Vec<f64>,
}

fn term(f: f64, q: f64, r: f64, dt: f64, i: usize, k: usize) -> Result<f64> {
    if f < 0.0 || f.is_nan() {
        return Err(RoughError::Domain { i, k, value: f });
    }
    if f == 0.0 {
        return Ok(0.0);
    }
    let v = (q * f.ln() - r * dt.ln()).exp();
    if !v.is_finite() {
        return Err(RoughError::Range { i, k });
    }
    Ok(v)
}

/// Builds W for germ `f` with term f^q / Δ^r on the grid `times`.
pub fn control_table(germ: &PairTable, q: f64, r: f64, times: &[f64], exec: Execution) -> Result<ControlTable> {
    let n = times.len();
    if germ.points() != n {
        return Err(RoughError::Dimension(format!("germ on {} points, grid has {n}", germ.points())));
    }
    if !(q > 0.0) || r < 0.0 {
        return Err(RoughError::Parameter(format!("exponents q = {q}, r = {r}")));
    }
    let rows: Vec<Result<Vec<f64>>> = exec.map(n, |i| {
        let mut row = vec![0.0; n];
        for k in i + 1..n {
            row[k] = term(germ.get(i, k), q, r, times[k] - times[i], i, k)?;
        }
        Ok(row)
    });
    let mut terms = Vec::with_capacity(n * n);
    for row in rows {
        terms.extend(row?);
    }
    Ok(ControlTable::from_terms(times.to_vec(), Some(q), r, terms, exec))
}

impl ControlTable {
    fn from_terms(times: Vec<f64>, q: Option<f64>, r: f64, terms: Vec<f64>, exec: Execution) -> Self {
        let n = times.len();
        let cols: Vec<Vec<f64>> = exec.map(n, |k| {
            let mut col = vec![0.0; k + 1];
            for i in (0..k).rev() {
                let row = &terms[i * n + i + 1..i * n + k + 1];
                let rest = &col[i + 1..=k];
                let mut best = 0.0f64;
                for (t, w) in row.iter().zip(rest) {
                    best = best.max(t + w);
                }
                col[i] = best;
            }
            col
        });
        let mut data = vec![0.0; n * n];
        for (k, col) in cols.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                data[i * n + k] = v;
            }
        }
        ControlTable { times, q, r, level: None, data }
    }

    pub fn with_level(mut self, level: usize) -> Self {
        self.level = Some(level);
        self
    }

    pub fn zeros(times: Vec<f64>, r: f64) -> Self {
        let n = times.len();
        ControlTable { times, q: None, r, level: None, data: vec![0.0; n * n] }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> usize {
        self.times.len()
    }

    pub fn term_power(&self) -> Option<f64> {
        self.q
    }

    pub fn time_power(&self) -> f64 {
        self.r
    }

    pub fn level(&self) -> Option<usize> {
        self.level
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.times.len() + k]
    }

    /// W(t_i, t_k)^e with the convention 0^e = 0.
    pub fn powered(&self, i: usize, k: usize, e: f64) -> f64 {
        let w = self.get(i, k);
        if w == 0.0 {
            0.0
        } else {
            w.powf(e)
        }
    }

    /// Entry-wise sum; the result is again superadditive.
    pub fn sum(&self, other: &ControlTable) -> Result<ControlTable> {
        if self.times != other.times {
            return Err(RoughError::Dimension("tables on different grids".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(ControlTable { times: self.times.clone(), q: None, r: self.r, level: None, data })
    }

    /// Largest violation of W[i][j] + W[j][k] ≤ W[i][k], relative to W[i][k].
    pub fn superadditivity_defect(&self) -> f64 {
        let n = self.points();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in i..n {
                let wik = self.get(i, k);
                for j in i..=k {
                    let gap = self.get(i, j) + self.get(j, k) - wik;
                    if gap > 0.0 {
                        worst = worst.max(gap / wik.abs().max(f64::MIN_POSITIVE));
                    }
                }
            }
        }
        worst
    }

    /// Largest relative decrease of k ↦ W[i][k].
    pub fn monotonicity_defect(&self) -> f64 {
        let n = self.points();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in i + 1..n {
                let (a, b) = (self.get(i, k - 1), self.get(i, k));
                if a > b {
                    worst = worst.max((a - b) / a);
                }
            }
        }
        worst
    }

    /// CSV dump `i,k,t_i,t_k,W`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,k,t_i,t_k,W\n");
        let n = self.points();
        for i in 0..n {
            for k in i..n {
                let _ = writeln!(s, "{},{},{},{},{}", i, k, self.times[i], self.times[k], self.get(i, k));
            }
        }
        s
    }
}

/// Euclidean norms |Π^j(X_{t_i,t_k})| for j = 1..=N, one table per level.
pub fn level_norm_tables(x: &RoughPathGrid, exec: Execution) -> Vec<PairTable> {
    let n = x.len() + 1;
    let depth = x.depth();
    let rows: Vec<Vec<Vec<f64>>> = exec.map(n, |i| {
        let mut out = vec![vec![0.0; n]; depth];
        x.scan_from(i, n - 1, |k, e| {
            for j in 1..=depth {
                out[j - 1][k] = e.level_norm(j);
            }
        })
        .expect("valid range");
        out
    });
    (1..=depth)
        .map(|j| {
            let mut t = PairTable::zeros(n);
            for (i, r) in rows.iter().enumerate() {
                for k in i + 1..n {
                    t.set(i, k, r[j - 1][k]);
                }
            }
            t
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoughPathControls {
    pub gamma: f64,
    pub p: f64,
    /// levels[j-1] is W_{Π^j(X),γ,p}.
    pub levels: Vec<ControlTable>,
    pub total: ControlTable,
}

impl RoughPathControls {
    pub fn level(&self, j: usize) -> &ControlTable {
        &self.levels[j - 1]
    }
}

/// Per-level controls from precomputed level norms.
pub fn controls_from_norms(norms: &[PairTable], times: &[f64], gamma: f64, p: f64, exec: Execution) -> Result<RoughPathControls> {
    if !(p >= 0.0 && p < gamma) {
        return Err(RoughError::Parameter(format!("need 0 <= p < gamma, got p = {p}, gamma = {gamma}")));
    }
    let r = p / (gamma - p);
    let mut levels = Vec::with_capacity(norms.len());
    for (idx, f) in norms.iter().enumerate() {
        let j = idx + 1;
        let q = 1.0 / (j as f64 * (gamma - p));
        levels.push(control_table(f, q, r, times, exec)?.with_level(j));
    }
    let mut total = ControlTable::zeros(times.to_vec(), r);
    for t in &levels {
        total = total.sum(t)?;
    }
    Ok(RoughPathControls { gamma, p, levels, total })
}

/// W_{Π^j(X),γ,p} for j = 1..=N and their sum W_{X,γ,p}.
pub fn rough_path_controls(x: &RoughPathGrid, gamma: f64, p: f64, exec: Execution) -> Result<RoughPathControls> {
    if !(p >= 0.0 && p < gamma) {
        return Err(RoughError::Parameter(format!("need 0 <= p < gamma, got p = {p}, gamma = {gamma}")));
    }
    let norms = level_norm_tables(x, exec);
    controls_from_norms(&norms, x.times(), gamma, p, exec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PToZeroCheck {
    /// W_{X,γ,0}(s,t)^γ.
    pub lhs: f64,
    /// (t−s)^p W_{X,γ,p}(s,t)^{γ−p}.
    pub rhs: f64,
    pub holds: bool,
    /// The same comparison for each level j separately.
    pub per_level: Vec<(f64, f64)>,
}

/// Compares W_{X,γ,0}^γ(s,t) with (t−s)^p W_{X,γ,p}^{γ−p}(s,t) on grid indices s < t.
pub fn check_p_to_zero(x: &RoughPathGrid, gamma: f64, p: f64, s: usize, t: usize, exec: Execution) -> Result<PToZeroCheck> {
    if s > t || t > x.len() {
        return Err(RoughError::Interval { start: s, end: t });
    }
    let w = x.window(s, t)?;
    let norms = level_norm_tables(&w, exec);
    let c0 = controls_from_norms(&norms, w.times(), gamma, 0.0, exec)?;
    let cp = controls_from_norms(&norms, w.times(), gamma, p, exec)?;
    let n = w.len();
    let dt = w.times()[n] - w.times()[0];
    let side = |c0: &ControlTable, cp: &ControlTable| (c0.powered(0, n, gamma), dt.powf(p) * cp.powered(0, n, gamma - p));
    let (lhs, rhs) = side(&c0.total, &cp.total);
    let per_level = c0.levels.iter().zip(&cp.levels).map(|(a, b)| side(a, b)).collect();
    Ok(PToZeroCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12), per_level })
}

/// Relative slack when comparing W^e against χ, absorbing rounding in grid times.
pub const GREEDY_REL_SLACK: f64 = 1e-12;

/// What to do when a single grid cell already exceeds the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockPolicy {
    /// Report the blocking cell as an error.
    #[default]
    Strict,
    /// Take the cell as a forced step and record it.
    Saturate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedySequence {
    pub chi: f64,
    pub exponent: f64,
    /// Grid indices τ_0 = a < ... < τ_Ñ = b.
    pub points: Vec<usize>,
    pub times: Vec<f64>,
    /// Left endpoints of forced single-cell steps (only under [`BlockPolicy::Saturate`]).
    pub blocked: Vec<usize>,
}

impl GreedySequence {
    /// Ñ, the number of steps.
    pub fn count(&self) -> usize {
        self.points.len() - 1
    }

    /// Budget check in the superadditive quantity W: the extensions by one cell of the
    /// full steps 1, 3, 5, ... are disjoint and each exceeds χ^{1/e}, so
    /// ⌈(Ñ−1)/2⌉ χ^{1/e} ≤ W(a,b). Returns (left side, W(a,b)).
    pub fn budget_check(&self, table: &ControlTable) -> (f64, f64) {
        let full = self.count().saturating_sub(1);
        let lhs = full.div_ceil(2) as f64 * self.chi.powf(1.0 / self.exponent);
        let (a, b) = (self.points[0], *self.points.last().unwrap());
        (lhs, table.get(a, b))
    }

    /// CSV dump `m,tau_m`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,tau_m\n");
        for (m, t) in self.times.iter().enumerate() {
            let _ = writeln!(s, "{m},{t}");
        }
        s
    }
}

/// Greedy points for W^e on grid indices [a, b] with the default strict policy.
pub fn greedy_points(table: &ControlTable, exponent: f64, chi: f64, a: usize, b: usize) -> Result<GreedySequence> {
    greedy_points_with(table, exponent, chi, a, b, BlockPolicy::Strict)
}

pub fn greedy_points_with(
    table: &ControlTable,
    exponent: f64,
    chi: f64,
    a: usize,
    b: usize,
    policy: BlockPolicy,
) -> Result<GreedySequence> {
    if !(chi > 0.0) || !(exponent > 0.0) {
        return Err(RoughError::Parameter(format!("chi = {chi}, exponent = {exponent}")));
    }
    if a >= b || b >= table.points() {
        return Err(RoughError::Interval { start: a, end: b });
    }
    let limit = chi * (1.0 + GREEDY_REL_SLACK);
    let ok = |i: usize, k: usize| table.powered(i, k, exponent) <= limit;
    let mut points = vec![a];
    let mut blocked = Vec::new();
    let mut cur = a;
    while cur < b {
        if !ok(cur, cur + 1) {
            match policy {
                BlockPolicy::Strict => {
                    return Err(RoughError::GreedyBlocked { cell: cur, chi, value: table.powered(cur, cur + 1, exponent) })
                }
                BlockPolicy::Saturate => {
                    blocked.push(cur);
                    cur += 1;
                    points.push(cur);
                    continue;
                }
            }
        }
        // largest k in (cur, b] with ok(cur, k); k ↦ W(cur, k) is monotone
        let (mut lo, mut hi) = (cur + 1, b);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if ok(cur, mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        cur = lo;
        points.push(cur);
    }
    let times = points.iter().map(|&i| table.times()[i]).collect();
    Ok(GreedySequence { chi, exponent, points, times, blocked })
}
