//! Mild solution of dy = A(t)y dt + F(t, y) dt + G(y) dX by Picard iteration in
//! the D̃ space, concatenated over a greedy partition through the flow property.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::controlled::{compose_linear_g, ControlledPath, GOperator, ScaleParams, Variant};
use crate::controls::{greedy_points_with, rough_path_controls, BlockPolicy, GreedySequence, RoughPathControls};
use crate::error::{Result, RoughError};
use crate::exec::Execution;
use crate::sewing::{drift_convolution, free_term, integral_as_controlled, Drift, SewingParams};
use crate::spectral::{EvolutionFamily, SpectralElement, SpectralScale};
use crate::tensor::RoughPathGrid;

/// The coefficients of the equation.
#[derive(Debug)]
pub struct Rpde {
    pub u: EvolutionFamily,
    pub f: Box<dyn Drift>,
    pub g: GOperator,
}

impl Rpde {
    pub fn scale(&self) -> &Arc<SpectralScale> {
        self.u.scale()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub params: SewingParams,
    pub picard_tol: f64,
    pub max_iter: usize,
    /// Greedy threshold χ.
    pub chi: f64,
    /// The constant L ≥ 1 of the one-step inequality.
    pub l_const: f64,
    /// Loss δ of the drift, F: E_α → E_{α−δ}.
    pub delta: f64,
    /// Third term of δ₂ standing in for the promotion exponent β.
    pub beta: f64,
    /// Replaces L₂ = (1/(3L))^{1/δ₂} as the step cap when set.
    pub max_step: Option<f64>,
    pub policy: BlockPolicy,
}

impl SolveConfig {
    pub fn new(params: SewingParams, chi: f64) -> Self {
        SolveConfig {
            params,
            picard_tol: 1e-7,
            max_iter: 50,
            chi,
            l_const: 1.0,
            delta: 0.0,
            beta: 1.0,
            max_step: None,
            policy: BlockPolicy::Saturate,
        }
    }

    /// δ₂ = min{1 − δ, 1 − Nγ, β}.
    pub fn delta2(&self) -> f64 {
        (1.0 - self.delta).min(1.0 - self.params.depth as f64 * self.params.gamma).min(self.beta)
    }

    /// Step cap: the override, or L₂ = (1/(3L))^{1/δ₂}.
    pub fn step_cap(&self) -> f64 {
        self.max_step.unwrap_or_else(|| (1.0 / (3.0 * self.l_const)).powf(1.0 / self.delta2()))
    }

    /// χ ∈ (0, step cap], L ≥ 1, positive Picard tolerance.
    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0) {
            return Err(RoughError::Config { field: "chi".into(), message: format!("{} is not positive", self.chi) });
        }
        let cap = self.step_cap();
        if self.chi > cap {
            return Err(RoughError::Config { field: "chi".into(), message: format!("{} exceeds the step cap {cap}; lower chi or set max_step", self.chi) });
        }
        if !(self.l_const >= 1.0) {
            return Err(RoughError::Config { field: "L".into(), message: format!("{} < 1", self.l_const) });
        }
        if !(self.picard_tol > 0.0) || self.max_iter == 0 {
            return Err(RoughError::Config { field: "picard".into(), message: "tolerance and iteration cap must be positive".into() });
        }
        Ok(())
    }
}

/// ξ̃⁰ ≡ y and ξ̃^j_τ = G_τ^{∘j}(y) on a window.
pub fn initial_iterate(rpde: &Rpde, y: &[f64], x: Arc<RoughPathGrid>, params: ScaleParams, depth: usize, start: usize, cells: usize) -> Result<ControlledPath> {
    let scale = rpde.scale().clone();
    let times = x.times().to_vec();
    ControlledPath::from_fn(Variant::Tilde, params, depth, scale.clone(), x, start, cells, |j, tau, out| {
        let mut f = y.to_vec();
        for _ in 0..j {
            f = rpde.g.apply_once(times[start + tau], &scale, &f);
        }
        out.copy_from_slice(&f);
    })
}

/// One application of the mild map: U_{·,s}y + ∫U F(ξ̃⁰) du + ∫U G(ξ̃) ∘ dX with
/// Gubinelli levels G^{∘1}(ξ̃^{j−1}).
pub fn picard_step(rpde: &Rpde, current: &ControlledPath, y: &[f64]) -> Result<ControlledPath> {
    let free = free_term(y, current, &rpde.u)?;
    let drift = drift_convolution(rpde.f.as_ref(), current, &rpde.u)?;
    let mut out = free.combine(1.0, &drift, 1.0)?;
    if !rpde.g.is_zero() {
        let integrand = compose_linear_g(&rpde.g, current)?;
        let integral = integral_as_controlled(&integrand, &rpde.u)?;
        out = out.combine(1.0, &integral, 1.0)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct IntervalSolution {
    pub path: ControlledPath,
    pub iterations: usize,
    /// D̃-norms of successive Picard differences.
    pub history: Vec<f64>,
}

/// Picard iteration on the window [start, start + cells] from y.
pub fn solve_interval(rpde: &Rpde, y: &[f64], x: Arc<RoughPathGrid>, start: usize, cells: usize, config: &SolveConfig, exec: Execution) -> Result<IntervalSolution> {
    let params = config.params.scale_params();
    let mut cur = initial_iterate(rpde, y, x, params, config.params.depth, start, cells)?;
    let mut history = Vec::new();
    for it in 1..=config.max_iter {
        let next = picard_step(rpde, &cur, y)?;
        let diff = next.combine(1.0, &cur, -1.0)?.norm(exec)?;
        if !diff.is_finite() {
            return Err(RoughError::Numerical(diff));
        }
        history.push(diff);
        cur = next;
        if diff < config.picard_tol {
            return Ok(IntervalSolution { path: cur, iterations: it, history });
        }
        if history.len() >= 3 && diff >= history[history.len() - 2] {
            break;
        }
    }
    Err(RoughError::Picard { start, end: start + cells, iterations: history.len(), history })
}

/// The solution on grid indices [start, end] with its Gubinelli levels.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub start: usize,
    pub times: Vec<f64>,
    /// levels[j][τ]: ξ̃^j at local grid point τ (level 0 is φ).
    pub levels: Vec<Vec<Vec<f64>>>,
    /// Global grid indices of the step boundaries.
    pub steps: Vec<usize>,
    pub iterations: Vec<usize>,
    pub greedy: GreedySequence,
    scale: Arc<SpectralScale>,
    x: Arc<RoughPathGrid>,
    params: ScaleParams,
}

impl SolutionPath {
    pub fn value(&self, tau: usize) -> SpectralElement {
        SpectralElement::new(self.scale.clone(), self.levels[0][tau].clone()).expect("modes")
    }

    pub fn end_value(&self) -> Vec<f64> {
        self.levels[0].last().expect("non-empty").clone()
    }

    pub fn sup_norm(&self, alpha: f64) -> f64 {
        self.levels[0].iter().map(|v| self.scale.norm(v, alpha)).fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }

    /// max_{τ, j ≥ 1} |ξ̃^j_τ − G_τ^{∘j}(ξ̃⁰_τ)| in the sup norm of the coefficients.
    pub fn consistency_residual(&self, g: &GOperator) -> f64 {
        let mut worst: f64 = 0.0;
        for tau in 0..self.times.len() {
            let mut f = self.levels[0][tau].clone();
            for j in 1..self.levels.len() {
                f = g.apply_once(self.times[tau], &self.scale, &f);
                for (a, b) in f.iter().zip(&self.levels[j][tau]) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// The solution restricted to local [a, b] as a D̃ path.
    pub fn as_controlled(&self, a: usize, b: usize) -> Result<ControlledPath> {
        ControlledPath::from_fn(Variant::Tilde, self.params, self.levels.len(), self.scale.clone(), self.x.clone(), self.start + a, b - a, |j, tau, out| {
            out.copy_from_slice(&self.levels[j][a + tau])
        })
    }

    /// CSV rows `tau,mode,coef`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,mode,coef\n");
        for (t, v) in self.times.iter().zip(&self.levels[0]) {
            for (k, c) in v.iter().enumerate() {
                let _ = writeln!(s, "{t},{},{c}", k + 1);
            }
        }
        s
    }
}

/// Step boundaries: greedy points of χ, each greedy interval cut into pieces of
/// length ≤ cap (at least one cell each).
pub fn partition(times: &[f64], greedy: &[usize], cap: f64) -> Vec<usize> {
    let mut out = vec![greedy[0]];
    for w in greedy.windows(2) {
        let mut i = w[0];
        while i < w[1] {
            let mut j = i + 1;
            while j < w[1] && times[j + 1] - times[i] <= cap {
                j += 1;
            }
            out.push(j);
            i = j;
        }
    }
    out
}

fn solve_step(rpde: &Rpde, y: &[f64], x: &Arc<RoughPathGrid>, a: usize, b: usize, config: &SolveConfig, exec: Execution, out: &mut Vec<(usize, IntervalSolution)>) -> Result<()> {
    match solve_interval(rpde, y, x.clone(), a, b - a, config, exec) {
        Ok(sol) => {
            out.push((a, sol));
            Ok(())
        }
        Err(RoughError::Picard { .. }) if b - a > 1 => {
            let mid = a + (b - a) / 2;
            solve_step(rpde, y, x, a, mid, config, exec, out)?;
            let last = &out.last().expect("solved").1.path;
            let ymid = last.value(0, last.cells()).to_vec();
            solve_step(rpde, &ymid, x, mid, b, config, exec, out)
        }
        Err(e) => Err(e),
    }
}

/// Solves on grid indices [start, end] of `x` from y at t_start.
pub fn solve_from(rpde: &Rpde, y: &[f64], x: Arc<RoughPathGrid>, start: usize, end: usize, config: &SolveConfig, exec: Execution) -> Result<SolutionPath> {
    config.validate()?;
    if start >= end || end > x.len() {
        return Err(RoughError::Interval { start, end });
    }
    if y.len() != rpde.scale().modes() {
        return Err(RoughError::Dimension(format!("initial datum has {} modes", y.len())));
    }
    let controls = rough_path_controls(&x, config.params.gamma, config.params.p, exec)?;
    solve_with_controls(rpde, y, x, &controls, start, end, config, exec)
}

/// As [`solve_from`] with the rough-path controls of `x` supplied.
#[allow(clippy::too_many_arguments)]
pub fn solve_with_controls(rpde: &Rpde, y: &[f64], x: Arc<RoughPathGrid>, controls: &RoughPathControls, start: usize, end: usize, config: &SolveConfig, exec: Execution) -> Result<SolutionPath> {
    config.validate()?;
    if start >= end || end > x.len() {
        return Err(RoughError::Interval { start, end });
    }
    if y.len() != rpde.scale().modes() {
        return Err(RoughError::Dimension(format!("initial datum has {} modes", y.len())));
    }
    let gp = config.params.gamma - config.params.p;
    let greedy = greedy_points_with(&controls.total, gp, config.chi, start, end, config.policy)?;
    let steps = partition(x.times(), &greedy.points, config.step_cap());
    let depth = config.params.depth;
    let n = end - start + 1;
    let mut levels = vec![vec![Vec::new(); n]; depth];
    let mut iterations = Vec::new();
    let mut bounds = vec![start];
    let mut cur = y.to_vec();
    for w in steps.windows(2) {
        let mut solved = Vec::new();
        solve_step(rpde, &cur, &x, w[0], w[1], config, exec, &mut solved)?;
        for (a, sol) in solved {
            for tau in 0..=sol.path.cells() {
                for (j, lv) in levels.iter_mut().enumerate() {
                    lv[a - start + tau] = sol.path.value(j, tau).to_vec();
                }
            }
            iterations.push(sol.iterations);
            bounds.push(a + sol.path.cells());
            cur = sol.path.value(0, sol.path.cells()).to_vec();
        }
    }
    Ok(SolutionPath {
        start,
        times: x.times()[start..=end].to_vec(),
        levels,
        steps: bounds,
        iterations,
        greedy,
        scale: rpde.scale().clone(),
        x,
        params: config.params.scale_params(),
    })
}

/// Solves on the whole grid of `x`.
pub fn solve_global(rpde: &Rpde, y: &[f64], x: Arc<RoughPathGrid>, config: &SolveConfig, exec: Execution) -> Result<SolutionPath> {
    let end = x.len();
    solve_from(rpde, y, x, 0, end, config, exec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriBound {
    pub n_greedy: usize,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

/// P₁ = exp(Ñ log 3L), P₀ = (P₁ − 1)/(3L − 1), P₂ = 1 + P₀ + P₁.
pub fn apriori_from(n_greedy: usize, l: f64) -> AprioriBound {
    let p1 = (n_greedy as f64 * (3.0 * l).ln()).exp();
    let p0 = (p1 - 1.0) / (3.0 * l - 1.0);
    AprioriBound { n_greedy, p0, p1, p2: 1.0 + p0 + p1 }
}

/// Ñ of the total control over grid indices [a, b] and the resulting P₀, P₁, P₂.
pub fn a_priori_bound(xc: &RoughPathControls, a: usize, b: usize, chi: f64, l: f64, policy: BlockPolicy) -> Result<AprioriBound> {
    if !(l >= 1.0) {
        return Err(RoughError::Parameter(format!("L = {l} < 1")));
    }
    let g = greedy_points_with(&xc.total, xc.gamma - xc.p, chi, a, b, policy)?;
    Ok(apriori_from(g.count(), l))
}

/// Smallest L ≥ 1 with ‖φ‖_{[a,b]} ≤ L(1 + |φ_a| + S(a,b)‖φ‖_{[a,b]}) on every greedy
/// interval of the solution, S = (b−a)^{δ₂} + W_{Π¹}^{γ−σ} + Σ_j W_{Π^j}^{j(γ−p)}.
pub fn estimate_l(sol: &SolutionPath, xc: &RoughPathControls, config: &SolveConfig, exec: Execution) -> Result<f64> {
    let prm = config.params;
    let gp = prm.gamma - prm.p;
    let d2 = config.delta2();
    let mut l: f64 = 1.0;
    for w in sol.greedy.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let path = sol.as_controlled(a - sol.start, b - sol.start)?;
        let norm = path.norm(exec)?;
        let mut s = (sol.x.times()[b] - sol.x.times()[a]).powf(d2) + xc.level(1).powered(a, b, prm.gamma - prm.sigma);
        for j in 1..=prm.depth {
            s += xc.level(j).powered(a, b, j as f64 * gp);
        }
        let ya = sol.scale.norm(&sol.levels[0][a - sol.start], prm.alpha);
        l = l.max(norm / (1.0 + ya + s * norm));
    }
    Ok(l)
}

/// CSV of an ensemble summary, rows `sample,sup_norm,N_greedy,P1,P2,iters`.
pub fn summary_csv(rows: &[(usize, f64, AprioriBound, usize)]) -> String {
    let mut s = String::from("sample,sup_norm,N_greedy,P1,P2,iters\n");
    for (i, sup, b, it) in rows {
        let _ = writeln!(s, "{i},{sup},{},{},{},{it}", b.n_greedy, b.p1, b.p2);
    }
    s
}
