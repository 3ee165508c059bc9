//! Dyadic rough convolution ∫_s^t U_{t,u} ξ_u ∘ dX_u, Young sewing of generic
//! germs, and the drift convolution ∫ U_{τ,u} F(u, y_u) du.
//!
//! Dyadic points are snapped to the stored grid: τ^n_m = a + round(n (b−a) / 2^m).
//! The finest level m = ⌈log₂(b−a)⌉ uses every grid point, which is the limit for
//! piecewise-linear drivers.

use std::fmt::Write as _;

use crate::controlled::{ControlledPath, NormKind, ScaleParams, Variant};
use crate::controls::RoughPathControls;
use crate::error::{Result, RoughError};
use crate::exec::Execution;
use crate::spectral::{apply_factors, EvolutionFamily, SpectralScale};
use crate::tensor::{RoughPathGrid, TensorElement, MAX_DEPTH};

/// Validated exponents of the sewing construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SewingParams {
    pub gamma: f64,
    pub p: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub depth: usize,
}

impl SewingParams {
    /// Checks 1/γ ∉ ℕ, N = ⌊1/γ⌋ ≤ 3, σ < p and (σ + Nγ)/(N+1) < p < γ.
    pub fn new(gamma: f64, p: f64, sigma: f64, alpha: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(RoughError::Parameter(format!("gamma = {gamma} outside (0, 1)")));
        }
        let inv = 1.0 / gamma;
        if (inv - inv.round()).abs() < 1e-12 {
            return Err(RoughError::Parameter(format!("1/gamma = {inv} is an integer")));
        }
        let depth = inv.floor() as usize;
        if depth > MAX_DEPTH {
            return Err(RoughError::Parameter(format!("N = {depth} exceeds the supported depth {MAX_DEPTH}")));
        }
        if !(sigma >= 0.0) {
            return Err(RoughError::Parameter(format!("sigma = {sigma} is negative")));
        }
        if !(p < gamma) {
            return Err(RoughError::Parameter(format!("p < gamma fails: p = {p}, gamma = {gamma}")));
        }
        let lower = (sigma + depth as f64 * gamma) / (depth as f64 + 1.0);
        if !(lower < p) {
            return Err(RoughError::Parameter(format!("(sigma + N gamma)/(N + 1) < p fails: {lower} >= {p}")));
        }
        if !(sigma < p) {
            return Err(RoughError::Parameter(format!("sigma < p fails: sigma = {sigma}, p = {p}")));
        }
        Ok(SewingParams { gamma, p, sigma, alpha, depth })
    }

    /// P_i = (i+1)p − iγ − σ.
    pub fn p_index(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.p - i as f64 * self.gamma - self.sigma
    }

    pub fn scale_params(&self) -> ScaleParams {
        ScaleParams { alpha: self.alpha, sigma: self.sigma, gamma: self.gamma, p: self.p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SewingOptions {
    /// Stop once the finest-norm increment drops below this.
    pub tol: f64,
    /// Level cap; `None` runs until the grid is exhausted.
    pub m_max: Option<usize>,
}

impl Default for SewingOptions {
    fn default() -> Self {
        SewingOptions { tol: 1e-9, m_max: Some(14) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicLevel {
    pub m: usize,
    pub points: usize,
    pub value: Vec<f64>,
    /// |Γ^m − Γ^{m−1}| per monitored norm (empty at m = 0).
    pub increments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicRecord {
    pub start: usize,
    pub end: usize,
    pub levels: Vec<DyadicLevel>,
    /// Γ at the last computed level.
    pub final_value: Vec<f64>,
    /// Romberg extrapolation of the Γ^m sequence. Only present when every level
    /// hits the grid exactly (2^m divides the cell count); meaningful for smooth data.
    pub limit_estimate: Option<Vec<f64>>,
    pub converged: bool,
    /// The last level used every grid point of the interval.
    pub exhausted: bool,
}

impl DyadicRecord {
    pub fn increment_history(&self, norm: usize) -> Vec<f64> {
        self.levels.iter().skip(1).map(|l| l.increments[norm]).collect()
    }

    /// −slope of log₂|Γ^m − Γ^{m−1}| against m over levels ≥ `from`, in the first
    /// monitored norm. `None` with fewer than two positive increments.
    pub fn decay_exponent(&self, from: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .levels
            .iter()
            .filter(|l| l.m >= from.max(1) && l.increments[0] > 0.0)
            .map(|l| (l.m as f64, l.increments[0].log2()))
            .collect();
        ols(&pts).map(|(slope, _)| -slope)
    }

    /// CSV rows `m,l,increment_norm`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,l,increment_norm\n");
        for lvl in self.levels.iter().skip(1) {
            for (l, v) in lvl.increments.iter().enumerate() {
                let _ = writeln!(s, "{},{},{}", lvl.m, l, v);
            }
        }
        s
    }
}

/// Least squares line through `pts`, returns (slope, intercept).
pub(crate) fn ols(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Grid indices of level m on [a, b], duplicates removed.
pub fn dyadic_points(a: usize, b: usize, m: usize) -> Vec<usize> {
    let c = b - a;
    if m >= level_cap(c) {
        return (a..=b).collect();
    }
    let den = 1usize << m;
    let mut pts: Vec<usize> = (0..=den).map(|n| a + (2 * n * c + den) / (2 * den)).collect();
    pts.dedup();
    pts
}

/// Number of levels needed to reach every grid point: ⌈log₂(cells)⌉.
pub fn level_cap(cells: usize) -> usize {
    if cells <= 1 {
        0
    } else {
        (usize::BITS - (cells - 1).leading_zeros()) as usize
    }
}

fn romberg(values: &[Vec<f64>]) -> Vec<f64> {
    let mut prev: Vec<Vec<f64>> = Vec::new();
    for (m, v) in values.iter().enumerate() {
        let mut row = vec![v.clone()];
        for k in 1..=m {
            let f = (1u64 << k) as f64 - 1.0;
            let next: Vec<f64> = row[k - 1].iter().zip(&prev[k - 1]).map(|(a, b)| a + (a - b) / f).collect();
            row.push(next);
        }
        prev = row;
    }
    prev.pop().unwrap_or_default()
}

/// Generic dyadic driver: `level_sum(points)` returns Γ for a point set, `norms`
/// measures a difference in each monitored norm (the first is used for stopping).
fn run_dyadic<S, N>(a: usize, b: usize, opts: SewingOptions, trivial: bool, mut level_sum: S, norms: N) -> Result<DyadicRecord>
where
    S: FnMut(&[usize]) -> Vec<f64>,
    N: Fn(&[f64]) -> Vec<f64>,
{
    if a >= b {
        return Err(RoughError::Interval { start: a, end: b });
    }
    let cap = level_cap(b - a);
    let last = opts.m_max.map_or(cap, |m| m.min(cap));
    let mut levels: Vec<DyadicLevel> = Vec::new();
    let mut converged = false;
    for m in 0..=last {
        let pts = dyadic_points(a, b, m);
        let value = level_sum(&pts);
        let increments = match levels.last() {
            Some(prev) => {
                let diff: Vec<f64> = value.iter().zip(&prev.value).map(|(x, y)| x - y).collect();
                norms(&diff)
            }
            None => Vec::new(),
        };
        let small = increments.first().is_some_and(|v| *v < opts.tol);
        levels.push(DyadicLevel { m, points: pts.len(), value, increments });
        if small || trivial {
            converged = true;
            break;
        }
    }
    let final_level = levels.last().expect("at least one level");
    let exhausted = final_level.points == b - a + 1;
    if !converged && !exhausted {
        return Err(RoughError::NonConvergence {
            levels: levels.len(),
            last: levels.last().and_then(|l| l.increments.first().copied()).unwrap_or(f64::NAN),
            history: levels.iter().skip(1).map(|l| l.increments[0]).collect(),
        });
    }
    let dyadic_exact = (b - a).is_power_of_two();
    let limit_estimate = if dyadic_exact && levels.len() > 1 {
        Some(romberg(&levels.iter().map(|l| l.value.clone()).collect::<Vec<_>>()))
    } else {
        None
    };
    let final_value = final_level.value.clone();
    Ok(DyadicRecord { start: a, end: b, levels, final_value, limit_estimate, converged: converged || exhausted, exhausted })
}

/// Adds Σ_{j<N} ξ^j_u ∘ Π^{j+1}(X)_{u,v} (a K-vector) to `out`.
fn germ_into(xi: &ControlledPath, u: usize, xuv: &TensorElement, out: &mut [f64]) {
    let k = out.len();
    for j in 0..xi.depth() {
        let pi = xuv.level(j + 1);
        let src = xi.value(j, u);
        for (idx, &c) in pi.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, s) in out.iter_mut().zip(&src[idx * k..(idx + 1) * k]) {
                *o += c * s;
            }
        }
    }
}

fn check_integrand(xi: &ControlledPath, u: &EvolutionFamily) -> Result<()> {
    if xi.variant() != Variant::D {
        return Err(RoughError::Parameter("the rough integrand must be a D path".into()));
    }
    if u.scale().as_ref() != xi.scale().as_ref() {
        return Err(RoughError::Dimension("evolution family and path use different scales".into()));
    }
    Ok(())
}

/// Γ^m = Σ_n U_{t,τ_n} Σ_j ξ^j_{τ_n} ∘ Π^{j+1}(X)_{τ_n,τ_{n+1}} on local [a, b], monitored
/// in E_{α−lγ} for l = 0..N.
pub fn sewing_integral(xi: &ControlledPath, u: &EvolutionFamily, a: usize, b: usize, opts: SewingOptions) -> Result<DyadicRecord> {
    check_integrand(xi, u)?;
    if b > xi.cells() {
        return Err(RoughError::Interval { start: a, end: b });
    }
    let x = xi.driver().clone();
    let k = xi.modes();
    let t = xi.time(b);
    let weights: Vec<Vec<f64>> = (0..=xi.depth())
        .map(|l| xi.scale().weights(xi.params().alpha - l as f64 * xi.params().gamma))
        .collect();
    let trivial = (0..xi.depth()).all(|j| (a..=b).all(|tau| xi.value(j, tau).iter().all(|v| *v == 0.0)));
    let mut err = None;
    let rec = run_dyadic(
        a,
        b,
        opts,
        trivial,
        |pts| {
            let mut total = vec![0.0; k];
            let mut g = vec![0.0; k];
            for w in pts.windows(2) {
                let xuv = match x.query(xi.start() + w[0], xi.start() + w[1]) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        return total;
                    }
                };
                g.fill(0.0);
                germ_into(xi, w[0], &xuv, &mut g);
                let f = u.factors(t, xi.time(w[0])).expect("ordered times");
                for ((o, gv), fv) in total.iter_mut().zip(&g).zip(&f) {
                    *o += fv * gv;
                }
            }
            total
        },
        |diff| weights.iter().map(|w| crate::spectral::field_norm_weighted(diff, w)).collect(),
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(rec),
    }
}

/// I_τ = ∫_{t_0}^{τ} U_{τ,u} ξ_u ∘ dX_u at every point of the window, by
/// I_{k+1} = U_{k+1,k}(I_k + Σ_j ξ^j_k ∘ Π^{j+1}(X)_{k,k+1}). Equals the finest dyadic level.
pub fn cumulative_integral(xi: &ControlledPath, u: &EvolutionFamily) -> Result<Vec<Vec<f64>>> {
    check_integrand(xi, u)?;
    let k = xi.modes();
    let cells = &xi.driver().cells()[xi.start()..xi.start() + xi.cells()];
    let mut out = Vec::with_capacity(xi.cells() + 1);
    let mut cur = vec![0.0; k];
    out.push(cur.clone());
    for (n, cell) in cells.iter().enumerate() {
        germ_into(xi, n, cell, &mut cur);
        let f = u.factors(xi.time(n + 1), xi.time(n))?;
        apply_factors(&f, &mut cur);
        out.push(cur.clone());
    }
    Ok(out)
}

/// The D̃ path (∫ U ξ ∘ dX, ξ^0, ..., ξ^{N−2}) on the window of ξ.
pub fn integral_as_controlled(xi: &ControlledPath, u: &EvolutionFamily) -> Result<ControlledPath> {
    let integral = cumulative_integral(xi, u)?;
    ControlledPath::from_fn(
        Variant::Tilde,
        xi.params(),
        xi.depth(),
        xi.scale().clone(),
        xi.driver().clone(),
        xi.start(),
        xi.cells(),
        |j, tau, out| {
            if j == 0 {
                out.copy_from_slice(&integral[tau]);
            } else {
                out.copy_from_slice(xi.value(j - 1, tau));
            }
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioReport {
    pub lhs: f64,
    pub rhs: f64,
}

impl RatioReport {
    /// lhs / rhs with 0/0 = 0.
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs
        }
    }
}

/// |∫ − Γ⁰|_{α−lγ} against Σ_j W_{Π^{j+1}}^{(j+1)(γ−p)} ((t−s)^{P_N + l(γ−p)} W_{R^{j,N},2}^{(N−j)(γ−p)}
/// + (t−s)^{P_j + l(γ−p)} sup|ξ^j|) (t−s)^{lp} on local [a, b].
pub fn error_certificate(
    record: &DyadicRecord,
    xi: &ControlledPath,
    xc: &RoughPathControls,
    params: &SewingParams,
    l: usize,
    exec: Execution,
) -> Result<RatioReport> {
    let (a, b) = (record.start, record.end);
    let beta = params.alpha - l as f64 * params.gamma;
    let gamma0 = &record.levels[0].value;
    let diff: Vec<f64> = record.final_value.iter().zip(gamma0).map(|(x, y)| x - y).collect();
    let lhs = xi.scale().field_norm(&diff, beta);
    let dt = xi.time(b) - xi.time(a);
    let gp = params.gamma - params.p;
    let n = params.depth;
    let rc = xi.remainder_controls(a, b, exec)?;
    let (ga, gb) = (xi.start() + a, xi.start() + b);
    let mut rhs = 0.0;
    for j in 0..n.min(xi.depth()) {
        let wx = xc.level(j + 1).powered(ga, gb, (j + 1) as f64 * gp);
        let wr = match (rc.table(NormKind::Kind2, j, n), rc.power(NormKind::Kind2, j, n)) {
            (Some(t), Some(e)) => t.powered(0, b - a, e),
            _ => 0.0,
        };
        let sup = xi.sup_norm(j, xi.level_index(j), a, b);
        let lg = l as f64 * gp;
        rhs += wx * (dt.powf(params.p_index(n) + lg) * wr + dt.powf(params.p_index(j) + lg) * sup) * dt.powf(l as f64 * params.p);
    }
    Ok(RatioReport { lhs, rhs })
}

/// Both sides of the promotion bound: max of the R̃^{0,·} controls of ∫ U ξ ∘ dX
/// against Σ_j W_{Π^{j+1}}^{(j+1)(γ−p)} (W_{R^{j,N},2}^{(N−j)(γ−p)} + sup|ξ^j|).
pub fn promotion_diagnostic(xi: &ControlledPath, tilde: &ControlledPath, xc: &RoughPathControls, exec: Execution) -> Result<RatioReport> {
    if xi.variant() != Variant::D || tilde.variant() != Variant::Tilde {
        return Err(RoughError::Parameter("promotion compares a D integrand with its D̃ integral".into()));
    }
    let n = xi.cells();
    let depth = xi.depth();
    let gp = xi.params().gamma - xi.params().p;
    let rt = tilde.remainder_controls(0, n, exec)?;
    let mut lhs: f64 = rt.table(NormKind::Consecutive, 0, 1).map_or(0.0, |t| t.get(0, n));
    for l in 2..=depth {
        for kind in [NormKind::Kind1, NormKind::Kind2] {
            if let Some(t) = rt.table(kind, 0, l) {
                lhs = lhs.max(t.get(0, n));
            }
        }
    }
    let rc = xi.remainder_controls(0, n, exec)?;
    let (ga, gb) = (xi.start(), xi.start() + n);
    let mut rhs = 0.0;
    for j in 0..depth {
        let wx = xc.level(j + 1).powered(ga, gb, (j + 1) as f64 * gp);
        let wr = match (rc.table(NormKind::Kind2, j, depth), rc.power(NormKind::Kind2, j, depth)) {
            (Some(t), Some(e)) => t.powered(0, n, e),
            _ => 0.0,
        };
        rhs += wx * (wr + xi.sup_norm(j, xi.level_index(j), 0, n));
    }
    Ok(RatioReport { lhs, rhs })
}

/// Dyadic Riemann sums Σ Ξ_{τ_n, τ_{n+1}} of a two-parameter germ over grid
/// indices [a, b], monitored in the Euclidean norm.
pub fn young_sewing<G>(a: usize, b: usize, mut germ: G, opts: SewingOptions) -> Result<DyadicRecord>
where
    G: FnMut(usize, usize) -> Vec<f64>,
{
    run_dyadic(
        a,
        b,
        opts,
        false,
        |pts| {
            let mut total: Vec<f64> = Vec::new();
            for w in pts.windows(2) {
                let g = germ(w[0], w[1]);
                if total.is_empty() {
                    total = g;
                } else {
                    total.iter_mut().zip(&g).for_each(|(t, x)| *t += x);
                }
            }
            total
        },
        |diff| vec![diff.iter().map(|x| x * x).sum::<f64>().sqrt()],
    )
}

/// Largest |Ξ_{u,w} − Ξ_{u,v} − Ξ_{v,w}| over consecutive dyadic triples of level m.
pub fn germ_defect<G>(a: usize, b: usize, m: usize, germ: G) -> f64
where
    G: Fn(usize, usize) -> Vec<f64>,
{
    let pts = dyadic_points(a, b, m);
    pts.windows(3)
        .step_by(2)
        .map(|w| {
            let (uw, uv, vw) = (germ(w[0], w[2]), germ(w[0], w[1]), germ(w[1], w[2]));
            uw.iter().zip(&uv).zip(&vw).map(|((x, y), z)| (x - y - z).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// The nonlinearity F(t, y) acting on coefficient vectors, Lipschitz in every E_α.
pub trait Drift: Send + Sync + std::fmt::Debug {
    fn eval(&self, t: f64, y: &[f64], scale: &SpectralScale, out: &mut [f64]);
    /// C_F with |F(t, y) − F(t, z)|_α ≤ C_F |y − z|_α.
    fn lipschitz(&self) -> f64;
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDrift;

impl Drift for ZeroDrift {
    fn eval(&self, _t: f64, _y: &[f64], _scale: &SpectralScale, out: &mut [f64]) {
        out.fill(0.0);
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// F ≡ w.
#[derive(Debug, Clone)]
pub struct ConstantDrift(pub Vec<f64>);

impl Drift for ConstantDrift {
    fn eval(&self, _t: f64, _y: &[f64], _scale: &SpectralScale, out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }
}

/// F(y)_k = b_k y_k.
#[derive(Debug, Clone)]
pub struct LinearDrift(pub Vec<f64>);

impl Drift for LinearDrift {
    fn eval(&self, _t: f64, y: &[f64], _scale: &SpectralScale, out: &mut [f64]) {
        for ((o, b), v) in out.iter_mut().zip(&self.0).zip(y) {
            *o = b * v;
        }
    }

    fn lipschitz(&self) -> f64 {
        self.0.iter().fold(0.0, |m, b| m.max(b.abs()))
    }
}

/// F(y)_k = amplitude · sin(y_k).
#[derive(Debug, Clone, Copy)]
pub struct SineDrift {
    pub amplitude: f64,
}

impl Drift for SineDrift {
    fn eval(&self, _t: f64, y: &[f64], _scale: &SpectralScale, out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(y) {
            *o = self.amplitude * v.sin();
        }
    }

    fn lipschitz(&self) -> f64 {
        self.amplitude.abs()
    }
}

/// ∫_0^h e^{−μ(h−s)} ds and ∫_0^h e^{−μ(h−s)} s/h ds.
fn phi_weights(mu: f64, h: f64) -> (f64, f64) {
    let x = mu * h;
    if x.abs() < 1e-4 {
        let phi1 = h * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
        let phi2 = h * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0);
        (phi1, phi2)
    } else {
        let phi1 = -(-x).exp_m1() / mu;
        (phi1, (1.0 - phi1 / h) / mu)
    }
}

/// Z_τ = ∫_{t_0}^τ U_{τ,u} F(u, ỹ⁰_u) du on the window of ỹ, as a D̃ path with zero
/// Gubinelli levels. Per cell, F is interpolated linearly and the rate is frozen
/// at its cell average, so the exponential weights are integrated exactly.
pub fn drift_convolution(f: &dyn Drift, y: &ControlledPath, u: &EvolutionFamily) -> Result<ControlledPath> {
    if y.variant() != Variant::Tilde {
        return Err(RoughError::Parameter("drift convolution expects a D̃ path".into()));
    }
    let k = y.modes();
    let scale = y.scale().clone();
    let mut z = ControlledPath::zeros(Variant::Tilde, y.params(), y.depth(), scale.clone(), y.driver().clone(), y.start(), y.cells())?;
    if f.is_zero() {
        return Ok(z);
    }
    let rate = u.rate();
    let mut fl = vec![0.0; k];
    let mut fr = vec![0.0; k];
    f.eval(y.time(0), y.value(0, 0), &scale, &mut fl);
    let mut cur = vec![0.0; k];
    for n in 0..y.cells() {
        let (t0, t1) = (y.time(n), y.time(n + 1));
        let h = t1 - t0;
        f.eval(t1, y.value(0, n + 1), &scale, &mut fr);
        let abar = (rate.primitive(t1) - rate.primitive(t0)) / h;
        let fac = u.factors(t1, t0)?;
        for (m, lam) in scale.lambdas().iter().enumerate() {
            let (p1, p2) = phi_weights(lam * abar, h);
            let v = fac[m] * cur[m] + (p1 - p2) * fl[m] + p2 * fr[m];
            if !v.is_finite() {
                return Err(RoughError::Numerical(v));
            }
            cur[m] = v;
        }
        z.value_mut(0, n + 1).copy_from_slice(&cur);
        std::mem::swap(&mut fl, &mut fr);
    }
    Ok(z)
}

/// The free term τ ↦ U_{τ,t_0} y on the window of `like`, as a D̃ path with zero levels.
pub fn free_term(y: &[f64], like: &ControlledPath, u: &EvolutionFamily) -> Result<ControlledPath> {
    let t0 = like.time(0);
    let mut out = ControlledPath::zeros(Variant::Tilde, like.params(), like.depth(), like.scale().clone(), like.driver().clone(), like.start(), like.cells())?;
    for tau in 0..=like.cells() {
        let f = u.factors(like.time(tau), t0)?;
        let dst = out.value_mut(0, tau);
        for ((o, v), c) in dst.iter_mut().zip(y).zip(&f) {
            *o = v * c;
        }
    }
    Ok(out)
}

/// Convenience: a D path on the whole grid of `x` with every level built by `f`.
pub fn d_path_on<F>(params: ScaleParams, depth: usize, scale: std::sync::Arc<SpectralScale>, x: std::sync::Arc<RoughPathGrid>, f: F) -> Result<ControlledPath>
where
    F: FnMut(usize, usize, &mut [f64]),
{
    let cells = x.len();
    ControlledPath::from_fn(Variant::D, params, depth, scale, x, 0, cells, f)
}
