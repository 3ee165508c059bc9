//! Diagonal interpolation scale E_α and the evolution family U_{t,s}.
//!
//! Everything acts on coefficient vectors in a fixed eigenbasis with eigenvalues
//! λ_1 < ... < λ_K. |x|_α = (Σ λ_k^{2α} x_k²)^{1/2} and
//! U_{t,s} multiplies mode k by exp(−λ_k (A(t) − A(s))) with A the primitive
//! of the time coefficient a.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Result, RoughError};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScale {
    lambdas: Vec<f64>,
}

impl SpectralScale {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(RoughError::Parameter("at least one mode required".into()));
        }
        if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RoughError::Parameter("eigenvalues must be positive and strictly increasing".into()));
        }
        Ok(SpectralScale { lambdas })
    }

    /// λ_k = k², k = 1..K.
    pub fn heat(modes: usize) -> Result<Self> {
        Self::new((1..=modes).map(|k| (k * k) as f64).collect())
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn weights(&self, alpha: f64) -> Vec<f64> {
        self.lambdas.iter().map(|l| l.powf(alpha)).collect()
    }

    pub fn norm(&self, coefs: &[f64], alpha: f64) -> f64 {
        debug_assert_eq!(coefs.len(), self.modes());
        if alpha == 0.0 {
            return coefs.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        coefs
            .iter()
            .zip(&self.lambdas)
            .map(|(x, l)| {
                let y = x * l.powf(alpha);
                y * y
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Hilbert–Schmidt norm of a tensor-indexed field: sqrt(Σ_idx |x_idx|_α²).
    pub fn field_norm(&self, data: &[f64], alpha: f64) -> f64 {
        let w = self.weights(alpha);
        field_norm_weighted(data, &w)
    }
}

/// Hilbert–Schmidt norm with precomputed weights λ_k^α.
pub fn field_norm_weighted(data: &[f64], weights: &[f64]) -> f64 {
    let k = weights.len();
    let mut s = 0.0;
    for block in data.chunks_exact(k) {
        for (x, w) in block.iter().zip(weights) {
            let y = x * w;
            s += y * y;
        }
    }
    s.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralElement {
    scale: Arc<SpectralScale>,
    coefs: Vec<f64>,
}

impl SpectralElement {
    pub fn new(scale: Arc<SpectralScale>, coefs: Vec<f64>) -> Result<Self> {
        if coefs.len() != scale.modes() {
            return Err(RoughError::Dimension(format!("{} coefficients for {} modes", coefs.len(), scale.modes())));
        }
        Ok(SpectralElement { scale, coefs })
    }

    pub fn zero(scale: Arc<SpectralScale>) -> Self {
        let coefs = vec![0.0; scale.modes()];
        SpectralElement { scale, coefs }
    }

    /// Single mode `k` (1-based) with the given coefficient.
    pub fn mode(scale: Arc<SpectralScale>, k: usize, value: f64) -> Result<Self> {
        if k == 0 || k > scale.modes() {
            return Err(RoughError::Index(format!("mode {k} outside 1..={}", scale.modes())));
        }
        let mut e = Self::zero(scale);
        e.coefs[k - 1] = value;
        Ok(e)
    }

    pub fn scale(&self) -> &Arc<SpectralScale> {
        &self.scale
    }

    pub fn coefs(&self) -> &[f64] {
        &self.coefs
    }

    pub fn into_coefs(self) -> Vec<f64> {
        self.coefs
    }

    pub fn alpha_norm(&self, alpha: f64) -> f64 {
        self.scale.norm(&self.coefs, alpha)
    }

    /// Multiplies mode k by λ_k^β.
    pub fn fractional_power(&self, beta: f64) -> Self {
        let coefs = self.coefs.iter().zip(self.scale.lambdas()).map(|(x, l)| x * l.powf(beta)).collect();
        SpectralElement { scale: self.scale.clone(), coefs }
    }

    pub fn scaled(&self, c: f64) -> Self {
        SpectralElement { scale: self.scale.clone(), coefs: self.coefs.iter().map(|x| c * x).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let coefs = self.coefs.iter().zip(&other.coefs).map(|(a, b)| a - b).collect();
        SpectralElement { scale: self.scale.clone(), coefs }
    }

    pub fn add(&self, other: &Self) -> Self {
        let coefs = self.coefs.iter().zip(&other.coefs).map(|(a, b)| a + b).collect();
        SpectralElement { scale: self.scale.clone(), coefs }
    }

    /// CSV dump `k,lambda,coef`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,lambda,coef\n");
        for (k, (c, l)) in self.coefs.iter().zip(self.scale.lambdas()).enumerate() {
            let _ = writeln!(s, "{},{},{}", k + 1, l, c);
        }
        s
    }
}

/// The time coefficient a(t) of A(t) = −a(t)Λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    /// a ≡ c. c = 0 gives U = Id.
    Constant(f64),
    /// a(t) = 1 + amplitude · sin(2πt), amplitude < 1.
    Sinusoidal { amplitude: f64 },
}

impl Rate {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Rate::Constant(c) => c,
            Rate::Sinusoidal { amplitude } => 1.0 + amplitude * (2.0 * PI * t).sin(),
        }
    }

    /// A(t) = ∫_0^t a(u) du.
    pub fn primitive(&self, t: f64) -> f64 {
        match *self {
            Rate::Constant(c) => c * t,
            Rate::Sinusoidal { amplitude } => t + amplitude * (1.0 - (2.0 * PI * t).cos()) / (2.0 * PI),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Rate::Constant(_) => 0.0,
            Rate::Sinusoidal { amplitude } => 2.0 * PI * amplitude.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionFamily {
    scale: Arc<SpectralScale>,
    rate: Rate,
}

impl EvolutionFamily {
    pub fn new(scale: Arc<SpectralScale>, rate: Rate) -> Result<Self> {
        let ok = match rate {
            Rate::Constant(c) => c >= 0.0 && c.is_finite(),
            Rate::Sinusoidal { amplitude } => amplitude.abs() < 1.0,
        };
        if !ok {
            return Err(RoughError::Parameter(format!("time coefficient {rate:?} is not positive")));
        }
        Ok(EvolutionFamily { scale, rate })
    }

    /// Default non-autonomous family, a(t) = 1 + ½ sin(2πt).
    pub fn standard(scale: Arc<SpectralScale>) -> Self {
        EvolutionFamily { scale, rate: Rate::Sinusoidal { amplitude: 0.5 } }
    }

    /// The autonomous heat semigroup, a ≡ 1.
    pub fn heat(scale: Arc<SpectralScale>) -> Self {
        EvolutionFamily { scale, rate: Rate::Constant(1.0) }
    }

    pub fn identity(scale: Arc<SpectralScale>) -> Self {
        EvolutionFamily { scale, rate: Rate::Constant(0.0) }
    }

    pub fn scale(&self) -> &Arc<SpectralScale> {
        &self.scale
    }

    pub fn rate(&self) -> Rate {
        self.rate
    }

    pub fn integrated_rate(&self, t: f64) -> f64 {
        self.rate.primitive(t)
    }

    /// Per-mode multipliers of U_{t,s}.
    pub fn factors(&self, t: f64, s: f64) -> Result<Vec<f64>> {
        if t < s {
            return Err(RoughError::TimeOrder { s, t });
        }
        let da = self.rate.primitive(t) - self.rate.primitive(s);
        Ok(self.scale.lambdas().iter().map(|l| (-l * da).exp()).collect())
    }

    pub fn apply(&self, t: f64, s: f64, x: &SpectralElement) -> Result<SpectralElement> {
        let f = self.factors(t, s)?;
        let coefs = x.coefs().iter().zip(&f).map(|(a, b)| a * b).collect();
        SpectralElement::new(x.scale().clone(), coefs)
    }

    /// Applies U_{t,s} in place to every K-block of a tensor-indexed field.
    pub fn apply_blocks(&self, t: f64, s: f64, data: &mut [f64]) -> Result<()> {
        let f = self.factors(t, s)?;
        apply_factors(&f, data);
        Ok(())
    }
}

pub fn apply_factors(factors: &[f64], data: &mut [f64]) {
    for block in data.chunks_exact_mut(factors.len()) {
        for (x, f) in block.iter_mut().zip(factors) {
            *x *= f;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingReport {
    /// sup |(U_{t,s} − I)x|_α / (|t−s|^{σ₁} |x|_{α+σ₁}).
    pub c1: f64,
    /// sup |t−s|^{σ₂} |U_{t,s}x|_{α+σ₂} / |x|_α.
    pub c2: f64,
}

/// (σ/e)^σ, the sharp constant of the second smoothing estimate for a ≡ 1.
pub fn heat_smoothing_bound(sigma2: f64) -> f64 {
    if sigma2 == 0.0 {
        1.0
    } else {
        (sigma2 / std::f64::consts::E).powf(sigma2)
    }
}

/// Empirical constants of the two smoothing estimates over sample elements and time pairs (t, s).
pub fn smoothing_check(
    u: &EvolutionFamily,
    alpha: f64,
    sigma1: f64,
    sigma2: f64,
    xs: &[SpectralElement],
    pairs: &[(f64, f64)],
) -> Result<SmoothingReport> {
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    for &(t, s) in pairs {
        let dt = t - s;
        for x in xs {
            let ux = u.apply(t, s, x)?;
            if dt > 0.0 {
                let den1 = dt.powf(sigma1) * x.alpha_norm(alpha + sigma1);
                if den1 > 0.0 {
                    c1 = c1.max(ux.sub(x).alpha_norm(alpha) / den1);
                }
                let den2 = x.alpha_norm(alpha);
                if den2 > 0.0 {
                    c2 = c2.max(dt.powf(sigma2) * ux.alpha_norm(alpha + sigma2) / den2);
                }
            }
        }
    }
    Ok(SmoothingReport { c1, c2 })
}
