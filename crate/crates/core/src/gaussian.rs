//! Fractional Brownian motion on a grid, its piecewise-linear lift, and
//! Cameron–Martin elements in the reproducing-kernel span.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, RoughError};
use crate::tensor::{lift_points, RoughPathGrid};

/// R(s,t) = ½(s^{2H} + t^{2H} − |t−s|^{2H}).
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (s.abs().powf(h2) + t.abs().powf(h2) - (t - s).abs().powf(h2))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sample `index` in a run seeded with `seed`.
///
/// Splitting rule: `splitmix64(seed ^ splitmix64(index))`. Distinct indices give
/// statistically independent ChaCha8 streams, and the value of a sample depends
/// only on (seed, index), never on scheduling.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}

pub fn uniform_grid(t_end: f64, cells: usize) -> Vec<f64> {
    (0..=cells).map(|k| t_end * k as f64 / cells as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSamples {
    pub times: Vec<f64>,
    /// One row of length d per grid point.
    pub values: Vec<Vec<f64>>,
    pub hurst: Option<f64>,
    pub seed: Option<u64>,
}

impl PathSamples {
    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }

    /// Pointwise sum with another path on the same grid.
    pub fn add(&self, other: &[Vec<f64>]) -> Result<PathSamples> {
        if other.len() != self.values.len() {
            return Err(RoughError::Dimension("paths live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(other)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(PathSamples { times: self.times.clone(), values, hurst: None, seed: None })
    }

    /// Keeps every `step`-th grid point.
    pub fn subsample(&self, step: usize) -> Result<PathSamples> {
        if step == 0 || (self.times.len() - 1) % step != 0 {
            return Err(RoughError::Parameter(format!("step {step} does not divide the grid")));
        }
        Ok(PathSamples {
            times: self.times.iter().step_by(step).copied().collect(),
            values: self.values.iter().step_by(step).cloned().collect(),
            hurst: self.hurst,
            seed: self.seed,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for j in 1..=self.dim() {
            let _ = write!(s, ",x{j}");
        }
        s.push('\n');
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = write!(s, "{t}");
            for x in v {
                let _ = write!(s, ",{x}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses the `t,x1,...,xd` format; lines starting with `#` are ignored.
    pub fn from_csv(text: &str) -> Result<PathSamples> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(RoughError::Parse { line: 0, message: "empty file".into() })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "t" {
            return Err(RoughError::Parse { line: hline + 1, message: "expected header t,x1,...".into() });
        }
        let d = cols.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (n, line) in lines {
            let nums: std::result::Result<Vec<f64>, _> = line.split(',').map(|x| x.trim().parse::<f64>()).collect();
            let nums = nums.map_err(|e| RoughError::Parse { line: n + 1, message: e.to_string() })?;
            if nums.len() != d + 1 {
                return Err(RoughError::Parse { line: n + 1, message: format!("expected {} columns", d + 1) });
            }
            times.push(nums[0]);
            values.push(nums[1..].to_vec());
        }
        if times.len() < 2 {
            return Err(RoughError::Parse { line: 0, message: "need at least two rows".into() });
        }
        Ok(PathSamples { times, values, hurst: None, seed: None })
    }
}

/// Exact fBm sampler for a fixed grid: the Cholesky factor of the covariance
/// of (X_{t_1}, ..., X_{t_m}) is computed once and shared by all samples.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    hurst: f64,
    times: Vec<f64>,
    /// Row-major lower-triangular m × m factor.
    chol: Vec<f64>,
}

impl FbmSampler {
    pub fn new(hurst: f64, times: &[f64]) -> Result<Self> {
        if !(hurst > 0.25 && hurst <= 0.5) {
            return Err(RoughError::Parameter(format!("Hurst index {hurst} outside (1/4, 1/2]")));
        }
        if times.len() < 2 || times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RoughError::Parameter("grid must start at 0 and increase strictly".into()));
        }
        let m = times.len() - 1;
        let cov = DMatrix::from_fn(m, m, |i, j| fbm_covariance(hurst, times[i + 1], times[j + 1]));
        let trace: f64 = (0..m).map(|i| cov[(i, i)]).sum();
        let mut jitter = 0.0;
        for attempt in 0..6 {
            let mut c = cov.clone();
            for i in 0..m {
                c[(i, i)] += jitter;
            }
            if let Some(ch) = c.cholesky() {
                let l = ch.l();
                let mut chol = vec![0.0; m * m];
                for i in 0..m {
                    for j in 0..=i {
                        chol[i * m + j] = l[(i, j)];
                    }
                }
                return Ok(FbmSampler { hurst, times: times.to_vec(), chol });
            }
            jitter = trace / m as f64 * 1e-14 * 10f64.powi(2 * attempt);
        }
        let min_eigenvalue = SymmetricEigen::new(cov).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        Err(RoughError::Sampling { min_eigenvalue })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// d independent components from the stream of `rng`.
    pub fn sample_with<R: rand::Rng>(&self, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let m = self.times.len() - 1;
        let mut values = vec![vec![0.0; d]; m + 1];
        let mut z = vec![0.0; m];
        for c in 0..d {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            for i in 0..m {
                let row = &self.chol[i * m..i * m + i + 1];
                values[i + 1][c] = row.iter().zip(&z).map(|(a, b)| a * b).sum();
            }
        }
        values
    }

    /// Sample `index` of a run seeded with `seed` (see [`derive_seed`]).
    pub fn sample(&self, d: usize, seed: u64, index: u64) -> PathSamples {
        let mut rng = rng_for(seed, index);
        let values = self.sample_with(d, &mut rng);
        PathSamples { times: self.times.clone(), values, hurst: Some(self.hurst), seed: Some(derive_seed(seed, index)) }
    }
}

/// One-shot sampler: builds the factor and draws a single path with `seed`.
pub fn sample_fbm(hurst: f64, times: &[f64], d: usize, seed: u64) -> Result<PathSamples> {
    Ok(FbmSampler::new(hurst, times)?.sample(d, seed, 0))
}

/// Canonical lift of the piecewise-linear interpolation.
pub fn lift_path(path: &PathSamples, depth: usize) -> Result<RoughPathGrid> {
    lift_points(&path.times, &path.values, depth)
}

/// h(t) = Σ_i c_i R(s_i, t) per component.
#[derive(Debug, Clone, PartialEq)]
pub struct CmElement {
    pub hurst: f64,
    pub knots: Vec<f64>,
    /// coefs[component][i] multiplies R(knots[i], ·).
    pub coefs: Vec<Vec<f64>>,
}

impl CmElement {
    pub fn new(hurst: f64, knots: Vec<f64>, coefs: Vec<Vec<f64>>) -> Result<Self> {
        if coefs.iter().any(|c| c.len() != knots.len()) {
            return Err(RoughError::Dimension("each component needs one coefficient per knot".into()));
        }
        Ok(CmElement { hurst, knots, coefs })
    }

    pub fn zero(hurst: f64, d: usize) -> Self {
        CmElement { hurst, knots: Vec::new(), coefs: vec![Vec::new(); d] }
    }

    pub fn dim(&self) -> usize {
        self.coefs.len()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let r: Vec<f64> = self.knots.iter().map(|&s| fbm_covariance(self.hurst, s, t)).collect();
        self.coefs.iter().map(|c| c.iter().zip(&r).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn sample_on(&self, times: &[f64]) -> PathSamples {
        PathSamples { times: times.to_vec(), values: times.iter().map(|&t| self.eval(t)).collect(), hurst: Some(self.hurst), seed: None }
    }

    pub fn scaled(&self, c: f64) -> Self {
        CmElement {
            hurst: self.hurst,
            knots: self.knots.clone(),
            coefs: self.coefs.iter().map(|v| v.iter().map(|x| c * x).collect()).collect(),
        }
    }

    /// Sum as an element of the kernel span (knot lists are concatenated).
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() || self.hurst != other.hurst {
            return Err(RoughError::Dimension("incompatible Cameron–Martin elements".into()));
        }
        let mut knots = self.knots.clone();
        knots.extend_from_slice(&other.knots);
        let coefs = self.coefs.iter().zip(&other.coefs).map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
        Ok(CmElement { hurst: self.hurst, knots, coefs })
    }

    /// |h|_H = sqrt(Σ_components Σ_ij c_i c_j R(s_i, s_j)).
    pub fn cm_norm(&self) -> Result<f64> {
        let mut q = 0.0;
        for c in &self.coefs {
            for (i, &si) in self.knots.iter().enumerate() {
                for (j, &sj) in self.knots.iter().enumerate() {
                    q += c[i] * c[j] * fbm_covariance(self.hurst, si, sj);
                }
            }
        }
        if q < -1e-10 {
            return Err(RoughError::Numerical(q));
        }
        Ok(q.max(0.0).sqrt())
    }
}
