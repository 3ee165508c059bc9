//! Configuration, Monte Carlo tail and moment studies, and single-stage runs.
//!
//! Config files are flat `key = value` lines, `#` starts a comment. Keys and the
//! symbols they stand for:
//!
//! | key | symbol | default |
//! |---|---|---|
//! | `hurst` | H | 0.4 |
//! | `gamma` | γ | 0.35 |
//! | `p` | p | 0.28 |
//! | `sigma` | σ | 0.05 |
//! | `alpha` | α | 0 |
//! | `gamma_prime` | γ′ | H + ½ − 0.01 |
//! | `dim` | d | 2 |
//! | `t_end` | T | 1 |
//! | `grid` | m (cells) | 256 |
//! | `modes` | K | 64 |
//! | `chi` | χ | 0.2 |
//! | `rho` | ρ, radius of y | 1 |
//! | `samples` | M | 2000 |
//! | `seed` | | 0 |
//! | `out` | output directory | `out` |
//! | `rate` | a(t): `sinusoidal`, `heat` or `none` | `sinusoidal` |
//! | `rate_amplitude` | amplitude of a(t) | 0.5 |
//! | `g_amplitude` | scale of c_i(t) in G | 0.1 |
//! | `f_amplitude` | F(y) = amplitude · sin(y) | 0.1 |
//! | `picard_tol` | Picard tolerance | 1e-7 |
//! | `l_const` | L | 1 |
//! | `max_step` | step cap replacing L₂ | unset |
//! | `policy` | blocked greedy cells: `saturate` or `strict` | `saturate` |
//! | `moments` | q list | `1,2,4,8` |
//! | `h_knot`, `h_coef` | h = h_coef · R(h_knot, ·) per component | 0.5, 1 |
//! | `path_file` | CSV `t,x1,..` used instead of sampling | unset |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::controlled::GOperator;
use crate::controls::{greedy_points_with, rough_path_controls, BlockPolicy, RoughPathControls};
use crate::error::{Result, RoughError};
use crate::exec::Execution;
use crate::gaussian::{lift_path, rng_for, uniform_grid, CmElement, FbmSampler, PathSamples};
use crate::sewing::{ols, sewing_integral, SewingOptions, SewingParams, SineDrift, ZeroDrift};
use crate::solver::{apriori_from, initial_iterate, picard_step, solve_with_controls, summary_csv, Rpde, SolveConfig};
use crate::spectral::{EvolutionFamily, Rate, SpectralScale};
use crate::tensor::RoughPathGrid;
use crate::translation::{hnorm_control_check, translate_cm, translated_control_check};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub hurst: f64,
    pub gamma: f64,
    pub p: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub gamma_prime: Option<f64>,
    pub dim: usize,
    pub t_end: f64,
    pub grid: usize,
    pub modes: usize,
    pub chi: f64,
    pub rho: f64,
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub rate: String,
    pub rate_amplitude: f64,
    pub g_amplitude: f64,
    pub f_amplitude: f64,
    pub picard_tol: f64,
    pub l_const: f64,
    pub max_step: Option<f64>,
    pub policy: BlockPolicy,
    pub moments: Vec<f64>,
    pub h_knot: f64,
    pub h_coef: f64,
    pub path_file: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            hurst: 0.4,
            gamma: 0.35,
            p: 0.28,
            sigma: 0.05,
            alpha: 0.0,
            gamma_prime: None,
            dim: 2,
            t_end: 1.0,
            grid: 256,
            modes: 64,
            chi: 0.2,
            rho: 1.0,
            samples: 2000,
            seed: 0,
            out: PathBuf::from("out"),
            rate: "sinusoidal".into(),
            rate_amplitude: 0.5,
            g_amplitude: 0.1,
            f_amplitude: 0.1,
            picard_tol: 1e-7,
            l_const: 1.0,
            max_step: None,
            policy: BlockPolicy::Saturate,
            moments: vec![1.0, 2.0, 4.0, 8.0],
            h_knot: 0.5,
            h_coef: 1.0,
            path_file: None,
        }
    }
}

fn cfg_err(field: &str, message: impl Into<String>) -> RoughError {
    RoughError::Config { field: field.into(), message: message.into() }
}

fn num<T: std::str::FromStr>(field: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| cfg_err(field, format!("cannot parse {v:?}: {e}")))
}

impl ExperimentConfig {
    /// Parses `key = value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(RoughError::Parse { line: n + 1, message: format!("expected key = value, got {line:?}") })?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "hurst" => self.hurst = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "p" => self.p = num(key, v)?,
            "sigma" => self.sigma = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "gamma_prime" => self.gamma_prime = Some(num(key, v)?),
            "dim" => self.dim = num(key, v)?,
            "t_end" => self.t_end = num(key, v)?,
            "grid" => self.grid = num(key, v)?,
            "modes" => self.modes = num(key, v)?,
            "chi" => self.chi = num(key, v)?,
            "rho" => self.rho = num(key, v)?,
            "samples" => self.samples = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "rate" => match v {
                "sinusoidal" | "heat" | "none" => self.rate = v.into(),
                _ => return Err(cfg_err(key, format!("unknown rate {v:?}"))),
            },
            "rate_amplitude" => self.rate_amplitude = num(key, v)?,
            "g_amplitude" => self.g_amplitude = num(key, v)?,
            "f_amplitude" => self.f_amplitude = num(key, v)?,
            "picard_tol" => self.picard_tol = num(key, v)?,
            "l_const" => self.l_const = num(key, v)?,
            "max_step" => self.max_step = Some(num(key, v)?),
            "policy" => {
                self.policy = match v {
                    "saturate" => BlockPolicy::Saturate,
                    "strict" => BlockPolicy::Strict,
                    _ => return Err(cfg_err(key, format!("unknown policy {v:?}"))),
                }
            }
            "moments" => {
                self.moments = v.split(',').map(|q| num(key, q.trim())).collect::<Result<Vec<f64>>>()?;
            }
            "h_knot" => self.h_knot = num(key, v)?,
            "h_coef" => self.h_coef = num(key, v)?,
            "path_file" => self.path_file = Some(PathBuf::from(v)),
            _ => return Err(cfg_err(key, "unknown key")),
        }
        Ok(())
    }

    /// γ′ = H + ½ − 0.01 unless set.
    pub fn gamma_prime(&self) -> f64 {
        self.gamma_prime.unwrap_or(self.hurst + 0.5 - 0.01)
    }

    pub fn sewing_params(&self) -> Result<SewingParams> {
        SewingParams::new(self.gamma, self.p, self.sigma, self.alpha)
    }

    /// Checks the parameter constraints; `moments` adds 2(γ′ − p) > 1.
    pub fn validate(&self, moments: bool) -> Result<SewingParams> {
        if !(self.hurst > 0.25 && self.hurst <= 0.5) {
            return Err(cfg_err("hurst", format!("{} outside (1/4, 1/2]", self.hurst)));
        }
        if !(self.gamma < self.hurst) {
            return Err(cfg_err("gamma", format!("gamma = {} must be below H = {}", self.gamma, self.hurst)));
        }
        let prm = self.sewing_params().map_err(|e| cfg_err("gamma/p/sigma", e.to_string()))?;
        let gp = self.gamma_prime();
        if !(gp > self.gamma && gp < self.hurst + 0.5) {
            return Err(cfg_err("gamma_prime", format!("{gp} outside (gamma, H + 1/2)")));
        }
        if moments && !(2.0 * (gp - self.p) > 1.0) {
            return Err(cfg_err("gamma_prime", format!("2(gamma' - p) = {} <= 1", 2.0 * (gp - self.p))));
        }
        if self.dim == 0 || self.grid < 2 || self.modes == 0 {
            return Err(cfg_err("dim/grid/modes", "must be positive (grid >= 2)"));
        }
        if !(self.t_end > 0.0 && self.chi > 0.0 && self.rho >= 0.0) {
            return Err(cfg_err("t_end/chi/rho", "must be positive"));
        }
        if self.moments.iter().any(|q| !(*q > 0.0 && *q <= 10.0)) {
            return Err(cfg_err("moments", "q must lie in (0, 10]"));
        }
        Ok(prm)
    }

    /// Canonical `key = value` listing (also the input of the content hash).
    pub fn to_lines(&self) -> Vec<(String, String)> {
        let opt = |o: Option<f64>| o.map_or("unset".to_string(), |v| v.to_string());
        let policy = match self.policy {
            BlockPolicy::Saturate => "saturate",
            BlockPolicy::Strict => "strict",
        };
        vec![
            ("hurst".into(), self.hurst.to_string()),
            ("gamma".into(), self.gamma.to_string()),
            ("p".into(), self.p.to_string()),
            ("sigma".into(), self.sigma.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("gamma_prime".into(), self.gamma_prime().to_string()),
            ("dim".into(), self.dim.to_string()),
            ("t_end".into(), self.t_end.to_string()),
            ("grid".into(), self.grid.to_string()),
            ("modes".into(), self.modes.to_string()),
            ("chi".into(), self.chi.to_string()),
            ("rho".into(), self.rho.to_string()),
            ("samples".into(), self.samples.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("rate".into(), self.rate.clone()),
            ("rate_amplitude".into(), self.rate_amplitude.to_string()),
            ("g_amplitude".into(), self.g_amplitude.to_string()),
            ("f_amplitude".into(), self.f_amplitude.to_string()),
            ("picard_tol".into(), self.picard_tol.to_string()),
            ("l_const".into(), self.l_const.to_string()),
            ("max_step".into(), opt(self.max_step)),
            ("policy".into(), policy.into()),
            ("moments".into(), self.moments.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",")),
            ("h_knot".into(), self.h_knot.to_string()),
            ("h_coef".into(), self.h_coef.to_string()),
            ("path_file".into(), self.path_file.as_ref().map_or("unset".into(), |p| p.display().to_string())),
        ]
    }

    /// SHA-256 of the canonical listing followed by the input file, if any.
    pub fn content_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        for (k, v) in self.to_lines() {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        if let Some(p) = &self.path_file {
            h.update(std::fs::read(p)?);
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    /// `# key = value` header lines plus the hash.
    pub fn header(&self) -> Result<String> {
        let mut s = String::new();
        for (k, v) in self.to_lines() {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "# hash = {}", self.content_hash()?);
        Ok(s)
    }

    pub fn times(&self) -> Vec<f64> {
        uniform_grid(self.t_end, self.grid)
    }

    pub fn scale(&self) -> Result<Arc<SpectralScale>> {
        Ok(Arc::new(SpectralScale::heat(self.modes)?))
    }

    pub fn evolution(&self) -> Result<EvolutionFamily> {
        let rate = match self.rate.as_str() {
            "heat" => Rate::Constant(1.0),
            "none" => Rate::Constant(0.0),
            _ => Rate::Sinusoidal { amplitude: self.rate_amplitude },
        };
        EvolutionFamily::new(self.scale()?, rate)
    }

    pub fn rpde(&self) -> Result<Rpde> {
        let f: Box<dyn crate::sewing::Drift> = if self.f_amplitude == 0.0 { Box::new(ZeroDrift) } else { Box::new(SineDrift { amplitude: self.f_amplitude }) };
        let g = if self.g_amplitude == 0.0 { GOperator::zero(self.dim, self.sigma) } else { GOperator::standard(self.dim, self.sigma, self.g_amplitude) };
        Ok(Rpde { u: self.evolution()?, f, g })
    }

    pub fn solve_config(&self, params: SewingParams) -> SolveConfig {
        let mut c = SolveConfig::new(params, self.chi);
        c.picard_tol = self.picard_tol;
        c.l_const = self.l_const;
        c.max_step = self.max_step;
        c.policy = self.policy;
        c
    }

    /// The driving path: the configured file, or fBm sample 0 of the seed.
    pub fn driver_path(&self) -> Result<PathSamples> {
        match &self.path_file {
            Some(p) => PathSamples::from_csv(&std::fs::read_to_string(p)?),
            None => Ok(FbmSampler::new(self.hurst, &self.times())?.sample(self.dim, self.seed, 0)),
        }
    }
}

/// Four fixed initial data on the sphere |y|_α = ρ.
pub fn initial_directions(scale: &SpectralScale, alpha: f64, rho: f64) -> Vec<Vec<f64>> {
    let k = scale.modes();
    let mut dirs = Vec::new();
    let mut e1 = vec![0.0; k];
    e1[0] = 1.0;
    dirs.push(e1);
    let mut e2 = vec![0.0; k];
    e2[1.min(k - 1)] = 1.0;
    dirs.push(e2);
    let mut e3 = vec![0.0; k];
    for (m, v) in e3.iter_mut().enumerate().take(3) {
        *v = if m % 2 == 0 { 1.0 } else { -1.0 };
    }
    dirs.push(e3);
    dirs.push((1..=k).map(|m| 1.0 / (m * m) as f64).collect());
    dirs.into_iter()
        .map(|v| {
            let n = scale.norm(&v, alpha);
            v.iter().map(|x| rho * x / n).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub thresholds: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub exceedances: Vec<usize>,
    pub fit: Option<TailFit>,
    pub target: f64,
    /// Fewer than three usable bins.
    pub degenerate: bool,
}

const MIN_EXCEEDANCES: usize = 20;
const BOOTSTRAP: usize = 200;

fn exceed(values: &[f64], thresholds: &[f64]) -> Vec<usize> {
    thresholds.iter().map(|n| values.iter().filter(|v| **v > *n).count()).collect()
}

/// OLS of log(−log P̂) on log n over bins with ≥ 20 exceedances and 0 < P̂ < 1, n > 0.
pub fn fit_tail(values: &[f64], thresholds: &[f64]) -> Option<(f64, f64, usize)> {
    let m = values.len() as f64;
    let pts: Vec<(f64, f64)> = thresholds
        .iter()
        .zip(exceed(values, thresholds))
        .filter(|(n, c)| **n > 0.0 && *c >= MIN_EXCEEDANCES && (*c as f64) < m)
        .map(|(n, c)| (n.ln(), (-(c as f64 / m).ln()).ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    ols(&pts).map(|(s, i)| (s, i, pts.len()))
}

/// Empirical tail, stretched-exponential fit and a 200-resample bootstrap band.
pub fn tail_report(values: &[f64], thresholds: Vec<f64>, target: f64, seed: u64) -> TailReport {
    let m = values.len() as f64;
    let exceedances = exceed(values, &thresholds);
    let p_hat: Vec<f64> = exceedances.iter().map(|c| *c as f64 / m).collect();
    let se = p_hat.iter().map(|p| (p * (1.0 - p) / m).sqrt()).collect();
    let fit = fit_tail(values, &thresholds).map(|(slope, intercept, bins)| {
        let mut slopes: Vec<f64> = (0..BOOTSTRAP)
            .filter_map(|r| {
                let mut rng = rng_for(seed ^ 0xB005_7A2B, r as u64);
                let resample: Vec<f64> = (0..values.len()).map(|_| values[rng.random_range(0..values.len())]).collect();
                fit_tail(&resample, &thresholds).map(|f| f.0)
            })
            .collect();
        slopes.sort_by(|a, b| a.total_cmp(b));
        let q = |f: f64| slopes.get(((slopes.len() as f64 - 1.0) * f).round() as usize).copied().unwrap_or(f64::NAN);
        TailFit { slope, intercept, ci_lo: q(0.025), ci_hi: q(0.975), bins }
    });
    TailReport { thresholds, p_hat, se, exceedances, degenerate: fit.is_none(), fit, target }
}

impl TailReport {
    /// CSV rows `n,p_hat,se`.
    pub fn tail_csv(&self) -> String {
        let mut s = String::from("n,p_hat,se\n");
        for ((n, p), e) in self.thresholds.iter().zip(&self.p_hat).zip(&self.se) {
            let _ = writeln!(s, "{n},{p},{e}");
        }
        s
    }

    /// CSV row `slope,intercept,ci_lo,ci_hi,target` (NaN when degenerate).
    pub fn fit_csv(&self) -> String {
        let mut s = String::from("slope,intercept,ci_lo,ci_hi,target\n");
        match &self.fit {
            Some(f) => {
                let _ = writeln!(s, "{},{},{},{},{}", f.slope, f.intercept, f.ci_lo, f.ci_hi, self.target);
            }
            None => {
                let _ = writeln!(s, "NaN,NaN,NaN,NaN,{}", self.target);
            }
        }
        s
    }

    /// log(−log P̂) against log n with the fitted line.
    pub fn svg(&self, title: &str) -> String {
        let pts: Vec<(f64, f64)> = self
            .thresholds
            .iter()
            .zip(&self.p_hat)
            .filter(|(n, p)| **n > 0.0 && **p > 0.0 && **p < 1.0)
            .map(|(n, p)| (n.ln(), (-p.ln()).ln()))
            .collect();
        let mut lines = vec![("#1f77b4", pts.clone())];
        if let (Some(f), Some(first), Some(last)) = (&self.fit, pts.first(), pts.last()) {
            lines.push(("#d62728", vec![(first.0, f.intercept + f.slope * first.0), (last.0, f.intercept + f.slope * last.0)]));
        }
        svg_plot(title, "log n", "log(-log P)", &lines)
    }
}

/// A minimal polyline plot.
pub fn svg_plot(title: &str, xlabel: &str, ylabel: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - pad, w - pad, h - pad);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, h - pad);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel} [{x0:.3}, {x1:.3}]</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(s, r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">{ylabel} [{y0:.3}, {y1:.3}]</text>"#, h / 2.0, h / 2.0);
    for (color, pts) in series {
        let path: Vec<String> = pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTailRun {
    pub counts: Vec<usize>,
    /// Samples with at least one forced single-cell step.
    pub blocked_samples: usize,
    pub report: TailReport,
}

/// Ñ([0,T], χ, X) for M fBm lifts and its stretched-exponential tail.
pub fn run_mc_greedy_tail(config: &ExperimentConfig, exec: Execution) -> Result<GreedyTailRun> {
    let prm = config.validate(false)?;
    let sampler = FbmSampler::new(config.hurst, &config.times())?;
    let gp = config.gamma - config.p;
    let results: Vec<Result<(usize, bool)>> = exec.map(config.samples, |i| {
        let path = sampler.sample(config.dim, config.seed, i as u64);
        let x = lift_path(&path, prm.depth)?;
        let c = rough_path_controls(&x, config.gamma, config.p, Execution::Sequential)?;
        let g = greedy_points_with(&c.total, gp, config.chi, 0, config.grid, config.policy)?;
        Ok((g.count(), !g.blocked.is_empty()))
    });
    let mut counts = Vec::with_capacity(results.len());
    let mut blocked_samples = 0;
    for r in results {
        let (n, b) = r?;
        counts.push(n);
        blocked_samples += b as usize;
    }
    let max = counts.iter().copied().max().unwrap_or(1);
    let thresholds: Vec<f64> = (1..=max).map(|n| n as f64).collect();
    let values: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
    let report = tail_report(&values, thresholds, 2.0 * (config.gamma_prime() - config.p), config.seed);
    Ok(GreedyTailRun { counts, blocked_samples, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub q: f64,
    pub moment: f64,
    pub jackknife_se: f64,
}

/// Mean of v^q with its delete-one jackknife standard error.
pub fn jackknife_moment(values: &[f64], q: f64) -> MomentRow {
    let n = values.len() as f64;
    let powered: Vec<f64> = values.iter().map(|v| v.powf(q)).collect();
    let total: f64 = powered.iter().sum();
    let mean = total / n;
    let loo: Vec<f64> = powered.iter().map(|x| (total - x) / (n - 1.0)).collect();
    let loo_mean = loo.iter().sum::<f64>() / n;
    let var = (n - 1.0) / n * loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>();
    MomentRow { q, moment: mean, jackknife_se: var.sqrt() }
}

pub fn moments_csv(rows: &[MomentRow]) -> String {
    let mut s = String::from("q,moment,jackknife_se\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.q, r.moment, r.jackknife_se);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRun {
    /// max over the four initial data of sup_τ |φ_τ|_α, per sample (failed samples dropped).
    pub sup_norms: Vec<f64>,
    pub n_greedy: Vec<usize>,
    pub iterations: Vec<usize>,
    pub failures: usize,
    pub moments: Vec<MomentRow>,
    /// Moments of the first half of the samples.
    pub half_moments: Vec<MomentRow>,
    pub report: TailReport,
}

/// Solves the equation for M driving samples from four data on |y|_α = ρ.
pub fn run_mc_solution_moments(config: &ExperimentConfig, exec: Execution) -> Result<MomentRun> {
    let prm = config.validate(true)?;
    let sampler = FbmSampler::new(config.hurst, &config.times())?;
    let rpde = config.rpde()?;
    let scfg = config.solve_config(prm);
    scfg.validate()?;
    let dirs = initial_directions(rpde.scale(), config.alpha, config.rho);
    let results: Vec<Result<(f64, usize, usize)>> = exec.map(config.samples, |i| {
        let path = sampler.sample(config.dim, config.seed, i as u64);
        let x = Arc::new(lift_path(&path, prm.depth)?);
        let c = rough_path_controls(&x, config.gamma, config.p, Execution::Sequential)?;
        let mut sup: f64 = 0.0;
        let mut n_greedy = 0;
        let mut iters = 0;
        for y in &dirs {
            let sol = solve_with_controls(&rpde, y, x.clone(), &c, 0, config.grid, &scfg, Execution::Sequential)?;
            sup = sup.max(sol.sup_norm(config.alpha));
            n_greedy = sol.greedy.count();
            iters += sol.total_iterations();
        }
        Ok((sup, n_greedy, iters))
    });
    let mut sup_norms = Vec::new();
    let mut n_greedy = Vec::new();
    let mut iterations = Vec::new();
    let mut failures = 0;
    for r in results {
        match r {
            Ok((s, n, it)) => {
                sup_norms.push(s);
                n_greedy.push(n);
                iterations.push(it);
            }
            Err(_) => failures += 1,
        }
    }
    if failures * 100 > config.samples {
        return Err(RoughError::Numerical(failures as f64 / config.samples as f64));
    }
    let moments: Vec<MomentRow> = config.moments.iter().map(|q| jackknife_moment(&sup_norms, *q)).collect();
    let half = &sup_norms[..sup_norms.len() / 2];
    let half_moments = config.moments.iter().map(|q| jackknife_moment(half, *q)).collect();
    let mut sorted = sup_norms.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let (lo, hi) = (sorted.first().copied().unwrap_or(1.0), sorted.last().copied().unwrap_or(1.0));
    let thresholds: Vec<f64> = (0..40).map(|j| lo + (hi - lo) * j as f64 / 40.0).collect();
    let report = tail_report(&sup_norms, thresholds, 2.0 * (config.gamma_prime() - config.p), config.seed);
    Ok(MomentRun { sup_norms, n_greedy, iterations, failures, moments, half_moments, report })
}

fn write(dir: &Path, name: &str, header: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let text = if name.ends_with(".csv") { format!("{header}{body}") } else { body.to_string() };
    std::fs::write(&path, text)?;
    written.push(path);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Lift,
    Control,
    Integrate,
    Solve,
    Translate,
    GreedyTail,
    Moments,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Lift => "lift",
            Stage::Control => "control",
            Stage::Integrate => "integrate",
            Stage::Solve => "solve",
            Stage::Translate => "translate",
            Stage::GreedyTail => "greedy-tail",
            Stage::Moments => "moments",
        }
    }
}

fn signature_csv(x: &RoughPathGrid) -> Result<String> {
    let mut s = String::from("t,level,index,value\n");
    x.scan_from(0, x.len(), |k, el| {
        for lvl in 1..=x.depth() {
            for (i, v) in el.level(lvl).iter().enumerate() {
                let _ = writeln!(s, "{},{lvl},{i},{v}", x.times()[k]);
            }
        }
    })?;
    Ok(s)
}

fn driver(config: &ExperimentConfig, depth: usize) -> Result<(PathSamples, Arc<RoughPathGrid>)> {
    let path = config.driver_path()?;
    let x = Arc::new(lift_path(&path, depth)?);
    Ok((path, x))
}

fn controls_csv(c: &RoughPathControls) -> String {
    c.total.to_csv()
}

/// Runs one stage and writes its CSV (and SVG) files into `config.out`.
pub fn run_single(config: &ExperimentConfig, stage: Stage, exec: Execution) -> Result<Vec<PathBuf>> {
    let header = config.header()?;
    let dir = config.out.clone();
    let mut written = Vec::new();
    match stage {
        Stage::Lift => {
            let prm = config.validate(false)?;
            let (path, x) = driver(config, prm.depth)?;
            write(&dir, "path.csv", &header, &path.to_csv(), &mut written)?;
            write(&dir, "signature.csv", &header, &signature_csv(&x)?, &mut written)?;
        }
        Stage::Control => {
            let prm = config.validate(false)?;
            let (_, x) = driver(config, prm.depth)?;
            let c = rough_path_controls(&x, config.gamma, config.p, exec)?;
            write(&dir, "control.csv", &header, &controls_csv(&c), &mut written)?;
            for j in 1..=prm.depth {
                write(&dir, &format!("control_level{j}.csv"), &header, &c.level(j).to_csv(), &mut written)?;
            }
            let g = greedy_points_with(&c.total, config.gamma - config.p, config.chi, 0, x.len(), config.policy)?;
            write(&dir, "greedy.csv", &header, &g.to_csv(), &mut written)?;
        }
        Stage::Integrate => {
            let prm = config.validate(false)?;
            let (_, x) = driver(config, prm.depth)?;
            let rpde = config.rpde()?;
            let y = &initial_directions(rpde.scale(), config.alpha, config.rho)[0];
            // the initial iterate is not controlled; N + 1 Picard steps make it so
            let mut tilde = initial_iterate(&rpde, y, x.clone(), prm.scale_params(), prm.depth, 0, x.len())?;
            for _ in 0..=prm.depth {
                tilde = picard_step(&rpde, &tilde, y)?;
            }
            let xi = crate::controlled::compose_linear_g(&rpde.g, &tilde)?;
            let rec = sewing_integral(&xi, &rpde.u, 0, x.len(), SewingOptions { tol: 1e-9, m_max: None })?;
            write(&dir, "sewing.csv", &header, &rec.to_csv(), &mut written)?;
            let el = crate::spectral::SpectralElement::new(rpde.scale().clone(), rec.final_value.clone())?;
            write(&dir, "integral.csv", &header, &el.to_csv(), &mut written)?;
        }
        Stage::Solve => {
            let prm = config.validate(false)?;
            let (_, x) = driver(config, prm.depth)?;
            let rpde = config.rpde()?;
            let scfg = config.solve_config(prm);
            let c = rough_path_controls(&x, config.gamma, config.p, exec)?;
            let y = &initial_directions(rpde.scale(), config.alpha, config.rho)[0];
            let sol = solve_with_controls(&rpde, y, x.clone(), &c, 0, x.len(), &scfg, exec)?;
            write(&dir, "solution.csv", &header, &sol.to_csv(), &mut written)?;
            let bound = apriori_from(sol.greedy.count(), config.l_const);
            let row = (0usize, sol.sup_norm(config.alpha), bound, sol.total_iterations());
            write(&dir, "summary.csv", &header, &summary_csv(&[row]), &mut written)?;
        }
        Stage::Translate => {
            let prm = config.validate(false)?;
            let (_, x) = driver(config, prm.depth)?;
            let h = CmElement::new(config.hurst, vec![config.h_knot], vec![vec![config.h_coef]; x.dim()])?;
            let tp = translate_cm(x.clone(), &h, config.gamma, config.gamma_prime())?;
            write(&dir, "terms.csv", &header, &tp.terms_csv(0, x.len())?, &mut written)?;
            write(&dir, "translated.csv", &header, &signature_csv(&tp.grid)?, &mut written)?;
            let checks = translated_control_check(&tp, config.gamma, config.p, config.gamma_prime(), 0, x.len(), exec)?;
            let mut s = String::from("level,lhs,rhs,constant\n");
            for c in checks {
                let _ = writeln!(s, "{},{},{},{}", c.level, c.lhs, c.rhs, c.constant());
            }
            let hn = hnorm_control_check(&h, x.times(), config.gamma_prime(), config.p, prm.depth, exec)?;
            let _ = writeln!(s, "hnorm,{},{},{}", hn.lhs, hn.rhs, hn.ratio());
            write(&dir, "translation_checks.csv", &header, &s, &mut written)?;
        }
        Stage::GreedyTail => {
            let run = run_mc_greedy_tail(config, exec)?;
            write(&dir, "tail.csv", &header, &run.report.tail_csv(), &mut written)?;
            write(&dir, "fit.csv", &header, &run.report.fit_csv(), &mut written)?;
            let mut counts = String::from("sample,N_greedy\n");
            for (i, n) in run.counts.iter().enumerate() {
                let _ = writeln!(counts, "{i},{n}");
            }
            write(&dir, "greedy_counts.csv", &header, &counts, &mut written)?;
            write(&dir, "tail.svg", "", &run.report.svg("greedy count tail"), &mut written)?;
        }
        Stage::Moments => {
            let run = run_mc_solution_moments(config, exec)?;
            write(&dir, "moments.csv", &header, &moments_csv(&run.moments), &mut written)?;
            write(&dir, "moments_half.csv", &header, &moments_csv(&run.half_moments), &mut written)?;
            write(&dir, "tail.csv", &header, &run.report.tail_csv(), &mut written)?;
            write(&dir, "fit.csv", &header, &run.report.fit_csv(), &mut written)?;
            let rows: Vec<_> = run
                .sup_norms
                .iter()
                .zip(&run.n_greedy)
                .zip(&run.iterations)
                .enumerate()
                .map(|(i, ((s, n), it))| (i, *s, apriori_from(*n, config.l_const), *it))
                .collect();
            write(&dir, "summary.csv", &header, &summary_csv(&rows), &mut written)?;
            write(&dir, "tail.svg", "", &run.report.svg("solution sup-norm tail"), &mut written)?;
        }
    }
    Ok(written)
}

