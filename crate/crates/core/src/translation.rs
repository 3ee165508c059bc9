//! Translation T_h(X) of a grid rough path by a Cameron–Martin direction h.
//!
//! Trees are ladders: [A[B]]_{s,t} = ∫_s^t B_{s,u} ⊗ dA_u and
//! [A[B[C]]]_{s,t} = ∫_s^t [B[C]]_{s,u} ⊗ dA_u, so the slots of [A[B[C]]] are (C, B, A).
//! Pure-X trees come from X, pure-h trees from the lift of h, mixed trees are
//! sewn from the germs
//!   [A[B]]:    B_{a,u} ⊗ A_{u,v} + ½ B_{u,v} ⊗ A_{u,v},
//!   [A[B[C]]]: [B[C]]_{a,u} ⊗ A_{u,v} + C_{a,u} ⊗ [A[B]]_{u,v} + ⅙ C_{u,v} ⊗ B_{u,v} ⊗ A_{u,v}.
//! On one linear cell each germ is the exact iterated integral, so the
//! full-grid sums are exact for piecewise-linear data.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::controls::{control_table, rough_path_controls, ControlTable, PairTable};
use crate::error::{Result, RoughError};
use crate::exec::Execution;
use crate::gaussian::CmElement;
use crate::sewing::{young_sewing, RatioReport, SewingOptions};
use crate::tensor::{lift_points, outer, RoughPathGrid, TensorElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Color {
    X,
    H,
}

impl Color {
    fn letter(self) -> char {
        match self {
            Color::X => 'X',
            Color::H => 'h',
        }
    }
}

/// Level-2 trees in display order, as (root A, leaf B).
pub const LEVEL2_TREES: [(Color, Color); 4] = [(Color::X, Color::X), (Color::H, Color::X), (Color::X, Color::H), (Color::H, Color::H)];

/// Level-3 trees in display order, as (root A, middle B, leaf C).
pub const LEVEL3_TREES: [(Color, Color, Color); 8] = [
    (Color::X, Color::X, Color::X),
    (Color::X, Color::X, Color::H),
    (Color::X, Color::H, Color::X),
    (Color::H, Color::X, Color::X),
    (Color::X, Color::H, Color::H),
    (Color::H, Color::X, Color::H),
    (Color::H, Color::H, Color::X),
    (Color::H, Color::H, Color::H),
];

pub fn tree2_name(t: (Color, Color)) -> String {
    format!("{}[{}]", t.0.letter(), t.1.letter())
}

pub fn tree3_name(t: (Color, Color, Color)) -> String {
    format!("{}[{}[{}]]", t.0.letter(), t.1.letter(), t.2.letter())
}

#[derive(Debug, Clone)]
pub struct TranslatedPath {
    pub grid: RoughPathGrid,
    x: Arc<RoughPathGrid>,
    h_lift: RoughPathGrid,
    /// Level-1 prefix values X_{0,t_k} and h_{0,t_k}.
    xpath: Vec<Vec<f64>>,
    hpath: Vec<Vec<f64>>,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn axpy(acc: &mut [f64], c: f64, x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += c * v;
    }
}

/// Checks γ + γ′ > 1 and, at depth 3, 2γ + γ′ > 1.
pub fn young_condition(gamma: f64, gamma_prime: f64, depth: usize) -> Result<()> {
    if !(gamma + gamma_prime > 1.0) {
        return Err(RoughError::Parameter(format!("gamma + gamma' = {} <= 1", gamma + gamma_prime)));
    }
    if depth >= 3 && !(2.0 * gamma + gamma_prime > 1.0) {
        return Err(RoughError::Parameter(format!("2 gamma + gamma' = {} <= 1", 2.0 * gamma + gamma_prime)));
    }
    Ok(())
}

/// T_h(X) for h sampled on the grid of X (rows of length d, h_0 arbitrary).
pub fn translate(x: Arc<RoughPathGrid>, h: &[Vec<f64>], gamma: f64, gamma_prime: f64) -> Result<TranslatedPath> {
    young_condition(gamma, gamma_prime, x.depth())?;
    if h.len() != x.times().len() || h.iter().any(|r| r.len() != x.dim()) {
        return Err(RoughError::Dimension("h must be sampled on the grid of X with d components".into()));
    }
    let depth = x.depth();
    let h_lift = lift_points(x.times(), h, depth)?;
    let xpath = x.level1_path();
    let hpath: Vec<Vec<f64>> = h.iter().map(|r| sub(r, &h[0])).collect();
    let mut cells = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let xc = &x.cells()[k];
        let hc = &h_lift.cells()[k];
        let dx = xc.level(1);
        let dh = hc.level(1);
        let inc = |c: Color| if c == Color::X { dx } else { dh };
        let mut levels = vec![vec![1.0], dx.iter().zip(dh).map(|(a, b)| a + b).collect::<Vec<f64>>()];
        if depth >= 2 {
            let mut l2 = xc.level(2).to_vec();
            axpy(&mut l2, 1.0, hc.level(2));
            for &(a, b) in &LEVEL2_TREES[1..3] {
                axpy(&mut l2, 0.5, &outer(inc(b), inc(a)));
            }
            levels.push(l2);
        }
        if depth >= 3 {
            let mut l3 = xc.level(3).to_vec();
            axpy(&mut l3, 1.0, hc.level(3));
            for &(a, b, c) in &LEVEL3_TREES[1..7] {
                axpy(&mut l3, 1.0 / 6.0, &outer(&outer(inc(c), inc(b)), inc(a)));
            }
            levels.push(l3);
        }
        cells.push(TensorElement::from_levels(x.dim(), &levels)?);
    }
    let grid = RoughPathGrid::new(x.times().to_vec(), cells)?;
    Ok(TranslatedPath { grid, x, h_lift, xpath, hpath })
}

/// Samples `h` on the grid of `x` and translates.
pub fn translate_cm(x: Arc<RoughPathGrid>, h: &CmElement, gamma: f64, gamma_prime: f64) -> Result<TranslatedPath> {
    let vals = h.sample_on(x.times()).values;
    translate(x, &vals, gamma, gamma_prime)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeTerm {
    pub name: String,
    pub value: Vec<f64>,
}

impl TranslatedPath {
    pub fn base(&self) -> &Arc<RoughPathGrid> {
        &self.x
    }

    pub fn h_lift(&self) -> &RoughPathGrid {
        &self.h_lift
    }

    fn inc(&self, c: Color, u: usize, v: usize) -> Vec<f64> {
        match c {
            Color::X => sub(&self.xpath[v], &self.xpath[u]),
            Color::H => sub(&self.hpath[v], &self.hpath[u]),
        }
    }

    /// Level-2 tree [A[B]] over grid [u, v], pure trees from the lifts.
    fn tree2(&self, t: (Color, Color), u: usize, v: usize) -> Result<Vec<f64>> {
        match t {
            (Color::X, Color::X) => Ok(self.x.query(u, v)?.level(2).to_vec()),
            (Color::H, Color::H) => Ok(self.h_lift.query(u, v)?.level(2).to_vec()),
            _ => self.mixed2(t, u, v),
        }
    }

    fn mixed2(&self, (a, b): (Color, Color), s: usize, t: usize) -> Result<Vec<f64>> {
        if s == t {
            return Ok(vec![0.0; self.x.dim().pow(2)]);
        }
        let rec = young_sewing(
            s,
            t,
            |u, v| {
                let bu = self.inc(b, s, u);
                let buv = self.inc(b, u, v);
                let auv = self.inc(a, u, v);
                let mut g = outer(&bu, &auv);
                axpy(&mut g, 0.5, &outer(&buv, &auv));
                g
            },
            SewingOptions { tol: 0.0, m_max: None },
        )?;
        Ok(rec.final_value)
    }

    fn tree3(&self, t: (Color, Color, Color), s: usize, e: usize) -> Result<Vec<f64>> {
        match t {
            (Color::X, Color::X, Color::X) => return Ok(self.x.query(s, e)?.level(3).to_vec()),
            (Color::H, Color::H, Color::H) => return Ok(self.h_lift.query(s, e)?.level(3).to_vec()),
            _ => {}
        }
        if s == e {
            return Ok(vec![0.0; self.x.dim().pow(3)]);
        }
        let (a, b, c) = t;
        // [B[C]]_{s,u} for every u in [s, e].
        let mut inner = Vec::with_capacity(e - s + 1);
        for u in s..=e {
            inner.push(self.tree2((b, c), s, u)?);
        }
        let mut err = None;
        let rec = young_sewing(
            s,
            e,
            |u, v| {
                let auv = self.inc(a, u, v);
                let mut g = outer(&inner[u - s], &auv);
                match self.tree2((a, b), u, v) {
                    Ok(ab) => axpy(&mut g, 1.0, &outer(&self.inc(c, s, u), &ab)),
                    Err(e2) => err = Some(e2),
                }
                axpy(&mut g, 1.0 / 6.0, &outer(&outer(&self.inc(c, u, v), &self.inc(b, u, v)), &auv));
                g
            },
            SewingOptions { tol: 0.0, m_max: None },
        );
        if let Some(e2) = err {
            return Err(e2);
        }
        Ok(rec?.final_value)
    }

    /// Every tree term over grid [s, t] in display order (level 2, then level 3).
    pub fn tree_terms(&self, s: usize, t: usize) -> Result<Vec<TreeTerm>> {
        if s > t || t > self.x.len() {
            return Err(RoughError::Interval { start: s, end: t });
        }
        let mut out = Vec::new();
        if self.x.depth() >= 2 {
            for tr in LEVEL2_TREES {
                out.push(TreeTerm { name: tree2_name(tr), value: self.tree2(tr, s, t)? });
            }
        }
        if self.x.depth() >= 3 {
            for tr in LEVEL3_TREES {
                out.push(TreeTerm { name: tree3_name(tr), value: self.tree3(tr, s, t)? });
            }
        }
        Ok(out)
    }

    /// Max over levels of |Σ trees − Π^k(T_h(X))_{s,t}|.
    pub fn tree_sum_residual(&self, s: usize, t: usize) -> Result<f64> {
        let terms = self.tree_terms(s, t)?;
        let direct = self.grid.query(s, t)?;
        let mut worst: f64 = 0.0;
        let mut level = |k: usize, range: std::ops::Range<usize>| {
            let mut acc = vec![0.0; self.x.dim().pow(k as u32)];
            for term in &terms[range] {
                axpy(&mut acc, 1.0, &term.value);
            }
            for (a, b) in acc.iter().zip(direct.level(k)) {
                worst = worst.max((a - b).abs());
            }
        };
        if self.x.depth() >= 2 {
            level(2, 0..4);
        }
        if self.x.depth() >= 3 {
            level(3, 4..12);
        }
        Ok(worst)
    }

    /// CSV rows `term,s,t,frobenius_norm`.
    pub fn terms_csv(&self, s: usize, t: usize) -> Result<String> {
        let (ts, tt) = (self.x.times()[s], self.x.times()[t]);
        let mut out = String::from("term,s,t,frobenius_norm\n");
        for term in self.tree_terms(s, t)? {
            let norm = term.value.iter().map(|v| v * v).sum::<f64>().sqrt();
            let _ = writeln!(out, "{},{ts},{tt},{norm}", term.name);
        }
        Ok(out)
    }

    /// Control of the mixed germ [h[X]] at exponents ((γ + γ′)/2, p).
    pub fn mixed_control(&self, gamma: f64, gamma_prime: f64, p: f64, exec: Execution) -> Result<ControlTable> {
        let n = self.x.times().len();
        let d = self.x.dim();
        let germ = PairTable::from_rows(n, exec, |s, row| {
            let mut acc = vec![0.0; d * d];
            for k in s..n - 1 {
                let xs = self.inc(Color::X, s, k);
                let dx = self.inc(Color::X, k, k + 1);
                let dh = self.inc(Color::H, k, k + 1);
                axpy(&mut acc, 1.0, &outer(&xs, &dh));
                axpy(&mut acc, 0.5, &outer(&dx, &dh));
                row[k + 1] = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
            }
        });
        let g = 0.5 * (gamma + gamma_prime);
        control_table(&germ, 1.0 / (2.0 * (g - p)), p / (g - p), self.x.times(), exec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelConstant {
    /// 0 for the combined inequality, otherwise the level.
    pub level: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl LevelConstant {
    pub fn constant(&self) -> f64 {
        RatioReport { lhs: self.lhs, rhs: self.rhs }.ratio()
    }
}

/// Empirical constants of W_{Π^j(T_h X),γ,p} ≲ W_{Π^j X,γ,p} + W_{Π^j h,γ′,p}^{(γ′−p)/(γ−p)} per level,
/// and of W_{T_h X}^{γ−p} ≤ C(W_X^{γ−p} + W_h^{γ′−p}) (level 0), on grid [s, t].
pub fn translated_control_check(tp: &TranslatedPath, gamma: f64, p: f64, gamma_prime: f64, s: usize, t: usize, exec: Execution) -> Result<Vec<LevelConstant>> {
    let ct = rough_path_controls(&tp.grid, gamma, p, exec)?;
    let cx = rough_path_controls(&tp.x, gamma, p, exec)?;
    let ch = rough_path_controls(&tp.h_lift, gamma_prime, p, exec)?;
    let e = (gamma_prime - p) / (gamma - p);
    let mut out = vec![LevelConstant {
        level: 0,
        lhs: ct.total.powered(s, t, gamma - p),
        rhs: cx.total.powered(s, t, gamma - p) + ch.total.powered(s, t, gamma_prime - p),
    }];
    for j in 1..=tp.grid.depth() {
        out.push(LevelConstant { level: j, lhs: ct.level(j).get(s, t), rhs: cx.level(j).get(s, t) + ch.level(j).powered(s, t, e) });
    }
    Ok(out)
}

/// W_{h,γ′,p}(0,T) of the lift of h on `times` against |h|_H^{1/(γ′−p)}.
pub fn hnorm_control_check(h: &CmElement, times: &[f64], gamma_prime: f64, p: f64, depth: usize, exec: Execution) -> Result<RatioReport> {
    let lift = lift_points(times, &h.sample_on(times).values, depth)?;
    let c = rough_path_controls(&lift, gamma_prime, p, exec)?;
    let lhs = c.total.get(0, lift.len());
    let rhs = h.cm_norm()?.powf(1.0 / (gamma_prime - p));
    Ok(RatioReport { lhs, rhs })
}
