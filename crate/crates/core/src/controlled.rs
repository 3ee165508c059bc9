//! Controlled rough paths in the two spaces D (base regularity α−σ) and D̃ (base α).
//!
//! Level ξ^j is stored on every grid point of its window as a tensor-indexed
//! field: d^{rank} blocks of K spectral coefficients, block index in row-major
//! order. In D the rank of ξ^j is j+1, in D̃ it is j.
//!
//! The contraction ξ^j ∘ Π^{j−i}(X) pairs the leading j−i slots of ξ^j with the
//! tensor Π^{j−i}(X) and leaves the trailing slots, so the result has the rank of ξ^i.
//! Tensor-indexed values are measured with the Hilbert–Schmidt norm
//! sqrt(Σ_idx |x_idx|_β²), which dominates the operator norm and makes
//! |ξ ∘ Π|_β ≤ |ξ|_β |Π| with the Euclidean norm on Π.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::controls::{control_table, ControlTable, PairTable, RoughPathControls};
use crate::error::{Result, RoughError};
use crate::exec::Execution;
use crate::spectral::{field_norm_weighted, SpectralElement, SpectralScale};
use crate::tensor::{RoughPathGrid, TensorElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// ξ^j: L((R^d)^{⊗ j+1}, E_{α−jγ−σ}).
    D,
    /// ξ̃^j: L((R^d)^{⊗ j}, E_{α−jγ}).
    Tilde,
}

impl Variant {
    pub fn rank(self, j: usize) -> usize {
        match self {
            Variant::D => j + 1,
            Variant::Tilde => j,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub p: f64,
}

impl ScaleParams {
    /// α−σ for D, α for D̃; every norm index is this minus a multiple of γ.
    pub fn base(&self, v: Variant) -> f64 {
        match v {
            Variant::D => self.alpha - self.sigma,
            Variant::Tilde => self.alpha,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControlledPath {
    variant: Variant,
    params: ScaleParams,
    depth: usize,
    scale: Arc<SpectralScale>,
    x: Arc<RoughPathGrid>,
    start: usize,
    cells: usize,
    levels: Vec<Vec<f64>>,
}

fn pow_usize(d: usize, r: usize) -> usize {
    d.pow(r as u32)
}

impl ControlledPath {
    /// Zero path on the grid window [start, start + cells] of `x`, with `depth` levels.
    pub fn zeros(
        variant: Variant,
        params: ScaleParams,
        depth: usize,
        scale: Arc<SpectralScale>,
        x: Arc<RoughPathGrid>,
        start: usize,
        cells: usize,
    ) -> Result<Self> {
        if depth == 0 || depth > x.depth() {
            return Err(RoughError::Dimension(format!("{depth} levels need a driver of depth >= {depth}")));
        }
        if cells == 0 || start + cells > x.len() {
            return Err(RoughError::Interval { start, end: start + cells });
        }
        let d = x.dim();
        let k = scale.modes();
        let levels = (0..depth).map(|j| vec![0.0; (cells + 1) * pow_usize(d, variant.rank(j)) * k]).collect();
        Ok(ControlledPath { variant, params, depth, scale, x, start, cells, levels })
    }

    /// Builds a path from a closure writing level j at local grid point τ.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn<F>(
        variant: Variant,
        params: ScaleParams,
        depth: usize,
        scale: Arc<SpectralScale>,
        x: Arc<RoughPathGrid>,
        start: usize,
        cells: usize,
        mut f: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, usize, &mut [f64]),
    {
        let mut p = Self::zeros(variant, params, depth, scale, x, start, cells)?;
        for j in 0..depth {
            for tau in 0..=cells {
                f(j, tau, p.value_mut(j, tau));
            }
        }
        Ok(p)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> ScaleParams {
        self.params
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn modes(&self) -> usize {
        self.scale.modes()
    }

    pub fn scale(&self) -> &Arc<SpectralScale> {
        &self.scale
    }

    pub fn driver(&self) -> &Arc<RoughPathGrid> {
        &self.x
    }

    /// First global grid index of the window.
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn time(&self, tau: usize) -> f64 {
        self.x.times()[self.start + tau]
    }

    pub fn times(&self) -> &[f64] {
        &self.x.times()[self.start..=self.start + self.cells]
    }

    pub fn rank(&self, j: usize) -> usize {
        self.variant.rank(j)
    }

    fn block(&self, j: usize) -> usize {
        pow_usize(self.dim(), self.rank(j)) * self.modes()
    }

    /// Norm index of level j: base − jγ.
    pub fn level_index(&self, j: usize) -> f64 {
        self.params.base(self.variant) - j as f64 * self.params.gamma
    }

    pub fn value(&self, j: usize, tau: usize) -> &[f64] {
        let b = self.block(j);
        &self.levels[j][tau * b..(tau + 1) * b]
    }

    pub fn value_mut(&mut self, j: usize, tau: usize) -> &mut [f64] {
        let b = self.block(j);
        &mut self.levels[j][tau * b..(tau + 1) * b]
    }

    pub fn level_data(&self, j: usize) -> &[f64] {
        &self.levels[j]
    }

    /// Level 0 at τ as a spectral element (meaningful for D̃, where it is scalar-slot).
    pub fn element(&self, tau: usize) -> SpectralElement {
        SpectralElement::new(self.scale.clone(), self.value(0, tau)[..self.modes()].to_vec()).expect("block size")
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.variant == other.variant
            && self.depth == other.depth
            && self.start == other.start
            && self.cells == other.cells
            && self.scale == other.scale
            && Arc::ptr_eq(&self.x, &other.x)
    }

    /// Linear combination a·self + b·other on the same window.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(RoughError::Dimension("controlled paths on different windows".into()));
        }
        let mut out = self.clone();
        for (lo, li) in out.levels.iter_mut().zip(&other.levels) {
            for (x, y) in lo.iter_mut().zip(li) {
                *x = a * *x + b * y;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.levels.iter_mut().flatten().for_each(|x| *x *= c);
        out
    }

    fn check_pair(&self, i: usize, l: usize, u: usize, v: usize) -> Result<()> {
        if i >= self.depth || l <= i || l > self.depth {
            return Err(RoughError::Index(format!("remainder ({i}, {l}) with N = {}", self.depth)));
        }
        if u > v || v > self.cells {
            return Err(RoughError::Interval { start: u, end: v });
        }
        Ok(())
    }

    /// Adds sign · ξ^j_u ∘ Π^{j−i}(X) to `out` (a rank-of-ξ^i field).
    fn contract_into(&self, i: usize, j: usize, u: usize, xuv: &TensorElement, sign: f64, out: &mut [f64]) {
        let pi = xuv.level(j - i);
        let src = self.value(j, u);
        let b = out.len();
        for (lead, &c) in pi.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let blk = &src[lead * b..(lead + 1) * b];
            for (o, s) in out.iter_mut().zip(blk) {
                *o += sign * c * s;
            }
        }
    }

    /// R^{i,l}_{u,v} = δξ^i_{u,v} − Σ_{i<j<l} ξ^j_u ∘ Π^{j−i}(X)_{u,v} (local indices).
    pub fn remainder(&self, i: usize, l: usize, u: usize, v: usize) -> Result<Vec<f64>> {
        self.check_pair(i, l, u, v)?;
        let xuv = self.x.query(self.start + u, self.start + v)?;
        Ok(self.remainder_with(i, l, u, v, &xuv))
    }

    /// Remainder with a precomputed X_{u,v}.
    pub fn remainder_with(&self, i: usize, l: usize, u: usize, v: usize, xuv: &TensorElement) -> Vec<f64> {
        let mut r: Vec<f64> = self.value(i, v).iter().zip(self.value(i, u)).map(|(a, b)| a - b).collect();
        for j in i + 1..l {
            self.contract_into(i, j, u, xuv, -1.0, &mut r);
        }
        r
    }

    /// Tables |R^{i,l}_{u,v}|_β over local pairs a ≤ u ≤ v ≤ b, one per requested (i, l, β).
    pub fn remainder_norm_tables(&self, a: usize, b: usize, wanted: &[(usize, usize, f64)], exec: Execution) -> Result<Vec<PairTable>> {
        for &(i, l, _) in wanted {
            self.check_pair(i, l, a, b)?;
        }
        let n = b - a + 1;
        let weights: Vec<Vec<f64>> = wanted.iter().map(|s| self.scale.weights(s.2)).collect();
        let max_l: Vec<usize> = (0..self.depth).map(|i| wanted.iter().filter(|s| s.0 == i).map(|s| s.1).max().unwrap_or(0)).collect();
        let rows: Vec<std::result::Result<Vec<Vec<f64>>, (usize, usize, usize)>> = exec.map(n, |ru| {
            let u = a + ru;
            let mut out = vec![vec![0.0; n]; wanted.len()];
            let mut bad = None;
            self.x
                .scan_from(self.start + u, self.start + b, |gv, xuv| {
                    let v = gv - self.start;
                    if v == u || bad.is_some() {
                        return;
                    }
                    for (i, &ml) in max_l.iter().enumerate() {
                        if ml == 0 {
                            continue;
                        }
                        let mut r: Vec<f64> = self.value(i, v).iter().zip(self.value(i, u)).map(|(x, y)| x - y).collect();
                        for l in i + 1..=ml {
                            if l > i + 1 {
                                self.contract_into(i, l - 1, u, xuv, -1.0, &mut r);
                            }
                            for (s, want) in wanted.iter().enumerate() {
                                if want.0 == i && want.1 == l {
                                    let val = field_norm_weighted(&r, &weights[s]);
                                    if !val.is_finite() {
                                        bad = Some((i, l, v));
                                    }
                                    out[s][v - a] = val;
                                }
                            }
                        }
                    }
                })
                .expect("window inside driver");
            match bad {
                Some(e) => Err(e),
                None => Ok(out),
            }
        });
        let mut tables = vec![PairTable::zeros(n); wanted.len()];
        for (ru, row) in rows.into_iter().enumerate() {
            let row = row.map_err(|(i, l, v)| RoughError::NonFinite { i, l, s: a + ru, t: v })?;
            for (s, vals) in row.into_iter().enumerate() {
                for (rv, val) in vals.into_iter().enumerate().skip(ru + 1) {
                    tables[s].set(ru, rv, val);
                }
            }
        }
        Ok(tables)
    }

    /// sup over τ ∈ [a,b] of |ξ^j_τ|_β.
    pub fn sup_norm(&self, j: usize, beta: f64, a: usize, b: usize) -> f64 {
        let w = self.scale.weights(beta);
        (a..=b).map(|t| field_norm_weighted(self.value(j, t), &w)).fold(0.0, f64::max)
    }

    fn local_times(&self, a: usize, b: usize) -> Vec<f64> {
        self.x.times()[self.start + a..=self.start + b].to_vec()
    }

    /// All remainder controls of the norm display over local [a,b].
    pub fn remainder_controls(&self, a: usize, b: usize, exec: Execution) -> Result<RemainderControls> {
        if a >= b || b > self.cells {
            return Err(RoughError::Interval { start: a, end: b });
        }
        let base = self.params.base(self.variant);
        let g = self.params.gamma;
        let gp = g - self.params.p;
        let r = self.params.p / gp;
        let mut wanted = Vec::new();
        let mut keys = Vec::new();
        for i in 0..self.depth {
            wanted.push((i, i + 1, base - (i + 1) as f64 * g));
            keys.push((NormKind::Consecutive, i, i + 1, 1.0));
            for l in i + 2..=self.depth {
                wanted.push((i, l, base - (l - 1) as f64 * g));
                keys.push((NormKind::Kind1, i, l, (l - i - 1) as f64));
                wanted.push((i, l, base - l as f64 * g));
                keys.push((NormKind::Kind2, i, l, (l - i) as f64));
            }
        }
        let germs = self.remainder_norm_tables(a, b, &wanted, exec)?;
        let times = self.local_times(a, b);
        let mut tables = BTreeMap::new();
        for (germ, &(kind, i, l, mult)) in germs.iter().zip(&keys) {
            let t = control_table(germ, 1.0 / (mult * gp), r, &times, exec).map_err(|e| match e {
                RoughError::Range { .. } | RoughError::Domain { .. } => RoughError::NonFinite { i, l, s: a, t: b },
                other => other,
            })?;
            tables.insert((kind, i, l), (t, mult * gp));
        }
        Ok(RemainderControls { depth: self.depth, tables })
    }

    /// The itemized norm over local [a, b].
    pub fn controlled_norm(&self, a: usize, b: usize, exec: Execution) -> Result<ControlledNorm> {
        let rc = self.remainder_controls(a, b, exec)?;
        let n = b - a;
        let mut items = Vec::new();
        for i in 0..self.depth {
            items.push(NormItem { kind: NormKind::Sup, i, l: i, value: self.sup_norm(i, self.level_index(i), a, b) });
        }
        for (&(kind, i, l), (t, e)) in &rc.tables {
            items.push(NormItem { kind, i, l, value: t.powered(0, n, *e) });
        }
        let total = items.iter().map(|it| it.value).sum();
        Ok(ControlledNorm { items, total })
    }

    /// ‖ξ‖ over the whole window.
    pub fn norm(&self, exec: Execution) -> Result<f64> {
        Ok(self.controlled_norm(0, self.cells, exec)?.total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NormKind {
    /// sup_τ |ξ^i_τ| in the level's own index.
    Sup,
    /// W_{R^{i,i+1}}^{γ−p}.
    Consecutive,
    /// W_{R^{i,l},1}^{(l−i−1)(γ−p)}, germ index base − (l−1)γ.
    Kind1,
    /// W_{R^{i,l},2}^{(l−i)(γ−p)}, germ index base − lγ.
    Kind2,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::Sup => "sup",
            NormKind::Consecutive => "consecutive",
            NormKind::Kind1 => "remainder1",
            NormKind::Kind2 => "remainder2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormItem {
    pub kind: NormKind,
    pub i: usize,
    pub l: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlledNorm {
    pub items: Vec<NormItem>,
    pub total: f64,
}

impl ControlledNorm {
    pub fn get(&self, kind: NormKind, i: usize, l: usize) -> Option<f64> {
        self.items.iter().find(|it| it.kind == kind && it.i == i && it.l == l).map(|it| it.value)
    }

    /// CSV rows `kind,i,l,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,i,l,value\n");
        for it in &self.items {
            let _ = writeln!(s, "{},{},{},{}", it.kind.name(), it.i, it.l, it.value);
        }
        let _ = writeln!(s, "total,,,{}", self.total);
        s
    }
}

/// Raw remainder control tables keyed by (kind, i, l), with the power used in the norm.
#[derive(Debug, Clone)]
pub struct RemainderControls {
    depth: usize,
    tables: BTreeMap<(NormKind, usize, usize), (ControlTable, f64)>,
}

impl RemainderControls {
    /// Raw W table. `Kind2` at (N−1, N) is the consecutive control of R^{N−1,N}.
    pub fn table(&self, kind: NormKind, i: usize, l: usize) -> Option<&ControlTable> {
        let key = if kind == NormKind::Kind2 && l == i + 1 && l == self.depth { (NormKind::Consecutive, i, l) } else { (kind, i, l) };
        self.tables.get(&key).map(|(t, _)| t)
    }

    /// The norm power of each table.
    pub fn power(&self, kind: NormKind, i: usize, l: usize) -> Option<f64> {
        let key = if kind == NormKind::Kind2 && l == i + 1 && l == self.depth { (NormKind::Consecutive, i, l) } else { (kind, i, l) };
        self.tables.get(&key).map(|(_, e)| *e)
    }
}

/// Time coefficients of the diffusion G.
#[derive(Debug, Clone, PartialEq)]
pub enum GCoefficient {
    /// c_i ≡ values[i].
    Constant(Vec<f64>),
    /// c_i(t) = amplitude · (1 + ¼ cos(2πt + i)), i = 1..d.
    Cosine { amplitude: f64 },
}

/// G_t(z)(e_i) = c_i(t) D_σ z with D_σ multiplying mode k by λ_k^σ, so that
/// |D_σ z|_{β−σ} = |z|_β for every β.
#[derive(Debug, Clone, PartialEq)]
pub struct GOperator {
    d: usize,
    sigma: f64,
    coef: GCoefficient,
}

impl GOperator {
    pub fn new(d: usize, sigma: f64, coef: GCoefficient) -> Result<Self> {
        if let GCoefficient::Constant(v) = &coef {
            if v.len() != d {
                return Err(RoughError::Dimension(format!("{} coefficients for d = {d}", v.len())));
            }
        }
        if !(sigma >= 0.0) {
            return Err(RoughError::Parameter(format!("sigma = {sigma}")));
        }
        Ok(GOperator { d, sigma, coef })
    }

    pub fn zero(d: usize, sigma: f64) -> Self {
        GOperator { d, sigma, coef: GCoefficient::Constant(vec![0.0; d]) }
    }

    pub fn standard(d: usize, sigma: f64, amplitude: f64) -> Self {
        GOperator { d, sigma, coef: GCoefficient::Cosine { amplitude } }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_zero(&self) -> bool {
        match &self.coef {
            GCoefficient::Constant(v) => v.iter().all(|c| *c == 0.0),
            GCoefficient::Cosine { amplitude } => *amplitude == 0.0,
        }
    }

    pub fn coefficient(&self, i: usize, t: f64) -> f64 {
        match &self.coef {
            GCoefficient::Constant(v) => v[i],
            GCoefficient::Cosine { amplitude } => amplitude * (1.0 + 0.25 * (2.0 * PI * t + (i + 1) as f64).cos()),
        }
    }

    /// C_G = sup_t |c(t)|₂, the operator norm E_β → L(R^d, E_{β−σ}) for every β.
    pub fn bound(&self) -> f64 {
        match &self.coef {
            GCoefficient::Constant(v) => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            GCoefficient::Cosine { .. } => (0..=20_000)
                .map(|s| {
                    let t = s as f64 / 20_000.0;
                    (0..self.d).map(|i| self.coefficient(i, t).powi(2)).sum::<f64>().sqrt()
                })
                .fold(0.0, f64::max)
                * (1.0 + 1e-9),
        }
    }

    /// Lipschitz constant of t ↦ c(t) in |·|₂; bounds the Hölder quotient of any
    /// exponent ≤ 1 on intervals of length ≤ 1.
    pub fn holder_constant(&self) -> f64 {
        match &self.coef {
            GCoefficient::Constant(_) => 0.0,
            GCoefficient::Cosine { amplitude } => amplitude.abs() * 0.5 * PI * (self.d as f64).sqrt(),
        }
    }

    /// M_G = max(C_G, Hölder constant).
    pub fn m_g(&self) -> f64 {
        self.bound().max(self.holder_constant())
    }

    /// G_t^{∘1} applied to a rank-r field: appends one slot last.
    pub fn apply_once(&self, t: f64, scale: &SpectralScale, field: &[f64]) -> Vec<f64> {
        let k = scale.modes();
        let mult: Vec<f64> = scale.lambdas().iter().map(|l| l.powf(self.sigma)).collect();
        let cs: Vec<f64> = (0..self.d).map(|i| self.coefficient(i, t)).collect();
        let mut out = Vec::with_capacity(field.len() * self.d);
        for blk in field.chunks_exact(k) {
            for &c in &cs {
                out.extend(blk.iter().zip(&mult).map(|(x, m)| c * m * x));
            }
        }
        out
    }

    /// G_t^{∘k}(z): G^{∘k}(z)(v_1 ⊗ ... ⊗ v_k) = G^{∘(k−1)}(G(z)(v_1))(v_2 ⊗ ... ⊗ v_k).
    pub fn gk_iterate(&self, z: &SpectralElement, k: usize, t: f64, max_k: usize) -> Result<Vec<f64>> {
        if k == 0 || k > max_k {
            return Err(RoughError::Index(format!("k = {k} outside 1..={max_k}")));
        }
        let mut f = z.coefs().to_vec();
        for _ in 0..k {
            f = self.apply_once(t, z.scale(), &f);
        }
        Ok(f)
    }
}

/// New D path ξ^j_u = G_u^{∘1}(ξ̃^j_u) from a D̃ path.
pub fn compose_linear_g(g: &GOperator, xi: &ControlledPath) -> Result<ControlledPath> {
    if xi.variant() != Variant::Tilde {
        return Err(RoughError::Parameter("composition expects a D̃ path".into()));
    }
    if g.dim() != xi.dim() {
        return Err(RoughError::Dimension(format!("G acts on R^{}, path on R^{}", g.dim(), xi.dim())));
    }
    let mut params = xi.params();
    params.sigma = g.sigma();
    let mut out = ControlledPath::zeros(Variant::D, params, xi.depth(), xi.scale.clone(), xi.x.clone(), xi.start, xi.cells)?;
    for j in 0..xi.depth() {
        for tau in 0..=xi.cells() {
            let v = g.apply_once(xi.time(tau), &xi.scale, xi.value(j, tau));
            out.value_mut(j, tau).copy_from_slice(&v);
        }
    }
    Ok(out)
}

/// The composition remainder G_u(R̃^{i,l}_{u,v}) + (G_v − G_u)(ξ̃^i_v).
pub fn composed_remainder(g: &GOperator, xi: &ControlledPath, i: usize, l: usize, u: usize, v: usize) -> Result<Vec<f64>> {
    let r = xi.remainder(i, l, u, v)?;
    let (tu, tv) = (xi.time(u), xi.time(v));
    let mut out = g.apply_once(tu, &xi.scale, &r);
    let gv = g.apply_once(tv, &xi.scale, xi.value(i, v));
    let gu = g.apply_once(tu, &xi.scale, xi.value(i, v));
    for ((o, a), b) in out.iter_mut().zip(&gv).zip(&gu) {
        *o += a - b;
    }
    Ok(out)
}

/// The level shift ξ̃^i = ξ^{i−1}, R̃^{i,l} = R^{i−1,l−1}, viewed through a D path.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedPath<'a> {
    base: &'a ControlledPath,
}

/// Shift of a D path (levels 1..N of the D̃ tail).
pub fn shift(xi: &ControlledPath) -> Result<ShiftedPath<'_>> {
    if xi.variant() != Variant::D {
        return Err(RoughError::Parameter("shift expects a D path".into()));
    }
    Ok(ShiftedPath { base: xi })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftDiagnostic {
    pub item: &'static str,
    pub i: usize,
    pub l: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl ShiftDiagnostic {
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs
        }
    }
}

impl<'a> ShiftedPath<'a> {
    pub fn base(&self) -> &'a ControlledPath {
        self.base
    }

    /// ξ̃^i for 1 ≤ i < N at local τ.
    pub fn level(&self, i: usize, tau: usize) -> Result<&'a [f64]> {
        if i == 0 || i >= self.base.depth() {
            return Err(RoughError::Index(format!("shifted level {i}")));
        }
        Ok(self.base.value(i - 1, tau))
    }

    /// Norm index of ξ̃^i, α − iγ.
    pub fn level_index(&self, i: usize) -> f64 {
        self.base.params.alpha - i as f64 * self.base.params.gamma
    }

    /// R̃^{i,l} = R^{i−1,l−1}.
    pub fn remainder(&self, i: usize, l: usize, u: usize, v: usize) -> Result<Vec<f64>> {
        if i == 0 {
            return Err(RoughError::Index("shifted remainders start at i = 1".into()));
        }
        self.base.remainder(i - 1, l - 1, u, v)
    }

    /// Both sides of the four estimates of the shift (items I–IV) on local [a, b].
    /// The implicit constants are unknown, so only the ratios are meaningful.
    pub fn diagnostics(&self, xc: &RoughPathControls, a: usize, b: usize, exec: Execution) -> Result<Vec<ShiftDiagnostic>> {
        let xi = self.base;
        let prm = xi.params;
        let (g, s, gp) = (prm.gamma, prm.sigma, prm.gamma - prm.p);
        let n = xi.depth();
        let (ga, gb) = (xi.start + a, xi.start + b);
        let dt = xi.time(b) - xi.time(a);
        let full = xi.norm(exec)?;
        let own = xi.remainder_controls(a, b, exec)?;
        let wpow = |kind: NormKind, i: usize, l: usize| -> f64 {
            match (own.table(kind, i, l), own.power(kind, i, l)) {
                (Some(t), Some(e)) => t.powered(0, b - a, e),
                _ => 0.0,
            }
        };
        let wx = |j: usize, e: f64| xc.level(j).powered(ga, gb, e);
        let tpow = dt.powf(prm.p * (g - s) / g);
        let mixed = |k1: f64, k2: f64| tpow * k1.powf(s / g) * k2.powf((g - s) / g);
        let mut wanted = Vec::new();
        let mut meta = Vec::new();
        for i in 1..n {
            for l in i + 2..=n {
                wanted.push((i - 1, l - 1, prm.alpha - (l - 1) as f64 * g));
                meta.push(("II", i, l, (l - i - 1) as f64));
                wanted.push((i - 1, l - 1, prm.alpha - l as f64 * g));
                meta.push(("III", i, l, (l - i) as f64));
            }
            wanted.push((i - 1, i, prm.alpha - (i + 1) as f64 * g));
            meta.push(("IV", i, i + 1, 1.0));
        }
        let germs = if wanted.is_empty() { Vec::new() } else { xi.remainder_norm_tables(a, b, &wanted, exec)? };
        let times = xi.local_times(a, b);
        let mut out = Vec::new();
        for i in 1..n {
            let lhs = xi.sup_norm(i - 1, self.level_index(i), a, b);
            let w = xi.scale.weights(xi.level_index(i - 1));
            let rhs = field_norm_weighted(xi.value(i - 1, a), &w) + (wx(1, g - s) + dt.powf(g - s) + tpow) * full;
            out.push(ShiftDiagnostic { item: "I", i, l: i, lhs, rhs });
        }
        for (germ, &(item, i, l, mult)) in germs.iter().zip(&meta) {
            let t = control_table(germ, 1.0 / (mult * gp), prm.p / gp, &times, exec)?;
            let lhs = t.get(0, b - a);
            let rhs = match item {
                "II" => mixed(wpow(NormKind::Kind1, i - 1, l - 1), wpow(NormKind::Kind2, i - 1, l - 1)),
                "III" => {
                    xi.sup_norm(l - 1, xi.level_index(l - 1), a, b) * wx(l - i, (l - i) as f64 * gp)
                        + mixed(wpow(NormKind::Kind1, i - 1, l), wpow(NormKind::Kind2, i - 1, l))
                }
                _ => {
                    xi.sup_norm(i, xi.level_index(i), a, b) * wx(1, gp)
                        + mixed(wpow(NormKind::Kind1, i - 1, i + 1), wpow(NormKind::Kind2, i - 1, i + 1))
                }
            };
            out.push(ShiftDiagnostic { item, i, l, lhs, rhs });
        }
        Ok(out)
    }
}
