//! Truncated tensor algebra T^N(R^d) and rough paths stored as per-cell increments.
//!
//! Levels are stored contiguously, level k occupying a dense row-major block of
//! d^k coefficients. The multi-index (a_1, ..., a_k) maps to
//! a_1 d^{k-1} + ... + a_k, so the first slot is the most significant.

use crate::error::{Result, RoughError};

pub const MAX_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorElement {
    d: usize,
    depth: usize,
    data: Vec<f64>,
}

fn level_offset(d: usize, k: usize) -> usize {
    (0..k).map(|i| d.pow(i as u32)).sum()
}

fn check_shape(d: usize, depth: usize) -> Result<()> {
    if d == 0 {
        return Err(RoughError::Dimension("d must be positive".into()));
    }
    if depth == 0 || depth > MAX_DEPTH {
        return Err(RoughError::Dimension(format!("depth {depth} outside 1..=3")));
    }
    Ok(())
}

impl TensorElement {
    pub fn zero(d: usize, depth: usize) -> Result<Self> {
        check_shape(d, depth)?;
        Ok(TensorElement { d, depth, data: vec![0.0; level_offset(d, depth + 1)] })
    }

    pub fn unit(d: usize, depth: usize) -> Result<Self> {
        let mut t = Self::zero(d, depth)?;
        t.data[0] = 1.0;
        Ok(t)
    }

    /// Builds an element from explicit level blocks (levels[0] is the scalar).
    pub fn from_levels(d: usize, levels: &[Vec<f64>]) -> Result<Self> {
        if levels.is_empty() {
            return Err(RoughError::Dimension("no levels supplied".into()));
        }
        let depth = levels.len() - 1;
        check_shape(d, depth)?;
        let mut data = Vec::with_capacity(level_offset(d, depth + 1));
        for (k, block) in levels.iter().enumerate() {
            if block.len() != d.pow(k as u32) {
                return Err(RoughError::Dimension(format!(
                    "level {k} has {} coefficients, expected {}",
                    block.len(),
                    d.pow(k as u32)
                )));
            }
            data.extend_from_slice(block);
        }
        Ok(TensorElement { d, depth, data })
    }

    /// exp(v) truncated at `depth`: level k is v^{⊗k}/k!.
    pub fn segment_exponential(v: &[f64], depth: usize) -> Result<Self> {
        let d = v.len();
        let mut t = Self::unit(d, depth)?;
        let mut prev = vec![1.0];
        for k in 1..=depth {
            let mut cur = Vec::with_capacity(prev.len() * d);
            for &p in &prev {
                for &x in v {
                    cur.push(p * x / k as f64);
                }
            }
            t.level_mut(k).copy_from_slice(&cur);
            prev = cur;
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let o = level_offset(self.d, k);
        &self.data[o..o + self.d.pow(k as u32)]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let o = level_offset(self.d, k);
        let n = self.d.pow(k as u32);
        &mut self.data[o..o + n]
    }

    /// Euclidean (Frobenius) norm of level k.
    pub fn level_norm(&self, k: usize) -> f64 {
        self.level(k).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.d != other.d || self.depth != other.depth {
            return Err(RoughError::Dimension(format!(
                "(d, N) = ({}, {}) vs ({}, {})",
                self.d, self.depth, other.d, other.depth
            )));
        }
        Ok(())
    }

    /// Truncated tensor product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero(self.d, self.depth)?;
        self.mul_into(other, &mut out)?;
        Ok(out)
    }

    /// Writes `self ⊗ other` into `out` without allocating.
    pub fn mul_into(&self, other: &Self, out: &mut Self) -> Result<()> {
        self.check_compatible(other)?;
        self.check_compatible(out)?;
        let d = self.d;
        for k in 0..=self.depth {
            let ok = level_offset(d, k);
            let nk = d.pow(k as u32);
            out.data[ok..ok + nk].fill(0.0);
            for i in 0..=k {
                let j = k - i;
                let a = self.level(i);
                let b = other.level(j);
                let nb = b.len();
                for (ia, &av) in a.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let dst = &mut out.data[ok + ia * nb..ok + (ia + 1) * nb];
                    for (o, &bv) in dst.iter_mut().zip(b) {
                        *o += av * bv;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(TensorElement { d: self.d, depth: self.depth, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(TensorElement { d: self.d, depth: self.depth, data })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Tensor product of flat blocks: (a ⊗ b)[i * |b| + j] = a[i] b[j].
pub fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// A multiplicative functional on a time grid, stored as one group element per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughPathGrid {
    times: Vec<f64>,
    cells: Vec<TensorElement>,
    d: usize,
    depth: usize,
}

impl RoughPathGrid {
    pub fn new(times: Vec<f64>, cells: Vec<TensorElement>) -> Result<Self> {
        if times.len() < 2 || cells.len() + 1 != times.len() {
            return Err(RoughError::Dimension(format!(
                "{} times need {} cells, got {}",
                times.len(),
                times.len().saturating_sub(1),
                cells.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(RoughError::Parameter("grid times must be finite and strictly increasing".into()));
        }
        let (d, depth) = (cells[0].dim(), cells[0].depth());
        for c in &cells {
            if c.dim() != d || c.depth() != depth {
                return Err(RoughError::Dimension("cells disagree on (d, N)".into()));
            }
            if c.level(0)[0] != 1.0 {
                return Err(RoughError::Parameter("cell is not a group element (level 0 != 1)".into()));
            }
        }
        Ok(RoughPathGrid { times, cells, d, depth })
    }

    /// The constant path: every cell is the unit.
    pub fn unit_path(times: Vec<f64>, d: usize, depth: usize) -> Result<Self> {
        let cells = vec![TensorElement::unit(d, depth)?; times.len().saturating_sub(1)];
        Self::new(times, cells)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn cells(&self) -> &[TensorElement] {
        &self.cells
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of cells m (the grid has m + 1 points).
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// X_{t_i, t_k} as the ordered product of cells i..k-1.
    pub fn query(&self, i: usize, k: usize) -> Result<TensorElement> {
        if i > k || k > self.cells.len() {
            return Err(RoughError::Interval { start: i, end: k });
        }
        let mut acc = TensorElement::unit(self.d, self.depth)?;
        let mut tmp = acc.clone();
        for c in &self.cells[i..k] {
            acc.mul_into(c, &mut tmp)?;
            std::mem::swap(&mut acc, &mut tmp);
        }
        Ok(acc)
    }

    /// Calls `f(k, X_{t_i, t_k})` for k = i, ..., end using running products.
    pub fn scan_from<F>(&self, i: usize, end: usize, mut f: F) -> Result<()>
    where
        F: FnMut(usize, &TensorElement),
    {
        if i > end || end > self.cells.len() {
            return Err(RoughError::Interval { start: i, end });
        }
        let mut acc = TensorElement::unit(self.d, self.depth)?;
        let mut tmp = acc.clone();
        f(i, &acc);
        for k in i..end {
            acc.mul_into(&self.cells[k], &mut tmp)?;
            std::mem::swap(&mut acc, &mut tmp);
            f(k + 1, &acc);
        }
        Ok(())
    }

    /// Level-1 path values X_{t_0, t_k} for every grid point, as rows of length d.
    pub fn level1_path(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.cells.len() + 1);
        let mut cur = vec![0.0; self.d];
        out.push(cur.clone());
        for c in &self.cells {
            for (x, dx) in cur.iter_mut().zip(c.level(1)) {
                *x += dx;
            }
            out.push(cur.clone());
        }
        out
    }

    /// Restriction of the path to grid indices [a, b].
    pub fn window(&self, a: usize, b: usize) -> Result<Self> {
        if a >= b || b > self.cells.len() {
            return Err(RoughError::Interval { start: a, end: b });
        }
        Self::new(self.times[a..=b].to_vec(), self.cells[a..b].to_vec())
    }

    /// Max-norm Chen residual |X_{ik} − X_{ij} ⊗ X_{jk}| for a grid triple.
    pub fn chen_residual(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        if !(i <= j && j <= k) {
            return Err(RoughError::Interval { start: i, end: k });
        }
        let lhs = self.query(i, k)?;
        let rhs = self.query(i, j)?.mul(&self.query(j, k)?)?;
        Ok(lhs.max_abs_diff(&rhs))
    }
}

/// Signature of the piecewise-linear interpolation of `points` (rows of length d).
pub fn lift_points(times: &[f64], points: &[Vec<f64>], depth: usize) -> Result<RoughPathGrid> {
    if points.len() != times.len() {
        return Err(RoughError::Dimension(format!("{} points for {} times", points.len(), times.len())));
    }
    let d = points.first().map_or(0, |p| p.len());
    let mut cells = Vec::with_capacity(points.len().saturating_sub(1));
    for w in points.windows(2) {
        if w[1].len() != d {
            return Err(RoughError::Dimension("ragged path values".into()));
        }
        let v: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
        cells.push(TensorElement::segment_exponential(&v, depth)?);
    }
    RoughPathGrid::new(times.to_vec(), cells)
}
