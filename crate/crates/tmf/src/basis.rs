//! Truncated trigonometric vector-field basis driving the noise.
//!
//! For every wavevector `k` in the half-space `ℤ_n^+` (first nonzero
//! component positive) with `|k| ≤ K` there are cosine and sine fields
//!
//! ```text
//! A_(k,i)(x) = cos⟨k,x⟩ k_i⊥ / |k|^{s+1},
//! B_(k,i)(x) = sin⟨k,x⟩ k_i⊥ / |k|^{s+1},
//! ```
//!
//! with `{k_i⊥}` an orthogonal frame of the plane normal to `k`, each
//! vector of length `|k|`, plus the `n` constant fields `e_j`. All of them
//! are divergence-free and the per-mode pair `(A, B)` makes the sum
//! `Σ_α X_α X_αᵀ` constant in `x`.

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, VectorField};

/// Trigonometric flavor of one basis field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    /// Constant field `e_i`.
    Constant,
    /// `cos⟨k,x⟩ k_i⊥ / |k|^{s+1}`
    Cos,
    /// `sin⟨k,x⟩ k_i⊥ / |k|^{s+1}`
    Sin,
}

/// One basis multi-index `α = (k, i, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisIndex {
    pub trig: Trig,
    /// Integer wavevector; `[0,0,0]` for the constant fields.
    pub k: [i64; 3],
    /// Frame index: the axis for constants, the perp-frame slot otherwise.
    pub i: usize,
}

fn in_half_space(k: &[i64; 3], n: usize) -> bool {
    for a in 0..n {
        if k[a] != 0 {
            return k[a] > 0;
        }
    }
    false
}

fn norm2(k: &[i64; 3]) -> i64 {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
}

/// Orthogonal frame of the plane normal to `k`, each vector of Euclidean
/// length `|k|`. One vector `(−k₂, k₁)` in 2-d, two in 3-d. The 3-d frame
/// is fixed deterministically from the axis least aligned with `k`.
pub fn perp_frame(k: &[i64; 3], n: usize) -> Vec<[f64; 3]> {
    let kn = (norm2(k) as f64).sqrt();
    assert!(kn > 0.0, "perp frame of the zero vector");
    if n == 2 {
        return vec![[-k[1] as f64, k[0] as f64, 0.0]];
    }
    // axis with the smallest |k_a|, lowest index on ties
    let mut axis = 0;
    for a in 1..3 {
        if k[a].abs() < k[axis].abs() {
            axis = a;
        }
    }
    let mut e = [0.0f64; 3];
    e[axis] = 1.0;
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let cross = |a: &[f64; 3], b: &[f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let mut p0 = cross(&kf, &e);
    let p0n = (p0[0] * p0[0] + p0[1] * p0[1] + p0[2] * p0[2]).sqrt();
    for v in &mut p0 {
        *v *= kn / p0n;
    }
    let mut p1 = cross(&kf, &p0);
    for v in &mut p1 {
        *v /= kn;
    }
    vec![p0, p1]
}

/// All basis indices for truncation radius `kmax`, sorted by
/// `(|k|², k lexicographic, trig, i)` with the constants first.
pub fn enumerate_indices(n: usize, kmax: i64) -> Vec<BasisIndex> {
    let mut out: Vec<BasisIndex> = (0..n)
        .map(|j| BasisIndex { trig: Trig::Constant, k: [0; 3], i: j })
        .collect();
    let mut waves: Vec<[i64; 3]> = Vec::new();
    let r = -kmax..=kmax;
    for k0 in r.clone() {
        for k1 in r.clone() {
            let k2s: Vec<i64> = if n == 2 { vec![0] } else { r.clone().collect() };
            for k2 in k2s {
                let k = [k0, k1, k2];
                if in_half_space(&k, n) && norm2(&k) <= kmax * kmax {
                    waves.push(k);
                }
            }
        }
    }
    waves.sort_by_key(|k| (norm2(k), *k));
    let frames = if n == 2 { 1 } else { 2 };
    for k in waves {
        for trig in [Trig::Cos, Trig::Sin] {
            for i in 0..frames {
                out.push(BasisIndex { trig, k, i });
            }
        }
    }
    out
}

/// Sample one basis field on a grid.
pub fn basis_field(grid: GridSpec, idx: &BasisIndex, s: f64) -> VectorField {
    let n = grid.dim();
    match idx.trig {
        Trig::Constant => VectorField::from_fn(grid, |_, c| if c == idx.i { 1.0 } else { 0.0 }),
        trig => {
            let kn2 = norm2(&idx.k) as f64;
            let w = kn2.powf(-(s + 1.0) / 2.0);
            let p = perp_frame(&idx.k, n)[idx.i];
            let k = idx.k;
            VectorField::from_fn(grid, move |x, c| {
                let phase = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
                let t = if trig == Trig::Cos { phase.cos() } else { phase.sin() };
                t * w * p[c]
            })
        }
    }
}

/// Validated basis truncation: dimension, radius `K ≥ 1` and decay
/// exponent `s`.
#[derive(Debug, Clone)]
pub struct BasisTruncation {
    n: usize,
    kmax: i64,
    s: f64,
    indices: Vec<BasisIndex>,
}

impl BasisTruncation {
    pub fn new(n: usize, kmax: i64, s: f64) -> Result<Self> {
        if !(n == 2 || n == 3) {
            return Err(Error::InvalidTruncation(format!("dimension n = {n}, expected 2 or 3")));
        }
        if kmax < 1 {
            return Err(Error::InvalidTruncation(format!("K = {kmax} < 1")));
        }
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidTruncation(format!("decay exponent s = {s}")));
        }
        Ok(Self { n, kmax, s, indices: enumerate_indices(n, kmax) })
    }

    /// Only the `n` constant fields; the noise then reduces to `n`
    /// independent uniform translations.
    pub fn constant_only(n: usize, s: f64) -> Self {
        let indices = (0..n)
            .map(|j| BasisIndex { trig: Trig::Constant, k: [0; 3], i: j })
            .collect();
        Self { n, kmax: 0, s, indices }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kmax(&self) -> i64 {
        self.kmax
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn indices(&self) -> &[BasisIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Spatially constant diffusion tensor `D_K = Σ_α X_α X_αᵀ`, an `n×n`
    /// symmetric matrix stored in the top-left of a 3×3 array.
    pub fn diffusion_tensor(&self) -> [[f64; 3]; 3] {
        let mut d = [[0.0f64; 3]; 3];
        for idx in &self.indices {
            match idx.trig {
                Trig::Constant => d[idx.i][idx.i] += 1.0,
                // cos² + sin² = 1, so add each (k, i) dyad once
                Trig::Cos => {
                    let p = perp_frame(&idx.k, self.n)[idx.i];
                    let w2 = (norm2(&idx.k) as f64).powf(-(self.s + 1.0));
                    for a in 0..self.n {
                        for b in 0..self.n {
                            d[a][b] += w2 * p[a] * p[b];
                        }
                    }
                }
                Trig::Sin => {}
            }
        }
        d
    }

    /// Isotropic part `c_K = tr(D_K)/n` of the diffusion tensor.
    pub fn c_k(&self) -> f64 {
        let d = self.diffusion_tensor();
        (0..self.n).map(|a| d[a][a]).sum::<f64>() / self.n as f64
    }

    /// Relative anisotropy `ε_K = ‖D_K − c_K I‖ / c_K` (spectral norm).
    /// Exactly zero in 2-d where every shell is closed under rotation by
    /// 90 degrees.
    pub fn epsilon_k(&self) -> f64 {
        let c = self.c_k();
        let mut m = self.diffusion_tensor();
        for a in 0..self.n {
            m[a][a] -= c;
        }
        symmetric_op_norm(&m, self.n) / c
    }
}

/// Spectral norm of a small symmetric matrix by power iteration.
fn symmetric_op_norm(m: &[[f64; 3]; 3], n: usize) -> f64 {
    let mut v = [1.0, 0.7, 0.3];
    let mut lam = 0.0;
    for _ in 0..200 {
        let mut w = [0.0f64; 3];
        for a in 0..n {
            for b in 0..n {
                w[a] += m[a][b] * v[b];
            }
        }
        lam = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        if lam < 1e-300 {
            return 0.0;
        }
        for a in 0..n {
            v[a] = w[a] / lam;
        }
    }
    lam
}

/// One basis index flattened for off-grid evaluation: the wavevector as
/// floats and the weighted frame vector `k_i⊥/|k|^{s+1}` (for constants,
/// the unit vector itself).
#[derive(Debug, Clone, Copy)]
pub struct FlatIndex {
    pub trig: Trig,
    pub k: [f64; 3],
    pub f: [f64; 3],
}

impl FlatIndex {
    /// `X_α(x)` at an arbitrary point.
    #[inline]
    pub fn value_at(&self, x: &[f64; 3]) -> [f64; 3] {
        match self.trig {
            Trig::Constant => self.f,
            _ => {
                let phase = self.k[0] * x[0] + self.k[1] * x[1] + self.k[2] * x[2];
                let t = if self.trig == Trig::Cos { phase.cos() } else { phase.sin() };
                [t * self.f[0], t * self.f[1], t * self.f[2]]
            }
        }
    }
}

impl BasisTruncation {
    /// Flattened copy of the index set for point-wise evaluation.
    pub fn flat(&self) -> Vec<FlatIndex> {
        self.indices
            .iter()
            .map(|idx| match idx.trig {
                Trig::Constant => {
                    let mut f = [0.0; 3];
                    f[idx.i] = 1.0;
                    FlatIndex { trig: Trig::Constant, k: [0.0; 3], f }
                }
                trig => {
                    let w = (norm2(&idx.k) as f64).powf(-(self.s + 1.0) / 2.0);
                    let p = perp_frame(&idx.k, self.n)[idx.i];
                    FlatIndex {
                        trig,
                        k: [idx.k[0] as f64, idx.k[1] as f64, idx.k[2] as f64],
                        f: [p[0] * w, p[1] * w, p[2] * w],
                    }
                }
            })
            .collect()
    }
}

/// Per-wavevector tables shared by all basis fields on one grid: the
/// `cos⟨k,x⟩` and `sin⟨k,x⟩` samples plus the weighted frame vectors.
/// Avoids materializing every `X_α` as a full grid field.
#[derive(Debug, Clone)]
pub struct WaveTable {
    pub k: [i64; 3],
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    /// `k_i⊥ / |k|^{s+1}` for each frame slot.
    pub frame: Vec<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct BasisTables {
    grid: GridSpec,
    waves: Vec<WaveTable>,
    /// For each basis index: `(wave slot or usize::MAX for constants, i)`.
    slots: Vec<(usize, usize)>,
}

impl BasisTables {
    pub fn new(grid: GridSpec, trunc: &BasisTruncation) -> Self {
        assert_eq!(grid.dim(), trunc.dim(), "grid and truncation dimension differ");
        let mut waves: Vec<WaveTable> = Vec::new();
        let mut slots = Vec::with_capacity(trunc.len());
        for idx in trunc.indices() {
            if idx.trig == Trig::Constant {
                slots.push((usize::MAX, idx.i));
                continue;
            }
            let slot = match waves.iter().position(|w| w.k == idx.k) {
                Some(s) => s,
                None => {
                    let k = idx.k;
                    let mut cos = Vec::with_capacity(grid.len());
                    let mut sin = Vec::with_capacity(grid.len());
                    for p in 0..grid.len() {
                        let x = grid.coords(p);
                        let phase =
                            k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
                        cos.push(phase.cos());
                        sin.push(phase.sin());
                    }
                    let w = (norm2(&k) as f64).powf(-(trunc.s() + 1.0) / 2.0);
                    let frame = perp_frame(&k, grid.dim())
                        .into_iter()
                        .map(|p| [p[0] * w, p[1] * w, p[2] * w])
                        .collect();
                    waves.push(WaveTable { k, cos, sin, frame });
                    waves.len() - 1
                }
            };
            slots.push((slot, idx.i));
        }
        Self { grid, waves, slots }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn waves(&self) -> &[WaveTable] {
        &self.waves
    }

    /// `(wave slot, frame index)` of basis index `alpha`; the slot is
    /// `usize::MAX` for the constant fields.
    pub fn slot(&self, alpha: usize) -> (usize, usize) {
        self.slots[alpha]
    }
}
