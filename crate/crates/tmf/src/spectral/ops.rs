//! Spectral differential operators, Leray projection and quadrature.

use num_complex::Complex64;

use super::fft::fft_nd;
use super::{ScalarField, SpectralField, SpectralScalar, VectorField};
use crate::error::{Error, Result};

/// Forward DFT of one scalar component.
pub fn dft_forward_scalar(f: &ScalarField) -> SpectralScalar {
    let grid = f.grid();
    let mut out = SpectralScalar::zeros(grid);
    for (c, v) in out.coefficients_mut().iter_mut().zip(f.samples()) {
        *c = Complex64::new(*v, 0.0);
    }
    fft_nd(grid, out.coefficients_mut(), false);
    out
}

/// Inverse DFT of one scalar component; the imaginary residue is dropped.
pub fn dft_inverse_scalar(fh: &SpectralScalar) -> ScalarField {
    let grid = fh.grid();
    let mut buf = fh.coefficients().to_vec();
    fft_nd(grid, &mut buf, true);
    ScalarField::from_samples(grid, buf.into_iter().map(|z| z.re).collect())
}

pub fn dft_forward(f: &VectorField) -> SpectralField {
    SpectralField::from_components(f.components().iter().map(dft_forward_scalar).collect())
}

pub fn dft_inverse(fh: &SpectralField) -> VectorField {
    VectorField::from_components(fh.components().iter().map(dft_inverse_scalar).collect())
}

/// Zero every mode with `|k_a| > m/3` on some axis (and the Nyquist
/// modes), the 2/3 rule for quadratic products.
pub fn dealias_spectral(fh: &mut SpectralScalar) {
    let grid = fh.grid();
    let cut = grid.dealias_cutoff() as f64;
    let n = grid.dim();
    let data = fh.coefficients_mut();
    grid.for_each_mode(|idx, k, _| {
        for a in 0..n {
            if k[a].abs() > cut {
                data[idx] = Complex64::new(0.0, 0.0);
                break;
            }
        }
    });
}

pub fn dealias(v: &VectorField) -> VectorField {
    let comps = v
        .components()
        .iter()
        .map(|c| {
            let mut ch = dft_forward_scalar(c);
            dealias_spectral(&mut ch);
            dft_inverse_scalar(&ch)
        })
        .collect();
    VectorField::from_components(comps)
}

/// Spectral derivative `∂_axis` of a spectral scalar (multiplication by
/// `i k_axis`; the Nyquist bin is annihilated).
pub fn derivative_spectral(fh: &SpectralScalar, axis: usize) -> SpectralScalar {
    let grid = fh.grid();
    let nyq = (grid.points_per_axis() / 2) as f64;
    let mut out = fh.clone();
    let data = out.coefficients_mut();
    grid.for_each_mode(|idx, k, _| {
        let ka = if k[axis] == nyq { 0.0 } else { k[axis] };
        data[idx] *= Complex64::new(0.0, ka);
    });
    out
}

/// `∇f` by exact spectral differentiation.
pub fn gradient(f: &ScalarField) -> VectorField {
    let fh = dft_forward_scalar(f);
    let comps = (0..f.grid().dim())
        .map(|a| dft_inverse_scalar(&derivative_spectral(&fh, a)))
        .collect();
    VectorField::from_components(comps)
}

pub(crate) fn divergence_spectral(vh: &SpectralField) -> SpectralScalar {
    let grid = vh.grid();
    let nyq = (grid.points_per_axis() / 2) as f64;
    let mut out = SpectralScalar::zeros(grid);
    let n = grid.dim();
    // accumulate i k_a v̂_a
    for a in 0..n {
        let src = vh.component(a).coefficients();
        let dst = out.coefficients_mut();
        grid.for_each_mode(|idx, k, _| {
            let ka = if k[a] == nyq { 0.0 } else { k[a] };
            dst[idx] += Complex64::new(0.0, ka) * src[idx];
        });
    }
    out
}

/// `div v` by exact spectral differentiation.
pub fn divergence(v: &VectorField) -> ScalarField {
    dft_inverse_scalar(&divergence_spectral(&dft_forward(v)))
}

/// L² norm of `div v`, the solenoidality defect.
pub fn divergence_norm(v: &VectorField) -> f64 {
    l2_norm_scalar(&divergence(v))
}

/// Component-wise `Δv` (multiplication by `−|k|²`).
pub fn vector_laplacian(v: &VectorField) -> VectorField {
    let grid = v.grid();
    let comps = v
        .components()
        .iter()
        .map(|c| {
            let mut ch = dft_forward_scalar(c);
            let data = ch.coefficients_mut();
            grid.for_each_mode(|idx, _, k2| {
                data[idx] *= -k2;
            });
            dft_inverse_scalar(&ch)
        })
        .collect();
    VectorField::from_components(comps)
}

/// All first derivatives: `grad_tensor(v)[d][c] = ∂_d v_c` sampled on the
/// grid. One forward and `n²` inverse transforms.
pub fn grad_tensor(v: &VectorField) -> Vec<Vec<ScalarField>> {
    let n = v.grid().dim();
    let vh = dft_forward(v);
    (0..n)
        .map(|d| {
            (0..n)
                .map(|c| dft_inverse_scalar(&derivative_spectral(vh.component(c), d)))
                .collect()
        })
        .collect()
}

/// `∇_u ξ = ⟨u,∇⟩ξ`, with the quadratic product dealiased.
pub fn directional_derivative(u: &VectorField, xi: &VectorField) -> VectorField {
    assert_eq!(u.grid(), xi.grid(), "grid mismatch");
    let grid = u.grid();
    let n = grid.dim();
    let dxi = grad_tensor(xi);
    let mut out = VectorField::zeros(grid);
    for c in 0..n {
        let oc = out.component_mut(c).samples_mut();
        for d in 0..n {
            let ud = u.component(d).samples();
            let dd = dxi[d][c].samples();
            for i in 0..oc.len() {
                oc[i] += ud[i] * dd[i];
            }
        }
    }
    dealias(&out)
}

/// `u′⊗ξ = (∇u)ᵀξ`, component `i = Σ_j (∂_i u_j) ξ_j`; dealiased.
pub fn transpose_gradient_product(u: &VectorField, xi: &VectorField) -> VectorField {
    assert_eq!(u.grid(), xi.grid(), "grid mismatch");
    let grid = u.grid();
    let n = grid.dim();
    let du = grad_tensor(u);
    let mut out = VectorField::zeros(grid);
    for i in 0..n {
        let oc = out.component_mut(i).samples_mut();
        for j in 0..n {
            let dij = du[i][j].samples();
            let xj = xi.component(j).samples();
            for p in 0..oc.len() {
                oc[p] += dij[p] * xj[p];
            }
        }
    }
    dealias(&out)
}

/// In-place Leray projection in spectral space:
/// `v̂ ↦ v̂ − k ⟨k,v̂⟩ / |k|²` for `k ≠ 0`; the mean mode passes through.
pub fn leray_project_spectral(vh: &mut SpectralField) {
    let grid = vh.grid();
    let n = grid.dim();
    let mut factor = vec![Complex64::new(0.0, 0.0); grid.len()];
    grid.for_each_mode(|idx, k, k2| {
        if k2 == 0.0 {
            return;
        }
        let mut kdotv = Complex64::new(0.0, 0.0);
        for a in 0..n {
            kdotv += k[a] * vh.component(a).coefficients()[idx];
        }
        factor[idx] = kdotv / k2;
    });
    for a in 0..n {
        let data = vh.component_mut(a).coefficients_mut();
        grid.for_each_mode(|idx, k, _| {
            data[idx] -= k[a] * factor[idx];
        });
    }
}

/// Leray–Hodge projection onto the divergence-free part.
pub fn leray_project(v: &VectorField) -> VectorField {
    let mut vh = dft_forward(v);
    leray_project_spectral(&mut vh);
    dft_inverse(&vh)
}

/// `Δ⁻¹ g` for mean-zero `g`; the output is mean-zero.
pub fn solve_poisson(g: &ScalarField) -> Result<ScalarField> {
    let norm = l2_norm_scalar(g);
    let mean = g.mean();
    if norm > 0.0 && mean.abs() > 1e-10 * norm {
        return Err(Error::NonZeroMean { mean, norm });
    }
    let mut gh = dft_forward_scalar(g);
    let grid = g.grid();
    let data = gh.coefficients_mut();
    grid.for_each_mode(|idx, _, k2| {
        if k2 == 0.0 {
            data[idx] = Complex64::new(0.0, 0.0);
        } else {
            data[idx] /= -k2;
        }
    });
    Ok(dft_inverse_scalar(&gh))
}

/// `∫⟨a,b⟩ dx` by the uniform-grid rectangle rule, exact for band-limited
/// integrands; normalized so `∫ dx = (2π)^n`.
pub fn inner_product_l2(a: &VectorField, b: &VectorField) -> f64 {
    assert_eq!(a.grid(), b.grid(), "grid mismatch");
    let mut acc = 0.0;
    for (ca, cb) in a.components().iter().zip(b.components()) {
        for (x, y) in ca.samples().iter().zip(cb.samples()) {
            acc += x * y;
        }
    }
    acc * a.grid().cell_volume()
}

pub fn inner_product_scalar(a: &ScalarField, b: &ScalarField) -> f64 {
    assert_eq!(a.grid(), b.grid(), "grid mismatch");
    let acc: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| x * y).sum();
    acc * a.grid().cell_volume()
}

pub fn l2_norm(v: &VectorField) -> f64 {
    inner_product_l2(v, v).sqrt()
}

pub fn l2_norm_scalar(f: &ScalarField) -> f64 {
    inner_product_scalar(f, f).sqrt()
}
