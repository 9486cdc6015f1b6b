//! Scalar energy identities: deterministic and Monte Carlo energies, the
//! dissipation rate of the projected model, the non-dissipative term
//! triple of the Hamiltonian model, and the interacting-particle energy
//! formulas.

use crate::basis::{basis_field, BasisTruncation, Trig};
use crate::dynamics::{hat_x, ModelVariant, VariantTag};
use crate::engine::Ensemble;
use crate::error::Result;
use crate::spectral::{
    directional_derivative, divergence, gradient, inner_product_l2, inner_product_scalar,
    l2_norm, leray_project, solve_poisson, transpose_gradient_product, vector_laplacian,
    ScalarField, VectorField,
};

pub fn l2_error(a: &VectorField, b: &VectorField) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    l2_norm(&d)
}

/// `⟪∇a,∇b⟫ = −⟪a,Δb⟫` for periodic fields.
pub fn h1_inner(a: &VectorField, b: &VectorField) -> f64 {
    -inner_product_l2(a, &vector_laplacian(b))
}

/// Kinetic energy `½⟪v,v⟫`.
pub fn kinetic_energy(v: &VectorField) -> f64 {
    0.5 * inner_product_l2(v, v)
}

/// Monte Carlo energy snapshot of an ensemble.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub t: f64,
    /// Energy of the (empirical or MC) mean field.
    pub e_d: f64,
    /// Sample mean of the per-particle energies.
    pub e_s_hat: f64,
    /// Standard error of `e_s_hat`.
    pub stderr: f64,
}

pub fn energy_report(ens: &Ensemble) -> EnergyReport {
    let mean = ens.empirical_mean();
    let energies: Vec<f64> = ens.particles().iter().map(kinetic_energy).collect();
    let m = energies.len() as f64;
    let e_s_hat = energies.iter().sum::<f64>() / m;
    let stderr = if energies.len() > 1 {
        let var = energies.iter().map(|e| (e - e_s_hat).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    } else {
        0.0
    };
    EnergyReport { t: ens.t(), e_d: kinetic_energy(&mean), e_s_hat, stderr }
}

/// Dissipation rate of the projected model,
/// `−(ν²/2) Σ_α ⟪∇q^α,∇q^α⟫` with `Δq^α = −div ∇_{X_α}ξ`.
pub fn v2_dissipation_rate(xi: &VectorField, variant: &ModelVariant) -> Result<f64> {
    let trunc = variant.trunc();
    let grid = xi.grid();
    let mut total = 0.0;
    for idx in trunc.indices() {
        if idx.trig == Trig::Constant {
            // ∂_iξ of a solenoidal field is solenoidal, so q = 0
            continue;
        }
        let x_alpha = basis_field(grid, idx, trunc.s());
        let g = divergence(&directional_derivative(&x_alpha, xi));
        let q = solve_poisson(&g)?;
        let gq = gradient(&q);
        total += inner_product_l2(&gq, &gq);
    }
    Ok(-(variant.nu() * variant.nu() / 2.0) * total)
}

/// `Σ_α ‖X_α′⊗ξ‖²` by the closed form
/// `(n−1) Σ_{k∈ℤ_n^+, |k|≤K} |k|^{−2s} ∫⟨k,ξ⟩² dx`, valid for the sum
/// over whole wavevector shells.
pub fn stretch_energy_closed_form(xi: &VectorField, trunc: &BasisTruncation) -> f64 {
    let grid = xi.grid();
    let n = grid.dim();
    let mut seen: Vec<[i64; 3]> = Vec::new();
    for idx in trunc.indices() {
        if idx.trig == Trig::Cos && idx.i == 0 {
            seen.push(idx.k);
        }
    }
    let mut total = 0.0;
    for k in seen {
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        let mut kdot = ScalarField::zeros(grid);
        for c in 0..n {
            kdot.axpy(k[c] as f64, xi.component(c));
        }
        total += k2.powf(-(trunc.s())) * inner_product_scalar(&kdot, &kdot);
    }
    (n as f64 - 1.0) * total
}

/// `Σ_α ‖X_α′⊗ξ‖²` by direct summation over the basis fields.
pub fn stretch_energy_direct(xi: &VectorField, trunc: &BasisTruncation) -> f64 {
    let grid = xi.grid();
    let mut total = 0.0;
    for idx in trunc.indices() {
        if idx.trig == Trig::Constant {
            continue;
        }
        let x_alpha = basis_field(grid, idx, trunc.s());
        let b = transpose_gradient_product(&x_alpha, xi);
        total += inner_product_l2(&b, &b);
    }
    total
}

/// `Σ_α ‖∇f_α‖²` with `∇f_α = (I − P) C_α(ξ)`, the non-solenoidal defect
/// of each diffusion column before projection. For V1 `C_α = X̂_α`, for
/// V2 `C_α = ∇_{X_α}`.
pub fn projection_defect_sum(xi: &VectorField, variant: &ModelVariant) -> f64 {
    let trunc = variant.trunc();
    let grid = xi.grid();
    let mut total = 0.0;
    for idx in trunc.indices() {
        if idx.trig == Trig::Constant {
            continue;
        }
        let x_alpha = basis_field(grid, idx, trunc.s());
        let c = match variant.tag() {
            VariantTag::V1Hamiltonian => hat_x(&x_alpha, xi),
            _ => directional_derivative(&x_alpha, xi),
        };
        let mut defect = c.clone();
        defect.axpy(-1.0, &leray_project(&c));
        total += inner_product_l2(&defect, &defect);
    }
    total
}

/// The three contributions to `dE^s/dt` for the Hamiltonian model:
/// the line-stretching exchange with the mean field, the noise-stretching
/// production, and the projection-defect dissipation. Their sum (in
/// expectation over particles) is the Ito drift of the energy; it has no
/// definite sign.
pub fn v1_nondissipation_terms(
    xi: &VectorField,
    u: &VectorField,
    variant: &ModelVariant,
) -> (f64, f64, f64) {
    let nu2 = variant.nu() * variant.nu();
    let stretch = transpose_gradient_product(u, xi);
    let t1 = -inner_product_l2(xi, &stretch);
    let t2 = 0.5 * nu2 * stretch_energy_closed_form(xi, variant.trunc());
    let t3 = -0.5 * nu2 * projection_defect_sum(xi, variant);
    (t1, t2, t3)
}

/// Predicted drift of the empirical energy `H₀(u^N) = ½⟪u^N,u^N⟫` for an
/// interacting ensemble. The exchange sum uses
/// `Σ_{i≠j}⟪∇ξ^i,∇ξ^j⟫ = N²⟪∇u^N,∇u^N⟫ − Σ_i⟪∇ξ^i,∇ξ^i⟫`.
pub fn ips_energy_formula(ens: &Ensemble) -> f64 {
    let variant = ens.variant().clone();
    let n_particles = ens.len() as f64;
    let u_n = ens.empirical_mean();
    let cross = n_particles * n_particles * h1_inner(&u_n, &u_n)
        - ens.particles().iter().map(|xi| h1_inner(xi, xi)).sum::<f64>();
    let mut rhs = -(variant.eta() / (n_particles * n_particles)) * cross;
    let nu2 = variant.nu() * variant.nu();
    for xi in ens.particles() {
        let defect = projection_defect_sum(xi, &variant);
        match variant.tag() {
            VariantTag::V1Hamiltonian => {
                let stretch = stretch_energy_closed_form(xi, variant.trunc());
                rhs += 0.5 * nu2 / (n_particles * n_particles) * (stretch - defect);
            }
            _ => {
                rhs -= 0.5 * nu2 / (n_particles * n_particles) * defect;
            }
        }
    }
    rhs
}
