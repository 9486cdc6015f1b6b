//! Right-hand sides of the deterministic and stochastic momentum
//! equations.
//!
//! The common building block is the transport operator
//! `ad⊤(u).ξ = −P(∇_uξ + u′⊗ξ)` with `(u′⊗ξ)_i = Σ_j (∂_i u_j) ξ_j`.
//! Three stochastic models share the noise basis:
//!
//! * `V1Hamiltonian` — drift `ad⊤(u).ξ + ηΔξ`, columns `−ν P(∇_{X_α}ξ + X_α′⊗ξ)`
//! * `V2Projected`  — drift `−P∇_uξ + ηΔξ`, columns `−ν P∇_{X_α}ξ`
//! * `H17Raw`       — drift `−P∇_uξ − η∇div ξ + ηΔξ`, columns `−ν ∇_{X_α}ξ`,
//!   evolving in the full (not necessarily divergence-free) space.
//!
//! The noise amplitude is tied to the viscosity by `ν = √(2η/c_K)`, which
//! makes the Ito correction of V1 exactly `ηΔξ` at any truncation.

use crate::basis::{basis_field, BasisTruncation, Trig};
use crate::error::{Error, Result};
use crate::spectral::{
    dealias, directional_derivative, divergence, divergence_norm, dft_forward_scalar,
    dft_inverse_scalar, derivative_spectral, gradient, l2_norm, leray_project,
    transpose_gradient_product, vector_laplacian, VectorField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantTag {
    V1Hamiltonian,
    V2Projected,
    H17Raw,
}

/// A stochastic momentum model: variant tag, viscosity and the noise
/// truncation, with `ν` derived so that `ν² c_K = 2η`.
#[derive(Debug, Clone)]
pub struct ModelVariant {
    tag: VariantTag,
    eta: f64,
    nu: f64,
    c_k: f64,
    trunc: BasisTruncation,
}

impl ModelVariant {
    pub fn new(tag: VariantTag, eta: f64, trunc: BasisTruncation) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Config { key: "eta".into(), reason: format!("viscosity {eta} must be positive") });
        }
        let c_k = trunc.c_k();
        let nu = (2.0 * eta / c_k).sqrt();
        Ok(Self { tag, eta, nu, c_k, trunc })
    }

    pub fn tag(&self) -> VariantTag {
        self.tag
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn c_k(&self) -> f64 {
        self.c_k
    }

    pub fn trunc(&self) -> &BasisTruncation {
        &self.trunc
    }

    /// Ito drift of the model. V2 refuses a non-solenoidal `ξ`; H17
    /// accepts any field.
    pub fn ito_drift(&self, u: &VectorField, xi: &VectorField) -> Result<VectorField> {
        match self.tag {
            VariantTag::V1Hamiltonian => {
                let mut out = ad_top(u, xi);
                out.axpy(self.eta, &vector_laplacian(xi));
                Ok(out)
            }
            VariantTag::V2Projected => {
                require_solenoidal(xi)?;
                let mut out = leray_project(&directional_derivative(u, xi));
                out.scale(-1.0);
                out.axpy(self.eta, &vector_laplacian(xi));
                Ok(out)
            }
            VariantTag::H17Raw => {
                let mut out = leray_project(&directional_derivative(u, xi));
                out.scale(-1.0);
                out.axpy(self.eta, &vector_laplacian(xi));
                out.axpy(-self.eta, &grad_div(xi));
                Ok(out)
            }
        }
    }

    /// Coefficient of `dW^α` in the model, evaluated at `ξ`.
    pub fn diffusion_column(&self, alpha: usize, xi: &VectorField) -> Result<VectorField> {
        let idx = self.trunc.indices()[alpha];
        // constant modes: all three variants reduce to −ν ∂_iξ on
        // solenoidal fields, and ∂_i needs no projection
        if idx.trig == Trig::Constant {
            let mut out = partial(xi, idx.i);
            out.scale(-self.nu);
            if self.tag != VariantTag::H17Raw {
                out = leray_project(&out);
            }
            return Ok(out);
        }
        let x_alpha = basis_field(xi.grid(), &idx, self.trunc.s());
        let mut out = match self.tag {
            VariantTag::V1Hamiltonian => leray_project(&hat_x(&x_alpha, xi)),
            VariantTag::V2Projected => {
                require_solenoidal(xi)?;
                leray_project(&directional_derivative(&x_alpha, xi))
            }
            VariantTag::H17Raw => directional_derivative(&x_alpha, xi),
        };
        out.scale(-self.nu);
        Ok(out)
    }
}

fn require_solenoidal(xi: &VectorField) -> Result<()> {
    let norm = l2_norm(xi);
    if norm == 0.0 {
        return Ok(());
    }
    let rel = divergence_norm(xi) / norm;
    if rel > 1e-6 {
        return Err(Error::NotSolenoidal { rel });
    }
    Ok(())
}

fn partial(v: &VectorField, axis: usize) -> VectorField {
    let comps = v
        .components()
        .iter()
        .map(|c| dft_inverse_scalar(&derivative_spectral(&dft_forward_scalar(c), axis)))
        .collect();
    VectorField::from_components(comps)
}

fn grad_div(v: &VectorField) -> VectorField {
    gradient(&divergence(v))
}

/// `ad⊤(u).ξ = −P(∇_uξ + u′⊗ξ)`, the generator of the coadjoint flow.
pub fn ad_top(u: &VectorField, xi: &VectorField) -> VectorField {
    let mut s = directional_derivative(u, xi);
    s.axpy(1.0, &transpose_gradient_product(u, xi));
    let mut out = leray_project(&s);
    out.scale(-1.0);
    out
}

/// `X̂(ξ) = ∇_Xξ + X′⊗ξ` for an explicit vector field `X`.
pub fn hat_x(x: &VectorField, xi: &VectorField) -> VectorField {
    let mut out = directional_derivative(x, xi);
    out.axpy(1.0, &transpose_gradient_product(x, xi));
    out
}

/// `Ŷ(ξ) = P X̂(ξ) = −ad⊤(X).ξ`.
pub fn hat_y(x: &VectorField, xi: &VectorField) -> VectorField {
    leray_project(&hat_x(x, xi))
}

/// Stratonovich drift of the Hamiltonian model, identical to `ad⊤(u).ξ`;
/// the Ito form adds `ηΔξ` on top.
pub fn stratonovich_drift_v1(u: &VectorField, xi: &VectorField) -> VectorField {
    ad_top(u, xi)
}

/// Navier–Stokes right-hand side `−P∇_u u + ηΔu`.
pub fn ns_rhs(u: &VectorField, eta: f64) -> VectorField {
    let mut out = leray_project(&directional_derivative(u, u));
    out.scale(-1.0);
    out.axpy(eta, &vector_laplacian(u));
    dealias(&out)
}
