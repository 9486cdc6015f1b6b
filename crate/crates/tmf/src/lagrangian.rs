//! Stochastic Lagrangian flow: material loops and circulation for the
//! Kelvin audit, the back-to-labels map, and the transported field
//! `ζ = P[(∇A)ᵀ(u₀∘A)]`.
//!
//! Every off-grid evaluation uses exact trigonometric interpolation of the
//! band-limited field, so interpolation error cannot masquerade as
//! circulation drift. The point update `x ← x + u(x)dt + ν ΣX_α(x)ΔW^α`
//! needs no Ito correction because `Σ∇_{X_α}X_α = 0`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::FlatIndex;
use crate::dynamics::ModelVariant;
use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use crate::spectral::{
    dealias_spectral, dft_forward, dft_forward_scalar, grad_tensor, leray_project_spectral,
    dft_inverse, GridSpec, VectorField,
};

fn wrap(x: f64) -> f64 {
    x.rem_euclid(TAU)
}

/// Shortest periodic representative of a coordinate difference.
fn minimal_image(d: f64) -> f64 {
    d - TAU * (d / TAU).round()
}

/// Sparse trigonometric interpolant of a band-limited vector field:
/// exact wherever the field is resolved on its grid.
#[derive(Debug, Clone)]
pub struct SpectralEvaluator {
    n: usize,
    mean: [f64; 3],
    /// Half-space modes with the conjugate partner folded in (factor 2).
    modes: Vec<([f64; 3], [Complex64; 3])>,
}

impl SpectralEvaluator {
    pub fn new(v: &VectorField) -> Self {
        let grid = v.grid();
        let n = grid.dim();
        let vh = dft_forward(v);
        let scale = 1.0 / grid.len() as f64;
        let mut mean = [0.0f64; 3];
        for c in 0..n {
            mean[c] = vh.component(c).coefficients()[0].re * scale;
        }
        // magnitude floor relative to the largest coefficient
        let mut max_mag = 0.0f64;
        for c in 0..n {
            for z in vh.component(c).coefficients() {
                max_mag = max_mag.max(z.norm());
            }
        }
        let floor = max_mag * 1e-13;
        let mut modes = Vec::new();
        grid.for_each_mode(|idx, k, _| {
            // keep one of each conjugate pair: first nonzero component > 0
            let mut lead = 0.0;
            for a in 0..n {
                if k[a] != 0.0 {
                    lead = k[a];
                    break;
                }
            }
            if lead <= 0.0 {
                return;
            }
            let mut coef = [Complex64::new(0.0, 0.0); 3];
            let mut keep = false;
            for c in 0..n {
                let z = vh.component(c).coefficients()[idx] * (2.0 * scale);
                if z.norm() > 2.0 * floor {
                    keep = true;
                }
                coef[c] = z;
            }
            if keep {
                modes.push(([k[0], k[1], k[2]], coef));
            }
        });
        Self { n, mean, modes }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Field value at an arbitrary point.
    pub fn eval(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut out = self.mean;
        for (k, coef) in &self.modes {
            let phase = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
            let (s, c) = phase.sin_cos();
            for a in 0..self.n {
                // Re(coef · e^{iφ})
                out[a] += coef[a].re * c - coef[a].im * s;
            }
        }
        out
    }
}

/// Closed polygonal material loop. The spacing budget is fixed at
/// creation; midpoints are inserted whenever a segment stretches past
/// twice the initial maximum spacing.
#[derive(Debug, Clone)]
pub struct Loop {
    n: usize,
    points: Vec<[f64; 3]>,
    budget: f64,
}

impl Loop {
    pub fn new(points: Vec<[f64; 3]>, n: usize) -> Self {
        assert!(points.len() >= 64, "loop needs at least 64 points");
        let mut lp = Self { n, points, budget: 0.0 };
        lp.budget = 2.0 * lp.max_spacing();
        lp
    }

    /// Circle of radius `r` around `center` in the x₁–x₂ plane.
    pub fn circle(center: [f64; 3], radius: f64, count: usize, n: usize) -> Self {
        let points = (0..count)
            .map(|j| {
                let th = TAU * j as f64 / count as f64;
                [
                    wrap(center[0] + radius * th.cos()),
                    wrap(center[1] + radius * th.sin()),
                    wrap(center[2]),
                ]
            })
            .collect();
        Self::new(points, n)
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { n: self.n, points, budget: self.budget }
    }

    fn segment(&self, j: usize) -> [f64; 3] {
        let a = &self.points[j];
        let b = &self.points[(j + 1) % self.points.len()];
        let mut d = [0.0; 3];
        for c in 0..self.n {
            d[c] = minimal_image(b[c] - a[c]);
        }
        d
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.points.len())
            .map(|j| {
                let d = self.segment(j);
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Insert minimal-image midpoints until every segment is within the
    /// refinement budget.
    pub fn refine(&mut self) {
        loop {
            let mut out = Vec::with_capacity(self.points.len() * 2);
            let mut split = false;
            for j in 0..self.points.len() {
                let p = self.points[j];
                out.push(p);
                let d = self.segment(j);
                let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if len > self.budget {
                    split = true;
                    let mut mid = [0.0; 3];
                    for c in 0..self.n {
                        mid[c] = wrap(p[c] + d[c] / 2.0);
                    }
                    out.push(mid);
                }
            }
            self.points = out;
            if !split {
                break;
            }
        }
    }

    fn check_spacing(&self) -> Result<()> {
        let max = self.max_spacing();
        if max > self.budget {
            return Err(Error::LoopSpacing { max, budget: self.budget });
        }
        Ok(())
    }
}

/// `∮ ξ♭` along the loop by the midpoint rule with minimal-image
/// segments.
pub fn circulation_eval(lp: &Loop, xi: &SpectralEvaluator) -> Result<f64> {
    lp.check_spacing()?;
    let mut acc = 0.0;
    for j in 0..lp.len() {
        let p = lp.points[j];
        let d = lp.segment(j);
        let mut mid = [0.0; 3];
        for c in 0..lp.n {
            mid[c] = wrap(p[c] + d[c] / 2.0);
        }
        let v = xi.eval(&mid);
        for c in 0..lp.n {
            acc += v[c] * d[c];
        }
    }
    Ok(acc)
}

pub fn circulation(lp: &Loop, xi: &VectorField) -> Result<f64> {
    circulation_eval(lp, &SpectralEvaluator::new(xi))
}

/// Noise part of the point displacement, `ν Σ_α X_α(x) ΔW^α`.
fn noise_shift(flat: &[FlatIndex], dw: &[f64], nu: f64, x: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0f64; 3];
    for (fi, w) in flat.iter().zip(dw) {
        if *w == 0.0 {
            continue;
        }
        let v = fi.value_at(x);
        for c in 0..3 {
            out[c] += nu * w * v[c];
        }
    }
    out
}

/// Ito point update `x ← x + u(x)dt + ν ΣX_α(x)ΔW^α` for every loop
/// point, with increments read from the shared stream addresses; refines
/// the loop afterwards if a segment stretched too far.
pub fn advance_points(
    lp: &mut Loop,
    u: &SpectralEvaluator,
    variant: &ModelVariant,
    stream: &NoiseStream,
    particle: u64,
    step: u64,
    dt: f64,
) {
    let flat = variant.trunc().flat();
    let dw = stream.increments(particle, step, flat.len(), dt);
    let nu = variant.nu();
    let n = lp.n;
    for p in lp.points.iter_mut() {
        let uv = u.eval(p);
        let nv = noise_shift(&flat, &dw, nu, p);
        for c in 0..n {
            p[c] = wrap(p[c] + uv[c] * dt + nv[c]);
        }
    }
    lp.refine();
}

/// Back-to-labels map represented by its periodic displacement:
/// `A(x) = x + a(x)`.
#[derive(Debug, Clone)]
pub struct LabelMap {
    a: VectorField,
}

impl LabelMap {
    pub fn identity(grid: GridSpec) -> Self {
        Self { a: VectorField::zeros(grid) }
    }

    pub fn displacement(&self) -> &VectorField {
        &self.a
    }

    pub fn from_displacement(a: VectorField) -> Self {
        Self { a }
    }

    /// `A(x)` at an arbitrary point, via an evaluator of `a`.
    pub fn apply(&self, ev: &SpectralEvaluator, x: &[f64; 3]) -> [f64; 3] {
        let av = ev.eval(x);
        let n = self.a.grid().dim();
        let mut out = *x;
        for c in 0..n {
            out[c] = wrap(x[c] + av[c]);
        }
        out
    }
}

/// Semi-Lagrangian transport of the label map: with the point
/// displacement `δx(x) = u(x)dt + νΣX_α(x)ΔW`, the updated map is
/// `A_new(x) = A_old(x − δx(x))`, i.e. `a_new(x) = a_old(x − δx) − δx`.
/// Exact for rigid motions and unconditionally stable.
pub fn advance_label_map(
    map: &LabelMap,
    u: &SpectralEvaluator,
    variant: &ModelVariant,
    stream: &NoiseStream,
    particle: u64,
    step: u64,
    dt: f64,
) -> LabelMap {
    let grid = map.a.grid();
    let n = grid.dim();
    let flat = variant.trunc().flat();
    let dw = stream.increments(particle, step, flat.len(), dt);
    let nu = variant.nu();
    let a_ev = SpectralEvaluator::new(&map.a);
    let rows: Vec<Vec<[f64; 3]>> = (0..grid.len())
        .into_par_iter()
        .chunks(grid.points_per_axis().max(64))
        .map(|chunk| {
            chunk
                .into_iter()
                .map(|idx| {
                    let x = grid.coords(idx);
                    let uv = u.eval(&x);
                    let nv = noise_shift(&flat, &dw, nu, &x);
                    let mut src = x;
                    let mut delta = [0.0; 3];
                    for c in 0..n {
                        delta[c] = uv[c] * dt + nv[c];
                        src[c] = wrap(x[c] - delta[c]);
                    }
                    let av = a_ev.eval(&src);
                    let mut out = [0.0; 3];
                    for c in 0..n {
                        out[c] = av[c] - delta[c];
                    }
                    out
                })
                .collect()
        })
        .collect();
    let mut a_new = VectorField::zeros(grid);
    {
        let mut idx = 0;
        for row in rows {
            for val in row {
                for c in 0..n {
                    a_new.component_mut(c).samples_mut()[idx] = val[c];
                }
                idx += 1;
            }
        }
    }
    // composition is not band-limited; scrub the aliased tail
    let comps = a_new
        .components()
        .iter()
        .map(|c| {
            let mut ch = dft_forward_scalar(c);
            dealias_spectral(&mut ch);
            crate::spectral::dft_inverse_scalar(&ch)
        })
        .collect();
    LabelMap { a: VectorField::from_components(comps) }
}

/// Transported momentum `ζ = P[(∇A)ᵀ(u₀∘A)]` with `∇A = I + ∇a` computed
/// spectrally and the composition by exact interpolation of `u₀`.
pub fn ad_top_transport(map: &LabelMap, u0: &SpectralEvaluator) -> VectorField {
    let grid = map.a.grid();
    let n = grid.dim();
    let da = grad_tensor(&map.a);
    let a_ev = SpectralEvaluator::new(&map.a);
    let mut w = VectorField::zeros(grid);
    for idx in 0..grid.len() {
        let x = grid.coords(idx);
        let ax = map.apply(&a_ev, &x);
        let uv = u0.eval(&ax);
        for c in 0..n {
            // (∇A)ᵀ_{cj} = δ_cj + ∂_c a_j
            let mut s = uv[c];
            for j in 0..n {
                s += da[c][j].samples()[idx] * uv[j];
            }
            w.component_mut(c).samples_mut()[idx] = s;
        }
    }
    let mut wh = dft_forward(&w);
    for c in 0..n {
        dealias_spectral(wh.component_mut(c));
    }
    leray_project_spectral(&mut wh);
    dft_inverse(&wh)
}

/// Time series of loop circulation from a coupled run: one mean-field
/// particle stepped with the prescribed reference velocity and a loop
/// advected by the same velocity and the same noise increments.
#[derive(Debug, Clone)]
pub struct KelvinAudit {
    pub times: Vec<f64>,
    pub circulations: Vec<f64>,
}

impl KelvinAudit {
    /// Largest relative excursion from the initial circulation.
    pub fn max_relative_drift(&self) -> f64 {
        let c0 = self.circulations[0];
        self.circulations
            .iter()
            .map(|c| (c - c0).abs())
            .fold(0.0, f64::max)
            / c0.abs().max(1e-300)
    }
}

pub fn kelvin_audit(
    u0: &VectorField,
    variant: &ModelVariant,
    seed: u64,
    dt: f64,
    t_final: f64,
    loop0: Loop,
    record_every: usize,
) -> Result<KelvinAudit> {
    use crate::engine::{Ensemble, ReferenceStepper, StepOptions};
    let steps = (t_final / dt).round() as usize;
    let every = record_every.max(1);
    let mut stepper = ReferenceStepper::new(u0, variant.eta(), dt)?;
    let mut ens = Ensemble::new(variant.clone(), seed, u0, 1);
    let stream = NoiseStream::new(seed);
    let mut lp = loop0;
    let mut times = vec![0.0];
    let mut circulations = vec![circulation(&lp, &ens.particles()[0])?];
    for s in 0..steps {
        let u_now = stepper.current();
        let u_ev = SpectralEvaluator::new(&u_now);
        advance_points(&mut lp, &u_ev, variant, &stream, ens.noise_ids()[0], s as u64, dt);
        ens.step_meanfield(&u_now, dt, StepOptions::default())?;
        stepper.step()?;
        if (s + 1) % every == 0 || s + 1 == steps {
            times.push(ens.t());
            circulations.push(circulation(&lp, &ens.particles()[0])?);
        }
    }
    Ok(KelvinAudit { times, circulations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisTruncation;
    use crate::dynamics::VariantTag;
    use crate::spectral::fields::{random_scalar, random_solenoidal, taylor_green};
    use crate::spectral::{gradient, l2_norm};

    fn variant(eta: f64, kmax: i64) -> ModelVariant {
        ModelVariant::new(VariantTag::V1Hamiltonian, eta, BasisTruncation::new(2, kmax, 3.0).unwrap()).unwrap()
    }

    #[test]
    fn evaluator_is_exact_for_band_limited_fields() {
        let grid = GridSpec::new(2, 32).unwrap();
        let v = random_solenoidal(grid, 4, 41);
        let ev = SpectralEvaluator::new(&v);
        // on-grid
        for idx in (0..grid.len()).step_by(97) {
            let x = grid.coords(idx);
            let got = ev.eval(&x);
            let want = v.at(idx);
            for c in 0..2 {
                assert!((got[c] - want[c]).abs() < 1e-12);
            }
        }
        // off-grid against the closed form of Taylor–Green
        let tg = taylor_green(grid);
        let ev = SpectralEvaluator::new(&tg);
        for &(x0, x1) in &[(0.123, 2.456), (3.3, 5.9), (6.0, 0.01)] {
            let got = ev.eval(&[x0, x1, 0.0]);
            assert!((got[0] - x0.sin() * x1.cos()).abs() < 1e-12);
            assert!((got[1] + x0.cos() * x1.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_fields_have_no_circulation() {
        let grid = GridSpec::new(2, 32).unwrap();
        let g = gradient(&random_scalar(grid, 4, 42));
        let lp = Loop::circle([2.0, 3.0, 0.0], 0.9, 256, 2);
        let c = circulation(&lp, &g).unwrap();
        assert!(c.abs() < 1e-8 * l2_norm(&g), "{c}");
    }

    #[test]
    fn circulation_matches_stokes_oracle() {
        // ξ = (−sin x₂, 0): curl = cos x₂; over the disc of radius r at
        // (π,π) the flux is −∬ cos y dA, computed by dense polar
        // quadrature
        let grid = GridSpec::new(2, 32).unwrap();
        let xi = VectorField::from_fn(grid, |x, c| if c == 0 { -(x[1].sin()) } else { 0.0 });
        let r = 0.5;
        let lp = Loop::circle([std::f64::consts::PI, std::f64::consts::PI, 0.0], r, 512, 2);
        let got = circulation(&lp, &xi).unwrap();
        let (nr, nth) = (400, 400);
        let mut oracle = 0.0;
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * r / nr as f64;
            for j in 0..nth {
                let th = TAU * (j as f64 + 0.5) / nth as f64;
                let y = std::f64::consts::PI + rho * th.sin();
                oracle += y.cos() * rho * (r / nr as f64) * (TAU / nth as f64);
            }
        }
        assert!(((got - oracle) / oracle).abs() < 1e-4, "got {got}, oracle {oracle}");
    }

    #[test]
    fn circulation_flips_sign_under_reversal() {
        let grid = GridSpec::new(2, 32).unwrap();
        let xi = random_solenoidal(grid, 3, 43);
        let lp = Loop::circle([1.0, 1.0, 0.0], 0.7, 128, 2);
        let a = circulation(&lp, &xi).unwrap();
        let b = circulation(&lp.reversed(), &xi).unwrap();
        assert!((a + b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn circulation_stable_under_point_doubling() {
        let grid = GridSpec::new(2, 32).unwrap();
        let xi = random_solenoidal(grid, 3, 44);
        let a = circulation(&Loop::circle([2.5, 4.0, 0.0], 0.8, 256, 2), &xi).unwrap();
        let b = circulation(&Loop::circle([2.5, 4.0, 0.0], 0.8, 512, 2), &xi).unwrap();
        assert!((a - b).abs() < 1e-4 * b.abs().max(1e-6), "a {a}, b {b}");
    }

    #[test]
    fn rigid_advection_shifts_points() {
        let grid = GridSpec::new(2, 32).unwrap();
        let e1 = VectorField::from_fn(grid, |_, c| if c == 0 { 1.0 } else { 0.0 });
        let ev = SpectralEvaluator::new(&e1);
        let stream = NoiseStream::new(1);
        let mut lp = Loop::circle([3.0, 3.0, 0.0], 0.5, 64, 2);
        let before = lp.points().to_vec();
        // η (hence ν) vanishingly small: effectively noise-free transport
        let tiny = ModelVariant::new(VariantTag::V1Hamiltonian, 1e-30, BasisTruncation::new(2, 1, 3.0).unwrap()).unwrap();
        advance_points(&mut lp, &ev, &tiny, &stream, 0, 0, 0.1);
        for (p, q) in lp.points().iter().zip(&before) {
            assert!((p[0] - wrap(q[0] + 0.1)).abs() < 1e-9);
            assert!((p[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_noise_translates_loop_rigidly() {
        let grid = GridSpec::new(2, 32).unwrap();
        let zero = VectorField::zeros(grid);
        let ev = SpectralEvaluator::new(&zero);
        let trunc = BasisTruncation::constant_only(2, 3.0);
        let v = ModelVariant::new(VariantTag::V1Hamiltonian, 0.05, trunc).unwrap();
        let stream = NoiseStream::new(9);
        let mut lp = Loop::circle([3.0, 3.0, 0.0], 0.5, 64, 2);
        let before = lp.points().to_vec();
        advance_points(&mut lp, &ev, &v, &stream, 0, 0, 1e-3);
        let dw = stream.increments(0, 0, 2, 1e-3);
        for (p, q) in lp.points().iter().zip(&before) {
            assert!((p[0] - wrap(q[0] + v.nu() * dw[0])).abs() < 1e-12);
            assert!((p[1] - wrap(q[1] + v.nu() * dw[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn label_map_inverts_rigid_translation() {
        let grid = GridSpec::new(2, 32).unwrap();
        let e1 = VectorField::from_fn(grid, |_, c| if c == 0 { 1.0 } else { 0.0 });
        let ev = SpectralEvaluator::new(&e1);
        let tiny = ModelVariant::new(VariantTag::V1Hamiltonian, 1e-30, BasisTruncation::new(2, 1, 3.0).unwrap()).unwrap();
        let stream = NoiseStream::new(2);
        let mut map = LabelMap::identity(grid);
        let dt = 0.02;
        for s in 0..10 {
            map = advance_label_map(&map, &ev, &tiny, &stream, 0, s, dt);
        }
        // A(x) = x − t e₁, so a ≡ −0.2 e₁
        for idx in (0..grid.len()).step_by(13) {
            assert!((map.displacement().component(0).samples()[idx] + 0.2).abs() < 1e-9);
            assert!(map.displacement().component(1).samples()[idx].abs() < 1e-9);
        }
    }

    #[test]
    fn forward_points_and_label_map_are_inverse() {
        let grid = GridSpec::new(2, 32).unwrap();
        let u0 = taylor_green(grid);
        let v = variant(0.05, 2);
        let stream = NoiseStream::new(77);
        let mut stepper = crate::engine::ReferenceStepper::new(&u0, v.eta(), 1e-3).unwrap();
        let mut map = LabelMap::identity(grid);
        let mut lp = Loop::circle([2.0, 2.0, 0.0], 0.6, 128, 2);
        let labels = lp.points().to_vec();
        for s in 0..100u64 {
            let u = stepper.current();
            let ev = SpectralEvaluator::new(&u);
            advance_points(&mut lp, &ev, &v, &stream, 0, s, 1e-3);
            map = advance_label_map(&map, &ev, &v, &stream, 0, s, 1e-3);
            stepper.step().unwrap();
        }
        // loop was not refined (smooth short flow), so indices align
        assert_eq!(lp.len(), labels.len());
        let a_ev = SpectralEvaluator::new(map.displacement());
        let mut rms = 0.0;
        for (p, l) in lp.points().iter().zip(&labels) {
            let back = map.apply(&a_ev, p);
            let mut d2 = 0.0;
            for c in 0..2 {
                let d = minimal_image(back[c] - l[c]);
                d2 += d * d;
            }
            rms += d2;
        }
        let rms = (rms / labels.len() as f64).sqrt();
        assert!(rms < grid.dx(), "rms label mismatch {rms}");
    }

    #[test]
    fn transport_of_identity_map_is_u0() {
        let grid = GridSpec::new(2, 32).unwrap();
        let u0 = random_solenoidal(grid, 3, 45);
        let map = LabelMap::identity(grid);
        let z = ad_top_transport(&map, &SpectralEvaluator::new(&u0));
        let mut d = z.clone();
        d.axpy(-1.0, &u0);
        assert!(l2_norm(&d) < 1e-11 * l2_norm(&u0));
    }

    #[test]
    fn transport_commutes_with_rigid_translation() {
        let grid = GridSpec::new(2, 32).unwrap();
        let u0 = random_solenoidal(grid, 3, 46);
        let c = [0.7, 1.9, 0.0];
        let a = VectorField::from_fn(grid, |_, comp| -c[comp]);
        let map = LabelMap::from_displacement(a);
        let z = ad_top_transport(&map, &SpectralEvaluator::new(&u0));
        let ev = SpectralEvaluator::new(&u0);
        for idx in (0..grid.len()).step_by(53) {
            let x = grid.coords(idx);
            let want = ev.eval(&[wrap(x[0] - c[0]), wrap(x[1] - c[1]), 0.0]);
            let got = z.at(idx);
            for comp in 0..2 {
                assert!((got[comp] - want[comp]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_kelvin_is_conserved() {
        // near-inviscid, noise-free classical Kelvin check
        let grid = GridSpec::new(2, 32).unwrap();
        let u0 = random_solenoidal(grid, 2, 47);
        let v = ModelVariant::new(VariantTag::V1Hamiltonian, 1e-12, BasisTruncation::new(2, 1, 3.0).unwrap()).unwrap();
        let lp = Loop::circle([std::f64::consts::PI / 2.0, std::f64::consts::PI / 2.0, 0.0], 0.5, 256, 2);
        let audit = kelvin_audit(&u0, &v, 3, 1e-3, 0.1, lp, 20).unwrap();
        assert!(audit.max_relative_drift() < 5e-3, "drift {}", audit.max_relative_drift());
    }
}
