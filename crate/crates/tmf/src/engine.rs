//! Time integration: the deterministic spectral reference solver and the
//! Euler–Maruyama / Heun steppers for the stochastic models.
//!
//! The stochastic workhorse folds the whole per-step increment, advection,
//! line stretching and all noise columns, into one raw physical-space
//! field that is dealiased and Leray-projected once; by linearity this
//! equals projecting every term separately but costs a single transform
//! pass per particle per step.

use rayon::prelude::*;

use crate::basis::{BasisTables, Trig};
use crate::dynamics::{ModelVariant, VariantTag};
use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use crate::spectral::{
    dealias_spectral, derivative_spectral, dft_forward, dft_forward_scalar, dft_inverse,
    dft_inverse_scalar, grad_tensor, leray_project_spectral, GridSpec, ScalarField, SpectralField,
    VectorField,
};

/// Diagnostic switches for a stochastic step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepOptions {
    /// Zero all noise increments; the drift still carries `ηΔξ`, so the
    /// step becomes deterministic viscous transport.
    pub zero_noise: bool,
    /// Drop the line-stretching term `u′⊗ξ` from the V1 drift (the noise
    /// columns are untouched). Used to show the term matters.
    pub drop_stretching: bool,
}

fn check_finite(xi: &VectorField, step: u64, t: f64) -> Result<()> {
    if !xi.is_finite() || xi.max_abs() > 1e8 {
        return Err(Error::BlowUp { step: step as usize, t });
    }
    Ok(())
}

/// Forward transform of `ξ` together with all first derivatives
/// `dξ[d][c] = ∂_d ξ_c` in physical space.
fn spectral_grads(xi: &VectorField) -> (SpectralField, Vec<Vec<ScalarField>>) {
    let n = xi.grid().dim();
    let xh = dft_forward(xi);
    let d = (0..n)
        .map(|d| {
            (0..n)
                .map(|c| dft_inverse_scalar(&derivative_spectral(xh.component(c), d)))
                .collect()
        })
        .collect();
    (xh, d)
}

/// Adds `−ν Σ_α dW_α X̂_α-terms` to `raw` pointwise. With
/// `include_stretch` the V1 column `∇_{X_α}ξ + X_α′⊗ξ` is assembled,
/// otherwise just `∇_{X_α}ξ`. Uses the analytic gradients of the
/// trigonometric basis, so no extra transforms are needed.
fn add_noise_raw(
    raw: &mut [Vec<f64>],
    tables: &BasisTables,
    variant: &ModelVariant,
    xi: &VectorField,
    dxi: &[Vec<ScalarField>],
    dw: &[f64],
    include_stretch: bool,
) {
    let grid = xi.grid();
    let n = grid.dim();
    let len = grid.len();
    let nu = variant.nu();
    let mut fx = vec![0.0f64; len];
    for (alpha, idx) in variant.trunc().indices().iter().enumerate() {
        let w = dw[alpha];
        if w == 0.0 {
            continue;
        }
        let (slot, i) = tables.slot(alpha);
        if slot == usize::MAX {
            // constant field e_i: column is −ν ∂_iξ
            for c in 0..n {
                let g = dxi[i][c].samples();
                let rc = &mut raw[c];
                for p in 0..len {
                    rc[p] -= nu * w * g[p];
                }
            }
            continue;
        }
        let wave = &tables.waves()[slot];
        let f = wave.frame[i];
        // cos mode: trig = cos, d(trig) = −sin; sin mode the reverse
        let (tv, sv, ssign): (&[f64], &[f64], f64) = if idx.trig == Trig::Cos {
            (&wave.cos, &wave.sin, -1.0)
        } else {
            (&wave.sin, &wave.cos, 1.0)
        };
        if include_stretch {
            // (X_α′⊗ξ)_c = d(trig)·⟨f,ξ⟩·k_c
            for p in 0..len {
                let mut s = 0.0;
                for j in 0..n {
                    s += f[j] * xi.component(j).samples()[p];
                }
                fx[p] = s;
            }
        }
        for c in 0..n {
            let rc = &mut raw[c];
            let kc = wave.k[c] as f64;
            for p in 0..len {
                // (∇_{X_α}ξ)_c = trig·Σ_d f_d ∂_dξ_c
                let mut s = 0.0;
                for d in 0..n {
                    s += f[d] * dxi[d][c].samples()[p];
                }
                let mut v = tv[p] * s;
                if include_stretch {
                    v += ssign * sv[p] * kc * fx[p];
                }
                rc[p] -= nu * w * v;
            }
        }
    }
}

/// Adds the drift increment `dt·(−∇_uξ [− u′⊗ξ])` to `raw` pointwise;
/// `du` must be `grad_tensor(u)` when the stretch term is wanted.
fn add_drift_raw(
    raw: &mut [Vec<f64>],
    u: &VectorField,
    du: Option<&[Vec<ScalarField>]>,
    xi: &VectorField,
    dxi: &[Vec<ScalarField>],
    dt: f64,
) {
    let n = u.grid().dim();
    let len = u.grid().len();
    for c in 0..n {
        let rc = &mut raw[c];
        for d in 0..n {
            let ud = u.component(d).samples();
            let g = dxi[d][c].samples();
            for p in 0..len {
                rc[p] -= dt * ud[p] * g[p];
            }
        }
        if let Some(du) = du {
            for j in 0..n {
                let ducj = du[c][j].samples();
                let xj = xi.component(j).samples();
                for p in 0..len {
                    rc[p] -= dt * ducj[p] * xj[p];
                }
            }
        }
    }
}

fn raw_to_spectral(grid: GridSpec, raw: Vec<Vec<f64>>) -> SpectralField {
    let comps = raw
        .into_iter()
        .map(|data| {
            let f = ScalarField::from_samples(grid, data);
            let mut fh = dft_forward_scalar(&f);
            dealias_spectral(&mut fh);
            fh
        })
        .collect();
    SpectralField::from_components(comps)
}

/// One fused Euler–Maruyama step for V1 or V2: returns the projected,
/// dealiased `ξ + drift·dt + noise` including the `ηΔξ·dt` viscous term
/// applied in spectral space.
fn em_step_projected(
    variant: &ModelVariant,
    tables: &BasisTables,
    u: &VectorField,
    du: Option<&[Vec<ScalarField>]>,
    xi: &VectorField,
    dt: f64,
    dw: &[f64],
    opts: StepOptions,
) -> VectorField {
    let grid = xi.grid();
    let n = grid.dim();
    let (xh, dxi) = spectral_grads(xi);
    let mut raw = vec![vec![0.0f64; grid.len()]; n];
    add_drift_raw(&mut raw, u, du, xi, &dxi, dt);
    if !opts.zero_noise {
        add_noise_raw(
            &mut raw,
            tables,
            variant,
            xi,
            &dxi,
            dw,
            variant.tag() == VariantTag::V1Hamiltonian,
        );
    }
    let mut gh = raw_to_spectral(grid, raw);
    let eta_dt = variant.eta() * dt;
    for c in 0..n {
        let src = xh.component(c).coefficients();
        let dst = gh.component_mut(c).coefficients_mut();
        grid.for_each_mode(|idx, _, k2| {
            dst[idx] += (1.0 - eta_dt * k2) * src[idx];
        });
    }
    for c in 0..n {
        dealias_spectral(gh.component_mut(c));
    }
    leray_project_spectral(&mut gh);
    dft_inverse(&gh)
}

/// Euler–Maruyama step for the raw (non-solenoidal) model: only the
/// advective drift term is projected, the noise columns are not.
fn em_step_raw(
    variant: &ModelVariant,
    tables: &BasisTables,
    u: &VectorField,
    xi: &VectorField,
    dt: f64,
    dw: &[f64],
    opts: StepOptions,
) -> Result<VectorField> {
    let drift = variant.ito_drift(u, xi)?;
    let mut out = xi.clone();
    out.axpy(dt, &drift);
    if !opts.zero_noise {
        let grid = xi.grid();
        let (_, dxi) = spectral_grads(xi);
        let mut raw = vec![vec![0.0f64; grid.len()]; grid.dim()];
        add_noise_raw(&mut raw, tables, variant, xi, &dxi, dw, false);
        let gh = raw_to_spectral(grid, raw);
        out.axpy(1.0, &dft_inverse(&gh));
    }
    Ok(out)
}

/// Projected Stratonovich increment `ad⊤(u).ξ·dt + Σ columns·dW` for the
/// Heun predictor–corrector (no viscous term; the Ito correction emerges
/// from the scheme itself).
fn strat_increment_v1(
    variant: &ModelVariant,
    tables: &BasisTables,
    u: &VectorField,
    du: &[Vec<ScalarField>],
    xi: &VectorField,
    dt: f64,
    dw: &[f64],
    opts: StepOptions,
) -> VectorField {
    let grid = xi.grid();
    let (_, dxi) = spectral_grads(xi);
    let mut raw = vec![vec![0.0f64; grid.len()]; grid.dim()];
    add_drift_raw(&mut raw, u, Some(du), xi, &dxi, dt);
    if !opts.zero_noise {
        add_noise_raw(&mut raw, tables, variant, xi, &dxi, dw, true);
    }
    let mut gh = raw_to_spectral(grid, raw);
    leray_project_spectral(&mut gh);
    dft_inverse(&gh)
}

fn project_field(v: &VectorField) -> VectorField {
    let mut vh = dft_forward(v);
    for c in 0..v.grid().dim() {
        dealias_spectral(vh.component_mut(c));
    }
    leray_project_spectral(&mut vh);
    dft_inverse(&vh)
}

/// Ensemble of stochastic momentum trajectories sharing one noise stream.
/// Each particle owns a stable noise identity so that permuting particles
/// together with their identities reproduces the permuted fields bitwise.
#[derive(Debug, Clone)]
pub struct Ensemble {
    variant: ModelVariant,
    stream: NoiseStream,
    tables: BasisTables,
    particles: Vec<VectorField>,
    noise_ids: Vec<u64>,
    t: f64,
    step: u64,
}

impl Ensemble {
    /// All particles start from `u0` (deterministic initial condition).
    pub fn new(variant: ModelVariant, seed: u64, u0: &VectorField, count: usize) -> Self {
        assert!(count > 0, "empty ensemble");
        assert_eq!(u0.grid().dim(), variant.trunc().dim(), "dimension mismatch");
        let tables = BasisTables::new(u0.grid(), variant.trunc());
        Self {
            variant,
            stream: NoiseStream::new(seed),
            tables,
            particles: vec![u0.clone(); count],
            noise_ids: (0..count as u64).collect(),
            t: 0.0,
            step: 0,
        }
    }

    pub fn variant(&self) -> &ModelVariant {
        &self.variant
    }

    pub fn particles(&self) -> &[VectorField] {
        &self.particles
    }

    pub fn noise_ids(&self) -> &[u64] {
        &self.noise_ids
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Empirical mean `u^N = (1/N)Σξ^i`, accumulated in noise-identity
    /// order so the result is bitwise independent of both the worker
    /// count and the particle storage order.
    pub fn empirical_mean(&self) -> VectorField {
        let mut order: Vec<usize> = (0..self.particles.len()).collect();
        order.sort_by_key(|&i| self.noise_ids[i]);
        let mut acc = self.particles[order[0]].clone();
        for &i in &order[1..] {
            acc.axpy(1.0, &self.particles[i]);
        }
        acc.scale(1.0 / self.particles.len() as f64);
        acc
    }

    /// Reorder particles together with their noise identities.
    pub fn permute(&mut self, perm: &[usize]) {
        assert_eq!(perm.len(), self.particles.len());
        self.particles = perm.iter().map(|&i| self.particles[i].clone()).collect();
        self.noise_ids = perm.iter().map(|&i| self.noise_ids[i]).collect();
    }

    fn advance(&mut self, u: &VectorField, dt: f64, opts: StepOptions) -> Result<()> {
        let du = if self.variant.tag() == VariantTag::V1Hamiltonian && !opts.drop_stretching {
            Some(grad_tensor(u))
        } else {
            None
        };
        let n_alpha = self.variant.trunc().len();
        let step = self.step;
        let t = self.t;
        let new: Result<Vec<VectorField>> = self
            .particles
            .par_iter()
            .zip(self.noise_ids.par_iter())
            .map(|(xi, id)| {
                let dw = self.stream.increments(*id, step, n_alpha, dt);
                let out = match self.variant.tag() {
                    VariantTag::H17Raw => {
                        em_step_raw(&self.variant, &self.tables, u, xi, dt, &dw, opts)?
                    }
                    _ => em_step_projected(
                        &self.variant,
                        &self.tables,
                        u,
                        du.as_deref(),
                        xi,
                        dt,
                        &dw,
                        opts,
                    ),
                };
                check_finite(&out, step, t + dt)?;
                Ok(out)
            })
            .collect();
        self.particles = new?;
        self.t += dt;
        self.step += 1;
        Ok(())
    }

    /// Euler–Maruyama step with the empirical mean as the interaction
    /// field (IPS coupling).
    pub fn step_ips(&mut self, dt: f64, opts: StepOptions) -> Result<()> {
        let u = self.empirical_mean();
        self.advance(&u, dt, opts)
    }

    /// Euler–Maruyama step with a prescribed mean field; trajectories are
    /// then mutually independent.
    pub fn step_meanfield(&mut self, u: &VectorField, dt: f64, opts: StepOptions) -> Result<()> {
        self.advance(u, dt, opts)
    }

    /// Heun (Stratonovich) predictor–corrector for the Hamiltonian model
    /// with prescribed mean field at the start and end of the step.
    pub fn step_heun_v1(
        &mut self,
        u_now: &VectorField,
        u_next: &VectorField,
        dt: f64,
        opts: StepOptions,
    ) -> Result<()> {
        assert_eq!(self.variant.tag(), VariantTag::V1Hamiltonian, "Heun stepper is V1-only");
        let du_now = grad_tensor(u_now);
        let du_next = grad_tensor(u_next);
        let n_alpha = self.variant.trunc().len();
        let step = self.step;
        let t = self.t;
        let new: Result<Vec<VectorField>> = self
            .particles
            .par_iter()
            .zip(self.noise_ids.par_iter())
            .map(|(xi, id)| {
                let dw = self.stream.increments(*id, step, n_alpha, dt);
                let g1 =
                    strat_increment_v1(&self.variant, &self.tables, u_now, &du_now, xi, dt, &dw, opts);
                let mut pred = xi.clone();
                pred.axpy(1.0, &g1);
                let g2 = strat_increment_v1(
                    &self.variant,
                    &self.tables,
                    u_next,
                    &du_next,
                    &pred,
                    dt,
                    &dw,
                    opts,
                );
                let mut out = xi.clone();
                out.axpy(0.5, &g1);
                out.axpy(0.5, &g2);
                let out = project_field(&out);
                check_finite(&out, step, t + dt)?;
                Ok(out)
            })
            .collect();
        self.particles = new?;
        self.t += dt;
        self.step += 1;
        Ok(())
    }
}

/// Deterministic pseudo-spectral Navier–Stokes stepper: classical RK4 on
/// the projected nonlinearity with the viscous semigroup `exp(ηΔτ)`
/// applied exactly as an integrating factor.
#[derive(Debug, Clone)]
pub struct ReferenceStepper {
    grid: GridSpec,
    eta: f64,
    dt: f64,
    uhat: SpectralField,
    ehalf: Vec<f64>,
    t: f64,
    step: u64,
    energy0: f64,
    pub cfl_max: f64,
}

impl ReferenceStepper {
    pub fn new(u0: &VectorField, eta: f64, dt: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::Config { key: "eta".into(), reason: format!("viscosity {eta} must be non-negative") });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config { key: "dt".into(), reason: format!("time step {dt} must be positive") });
        }
        let grid = u0.grid();
        let mut uhat = dft_forward(u0);
        for c in 0..grid.dim() {
            dealias_spectral(uhat.component_mut(c));
        }
        leray_project_spectral(&mut uhat);
        let mut ehalf = vec![0.0f64; grid.len()];
        grid.for_each_mode(|idx, _, k2| {
            ehalf[idx] = (-eta * k2 * dt / 2.0).exp();
        });
        let energy0 = spectral_energy(&uhat);
        Ok(Self { grid, eta, dt, uhat, ehalf, t: 0.0, step: 0, energy0, cfl_max: 0.0 })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn current(&self) -> VectorField {
        dft_inverse(&self.uhat)
    }

    /// `N(û) = −P(u·∇u)` dealiased, in spectral space.
    fn nonlinear(&self, uh: &SpectralField) -> SpectralField {
        let n = self.grid.dim();
        let u = dft_inverse(uh);
        let du: Vec<Vec<ScalarField>> = (0..n)
            .map(|d| {
                (0..n)
                    .map(|c| dft_inverse_scalar(&derivative_spectral(uh.component(c), d)))
                    .collect()
            })
            .collect();
        let mut raw = vec![vec![0.0f64; self.grid.len()]; n];
        for c in 0..n {
            let rc = &mut raw[c];
            for d in 0..n {
                let ud = u.component(d).samples();
                let g = du[d][c].samples();
                for p in 0..self.grid.len() {
                    rc[p] -= ud[p] * g[p];
                }
            }
        }
        let mut nh = raw_to_spectral(self.grid, raw);
        leray_project_spectral(&mut nh);
        nh
    }

    fn apply_ehalf(&self, f: &mut SpectralField, times: u32) {
        for c in 0..self.grid.dim() {
            let data = f.component_mut(c).coefficients_mut();
            for (v, e) in data.iter_mut().zip(&self.ehalf) {
                *v *= e.powi(times as i32);
            }
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt;
        let k1 = self.nonlinear(&self.uhat);

        let mut a = self.uhat.clone();
        a.axpy(dt / 2.0, &k1);
        self.apply_ehalf(&mut a, 1);
        let k2 = self.nonlinear(&a);

        let mut b = self.uhat.clone();
        self.apply_ehalf(&mut b, 1);
        b.axpy(dt / 2.0, &k2);
        let k3 = self.nonlinear(&b);

        let mut c = self.uhat.clone();
        self.apply_ehalf(&mut c, 1);
        c.axpy(dt, &k3);
        self.apply_ehalf(&mut c, 1);
        let k4 = self.nonlinear(&c);

        let mut k1e = k1;
        self.apply_ehalf(&mut k1e, 2);
        let mut k23 = k2;
        k23.axpy(1.0, &k3);
        self.apply_ehalf(&mut k23, 1);

        let mut unew = self.uhat.clone();
        self.apply_ehalf(&mut unew, 2);
        unew.axpy(dt / 6.0, &k1e);
        unew.axpy(dt / 3.0, &k23);
        unew.axpy(dt / 6.0, &k4);

        let energy = spectral_energy(&unew);
        if !energy.is_finite() || energy > 10.0 * self.energy0.max(1e-300) {
            return Err(Error::BlowUp { step: self.step as usize, t: self.t + dt });
        }
        self.uhat = unew;
        self.t += dt;
        self.step += 1;

        let u = self.current();
        let cfl = dt * u.max_abs() / self.grid.dx();
        if cfl > self.cfl_max {
            self.cfl_max = cfl;
        }
        Ok(())
    }
}

fn spectral_energy(uh: &SpectralField) -> f64 {
    let mut s = 0.0;
    for c in uh.components() {
        for v in c.coefficients() {
            s += v.norm_sqr();
        }
    }
    s
}

/// Stored trajectory of the deterministic reference solver.
#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub times: Vec<f64>,
    pub fields: Vec<VectorField>,
    pub eta: f64,
    pub dt: f64,
    pub cfl_max: f64,
}

impl ReferenceRun {
    pub fn final_field(&self) -> &VectorField {
        self.fields.last().expect("reference run stores at least the initial field")
    }
}

/// Integrates the viscous equations from `u0` to `t_final`, storing the
/// state every `store_every` steps (and always the initial and final
/// states).
pub fn run_reference(
    u0: &VectorField,
    eta: f64,
    dt: f64,
    t_final: f64,
    store_every: usize,
) -> Result<ReferenceRun> {
    let steps = (t_final / dt).round() as usize;
    if steps == 0 {
        return Err(Error::Config { key: "t_final".into(), reason: format!("horizon {t_final} shorter than one step {dt}") });
    }
    let every = store_every.max(1);
    let mut stepper = ReferenceStepper::new(u0, eta, dt)?;
    let mut times = vec![0.0];
    let mut fields = vec![stepper.current()];
    for s in 1..=steps {
        stepper.step()?;
        if s % every == 0 || s == steps {
            times.push(stepper.t());
            fields.push(stepper.current());
        }
    }
    Ok(ReferenceRun { times, fields, eta, dt, cfl_max: stepper.cfl_max })
}

/// Outcome of the fixed-point iteration for the self-consistency map
/// `Φ(u)_t = E[ζ_t]` with `ζ` the label-map transported initial momentum.
#[derive(Debug, Clone)]
pub struct PicardReport {
    /// `max_t ‖u^{(m+1)}_t − u^{(m)}_t‖` per iteration.
    pub residuals: Vec<f64>,
    pub tol: f64,
    pub converged: bool,
    /// Mean field at the final time after the last iteration.
    pub final_mean: VectorField,
}

/// Fixed-point iteration for the mean field: each sweep drives `m_traj`
/// independent back-to-labels maps with the current trajectory `u^{(m)}`
/// and shared counter-based noise, transports `u0` through each, and
/// averages into the next trajectory. Starts from the heat-flow evolution
/// of `u0` unless an initial trajectory (one field per step, including
/// `t = 0`) is supplied.
///
/// The tolerance is `max(0.02‖u0‖, 3·stderr of the final-time mean)`.
/// Three consecutive non-decreasing residuals abort with a
/// non-convergence error; running out of iterations reports
/// `converged = false`.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterate(
    u0: &VectorField,
    variant: &ModelVariant,
    seed: u64,
    m_traj: usize,
    dt: f64,
    t_final: f64,
    max_iters: usize,
    init: Option<Vec<VectorField>>,
) -> Result<PicardReport> {
    use crate::lagrangian::{ad_top_transport, advance_label_map, LabelMap, SpectralEvaluator};

    let grid = u0.grid();
    let n = grid.dim();
    let steps = (t_final / dt).round() as usize;
    if steps == 0 {
        return Err(Error::Config { key: "t_final".into(), reason: format!("horizon {t_final} shorter than one step {dt}") });
    }
    let u0 = project_field(u0);
    let u0_norm = crate::spectral::l2_norm(&u0);
    let u0_ev = SpectralEvaluator::new(&u0);
    let stream = NoiseStream::new(seed);

    // u^(0): heat flow e^{ηΔt} u0, or the supplied trajectory
    let mut traj: Vec<VectorField> = match init {
        Some(t) => {
            assert_eq!(t.len(), steps + 1, "initial trajectory must cover every step");
            t
        }
        None => {
            let uhat0 = dft_forward(&u0);
            (0..=steps)
                .map(|s| {
                    let mut uh = uhat0.clone();
                    let tau = variant.eta() * s as f64 * dt;
                    for c in 0..n {
                        let data = uh.component_mut(c).coefficients_mut();
                        grid.for_each_mode(|idx, _, k2| {
                            data[idx] *= (-tau * k2).exp();
                        });
                    }
                    dft_inverse(&uh)
                })
                .collect()
        }
    };

    let mut residuals: Vec<f64> = Vec::new();
    let mut tol = 0.02 * u0_norm;
    let mut converged = false;
    for _iter in 0..max_iters {
        let evs: Vec<SpectralEvaluator> =
            traj[..steps].iter().map(SpectralEvaluator::new).collect();
        // per-trajectory transported fields at every step, order preserved
        let zetas: Vec<Vec<VectorField>> = (0..m_traj as u64)
            .into_par_iter()
            .map(|j| {
                let mut map = LabelMap::identity(grid);
                let mut out = Vec::with_capacity(steps);
                for (s, ev) in evs.iter().enumerate() {
                    map = advance_label_map(&map, ev, variant, &stream, j, s as u64, dt);
                    out.push(ad_top_transport(&map, &u0_ev));
                }
                out
            })
            .collect();
        let mut new_traj = Vec::with_capacity(steps + 1);
        new_traj.push(u0.clone());
        for s in 0..steps {
            let mut acc = zetas[0][s].clone();
            for z in zetas.iter().skip(1) {
                acc.axpy(1.0, &z[s]);
            }
            acc.scale(1.0 / m_traj as f64);
            new_traj.push(acc);
        }
        // MC standard error of the final-time mean
        if m_traj > 1 {
            let mean_t = &new_traj[steps];
            let var: f64 = zetas
                .iter()
                .map(|z| {
                    let mut d = z[steps - 1].clone();
                    d.axpy(-1.0, mean_t);
                    crate::spectral::inner_product_l2(&d, &d)
                })
                .sum::<f64>()
                / (m_traj as f64 - 1.0);
            tol = (0.02 * u0_norm).max(3.0 * (var / m_traj as f64).sqrt());
        }
        let res = traj
            .iter()
            .zip(&new_traj)
            .map(|(a, b)| {
                let mut d = a.clone();
                d.axpy(-1.0, b);
                crate::spectral::l2_norm(&d)
            })
            .fold(0.0, f64::max);
        residuals.push(res);
        traj = new_traj;
        if res <= tol {
            converged = true;
            break;
        }
        if residuals.len() >= 3 {
            let k = residuals.len();
            if residuals[k - 1] >= residuals[k - 2] && residuals[k - 2] >= residuals[k - 3] {
                return Err(Error::NoConvergence(format!(
                    "residuals stopped decreasing: {:?}",
                    &residuals[k - 3..]
                )));
            }
        }
    }
    Ok(PicardReport { residuals, tol, converged, final_mean: traj[steps].clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisTruncation;
    use crate::spectral::fields::{random_solenoidal, taylor_green};
    use crate::spectral::{divergence_norm, inner_product_l2, l2_norm};

    fn rel_err(a: &VectorField, b: &VectorField) -> f64 {
        let mut d = a.clone();
        d.axpy(-1.0, b);
        l2_norm(&d) / l2_norm(b).max(1e-300)
    }

    fn v1(eta: f64, kmax: i64) -> ModelVariant {
        ModelVariant::new(VariantTag::V1Hamiltonian, eta, BasisTruncation::new(2, kmax, 3.0).unwrap()).unwrap()
    }

    #[test]
    fn reference_taylor_green_is_exact() {
        // TG's nonlinearity is annihilated by P, so the integrating-factor
        // scheme reproduces e^{−2ηt} to roundoff
        let grid = GridSpec::new(2, 32).unwrap();
        let u0 = taylor_green(grid);
        let eta = 0.05;
        let run = run_reference(&u0, eta, 1e-3, 0.2, 200).unwrap();
        let mut expect = u0.clone();
        expect.scale((-2.0 * eta * 0.2f64).exp());
        assert!(rel_err(run.final_field(), &expect) < 1e-12);
    }

    #[test]
    fn reference_conserves_energy_without_viscosity() {
        let grid = GridSpec::new(2, 32).unwrap();
        let u0 = random_solenoidal(grid, 3, 21);
        let run = run_reference(&u0, 0.0, 2e-3, 0.5, 250).unwrap();
        let e0 = inner_product_l2(&u0, &u0);
        let ef = inner_product_l2(run.final_field(), run.final_field());
        assert!((ef - e0).abs() < 1e-8 * e0, "rel energy drift {}", (ef - e0).abs() / e0);
    }

    #[test]
    fn reference_zero_stays_zero_and_divergence_clean() {
        let grid = GridSpec::new(2, 32).unwrap();
        let run = run_reference(&VectorField::zeros(grid), 0.05, 1e-2, 0.1, 1).unwrap();
        for f in &run.fields {
            assert!(l2_norm(f) == 0.0);
        }
        let u0 = random_solenoidal(grid, 4, 22);
        let run = run_reference(&u0, 0.02, 1e-3, 0.05, 10).unwrap();
        for f in &run.fields {
            assert!(divergence_norm(f) < 1e-10);
        }
    }

    #[test]
    fn reference_energy_decreases_with_viscosity() {
        let grid = GridSpec::new(2, 32).unwrap();
        let u0 = random_solenoidal(grid, 3, 23);
        let run = run_reference(&u0, 0.05, 1e-3, 0.1, 20).unwrap();
        let mut last = f64::INFINITY;
        for f in &run.fields {
            let e = inner_product_l2(f, f);
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn fused_step_matches_operator_composition() {
        // one EM step assembled pointwise must equal the slow path
        // ξ + dt·ito_drift + Σ_α column·dW followed by the same
        // dealias-and-project scrub
        let grid = GridSpec::new(2, 32).unwrap();
        let xi = random_solenoidal(grid, 3, 24);
        let u = random_solenoidal(grid, 3, 25);
        let dt = 1e-3;
        for tag in [VariantTag::V1Hamiltonian, VariantTag::V2Projected] {
            let m = ModelVariant::new(tag, 0.05, BasisTruncation::new(2, 2, 3.0).unwrap()).unwrap();
            let tables = BasisTables::new(grid, m.trunc());
            let stream = NoiseStream::new(99);
            let dw = stream.increments(0, 0, m.trunc().len(), dt);
            let du = grad_tensor(&u);
            let du_opt = if tag == VariantTag::V1Hamiltonian { Some(&du[..]) } else { None };
            let fast = em_step_projected(&m, &tables, &u, du_opt, &xi, dt, &dw, StepOptions::default());
            let mut slow = xi.clone();
            slow.axpy(dt, &m.ito_drift(&u, &xi).unwrap());
            for (alpha, w) in dw.iter().enumerate() {
                slow.axpy(*w, &m.diffusion_column(alpha, &xi).unwrap());
            }
            let slow = project_field(&slow);
            assert!(rel_err(&fast, &slow) < 1e-12, "{tag:?}: {}", rel_err(&fast, &slow));
        }
    }

    #[test]
    fn zero_noise_ips_tracks_reference() {
        let grid = GridSpec::new(2, 32).unwrap();
        let u0 = taylor_green(grid);
        let eta = 0.05;
        let dt = 1e-3;
        let mut ens = Ensemble::new(v1(eta, 2), 7, &u0, 2);
        let opts = StepOptions { zero_noise: true, ..Default::default() };
        for _ in 0..100 {
            ens.step_ips(dt, opts).unwrap();
        }
        let run = run_reference(&u0, eta, dt, 0.1, 100).unwrap();
        let err = rel_err(&ens.empirical_mean(), run.final_field());
        assert!(err < 1e-4, "err {err}");
    }

    #[test]
    fn zero_noise_meanfield_tracks_prescribed_reference() {
        let grid = GridSpec::new(2, 32).unwrap();
        let u0 = random_solenoidal(grid, 2, 26);
        let eta = 0.05;
        let dt = 1e-3;
        let mut stepper = ReferenceStepper::new(&u0, eta, dt).unwrap();
        let mut ens = Ensemble::new(v1(eta, 2), 11, &stepper.current(), 1);
        let opts = StepOptions { zero_noise: true, ..Default::default() };
        for _ in 0..100 {
            let u = stepper.current();
            ens.step_meanfield(&u, dt, opts).unwrap();
            stepper.step().unwrap();
        }
        let err = rel_err(&ens.particles()[0], &stepper.current());
        assert!(err < 5e-3, "err {err}");
    }

    #[test]
    fn heun_without_noise_is_second_order() {
        let grid = GridSpec::new(2, 32).unwrap();
        let u0 = random_solenoidal(grid, 2, 27);
        let opts = StepOptions { zero_noise: true, ..Default::default() };
        let mut errs = Vec::new();
        for &dt in &[4e-3f64, 2e-3] {
            let steps = (0.1 / dt).round() as usize;
            let mut stepper = ReferenceStepper::new(&u0, 0.0, dt).unwrap();
            let mut ens = Ensemble::new(v1(0.05, 1), 13, &stepper.current(), 1);
            for _ in 0..steps {
                let u_now = stepper.current();
                stepper.step().unwrap();
                let u_next = stepper.current();
                ens.step_heun_v1(&u_now, &u_next, dt, opts).unwrap();
            }
            errs.push(rel_err(&ens.particles()[0], &stepper.current()));
        }
        // halving dt should cut the deterministic RK2 error about 4x
        let ratio = errs[0] / errs[1];
        assert!(ratio > 2.5, "errs {errs:?}, ratio {ratio}");
        assert!(errs[1] < 1e-4, "errs {errs:?}");
    }

    #[test]
    fn exchangeability_is_bitwise() {
        let grid = GridSpec::new(2, 16).unwrap();
        let u0 = taylor_green(grid);
        let mut a = Ensemble::new(v1(0.05, 2), 5, &u0, 3);
        let dt = 1e-3;
        for _ in 0..3 {
            a.step_ips(dt, StepOptions::default()).unwrap();
        }
        let mut b = a.clone();
        let perm = [2usize, 0, 1];
        b.permute(&perm);
        a.step_ips(dt, StepOptions::default()).unwrap();
        b.step_ips(dt, StepOptions::default()).unwrap();
        for (bi, &src) in perm.iter().enumerate() {
            for c in 0..2 {
                assert_eq!(
                    b.particles()[bi].component(c).samples(),
                    a.particles()[src].component(c).samples(),
                    "particle {bi} component {c} not bitwise equal"
                );
            }
        }
    }

    #[test]
    fn empirical_jensen_holds_exactly() {
        let grid = GridSpec::new(2, 16).unwrap();
        let u0 = taylor_green(grid);
        let mut ens = Ensemble::new(v1(0.05, 2), 17, &u0, 4);
        for _ in 0..10 {
            ens.step_ips(1e-3, StepOptions::default()).unwrap();
            let mean = ens.empirical_mean();
            let e_mean = 0.5 * inner_product_l2(&mean, &mean);
            let e_s: f64 = ens
                .particles()
                .iter()
                .map(|xi| 0.5 * inner_product_l2(xi, xi))
                .sum::<f64>()
                / ens.len() as f64;
            assert!(e_s >= e_mean, "Jensen violated: {e_s} < {e_mean}");
        }
    }

    #[test]
    fn same_seed_is_bitwise_deterministic() {
        let grid = GridSpec::new(2, 16).unwrap();
        let u0 = taylor_green(grid);
        let run = |seed| {
            let mut ens = Ensemble::new(v1(0.05, 2), seed, &u0, 2);
            for _ in 0..5 {
                ens.step_ips(1e-3, StepOptions::default()).unwrap();
            }
            ens
        };
        let a = run(123);
        let b = run(123);
        let c = run(124);
        for i in 0..2 {
            for ch in 0..2 {
                assert_eq!(a.particles()[i].component(ch).samples(), b.particles()[i].component(ch).samples());
            }
        }
        assert!(rel_err(&a.particles()[0], &c.particles()[0]) > 1e-8);
    }

    #[test]
    fn particles_stay_solenoidal_under_noise() {
        let grid = GridSpec::new(2, 16).unwrap();
        let u0 = taylor_green(grid);
        for tag in [VariantTag::V1Hamiltonian, VariantTag::V2Projected] {
            let m = ModelVariant::new(tag, 0.05, BasisTruncation::new(2, 2, 3.0).unwrap()).unwrap();
            let mut ens = Ensemble::new(m, 29, &u0, 2);
            for _ in 0..20 {
                ens.step_ips(1e-3, StepOptions::default()).unwrap();
            }
            for xi in ens.particles() {
                assert!(divergence_norm(xi) < 1e-8 * l2_norm(xi));
            }
        }
    }

    #[test]
    fn picard_zero_field_is_a_fixed_point() {
        let grid = GridSpec::new(2, 16).unwrap();
        let rep = picard_iterate(&VectorField::zeros(grid), &v1(0.05, 1), 3, 4, 5e-3, 0.05, 3, None).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.residuals.len(), 1);
        assert!(rep.residuals[0] == 0.0);
        assert!(l2_norm(&rep.final_mean) == 0.0);
    }

    #[test]
    fn picard_taylor_green_converges_near_reference() {
        let grid = GridSpec::new(2, 16).unwrap();
        let u0 = taylor_green(grid);
        let dt = 5e-3;
        let t_final = 0.05;
        let rep = picard_iterate(&u0, &v1(0.05, 2), 7, 8, dt, t_final, 6, None).unwrap();
        assert!(rep.converged, "residuals {:?} tol {}", rep.residuals, rep.tol);
        let run = run_reference(&u0, 0.05, dt, t_final, 100).unwrap();
        let err = rel_err(&rep.final_mean, run.final_field());
        assert!(err < 0.1, "err {err}");
    }

    #[test]
    fn picard_seeded_with_reference_is_consistent() {
        let grid = GridSpec::new(2, 16).unwrap();
        let u0 = taylor_green(grid);
        let dt = 5e-3;
        let run = run_reference(&u0, 0.05, dt, 0.05, 1).unwrap();
        let rep = picard_iterate(&u0, &v1(0.05, 2), 9, 8, dt, 0.05, 2, Some(run.fields.clone())).unwrap();
        assert!(rep.converged, "residuals {:?} tol {}", rep.residuals, rep.tol);
        assert_eq!(rep.residuals.len(), 1);
    }

    #[test]
    fn blow_up_is_reported() {
        let grid = GridSpec::new(2, 16).unwrap();
        let u0 = taylor_green(grid);
        // absurd time step makes the explicit viscous term unstable
        let mut ens = Ensemble::new(v1(5.0, 1), 31, &u0, 1);
        let mut failed = false;
        for _ in 0..200 {
            if let Err(Error::BlowUp { .. }) = ens.step_ips(1.0, StepOptions { zero_noise: true, ..Default::default() }) {
                failed = true;
                break;
            }
        }
        assert!(failed, "expected blow-up detection");
    }
}
