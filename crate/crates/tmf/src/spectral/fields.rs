//! Ready-made initial conditions and reproducible random test fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{dealias, leray_project, GridSpec, ScalarField, VectorField};

/// Taylor–Green vortex. In 2-d this is the exact decaying solution
/// `u(t) = e^{-2ηt} u(0)` of the viscous equations; in 3-d it is the
/// classic vortex initial condition.
pub fn taylor_green(grid: GridSpec) -> VectorField {
    match grid.dim() {
        2 => VectorField::from_fn(grid, |x, c| match c {
            0 => x[0].sin() * x[1].cos(),
            _ => -(x[0].cos()) * x[1].sin(),
        }),
        _ => VectorField::from_fn(grid, |x, c| match c {
            0 => x[0].sin() * x[1].cos() * x[2].cos(),
            1 => -(x[0].cos()) * x[1].sin() * x[2].cos(),
            _ => 0.0,
        }),
    }
}

fn random_trig_scalar(grid: GridSpec, kmax: i64, rng: &mut ChaCha12Rng) -> ScalarField {
    let n = grid.dim();
    // enumerate a half-space of wavevectors with |k|_inf <= kmax
    let mut modes: Vec<[i64; 3]> = Vec::new();
    let range = -kmax..=kmax;
    for k0 in range.clone() {
        for k1 in range.clone() {
            if n == 2 {
                let k = [k0, k1, 0];
                if is_half_space(&k, 2) {
                    modes.push(k);
                }
            } else {
                for k2 in range.clone() {
                    let k = [k0, k1, k2];
                    if is_half_space(&k, 3) {
                        modes.push(k);
                    }
                }
            }
        }
    }
    let amps: Vec<(f64, f64)> = modes
        .iter()
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ScalarField::from_fn(grid, |x| {
        let mut v = 0.0;
        for (k, (a, b)) in modes.iter().zip(&amps) {
            let phase = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
            v += a * phase.cos() + b * phase.sin();
        }
        v
    })
}

fn is_half_space(k: &[i64; 3], n: usize) -> bool {
    for a in 0..n {
        if k[a] > 0 {
            return true;
        }
        if k[a] < 0 {
            return false;
        }
    }
    false
}

/// Reproducible random band-limited scalar field with modes `0 < |k|_inf ≤
/// kmax`, normalized to unit L² norm.
pub fn random_scalar(grid: GridSpec, kmax: i64, seed: u64) -> ScalarField {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5ca1_ab1e);
    let mut f = random_trig_scalar(grid, kmax, &mut rng);
    let norm = super::l2_norm_scalar(&f);
    if norm > 0.0 {
        f.scale(1.0 / norm);
    }
    f
}

/// Reproducible random band-limited vector field (not solenoidal),
/// normalized to unit L² norm.
pub fn random_vector(grid: GridSpec, kmax: i64, seed: u64) -> VectorField {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let comps = (0..grid.dim())
        .map(|c| random_trig_scalar(grid, kmax, &mut ChaCha12Rng::seed_from_u64(rng.gen::<u64>() ^ c as u64)))
        .collect();
    let mut v = VectorField::from_components(comps);
    let norm = super::l2_norm(&v);
    if norm > 0.0 {
        v.scale(1.0 / norm);
    }
    v
}

/// Reproducible random band-limited solenoidal field with unit L² norm.
pub fn random_solenoidal(grid: GridSpec, kmax: i64, seed: u64) -> VectorField {
    let mut v = leray_project(&dealias(&random_vector(grid, kmax, seed)));
    let norm = super::l2_norm(&v);
    if norm > 0.0 {
        v.scale(1.0 / norm);
    }
    v
}
