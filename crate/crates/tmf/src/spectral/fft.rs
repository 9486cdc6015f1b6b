//! n-dimensional complex FFT on flat row-major arrays, built from 1-d
//! rustfft plans cached per thread.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn with_plan(m: usize, inverse: bool, f: impl FnOnce(&Arc<dyn Fft<f64>>)) {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        let plan = cache
            .entry((m, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(m)
                } else {
                    planner.plan_fft_forward(m)
                }
            })
            .clone();
        drop(guard);
        f(&plan);
    });
}

/// In-place n-d transform. Forward is unnormalized; inverse divides by
/// `m^n` so that `inverse(forward(x)) = x`.
pub fn fft_nd(grid: GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = grid.dim();
    let m = grid.points_per_axis();
    let len = grid.len();
    assert_eq!(data.len(), len);

    with_plan(m, inverse, |plan| {
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        for axis in 0..n {
            let stride = m.pow((n - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(m) {
                    plan.process(chunk);
                }
            } else {
                let block = stride * m;
                for b in 0..len / block {
                    for off in 0..stride {
                        let start = b * block + off;
                        for j in 0..m {
                            line[j] = data[start + j * stride];
                        }
                        plan.process(&mut line);
                        for j in 0..m {
                            data[start + j * stride] = line[j];
                        }
                    }
                }
            }
        }
    });

    if inverse {
        let scale = 1.0 / len as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}
