//! Small derivative-free optimizers.

use alloc::vec::Vec;

/// Minimizes `f` with the Nelder–Mead simplex method starting at `start`,
/// initial step `step` along each axis. Returns `(argmin, min)`.
pub fn nelder_mead<F>(f: F, start: &[f64], step: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let dim = start.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), eval(start)));
    for d in 0..dim {
        let mut p = start.to_vec();
        p[d] += step;
        let v = eval(&p);
        simplex.push((p, v));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[dim].1);
        if (worst - best).abs() <= tol * (1.0 + best.abs()) {
            let spread = simplex
                .iter()
                .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= libm::sqrt(tol) {
                break;
            }
        }
        let mut centroid = alloc::vec![0.0; dim];
        for (p, _) in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / dim as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let reflected = along(-1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = eval(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = if fr < worst { along(-0.5) } else { along(0.5) };
            let fc = eval(&contracted);
            if fc < worst.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for (p, v) in simplex.iter_mut().skip(1) {
                    for (x, b) in p.iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    *v = eval(p);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (p, v) = simplex.swap_remove(0);
    (p, v)
}

/// Root of a decreasing function on `[lo, hi]` by bisection, assuming
/// `f(lo) > 0 > f(hi)`.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let (x, v) = nelder_mead(
            |p| (p[0] - 1.5).powi(2) + 3.0 * (p[1] + 0.25).powi(2) + 2.0,
            &[0.0, 0.0],
            0.5,
            1e-14,
            2000,
        );
        assert!((x[0] - 1.5).abs() < 1e-5);
        assert!((x[1] + 0.25).abs() < 1e-5);
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn bisection_root() {
        let r = bisect_decreasing(|x| 2.0 - x * x, 0.0, 4.0, 1e-12);
        assert!((r - core::f64::consts::SQRT_2).abs() < 1e-11);
    }
}
