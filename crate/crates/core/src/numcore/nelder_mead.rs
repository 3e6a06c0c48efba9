//! Nelder–Mead simplex minimization with random restarts.

use super::RngStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadSettings {
    pub restarts: usize,
    /// Stop once the largest vertex-to-vertex distance falls below this.
    pub diameter_tol: f64,
    /// Evaluation budget per run is `evals_per_dim · d`.
    pub evals_per_dim: usize,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        NelderMeadSettings { restarts: 3, diameter_tol: 1e-6, evals_per_dim: 500 }
    }
}

/// Minimizes `objective` starting from `start` with the default settings:
/// one run from `start`, then three restarts offset from the incumbent by a
/// random direction of length `scale`. The best point seen is returned, so
/// the result is never worse than `start`.
pub fn minimize_nd<F>(objective: F, start: &[f64], scale: f64, rng: &mut RngStream) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    minimize_nd_with(objective, start, scale, rng, NelderMeadSettings::default())
}

pub fn minimize_nd_with<F>(
    mut objective: F,
    start: &[f64],
    scale: f64,
    rng: &mut RngStream,
    settings: NelderMeadSettings,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(format!("simplex scale must be positive, got {scale}")));
    }
    let mut eval = |x: &[f64]| -> Result<f64> {
        let v = objective(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { point: x.to_vec() })
        }
    };
    let d = start.len();
    let mut best = start.to_vec();
    let mut best_val = eval(start)?;
    if d == 0 {
        return Ok(best);
    }
    let budget = settings.evals_per_dim * d;

    for run in 0..=settings.restarts {
        let origin = if run == 0 {
            best.clone()
        } else {
            let dir: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            best.iter().zip(&dir).map(|(b, u)| b + scale * u / norm).collect()
        };
        let (x, v) = simplex_run(&mut eval, &origin, scale, budget, settings.diameter_tol)?;
        if v < best_val {
            best = x;
            best_val = v;
        }
    }
    Ok(best)
}

fn simplex_run<E>(eval: &mut E, origin: &[f64], step: f64, budget: usize, tol: f64) -> Result<(Vec<f64>, f64)>
where
    E: FnMut(&[f64]) -> Result<f64>,
{
    let d = origin.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(d + 1);
    pts.push(origin.to_vec());
    vals.push(eval(origin)?);
    for i in 0..d {
        let mut p = origin.to_vec();
        p[i] += step;
        vals.push(eval(&p)?);
        pts.push(p);
    }
    let mut evals = d + 1;
    let mut order: Vec<usize> = (0..=d).collect();

    loop {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        if evals >= budget || diameter(&pts) < tol {
            break;
        }
        let (lo, hi, second) = (order[0], order[d], order[d - 1]);
        let mut centroid = vec![0.0; d];
        for &k in &order[..d] {
            for (c, v) in centroid.iter_mut().zip(&pts[k]) {
                *c += v / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&pts[hi]).map(|(c, h)| c + t * (c - h)).collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr)?;
        evals += 1;
        if fr < vals[lo] {
            let xe = along(2.0);
            let fe = eval(&xe)?;
            evals += 1;
            if fe < fr {
                pts[hi] = xe;
                vals[hi] = fe;
            } else {
                pts[hi] = xr;
                vals[hi] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[hi] = xr;
            vals[hi] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[hi] {
            let xc = along(0.5);
            let fc = eval(&xc)?;
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc)?;
            (xc, fc)
        };
        evals += 1;
        if fc < vals[hi].min(fr) {
            pts[hi] = xc;
            vals[hi] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        let best = pts[lo].clone();
        for k in 0..=d {
            if k == lo {
                continue;
            }
            for (p, b) in pts[k].iter_mut().zip(&best) {
                *p = b + 0.5 * (*p - b);
            }
            vals[k] = eval(&pts[k])?;
            evals += 1;
        }
    }
    let lo = order[0];
    Ok((pts[lo].clone(), vals[lo]))
}

fn diameter(pts: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..pts.len() {
        for j in 0..i {
            let d2: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let mut rng = RngStream::new(1);
        let x = minimize_nd(|u| (u[0] - 1.0).powi(2) + (u[1] - 2.0).powi(2), &[0.0, 0.0], 1.0, &mut rng)
            .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 2.0).abs() < 1e-4, "{x:?}");
    }

    #[test]
    fn l1_norm_from_off_axis_start() {
        let mut rng = RngStream::new(2);
        let x = minimize_nd(|u| u[0].abs() + u[1].abs(), &[3.0, -3.0], 1.0, &mut rng).unwrap();
        assert!(x[0].abs() < 1e-3 && x[1].abs() < 1e-3, "{x:?}");
    }

    #[test]
    fn flat_bottom_matches_grid_scan() {
        let f = |u: &[f64]| (u[0] - 1.0).abs().max(0.5);
        // Grid-scan oracle on [-3, 3] at step 1e-3.
        let grid_min = (0..=6000)
            .map(|k| f(&[-3.0 + k as f64 * 1e-3]))
            .fold(f64::INFINITY, f64::min);
        let mut rng = RngStream::new(3);
        let x = minimize_nd(f, &[-2.0], 1.0, &mut rng).unwrap();
        assert!((f(&x) - grid_min).abs() < 1e-9);
        assert!((0.5..=1.5).contains(&x[0]), "{x:?}");
    }

    #[test]
    fn non_finite_objective_reports_point() {
        let mut rng = RngStream::new(4);
        let err = minimize_nd(|u| if u[0] > 0.5 { f64::NAN } else { -u[0] }, &[0.0], 1.0, &mut rng)
            .unwrap_err();
        match err {
            Error::NonFinite { point } => assert!(point[0] > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn never_worse_than_start() {
        let mut rng = RngStream::new(5);
        // Rastrigin-like bumps to tempt the simplex away.
        let f = |u: &[f64]| {
            u.iter().map(|x| x * x - 3.0 * (6.0 * x).cos()).sum::<f64>()
        };
        for s in 0..20 {
            let start = [s as f64 * 0.37 - 3.0, 1.5 - s as f64 * 0.11, 0.2];
            let x = minimize_nd(f, &start, 0.8, &mut rng).unwrap();
            assert!(f(&x) <= f(&start));
        }
    }
}
