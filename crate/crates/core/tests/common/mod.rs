//! Reference implementations used only as test oracles. They share no code
//! with the library.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    (&g + g.transpose()) * 0.5
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of R's diagonal moved into Q.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, d, d).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Cyclic Jacobi rotations. Returns eigenvalues in descending order and the
/// matching eigenvectors as columns.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * a.norm() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Minimize `f` over the ball ‖w‖ ≤ r by nested grids: each level scans a
/// 21^d grid (points outside the ball are projected radially onto it) and
/// the next level zooms to ±2 spacings around the best point, until the
/// spacing is at most `resolution`. Returns (minimizer, value).
pub fn grid_minimize(
    f: impl Fn(&[f64]) -> f64,
    d: usize,
    r: f64,
    resolution: f64,
) -> (Vec<f64>, f64) {
    let project = |w: &mut Vec<f64>| {
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > r {
            w.iter_mut().for_each(|x| *x *= r / norm);
        }
    };
    let steps = 10i64;
    let mut center = vec![0.0; d];
    let mut h = r / steps as f64;
    let mut best = (center.clone(), f(&center));
    loop {
        let mut idx = vec![-steps; d];
        'scan: loop {
            let mut w: Vec<f64> = center.iter().zip(&idx).map(|(c, &i)| c + h * i as f64).collect();
            project(&mut w);
            let v = f(&w);
            if v < best.1 {
                best = (w, v);
            }
            for k in 0..d {
                idx[k] += 1;
                if idx[k] <= steps {
                    continue 'scan;
                }
                idx[k] = -steps;
            }
            break;
        }
        if h <= resolution {
            return best;
        }
        center = best.0.clone();
        h = (2.0 * h / steps as f64).max(resolution);
    }
}

/// Minimum over a uniform 10⁴-point grid of O(2) (rotations and
/// reflections) of ‖Z Q − T‖_F for n×2 matrices.
pub fn o2_grid_min(z: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..5000 {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 5000.0;
        let (c, s) = (a.cos(), a.sin());
        for q in [
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
            DMatrix::from_row_slice(2, 2, &[c, s, s, -c]),
        ] {
            best = best.min((z * q - t).norm());
        }
    }
    best
}

/// Count of i with xs[i + 1] > xs[i].
pub fn increases(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] > w[0]).count()
}
