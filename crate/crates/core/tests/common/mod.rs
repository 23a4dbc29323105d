#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfs_swarm::{Component, Matrix, Mixture, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`. The interval
/// is first cut into 64 panels so narrow peaks are not stepped over.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| simpson_panel(f, a + h * i as f64, a + h * (i + 1) as f64, tol / PANELS as f64))
        .sum()
}

fn simpson_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Nested adaptive Simpson over a rectangle.
pub fn simpson_2d<F: Fn(f64, f64) -> f64>(f: &F, x: (f64, f64), y: (f64, f64), tol: f64) -> f64 {
    let inner_tol = tol / (y.1 - y.0).max(1.0) * 0.1;
    let outer = |yv: f64| simpson(&|xv: f64| f(xv, yv), x.0, x.1, inner_tol);
    simpson(&outer, y.0, y.1, tol)
}

/// Plain 1-D or 2-D normal density, written out without the crate.
pub fn normal_pdf(x: &[f64], m: &[f64], cov: &[f64]) -> f64 {
    match x.len() {
        1 => {
            let v = cov[0];
            (-(x[0] - m[0]).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
        }
        2 => {
            let (a, b, d) = (cov[0], cov[1], cov[3]);
            let det = a * d - b * b;
            let (dx, dy) = (x[0] - m[0], x[1] - m[1]);
            let q = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
            (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
        }
        _ => unreachable!(),
    }
}

/// Random SPD matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(r: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Matrix {
    let a = Matrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let q = a.qr().q();
    let d = Matrix::from_diagonal(&Vector::from_fn(n, |_, _| r.random_range(lo..hi)));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn random_vector(r: &mut impl Rng, n: usize, half_width: f64) -> Vector {
    Vector::from_fn(n, |_, _| r.random_range(-half_width..half_width))
}

/// Mixture of `k` components in `n` dimensions with overlapping supports.
pub fn random_mixture(r: &mut impl Rng, k: usize, n: usize) -> Mixture {
    let comps = (0..k)
        .map(|_| {
            let w = r.random_range(0.3..2.0);
            Component::new(w, random_vector(r, n, 1.0), random_spd(r, n, 0.3, 1.5)).unwrap()
        })
        .collect();
    Mixture::new(comps).unwrap()
}

pub fn square(points: &[(f64, f64)], cov: [f64; 4]) -> Mixture {
    Mixture::new(
        points
            .iter()
            .map(|&(x, y)| Component::diagonal(1.0, &[x, y, 0.0, 0.0], &cov).unwrap())
            .collect(),
    )
    .unwrap()
}

/// `‖a − b‖∞ / max(‖b‖∞, floor)`.
pub fn rel_err(a: &Vector, b: &Vector, floor: f64) -> f64 {
    (a - b).amax() / b.amax().max(floor)
}

pub fn flatten(v: &[Vector]) -> Vector {
    Vector::from_iterator(v.iter().map(|x| x.len()).sum(), v.iter().flat_map(|x| x.iter().copied()))
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Central differences with step `h·(1 + |x_i|)`, independent of the crate's
/// own helper.
pub fn fd_gradient<F: FnMut(&Vector) -> f64>(mut f: F, x: &Vector, h: f64) -> Vector {
    let mut g = Vector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let step = h * (1.0 + x[i].abs());
        xp[i] = x[i] + step;
        let up = f(&xp);
        xp[i] = x[i] - step;
        let down = f(&xp);
        xp[i] = x[i];
        g[i] = (up - down) / (2.0 * step);
    }
    g
}

pub fn unflatten(v: &Vector, n: usize) -> Vec<Vector> {
    (0..v.len() / n).map(|i| v.rows(i * n, n).into_owned()).collect()
}
