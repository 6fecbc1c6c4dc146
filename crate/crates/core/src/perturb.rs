//! Seeded smooth perturbations with bounded value and derivative.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::map::{inf_norm, SmoothMap};
use crate::space::{Factor, StateSpace};

const MODES: usize = 3;

/// One term `A sin(ω·x + φ)`.
#[derive(Debug, Clone)]
struct Mode {
    amp: f64,
    freq: Vec<f64>,
    phase: f64,
}

/// Scalar trigonometric field `Σ A_j sin(ω_j·x + φ_j)`.
#[derive(Debug, Clone)]
struct TrigField {
    modes: Vec<Mode>,
}

impl TrigField {
    /// Field whose value and max-norm gradient row sum are at most `bound`
    /// (`weight` picks which power of `‖ω‖` is normalized away).
    fn random(rng: &mut ChaCha8Rng, space: &StateSpace, coords: &[usize], bound: f64, weight: impl Fn(&[f64]) -> f64) -> Self {
        let mut modes = Vec::with_capacity(MODES);
        for _ in 0..MODES {
            let n = space.dim();
            let mut freq = vec![0.0; n];
            let share = 1.0 / coords.len().max(1) as f64;
            for &k in coords {
                freq[k] = match space.factor(k) {
                    Factor::Circle { period } => {
                        let s = [-1.0, 0.0, 1.0][rng.random_range(0..3)];
                        s * 2.0 * std::f64::consts::PI / period
                    }
                    Factor::Interval { .. } => share * rng.random_range(-1.0..1.0),
                };
            }
            let amp = rng.random_range(0.3..1.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            modes.push(Mode { amp, freq, phase });
        }
        let total: f64 = modes.iter().map(|m| m.amp.abs() * weight(&m.freq)).sum();
        for m in modes.iter_mut() {
            m.amp *= bound / total.max(1e-300);
        }
        TrigField { modes }
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.modes.iter().map(|m| m.amp * (dot(&m.freq, x) + m.phase).sin()).sum()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for m in &self.modes {
            let c = m.amp * (dot(&m.freq, x) + m.phase).cos();
            for (gk, wk) in g.iter_mut().zip(&m.freq) {
                *gk += c * wk;
            }
        }
        g
    }

    /// Hessian of `Σ A_j sin(...)`.
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        for m in &self.modes {
            let s = -m.amp * (dot(&m.freq, x) + m.phase).sin();
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] += s * m.freq[i] * m.freq[j];
                }
            }
        }
        h
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm1(w: &[f64]) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

fn norm_inf(w: &[f64]) -> f64 {
    w.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Max-norm Lipschitz estimate from the metadata or from sampled Jacobians.
fn lipschitz_estimate(g: &SmoothMap, rng: &mut ChaCha8Rng) -> f64 {
    if let Some(k) = g.meta.lipschitz {
        return k;
    }
    let space = g.domain();
    let bounded = space.factors().iter().all(|f| f.length().is_finite());
    if !bounded {
        return 1.0;
    }
    let mut k: f64 = 1.0;
    for _ in 0..32 {
        let x = space.sample(rng);
        if let Ok(j) = g.jacobian_at(&x) {
            k = k.max(inf_norm(&j));
        }
    }
    1.5 * k
}

/// `G + P` with `|P| <= η` and `‖DP‖ <= η`; when `G` is flagged symplectic the
/// perturbation is `S_h ∘ S_g ∘ G` with shears `b += ∇g(a)`, `a += ∇h(b)` on the
/// interleaved pairs, which keeps the form and has an exact inverse.
pub fn perturb_map(g: &SmoothMap, eta: f64, seed: u64) -> SmoothMap {
    if eta == 0.0 {
        return g.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = g.domain().clone();
    let n = space.dim();
    if g.meta.symplectic == Some(true) && n % 2 == 0 {
        return perturb_symplectic(g, eta, &mut rng);
    }

    let all: Vec<usize> = (0..n).collect();
    let fields: Vec<TrigField> = (0..g.codomain().dim())
        .map(|_| TrigField::random(&mut rng, &space, &all, eta, |w| norm1(w).max(1.0)))
        .collect();
    let f = g.clone();
    let fv = fields.clone();
    let mut out = SmoothMap::new(format!("{}~", g.name()), space.clone(), g.codomain().clone(), move |x| {
        let mut y = f.apply(x);
        for (yi, p) in y.iter_mut().zip(&fv) {
            *yi += p.value(x);
        }
        y
    });
    if g.has_analytic_jacobian() {
        let f = g.clone();
        let fv = fields.clone();
        out = out.with_jacobian(move |x| {
            let mut j = f.jacobian_at(x).unwrap_or_else(|_| f.jacobian_newton(x));
            for (i, p) in fv.iter().enumerate() {
                for (k, v) in p.grad(x).into_iter().enumerate() {
                    j[(i, k)] += v;
                }
            }
            j
        });
    }
    out.meta.contraction_bound = g.meta.contraction_bound.map(|l| (l - eta).max(0.0));
    out.meta.lipschitz = g.meta.lipschitz.map(|k| k + eta);
    if let Some(inv) = g.inverse() {
        let fv = fields;
        let cod = g.codomain().clone();
        let inv_map = SmoothMap::new(format!("{}~⁻¹", g.name()), g.codomain().clone(), space, move |y| {
            // Solve G(x) + P(x) = y by x = G⁻¹(y − P(x)).
            let mut x = inv.apply(y);
            for _ in 0..200 {
                let mut t = y.to_vec();
                for (ti, p) in t.iter_mut().zip(&fv) {
                    *ti -= p.value(&x);
                }
                cod.reduce_in_place(&mut t);
                let next = inv.apply(&t);
                let step = next.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                x = next;
                if step < 1e-16 {
                    break;
                }
            }
            x
        });
        out = out.with_inverse(inv_map);
    }
    out
}

fn perturb_symplectic(g: &SmoothMap, eta: f64, rng: &mut ChaCha8Rng) -> SmoothMap {
    let space = g.domain().clone();
    let n = space.dim();
    let k = lipschitz_estimate(g, rng);
    let amp = eta / (2.2 * k.max(1.0));
    let a_idx: Vec<usize> = (0..n).step_by(2).collect();
    let b_idx: Vec<usize> = (1..n).step_by(2).collect();
    // Value of ∇ is bounded by Σ|A| ‖ω‖_∞, its derivative by Σ|A| ‖ω‖_∞ ‖ω‖₁.
    let weight = |w: &[f64]| norm_inf(w) * norm1(w).max(1.0);
    let gf = TrigField::random(rng, &space, &a_idx, amp, weight);
    let hf = TrigField::random(rng, &space, &b_idx, amp, weight);

    let shear = {
        let (gf, hf, a_idx, b_idx) = (gf.clone(), hf.clone(), a_idx.clone(), b_idx.clone());
        move |y: &mut Vec<f64>, sign: f64| {
            if sign > 0.0 {
                let dg = gf.grad(y);
                for &i in &b_idx {
                    y[i] += dg[i - 1];
                }
                let dh = hf.grad(y);
                for &i in &a_idx {
                    y[i] += dh[i + 1];
                }
            } else {
                let dh = hf.grad(y);
                for &i in &a_idx {
                    y[i] -= dh[i + 1];
                }
                let dg = gf.grad(y);
                for &i in &b_idx {
                    y[i] -= dg[i - 1];
                }
            }
        }
    };

    let f = g.clone();
    let sh = shear.clone();
    let cod = g.codomain().clone();
    let mut out = SmoothMap::endo(format!("{}~", g.name()), space.clone(), move |x| {
        let mut y = f.apply(x);
        sh(&mut y, 1.0);
        cod.reduce_in_place(&mut y);
        y
    });
    if g.has_analytic_jacobian() {
        let f = g.clone();
        let (gf, hf, a_idx, b_idx) = (gf.clone(), hf.clone(), a_idx.clone(), b_idx.clone());
        out = out.with_jacobian(move |x| {
            let jg = f.jacobian_at(x).unwrap_or_else(|_| f.jacobian_newton(x));
            let mut y = f.apply(x);
            // D S_g at y: b_i += Σ_j ∂²g/∂a_{i}∂a_j.
            let mut sg = DMatrix::<f64>::identity(n, n);
            let hg = gf.hessian(&y);
            for &bi in &b_idx {
                for &aj in &a_idx {
                    sg[(bi, aj)] += hg[(bi - 1, aj)];
                }
            }
            let dg = gf.grad(&y);
            for &bi in &b_idx {
                y[bi] += dg[bi - 1];
            }
            let mut sh = DMatrix::<f64>::identity(n, n);
            let hh = hf.hessian(&y);
            for &ai in &a_idx {
                for &bj in &b_idx {
                    sh[(ai, bj)] += hh[(ai + 1, bj)];
                }
            }
            sh * sg * jg
        });
    }
    out.meta.contraction_bound = g.meta.contraction_bound.map(|l| (l - eta).max(0.0));
    out.meta.lipschitz = g.meta.lipschitz.map(|k| k + eta);
    out.meta.symplectic = Some(true);
    if let Some(inv) = g.inverse() {
        let sh = shear;
        let cod = g.codomain().clone();
        let inv_map = SmoothMap::endo(format!("{}~⁻¹", g.name()), space, move |y| {
            let mut t = y.to_vec();
            sh(&mut t, -1.0);
            cod.reduce_in_place(&mut t);
            inv.apply(&t)
        });
        out = out.with_inverse(inv_map);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::check_symplectic;
    use rand::SeedableRng;

    #[test]
    fn zero_eta_is_identity_operation() {
        let m = SmoothMap::affine_1d(StateSpace::cube(1, 0.0, 1.0), 0.5, 0.1);
        let p = perturb_map(&m, 0.0, 7);
        assert_eq!(p.apply(&[0.3]), m.apply(&[0.3]));
    }

    #[test]
    fn value_and_derivative_bounded() {
        let space = StateSpace::cube(2, -1.0, 1.0);
        let m = SmoothMap::diagonal(space.clone(), &[0.5, 0.4]);
        let eta = 0.02;
        let p = perturb_map(&m, eta, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = space.sample(&mut rng);
            let (a, b) = (m.apply(&x), p.apply(&x));
            assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() <= eta));
            let x_in: Vec<f64> = x.iter().map(|v| v * 0.99).collect();
            let d = p.fd_jacobian(&x_in, 1e-6).unwrap() - m.jacobian_at(&x_in).unwrap();
            assert!(inf_norm(&d) <= eta * (1.0 + 1e-5));
            let back = p.inverse().unwrap().apply(&b);
            assert!(back.iter().zip(&x).all(|(u, v)| (u - v).abs() < 1e-12));
        }
    }

    #[test]
    fn symplectic_perturbation_stays_symplectic() {
        let space = StateSpace::cube(2, -2.0, 2.0);
        let m = SmoothMap::diagonal(space.clone(), &[0.5, 2.0]);
        let p = perturb_map(&m, 0.05, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..100).map(|_| inner_sample(&mut rng)).collect();
        let r = check_symplectic(&p, &pts, 1e-8).unwrap();
        assert!(r.pass, "{r:?}");
        let x = vec![0.3, -0.2];
        let y = p.apply(&x);
        let back = p.inverse().unwrap().apply(&y);
        assert!((back[0] - x[0]).abs() < 1e-14 && (back[1] - x[1]).abs() < 1e-14);
        for x in &pts {
            let d = p.fd_jacobian(x, 1e-6).unwrap() - m.jacobian_at(x).unwrap();
            assert!(inf_norm(&d) <= 0.05 * (1.0 + 1e-5));
        }
    }

    fn inner_sample(rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)]
    }
}
