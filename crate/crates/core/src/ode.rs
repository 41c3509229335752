//! Symmetry-reduced `S⁴ → CP²` profiles in the cylinder coordinate `t`.
//!
//! The reduced energy is `π² ∫ 2α²α̇²/(1+α²)⁴ + α⁴/(2(1+α²)²) dt`, the action
//! of a one-dimensional mechanical system with kinetic coefficient
//! `K(α) = 4α²/(1+α²)⁴` and potential term `V(α) = α⁴/(2(1+α²)²)`.

use num_traits::{Float, FloatConst};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this `|α|` the kinetic coefficient is treated as degenerate.
pub const DEGENERATE_ALPHA: f64 = 1e-8;
/// Integration stops with an error once `|α|` exceeds this.
pub const BLOW_UP_ALPHA: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("exact {branch:?} branch is undefined at t = {t}")]
    Domain { t: f64, branch: Branch },
    #[error("degenerate data: |alpha| = {alpha:e} at t = {t} is too close to 0")]
    Degenerate { alpha: f64, t: f64 },
    #[error("blow-up: |alpha| = {alpha:e} at t = {t}")]
    BlowUp { alpha: f64, t: f64 },
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("empty or invalid interval [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("need at least {min} sample points, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile<T> {
    t_grid: Vec<T>,
    alpha: Vec<T>,
    alpha_dot: Vec<T>,
}

impl<T: Float> Profile<T> {
    pub fn new(t_grid: Vec<T>, alpha: Vec<T>, alpha_dot: Vec<T>) -> Result<Self, OdeError> {
        if t_grid.len() < 2 {
            return Err(OdeError::InvalidProfile(format!(
                "{} samples, need at least 2",
                t_grid.len()
            )));
        }
        if alpha.len() != t_grid.len() || alpha_dot.len() != t_grid.len() {
            return Err(OdeError::InvalidProfile(format!(
                "array lengths differ: t {}, alpha {}, alpha_dot {}",
                t_grid.len(),
                alpha.len(),
                alpha_dot.len()
            )));
        }
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(OdeError::InvalidProfile("t_grid is not strictly increasing".into()));
        }
        Ok(Profile {
            t_grid,
            alpha,
            alpha_dot,
        })
    }

    pub fn t_grid(&self) -> &[T] {
        &self.t_grid
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn alpha_dot(&self) -> &[T] {
        &self.alpha_dot
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    /// `H` at every sample.
    pub fn conserved(&self) -> Vec<T> {
        self.alpha
            .iter()
            .zip(&self.alpha_dot)
            .map(|(&a, &ad)| conserved_h(a, ad))
            .collect()
    }

    /// `max |H(t) − H(t₀)|` along the profile.
    pub fn h_drift(&self) -> T {
        let h = self.conserved();
        let h0 = h[0];
        h.iter().fold(T::zero(), |m, &x| m.max((x - h0).abs()))
    }
}

fn c<T: Float>(x: f64) -> T {
    T::from(x).unwrap()
}

/// The reduced Lagrangian density without the `π²` factor.
pub fn energy_density<T: Float>(alpha: T, alpha_dot: T) -> T {
    let a2 = alpha * alpha;
    let s = T::one() + a2;
    let s2 = s * s;
    c::<T>(2.0) * a2 * alpha_dot * alpha_dot / (s2 * s2) + a2 * a2 / (c::<T>(2.0) * s2)
}

pub fn conserved_h<T: Float>(alpha: T, alpha_dot: T) -> T {
    let a2 = alpha * alpha;
    let s = T::one() + a2;
    let s2 = s * s;
    a2 * alpha_dot * alpha_dot / (s2 * s2) - a2 * a2 / (c::<T>(4.0) * s2)
}

/// `α̈` from the Euler–Lagrange equation `d/dt(Kα̇) = ½K'α̇² + V'`.
pub fn el_acceleration<T: Float>(alpha: T, alpha_dot: T) -> T {
    let a2 = alpha * alpha;
    let s = T::one() + a2;
    // K = 4α²/s⁴, K' = 8α(1−3α²)/s⁵, V' = 2α³/s³; multiplied through by s⁵/α.
    let k = c::<T>(4.0) * alpha * s;
    let dk = c::<T>(8.0) * (T::one() - c::<T>(3.0) * a2);
    let dv = c::<T>(2.0) * a2 * s * s;
    (dv - c::<T>(0.5) * dk * alpha_dot * alpha_dot) / k
}

/// Composite Simpson quadrature of the reduced energy over the profile's grid.
/// Works on non-uniform grids; an odd interval count finishes with a
/// trapezoid on the last interval.
pub fn reduced_energy<T: Float + FloatConst>(p: &Profile<T>) -> T {
    let f: Vec<T> = p
        .alpha
        .iter()
        .zip(&p.alpha_dot)
        .map(|(&a, &ad)| energy_density(a, ad))
        .collect();
    let pi2 = T::PI() * T::PI();
    pi2 * simpson(&p.t_grid, &f)
}

fn simpson<T: Float>(t: &[T], f: &[T]) -> T {
    let two = c::<T>(2.0);
    let six = c::<T>(6.0);
    let mut acc = T::zero();
    let mut i = 0;
    while i + 2 < t.len() {
        let h0 = t[i + 1] - t[i];
        let h1 = t[i + 2] - t[i + 1];
        let hs = h0 + h1;
        acc = acc + hs / six * ((two - h1 / h0) * f[i] + hs * hs / (h0 * h1) * f[i + 1] + (two - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if i + 1 < t.len() {
        acc = acc + (t[i + 1] - t[i]) * (f[i] + f[i + 1]) / two;
    }
    acc
}

/// The `H = 0` solutions `α₊(t) = (eᵗ − 1)^{-1/2}` on `t > 0` and
/// `α₋(t) = −α₊(−t)` on `t < 0`.
pub fn exact_profile<T: Float>(t: T, branch: Branch) -> Result<(T, T), OdeError> {
    let s = match branch {
        Branch::Plus => t,
        Branch::Minus => -t,
    };
    if !(s > T::zero()) || !s.is_finite() {
        return Err(OdeError::Domain {
            t: t.to_f64().unwrap_or(f64::NAN),
            branch,
        });
    }
    let em1 = s.exp_m1();
    let alpha = em1.powf(c(-0.5));
    let alpha_dot = -c::<T>(0.5) * s.exp() * alpha / em1;
    Ok(match branch {
        Branch::Plus => (alpha, alpha_dot),
        Branch::Minus => (-alpha, alpha_dot),
    })
}

/// Samples an exact branch on `n_points` equally spaced times in `[lo, hi]`.
pub fn sample_exact<T: Float>(lo: T, hi: T, n_points: usize, branch: Branch) -> Result<Profile<T>, OdeError> {
    if n_points < 2 {
        return Err(OdeError::TooFewPoints { got: n_points, min: 2 });
    }
    if !(hi > lo) {
        return Err(OdeError::BadInterval {
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    let step = (hi - lo) / T::from(n_points - 1).unwrap();
    let mut t = Vec::with_capacity(n_points);
    let mut a = Vec::with_capacity(n_points);
    let mut ad = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let ti = if i + 1 == n_points {
            hi
        } else {
            lo + step * T::from(i).unwrap()
        };
        let (x, v) = exact_profile(ti, branch)?;
        t.push(ti);
        a.push(x);
        ad.push(v);
    }
    Profile::new(t, a, ad)
}

/// `v̈` for `v = α⁻²`. The equation of motion becomes
/// `v̈ = 2v̇²/(v+1) − (v+1)`, and the `H = 0` orbit is `v = eᵗ − 1`.
fn inverse_square_acceleration<T: Float>(v: T, p: T) -> T {
    let s = v + T::one();
    c::<T>(2.0) * p * p / s - s
}

/// Classical RK4 for the reduced Euler–Lagrange equation, stepped in the
/// variable `v = α⁻²` (the sign of `α` is fixed away from the degenerate
/// locus). The interval is split into `⌈|t_end − t0| / h_step⌉` equal steps;
/// `t_end < t0` integrates backwards.
pub fn integrate_el<T: Float>(alpha0: T, alpha_dot0: T, t0: T, t_end: T, h_step: T) -> Result<Profile<T>, OdeError> {
    let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
    if !(h_step > T::zero()) || !h_step.is_finite() {
        return Err(OdeError::BadStep(f(h_step)));
    }
    let span = t_end - t0;
    if span == T::zero() || !span.is_finite() {
        return Err(OdeError::BadInterval {
            lo: f(t0),
            hi: f(t_end),
        });
    }
    if !(alpha0.abs() >= c(DEGENERATE_ALPHA)) {
        return Err(OdeError::Degenerate {
            alpha: f(alpha0.abs()),
            t: f(t0),
        });
    }
    if !(alpha0.abs() <= c(BLOW_UP_ALPHA)) {
        return Err(OdeError::BlowUp {
            alpha: f(alpha0.abs()),
            t: f(t0),
        });
    }
    let steps = (span.abs() / h_step).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    let h = span / T::from(steps).unwrap();
    let v_max = c::<T>(DEGENERATE_ALPHA.powi(-2));
    let v_min = c::<T>(BLOW_UP_ALPHA.powi(-2));
    let sign = alpha0.signum();
    let two = c::<T>(2.0);
    let half = c::<T>(0.5);
    let sixth = T::one() / c(6.0);
    let (mut v, mut p) = (
        T::one() / (alpha0 * alpha0),
        -two * alpha_dot0 / (alpha0 * alpha0 * alpha0),
    );
    let mut ts = Vec::with_capacity(steps + 1);
    let mut al = Vec::with_capacity(steps + 1);
    let mut ad = Vec::with_capacity(steps + 1);
    ts.push(t0);
    al.push(alpha0);
    ad.push(alpha_dot0);
    for i in 1..=steps {
        let k1v = p;
        let k1p = inverse_square_acceleration(v, p);
        let k2v = p + half * h * k1p;
        let k2p = inverse_square_acceleration(v + half * h * k1v, k2v);
        let k3v = p + half * h * k2p;
        let k3p = inverse_square_acceleration(v + half * h * k2v, k3v);
        let k4v = p + h * k3p;
        let k4p = inverse_square_acceleration(v + h * k3v, k4v);
        v = v + h * sixth * (k1v + two * k2v + two * k3v + k4v);
        p = p + h * sixth * (k1p + two * k2p + two * k3p + k4p);
        let t = if i == steps {
            t_end
        } else {
            t0 + h * T::from(i).unwrap()
        };
        if v > v_max {
            return Err(OdeError::Degenerate {
                alpha: f(v.sqrt().recip()),
                t: f(t),
            });
        }
        if !(v >= v_min) {
            let alpha = if v > T::zero() {
                f(v.sqrt().recip())
            } else {
                f64::INFINITY
            };
            return Err(OdeError::BlowUp { alpha, t: f(t) });
        }
        let a = sign / v.sqrt();
        ts.push(t);
        al.push(a);
        ad.push(-half * p * a / v);
    }
    if h < T::zero() {
        ts.reverse();
        al.reverse();
        ad.reverse();
    }
    Profile::new(ts, al, ad)
}

/// Twice the reduced energy of the exact plus branch on `[t_cut_small, t_cut_large]`.
/// The minus branch contributes the same amount by symmetry.
pub fn glued_energy<T: Float + FloatConst>(t_cut_small: T, t_cut_large: T, n_points: usize) -> Result<T, OdeError> {
    let lo = t_cut_small.to_f64().unwrap_or(f64::NAN);
    if !(t_cut_small > T::zero()) {
        return Err(OdeError::BadInterval {
            lo,
            hi: t_cut_large.to_f64().unwrap_or(f64::NAN),
        });
    }
    let p = sample_exact(t_cut_small, t_cut_large, n_points, Branch::Plus)?;
    Ok(c::<T>(2.0) * reduced_energy(&p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn exact_acceleration(t: f64) -> f64 {
        let em1 = t.exp_m1();
        -0.5 * t.exp() * em1.powf(-1.5) + 0.75 * (2.0 * t).exp() * em1.powf(-2.5)
    }

    #[test]
    fn conserved_h_examples() {
        assert_eq!(conserved_h(0.0, 3.7), 0.0);
        assert!(conserved_h(1.0f64, -1.0).abs() < 1e-18);
        assert_eq!(conserved_h(1.0f64, 0.0), -1.0 / 16.0);
    }

    #[test]
    fn exact_profile_values_and_domain() {
        let (a, ad) = exact_profile(LN_2, Branch::Plus).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (ad + 1.0).abs() < 1e-15);
        let (a, ad) = exact_profile(-LN_2, Branch::Minus).unwrap();
        assert!((a + 1.0).abs() < 1e-15 && (ad + 1.0).abs() < 1e-15);
        let (a, ad) = exact_profile(60.0, Branch::Plus).unwrap();
        assert!(a < 1e-12 && ad.abs() < 1e-12);
        assert!(matches!(exact_profile(0.0, Branch::Plus), Err(OdeError::Domain { .. })));
        assert!(matches!(
            exact_profile(1.0, Branch::Minus),
            Err(OdeError::Domain { .. })
        ));
        assert!(matches!(
            exact_profile(-1.0, Branch::Plus),
            Err(OdeError::Domain { .. })
        ));
    }

    #[test]
    fn exact_profile_lies_on_zero_level() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let t: f64 = rng.random_range(1e-3..20.0);
            for (b, s) in [(Branch::Plus, t), (Branch::Minus, -t)] {
                let (a, ad) = exact_profile(s, b).unwrap();
                let rhs = a * a * (1.0 + a * a).powi(2);
                assert!((4.0 * ad * ad - rhs).abs() <= 1e-12 * rhs);
            }
        }
    }

    #[test]
    fn exact_profile_solves_el_equation() {
        for i in 0..50 {
            let t = 0.05 + 0.3 * i as f64;
            let (a, ad) = exact_profile(t, Branch::Plus).unwrap();
            let want = exact_acceleration(t);
            assert!((el_acceleration(a, ad) - want).abs() <= 1e-10 * want.abs(), "t = {t}");
        }
    }

    #[test]
    fn inverse_square_form_agrees_with_el_equation() {
        for &(a, ad) in &[(1.0, -1.0), (0.3, 0.7), (-2.0, 0.25), (5.0, -3.0)] {
            let v = 1.0 / (a * a);
            let p = -2.0 * ad / (a * a * a);
            let add = el_acceleration(a, ad);
            // v̈ = −2α̈/α³ + 6α̇²/α⁴
            let want = -2.0 * add / (a * a * a) + 6.0 * ad * ad / (a * a * a * a);
            assert!((inverse_square_acceleration(v, p) - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn reduced_energy_examples() {
        let t: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let zero = Profile::new(t.clone(), vec![0.0; 11], vec![0.0; 11]).unwrap();
        assert_eq!(reduced_energy(&zero), 0.0);
        let one = Profile::new(t, vec![1.0; 11], vec![0.0; 11]).unwrap();
        assert!((reduced_energy(&one) - PI * PI / 8.0).abs() < 1e-14);
        let p = sample_exact(1e-6, 30.0, 100_000, Branch::Plus).unwrap();
        assert!((reduced_energy(&p) - PI * PI / 2.0).abs() < 1e-4);
    }

    #[test]
    fn simpson_is_exact_on_quadratics_over_uneven_grids() {
        let t = [0.0, 0.3, 0.5, 1.1, 1.2, 2.0, 2.7];
        let f: Vec<f64> = t.iter().map(|x| 3.0 * x * x - 2.0 * x + 1.0).collect();
        let exact = |x: f64| x.powi(3) - x * x + x;
        assert!((simpson(&t[..5], &f[..5]) - exact(1.2)).abs() < 1e-13);
        let trap_tail = (f[4] + f[5]) / 2.0 * 0.8;
        assert!((simpson(&t[..6], &f[..6]) - (exact(1.2) + trap_tail)).abs() < 1e-13);
        assert!((simpson(&t, &f) - exact(2.7)).abs() < 1e-12);
    }

    #[test]
    fn profile_validation() {
        assert!(Profile::new(vec![0.0], vec![0.0], vec![0.0]).is_err());
        assert!(Profile::new(vec![0.0, 1.0], vec![0.0], vec![0.0, 0.0]).is_err());
        assert!(Profile::new(vec![1.0, 1.0], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn integrator_tracks_exact_solution() {
        let p = integrate_el(1.0, -1.0, LN_2, 10.0, 1e-3).unwrap();
        let mut err = 0.0f64;
        for (&t, &a) in p.t_grid().iter().zip(p.alpha()) {
            err = err.max((a - exact_profile(t, Branch::Plus).unwrap().0).abs());
        }
        assert!(err <= 1e-8, "max error {err:e}");
        assert!(p.h_drift() <= 1e-10, "drift {:e}", p.h_drift());
        assert_eq!(*p.t_grid().last().unwrap(), 10.0);
    }

    #[test]
    fn negative_level_is_conserved() {
        let p = integrate_el(1.0, 0.0, 0.0, 0.5, 1e-3).unwrap();
        let h = p.conserved();
        assert!(h.iter().all(|x| (x + 1.0 / 16.0).abs() <= 1e-10));
    }

    #[test]
    fn drift_scales_with_fourth_power_of_step() {
        let coarse = integrate_el(1.0, 0.0, 0.0, 0.5, 0.02).unwrap().h_drift();
        let fine = integrate_el(1.0, 0.0, 0.0, 0.5, 0.01).unwrap().h_drift();
        let ratio = coarse / fine;
        assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn time_translation() {
        let a = integrate_el(1.3, -0.4, 0.0, 1.0, 1e-3).unwrap();
        let b = integrate_el(1.3, -0.4, 5.0, 6.0, 1e-3).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.alpha().iter().zip(b.alpha()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn backward_integration_retraces() {
        let fwd = integrate_el(1.0, -1.0, LN_2, 3.0, 1e-3).unwrap();
        let (a, v) = (*fwd.alpha().last().unwrap(), *fwd.alpha_dot().last().unwrap());
        let back = integrate_el(a, v, 3.0, LN_2, 1e-3).unwrap();
        assert_eq!(back.t_grid()[0], LN_2);
        assert!((back.alpha()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn integrator_guards() {
        assert!(matches!(
            integrate_el(0.0, 1.0, 0.0, 1.0, 1e-3),
            Err(OdeError::Degenerate { .. })
        ));
        assert!(matches!(
            integrate_el(1.0, 0.0, 0.0, 1.0, 0.0),
            Err(OdeError::BadStep(_))
        ));
        assert!(matches!(
            integrate_el(1.0, 0.0, 0.0, 0.0, 1e-3),
            Err(OdeError::BadInterval { .. })
        ));
        // α̇ ~ α³ on this level, so α leaves any bound in finite time.
        assert!(matches!(
            integrate_el(1.0, 0.0, 0.0, 50.0, 1e-3),
            Err(OdeError::BlowUp { .. })
        ));
    }

    #[test]
    fn glued_energy_examples() {
        let e = glued_energy(1e-6, 30.0, 100_000).unwrap();
        assert!((e - PI * PI).abs() < 1e-3);
        let tail = glued_energy(1.0, 30.0, 10_000).unwrap();
        assert!((tail - PI * PI * (-2.0f64).exp()).abs() < 1e-4);
        let minus = sample_exact(-30.0, -1e-6, 100_000, Branch::Minus).unwrap();
        assert!((reduced_energy(&minus) - e / 2.0).abs() < 1e-9);
        assert!(glued_energy(0.0, 30.0, 100).is_err());
        assert!(glued_energy(2.0, 1.0, 100).is_err());
    }

    #[test]
    fn single_precision() {
        let (a, ad) = exact_profile(LN_2 as f32, Branch::Plus).unwrap();
        assert!((a - 1.0).abs() < 1e-6 && (ad + 1.0).abs() < 1e-5);
        let e = glued_energy(1e-3f32, 20.0, 20_001).unwrap();
        assert!((e - std::f32::consts::PI.powi(2)).abs() < 2e-2);
    }
}
