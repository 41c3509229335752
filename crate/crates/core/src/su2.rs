//! Irreducible unitary representations of SU(2).
//!
//! `V^(n)` is realized as `Sym^n(C^2)` with the weight basis `v_k = Y^k v`,
//! `k = 0..=n`, where `v = e1^n` is the highest weight vector. In this basis
//!
//! ```text
//! H v_k = (n - 2k) v_k,   X v_k = k(n - k + 1) v_{k-1},   Y v_k = v_{k+1},
//! ```
//!
//! and the compact generators act as `T1 = (i/2)(X + Y)`, `T2 = (1/2)(X - Y)`,
//! `T3 = (i/2) H`. The `v_k` are orthogonal but not normalized; the invariant
//! inner product is carried separately as a diagonal Gram matrix with
//! `gram[0][0] = 1`.
//!
//! Matrices are stored as column-operators: column `k` holds the image of
//! `v_k`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::{Complex, Complex64};
use serde::ser::{Serialize, SerializeStruct, Serializer};
use thiserror::Error;

use crate::scalar::RepScalar;

/// Largest highest weight accepted by [`build_irrep`].
pub const MAX_HIGHEST_WEIGHT: usize = 64;

/// Dense complex matrix over a representation scalar.
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// A 2×2 complex matrix, used for elements of SU(2) and su(2).
pub type Su2Matrix = Matrix2<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Su2Error {
    #[error("highest weight {n} exceeds the supported maximum {max}")]
    WeightTooLarge { n: usize, max: usize },
    #[error("basis index {index} out of range for V^({n})")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("group element is not unitary (|g^H g - I| = {residual:e})")]
    NotUnitary { residual: f64 },
}

fn cplx<T: RepScalar>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

fn czero<T: RepScalar>() -> Complex<T> {
    cplx(T::zero(), T::zero())
}

/// Conjugate transpose. Works for any scalar, unlike `adjoint`, which needs
/// a `ComplexField`.
pub fn conj_transpose<T: RepScalar>(m: &CMatrix<T>) -> CMatrix<T> {
    m.map(|z| z.conj()).transpose()
}

/// `[a, b] = ab - ba`.
pub fn bracket<T: RepScalar>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

/// The orthonormal basis `ϑ1, ϑ2, ϑ3` of su(2) as 2×2 matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LieBasis<T: RepScalar> {
    pub theta1: CMatrix<T>,
    pub theta2: CMatrix<T>,
    pub theta3: CMatrix<T>,
}

impl<T: RepScalar> LieBasis<T> {
    pub fn new() -> Self {
        let half = T::ratio(1, 2);
        let z = T::zero;
        let theta1 = CMatrix::from_row_slice(
            2,
            2,
            &[czero(), cplx(z(), half.clone()), cplx(z(), half.clone()), czero()],
        );
        let theta2 = CMatrix::from_row_slice(
            2,
            2,
            &[czero(), cplx(half.clone(), z()), cplx(-half.clone(), z()), czero()],
        );
        let theta3 = CMatrix::from_row_slice(2, 2, &[cplx(z(), half.clone()), czero(), czero(), cplx(z(), -half)]);
        Self { theta1, theta2, theta3 }
    }

    /// `ϑ_i` for `i ∈ {1, 2, 3}`.
    pub fn theta(&self, i: usize) -> &CMatrix<T> {
        match i {
            1 => &self.theta1,
            2 => &self.theta2,
            3 => &self.theta3,
            _ => panic!("su(2) basis index must be 1, 2 or 3, got {i}"),
        }
    }
}

impl<T: RepScalar> Default for LieBasis<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// The irreducible representation `V^(n)` in the weight basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Irrep<T: RepScalar> {
    n: usize,
    x: CMatrix<T>,
    y: CMatrix<T>,
    h: CMatrix<T>,
    t: [CMatrix<T>; 3],
    gram: CMatrix<T>,
}

/// Builds `V^(n)` for `0 <= n <= MAX_HIGHEST_WEIGHT`.
pub fn build_irrep<T: RepScalar>(n: usize) -> Result<Irrep<T>, Su2Error> {
    if n > MAX_HIGHEST_WEIGHT {
        return Err(Su2Error::WeightTooLarge {
            n,
            max: MAX_HIGHEST_WEIGHT,
        });
    }
    let dim = n + 1;
    let mut x = CMatrix::<T>::from_element(dim, dim, czero());
    let mut y = x.clone();
    let mut h = x.clone();
    let mut gram = x.clone();

    let mut g = T::one();
    for k in 0..dim {
        h[(k, k)] = cplx(T::from_int(n as i64 - 2 * k as i64), T::zero());
        if k >= 1 {
            let raise = T::from_int((k * (n - k + 1)) as i64);
            x[(k - 1, k)] = cplx(raise.clone(), T::zero());
            // Skew-Hermiticity of T1 forces gram[k] = gram[k-1] * k(n-k+1).
            g *= raise;
        }
        if k + 1 < dim {
            y[(k + 1, k)] = cplx(T::one(), T::zero());
        }
        gram[(k, k)] = cplx(g.clone(), T::zero());
    }

    let half_i = cplx(T::zero(), T::ratio(1, 2));
    let half = cplx(T::ratio(1, 2), T::zero());
    let t1 = (&x + &y) * half_i.clone();
    let t2 = (&x - &y) * half;
    let t3 = &h * half_i;

    Ok(Irrep {
        n,
        x,
        y,
        h,
        t: [t1, t2, t3],
        gram,
    })
}

impl<T: RepScalar> Irrep<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn x(&self) -> &CMatrix<T> {
        &self.x
    }

    pub fn y(&self) -> &CMatrix<T> {
        &self.y
    }

    pub fn h(&self) -> &CMatrix<T> {
        &self.h
    }

    pub fn t1(&self) -> &CMatrix<T> {
        &self.t[0]
    }

    pub fn t2(&self) -> &CMatrix<T> {
        &self.t[1]
    }

    pub fn t3(&self) -> &CMatrix<T> {
        &self.t[2]
    }

    /// Action of `ϑ_i`, `i ∈ {1, 2, 3}`.
    pub fn theta(&self, i: usize) -> &CMatrix<T> {
        assert!((1..=3).contains(&i), "su(2) basis index must be 1, 2 or 3");
        &self.t[i - 1]
    }

    /// Diagonal Gram matrix of the invariant inner product.
    pub fn gram(&self) -> &CMatrix<T> {
        &self.gram
    }

    /// `max |gram·T_i + T_i^H·gram|` over the three generators.
    pub fn skew_hermitian_residual(&self) -> f64 {
        self.t
            .iter()
            .map(|t| {
                let r = &self.gram * t + conj_transpose(t) * &self.gram;
                max_abs(&r)
            })
            .fold(0.0, f64::max)
    }
}

/// Casimir operator `-T1² - T2² - T3²`; equals `¼(n² + 2n)·Id`.
pub fn casimir<T: RepScalar>(irrep: &Irrep<T>) -> CMatrix<T> {
    let sum = irrep.t1() * irrep.t1() + irrep.t2() * irrep.t2() + irrep.t3() * irrep.t3();
    -sum
}

/// The scalar `¼(n² + 2n)` by which the Casimir acts on `V^(n)`.
pub fn casimir_eigenvalue<T: RepScalar>(n: usize) -> T {
    T::ratio((n * n + 2 * n) as i64, 4)
}

/// Largest entry modulus of a complex matrix, as `f64`.
pub fn max_abs<T: RepScalar>(m: &CMatrix<T>) -> f64 {
    m.iter()
        .map(|z| {
            let re = z.re.to_f64_lossy();
            let im = z.im.to_f64_lossy();
            re.hypot(im)
        })
        .fold(0.0, f64::max)
}

/// Representation matrix of a 2×2 matrix `g` on `V^(n)`, obtained by lifting
/// `g` to the symmetric power. Column `k` is `g·v_k` in the `v_j` basis.
pub fn symmetric_power<T: RepScalar>(n: usize, g: &Matrix2<Complex<T>>) -> CMatrix<T> {
    let dim = n + 1;
    // g e1 = g00 e1 + g10 e2, g e2 = g01 e1 + g11 e2; polynomials in e2 with
    // coefficient j multiplying the monomial e1^(deg-j) e2^j.
    let col1 = [g[(0, 0)].clone(), g[(1, 0)].clone()];
    let col2 = [g[(0, 1)].clone(), g[(1, 1)].clone()];

    let mul = |p: &[Complex<T>], lin: &[Complex<T>; 2]| -> Vec<Complex<T>> {
        let mut out = vec![czero::<T>(); p.len() + 1];
        for (j, c) in p.iter().enumerate() {
            out[j] += c.clone() * lin[0].clone();
            out[j + 1] += c.clone() * lin[1].clone();
        }
        out
    };

    let mut rho = CMatrix::<T>::from_element(dim, dim, czero());
    for k in 0..dim {
        let mut poly = vec![cplx(T::one(), T::zero())];
        for _ in 0..(n - k) {
            poly = mul(&poly, &col1);
        }
        for _ in 0..k {
            poly = mul(&poly, &col2);
        }
        // v_k = c_k m_k with c_k = n!/(n-k)!, so rho[j][k] = coef_j * c_k / c_j.
        for (j, coef) in poly.into_iter().enumerate() {
            let scale = falling_ratio::<T>(n, k, j);
            rho[(j, k)] = coef * cplx(scale, T::zero());
        }
    }
    rho
}

/// `c_k / c_j` with `c_k = n!/(n-k)!`.
fn falling_ratio<T: RepScalar>(n: usize, k: usize, j: usize) -> T {
    let mut r = T::one();
    if k >= j {
        for i in j..k {
            r *= T::from_int((n - i) as i64);
        }
    } else {
        for i in k..j {
            r /= T::from_int((n - i) as i64);
        }
    }
    r
}

/// `ϑ_i` as an `f64` 2×2 matrix.
pub fn theta_matrix(i: usize) -> Su2Matrix {
    let h = 0.5;
    let z = Complex64::new(0.0, 0.0);
    match i {
        1 => Su2Matrix::new(z, Complex64::new(0.0, h), Complex64::new(0.0, h), z),
        2 => Su2Matrix::new(z, Complex64::new(h, 0.0), Complex64::new(-h, 0.0), z),
        3 => Su2Matrix::new(Complex64::new(0.0, h), z, z, Complex64::new(0.0, -h)),
        _ => panic!("su(2) basis index must be 1, 2 or 3, got {i}"),
    }
}

/// `Σ v_i ϑ_i`.
pub fn algebra_element(v: [f64; 3]) -> Su2Matrix {
    theta_matrix(1) * Complex64::from(v[0])
        + theta_matrix(2) * Complex64::from(v[1])
        + theta_matrix(3) * Complex64::from(v[2])
}

/// `exp(Σ v_i ϑ_i)` in closed form: `(Σ v_i ϑ_i)² = -|v|²/4`.
pub fn exp_algebra(v: [f64; 3]) -> Su2Matrix {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let (c, s) = if r < 1e-300 {
        (1.0, 1.0)
    } else {
        ((0.5 * r).cos(), 2.0 * (0.5 * r).sin() / r)
    };
    Su2Matrix::identity() * Complex64::from(c) + algebra_element(v) * Complex64::from(s)
}

/// `exp(aϑ3) exp(bϑ2) exp(cϑ3)`.
pub fn euler_zyz(a: f64, b: f64, c: f64) -> Su2Matrix {
    exp_algebra([0.0, 0.0, a]) * exp_algebra([0.0, b, 0.0]) * exp_algebra([0.0, 0.0, c])
}

/// Coordinates of an su(2) element in the orthonormal basis, using
/// `<A, B> = -2 Re tr(AB)`.
pub fn algebra_coords(x: &Su2Matrix) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = -2.0 * (x * theta_matrix(i + 1)).trace().re;
    }
    out
}

/// `Ad(g) x = g x g^{-1}` for unitary `g`.
pub fn adjoint_action(g: &Su2Matrix, x: &Su2Matrix) -> Su2Matrix {
    g * x * g.adjoint()
}

/// `|g^H g - I|` in max norm.
pub fn unitarity_residual(g: &Su2Matrix) -> f64 {
    (g.adjoint() * g - Su2Matrix::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Matrix element `π_kl(g) = (g v_k, v_l)` with the Gram inner product,
/// linear in the first slot. Equals `ρ(g)[l][k] · gram[l][l]`.
pub fn matrix_element(irrep: &Irrep<f64>, k: usize, l: usize, g: &Su2Matrix) -> Result<Complex64, Su2Error> {
    let n = irrep.n();
    for index in [k, l] {
        if index > n {
            return Err(Su2Error::IndexOutOfRange { index, n });
        }
    }
    let residual = unitarity_residual(g);
    if residual > 1e-12 {
        return Err(Su2Error::NotUnitary { residual });
    }
    let rho = symmetric_power(n, g);
    Ok(rho[(l, k)] * irrep.gram()[(l, l)])
}

/// All matrix elements `π_kl(g)` at once, indexed `[k][l]`. The caller
/// guarantees `g` is unitary; used for sampling on large meshes.
pub fn matrix_elements_unchecked(irrep: &Irrep<f64>, g: &Su2Matrix) -> DMatrix<Complex64> {
    let rho = symmetric_power(irrep.n(), g);
    let dim = irrep.dim();
    DMatrix::from_fn(dim, dim, |k, l| rho[(l, k)] * irrep.gram()[(l, l)])
}

/// `exp(Σ a_i T_i)` computed by exponentiating the representation matrices.
pub fn exp_lift(irrep: &Irrep<f64>, a: [f64; 3]) -> CMatrix<f64> {
    let gen =
        irrep.t1() * Complex64::from(a[0]) + irrep.t2() * Complex64::from(a[1]) + irrep.t3() * Complex64::from(a[2]);
    gen.exp()
}

struct ComplexRows<'a, T: RepScalar>(&'a CMatrix<T>);

impl<T: RepScalar> Serialize for ComplexRows<'_, T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.0.nrows())
            .map(|r| {
                (0..self.0.ncols())
                    .map(|c| {
                        let z = &self.0[(r, c)];
                        [z.re.to_f64_lossy(), z.im.to_f64_lossy()]
                    })
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }
}

impl<T: RepScalar> Serialize for Irrep<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Irrep", 8)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("X", &ComplexRows(&self.x))?;
        st.serialize_field("Y", &ComplexRows(&self.y))?;
        st.serialize_field("H", &ComplexRows(&self.h))?;
        st.serialize_field("T1", &ComplexRows(&self.t[0]))?;
        st.serialize_field("T2", &ComplexRows(&self.t[1]))?;
        st.serialize_field("T3", &ComplexRows(&self.t[2]))?;
        st.serialize_field("gram", &ComplexRows(&self.gram))?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diff(a: &CMatrix<f64>, b: &CMatrix<f64>) -> f64 {
        max_abs(&(a - b))
    }

    #[test]
    fn basis_matches_2x2_representation() {
        let basis = LieBasis::<f64>::new();
        let irrep = build_irrep::<f64>(1).unwrap();
        for i in 1..=3 {
            assert_eq!(basis.theta(i), irrep.theta(i));
            let t = basis.theta(i);
            assert_eq!(t + conj_transpose(t), CMatrix::zeros(2, 2));
            assert_eq!(t.trace(), c(0.0, 0.0));
        }
        assert_eq!(bracket(&basis.theta2, &basis.theta1), basis.theta3);
    }

    #[test]
    fn n1_t3_is_diag_half_i() {
        let irrep = build_irrep::<f64>(1).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.5), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -0.5)]);
        assert_eq!(irrep.t3(), &expected);
    }

    #[test]
    fn trivial_representation_is_zero() {
        let irrep = build_irrep::<f64>(0).unwrap();
        let zero = CMatrix::zeros(1, 1);
        for m in [irrep.x(), irrep.y(), irrep.h(), irrep.t1(), irrep.t2(), irrep.t3()] {
            assert_eq!(m, &zero);
        }
        assert_eq!(casimir(&irrep), zero);
    }

    #[test]
    fn n2_weights_and_raising() {
        let irrep = build_irrep::<f64>(2).unwrap();
        for (k, w) in [2.0, 0.0, -2.0].into_iter().enumerate() {
            assert_eq!(irrep.h()[(k, k)], c(w, 0.0));
        }
        // X v_1 = 2 v_0
        assert_eq!(irrep.x()[(0, 1)], c(2.0, 0.0));
        assert_eq!(irrep.x().column(1).iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn casimir_examples() {
        for (n, value) in [(0usize, 0.0), (1, 0.75), (3, 3.75)] {
            let irrep = build_irrep::<f64>(n).unwrap();
            let expected = CMatrix::identity(n + 1, n + 1) * c(value, 0.0);
            assert!(diff(&casimir(&irrep), &expected) <= 1e-13, "n={n}");
        }
    }

    #[test]
    fn bracket_relations_hold_up_to_n20() {
        for n in 0..=20 {
            let r = build_irrep::<f64>(n).unwrap();
            let (t1, t2, t3) = (r.t1(), r.t2(), r.t3());
            // [ϑi, ϑj] = -ε_ijk ϑk
            assert!(diff(&bracket(t2, t1), t3) <= 1e-12, "n={n}");
            assert!(diff(&bracket(t3, t2), t1) <= 1e-12, "n={n}");
            assert!(diff(&bracket(t1, t3), t2) <= 1e-12, "n={n}");
        }
    }

    #[test]
    fn casimir_is_scalar_up_to_n20() {
        for n in 0..=20 {
            let r = build_irrep::<f64>(n).unwrap();
            let cas = casimir(&r);
            let expected = casimir_eigenvalue::<f64>(n);
            for i in 0..=n {
                for j in 0..=n {
                    let target = if i == j { expected } else { 0.0 };
                    assert!((cas[(i, j)] - c(target, 0.0)).norm() <= 1e-13 * (1.0 + target), "n={n}");
                }
            }
        }
    }

    #[test]
    fn generators_skew_hermitian_under_gram() {
        for n in 0..=20 {
            let r = build_irrep::<f64>(n).unwrap();
            assert!(r.skew_hermitian_residual() <= 1e-12, "n={n}");
            assert_eq!(r.gram()[(0, 0)], c(1.0, 0.0));
        }
    }

    #[test]
    fn weight_periodicity_4pi() {
        for n in 0..=8 {
            let r = build_irrep::<f64>(n).unwrap();
            let e = exp_lift(&r, [0.0, 0.0, 4.0 * std::f64::consts::PI]);
            assert!(diff(&e, &CMatrix::identity(n + 1, n + 1)) <= 1e-9, "n={n}");
        }
    }

    #[test]
    fn rejects_large_weight() {
        assert!(matches!(
            build_irrep::<f64>(MAX_HIGHEST_WEIGHT + 1),
            Err(Su2Error::WeightTooLarge { .. })
        ));
    }

    #[test]
    fn matrix_element_at_identity_is_gram() {
        let r = build_irrep::<f64>(4).unwrap();
        let e = Su2Matrix::identity();
        for k in 0..=4 {
            for l in 0..=4 {
                let v = matrix_element(&r, k, l, &e).unwrap();
                let expected = if k == l { r.gram()[(k, k)] } else { c(0.0, 0.0) };
                assert!((v - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn standard_representation_is_g_itself() {
        let r = build_irrep::<f64>(1).unwrap();
        let g = euler_zyz(0.3, 1.1, -2.0) * exp_algebra([0.2, -0.7, 0.4]);
        for k in 0..2 {
            for l in 0..2 {
                let v = matrix_element(&r, k, l, &g).unwrap();
                assert!((v - g[(l, k)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn matrix_element_rejects_non_unitary() {
        let r = build_irrep::<f64>(2).unwrap();
        let g = Su2Matrix::identity() * c(1.1, 0.0);
        assert!(matches!(matrix_element(&r, 0, 0, &g), Err(Su2Error::NotUnitary { .. })));
        assert!(matches!(
            matrix_element(&r, 3, 0, &Su2Matrix::identity()),
            Err(Su2Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn symmetric_power_agrees_with_exponentiated_generators() {
        let samples = [[0.3, -1.2, 0.8], [2.0, 0.1, -0.4], [-0.5, 0.5, 3.0]];
        for n in 0..=10 {
            let r = build_irrep::<f64>(n).unwrap();
            for a in samples {
                let lifted = symmetric_power(n, &exp_algebra(a));
                let exponentiated = exp_lift(&r, a);
                let scale = 1.0 + max_abs(&lifted);
                assert!(diff(&lifted, &exponentiated) <= 1e-10 * scale, "n={n}");
            }
        }
    }

    #[test]
    fn left_invariant_derivative_of_matrix_elements() {
        let n = 3;
        let r = build_irrep::<f64>(n).unwrap();
        let g = euler_zyz(0.7, 1.3, 2.1);
        let step = 1e-5;
        for i in 1..=3 {
            let mut dir = [0.0; 3];
            for k in 0..=n {
                for l in 0..=n {
                    dir[i - 1] = step;
                    let plus = matrix_element(&r, k, l, &(g * exp_algebra(dir))).unwrap();
                    dir[i - 1] = -step;
                    let minus = matrix_element(&r, k, l, &(g * exp_algebra(dir))).unwrap();
                    let fd = (plus - minus) / (2.0 * step);
                    // (g T_i v_k, v_l) = (rho(g) T_i)[l][k] * gram[l]
                    let exact = (symmetric_power(n, &g) * r.theta(i))[(l, k)] * r.gram()[(l, l)];
                    assert!((fd - exact).norm() <= 1e-8, "i={i} k={k} l={l}");
                }
            }
        }
    }

    #[test]
    fn hopf_direction_of_euler_angles() {
        // Ad(g)ϑ3 for g = exp(aϑ3)exp(bϑ2)exp(cϑ3) is (-sin b cos a, sin b sin a, cos b).
        let (a, b, cc) = (0.4, 1.2, -0.9);
        let g = euler_zyz(a, b, cc);
        let v = algebra_coords(&adjoint_action(&g, &theta_matrix(3)));
        let expected = [-b.sin() * a.cos(), b.sin() * a.sin(), b.cos()];
        for i in 0..3 {
            assert!((v[i] - expected[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn json_layout() {
        let r = build_irrep::<f64>(1).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["n"], 1);
        assert_eq!(v["T3"][0][0], serde_json::json!([0.0, 0.5]));
        assert_eq!(v["gram"][1][1], serde_json::json!([1.0, 0.0]));
        for key in ["X", "Y", "H", "T1", "T2", "T3", "gram"] {
            assert_eq!(v[key].as_array().unwrap().len(), 2);
        }
    }

    #[test]
    fn f32_representation_builds() {
        let r = build_irrep::<f32>(3).unwrap();
        let cas = casimir(&r);
        assert!((cas[(2, 2)].re - 3.75).abs() < 1e-5);
    }

    #[cfg(feature = "exact")]
    mod exact {
        use super::super::*;
        use num_bigint::BigInt;
        use num_rational::BigRational;

        #[test]
        fn casimir_is_exactly_scalar() {
            for n in 0..=12 {
                let r = build_irrep::<BigRational>(n).unwrap();
                let expected = CMatrix::<BigRational>::identity(n + 1, n + 1)
                    * Complex::new(
                        casimir_eigenvalue::<BigRational>(n),
                        BigRational::from_integer(BigInt::from(0)),
                    );
                assert_eq!(casimir(&r), expected, "n={n}");
            }
        }

        #[test]
        fn exact_brackets_and_gram() {
            for n in 0..=12 {
                let r = build_irrep::<BigRational>(n).unwrap();
                assert_eq!(bracket(r.t2(), r.t1()), r.t3().clone());
                let zero = CMatrix::<BigRational>::from_element(
                    n + 1,
                    n + 1,
                    Complex::new(BigRational::from_integer(0.into()), BigRational::from_integer(0.into())),
                );
                for t in [r.t1(), r.t2(), r.t3()] {
                    assert_eq!(r.gram() * t + conj_transpose(t) * r.gram(), zero);
                }
            }
        }

        #[test]
        fn gram_does_not_overflow_at_max_weight() {
            let r = build_irrep::<BigRational>(MAX_HIGHEST_WEIGHT).unwrap();
            assert!(
                r.gram()[(MAX_HIGHEST_WEIGHT, MAX_HIGHEST_WEIGHT)].re
                    > BigRational::from_integer(BigInt::from(u64::MAX))
            );
        }
    }
}
