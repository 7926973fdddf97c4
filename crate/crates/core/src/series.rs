//! Finite sine and cosine expansions on (0, 1).
//!
//! Every x-dependent quantity (right-hand sides, eigenfunctions and their
//! perturbations, traces, residuals, flux components) is one of these two
//! types, so all L2 integrals reduce to orthogonality sums.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{DomainSpec, FractionalOrder};

/// Common interface of the x-parts carried by separable terms.
pub trait XSeries: Clone + PartialEq + std::fmt::Debug + Send + Sync {
    fn zero() -> Self;
    /// L2(0,1) inner product with a series of the same kind.
    fn inner(&self, other: &Self) -> f64;
    fn eval(&self, x: f64) -> f64;
    fn axpy(&mut self, a: f64, other: &Self);
    fn scale(&mut self, a: f64);
    fn max_abs(&self) -> f64;

    fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }
}

fn axpy_vec(dst: &mut Vec<f64>, a: f64, src: &[f64]) {
    if dst.len() < src.len() {
        dst.resize(src.len(), 0.0);
    }
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

fn dot_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// sum_m c_m sin(m pi x), m = 1, 2, ...; `coeffs[0]` multiplies sin(pi x).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SinSeries {
    coeffs: Vec<f64>,
}

/// sum_m c_m cos(m pi x), m = 0, 1, ...; `coeffs[0]` is the constant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CosSeries {
    coeffs: Vec<f64>,
}

impl SinSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// c sin(m pi x) for m >= 1.
    pub fn mode(m: usize, c: f64) -> Self {
        assert!(m >= 1, "sine modes start at m = 1");
        let mut coeffs = vec![0.0; m];
        coeffs[m - 1] = c;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of sin(m pi x); zero beyond the stored length.
    pub fn coeff(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.coeffs.get(m - 1).copied().unwrap_or(0.0)
        }
    }

    /// Highest stored mode.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Iterator over (m, c_m).
    pub fn modes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs.iter().enumerate().map(|(i, &c)| (i + 1, c))
    }

    pub fn map_modes(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            coeffs: self.modes().map(|(m, c)| f(m, c)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// d/dx: sin(m pi x) -> m pi cos(m pi x).
    pub fn derivative(&self) -> CosSeries {
        let mut coeffs = vec![0.0; self.coeffs.len() + 1];
        for (m, c) in self.modes() {
            coeffs[m] = m as f64 * PI * c;
        }
        CosSeries { coeffs }
    }

    /// -d^2/dx^2: multiplies mode m by (m pi)^2.
    pub fn neg_laplacian(&self) -> SinSeries {
        self.map_modes(|m, c| {
            let w = m as f64 * PI;
            w * w * c
        })
    }

    /// d^2/dx^2.
    pub fn laplacian(&self) -> SinSeries {
        self.neg_laplacian().scaled(-1.0)
    }

    /// ||v||_s = (sum_j lambda_j^s (v, phi_j)^2)^{1/2} with phi_j = sqrt(2) sin(j pi x).
    pub fn fractional_norm(&self, s: FractionalOrder, domain: &DomainSpec) -> f64 {
        // (v, phi_j) = c_j / sqrt(2), so (v, phi_j)^2 = c_j^2 / 2
        self.modes()
            .map(|(m, c)| domain.lambda(m).powf(s.value()) * 0.5 * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Right-hand side f(x) = sum_{j <= modes} j^{-decay} sin(j pi x).
    pub fn power_decay(decay: f64, modes: usize) -> Self {
        Self {
            coeffs: (1..=modes).map(|j| (j as f64).powf(-decay)).collect(),
        }
    }

    /// Drops trailing zero coefficients.
    pub fn trimmed(mut self) -> Self {
        while self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
        self
    }
}

impl CosSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// c cos(m pi x), m >= 0.
    pub fn mode(m: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; m + 1];
        coeffs[m] = c;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, m: usize) -> f64 {
        self.coeffs.get(m).copied().unwrap_or(0.0)
    }

    pub fn modes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs.iter().copied().enumerate()
    }

    /// d/dx: cos(m pi x) -> -m pi sin(m pi x); the constant mode drops out.
    pub fn derivative(&self) -> SinSeries {
        SinSeries {
            coeffs: self
                .modes()
                .skip(1)
                .map(|(m, c)| -(m as f64) * PI * c)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

impl XSeries for SinSeries {
    fn zero() -> Self {
        Self::default()
    }

    fn inner(&self, other: &Self) -> f64 {
        0.5 * dot_vec(&self.coeffs, &other.coeffs)
    }

    fn eval(&self, x: f64) -> f64 {
        self.modes()
            .map(|(m, c)| c * (m as f64 * PI * x).sin())
            .sum()
    }

    fn axpy(&mut self, a: f64, other: &Self) {
        axpy_vec(&mut self.coeffs, a, &other.coeffs);
    }

    fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl XSeries for CosSeries {
    fn zero() -> Self {
        Self::default()
    }

    fn inner(&self, other: &Self) -> f64 {
        let c0 = self.coeff(0) * other.coeff(0);
        let rest = match (self.coeffs.get(1..), other.coeffs.get(1..)) {
            (Some(a), Some(b)) => dot_vec(a, b),
            _ => 0.0,
        };
        c0 + 0.5 * rest
    }

    fn eval(&self, x: f64) -> f64 {
        self.modes()
            .map(|(m, c)| c * (m as f64 * PI * x).cos())
            .sum()
    }

    fn axpy(&mut self, a: f64, other: &Self) {
        axpy_vec(&mut self.coeffs, a, &other.coeffs);
    }

    fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite midpoint rule; enough for low-degree trigonometric
    /// polynomials on a fine grid.
    fn midpoint(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        (0..n).map(|i| f((i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn derivative_of_first_mode() {
        let d = SinSeries::mode(1, 1.0).derivative();
        assert_eq!(d.coeff(0), 0.0);
        assert!((d.coeff(1) - PI).abs() < 1e-15);
        assert!(SinSeries::zero().derivative().is_zero());
    }

    #[test]
    fn derivative_norm_two_modes() {
        let v = SinSeries::new(vec![1.0, 0.0, 1.0]);
        let d = v.derivative();
        let exact = (PI * PI + 9.0 * PI * PI) / 2.0;
        assert!((d.inner(&d) - exact).abs() < 1e-12);
        let quad = midpoint(|x| d.eval(x).powi(2), 20_000);
        assert!((quad - exact).abs() / exact < 1e-8);
    }

    #[test]
    fn neg_laplacian_eigen_relation() {
        for j in 1..6 {
            let v = SinSeries::mode(j, 1.0).neg_laplacian();
            let l = DomainSpec::default().lambda(j);
            assert!((v.coeff(j) - l).abs() < 1e-12 * l);
        }
        assert!(SinSeries::zero().neg_laplacian().is_zero());
    }

    #[test]
    fn neg_laplacian_vs_finite_differences() {
        let v = SinSeries::new(vec![0.3, -1.2]);
        let l = v.neg_laplacian();
        let h = 1e-4;
        for &x in &[0.13, 0.4, 0.77] {
            let fd = -(v.eval(x + h) - 2.0 * v.eval(x) + v.eval(x - h)) / (h * h);
            assert!((fd - l.eval(x)).abs() < 1e-5 * l.eval(x).abs().max(1.0));
        }
    }

    #[test]
    fn inner_products() {
        let s1 = SinSeries::mode(1, 1.0);
        let s2 = SinSeries::mode(2, 1.0);
        assert!((s1.inner(&s1) - 0.5).abs() < 1e-16);
        assert_eq!(s1.inner(&s2), 0.0);
        let f = SinSeries::power_decay(1.0, 5);
        let phi1 = DomainSpec::default().eigenfunction(1);
        let zeta1 = phi1.inner(&f);
        assert!((zeta1 - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-15);
        let quad = midpoint(|x| phi1.eval(x) * f.eval(x), 20_000);
        assert!((quad - zeta1).abs() < 1e-8);
        let c0 = CosSeries::mode(0, 2.0);
        assert!((c0.inner(&c0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn fractional_norm_first_eigenfunction() {
        let d = DomainSpec::default();
        let phi1 = d.eigenfunction(1);
        let n = phi1.fractional_norm(FractionalOrder::HALF, &d);
        assert!((n - PI.sqrt()).abs() < 1e-14);
        assert_eq!(
            SinSeries::zero().fractional_norm(FractionalOrder::HALF, &d),
            0.0
        );
    }

    #[test]
    fn rhs_coefficients() {
        let f = SinSeries::power_decay(3.7, 1);
        assert_eq!(f.coeffs(), &[1.0]);
        let f = SinSeries::power_decay(1.0, 12);
        for j in 1..=12 {
            assert!((f.coeff(j) - 1.0 / j as f64).abs() < 1e-16);
        }
        let f = SinSeries::power_decay(2.0, 16);
        assert!((f.coeff(16) - 1.0 / 256.0).abs() < 1e-16);
        assert_eq!(f.coeff(17), 0.0);
    }

    #[test]
    fn boundary_values_vanish() {
        let v = SinSeries::new(vec![0.4, 1.0, -2.0, 0.1]);
        assert!(v.eval(0.0).abs() < 1e-15);
        assert!(v.eval(1.0).abs() < 1e-14);
    }

    fn sin_series() -> impl Strategy<Value = SinSeries> {
        prop::collection::vec(-2.0..2.0f64, 1..8).prop_map(SinSeries::new)
    }

    proptest! {
        #[test]
        fn parseval_against_quadrature(v in sin_series()) {
            let exact = v.inner(&v);
            let quad = midpoint(|x| v.eval(x).powi(2), 4_000);
            prop_assert!((exact - quad).abs() <= 1e-8 * exact.max(1e-12));
        }

        #[test]
        fn second_derivative_transfer(v in sin_series()) {
            // d/dx twice through the cosine series equals minus the -Laplacian
            let dd = v.derivative().derivative();
            let l = v.neg_laplacian();
            for m in 1..=v.len() {
                prop_assert!((dd.coeff(m) + l.coeff(m)).abs() <= 1e-12 * l.coeff(m).abs().max(1.0));
            }
        }

        #[test]
        fn fractional_norm_monotone_in_s(v in sin_series(), a in 0.05..0.9f64, b in 0.05..0.9f64) {
            let d = DomainSpec::default();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let nlo = v.fractional_norm(FractionalOrder::new(lo).unwrap(), &d);
            let nhi = v.fractional_norm(FractionalOrder::new(hi).unwrap(), &d);
            prop_assert!(nlo <= nhi * (1.0 + 1e-14));
        }

        #[test]
        fn l2_bounded_by_fractional_norm(v in sin_series(), s in 0.05..0.95f64) {
            let d = DomainSpec::default();
            let s = FractionalOrder::new(s).unwrap();
            let cf = crate::constants::friedrichs_constant(&d);
            prop_assert!(v.norm() <= cf.powf(s.value()) * v.fractional_norm(s, &d) * (1.0 + 1e-14));
        }
    }
}
