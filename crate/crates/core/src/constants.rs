//! Constants of the extension framework on the unit interval and the
//! closed-form time integrals behind every weighted norm.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::SinSeries;

/// Orders closer than this to 0 or 1 are rejected: `kappa` blows up as
/// s -> 0 and the weight t^{1-2s} degenerates as s -> 1.
pub const S_MIN: f64 = 1e-3;

/// Lanczos approximation with g = 7 and nine coefficients (the set
/// published with the GNU Scientific Library and reproduced widely).
/// Relative accuracy is about 1e-15 for positive real arguments.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments that are not nonpositive integers.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let z = x - 1.0;
        let mut acc = LANCZOS_COEFFS[0];
        for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let w = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * w.powf(z + 0.5) * (-w).exp() * acc
    }
}

/// Exponent s of the spectral fractional Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub const HALF: FractionalOrder = FractionalOrder(0.5);

    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s > S_MIN && s < 1.0 - S_MIN {
            Ok(Self(s))
        } else {
            Err(Error::InvalidOrder(s))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_half(self) -> bool {
        self.0 == 0.5
    }

    /// Exponent 1 - 2s of the weight in the energy norm.
    pub fn energy_weight(self) -> f64 {
        1.0 - 2.0 * self.0
    }

    /// Exponent 2s - 1 of the dual weight used for fluxes and divergences.
    pub fn dual_weight(self) -> f64 {
        2.0 * self.0 - 1.0
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        Self::new(s)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(s: FractionalOrder) -> f64 {
        s.0
    }
}

/// The interval (0, 1) together with the cap on series length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    max_modes: usize,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self { max_modes: 64 }
    }
}

impl DomainSpec {
    pub fn new(max_modes: usize) -> Result<Self> {
        if max_modes == 0 {
            return Err(Error::InvalidParameter("max_modes must be positive".into()));
        }
        Ok(Self { max_modes })
    }

    pub fn max_modes(&self) -> usize {
        self.max_modes
    }

    /// j-th Dirichlet eigenvalue j^2 pi^2 (j >= 1).
    pub fn lambda(&self, j: usize) -> f64 {
        let w = j as f64 * PI;
        w * w
    }

    /// First `n` eigenvalues.
    pub fn lambdas(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|j| self.lambda(j)).collect()
    }

    /// L2-normalized eigenfunction sqrt(2) sin(j pi x).
    pub fn eigenfunction(&self, j: usize) -> SinSeries {
        SinSeries::mode(j, std::f64::consts::SQRT_2)
    }

    pub fn eigenfunctions(&self, n: usize) -> Vec<SinSeries> {
        (1..=n).map(|j| self.eigenfunction(j)).collect()
    }

    pub fn check_modes(&self, n: usize) -> Result<()> {
        if n > self.max_modes {
            Err(Error::InvalidParameter(format!(
                "{n} modes requested but the series cap is {}",
                self.max_modes
            )))
        } else {
            Ok(())
        }
    }
}

/// C_s = 2^{1-2s} Gamma(1-s) / Gamma(s), the factor linking g = C_s f.
pub fn extension_constant(s: FractionalOrder) -> f64 {
    if s.is_half() {
        return 1.0;
    }
    let s = s.value();
    2f64.powf(1.0 - 2.0 * s) * gamma(1.0 - s) / gamma(s)
}

/// kappa_s = C_s^{-1/2}, the trace-norm constant.
pub fn kappa(s: FractionalOrder) -> f64 {
    extension_constant(s).sqrt().recip()
}

/// C_F = lambda_1^{-1/2}.
pub fn friedrichs_constant(domain: &DomainSpec) -> f64 {
    domain.lambda(1).sqrt().recip()
}

/// int_0^inf t^a t^k e^{-c t} dt = Gamma(a+k+1) / c^{a+k+1}.
pub fn weighted_exp_integral(a: f64, k: u32, c: f64) -> Result<f64> {
    let p = a + k as f64 + 1.0;
    if !(p > 0.0) {
        return Err(Error::Domain(format!(
            "t^{a} t^{k} is not integrable at 0 (exponent sum {p} <= 0)"
        )));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("decay rate {c} must be positive")));
    }
    Ok(gamma(p) / c.powf(p))
}

/// Tabulates Gamma(a + n + 1) for all power sums n a Gram entry can need,
/// so the closed-form integrals do not re-evaluate Gamma per term pair.
#[derive(Debug, Clone)]
pub struct GramIntegrator {
    exponent: f64,
    gammas: Vec<f64>,
}

impl GramIntegrator {
    pub fn new(exponent: f64, max_power_sum: u32) -> Result<Self> {
        if !exponent.is_finite() {
            return Err(Error::Domain(format!(
                "weight exponent {exponent} is not finite"
            )));
        }
        // entries with a + n + 1 <= 0 are left as NaN and rejected per pair
        let gammas = (0..=max_power_sum)
            .map(|n| {
                let p = exponent + n as f64 + 1.0;
                if p > 0.0 {
                    gamma(p)
                } else {
                    f64::NAN
                }
            })
            .collect();
        Ok(Self { exponent, gammas })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// int_0^inf t^exponent t^k e^{-c t} dt.
    pub fn integrate(&self, k: u32, c: f64) -> Result<f64> {
        match self.gammas.get(k as usize) {
            Some(g) if c > 0.0 && c.is_finite() && !g.is_nan() => {
                Ok(g / c.powf(self.exponent + k as f64 + 1.0))
            }
            _ => weighted_exp_integral(self.exponent, k, c),
        }
    }
}
