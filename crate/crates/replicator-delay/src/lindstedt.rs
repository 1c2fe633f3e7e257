//! Closed-form amplitude of the bifurcating limit cycle.
//!
//! Near the Hopf point the cycle radius grows like a square root of the
//! parameter offset `mu` from critical: `amplitude = sqrt(slope * mu)`,
//! with `slope` the ratio of two polynomials in the expansion coefficients.
//! Each kernel family gets its own pair; the two-atom kernel needs a 34-term
//! polynomial evaluated with compensated summation, plus an exact-rational
//! twin used as an oracle for the floating-point path.

use std::fmt;

use num_rational::BigRational;
use num_traits::{Pow, Zero};
use thiserror::Error;

use crate::game::{DiscreteCoefficients, ExactDiscreteCoefficients, GameCoefficients, GameError};
use crate::spectrum::{BifurcationParam, HopfPoint, KernelFamily};

/// The denominator is treated as vanishing below this fraction of the
/// numerator; the amplitude formula carries no information there.
const DEGENERATE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LindstedtError {
    #[error("cycle denominator {denominator:.3e} is degenerate against numerator {numerator:.3e}")]
    DegenerateDenominator { numerator: f64, denominator: f64 },
    #[error("prediction for the {expected} parameter got a Hopf point in {got}")]
    FamilyMismatch {
        expected: BifurcationParam,
        got: BifurcationParam,
    },
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criticality {
    /// The stable cycle lives on the side where the equilibrium is unstable.
    Supercritical,
    Subcritical,
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criticality::Supercritical => "supercritical",
            Criticality::Subcritical => "subcritical",
        })
    }
}

/// Cycle-growth law at one Hopf point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudePrediction {
    pub numerator: f64,
    pub denominator: f64,
    /// `numerator / denominator`; the squared amplitude per unit `mu`.
    pub slope: f64,
    /// Sign of `mu` on which the equilibrium is unstable.
    pub unstable_side: i8,
    pub criticality: Criticality,
}

impl AmplitudePrediction {
    fn build(numerator: f64, denominator: f64, hopf: &HopfPoint) -> Result<Self, LindstedtError> {
        if denominator.abs() < DEGENERATE_RATIO * numerator.abs() {
            return Err(LindstedtError::DegenerateDenominator {
                numerator,
                denominator,
            });
        }
        let slope = numerator / denominator;
        let criticality = if slope * f64::from(hopf.crossing_sign) > 0.0 {
            Criticality::Supercritical
        } else {
            Criticality::Subcritical
        };
        Ok(AmplitudePrediction {
            numerator,
            denominator,
            slope,
            unstable_side: hopf.crossing_sign,
            criticality,
        })
    }

    /// Cycle amplitude at offset `mu` from critical, `None` where the
    /// radicand is negative (no cycle on that side).
    pub fn amplitude(&self, mu: f64) -> Option<f64> {
        let radicand = self.slope * mu;
        (radicand >= 0.0).then(|| radicand.sqrt())
    }
}

fn expect_param(hopf: &HopfPoint, expected: BifurcationParam) -> Result<(), LindstedtError> {
    if hopf.param == expected {
        Ok(())
    } else {
        Err(LindstedtError::FamilyMismatch {
            expected,
            got: hopf.param,
        })
    }
}

/// Growth law for the point kernel, `mu = tau - tau_cr`.
pub fn predict_dirac(
    g: &GameCoefficients,
    hopf: &HopfPoint,
) -> Result<AmplitudePrediction, LindstedtError> {
    expect_param(hopf, BifurcationParam::Tau)?;
    let lag = hopf.critical_value;
    let (lin, quad, cub) = (g.linear, g.quadratic, g.cubic);
    let numerator = -20.0 * lin.powi(3);
    let denominator = 5.0 * lin * lin * cub * lag - 3.0 * lin * quad * quad * lag - quad * quad;
    AmplitudePrediction::build(numerator, denominator, hopf)
}

/// Growth law for the flat kernel, `mu = tau_max - tau_cr`.
pub fn predict_uniform(
    g: &GameCoefficients,
    hopf: &HopfPoint,
) -> Result<AmplitudePrediction, LindstedtError> {
    expect_param(hopf, BifurcationParam::TauMax)?;
    let numerator = 8.0 * g.linear * g.linear;
    let denominator = hopf.critical_value * (g.quadratic * g.quadratic - 2.0 * g.linear * g.cubic);
    AmplitudePrediction::build(numerator, denominator, hopf)
}

/// Second-harmonic response of the first-order correction for the gamma
/// family: per unit squared amplitude the correction is
/// `sin_coef * sin(2T) + cos_coef * cos(2T)` in scaled time `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaHarmonics {
    /// Lag angle of the kernel at the doubled frequency,
    /// `atan(2 omega0 / rate)`, on the `(0, pi/2)` branch.
    pub phase: f64,
    pub sin_coef: f64,
    pub cos_coef: f64,
}

/// Harmonic response coefficients entering the gamma growth law.
pub fn gamma_harmonics(g: &GameCoefficients, k: u32, hopf: &HopfPoint) -> GammaHarmonics {
    let (lin, quad) = (g.linear, g.quadratic);
    let w = hopf.omega0;
    let rate = hopf.critical_value;
    let ratio = w / rate;
    let phase = (2.0 * ratio).atan();
    let kf = f64::from(k);
    // Magnitudes of the kernel transform at the base and doubled frequency.
    let base_gain = (1.0 + ratio * ratio).powf(-kf / 2.0);
    let double_gain = (1.0 + 4.0 * ratio * ratio).powf(-kf / 2.0);
    let sin_k = (kf * phase).sin();
    let cos_k = (kf * phase).cos();
    let den = 4.0 * w * w + lin * lin * double_gain * double_gain + 4.0 * w * lin * double_gain * sin_k;
    GammaHarmonics {
        phase,
        sin_coef: -(lin * quad / 2.0) * base_gain * double_gain * cos_k / den,
        cos_coef: -(quad / 2.0) * base_gain * (2.0 * w + lin * double_gain * sin_k) / den,
    }
}

/// Growth law for the gamma family, `mu = rate - critical_rate`. The cycle
/// exists below the critical rate, so the slope is negative.
pub fn predict_gamma(
    g: &GameCoefficients,
    k: u32,
    hopf: &HopfPoint,
) -> Result<AmplitudePrediction, LindstedtError> {
    expect_param(hopf, BifurcationParam::Beta)?;
    debug_assert!(k >= 2, "shape {} has no Hopf point", k);
    let (lin, quad, cub) = (g.linear, g.quadratic, g.cubic);
    let rate = hopf.critical_value;
    let ratio = hopf.omega0 / rate;
    let kf = f64::from(k);
    let sec = (1.0 + ratio * ratio).sqrt();
    let base_gain = (1.0 + ratio * ratio).powf(-kf / 2.0);
    let h = gamma_harmonics(g, k, hopf);
    let numerator = (kf + 1.0) * (lin / rate) * base_gain - (kf - 1.0) / (kf + 1.0) * sec - ratio;
    let denominator = (quad * rate / (2.0 * (kf + 1.0) * lin)) * sec * (h.sin_coef * ratio + h.cos_coef)
        - quad * ratio * (1.0 + ratio * ratio).powf(-(kf + 1.0) / 2.0)
            * (h.cos_coef + (h.sin_coef / 2.0) * (ratio - 1.0))
        + (cub / 4.0) * base_gain;
    AmplitudePrediction::build(numerator, denominator, hopf)
}

/// Exponents of one monomial over the six two-atom expansion coefficients,
/// ordered `[lin_inst, lin_del, bilinear, quad_inst, cubic_del, cubic_inst]`.
#[derive(Clone, Copy)]
struct QuotientTerm {
    coeff: i8,
    powers: [u8; 6],
}

const fn qt(coeff: i8, powers: [u8; 6]) -> QuotientTerm {
    QuotientTerm { coeff, powers }
}

/// Power of the delayed linear gain in the pure squared-cross-term of the
/// delay group. Every monomial in the denominator has total degree 7 and a
/// single quadratic pair; with the variant power 2 below, this term alone
/// would break both rules and wreck the single-atom reduction the tests pin.
const CROSS_TERM_POWER: u8 = 5;
/// The rejected variant, kept so tests can show it breaks the reduction.
#[cfg(test)]
const CROSS_TERM_POWER_VARIANT: u8 = 2;

/// Terms multiplied by the critical lag.
fn delay_group(cross_power: u8) -> [QuotientTerm; 19] {
    [
        qt(5, [0, 6, 0, 0, 1, 0]),
        qt(1, [1, 5, 0, 0, 1, 0]),
        qt(-15, [1, 5, 0, 0, 0, 1]),
        qt(-3, [0, cross_power, 2, 0, 0, 0]),
        qt(-7, [0, 5, 1, 1, 0, 0]),
        qt(-4, [0, 5, 0, 2, 0, 0]),
        qt(6, [2, 4, 0, 0, 1, 0]),
        qt(-3, [2, 4, 0, 0, 0, 1]),
        qt(7, [1, 4, 2, 0, 0, 0]),
        qt(19, [1, 4, 1, 1, 0, 0]),
        qt(18, [1, 4, 0, 2, 0, 0]),
        qt(2, [3, 3, 0, 0, 1, 0]),
        qt(12, [3, 3, 0, 0, 0, 1]),
        qt(-12, [2, 3, 2, 0, 0, 0]),
        qt(-26, [2, 3, 1, 1, 0, 0]),
        qt(-8, [2, 3, 0, 2, 0, 0]),
        qt(-8, [4, 2, 0, 0, 1, 0]),
        qt(8, [3, 2, 2, 0, 0, 0]),
        qt(8, [3, 2, 1, 1, 0, 0]),
    ]
}

/// Terms free of the critical lag. These cancel exactly for games with a
/// centered equilibrium, which the exact-rational path can certify.
const CONST_GROUP: [QuotientTerm; 15] = [
    qt(15, [0, 5, 0, 0, 0, 1]),
    qt(-15, [1, 4, 0, 0, 1, 0]),
    qt(3, [1, 4, 0, 0, 0, 1]),
    qt(-1, [0, 4, 2, 0, 0, 0]),
    qt(-9, [0, 4, 1, 1, 0, 0]),
    qt(-18, [0, 4, 0, 2, 0, 0]),
    qt(-3, [2, 3, 0, 0, 1, 0]),
    qt(-12, [2, 3, 0, 0, 0, 1]),
    qt(11, [1, 3, 2, 0, 0, 0]),
    qt(33, [1, 3, 1, 1, 0, 0]),
    qt(12, [1, 3, 0, 2, 0, 0]),
    qt(12, [3, 2, 0, 0, 1, 0]),
    qt(-14, [2, 2, 2, 0, 0, 0]),
    qt(-18, [2, 2, 1, 1, 0, 0]),
    qt(4, [3, 1, 2, 0, 0, 0]),
];

fn coefficient_values(dc: &DiscreteCoefficients) -> [f64; 6] {
    [
        dc.lin_inst,
        dc.lin_del,
        dc.bilinear,
        dc.quad_inst,
        dc.cubic_del,
        dc.cubic_inst,
    ]
}

fn neumaier_sum(parts: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut lost = 0.0;
    for &x in parts {
        let next = sum + x;
        if sum.abs() >= x.abs() {
            lost += (sum - next) + x;
        } else {
            lost += (x - next) + sum;
        }
        sum = next;
    }
    sum + lost
}

fn eval_group(terms: &[QuotientTerm], values: &[f64; 6]) -> f64 {
    let mut monomials: Vec<f64> = terms
        .iter()
        .map(|t| {
            let mut m = f64::from(t.coeff);
            for (v, &e) in values.iter().zip(&t.powers) {
                m *= v.powi(i32::from(e));
            }
            m
        })
        .collect();
    // Largest magnitude first, so the compensated sum reports a clean zero
    // when the group cancels instead of rounding debris.
    monomials.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
    neumaier_sum(&monomials)
}

/// Numerator of the two-atom growth law.
pub fn discrete_numerator(dc: &DiscreteCoefficients) -> f64 {
    let (inst, del) = (dc.lin_inst, dc.lin_del);
    4.0 * del.powi(3) * (del - inst) * (inst + del).powi(2) * (4.0 * inst - 5.0 * del)
}

/// The two halves of the two-atom denominator: the part multiplied by the
/// critical lag and the lag-free part.
pub fn discrete_denominator_groups(dc: &DiscreteCoefficients) -> (f64, f64) {
    let values = coefficient_values(dc);
    (
        eval_group(&delay_group(CROSS_TERM_POWER), &values),
        eval_group(&CONST_GROUP, &values),
    )
}

fn exact_int(v: i8) -> BigRational {
    BigRational::from_integer(v.into())
}

fn eval_group_exact(terms: &[QuotientTerm], dc: &ExactDiscreteCoefficients) -> BigRational {
    let values = [
        &dc.lin_inst,
        &dc.lin_del,
        &dc.bilinear,
        &dc.quad_inst,
        &dc.cubic_del,
        &dc.cubic_inst,
    ];
    let mut sum = BigRational::zero();
    for t in terms {
        let mut m = exact_int(t.coeff);
        for (v, &e) in values.iter().zip(&t.powers) {
            m *= Pow::pow((*v).clone(), i32::from(e));
        }
        sum += m;
    }
    sum
}

/// Exact-rational twin of [`discrete_numerator`].
pub fn discrete_numerator_exact(dc: &ExactDiscreteCoefficients) -> BigRational {
    let inst = &dc.lin_inst;
    let del = &dc.lin_del;
    exact_int(4)
        * Pow::pow(del.clone(), 3i32)
        * (del - inst)
        * Pow::pow(inst + del, 2i32)
        * (exact_int(4) * inst - exact_int(5) * del)
}

/// Exact-rational twin of [`discrete_denominator_groups`].
pub fn discrete_denominator_groups_exact(
    dc: &ExactDiscreteCoefficients,
) -> (BigRational, BigRational) {
    (
        eval_group_exact(&delay_group(CROSS_TERM_POWER), dc),
        eval_group_exact(&CONST_GROUP, dc),
    )
}

/// Growth law for the two-atom kernel, `mu = tau - tau_cr`.
pub fn predict_discrete(
    dc: &DiscreteCoefficients,
    hopf: &HopfPoint,
) -> Result<AmplitudePrediction, LindstedtError> {
    expect_param(hopf, BifurcationParam::TauDiscrete)?;
    let numerator = discrete_numerator(dc);
    let (with_lag, without_lag) = discrete_denominator_groups(dc);
    let denominator = with_lag * hopf.critical_value + without_lag;
    AmplitudePrediction::build(numerator, denominator, hopf)
}

/// Dispatches to the family-specific growth law.
pub fn predict(
    family: KernelFamily,
    g: &GameCoefficients,
    hopf: &HopfPoint,
) -> Result<AmplitudePrediction, LindstedtError> {
    match family {
        KernelFamily::Dirac => predict_dirac(g, hopf),
        KernelFamily::Uniform => predict_uniform(g, hopf),
        KernelFamily::Gamma { k } => predict_gamma(g, k, hopf),
        KernelFamily::Discrete { p } => predict_discrete(&g.split(p)?, hopf),
    }
}
