//! Linear stability of the interior equilibrium.
//!
//! Linearizing the delayed dynamics around the mixed rest point gives the
//! characteristic function
//!
//! ```text
//! chi(lambda) = lambda - a * L(lambda)
//! ```
//!
//! where `a` is the linear feedback coefficient of the game (always negative
//! when an interior equilibrium exists) and `L` is the Laplace transform of
//! the delay kernel. Each kernel family has one free parameter; this module
//! locates the value where a conjugate pair of roots reaches the imaginary
//! axis, using closed forms for the critical value and frequency, and a
//! Newton tracker for roots near the axis to measure the crossing speed.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::game::GameCoefficients;
use crate::kernel::{DelayKernel, KernelError, MAX_GAMMA_SHAPE};

/// Convergence threshold for [`newton_root`].
pub const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;
/// Relative offset used by the finite-difference crossing rate.
const CROSSING_STEP_REL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("newton iteration stalled at lambda = {lambda} (residual {residual:.3e})")]
    NewtonDivergence { lambda: Complex64, residual: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Which scalar is swept to destabilize the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BifurcationParam {
    /// Lag of a point kernel.
    Tau,
    /// Support width of a flat kernel.
    TauMax,
    /// Rate of a gamma kernel. Instability sits on the *small* side.
    Beta,
    /// Lag of the delayed atom in a two-atom kernel.
    TauDiscrete,
}

impl fmt::Display for BifurcationParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BifurcationParam::Tau => "tau",
            BifurcationParam::TauMax => "tau_max",
            BifurcationParam::Beta => "beta",
            BifurcationParam::TauDiscrete => "tau_discrete",
        })
    }
}

/// Point where a conjugate root pair sits exactly on the imaginary axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfPoint {
    pub param: BifurcationParam,
    pub critical_value: f64,
    /// Angular frequency of the root pair at the crossing, `> 0`.
    pub omega0: f64,
    /// Sign of `d Re(lambda) / d param` at the crossing: `+1` means the
    /// equilibrium loses stability as the parameter grows past critical,
    /// `-1` means it loses stability below critical.
    pub crossing_sign: i8,
}

/// Outcome of the closed-form stability analysis for one kernel family.
#[derive(Debug, Clone, PartialEq)]
pub enum StabilityVerdict {
    HopfAt(HopfPoint),
    /// No parameter value moves roots off the left half plane.
    StableForAllDelays,
    /// The family shape rules out a crossing; `reason` says why.
    NoBifurcation { reason: String },
}

impl StabilityVerdict {
    pub fn hopf(&self) -> Option<&HopfPoint> {
        match self {
            StabilityVerdict::HopfAt(h) => Some(h),
            _ => None,
        }
    }
}

/// Kernel family with its bifurcation parameter left free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    Dirac,
    Uniform,
    Gamma { k: u32 },
    Discrete { p: f64 },
}

impl KernelFamily {
    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            KernelFamily::Dirac | KernelFamily::Uniform => Ok(()),
            KernelFamily::Gamma { k } => {
                if k == 0 || k > MAX_GAMMA_SHAPE {
                    Err(KernelError::InvalidShape(format!(
                        "gamma shape must be in 1..={}, got {}",
                        MAX_GAMMA_SHAPE, k
                    )))
                } else {
                    Ok(())
                }
            }
            KernelFamily::Discrete { p } => {
                if p.is_finite() && (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(KernelError::InvalidShape(format!(
                        "mix weight must lie in [0, 1], got {}",
                        p
                    )))
                }
            }
        }
    }

    pub fn param(&self) -> BifurcationParam {
        match self {
            KernelFamily::Dirac => BifurcationParam::Tau,
            KernelFamily::Uniform => BifurcationParam::TauMax,
            KernelFamily::Gamma { .. } => BifurcationParam::Beta,
            KernelFamily::Discrete { .. } => BifurcationParam::TauDiscrete,
        }
    }

    /// Concrete kernel at one value of the free parameter.
    pub fn kernel_at(&self, value: f64) -> DelayKernel {
        match *self {
            KernelFamily::Dirac => DelayKernel::Dirac { tau: value },
            KernelFamily::Uniform => DelayKernel::Uniform { tau_max: value },
            KernelFamily::Gamma { k } => DelayKernel::Gamma { k, beta: value },
            KernelFamily::Discrete { p } => DelayKernel::Discrete { p, tau: value },
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelFamily::Dirac => f.write_str("dirac"),
            KernelFamily::Uniform => f.write_str("uniform"),
            KernelFamily::Gamma { k } => write!(f, "gamma:{}", k),
            KernelFamily::Discrete { p } => write!(f, "discrete:{}", p),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = KernelError;

    /// Parses `dirac`, `uniform`, `gamma:<k>`, or `discrete:<p>`.
    fn from_str(s: &str) -> Result<Self, KernelError> {
        let parts: Vec<&str> = s.split(':').collect();
        let arity = |n: usize| -> Result<(), KernelError> {
            if parts.len() != n + 1 {
                Err(KernelError::Parse(format!(
                    "family `{}` takes {} parameter(s), got {}",
                    parts[0],
                    n,
                    parts.len() - 1
                )))
            } else {
                Ok(())
            }
        };
        let family = match parts[0] {
            "dirac" => {
                arity(0)?;
                KernelFamily::Dirac
            }
            "uniform" => {
                arity(0)?;
                KernelFamily::Uniform
            }
            "gamma" => {
                arity(1)?;
                let k: u32 = parts[1].parse().map_err(|_| {
                    KernelError::Parse(format!("bad gamma shape `{}`", parts[1]))
                })?;
                KernelFamily::Gamma { k }
            }
            "discrete" => {
                arity(1)?;
                let p: f64 = parts[1].parse().map_err(|_| {
                    KernelError::Parse(format!("bad mix weight `{}`", parts[1]))
                })?;
                KernelFamily::Discrete { p }
            }
            other => {
                return Err(KernelError::Parse(format!(
                    "unknown kernel family `{}` (expected dirac, uniform, gamma:<k>, discrete:<p>)",
                    other
                )))
            }
        };
        family.validate().map_err(|e| match e {
            KernelError::InvalidShape(msg) => KernelError::Parse(msg),
            other => other,
        })?;
        Ok(family)
    }
}

/// Closed-form Hopf point of `family` for the given game, if one exists.
pub fn hopf_point(
    family: KernelFamily,
    game: &GameCoefficients,
) -> Result<StabilityVerdict, KernelError> {
    family.validate()?;
    // Restoring strength of the linearized feedback loop; positive because
    // delta > 0 and gamma in (0, 1/4] for any interior equilibrium.
    let strength = -game.linear;
    let verdict = match family {
        KernelFamily::Dirac => StabilityVerdict::HopfAt(HopfPoint {
            param: BifurcationParam::Tau,
            critical_value: std::f64::consts::FRAC_PI_2 / strength,
            omega0: strength,
            crossing_sign: 1,
        }),
        KernelFamily::Uniform => {
            let critical = std::f64::consts::PI * std::f64::consts::PI / (2.0 * strength);
            StabilityVerdict::HopfAt(HopfPoint {
                param: BifurcationParam::TauMax,
                critical_value: critical,
                // Exactly half a period of lag across the support: omega0 *
                // tau_max = pi at the crossing.
                omega0: std::f64::consts::PI / critical,
                crossing_sign: 1,
            })
        }
        KernelFamily::Gamma { k } => {
            if k == 1 {
                StabilityVerdict::NoBifurcation {
                    reason: "exponential lag (shape 1) cannot push roots across the axis; \
                             the equilibrium stays stable for every rate"
                        .to_owned(),
                }
            } else {
                let theta = std::f64::consts::FRAC_PI_2 / f64::from(k);
                let cos_t = theta.cos();
                StabilityVerdict::HopfAt(HopfPoint {
                    param: BifurcationParam::Beta,
                    critical_value: strength * cos_t.powi(k as i32 + 1) / theta.sin(),
                    omega0: strength * cos_t.powi(k as i32),
                    // Slow rates (long mean lag) destabilize, so roots cross
                    // into the right half plane as beta *decreases*.
                    crossing_sign: -1,
                })
            }
        }
        KernelFamily::Discrete { p } => {
            if p <= 0.5 {
                // The instantaneous atom dominates; no lag can produce a
                // purely imaginary root.
                StabilityVerdict::StableForAllDelays
            } else {
                let omega0 = strength * (2.0 * p - 1.0).sqrt();
                StabilityVerdict::HopfAt(HopfPoint {
                    param: BifurcationParam::TauDiscrete,
                    critical_value: (-(1.0 - p) / p).acos() / omega0,
                    omega0,
                    crossing_sign: 1,
                })
            }
        }
    };
    Ok(verdict)
}

/// `chi(lambda) = lambda - a * L(lambda)`.
pub fn char_residual(
    game: &GameCoefficients,
    kernel: &DelayKernel,
    lambda: Complex64,
) -> Result<Complex64, KernelError> {
    Ok(lambda - game.linear * kernel.laplace(lambda)?)
}

/// `chi'(lambda) = 1 - a * L'(lambda)`.
pub fn char_deriv(
    game: &GameCoefficients,
    kernel: &DelayKernel,
    lambda: Complex64,
) -> Result<Complex64, KernelError> {
    Ok(Complex64::ONE - game.linear * kernel.laplace_deriv(lambda)?)
}

/// Newton refinement of a characteristic root from `start`.
///
/// Converges quadratically from any seed reasonably close to a simple root;
/// the transcendental term is entire (or analytic on the domain the kernel
/// transform allows), so no damping is needed.
pub fn newton_root(
    game: &GameCoefficients,
    kernel: &DelayKernel,
    start: Complex64,
) -> Result<Complex64, SpectrumError> {
    let mut lambda = start;
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let chi = char_residual(game, kernel, lambda)?;
        residual = chi.norm();
        if residual < NEWTON_TOL {
            return Ok(lambda);
        }
        let step = chi / char_deriv(game, kernel, lambda)?;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        lambda -= step;
    }
    Err(SpectrumError::NewtonDivergence { lambda, residual })
}

/// `d lambda / d param` at the crossing, by central differencing of the
/// tracked root. The real part is the speed at which the pair leaves the
/// axis; its sign must agree with the closed-form `crossing_sign`.
pub fn crossing_rate(
    family: KernelFamily,
    game: &GameCoefficients,
    hopf: &HopfPoint,
) -> Result<Complex64, SpectrumError> {
    let h = CROSSING_STEP_REL * hopf.critical_value;
    let seed = Complex64::new(0.0, hopf.omega0);
    let above = newton_root(game, &family.kernel_at(hopf.critical_value + h), seed)?;
    let below = newton_root(game, &family.kernel_at(hopf.critical_value - h), seed)?;
    Ok((above - below) / (2.0 * h))
}

/// Sign of the real crossing speed, `+1` or `-1`.
pub fn crossing_direction(
    family: KernelFamily,
    game: &GameCoefficients,
    hopf: &HopfPoint,
) -> Result<i8, SpectrumError> {
    let rate = crossing_rate(family, game, hopf)?;
    Ok(if rate.re >= 0.0 { 1 } else { -1 })
}
