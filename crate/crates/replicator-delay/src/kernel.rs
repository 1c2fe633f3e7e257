//! Delay kernels: Laplace transforms, support horizons, and quadrature.
//!
//! A kernel is a probability density (or atom mix) over past lags. Stability
//! analysis needs its Laplace transform along vertical lines in the complex
//! plane; the integrator needs the kernel reduced to weights on its own time
//! grid. Both live here so the two views cannot drift apart.
//!
//! Discretization places every node at an integer multiple of the step `dt`.
//! Atoms snap to the nearest grid point and the distributed kernels use
//! composite Simpson weights on the grid, so history lookups during
//! integration never interpolate at quadrature nodes. Call [`DelayKernel::align_dt`]
//! first when the atoms or the support edge must land on the grid exactly.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// Upper bound on quadrature nodes; past this the request is a mistake.
const MAX_NODES: usize = 20_000_000;

/// Largest accepted shape parameter for the Erlang family.
pub(crate) const MAX_GAMMA_SHAPE: u32 = 1_000_000;

/// Relative threshold below which the Uniform transform switches to series.
const UNIFORM_SERIES_CUTOFF: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("invalid kernel: {0}")]
    InvalidShape(String),
    #[error("kernel spec parse error: {0}")]
    Parse(String),
    #[error("laplace transform undefined at Re(lambda) = {re}; requires Re(lambda) > {bound}")]
    LaplaceDomain { re: f64, bound: f64 },
    #[error("step {dt} too coarse for kernel support scale {scale}")]
    Resolution { dt: f64, scale: f64 },
    #[error("discretization would need {n} nodes (cap {cap}); increase dt or tail mass")]
    TooManyNodes { n: usize, cap: usize },
    #[error("quadrature step must be positive and finite, got {dt}")]
    InvalidStep { dt: f64 },
    #[error("tail mass must lie in (0, 0.5), got {tail_mass}")]
    InvalidTailMass { tail_mass: f64 },
}

/// Normalized lag distributions supported by the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayKernel {
    /// All mass at a single lag `tau >= 0`.
    Dirac { tau: f64 },
    /// Flat density on `[0, tau_max]`.
    Uniform { tau_max: f64 },
    /// Erlang density with integer shape `k >= 1` and rate `beta > 0`.
    Gamma { k: u32, beta: f64 },
    /// Mass `1 - p` at lag zero and `p` at lag `tau`.
    Discrete { p: f64, tau: f64 },
}

impl DelayKernel {
    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |msg: String| Err(KernelError::InvalidShape(msg));
        match *self {
            DelayKernel::Dirac { tau } => {
                if !(tau >= 0.0) || !tau.is_finite() {
                    return bad(format!("dirac lag must be finite and >= 0, got {}", tau));
                }
            }
            DelayKernel::Uniform { tau_max } => {
                if !(tau_max > 0.0) || !tau_max.is_finite() {
                    return bad(format!("uniform support must be finite and > 0, got {}", tau_max));
                }
            }
            DelayKernel::Gamma { k, beta } => {
                if k == 0 || k > MAX_GAMMA_SHAPE {
                    return bad(format!("gamma shape must be in 1..={}, got {}", MAX_GAMMA_SHAPE, k));
                }
                if !(beta > 0.0) || !beta.is_finite() {
                    return bad(format!("gamma rate must be finite and > 0, got {}", beta));
                }
            }
            DelayKernel::Discrete { p, tau } => {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("discrete weight must satisfy 0 <= p <= 1, got {}", p));
                }
                if !(tau >= 0.0) || !tau.is_finite() {
                    return bad(format!("discrete lag must be finite and >= 0, got {}", tau));
                }
            }
        }
        Ok(())
    }

    /// Mean lag of the kernel.
    pub fn mean(&self) -> f64 {
        match *self {
            DelayKernel::Dirac { tau } => tau,
            DelayKernel::Uniform { tau_max } => 0.5 * tau_max,
            DelayKernel::Gamma { k, beta } => f64::from(k) / beta,
            DelayKernel::Discrete { p, tau } => p * tau,
        }
    }

    /// Lag beyond which at most `tail_mass` of the kernel remains.
    ///
    /// Exact support edge for the compact kernels; for the Erlang family the
    /// horizon is found by bisection on the survival function.
    pub fn truncation_time(&self, tail_mass: f64) -> f64 {
        match *self {
            DelayKernel::Dirac { tau } => tau,
            DelayKernel::Uniform { tau_max } => tau_max,
            DelayKernel::Discrete { p, tau } => {
                if p > 0.0 {
                    tau
                } else {
                    0.0
                }
            }
            DelayKernel::Gamma { k, beta } => {
                let shape = f64::from(k);
                let surv = |t: f64| gamma_ur(shape, beta * t);
                let mut hi = (shape / beta).max(1.0 / beta);
                let mut lo = 0.0;
                for _ in 0..200 {
                    if surv(hi) <= tail_mass {
                        break;
                    }
                    lo = hi;
                    hi *= 2.0;
                }
                for _ in 0..128 {
                    let mid = 0.5 * (lo + hi);
                    if surv(mid) <= tail_mass {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }

    /// Laplace transform of the lag density at `lambda`.
    ///
    /// Normalization means the value at `lambda = 0` is exactly 1. The
    /// Erlang transform only exists for `Re(lambda) > -beta`.
    pub fn laplace(&self, lambda: Complex64) -> Result<Complex64, KernelError> {
        self.validate()?;
        let one = Complex64::new(1.0, 0.0);
        Ok(match *self {
            DelayKernel::Dirac { tau } => (-lambda * tau).exp(),
            DelayKernel::Uniform { tau_max } => {
                let z = lambda * tau_max;
                if z.norm() < UNIFORM_SERIES_CUTOFF {
                    // (1 - exp(-z))/z around the removable singularity.
                    one - z / 2.0 + z * z / 6.0 - z * z * z / 24.0
                } else {
                    (one - (-z).exp()) / z
                }
            }
            DelayKernel::Gamma { k, beta } => {
                if lambda.re <= -beta {
                    return Err(KernelError::LaplaceDomain {
                        re: lambda.re,
                        bound: -beta,
                    });
                }
                (beta / (lambda + beta)).powu(k)
            }
            DelayKernel::Discrete { p, tau } => (1.0 - p) * one + p * (-lambda * tau).exp(),
        })
    }

    /// Derivative of [`DelayKernel::laplace`] with respect to `lambda`.
    ///
    /// At `lambda = 0` this equals minus the mean lag, which the tests use to
    /// tie the transform back to [`DelayKernel::mean`].
    pub fn laplace_deriv(&self, lambda: Complex64) -> Result<Complex64, KernelError> {
        self.validate()?;
        let one = Complex64::new(1.0, 0.0);
        Ok(match *self {
            DelayKernel::Dirac { tau } => -tau * (-lambda * tau).exp(),
            DelayKernel::Uniform { tau_max } => {
                let z = lambda * tau_max;
                if z.norm() < UNIFORM_SERIES_CUTOFF {
                    tau_max * (-0.5 * one + z / 3.0 - z * z / 8.0 + z * z * z / 30.0)
                } else {
                    tau_max * ((-z).exp() * (one + z) - one) / (z * z)
                }
            }
            DelayKernel::Gamma { k, beta } => {
                if lambda.re <= -beta {
                    return Err(KernelError::LaplaceDomain {
                        re: lambda.re,
                        bound: -beta,
                    });
                }
                let base = beta / (lambda + beta);
                -(f64::from(k) / beta) * base.powu(k + 1)
            }
            DelayKernel::Discrete { p, tau } => -p * tau * (-lambda * tau).exp(),
        })
    }

    /// Largest step `dt <= target` that puts atoms and support edges on the
    /// time grid. Erlang kernels have no alignment constraint.
    pub fn align_dt(&self, target: f64) -> f64 {
        debug_assert!(target > 0.0);
        match *self {
            DelayKernel::Dirac { tau } if tau > 0.0 => tau / (tau / target).ceil(),
            DelayKernel::Discrete { p, tau } if p > 0.0 && tau > 0.0 => {
                tau / (tau / target).ceil()
            }
            DelayKernel::Uniform { tau_max } => {
                let mut n = (tau_max / target).ceil().max(2.0);
                if (n as u64) % 2 == 1 {
                    n += 1.0;
                }
                tau_max / n
            }
            _ => target,
        }
    }

    /// Reduces the kernel to weights on the integrator grid.
    ///
    /// Atoms snap to the nearest multiple of `dt`. Distributed kernels get
    /// composite Simpson weights on grid nodes; the Erlang support is cut
    /// where at most `tail_mass` probability remains. Weights are
    /// renormalized so they sum to 1, keeping the rest point of the dynamics
    /// a true equilibrium of the discretized system.
    pub fn discretize(&self, dt: f64, tail_mass: f64) -> Result<DiscretizedKernel, KernelError> {
        self.validate()?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(KernelError::InvalidStep { dt });
        }
        if !(tail_mass > 0.0 && tail_mass < 0.5) {
            return Err(KernelError::InvalidTailMass { tail_mass });
        }
        let (offsets, weights) = match *self {
            DelayKernel::Dirac { tau } => {
                let m = (tau / dt).round() as usize;
                (vec![m], vec![1.0])
            }
            DelayKernel::Discrete { p, tau } => {
                let m = (tau / dt).round() as usize;
                if p == 0.0 || m == 0 {
                    // Both atoms coincide at lag zero (or the lagged atom
                    // carries no mass): a single undelayed atom remains.
                    (vec![0], vec![1.0])
                } else if p == 1.0 {
                    (vec![m], vec![1.0])
                } else {
                    (vec![0, m], vec![1.0 - p, p])
                }
            }
            DelayKernel::Uniform { tau_max } => {
                if dt * 2.0 > tau_max {
                    return Err(KernelError::Resolution { dt, scale: tau_max });
                }
                let mut n = (tau_max / dt).round().max(2.0);
                if (n as u64) % 2 == 1 {
                    // Simpson needs an even interval count; take the even
                    // neighbor closer to the true support.
                    n = if n - tau_max / dt > 0.0 { n - 1.0 } else { n + 1.0 };
                }
                let n = n as usize;
                check_node_count(n + 1)?;
                let support = n as f64 * dt;
                let density = 1.0 / support;
                let weights = simpson_weights(n, dt, |_| density);
                ((0..=n).collect(), weights)
            }
            DelayKernel::Gamma { k, beta } => {
                let horizon = self.truncation_time(tail_mass);
                let mut n = (horizon / dt).ceil().max(2.0) as usize;
                if n % 2 == 1 {
                    n += 1;
                }
                check_node_count(n + 1)?;
                let shape = f64::from(k);
                let log_norm = shape * beta.ln() - ln_gamma(shape);
                let pdf = |t: f64| {
                    if t == 0.0 {
                        if k == 1 {
                            beta
                        } else {
                            0.0
                        }
                    } else {
                        (log_norm + (shape - 1.0) * t.ln() - beta * t).exp()
                    }
                };
                let weights = simpson_weights(n, dt, pdf);
                ((0..=n).collect(), weights)
            }
        };
        Ok(DiscretizedKernel::new(dt, offsets, weights))
    }
}

fn check_node_count(n: usize) -> Result<(), KernelError> {
    if n > MAX_NODES {
        return Err(KernelError::TooManyNodes { n, cap: MAX_NODES });
    }
    Ok(())
}

/// Composite Simpson weights for `n` (even) intervals of width `dt`,
/// applied to the density values at the grid nodes.
fn simpson_weights(n: usize, dt: f64, density: impl Fn(f64) -> f64) -> Vec<f64> {
    debug_assert!(n >= 2 && n % 2 == 0);
    let mut w = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let coeff = if j == 0 || j == n {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w.push(coeff * dt / 3.0 * density(j as f64 * dt));
    }
    w
}

/// A kernel reduced to grid-aligned lags and normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedKernel {
    dt: f64,
    /// Lags as multiples of `dt`, strictly increasing.
    offsets: Vec<usize>,
    /// Quadrature weights; sum to 1 after renormalization.
    weights: Vec<f64>,
}

impl DiscretizedKernel {
    fn new(dt: f64, offsets: Vec<usize>, mut weights: Vec<f64>) -> Self {
        debug_assert_eq!(offsets.len(), weights.len());
        debug_assert!(offsets.windows(2).all(|w| w[0] < w[1]));
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0);
        for w in &mut weights {
            *w /= total;
        }
        Self { dt, offsets, weights }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Lag times of the nodes, `offset * dt`.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        self.offsets.iter().map(move |&m| m as f64 * self.dt)
    }

    /// Largest lag the integrator must keep in its history.
    pub fn max_lag(&self) -> f64 {
        self.offsets.last().map_or(0.0, |&m| m as f64 * self.dt)
    }

    pub fn max_offset(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0)
    }

    /// Mean lag of the discretized kernel.
    pub fn mean(&self) -> f64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(&m, &w)| w * m as f64 * self.dt)
            .sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl fmt::Display for DelayKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DelayKernel::Dirac { tau } => write!(f, "dirac:{}", tau),
            DelayKernel::Uniform { tau_max } => write!(f, "uniform:{}", tau_max),
            DelayKernel::Gamma { k, beta } => write!(f, "gamma:{}:{}", k, beta),
            DelayKernel::Discrete { p, tau } => write!(f, "discrete:{}:{}", p, tau),
        }
    }
}

fn parse_f64(part: &str, what: &str) -> Result<f64, KernelError> {
    let v: f64 = part
        .trim()
        .parse()
        .map_err(|_| KernelError::Parse(format!("{} {:?} is not a number", what, part)))?;
    if !v.is_finite() {
        return Err(KernelError::Parse(format!("{} must be finite, got {}", what, v)));
    }
    Ok(v)
}

impl FromStr for DelayKernel {
    type Err = KernelError;

    /// Parses `dirac:<tau>`, `uniform:<tau_max>`, `gamma:<k>:<beta>`, or
    /// `discrete:<p>:<tau>`.
    fn from_str(s: &str) -> Result<Self, KernelError> {
        let parts: Vec<&str> = s.split(':').collect();
        let arity = |n: usize| -> Result<(), KernelError> {
            if parts.len() != n + 1 {
                return Err(KernelError::Parse(format!(
                    "kernel {:?} takes {} parameter(s), got {}",
                    parts[0],
                    n,
                    parts.len() - 1
                )));
            }
            Ok(())
        };
        let kernel = match parts[0] {
            "dirac" => {
                arity(1)?;
                DelayKernel::Dirac {
                    tau: parse_f64(parts[1], "lag")?,
                }
            }
            "uniform" => {
                arity(1)?;
                DelayKernel::Uniform {
                    tau_max: parse_f64(parts[1], "support")?,
                }
            }
            "gamma" => {
                arity(2)?;
                let k: u32 = parts[1].trim().parse().map_err(|_| {
                    KernelError::Parse(format!("shape {:?} is not a positive integer", parts[1]))
                })?;
                DelayKernel::Gamma {
                    k,
                    beta: parse_f64(parts[2], "rate")?,
                }
            }
            "discrete" => {
                arity(2)?;
                DelayKernel::Discrete {
                    p: parse_f64(parts[1], "weight")?,
                    tau: parse_f64(parts[2], "lag")?,
                }
            }
            other => {
                return Err(KernelError::Parse(format!(
                    "unknown kernel family {:?} (expected dirac, uniform, gamma, discrete)",
                    other
                )))
            }
        };
        kernel.validate().map_err(|e| match e {
            KernelError::InvalidShape(msg) => KernelError::Parse(msg),
            other => other,
        })?;
        Ok(kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn all_samples() -> Vec<DelayKernel> {
        vec![
            DelayKernel::Dirac { tau: 2.0943951023931953 },
            DelayKernel::Uniform { tau_max: 6.579736267392906 },
            DelayKernel::Gamma { k: 3, beta: 0.84375 },
            DelayKernel::Discrete { p: 0.6, tau: 6.858837 },
        ]
    }

    #[test]
    fn means_match_closed_forms() {
        assert_abs_diff_eq!(
            DelayKernel::Gamma { k: 3, beta: 1.32 }.mean(),
            2.272727272727273,
            epsilon = 1e-12
        );
        assert_eq!(DelayKernel::Uniform { tau_max: 6.5 }.mean(), 3.25);
        assert_abs_diff_eq!(
            DelayKernel::Discrete { p: 0.6, tau: PI }.mean(),
            0.6 * PI,
            epsilon = 1e-15
        );
        assert_eq!(DelayKernel::Dirac { tau: 1.75 }.mean(), 1.75);
    }

    #[test]
    fn laplace_frozen_values() {
        let l = DelayKernel::Discrete { p: 0.6, tau: PI }
            .laplace(Complex64::new(0.0, 1.0))
            .unwrap();
        assert_abs_diff_eq!(l.re, -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(l.im, 0.0, epsilon = 1e-15);

        let l = DelayKernel::Gamma { k: 3, beta: 1.0 }
            .laplace(Complex64::new(1.0, 0.0))
            .unwrap();
        assert_abs_diff_eq!(l.re, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(l.im, 0.0, epsilon = 1e-15);

        // Lag pi/(2 omega) turns a pure oscillation into a quarter turn.
        let l = DelayKernel::Dirac { tau: PI / 1.5 }
            .laplace(Complex64::new(0.0, 0.75))
            .unwrap();
        assert_abs_diff_eq!(l.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.im, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn laplace_is_normalized_at_zero() {
        for kernel in all_samples() {
            let l = kernel.laplace(Complex64::new(0.0, 0.0)).unwrap();
            assert_abs_diff_eq!(l.re, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(l.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn laplace_deriv_at_zero_is_minus_mean() {
        for kernel in all_samples() {
            let d = kernel.laplace_deriv(Complex64::new(0.0, 0.0)).unwrap();
            assert_abs_diff_eq!(d.re, -kernel.mean(), epsilon = 1e-12);
            assert_abs_diff_eq!(d.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn laplace_deriv_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-6;
        for kernel in all_samples() {
            for _ in 0..25 {
                let lambda = Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-2.0..2.0));
                let d = kernel.laplace_deriv(lambda).unwrap();
                let hp = Complex64::new(h, 0.0);
                let fd = (kernel.laplace(lambda + hp).unwrap()
                    - kernel.laplace(lambda - hp).unwrap())
                    / (2.0 * h);
                assert_abs_diff_eq!(d.re, fd.re, epsilon = 1e-7);
                assert_abs_diff_eq!(d.im, fd.im, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn uniform_series_branch_is_continuous() {
        let kernel = DelayKernel::Uniform { tau_max: 2.0 };
        // Straddle the series cutoff and compare against a tiny-but-direct
        // evaluation; both branches must agree to rounding.
        for &im in &[4.9e-4, 5.1e-4] {
            let z = Complex64::new(0.0, im);
            let l = kernel.laplace(z).unwrap();
            let zz = z * 2.0;
            let direct = (Complex64::new(1.0, 0.0) - (-zz).exp()) / zz;
            assert_abs_diff_eq!(l.re, direct.re, epsilon = 1e-12);
            assert_abs_diff_eq!(l.im, direct.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_laplace_domain_error() {
        let kernel = DelayKernel::Gamma { k: 2, beta: 0.5 };
        let err = kernel.laplace(Complex64::new(-0.5, 0.3)).unwrap_err();
        assert!(matches!(err, KernelError::LaplaceDomain { .. }));
        assert!(kernel.laplace(Complex64::new(-0.49, 0.3)).is_ok());
    }

    #[test]
    fn truncation_time_brackets_the_tail() {
        let kernel = DelayKernel::Gamma { k: 3, beta: 0.84375 };
        let t = kernel.truncation_time(1e-10);
        assert!(gamma_ur(3.0, 0.84375 * t) <= 1e-10);
        assert!(gamma_ur(3.0, 0.84375 * t * 0.99) > 1e-10);
        assert_eq!(DelayKernel::Discrete { p: 0.0, tau: 9.0 }.truncation_time(1e-10), 0.0);
        assert_eq!(DelayKernel::Uniform { tau_max: 4.0 }.truncation_time(1e-10), 4.0);
    }

    #[test]
    fn discretized_weights_sum_to_one() {
        for kernel in all_samples() {
            let dt = kernel.align_dt(kernel.mean() / 200.0);
            let disc = kernel.discretize(dt, 1e-10).unwrap();
            assert_abs_diff_eq!(disc.weight_sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn discretized_mean_matches_kernel_mean() {
        for kernel in all_samples() {
            let dt = kernel.align_dt(kernel.mean() / 200.0);
            let disc = kernel.discretize(dt, 1e-10).unwrap();
            let rel = (disc.mean() - kernel.mean()).abs() / kernel.mean();
            assert!(rel < 1e-6, "{}: relative mean error {}", kernel, rel);
        }
    }

    #[test]
    fn atoms_snap_to_nearest_grid_point() {
        let disc = DelayKernel::Dirac { tau: 1.0 }.discretize(0.3, 1e-10).unwrap();
        assert_eq!(disc.offsets(), &[3]);
        assert_abs_diff_eq!(disc.max_lag(), 0.9, epsilon = 1e-15);

        let disc = DelayKernel::Discrete { p: 0.6, tau: 1.0 }
            .discretize(0.25, 1e-10)
            .unwrap();
        assert_eq!(disc.offsets(), &[0, 4]);
        assert_abs_diff_eq!(disc.weights()[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(disc.weights()[1], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_atom_mixes_collapse() {
        let disc = DelayKernel::Discrete { p: 0.0, tau: 3.0 }
            .discretize(0.1, 1e-10)
            .unwrap();
        assert_eq!(disc.offsets(), &[0]);
        assert_eq!(disc.weights(), &[1.0]);

        let disc = DelayKernel::Discrete { p: 1.0, tau: 3.0 }
            .discretize(0.1, 1e-10)
            .unwrap();
        assert_eq!(disc.offsets(), &[30]);
        assert_eq!(disc.weights(), &[1.0]);

        let disc = DelayKernel::Discrete { p: 0.7, tau: 0.01 }
            .discretize(0.1, 1e-10)
            .unwrap();
        assert_eq!(disc.offsets(), &[0]);

        let disc = DelayKernel::Dirac { tau: 0.0 }.discretize(0.1, 1e-10).unwrap();
        assert_eq!(disc.offsets(), &[0]);
        assert_eq!(disc.max_lag(), 0.0);
    }

    #[test]
    fn uniform_discretization_covers_support_with_even_intervals() {
        let kernel = DelayKernel::Uniform { tau_max: 2.0 };
        let dt = kernel.align_dt(0.013);
        let disc = kernel.discretize(dt, 1e-10).unwrap();
        let n = disc.offsets().len() - 1;
        assert_eq!(n % 2, 0);
        assert_abs_diff_eq!(disc.max_lag(), 2.0, epsilon = 1e-12);
        // Interior Simpson pattern alternates double and quadruple weights.
        let w = disc.weights();
        assert!(w[1] / w[2] > 1.9 && w[1] / w[2] < 2.1);
        assert_abs_diff_eq!(w[0], w[n], epsilon = 1e-15);
    }

    #[test]
    fn gamma_discretization_reaches_the_tail_horizon() {
        let kernel = DelayKernel::Gamma { k: 3, beta: 0.84375 };
        let dt = 3.0 / 0.84375 / 200.0;
        let disc = kernel.discretize(dt, 1e-10).unwrap();
        assert!(disc.max_lag() >= kernel.truncation_time(1e-10));
        assert_abs_diff_eq!(disc.weight_sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn discretize_rejects_bad_resolution() {
        let kernel = DelayKernel::Uniform { tau_max: 1.0 };
        assert!(matches!(
            kernel.discretize(0.8, 1e-10),
            Err(KernelError::Resolution { .. })
        ));
        assert!(matches!(
            kernel.discretize(0.0, 1e-10),
            Err(KernelError::InvalidStep { .. })
        ));
        assert!(matches!(
            kernel.discretize(0.01, 0.7),
            Err(KernelError::InvalidTailMass { .. })
        ));
        let wide = DelayKernel::Gamma { k: 1, beta: 1e-4 };
        assert!(matches!(
            wide.discretize(1e-6, 1e-10),
            Err(KernelError::TooManyNodes { .. })
        ));
    }

    #[test]
    fn align_dt_puts_atoms_on_the_grid() {
        let kernel = DelayKernel::Dirac { tau: 2.1 };
        let dt = kernel.align_dt(0.011);
        assert!(dt <= 0.011);
        let steps = 2.1 / dt;
        assert_abs_diff_eq!(steps, steps.round(), epsilon = 1e-9);

        let kernel = DelayKernel::Uniform { tau_max: 6.579736267392906 };
        let dt = kernel.align_dt(0.033);
        let n = (6.579736267392906 / dt).round() as u64;
        assert_eq!(n % 2, 0);
        assert!(dt <= 0.033 + 1e-12);
    }

    #[test]
    fn parse_round_trips() {
        let specs = [
            "dirac:2.5",
            "uniform:6.58",
            "gamma:3:0.84375",
            "discrete:0.6:3.14",
            "dirac:0",
        ];
        for spec in specs {
            let kernel: DelayKernel = spec.parse().unwrap();
            let printed = kernel.to_string();
            let reparsed: DelayKernel = printed.parse().unwrap();
            assert_eq!(kernel, reparsed, "{} -> {}", spec, printed);
        }
    }

    #[test]
    fn parse_rejects_malformed_specs() {
        let bad = [
            "foo:1",
            "dirac",
            "dirac:1:2",
            "dirac:-1",
            "uniform:0",
            "uniform:nan",
            "gamma:0:1",
            "gamma:3:-1",
            "gamma:2.5:1",
            "gamma:3",
            "discrete:1.5:1",
            "discrete:0.5:-2",
            "discrete:0.5",
            "",
        ];
        for spec in bad {
            assert!(spec.parse::<DelayKernel>().is_err(), "{:?} should fail", spec);
        }
    }
}
