//! Payoff matrices and expansion coefficients about the interior equilibrium.
//!
//! For a symmetric 2x2 game with payoff entries `(a, b, c, d)` the replicator
//! dynamics of the first strategy's share `s` has an interior rest point
//! whenever `b > d` and `c > a`. All downstream analysis works with the
//! deviation `x = s - s_star` and the kernel-averaged deviation `xk`; the
//! dynamics expand exactly as
//!
//! ```text
//! dx/dt = linear * xk + quadratic * x * xk + cubic * x^2 * xk
//! ```
//!
//! with `linear = -delta * gamma`, `quadratic = -delta * (1 - 2 s_star)` and
//! `cubic = delta`. [`discrete_coefficients`] splits the same expansion for a
//! two-atom kernel that mixes an undelayed and a lagged term.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

/// Row-player payoffs of a symmetric two-strategy game.
///
/// `a` is strategy 1 against strategy 1, `b` strategy 1 against 2, `c`
/// strategy 2 against 1, and `d` strategy 2 against 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl PayoffMatrix {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }
}

impl fmt::Display for PayoffMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.a, self.b, self.c, self.d)
    }
}

impl FromStr for PayoffMatrix {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, GameError> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(GameError::Parse(format!(
                "expected four comma-separated payoffs a,b,c,d, got {:?}",
                s
            )));
        }
        let mut vals = [0.0_f64; 4];
        for (slot, part) in vals.iter_mut().zip(&parts) {
            *slot = part.trim().parse::<f64>().map_err(|_| {
                GameError::Parse(format!("payoff entry {:?} is not a number", part))
            })?;
        }
        let m = PayoffMatrix::new(vals[0], vals[1], vals[2], vals[3]);
        if !m.is_finite() {
            return Err(GameError::NonFinitePayoff);
        }
        Ok(m)
    }
}

impl PayoffMatrix {
    fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

/// Derived quantities of the expansion about the interior equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameCoefficients {
    /// Payoff advantage `b - d` of strategy 1 in a strategy-2 population.
    pub delta1: f64,
    /// Payoff advantage `c - a` of strategy 2 in a strategy-1 population.
    pub delta2: f64,
    /// `delta1 + delta2`; sets the overall time scale.
    pub delta: f64,
    /// Interior equilibrium share `delta1 / delta`.
    pub s_star: f64,
    /// `s_star * (1 - s_star)`.
    pub gamma: f64,
    /// Coefficient of the delayed deviation; always negative for valid games.
    pub linear: f64,
    /// Coefficient of `x * xk`; zero exactly when `s_star = 1/2`.
    pub quadratic: f64,
    /// Coefficient of `x^2 * xk`; equals `delta`.
    pub cubic: f64,
}

/// Expansion coefficients for the two-atom kernel `(1 - p) now + p lagged`.
///
/// Splitting the averaged deviation `xk = (1 - p) x + p x_lag` in the cubic
/// expansion produces one coefficient per monomial in `(x, x_lag)`. The
/// instantaneous and lagged pieces of each order recombine to the plain
/// coefficients: `lin_inst + lin_del = linear`, `bilinear + quad_inst =
/// quadratic`, `cubic_del + cubic_inst = cubic`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteCoefficients {
    /// Weight of the lagged atom.
    pub p: f64,
    /// Coefficient of `x`.
    pub lin_inst: f64,
    /// Coefficient of `x_lag`.
    pub lin_del: f64,
    /// Coefficient of `x * x_lag`.
    pub bilinear: f64,
    /// Coefficient of `x^2`.
    pub quad_inst: f64,
    /// Coefficient of `x^2 * x_lag`.
    pub cubic_del: f64,
    /// Coefficient of `x^3`.
    pub cubic_inst: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("no interior equilibrium: requires b > d and c > a, got {pattern}")]
    NoInteriorEquilibrium { pattern: String },
    #[error("payoff entries must be finite")]
    NonFinitePayoff,
    #[error("lagged-atom weight must satisfy 0 <= p <= 1, got {p}")]
    InvalidMixWeight { p: f64 },
    #[error("{0}")]
    Parse(String),
}

fn equilibrium_failure(delta1: f64, delta2: f64) -> GameError {
    let mut parts = Vec::new();
    if !(delta1 > 0.0) {
        parts.push(format!("b - d = {}", delta1));
    }
    if !(delta2 > 0.0) {
        parts.push(format!("c - a = {}", delta2));
    }
    GameError::NoInteriorEquilibrium {
        pattern: parts.join(", "),
    }
}

/// Derives the equilibrium and expansion coefficients of a game.
///
/// Fails with [`GameError::NoInteriorEquilibrium`] unless both payoff
/// advantages are strictly positive, which is exactly the condition for a
/// rest point strictly inside `(0, 1)`.
pub fn derive_coefficients(m: &PayoffMatrix) -> Result<GameCoefficients, GameError> {
    if !m.is_finite() {
        return Err(GameError::NonFinitePayoff);
    }
    let delta1 = m.b - m.d;
    let delta2 = m.c - m.a;
    if !(delta1 > 0.0 && delta2 > 0.0) {
        return Err(equilibrium_failure(delta1, delta2));
    }
    let delta = delta1 + delta2;
    let s_star = delta1 / delta;
    let gamma = s_star * (1.0 - s_star);
    Ok(GameCoefficients {
        delta1,
        delta2,
        delta,
        s_star,
        gamma,
        linear: -delta * gamma,
        quadratic: -delta * (1.0 - 2.0 * s_star),
        cubic: delta,
    })
}

impl GameCoefficients {
    /// Splits the expansion for the two-atom kernel with lagged weight `p`.
    pub fn split(&self, p: f64) -> Result<DiscreteCoefficients, GameError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(GameError::InvalidMixWeight { p });
        }
        Ok(DiscreteCoefficients {
            p,
            lin_inst: (1.0 - p) * self.linear,
            lin_del: p * self.linear,
            bilinear: p * self.quadratic,
            quad_inst: (1.0 - p) * self.quadratic,
            cubic_del: p * self.cubic,
            cubic_inst: (1.0 - p) * self.cubic,
        })
    }
}

/// Splits the expansion for the two-atom kernel with lagged weight `p`.
pub fn discrete_coefficients(m: &PayoffMatrix, p: f64) -> Result<DiscreteCoefficients, GameError> {
    derive_coefficients(m)?.split(p)
}

/// Rational twin of [`GameCoefficients`], for exact cross-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactGameCoefficients {
    pub delta1: BigRational,
    pub delta2: BigRational,
    pub delta: BigRational,
    pub s_star: BigRational,
    pub gamma: BigRational,
    pub linear: BigRational,
    pub quadratic: BigRational,
    pub cubic: BigRational,
}

/// Rational twin of [`DiscreteCoefficients`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDiscreteCoefficients {
    pub p: BigRational,
    pub lin_inst: BigRational,
    pub lin_del: BigRational,
    pub bilinear: BigRational,
    pub quad_inst: BigRational,
    pub cubic_del: BigRational,
    pub cubic_inst: BigRational,
}

impl ExactDiscreteCoefficients {
    /// Nearest floating-point version, for comparing against the f64 path.
    pub fn to_f64(&self) -> DiscreteCoefficients {
        let f = |r: &BigRational| r.to_f64().expect("rational out of f64 range");
        DiscreteCoefficients {
            p: f(&self.p),
            lin_inst: f(&self.lin_inst),
            lin_del: f(&self.lin_del),
            bilinear: f(&self.bilinear),
            quad_inst: f(&self.quad_inst),
            cubic_del: f(&self.cubic_del),
            cubic_inst: f(&self.cubic_inst),
        }
    }
}

/// Exact-arithmetic version of [`derive_coefficients`] for rational payoffs.
pub fn derive_coefficients_exact(
    payoffs: &[BigRational; 4],
) -> Result<ExactGameCoefficients, GameError> {
    let [a, b, c, d] = payoffs;
    let delta1 = b - d;
    let delta2 = c - a;
    if !delta1.is_positive() || !delta2.is_positive() {
        return Err(equilibrium_failure(
            delta1.to_f64().unwrap_or(f64::NAN),
            delta2.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let delta = &delta1 + &delta2;
    let s_star = &delta1 / &delta;
    let one = BigRational::one();
    let gamma = &s_star * (&one - &s_star);
    let linear = -(&delta * &gamma);
    let quadratic = -(&delta * (&one - BigRational::from_integer(2.into()) * &s_star));
    Ok(ExactGameCoefficients {
        delta1,
        delta2,
        delta: delta.clone(),
        s_star,
        gamma,
        linear,
        quadratic,
        cubic: delta,
    })
}

/// Exact-arithmetic version of [`discrete_coefficients`].
pub fn discrete_coefficients_exact(
    payoffs: &[BigRational; 4],
    p: &BigRational,
) -> Result<ExactDiscreteCoefficients, GameError> {
    if p.is_negative() || p > &BigRational::one() {
        return Err(GameError::InvalidMixWeight {
            p: p.to_f64().unwrap_or(f64::NAN),
        });
    }
    let g = derive_coefficients_exact(payoffs)?;
    let q = BigRational::one() - p;
    Ok(ExactDiscreteCoefficients {
        p: p.clone(),
        lin_inst: &q * &g.linear,
        lin_del: p * &g.linear,
        bilinear: p * &g.quadratic,
        quad_inst: &q * &g.quadratic,
        cubic_del: p * &g.cubic,
        cubic_inst: &q * &g.cubic,
    })
}

/// Convenience constructor for rational payoffs given as integer pairs.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Random game with an interior equilibrium; moderate payoff ranges keep
    // the derived scales well inside f64 comfort.
    pub(crate) fn sample_game(rng: &mut impl RngExt) -> PayoffMatrix {
        let d1: f64 = rng.random_range(0.2..4.0);
        let d2: f64 = rng.random_range(0.2..4.0);
        let base_a: f64 = rng.random_range(-3.0..3.0);
        let base_d: f64 = rng.random_range(-3.0..3.0);
        PayoffMatrix::new(base_a, base_d + d1, base_a + d2, base_d)
    }

    #[test]
    fn symmetric_example_coefficients() {
        let g = derive_coefficients(&PayoffMatrix::new(-1.5, 3.0, 0.0, 1.5)).unwrap();
        assert_eq!(g.delta1, 1.5);
        assert_eq!(g.delta2, 1.5);
        assert_eq!(g.delta, 3.0);
        assert_eq!(g.s_star, 0.5);
        assert_eq!(g.gamma, 0.25);
        assert_eq!(g.linear, -0.75);
        assert_eq!(g.quadratic, 0.0);
        assert_eq!(g.cubic, 3.0);
    }

    #[test]
    fn small_symmetric_example_coefficients() {
        let g = derive_coefficients(&PayoffMatrix::new(-0.5, 1.0, 0.0, 0.5)).unwrap();
        assert_eq!(g.delta, 1.0);
        assert_eq!(g.s_star, 0.5);
        assert_eq!(g.linear, -0.25);
        assert_eq!(g.cubic, 1.0);
    }

    #[test]
    fn discrete_split_frozen_values() {
        let dc = discrete_coefficients(&PayoffMatrix::new(-1.5, 3.0, 0.0, 1.5), 0.6).unwrap();
        assert_abs_diff_eq!(dc.lin_inst, -0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(dc.lin_del, -0.45, epsilon = 1e-15);
        assert_eq!(dc.bilinear, 0.0);
        assert_eq!(dc.quad_inst, 0.0);
        assert_abs_diff_eq!(dc.cubic_del, 1.8, epsilon = 1e-15);
        assert_abs_diff_eq!(dc.cubic_inst, 1.2, epsilon = 1e-15);
    }

    #[test]
    fn discrete_split_sums_back_to_plain_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let m = sample_game(&mut rng);
            let p: f64 = rng.random_range(0.0..=1.0);
            let g = derive_coefficients(&m).unwrap();
            let dc = discrete_coefficients(&m, p).unwrap();
            assert_abs_diff_eq!(dc.lin_inst + dc.lin_del, g.linear, epsilon = 1e-14);
            assert_abs_diff_eq!(dc.bilinear + dc.quad_inst, g.quadratic, epsilon = 1e-14);
            assert_abs_diff_eq!(dc.cubic_del + dc.cubic_inst, g.cubic, epsilon = 1e-14);
        }
    }

    #[test]
    fn payoff_scaling_rescales_time_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let m = sample_game(&mut rng);
            let k: f64 = rng.random_range(0.1..10.0);
            let scaled = PayoffMatrix::new(k * m.a, k * m.b, k * m.c, k * m.d);
            let g = derive_coefficients(&m).unwrap();
            let gs = derive_coefficients(&scaled).unwrap();
            assert_abs_diff_eq!(gs.s_star, g.s_star, epsilon = 1e-12);
            assert_abs_diff_eq!(gs.gamma, g.gamma, epsilon = 1e-12);
            assert_abs_diff_eq!(gs.linear, k * g.linear, epsilon = 1e-10 * k.max(1.0));
            assert_abs_diff_eq!(gs.quadratic, k * g.quadratic, epsilon = 1e-10 * k.max(1.0));
            assert_abs_diff_eq!(gs.cubic, k * g.cubic, epsilon = 1e-10 * k.max(1.0));
        }
    }

    #[test]
    fn quadratic_vanishes_exactly_at_even_mixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let m = sample_game(&mut rng);
            let g = derive_coefficients(&m).unwrap();
            if g.quadratic == 0.0 {
                assert_eq!(g.s_star, 0.5);
            }
            if (g.s_star - 0.5).abs() > 1e-12 {
                assert!(g.quadratic != 0.0);
            }
        }
        // Constructed symmetric game hits the degenerate value exactly.
        let g = derive_coefficients(&PayoffMatrix::new(0.0, 2.0, 2.0, 0.0)).unwrap();
        assert_eq!(g.s_star, 0.5);
        assert_eq!(g.quadratic, 0.0);
    }

    #[test]
    fn missing_equilibrium_reports_failing_signs() {
        let err = derive_coefficients(&PayoffMatrix::new(0.0, 1.0, 1.0, 2.0)).unwrap_err();
        match &err {
            GameError::NoInteriorEquilibrium { pattern } => {
                assert!(pattern.contains("b - d"), "pattern was {:?}", pattern);
                assert!(!pattern.contains("c - a"));
            }
            other => panic!("unexpected error {:?}", other),
        }
        let err = derive_coefficients(&PayoffMatrix::new(3.0, 1.0, 0.0, 2.0)).unwrap_err();
        match &err {
            GameError::NoInteriorEquilibrium { pattern } => {
                assert!(pattern.contains("b - d"));
                assert!(pattern.contains("c - a"));
            }
            other => panic!("unexpected error {:?}", other),
        }
        // Boundary case: delta1 = 0 has no interior rest point either.
        assert!(derive_coefficients(&PayoffMatrix::new(0.0, 2.0, 1.0, 2.0)).is_err());
    }

    #[test]
    fn mix_weight_validation() {
        let m = PayoffMatrix::new(-1.5, 3.0, 0.0, 1.5);
        assert!(discrete_coefficients(&m, -0.1).is_err());
        assert!(discrete_coefficients(&m, 1.1).is_err());
        assert!(discrete_coefficients(&m, f64::NAN).is_err());
        assert!(discrete_coefficients(&m, 0.0).is_ok());
        assert!(discrete_coefficients(&m, 1.0).is_ok());
    }

    #[test]
    fn payoff_parse_round_trip_and_errors() {
        let m: PayoffMatrix = "-1.5,3,0,1.5".parse().unwrap();
        assert_eq!(m, PayoffMatrix::new(-1.5, 3.0, 0.0, 1.5));
        let again: PayoffMatrix = m.to_string().parse().unwrap();
        assert_eq!(again, m);
        assert!("1,2,3".parse::<PayoffMatrix>().is_err());
        assert!("1,2,3,x".parse::<PayoffMatrix>().is_err());
        assert!("1,2,3,inf".parse::<PayoffMatrix>().is_err());
    }

    #[test]
    fn exact_path_matches_float_path() {
        let payoffs = [rational(-3, 2), rational(3, 1), rational(0, 1), rational(3, 2)];
        let dc_exact = discrete_coefficients_exact(&payoffs, &rational(3, 5)).unwrap();
        let dc = discrete_coefficients(&PayoffMatrix::new(-1.5, 3.0, 0.0, 1.5), 0.6).unwrap();
        let approx = dc_exact.to_f64();
        assert_abs_diff_eq!(approx.lin_inst, dc.lin_inst, epsilon = 1e-15);
        assert_abs_diff_eq!(approx.lin_del, dc.lin_del, epsilon = 1e-15);
        assert_abs_diff_eq!(approx.cubic_del, dc.cubic_del, epsilon = 1e-15);
        assert_abs_diff_eq!(approx.cubic_inst, dc.cubic_inst, epsilon = 1e-15);
        // Exact values are exact: p * linear = (3/5)(-3/4) = -9/20.
        assert_eq!(dc_exact.lin_del, rational(-9, 20));
        assert_eq!(dc_exact.lin_inst, rational(-3, 10));
    }

    #[test]
    fn exact_path_rejects_bad_inputs() {
        let payoffs = [rational(0, 1), rational(1, 1), rational(0, 1), rational(2, 1)];
        assert!(derive_coefficients_exact(&payoffs).is_err());
        let good = [rational(-3, 2), rational(3, 1), rational(0, 1), rational(3, 2)];
        assert!(discrete_coefficients_exact(&good, &rational(6, 5)).is_err());
    }
}
