//! Direct integration of the delayed replicator equation.
//!
//! The flow is stepped with classical fourth-order Runge-Kutta using the
//! method of steps: lagged state is read from the stored trajectory, with
//! the delay kernel reduced to grid-aligned quadrature nodes so that every
//! whole-step lookup lands on a stored sample. Half-step stages read from a
//! parallel buffer of interval midpoints filled with cubic Hermite
//! interpolation, which keeps each stage a plain dot product over the
//! quadrature weights.
//!
//! The right-hand side is evaluated in deviation form,
//! `ds/dt = -delta * s (1 - s) * sum_i w_i (s(t - tau_i) - s_star)`,
//! so the interior equilibrium is a fixed point to the last bit and drift
//! cannot masquerade as dynamics.

use rayon::prelude::*;
use std::fmt;
use thiserror::Error;

use crate::game::{derive_coefficients, GameError, PayoffMatrix};
use crate::kernel::{DelayKernel, KernelError};
use crate::lindstedt::{self, AmplitudePrediction, LindstedtError};
use crate::spectrum::{self, HopfPoint, KernelFamily, SpectrumError, StabilityVerdict};

/// Steps that must fit inside the longest lag.
const MIN_STEPS_PER_LAG: f64 = 50.0;
/// Shares this close to 0 or 1 abort the run; the exact flow cannot get
/// there, so reaching the band means the discretization broke down.
const BLOWUP_MARGIN: f64 = 1e-12;
/// Residual deviation below which a window counts as converged.
const CONVERGENCE_BAND: f64 = 1e-5;
/// Peaks needed in the measurement window before judging a cycle.
const MIN_PEAKS: usize = 6;
/// Relative spread allowed across the last peaks of a settled cycle.
const PEAK_VARIATION: f64 = 0.02;
/// Ceiling on one trajectory's step count.
const MAX_STEPS: usize = 20_000_000;
/// Ceiling on auto-sized sweep horizons.
const MAX_SWEEP_HORIZON: f64 = 20_000.0;
/// Deviation regarded as fully decayed when sizing stable-side horizons.
const DECAY_TARGET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("time step {dt} exceeds {limit} (longest lag / 50)")]
    Resolution { dt: f64, limit: f64 },
    #[error("state left (0,1) at t = {t}: s = {s:e}")]
    Blowup { t: f64, s: f64 },
    #[error("share values must lie strictly inside (0,1), got {value}")]
    InvalidState { value: f64 },
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("settle fraction must lie in [0,1), got {0}")]
    InvalidSettle(f64),
    #[error("sweep range [{from}, {to}] with {steps} steps is invalid")]
    InvalidRange { from: f64, to: f64, steps: usize },
    #[error("{steps} steps exceed the per-run cap {cap}; increase dt or shorten the horizon")]
    TooManySteps { steps: usize, cap: usize },
    #[error("window holds {peaks} peaks; at least {min} are needed to judge a cycle")]
    TooShort { peaks: usize, min: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Lindstedt(#[from] LindstedtError),
}

/// Run parameters for one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Share at t = 0.
    pub s0: f64,
    pub dt: f64,
    pub horizon: f64,
    /// Constant pre-history value, normally equal to `s0`.
    pub history: f64,
    /// Truncation mass for kernels with unbounded support.
    pub tail_mass: f64,
}

impl SimConfig {
    pub fn new(s0: f64, dt: f64, horizon: f64) -> Self {
        SimConfig {
            s0,
            dt,
            horizon,
            history: s0,
            tail_mass: 1e-10,
        }
    }
}

/// Uniformly sampled solution with the inputs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// Share at t = 0, dt, 2 dt, ...
    pub samples: Vec<f64>,
    pub s_star: f64,
    pub game: PayoffMatrix,
    pub kernel: DelayKernel,
}

impl Trajectory {
    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    pub fn last(&self) -> f64 {
        *self.samples.last().expect("trajectory is never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleVerdict {
    ConvergedToEquilibrium,
    LimitCycle,
    Undecided,
}

impl fmt::Display for CycleVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CycleVerdict::ConvergedToEquilibrium => "converged-to-equilibrium",
            CycleVerdict::LimitCycle => "limit-cycle",
            CycleVerdict::Undecided => "undecided",
        })
    }
}

/// Measured cycle metrics over the post-settle window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleEstimate {
    /// Half the mean peak-to-trough span.
    pub amplitude: f64,
    /// Radians per time unit from mean peak spacing; absent when the window
    /// converged without oscillating.
    pub frequency: Option<f64>,
    pub mean_level: f64,
    pub verdict: CycleVerdict,
}

/// Integrates the delayed replicator flow for `cfg.horizon` time units.
pub fn integrate(
    m: &PayoffMatrix,
    kernel: &DelayKernel,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    let g = derive_coefficients(m)?;
    for value in [cfg.s0, cfg.history] {
        if !(value > 0.0 && value < 1.0) {
            return Err(SimError::InvalidState { value });
        }
    }
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return Err(SimError::InvalidHorizon(cfg.horizon));
    }
    let disc = kernel.discretize(cfg.dt, cfg.tail_mass)?;
    let max_lag = disc.max_lag();
    if max_lag > 0.0 {
        let limit = max_lag / MIN_STEPS_PER_LAG;
        // Slack for steps produced by align_dt, which divide the lag exactly
        // up to rounding.
        if cfg.dt > limit * (1.0 + 1e-9) {
            return Err(SimError::Resolution { dt: cfg.dt, limit });
        }
    }
    let steps = (cfg.horizon / cfg.dt).ceil() as usize;
    if steps > MAX_STEPS {
        return Err(SimError::TooManySteps {
            steps,
            cap: MAX_STEPS,
        });
    }

    let dt = cfg.dt;
    let hist = disc.max_offset();
    let total = hist + steps + 1;
    let mut values = vec![cfg.history; total];
    let mut mids = vec![cfg.history; total];
    let mut derivs = vec![0.0_f64; total];
    values[hist] = cfg.s0;

    // Zero-lag quadrature mass rides along with the active stage value; the
    // rest reads stored history.
    let mut now_weight = 0.0;
    let mut lagged: Vec<(usize, f64)> = Vec::new();
    for (&offset, &weight) in disc.offsets().iter().zip(disc.weights()) {
        if offset == 0 {
            now_weight += weight;
        } else {
            lagged.push((offset, weight));
        }
    }

    let s_star = g.s_star;
    let rate = g.delta;
    let rhs = |s: f64, pull: f64| -rate * s * (1.0 - s) * pull;

    // Grid-aligned lag sum for the step start; reused as the k4 sum of the
    // previous step shifted by one.
    let mut grid_pull: f64 = lagged
        .iter()
        .map(|&(offset, weight)| weight * (values[hist - offset] - s_star))
        .sum();

    for n in 0..steps {
        let idx = hist + n;
        let s = values[idx];
        let k1 = rhs(s, grid_pull + now_weight * (s - s_star));
        derivs[idx] = k1;
        if idx > 0 {
            // Cubic Hermite midpoint of the newest completed interval.
            mids[idx - 1] = 0.5 * (values[idx - 1] + values[idx])
                + dt / 8.0 * (derivs[idx - 1] - derivs[idx]);
        }

        let mut mid_pull = 0.0;
        for &(offset, weight) in &lagged {
            mid_pull += weight * (mids[idx - offset] - s_star);
        }
        let y2 = s + 0.5 * dt * k1;
        let k2 = rhs(y2, mid_pull + now_weight * (y2 - s_star));
        let y3 = s + 0.5 * dt * k2;
        let k3 = rhs(y3, mid_pull + now_weight * (y3 - s_star));

        let mut next_pull = 0.0;
        for &(offset, weight) in &lagged {
            next_pull += weight * (values[idx + 1 - offset] - s_star);
        }
        let y4 = s + dt * k3;
        let k4 = rhs(y4, next_pull + now_weight * (y4 - s_star));

        let next = s + dt / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
        if !(next > BLOWUP_MARGIN && next < 1.0 - BLOWUP_MARGIN) {
            return Err(SimError::Blowup {
                t: (n + 1) as f64 * dt,
                s: next,
            });
        }
        values[idx + 1] = next;
        grid_pull = next_pull;
    }

    values.drain(..hist);
    Ok(Trajectory {
        dt,
        samples: values,
        s_star,
        game: *m,
        kernel: *kernel,
    })
}

/// Strict 3-point extremum with quadratic refinement. Returns (time, value)
/// pairs; `sign` is +1 for peaks, -1 for troughs.
fn refined_extrema(window: &[f64], first_index: usize, dt: f64, sign: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..window.len().saturating_sub(1) {
        let (prev, here, next) = (sign * window[i - 1], sign * window[i], sign * window[i + 1]);
        if here > prev && here > next {
            let curvature = prev - 2.0 * here + next;
            let (offset, value) = if curvature == 0.0 {
                (0.0, here)
            } else {
                (
                    0.5 * (prev - next) / curvature,
                    here - (next - prev) * (next - prev) / (8.0 * curvature),
                )
            };
            out.push(((first_index + i) as f64 * dt + offset * dt, sign * value));
        }
    }
    out
}

fn mean(values: impl Iterator<Item = f64>, len: usize) -> f64 {
    values.sum::<f64>() / len as f64
}

/// Measures the post-settle window of a trajectory.
pub fn estimate_cycle(traj: &Trajectory, settle_fraction: f64) -> Result<CycleEstimate, SimError> {
    if !(0.0..1.0).contains(&settle_fraction) {
        return Err(SimError::InvalidSettle(settle_fraction));
    }
    let start = (traj.samples.len() as f64 * settle_fraction) as usize;
    let window = &traj.samples[start.min(traj.samples.len() - 1)..];
    let mean_level = mean(window.iter().copied(), window.len());

    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    for &s in window {
        low = low.min(s);
        high = high.max(s);
    }
    let deviation = (high - traj.s_star).max(traj.s_star - low);
    if deviation < CONVERGENCE_BAND {
        return Ok(CycleEstimate {
            amplitude: 0.5 * (high - low),
            frequency: None,
            mean_level,
            verdict: CycleVerdict::ConvergedToEquilibrium,
        });
    }

    let peaks = refined_extrema(window, start, traj.dt, 1.0);
    let troughs = refined_extrema(window, start, traj.dt, -1.0);
    if peaks.len() < MIN_PEAKS || troughs.is_empty() {
        return Err(SimError::TooShort {
            peaks: peaks.len(),
            min: MIN_PEAKS,
        });
    }

    // Judge and measure on the tail of the window, where the transient has
    // had the longest time to die.
    let last_peaks = &peaks[peaks.len() - 5..];
    let last_troughs = &troughs[troughs.len().saturating_sub(5)..];
    let peak_mean = mean(last_peaks.iter().map(|&(_, v)| v), last_peaks.len());
    let trough_mean = mean(last_troughs.iter().map(|&(_, v)| v), last_troughs.len());
    let amplitude = 0.5 * (peak_mean - trough_mean);

    let spacing = (last_peaks[last_peaks.len() - 1].0 - last_peaks[0].0)
        / (last_peaks.len() - 1) as f64;
    let frequency = 2.0 * std::f64::consts::PI / spacing;

    let mut dev_low = f64::INFINITY;
    let mut dev_high = f64::NEG_INFINITY;
    for &(_, v) in last_peaks {
        let dev = v - mean_level;
        dev_low = dev_low.min(dev);
        dev_high = dev_high.max(dev);
    }
    let steady = dev_low > 0.0 && (dev_high - dev_low) <= PEAK_VARIATION * (peak_mean - mean_level);
    Ok(CycleEstimate {
        amplitude,
        frequency: Some(frequency),
        mean_level,
        verdict: if steady {
            CycleVerdict::LimitCycle
        } else {
            CycleVerdict::Undecided
        },
    })
}

/// Per-row knobs of [`amplitude_sweep`]; `None` fields are auto-sized.
#[derive(Debug, Clone, Copy)]
pub struct SweepSettings {
    /// Initial offset from the equilibrium share.
    pub seed_offset: f64,
    pub settle_fraction: f64,
    pub tail_mass: f64,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            seed_offset: 0.01,
            settle_fraction: 0.5,
            tail_mass: 1e-10,
            dt: None,
            horizon: None,
        }
    }
}

/// One parameter value of a sweep: the closed-form prediction where the
/// cycle exists, and whatever the simulation measured or reported.
#[derive(Debug)]
pub struct SweepRow {
    pub param: f64,
    pub predicted: Option<f64>,
    pub outcome: Result<CycleEstimate, SimError>,
}

/// Bounded time scale of a kernel; the Erlang family reports its mean.
fn kernel_time_scale(kernel: &DelayKernel) -> f64 {
    match *kernel {
        DelayKernel::Dirac { tau } => tau,
        DelayKernel::Uniform { tau_max } => tau_max,
        DelayKernel::Gamma { .. } => kernel.mean(),
        DelayKernel::Discrete { p, tau } => {
            if p > 0.0 {
                tau
            } else {
                0.0
            }
        }
    }
}

/// The critical parameter expressed as a time: the critical mean lag for
/// the rate-parametrized family, the critical lag itself otherwise.
pub fn critical_time(family: KernelFamily, hopf: &HopfPoint) -> f64 {
    match family {
        KernelFamily::Gamma { k } => f64::from(k) / hopf.critical_value,
        _ => hopf.critical_value,
    }
}

/// Default integration step: 1/200 of the smaller of the critical time
/// scale and the kernel's own, aligned so lag atoms land on the grid.
pub fn default_step(kernel: &DelayKernel, critical_time: Option<f64>) -> f64 {
    let own = kernel_time_scale(kernel);
    let mut scale = match critical_time {
        Some(c) if own > 0.0 => own.min(c),
        Some(c) => c,
        None => own,
    };
    if !(scale > 0.0) {
        // No lag and no critical scale: a plain ODE, any modest step works.
        scale = 1.0;
    }
    kernel.align_dt(scale / 200.0)
}

/// Horizon long enough to outlive the transient at this parameter value.
///
/// Near criticality the approach to the attractor slows like the inverse
/// offset, so a fixed period count under-measures badly; the crossing rate
/// from the root tracker gives the decay rate directly and the horizon is
/// doubled so the default settle fraction discards the whole transient.
fn auto_horizon(
    analysis: Option<&(HopfPoint, AmplitudePrediction, Option<f64>)>,
    param: f64,
    kernel: &DelayKernel,
    seed_offset: f64,
) -> f64 {
    let fallback = |scale: f64| (40.0 * scale).max(200.0).min(MAX_SWEEP_HORIZON);
    let Some((hopf, prediction, rate_re)) = analysis else {
        return fallback(kernel_time_scale(kernel));
    };
    let period = 2.0 * std::f64::consts::PI / hopf.omega0;
    let Some(rate_re) = *rate_re else {
        return fallback(period);
    };
    let mu = param - hopf.critical_value;
    let sigma = (rate_re * mu).abs();
    if sigma <= 0.0 {
        return MAX_SWEEP_HORIZON;
    }
    let settle = if mu * f64::from(prediction.unstable_side) > 0.0 {
        // Saturation of the cycle radius from the seed amplitude.
        let target = prediction.amplitude(mu).unwrap_or(seed_offset);
        ((2.0 * (target / seed_offset).ln()).max(0.0) + 6.9) / (2.0 * sigma)
    } else {
        // Linear decay of the seed back into the convergence band.
        (seed_offset / DECAY_TARGET).ln() / sigma
    };
    (2.0 * settle).max(40.0 * period).min(MAX_SWEEP_HORIZON)
}

/// Simulated and predicted cycle amplitudes across a parameter range.
/// Rows simulate independently; a failing row carries its error instead of
/// aborting the others.
pub fn amplitude_sweep(
    m: &PayoffMatrix,
    family: KernelFamily,
    from: f64,
    to: f64,
    steps: usize,
    settings: &SweepSettings,
) -> Result<Vec<SweepRow>, SimError> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(SimError::InvalidRange { from, to, steps });
    }
    let g = derive_coefficients(m)?;
    let analysis = match spectrum::hopf_point(family, &g)? {
        StabilityVerdict::HopfAt(hopf) => {
            let prediction = lindstedt::predict(family, &g, &hopf)?;
            // Used only to size horizons; failure falls back to a fixed one.
            let rate_re = spectrum::crossing_rate(family, &g, &hopf)
                .ok()
                .map(|r| r.re);
            Some((hopf, prediction, rate_re))
        }
        _ => None,
    };
    let s0 = g.s_star + settings.seed_offset;

    let rows: Vec<SweepRow> = (0..steps)
        .into_par_iter()
        .map(|i| {
            let param = if steps == 1 {
                from
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            };
            let kernel = family.kernel_at(param);
            let predicted = analysis
                .as_ref()
                .and_then(|(hopf, prediction, _)| prediction.amplitude(param - hopf.critical_value));
            let dt = settings.dt.unwrap_or_else(|| {
                default_step(
                    &kernel,
                    analysis.as_ref().map(|(hopf, ..)| critical_time(family, hopf)),
                )
            });
            let horizon = settings
                .horizon
                .unwrap_or_else(|| auto_horizon(analysis.as_ref(), param, &kernel, settings.seed_offset));
            let cfg = SimConfig {
                s0,
                dt,
                horizon,
                history: s0,
                tail_mass: settings.tail_mass,
            };
            let outcome = integrate(m, &kernel, &cfg)
                .and_then(|traj| estimate_cycle(&traj, settings.settle_fraction));
            SweepRow {
                param,
                predicted,
                outcome,
            }
        })
        .collect();
    Ok(rows)
}
