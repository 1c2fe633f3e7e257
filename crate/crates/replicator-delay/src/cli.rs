//! Command-line front end emitting CSV for plotting scripts.
//!
//! Every subcommand prints `#`-prefixed metadata comments (game, kernel,
//! resolved defaults) followed by one header line and numeric rows. Output
//! is deterministic: numbers are formatted to 9 significant digits with `.`
//! as the decimal separator and `\n` line endings, so identical invocations
//! are byte-identical.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::game::{derive_coefficients, PayoffMatrix};
use crate::kernel::DelayKernel;
use crate::lindstedt;
use crate::simulate::{self, CycleEstimate, SimConfig, SimError, SweepSettings};
use crate::spectrum::{self, HopfPoint, KernelFamily, StabilityVerdict};

/// Characteristic residual above which `verify` exits nonzero.
const VERIFY_TOL: f64 = 1e-9;

const ABOUT: &str = "Hopf bifurcation analysis and simulation for two-strategy \
replicator dynamics with delayed payoff information";

const GAME_HELP: &str = "Payoff matrix a,b,c,d (own-strategy payoffs a, d; \
cross payoffs b, c); an interior equilibrium needs b > d and c > a";

const FAMILY_HELP: &str = "Kernel family with shape-only parameters: dirac, \
uniform, gamma:<k>, discrete:<p>; the lag scale is the critical/swept parameter";

const FULL_KERNEL_HELP: &str = "Fully parametrized kernel: dirac:<tau>, \
uniform:<tau_max>, gamma:<k>:<beta>, discrete:<p>:<tau>";

#[derive(Parser)]
#[command(name = "replicator-delay", version, about = ABOUT)]
struct Cli {
    /// Write CSV to this file instead of standard output
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical delay parameter, frequency, and crossing sign for a family
    Critical {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_game, help = GAME_HELP)]
        game: PayoffMatrix,
        #[arg(long, help = FAMILY_HELP)]
        kernel: KernelFamily,
    },
    /// Predicted cycle amplitude at an offset from the critical parameter
    Amplitude {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_game, help = GAME_HELP)]
        game: PayoffMatrix,
        #[arg(long, help = FAMILY_HELP)]
        kernel: KernelFamily,
        /// Offset of the bifurcation parameter from its critical value
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
    },
    /// Integrate one trajectory and print it as t,s samples
    Simulate {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_game, help = GAME_HELP)]
        game: PayoffMatrix,
        #[arg(long, help = FULL_KERNEL_HELP)]
        kernel: DelayKernel,
        /// Total integrated time [default: 40 periods of the critical
        /// frequency, or 200 when no bifurcation exists]
        #[arg(long)]
        horizon: Option<f64>,
        /// Integration step [default: the smaller of the critical and kernel
        /// time scales / 200, aligned to the lag grid]
        #[arg(long)]
        dt: Option<f64>,
        /// Initial share [default: equilibrium + 0.01]
        #[arg(long)]
        s0: Option<f64>,
    },
    /// Predicted vs simulated amplitudes across a parameter range
    Sweep {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_game, help = GAME_HELP)]
        game: PayoffMatrix,
        #[arg(long, help = FAMILY_HELP)]
        kernel: KernelFamily,
        /// First value of the bifurcation parameter
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        /// Last value of the bifurcation parameter
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        /// Number of evenly spaced parameter values
        #[arg(long)]
        steps: usize,
        /// Integration step for every row [default: per-row, the smaller of
        /// the critical and kernel time scales / 200, aligned]
        #[arg(long)]
        dt: Option<f64>,
        /// Horizon for every row [default: per-row, sized from the crossing
        /// rate so the transient fits in the settle window]
        #[arg(long)]
        horizon: Option<f64>,
        /// Fraction of each trajectory discarded before measuring
        #[arg(long, default_value_t = 0.5)]
        settle_fraction: f64,
    },
    /// Check the characteristic residual and crossing sign at the Hopf point
    Verify {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_game, help = GAME_HELP)]
        game: PayoffMatrix,
        #[arg(long, help = FAMILY_HELP)]
        kernel: KernelFamily,
    },
}

type DomainError = Box<dyn std::error::Error>;

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok((text, code)) => {
            if let Err(e) = emit(cli.out.as_deref(), &text) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn emit(out: Option<&std::path::Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn execute(command: &Command) -> Result<(String, ExitCode), DomainError> {
    match command {
        Command::Critical { game, kernel } => critical(game, *kernel),
        Command::Amplitude { game, kernel, mu } => amplitude(game, *kernel, *mu),
        Command::Simulate {
            game,
            kernel,
            horizon,
            dt,
            s0,
        } => simulate_cmd(game, kernel, *horizon, *dt, *s0),
        Command::Sweep {
            game,
            kernel,
            from,
            to,
            steps,
            dt,
            horizon,
            settle_fraction,
        } => sweep(game, *kernel, *from, *to, *steps, *dt, *horizon, *settle_fraction),
        Command::Verify { game, kernel } => verify(game, *kernel),
    }
}

/// Parses `a,b,c,d` into a payoff matrix.
fn parse_game(text: &str) -> Result<PayoffMatrix, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(format!(
            "expected 4 comma-separated payoffs, got {}",
            parts.len()
        ));
    }
    let mut values = [0.0_f64; 4];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad payoff {:?}: {}", part, e))?;
    }
    Ok(PayoffMatrix::new(values[0], values[1], values[2], values[3]))
}

/// 9-significant-digit formatting in the style of C's `%g`: trailing zeros
/// trimmed, exponent notation when the magnitude leaves [1e-4, 1e9).
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("{:e} always carries an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if !(-4..9).contains(&exp) {
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{}e{}", mantissa, exp);
    }
    let decimals = (8 - exp).max(0) as usize;
    let fixed = format!("{:.*}", decimals, x);
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

fn game_line(m: &PayoffMatrix) -> String {
    format!("# game: {},{},{},{}", m.a, m.b, m.c, m.d)
}

fn verdict_token(verdict: &StabilityVerdict) -> &'static str {
    match verdict {
        StabilityVerdict::HopfAt(_) => unreachable!("token is only for non-Hopf verdicts"),
        StabilityVerdict::StableForAllDelays => "STABLE_FOR_ALL_DELAYS",
        StabilityVerdict::NoBifurcation { .. } => "NO_BIFURCATION",
    }
}

fn family_of(kernel: &DelayKernel) -> KernelFamily {
    match *kernel {
        DelayKernel::Dirac { .. } => KernelFamily::Dirac,
        DelayKernel::Uniform { .. } => KernelFamily::Uniform,
        DelayKernel::Gamma { k, .. } => KernelFamily::Gamma { k },
        DelayKernel::Discrete { p, .. } => KernelFamily::Discrete { p },
    }
}

fn require_hopf(
    family: KernelFamily,
    verdict: StabilityVerdict,
    context: &str,
) -> Result<HopfPoint, DomainError> {
    match verdict {
        StabilityVerdict::HopfAt(h) => Ok(h),
        other => Err(format!(
            "{} requires a bifurcation point, but {} is {} for this game",
            context,
            family,
            verdict_token(&other)
        )
        .into()),
    }
}

fn critical(m: &PayoffMatrix, family: KernelFamily) -> Result<(String, ExitCode), DomainError> {
    let g = derive_coefficients(m)?;
    let verdict = spectrum::hopf_point(family, &g)?;
    let mut out = String::new();
    writeln!(out, "{}", game_line(m))?;
    writeln!(out, "# kernel: {}", family)?;
    match verdict {
        StabilityVerdict::HopfAt(h) => {
            writeln!(out, "family,critical_param,omega0,crossing_sign")?;
            writeln!(
                out,
                "{},{},{},{}",
                family,
                fmt_g(h.critical_value),
                fmt_g(h.omega0),
                h.crossing_sign
            )?;
        }
        other => writeln!(out, "{}", verdict_token(&other))?,
    }
    Ok((out, ExitCode::SUCCESS))
}

fn amplitude(
    m: &PayoffMatrix,
    family: KernelFamily,
    mu: f64,
) -> Result<(String, ExitCode), DomainError> {
    let g = derive_coefficients(m)?;
    let verdict = spectrum::hopf_point(family, &g)?;
    let hopf = require_hopf(family, verdict, "amplitude")?;
    let prediction = lindstedt::predict(family, &g, &hopf)?;
    let mut out = String::new();
    writeln!(out, "{}", game_line(m))?;
    writeln!(out, "# kernel: {}", family)?;
    writeln!(out, "# critical_value: {}", fmt_g(hopf.critical_value))?;
    writeln!(out, "# omega0: {}", fmt_g(hopf.omega0))?;
    writeln!(out, "# mu: {}", fmt_g(mu))?;
    writeln!(out, "P,Q,slope,amplitude,criticality")?;
    let cell = match prediction.amplitude(mu) {
        Some(a) => fmt_g(a),
        None => "NOT_ON_UNSTABLE_SIDE".to_string(),
    };
    writeln!(
        out,
        "{},{},{},{},{}",
        fmt_g(prediction.numerator),
        fmt_g(prediction.denominator),
        fmt_g(prediction.slope),
        cell,
        prediction.criticality
    )?;
    Ok((out, ExitCode::SUCCESS))
}

fn simulate_cmd(
    m: &PayoffMatrix,
    kernel: &DelayKernel,
    horizon: Option<f64>,
    dt: Option<f64>,
    s0: Option<f64>,
) -> Result<(String, ExitCode), DomainError> {
    let g = derive_coefficients(m)?;
    let family = family_of(kernel);
    let hopf = match spectrum::hopf_point(family, &g)? {
        StabilityVerdict::HopfAt(h) => Some(h),
        _ => None,
    };
    let dt = dt.unwrap_or_else(|| {
        simulate::default_step(
            kernel,
            hopf.as_ref().map(|h| simulate::critical_time(family, h)),
        )
    });
    let horizon = horizon.unwrap_or_else(|| match &hopf {
        Some(h) => 40.0 * 2.0 * std::f64::consts::PI / h.omega0,
        None => 200.0,
    });
    let s0 = s0.unwrap_or(g.s_star + 0.01);
    let cfg = SimConfig::new(s0, dt, horizon);
    let traj = simulate::integrate(m, kernel, &cfg)?;
    let mut out = String::new();
    writeln!(out, "{}", game_line(m))?;
    writeln!(out, "# kernel: {}", kernel)?;
    writeln!(out, "# s_star: {}", fmt_g(g.s_star))?;
    writeln!(out, "# s0: {}", fmt_g(s0))?;
    writeln!(out, "# dt: {}", fmt_g(dt))?;
    writeln!(out, "# horizon: {}", fmt_g(horizon))?;
    writeln!(out, "t,s")?;
    for (i, &s) in traj.samples.iter().enumerate() {
        writeln!(out, "{},{}", fmt_g(traj.time(i)), fmt_g(s))?;
    }
    Ok((out, ExitCode::SUCCESS))
}

fn sim_error_token(e: &SimError) -> &'static str {
    match e {
        SimError::Resolution { .. } => "error-resolution",
        SimError::Blowup { .. } => "error-blowup",
        SimError::TooShort { .. } => "error-too-short",
        SimError::TooManySteps { .. } => "error-too-many-steps",
        SimError::Kernel(_) => "error-kernel",
        _ => "error",
    }
}

fn cycle_cells(est: &CycleEstimate) -> (String, String, String) {
    (
        fmt_g(est.amplitude),
        est.frequency.map(fmt_g).unwrap_or_default(),
        est.verdict.to_string(),
    )
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    m: &PayoffMatrix,
    family: KernelFamily,
    from: f64,
    to: f64,
    steps: usize,
    dt: Option<f64>,
    horizon: Option<f64>,
    settle_fraction: f64,
) -> Result<(String, ExitCode), DomainError> {
    let settings = SweepSettings {
        settle_fraction,
        dt,
        horizon,
        ..SweepSettings::default()
    };
    let rows = simulate::amplitude_sweep(m, family, from, to, steps, &settings)?;
    let mut out = String::new();
    writeln!(out, "{}", game_line(m))?;
    writeln!(out, "# kernel: {}", family)?;
    writeln!(out, "# from: {}", fmt_g(from))?;
    writeln!(out, "# to: {}", fmt_g(to))?;
    writeln!(out, "# steps: {}", steps)?;
    match dt {
        Some(v) => writeln!(out, "# dt: {}", fmt_g(v))?,
        None => writeln!(out, "# dt: auto")?,
    }
    match horizon {
        Some(v) => writeln!(out, "# horizon: {}", fmt_g(v))?,
        None => writeln!(out, "# horizon: auto")?,
    }
    writeln!(out, "# settle_fraction: {}", fmt_g(settle_fraction))?;
    writeln!(
        out,
        "param,predicted_amplitude,simulated_amplitude,simulated_frequency,verdict"
    )?;
    for row in &rows {
        let predicted = row.predicted.map(fmt_g).unwrap_or_default();
        let (amplitude, frequency, verdict) = match &row.outcome {
            Ok(est) => cycle_cells(est),
            Err(e) => (String::new(), String::new(), sim_error_token(e).to_string()),
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_g(row.param),
            predicted,
            amplitude,
            frequency,
            verdict
        )?;
    }
    Ok((out, ExitCode::SUCCESS))
}

fn verify(m: &PayoffMatrix, family: KernelFamily) -> Result<(String, ExitCode), DomainError> {
    let g = derive_coefficients(m)?;
    let verdict = spectrum::hopf_point(family, &g)?;
    let mut out = String::new();
    writeln!(out, "{}", game_line(m))?;
    writeln!(out, "# kernel: {}", family)?;
    let StabilityVerdict::HopfAt(h) = verdict else {
        writeln!(out, "{}", verdict_token(&verdict))?;
        return Ok((out, ExitCode::SUCCESS));
    };
    let kernel = family.kernel_at(h.critical_value);
    let lambda = num_complex::Complex64::new(0.0, h.omega0);
    let residual = spectrum::char_residual(&g, &kernel, lambda)?.norm();
    let tracked = spectrum::crossing_direction(family, &g, &h)?;
    writeln!(out, "char_residual,closed_form_sign,tracked_sign")?;
    writeln!(
        out,
        "{},{},{}",
        fmt_g(residual),
        h.crossing_sign,
        tracked
    )?;
    let code = if residual > VERIFY_TOL {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    };
    Ok((out, code))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digit_format() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(-0.05), "-0.05");
        assert_eq!(fmt_g(0.75), "0.75");
        assert_eq!(fmt_g(2.0943951023931953), "2.0943951");
        assert_eq!(fmt_g(123456789.0), "123456789");
        assert_eq!(fmt_g(1234567890.0), "1.23456789e9");
        assert_eq!(fmt_g(0.000123456789), "0.000123456789");
        assert_eq!(fmt_g(0.0000123456789), "1.23456789e-5");
        assert_eq!(fmt_g(9.999999996), "10");
        assert_eq!(fmt_g(-3.0e-12), "-3e-12");
    }

    #[test]
    fn game_strings_parse_or_reject() {
        let m = parse_game("-1.5,3,0,1.5").unwrap();
        assert_eq!(m, PayoffMatrix::new(-1.5, 3.0, 0.0, 1.5));
        assert!(parse_game("1,2,3").is_err());
        assert!(parse_game("1,2,3,x").is_err());
        assert!(parse_game("").is_err());
    }

    #[test]
    fn full_kernel_specs_round_trip_through_display() {
        for spec in ["dirac:2.5", "uniform:6.6", "gamma:3:0.82", "discrete:0.6:7"] {
            let kernel: DelayKernel = spec.parse().unwrap();
            let reparsed: DelayKernel = kernel.to_string().parse().unwrap();
            assert_eq!(kernel, reparsed);
        }
    }
}
