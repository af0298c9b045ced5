//! Named checks grouped in suites, each with a measured value and tolerance.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::analysis::{
    asymptotic_fit, compare_lowest, count_local_minima, criterion_scan, degennes_tail_check,
    derivative_orthogonality, find_minimum, gap_criterion, gaussian_bound, virial_report,
    DEFAULT_AXISYM_BRACKET, DEFAULT_MIN_TOL, DEFAULT_NEUMANN_BRACKET, GAP_SLACK, TAIL_WINDOW,
};
use crate::bandfuncs::{
    band_value, dh_derivative_neumann, fd_derivative, fh_derivative, scan, tau_grid,
    trace_derivative, SolverOptions, DEFAULT_FD_DELTA,
};
use crate::error::{Error, Result};
use crate::hermite::{e1, e2, h1_expansion, quadrature_coefficients, quadrature_h1_inner, CorrectorCoefficients};
use crate::operators::{Family, OperatorSpec};

/// τ values where the three derivative formulas are compared.
pub const DERIVATIVE_TAUS: [f64; 7] = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0];
pub const GAUSSIAN_BOUND_TAUS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
pub const INTERLACING_TAUS: [f64; 3] = [0.0, 1.0, 2.0];
pub const ASYMPTOTIC_RANGE: (f64, f64) = (6.0, 12.0);
pub const ASYMPTOTIC_SAMPLES: usize = 13;
pub const TAIL_SAMPLES: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Derivatives,
    Virial,
    Gap,
    Asymptotics,
    Interlacing,
    Hermite,
    Bounds,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Derivatives,
        Suite::Virial,
        Suite::Gap,
        Suite::Asymptotics,
        Suite::Interlacing,
        Suite::Hermite,
        Suite::Bounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Derivatives => "derivatives",
            Suite::Virial => "virial",
            Suite::Gap => "gap",
            Suite::Asymptotics => "asymptotics",
            Suite::Interlacing => "interlacing",
            Suite::Hermite => "hermite",
            Suite::Bounds => "bounds",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

/// How `measured` is compared with `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|measured| ≤ tolerance`
    AtMost,
    /// `measured > tolerance`
    Exceeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            comparison: Comparison::AtMost,
            passed: measured.abs() <= tolerance,
        }
    }

    pub fn exceeds(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance: threshold,
            comparison: Comparison::Exceeds,
            passed: measured > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Runs one suite, or every suite for [`Suite::All`].
pub fn run(suite: Suite, opts: &SolverOptions) -> Result<Vec<SuiteReport>> {
    let suites: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    suites
        .into_iter()
        .map(|s| {
            let checks = checks_for(s, opts)?;
            let passed = checks.iter().all(|c| c.passed);
            Ok(SuiteReport { suite: s, checks, passed })
        })
        .collect()
}

fn checks_for(suite: Suite, opts: &SolverOptions) -> Result<Vec<Check>> {
    match suite {
        Suite::Derivatives => derivative_checks(opts),
        Suite::Virial => virial_checks(opts),
        Suite::Gap => gap_checks(opts),
        Suite::Asymptotics => asymptotic_checks(opts),
        Suite::Interlacing => interlacing_checks(opts),
        Suite::Hermite => Ok(hermite_checks()),
        Suite::Bounds => bound_checks(opts),
        Suite::All => unreachable!("expanded by run"),
    }
}

fn axisym_minimum(opts: &SolverOptions) -> Result<crate::analysis::MinimumReport> {
    find_minimum(Family::AxiSym { m: 0 }, 1, DEFAULT_AXISYM_BRACKET, DEFAULT_MIN_TOL, opts)
}

/// `fh` against the trace formula and a central difference for `ζ₁`.
pub fn derivative_triangle_checks(opts: &SolverOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for &tau in &DERIVATIVE_TAUS {
        let spec = OperatorSpec::axisym(tau);
        let fh = fh_derivative(&spec, 1, opts)?;
        let tr = trace_derivative(&spec, 1, opts)?;
        let fd = fd_derivative(&spec, 1, DEFAULT_FD_DELTA, opts)?;
        checks.push(Check::at_most(format!("fh vs trace at tau={tau}"), fh - tr, 1e-3));
        checks.push(Check::at_most(format!("fh vs central difference at tau={tau}"), fh - fd, 1e-3));
    }
    Ok(checks)
}

pub fn derivative_checks(opts: &SolverOptions) -> Result<Vec<Check>> {
    let mut checks = derivative_triangle_checks(opts)?;
    let theta = find_minimum(Family::DeGennesNeumann, 1, DEFAULT_NEUMANN_BRACKET, DEFAULT_MIN_TOL, opts)?;
    checks.push(Check::at_most(
        "neumann boundary derivative at xi0",
        dh_derivative_neumann(theta.tau_star, 1, opts)?,
        1e-3,
    ));
    let min = axisym_minimum(opts)?;
    checks.push(Check::at_most(
        "tau derivative of ground state orthogonal at tau*",
        derivative_orthogonality(min.tau_star, DEFAULT_FD_DELTA, opts)?,
        1e-4,
    ));
    Ok(checks)
}

pub fn virial_checks(opts: &SolverOptions) -> Result<Vec<Check>> {
    let min = axisym_minimum(opts)?;
    let v = virial_report(min.tau_star, opts)?;
    let half = min.value / 2.0;
    Ok(vec![
        Check::at_most("virial max mismatch", v.max_mismatch, 5e-3),
        Check::at_most("kinetic - Xi0/2", v.kinetic - half, 5e-3),
        Check::at_most("potential moment - Xi0/2", v.potential_moment - half, 5e-3),
        Check::at_most("half energy - Xi0/2", v.half_energy - half, 5e-3),
        Check::at_most("first moment at tau*", v.first_moment, 1e-3),
    ])
}

pub fn gap_checks(opts: &SolverOptions) -> Result<Vec<Check>> {
    let grid = tau_grid(0.0, 5.0, 0.01)?;
    let samples = criterion_scan(&grid, opts)?;
    let at_zero = samples[0].value;
    let min_positive = samples[1..].iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let mut checks = vec![
        Check::at_most("zeta2(0) - 3 zeta1(0)", at_zero, 1e-5),
        Check::exceeds("min of zeta2 - 3 zeta1 over tau=k/100, k=1..500", min_positive, 0.0),
    ];
    let min = axisym_minimum(opts)?;
    let c = gap_criterion(min.tau_star, opts)?;
    checks.push(Check::exceeds("gap bound at tau*", c.gap_bound, 0.0));
    checks.push(Check::exceeds(
        "second derivative minus gap bound at tau*",
        c.second_derivative_estimate - c.gap_bound,
        -GAP_SLACK,
    ));
    let zeta1 = scan(Family::AxiSym { m: 0 }, &[1], &grid, false, opts)?;
    let minima = count_local_minima(&zeta1.values[0]);
    checks.push(Check::at_most("local minima of zeta1 on [0,5] minus one", minima as f64 - 1.0, 0.0));
    Ok(checks)
}

/// `(family, level, target c2, tolerance)` for the large-τ fits.
pub const ASYMPTOTIC_TARGETS: [(Family, usize, f64, f64); 4] = [
    (Family::AxiSym { m: 0 }, 1, -0.25, 0.02),
    (Family::AxiSym { m: 0 }, 2, -0.25, 0.02),
    (Family::AxiSym { m: 1 }, 1, 0.75, 0.05),
    (Family::AxiSym { m: 2 }, 1, 3.75, 0.2),
];

pub fn asymptotic_checks(opts: &SolverOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (family, n, target, tol) in ASYMPTOTIC_TARGETS {
        let fit = asymptotic_fit(family, n, ASYMPTOTIC_RANGE, ASYMPTOTIC_SAMPLES, opts)?;
        checks.push(Check::at_most(format!("c2 of {family} level {n} minus {target}"), fit.fitted_c2 - target, tol));
    }
    let tail = degennes_tail_check(1, TAIL_WINDOW, TAIL_SAMPLES, opts)?;
    let worst = tail
        .samples
        .iter()
        .flat_map(|s| [s.neumann_ratio, s.dirichlet_ratio])
        .map(|r| (r - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::at_most("de gennes tail ratio deviation from 1", worst, 0.2));
    checks.push(Check::at_most(
        "de gennes tail approach signs and trend (0 = ok)",
        if tail.approach_signs && tail.trending_to_one { 0.0 } else { 1.0 },
        0.0,
    ));
    Ok(checks)
}

pub fn interlacing_checks(opts: &SolverOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for &tau in &INTERLACING_TAUS {
        let line = |n| band_value(&OperatorSpec::new(Family::DeGennesLine, tau), n, opts);
        let (l1, l2) = (line(1)?, line(2)?);
        let neu = band_value(&OperatorSpec::new(Family::DeGennesNeumann, tau), 1, opts)?;
        let dir = band_value(&OperatorSpec::new(Family::DeGennesDirichlet, tau), 1, opts)?;
        checks.push(Check::at_most(
            format!("mu1 - neumann mu1 at tau={tau}"),
            l1.value - neu.value,
            1e-6 + l1.error_estimate + neu.error_estimate,
        ));
        checks.push(Check::at_most(
            format!("mu2 - dirichlet mu1 at tau={tau}"),
            l2.value - dir.value,
            1e-6 + l2.error_estimate + dir.error_estimate,
        ));
    }
    Ok(checks)
}

pub fn hermite_checks() -> Vec<Check> {
    let mut checks = Vec::new();
    for n in 1..=6 {
        checks.push(Check::at_most(format!("E1 level {n}"), e1(n), 1e-12));
        checks.push(Check::at_most(format!("E1 level {n} by quadrature"), quadrature_h1_inner(n, n), 1e-12));
        checks.push(Check::at_most(format!("E2 level {n} + 1/4"), e2(n).total + 0.25, 1e-12));
        let (_, c) = h1_expansion(n);
        checks.push(Check::at_most(
            format!("corrector coefficients level {n} vs closed form"),
            c.max_abs_difference(&CorrectorCoefficients::closed_form(n)),
            1e-12,
        ));
        checks.push(Check::at_most(
            format!("corrector coefficients level {n} vs quadrature"),
            c.max_abs_difference(&quadrature_coefficients(n)),
            1e-10,
        ));
    }
    checks
}

pub fn bound_checks(opts: &SolverOptions) -> Result<Vec<Check>> {
    let min = axisym_minimum(opts)?;
    let cmp = compare_lowest(min.tau_star, opts)?;
    let ten_err = 10.0 * cmp.combined_error;
    let mut checks = vec![
        Check::at_most("Xi0 - 0.8630", min.value - 0.8630, 5e-3),
        Check::at_most("tau* - 1.53", min.tau_star - 1.53, 2e-2),
        Check::at_most("Theta0 - 0.5901", cmp.theta0 - 0.5901, 1e-3),
        Check::at_most("xi0 - 0.7682", cmp.xi0_de_gennes - 0.7682, 2e-3),
        Check::at_most("xi0^2 - Theta0", cmp.xi0_de_gennes.powi(2) - cmp.theta0, 1e-3),
        Check::exceeds("Xi0 - Theta0 over 10x error", cmp.margin_total, ten_err),
        Check::exceeds("sqrt(4-pi) - Xi0 over 10x error", cmp.margin_upper, ten_err),
        Check::exceeds("zeta1(tau*) - neumann mu1(tau*)", cmp.margin_strict, 0.05),
    ];
    for &tau in &GAUSSIAN_BOUND_TAUS {
        let z = band_value(&OperatorSpec::axisym(tau), 1, opts)?;
        checks.push(Check::exceeds(format!("gaussian bound - zeta1 at tau={tau}"), gaussian_bound(tau)? - z.value, 0.0));
    }
    Ok(checks)
}
