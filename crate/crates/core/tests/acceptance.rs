//! Acceptance criteria, one line each. Exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p bandfn-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bandfn::analysis::{
    asymptotic_fit, compare_lowest, count_local_minima, criterion_scan, degennes_tail_check,
    find_minimum, gap_criterion, gaussian_bound, virial_report, MinimumReport, DEFAULT_AXISYM_BRACKET,
    DEFAULT_MIN_TOL, DEFAULT_NEUMANN_BRACKET, GAP_SLACK, TAIL_RATIO_BOUNDS, TAIL_WINDOW,
};
use bandfn::bandfuncs::{band_value, dh_derivative_neumann, scan, tau_grid, SolverOptions};
use bandfn::operators::{Family, OperatorSpec};
use bandfn::verify::{
    derivative_triangle_checks, hermite_checks, interlacing_checks, Check, Comparison, ASYMPTOTIC_RANGE, ASYMPTOTIC_SAMPLES,
    ASYMPTOTIC_TARGETS, GAUSSIAN_BOUND_TAUS, TAIL_SAMPLES,
};
use bandfn::Result;

const TAIL_N_CELLS: usize = 20000;

struct Context {
    opts: SolverOptions,
    axisym: Option<MinimumReport>,
    neumann: Option<MinimumReport>,
    gap_scan: Option<(Vec<f64>, Vec<f64>)>,
}

impl Context {
    fn axisym(&mut self) -> Result<MinimumReport> {
        if self.axisym.is_none() {
            self.axisym =
                Some(find_minimum(Family::AxiSym { m: 0 }, 1, DEFAULT_AXISYM_BRACKET, DEFAULT_MIN_TOL, &self.opts)?);
        }
        Ok(self.axisym.clone().unwrap())
    }

    fn neumann(&mut self) -> Result<MinimumReport> {
        if self.neumann.is_none() {
            self.neumann =
                Some(find_minimum(Family::DeGennesNeumann, 1, DEFAULT_NEUMANN_BRACKET, DEFAULT_MIN_TOL, &self.opts)?);
        }
        Ok(self.neumann.clone().unwrap())
    }
}

fn c1_laguerre(ctx: &mut Context) -> Result<Vec<Check>> {
    let s = OperatorSpec::axisym(0.0);
    Ok(vec![
        Check::at_most("zeta1(0) - 2", band_value(&s, 1, &ctx.opts)?.value - 2.0, 1e-6),
        Check::at_most("zeta2(0) - 6", band_value(&s, 2, &ctx.opts)?.value - 6.0, 1e-6),
    ])
}

fn c2_ground_energy(ctx: &mut Context) -> Result<Vec<Check>> {
    let m = ctx.axisym()?;
    Ok(vec![
        Check::at_most("Xi0 - 0.8630", m.value - 0.8630, 5e-3),
        Check::at_most("tau* - 1.53", m.tau_star - 1.53, 2e-2),
    ])
}

fn c3_de_gennes(ctx: &mut Context) -> Result<Vec<Check>> {
    let m = ctx.neumann()?;
    Ok(vec![
        Check::at_most("Theta0 - 0.5901", m.value - 0.5901, 1e-3),
        Check::at_most("xi0 - 0.7682", m.tau_star - 0.7682, 2e-3),
        Check::at_most("xi0^2 - Theta0", m.tau_star.powi(2) - m.value, 1e-3),
    ])
}

fn c4_ordering(ctx: &mut Context) -> Result<Vec<Check>> {
    let m = ctx.axisym()?;
    let cmp = compare_lowest(m.tau_star, &ctx.opts)?;
    let ten_err = 10.0 * cmp.combined_error;
    let mut checks = vec![
        Check::exceeds("Xi0 - Theta0 vs 10x error", cmp.margin_total, ten_err),
        Check::exceeds("sqrt(4-pi) - Xi0 vs 10x error", cmp.margin_upper, ten_err),
    ];
    for &tau in &GAUSSIAN_BOUND_TAUS {
        let z = band_value(&OperatorSpec::axisym(tau), 1, &ctx.opts)?.value;
        checks.push(Check::exceeds(format!("bound - zeta1 at {tau}"), gaussian_bound(tau)? - z, 0.0));
    }
    Ok(checks)
}

fn c5_asymptotics(ctx: &mut Context) -> Result<Vec<Check>> {
    ASYMPTOTIC_TARGETS
        .iter()
        .map(|&(family, n, target, tol)| {
            let fit = asymptotic_fit(family, n, ASYMPTOTIC_RANGE, ASYMPTOTIC_SAMPLES, &ctx.opts)?;
            Ok(Check::at_most(format!("c2[{family}, n={n}] - ({target})"), fit.fitted_c2 - target, tol))
        })
        .collect()
}

fn c6_derivatives(ctx: &mut Context) -> Result<Vec<Check>> {
    let mut checks = derivative_triangle_checks(&ctx.opts)?;
    let xi0 = ctx.neumann()?.tau_star;
    checks.push(Check::at_most("dh derivative at xi0", dh_derivative_neumann(xi0, 1, &ctx.opts)?, 1e-3));
    Ok(checks)
}

fn c7_virial(ctx: &mut Context) -> Result<Vec<Check>> {
    let m = ctx.axisym()?;
    let v = virial_report(m.tau_star, &ctx.opts)?;
    let half = m.value / 2.0;
    Ok(vec![
        Check::at_most("max pairwise mismatch", v.max_mismatch, 5e-3),
        Check::at_most("kinetic - Xi0/2", v.kinetic - half, 5e-3),
        Check::at_most("potential moment - Xi0/2", v.potential_moment - half, 5e-3),
        Check::at_most("zeta1(tau*)/2 - Xi0/2", v.half_energy - half, 5e-3),
    ])
}

fn c8_gap(ctx: &mut Context) -> Result<Vec<Check>> {
    let grid = tau_grid(0.0, 5.0, 0.01)?;
    let samples = criterion_scan(&grid, &ctx.opts)?;
    let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let min_positive = values[1..].iter().copied().fold(f64::INFINITY, f64::min);
    let at_zero = values[0];
    ctx.gap_scan = Some((grid, values));
    let m = ctx.axisym()?;
    let c = gap_criterion(m.tau_star, &ctx.opts)?;
    Ok(vec![
        Check::exceeds("min zeta2-3zeta1, tau=k/100, k=1..500", min_positive, 0.0),
        Check::at_most("zeta2(0) - 3 zeta1(0)", at_zero, 1e-5),
        Check::exceeds("lambda'' - gap bound at tau*", c.second_derivative_estimate - c.gap_bound, -GAP_SLACK),
    ])
}

fn c9_uniqueness(ctx: &mut Context) -> Result<Vec<Check>> {
    let grid = match &ctx.gap_scan {
        Some((grid, _)) => grid.clone(),
        None => tau_grid(0.0, 5.0, 0.01)?,
    };
    let zeta1 = scan(Family::AxiSym { m: 0 }, &[1], &grid, false, &ctx.opts)?;
    let minima = count_local_minima(&zeta1.values[0]);
    Ok(vec![Check::at_most("sign changes - to + minus one", minima as f64 - 1.0, 0.0)])
}

fn c10_interlacing(ctx: &mut Context) -> Result<Vec<Check>> {
    interlacing_checks(&ctx.opts)
}

fn c11_hermite(_: &mut Context) -> Result<Vec<Check>> {
    Ok(hermite_checks())
}

fn c12_tails(ctx: &mut Context) -> Result<Vec<Check>> {
    let opts = SolverOptions { n_cells: TAIL_N_CELLS, ..ctx.opts };
    let t = degennes_tail_check(1, TAIL_WINDOW, TAIL_SAMPLES, &opts)?;
    let (lo, hi) = TAIL_RATIO_BOUNDS;
    let half_width = (hi - lo) / 2.0;
    let centre = (hi + lo) / 2.0;
    let worst = |f: fn(&bandfn::analysis::TailSample) -> f64| {
        t.samples.iter().map(|s| (f(s) - centre).abs()).fold(0.0, f64::max)
    };
    let below = t.samples.iter().map(|s| 1.0 - s.neumann).fold(f64::INFINITY, f64::min);
    let above = t.samples.iter().map(|s| s.dirichlet - 1.0).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::at_most("neumann ratio distance from 1", worst(|s| s.neumann_ratio), half_width),
        Check::at_most("dirichlet ratio distance from 1", worst(|s| s.dirichlet_ratio), half_width),
        Check::exceeds("1 - neumann mu1 (from below)", below, 0.0),
        Check::exceeds("dirichlet mu1 - 1 (from above)", above, 0.0),
        Check::at_most("ratios drift away from 1 (0 = no)", if t.trending_to_one { 0.0 } else { 1.0 }, 0.0),
    ])
}

type Criterion = fn(&mut Context) -> Result<Vec<Check>>;

const CRITERIA: [(&str, u64, Criterion); 12] = [
    ("Laguerre exactness", 5, c1_laguerre),
    ("3D ground energy", 120, c2_ground_energy),
    ("de Gennes constants", 60, c3_de_gennes),
    ("strict ordering", 60, c4_ordering),
    ("two-term asymptotics", 180, c5_asymptotics),
    ("derivative triangle", 120, c6_derivatives),
    ("virial identity", 30, c7_virial),
    ("gap criterion scan", 300, c8_gap),
    ("uniqueness scan", 300, c9_uniqueness),
    ("interlacing", 60, c10_interlacing),
    ("Hermite oracle", 5, c11_hermite),
    ("de Gennes tails", 300, c12_tails),
];

/// Relative distance from failing; the tightest check is the one reported.
fn slack(c: &Check) -> f64 {
    match c.comparison {
        Comparison::AtMost if c.tolerance > 0.0 => 1.0 - c.measured.abs() / c.tolerance,
        Comparison::AtMost => 0.0,
        Comparison::Exceeds => (c.measured - c.tolerance) / (c.measured.abs() + c.tolerance.abs()),
    }
}

fn describe(c: &Check) -> String {
    let op = match c.comparison {
        Comparison::AtMost => "|x| <=",
        Comparison::Exceeds => "x >",
    };
    format!("{}: x = {:.6e} ({op} {:.3e})", c.name, c.measured, c.tolerance)
}

fn main() -> ExitCode {
    let mut ctx = Context {
        opts: SolverOptions::default(),
        axisym: None,
        neumann: None,
        gap_scan: None,
    };
    let mut failures = 0;
    for (k, (title, budget, run)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let outcome = run(&mut ctx);
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let line = match outcome {
            Ok(checks) => {
                let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
                let ok = failed.is_empty() && in_time;
                let shown = failed
                    .first()
                    .copied()
                    .or_else(|| checks.iter().min_by(|a, b| slack(a).total_cmp(&slack(b))));
                let mut line = format!(
                    "{} criterion {:>2} {title}: {} check(s), {} failed; {}",
                    if ok { "PASS" } else { "FAIL" },
                    k + 1,
                    checks.len(),
                    failed.len(),
                    shown.map(describe).unwrap_or_default()
                );
                for extra in failed.iter().skip(1) {
                    line.push_str(&format!("; {}", describe(extra)));
                }
                if !ok {
                    failures += 1;
                }
                line
            }
            Err(e) => {
                failures += 1;
                format!("FAIL criterion {:>2} {title}: error: {e}", k + 1)
            }
        };
        println!("{line}; runtime {:.2} s (budget {budget} s{})", elapsed.as_secs_f64(), if in_time { "" } else { ", EXCEEDED" });
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failures, CRITERIA.len());
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
