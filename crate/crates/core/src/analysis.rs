//! Minima of band functions and the criteria evaluated at them.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bandfuncs::{
    band_derivative, band_points, band_value, fh_derivative, mode, modes_around, scan,
    SolverOptions,
};
use crate::error::{Error, Result};
use crate::operators::{Family, OperatorSpec};

/// Step of the central second difference used for `λ''`.
pub const SECOND_DIFFERENCE_STEP: f64 = 1e-2;
/// Largest `|λ'|` accepted at a claimed critical point.
pub const CRITICAL_TOL: f64 = 1e-3;
/// Slack on the gap criterion `λ₁'' ≥ bound`.
pub const GAP_SLACK: f64 = 1e-2;
pub const DEFAULT_AXISYM_BRACKET: (f64, f64) = (0.5, 3.0);
pub const DEFAULT_NEUMANN_BRACKET: (f64, f64) = (0.3, 1.5);
pub const DEFAULT_MIN_TOL: f64 = 1e-6;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumReport {
    pub family: Family,
    pub level: usize,
    pub tau_star: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub derivative_at_min: f64,
    pub second_derivative_estimate: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Golden-section search for a minimum of `f` on `[a, b]` down to width `tol`.
/// Returns the best abscissa, its value, and the iteration count.
pub fn golden_section<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut iterations = 0;
    while b - a > tol {
        iterations += 1;
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 < f2 { (x1, f1, iterations) } else { (x2, f2, iterations) })
}

/// Minimum of level `n` of `family` inside `bracket`.
///
/// The bracket must show a derivative sign change. The minimizer is located
/// by golden section on extrapolated values and polished by one parabolic
/// step through three points spaced by `max(tol, 10⁻³)`.
pub fn find_minimum(
    family: Family,
    n: usize,
    bracket: (f64, f64),
    tol: f64,
    opts: &SolverOptions,
) -> Result<MinimumReport> {
    let (a, b) = bracket;
    if !(a < b) || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("bad bracket ({a}, {b}) or tolerance {tol}")));
    }
    let spec = |tau| OperatorSpec::new(family, tau);
    let da = band_derivative(&spec(a), n, opts)?;
    let db = band_derivative(&spec(b), n, opts)?;
    if !(da < 0.0 && db > 0.0) {
        return Err(Error::NoSignChange { a, b, da, db });
    }
    let value = |tau: f64| band_value(&spec(tau), n, opts).map(|p| p.value);

    let (mut tau_star, _, iterations) = golden_section(value, a, b, tol)?;

    let s = tol.max(1e-3);
    let (fm, f0, fp) = (value(tau_star - s)?, value(tau_star)?, value(tau_star + s)?);
    let curvature = fp - 2.0 * f0 + fm;
    if curvature > 0.0 {
        let shift = -s * (fp - fm) / (2.0 * curvature);
        if shift.abs() <= s {
            tau_star += shift;
        }
    }

    let point = band_value(&spec(tau_star), n, opts)?;
    let second = second_derivative(family, n, tau_star, opts)?;
    Ok(MinimumReport {
        family,
        level: n,
        tau_star,
        value: point.value,
        error_estimate: point.error_estimate,
        derivative_at_min: band_derivative(&spec(tau_star), n, opts)?,
        second_derivative_estimate: second,
        bracket,
        iterations,
    })
}

/// Half-width of the interval on which a reported minimizer must show a
/// derivative sign change.
pub const CERTIFICATE_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimumCertificate {
    pub derivative_left: f64,
    pub derivative_right: f64,
    /// `|derivative_at_min| ≤ CRITICAL_TOL`
    pub derivative_small: bool,
    /// derivative negative at `τ* − r`, positive at `τ* + r`
    pub sign_change: bool,
    pub convex: bool,
    pub certified: bool,
}

/// Checks a reported minimum: small derivative, sign change across
/// `τ* ± CERTIFICATE_RADIUS`, positive second difference.
pub fn certify_minimum(report: &MinimumReport, opts: &SolverOptions) -> Result<MinimumCertificate> {
    let at = |tau| band_derivative(&OperatorSpec::new(report.family, tau), report.level, opts);
    let derivative_left = at(report.tau_star - CERTIFICATE_RADIUS)?;
    let derivative_right = at(report.tau_star + CERTIFICATE_RADIUS)?;
    let derivative_small = report.derivative_at_min.abs() <= CRITICAL_TOL;
    let sign_change = derivative_left < 0.0 && derivative_right > 0.0;
    let convex = report.second_derivative_estimate > 0.0;
    Ok(MinimumCertificate {
        derivative_left,
        derivative_right,
        derivative_small,
        sign_change,
        convex,
        certified: derivative_small && sign_change && convex,
    })
}

/// Central second difference of extrapolated band values.
pub fn second_derivative(family: Family, n: usize, tau: f64, opts: &SolverOptions) -> Result<f64> {
    let d = SECOND_DIFFERENCE_STEP;
    let value = |t: f64| band_value(&OperatorSpec::new(family, t), n, opts).map(|p| p.value);
    let (fm, f0, fp) = (value(tau - d)?, value(tau)?, value(tau + d)?);
    Ok((fp - 2.0 * f0 + fm) / (d * d))
}

/// Rayleigh-quotient bound of `ζ₁(τ)` from the optimal gaussian trial state.
pub fn gaussian_bound(tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("gaussian bound needs tau > 0, got {tau}")));
    }
    Ok(PI / (4.0 * tau * tau) + (4.0 - PI) * tau * tau / PI)
}

/// Minimum over τ of [`gaussian_bound`], `√(4 − π)`.
pub fn gaussian_bound_minimum() -> f64 {
    (4.0 - PI).sqrt()
}

/// Minimizer of [`gaussian_bound`], `(π² / (4(4 − π)))^{1/4}`.
pub fn gaussian_bound_argmin() -> f64 {
    (PI * PI / (4.0 * (4.0 - PI))).powf(0.25)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirialReport {
    pub tau_c: f64,
    /// `∫ r |z'|² dr`
    pub kinetic: f64,
    /// `∫ (r − τ_C)² |z|² r dr`
    pub potential_moment: f64,
    /// `ζ₁(τ_C) / 2`
    pub half_energy: f64,
    pub max_mismatch: f64,
    /// `∫ (r − τ_C) |z|² r dr`, zero at a critical point.
    pub first_moment: f64,
}

fn require_critical(tau_c: f64, opts: &SolverOptions) -> Result<f64> {
    let derivative = fh_derivative(&OperatorSpec::axisym(tau_c), 1, opts)?;
    if derivative.abs() > CRITICAL_TOL {
        return Err(Error::NotCritical { tau: tau_c, derivative });
    }
    Ok(derivative)
}

pub fn virial_report(tau_c: f64, opts: &SolverOptions) -> Result<VirialReport> {
    require_critical(tau_c, opts)?;
    let spec = OperatorSpec::axisym(tau_c);
    let ground = mode(&spec, 1, opts)?;
    let kinetic = ground.weighted_kinetic();
    let potential_moment = ground.weighted_moment(|r| (r - tau_c).powi(2));
    let first_moment = ground.weighted_moment(|r| r - tau_c);
    let half_energy = band_value(&spec, 1, opts)?.value / 2.0;
    let max_mismatch = [
        (kinetic - potential_moment).abs(),
        (kinetic - half_energy).abs(),
        (potential_moment - half_energy).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(VirialReport {
        tau_c,
        kinetic,
        potential_moment,
        half_energy,
        max_mismatch,
        first_moment,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub tau_c: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    /// `2 (ζ₂ − 3ζ₁) / (ζ₂ − ζ₁)`
    pub gap_bound: f64,
    pub second_derivative_estimate: f64,
    pub satisfied: bool,
}

pub fn gap_bound(zeta1: f64, zeta2: f64) -> f64 {
    2.0 * (zeta2 - 3.0 * zeta1) / (zeta2 - zeta1)
}

pub fn gap_criterion(tau_c: f64, opts: &SolverOptions) -> Result<CriterionReport> {
    require_critical(tau_c, opts)?;
    let pts = band_points(&OperatorSpec::axisym(tau_c), 2, opts)?;
    let (zeta1, zeta2) = (pts[0].value, pts[1].value);
    let bound = gap_bound(zeta1, zeta2);
    let second = second_derivative(Family::AxiSym { m: 0 }, 1, tau_c, opts)?;
    Ok(CriterionReport {
        tau_c,
        zeta1,
        zeta2,
        gap_bound: bound,
        second_derivative_estimate: second,
        satisfied: bound > 0.0 && second >= bound - GAP_SLACK,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionSample {
    pub tau: f64,
    /// `ζ₂(τ) − 3 ζ₁(τ)`
    pub value: f64,
    pub error_estimate: f64,
}

/// `ζ₂ − 3ζ₁` along a τ-grid.
pub fn criterion_scan(tau_grid: &[f64], opts: &SolverOptions) -> Result<Vec<CriterionSample>> {
    let s = scan(Family::AxiSym { m: 0 }, &[1, 2], tau_grid, false, opts)?;
    Ok(tau_grid
        .iter()
        .enumerate()
        .map(|(j, &tau)| CriterionSample {
            tau,
            value: s.values[1][j] - 3.0 * s.values[0][j],
            error_estimate: s.error_estimates[1][j] + 3.0 * s.error_estimates[0][j],
        })
        .collect())
}

/// Number of `−→+` sign changes in the forward differences of `values`.
pub fn count_local_minima(values: &[f64]) -> usize {
    let signs: Vec<bool> = values
        .windows(2)
        .filter(|w| w[1] != w[0])
        .map(|w| w[1] > w[0])
        .collect();
    signs.windows(2).filter(|s| !s[0] && s[1]).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub family: Family,
    pub level: usize,
    pub m: i32,
    pub tau_range: (f64, f64),
    pub fitted_c0: f64,
    pub fitted_c2: f64,
    /// Largest absolute deviation of the samples from the fit.
    pub residual: f64,
    /// `c2` of the fit `c0 + c2/τ² + c4/τ⁴` on the same samples; a
    /// diagnostic for the bias a genuine `τ⁻⁴` term puts on `fitted_c2`.
    pub three_term_c2: f64,
    pub three_term_c4: f64,
}

pub const ASYMPTOTIC_WINDOW: (f64, f64) = (5.0, 14.0);

/// Least-squares fit `λ(τ) ≈ c0 + c2 / τ²` over `n_samples` equispaced τ.
pub fn asymptotic_fit(
    family: Family,
    n: usize,
    tau_range: (f64, f64),
    n_samples: usize,
    opts: &SolverOptions,
) -> Result<AsymptoticFit> {
    let (lo, hi) = tau_range;
    if !(lo >= ASYMPTOTIC_WINDOW.0 && hi <= ASYMPTOTIC_WINDOW.1 && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "range ({lo}, {hi}) must lie inside [{}, {}]",
            ASYMPTOTIC_WINDOW.0, ASYMPTOTIC_WINDOW.1
        )));
    }
    if n_samples < 6 {
        return Err(Error::InvalidArgument(format!("need at least 6 samples, got {n_samples}")));
    }
    // basis 1/τ² must vary enough across the window to separate c0 from c2
    let spread = 1.0 / (lo * lo) - 1.0 / (hi * hi);
    if spread < 1e-3 {
        return Err(Error::IllConditioned(format!(
            "1/τ² varies by only {spread:e} over ({lo}, {hi})"
        )));
    }
    let step = (hi - lo) / (n_samples - 1) as f64;
    let grid: Vec<f64> = (0..n_samples).map(|k| lo + k as f64 * step).collect();
    let s = scan(family, &[n], &grid, false, opts)?;
    let ys = &s.values[0];
    let xs: Vec<f64> = grid.iter().map(|t| 1.0 / (t * t)).collect();
    let (c0, c2) = linear_least_squares(&xs, ys);
    let residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - c0 - c2 * x).abs())
        .fold(0.0, f64::max);
    let [_, three_term_c2, three_term_c4] = quadratic_least_squares(&xs, ys)?;
    Ok(AsymptoticFit {
        family,
        level: n,
        m: family.angular_momentum(),
        tau_range,
        fitted_c0: c0,
        fitted_c2: c2,
        residual,
        three_term_c2,
        three_term_c4,
    })
}

/// Intercept and slope of the least-squares line through `(x, y)`.
fn linear_least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Coefficients of the least-squares parabola through `(x, y)`, by the normal
/// equations in the centred and scaled variable.
fn quadratic_least_squares(xs: &[f64], ys: &[f64]) -> Result<[f64; 3]> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sx = xs.iter().map(|x| (x - mx).abs()).fold(0.0, f64::max);
    if xs.len() < 3 || sx == 0.0 {
        return Err(Error::IllConditioned("need three distinct abscissae".into()));
    }
    let mut a = [[0.0; 4]; 3];
    for (x, y) in xs.iter().zip(ys) {
        let t = (x - mx) / sx;
        let basis = [1.0, t, t * t];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += basis[i] * basis[j];
            }
            a[i][3] += basis[i] * y;
        }
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *x -= f * p;
            }
        }
    }
    let mut p = [0.0; 3];
    for i in (0..3).rev() {
        let tail: f64 = (i + 1..3).map(|k| a[i][k] * p[k]).sum();
        p[i] = (a[i][3] - tail) / a[i][i];
    }
    // back from t = (x − mx)/sx to powers of x
    let (q1, q2) = (p[1] / sx, p[2] / (sx * sx));
    Ok([p[0] - q1 * mx + q2 * mx * mx, q1 - 2.0 * q2 * mx, q2])
}

pub const TAIL_WINDOW: (f64, f64) = (2.5, 3.5);
pub const TAIL_RATIO_BOUNDS: (f64, f64) = (0.8, 1.2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSample {
    pub tau: f64,
    pub neumann: f64,
    pub dirichlet: f64,
    /// `((2n−1) − μₙᴺ) / leading term`
    pub neumann_ratio: f64,
    /// `(μₙᴰ − (2n−1)) / leading term`
    pub dirichlet_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub level: usize,
    pub samples: Vec<TailSample>,
    pub ratios_in_bounds: bool,
    /// Neumann below, Dirichlet above the Landau level.
    pub approach_signs: bool,
    /// `|ratio − 1|` does not grow with τ.
    pub trending_to_one: bool,
    pub passed: bool,
}

/// Leading term `2ⁿ / ((n−1)! √π) τ^{2n−1} e^{−τ²}` of the distance between
/// the half-line de Gennes band functions and the Landau level `2n − 1`.
pub fn degennes_tail_leading(n: usize, tau: f64) -> f64 {
    let factorial: f64 = (1..n).map(|k| k as f64).product();
    2f64.powi(n as i32) / (factorial * PI.sqrt()) * tau.powi(2 * n as i32 - 1) * (-tau * tau).exp()
}

pub fn degennes_tail_check(
    n: usize,
    tau_range: (f64, f64),
    n_samples: usize,
    opts: &SolverOptions,
) -> Result<TailReport> {
    let (lo, hi) = tau_range;
    if !(lo >= TAIL_WINDOW.0 && hi <= TAIL_WINDOW.1 && lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "range ({lo}, {hi}) must lie inside the resolvable window [{}, {}]",
            TAIL_WINDOW.0, TAIL_WINDOW.1
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let grid: Vec<f64> = if n_samples == 1 {
        vec![lo]
    } else {
        (0..n_samples)
            .map(|k| lo + (hi - lo) * k as f64 / (n_samples - 1) as f64)
            .collect()
    };
    let landau = (2 * n - 1) as f64;
    let neumann = scan(Family::DeGennesNeumann, &[n], &grid, false, opts)?;
    let dirichlet = scan(Family::DeGennesDirichlet, &[n], &grid, false, opts)?;
    let samples: Vec<TailSample> = grid
        .iter()
        .enumerate()
        .map(|(j, &tau)| {
            let lead = degennes_tail_leading(n, tau);
            let (mn, md) = (neumann.values[0][j], dirichlet.values[0][j]);
            TailSample {
                tau,
                neumann: mn,
                dirichlet: md,
                neumann_ratio: (landau - mn) / lead,
                dirichlet_ratio: (md - landau) / lead,
            }
        })
        .collect();
    let (rlo, rhi) = TAIL_RATIO_BOUNDS;
    let ratios_in_bounds = samples.iter().all(|s| {
        (rlo..=rhi).contains(&s.neumann_ratio) && (rlo..=rhi).contains(&s.dirichlet_ratio)
    });
    let approach_signs = samples.iter().all(|s| s.neumann < landau && s.dirichlet > landau);
    let trending_to_one = samples.windows(2).all(|w| {
        (w[1].neumann_ratio - 1.0).abs() <= (w[0].neumann_ratio - 1.0).abs() + 1e-3
            && (w[1].dirichlet_ratio - 1.0).abs() <= (w[0].dirichlet_ratio - 1.0).abs() + 1e-3
    });
    Ok(TailReport {
        level: n,
        samples,
        ratios_in_bounds,
        approach_signs,
        trending_to_one,
        passed: ratios_in_bounds && approach_signs && trending_to_one,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub theta0: f64,
    pub xi0_de_gennes: f64,
    pub tau_star: f64,
    pub mu_neumann_at_tau_star: f64,
    pub xi0: f64,
    pub gaussian_upper_bound: f64,
    /// `Ξ₀ − Θ₀`
    pub margin_total: f64,
    /// `ζ₁(τ*) − μ₁ᴺ(τ*)`
    pub margin_strict: f64,
    /// `√(4−π) − Ξ₀`
    pub margin_upper: f64,
    pub combined_error: f64,
    pub chain_holds: bool,
}

/// Compares the ground energies: `Θ₀ ≤ μ₁ᴺ(τ*) < ζ₁(τ*) = Ξ₀ < √(4−π)`.
pub fn compare_lowest(tau_star: f64, opts: &SolverOptions) -> Result<ComparisonReport> {
    let theta = find_minimum(Family::DeGennesNeumann, 1, DEFAULT_NEUMANN_BRACKET, DEFAULT_MIN_TOL, opts)?;
    let mu = band_value(&OperatorSpec::new(Family::DeGennesNeumann, tau_star), 1, opts)?;
    let xi = band_value(&OperatorSpec::axisym(tau_star), 1, opts)?;
    let upper = gaussian_bound_minimum();
    let combined_error = theta.error_estimate + mu.error_estimate + xi.error_estimate;
    let chain_holds = theta.value <= mu.value + combined_error && mu.value < xi.value && xi.value < upper;
    Ok(ComparisonReport {
        theta0: theta.value,
        xi0_de_gennes: theta.tau_star,
        tau_star,
        mu_neumann_at_tau_star: mu.value,
        xi0: xi.value,
        gaussian_upper_bound: upper,
        margin_total: xi.value - theta.value,
        margin_strict: xi.value - mu.value,
        margin_upper: upper - xi.value,
        combined_error,
        chain_holds,
    })
}

/// `⟨∂τ z, z⟩` in `L²(r dr)`, with `∂τ z` from a central difference of
/// sign-matched ground states on one mesh.
pub fn derivative_orthogonality(tau: f64, delta: f64, opts: &SolverOptions) -> Result<f64> {
    let [minus, center, plus] = modes_around(&OperatorSpec::axisym(tau), 1, delta, opts)?;
    let dz: Vec<f64> = plus
        .pair
        .vector
        .iter()
        .zip(&minus.pair.vector)
        .map(|(p, m)| (p - m) / (2.0 * delta))
        .collect();
    Ok(center.pencil.masses.dot(&dz, &center.pair.vector))
}
