//! Band functions with two-mesh error control, their τ-derivatives and scans.
//!
//! Three independent routes to `λ'(τ)` are provided:
//!
//! - [`fh_derivative`]: expectation of `∂τ V = −2(r − τ)` in the weighted
//!   product, `ζₙ'(τ) = −2 ∫ (r − τ) |z|² r dr`;
//! - [`trace_derivative`]: `⟨(h₀ᴺ(τ) − ζₙ(τ)) z, z⟩` in the *unweighted*
//!   half-line product, evaluated through its quadratic form;
//! - [`fd_derivative`]: central differences of extrapolated eigenvalues.
//!
//! For the Neumann de Gennes family [`dh_derivative_neumann`] evaluates the
//! boundary formula `(τ² − μ) u(0)²`.
//!
//! The Feynman–Hellmann integral is sometimes quoted with `(r − τ)²` in the
//! integrand; that form is not quadratic in the eigenfunction and is not
//! the derivative of the eigenvalue. The linear moment is used here.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{pencil_eigenpairs, reduce_to_standard, lowest_eigenvalues, EigenPair, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::operators::{assemble, build_mesh, Family, Mesh, MeshOptions, OperatorSpec, Pencil, DEFAULT_N_CELLS, DEFAULT_PAD};

pub const MAX_LEVEL: usize = 6;
pub const DEFAULT_FD_DELTA: f64 = 1e-4;

/// Resolution and tolerance shared by every band-function evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Cells of the coarse mesh; the fine mesh has twice as many.
    pub n_cells: usize,
    pub pad: f64,
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_cells: DEFAULT_N_CELLS,
            pad: DEFAULT_PAD,
            tol: DEFAULT_TOL,
        }
    }
}

impl SolverOptions {
    pub fn mesh_options(&self) -> MeshOptions {
        MeshOptions {
            n_cells: self.n_cells,
            pad: self.pad,
            left: None,
            right: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub tau: f64,
    pub level: usize,
    /// Richardson extrapolate `(4 λ_{h/2} − λ_h) / 3`.
    pub value: f64,
    /// `|λ_{h/2} − λ_h| / 3`.
    pub error_estimate: f64,
    /// Spacing of the coarse mesh.
    pub mesh_h: f64,
}

/// An eigenpair together with the pencil it was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub pencil: Pencil,
    pub pair: EigenPair,
}

impl Mode {
    pub fn nodes(&self) -> &[f64] {
        self.pencil.nodes()
    }

    pub fn masses(&self) -> &[f64] {
        &self.pencil.masses.masses
    }

    /// Sum over all cell edges of `w(x_{i+1/2}) (Δz)² / h`, with `w ≡ 1`
    /// (`weighted == false`) or `w(r) = r`. Eliminated nodes carry `z = 0`.
    fn edge_energy(&self, weighted: bool) -> f64 {
        let mesh = &self.pencil.mesh;
        let first = self.pencil.first_node;
        let z = &self.pair.vector;
        let value_at = |i: usize| -> f64 {
            if i < first || i - first >= z.len() {
                0.0
            } else {
                z[i - first]
            }
        };
        (0..mesh.n_cells)
            .map(|i| {
                let w = if weighted {
                    0.5 * (mesh.nodes[i] + mesh.nodes[i + 1])
                } else {
                    1.0
                };
                w * (value_at(i + 1) - value_at(i)).powi(2) / mesh.h
            })
            .sum()
    }

    /// `∫ r |z'|² dr` on the discrete level.
    pub fn weighted_kinetic(&self) -> f64 {
        self.edge_energy(true)
    }

    /// `∫ |z'|² dr` on the discrete level.
    pub fn unweighted_kinetic(&self) -> f64 {
        self.edge_energy(false)
    }

    /// Mass-weighted sum `Σ mᵢ f(xᵢ) zᵢ²`.
    pub fn weighted_moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes()
            .iter()
            .zip(self.masses())
            .zip(&self.pair.vector)
            .map(|((&x, m), z)| m * f(x) * z * z)
            .sum()
    }

    /// Trapezoid sum `∫₀^∞ f(x) z² dx` over the half-line.
    pub fn unweighted_moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        let h = self.pencil.mesh.h;
        self.nodes()
            .iter()
            .zip(&self.pair.vector)
            .map(|(&x, z)| {
                let w = if x == 0.0 { h / 2.0 } else { h };
                w * f(x) * z * z
            })
            .sum()
    }
}

fn check_level(n: usize) -> Result<()> {
    if n == 0 || n > MAX_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "level {n} outside the supported range 1..={MAX_LEVEL}"
        )));
    }
    Ok(())
}

fn eigenvalues_on(spec: &OperatorSpec, mesh: &Mesh, k: usize, tol: f64) -> Result<Vec<f64>> {
    let pencil = assemble(spec, mesh)?;
    lowest_eigenvalues(&reduce_to_standard(&pencil)?, k, tol)
}

fn richardson(spec: &OperatorSpec, coarse: &Mesh, k: usize, tol: f64) -> Result<Vec<BandPoint>> {
    let fine = coarse.refined();
    let lc = eigenvalues_on(spec, coarse, k, tol)?;
    let lf = eigenvalues_on(spec, &fine, k, tol)?;
    Ok(lc
        .iter()
        .zip(&lf)
        .enumerate()
        .map(|(i, (c, f))| BandPoint {
            tau: spec.tau,
            level: i + 1,
            value: (4.0 * f - c) / 3.0,
            error_estimate: (f - c).abs() / 3.0,
            mesh_h: coarse.h,
        })
        .collect())
}

/// Band points for levels `1..=max_level` at one τ.
pub fn band_points(spec: &OperatorSpec, max_level: usize, opts: &SolverOptions) -> Result<Vec<BandPoint>> {
    check_level(max_level)?;
    let mesh = build_mesh(spec, &opts.mesh_options())?;
    richardson(spec, &mesh, max_level, opts.tol)
}

pub fn band_value(spec: &OperatorSpec, n: usize, opts: &SolverOptions) -> Result<BandPoint> {
    Ok(band_points(spec, n, opts)?[n - 1])
}

/// Fine-mesh mode of level `n`.
pub fn mode(spec: &OperatorSpec, n: usize, opts: &SolverOptions) -> Result<Mode> {
    check_level(n)?;
    let mesh = build_mesh(spec, &opts.mesh_options())?.refined();
    mode_on(spec, &mesh, n, opts.tol)
}

fn mode_on(spec: &OperatorSpec, mesh: &Mesh, n: usize, tol: f64) -> Result<Mode> {
    let pencil = assemble(spec, mesh)?;
    let pair = pencil_eigenpairs(&pencil, n, tol)?.swap_remove(n - 1);
    Ok(Mode { pencil, pair })
}

pub fn eigenpair(spec: &OperatorSpec, n: usize, opts: &SolverOptions) -> Result<EigenPair> {
    Ok(mode(spec, n, opts)?.pair)
}

/// `−2 ∫ (|x| − τ) |z|² dμ` for a computed mode.
fn fh_from_mode(mode: &Mode) -> f64 {
    let tau = mode.pencil.spec.tau;
    -2.0 * mode.weighted_moment(|x| x.abs() - tau)
}

/// Feynman–Hellmann derivative `−2 ∫ (r − τ) |z|² dμ` on the fine mesh.
pub fn fh_derivative(spec: &OperatorSpec, n: usize, opts: &SolverOptions) -> Result<f64> {
    Ok(fh_from_mode(&mode(spec, n, opts)?))
}

/// `⟨(h₀ᴺ(τ) − ζₙ(τ)) z, z⟩_{L²(ℝ₊)}` with `z` normalized in `L²(r dr)`.
pub fn trace_derivative(spec: &OperatorSpec, n: usize, opts: &SolverOptions) -> Result<f64> {
    if spec.family != (Family::AxiSym { m: 0 }) {
        return Err(Error::InvalidArgument(format!(
            "trace formula applies to axisym(m=0), not {}",
            spec.family
        )));
    }
    let mode = mode(spec, n, opts)?;
    let tau = spec.tau;
    let zeta = mode.pair.value;
    Ok(mode.unweighted_kinetic() + mode.unweighted_moment(|r| (r - tau).powi(2) - zeta))
}

/// `(μₙᴺ)'(τ) = (τ² − μₙᴺ(τ)) u(0)²` with `u` normalized in `L²(ℝ₊)`.
pub fn dh_derivative_neumann(tau: f64, n: usize, opts: &SolverOptions) -> Result<f64> {
    let spec = OperatorSpec::new(Family::DeGennesNeumann, tau);
    let mode = mode(&spec, n, opts)?;
    let boundary = mode.pair.vector[0];
    Ok((tau * tau - mode.pair.value) * boundary * boundary)
}

/// Derivative used as a certificate: boundary formula for the Neumann
/// family, Feynman–Hellmann otherwise.
pub fn band_derivative(spec: &OperatorSpec, n: usize, opts: &SolverOptions) -> Result<f64> {
    match spec.family {
        Family::DeGennesNeumann => dh_derivative_neumann(spec.tau, n, opts),
        _ => fh_derivative(spec, n, opts),
    }
}

pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, delta: f64) -> f64 {
    (f(x + delta) - f(x - delta)) / (2.0 * delta)
}

pub fn central_second_difference(f: impl Fn(f64) -> f64, x: f64, delta: f64) -> f64 {
    (f(x + delta) - 2.0 * f(x) + f(x - delta)) / (delta * delta)
}

/// Central difference of extrapolated eigenvalues; both sides use the
/// meshes built for the central τ.
pub fn fd_derivative(spec: &OperatorSpec, n: usize, delta: f64, opts: &SolverOptions) -> Result<f64> {
    check_level(n)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("step {delta} must be positive")));
    }
    let mesh = build_mesh(spec, &opts.mesh_options())?;
    let at = |tau: f64| -> Result<f64> {
        Ok(richardson(&spec.with_tau(tau), &mesh, n, opts.tol)?[n - 1].value)
    };
    Ok((at(spec.tau + delta)? - at(spec.tau - delta)?) / (2.0 * delta))
}

/// Matched-mesh fine modes at `τ − δ`, `τ`, `τ + δ`.
pub fn modes_around(spec: &OperatorSpec, n: usize, delta: f64, opts: &SolverOptions) -> Result<[Mode; 3]> {
    check_level(n)?;
    let mesh = build_mesh(spec, &opts.mesh_options())?.refined();
    let center = mode_on(spec, &mesh, n, opts.tol)?;
    let side = |tau: f64| -> Result<Mode> {
        let mut m = mode_on(&spec.with_tau(tau), &mesh, n, opts.tol)?;
        if m.pencil.masses.dot(&m.pair.vector, &center.pair.vector) < 0.0 {
            m.pair.vector.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(m)
    };
    let minus = side(spec.tau - delta)?;
    let plus = side(spec.tau + delta)?;
    Ok([minus, center, plus])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub family: Family,
    pub levels: Vec<usize>,
    pub tau_grid: Vec<f64>,
    /// `values[l][j]`: level `levels[l]` at `tau_grid[j]`.
    pub values: Vec<Vec<f64>>,
    pub error_estimates: Vec<Vec<f64>>,
    pub derivatives: Option<Vec<Vec<f64>>>,
}

impl ScanResult {
    pub fn row(&self, level: usize) -> Option<&[f64]> {
        self.levels
            .iter()
            .position(|&l| l == level)
            .map(|i| self.values[i].as_slice())
    }
}

struct ScanColumn {
    points: Vec<BandPoint>,
    derivatives: Option<Vec<f64>>,
}

fn scan_column(spec: &OperatorSpec, levels: &[usize], with_derivatives: bool, opts: &SolverOptions) -> Result<ScanColumn> {
    let max_level = *levels.iter().max().expect("levels checked non-empty");
    let all = band_points(spec, max_level, opts)?;
    let points = levels.iter().map(|&l| all[l - 1]).collect();
    let derivatives = if with_derivatives {
        let fine = build_mesh(spec, &opts.mesh_options())?.refined();
        let pencil = assemble(spec, &fine)?;
        let pairs = pencil_eigenpairs(&pencil, max_level, opts.tol)?;
        let values = levels
            .iter()
            .map(|&l| {
                fh_from_mode(&Mode {
                    pencil: pencil.clone(),
                    pair: pairs[l - 1].clone(),
                })
            })
            .collect();
        Some(values)
    } else {
        None
    };
    Ok(ScanColumn { points, derivatives })
}

/// Band values of several levels on a τ-grid. Grid points are evaluated in
/// parallel on the current rayon pool; output order follows the grid.
pub fn scan(
    family: Family,
    levels: &[usize],
    tau_grid: &[f64],
    with_derivatives: bool,
    opts: &SolverOptions,
) -> Result<ScanResult> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no levels requested".into()));
    }
    for &l in levels {
        check_level(l)?;
    }
    if tau_grid.is_empty() || tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("tau grid must be non-empty and strictly increasing".into()));
    }
    let columns: Vec<ScanColumn> = tau_grid
        .par_iter()
        .map(|&tau| {
            scan_column(&OperatorSpec::new(family, tau), levels, with_derivatives, opts)
                .map_err(|e| Error::AtTau { tau, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let per_level = |f: &dyn Fn(&ScanColumn, usize) -> f64| -> Vec<Vec<f64>> {
        (0..levels.len())
            .map(|l| columns.iter().map(|c| f(c, l)).collect())
            .collect()
    };
    let values = per_level(&|c, l| c.points[l].value);
    let error_estimates = per_level(&|c, l| c.points[l].error_estimate);
    let derivatives = with_derivatives.then(|| per_level(&|c, l| c.derivatives.as_ref().unwrap()[l]));
    Ok(ScanResult {
        family,
        levels: levels.to_vec(),
        tau_grid: tau_grid.to_vec(),
        values,
        error_estimates,
        derivatives,
    })
}

/// `start, start + step, …` up to `stop` inclusive (within a tenth of a step).
pub fn tau_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "invalid grid start={start} stop={stop} step={step}"
        )));
    }
    let count = ((stop - start) / step + 0.1).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn laguerre_values() {
        let pts = band_points(&OperatorSpec::axisym(0.0), 2, &opts()).unwrap();
        assert_abs_diff_eq!(pts[0].value, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(pts[1].value, 6.0, epsilon = 1e-6);
        assert!(pts[0].error_estimate > 0.0 && pts[0].error_estimate < 1e-3);
        assert_eq!(pts[1].level, 2);
    }

    #[test]
    fn lower_bound_on_left_branch() {
        let p = band_value(&OperatorSpec::axisym(-1.0), 1, &opts()).unwrap();
        assert!(p.value >= 1.0 - p.error_estimate);
    }

    #[test]
    fn neumann_near_xi0() {
        let p = band_value(&OperatorSpec::new(Family::DeGennesNeumann, 0.7682), 1, &opts()).unwrap();
        assert_abs_diff_eq!(p.value, 0.5901, epsilon = 1e-4);
    }

    #[test]
    fn level_range_is_enforced() {
        let spec = OperatorSpec::axisym(0.0);
        assert!(band_value(&spec, 0, &opts()).is_err());
        assert!(band_value(&spec, 7, &opts()).is_err());
    }

    #[test]
    fn eigenpair_profiles() {
        let pair = eigenpair(&OperatorSpec::axisym(0.0), 1, &opts()).unwrap();
        let m = mode(&OperatorSpec::axisym(0.0), 1, &opts()).unwrap();
        let exact: Vec<f64> = m.nodes().iter().map(|r| (-r * r / 2.0).exp()).collect();
        let exact = crate::eigensolve::weighted_normalize(&exact, &m.pencil.masses).unwrap();
        let sup = pair.vector.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(sup < 1e-6, "sup error {sup}");

        let second = mode(&OperatorSpec::axisym(0.0), 2, &opts()).unwrap();
        assert!(m.pencil.masses.dot(&pair.vector, &second.pair.vector).abs() < 1e-8);

        let d = mode(&OperatorSpec::new(Family::DeGennesDirichlet, 0.0), 1, &opts()).unwrap();
        let exact: Vec<f64> = d.nodes().iter().map(|x| x * (-x * x / 2.0).exp()).collect();
        let exact = crate::eigensolve::weighted_normalize(&exact, &d.pencil.masses).unwrap();
        let sup = d.pair.vector.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(sup < 1e-6, "sup error {sup}");
    }

    #[test]
    fn fh_is_negative_on_left_branch() {
        for tau in [-2.0, -1.0, -0.3] {
            assert!(fh_derivative(&OperatorSpec::axisym(tau), 1, &opts()).unwrap() < 0.0);
        }
    }

    #[test]
    fn derivative_routes_agree() {
        for tau in [0.5, 1.0, 2.5] {
            let spec = OperatorSpec::axisym(tau);
            let fh = fh_derivative(&spec, 1, &opts()).unwrap();
            let tr = trace_derivative(&spec, 1, &opts()).unwrap();
            let fd = fd_derivative(&spec, 1, DEFAULT_FD_DELTA, &opts()).unwrap();
            assert!((fh - tr).abs() < 1e-3, "tau {tau}: fh {fh} trace {tr}");
            assert!((fh - fd).abs() < 1e-4, "tau {tau}: fh {fh} fd {fd}");
        }
        let at = |tau| trace_derivative(&OperatorSpec::axisym(tau), 1, &opts()).unwrap();
        assert!(at(0.5) < 0.0);
        assert!(at(3.0) > 0.0);
        assert!(trace_derivative(&OperatorSpec::new(Family::AxiSym { m: 1 }, 1.0), 1, &opts()).is_err());
    }

    #[test]
    fn fd_at_laguerre_point_matches_fh() {
        let spec = OperatorSpec::axisym(0.0);
        let fh = fh_derivative(&spec, 1, &opts()).unwrap();
        let fd = fd_derivative(&spec, 1, DEFAULT_FD_DELTA, &opts()).unwrap();
        // −2∫ r e^{−r²} r dr / ∫ e^{−r²} r dr = −√π
        assert_abs_diff_eq!(fd, -std::f64::consts::PI.sqrt(), epsilon = 1e-4);
        assert_abs_diff_eq!(fh, fd, epsilon = 1e-4);
    }

    #[test]
    fn neumann_boundary_formula() {
        assert!(dh_derivative_neumann(0.0, 1, &opts()).unwrap() < 0.0);
        let dh = dh_derivative_neumann(1.5, 1, &opts()).unwrap();
        let fd = fd_derivative(&OperatorSpec::new(Family::DeGennesNeumann, 1.5), 1, DEFAULT_FD_DELTA, &opts()).unwrap();
        assert!((dh - fd).abs() < 1e-4, "dh {dh} fd {fd}");
    }

    #[test]
    fn central_differences_on_polynomials() {
        let quad = |x: f64| 3.0 * x * x - 2.0 * x + 1.0;
        assert_abs_diff_eq!(central_difference(quad, 0.7, 0.1), 6.0 * 0.7 - 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(central_second_difference(quad, 0.7, 0.1), 6.0, epsilon = 1e-10);

        let cubic = |x: f64| x.powi(3);
        let exact = 3.0 * 0.5f64.powi(2);
        let e1 = (central_difference(cubic, 0.5, 0.1) - exact).abs();
        let e2 = (central_difference(cubic, 0.5, 0.05) - exact).abs();
        assert_abs_diff_eq!(e1 / e2, 4.0, epsilon = 1e-6);
    }

    #[test]
    fn shifted_parabola_fd_is_exact() {
        // For the discrete pencil, λ(τ) of a fixed test vector's Rayleigh
        // quotient is a quadratic in τ; central differences recover it.
        let spec = OperatorSpec::new(Family::DeGennesNeumann, 0.4);
        let mesh = build_mesh(&spec, &MeshOptions::default().with_n_cells(400)).unwrap();
        let q = |tau: f64| {
            let p = assemble(&spec.with_tau(tau), &mesh).unwrap();
            let v: Vec<f64> = p.nodes().iter().map(|x| (-x * x).exp()).collect();
            p.rayleigh_quotient(&v)
        };
        let p = assemble(&spec, &mesh).unwrap();
        let v: Vec<f64> = p.nodes().iter().map(|x| (-x * x).exp()).collect();
        let exact = -2.0 * p.masses.dot(&v.iter().zip(p.nodes()).map(|(v, x)| v * (x - 0.4)).collect::<Vec<_>>(), &v)
            / p.masses.dot(&v, &v);
        assert_abs_diff_eq!(central_difference(q, 0.4, 1e-2), exact, epsilon = 1e-10);
    }

    #[test]
    fn scan_shape_and_order() {
        let grid = tau_grid(0.0, 0.5, 0.25).unwrap();
        assert_eq!(grid, vec![0.0, 0.25, 0.5]);
        let s = scan(Family::AxiSym { m: 0 }, &[1, 2], &grid, true, &SolverOptions { n_cells: 1200, ..opts() }).unwrap();
        assert_eq!(s.values.len(), 2);
        assert_eq!(s.values[0].len(), 3);
        assert!(s.row(1).unwrap().windows(2).all(|w| w[1] < w[0]));
        assert!(s.derivatives.as_ref().unwrap()[0].iter().all(|&d| d < 0.0));
        assert!(scan(Family::AxiSym { m: 0 }, &[1], &[0.5, 0.2], false, &opts()).is_err());
    }

    #[test]
    fn scan_reports_failing_tau() {
        let bad = SolverOptions { pad: -1.0, ..opts() };
        let err = scan(Family::DeGennesNeumann, &[1], &[0.3], false, &bad).unwrap_err();
        assert!(matches!(err, Error::AtTau { tau, .. } if tau == 0.3));
    }
}
