//! CSV/JSON emission and the provenance block.

use serde::Serialize;
use std::fmt::Write as _;

use bandfn::bandfuncs::{ScanResult, SolverOptions};

pub const SIGNIFICANT_DIGITS: usize = 12;
pub const CSV_HEADER: &str = "tau,level,value,err_est,deriv_fh";

/// Plain decimal with `digits` significant digits, no exponent.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = |e: i32| (digits as i32 - 1 - e).max(0) as usize;
    let s = format!("{:.*}", decimals(exponent), x);
    // rounding may carry into a new leading digit (9.99… → 10.0…)
    let rounded: f64 = s.parse().unwrap();
    if rounded.abs() >= 10f64.powi(exponent + 1) {
        format!("{:.*}", decimals(exponent + 1), x)
    } else {
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub git_describe: &'static str,
    pub mesh: MeshInfo,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshInfo {
    pub n_cells: usize,
    pub refined_n_cells: usize,
    pub pad: f64,
    pub extrapolation: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimizer: Option<f64>,
}

impl Provenance {
    pub fn new(opts: &SolverOptions, minimizer: Option<f64>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            git_describe: env!("BANDFN_GIT_DESCRIBE"),
            mesh: MeshInfo {
                n_cells: opts.n_cells,
                refined_n_cells: 2 * opts.n_cells,
                pad: opts.pad,
                extrapolation: "richardson (4 fine - coarse) / 3",
            },
            tolerances: Tolerances {
                eigenvalue: opts.tol,
                minimizer,
            },
        }
    }
}

/// Extra columns appended to every scan row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Constants {
    pub theta0: f64,
    pub sqrt_4_minus_pi: f64,
}

pub fn scan_csv(scan: &ScanResult, constants: Option<Constants>) -> String {
    let f = |x: f64| format_significant(x, SIGNIFICANT_DIGITS);
    let mut out = String::from(CSV_HEADER);
    if constants.is_some() {
        out.push_str(",theta0,sqrt_4_minus_pi");
    }
    out.push('\n');
    for (j, &tau) in scan.tau_grid.iter().enumerate() {
        for (l, &level) in scan.levels.iter().enumerate() {
            let deriv = scan.derivatives.as_ref().map(|d| f(d[l][j])).unwrap_or_default();
            write!(out, "{},{level},{},{},{deriv}", f(tau), f(scan.values[l][j]), f(scan.error_estimates[l][j])).unwrap();
            if let Some(c) = constants {
                write!(out, ",{},{}", f(c.theta0), f(c.sqrt_4_minus_pi)).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct ScanRow {
    pub tau: f64,
    pub level: usize,
    pub value: f64,
    pub err_est: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deriv_fh: Option<f64>,
}

pub fn scan_rows(scan: &ScanResult) -> Vec<ScanRow> {
    let mut rows = Vec::with_capacity(scan.tau_grid.len() * scan.levels.len());
    for (j, &tau) in scan.tau_grid.iter().enumerate() {
        for (l, &level) in scan.levels.iter().enumerate() {
            rows.push(ScanRow {
                tau,
                level,
                value: scan.values[l][j],
                err_est: scan.error_estimates[l][j],
                deriv_fh: scan.derivatives.as_ref().map(|d| d[l][j]),
            });
        }
    }
    rows
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
