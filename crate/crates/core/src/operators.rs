//! Truncated meshes and finite-volume assembly of the operator families.
//!
//! Every family is discretized on a uniform grid as a pencil `(K, M)` where
//! `K` is symmetric tridiagonal and `M` is a diagonal mass. The Rayleigh
//! quotient `vᵀKv / vᵀMv` is the cell-wise discretization of
//!
//! ```text
//! q(u) = ∫ (|u'|² + V |u|²) dμ,    dμ = r dr (axisymmetric) or dx (de Gennes)
//! ```
//!
//! with flux weights taken at cell midpoints and masses equal to the exact
//! measure of each node's cell.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Operator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// `-∂²ᵣ - r⁻¹∂ᵣ + m²/r² + (r-τ)²` on `L²(r dr)` over the half-line.
    AxiSym { m: i32 },
    /// `-∂²ₓ + (|x|-τ)²` on the whole line.
    DeGennesLine,
    /// `-∂²ₓ + (x-τ)²` on the half-line, `u'(0) = 0`.
    DeGennesNeumann,
    /// `-∂²ₓ + (x-τ)²` on the half-line, `u(0) = 0`.
    DeGennesDirichlet,
}

impl Family {
    pub fn is_half_line(self) -> bool {
        !matches!(self, Family::DeGennesLine)
    }

    /// Whether the node at the left end of the mesh is an unknown.
    fn keeps_left_node(self) -> bool {
        matches!(
            self,
            Family::AxiSym { m: 0 } | Family::DeGennesNeumann
        )
    }

    pub fn angular_momentum(self) -> i32 {
        match self {
            Family::AxiSym { m } => m,
            _ => 0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::AxiSym { m } => write!(f, "axisym(m={m})"),
            Family::DeGennesLine => f.write_str("degennes-line"),
            Family::DeGennesNeumann => f.write_str("degennes-neumann"),
            Family::DeGennesDirichlet => f.write_str("degennes-dirichlet"),
        }
    }
}

/// A member of an operator family at Fourier parameter `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub family: Family,
    pub tau: f64,
}

impl OperatorSpec {
    pub fn new(family: Family, tau: f64) -> Self {
        Self { family, tau }
    }

    pub fn axisym(tau: f64) -> Self {
        Self::new(Family::AxiSym { m: 0 }, tau)
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }
}

/// Potential of the family at position `x`.
pub fn potential(spec: &OperatorSpec, x: f64) -> Result<f64> {
    let tau = spec.tau;
    match spec.family {
        Family::AxiSym { m: 0 } => Ok((x - tau).powi(2)),
        Family::AxiSym { m } => {
            if x <= 0.0 {
                return Err(Error::Domain {
                    family: spec.family.to_string(),
                    x,
                });
            }
            let m = f64::from(m);
            Ok((x - tau).powi(2) + m * m / (x * x))
        }
        Family::DeGennesNeumann | Family::DeGennesDirichlet => Ok((x - tau).powi(2)),
        Family::DeGennesLine => Ok((x.abs() - tau).powi(2)),
    }
}

pub const DEFAULT_N_CELLS: usize = 4800;
pub const DEFAULT_PAD: f64 = 12.0;
pub const MIN_N_CELLS: usize = 16;
/// Minimal distance between the well bottom and the truncation boundary.
pub const WELL_CONTAINMENT: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    pub n_cells: usize,
    pub pad: f64,
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            n_cells: DEFAULT_N_CELLS,
            pad: DEFAULT_PAD,
            left: None,
            right: None,
        }
    }
}

impl MeshOptions {
    pub fn with_n_cells(self, n_cells: usize) -> Self {
        Self { n_cells, ..self }
    }
}

/// Uniform grid `left + i·h`, `i = 0..=n_cells`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub left: f64,
    pub right: f64,
    pub n_cells: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl Mesh {
    pub fn uniform(left: f64, right: f64, n_cells: usize) -> Result<Self> {
        if n_cells < MIN_N_CELLS {
            return Err(Error::InvalidMesh(format!(
                "n_cells = {n_cells} is below the minimum {MIN_N_CELLS}"
            )));
        }
        if !(left.is_finite() && right.is_finite() && right > left) {
            return Err(Error::InvalidMesh(format!(
                "interval [{left}, {right}] is empty or not finite"
            )));
        }
        let h = (right - left) / n_cells as f64;
        let nodes = (0..=n_cells).map(|i| left + i as f64 * h).collect();
        Ok(Self {
            left,
            right,
            n_cells,
            h,
            nodes,
        })
    }

    /// Same interval with twice as many cells.
    pub fn refined(&self) -> Self {
        Self::uniform(self.left, self.right, 2 * self.n_cells)
            .expect("refining a valid mesh yields a valid mesh")
    }
}

pub fn build_mesh(spec: &OperatorSpec, opts: &MeshOptions) -> Result<Mesh> {
    if !(opts.pad.is_finite() && opts.pad > 0.0) {
        return Err(Error::InvalidMesh(format!("pad = {} must be positive", opts.pad)));
    }
    let reach = spec.tau.max(0.0) + opts.pad;
    let default_left = if spec.family.is_half_line() { 0.0 } else { -reach };
    let left = opts.left.unwrap_or(default_left);
    let right = opts.right.unwrap_or(reach);
    if spec.family.is_half_line() && left != 0.0 {
        return Err(Error::InvalidMesh(format!(
            "half-line family {} needs left = 0, got {left}",
            spec.family
        )));
    }
    if spec.tau > 0.0 && right < spec.tau + WELL_CONTAINMENT {
        return Err(Error::InvalidMesh(format!(
            "right = {right} does not contain the well at tau = {} (need >= tau + {WELL_CONTAINMENT})",
            spec.tau
        )));
    }
    if spec.family == Family::DeGennesLine && spec.tau > 0.0 && left > -spec.tau - WELL_CONTAINMENT {
        return Err(Error::InvalidMesh(format!(
            "left = {left} does not contain the well at -tau = {}",
            -spec.tau
        )));
    }
    Mesh::uniform(left, right, opts.n_cells)
}

/// Diagonal mass of the retained nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub masses: Vec<f64>,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        self.masses
            .iter()
            .zip(u.iter().zip(v))
            .map(|(m, (a, b))| m * a * b)
            .sum()
    }
}

/// Discretized quadratic form: symmetric tridiagonal stiffness plus diagonal mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pencil {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    pub masses: WeightVector,
    pub spec: OperatorSpec,
    pub mesh: Mesh,
    /// Mesh index of the first retained node.
    pub first_node: usize,
}

impl Pencil {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Coordinates of the retained nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.mesh.nodes[self.first_node..self.first_node + self.dim()]
    }

    pub fn stiffness_form(&self, v: &[f64]) -> f64 {
        let diagonal: f64 = self.diag.iter().zip(v).map(|(d, x)| d * x * x).sum();
        let coupling: f64 = self.offdiag.iter().zip(v.windows(2)).map(|(e, w)| 2.0 * e * w[0] * w[1]).sum();
        diagonal + coupling
    }

    pub fn rayleigh_quotient(&self, v: &[f64]) -> f64 {
        self.stiffness_form(v) / self.masses.dot(v, v)
    }

    /// `K v`.
    pub fn apply_stiffness(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * v[i];
                if i > 0 {
                    y += self.offdiag[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    y += self.offdiag[i] * v[i + 1];
                }
                y
            })
            .collect()
    }
}

/// Density of the measure (and of the flux weight) at `x`.
fn measure_density(family: Family, x: f64) -> f64 {
    match family {
        Family::AxiSym { .. } => x,
        _ => 1.0,
    }
}

/// Measure of the cell `[x - h/2, x + h/2] ∩ [left, right]` around node `i`.
fn cell_mass(family: Family, mesh: &Mesh, i: usize) -> f64 {
    let h = mesh.h;
    let x = mesh.nodes[i];
    let boundary = i == 0 || i == mesh.n_cells;
    match family {
        Family::AxiSym { .. } if i == 0 => h * h / 8.0,
        Family::AxiSym { .. } => x * h,
        _ if boundary => h / 2.0,
        _ => h,
    }
}

pub fn assemble(spec: &OperatorSpec, mesh: &Mesh) -> Result<Pencil> {
    let family = spec.family;
    if family.is_half_line() && mesh.left != 0.0 {
        return Err(Error::MeshMismatch(format!(
            "{family} lives on the half-line but the mesh starts at {}",
            mesh.left
        )));
    }
    if family == Family::DeGennesLine && mesh.left >= 0.0 {
        return Err(Error::MeshMismatch(format!(
            "{family} lives on the whole line but the mesh starts at {}",
            mesh.left
        )));
    }
    let first = if family.keeps_left_node() { 0 } else { 1 };
    // The right truncation node is always eliminated.
    let last = mesh.n_cells - 1;
    let dim = last - first + 1;
    let h = mesh.h;

    let mut diag = vec![0.0; dim];
    let mut offdiag = vec![0.0; dim - 1];
    let mut masses = Vec::with_capacity(dim);

    for i in first..=last {
        let mass = cell_mass(family, mesh, i);
        masses.push(mass);
        diag[i - first] = potential(spec, mesh.nodes[i])? * mass;
    }
    for i in 0..mesh.n_cells {
        let mid = 0.5 * (mesh.nodes[i] + mesh.nodes[i + 1]);
        let flux = measure_density(family, mid) / h;
        let left_kept = i >= first && i <= last;
        let right_kept = i + 1 >= first && i < last;
        if left_kept {
            diag[i - first] += flux;
        }
        if right_kept {
            diag[i + 1 - first] += flux;
        }
        if left_kept && right_kept {
            offdiag[i - first] = -flux;
        }
    }

    Ok(Pencil {
        diag,
        offdiag,
        masses: WeightVector { masses },
        spec: *spec,
        mesh: mesh.clone(),
        first_node: first,
    })
}
