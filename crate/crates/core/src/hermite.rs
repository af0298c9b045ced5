//! Hermite-function algebra for the large-τ quasi-mode construction.
//!
//! Levels are 1-based: `Ψ₁(x) = π^{-1/4} e^{-x²/2}` and `H₀Ψₙ = (2n−1)Ψₙ`
//! for `H₀ = −∂² + x²`. The ladder identities
//!
//! ```text
//! x Ψₙ  = √((n−1)/2) Ψₙ₋₁ + √(n/2) Ψₙ₊₁
//! Ψₙ'   = √((n−1)/2) Ψₙ₋₁ − √(n/2) Ψₙ₊₁
//! ```
//!
//! act on finitely supported expansions; with `H₁ = −2∂ₓ x ∂ₓ − x³` and
//! `H₂ = (5/4) x⁴` they give the first corrector and the second-order
//! energy `E₂,ₙ = −1/4` for every level.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Normalized Hermite function `Ψₙ(x)`, `n ≥ 1`.
pub fn psi(n: usize, x: f64) -> f64 {
    assert!(n >= 1, "Hermite levels start at 1");
    psi_polynomial_part(n, x) * (-x * x / 2.0).exp()
}

/// `Ψₙ(x) e^{x²/2}` by the normalized three-term recurrence.
pub(crate) fn psi_polynomial_part(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    for j in 1..n {
        let j = j as f64;
        let next = (2.0 / j).sqrt() * x * cur - ((j - 1.0) / j).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HermiteExpansion {
    /// Level (≥ 1) to coefficient.
    pub coefficients: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LadderKind {
    MultiplyX,
    Differentiate,
}

impl HermiteExpansion {
    pub fn level(n: usize) -> Self {
        assert!(n >= 1, "Hermite levels start at 1");
        Self {
            coefficients: BTreeMap::from([(n, 1.0)]),
        }
    }

    pub fn coefficient(&self, n: usize) -> f64 {
        self.coefficients.get(&n).copied().unwrap_or(0.0)
    }

    fn add_term(&mut self, n: usize, c: f64) {
        if n >= 1 && c != 0.0 {
            *self.coefficients.entry(n).or_insert(0.0) += c;
        }
    }

    pub fn apply(&self, kind: LadderKind) -> Self {
        let sign = match kind {
            LadderKind::MultiplyX => 1.0,
            LadderKind::Differentiate => -1.0,
        };
        let mut out = Self::default();
        for (&n, &c) in &self.coefficients {
            let down = ((n - 1) as f64 / 2.0).sqrt();
            let up = (n as f64 / 2.0).sqrt();
            out.add_term(n - 1, c * down);
            out.add_term(n + 1, sign * c * up);
        }
        out
    }

    pub fn multiply_x(&self) -> Self {
        self.apply(LadderKind::MultiplyX)
    }

    pub fn differentiate(&self) -> Self {
        self.apply(LadderKind::Differentiate)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|(&k, &c)| (k, s * c)).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, &c) in &other.coefficients {
            out.add_term(k, c);
        }
        out
    }

    /// `L²(ℝ)` inner product; the basis is orthonormal.
    pub fn inner(&self, other: &Self) -> f64 {
        self.coefficients
            .iter()
            .map(|(k, c)| c * other.coefficient(*k))
            .sum()
    }

    /// Pointwise evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().map(|(&k, &c)| c * psi(k, x)).sum()
    }
}

/// Two-term expansion of `xΨₙ` or `Ψₙ'`.
pub fn ladder_apply(kind: LadderKind, n: usize) -> HermiteExpansion {
    HermiteExpansion::level(n).apply(kind)
}

/// `H₁ u = −2 (u' + x u'') − x³ u`.
pub fn apply_h1(u: &HermiteExpansion) -> HermiteExpansion {
    let d = u.differentiate();
    let x_dd = d.differentiate().multiply_x();
    let x3 = u.multiply_x().multiply_x().multiply_x();
    d.plus(&x_dd).scaled(-2.0).plus(&x3.scaled(-1.0))
}

/// `H₂ u = (5/4) x⁴ u`.
pub fn apply_h2(u: &HermiteExpansion) -> HermiteExpansion {
    u.multiply_x().multiply_x().multiply_x().multiply_x().scaled(1.25)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorCoefficients {
    pub a_n: f64,
    pub b_n: f64,
    pub c_n: f64,
    pub d_n: f64,
}

impl CorrectorCoefficients {
    pub fn closed_form(n: usize) -> Self {
        let k = 2f64.powf(-1.5);
        let nf = n as f64;
        let falling = if n >= 3 { ((nf - 1.0) * (nf - 2.0) * (nf - 3.0)).sqrt() } else { 0.0 };
        Self {
            a_n: 3.0 * k * falling,
            b_n: k * (nf - 1.0) * (nf - 1.0).sqrt(),
            c_n: k * nf * nf.sqrt(),
            d_n: 3.0 * k * (nf * (nf + 1.0) * (nf + 2.0)).sqrt(),
        }
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        [
            self.a_n - other.a_n,
            self.b_n - other.b_n,
            self.c_n - other.c_n,
            self.d_n - other.d_n,
        ]
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
    }
}

/// `−H₁Ψₙ` expanded on levels `n−3, n−1, n+1, n+3`, and its coefficients.
pub fn h1_expansion(n: usize) -> (HermiteExpansion, CorrectorCoefficients) {
    let minus_h1 = apply_h1(&HermiteExpansion::level(n)).scaled(-1.0);
    let at = |offset: isize| {
        let level = n as isize + offset;
        if level >= 1 { minus_h1.coefficient(level as usize) } else { 0.0 }
    };
    let coefficients = CorrectorCoefficients {
        a_n: at(-3),
        b_n: at(-1),
        c_n: at(1),
        d_n: at(3),
    };
    (minus_h1, coefficients)
}

/// First corrector `u₁,ₙ`, the solution of `(H₀ − (2n−1)) u₁ = −H₁Ψₙ`
/// orthogonal to `Ψₙ`.
pub fn first_corrector(n: usize) -> HermiteExpansion {
    let (minus_h1, _) = h1_expansion(n);
    let mut u1 = HermiteExpansion::default();
    for (&k, &c) in &minus_h1.coefficients {
        let shift = 2.0 * (k as f64 - n as f64);
        if k != n {
            u1.add_term(k, c / shift);
        }
    }
    u1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderEnergy {
    pub level: usize,
    /// `⟨H₂Ψₙ, Ψₙ⟩ = (15/16)(2n² − 2n + 1)`
    pub potential_term: f64,
    /// `⟨H₁u₁,ₙ, Ψₙ⟩ = a²/6 + b²/2 − c²/2 − d²/6`
    pub corrector_term: f64,
    pub total: f64,
}

/// `E₂,ₙ` from the closed-form first addend and the computed coefficients.
pub fn e2(n: usize) -> SecondOrderEnergy {
    let nf = n as f64;
    let potential_term = 15.0 / 16.0 * (2.0 * nf * nf - 2.0 * nf + 1.0);
    let (_, c) = h1_expansion(n);
    let corrector_term = c.a_n.powi(2) / 6.0 + c.b_n.powi(2) / 2.0 - c.c_n.powi(2) / 2.0 - c.d_n.powi(2) / 6.0;
    SecondOrderEnergy {
        level: n,
        potential_term,
        corrector_term,
        total: potential_term + corrector_term,
    }
}

/// First-order energy `⟨H₁Ψₙ, Ψₙ⟩`.
pub fn e1(n: usize) -> f64 {
    apply_h1(&HermiteExpansion::level(n)).coefficient(n)
}

/// `2n − 1 − 1/(4τ²)`.
pub fn quasimode_energy(n: usize, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("quasi-mode energy needs tau > 0, got {tau}")));
    }
    Ok((2 * n - 1) as f64 - 1.0 / (4.0 * tau * tau))
}

/// `V_τ(x) = τ (√(2x + τ) − √τ)²` on `x > −τ/2`.
pub fn scaled_potential(tau: f64, x: f64) -> f64 {
    let s = (2.0 * x + tau).sqrt() + tau.sqrt();
    tau * (2.0 * x).powi(2) / (s * s)
}

/// `x² − x³/τ + 5x⁴/(4τ²)`.
pub fn scaled_potential_model(tau: f64, x: f64) -> f64 {
    x * x - x.powi(3) / tau + 5.0 * x.powi(4) / (4.0 * tau * tau)
}

/// Gauss–Hermite nodes and weights for `∫ f(x) e^{−x²} dx`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const MAX_NEWTON: usize = 100;
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut derivative = 0.0;
        for _ in 0..MAX_NEWTON {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            derivative = (2.0 * nf).sqrt() * p2;
            let step = p1 / derivative;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (derivative * derivative);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Number of Gauss–Hermite nodes used by the quadrature cross-checks.
pub const QUAD_POINTS: usize = 80;

/// Physicists' Hermite polynomial `Hⱼ(x)`.
fn physicists_hermite(j: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..j {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `Ψₙ e^{x²/2}` and `Ψₙ' e^{x²/2}` from `Ψₙ = Nⱼ Hⱼ e^{−x²/2}`, `j = n − 1`,
/// using `Hⱼ' = 2j Hⱼ₋₁`.
fn explicit_parts(n: usize, x: f64) -> (f64, f64) {
    let j = n - 1;
    let factorial: f64 = (1..=j).map(|k| k as f64).product();
    let norm = 1.0 / (2f64.powi(j as i32) * factorial * PI.sqrt()).sqrt();
    let hj = physicists_hermite(j, x);
    let dhj = if j == 0 { 0.0 } else { 2.0 * j as f64 * physicists_hermite(j - 1, x) };
    (norm * hj, norm * (dhj - x * hj))
}

/// `(−H₁Ψₙ) e^{x²/2}`, pointwise, with `Ψ'' = (x² − (2n−1))Ψ`.
fn minus_h1_part(n: usize, x: f64) -> f64 {
    let (p, dp) = explicit_parts(n, x);
    2.0 * dp + 2.0 * x * (x * x - (2 * n - 1) as f64) * p + x.powi(3) * p
}

/// `∫ f g dx` where `f e^{x²/2}` and `g e^{x²/2}` are given.
fn quad(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(QUAD_POINTS);
    x.iter().zip(&w).map(|(&x, w)| w * f(x) * g(x)).sum()
}

/// `⟨−H₁Ψₙ, Ψₖ⟩` by quadrature of the explicit Hermite functions, independent
/// of the ladder algebra.
pub fn quadrature_h1_inner(n: usize, k: usize) -> f64 {
    assert!(n >= 1 && k >= 1, "Hermite levels start at 1");
    quad(|x| minus_h1_part(n, x), |x| explicit_parts(k, x).0)
}

/// Corrector coefficients by quadrature; levels below 1 give 0.
pub fn quadrature_coefficients(n: usize) -> CorrectorCoefficients {
    let at = |offset: isize| {
        let k = n as isize + offset;
        if k >= 1 { quadrature_h1_inner(n, k as usize) } else { 0.0 }
    };
    CorrectorCoefficients {
        a_n: at(-3),
        b_n: at(-1),
        c_n: at(1),
        d_n: at(3),
    }
}

/// `∫ Ψₙ² dx` by quadrature.
pub fn quadrature_norm(n: usize) -> f64 {
    quad(|x| psi_polynomial_part(n, x), |x| psi_polynomial_part(n, x))
}
