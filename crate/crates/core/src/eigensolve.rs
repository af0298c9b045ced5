//! Lowest eigenpairs of symmetric tridiagonal pencils.
//!
//! The pencil `(K, M)` is reduced to the standard matrix `M^{-1/2} K M^{-1/2}`.
//! Eigenvalues are isolated by bisection on Sturm counts, eigenvectors by
//! inverse iteration from a fixed pseudo-random start.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{Pencil, WeightVector};

pub const DEFAULT_TOL: f64 = 1e-12;
const START_SEED: u64 = 0x5EED;
const MAX_INVERSE_ITERATIONS: usize = 50;
const ITERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidArgument(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
                diag.len(),
                offdiag.len()
            )));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            if i > 0 {
                radius += self.offdiag[i - 1].abs();
            }
            if i + 1 < n {
                radius += self.offdiag[i].abs();
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        (lo, hi)
    }

    fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
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

/// Eigenvalue with its eigenvector on the retained nodes of a pencil,
/// normalized in the mass inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub norm_weighted: f64,
}

pub fn reduce_to_standard(p: &Pencil) -> Result<SymTridiag> {
    let m = &p.masses.masses;
    if let Some((index, &mass)) = m.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(Error::NonPositiveMass { index, mass });
    }
    let diag = p.diag.iter().zip(m).map(|(k, m)| k / m).collect();
    let offdiag = p
        .offdiag
        .iter()
        .enumerate()
        .map(|(i, k)| k / (m[i] * m[i + 1]).sqrt())
        .collect();
    SymTridiag::new(diag, offdiag)
}

/// Number of eigenvalues strictly below `lambda`.
pub fn sturm_count(t: &SymTridiag, lambda: f64) -> Result<usize> {
    if lambda.is_nan() {
        return Err(Error::InvalidArgument("Sturm count at NaN".into()));
    }
    let max_e2 = t.offdiag.iter().fold(1.0f64, |acc, e| acc.max(e * e));
    let pivmin = f64::MIN_POSITIVE * max_e2;
    let mut count = 0;
    let mut q = t.diag[0] - lambda;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..t.dim() {
        let e = t.offdiag[i - 1];
        q = t.diag[i] - lambda - e * e / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    Ok(count)
}

/// The `k` smallest eigenvalues in ascending order.
pub fn lowest_eigenvalues(t: &SymTridiag, k: usize, tol: f64) -> Result<Vec<f64>> {
    if k == 0 || k > t.dim() {
        return Err(Error::TooManyEigenvalues {
            requested: k,
            dimension: t.dim(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let (glo, ghi) = t.gershgorin();
    let span = (ghi - glo).max(1.0);
    let mut lo = glo - 1e-3 * span;
    debug_assert_eq!(sturm_count(t, lo)?, 0);

    // Grow an upper bracket until it holds k eigenvalues.
    let mut step = 1.0f64;
    let mut hi = lo + step;
    while sturm_count(t, hi)? < k {
        if hi >= ghi {
            hi = ghi + 1e-3 * span;
            break;
        }
        step *= 2.0;
        hi = (lo + step).min(ghi + 1e-3 * span);
    }
    assert!(sturm_count(t, hi)? >= k, "Gershgorin bound fails to bracket");

    let mut values = Vec::with_capacity(k);
    for i in 0..k {
        // invariant: count(a) <= i < count(b)
        let mut a = lo;
        let mut b = hi;
        loop {
            let mid = 0.5 * (a + b);
            if b - a <= tol * mid.abs().max(1.0) || mid <= a || mid >= b {
                values.push(mid);
                break;
            }
            if sturm_count(t, mid)? <= i {
                a = mid;
            } else {
                b = mid;
            }
        }
        lo = a;
    }
    Ok(values)
}

/// Tridiagonal LU with partial pivoting of `T - shift·I`.
struct ShiftedLu {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper1: Vec<f64>,
    upper2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &SymTridiag, shift: f64) -> Self {
        let n = t.dim();
        let mut lower = t.offdiag.clone();
        let mut upper1 = t.offdiag.clone();
        let mut diag: Vec<f64> = t.diag.iter().map(|d| d - shift).collect();
        let mut upper2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if diag[i].abs() >= lower[i].abs() {
                if diag[i] != 0.0 {
                    let fact = lower[i] / diag[i];
                    lower[i] = fact;
                    diag[i + 1] -= fact * upper1[i];
                }
            } else {
                let fact = diag[i] / lower[i];
                diag[i] = lower[i];
                lower[i] = fact;
                let temp = upper1[i];
                upper1[i] = diag[i + 1];
                diag[i + 1] = temp - fact * diag[i + 1];
                if i + 2 < n {
                    upper2[i] = upper1[i + 1];
                    upper1[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        // zero pivots come from shifts sitting exactly on an eigenvalue
        let tiny = f64::EPSILON * t.norm_bound();
        for d in &mut diag {
            if d.abs() < tiny {
                *d = if *d < 0.0 { -tiny } else { tiny };
            }
        }
        Self {
            lower,
            diag,
            upper1,
            upper2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.lower[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut x = b[i];
            if i + 1 < n {
                x -= self.upper1[i] * b[i + 1];
            }
            if i + 2 < n {
                x -= self.upper2[i] * b[i + 2];
            }
            b[i] = x / self.diag[i];
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic start vector, entry `i` drawn in `[-1, 1)` from the node index.
fn start_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let bits = splitmix64(START_SEED ^ (i as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
            (bits >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

fn normalize_euclidean(v: &mut [f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(())
}

/// Flip the sign so that the entry of largest magnitude is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Unit eigenvector for the eigenvalue approximated by `lambda`.
pub fn eigenvector(t: &SymTridiag, lambda: f64) -> Result<Vec<f64>> {
    let scale = lambda.abs().max(1.0);
    let window = 10.0 * DEFAULT_TOL * scale;
    let inside = sturm_count(t, lambda + window)? - sturm_count(t, lambda - window)?;
    if inside > 1 {
        return Err(Error::Cluster {
            shift: lambda,
            count: inside,
        });
    }

    let lu = ShiftedLu::factor(t, lambda);
    let mut current = start_vector(t.dim());
    normalize_euclidean(&mut current)?;
    let mut change = f64::INFINITY;
    for _ in 0..MAX_INVERSE_ITERATIONS {
        let mut next = current.clone();
        lu.solve(&mut next);
        normalize_euclidean(&mut next)?;
        fix_sign(&mut next);
        change = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        if change < ITERATE_TOL {
            return Ok(current);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_INVERSE_ITERATIONS,
        change,
    })
}

pub fn weighted_normalize(v: &[f64], w: &WeightVector) -> Result<Vec<f64>> {
    let norm2 = w.dot(v, v);
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::ZeroVector);
    }
    let norm = norm2.sqrt();
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Lowest `k` eigenpairs of a pencil; vectors are mass-normalized.
pub fn pencil_eigenpairs(p: &Pencil, k: usize, tol: f64) -> Result<Vec<EigenPair>> {
    let t = reduce_to_standard(p)?;
    let values = lowest_eigenvalues(&t, k, tol)?;
    values
        .into_iter()
        .map(|value| {
            let y = eigenvector(&t, value)?;
            let raw: Vec<f64> = y
                .iter()
                .zip(&p.masses.masses)
                .map(|(y, m)| y / m.sqrt())
                .collect();
            let mut vector = weighted_normalize(&raw, &p.masses)?;
            fix_sign(&mut vector);
            let norm_weighted = p.masses.dot(&vector, &vector).sqrt();
            Ok(EigenPair {
                value,
                vector,
                norm_weighted,
            })
        })
        .collect()
}

/// `‖K v − λ M v‖` in the `M⁻¹` norm.
pub fn residual(p: &Pencil, pair: &EigenPair) -> f64 {
    let kv = p.apply_stiffness(&pair.vector);
    kv.iter()
        .zip(&pair.vector)
        .zip(&p.masses.masses)
        .map(|((kv, v), m)| {
            let r = kv - pair.value * m * v;
            r * r / m
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{assemble, build_mesh, Family, Mesh, MeshOptions, OperatorSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    fn laplacian_eigenvalue(n: usize, k: usize) -> f64 {
        2.0 - 2.0 * (k as f64 * PI / (n as f64 + 1.0)).cos()
    }

    fn pencil_from(diag: Vec<f64>, offdiag: Vec<f64>, masses: Vec<f64>) -> Pencil {
        let n = diag.len();
        Pencil {
            diag,
            offdiag,
            masses: WeightVector { masses },
            spec: OperatorSpec::axisym(0.0),
            mesh: Mesh::uniform(0.0, 1.0, n.max(16)).unwrap(),
            first_node: 0,
        }
    }

    /// Roots of `det(K − λM)` from the three-term determinant recurrence,
    /// located by scanning for sign changes and refined by bisection.
    fn generalized_eigenvalues_dense(p: &Pencil) -> Vec<f64> {
        let det = |lambda: f64| {
            let mut prev = 1.0;
            let mut cur = p.diag[0] - lambda * p.masses.masses[0];
            for i in 1..p.dim() {
                let next = (p.diag[i] - lambda * p.masses.masses[i]) * cur
                    - p.offdiag[i - 1].powi(2) * prev;
                prev = cur;
                cur = next;
            }
            cur
        };
        let (lo, hi) = (-50.0, 50.0);
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut x0 = lo;
        let mut f0 = det(x0);
        for s in 1..=steps {
            let x1 = lo + (hi - lo) * s as f64 / steps as f64;
            let f1 = det(x1);
            if f0 == 0.0 || f0.signum() != f1.signum() {
                let (mut a, mut b) = (x0, x1);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if det(a).signum() == det(mid).signum() {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            x0 = x1;
            f0 = f1;
        }
        roots
    }

    #[test]
    fn reduce_examples() {
        let p = pencil_from(vec![2.0, 2.0], vec![-1.0], vec![1.0, 1.0]);
        let t = reduce_to_standard(&p).unwrap();
        assert_eq!(t.diag, vec![2.0, 2.0]);
        assert_eq!(t.offdiag, vec![-1.0]);

        let p = pencil_from(vec![4.0], vec![], vec![2.0]);
        assert_eq!(reduce_to_standard(&p).unwrap().diag, vec![2.0]);

        let p = pencil_from(vec![4.0, 1.0], vec![0.5], vec![2.0, 0.0]);
        assert!(matches!(
            reduce_to_standard(&p),
            Err(Error::NonPositiveMass { index: 1, .. })
        ));
    }

    #[test]
    fn reduction_preserves_generalized_spectrum() {
        let p = pencil_from(
            vec![3.1, -0.7, 2.4, 5.0, 1.3, 0.2],
            vec![0.9, -1.4, 0.35, 2.2, -0.6],
            vec![0.8, 1.7, 0.45, 2.3, 1.1, 0.6],
        );
        let dense = generalized_eigenvalues_dense(&p);
        assert_eq!(dense.len(), 6);
        let t = reduce_to_standard(&p).unwrap();
        let values = lowest_eigenvalues(&t, 6, 1e-13).unwrap();
        for (a, b) in values.iter().zip(&dense) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn sturm_examples() {
        let t = SymTridiag::new(vec![1.0, 3.0], vec![0.0]).unwrap();
        assert_eq!(sturm_count(&t, 2.0).unwrap(), 1);
        let t = SymTridiag::new(vec![0.0, 0.0], vec![1.0]).unwrap();
        assert_eq!(sturm_count(&t, 0.0).unwrap(), 1);
        assert!(sturm_count(&t, f64::NAN).is_err());
    }

    #[test]
    fn sturm_count_on_discrete_laplacian() {
        let t = laplacian(50);
        for k in 1..=50 {
            let lambda = laplacian_eigenvalue(50, k);
            assert_eq!(sturm_count(&t, lambda - 1e-9).unwrap(), k - 1);
            assert_eq!(sturm_count(&t, lambda + 1e-9).unwrap(), k);
        }
    }

    #[test]
    fn lowest_eigenvalues_of_discrete_laplacian() {
        let t = laplacian(50);
        let tol = 1e-13;
        let values = lowest_eigenvalues(&t, 3, tol).unwrap();
        for (k, v) in values.iter().enumerate() {
            let exact = laplacian_eigenvalue(50, k + 1);
            assert_abs_diff_eq!(*v, exact, epsilon = 2.0 * tol);
            assert_eq!(sturm_count(&t, v - 1e-11).unwrap(), k);
            assert_eq!(sturm_count(&t, v + 1e-11).unwrap(), k + 1);
        }
        assert!(matches!(
            lowest_eigenvalues(&t, 51, tol),
            Err(Error::TooManyEigenvalues { .. })
        ));
        assert!(lowest_eigenvalues(&t, 2, 0.0).is_err());
    }

    fn lowest_of(spec: OperatorSpec, k: usize) -> Vec<f64> {
        let mesh = build_mesh(&spec, &MeshOptions::default()).unwrap();
        let p = assemble(&spec, &mesh).unwrap();
        lowest_eigenvalues(&reduce_to_standard(&p).unwrap(), k, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn laguerre_and_hermite_levels() {
        let v = lowest_of(OperatorSpec::axisym(0.0), 2);
        assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-4);
        assert_abs_diff_eq!(v[1], 6.0, epsilon = 1e-4);
        let v = lowest_of(OperatorSpec::new(Family::DeGennesNeumann, 0.0), 2);
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(v[1], 5.0, epsilon = 1e-4);
        let v = lowest_of(OperatorSpec::new(Family::DeGennesDirichlet, 0.0), 1);
        assert_abs_diff_eq!(v[0], 3.0, epsilon = 1e-4);
    }

    #[test]
    fn eigenvector_examples() {
        let t = SymTridiag::new(vec![1.0, 3.0], vec![0.0]).unwrap();
        let v = eigenvector(&t, 1.0).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-14);

        let n = 50;
        let t = laplacian(n);
        for k in 1..=3 {
            let lambda = lowest_eigenvalues(&t, k, 1e-14).unwrap()[k - 1];
            let v = eigenvector(&t, lambda).unwrap();
            let mut exact: Vec<f64> = (1..=n)
                .map(|i| (k as f64 * PI * i as f64 / (n as f64 + 1.0)).sin())
                .collect();
            normalize_euclidean(&mut exact).unwrap();
            fix_sign(&mut exact);
            for (a, b) in v.iter().zip(&exact) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn eigenvector_rejects_clusters() {
        let t = SymTridiag::new(vec![1.0, 1.0, 4.0], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            eigenvector(&t, 1.0),
            Err(Error::Cluster { count: 2, .. })
        ));
    }

    #[test]
    fn laguerre_ground_state_profile() {
        let spec = OperatorSpec::axisym(0.0);
        let mesh = build_mesh(&spec, &MeshOptions::default()).unwrap();
        let p = assemble(&spec, &mesh).unwrap();
        let pair = &pencil_eigenpairs(&p, 1, DEFAULT_TOL).unwrap()[0];
        let exact: Vec<f64> = p.nodes().iter().map(|r| (-r * r / 2.0).exp()).collect();
        let exact = weighted_normalize(&exact, &p.masses).unwrap();
        let sup = pair
            .vector
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-4, "sup error {sup}");
        assert!(pair.vector.windows(2).all(|w| w[1] <= w[0]));
        assert!(pair.vector.iter().all(|&x| x > 0.0));
        assert_abs_diff_eq!(pair.norm_weighted, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.masses.dot(&pair.vector, &pair.vector), 1.0, epsilon = 1e-12);
        // Neumann behaviour at the axis
        let h = mesh.h;
        assert!((pair.vector[1] - pair.vector[0]).abs() < 2.0 * h * h);
    }

    #[test]
    fn pencil_pairs_are_orthogonal_with_small_residual() {
        for family in [
            Family::AxiSym { m: 0 },
            Family::AxiSym { m: 1 },
            Family::DeGennesLine,
            Family::DeGennesNeumann,
            Family::DeGennesDirichlet,
        ] {
            let spec = OperatorSpec::new(family, 1.2);
            let mesh = build_mesh(&spec, &MeshOptions::default().with_n_cells(2000)).unwrap();
            let p = assemble(&spec, &mesh).unwrap();
            let pairs = pencil_eigenpairs(&p, 4, DEFAULT_TOL).unwrap();
            for (i, a) in pairs.iter().enumerate() {
                assert!(residual(&p, a) <= 1e-8 * (1.0 + a.value.abs()), "{family}");
                for b in &pairs[i + 1..] {
                    assert!(b.value > a.value, "{family}: simple spectrum");
                    assert!(p.masses.dot(&a.vector, &b.vector).abs() < 1e-8, "{family}");
                }
            }
        }
    }

    #[test]
    fn weighted_normalize_examples() {
        let w = WeightVector {
            masses: vec![2.0, 2.0],
        };
        let v = weighted_normalize(&[1.0, 1.0], &w).unwrap();
        assert_eq!(v, vec![0.5, 0.5]);
        assert_eq!(weighted_normalize(&v, &w).unwrap(), v);
        assert!(matches!(
            weighted_normalize(&[0.0, 0.0], &w),
            Err(Error::ZeroVector)
        ));
    }

    proptest! {
        #[test]
        fn count_brackets_computed_eigenvalues(
            diag in proptest::collection::vec(-5.0f64..5.0, 8..40),
            seed in proptest::collection::vec(0.1f64..2.0, 40),
        ) {
            let n = diag.len();
            let t = SymTridiag::new(diag, seed[..n - 1].to_vec()).unwrap();
            let k = n.min(6);
            let tol = 1e-12;
            let values = lowest_eigenvalues(&t, k, tol).unwrap();
            prop_assert!(values.windows(2).all(|w| w[0] < w[1]));
            let last = values[k - 1];
            prop_assert!(sturm_count(&t, last + 2.0 * tol * last.abs().max(1.0)).unwrap() >= k);
            let vectors: Vec<Vec<f64>> = values.iter().map(|&v| eigenvector(&t, v).unwrap()).collect();
            for (i, a) in vectors.iter().enumerate() {
                let ta = t.apply(a);
                let r = ta.iter().zip(a).map(|(x, y)| (x - values[i] * y).powi(2)).sum::<f64>().sqrt();
                prop_assert!(r < 1e-8);
                for b in &vectors[i + 1..] {
                    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    prop_assert!(dot.abs() < 1e-8);
                }
            }
        }
    }
}
