//! Finite-difference machinery: Jacobian estimation, symmetry defect and
//! eigenvalue verdicts, and sampled Lipschitz / monotonicity diagnostics.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sample::{parallel_map_indexed, rng_for, sample_direction, sample_in_box};
use crate::shrinkage::operator::{BoxDomain, OperatorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Central,
    Forward,
}

/// A finite-difference Jacobian at a point.
#[derive(Debug, Clone)]
pub struct JacobianEstimate {
    pub point: Vec<f64>,
    pub matrix: DMatrix<f64>,
    pub step: Vec<f64>,
    pub scheme: Scheme,
}

/// Default central-difference step: cbrt(machine epsilon) scaled by the point.
pub fn default_step(y: &[f64]) -> f64 {
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    f64::EPSILON.cbrt() * scale
}

/// Central-difference Jacobian, column by column: entry (i, j) estimates
/// `∂f_i/∂y_j` at `y`. The stencil must stay inside the domain and the point
/// must clear the nonsmooth exclusion band `margin > 2 step`.
pub fn fd_jacobian(op: &OperatorSpec, y: &[f64], step: f64) -> Result<JacobianEstimate> {
    fd_jacobian_of(
        op.dim(),
        op.domain(),
        |p| op.eval(p),
        op.nonsmooth_margin(y),
        y,
        step,
    )
}

/// Forward-difference variant, usable flush against a domain face.
pub fn fd_jacobian_forward(op: &OperatorSpec, y: &[f64], step: f64) -> Result<JacobianEstimate> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidSpec(format!("step must be > 0, got {step}")));
    }
    let n = op.dim();
    let f0 = op.eval(y)?;
    let mut matrix = DMatrix::zeros(n, n);
    let mut p = y.to_vec();
    for j in 0..n {
        p[j] = y[j] + step;
        let fp = op.eval(&p)?;
        p[j] = y[j];
        for i in 0..n {
            matrix[(i, j)] = (fp[i] - f0[i]) / step;
        }
    }
    ensure_finite(&matrix)?;
    Ok(JacobianEstimate {
        point: y.to_vec(),
        matrix,
        step: vec![step; n],
        scheme: Scheme::Forward,
    })
}

pub(crate) fn fd_jacobian_of<F>(
    n: usize,
    domain: &BoxDomain,
    eval: F,
    margin: f64,
    y: &[f64],
    step: f64,
) -> Result<JacobianEstimate>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidSpec(format!("step must be > 0, got {step}")));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if margin <= 2.0 * step {
        return Err(Error::Locus {
            margin,
            required: 2.0 * step,
        });
    }
    let mut p = y.to_vec();
    for j in 0..n {
        for s in [-step, step] {
            p[j] = y[j] + s;
            if !domain.contains(&p) {
                return Err(Error::Domain(format!(
                    "stencil point leaves the domain along axis {j}"
                )));
            }
        }
        p[j] = y[j];
    }
    let mut matrix = DMatrix::zeros(n, n);
    for j in 0..n {
        p[j] = y[j] + step;
        let fp = eval(&p)?;
        p[j] = y[j] - step;
        let fm = eval(&p)?;
        p[j] = y[j];
        let inv = 1.0 / (2.0 * step);
        for i in 0..n {
            matrix[(i, j)] = (fp[i] - fm[i]) * inv;
        }
    }
    ensure_finite(&matrix)?;
    Ok(JacobianEstimate {
        point: y.to_vec(),
        matrix,
        step: vec![step; n],
        scheme: Scheme::Central,
    })
}

fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite Jacobian entry".into()));
    }
    Ok(())
}

/// Symmetry defect and smallest eigenvalue of the symmetrized matrix.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralVerdict {
    /// `||J - J^T||_F / max(1, ||J||_F)`.
    pub sym_defect: f64,
    /// Smallest eigenvalue of `(J + J^T)/2`.
    pub min_eig_sym: f64,
    pub sym_tol: f64,
    pub eig_tol: f64,
}

impl SpectralVerdict {
    pub fn symmetry_ok(&self) -> bool {
        self.sym_defect <= self.sym_tol
    }

    pub fn psd_ok(&self) -> bool {
        self.min_eig_sym >= -self.eig_tol
    }
}

/// Measure how far `J` is from being symmetric positive semi-definite. The
/// eigenvalue is always taken on the symmetrized matrix; the asymmetry is
/// reported separately. No boolean decision is made here.
pub fn spectral_verdict(matrix: &DMatrix<f64>, sym_tol: f64, eig_tol: f64) -> SpectralVerdict {
    let asym = matrix - matrix.transpose();
    let sym_defect = asym.norm() / matrix.norm().max(1.0);
    let sym = (matrix + matrix.transpose()) * 0.5;
    let min_eig_sym = sym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    SpectralVerdict {
        sym_defect,
        min_eig_sym,
        sym_tol,
        eig_tol,
    }
}

/// Sampled Lipschitz estimate: max of `||f(y)-f(y')|| / ||y-y'||` over seeded
/// pairs, including pairs at distance scales {1e-3, 1e-1, 1} to catch local
/// slopes. Deterministic given the seed; monotone in the sample count.
pub fn lipschitz_estimate(
    op: &OperatorSpec,
    samples: usize,
    sample_box: &BoxDomain,
    seed: u64,
) -> Result<f64> {
    if !sample_box.is_finite() || !op.domain().contains_box(sample_box) {
        return Err(Error::Domain(
            "Lipschitz sampling needs a finite box inside the operator domain".into(),
        ));
    }
    let ratios = parallel_map_indexed(samples, |k| -> Result<f64> {
        let mut rng = rng_for(seed, k as u64);
        let y = sample_in_box(&mut rng, sample_box);
        let fy = op.eval(&y)?;
        let mut best = 0.0f64;

        let y2 = sample_in_box(&mut rng, sample_box);
        best = best.max(pair_ratio(op, &y, &fy, &y2)?);

        let dir = sample_direction(&mut rng, op.dim());
        for scale in [1e-3, 1e-1, 1.0] {
            let shifted: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + scale * d).collect();
            let y3 = sample_box.clamp(&shifted);
            best = best.max(pair_ratio(op, &y, &fy, &y3)?);
        }
        Ok(best)
    });
    let mut best = 0.0f64;
    for r in ratios {
        best = best.max(r?);
    }
    Ok(best)
}

fn pair_ratio(op: &OperatorSpec, y: &[f64], fy: &[f64], y2: &[f64]) -> Result<f64> {
    let dy2: f64 = y
        .iter()
        .zip(y2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if dy2 == 0.0 {
        return Ok(0.0);
    }
    let f2 = op.eval(y2)?;
    let df: f64 = fy
        .iter()
        .zip(&f2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(df / dy2)
}

/// `min(0, <f(y) - f(y'), y - y'>)`: strictly negative values refute the
/// existence of a convex potential whose subdifferential contains `f`.
pub fn directional_monotonicity_defect(
    op: &OperatorSpec,
    y: &[f64],
    y_prime: &[f64],
) -> Result<f64> {
    let fy = op.eval(y)?;
    let fyp = op.eval(y_prime)?;
    let inner: f64 = fy
        .iter()
        .zip(&fyp)
        .zip(y.iter().zip(y_prime))
        .map(|((a, b), (u, v))| (a - b) * (u - v))
        .sum();
    Ok(inner.min(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinkage::group::{group_lasso_operator, GroupStructure};
    use crate::shrinkage::operator::{constant_operator, identity_operator};
    use crate::shrinkage::scalar::{scalar_operator, ScalarRule};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn identity_jacobian_is_identity() {
        let op = identity_operator(3);
        let est = fd_jacobian(&op, &[0.3, -1.2, 2.0], 1e-5).unwrap();
        let diff = &est.matrix - DMatrix::<f64>::identity(3, 3);
        assert!(diff.norm() < 1e-10);
    }

    #[test]
    fn scaled_soft_slope_away_from_kink() {
        let op = scalar_operator(ScalarRule::scaled_soft(2.0).unwrap());
        let est = fd_jacobian(&op, &[3.0], 1e-5).unwrap();
        assert_abs_diff_eq!(est.matrix[(0, 0)], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn group_lasso_matches_symbolic_jacobian() {
        // d f_i / d y_j = delta_ij (1 - l/r) + l y_i y_j / r^3 on an alive group.
        let gs = GroupStructure::new(2, vec![vec![0, 1]]).unwrap();
        let op = group_lasso_operator(gs, 1.0);
        let y = [3.0, 4.0];
        let est = fd_jacobian(&op, &y, 1e-5).unwrap();
        let r: f64 = 5.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut expect = y[i] * y[j] / (r * r * r);
                if i == j {
                    expect += 1.0 - 1.0 / r;
                }
                assert_abs_diff_eq!(est.matrix[(i, j)], expect, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn locus_and_domain_errors() {
        let op = scalar_operator(ScalarRule::hard(2.0).unwrap());
        // sqrt(2*lambda) = 2, margin at 2.000001 is tiny
        assert!(matches!(
            fd_jacobian(&op, &[2.000001], 1e-5),
            Err(Error::Locus { .. })
        ));
        let bounded = OperatorSpec::new(1, BoxDomain::cube(1, 0.0, 1.0).unwrap(), |y| y.to_vec());
        assert!(matches!(
            fd_jacobian(&bounded, &[1.0], 1e-5),
            Err(Error::Domain(_))
        ));
        let fwd = fd_jacobian_forward(&bounded, &[0.0], 1e-6).unwrap();
        assert_abs_diff_eq!(fwd.matrix[(0, 0)], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn spectral_verdict_hand_values() {
        let id = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let v = spectral_verdict(&id, 1e-6, 1e-8);
        assert_eq!(v.sym_defect, 0.0);
        assert_abs_diff_eq!(v.min_eig_sym, 1.0, epsilon = 1e-12);
        assert!(v.symmetry_ok() && v.psd_ok());

        let shear = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let v = spectral_verdict(&shear, 1e-6, 1e-8);
        assert_abs_diff_eq!(v.sym_defect, 2.0f64.sqrt(), epsilon = 1e-12);

        let saddle = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let v = spectral_verdict(&saddle, 1e-6, 1e-8);
        assert_eq!(v.sym_defect, 0.0);
        assert_abs_diff_eq!(v.min_eig_sym, -1.0, epsilon = 1e-12);
        assert!(!v.psd_ok());
    }

    #[test]
    fn spectral_verdict_shift_invariance() {
        let mut rng = rng_for(11, 0);
        for _ in 0..20 {
            let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-2.0..2.0));
            let c = rng.gen_range(-1.0..1.0);
            let shifted = &m + DMatrix::identity(3, 3) * c;
            let v0 = spectral_verdict(&m, 1e-6, 1e-8);
            let v1 = spectral_verdict(&shifted, 1e-6, 1e-8);
            assert_abs_diff_eq!(v1.min_eig_sym, v0.min_eig_sym + c, epsilon = 1e-12);
        }
    }

    #[test]
    fn lipschitz_soft_and_scaled() {
        let b = BoxDomain::cube(1, -5.0, 5.0).unwrap();
        let soft = scalar_operator(ScalarRule::soft(1.0).unwrap());
        let l = lipschitz_estimate(&soft, 1000, &b, 42).unwrap();
        assert!((1.0 - 1e-9..=1.0).contains(&l), "soft estimate {l}");

        let scaled = scalar_operator(ScalarRule::scaled_soft(2.0).unwrap());
        let l = lipschitz_estimate(&scaled, 1000, &b, 42).unwrap();
        assert!((2.0 - 1e-3..=2.0).contains(&l), "scaled estimate {l}");

        let c = constant_operator(vec![3.0]);
        assert_eq!(lipschitz_estimate(&c, 200, &b, 42).unwrap(), 0.0);
    }

    #[test]
    fn lipschitz_monotone_in_sample_count() {
        let b = BoxDomain::cube(1, -5.0, 5.0).unwrap();
        let op = scalar_operator(ScalarRule::soft(1.0).unwrap());
        let l1 = lipschitz_estimate(&op, 50, &b, 9).unwrap();
        let l2 = lipschitz_estimate(&op, 200, &b, 9).unwrap();
        let l3 = lipschitz_estimate(&op, 400, &b, 9).unwrap();
        assert!(l2 >= l1 && l3 >= l2);
    }

    #[test]
    fn monotonicity_defect_examples() {
        let id = identity_operator(2);
        assert_eq!(
            directional_monotonicity_defect(&id, &[1.0, 2.0], &[0.0, -1.0]).unwrap(),
            0.0
        );

        let neg = OperatorSpec::new(1, BoxDomain::unbounded(1), |y| vec![-y[0]]);
        assert_eq!(
            directional_monotonicity_defect(&neg, &[1.0], &[0.0]).unwrap(),
            -1.0
        );

        let hard = scalar_operator(ScalarRule::hard(2.0).unwrap());
        assert_eq!(
            directional_monotonicity_defect(&hard, &[2.1], &[1.9]).unwrap(),
            0.0
        );
    }
}
