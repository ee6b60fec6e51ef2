//! Evaluatable vector fields on box domains.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Axis-aligned box in R^n with per-coordinate bounds, infinite bounds allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidSpec(format!(
                    "invalid box bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    /// All of R^n.
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim()
            && y.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| v.is_finite() && *v >= *lo && *v <= *hi)
    }

    /// True when `other` lies entirely inside `self`.
    pub fn contains_box(&self, other: &BoxDomain) -> bool {
        other.dim() == self.dim()
            && other
                .lower
                .iter()
                .zip(&self.lower)
                .all(|(o, s)| *o >= *s)
            && other
                .upper
                .iter()
                .zip(&self.upper)
                .all(|(o, s)| *o <= *s)
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().all(|v| v.is_finite()) && self.upper.iter().all(|v| v.is_finite())
    }

    /// Center of the box; 0 is used on axes that extend to infinity.
    pub fn center_or_zero(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| {
                if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Project a point onto the box, coordinate by coordinate.
    pub fn clamp(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }
}

type EvalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync;
type MarginFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// An evaluatable vector field `f: Y -> R^n` on a box domain, optionally with
/// an analytic Jacobian and a distance proxy to its nonsmooth locus.
pub struct OperatorSpec {
    n: usize,
    domain: BoxDomain,
    eval_fn: Box<EvalFn>,
    jacobian_fn: Option<Box<JacFn>>,
    margin_fn: Option<Box<MarginFn>>,
    provenance: String,
}

impl OperatorSpec {
    pub fn new<F>(n: usize, domain: BoxDomain, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        assert_eq!(domain.dim(), n, "domain dimension must match operator dimension");
        Self {
            n,
            domain,
            eval_fn: Box::new(eval),
            jacobian_fn: None,
            margin_fn: None,
            provenance: "user".to_string(),
        }
    }

    pub fn with_jacobian<F>(mut self, jac: F) -> Self
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.jacobian_fn = Some(Box::new(jac));
        self
    }

    pub fn with_margin<F>(mut self, margin: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.margin_fn = Some(Box::new(margin));
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian_fn.is_some()
    }

    /// Evaluate `f(y)` after checking that `y` lies in the domain box.
    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: y.len(),
            });
        }
        if !self.domain.contains(y) {
            return Err(Error::Domain(format!("point {y:?} outside operator domain")));
        }
        Ok((self.eval_fn)(y))
    }

    /// The analytic Jacobian at `y`, when one was supplied.
    pub fn analytic_jacobian(&self, y: &[f64]) -> Option<Result<DMatrix<f64>>> {
        self.jacobian_fn.as_ref().map(|j| j(y))
    }

    /// Distance proxy to the nearest nondifferentiability locus; +inf when the
    /// operator is smooth or no descriptor was supplied.
    pub fn nonsmooth_margin(&self, y: &[f64]) -> f64 {
        match &self.margin_fn {
            Some(m) => m(y),
            None => f64::INFINITY,
        }
    }
}

impl std::fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("n", &self.n)
            .field("provenance", &self.provenance)
            .field("analytic_jacobian", &self.jacobian_fn.is_some())
            .finish()
    }
}

/// The identity field `f(y) = y` on all of R^n.
pub fn identity_operator(n: usize) -> OperatorSpec {
    OperatorSpec::new(n, BoxDomain::unbounded(n), |y| y.to_vec())
        .with_jacobian(move |y: &[f64]| Ok(DMatrix::identity(y.len(), y.len())))
        .with_provenance("identity")
}

/// The planar rotation field `f(y) = (-y2, y1)`: not conservative, hence not a
/// proximity operator of anything. Useful as a refutation control.
pub fn rotation_operator() -> OperatorSpec {
    OperatorSpec::new(2, BoxDomain::unbounded(2), |y| vec![-y[1], y[0]])
        .with_jacobian(|_y| {
            Ok(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]))
        })
        .with_provenance("rotation")
}

/// A constant field `f(y) = c`.
pub fn constant_operator(c: Vec<f64>) -> OperatorSpec {
    let n = c.len();
    OperatorSpec::new(n, BoxDomain::unbounded(n), move |_y| c.clone())
        .with_jacobian(move |y: &[f64]| Ok(DMatrix::zeros(y.len(), y.len())))
        .with_provenance("constant")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_contains_and_clamp() {
        let b = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        assert!(b.contains(&[0.0, 0.5]));
        assert!(!b.contains(&[0.0, 1.5]));
        assert_eq!(b.clamp(&[2.0, -3.0]), vec![1.0, -1.0]);
        assert!(b.is_finite());
        assert!(!BoxDomain::unbounded(2).is_finite());
    }

    #[test]
    fn box_rejects_inverted_bounds() {
        assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn identity_evaluates_and_differentiates() {
        let op = identity_operator(3);
        assert_eq!(op.eval(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let j = op.analytic_jacobian(&[1.0, 2.0, 3.0]).unwrap().unwrap();
        assert_eq!(j, DMatrix::identity(3, 3));
        assert_eq!(op.nonsmooth_margin(&[0.0; 3]), f64::INFINITY);
    }

    #[test]
    fn eval_outside_domain_errors() {
        let op = OperatorSpec::new(1, BoxDomain::cube(1, 0.0, 1.0).unwrap(), |y| y.to_vec());
        assert!(matches!(op.eval(&[2.0]), Err(Error::Domain(_))));
        assert!(matches!(
            op.eval(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
