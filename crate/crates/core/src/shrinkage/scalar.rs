//! Scalar shrinkage rules: soft, hard and scaled-soft thresholding, quantization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shrinkage::operator::{BoxDomain, OperatorSpec};

/// A nondecreasing scalar thresholding rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ScalarRule {
    Identity,
    /// `y -> sign(y) max(|y| - lambda, 0)`.
    Soft { lambda: f64 },
    /// `y -> 0` for `|y| < sqrt(2 lambda)`, `y` otherwise. The value at the
    /// tie points `|y| = sqrt(2 lambda)` is the point itself.
    Hard { lambda: f64 },
    /// Soft thresholding at unit threshold, scaled by `c`: expansive for c > 1.
    ScaledSoft { c: f64 },
    /// Step function on `[x_0, x_q)`: value `levels[i]` on `[breakpoints[i], breakpoints[i+1])`.
    Quantizer {
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
    },
}

impl ScalarRule {
    pub fn soft(lambda: f64) -> Result<Self> {
        ensure_threshold(lambda)?;
        Ok(Self::Soft { lambda })
    }

    pub fn hard(lambda: f64) -> Result<Self> {
        ensure_threshold(lambda)?;
        Ok(Self::Hard { lambda })
    }

    pub fn scaled_soft(c: f64) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidSpec(format!("scale must be positive, got {c}")));
        }
        Ok(Self::ScaledSoft { c })
    }

    pub fn quantizer(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != levels.len() + 1 || levels.is_empty() {
            return Err(Error::InvalidSpec(
                "quantizer needs q levels and q+1 breakpoints".into(),
            ));
        }
        if breakpoints.iter().chain(&levels).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("quantizer parameters must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec(
                "quantizer breakpoints must be strictly increasing".into(),
            ));
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSpec(
                "quantizer levels must be nondecreasing".into(),
            ));
        }
        Ok(Self::Quantizer { breakpoints, levels })
    }

    /// Uniform quantizer on `[0, 1)` with `q` cells and levels at cell centers,
    /// so each interior breakpoint is the midpoint of its neighbouring levels.
    pub fn uniform_quantizer(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidSpec("quantizer needs at least one cell".into()));
        }
        let breakpoints = (0..=q).map(|i| i as f64 / q as f64).collect();
        let levels = (0..q).map(|i| (2 * i + 1) as f64 / (2 * q) as f64).collect();
        Self::quantizer(breakpoints, levels)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Soft { .. } => "soft",
            Self::Hard { .. } => "hard",
            Self::ScaledSoft { .. } => "scaled_soft",
            Self::Quantizer { .. } => "quantizer",
        }
    }
}

fn ensure_threshold(lambda: f64) -> Result<()> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "threshold must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Evaluate a scalar rule at `y`.
pub fn eval_scalar(rule: &ScalarRule, y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::Domain(format!("scalar input must be finite, got {y}")));
    }
    Ok(match rule {
        ScalarRule::Identity => y,
        ScalarRule::Soft { lambda } => {
            if y > *lambda {
                y - lambda
            } else if y < -*lambda {
                y + lambda
            } else {
                0.0
            }
        }
        ScalarRule::Hard { lambda } => {
            let t = (2.0 * lambda).sqrt();
            if y.abs() >= t {
                y
            } else {
                0.0
            }
        }
        ScalarRule::ScaledSoft { c } => {
            if y >= 1.0 {
                c * (y - 1.0)
            } else if y <= -1.0 {
                c * (y + 1.0)
            } else {
                0.0
            }
        }
        ScalarRule::Quantizer { breakpoints, levels } => {
            let lo = breakpoints[0];
            let hi = *breakpoints.last().unwrap();
            if y < lo || y >= hi {
                return Err(Error::Domain(format!(
                    "quantizer input {y} outside [{lo}, {hi})"
                )));
            }
            // Last cell with breakpoint <= y.
            let i = match breakpoints.binary_search_by(|b| b.partial_cmp(&y).unwrap()) {
                Ok(i) => i,
                Err(i) => i - 1,
            };
            levels[i.min(levels.len() - 1)]
        }
    })
}

/// One-sided derivative convention at kinks: the slope of the branch that owns
/// the point per `eval_scalar`.
pub fn scalar_slope(rule: &ScalarRule, y: f64) -> f64 {
    match rule {
        ScalarRule::Identity => 1.0,
        ScalarRule::Soft { lambda } => {
            if y.abs() > *lambda {
                1.0
            } else {
                0.0
            }
        }
        ScalarRule::Hard { lambda } => {
            if y.abs() >= (2.0 * lambda).sqrt() {
                1.0
            } else {
                0.0
            }
        }
        ScalarRule::ScaledSoft { c } => {
            if y.abs() >= 1.0 {
                *c
            } else {
                0.0
            }
        }
        ScalarRule::Quantizer { .. } => 0.0,
    }
}

/// Distance from `y` to the rule's nonsmooth locus.
pub fn scalar_margin(rule: &ScalarRule, y: f64) -> f64 {
    match rule {
        ScalarRule::Identity => f64::INFINITY,
        ScalarRule::Soft { lambda } => {
            if *lambda == 0.0 {
                f64::INFINITY
            } else {
                (y.abs() - lambda).abs()
            }
        }
        ScalarRule::Hard { lambda } => (y.abs() - (2.0 * lambda).sqrt()).abs(),
        ScalarRule::ScaledSoft { .. } => (y.abs() - 1.0).abs(),
        ScalarRule::Quantizer { breakpoints, .. } => breakpoints[1..breakpoints.len() - 1]
            .iter()
            .map(|b| (y - b).abs())
            .fold(f64::INFINITY, f64::min),
    }
}

/// Largest representable value strictly below `x`.
fn next_down(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return x;
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits - 1)
    } else if x == 0.0 {
        -f64::MIN_POSITIVE
    } else {
        f64::from_bits(bits + 1)
    }
}

/// Wrap a scalar rule as a one-dimensional operator with analytic Jacobian and
/// nonsmooth-margin descriptor.
pub fn scalar_operator(rule: ScalarRule) -> OperatorSpec {
    let domain = match &rule {
        ScalarRule::Quantizer { breakpoints, .. } => {
            // Half-open cell [x_0, x_q): stay strictly below the right edge.
            BoxDomain::new(vec![breakpoints[0]], vec![next_down(*breakpoints.last().unwrap())])
                .expect("quantizer breakpoints are increasing")
        }
        _ => BoxDomain::unbounded(1),
    };
    let name = rule.name();
    let eval_rule = rule.clone();
    let jac_rule = rule.clone();
    let margin_rule = rule.clone();
    OperatorSpec::new(1, domain, move |y| {
        vec![eval_scalar(&eval_rule, y[0]).expect("domain was checked by OperatorSpec")]
    })
    .with_jacobian(move |y: &[f64]| {
        Ok(nalgebra::DMatrix::from_element(1, 1, scalar_slope(&jac_rule, y[0])))
    })
    .with_margin(move |y: &[f64]| scalar_margin(&margin_rule, y[0]))
    .with_provenance(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hard_threshold_values() {
        // sqrt(2*2) = 2
        let rule = ScalarRule::hard(2.0).unwrap();
        assert_eq!(eval_scalar(&rule, 1.5).unwrap(), 0.0);
        assert_eq!(eval_scalar(&rule, 2.0).unwrap(), 2.0);
        assert_eq!(eval_scalar(&rule, -2.0).unwrap(), -2.0);
        assert_eq!(eval_scalar(&rule, 3.0).unwrap(), 3.0);
    }

    #[test]
    fn scaled_soft_values() {
        let rule = ScalarRule::scaled_soft(2.0).unwrap();
        assert_eq!(eval_scalar(&rule, 3.0).unwrap(), 4.0);
        assert_eq!(eval_scalar(&rule, -3.0).unwrap(), -4.0);
        assert_eq!(eval_scalar(&rule, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn soft_fixes_origin() {
        let rule = ScalarRule::soft(1.0).unwrap();
        assert_eq!(eval_scalar(&rule, 0.0).unwrap(), 0.0);
        assert_eq!(eval_scalar(&rule, 2.0).unwrap(), 1.0);
        assert_eq!(eval_scalar(&rule, -2.0).unwrap(), -1.0);
    }

    #[test]
    fn quantizer_cells_and_domain() {
        let rule = ScalarRule::uniform_quantizer(4).unwrap();
        assert_eq!(eval_scalar(&rule, 0.0).unwrap(), 0.125);
        assert_eq!(eval_scalar(&rule, 0.25).unwrap(), 0.375);
        assert_eq!(eval_scalar(&rule, 0.999).unwrap(), 0.875);
        assert!(matches!(eval_scalar(&rule, 1.0), Err(Error::Domain(_))));
        assert!(matches!(eval_scalar(&rule, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn quantizer_validation() {
        assert!(ScalarRule::quantizer(vec![0.0, 0.5, 0.4], vec![0.0, 1.0]).is_err());
        assert!(ScalarRule::quantizer(vec![0.0, 0.5, 1.0], vec![1.0, 0.0]).is_err());
        assert!(ScalarRule::quantizer(vec![0.0, 1.0], vec![]).is_err());
    }

    #[test]
    fn margins() {
        let hard = ScalarRule::hard(2.0).unwrap();
        assert_eq!(scalar_margin(&hard, 2.0), 0.0);
        assert_eq!(scalar_margin(&hard, 3.0), 1.0);
        let q = ScalarRule::uniform_quantizer(4).unwrap();
        assert_eq!(scalar_margin(&q, 0.25), 0.0);
        assert!(scalar_margin(&q, 0.3) > 0.04);
    }

    #[test]
    fn operator_wraps_rule() {
        let op = scalar_operator(ScalarRule::scaled_soft(2.0).unwrap());
        assert_eq!(op.eval(&[3.0]).unwrap(), vec![4.0]);
        let j = op.analytic_jacobian(&[3.0]).unwrap().unwrap();
        assert_eq!(j[(0, 0)], 2.0);
    }

    #[test]
    fn quantizer_operator_domain_is_half_open() {
        let op = scalar_operator(ScalarRule::uniform_quantizer(4).unwrap());
        assert!(op.eval(&[1.0]).is_err());
        assert!(op.eval(&[0.9999999]).is_ok());
        assert!(op.eval(&[0.0]).is_ok());
    }

    fn arbitrary_rule() -> impl Strategy<Value = ScalarRule> {
        prop_oneof![
            Just(ScalarRule::Identity),
            (0.0..4.0f64).prop_map(|l| ScalarRule::soft(l).unwrap()),
            (0.0..4.0f64).prop_map(|l| ScalarRule::hard(l).unwrap()),
            (0.1..4.0f64).prop_map(|c| ScalarRule::scaled_soft(c).unwrap()),
            (1usize..6).prop_map(|q| ScalarRule::uniform_quantizer(q).unwrap()),
        ]
    }

    proptest! {
        // Every rule evaluates to a nondecreasing function on its domain.
        #[test]
        fn rules_are_nondecreasing(rule in arbitrary_rule(), a in -10.0..10.0f64, b in -10.0..10.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let clamp_domain = |v: f64| match &rule {
                ScalarRule::Quantizer { .. } => v.rem_euclid(1.0).min(0.999_999),
                _ => v,
            };
            let (mut lo, mut hi) = (clamp_domain(lo), clamp_domain(hi));
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            let flo = eval_scalar(&rule, lo).unwrap();
            let fhi = eval_scalar(&rule, hi).unwrap();
            prop_assert!(flo <= fhi, "rule {:?} decreased: f({lo})={flo} > f({hi})={fhi}", rule);
        }

        // Soft thresholding is nonexpansive on pairs.
        #[test]
        fn soft_is_nonexpansive(l in 0.0..4.0f64, a in -10.0..10.0f64, b in -10.0..10.0f64) {
            let rule = ScalarRule::soft(l).unwrap();
            let fa = eval_scalar(&rule, a).unwrap();
            let fb = eval_scalar(&rule, b).unwrap();
            prop_assert!((fa - fb).abs() <= (a - b).abs() + 1e-15);
        }
    }
}
