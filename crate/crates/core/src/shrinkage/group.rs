//! Block shrinkage over disjoint coordinate groups.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shrinkage::operator::{BoxDomain, OperatorSpec};

/// A partition of `{0..n-1}` into disjoint nonempty groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStructure {
    n: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupStructure {
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::InvalidSpec("empty group".into()));
            }
            for &i in g {
                if i >= n {
                    return Err(Error::InvalidSpec(format!(
                        "group index {i} out of range for n={n}"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidSpec(format!("index {i} in two groups")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidSpec("groups do not cover every index".into()));
        }
        let mut groups = groups;
        for g in &mut groups {
            g.sort_unstable();
        }
        Ok(Self { n, groups })
    }

    /// Build from one label per coordinate; equal labels share a group.
    /// Groups are ordered by first appearance.
    pub fn from_labels<T: PartialEq>(labels: &[T]) -> Result<Self> {
        let mut reps: Vec<&T> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, lab) in labels.iter().enumerate() {
            match reps.iter().position(|r| *r == lab) {
                Some(k) => groups[k].push(i),
                None => {
                    reps.push(lab);
                    groups.push(vec![i]);
                }
            }
        }
        Self::new(labels.len(), groups)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

fn check_input(gs: &GroupStructure, lambda: f64, y: &[f64]) -> Result<()> {
    if y.len() != gs.n {
        return Err(Error::DimensionMismatch {
            expected: gs.n,
            got: y.len(),
        });
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "threshold must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

fn group_sumsq(y: &[f64], group: &[usize]) -> f64 {
    let mut s = 0.0;
    for &i in group {
        s += y[i] * y[i];
    }
    s
}

/// Group-sparsity shrinkage: each group scaled by `(1 - lambda/||y_G||)_+`.
pub fn eval_group_lasso(gs: &GroupStructure, lambda: f64, y: &[f64]) -> Result<Vec<f64>> {
    check_input(gs, lambda, y)?;
    let mut out = vec![0.0; gs.n];
    for group in &gs.groups {
        let s = group_sumsq(y, group);
        let r = s.sqrt();
        if r > lambda {
            let factor = 1.0 - lambda / s.sqrt();
            for &i in group {
                out[i] = y[i] * factor;
            }
        }
    }
    Ok(out)
}

/// Group empirical Wiener shrinkage: each group scaled by `(1 - lambda^2/||y_G||^2)_+`.
pub fn eval_group_ew(gs: &GroupStructure, lambda: f64, y: &[f64]) -> Result<Vec<f64>> {
    check_input(gs, lambda, y)?;
    let mut out = vec![0.0; gs.n];
    for group in &gs.groups {
        let s = group_sumsq(y, group);
        let r = s.sqrt();
        if r > lambda {
            let factor = 1.0 - lambda * lambda / s;
            for &i in group {
                out[i] = y[i] * factor;
            }
        }
    }
    Ok(out)
}

/// Analytic Jacobian of `eval_group_lasso` off the threshold spheres.
pub fn group_lasso_jacobian(gs: &GroupStructure, lambda: f64, y: &[f64]) -> Result<DMatrix<f64>> {
    check_input(gs, lambda, y)?;
    let mut jac = DMatrix::zeros(gs.n, gs.n);
    for group in &gs.groups {
        let r = group_sumsq(y, group).sqrt();
        if r > lambda {
            let diag = 1.0 - lambda / r;
            let cube = lambda / (r * r * r);
            for &i in group {
                for &j in group {
                    jac[(i, j)] = cube * y[i] * y[j];
                    if i == j {
                        jac[(i, j)] += diag;
                    }
                }
            }
        }
    }
    Ok(jac)
}

/// Analytic Jacobian of `eval_group_ew` off the threshold spheres.
pub fn group_ew_jacobian(gs: &GroupStructure, lambda: f64, y: &[f64]) -> Result<DMatrix<f64>> {
    check_input(gs, lambda, y)?;
    let mut jac = DMatrix::zeros(gs.n, gs.n);
    for group in &gs.groups {
        let s = group_sumsq(y, group);
        if s.sqrt() > lambda {
            let diag = 1.0 - lambda * lambda / s;
            let quad = 2.0 * lambda * lambda / (s * s);
            for &i in group {
                for &j in group {
                    jac[(i, j)] = quad * y[i] * y[j];
                    if i == j {
                        jac[(i, j)] += diag;
                    }
                }
            }
        }
    }
    Ok(jac)
}

/// Distance proxy to the nearest threshold sphere `||y_G|| = lambda`.
pub fn group_margin(gs: &GroupStructure, lambda: f64, y: &[f64]) -> f64 {
    gs.groups
        .iter()
        .map(|g| (group_sumsq(y, g).sqrt() - lambda).abs())
        .fold(f64::INFINITY, f64::min)
}

pub fn group_lasso_operator(gs: GroupStructure, lambda: f64) -> OperatorSpec {
    let n = gs.dim();
    let (g1, g2, g3) = (gs.clone(), gs.clone(), gs);
    OperatorSpec::new(n, BoxDomain::unbounded(n), move |y| {
        eval_group_lasso(&g1, lambda, y).expect("validated dimensions")
    })
    .with_jacobian(move |y: &[f64]| group_lasso_jacobian(&g2, lambda, y))
    .with_margin(move |y: &[f64]| group_margin(&g3, lambda, y))
    .with_provenance("group_lasso")
}

pub fn group_ew_operator(gs: GroupStructure, lambda: f64) -> OperatorSpec {
    let n = gs.dim();
    let (g1, g2, g3) = (gs.clone(), gs.clone(), gs);
    OperatorSpec::new(n, BoxDomain::unbounded(n), move |y| {
        eval_group_ew(&g1, lambda, y).expect("validated dimensions")
    })
    .with_jacobian(move |y: &[f64]| group_ew_jacobian(&g2, lambda, y))
    .with_margin(move |y: &[f64]| group_margin(&g3, lambda, y))
    .with_provenance("group_ew")
}
