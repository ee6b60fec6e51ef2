//! Social shrinkage: coefficient-wise rules driven by overlapping weighted
//! neighborhoods (windowed group lasso, persistent empirical Wiener, and
//! custom profiles).

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shrinkage::group::GroupStructure;
use crate::shrinkage::operator::{BoxDomain, OperatorSpec};

/// Per-index nonnegative weight vectors `w^i` with `i` in its own support.
/// The neighborhood of index `i` is `N_i = supp(w^i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSystem {
    n: usize,
    weights: Vec<Vec<f64>>,
    neighborhoods: Vec<Vec<usize>>,
}

impl NeighborhoodSystem {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidSpec("need at least one weight vector".into()));
        }
        let mut neighborhoods = Vec::with_capacity(n);
        for (i, w) in weights.iter().enumerate() {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "weights must be finite and nonnegative (w^{i})"
                )));
            }
            if w[i] <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "index {i} must belong to its own neighborhood (w^{i}_{i} > 0)"
                )));
            }
            neighborhoods.push(support(w));
        }
        Ok(Self {
            n,
            weights,
            neighborhoods,
        })
    }

    /// Unit weights on sliding windows `N_i = [i-h, i+h] ∩ {0..n-1}`.
    pub fn sliding_window(n: usize, half_width: usize) -> Result<Self> {
        let mut weights = vec![vec![0.0; n]; n];
        for (i, row) in weights.iter_mut().enumerate() {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width).min(n - 1);
            for w in &mut row[lo..=hi] {
                *w = 1.0;
            }
        }
        Self::new(weights)
    }

    /// Indicator weights of the group containing each index: every member of a
    /// group shares the same weight vector, supported exactly on the group.
    pub fn from_groups(gs: &GroupStructure) -> Result<Self> {
        let n = gs.dim();
        let mut weights = vec![vec![0.0; n]; n];
        for group in gs.groups() {
            for &i in group {
                for &j in group {
                    weights[i][j] = 1.0;
                }
            }
        }
        Self::new(weights)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn neighborhoods(&self) -> &[Vec<usize>] {
        &self.neighborhoods
    }
}

fn support(w: &[f64]) -> Vec<usize> {
    w.iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Scalar profile `h_i` applied to the squared neighborhood norm, together
/// with its derivative. Registry profiles have nonvanishing derivative on
/// `(0, inf)`.
#[derive(Clone)]
pub enum ShrinkProfile {
    /// `h(t) = 1 - lambda / sqrt(t)` (windowed group lasso).
    WgLasso,
    /// `h(t) = 1 - lambda^2 / t` (persistent empirical Wiener).
    Pew,
    Custom {
        name: String,
        h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        h_prime: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl ShrinkProfile {
    pub fn name(&self) -> &str {
        match self {
            Self::WgLasso => "wglasso",
            Self::Pew => "pew",
            Self::Custom { name, .. } => name,
        }
    }
}

impl std::fmt::Debug for ShrinkProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ShrinkProfile({})", self.name())
    }
}

/// A generalized social shrinkage operator: `f_i(y) = y_i h_i(||diag(w^i) y||^2)`
/// when `||diag(w^i) y|| > lambda`, else 0.
#[derive(Debug, Clone)]
pub struct SocialShrinkageSpec {
    pub system: NeighborhoodSystem,
    pub lambda: f64,
    pub profile: ShrinkProfile,
}

impl SocialShrinkageSpec {
    pub fn new(system: NeighborhoodSystem, lambda: f64, profile: ShrinkProfile) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "social threshold must be finite and > 0, got {lambda}"
            )));
        }
        Ok(Self {
            system,
            lambda,
            profile,
        })
    }

    pub fn wglasso(system: NeighborhoodSystem, lambda: f64) -> Result<Self> {
        Self::new(system, lambda, ShrinkProfile::WgLasso)
    }

    pub fn pew(system: NeighborhoodSystem, lambda: f64) -> Result<Self> {
        Self::new(system, lambda, ShrinkProfile::Pew)
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// `h_i(t)` for `t = ||diag(w^i) y||^2 > 0`.
    pub fn h(&self, t: f64) -> f64 {
        match &self.profile {
            ShrinkProfile::WgLasso => 1.0 - self.lambda / t.sqrt(),
            ShrinkProfile::Pew => 1.0 - self.lambda * self.lambda / t,
            ShrinkProfile::Custom { h, .. } => h(t),
        }
    }

    /// `h_i'(t)`; nonzero on `(0, inf)` for registry profiles.
    pub fn h_prime(&self, t: f64) -> f64 {
        match &self.profile {
            ShrinkProfile::WgLasso => 0.5 * self.lambda / (t * t.sqrt()),
            ShrinkProfile::Pew => self.lambda * self.lambda / (t * t),
            ShrinkProfile::Custom { h_prime, .. } => h_prime(t),
        }
    }

    /// Squared weighted norm `||diag(w^i) y||^2`.
    pub fn weighted_sumsq(&self, i: usize, y: &[f64]) -> f64 {
        let mut s = 0.0;
        for (w, v) in self.system.weight(i).iter().zip(y) {
            let t = w * v;
            s += t * t;
        }
        s
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        Ok(())
    }
}

/// Evaluate a social shrinkage operator. Exactly on a threshold sphere the
/// dead branch (0) is returned; such points are flagged by a zero margin.
pub fn eval_social(spec: &SocialShrinkageSpec, y: &[f64]) -> Result<Vec<f64>> {
    spec.check_dim(y)?;
    let n = spec.dim();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let s = spec.weighted_sumsq(i, y);
        if s.sqrt() > spec.lambda {
            out[i] = y[i] * spec.h(s);
        }
    }
    Ok(out)
}

/// Analytic Jacobian of `eval_social` off the threshold spheres.
///
/// Row `i` is zero when `||diag(w^i) y|| < lambda`; otherwise entry `(i, j)`
/// is `2 (w^i_j)^2 y_i y_j h_i'(s_i)` with the diagonal carrying the extra
/// product-rule term `h_i(s_i)`.
pub fn analytic_social_jacobian(spec: &SocialShrinkageSpec, y: &[f64]) -> Result<DMatrix<f64>> {
    spec.check_dim(y)?;
    let n = spec.dim();
    let margin = social_nonsmooth_margin(spec, y)?;
    if margin == 0.0 {
        return Err(Error::Locus {
            margin,
            required: 0.0,
        });
    }
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        let s = spec.weighted_sumsq(i, y);
        if s.sqrt() > spec.lambda {
            let h = spec.h(s);
            let hp = spec.h_prime(s);
            let wi = spec.system.weight(i);
            for j in 0..n {
                let wij = wi[j];
                jac[(i, j)] = 2.0 * wij * wij * y[i] * y[j] * hp;
            }
            jac[(i, i)] += h;
        }
    }
    Ok(jac)
}

/// `min_i | ||diag(w^i) y|| - lambda |`; zero means `y` sits on a threshold sphere.
pub fn social_nonsmooth_margin(spec: &SocialShrinkageSpec, y: &[f64]) -> Result<f64> {
    spec.check_dim(y)?;
    Ok((0..spec.dim())
        .map(|i| (spec.weighted_sumsq(i, y).sqrt() - spec.lambda).abs())
        .fold(f64::INFINITY, f64::min))
}

/// Result of grouping indices by exact weight equality.
#[derive(Debug, Clone)]
pub struct PartitionOutcome {
    /// Equivalence classes of `w^i = w^j`, ordered by first member.
    pub classes: Vec<Vec<usize>>,
    /// Per class: does `supp(w^G)` equal the class itself?
    pub support_matches: Vec<bool>,
    /// The group structure, present only when every class matches its support.
    pub partition: Option<GroupStructure>,
    /// First pair `(i, j)` with `N_i != N_j` and `N_i ∩ N_j != ∅`, when one exists.
    pub violating_pair: Option<(usize, usize)>,
}

/// Group indices by exact weight-vector equality and test whether the
/// neighborhood system is a genuine partition (each class supported on itself).
pub fn derive_partition(ns: &NeighborhoodSystem) -> PartitionOutcome {
    derive_partition_with_tol(ns, 0.0)
}

/// Like `derive_partition` with an opt-in tolerance for weight equality.
pub fn derive_partition_with_tol(ns: &NeighborhoodSystem, tol: f64) -> PartitionOutcome {
    let n = ns.dim();
    let weights_equal = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol);

    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match classes
            .iter()
            .position(|c| weights_equal(ns.weight(c[0]), ns.weight(i)))
        {
            Some(k) => classes[k].push(i),
            None => classes.push(vec![i]),
        }
    }

    let support_matches: Vec<bool> = classes
        .iter()
        .map(|c| ns.neighborhoods()[c[0]] == *c)
        .collect();

    let all_match = support_matches.iter().all(|m| *m);
    let partition = if all_match {
        Some(GroupStructure::new(n, classes.clone()).expect("classes partition the indices"))
    } else {
        None
    };

    let violating_pair = if all_match {
        None
    } else {
        first_overlapping_pair(ns)
    };

    PartitionOutcome {
        classes,
        support_matches,
        partition,
        violating_pair,
    }
}

fn first_overlapping_pair(ns: &NeighborhoodSystem) -> Option<(usize, usize)> {
    let nbh = ns.neighborhoods();
    for i in 0..ns.dim() {
        for j in (i + 1)..ns.dim() {
            if nbh[i] != nbh[j] && nbh[i].iter().any(|k| nbh[j].contains(k)) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Wrap a social shrinkage spec as an operator on all of R^n.
pub fn social_operator(spec: SocialShrinkageSpec) -> OperatorSpec {
    let n = spec.dim();
    let name = spec.profile.name().to_string();
    let (s1, s2, s3) = (spec.clone(), spec.clone(), spec);
    OperatorSpec::new(n, BoxDomain::unbounded(n), move |y| {
        eval_social(&s1, y).expect("validated dimensions")
    })
    .with_jacobian(move |y: &[f64]| analytic_social_jacobian(&s2, y))
    .with_margin(move |y: &[f64]| social_nonsmooth_margin(&s3, y).unwrap_or(0.0))
    .with_provenance(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_full(n: usize) -> NeighborhoodSystem {
        NeighborhoodSystem::new(vec![vec![1.0; n]; n]).unwrap()
    }

    #[test]
    fn wglasso_matches_group_lasso_when_windows_are_equal() {
        let spec = SocialShrinkageSpec::wglasso(unit_full(2), 1.0).unwrap();
        let out = eval_social(&spec, &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(out[0], 2.4, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 3.2, epsilon = 1e-15);
    }

    #[test]
    fn pew_with_disjoint_unit_weights_is_scalar_wiener() {
        let ns = NeighborhoodSystem::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let spec = SocialShrinkageSpec::pew(ns, 1.0).unwrap();
        let out = eval_social(&spec, &[2.0, 0.5]).unwrap();
        assert_abs_diff_eq!(out[0], 1.5, epsilon = 1e-15);
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn origin_maps_to_zero() {
        let spec = SocialShrinkageSpec::pew(unit_full(3), 0.5).unwrap();
        assert_eq!(eval_social(&spec, &[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn margin_values() {
        let one = NeighborhoodSystem::new(vec![vec![1.0]]).unwrap();
        let spec = SocialShrinkageSpec::wglasso(one, 1.0).unwrap();
        assert_eq!(social_nonsmooth_margin(&spec, &[1.0]).unwrap(), 0.0);
        assert_eq!(social_nonsmooth_margin(&spec, &[3.0]).unwrap(), 2.0);

        let spec2 = SocialShrinkageSpec::wglasso(unit_full(2), 5.0).unwrap();
        assert_eq!(social_nonsmooth_margin(&spec2, &[3.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn jacobian_zero_when_all_windows_dead() {
        let spec = SocialShrinkageSpec::wglasso(unit_full(2), 10.0).unwrap();
        let j = analytic_social_jacobian(&spec, &[0.5, 0.5]).unwrap();
        assert_eq!(j, DMatrix::zeros(2, 2));
    }

    #[test]
    fn jacobian_diagonal_for_singleton_neighborhoods() {
        let ns = NeighborhoodSystem::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let spec = SocialShrinkageSpec::pew(ns, 0.5).unwrap();
        let j = analytic_social_jacobian(&spec, &[2.0, 3.0, 0.1]).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                if i != k {
                    assert_eq!(j[(i, k)], 0.0);
                }
            }
        }
        assert!(j[(0, 0)] > 0.0);
        assert_eq!(j[(2, 2)], 0.0); // dead window
    }

    #[test]
    fn jacobian_errors_on_locus() {
        let one = NeighborhoodSystem::new(vec![vec![1.0]]).unwrap();
        let spec = SocialShrinkageSpec::wglasso(one, 1.0).unwrap();
        assert!(matches!(
            analytic_social_jacobian(&spec, &[1.0]),
            Err(Error::Locus { .. })
        ));
    }

    #[test]
    fn partition_for_block_weights() {
        let ns = NeighborhoodSystem::new(vec![
            vec![1.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let out = derive_partition(&ns);
        assert_eq!(out.classes, vec![vec![0, 1], vec![2]]);
        assert!(out.support_matches.iter().all(|m| *m));
        assert!(out.partition.is_some());
        assert!(out.violating_pair.is_none());
    }

    #[test]
    fn sliding_windows_have_no_partition() {
        let ns = NeighborhoodSystem::sliding_window(3, 1).unwrap();
        let out = derive_partition(&ns);
        assert!(out.partition.is_none());
        // N_0 = {0,1} and N_1 = {0,1,2} differ and overlap.
        assert_eq!(out.violating_pair, Some((0, 1)));
    }

    #[test]
    fn single_index_partition() {
        let ns = NeighborhoodSystem::new(vec![vec![1.0]]).unwrap();
        let out = derive_partition(&ns);
        assert_eq!(out.classes, vec![vec![0]]);
        assert!(out.partition.is_some());
    }

    #[test]
    fn system_validation() {
        // Index 1 missing from its own neighborhood.
        assert!(NeighborhoodSystem::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).is_err());
        assert!(NeighborhoodSystem::new(vec![vec![1.0, -0.5], vec![0.0, 1.0]]).is_err());
        assert!(SocialShrinkageSpec::wglasso(unit_full(2), 0.0).is_err());
    }

    #[test]
    fn neighborhoods_equal_weight_supports() {
        let ns = NeighborhoodSystem::sliding_window(4, 1).unwrap();
        for (i, nbh) in ns.neighborhoods().iter().enumerate() {
            let supp = support(ns.weight(i));
            assert_eq!(*nbh, supp);
        }
    }

    #[test]
    fn registry_profile_derivatives_never_vanish() {
        for spec in [
            SocialShrinkageSpec::wglasso(unit_full(1), 1.5).unwrap(),
            SocialShrinkageSpec::pew(unit_full(1), 1.5).unwrap(),
        ] {
            for k in 1..200 {
                let t = 0.05 * k as f64;
                assert!(spec.h_prime(t) > 0.0, "{} at t={t}", spec.profile.name());
            }
        }
    }
}
