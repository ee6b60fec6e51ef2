//! Verdict engine: decides "prox-compatible on the sampled region" versus
//! "certified not a proximity operator (witness attached)" versus
//! "inconclusive", and classifies the hidden penalty's convexity from the
//! Lipschitz estimate.
//!
//! A prox-compatible verdict means no refutation was found on the sampled
//! region; it is numerical evidence, not a proof. A not-prox verdict carries a
//! witness that re-validated (exactly, for analytic Jacobians, or at two step
//! sizes for finite differences) before the report is emitted.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numdiff::{default_step, fd_jacobian_of, lipschitz_estimate, spectral_verdict};
use crate::sample::{parallel_map_indexed, rng_for, sample_in_box};
use crate::shrinkage::operator::{BoxDomain, OperatorSpec};
use crate::shrinkage::social::{
    derive_partition, social_nonsmooth_margin, social_operator, SocialShrinkageSpec,
};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Adjacent decreases smaller than this are treated as rounding noise.
const MONOTONE_TOL: f64 = 1e-12;
/// Lipschitz slack below which the hidden penalty is declared convex.
const CONVEX_TOL: f64 = 1e-9;
/// Resampling attempts per requested sample before giving up on it.
const SAMPLE_ATTEMPTS: usize = 200;
/// Total random restarts of the asymmetry-witness search.
const WITNESS_RESTARTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ProxCompatible,
    NotProx,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum PenaltyClass {
    /// Nonexpansive map: the penalty can be chosen convex.
    Convex,
    /// L-Lipschitz with L > 1: `phi + (1 - 1/L) ||.||^2 / 2` is convex.
    WeaklyConvexShift { coefficient: f64 },
    Unknown,
}

/// A concrete refutation attached to a not-prox verdict.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Jacobian asymmetry at a point: entry (i, j) minus entry (j, i).
    Asymmetry {
        point: Vec<f64>,
        i: usize,
        j: usize,
        asym: f64,
    },
    /// Negative eigenvalue of the symmetrized Jacobian at a point.
    NegativeEigenvalue { point: Vec<f64>, min_eig: f64 },
    /// Adjacent decrease of a scalar operator on a grid.
    MonotoneDecrease {
        y: f64,
        y_next: f64,
        f_y: f64,
        f_y_next: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub sym_tol: f64,
    pub eig_tol: f64,
    pub monotone_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sym_tol: 1e-6,
            eig_tol: 1e-8,
            monotone_tol: MONOTONE_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub max_sym_defect: Option<f64>,
    pub min_eig: Option<f64>,
    pub lipschitz: Option<f64>,
    pub penalty_class: PenaltyClass,
    pub samples_used: usize,
    pub samples_skipped: usize,
    pub tolerances: Tolerances,
    pub seed: u64,
    /// Which field the Jacobian test ran on ("f" for the operator itself,
    /// composite labels for Bregman / linear-inverse fidelities).
    pub tested_field: String,
    pub tool_version: String,
}

impl CheckReport {
    fn empty(seed: u64, tolerances: Tolerances, tested_field: &str) -> Self {
        Self {
            verdict: Verdict::Inconclusive,
            witness: None,
            max_sym_defect: None,
            min_eig: None,
            lipschitz: None,
            penalty_class: PenaltyClass::Unknown,
            samples_used: 0,
            samples_skipped: 0,
            tolerances,
            seed,
            tested_field: tested_field.to_string(),
            tool_version: TOOL_VERSION.to_string(),
        }
    }
}

/// One-dimensional criterion: a scalar function is a proximity operator of
/// some penalty exactly when it is nondecreasing.
pub fn check_monotone_1d(
    op: &OperatorSpec,
    grid: usize,
    interval: &BoxDomain,
) -> Result<CheckReport> {
    if op.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: op.dim(),
            max: 1,
        });
    }
    if interval.dim() != 1 || !interval.is_finite() || !op.domain().contains_box(interval) {
        return Err(Error::Domain(
            "monotonicity check needs a finite interval inside the operator domain".into(),
        ));
    }
    if grid < 2 {
        return Err(Error::InvalidSpec("grid needs at least 2 points".into()));
    }
    let (lo, hi) = (interval.lower()[0], interval.upper()[0]);
    let mut report = CheckReport::empty(0, Tolerances::default(), "f");
    let mut prev_y = lo;
    let mut prev_f = op.eval(&[lo])?[0];
    report.verdict = Verdict::ProxCompatible;
    report.samples_used = 1;
    for k in 1..grid {
        let y = lo + (hi - lo) * (k as f64) / ((grid - 1) as f64);
        let f = op.eval(&[y])?[0];
        report.samples_used += 1;
        if f - prev_f < -MONOTONE_TOL {
            report.verdict = Verdict::NotProx;
            report.witness = Some(Witness::MonotoneDecrease {
                y: prev_y,
                y_next: y,
                f_y: prev_f,
                f_y_next: f,
            });
            break;
        }
        prev_y = y;
        prev_f = f;
    }
    Ok(report)
}

/// Borrowed view of a vector field, so composite fields (Bregman, linear
/// inverse) can run through the same sampling engine as plain operators.
pub(crate) type JacobianFn<'a> = &'a (dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Sync);

pub(crate) struct FieldView<'a> {
    pub n: usize,
    pub domain: &'a BoxDomain,
    pub eval: &'a (dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync),
    pub jacobian: Option<JacobianFn<'a>>,
    pub margin: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub label: &'a str,
}

struct AcceptedSample {
    point: Vec<f64>,
    matrix: DMatrix<f64>,
    analytic: bool,
    step: f64,
}

fn draw_sample(view: &FieldView<'_>, sample_box: &BoxDomain, seed: u64, k: u64) -> Option<AcceptedSample> {
    let mut rng = rng_for(seed, k);
    for _ in 0..SAMPLE_ATTEMPTS {
        let y = sample_in_box(&mut rng, sample_box);
        let step = default_step(&y);
        if (view.margin)(&y) <= 2.0 * step {
            continue;
        }
        if let Some(jac) = view.jacobian {
            match jac(&y) {
                Ok(matrix) if matrix.iter().all(|v| v.is_finite()) => {
                    return Some(AcceptedSample {
                        point: y,
                        matrix,
                        analytic: true,
                        step,
                    })
                }
                _ => continue,
            }
        }
        match fd_jacobian_of(view.n, view.domain, |p| (view.eval)(p), (view.margin)(&y), &y, step) {
            Ok(est) => {
                return Some(AcceptedSample {
                    point: y,
                    matrix: est.matrix,
                    analytic: false,
                    step,
                })
            }
            Err(_) => continue,
        }
    }
    None
}

/// True when a finite-difference violation persists at half the step size
/// with the defect magnitudes agreeing within a factor of two.
fn confirm_fd(first: f64, second: f64, tol: f64) -> bool {
    let (a, b) = (first.abs(), second.abs());
    second.abs() > tol && a <= 2.0 * b && b <= 2.0 * a
}

pub(crate) fn check_field_jacobian(
    view: &FieldView<'_>,
    samples: usize,
    sample_box: &BoxDomain,
    seed: u64,
    tols: Tolerances,
) -> Result<CheckReport> {
    if !sample_box.is_finite() || !view.domain.contains_box(sample_box) {
        return Err(Error::Domain(
            "Jacobian check needs a finite box inside the operator domain".into(),
        ));
    }
    let drawn = parallel_map_indexed(samples, |k| draw_sample(view, sample_box, seed, k as u64));

    let mut report = CheckReport::empty(seed, tols, view.label);
    let mut max_sym = f64::NEG_INFINITY;
    let mut min_eig = f64::INFINITY;
    let mut witness: Option<Witness> = None;

    for sample in &drawn {
        let Some(sample) = sample else {
            report.samples_skipped += 1;
            continue;
        };
        let v = spectral_verdict(&sample.matrix, tols.sym_tol, tols.eig_tol);
        let mut confirmed_matrix = None;
        if witness.is_none() && (!v.symmetry_ok() || !v.psd_ok()) {
            confirmed_matrix = confirm_violation(view, sample, &v, tols);
            if confirmed_matrix.is_none() {
                // Unconfirmed: near-locus noise, drop the sample entirely.
                report.samples_skipped += 1;
                continue;
            }
        }
        report.samples_used += 1;
        max_sym = max_sym.max(v.sym_defect);
        min_eig = min_eig.min(v.min_eig_sym);
        if witness.is_none() {
            if let Some(matrix) = confirmed_matrix {
                witness = Some(if !v.symmetry_ok() {
                    asymmetry_witness(&sample.point, &matrix)
                } else {
                    Witness::NegativeEigenvalue {
                        point: sample.point.clone(),
                        min_eig: v.min_eig_sym,
                    }
                });
            }
        }
    }

    if report.samples_used == 0 {
        report.verdict = Verdict::Inconclusive;
        return Ok(report);
    }
    report.max_sym_defect = Some(max_sym);
    report.min_eig = Some(min_eig);
    if let Some(w) = witness {
        report.verdict = Verdict::NotProx;
        report.witness = Some(w);
    } else {
        report.verdict = Verdict::ProxCompatible;
    }
    Ok(report)
}

/// Returns the certifying matrix when the violation stands up, None otherwise.
fn confirm_violation(
    view: &FieldView<'_>,
    sample: &AcceptedSample,
    v: &crate::numdiff::SpectralVerdict,
    tols: Tolerances,
) -> Option<DMatrix<f64>> {
    if sample.analytic {
        return Some(sample.matrix.clone());
    }
    let half = fd_jacobian_of(
        view.n,
        view.domain,
        |p| (view.eval)(p),
        (view.margin)(&sample.point),
        &sample.point,
        0.5 * sample.step,
    )
    .ok()?;
    let v2 = spectral_verdict(&half.matrix, tols.sym_tol, tols.eig_tol);
    let ok = if !v.symmetry_ok() {
        confirm_fd(v.sym_defect, v2.sym_defect, tols.sym_tol)
    } else {
        confirm_fd(v.min_eig_sym, v2.min_eig_sym, tols.eig_tol) && v2.min_eig_sym < 0.0
    };
    ok.then_some(half.matrix)
}

fn asymmetry_witness(point: &[f64], matrix: &DMatrix<f64>) -> Witness {
    let n = matrix.nrows();
    let (mut bi, mut bj, mut best) = (0, 0, 0.0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = matrix[(i, j)] - matrix[(j, i)];
            if a.abs() > best.abs() {
                best = a;
                bi = i;
                bj = j;
            }
        }
    }
    Witness::Asymmetry {
        point: point.to_vec(),
        i: bi,
        j: bj,
        asym: best,
    }
}

/// Sample margin-respecting points in the box; at each, test the Jacobian
/// (analytic when available, else central differences) for symmetry and
/// positive semi-definiteness.
pub fn check_jacobian_prox(
    op: &OperatorSpec,
    samples: usize,
    sample_box: &BoxDomain,
    seed: u64,
    tols: Tolerances,
) -> Result<CheckReport> {
    let eval = |p: &[f64]| op.eval(p);
    let jac = |p: &[f64]| {
        op.analytic_jacobian(p)
            .expect("jacobian closure present")
    };
    let margin = |p: &[f64]| op.nonsmooth_margin(p);
    let view = FieldView {
        n: op.dim(),
        domain: op.domain(),
        eval: &eval,
        jacobian: if op.has_analytic_jacobian() {
            Some(&jac)
        } else {
            None
        },
        margin: &margin,
        label: "f",
    };
    check_field_jacobian(&view, samples, sample_box, seed, tols)
}

/// Attach a Lipschitz estimate and classify the hidden penalty.
pub fn classify_penalty(report: CheckReport) -> Result<CheckReport> {
    if report.verdict != Verdict::ProxCompatible {
        return Err(Error::State(
            "penalty classification needs a prox_compatible verdict".into(),
        ));
    }
    let l = report
        .lipschitz
        .ok_or_else(|| Error::State("penalty classification needs a Lipschitz estimate".into()))?;
    let mut report = report;
    report.penalty_class = if l <= 1.0 + CONVEX_TOL {
        PenaltyClass::Convex
    } else {
        PenaltyClass::WeaklyConvexShift {
            coefficient: 1.0 - 1.0 / l,
        }
    };
    Ok(report)
}

/// Convenience pipeline: estimate the Lipschitz constant on the box, then
/// classify when the verdict allows it.
pub fn lipschitz_and_classify(
    op: &OperatorSpec,
    report: CheckReport,
    sample_box: &BoxDomain,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let mut report = report;
    report.lipschitz = Some(lipschitz_estimate(op, samples, sample_box, seed)?);
    if report.verdict == Verdict::ProxCompatible {
        report = classify_penalty(report)?;
    }
    Ok(report)
}

/// A certified Jacobian asymmetry of a social shrinkage operator: at `point`,
/// window `j` is below threshold and window `i` above, so entry (i, j) is
/// nonzero while entry (j, i) vanishes.
#[derive(Debug, Clone, Serialize)]
pub struct AsymmetryWitness {
    pub point: Vec<f64>,
    pub i: usize,
    pub j: usize,
    /// Analytic `∂f_i/∂y_j - ∂f_j/∂y_i` at the point.
    pub asym: f64,
    /// `||diag(w^j) point||` (strictly below the threshold).
    pub norm_below: f64,
    /// `||diag(w^i) point||` (strictly above the threshold).
    pub norm_above: f64,
}

/// Search for a point where two overlapping windows straddle the threshold,
/// making the Jacobian provably asymmetric. Returns None when the system
/// derives a genuine partition (no witness exists then).
///
/// The construction: pick an ordered pair (i, j) with `w^i_j > 0` and
/// `w^i != w^j`, find `y` whose weighted norms differ, rescale by
/// `2 lambda / (a + b)` to sandwich the threshold, then nudge coordinates so
/// `y_i y_j != 0`. Coordinate-sparse candidates are tried before random ones.
pub fn find_asymmetry_witness(
    spec: &SocialShrinkageSpec,
    pair: Option<(usize, usize)>,
    seed: u64,
) -> Option<AsymmetryWitness> {
    if derive_partition(&spec.system).partition.is_some() {
        return None;
    }
    let n = spec.dim();
    let ordered: Vec<(usize, usize)> = match pair {
        Some((i, j)) => vec![(i, j), (j, i)],
        None => (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .collect(),
    };
    let candidates: Vec<(usize, usize)> = ordered
        .into_iter()
        .filter(|&(i, j)| {
            i != j
                && i < n
                && j < n
                && spec.system.weight(i)[j] > 0.0
                && spec.system.weight(i) != spec.system.weight(j)
        })
        .collect();

    const TARGET_ASYM: f64 = 1e-3;
    let mut best: Option<AsymmetryWitness> = None;
    let mut restarts = WITNESS_RESTARTS;
    for &(i, j) in &candidates {
        let mut rng = rng_for(seed, (i * n + j) as u64);
        let mut bases: Vec<Vec<f64>> = Vec::new();
        for l in 0..n {
            if spec.system.weight(i)[l] > spec.system.weight(j)[l] {
                let mut e = vec![0.0; n];
                e[l] = 1.0;
                bases.push(e);
            }
        }
        let budget = restarts.min(WITNESS_RESTARTS / candidates.len().max(1)).max(50);
        let budget = budget.min(restarts);
        restarts -= budget;
        for _ in 0..budget {
            bases.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        }
        for base in &bases {
            if let Some(w) = rescale_to_witness(spec, i, j, base) {
                if w.asym.abs() >= TARGET_ASYM {
                    return Some(w);
                }
                if best
                    .as_ref()
                    .is_none_or(|b| w.asym.abs() > b.asym.abs())
                {
                    best = Some(w);
                }
            }
        }
        if restarts == 0 {
            break;
        }
    }
    best
}

fn rescale_to_witness(
    spec: &SocialShrinkageSpec,
    i: usize,
    j: usize,
    base: &[f64],
) -> Option<AsymmetryWitness> {
    let a0 = spec.weighted_sumsq(j, base).sqrt();
    let b0 = spec.weighted_sumsq(i, base).sqrt();
    if a0 >= b0 || (b0 - a0) <= 1e-9 * (a0 + b0) {
        return None;
    }
    let c = 2.0 * spec.lambda / (a0 + b0);
    let mut y: Vec<f64> = base.iter().map(|v| c * v).collect();

    // Nudge y_i and y_j off zero without leaving the sandwich.
    let gap = (spec.lambda - c * a0).min(c * b0 - spec.lambda);
    let wmax = spec
        .system
        .weights()
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(*v));
    let eps = gap / (8.0 * (1.0 + wmax));
    if y[i] == 0.0 {
        y[i] = eps;
    }
    if y[j] == 0.0 {
        y[j] = eps;
    }

    let a = spec.weighted_sumsq(j, &y).sqrt();
    let s_i = spec.weighted_sumsq(i, &y);
    let b = s_i.sqrt();
    if !(a < spec.lambda && spec.lambda < b) {
        return None;
    }
    // Keep clear of every threshold sphere so finite differences can confirm.
    let margin = social_nonsmooth_margin(spec, &y).ok()?;
    if margin <= 1e-6 * spec.lambda.max(1.0) {
        return None;
    }
    let wij = spec.system.weight(i)[j];
    let asym = 2.0 * wij * wij * y[i] * y[j] * spec.h_prime(s_i);
    if asym == 0.0 {
        return None;
    }
    Some(AsymmetryWitness {
        point: y,
        i,
        j,
        asym,
        norm_below: a,
        norm_above: b,
    })
}

/// Central-difference value of `∂f_i/∂y_j - ∂f_j/∂y_i` at the witness point.
pub fn social_asymmetry_fd(spec: &SocialShrinkageSpec, w: &AsymmetryWitness) -> Result<f64> {
    let op = social_operator(spec.clone());
    let margin = social_nonsmooth_margin(spec, &w.point)?;
    let step = default_step(&w.point).min(margin / 8.0);
    let est = crate::numdiff::fd_jacobian(&op, &w.point, step)?;
    Ok(est.matrix[(w.i, w.j)] - est.matrix[(w.j, w.i)])
}

/// A sampled penalty on a finite grid of points in dimension 1 or 2;
/// +infinity marks points outside the image of the operator.
#[derive(Debug, Clone)]
pub struct PenaltyGrid {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    dim: usize,
}

impl PenaltyGrid {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid("penalty grid has no points".into()));
        }
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: values.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 || dim > 2 {
            return Err(Error::UnsupportedDimension { got: dim, max: 2 });
        }
        for p in &points {
            if p.len() != dim || p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec("grid points must be finite".into()));
            }
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidSpec("penalty values must not be NaN".into()));
        }
        Ok(Self { points, values, dim })
    }

    pub fn from_1d(xs: &[f64], phis: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|x| vec![*x]).collect(), phis.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Result of the exhaustive prox search on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct ProxArgmin {
    /// Lexicographically smallest minimizer.
    pub argmin: Vec<f64>,
    pub objective: f64,
    /// All minimizers within the tie tolerance, sorted lexicographically.
    pub ties: Vec<Vec<f64>>,
}

/// Exhaustively minimize `1/2 ||y - x||^2 + phi(x)` over the grid. Defines
/// what the operator under test must reproduce.
pub fn brute_force_prox_oracle(grid: &PenaltyGrid, y: &[f64]) -> Result<ProxArgmin> {
    if y.len() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            got: y.len(),
        });
    }
    let objective = |p: &[f64], phi: f64| -> f64 {
        let d2: f64 = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * d2 + phi
    };
    let mut best = f64::INFINITY;
    for (p, phi) in grid.points.iter().zip(&grid.values) {
        if phi.is_finite() {
            best = best.min(objective(p, *phi));
        }
    }
    if !best.is_finite() {
        return Err(Error::EmptyGrid("no finite penalty value on the grid".into()));
    }
    let tie_tol = 1e-9 * best.abs().max(1.0);
    let mut ties: Vec<Vec<f64>> = grid
        .points
        .iter()
        .zip(&grid.values)
        .filter(|(_, phi)| phi.is_finite())
        .filter(|(p, phi)| objective(p, **phi) <= best + tie_tol)
        .map(|(p, _)| p.clone())
        .collect();
    ties.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.partial_cmp(y).expect("grid points are finite"))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(ProxArgmin {
        argmin: ties[0].clone(),
        objective: best,
        ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinkage::group::{group_lasso_operator, GroupStructure};
    use crate::shrinkage::operator::{identity_operator, rotation_operator};
    use crate::shrinkage::scalar::{scalar_operator, ScalarRule};
    use crate::shrinkage::social::NeighborhoodSystem;
    use approx::assert_abs_diff_eq;

    #[test]
    fn monotone_hard_and_quantizer_pass() {
        let hard = scalar_operator(ScalarRule::hard(2.0).unwrap());
        let b = BoxDomain::cube(1, -5.0, 5.0).unwrap();
        let r = check_monotone_1d(&hard, 10_000, &b).unwrap();
        assert_eq!(r.verdict, Verdict::ProxCompatible);

        let q = scalar_operator(ScalarRule::uniform_quantizer(4).unwrap());
        let qb = BoxDomain::new(vec![0.0], vec![0.999_999]).unwrap();
        let r = check_monotone_1d(&q, 5_000, &qb).unwrap();
        assert_eq!(r.verdict, Verdict::ProxCompatible);
    }

    #[test]
    fn monotone_rejects_sine() {
        let sine = OperatorSpec::new(1, BoxDomain::unbounded(1), |y| vec![y[0].sin()]);
        let b = BoxDomain::new(vec![0.0], vec![2.0 * std::f64::consts::PI]).unwrap();
        let r = check_monotone_1d(&sine, 10_000, &b).unwrap();
        assert_eq!(r.verdict, Verdict::NotProx);
        match r.witness.unwrap() {
            Witness::MonotoneDecrease { y, .. } => {
                assert!(y > std::f64::consts::FRAC_PI_2 - 0.01 && y < 3.0 * std::f64::consts::FRAC_PI_2);
            }
            w => panic!("unexpected witness {w:?}"),
        }
    }

    #[test]
    fn jacobian_check_accepts_group_lasso() {
        let gs = GroupStructure::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let op = group_lasso_operator(gs, 1.0);
        let b = BoxDomain::cube(4, -3.0, 3.0).unwrap();
        let r = check_jacobian_prox(&op, 100, &b, 7, Tolerances::default()).unwrap();
        assert_eq!(r.verdict, Verdict::ProxCompatible);
        assert!(r.max_sym_defect.unwrap() < 1e-6);
        assert!(r.min_eig.unwrap() >= -1e-8);
    }

    #[test]
    fn jacobian_check_accepts_identity() {
        let op = identity_operator(3);
        let b = BoxDomain::cube(3, -2.0, 2.0).unwrap();
        let r = check_jacobian_prox(&op, 50, &b, 1, Tolerances::default()).unwrap();
        assert_eq!(r.verdict, Verdict::ProxCompatible);
        assert_eq!(r.max_sym_defect.unwrap(), 0.0);
        assert_abs_diff_eq!(r.min_eig.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_check_rejects_rotation() {
        let op = rotation_operator();
        let b = BoxDomain::cube(2, -2.0, 2.0).unwrap();
        let r = check_jacobian_prox(&op, 20, &b, 3, Tolerances::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotProx);
        assert!(matches!(r.witness, Some(Witness::Asymmetry { .. })));
    }

    #[test]
    fn jacobian_check_rejects_wglasso_sliding_windows() {
        let ns = NeighborhoodSystem::sliding_window(3, 1).unwrap();
        let spec = SocialShrinkageSpec::wglasso(ns, 1.0).unwrap();
        let op = social_operator(spec);
        let b = BoxDomain::cube(3, -3.0, 3.0).unwrap();
        let r = check_jacobian_prox(&op, 200, &b, 7, Tolerances::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotProx);
    }

    #[test]
    fn fd_only_field_still_rejects_rotation() {
        let op = OperatorSpec::new(2, BoxDomain::unbounded(2), |y| vec![-y[1], y[0]]);
        let b = BoxDomain::cube(2, -2.0, 2.0).unwrap();
        let r = check_jacobian_prox(&op, 20, &b, 5, Tolerances::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotProx);
    }

    #[test]
    fn classify_soft_and_scaled() {
        let b = BoxDomain::cube(1, -5.0, 5.0).unwrap();
        let soft = scalar_operator(ScalarRule::soft(1.0).unwrap());
        let r = check_monotone_1d(&soft, 1000, &b).unwrap();
        let r = lipschitz_and_classify(&soft, r, &b, 1000, 42).unwrap();
        assert_eq!(r.penalty_class, PenaltyClass::Convex);

        let scaled = scalar_operator(ScalarRule::scaled_soft(2.0).unwrap());
        let r = check_monotone_1d(&scaled, 1000, &b).unwrap();
        let r = lipschitz_and_classify(&scaled, r, &b, 1000, 42).unwrap();
        match r.penalty_class {
            PenaltyClass::WeaklyConvexShift { coefficient } => {
                assert_abs_diff_eq!(coefficient, 0.5, epsilon = 1e-9)
            }
            c => panic!("unexpected class {c:?}"),
        }
    }

    #[test]
    fn classify_requires_prox_compatible() {
        let rot = rotation_operator();
        let b = BoxDomain::cube(2, -2.0, 2.0).unwrap();
        let r = check_jacobian_prox(&rot, 20, &b, 3, Tolerances::default()).unwrap();
        assert!(matches!(classify_penalty(r), Err(Error::State(_))));
    }

    #[test]
    fn witness_for_sliding_windows_satisfies_sandwich() {
        for profile in ["wglasso", "pew"] {
            let ns = NeighborhoodSystem::sliding_window(3, 1).unwrap();
            let spec = if profile == "wglasso" {
                SocialShrinkageSpec::wglasso(ns, 1.0).unwrap()
            } else {
                SocialShrinkageSpec::pew(ns, 1.0).unwrap()
            };
            let w = find_asymmetry_witness(&spec, None, 7).expect("witness must exist");
            assert!(w.norm_below < 1.0 && 1.0 < w.norm_above, "{profile}: sandwich");
            assert!(w.point[w.i] * w.point[w.j] != 0.0);
            assert!(w.asym.abs() > 1e-3, "{profile}: asym {}", w.asym);
            let fd = social_asymmetry_fd(&spec, &w).unwrap();
            assert!(
                (fd - w.asym).abs() <= 1e-6 * w.asym.abs().max(1.0),
                "{profile}: fd {} vs analytic {}",
                fd,
                w.asym
            );
        }
    }

    #[test]
    fn witness_absent_for_disjoint_blocks() {
        let gs = GroupStructure::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let ns = NeighborhoodSystem::from_groups(&gs).unwrap();
        let spec = SocialShrinkageSpec::wglasso(ns, 1.0).unwrap();
        assert!(find_asymmetry_witness(&spec, None, 7).is_none());
    }

    #[test]
    fn witness_for_pew_partial_overlap() {
        // N_0 = {0,1}, N_1 = {1}: different neighborhoods sharing index 1.
        let ns = NeighborhoodSystem::new(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let spec = SocialShrinkageSpec::pew(ns, 1.0).unwrap();
        let w = find_asymmetry_witness(&spec, None, 11).expect("witness must exist");
        let fd = social_asymmetry_fd(&spec, &w).unwrap();
        assert!((fd - w.asym).abs() <= 1e-6 * w.asym.abs().max(1.0));
    }

    #[test]
    fn oracle_zero_penalty_is_identity() {
        let xs: Vec<f64> = (0..=10_000).map(|k| -5.0 + k as f64 * 1e-3).collect();
        let phis = vec![0.0; xs.len()];
        let grid = PenaltyGrid::from_1d(&xs, &phis).unwrap();
        let out = brute_force_prox_oracle(&grid, &[0.37]).unwrap();
        assert!((out.argmin[0] - 0.37).abs() <= 1e-3 + 1e-12);
    }

    #[test]
    fn oracle_weighted_l0_branches_and_ties() {
        // phi(0) = 0 and lambda = 2 elsewhere, on a grid containing 0 and 2.
        let xs: Vec<f64> = (0..=10_000).map(|k| -5.0 + k as f64 * 1e-3).collect();
        let phis: Vec<f64> = xs.iter().map(|x| if *x == 0.0 { 0.0 } else { 2.0 }).collect();
        let grid = PenaltyGrid::from_1d(&xs, &phis).unwrap();

        let below = brute_force_prox_oracle(&grid, &[1.5]).unwrap();
        assert_eq!(below.argmin, vec![0.0]);

        let tie = brute_force_prox_oracle(&grid, &[2.0]).unwrap();
        assert_eq!(tie.ties, vec![vec![0.0], vec![2.0]]);
        assert_eq!(tie.argmin, vec![0.0]);
    }

    #[test]
    fn oracle_reproduces_soft_thresholding_from_its_penalty() {
        // Independent route: phi(x) = lambda |x| in closed form, no
        // reconstruction involved.
        let lambda = 1.0;
        let xs: Vec<f64> = (0..=10_000).map(|k| -5.0 + k as f64 * 1e-3).collect();
        let phis: Vec<f64> = xs.iter().map(|x| lambda * x.abs()).collect();
        let grid = PenaltyGrid::from_1d(&xs, &phis).unwrap();
        let rule = ScalarRule::soft(lambda).unwrap();
        for k in 0..100u64 {
            let mut rng = rng_for(31, k);
            let y = rng.gen_range(-4.0..4.0);
            let expected = crate::shrinkage::scalar::eval_scalar(&rule, y).unwrap();
            let out = brute_force_prox_oracle(&grid, &[y]).unwrap();
            assert!(
                (out.argmin[0] - expected).abs() <= 1e-3 + 1e-12,
                "y={y}: oracle {} vs soft {expected}",
                out.argmin[0]
            );
        }
    }

    #[test]
    fn oracle_rejects_bad_grids() {
        assert!(PenaltyGrid::from_1d(&[], &[]).is_err());
        let grid = PenaltyGrid::from_1d(&[0.0, 1.0], &[f64::INFINITY, f64::INFINITY]).unwrap();
        assert!(matches!(
            brute_force_prox_oracle(&grid, &[0.5]),
            Err(Error::EmptyGrid(_))
        ));
    }
}
