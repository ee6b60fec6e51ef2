//! Recovery of the convex potential by line integration of the field, of the
//! penalty on the operator's image, of the penalty gradient through inversion,
//! and midpoint convexity audits.
//!
//! All functions fix additive constants by the convention psi(base) = 0 with
//! the matching zero constant in the penalty formula; constants are only
//! meaningful within one connected component of the sample region.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numdiff::default_step;
use crate::sample::{rng_for, sample_in_box};
use crate::shrinkage::operator::{BoxDomain, OperatorSpec};

/// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Panels narrower than this are accepted as-is; bounded jumps of the
/// integrand end up isolated in panels of this width.
const MIN_PANEL_WIDTH: f64 = 1e-12;

fn gl5<F: FnMut(f64) -> Result<f64>>(g: &mut F, a: f64, b: f64) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (node, weight) in GL5_NODES.iter().zip(&GL5_WEIGHTS) {
        acc += weight * g(mid + half * node)?;
    }
    Ok(half * acc)
}

fn adaptive<F: FnMut(f64) -> Result<f64>>(
    g: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    tol_density: f64,
    parent_agreed: bool,
) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = gl5(g, a, mid)?;
    let right = gl5(g, mid, b)?;
    let refined = left + right;
    // A single-level agreement can be a coincidence when a kink or jump hides
    // between a panel edge and the first quadrature node; accept only after
    // two consecutive levels agree.
    let agreed = (refined - whole).abs() <= tol_density * (b - a);
    // Kink guard via second differences at the quarter points: for a smooth
    // integrand the three windows carry comparable curvature mass O(g'' w^2),
    // while a kink or jump inflates the window containing it.
    let w = b - a;
    let (ga, q1, gm, q3, gb) = (
        g(a)?,
        g(a + 0.25 * w)?,
        g(mid)?,
        g(a + 0.75 * w)?,
        g(b)?,
    );
    let d1 = (ga - 2.0 * q1 + gm).abs();
    let d2 = (q1 - 2.0 * gm + q3).abs();
    let d3 = (gm - 2.0 * q3 + gb).abs();
    let floor = 8.0 * tol_density + 1e-13 * (ga.abs() + gm.abs() + gb.abs());
    let smooth = d1.max(d2).max(d3) <= 4.0 * d1.min(d2).min(d3) + floor;
    if (agreed && parent_agreed && smooth) || w <= MIN_PANEL_WIDTH {
        return Ok(refined);
    }
    Ok(adaptive(g, a, mid, left, tol_density, agreed)?
        + adaptive(g, mid, b, right, tol_density, agreed)?)
}

/// Locate parameters where the operator's nonsmooth margin dips to zero along
/// the segment: these are the threshold crossings where the integrand kinks
/// or jumps. Scan coarsely, then refine each dip by ternary search.
fn locate_margin_dips<M: Fn(f64) -> f64>(margin: &M, scans: usize, cap: usize) -> Vec<f64> {
    let h = 1.0 / scans as f64;
    let vals: Vec<f64> = (0..=scans).map(|k| margin(k as f64 * h)).collect();
    if vals.iter().all(|v| v.is_infinite()) {
        return Vec::new();
    }
    let max_slope = vals
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0f64, f64::max)
        / h;
    let thresh = 3.0 * max_slope * h + 1e-12;
    let mut dips = Vec::new();
    for k in 1..scans {
        if vals[k] <= vals[k - 1] && vals[k] <= vals[k + 1] && vals[k] < thresh {
            let (mut lo, mut hi) = ((k - 1) as f64 * h, (k + 1) as f64 * h);
            for _ in 0..80 {
                let t1 = lo + (hi - lo) / 3.0;
                let t2 = hi - (hi - lo) / 3.0;
                if margin(t1) <= margin(t2) {
                    hi = t2;
                } else {
                    lo = t1;
                }
            }
            let t = 0.5 * (lo + hi);
            let fresh = dips.last().is_none_or(|p: &f64| (t - p).abs() > 1e-10);
            if t > 1e-12 && t < 1.0 - 1e-12 && fresh {
                dips.push(t);
            }
            if dips.len() >= cap {
                break;
            }
        }
    }
    dips
}

/// Integrate a scalar function on [0, 1], cutting the interval at the
/// detected kink parameters and refining panels whose halves disagree.
fn integrate_01<F, M>(g: &mut F, margin: &M, panels: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
    M: Fn(f64) -> f64,
{
    let panels = panels.max(1);
    let mut cuts = vec![0.0];
    cuts.extend(locate_margin_dips(margin, 1024, 64));
    cuts.push(1.0);

    let mut panel_bounds = Vec::new();
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let count = ((hi - lo) * panels as f64).ceil().max(1.0) as usize;
        for k in 0..count {
            let a = lo + (hi - lo) * k as f64 / count as f64;
            let b = lo + (hi - lo) * (k + 1) as f64 / count as f64;
            panel_bounds.push((a, b));
        }
    }

    let mut rough = 0.0;
    for &(a, b) in &panel_bounds {
        rough += gl5(g, a, b)?;
    }
    let tol_density = 1e-12 * rough.abs().max(1.0);
    let mut total = 0.0;
    for &(a, b) in &panel_bounds {
        let whole = gl5(g, a, b)?;
        total += adaptive(g, a, b, whole, tol_density, false)?;
    }
    Ok(total)
}

/// `psi(y) - psi(y0)` as the line integral of `<f, dy>` along the segment
/// `[y0, y]`; with the convention psi(y0) = 0 this is the potential itself.
pub fn potential_line_integral(
    op: &OperatorSpec,
    y0: &[f64],
    y: &[f64],
    quadrature_nodes: usize,
) -> Result<f64> {
    if !op.domain().contains(y0) || !op.domain().contains(y) {
        return Err(Error::Domain(
            "line integral endpoints must lie in the operator domain".into(),
        ));
    }
    let dir: Vec<f64> = y.iter().zip(y0).map(|(a, b)| a - b).collect();
    if dir.iter().all(|d| *d == 0.0) {
        return Ok(0.0);
    }
    let segment_point = |t: f64| -> Vec<f64> {
        let p: Vec<f64> = y0.iter().zip(&dir).map(|(base, d)| base + t * d).collect();
        // Round coordinates back into the box if t*d overshot by one ulp.
        if op.domain().contains(&p) {
            p
        } else {
            op.domain().clamp(&p)
        }
    };
    let mut g = |t: f64| -> Result<f64> {
        let f = op.eval(&segment_point(t))?;
        Ok(f.iter().zip(&dir).map(|(a, b)| a * b).sum())
    };
    let margin = |t: f64| op.nonsmooth_margin(&segment_point(t));
    integrate_01(&mut g, &margin, quadrature_nodes)
}

/// Absolute difference between the straight-path integral `y0 -> y` and the
/// two-leg integral `y0 -> via -> y`. Conservative fields give zero; a large
/// value refutes prox-ness independently of any Jacobian test.
pub fn path_independence_defect(
    op: &OperatorSpec,
    y0: &[f64],
    y: &[f64],
    via: &[f64],
) -> Result<f64> {
    let nodes = 8;
    let direct = potential_line_integral(op, y0, y, nodes)?;
    let leg1 = potential_line_integral(op, y0, via, nodes)?;
    let leg2 = potential_line_integral(op, via, y, nodes)?;
    Ok((direct - (leg1 + leg2)).abs())
}

/// Convert a potential value into a penalty value on the image:
/// `x = f(y)` and `phi(x) = <y, x> - ||x||^2/2 - psi(y)`.
pub fn penalty_from_potential(
    op: &OperatorSpec,
    y: &[f64],
    psi_y: f64,
) -> Result<(Vec<f64>, f64)> {
    let x = op.eval(y)?;
    let inner: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
    let xsq: f64 = x.iter().map(|v| v * v).sum();
    Ok((x, inner - 0.5 * xsq - psi_y))
}

/// Solve `f(y) = x` by damped Newton from the initial guess `y = x`. When
/// that start sits in a flat region (shrinkage dead zone), retry from points
/// shifted outward along the sign pattern of `x`, where shrinkage preimages
/// live.
pub fn invert_field(op: &OperatorSpec, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut last = None;
    for t in [0.0, 0.5, 1.0, -0.5, 2.0, -1.0, 4.0] {
        let start: Vec<f64> = x
            .iter()
            .map(|v| v + t * scale * if *v < 0.0 { -1.0 } else { 1.0 })
            .collect();
        match invert_field_from(op, x, &start, tol) {
            Ok(y) => return Ok(y),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one start attempted"))
}

/// Same, with an explicit starting point.
pub fn invert_field_from(
    op: &OperatorSpec,
    x: &[f64],
    start: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let n = op.dim();
    if x.len() != n || start.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len().max(start.len()),
        });
    }
    let mut y = op.domain().clamp(start);
    let residual = |p: &[f64]| -> Result<(Vec<f64>, f64)> {
        let f = op.eval(p)?;
        let r: Vec<f64> = f.iter().zip(x).map(|(a, b)| a - b).collect();
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok((r, norm))
    };
    let (mut r, mut rn) = residual(&y)?;
    // Damped Newton with a ridge fallback: the ridge walks the iterate out of
    // flat regions (shrinkage dead zones) where the Jacobian is singular.
    let mut ridge = 0.0f64;
    for _ in 0..100 {
        if rn <= tol {
            return Ok(y);
        }
        let jac = jacobian_for_inversion(op, &y)?;
        let rhs = nalgebra::DVector::from_iterator(n, r.iter().map(|v| -v));
        let system = if ridge > 0.0 {
            &jac + DMatrix::identity(n, n) * ridge
        } else {
            jac.clone()
        };
        let delta = match system.lu().solve(&rhs) {
            Some(d) => d,
            None => {
                ridge = (10.0 * ridge).max(1e-8);
                continue;
            }
        };
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = y
                .iter()
                .zip(delta.iter())
                .map(|(a, d)| a + alpha * d)
                .collect();
            let trial = op.domain().clamp(&trial);
            match residual(&trial) {
                Ok((rt, rtn)) if rtn < rn => {
                    y = trial;
                    r = rt;
                    rn = rtn;
                    improved = true;
                    ridge *= 0.25;
                    if ridge < 1e-14 {
                        ridge = 0.0;
                    }
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        if !improved {
            let next = (10.0 * ridge).max(1e-8);
            if next > 1e8 {
                return Err(Error::NoInverse(format!(
                    "stalled at residual {rn:e} (target image point may be outside the range)"
                )));
            }
            ridge = next;
        }
    }
    if rn <= tol {
        Ok(y)
    } else {
        Err(Error::NoInverse(format!(
            "residual {rn:e} above tolerance {tol:e} after budget"
        )))
    }
}

/// Analytic Jacobian when available; central differences otherwise, nudging
/// off nonsmooth loci when the margin is too tight for the stencil.
fn jacobian_for_inversion(op: &OperatorSpec, y: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
    if let Some(Ok(m)) = op.analytic_jacobian(y) {
        return Ok(m);
    }
    let mut point = y.to_vec();
    let mut step = default_step(y);
    for _ in 0..8 {
        match crate::numdiff::fd_jacobian(op, &point, step) {
            Ok(est) => return Ok(est.matrix),
            Err(Error::Locus { .. }) => {
                // Step across the locus band.
                for p in point.iter_mut() {
                    *p += 3.0 * step;
                }
                point = op.domain().clamp(&point);
            }
            Err(Error::Domain(_)) => {
                step *= 0.25;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoInverse("no differentiable point near iterate".into()))
}

/// `grad phi(x) = f^{-1}(x) - x` at interior image points where the field is
/// locally invertible.
pub fn penalty_gradient(op: &OperatorSpec, x: &[f64], inverse_solver_tol: f64) -> Result<Vec<f64>> {
    let y = invert_field(op, x, inverse_solver_tol)?;
    Ok(y.iter().zip(x).map(|(a, b)| a - b).collect())
}

/// Worst midpoint convexity defect `fn((a+b)/2) - (fn(a)+fn(b))/2` over seeded
/// pairs in the box. Positive beyond tolerance refutes convexity; convex
/// functions stay <= 0 up to evaluation error.
pub fn convexity_audit<F>(f: F, sample_box: &BoxDomain, pairs: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !sample_box.is_finite() {
        return Err(Error::Domain("convexity audit needs a finite box".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    for k in 0..pairs {
        let mut rng = rng_for(seed, k as u64);
        let a = sample_in_box(&mut rng, sample_box);
        let b = sample_in_box(&mut rng, sample_box);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let defect = f(&mid)? - 0.5 * (f(&a)? + f(&b)?);
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// One reconstructed sample: the input point, its image, the potential value,
/// the penalty value at the image point, and the connected-component label of
/// the image point (constants are not comparable across components).
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionRow {
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    pub psi: f64,
    pub phi: f64,
    pub component: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionResult {
    pub base_point: Vec<f64>,
    pub rows: Vec<ReconstructionRow>,
}

/// Base-point convention: the origin when the domain contains it, otherwise
/// the box center.
pub fn default_base_point(domain: &BoxDomain) -> Vec<f64> {
    let zero = vec![0.0; domain.dim()];
    if domain.contains(&zero) {
        zero
    } else {
        domain.center_or_zero()
    }
}

/// Reconstruct psi and phi over a set of query points, with psi(base) = 0.
pub fn reconstruct_on_grid(
    op: &OperatorSpec,
    points: &[Vec<f64>],
    quadrature_nodes: usize,
) -> Result<ReconstructionResult> {
    let base = default_base_point(op.domain());
    let mut rows = Vec::with_capacity(points.len());
    for y in points {
        let psi = potential_line_integral(op, &base, y, quadrature_nodes)?;
        let (x, phi) = penalty_from_potential(op, y, psi)?;
        rows.push(ReconstructionRow {
            y: y.clone(),
            f: x,
            psi,
            phi,
            component: 0,
        });
    }
    if op.dim() == 1 {
        label_components_1d(&mut rows);
    }
    Ok(ReconstructionResult {
        base_point: base,
        rows,
    })
}

/// Split sorted 1-d image points into components wherever the gap dwarfs the
/// typical spacing; discontinuous scalar rules produce several components.
fn label_components_1d(rows: &mut [ReconstructionRow]) {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].f[0].partial_cmp(&rows[b].f[0]).unwrap());
    let mut gaps: Vec<f64> = order
        .windows(2)
        .map(|w| rows[w[1]].f[0] - rows[w[0]].f[0])
        .collect();
    if gaps.is_empty() {
        return;
    }
    let mut sorted_gaps = gaps.clone();
    sorted_gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted_gaps[sorted_gaps.len() / 2];
    let threshold = (10.0 * median).max(1e-9);
    let mut label = 0usize;
    rows[order[0]].component = 0;
    for (k, gap) in gaps.drain(..).enumerate() {
        if gap > threshold {
            label += 1;
        }
        rows[order[k + 1]].component = label;
    }
}

/// An evaluatable reconstructed penalty: inverts the field at the query point,
/// integrates the potential from the base point, and applies the conversion
/// formula. Only valid on the image of the operator.
pub fn penalty_evaluator<'a>(
    op: &'a OperatorSpec,
    base: Vec<f64>,
    newton_tol: f64,
    quadrature_nodes: usize,
) -> impl Fn(&[f64]) -> Result<f64> + 'a {
    move |x: &[f64]| {
        let y = invert_field(op, x, newton_tol)?;
        let psi = potential_line_integral(op, &base, &y, quadrature_nodes)?;
        let inner: f64 = y.iter().zip(x).map(|(a, b)| a * b).sum();
        let xsq: f64 = x.iter().map(|v| v * v).sum();
        Ok(inner - 0.5 * xsq - psi)
    }
}

/// The auxiliary convex function `g(x) = ||x||^2/2 + phi(x)` on the image;
/// convex on convex subsets of the image even when the penalty is not.
pub fn g_evaluator<'a>(
    op: &'a OperatorSpec,
    base: Vec<f64>,
    newton_tol: f64,
    quadrature_nodes: usize,
) -> impl Fn(&[f64]) -> Result<f64> + 'a {
    let phi = penalty_evaluator(op, base, newton_tol, quadrature_nodes);
    move |x: &[f64]| {
        let xsq: f64 = x.iter().map(|v| v * v).sum();
        Ok(0.5 * xsq + phi(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinkage::group::{group_lasso_operator, GroupStructure};
    use crate::shrinkage::operator::identity_operator;
    use crate::shrinkage::scalar::{scalar_operator, ScalarRule};
    use approx::assert_abs_diff_eq;

    #[test]
    fn hard_threshold_potential() {
        let op = scalar_operator(ScalarRule::hard(2.0).unwrap());
        let psi3 = potential_line_integral(&op, &[0.0], &[3.0], 8).unwrap();
        assert_abs_diff_eq!(psi3, 2.5, epsilon = 1e-9);
        let psi1 = potential_line_integral(&op, &[0.0], &[1.0], 8).unwrap();
        assert_abs_diff_eq!(psi1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_potential_is_half_square() {
        let op = identity_operator(3);
        let y = [1.0, -2.0, 0.5];
        let psi = potential_line_integral(&op, &[0.0; 3], &y, 8).unwrap();
        let expect = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
        assert_abs_diff_eq!(psi, expect, epsilon = 1e-12);
    }

    #[test]
    fn scaled_soft_potential() {
        let op = scalar_operator(ScalarRule::scaled_soft(2.0).unwrap());
        let psi = potential_line_integral(&op, &[0.0], &[3.0], 8).unwrap();
        assert_abs_diff_eq!(psi, 4.0, epsilon = 1e-10);
    }

    #[test]
    fn rotation_path_defect_is_enclosed_area_discrepancy() {
        let op = crate::shrinkage::operator::rotation_operator();
        let defect = path_independence_defect(&op, &[0.0, 0.0], &[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(defect, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn one_dimensional_paths_coincide() {
        let op = scalar_operator(ScalarRule::soft(1.0).unwrap());
        let defect = path_independence_defect(&op, &[-2.0], &[3.0], &[5.0]).unwrap();
        assert!(defect < 1e-9);
    }

    #[test]
    fn penalty_values_from_potential() {
        let scaled = scalar_operator(ScalarRule::scaled_soft(2.0).unwrap());
        let psi = potential_line_integral(&scaled, &[0.0], &[3.0], 8).unwrap();
        let (x, phi) = penalty_from_potential(&scaled, &[3.0], psi).unwrap();
        assert_eq!(x, vec![4.0]);
        assert_abs_diff_eq!(phi, 0.0, epsilon = 1e-9);

        let hard = scalar_operator(ScalarRule::hard(2.0).unwrap());
        let psi = potential_line_integral(&hard, &[0.0], &[3.0], 8).unwrap();
        let (x, phi) = penalty_from_potential(&hard, &[3.0], psi).unwrap();
        assert_eq!(x, vec![3.0]);
        assert_abs_diff_eq!(phi, 2.0, epsilon = 1e-9);

        let id = identity_operator(2);
        let (_, phi) = penalty_from_potential(&id, &[1.0, 2.0], 2.5).unwrap();
        assert_abs_diff_eq!(phi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn penalty_gradient_examples() {
        let scaled = scalar_operator(ScalarRule::scaled_soft(2.0).unwrap());
        let g = penalty_gradient(&scaled, &[4.0], 1e-12).unwrap();
        assert_abs_diff_eq!(g[0], -1.0, epsilon = 1e-9);

        let id = identity_operator(2);
        let g = penalty_gradient(&id, &[0.3, -0.7], 1e-12).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));

        let gs = GroupStructure::new(2, vec![vec![0, 1]]).unwrap();
        let gl = group_lasso_operator(gs, 1.0);
        let g = penalty_gradient(&gl, &[2.4, 3.2], 1e-12).unwrap();
        assert_abs_diff_eq!(g[0], 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(g[1], 0.8, epsilon = 1e-9);
    }

    #[test]
    fn convexity_audit_detects_nonconvexity() {
        let b = BoxDomain::cube(1, -10.0, 10.0).unwrap();
        // |x| - x^2/4 is not convex on wide intervals.
        let phi = |x: &[f64]| Ok(x[0].abs() - 0.25 * x[0] * x[0]);
        let defect = convexity_audit(phi, &b, 500, 13).unwrap();
        assert!(defect > 1e-3, "defect {defect}");

        // x^2/4 + |x| is convex.
        let g = |x: &[f64]| Ok(0.25 * x[0] * x[0] + x[0].abs());
        let defect = convexity_audit(g, &b, 500, 13).unwrap();
        assert!(defect <= 1e-12, "defect {defect}");

        let lin = |x: &[f64]| Ok(3.0 * x[0] - 1.0);
        let defect = convexity_audit(lin, &b, 200, 13).unwrap();
        assert_abs_diff_eq!(defect, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_components_for_hard_rule() {
        let op = scalar_operator(ScalarRule::hard(2.0).unwrap());
        let points: Vec<Vec<f64>> = (0..=400).map(|k| vec![-5.0 + 0.025 * k as f64]).collect();
        let rec = reconstruct_on_grid(&op, &points, 8).unwrap();
        let labels: std::collections::BTreeSet<usize> =
            rec.rows.iter().map(|r| r.component).collect();
        assert_eq!(labels.len(), 3, "image splits into three components");
        assert_eq!(rec.base_point, vec![0.0]);
    }

    #[test]
    fn base_point_convention() {
        assert_eq!(default_base_point(&BoxDomain::cube(2, -1.0, 1.0).unwrap()), vec![0.0, 0.0]);
        assert_eq!(default_base_point(&BoxDomain::cube(1, 2.0, 6.0).unwrap()), vec![4.0]);
    }

    #[test]
    fn constant_offset_freedom() {
        // Rerunning from a different base point shifts psi by a constant.
        let op = scalar_operator(ScalarRule::soft(1.0).unwrap());
        let ys: Vec<f64> = (0..=50).map(|k| -4.0 + 0.16 * k as f64).collect();
        let from_zero: Vec<f64> = ys
            .iter()
            .map(|y| potential_line_integral(&op, &[0.0], &[*y], 8).unwrap())
            .collect();
        let from_two: Vec<f64> = ys
            .iter()
            .map(|y| potential_line_integral(&op, &[2.0], &[*y], 8).unwrap())
            .collect();
        let diffs: Vec<f64> = from_zero
            .iter()
            .zip(&from_two)
            .map(|(a, b)| a - b)
            .collect();
        let spread = diffs.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
            - diffs.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        assert!(spread < 1e-8, "spread {spread}");
    }

    #[test]
    fn well_definedness_across_integration_paths() {
        // phi at |x| > sqrt(2 lambda) has a unique preimage; reaching the same x
        // via potentials integrated from different bases must agree after the
        // base shift is accounted for.
        let op = scalar_operator(ScalarRule::hard(2.0).unwrap());
        let y = 3.7;
        let psi_a = potential_line_integral(&op, &[0.0], &[y], 8).unwrap();
        let (_, phi_a) = penalty_from_potential(&op, &[y], psi_a).unwrap();
        let psi_mid = potential_line_integral(&op, &[0.0], &[2.5], 8).unwrap();
        let psi_b = psi_mid + potential_line_integral(&op, &[2.5], &[y], 8).unwrap();
        let (_, phi_b) = penalty_from_potential(&op, &[y], psi_b).unwrap();
        assert_abs_diff_eq!(phi_a, phi_b, epsilon = 1e-9);
    }
}
