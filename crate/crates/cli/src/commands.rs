use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use proxatlas::bregman::{check_fidelity, BregmanGenerator, Fidelity};
use proxatlas::catalog::{catalog, operator_from_json, CatalogOperator};
use proxatlas::error::Error;
use proxatlas::proxcheck::{
    brute_force_prox_oracle, check_jacobian_prox, check_monotone_1d, find_asymmetry_witness,
    lipschitz_and_classify, social_asymmetry_fd, CheckReport, PenaltyGrid, Tolerances, Verdict,
};
use proxatlas::reconstruct::reconstruct_on_grid;
use proxatlas::sample::{rng_for, sample_in_box};
use proxatlas::shrinkage::derive_partition;
use proxatlas::shrinkage::operator::{BoxDomain, OperatorSpec};

use crate::report::{emit_json, write_atomic, Envelope};
use crate::{EXIT_DATA, EXIT_USAGE};

#[derive(Debug)]
pub struct CliError {
    msg: String,
    code: u8,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            msg: msg.into(),
            code: EXIT_USAGE,
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self {
            msg: msg.into(),
            code: EXIT_DATA,
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_) => CliError::usage(e.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "proxatlas",
    version,
    about = "Shrinkage-operator catalog, prox-compatibility verdicts, potential/penalty reconstruction, witnesses, and Bregman checks",
    after_help = "Exit codes for verdict commands: 0 prox_compatible, 1 not_prox, 2 inconclusive, 64 usage error, 65 data/domain error.\nIndices in reports are 0-based. PROXATLAS_THREADS caps internal parallelism."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// List the built-in operators
    Catalog(CatalogArgs),
    /// Decide prox-compatibility and classify the hidden penalty
    Check(CheckArgs),
    /// Reconstruct the potential and penalty over a grid (CSV + JSON)
    Reconstruct(ReconstructArgs),
    /// Derive the neighborhood partition or a certified asymmetry witness
    Witness(WitnessArgs),
    /// Compare the operator against the brute-force prox oracle
    Oracle(OracleArgs),
    /// Bregman left/right and linear-inverse fidelity checks
    BregmanCheck(BregmanArgs),
}

#[derive(Args)]
pub struct CatalogArgs {
    /// Emit a machine-readable JSON array
    #[arg(long)]
    json: bool,
    /// Show only the entry with this name
    #[arg(long)]
    id: Option<String>,
}

#[derive(Args)]
pub struct OperatorSource {
    /// Catalog id, e.g. "soft:lambda=1" or "wglasso:n=3:window=1:lambda=1"
    #[arg(long)]
    op: Option<String>,
    /// JSON operator spec file (alternative to --op)
    #[arg(long, value_name = "PATH")]
    spec_file: Option<PathBuf>,
}

impl OperatorSource {
    fn load(&self) -> Result<(CatalogOperator, String), CliError> {
        match (&self.op, &self.spec_file) {
            (Some(id), None) => Ok((CatalogOperator::parse(id)?, id.clone())),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::usage(format!("cannot read {}: {e}", path.display()))
                })?;
                let op = operator_from_json(&text)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                Ok((op, path.display().to_string()))
            }
            _ => Err(CliError::usage("exactly one of --op / --spec-file is required")),
        }
    }
}

#[derive(Args)]
pub struct CheckArgs {
    #[command(flatten)]
    source: OperatorSource,
    /// Sampling box "lo:hi" (all axes) or "lo:hi,lo:hi,..." per axis
    #[arg(long = "box", allow_hyphen_values = true)]
    box_spec: Option<String>,
    /// Jacobian sample count (n > 1)
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Grid size for the 1-d monotonicity test
    #[arg(long, default_value_t = 10_001)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    sym_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    eig_tol: f64,
    /// Write the JSON report here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    source: OperatorSource,
    #[arg(long = "box", allow_hyphen_values = true)]
    box_spec: Option<String>,
    /// Grid points per axis
    #[arg(long, default_value_t = 1001)]
    grid: usize,
    /// Reconstruct even when the prox check fails
    #[arg(long)]
    force: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial quadrature panels per line integral
    #[arg(long, default_value_t = 8)]
    nodes: usize,
    /// CSV output path (default stdout)
    #[arg(long, value_name = "PATH")]
    out_csv: Option<PathBuf>,
    /// Optional JSON output path
    #[arg(long, value_name = "PATH")]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
pub struct WitnessArgs {
    #[command(flatten)]
    source: OperatorSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct OracleArgs {
    #[command(flatten)]
    source: OperatorSource,
    #[arg(long = "box", allow_hyphen_values = true)]
    box_spec: Option<String>,
    /// Reconstruction grid points per axis
    #[arg(long, default_value_t = 10_001)]
    grid: usize,
    /// Random query points compared against the oracle
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BregmanArgs {
    #[command(flatten)]
    source: OperatorSource,
    /// Generator id: sq_norm, neg_entropy, burg
    #[arg(long, default_value = "sq_norm")]
    gen: String,
    /// Fidelity form: left (D_h(y,x)), right (D_h(x,y)), linear (|y-Mx|^2/2)
    #[arg(long, default_value = "left")]
    form: String,
    /// Matrix for --form linear, rows separated by ';', entries by ','
    #[arg(long, allow_hyphen_values = true)]
    matrix: Option<String>,
    #[arg(long = "box", allow_hyphen_values = true)]
    box_spec: Option<String>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    sym_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    eig_tol: f64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Catalog(args) => cmd_catalog(args),
        Command::Check(args) => cmd_check(args),
        Command::Reconstruct(args) => cmd_reconstruct(args),
        Command::Witness(args) => cmd_witness(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::BregmanCheck(args) => cmd_bregman_check(args),
    }
}

fn parse_box(spec: &str, n: usize) -> Result<BoxDomain, CliError> {
    let ranges: Vec<(f64, f64)> = spec
        .split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("bad box range '{part}', expected lo:hi")))?;
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad box bound '{lo}'")))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad box bound '{hi}'")))?;
            Ok((lo, hi))
        })
        .collect::<Result<_, CliError>>()?;
    let ranges = if ranges.len() == 1 {
        vec![ranges[0]; n]
    } else if ranges.len() == n {
        ranges
    } else {
        return Err(CliError::usage(format!(
            "box has {} ranges but the operator has dimension {n}",
            ranges.len()
        )));
    };
    let (lower, upper) = ranges.into_iter().unzip();
    Ok(BoxDomain::new(lower, upper)?)
}

fn resolve_box(
    spec: &Option<String>,
    cat: &CatalogOperator,
    op: &OperatorSpec,
) -> Result<BoxDomain, CliError> {
    let b = match spec {
        Some(s) => parse_box(s, cat.dim())?,
        None => cat.default_box(),
    };
    if !op.domain().contains_box(&b) {
        return Err(CliError::data(format!(
            "box [{:?}, {:?}] is not inside the operator domain",
            b.lower(),
            b.upper()
        )));
    }
    Ok(b)
}

fn verdict_exit(verdict: Verdict) -> u8 {
    match verdict {
        Verdict::ProxCompatible => 0,
        Verdict::NotProx => 1,
        Verdict::Inconclusive => 2,
    }
}

fn cmd_catalog(args: CatalogArgs) -> Result<u8, CliError> {
    let mut entries = catalog();
    if let Some(id) = &args.id {
        entries.retain(|e| e.name == id);
        if entries.is_empty() {
            return Err(CliError::usage(format!("no catalog entry named '{id}'")));
        }
    }
    if args.json {
        emit_json(None, &entries)?;
    } else {
        let widths = (
            entries.iter().map(|e| e.name.len()).max().unwrap_or(4).max(4),
            entries
                .iter()
                .map(|e| e.parameters.len())
                .max()
                .unwrap_or(10)
                .max(10),
        );
        let (name, parameters, origin) = ("name", "parameters", "origin");
        println!(
            "{name:<w0$}  {parameters:<w1$}  {origin}",
            w0 = widths.0,
            w1 = widths.1
        );
        for e in &entries {
            println!(
                "{:<w0$}  {:<w1$}  {}",
                e.name,
                e.parameters,
                e.origin,
                w0 = widths.0,
                w1 = widths.1
            );
        }
    }
    Ok(0)
}

/// Monotonicity check in one dimension, Jacobian sampling otherwise, then the
/// Lipschitz-based penalty classification.
fn run_check(
    op: &OperatorSpec,
    sample_box: &BoxDomain,
    samples: usize,
    grid: usize,
    seed: u64,
    tols: Tolerances,
) -> Result<CheckReport, CliError> {
    let report = if op.dim() == 1 {
        check_monotone_1d(op, grid, sample_box)?
    } else {
        check_jacobian_prox(op, samples, sample_box, seed, tols)?
    };
    Ok(lipschitz_and_classify(
        op,
        report,
        sample_box,
        samples.max(1000),
        seed,
    )?)
}

fn cmd_check(args: CheckArgs) -> Result<u8, CliError> {
    let (cat, operator_id) = args.source.load()?;
    let op = cat.operator();
    let sample_box = resolve_box(&args.box_spec, &cat, &op)?;
    let tols = Tolerances {
        sym_tol: args.sym_tol,
        eig_tol: args.eig_tol,
        ..Tolerances::default()
    };
    let report = run_check(&op, &sample_box, args.samples, args.grid, args.seed, tols)?;
    let exit = verdict_exit(report.verdict);
    let envelope = Envelope::new(
        "check",
        Some(operator_id),
        args.seed,
        json!({
            "box": box_json(&sample_box),
            "samples": args.samples,
            "grid": args.grid,
            "sym_tol": args.sym_tol,
            "eig_tol": args.eig_tol,
        }),
        report,
    );
    emit_json(args.out.as_deref(), &envelope)?;
    Ok(exit)
}

fn box_json(b: &BoxDomain) -> serde_json::Value {
    json!({"lower": b.lower(), "upper": b.upper()})
}

fn axis_grid(b: &BoxDomain, axis: usize, count: usize) -> Vec<f64> {
    let (lo, hi) = (b.lower()[axis], b.upper()[axis]);
    (0..count)
        .map(|k| lo + (hi - lo) * (k as f64) / ((count - 1) as f64))
        .collect()
}

/// Full tensor grid over the box; counts are per axis.
fn grid_points(b: &BoxDomain, count: usize) -> Vec<Vec<f64>> {
    let n = b.dim();
    let axes: Vec<Vec<f64>> = (0..n).map(|a| axis_grid(b, a, count)).collect();
    let mut points = vec![vec![]];
    for axis in &axes {
        let mut next = Vec::with_capacity(points.len() * axis.len());
        for p in &points {
            for v in axis {
                let mut q = p.clone();
                q.push(*v);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

fn cmd_reconstruct(args: ReconstructArgs) -> Result<u8, CliError> {
    let (cat, operator_id) = args.source.load()?;
    let op = cat.operator();
    let sample_box = resolve_box(&args.box_spec, &cat, &op)?;
    if args.grid < 2 {
        return Err(CliError::usage("--grid needs at least 2 points"));
    }

    if !args.force {
        let report = run_check(
            &op,
            &sample_box,
            200,
            args.grid.max(1001),
            args.seed,
            Tolerances::default(),
        )?;
        if report.verdict != Verdict::ProxCompatible {
            eprintln!(
                "refusing to reconstruct: verdict {:?} (use --force to override)",
                report.verdict
            );
            return Ok(1);
        }
    }

    let points = grid_points(&sample_box, args.grid);
    let result = reconstruct_on_grid(&op, &points, args.nodes)?;

    let mut csv = String::new();
    let n = op.dim();
    let mut header: Vec<String> = Vec::new();
    for k in 0..n {
        header.push(format!("y{}", k + 1));
    }
    for k in 0..n {
        header.push(format!("f{}", k + 1));
    }
    header.push("psi".into());
    for k in 0..n {
        header.push(format!("x{}", k + 1));
    }
    header.push("phi".into());
    header.push("component".into());
    csv.push_str(&header.join(","));
    csv.push('\n');
    for row in &result.rows {
        let mut cells: Vec<String> = Vec::new();
        cells.extend(row.y.iter().map(|v| format!("{v}")));
        cells.extend(row.f.iter().map(|v| format!("{v}")));
        cells.push(format!("{}", row.psi));
        cells.extend(row.f.iter().map(|v| format!("{v}")));
        cells.push(format!("{}", row.phi));
        cells.push(format!("{}", row.component));
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    match &args.out_csv {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }

    if let Some(path) = &args.out_json {
        let envelope = Envelope::new(
            "reconstruct",
            Some(operator_id),
            args.seed,
            json!({
                "box": box_json(&sample_box),
                "grid": args.grid,
                "nodes": args.nodes,
                "force": args.force,
            }),
            &result,
        );
        emit_json(Some(path), &envelope)?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct WitnessReport {
    partition: Option<Vec<Vec<usize>>>,
    classes: Vec<Vec<usize>>,
    support_matches: Vec<bool>,
    violating_pair: Option<(usize, usize)>,
    witness: Option<WitnessDetail>,
}

#[derive(Serialize)]
struct WitnessDetail {
    point: Vec<f64>,
    i: usize,
    j: usize,
    asym_analytic: f64,
    asym_fd: f64,
    norm_below: f64,
    norm_above: f64,
}

fn cmd_witness(args: WitnessArgs) -> Result<u8, CliError> {
    let (cat, operator_id) = args.source.load()?;
    let spec = cat
        .social()
        .ok_or_else(|| {
            CliError::usage(format!(
                "'{operator_id}' is not a social shrinkage operator; witness needs wglasso/pew or a social spec file"
            ))
        })?
        .clone();

    let outcome = derive_partition(&spec.system);
    let witness = find_asymmetry_witness(&spec, None, args.seed);
    let detail = match &witness {
        Some(w) => Some(WitnessDetail {
            point: w.point.clone(),
            i: w.i,
            j: w.j,
            asym_analytic: w.asym,
            asym_fd: social_asymmetry_fd(&spec, w)?,
            norm_below: w.norm_below,
            norm_above: w.norm_above,
        }),
        None => None,
    };
    let have_answer = outcome.partition.is_some() || detail.is_some();
    let report = WitnessReport {
        partition: outcome
            .partition
            .as_ref()
            .map(|gs| gs.groups().to_vec()),
        classes: outcome.classes,
        support_matches: outcome.support_matches,
        violating_pair: outcome.violating_pair,
        witness: detail,
    };
    let envelope = Envelope::new(
        "witness",
        Some(operator_id),
        args.seed,
        json!({}),
        report,
    );
    emit_json(args.out.as_deref(), &envelope)?;
    Ok(if have_answer { 0 } else { 2 })
}

#[derive(Serialize)]
struct OracleReport {
    grid_points: usize,
    samples: usize,
    max_deviation_steps: f64,
    max_abs_deviation: f64,
    agreement_within_one_step: bool,
    ties: Vec<TieRecord>,
}

#[derive(Serialize)]
struct TieRecord {
    y: Vec<f64>,
    ties: Vec<Vec<f64>>,
}

fn cmd_oracle(args: OracleArgs) -> Result<u8, CliError> {
    let (cat, operator_id) = args.source.load()?;
    let op = cat.operator();
    if op.dim() > 2 {
        return Err(CliError::data(format!(
            "oracle supports dimension <= 2, operator has n = {}",
            op.dim()
        )));
    }
    let sample_box = resolve_box(&args.box_spec, &cat, &op)?;
    if args.grid < 2 {
        return Err(CliError::usage("--grid needs at least 2 points"));
    }

    // Reconstruct the penalty on the image of the grid; off-image points do
    // not exist on this grid, which encodes phi = +inf there.
    let points = grid_points(&sample_box, if op.dim() == 1 { args.grid } else { args.grid.min(201) });
    let rec = reconstruct_on_grid(&op, &points, 8)?;

    let (grid, sorted_xs) = build_penalty_grid(&rec, op.dim())?;

    let mut max_steps = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut ties = Vec::new();
    for k in 0..args.samples {
        let mut rng = rng_for(args.seed, k as u64);
        let y = sample_in_box(&mut rng, &sample_box);
        let fy = op.eval(&y)?;
        let out = brute_force_prox_oracle(&grid, &y)?;
        let (steps, abs) = deviation(&sorted_xs, &fy, &out.argmin, &sample_box, args.grid, op.dim());
        max_steps = max_steps.max(steps);
        max_abs = max_abs.max(abs);
        if out.ties.len() > 1 {
            ties.push(TieRecord { y, ties: out.ties });
        }
    }

    let ok = max_steps <= 1.0;
    let report = OracleReport {
        grid_points: grid.len(),
        samples: args.samples,
        max_deviation_steps: max_steps,
        max_abs_deviation: max_abs,
        agreement_within_one_step: ok,
        ties,
    };
    let envelope = Envelope::new(
        "oracle",
        Some(operator_id),
        args.seed,
        json!({
            "box": box_json(&sample_box),
            "grid": args.grid,
            "samples": args.samples,
        }),
        report,
    );
    emit_json(args.out.as_deref(), &envelope)?;
    Ok(if ok { 0 } else { 1 })
}

/// Collapse the reconstructed rows into a penalty grid over distinct image
/// points. For n = 1 the sorted image doubles as the step ruler.
fn build_penalty_grid(
    rec: &proxatlas::reconstruct::ReconstructionResult,
    dim: usize,
) -> Result<(PenaltyGrid, Vec<f64>), CliError> {
    if dim == 1 {
        let mut pairs: Vec<(f64, f64)> = rec.rows.iter().map(|r| (r.f[0], r.phi)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs.dedup_by(|a, b| a.0 == b.0);
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let phis: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        Ok((PenaltyGrid::from_1d(&xs, &phis)?, xs))
    } else {
        let points: Vec<Vec<f64>> = rec.rows.iter().map(|r| r.f.clone()).collect();
        let values: Vec<f64> = rec.rows.iter().map(|r| r.phi).collect();
        Ok((PenaltyGrid::new(points, values)?, vec![]))
    }
}

/// Deviation between the oracle argmin and the operator value, in units of
/// grid steps: index distance on the sorted 1-d image, coordinate distance
/// over the axis step otherwise.
fn deviation(
    sorted_xs: &[f64],
    fy: &[f64],
    argmin: &[f64],
    sample_box: &BoxDomain,
    grid: usize,
    dim: usize,
) -> (f64, f64) {
    if dim == 1 {
        let i1 = nearest_index(sorted_xs, fy[0]);
        let i2 = nearest_index(sorted_xs, argmin[0]);
        let steps = (i1 as f64 - i2 as f64).abs();
        ((steps), (fy[0] - argmin[0]).abs())
    } else {
        let mut steps = 0.0f64;
        let mut abs = 0.0f64;
        for a in 0..dim {
            let span = sample_box.upper()[a] - sample_box.lower()[a];
            let step = span / ((grid.min(201) - 1) as f64);
            let d = (fy[a] - argmin[a]).abs();
            steps = steps.max(d / step);
            abs = abs.max(d);
        }
        (steps, abs)
    }
}

fn nearest_index(sorted: &[f64], v: f64) -> usize {
    match sorted.binary_search_by(|x| x.partial_cmp(&v).unwrap()) {
        Ok(i) => i,
        Err(i) => {
            if i == 0 {
                0
            } else if i >= sorted.len() {
                sorted.len() - 1
            } else if (sorted[i] - v).abs() < (v - sorted[i - 1]).abs() {
                i
            } else {
                i - 1
            }
        }
    }
}

fn parse_matrix(text: &str, n: usize) -> Result<DMatrix<f64>, CliError> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| CliError::usage(format!("bad matrix entry '{v}'")))
                })
                .collect()
        })
        .collect::<Result<_, CliError>>()?;
    let m = rows.len();
    if m == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(CliError::usage("matrix rows must be nonempty and equal length"));
    }
    let k = rows[0].len();
    if m != n || k != n {
        return Err(CliError::data(format!(
            "matrix is {m}x{k}, operator dimension is {n}"
        )));
    }
    Ok(DMatrix::from_fn(m, k, |i, j| rows[i][j]))
}

fn cmd_bregman_check(args: BregmanArgs) -> Result<u8, CliError> {
    let (cat, operator_id) = args.source.load()?;
    let op = cat.operator();
    let n = op.dim();
    let generator = |name: &str| -> Result<BregmanGenerator, CliError> {
        match name {
            "sq_norm" => Ok(BregmanGenerator::sq_norm(n)),
            "neg_entropy" => Ok(BregmanGenerator::neg_entropy(n)),
            "burg" => Ok(BregmanGenerator::burg(n)),
            other => Err(CliError::usage(format!(
                "unknown generator '{other}' (custom generators are in-process only)"
            ))),
        }
    };
    let fidelity = match args.form.as_str() {
        "left" => Fidelity::BregmanLeft(generator(&args.gen)?),
        "right" => Fidelity::BregmanRight(generator(&args.gen)?),
        "linear" => {
            let text = args
                .matrix
                .as_ref()
                .ok_or_else(|| CliError::usage("--form linear requires --matrix"))?;
            Fidelity::LinearInverse(parse_matrix(text, n)?)
        }
        other => return Err(CliError::usage(format!("unknown form '{other}'"))),
    };

    // Positive-orthant generators need a positive sampling box by default.
    let sample_box = match &args.box_spec {
        Some(s) => {
            let b = parse_box(s, n)?;
            if !op.domain().contains_box(&b) {
                return Err(CliError::data("box is not inside the operator domain"));
            }
            b
        }
        None => match &fidelity {
            Fidelity::BregmanLeft(g) | Fidelity::BregmanRight(g)
                if g.domain().lower().iter().any(|l| *l >= 0.0) =>
            {
                BoxDomain::cube(n, 0.1, 5.0)?
            }
            _ => cat.default_box(),
        },
    };

    let tols = Tolerances {
        sym_tol: args.sym_tol,
        eig_tol: args.eig_tol,
        ..Tolerances::default()
    };
    let report = check_fidelity(&op, &fidelity, args.samples, &sample_box, args.seed, tols)?;
    let exit = verdict_exit(report.verdict);
    let envelope = Envelope::new(
        "bregman-check",
        Some(operator_id),
        args.seed,
        json!({
            "gen": args.gen,
            "form": args.form,
            "matrix": args.matrix,
            "box": box_json(&sample_box),
            "samples": args.samples,
            "sym_tol": args.sym_tol,
            "eig_tol": args.eig_tol,
        }),
        report,
    );
    emit_json(args.out.as_deref(), &envelope)?;
    Ok(exit)
}

