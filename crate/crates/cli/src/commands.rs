//! Argument definitions and one driver per subcommand.
//!
//! Every driver returns the text for stdout; `--out` additionally writes a
//! full [`ResultFile`].

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use tsvd_core::locscale::{self, breakdown_point, extrapolate, DEFAULT_SIZES};
use tsvd_core::matrix::classical_svd;
use tsvd_core::regress::{robust_gls, RegressionProblem};
use tsvd_core::tsvd::{total_svd, TsvdConfig};
use tsvd_core::weights::{calibrate, efficacy, CalibrationTarget, Power, WeightSpec};
use tsvd_core::Matrix;

use crate::dataset::{load_csv, standardize, Dataset};
use crate::error::CliError;
use crate::report::{tsv_fixed, ResultFile};

/// Environment variable naming the European health and fertility file.
pub const EUROPEAN_ENV: &str = "TSVD_EUROPEAN_CSV";

#[derive(Debug, Parser)]
#[command(name = "tsvd", version, about = "Robust location-scale, regression and Total SVD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Robust location and scale of one data column.
    Locscale(LocscaleArgs),
    /// Robust generalised least squares with noisy regressors.
    Regress(RegressArgs),
    /// Ordinary, robust or total low-rank approximation.
    Tsvd(TsvdArgs),
    /// Tuning constants for a target efficacy or k3.
    Calibrate(CalibrateArgs),
    /// Breakdown point of the location estimator.
    Breakdown(BreakdownArgs),
    /// Regenerates the power-selection and calibration tables.
    Tables(TablesArgs),
}

/// The tuning constant; at most one may be given.
#[derive(Debug, Clone, Args, Default)]
#[group(multiple = false)]
pub struct Constant {
    /// Residual tuning constant k3 = k1 k2.
    #[arg(long)]
    pub k3: Option<f64>,
    /// Location tuning constant; `inf` gives least squares.
    #[arg(long)]
    pub k1: Option<f64>,
    /// Target Gaussian efficacy in (0, 1].
    #[arg(long)]
    pub efficacy: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct Shared {
    /// CSV input file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Writes the full result file here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Weight power: 1, 2, 4, 8 or inf.
    #[arg(long, default_value = "4", value_parser = parse_power)]
    pub q: Power,
    #[command(flatten)]
    pub constant: Constant,
    /// Convergence tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed of the random start.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// The first CSV line holds column names.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct LocscaleArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// 1-based column of the input to analyse.
    #[arg(long, default_value_t = 1)]
    pub column: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// The last half of the design columns are variances of the first half.
    #[arg(long)]
    pub with_variances: bool,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct TsvdArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    /// Account for the variances of the factors.
    #[arg(long)]
    pub total: bool,
    /// Robust weights with k3 = 1 unless a constant is given.
    #[arg(long)]
    pub robust: bool,
    /// Number of continuation points from t = 0 to t = 1.
    #[arg(long, default_value_t = 11)]
    pub continuation_steps: usize,
    /// Center columns and scale them to unit variance first.
    #[arg(long)]
    pub standardize: bool,
    /// Use the divisor m - 1 when standardizing.
    #[arg(long)]
    pub ddof1: bool,
    /// Named data set; `european` reads the file from --input or TSVD_EUROPEAN_CSV.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Debug, Args)]
pub struct BreakdownArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Sample sizes; three sizes are extrapolated to infinity.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES.to_vec())]
    pub m: Vec<usize>,
    /// Offset threshold.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// The three sample sizes used for extrapolation.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES.to_vec())]
    pub m: Vec<usize>,
}

fn parse_power(s: &str) -> Result<Power, String> {
    s.parse().map_err(|e: tsvd_core::Error| e.to_string())
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Locscale(a) => cmd_locscale(a),
        Command::Regress(a) => cmd_regress(a),
        Command::Tsvd(a) => cmd_tsvd(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Breakdown(a) => cmd_breakdown(a),
        Command::Tables(a) => cmd_tables(a),
    }
}

/// The weight spec selected by the constant flags. Without one, `fallback`
/// decides between least squares and `k3 = 1`.
pub fn weight_spec(shared: &Shared, robust_fallback: bool) -> Result<WeightSpec, CliError> {
    let q = shared.q;
    let c = &shared.constant;
    let spec = match (c.k1, c.k3, c.efficacy) {
        (Some(k1), _, _) if k1 == f64::INFINITY => WeightSpec::new(q, k1, 1.0),
        (Some(k1), _, _) => WeightSpec::from_k1(q, k1),
        (_, Some(k3), _) => calibrate(CalibrationTarget::K3(k3), q),
        (_, _, Some(e)) => calibrate(CalibrationTarget::Efficacy(e), q),
        _ if robust_fallback => calibrate(CalibrationTarget::K3(1.0), q),
        _ => WeightSpec::new(q, f64::INFINITY, 1.0),
    };
    spec.map_err(CliError::core("calibrate"))
}

fn input(shared: &Shared) -> Result<Dataset, CliError> {
    let path = shared
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    Ok(load_csv(path, shared.header)?)
}

fn write_out(shared: &Shared, file: &ResultFile) -> Result<(), CliError> {
    if let Some(path) = &shared.out {
        std::fs::write(path, file.render()).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

fn spec_scalars(file: &mut ResultFile, spec: &WeightSpec) {
    file.scalar("q", spec.q())
        .scalar("k1", spec.k1())
        .scalar("k2", spec.k2())
        .scalar("k3", spec.k3());
}

/// Rounds for display; also turns `-0` into `0`.
fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn cmd_locscale(args: &LocscaleArgs) -> Result<String, CliError> {
    let ds = input(&args.shared)?;
    let spec = weight_spec(&args.shared, false)?;
    let col = args.column;
    if col == 0 || col > ds.matrix.cols() {
        return Err(CliError::Usage(format!("--column must lie in 1..={}", ds.matrix.cols())));
    }
    let xs = ds.matrix.column(col - 1);
    let tol = args.shared.tol.unwrap_or(1e-10);
    let est = locscale::estimate(&xs, &spec, tol, args.max_iter).map_err(CliError::core("locscale"))?;
    let mut file = ResultFile::new();
    file.scalar("command", "locscale");
    spec_scalars(&mut file, &spec);
    file.scalar("n", est.n)
        .scalar("s", est.s_x)
        .scalar("sigma2", est.sigma2_hat)
        .scalar("n_eff", est.n_eff)
        .scalar("iterations", est.iterations)
        .scalar("converged", est.converged)
        .vector("weights", &est.weights);
    write_out(&args.shared, &file)?;
    Ok(format!(
        "n={} s={} sigma2={} n_eff={} iterations={}\n",
        fixed(est.n, 6),
        fixed(est.s_x, 6),
        fixed(est.sigma2_hat, 6),
        fixed(est.n_eff, 3),
        est.iterations
    ))
}

pub fn cmd_regress(args: &RegressArgs) -> Result<String, CliError> {
    let ds = input(&args.shared)?;
    let spec = weight_spec(&args.shared, false)?;
    let (n, cols) = ds.matrix.shape();
    let p = if args.with_variances {
        if cols < 3 || (cols - 1) % 2 != 0 {
            return Err(CliError::Usage(
                "with variances the input needs y, p design columns and p variance columns".into(),
            ));
        }
        (cols - 1) / 2
    } else {
        cols.saturating_sub(1)
    };
    if p == 0 {
        return Err(CliError::Usage("the input needs y and at least one design column".into()));
    }
    let y = ds.matrix.column(0);
    let design = Matrix::from_fn(n, p, |i, j| ds.matrix[(i, 1 + j)]);
    let var = args
        .with_variances
        .then(|| Matrix::from_fn(n, p, |i, j| ds.matrix[(i, 1 + p + j)]));
    let prob = RegressionProblem::new(y, design, var).map_err(CliError::core("regress"))?;
    let tol = args.shared.tol.unwrap_or(1e-10);
    let est = robust_gls(&prob, &spec, tol, args.max_iter).map_err(CliError::core("regress"))?;

    let mut out = String::from("coefficient\testimate\tstd_error\n");
    for (j, b) in est.beta.iter().enumerate() {
        let se = est.cov_beta.as_ref().map_or(f64::NAN, |c| c[(j, j)].sqrt());
        let _ = writeln!(out, "beta{}\t{}\t{}", j + 1, fixed(*b, 6), fixed(se, 6));
    }
    let _ = writeln!(out, "s={} n_eff={} iterations={}", fixed(est.s, 6), fixed(est.n_eff, 3), est.iterations);

    let mut file = ResultFile::new();
    file.scalar("command", "regress");
    spec_scalars(&mut file, &spec);
    file.scalar("s", est.s)
        .scalar("n_eff", est.n_eff)
        .scalar("iterations", est.iterations)
        .scalar("converged", est.converged)
        .vector("beta", &est.beta)
        .vector("weights", &est.weights);
    if let Some(c) = &est.cov_beta {
        file.matrix("cov_beta", c);
    }
    write_out(&args.shared, &file)?;
    Ok(out)
}

fn european_path(shared: &Shared) -> Result<PathBuf, CliError> {
    if let Some(p) = &shared.input {
        return Ok(p.clone());
    }
    match std::env::var_os(EUROPEAN_ENV) {
        Some(p) if !p.is_empty() => Ok(PathBuf::from(p)),
        _ => Err(CliError::MissingDataset(format!(
            "the European data set is not bundled; pass --input FILE or set {EUROPEAN_ENV}"
        ))),
    }
}

pub fn cmd_tsvd(args: &TsvdArgs) -> Result<String, CliError> {
    if let Some(preset) = &args.preset {
        return match preset.as_str() {
            "european" => cmd_european(args),
            other => Err(CliError::Usage(format!("unknown preset {other:?}"))),
        };
    }
    let mut ds = input(&args.shared)?;
    if args.standardize {
        ds = standardize(&ds, args.ddof1)?;
    }
    let spec = weight_spec(&args.shared, args.robust)?;
    let mut cfg = TsvdConfig::new(args.rank, spec)
        .total(args.total)
        .continuation_steps(args.continuation_steps)
        .seed(args.shared.seed);
    if let Some(tol) = args.shared.tol {
        cfg = cfg.tol(tol);
    }
    let res = total_svd(&ds.matrix, &cfg).map_err(CliError::core("tsvd"))?;

    let mut out = String::new();
    out.push_str(&tsv_fixed(&res.approximation, 4));
    let lambda: Vec<String> = res.singular_values.iter().map(|v| fixed(*v, 4)).collect();
    let _ = writeln!(out, "lambda\t{}", lambda.join("\t"));
    let _ = writeln!(out, "s\t{}", fixed(res.state.s, 6));

    let mut file = ResultFile::new();
    file.scalar("command", "tsvd")
        .scalar("rank", args.rank)
        .scalar("total", args.total)
        .scalar("standardized", ds.standardized);
    spec_scalars(&mut file, &spec);
    file.scalar("seed", args.shared.seed)
        .scalar("s", res.state.s)
        .scalar("nu", res.state.nu)
        .scalar("outer_iterations", res.outer_iterations)
        .vector("lambda", &res.singular_values)
        .matrix("approximation", &res.approximation)
        .matrix("a", &res.state.a)
        .matrix("b", &res.state.b)
        .matrix("var_a", &res.state.var_a)
        .matrix("var_b", &res.state.var_b)
        .matrix("weights", &res.state.weights)
        .matrix("u", &res.u)
        .matrix("v", &res.v);
    if let (Some(means), Some(sds)) = (&ds.column_means, &ds.column_sds) {
        file.vector("column_means", means).vector("column_sds", sds);
    }
    write_out(&args.shared, &file)?;
    Ok(out)
}

/// Singular values of the standardized European data: ordinary, robust and
/// total robust fits.
fn cmd_european(args: &TsvdArgs) -> Result<String, CliError> {
    let path = european_path(&args.shared)?;
    let ds = standardize(&load_csv(&path, args.shared.header)?, args.ddof1)?;
    let x = &ds.matrix;
    let ordinary = classical_svd(x).map_err(CliError::core("tsvd"))?;
    let rank = args.rank.max(2);
    let spec = weight_spec(&args.shared, true)?;

    let mut out = String::from("method\tlambda\n");
    let top: Vec<String> = ordinary.values().iter().take(rank + 1).map(|v| fixed(*v, 4)).collect();
    let _ = writeln!(out, "ordinary SVD\t{}", top.join("\t"));
    let mut file = ResultFile::new();
    file.scalar("command", "tsvd").scalar("preset", "european");
    spec_scalars(&mut file, &spec);
    file.vector("lambda_ordinary", ordinary.values());
    for (label, key, total) in [("robust SVD", "lambda_robust", false), ("total robust SVD", "lambda_total", true)] {
        let cfg = TsvdConfig::new(rank, spec)
            .total(total)
            .continuation_steps(args.continuation_steps)
            .seed(args.shared.seed);
        let res = total_svd(x, &cfg).map_err(CliError::core("tsvd"))?;
        let vals: Vec<String> = res.singular_values.iter().map(|v| fixed(*v, 4)).collect();
        let _ = writeln!(out, "{label}\t{}", vals.join("\t"));
        file.vector(key, &res.singular_values);
    }
    write_out(&args.shared, &file)?;
    Ok(out)
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<String, CliError> {
    let c = &args.shared.constant;
    if c.k1.is_none() && c.k3.is_none() && c.efficacy.is_none() {
        return Err(CliError::Usage("give one of --k1, --k3 or --efficacy".into()));
    }
    let spec = weight_spec(&args.shared, false)?;
    let eff = efficacy(spec.k1(), spec.q()).map_err(CliError::core("calibrate"))?;
    let mut file = ResultFile::new();
    file.scalar("command", "calibrate");
    spec_scalars(&mut file, &spec);
    file.scalar("efficacy", eff);
    write_out(&args.shared, &file)?;
    Ok(format!(
        "k1={} k2={} k3={} efficacy={}\n",
        constant(spec.k1().value()),
        fixed(spec.k2(), 4),
        constant(spec.k3().value()),
        fixed(eff, 4)
    ))
}

fn constant(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        fixed(v, 4)
    }
}

fn three_sizes(m: &[usize]) -> Result<[usize; 3], CliError> {
    <[usize; 3]>::try_from(m).map_err(|_| CliError::Usage("--m needs exactly three sizes".into()))
}

pub fn cmd_breakdown(args: &BreakdownArgs) -> Result<String, CliError> {
    if args.m.is_empty() {
        return Err(CliError::Usage("--m needs at least one size".into()));
    }
    let spec = weight_spec(&args.shared, false)?;
    let results = args
        .m
        .par_iter()
        .map(|&m| breakdown_point(&spec, m, args.a))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::core("breakdown"))?;
    let mut out = String::from("m\tbp\tk_star\n");
    let mut file = ResultFile::new();
    file.scalar("command", "breakdown");
    spec_scalars(&mut file, &spec);
    file.scalar("a", args.a);
    for (m, r) in args.m.iter().zip(&results) {
        let _ = writeln!(out, "{m}\t{}\t{}", fixed(r.bp, 4), fixed(r.k_star, 4));
        file.scalar(&format!("bp_{m}"), r.bp);
    }
    if args.m.len() == 3 {
        let sizes = three_sizes(&args.m)?;
        let points = [0, 1, 2].map(|i| (sizes[i] as f64, results[i].bp));
        match extrapolate(points) {
            Ok(fit) => {
                let _ = writeln!(out, "inf\t{}", fixed(fit.t_inf, 4));
                file.scalar("bp_inf", fit.t_inf);
            }
            Err(e) => {
                let _ = writeln!(out, "inf\tNA\t({e}; largest size reported)");
                file.scalar("bp_inf", results[2].bp);
            }
        }
    }
    write_out(&args.shared, &file)?;
    Ok(out)
}

pub fn cmd_tables(args: &TablesArgs) -> Result<String, CliError> {
    let sizes = three_sizes(&args.m)?;
    let efficacies = [0.80, 0.90, 0.95];
    let grid: Vec<(f64, Power)> = efficacies
        .iter()
        .flat_map(|&e| Power::ALL.into_iter().map(move |q| (e, q)))
        .collect();
    let breakdown: Vec<f64> = grid
        .par_iter()
        .map(|&(e, q)| {
            let spec = calibrate(CalibrationTarget::Efficacy(e), q)?;
            let bps = locscale::breakdown_by_size(&spec, sizes, 1.0)?;
            Ok(locscale::extrapolate_or_last([0, 1, 2].map(|i| (sizes[i] as f64, bps[i]))))
        })
        .collect::<Result<_, tsvd_core::Error>>()
        .map_err(CliError::core("tables"))?;

    let mut out = String::from("# breakdown by efficacy and power\nefficacy\tq\tbp1\n");
    let mut file = ResultFile::new();
    file.scalar("command", "tables");
    for ((e, q), bp) in grid.iter().zip(&breakdown) {
        let _ = writeln!(out, "{e:.2}\t{q}\t{}", fixed(*bp, 3));
    }
    file.matrix(
        "breakdown",
        &Matrix::from_fn(efficacies.len(), Power::ALL.len(), |i, j| breakdown[i * Power::ALL.len() + j]),
    );

    let mut targets: Vec<CalibrationTarget> = [0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.92, 0.94, 0.96, 0.98, 0.99, 1.0]
        .into_iter()
        .map(CalibrationTarget::Efficacy)
        .collect();
    targets.extend([0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0].map(CalibrationTarget::K3));
    let rows: Vec<Result<[f64; 7], tsvd_core::Error>> = targets
        .par_iter()
        .map(|&t| {
            let spec = calibrate(t, Power::Four)?;
            let row = locscale::calibration_row(&spec, sizes)?;
            Ok([row.efficacy, row.k1, row.k2, row.k3, row.bp1, row.b_n, row.b_s])
        })
        .collect();
    out.push_str("\n# calibration with q = 4\nefficacy\tk1\tk2\tk3\tbp1\tb_n\tb_s\n");
    let mut table = Vec::new();
    for row in rows {
        match row {
            Ok(r) => {
                let cells: Vec<String> = r.iter().map(|v| constant(*v)).collect();
                let _ = writeln!(out, "{}", cells.join("\t"));
                table.push(r);
            }
            // Rows whose rate measurement is unstable are reported, not fatal.
            Err(e) => {
                let _ = writeln!(out, "NA\t{}", e.kind());
            }
        }
    }
    for (i, r) in table.iter().enumerate() {
        let cells: Vec<String> = r.iter().map(f64::to_string).collect();
        file.scalar(&format!("calibration_{}", i + 1), cells.join(" "));
    }
    write_out(&args.shared, &file)?;
    Ok(out)
}
