use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use mixedfs::czdecomp::{cz_decompose, summarize, verify_decomposition};
use mixedfs::czo::{commutator, KernelSpec};
use mixedfs::harness::{run, ExperimentConfig, InequalityReport};
use mixedfs::orlicz::{luxemburg, maximal, LuxemburgQuery};
use mixedfs::weights::{weight_constant, WeightClass};
use mixedfs::{DyadicCube, Family, Grid, SampledFunction, YoungSpec};

const THREADS_ENV: &str = "MIXEDFS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "mixedfs", version, about = "Weighted maximal operators, weight constants and CZ decompositions on a dyadic grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment config and report the measured constants.
    Verify(VerifyArgs),
    /// Weight-class constant of a weight family.
    Constants(ConstantsArgs),
    /// Calderón–Zygmund decomposition with property verdicts.
    Decompose(DecomposeArgs),
    /// Generalized weighted maximal function.
    Maximal(MaximalArgs),
    /// Luxemburg average on one dyadic cube.
    Luxemburg(LuxemburgArgs),
    /// Truncated Hilbert transform or its iterated commutator.
    Transform(TransformArgs),
    /// Re-emit a saved verify report, e.g. as CSV.
    Report(ReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug, Serialize)]
struct Output {
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
}

#[derive(Args, Debug, Serialize)]
struct GridArgs {
    #[arg(long, default_value_t = 10)]
    levels: u32,
    /// Domain as `lo,hi`.
    #[arg(long, default_value = "0,1")]
    domain: String,
}

impl GridArgs {
    fn grid(&self) -> anyhow::Result<Grid> {
        let (lo, hi) = self
            .domain
            .split_once(',')
            .ok_or_else(|| anyhow!("--domain must be 'lo,hi', got '{}'", self.domain))?;
        let lo: f64 = lo.trim().parse().context("--domain lower end")?;
        let hi: f64 = hi.trim().parse().context("--domain upper end")?;
        Ok(Grid::new(lo, hi, self.levels)?)
    }
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct ConstantsArgs {
    #[arg(long)]
    weight: String,
    /// `A1`, `A<p>`, `Ap(<p>)`, `RH<s>`, `RHinf` or `BMO`.
    #[arg(long)]
    class: String,
    /// Base measure `u` for `A_p(u)`.
    #[arg(long)]
    base: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct DecomposeArgs {
    #[arg(long)]
    f: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value = "const:1")]
    v: String,
    #[arg(long)]
    lambda: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct MaximalArgs {
    #[arg(long)]
    f: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value = "const:1")]
    w: String,
    #[arg(long, default_value = "identity")]
    phi: String,
    /// Compose `k` times with `phi = identity` instead.
    #[arg(long)]
    iterate: Option<u32>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct LuxemburgArgs {
    #[arg(long)]
    f: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value = "const:1")]
    w: String,
    #[arg(long)]
    phi: String,
    /// Cube as `level,index`.
    #[arg(long, default_value = "0,0")]
    cube: String,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct TransformArgs {
    #[arg(long)]
    f: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Symbol of the commutator; required when `m > 0`.
    #[arg(long)]
    b: Option<String>,
    #[arg(long, default_value_t = 0)]
    m: u32,
    /// Cells excluded around the diagonal.
    #[arg(long, default_value_t = 1)]
    truncation: usize,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    output: Output,
}

/// A rendered artifact and whether every check behind it passed.
struct Artifact {
    body: String,
    passed: bool,
}

fn family(s: &str) -> anyhow::Result<Family> {
    Ok(s.parse::<Family>()?)
}

fn sample(fam: &str, scale: f64, grid: &Grid) -> anyhow::Result<SampledFunction> {
    let f = family(fam)?.sample(grid)?;
    Ok(if scale == 1.0 { f } else { f.scale(scale)? })
}

fn json_artifact(command: &str, config: &impl Serialize, result: Value, passed: bool) -> Artifact {
    let doc = json!({ "command": command, "config": config, "result": result, "passed": passed });
    Artifact { body: serde_json::to_string_pretty(&doc).expect("json") + "\n", passed }
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn function_csv(grid: &Grid, f: &SampledFunction, out: &SampledFunction) -> anyhow::Result<String> {
    let xs = grid.midpoints();
    csv_rows(
        &["x", "f", "value"],
        (0..grid.len()).map(|i| vec![xs[i].to_string(), f.values()[i].to_string(), out.values()[i].to_string()]),
    )
}

fn report_artifact(report: &InequalityReport, format: Format) -> anyhow::Result<Artifact> {
    let body = match format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv()?,
    };
    Ok(Artifact { body, passed: report.passed })
}

fn verify(args: &VerifyArgs) -> anyhow::Result<Artifact> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    report_artifact(&run(&cfg)?, args.output.format)
}

fn constants(args: &ConstantsArgs) -> anyhow::Result<Artifact> {
    let grid = args.grid.grid()?;
    let class: WeightClass = args.class.parse()?;
    let w = family(&args.weight)?.sample(&grid)?;
    let base = args.base.as_deref().map(|b| family(b).and_then(|f| Ok(f.sample(&grid)?))).transpose()?;
    let report = weight_constant(&w, class, base.as_ref())?;
    let passed = report.constant.is_finite();
    if args.output.format == Format::Csv {
        let body = csv_rows(
            &["class", "constant", "witness_level", "witness_index", "levels_scanned"],
            [vec![
                report.class_name.to_string(),
                report.constant.to_string(),
                report.witness_cube.level.to_string(),
                report.witness_cube.index.to_string(),
                report.levels_scanned.to_string(),
            ]],
        )?;
        return Ok(Artifact { body, passed });
    }
    Ok(json_artifact("constants", args, serde_json::to_value(report)?, passed))
}

fn decompose(args: &DecomposeArgs) -> anyhow::Result<Artifact> {
    let grid = args.grid.grid()?;
    let f = sample(&args.f, args.scale, &grid)?;
    let v = family(&args.v)?.sample(&grid)?;
    let d = cz_decompose(&f, &v, args.lambda)?;
    let verification = verify_decomposition(&d, &f, &v)?;
    let passed = verification.all_pass();
    if args.output.format == Format::Csv {
        let body = csv_rows(
            &["level", "index", "weighted_average"],
            d.cubes
                .iter()
                .zip(&d.weighted_averages)
                .map(|(c, a)| vec![c.level.to_string(), c.index.to_string(), a.to_string()]),
        )?;
        return Ok(Artifact { body, passed });
    }
    Ok(json_artifact("decompose", args, serde_json::to_value(summarize(&d, verification))?, passed))
}

fn maximal_cmd(args: &MaximalArgs) -> anyhow::Result<Artifact> {
    let grid = args.grid.grid()?;
    let f = sample(&args.f, args.scale, &grid)?;
    let w = family(&args.w)?.sample(&grid)?;
    let out = match args.iterate {
        Some(k) => mixedfs::orlicz::iterated_maximal(&f, &w, k)?,
        None => maximal(&f, &w, &args.phi.parse::<YoungSpec>()?)?,
    };
    if args.output.format == Format::Csv {
        return Ok(Artifact { body: function_csv(&grid, &f, &out)?, passed: true });
    }
    let result = json!({ "midpoints": grid.midpoints(), "values": out.values() });
    Ok(json_artifact("maximal", args, result, true))
}

fn luxemburg_cmd(args: &LuxemburgArgs) -> anyhow::Result<Artifact> {
    let grid = args.grid.grid()?;
    let f = sample(&args.f, args.scale, &grid)?;
    let w = family(&args.w)?.sample(&grid)?;
    let phi: YoungSpec = args.phi.parse()?;
    let (level, index) = args
        .cube
        .split_once(',')
        .ok_or_else(|| anyhow!("--cube must be 'level,index', got '{}'", args.cube))?;
    let cube = DyadicCube::new(level.trim().parse()?, index.trim().parse()?);
    let q = LuxemburgQuery::new(&f, &w, cube, &phi);
    let norm = luxemburg(&q)?;
    let inf_form = mixedfs::orlicz::equivalent_infimum_form(&q)?;
    if args.output.format == Format::Csv {
        let body = csv_rows(&["norm", "infimum_form"], [vec![norm.to_string(), inf_form.to_string()]])?;
        return Ok(Artifact { body, passed: true });
    }
    Ok(json_artifact("luxemburg", args, json!({ "norm": norm, "infimum_form": inf_form }), true))
}

fn transform(args: &TransformArgs) -> anyhow::Result<Artifact> {
    let grid = args.grid.grid()?;
    let f = sample(&args.f, args.scale, &grid)?;
    let b = match (&args.b, args.m) {
        (Some(b), _) => family(b)?.sample(&grid)?,
        (None, 0) => SampledFunction::zeros(grid),
        (None, _) => bail!("--b is required when --m > 0"),
    };
    let out = commutator(&f, &b, args.m, &KernelSpec::hilbert(args.truncation))?;
    if args.output.format == Format::Csv {
        return Ok(Artifact { body: function_csv(&grid, &f, &out)?, passed: true });
    }
    let result = json!({ "midpoints": grid.midpoints(), "values": out.values() });
    Ok(json_artifact("transform", args, result, true))
}

fn report(args: &ReportArgs) -> anyhow::Result<Artifact> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let report: InequalityReport = serde_json::from_str(&text).context("parsing report")?;
    report_artifact(&report, args.output.format)
}

fn execute(cli: &Cli) -> anyhow::Result<(Artifact, Option<&PathBuf>)> {
    Ok(match &cli.command {
        Command::Verify(a) => (verify(a)?, a.output.out.as_ref()),
        Command::Constants(a) => (constants(a)?, a.output.out.as_ref()),
        Command::Decompose(a) => (decompose(a)?, a.output.out.as_ref()),
        Command::Maximal(a) => (maximal_cmd(a)?, a.output.out.as_ref()),
        Command::Luxemburg(a) => (luxemburg_cmd(a)?, a.output.out.as_ref()),
        Command::Transform(a) => (transform(a)?, a.output.out.as_ref()),
        Command::Report(a) => (report(a)?, a.output.out.as_ref()),
    })
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(n) = std::env::var(THREADS_ENV) {
        let n: usize = n.parse().with_context(|| format!("{THREADS_ENV} must be a positive integer"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| execute(&cli)).and_then(|(artifact, out)| {
        match out {
            Some(path) => fs::write(path, &artifact.body).with_context(|| format!("writing {}", path.display()))?,
            None => print!("{}", artifact.body),
        }
        Ok(artifact.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("mixedfs: one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("mixedfs: {e:#}");
            ExitCode::from(2)
        }
    }
}
