use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use blendmatch::config::RunConfig;
use blendmatch::datagen::{ampute, gen_population, GenConfig, Mechanism, MissingnessConfig};
use blendmatch::distance::{distance_table, mahalanobis_distance, DistanceRow};
use blendmatch::harness::tables::{write_manifest, write_study1_tables, write_study2_tables};
use blendmatch::harness::{
    run_study1, run_study2, ConditionGrid, Study1Config, Study2Config, DEFAULT_K,
};
use blendmatch::imputer::{
    multiple_impute, pool_mean, ImputeOptions, MatchType, PreparedImputation,
};
use blendmatch::io::{read_dataset, write_dataset, write_distance_table, write_imputations};
use blendmatch::linear_model::predict_row;
use blendmatch::rng::{stream, substream};
use blendmatch::{BlendFamily, BlendSpec, CovarianceEstimate, Dataset, Error, PoolingMode};

use crate::table::{num, render};
use crate::{Cli, Command, DataArgs, MethodArgs, DEFAULT_SEED};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl CliError {
    /// 1 usage, 2 malformed input, 3 data or numerical problem, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) => match e {
                Error::InvalidArgument(_) | Error::Empty(_) => 1,
                Error::Parse(_) => 2,
                Error::Csv { source, .. } => {
                    if source.is_io_error() {
                        4
                    } else {
                        2
                    }
                }
                Error::Dimension(_) | Error::Dataset(_) | Error::Singular(_) => 3,
                Error::Io { .. } => 4,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn io_err(path: &Path, source: io::Error) -> CliError {
    CliError::Lib(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Flag value first, then the config file, then nothing.
struct Settings {
    file: RunConfig,
}

impl Settings {
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file
            .get(key)
            .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    fn flag(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.pick(None::<bool>, key)?.unwrap_or(false))
    }

    /// A blend spec; a lone `--blend` means the ranked family.
    fn spec(
        &self,
        m: &MethodArgs,
        default_family: BlendFamily,
        default_p: f64,
    ) -> CliResult<BlendSpec> {
        let blend = self.pick(m.blend, "blend")?;
        check_blend(blend)?;
        let family = self
            .pick(m.family, "family")?
            .unwrap_or(if blend.is_some() {
                BlendFamily::Ranked
            } else {
                default_family
            });
        let k = self.or(m.k, "k", DEFAULT_K)?;
        let p = if family == BlendFamily::Pmm {
            1.0
        } else {
            blend.unwrap_or(default_p)
        };
        Ok(BlendSpec::new(family, p, k)?)
    }
}

fn check_blend(blend: Option<f64>) -> CliResult {
    match blend {
        Some(p) if !(0.0..=1.0).contains(&p) => Err(CliError::Usage(format!(
            "blend factor must lie in [0, 1], got {p}"
        ))),
        _ => Ok(()),
    }
}

pub fn run(cli: Cli) -> CliResult {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let settings = Settings { file };
    if let Some(threads) = settings.pick(cli.threads, "threads")? {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let seed = settings.pick(cli.seed, "seed")?;
    let quiet = cli.quiet;
    match cli.command {
        Command::Match {
            input,
            target_row,
            method,
            out,
        } => {
            let target = settings.or(target_row, "target-row", 0)?;
            let spec = settings.spec(&method, BlendFamily::Pmm, 1.0)?;
            cmd_match(
                &input,
                target,
                spec,
                seed.unwrap_or(DEFAULT_SEED),
                out.as_deref(),
                quiet,
            )
        }
        Command::Impute {
            input,
            method,
            m,
            out,
        } => {
            let spec = settings.spec(&method, BlendFamily::Pmm, 1.0)?;
            let m = settings.or(m, "m", 5)?;
            cmd_impute(
                &input,
                spec,
                m,
                seed.unwrap_or(DEFAULT_SEED),
                out.as_deref(),
                quiet,
            )
        }
        Command::Generate {
            n,
            data,
            with_truth,
            out,
        } => {
            let n = settings.or(n, "n", 500)?;
            let with_truth = settings.flag(with_truth, "with-truth")?;
            cmd_generate(
                &settings,
                n,
                &data,
                with_truth,
                seed.unwrap_or(DEFAULT_SEED),
                &out,
                quiet,
            )
        }
        Command::Study1 {
            nsim,
            m,
            pooling,
            data,
            method,
            out,
        } => {
            let defaults = Study1Config::default();
            let config = Study1Config {
                nsim: settings.or(nsim, "nsim", defaults.nsim)?,
                m_per_sim: settings.or(m, "m", defaults.m_per_sim)?,
                pooling: settings.or(pooling, "pooling", defaults.pooling)?,
                seed: seed.unwrap_or(defaults.seed),
                ..defaults
            };
            let grid = study1_grid(&settings, &data, &method)?;
            let out = settings.or(out, "out", PathBuf::from("study1_out"))?;
            cmd_study1(&grid, &config, &out, quiet)
        }
        Command::Study2 {
            nsim,
            m,
            k,
            rho,
            skewed,
            fixed_sample,
            out,
        } => {
            let defaults = Study2Config::default();
            let config = Study2Config {
                nsim: settings.or(nsim, "nsim", defaults.nsim)?,
                m: settings.or(m, "m", defaults.m)?,
                k: settings.or(k, "k", defaults.k)?,
                rho: settings.or(rho, "rho", defaults.rho)?,
                skewed: settings.or(skewed, "skewed", defaults.skewed)?,
                fixed_sample: settings.flag(fixed_sample, "fixed-sample")?,
                seed: seed.unwrap_or(defaults.seed),
                ..defaults
            };
            let out = settings.or(out, "out", PathBuf::from("study2_out"))?;
            cmd_study2(&config, &out, quiet)
        }
        Command::DemoFigure1 { method, out } => {
            let spec = settings.spec(&method, BlendFamily::Ranked, 0.5)?;
            let out = settings.or(out, "out", PathBuf::from("figure1_out"))?;
            cmd_figure1(spec, seed.unwrap_or(DEFAULT_SEED), &out, quiet)
        }
    }
}

/// Full distance table of every donor to `target`, indexed by dataset row.
fn donor_distances(
    prepared: &PreparedImputation<'_>,
    data: &Dataset,
    target: usize,
    cov: &CovarianceEstimate,
) -> CliResult<Vec<DistanceRow>> {
    let beta = prepared.fit().beta_hat();
    let donors = prepared.donors();
    let donor_x = data.x().select_rows(donors);
    let preds: Vec<f64> = donors
        .iter()
        .map(|&i| predict_row(beta, &data.row(i)))
        .collect();
    let target_x = data.row(target);
    let mut rows = distance_table(
        &donor_x,
        &preds,
        &target_x,
        predict_row(beta, &target_x),
        cov,
    )?;
    for r in &mut rows {
        r.index = donors[r.index];
    }
    Ok(rows)
}

fn write_file<F>(path: &Path, body: F) -> CliResult
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn print_stdout(text: &str) -> CliResult {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| io_err(Path::new("<stdout>"), e))
}

/// The best `k` donors for `target`, with the outcome of `target` hidden.
fn best_donors(
    data: &Dataset,
    target: usize,
    spec: BlendSpec,
    seed: u64,
) -> CliResult<(Dataset, Vec<blendmatch::imputer::DonorMatch>)> {
    if target >= data.n() {
        return Err(CliError::Lib(Error::Dimension(format!(
            "target row {target} out of range for {} rows",
            data.n()
        ))));
    }
    let mut mask = data.observed().to_vec();
    mask[target] = false;
    let masked = data.remask(mask)?;
    let options = ImputeOptions {
        match_type: MatchType::Type0,
        ..Default::default()
    };
    let matches = {
        let prepared = PreparedImputation::new(&masked, spec, options)?;
        prepared.match_target(target, prepared.fit().beta_hat(), &mut stream(seed))?
    };
    Ok((masked, matches))
}

fn match_rows(
    matches: &[blendmatch::imputer::DonorMatch],
    data: &Dataset,
    target: usize,
    cov: &CovarianceEstimate,
) -> CliResult<Vec<Vec<String>>> {
    let target_x = data.row(target);
    matches
        .iter()
        .map(|d| {
            let md = match d.md {
                Some(md) => md,
                None => mahalanobis_distance(&data.row(d.row), &target_x, cov)?,
            };
            Ok(vec![d.row.to_string(), num(d.pd), num(md), num(d.score)])
        })
        .collect()
}

const MATCH_HEADER: [&str; 4] = ["index", "pd", "md", "blend_value"];

fn cmd_match(
    input: &Path,
    target: usize,
    spec: BlendSpec,
    seed: u64,
    out: Option<&Path>,
    quiet: bool,
) -> CliResult {
    let data = read_dataset(input)?;
    let (masked, matches) = best_donors(&data, target, spec, seed)?;
    let cov = CovarianceEstimate::estimate(data.x())?;
    if let Some(path) = out {
        let options = ImputeOptions {
            match_type: MatchType::Type0,
            ..Default::default()
        };
        let prepared = PreparedImputation::new(&masked, spec, options)?;
        let rows = donor_distances(&prepared, &masked, target, &cov)?;
        write_file(path, |w| write_distance_table(w, &rows))?;
    }
    let rows = match_rows(&matches, &data, target, &cov)?;
    if !quiet {
        println!("target row {target}, method {}", spec.label());
    }
    print_stdout(&render(&MATCH_HEADER, &rows, quiet))
}

fn cmd_impute(
    input: &Path,
    spec: BlendSpec,
    m: usize,
    seed: u64,
    out: Option<&Path>,
    quiet: bool,
) -> CliResult {
    let data = read_dataset(input)?;
    let result = multiple_impute(&data, spec, ImputeOptions::default(), m, seed)?;
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_err(path, e))?;
            write_imputations(BufWriter::new(file), &result)?;
        }
        None => write_imputations(io::stdout().lock(), &result)?,
    }
    if quiet || m < 2 {
        return Ok(());
    }
    let pooled = pool_mean(&result, PoolingMode::Rubin)?;
    let summary = format!(
        "{} missing of {}, m = {m}, method {}\npooled mean {:.4} (se {:.4}, 95% CI {:.4} to {:.4}, df {:.1})\n",
        data.missing_rows().len(),
        data.n(),
        spec.label(),
        pooled.qbar,
        pooled.se(),
        pooled.ci_lower,
        pooled.ci_upper,
        pooled.df
    );
    // keep stdout clean when it carries the CSV
    if out.is_some() {
        print_stdout(&summary)
    } else {
        eprint!("{summary}");
        Ok(())
    }
}

fn cmd_generate(
    settings: &Settings,
    n: usize,
    args: &DataArgs,
    with_truth: bool,
    seed: u64,
    out: &Path,
    quiet: bool,
) -> CliResult {
    let rho = settings.or(args.rho, "rho", 0.0)?;
    let skewed = settings.or(args.skewed, "skewed", false)?;
    let mechanism = settings.or(args.mechanism, "mechanism", Mechanism::Mcar)?;
    let proportion = settings.or(args.proportion, "proportion", 0.25)?;
    let gen = GenConfig::new(n, rho, skewed, seed);
    gen.validate()?;
    let population = gen_population(&gen, &mut substream(seed, &[0]))?;
    let miss = MissingnessConfig::new(mechanism, proportion, seed)?;
    let mask = ampute(
        population.y(),
        population.x(),
        &miss,
        &mut substream(seed, &[1]),
    )?;
    let data = population.remask(mask)?;
    let truth = with_truth.then(|| population.y());
    write_dataset(out, &data, truth)?;
    if !quiet {
        println!(
            "wrote {} rows ({} missing) to {}",
            data.n(),
            data.missing_rows().len(),
            out.display()
        );
    }
    Ok(())
}

fn study1_grid(
    settings: &Settings,
    data: &DataArgs,
    method: &MethodArgs,
) -> CliResult<ConditionGrid> {
    let k = settings.or(method.k, "k", DEFAULT_K)?;
    let mut grid = ConditionGrid::standard(k)?;
    if let Some(mech) = settings.pick(data.mechanism, "mechanism")? {
        grid.mechanisms.retain(|&x| x == mech);
    }
    if let Some(prop) = settings.pick(data.proportion, "proportion")? {
        grid.proportions.retain(|&x| x == prop);
    }
    if let Some(rho) = settings.pick(data.rho, "rho")? {
        grid.correlations.retain(|&x| x == rho);
    }
    if let Some(skewed) = settings.pick(data.skewed, "skewed")? {
        grid.distributions.retain(|&x| x == skewed);
    }
    let family = settings.pick(method.family, "family")?;
    let blend = settings.pick(method.blend, "blend")?;
    check_blend(blend)?;
    grid.methods.retain(|m| {
        family.map_or(true, |f| m.spec.family() == f)
            && blend.map_or(true, |p| {
                m.spec.family() != BlendFamily::Pmm && m.spec.p() == p
            })
    });
    if grid.n_cells() == 0 {
        return Err(CliError::Usage(
            "the filters leave no condition or method to run".into(),
        ));
    }
    Ok(grid)
}

fn cmd_study1(grid: &ConditionGrid, config: &Study1Config, out: &Path, quiet: bool) -> CliResult {
    create_dir(out)?;
    let output = run_study1(grid, config)?;
    let written = write_study1_tables(&output, out)?;
    write_manifest(
        out,
        &[
            ("study".into(), "1".into()),
            ("seed".into(), config.seed.to_string()),
            ("nsim".into(), config.nsim.to_string()),
            ("m".into(), config.m_per_sim.to_string()),
            ("n".into(), config.n.to_string()),
            ("pooling".into(), config.pooling.as_str().into()),
            ("cells".into(), grid.n_cells().to_string()),
            (
                "failed_replicates".into(),
                output.failures.len().to_string(),
            ),
        ],
    )?;
    let rows: Vec<Vec<String>> = output
        .rows
        .iter()
        .map(|r| {
            vec![
                r.condition.label(),
                r.method.label(),
                num(r.qbar),
                num(r.bias),
                num(r.se),
                format!("{:.3}", r.cov),
            ]
        })
        .collect();
    let header = ["condition", "method", "qbar", "bias", "se", "cov"];
    if quiet {
        return print_stdout(&render(&header, &rows, true));
    }
    print_stdout(&render(&header, &rows, false))?;
    println!(
        "{} cells, {} failed replicates; {} files in {}",
        output.rows.len(),
        output.failures.len(),
        written.len() + 1,
        out.display()
    );
    Ok(())
}

fn cmd_study2(config: &Study2Config, out: &Path, quiet: bool) -> CliResult {
    create_dir(out)?;
    let output = run_study2(config)?;
    let written = write_study2_tables(&output, out)?;
    write_manifest(
        out,
        &[
            ("study".into(), "2".into()),
            ("seed".into(), config.seed.to_string()),
            ("nsim".into(), config.nsim.to_string()),
            ("m".into(), config.m.to_string()),
            ("k".into(), config.k.to_string()),
            ("n".into(), config.n.to_string()),
            ("rho".into(), config.rho.to_string()),
            ("skewed".into(), config.skewed.to_string()),
            ("fixed_sample".into(), config.fixed_sample.to_string()),
            (
                "failed_replicates".into(),
                output.failures.len().to_string(),
            ),
        ],
    )?;
    let rows: Vec<Vec<String>> = output
        .rows
        .iter()
        .map(|r| {
            vec![
                r.method.label(),
                num(r.estimate),
                num(r.bias),
                num(r.se),
                format!("{:.3}", r.cov),
                num(r.rmse),
            ]
        })
        .collect();
    let header = ["method", "estimate", "bias", "se", "cov", "rmse"];
    print_stdout(&render(&header, &rows, quiet))?;
    if !quiet {
        println!(
            "{} failed replicates; {} files in {}",
            output.failures.len(),
            written.len() + 1,
            out.display()
        );
    }
    Ok(())
}

/// Donor rows for the scatter: one synthetic sample of 200, row 0 is the
/// target and the other 199 are donors.
pub const FIGURE1_N: usize = 200;

fn cmd_figure1(spec: BlendSpec, seed: u64, out: &Path, quiet: bool) -> CliResult {
    create_dir(out)?;
    let gen = GenConfig::new(FIGURE1_N, 0.7, false, seed);
    let data = gen_population(&gen, &mut substream(seed, &[0]))?;
    let (masked, matches) = best_donors(&data, 0, spec, seed)?;
    let cov = CovarianceEstimate::estimate(data.x())?;
    let prepared = PreparedImputation::new(
        &masked,
        spec,
        ImputeOptions {
            match_type: MatchType::Type0,
            ..Default::default()
        },
    )?;
    let table = donor_distances(&prepared, &masked, 0, &cov)?;
    write_file(&out.join("figure1.csv"), |w| {
        write_distance_table(w, &table)
    })?;
    let rows = match_rows(&matches, &data, 0, &cov)?;
    write_file(&out.join("figure1_matches.csv"), |w| {
        writeln!(w, "{}", MATCH_HEADER.join(","))?;
        for r in &rows {
            writeln!(w, "{}", r.join(","))?;
        }
        Ok(())
    })?;
    if !quiet {
        println!(
            "{} donors, method {}; wrote figure1.csv and figure1_matches.csv to {}",
            table.len(),
            spec.label(),
            out.display()
        );
    }
    print_stdout(&render(&MATCH_HEADER, &rows, quiet))
}
