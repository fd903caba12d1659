use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use smallworld::analytic::{curve_csv, delivery_table};
use smallworld::experiments::{
    analytic_curve_on_grid, analytic_grid_csv, analytic_reference, convergence_study, derive_seed, is_non_increasing,
    median, region_csv, run_trial, run_trials, summarize, summary_csv, sweep_separation, tail_csv, tail_probability,
    validate_lrc_distribution, SummaryRow, SweepSpec, TailReport,
};
use smallworld::routing::check_trajectory;
use smallworld::NetworkConfig;

use crate::args::{AnalyticArgs, Command, Format, SimulateArgs, StudyArgs, SweepArgs, ValidateLrcArgs};
use crate::settings::{self, FileLayer, Geometry, Output, Sim};
use crate::CliError;

const DEFAULT_TRIALS: usize = 1000;
const DEFAULT_DRAWS: usize = 10_000;
const DEFAULT_N: &[usize] = &[2000];
const DEFAULT_STUDY_N: &[usize] = &[500, 2000, 8000];

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Analytic(a) => analytic(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Convergence(a) => convergence(a),
        Command::Tail(a) => tail(a),
        Command::ValidateLrc(a) => validate_lrc(a),
    }
}

fn analytic(args: AnalyticArgs) -> Result<(), CliError> {
    let file = FileLayer::load(args.output.config.as_deref())?;
    let geo = Geometry::resolve(&args.geometry, &file)?;
    let out = Output::resolve(&args.output, &file)?;
    let curve = delivery_table(geo.side, geo.range)?;
    let body = match out.format {
        Format::Csv => curve_csv(&curve),
        Format::Json => json(&curve.rows())?,
    };
    emit(&[(out.out.clone(), body)])?;
    note(
        &out,
        &format!(
            "R/r = {}  k_max = {}  alpha = {}  plateau g = {}",
            geo.side / geo.range,
            curve.k_max(),
            curve.params().alpha(),
            curve.plateau()
        ),
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let file = FileLayer::load(args.output.config.as_deref())?;
    let geo = Geometry::resolve(&args.geometry, &file)?;
    let out = Output::resolve(&args.output, &file)?;
    let sim = Sim::resolve(&args.sim, &geo, &file, DEFAULT_TRIALS)?;
    let n_list = settings::relay_list(args.relays.as_deref(), &file, DEFAULT_N)?;
    let d = settings::separation(args.separation, &file, &geo)?;
    sim.template.check_separation(d)?;

    let (rows, violations) = with_threads(sim.threads, || -> Result<_, CliError> {
        let mut rows = Vec::new();
        let mut violations = 0;
        for &n in &n_list {
            let config = NetworkConfig { relays: n, ..sim.template };
            let records = run_trials(&config, d, sim.trials)?;
            violations += records.iter().filter(|r| !r.violations.is_empty()).count();
            rows.push(summarize(&config, d, &records, analytic_reference(&config, d)?));
        }
        Ok((rows, violations))
    })??;

    let mut files = vec![(out.out.clone(), rows_body(&rows, out.format)?)];
    if let Some(path) = &args.dump {
        let config = NetworkConfig { relays: n_list[0], seed: derive_seed(sim.template.seed, 0), ..sim.template };
        let (instance, outcome) = run_trial(&config, d)?;
        let checks = check_trajectory(&instance, &outcome);
        #[derive(Serialize)]
        struct Dump<'a> {
            instance: smallworld::network::InstanceDump<f64>,
            outcome: &'a smallworld::RoutingOutcome,
            violations: Vec<String>,
        }
        let dump = Dump {
            instance: instance.to_dump(),
            outcome: &outcome,
            violations: checks.iter().map(|v| format!("{v:?}")).collect(),
        };
        files.push((Some(path.clone()), json(&dump)?));
    }
    emit(&files)?;
    for row in &rows {
        note(&out, &row_summary(row));
    }
    if violations > 0 {
        return Err(CliError::Runtime(format!("{violations} trajectories broke a routing invariant")));
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let file = FileLayer::load(args.output.config.as_deref())?;
    let geo = Geometry::resolve(&args.geometry, &file)?;
    let out = Output::resolve(&args.output, &file)?;
    let grid = settings::d_grid(args.d_grid.as_deref(), &file, &geo)?;

    if args.analytic_only {
        let points = analytic_curve_on_grid(geo.side, geo.range, &grid)?;
        let body = match out.format {
            Format::Csv => analytic_grid_csv(&points),
            Format::Json => json(&points)?,
        };
        return emit(&[(out.out.clone(), body)]);
    }

    let sim = Sim::resolve(&args.sim, &geo, &file, DEFAULT_TRIALS)?;
    let spec = SweepSpec {
        template: sim.template,
        grid,
        trials: sim.trials,
        n_list: settings::relay_list(args.relays.as_deref(), &file, DEFAULT_N)?,
    };
    let result = with_threads(sim.threads, || sweep_separation(&spec))??;
    let analytic_body = match out.format {
        Format::Csv => analytic_grid_csv(&result.analytic),
        Format::Json => json(&result.analytic)?,
    };
    let mut files = vec![(out.out.clone(), rows_body(&result.rows, out.format)?)];
    if let Some(path) = &out.out {
        files.push((Some(sibling(path, "_analytic")), analytic_body));
    }
    emit(&files)?;
    let worst = result.rows.iter().map(|r| r.fail_rate).fold(0.0, f64::max);
    note(&out, &format!("{} cells, worst fail rate {worst}", result.rows.len()));
    Ok(())
}

struct Study {
    out: Output,
    sim: Sim,
    n_list: Vec<usize>,
    d: f64,
    seeds: Vec<u64>,
}

impl Study {
    fn resolve(args: &StudyArgs) -> Result<Self, CliError> {
        let file = FileLayer::load(args.output.config.as_deref())?;
        let geo = Geometry::resolve(&args.geometry, &file)?;
        let out = Output::resolve(&args.output, &file)?;
        let sim = Sim::resolve(&args.sim, &geo, &file, DEFAULT_TRIALS)?;
        let n_list = settings::relay_list(args.relays.as_deref(), &file, DEFAULT_STUDY_N)?;
        let d = settings::separation(args.separation, &file, &geo)?;
        sim.template.check_separation(d)?;
        let count = settings::seed_count(args.seeds, &file)?;
        let seeds = (0..count as u64).map(|i| sim.template.seed.wrapping_add(i)).collect();
        Ok(Self { out, sim, n_list, d, seeds })
    }
}

fn convergence(args: StudyArgs) -> Result<(), CliError> {
    let s = Study::resolve(&args)?;
    let per_seed = with_threads(s.sim.threads, || {
        s.seeds
            .iter()
            .map(|&seed| {
                let template = NetworkConfig { seed, ..s.sim.template };
                convergence_study(&template, s.d, &s.n_list, s.sim.trials)
            })
            .collect::<smallworld::Result<Vec<_>>>()
    })??;

    let rows: Vec<(u64, SummaryRow)> = s
        .seeds
        .iter()
        .zip(&per_seed)
        .flat_map(|(&seed, report)| report.rows.iter().map(move |r| (seed, r.clone())))
        .collect();
    let body = match s.out.format {
        Format::Csv => with_seed_column(summary_csv(&rows.iter().map(|r| r.1.clone()).collect::<Vec<_>>()), &rows),
        Format::Json => json(&rows.iter().map(|(seed, row)| Seeded { seed: *seed, row }).collect::<Vec<_>>())?,
    };
    emit(&[(s.out.out.clone(), body)])?;

    let medians: Vec<f64> = (0..s.n_list.len())
        .map(|i| median(&per_seed.iter().map(|r| r.rows[i].abs_error).collect::<Vec<_>>()))
        .collect();
    for (n, m) in s.n_list.iter().zip(&medians) {
        note(&s.out, &format!("n = {n}: median abs_error = {m}"));
    }
    if medians.len() >= 3 {
        note(&s.out, &format!("median abs_error non-increasing in n: {}", is_non_increasing(&medians)));
    }
    Ok(())
}

fn tail(args: StudyArgs) -> Result<(), CliError> {
    let s = Study::resolve(&args)?;
    let reports: Vec<(u64, TailReport)> = with_threads(s.sim.threads, || {
        let mut out = Vec::new();
        for &seed in &s.seeds {
            for &n in &s.n_list {
                let config = NetworkConfig { relays: n, seed, ..s.sim.template };
                out.push((seed, tail_probability(&config, s.d, s.sim.trials)?));
            }
        }
        Ok::<_, smallworld::Error>(out)
    })??;
    let body = match s.out.format {
        Format::Csv => {
            let plain: Vec<TailReport> = reports.iter().map(|r| r.1.clone()).collect();
            with_seed_column(tail_csv(&s.sim.template, &plain), &reports)
        }
        Format::Json => json(&reports.iter().map(|(seed, row)| Seeded { seed: *seed, row }).collect::<Vec<_>>())?,
    };
    emit(&[(s.out.out.clone(), body)])?;
    for &n in &s.n_list {
        let p: Vec<f64> = reports.iter().filter(|r| r.1.n == n).map(|r| r.1.p_exceed).collect();
        let over: usize = reports.iter().filter(|r| r.1.n == n).map(|r| r.1.delivered_over_bound).sum();
        note(
            &s.out,
            &format!(
                "n = {n}: B = {}  median P(tau > B) = {}  delivered runs over B = {over}",
                reports[0].1.bound,
                median(&p)
            ),
        );
    }
    Ok(())
}

fn validate_lrc(args: ValidateLrcArgs) -> Result<(), CliError> {
    let file = FileLayer::load(args.output.config.as_deref())?;
    let geo = Geometry::resolve(&args.geometry, &file)?;
    let out = Output::resolve(&args.output, &file)?;
    let sim = Sim::resolve(&args.sim, &geo, &file, DEFAULT_DRAWS)?;
    let n = settings::relay_list(args.relays.as_deref(), &file, &[1000])?;
    if n.len() != 1 {
        return Err(CliError::Validation("validate-lrc takes a single relay count".into()));
    }
    let node = settings::node(args.node.as_deref(), &file, &geo)?;
    let regions = settings::regions(&args.regions, &file, &geo)?;
    let config = NetworkConfig { relays: n[0], ..sim.template };
    let checks = with_threads(sim.threads, || validate_lrc_distribution(&config, node, &regions, sim.trials))??;
    let body = match out.format {
        Format::Csv => region_csv(&checks),
        Format::Json => json(&checks)?,
    };
    emit(&[(out.out.clone(), body)])?;
    let worst = checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    note(&out, &format!("{} regions, max |z| = {worst}", checks.len()));
    Ok(())
}

#[derive(Serialize)]
struct Seeded<'a, T> {
    seed: u64,
    #[serde(flatten)]
    row: &'a T,
}

fn with_seed_column<T>(csv: String, rows: &[(u64, T)]) -> String {
    let mut lines = csv.lines();
    let mut out = format!("seed,{}\n", lines.next().unwrap_or_default());
    for (line, (seed, _)) in lines.zip(rows) {
        out.push_str(&format!("{seed},{line}\n"));
    }
    out
}

fn rows_body(rows: &[SummaryRow], format: Format) -> Result<String, CliError> {
    match format {
        Format::Csv => Ok(summary_csv(rows)),
        Format::Json => json(&rows),
    }
}

fn row_summary(r: &SummaryRow) -> String {
    format!(
        "d/r = {}  n = {}  trials = {}  mean tau (delivered) = {}  fail rate = {}  analytic = {}  |error| = {}",
        r.d_over_r, r.n, r.trials, r.mean_delivered, r.fail_rate, r.analytic_g, r.abs_error
    )
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// `dir/name.ext` -> `dir/name<suffix>.ext`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Writes every file only after all bodies are ready: each goes to a temporary file
/// in its destination directory and is renamed into place. `None` means stdout.
fn emit(files: &[(Option<PathBuf>, String)]) -> Result<(), CliError> {
    let mut staged = Vec::new();
    for (path, body) in files {
        match path {
            Some(path) => {
                let dir = match path.parent() {
                    Some(p) if !p.as_os_str().is_empty() => p,
                    _ => Path::new("."),
                };
                let mut tmp = tempfile::NamedTempFile::new_in(dir)
                    .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
                tmp.write_all(body.as_bytes())?;
                tmp.as_file().sync_all()?;
                staged.push((tmp, path));
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(body.as_bytes())?;
                stdout.flush()?;
            }
        }
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| CliError::Runtime(format!("cannot write {}: {}", path.display(), e.error)))?;
    }
    Ok(())
}

/// Human-readable summary: stdout when the data went to a file, stderr otherwise.
fn note(out: &Output, line: &str) {
    if out.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}
