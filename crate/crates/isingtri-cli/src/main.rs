use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use isingtri::coefficients::{CoefficientTables, TableConfig, ZetaConfig};
use isingtri::constants::{dump_constants, mu, nu_c, Parametrization};
use isingtri::enumerator::z_oracle;
use isingtri::explore::{build_explored_map, DEFAULT_HALF_EDGE_BUDGET};
use isingtri::peeling::{run, summary_json, PeelingLaw, Regime, RunConfig, Stop};
use isingtri::scalar::{bits_for_digits, set_hp_bits};
use isingtri::scaling::{
    drift_experiment, hitting_time_experiment, hull_experiment, independence_test, interface_experiment,
    stable_selfsimilarity_test, ScalingReport,
};
use isingtri::series::{check_master_equation, verify_table_file, PartitionTable, TableFile};
use isingtri::Hp;

const DIGITS_ENV: &str = "ISINGTRI_DIGITS";

#[derive(Parser)]
#[command(name = "isingtri", version, about = "Ising-decorated random triangulations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact series and Boltzmann coefficient tables.
    Tables {
        #[command(subcommand)]
        cmd: TablesCmd,
    },
    /// Brute-force enumeration of small maps.
    Oracle {
        #[command(subcommand)]
        cmd: OracleCmd,
    },
    /// Critical-line constants at a given ν.
    Constants {
        /// A decimal value, or `nu_c`.
        #[arg(long)]
        nu: String,
        #[arg(long)]
        json: bool,
        /// Significant digits (default from $ISINGTRI_DIGITS, else 60).
        #[arg(long)]
        digits: Option<usize>,
    },
    /// Run the peeling process and write one JSON record per run.
    Simulate(SimulateArgs),
    /// Scaling experiments against the limit laws.
    Scaling {
        #[arg(value_enum)]
        experiment: Experiment,
        #[command(flatten)]
        opts: ScalingOpts,
    },
}

#[derive(Subcommand)]
enum TablesCmd {
    Build {
        #[arg(long)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also check the functional equation on the fresh table.
        #[arg(long)]
        check: bool,
    },
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        order: usize,
    },
    Boltzmann {
        #[arg(long)]
        nu: String,
        #[arg(long)]
        kmax: usize,
        /// Rows of the bivariate block (with --zeta).
        #[arg(long, default_value_t = 1024)]
        pmax: usize,
        #[arg(long)]
        zeta: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    Count {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        edges: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Finite,
    Halfplane,
    Mono,
    Fullplane,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Regime {
        match r {
            RegimeArg::Finite => Regime::Finite,
            RegimeArg::Halfplane => Regime::HalfPlane,
            RegimeArg::Mono => Regime::Mono,
            RegimeArg::Fullplane => Regime::FullPlane,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    regime: RegimeArg,
    #[arg(long, default_value_t = 0)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    q: usize,
    #[arg(long, default_value = "nu_c")]
    nu: String,
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// `Tm=M[,M2..]`, `end` or `steps=N`.
    #[arg(long, default_value = "end")]
    stop: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000_000)]
    max_steps: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also build each explored map and write it here (JSON lines).
    #[arg(long)]
    map_out: Option<PathBuf>,
    /// Use the reduced coefficient tables.
    #[arg(long)]
    small: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Hitting,
    Interface,
    Hull,
    Drift,
    Stable,
    Independence,
}

/// Every flag may also come from `--config FILE` (key = value lines);
/// flags given on the command line win.
#[derive(Args, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalingOpts {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, conflicts_with = "lambda")]
    q: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Time n of the self-similarity test (compared with 4n).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    exponent: Option<f64>,
    #[arg(long)]
    centering: Option<f64>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    target: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    small: Option<bool>,
}

impl ScalingOpts {
    fn merged(self) -> Result<ScalingOpts> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        let mut base = serde_json::Map::new();
        for (k, v) in table {
            base.insert(k.replace('-', "_"), serde_json::to_value(v)?);
        }
        let cli = serde_json::to_value(&self)?;
        for (k, v) in cli.as_object().expect("struct").iter() {
            if !v.is_null() {
                base.insert(k.clone(), v.clone());
            }
        }
        let mut out: ScalingOpts = serde_json::from_value(serde_json::Value::Object(base))
            .with_context(|| format!("options in {}", path.display()))?;
        out.config = Some(path);
        Ok(out)
    }
}

fn parse_nu(s: &str) -> Result<f64> {
    match s {
        "nu_c" | "c" => Ok(nu_c::<f64>()),
        _ => s.parse::<f64>().with_context(|| format!("bad ν: {s}")),
    }
}

fn is_critical(nu: f64) -> bool {
    (nu - nu_c::<f64>()).abs() < 1e-12
}

fn table_config(nu: f64, small: bool) -> TableConfig {
    match (small, is_critical(nu)) {
        (true, c) => TableConfig::small(nu, c),
        (false, true) => TableConfig::critical(),
        (false, false) => TableConfig::univariate(nu),
    }
}

fn load_tables(nu: f64, small: bool) -> Result<CoefficientTables> {
    let cfg = table_config(nu, small);
    eprintln!("coefficient tables {} (ν = {nu})", cfg.hash());
    Ok(CoefficientTables::load_or_build(&cfg)?)
}

fn parse_stop(s: &str) -> Result<Stop> {
    if s == "end" {
        return Ok(Stop::End);
    }
    if let Some(n) = s.strip_prefix("steps=") {
        return Ok(Stop::Steps(n.parse()?));
    }
    if let Some(ms) = s.strip_prefix("Tm=").or_else(|| s.strip_prefix("T=")) {
        let ms = ms.split(',').map(|m| m.trim().parse::<usize>()).collect::<Result<Vec<_>, _>>()?;
        return Ok(Stop::Hitting(ms));
    }
    bail!("unknown stop rule {s:?}")
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_vec_pretty(v)?).with_context(|| format!("writing {}", path.display()))
}

fn tables_cmd(cmd: TablesCmd) -> Result<()> {
    match cmd {
        TablesCmd::Build { order, out, check } => {
            let mut t = PartitionTable::exact();
            t.extend_to(order)?;
            if check {
                let r = check_master_equation(&t, order)?;
                eprintln!("functional equation: {r:?}");
            }
            write_json(&out, &TableFile::from_table(&t))?;
            println!("wrote order {order} table to {}", out.display());
        }
        TablesCmd::Verify { input, order } => {
            let file: TableFile = serde_json::from_slice(&fs::read(&input)?)?;
            let bad = verify_table_file(&file, order)?;
            if !bad.is_empty() {
                bail!("{} entries differ, first {:?}", bad.len(), &bad[..bad.len().min(5)]);
            }
            println!("ok: {} agrees with a fresh computation to order {}", input.display(), order.min(file.max_order));
        }
        TablesCmd::Boltzmann { nu, kmax, pmax, zeta, out } => {
            let nu = parse_nu(&nu)?;
            let base = TableConfig::univariate(nu);
            let log2 = |n: usize| n.next_power_of_two().trailing_zeros();
            let cfg = TableConfig {
                log2_m: (log2(kmax) + 3).max(12),
                k_max: kmax,
                k_cut: base.k_cut.min(kmax / 2),
                fit_lo: base.fit_lo.min(kmax / 20).max(10),
                zeta: zeta.then(|| ZetaConfig {
                    log2_mx: log2(pmax) + 2,
                    pn: pmax,
                    strip_log2_m: log2(pmax) + 2,
                    strip_p: pmax,
                    ..ZetaConfig::default()
                }),
                ..base
            };
            let t = CoefficientTables::build(&cfg)?;
            t.save(&out)?;
            println!("wrote tables {} to {}", cfg.hash(), out.display());
        }
    }
    Ok(())
}

fn constants_cmd(nu: &str, json: bool, digits: Option<usize>) -> Result<()> {
    let digits = match digits {
        Some(d) => d,
        None => std::env::var(DIGITS_ENV).ok().map(|s| s.parse()).transpose()?.unwrap_or(60),
    };
    set_hp_bits(bits_for_digits(digits));
    let x: Hp = match nu {
        "nu_c" | "c" => nu_c::<Hp>(),
        _ => nu.parse().map_err(|e| anyhow::anyhow!("bad ν {nu}: {e}"))?,
    };
    let dump = dump_constants(&x, digits, |v: &Hp| v.to_decimal(digits))?;
    if json {
        println!("{}", serde_json::to_string_pretty(&dump)?);
    } else {
        println!("ν = {} ({} digits)", dump.nu, dump.digits);
        for (k, v) in &dump.values {
            println!("{k:>12} = {v}");
        }
    }
    Ok(())
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let nu = parse_nu(&a.nu)?;
    let tables = load_tables(nu, a.small)?;
    let law = PeelingLaw::new(&tables)?;
    let mut cfg = RunConfig::new(a.regime.into(), a.p, a.q, parse_stop(&a.stop)?);
    cfg.max_steps = a.max_steps;
    cfg.record = a.map_out.is_some();
    cfg.interface = matches!(cfg.regime, Regime::Finite | Regime::HalfPlane);
    let mut out = BufWriter::new(fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?);
    let mut maps = a.map_out.as_ref().map(fs::File::create).transpose()?.map(BufWriter::new);
    for s in 0..a.runs {
        let tr = run(&law, &cfg, a.seed, s)?;
        writeln!(out, "{}", summary_json(&tr))?;
        if let Some(w) = maps.as_mut() {
            let ex = build_explored_map(&law, &tr, a.seed, DEFAULT_HALF_EDGE_BUDGET)?;
            let rec = serde_json::json!({ "seed": a.seed, "stream": s, "map": ex.map, "holes": ex.holes });
            writeln!(w, "{rec}")?;
        }
    }
    out.flush()?;
    if let Some(mut w) = maps {
        w.flush()?;
    }
    println!("wrote {} runs to {}", a.runs, a.out.display());
    Ok(())
}

fn csv_path(out: &Path, i: usize, n: usize) -> PathBuf {
    if n == 1 {
        out.with_extension("csv")
    } else {
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.with_file_name(format!("{stem}-{i}.csv"))
    }
}

fn scaling_cmd(experiment: Experiment, opts: ScalingOpts) -> Result<()> {
    let o = opts.merged()?;
    let nu = parse_nu(o.nu.as_deref().unwrap_or("nu_c"))?;
    let tables = load_tables(nu, o.small.unwrap_or(false))?;
    let law = PeelingLaw::new(&tables)?;
    let seed = o.seed.unwrap_or(0);
    let max_steps = o.max_steps.unwrap_or(10_000_000);
    let p = o.p.unwrap_or(200);
    let q = o.q.or_else(|| o.lambda.map(|l| (l * p as f64).round() as usize));
    let (regime, q) = match q {
        Some(q) => (Regime::Finite, q),
        None => (Regime::HalfPlane, 0),
    };
    let runs = o.runs.unwrap_or(10_000);
    let critical = tables.critical;
    let reports: Vec<ScalingReport> = match experiment {
        Experiment::Hitting => {
            let ms = o.m.clone().unwrap_or_else(|| vec![10]);
            hitting_time_experiment(&law, regime, p, q, &ms, runs, seed, max_steps, o.tolerance.unwrap_or(0.05))?
        }
        Experiment::Interface => {
            vec![interface_experiment(&law, regime, p, q, runs, seed, max_steps, o.tolerance.unwrap_or(0.05))?.0]
        }
        Experiment::Hull => vec![hull_experiment(
            &law,
            runs,
            seed,
            max_steps,
            o.lo.unwrap_or(1e2),
            o.hi.unwrap_or(1e4),
            o.target.unwrap_or(-0.5),
            o.tolerance.unwrap_or(0.1),
        )?],
        Experiment::Drift => {
            let expected = match o.target {
                Some(t) => t,
                None => Parametrization::for_nu(&nu)?.drift()?,
            };
            vec![drift_experiment(&law, runs, seed, expected, o.tolerance.unwrap_or(3.0))?]
        }
        Experiment::Stable => {
            let n = o.n.unwrap_or(10_000);
            let exponent = o.exponent.unwrap_or(if critical { 0.75 } else { 2.0 / 3.0 });
            let centering = o.centering.unwrap_or(if critical { mu::<f64>() } else { 0.0 });
            vec![stable_selfsimilarity_test(&law, n, 4 * n, runs, exponent, centering, seed, o.tolerance.unwrap_or(0.02))?]
        }
        Experiment::Independence => {
            let block = o.n.unwrap_or(100_000) as usize;
            vec![independence_test(&law, runs.min(64) as usize, block, 199, seed, o.tolerance.unwrap_or(0.01))?]
        }
    };
    for r in &reports {
        let stat = r.ks.or(r.exponent).or_else(|| r.extra.get("mean").or(r.extra.get("min_p_value")).copied()).unwrap_or(f64::NAN);
        println!("{} {} {:.5} (tolerance {})", r.experiment, if r.pass { "PASS" } else { "FAIL" }, stat, r.tolerance);
    }
    if let Some(out) = &o.out {
        if reports.len() == 1 {
            write_json(out, &reports[0])?;
        } else {
            write_json(out, &reports)?;
        }
        for (i, r) in reports.iter().enumerate() {
            if !r.cdf.is_empty() {
                fs::write(csv_path(out, i, reports.len()), r.csv())?;
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Tables { cmd } => tables_cmd(cmd),
        Cmd::Oracle { cmd: OracleCmd::Count { p, q, edges } } => {
            let z = z_oracle(p, q, edges)?;
            let coeffs: Vec<String> = z.coeffs().iter().map(|c| c.to_string()).collect();
            println!("{}", serde_json::json!({ "p": p, "q": q, "edges": edges, "coeffs": coeffs }));
            Ok(())
        }
        Cmd::Constants { nu, json, digits } => constants_cmd(&nu, json, digits),
        Cmd::Simulate(a) => simulate_cmd(a),
        Cmd::Scaling { experiment, opts } => scaling_cmd(experiment, opts),
    }
}
