#![allow(clippy::neg_cmp_op_on_partial_ord)]

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use driven_lattice::analysis::{self, SweepConfig};
use driven_lattice::classical::{self, ClassicalParams, PhasePoint};
use driven_lattice::config::{parse_range, RunConfig};
use driven_lattice::mathieu::{self, MathieuQuery, MathieuSolver};
use driven_lattice::output::{self, Cell, RunOutput};
use driven_lattice::quantum::AutocorrelationSeries;
use driven_lattice::recipes::{self, TimesRegime};
use driven_lattice::resonance::{self, RegimeTag, TimeScales, TimeUnit};
use driven_lattice::units::{self, PhysicalSetup, ValidityThresholds};
use driven_lattice::{Error, Result};

const EXIT_ASSERTION: u8 = 4;

#[derive(Parser)]
#[command(name = "driven-lattice", version, about = "Recurrence times of matter waves in driven optical lattices")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; tables go to stdout when omitted.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Full-fidelity recipe variants.
    #[arg(long, global = true)]
    full: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ScaledArgs {
    #[arg(long)]
    kbar: Option<f64>,
    /// Screened lattice depth V′ (E_r).
    #[arg(long)]
    vprime: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Band index n̄ of the resonance.
    #[arg(long)]
    nbar: Option<u32>,
    /// Band offset l; `auto` picks −⌊β⌋.
    #[arg(long, allow_hyphen_values = true)]
    l: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert laboratory parameters to scaled units.
    Units {
        /// Lattice depth V₀ (E_r).
        #[arg(long, default_value_t = 16.0)]
        depth: f64,
        /// Drive frequency (Hz), or start:stop:steps.
        #[arg(long, default_value = "3000")]
        frequency: String,
        /// Shaking amplitude ΔL (m).
        #[arg(long, default_value_t = 0.0)]
        amplitude: f64,
        /// Mean-field strength G.
        #[arg(long, default_value_t = 0.0)]
        g: f64,
    },
    /// Mathieu characteristic values a_ν(q).
    Mathieu {
        /// Orders, start:stop:steps or comma list.
        #[arg(long)]
        nu: String,
        /// Parameters q, start:stop:steps or comma list.
        #[arg(long)]
        q: String,
    },
    /// Bloch bands of the undriven lattice.
    Bands {
        #[arg(long)]
        vprime: Option<f64>,
        #[arg(long, default_value_t = 3)]
        bands: usize,
        #[arg(long, default_value_t = 51)]
        points: usize,
    },
    /// Analytic time scales over a λ grid.
    Times {
        #[arg(long, value_enum, default_value_t = RegimeArg::Auto)]
        regime: RegimeArg,
        #[arg(long)]
        lambda_grid: String,
        #[command(flatten)]
        scaled: ScaledArgs,
    },
    /// Stroboscopic section of the classical driven pendulum.
    Poincare {
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// `line:N`, `grid:NZ:NP:Z0:Z1:P0:P1` or a CSV file with z,p columns.
        #[arg(long, default_value = "line:20")]
        seeds: String,
        #[arg(long)]
        periods: Option<usize>,
    },
    /// Wavepacket evolution (writes autocorr.csv, density.csv, meta.json).
    Evolve {
        #[command(flatten)]
        scaled: ScaledArgs,
        /// Final drive phase τ.
        #[arg(long)]
        tau_end: Option<f64>,
    },
    /// Recurrence analysis of a saved series.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCmd,
    },
    /// λ sweep from the config's sweep block.
    Sweep,
    /// Figure-analogue recipe (fig1 ... fig6).
    Recipe { name: String },
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Extract T_cl, T_rev, T_spr from a tau,A2 CSV.
    Autocorr {
        csv: PathBuf,
        #[arg(long)]
        t_cl: Option<f64>,
        #[arg(long)]
        t_rev: Option<f64>,
        #[arg(long)]
        t_spr: Option<f64>,
    },
}

#[derive(ValueEnum, Clone, Copy)]
enum RegimeArg {
    Auto,
    Delicate,
    Robust,
    RobustHarmonic,
    Undriven,
}

impl From<RegimeArg> for TimesRegime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Auto => TimesRegime::Auto,
            RegimeArg::Delicate => TimesRegime::Delicate,
            RegimeArg::Robust => TimesRegime::Robust,
            RegimeArg::RobustHarmonic => TimesRegime::RobustHarmonic,
            RegimeArg::Undriven => TimesRegime::Undriven,
        }
    }
}

/// Where tables go: a managed output directory or stdout.
struct Sink {
    out: Option<RunOutput>,
}

impl Sink {
    fn new(cli: &Cli, command: &str, config: Value) -> Result<Sink> {
        let out = match &cli.out_dir {
            Some(d) => Some(RunOutput::create(d, command, config)?),
            None => None,
        };
        Ok(Sink { out })
    }

    fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<Cell>>, details: Value) -> Result<()> {
        match &mut self.out {
            Some(o) => o.csv(name, header, rows, details).map(|_| ()),
            None => output::write_csv_to(std::io::stdout().lock(), header, rows),
        }
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        match &mut self.out {
            Some(o) => o.json(name, v).map(|_| ()),
            None => {
                let mut s = std::io::stdout().lock();
                writeln!(s, "{}", serde_json::to_string_pretty(v).expect("json"))?;
                Ok(())
            }
        }
    }

    fn finish(self) -> Result<bool> {
        match self.out {
            Some(o) => Ok(o.finish()?.all_passed()),
            None => Ok(true),
        }
    }
}

fn config_value(cli: &Cli) -> Result<Value> {
    match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config { pointer: "/".into(), message: format!("{}: {e}", p.display()) })?;
            serde_json::from_str(&text).map_err(|e| Error::Config { pointer: "/".into(), message: e.to_string() })
        }
        None => Ok(json!({})),
    }
}

/// Config file overlaid with command-line scaled parameters.
fn load_config(cli: &Cli, a: &ScaledArgs) -> Result<RunConfig> {
    let mut v = config_value(cli)?;
    let obj =
        v.as_object_mut().ok_or_else(|| Error::Config { pointer: "/".into(), message: "expected an object".into() })?;
    if !obj.contains_key("physical") {
        let nested = obj.contains_key("scaled");
        let target = if nested { obj.get_mut("scaled").and_then(Value::as_object_mut) } else { Some(&mut *obj) };
        if let Some(t) = target {
            for (k, x) in [("kbar", a.kbar), ("Vprime", a.vprime), ("lambda", a.lambda)] {
                if let Some(x) = x {
                    if k == "Vprime" {
                        t.remove("V0");
                    }
                    t.insert(k.into(), json!(x));
                }
            }
        }
    }
    let mut cfg = RunConfig::from_value(v)?;
    if let Some(n) = a.nbar {
        cfg.resonance.nbar = n;
    }
    match a.l.as_deref() {
        None => {}
        Some("auto") => cfg.resonance.l = recipes::resonance_spec(&cfg.scaled, cfg.resonance.nbar)?.l,
        Some(s) => {
            cfg.resonance.l =
                s.parse().map_err(|_| Error::InvalidInput(format!("--l expects an integer or 'auto', got {s}")))?
        }
    }
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    if s.contains(':') {
        return parse_range(s);
    }
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("not a number: '{x}'"))))
        .collect()
}

fn cmd_units(cli: &Cli, depth: f64, frequency: &str, amplitude: f64, g: f64) -> Result<bool> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for f in parse_list(frequency)? {
        let mut setup = PhysicalSetup::rb87_852nm(depth, f, amplitude);
        setup.interaction_g = g;
        let p = units::scale_setup(&setup)?;
        let v = units::effective_potential_validity(&p, ValidityThresholds::default());
        rows.push(vec![Cell::F(f), Cell::F(p.kbar), Cell::F(p.effective_depth), Cell::F(p.q0), Cell::F(p.lambda)]);
        reports.push(json!({"drive_frequency": f, "scaled": p, "validity": v.message}));
    }
    let mut sink =
        Sink::new(cli, "units", json!({"depth": depth, "frequency": frequency, "amplitude": amplitude, "G": g}))?;
    sink.table("units.csv", &["drive_frequency_hz", "kbar", "Vprime", "q0", "lambda"], rows, json!(reports))?;
    sink.finish()
}

fn cmd_mathieu(cli: &Cli, nu: &str, q: &str) -> Result<bool> {
    let solver = MathieuSolver::new();
    let mut rows = Vec::new();
    for &n in &parse_list(nu)? {
        for &qq in &parse_list(q)? {
            rows.push(vec![Cell::F(n), Cell::F(qq), Cell::F(solver.char_value(MathieuQuery::new(n, qq))?)]);
        }
    }
    let mut sink = Sink::new(cli, "mathieu", json!({"nu": nu, "q": q}))?;
    sink.table("mathieu.csv", &["nu", "q", "a"], rows, json!({}))?;
    sink.finish()
}

fn cmd_bands(cli: &Cli, vprime: Option<f64>, bands: usize, points: usize) -> Result<bool> {
    let q0 = match vprime {
        Some(v) => v / 4.0,
        None if cli.config.is_some() => load_config(cli, &ScaledArgs::default())?.scaled.q0,
        None => return Err(Error::InvalidInput("give --vprime or --config".into())),
    };
    let pts = mathieu::band_structure(q0, bands, points)?;
    let rows = pts.iter().map(|b| vec![Cell::U(b.band_index), Cell::F(b.quasimomentum), Cell::F(b.energy)]).collect();
    let gap = if bands >= 2 { Some(mathieu::band_gap(q0)?) } else { None };
    let mut sink = Sink::new(cli, "bands", json!({"q0": q0, "bands": bands, "points": points}))?;
    sink.table("bands.csv", &["n", "kappa", "energy_Er"], rows, json!({"q0": q0, "band_gap_Er": gap}))?;
    sink.finish()
}

fn cmd_times(cli: &Cli, regime: RegimeArg, grid: &str, a: &ScaledArgs) -> Result<bool> {
    let cfg = load_config(cli, a)?;
    let lambdas = parse_list(grid)?;
    let rows = recipes::times_table(&cfg.scaled, cfg.resonance, regime.into(), &lambdas)?;
    let mut sink = Sink::new(cli, "times", cfg.to_value())?;
    sink.table(
        "times.csv",
        &recipes::TIMES_HEADER,
        recipes::times_cells(&rows),
        json!({"unit": "drive_phase", "resonance": cfg.resonance}),
    )?;
    sink.finish()
}

fn parse_seeds(spec: &str) -> Result<Vec<PhasePoint>> {
    let bad = || Error::InvalidInput(format!("bad seed spec '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts[0] {
        "line" if parts.len() == 2 => Ok(classical::seed_line(parts[1].parse().map_err(|_| bad())?)),
        "grid" if parts.len() == 7 => {
            let n = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
            let f = |i: usize| parts[i].parse::<f64>().map_err(|_| bad());
            Ok(classical::seed_grid(n(1)?, n(2)?, (f(3)?, f(4)?), (f(5)?, f(6)?)))
        }
        _ => {
            let cols = output::read_columns(Path::new(spec), &["z", "p"])?;
            Ok(cols[0].iter().zip(&cols[1]).map(|(z, p)| PhasePoint::new(*z, *p)).collect())
        }
    }
}

fn cmd_poincare(
    cli: &Cli,
    kappa: Option<f64>,
    lambda: Option<f64>,
    seeds: &str,
    periods: Option<usize>,
) -> Result<bool> {
    let params = if cli.config.is_some() {
        let cfg = load_config(cli, &ScaledArgs { lambda, ..Default::default() })?;
        let mut p = cfg.classical_params()?;
        if let Some(k) = kappa {
            p.kappa = k;
        }
        (p, periods.unwrap_or(cfg.classical.periods))
    } else {
        let k = kappa.ok_or_else(|| Error::InvalidInput("give --kappa or --config".into()))?;
        (ClassicalParams::new(k, lambda.unwrap_or(0.0)), periods.unwrap_or(200))
    };
    let (params, periods) = params;
    if !(params.lambda >= 0.0) || !(params.kappa > 0.0) {
        return Err(Error::InvalidInput(format!("need kappa > 0 and lambda >= 0, got {params:?}")));
    }
    let seeds = parse_seeds(seeds)?;
    let section = classical::poincare(&seeds, &params, periods)?;
    let mut sink = Sink::new(cli, "poincare", json!({"classical": params, "periods": periods, "seeds": seeds.len()}))?;
    let rows = section
        .samples
        .iter()
        .map(|s| vec![Cell::U(s.seed_id), Cell::U(s.period_index), Cell::F(s.z), Cell::F(s.p)])
        .collect();
    let seeds_json: Vec<Value> = seeds.iter().map(|s| json!([s.z, s.p])).collect();
    sink.table("poincare.csv", &["seed_id", "period_index", "z", "p"], rows, json!({"seeds": seeds_json}))?;
    sink.finish()
}

/// Analytic scales used as hints and references, in drive phase.
fn analytic_times(cfg: &RunConfig) -> Option<TimeScales> {
    let ctx = resonance::build_context(&cfg.scaled, cfg.resonance).ok()?;
    let regime = if cfg.scaled.lambda == 0.0 { TimesRegime::Undriven } else { TimesRegime::Auto };
    recipes::times_table(&cfg.scaled, cfg.resonance, regime, &[ctx.lambda]).ok()?.pop()?.times.ok()
}

fn cmd_evolve(cli: &Cli, a: &ScaledArgs, tau_end: Option<f64>) -> Result<bool> {
    let mut cfg = load_config(cli, a)?;
    if let Some(t) = tau_end {
        cfg.run.tau_end = t;
    }
    let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out/evolve"));
    let analytic = analytic_times(&cfg);
    let mut out = RunOutput::create(&dir, "evolve", cfg.to_value())?;
    let (grid, rec) = match recipes::run_evolution(&cfg) {
        Ok(r) => r,
        Err(e) => {
            out.assert("completed", false, e.to_string());
            out.finish()?;
            return Err(e);
        }
    };
    let details = json!({"analytic": analytic.as_ref().map(|t| json!({
        "t_classical": t.t_classical, "t_revival": t.t_revival, "t_super_revival": t.t_super_revival, "unit": "drive_phase"
    }))});
    recipes::write_evolution(&mut out, "", &grid, &rec, details.clone())?;
    let mut d = details;
    d["run"] = serde_json::to_value(&rec.meta).unwrap_or(Value::Null);
    out.run_meta(d)?;
    eprintln!("wrote {}", dir.display());
    Ok(out.finish()?.all_passed())
}

fn sidecar_analytic(csv: &Path) -> Option<TimeScales> {
    let stem = csv.file_stem()?.to_string_lossy().to_string();
    let text = std::fs::read_to_string(csv.with_file_name(format!("{stem}.meta.json"))).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    let a = &v["details"]["analytic"];
    Some(TimeScales {
        t_classical: a["t_classical"].as_f64()?,
        t_revival: a["t_revival"].as_f64()?,
        t_super_revival: a["t_super_revival"].as_f64().unwrap_or(f64::INFINITY),
        regime_tag: RegimeTag::Robust,
        unit: TimeUnit::DrivePhase,
        validity_warnings: vec![],
    })
}

fn cmd_analyze(cli: &Cli, csv: &Path, t_cl: Option<f64>, t_rev: Option<f64>, t_spr: Option<f64>) -> Result<bool> {
    let cols = output::read_columns(csv, &["tau", "A2"])?;
    let series = AutocorrelationSeries { tau: cols[0].clone(), a2: cols[1].clone() };
    let (cfg, base) = if cli.config.is_some() {
        let cfg = load_config(cli, &ScaledArgs::default())?;
        let t = analytic_times(&cfg);
        (Some(cfg), t)
    } else {
        (None, sidecar_analytic(csv))
    };
    let mut analytic = base.unwrap_or(TimeScales {
        t_classical: f64::NAN,
        t_revival: f64::NAN,
        t_super_revival: f64::INFINITY,
        regime_tag: RegimeTag::Robust,
        unit: TimeUnit::DrivePhase,
        validity_warnings: vec!["hints given on the command line".into()],
    });
    if let Some(x) = t_cl {
        analytic.t_classical = x;
    }
    if let Some(x) = t_rev {
        analytic.t_revival = x;
    }
    if let Some(x) = t_spr {
        analytic.t_super_revival = x;
    }
    if !analytic.t_classical.is_finite() || !analytic.t_revival.is_finite() {
        return Err(Error::Validation {
            invariant: "analysis hints".into(),
            message: "need T_cl and T_rev hints: --t-cl/--t-rev, --config, or an autocorr.meta.json sidecar".into(),
        });
    }
    let opts = cfg.as_ref().map(|c| c.analysis.peak_options()).unwrap_or_default();
    let report = analysis::compare(&series, &analytic, opts);
    for f in &report.diagnostics.failures {
        eprintln!("warning: {f}");
    }
    let rows = [
        ("t_classical", report.extracted.t_classical, analytic.t_classical, report.relative_errors.t_classical),
        ("t_revival", report.extracted.t_revival, analytic.t_revival, report.relative_errors.t_revival),
        (
            "t_super_revival",
            report.extracted.t_super_revival,
            analytic.t_super_revival,
            report.relative_errors.t_super_revival,
        ),
    ]
    .into_iter()
    .map(|(n, e, a, r)| vec![Cell::from(n), Cell::from(e), Cell::F(a), Cell::from(r)])
    .collect();
    let mut sink = Sink::new(cli, "analyze autocorr", json!({"input": csv, "peaks": opts}))?;
    let report_json = serde_json::to_value(&report).expect("report serialises");
    sink.json("report.json", &report_json)?;
    if sink.out.is_some() {
        sink.table(
            "report.csv",
            &["quantity", "extracted", "analytic", "relative_error"],
            rows,
            json!({"input": csv}),
        )?;
    }
    sink.finish()
}

fn cmd_sweep(cli: &Cli) -> Result<bool> {
    if cli.config.is_none() {
        return Err(Error::InvalidInput("sweep needs --config with a sweep block".into()));
    }
    let cfg = load_config(cli, &ScaledArgs::default())?;
    let block = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config { pointer: "/sweep".into(), message: "missing sweep block".into() })?;
    let grid = block.lambda_grid.values()?;
    let base = SweepConfig {
        params: cfg.scaled,
        context: cfg.resonance,
        simulation: block.simulate.then(|| cfg.simulation_spec()),
        peaks: cfg.analysis.peak_options(),
    };
    let rows = analysis::sweep(&grid, &base);
    let t = |x: &Option<TimeScales>, f: fn(&TimeScales) -> f64| Cell::from(x.as_ref().map(f));
    let cells = rows
        .iter()
        .map(|r| {
            let ex = r.report.as_ref().map(|p| p.extracted.clone()).unwrap_or_default();
            let warnings: Vec<String> = [("delicate", &r.delicate), ("robust", &r.robust)]
                .into_iter()
                .flat_map(|(n, t)| {
                    t.iter().flat_map(move |t| t.validity_warnings.iter().map(move |w| format!("{n}: {w}")))
                })
                .collect();
            vec![
                Cell::F(r.lambda),
                Cell::from(r.q),
                Cell::from(r.beta),
                t(&r.delicate, |x| x.t_classical),
                t(&r.delicate, |x| x.t_revival),
                t(&r.delicate, |x| x.t_super_revival),
                t(&r.robust, |x| x.t_classical),
                t(&r.robust, |x| x.t_revival),
                t(&r.robust, |x| x.t_super_revival),
                Cell::from(ex.t_classical),
                Cell::from(ex.t_revival),
                Cell::from(ex.t_super_revival),
                Cell::S(warnings.join("; ")),
                Cell::S(r.errors.join("; ")),
            ]
        })
        .collect();
    let header = [
        "lambda",
        "q",
        "beta",
        "delicate_t_cl",
        "delicate_t_rev",
        "delicate_t_spr",
        "robust_t_cl",
        "robust_t_rev",
        "robust_t_spr",
        "extracted_t_cl",
        "extracted_t_rev",
        "extracted_t_spr",
        "warnings",
        "errors",
    ];
    let mut sink = Sink::new(cli, "sweep", cfg.to_value())?;
    sink.table("sweep.csv", &header, cells, json!({"unit": "drive_phase"}))?;
    if sink.out.is_some() {
        sink.json("sweep.json", &serde_json::to_value(&rows).expect("rows serialise"))?;
    }
    sink.finish()
}

fn cmd_recipe(cli: &Cli, name: &str) -> Result<bool> {
    let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(name));
    let manifest = recipes::run_recipe(name, &dir, cli.full)?;
    for a in &manifest.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    eprintln!("wrote {}", dir.display());
    Ok(manifest.all_passed())
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Units { depth, frequency, amplitude, g } => cmd_units(cli, *depth, frequency, *amplitude, *g),
        Command::Mathieu { nu, q } => cmd_mathieu(cli, nu, q),
        Command::Bands { vprime, bands, points } => cmd_bands(cli, *vprime, *bands, *points),
        Command::Times { regime, lambda_grid, scaled } => cmd_times(cli, *regime, lambda_grid, scaled),
        Command::Poincare { kappa, lambda, seeds, periods } => cmd_poincare(cli, *kappa, *lambda, seeds, *periods),
        Command::Evolve { scaled, tau_end } => cmd_evolve(cli, scaled, *tau_end),
        Command::Analyze { what: AnalyzeCmd::Autocorr { csv, t_cl, t_rev, t_spr } } => {
            cmd_analyze(cli, csv, *t_cl, *t_rev, *t_spr)
        }
        Command::Sweep => cmd_sweep(cli),
        Command::Recipe { name } => cmd_recipe(cli, name),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_ASSERTION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
