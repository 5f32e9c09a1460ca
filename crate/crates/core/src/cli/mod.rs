//! Command-line front end: `invariants`, `walk`, `check`, `campaign`.
//!
//! JSON output is wrapped in an [`OutputEnvelope`]; the payload is
//! canonical, so identical flags and seed give identical payload bytes.
//! Exit status: 0 success, 1 violations found, 2 usage or configuration
//! error. `MONOLAB_OUT_DIR` is prepended to relative `--out` paths.

mod emit;
mod statefile;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

pub use emit::{canonical_json, format_float, payload_checksum, short, table, OutputEnvelope, TOOL};
pub use statefile::{format_state, parse_state, read_state, NORM_TOL};

use crate::diffcheck::{run_check, CheckConfig, CheckReport, Classification};
use crate::error::{MonolabError, Result};
use crate::loccsim::{resolve_monotone, run_campaign, write_records_csv, CampaignConfig, SimReport};
use crate::monotones::{catalog, three_qubit_invariants};
use crate::qcore::linalg::{basis_projector, identity};
use crate::qcore::named::named_state;
use crate::qcore::sample::{positive_pair, stream_id, trial_rng};
use crate::qcore::{PureState, SystemShape, TwoOutcomeMeasurement};
use crate::weakmeas::{run_walk_campaign, MeasurementSpec, WalkCampaignRecord, WalkConfig};

pub const OUT_DIR_ENV: &str = "MONOLAB_OUT_DIR";
const MEAS_TAG: u64 = 0x3EA5_0001;

#[derive(Debug, Parser)]
#[command(
    name = "monolab",
    version,
    about = "Checks of entanglement monotones under local operations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Three-qubit invariants and catalog monotones of a pure state
    Invariants(InvariantsArgs),
    /// Weak-measurement random walks against the one-shot measurement
    Walk(WalkArgs),
    /// Differential monotonicity conditions for one monotone
    Check(CheckArgs),
    /// Integrated monotonicity trials from a JSON campaign config
    Campaign(CampaignArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// write here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    /// state file of `re im` lines
    #[arg(long, conflicts_with = "named")]
    pub state: Option<PathBuf>,
    /// built-in state: product, bell, ghz, w
    #[arg(long)]
    pub named: Option<String>,
    /// subsystem dimensions for the state file, e.g. 2,3
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
}

impl StateArgs {
    fn load(&self) -> Result<PureState> {
        match (&self.state, &self.named) {
            (Some(p), None) => read_state(p, self.dims.as_deref()),
            (None, Some(n)) => named_state(n),
            _ => Err(MonolabError::Config(
                "exactly one of --state or --named is required".into(),
            )),
        }
    }

    fn describe(&self) -> Value {
        json!({
            "state": self.state.as_ref().map(|p| p.display().to_string()),
            "named": self.named,
            "dims": self.dims,
        })
    }
}

#[derive(Debug, Args)]
pub struct InvariantsArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    /// positive pair with Haar eigenbasis and uniform eigenvalues
    Random,
    /// |0⟩⟨0| versus the rest
    Projective,
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, default_value_t = 0)]
    pub target: usize,
    #[arg(long, value_enum, default_value = "random", conflicts_with = "measurement_file")]
    pub measurement: MeasurementKind,
    /// JSON measurement spec {dims, target, p1, p2}
    #[arg(long)]
    pub measurement_file: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long, default_value_t = 4.0)]
    pub cutoff: f64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// catalog name, optionally with @decreasing or @increasing
    #[arg(long)]
    pub monotone: String,
    #[arg(long, default_value_t = 200)]
    pub states: usize,
    #[arg(long, default_value_t = 20)]
    pub dirs: usize,
    #[arg(long)]
    pub seed: u64,
    /// finite-difference step
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps_norm: f64,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub no_richardson: bool,
    /// include every sample in the JSON payload
    #[arg(long)]
    pub keep_samples: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    /// JSON campaign config
    #[arg(long)]
    pub config: PathBuf,
    /// overrides the config's seed; required when the config has none
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// also write one CSV row per trial record here
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Rendered result of one subcommand.
pub struct Rendered {
    pub command: &'static str,
    pub config: Value,
    pub payload: Value,
    pub csv: Option<String>,
    pub table: String,
    pub violations: bool,
}

impl Rendered {
    pub fn envelope(&self) -> Result<OutputEnvelope> {
        OutputEnvelope::new(self.command, &self.config, &self.payload)
    }

    pub fn to_format(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => canonical_json(&serde_json::to_value(self.envelope()?)?),
            Format::Table => Ok(self.table.clone()),
            Format::Csv => self
                .csv
                .clone()
                .ok_or_else(|| MonolabError::Config(format!("{} has no CSV form", self.command))),
        }
    }
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| MonolabError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| MonolabError::Io(e.to_string()))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.17e}")).unwrap_or_default()
}

pub fn invariants(args: &InvariantsArgs) -> Result<Rendered> {
    let psi = args.state.load()?;
    let shape = psi.shape().clone();
    let rho = psi.density();
    let mut monotones = BTreeMap::new();
    for d in catalog() {
        if d.accepts_shape(&shape) {
            monotones.insert(d.name.clone(), d.evaluate(&shape, rho.matrix())?);
        }
    }
    let inv = if shape == SystemShape::qubits(3) {
        Some(three_qubit_invariants(&psi)?)
    } else {
        None
    };
    let mut rows: Vec<(String, String)> = Vec::new();
    if let Some(i) = &inv {
        for (k, v) in [
            ("I1", i.i1),
            ("I2", i.i2),
            ("I3", i.i3),
            ("I4", i.i4),
            ("I5", i.i5),
            ("tau_AB_C", i.tau_ab_c),
            ("tau_AC_B", i.tau_ac_b),
            ("tau_BC_A", i.tau_bc_a),
            ("tau_ABC", i.tau_abc),
            ("phi_ABC", i.phi),
            ("sigma_ABC", i.sigma),
        ] {
            rows.push((k.into(), short(v)));
        }
    }
    for (k, v) in &monotones {
        if inv.is_none() || ["norm", "purity", "entropy"].contains(&k.as_str()) {
            rows.push((k.clone(), short(*v)));
        }
    }
    let csv = csv_string(
        &["quantity", "value"],
        &rows
            .iter()
            .map(|(k, _)| {
                let v = inv
                    .as_ref()
                    .and_then(|i| invariant_by_label(i, k))
                    .or_else(|| monotones.get(k).copied())
                    .unwrap_or(f64::NAN);
                vec![k.clone(), format!("{v:.17e}")]
            })
            .collect::<Vec<_>>(),
    )?;
    Ok(Rendered {
        command: "invariants",
        config: json!({ "input": args.state.describe(), "shape": shape.to_string() }),
        payload: json!({ "shape": shape.to_string(), "monotones": monotones, "invariants": inv }),
        csv: Some(csv),
        table: table(&rows),
        violations: false,
    })
}

fn invariant_by_label(i: &crate::monotones::InvariantSet, k: &str) -> Option<f64> {
    Some(match k {
        "I1" => i.i1,
        "I2" => i.i2,
        "I3" => i.i3,
        "I4" => i.i4,
        "I5" => i.i5,
        "tau_AB_C" => i.tau_ab_c,
        "tau_AC_B" => i.tau_ac_b,
        "tau_BC_A" => i.tau_bc_a,
        "tau_ABC" => i.tau_abc,
        "phi_ABC" => i.phi,
        "sigma_ABC" => i.sigma,
        _ => return None,
    })
}

#[derive(Debug, Serialize)]
struct WalkPayload {
    #[serde(flatten)]
    record: WalkCampaignRecord,
    /// |p_walk − p_exact|
    deviation: f64,
    /// 3σ + 2(1 − tanh Kε)
    tolerance: f64,
    within_tolerance: bool,
}

fn walk_measurement(args: &WalkArgs, shape: &SystemShape) -> Result<TwoOutcomeMeasurement> {
    if let Some(p) = &args.measurement_file {
        let text = std::fs::read_to_string(p).map_err(|e| MonolabError::Io(format!("{}: {e}", p.display())))?;
        let spec: MeasurementSpec = serde_json::from_str(&text)?;
        let m = spec.to_measurement()?;
        if m.shape() != shape {
            return Err(MonolabError::Config(format!(
                "measurement is for {}, state is {shape}",
                m.shape()
            )));
        }
        return Ok(m);
    }
    if args.target >= shape.n_subsystems() {
        return Err(MonolabError::Config(format!(
            "--target {} out of range for {shape}",
            args.target
        )));
    }
    match args.measurement {
        MeasurementKind::Random => {
            let mut rng = trial_rng(args.seed, stream_id(MEAS_TAG, 0));
            positive_pair(shape, args.target, &mut rng)
        }
        MeasurementKind::Projective => {
            let d = shape.dim(args.target);
            let p1 = basis_projector(d, 0);
            let p2 = identity(d) - &p1;
            TwoOutcomeMeasurement::new(shape.clone(), args.target, p1, p2)
        }
    }
}

pub fn walk(args: &WalkArgs) -> Result<Rendered> {
    let psi = args.state.load()?;
    let shape = psi.shape().clone();
    let meas = walk_measurement(args, &shape)?;
    let cfg = WalkConfig::new(args.step, args.cutoff)?;
    let record = run_walk_campaign(&psi.density(), &meas, &cfg, args.trials, args.seed)?;
    let deviation = (record.p_walk - record.p_exact).abs();
    let tolerance = 3.0 * record.sigma + 2.0 * record.truncation_tol;
    let within = deviation <= tolerance;
    let rows = vec![
        ("p_exact".to_string(), short(record.p_exact)),
        ("p_oracle".to_string(), record.p_oracle.map_or("-".into(), short)),
        ("p_walk".to_string(), short(record.p_walk)),
        ("sigma".to_string(), short(record.sigma)),
        ("deviation".to_string(), short(deviation)),
        ("tolerance".to_string(), short(tolerance)),
        ("mean_steps".to_string(), short(record.mean_steps)),
        ("unabsorbed".to_string(), record.unabsorbed.to_string()),
        ("within_tolerance".to_string(), within.to_string()),
    ];
    let csv = csv_string(
        &[
            "trials",
            "outcome1",
            "outcome2",
            "unabsorbed",
            "mean_steps",
            "p_exact",
            "p_oracle",
            "p_walk",
            "sigma",
            "within_tolerance",
        ],
        &[vec![
            record.trials.to_string(),
            record.outcome_counts[0].to_string(),
            record.outcome_counts[1].to_string(),
            record.unabsorbed.to_string(),
            format!("{:.17e}", record.mean_steps),
            format!("{:.17e}", record.p_exact),
            opt(record.p_oracle),
            format!("{:.17e}", record.p_walk),
            format!("{:.17e}", record.sigma),
            within.to_string(),
        ]],
    )?;
    let config = json!({
        "input": args.state.describe(),
        "measurement": MeasurementSpec::from(&meas),
        "measurement_kind": if args.measurement_file.is_some() { json!("file") } else { json!(args.measurement) },
        "walk": cfg,
        "trials": args.trials,
        "seed": args.seed,
    });
    Ok(Rendered {
        command: "walk",
        config,
        payload: serde_json::to_value(WalkPayload {
            record,
            deviation,
            tolerance,
            within_tolerance: within,
        })?,
        csv: Some(csv),
        table: table(&rows),
        violations: !within,
    })
}

pub fn check_config(args: &CheckArgs) -> CheckConfig {
    CheckConfig {
        n_states: args.states,
        n_directions: args.dirs,
        fd_step: args.h,
        eps_norm: args.eps_norm,
        richardson: !args.no_richardson,
        seed: args.seed,
        shape: args.dims.clone(),
        keep_samples: args.keep_samples || args.output.format == Format::Csv,
        ..CheckConfig::default()
    }
}

fn check_table(r: &CheckReport) -> String {
    let xv = &r.cross_validation;
    let rows = vec![
        ("monotone".to_string(), r.monotone.clone()),
        ("direction".to_string(), format!("{:?}", r.direction).to_lowercase()),
        ("shape".to_string(), r.shape.clone()),
        ("pass".to_string(), r.counts.pass.to_string()),
        ("violation".to_string(), r.counts.violation.to_string()),
        ("ill_conditioned".to_string(), r.counts.ill_conditioned.to_string()),
        ("worst_violation".to_string(), short(r.worst_violation)),
        ("max |lu|".to_string(), short(r.max_abs_lu)),
        ("cross-check failures (lhs vs G)".to_string(), xv.failures.to_string()),
        (
            "fitted lhs/G factor".to_string(),
            xv.fitted_factor.map_or("-".into(), short),
        ),
        ("max |lhs - 2G|".to_string(), short(xv.max_discrepancy_twice_g)),
    ];
    table(&rows)
}

fn check_csv(r: &CheckReport) -> Result<String> {
    let rows: Vec<Vec<String>> = r
        .samples
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|s| {
            vec![
                s.state_id.to_string(),
                s.direction_id.to_string(),
                s.target.to_string(),
                match s.classification {
                    Classification::Pass => "pass",
                    Classification::Violation => "violation",
                    Classification::IllConditioned => "ill_conditioned",
                }
                .to_string(),
                opt(s.f_value),
                opt(s.lu_value),
                opt(s.lu_exact),
                opt(s.meas_value),
                opt(s.g_exact_ratio),
                opt(s.convexity_value),
                format!("{:.17e}", s.violation),
                s.status.clone(),
            ]
        })
        .collect();
    csv_string(
        &[
            "state_id",
            "direction_id",
            "target",
            "classification",
            "f_value",
            "lu_value",
            "lu_exact",
            "meas_value",
            "g_exact_ratio",
            "convexity_value",
            "violation",
            "status",
        ],
        &rows,
    )
}

pub fn check(args: &CheckArgs) -> Result<Rendered> {
    let desc = resolve_monotone(&args.monotone)?;
    let cfg = check_config(args);
    let mut report = run_check(&desc, &cfg)?;
    let csv = check_csv(&report)?;
    let table = check_table(&report);
    if !args.keep_samples {
        report.samples = None;
    }
    let violations = report.has_violations();
    Ok(Rendered {
        command: "check",
        config: json!({ "monotone": args.monotone, "check": cfg }),
        payload: serde_json::to_value(&report)?,
        csv: Some(csv),
        table,
        violations,
    })
}

pub fn campaign_config(args: &CampaignArgs) -> Result<CampaignConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| MonolabError::Io(format!("{}: {e}", args.config.display())))?;
    let mut v: Value = serde_json::from_str(&text)?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| MonolabError::Config("campaign config must be a JSON object".into()))?;
    if let Some(s) = args.seed {
        obj.insert("seed".into(), json!(s));
    }
    if !obj.contains_key("seed") {
        return Err(MonolabError::Config(
            "--seed is required when the config has no seed".into(),
        ));
    }
    if let Some(t) = args.trials {
        obj.insert("n_trials".into(), json!(t));
    }
    let mut cfg: CampaignConfig = serde_json::from_value(v)?;
    if args.csv.is_some() || args.output.format == Format::Csv {
        cfg.keep_records = true;
    }
    Ok(cfg)
}

fn campaign_table(r: &SimReport) -> String {
    let mut rows = vec![("trials".to_string(), r.n_trials.to_string())];
    for (k, n) in &r.operation_counts {
        rows.push((format!("  {}", k.as_str()), n.to_string()));
    }
    for m in &r.monotones {
        let t = &m.total;
        let range = match (t.min_delta, t.max_delta) {
            (Some(a), Some(b)) => format!("[{}, {}]", short(a), short(b)),
            _ => "-".into(),
        };
        rows.push((
            m.name.clone(),
            format!(
                "pass {} violation {} recorded {} delta {range}",
                t.pass, t.violation, t.recorded
            ),
        ));
    }
    rows.push(("walk inconsistent".to_string(), r.walk.inconsistent.to_string()));
    table(&rows)
}

pub fn campaign(args: &CampaignArgs) -> Result<Rendered> {
    let cfg = campaign_config(args)?;
    let mut report = run_campaign(&cfg)?;
    let csv = match &report.records {
        Some(recs) => {
            let mut buf = Vec::new();
            write_records_csv(recs, &mut buf)?;
            Some(String::from_utf8(buf).map_err(|e| MonolabError::Io(e.to_string()))?)
        }
        None => None,
    };
    if let (Some(path), Some(text)) = (&args.csv, &csv) {
        write_sink(Some(path), text)?;
    }
    let table = campaign_table(&report);
    let violations = report.violations() > 0;
    let mut echo = cfg.clone();
    if args.csv.is_some() || args.output.format == Format::Csv {
        // records requested only for the CSV side channel
        let requested: Value = serde_json::from_str(&std::fs::read_to_string(&args.config)?)?;
        if requested.get("keep_records") != Some(&json!(true)) {
            report.records = None;
            report.config.keep_records = false;
            echo.keep_records = false;
        }
    }
    Ok(Rendered {
        command: "campaign",
        config: serde_json::to_value(&echo)?,
        payload: serde_json::to_value(&report)?,
        csv,
        table,
        violations,
    })
}

pub fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_sink(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            let p = resolve_out(p);
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&p, text)?;
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
        }
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<Rendered> {
    match &cli.command {
        Command::Invariants(a) => invariants(a),
        Command::Walk(a) => walk(a),
        Command::Check(a) => check(a),
        Command::Campaign(a) => campaign(a),
    }
}

fn output_args(cli: &Cli) -> &OutputArgs {
    match &cli.command {
        Command::Invariants(a) => &a.output,
        Command::Walk(a) => &a.output,
        Command::Check(a) => &a.output,
        Command::Campaign(a) => &a.output,
    }
}

/// Parses `argv`, runs the subcommand, writes output and returns the exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let out = output_args(&cli);
    let result = execute(&cli).and_then(|r| {
        let text = r.to_format(out.format)?;
        write_sink(out.out.as_ref(), &text)?;
        Ok(r.violations)
    });
    match result {
        Ok(false) => 0,
        Ok(true) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Result<Rendered> {
        let mut argv = vec!["monolab"];
        argv.extend_from_slice(args);
        execute(&Cli::try_parse_from(argv).map_err(|e| MonolabError::Config(e.to_string()))?)
    }

    #[test]
    fn invariants_of_ghz() {
        let r = run(&["invariants", "--named", "ghz", "--format", "table"]).unwrap();
        assert!(r.table.contains("phi_ABC"));
        assert!((r.payload["invariants"]["phi"].as_f64().unwrap() - 49.5).abs() < 1e-9);
        assert!(r.csv.unwrap().starts_with("quantity,value"));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(dispatch(["monolab", "walk", "--bogus"]), 2);
        assert_eq!(dispatch(["monolab", "check", "--monotone", "norm"]), 2);
        assert_eq!(dispatch(["monolab", "invariants", "--named", "nope"]), 2);
    }

    #[test]
    fn check_payload_is_reproducible() {
        let args = [
            "check",
            "--monotone",
            "purity",
            "--states",
            "3",
            "--dirs",
            "2",
            "--seed",
            "4",
        ];
        let a = canonical_json(&run(&args).unwrap().payload).unwrap();
        let b = canonical_json(&run(&args).unwrap().payload).unwrap();
        assert_eq!(a, b);
        let bad = run(&[
            "check",
            "--monotone",
            "purity@decreasing",
            "--states",
            "3",
            "--dirs",
            "2",
            "--seed",
            "4",
        ]);
        assert!(bad.unwrap().violations);
    }

    #[test]
    fn walk_on_bell() {
        let r = run(&[
            "walk",
            "--named",
            "bell",
            "--measurement",
            "projective",
            "--trials",
            "400",
            "--seed",
            "1",
        ])
        .unwrap();
        assert!(!r.violations, "{}", r.table);
        assert!((r.payload["p_exact"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}
