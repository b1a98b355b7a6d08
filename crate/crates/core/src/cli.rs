//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or validation, 3 physically impossible
//! request, 4 total numerical failure. Every failure prints one JSON object
//! on stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::aav::{self, EnsembleStats, ScenarioConfig};
use crate::error::Error;
use crate::flowlines::{self, BeamSystem, FlowOptions};
use crate::hilbert::{pauli, spin_state, Axis, HermitianOperator, StateVector};
use crate::protocol::{self, DEFAULT_PROB_FLOOR};

pub const THREADS_ENV: &str = "WEAKMEAS_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PHYSICS: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "weakmeas",
    version,
    about = "Pre- and post-selected measurement laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the weak value of an observable as JSON.
    Weakvalue(StateArgs),
    /// Print ABL probabilities of an intermediate measurement as CSV.
    Abl(StateArgs),
    /// Run the Stern-Gerlach amplification scenario from a config file.
    Aav {
        mode: AavMode,
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate weak-momentum flow lines from a config file.
    Flowlines {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
struct StateArgs {
    /// Preselect along (cos a, 0, sin a) with a in degrees.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "pre")]
    alpha_deg: Option<f64>,
    /// Preselected state: x, -x, y, -y, z, -z or comma-separated complex amplitudes.
    #[arg(long, allow_hyphen_values = true)]
    pre: Option<String>,
    /// Postselected state, same syntax as --pre.
    #[arg(long, allow_hyphen_values = true)]
    post: String,
    /// Observable: x, y, z or a unit axis "nx,ny,nz" for the Pauli operator along it.
    #[arg(long, allow_hyphen_values = true, default_value = "z")]
    obs: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AavMode {
    Exact,
    Ensemble,
    Sweep,
    Decompose,
}

impl AavMode {
    fn name(self) -> &'static str {
        match self {
            AavMode::Exact => "exact",
            AavMode::Ensemble => "ensemble",
            AavMode::Sweep => "sweep",
            AavMode::Decompose => "decompose",
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
    keys: Vec<String>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
            keys: Vec::new(),
        }
    }

    fn schema(keys: Vec<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "unknown keys",
            message: format!("unknown config keys: {}", keys.join(", ")),
            keys,
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            kind: "io",
            message: format!("{}: {e}", path.display()),
            keys: Vec::new(),
        }
    }

    fn to_json(&self) -> Value {
        let mut obj = json!({
            "error": self.kind,
            "message": self.message,
            "exit_code": self.code,
        });
        if !self.keys.is_empty() {
            obj["keys"] = json!(self.keys);
        }
        obj
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::RejectedInput(_) => (EXIT_USAGE, "rejected input"),
            Error::OrthogonalPostselection { .. } => (EXIT_PHYSICS, "orthogonal postselection"),
            Error::ImpossibleSequence { .. } => (EXIT_PHYSICS, "impossible sequence"),
            Error::PostselectionFailed { .. } => (EXIT_PHYSICS, "postselection failed"),
            Error::Node { .. } | Error::IntegrationFailed { .. } => {
                (EXIT_NUMERICAL, "numerical failure")
            }
        };
        Self {
            code,
            kind,
            message: e.to_string(),
            keys: Vec::new(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let f = Failure::usage(e.render().to_string().trim_end());
            let _ = writeln!(err, "{}", f.to_json());
            return f.code;
        }
    };
    let result = thread_pool().and_then(|pool| match pool {
        Some(pool) => pool.install(|| dispatch(&cli)),
        None => dispatch(&cli),
    });
    match result {
        Ok(text) => match out.write_all(text.as_bytes()) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let f = Failure::io(Path::new("<stdout>"), e);
                let _ = writeln!(err, "{}", f.to_json());
                f.code
            }
        },
        Err(f) => {
            let _ = writeln!(err, "{}", f.to_json());
            f.code
        }
    }
}

fn thread_pool() -> CliResult<Option<rayon::ThreadPool>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::usage(format!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Failure::usage(format!("cannot build thread pool: {e}")))
}

/// Returns the text destined for stdout.
fn dispatch(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Weakvalue(args) => cmd_weakvalue(args),
        Command::Abl(args) => cmd_abl(args),
        Command::Aav { mode, config } => cmd_aav(*mode, config).map(|()| String::new()),
        Command::Flowlines { config } => cmd_flowlines(config).map(|()| String::new()),
    }
}

// ---------- number formatting ----------

/// Shortest round-trip decimal, `nan` for undefined values, no negative zero.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        let v = if v == 0.0 { 0.0 } else { v };
        serde_json::to_string(&v).expect("finite floats serialize")
    }
}

/// Rounds to 12 significant digits before formatting.
pub fn format_probability(p: f64) -> String {
    if !p.is_finite() {
        return format_number(p);
    }
    let rounded: f64 = format!("{p:.11e}").parse().expect("formatted float parses");
    format_number(rounded)
}

fn clean(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

// ---------- state and observable parsing ----------

fn parse_state(text: &str) -> CliResult<StateVector> {
    let label = text.trim().to_ascii_lowercase();
    let named = match label.as_str() {
        "x" | "+x" | "x+" => Some(StateVector::x_plus()),
        "-x" | "x-" => Some(StateVector::x_minus()),
        "y" | "+y" | "y+" => Some(StateVector::y_plus()),
        "-y" | "y-" => Some(StateVector::y_minus()),
        "z" | "+z" | "z+" => Some(StateVector::z_plus()),
        "-z" | "z-" => Some(StateVector::z_minus()),
        _ => None,
    };
    if let Some(state) = named {
        return Ok(state);
    }
    let amps =
        text.split(',')
            .map(|s| {
                s.trim().replace(' ', "").parse::<Complex64>().map_err(|_| {
                    Failure::usage(format!("cannot parse amplitude {s:?} in {text:?}"))
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
    Ok(StateVector::new(amps)?)
}

fn parse_observable(text: &str) -> CliResult<HermitianOperator> {
    let axis = match text.trim().to_ascii_lowercase().as_str() {
        "x" => Axis::X,
        "y" => Axis::Y,
        "z" => Axis::Z,
        _ => {
            let parts = text
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Failure::usage(format!("cannot parse observable {text:?}")))?;
            let v: [f64; 3] = parts
                .try_into()
                .map_err(|_| Failure::usage("observable axis needs three components"))?;
            Axis::Vector(v)
        }
    };
    Ok(pauli(axis)?)
}

fn states(args: &StateArgs) -> CliResult<(StateVector, StateVector, HermitianOperator)> {
    let pre = match (&args.pre, args.alpha_deg) {
        (Some(text), None) => parse_state(text)?,
        (None, Some(alpha)) => spin_state(alpha)?,
        _ => return Err(Failure::usage("give exactly one of --pre or --alpha-deg")),
    };
    let post = parse_state(&args.post)?;
    let obs = parse_observable(&args.obs)?;
    if pre.dim() != post.dim() || pre.dim() != obs.dim() {
        return Err(Failure::usage(format!(
            "dimension mismatch: pre {}, post {}, observable {}",
            pre.dim(),
            post.dim(),
            obs.dim()
        )));
    }
    Ok((pre, post, obs))
}

fn cmd_weakvalue(args: &StateArgs) -> CliResult<String> {
    let (pre, post, obs) = states(args)?;
    let wv = protocol::weak_value(&pre, &post, &obs)?;
    let overlap = post.normalize()?.inner(&pre.normalize()?)?.norm();
    let record = json!({
        "re": clean(wv.re),
        "im": clean(wv.im),
        "overlap_abs": clean(overlap),
    });
    Ok(format!("{record}\n"))
}

fn cmd_abl(args: &StateArgs) -> CliResult<String> {
    let (pre, post, obs) = states(args)?;
    let dist = protocol::abl_probability(&pre, &post, &obs)?;
    let mut text = String::from("eigenvalue,probability\n");
    for (a, p) in dist.eigenvalues.iter().zip(&dist.probabilities) {
        text.push_str(&format!(
            "{},{}\n",
            format_number(*a),
            format_probability(*p)
        ));
    }
    Ok(text)
}

// ---------- config files ----------

const TOP_KEYS: &[&str] = &["scenario", "output_dir", "subcommand_options"];
const SCENARIO_KEYS: &[&str] = &[
    "alpha_deg",
    "post_axis",
    "g",
    "sigma_p",
    "grid",
    "lever_arm",
    "n_trials",
    "seed",
];
const GRID_KEYS: &[&str] = &["n", "x_min", "x_max"];
const SWEEP_KEYS: &[&str] = &["alphas_deg"];
const BEAM_KEYS: &[&str] = &[
    "slit_separation",
    "waist",
    "wavenumber",
    "relative_phase",
    "amplitudes",
];
const FLOW_KEYS: &[&str] = &[
    "start_xs",
    "z0",
    "z1",
    "tolerance",
    "stations",
    "node_floor",
];

fn unknown_keys(value: &Value, allowed: &[&str], prefix: &str, found: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                found.push(format!("{prefix}{key}"));
            }
        }
    }
}

struct LoadedConfig {
    raw: Value,
    scenario: Value,
    output_dir: PathBuf,
    options: Value,
}

fn load_config(
    path: &Path,
    scenario_keys: &[&str],
    option_keys: &[&str],
) -> CliResult<LoadedConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(top) = &raw else {
        return Err(Failure::usage("config must be a JSON object"));
    };
    let empty = Value::Object(Map::new());
    let scenario = top
        .get("scenario")
        .cloned()
        .unwrap_or_else(|| empty.clone());
    let options = top
        .get("subcommand_options")
        .cloned()
        .unwrap_or_else(|| empty.clone());
    let mut found = Vec::new();
    unknown_keys(&raw, TOP_KEYS, "", &mut found);
    unknown_keys(&scenario, scenario_keys, "scenario.", &mut found);
    if let Some(grid) = scenario.get("grid") {
        unknown_keys(grid, GRID_KEYS, "scenario.grid.", &mut found);
    }
    unknown_keys(&options, option_keys, "subcommand_options.", &mut found);
    if !found.is_empty() {
        return Err(Failure::schema(found));
    }
    for (name, v) in [("scenario", &scenario), ("subcommand_options", &options)] {
        if !v.is_object() {
            return Err(Failure::usage(format!("{name} must be an object")));
        }
    }
    let output_dir = match top.get("output_dir") {
        Some(Value::String(s)) if !s.is_empty() => {
            let p = PathBuf::from(s);
            if p.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p
            }
        }
        Some(_) => return Err(Failure::usage("output_dir must be a non-empty string")),
        None => return Err(Failure::usage("missing key output_dir")),
    };
    Ok(LoadedConfig {
        raw,
        scenario,
        output_dir,
        options,
    })
}

fn typed<T: for<'de> Deserialize<'de>>(value: &Value, what: &str) -> CliResult<T> {
    T::deserialize(value).map_err(|e| Failure::usage(format!("invalid {what}: {e}")))
}

// ---------- manifest ----------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub artifact_version: String,
    pub timestamp: String,
}

/// First 64 bits of SHA-256 over the key-sorted compact JSON, as hex.
pub fn config_digest(config: &Value) -> String {
    let canonical = serde_json::to_string(config).expect("JSON values serialize");
    let hash = Sha256::digest(canonical.as_bytes());
    hash[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    fn new(command: &str, config: &Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_digest: config_digest(config),
            seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    fn csv_header(&self) -> String {
        format!(
            "# command: {}\n# config_digest: {}\n# seed: {}\n# artifact_version: {}\n# timestamp: {}\n",
            self.command, self.config_digest, self.seed, self.artifact_version, self.timestamp
        )
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

/// Pretty JSON with the manifest under `"manifest"`; `-0.0` is written as `0.0`.
fn write_json(path: &Path, manifest: &RunManifest, body: Value) -> CliResult<()> {
    let mut body = body;
    scrub(&mut body);
    body["manifest"] = serde_json::to_value(manifest).expect("manifest serializes");
    let mut text = serde_json::to_string_pretty(&body).expect("JSON values serialize");
    text.push('\n');
    write_file(path, &text)
}

fn scrub(v: &mut Value) {
    match v {
        Value::Number(n) if n.as_f64() == Some(0.0) && n.is_f64() => *v = json!(0.0),
        Value::Array(items) => items.iter_mut().for_each(scrub),
        Value::Object(map) => map.values_mut().for_each(scrub),
        _ => {}
    }
}

// ---------- aav ----------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepOptions {
    alphas_deg: Option<Vec<f64>>,
}

fn cmd_aav(mode: AavMode, path: &Path) -> CliResult<()> {
    let option_keys: &[&str] = if mode == AavMode::Sweep {
        SWEEP_KEYS
    } else {
        &[]
    };
    let loaded = load_config(path, SCENARIO_KEYS, option_keys)?;
    if loaded.scenario.as_object().is_some_and(|m| m.is_empty()) {
        return Err(Failure::usage("missing key scenario"));
    }
    let config: ScenarioConfig = typed(&loaded.scenario, "scenario")?;
    config.validate()?;
    let command = format!("aav {}", mode.name());
    let manifest = RunManifest::new(&command, &loaded.raw, config.seed);
    let dir = &loaded.output_dir;

    let body = match mode {
        AavMode::Exact => {
            let scenario = aav::build_scenario(&config)?;
            let run = aav::run_exact(&scenario)?;
            json!({
                "scenario": config,
                "weak_ratio": scenario.weak_ratio,
                "weak_warning": scenario.weak_warning,
                "aw_analytic": scenario.analytic_weak_value().ok(),
                "overlap_abs": scenario.overlap_abs(),
                "estimate": run.estimate,
                "shift_p": run.shift_p(),
                "shift_over_g": run.shift_p() / config.g,
                "post_prob": run.post_prob,
                "post_prob_analytic": scenario.analytic_post_prob(),
                "initial": moments_json(&run.initial),
                "conditional": moments_json(&run.conditional),
            })
        }
        AavMode::Ensemble => {
            let scenario = aav::build_scenario(&config)?;
            let stats: EnsembleStats = aav::run_ensemble(&scenario)?;
            if stats.n_postselected == 0 && stats.post_prob_exact <= DEFAULT_PROB_FLOOR {
                return Err(Error::PostselectionFailed {
                    probability: stats.post_prob_exact,
                }
                .into());
            }
            let mut body = serde_json::to_value(&stats).expect("stats serialize");
            body["scenario"] = json!(config);
            body["weak_ratio"] = json!(scenario.weak_ratio);
            body["weak_warning"] = json!(scenario.weak_warning);
            body["aw_analytic"] = json!(scenario.analytic_weak_value().ok());
            body
        }
        AavMode::Decompose => {
            let scenario = aav::build_scenario(&config)?;
            let d = aav::decompose_shift(&scenario)?;
            let mut body = serde_json::to_value(d).expect("decomposition serializes");
            body["scenario"] = json!(config);
            body["weak_ratio"] = json!(scenario.weak_ratio);
            body["weak_warning"] = json!(scenario.weak_warning);
            body["total_shift_over_g"] = json!(d.total_shift / config.g);
            body["branch_term_over_g"] = json!(d.branch_term / config.g);
            body["interference_term_over_g"] = json!(d.interference_term / config.g);
            body["interference_fraction"] = json!(d.interference_term / d.total_shift);
            body
        }
        AavMode::Sweep => {
            let options: SweepOptions = typed(&loaded.options, "subcommand_options")?;
            let alphas = options
                .alphas_deg
                .unwrap_or_else(|| (1..180).map(f64::from).collect());
            if alphas.is_empty() {
                return Err(Failure::usage("alphas_deg is empty"));
            }
            let table = aav::sweep_overlap(&config, &alphas);
            if table.rows.iter().all(|r| r.shift_over_g.is_none()) {
                let reason = table.rows[0].failure.clone().unwrap_or_default();
                return Err(Failure {
                    code: EXIT_NUMERICAL,
                    kind: "numerical failure",
                    message: format!("every sweep row failed: {reason}"),
                    keys: Vec::new(),
                });
            }
            prepare_dir(dir)?;
            let mut csv = manifest.csv_header();
            csv.push_str("alpha_deg,overlap_abs,aw_analytic,shift_over_g,post_prob,weak_flag\n");
            for r in &table.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    format_number(r.alpha_deg),
                    format_number(r.overlap_abs),
                    format_number(r.aw_analytic.map_or(f64::NAN, |w| w.re)),
                    format_number(r.shift_over_g.unwrap_or(f64::NAN)),
                    format_number(r.post_prob.unwrap_or(f64::NAN)),
                    u8::from(r.weak_flag),
                ));
            }
            write_file(&dir.join("sweep.csv"), &csv)?;
            let failures: Vec<Value> = table
                .rows
                .iter()
                .filter_map(|r| {
                    r.failure
                        .as_ref()
                        .map(|f| json!({"alpha_deg": r.alpha_deg, "reason": f}))
                })
                .collect();
            json!({
                "scenario": config,
                "rows": table.rows.len(),
                "monotonicity": table.monotonicity,
                "row_failures": failures,
            })
        }
    };
    prepare_dir(dir)?;
    write_json(&dir.join("stats.json"), &manifest, body)
}

fn moments_json(m: &crate::pointer::Moments) -> Value {
    json!({
        "mean_x": m.mean_x,
        "var_x": m.var_x,
        "mean_p": m.mean_p,
        "var_p": m.var_p,
    })
}

// ---------- flowlines ----------

fn default_amplitudes() -> [[f64; 2]; 2] {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    [[a, 0.0], [a, 0.0]]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamConfig {
    #[serde(default = "default_separation")]
    slit_separation: f64,
    #[serde(default = "default_waist")]
    waist: f64,
    #[serde(default = "default_wavenumber")]
    wavenumber: f64,
    #[serde(default)]
    relative_phase: f64,
    /// `[[re, im], [re, im]]`.
    #[serde(default = "default_amplitudes")]
    amplitudes: [[f64; 2]; 2],
}

fn default_separation() -> f64 {
    4.0
}

fn default_waist() -> f64 {
    1.0
}

fn default_wavenumber() -> f64 {
    20.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowConfig {
    start_xs: Option<Vec<f64>>,
    z0: Option<f64>,
    z1: Option<f64>,
    tolerance: Option<f64>,
    stations: Option<usize>,
    node_floor: Option<f64>,
}

fn cmd_flowlines(path: &Path) -> CliResult<()> {
    let loaded = load_config(path, BEAM_KEYS, FLOW_KEYS)?;
    let beam: BeamConfig = typed(&loaded.scenario, "scenario")?;
    let flow: FlowConfig = typed(&loaded.options, "subcommand_options")?;
    let amp = |a: [f64; 2]| Complex64::new(a[0], a[1]);
    let system = BeamSystem::new(
        beam.slit_separation,
        beam.waist,
        beam.wavenumber,
        beam.relative_phase,
        [amp(beam.amplitudes[0]), amp(beam.amplitudes[1])],
    )?;
    let starts = flow
        .start_xs
        .unwrap_or_else(|| flowlines::default_starts(&system));
    if starts.is_empty() {
        return Err(Failure::usage("start_xs is empty"));
    }
    let (dz0, dz1) = system.default_z_range();
    let defaults = FlowOptions::default();
    let options = FlowOptions {
        tolerance: flow.tolerance.unwrap_or(defaults.tolerance),
        stations: flow.stations.unwrap_or(defaults.stations),
        node_floor: flow.node_floor.unwrap_or(defaults.node_floor),
    };
    let lines = flowlines::integrate_flowlines_with(
        &system,
        &starts,
        flow.z0.unwrap_or(dz0),
        flow.z1.unwrap_or(dz1),
        &options,
    )?;
    let manifest = RunManifest::new("flowlines", &loaded.raw, 0);
    let dir = &loaded.output_dir;
    prepare_dir(dir)?;
    let mut csv = manifest.csv_header();
    csv.push_str("line_id,start_x,z,x\n");
    let mut errors = manifest.csv_header();
    errors.push_str("line_id,start_x,failed,reason\n");
    let mut succeeded = 0;
    let mut first_failure = None;
    for (id, line) in lines.iter().enumerate() {
        match line {
            Ok(line) => {
                succeeded += 1;
                for &(x, z) in &line.points {
                    csv.push_str(&format!(
                        "{id},{},{},{}\n",
                        format_number(line.start_x),
                        format_number(z),
                        format_number(x)
                    ));
                }
            }
            Err(e) => {
                let start = match e {
                    Error::IntegrationFailed { start_x, .. } => *start_x,
                    _ => f64::NAN,
                };
                let reason = e.to_string().replace('"', "'");
                errors.push_str(&format!("{id},{},1,\"{reason}\"\n", format_number(start)));
                first_failure.get_or_insert(e.clone());
            }
        }
    }
    write_file(&dir.join("lines.csv"), &csv)?;
    write_file(&dir.join("errors.csv"), &errors)?;
    match (succeeded, first_failure) {
        (0, Some(e)) => Err(Failure {
            code: EXIT_NUMERICAL,
            kind: "numerical failure",
            message: format!("every flow line failed; first: {e}"),
            keys: Vec::new(),
        }),
        _ => Ok(()),
    }
}
