mod grid;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use meshc::analysis::{
    depth_bound_analytic, depth_bound_inequality, heatmap, iso_transmission_curve, optimal_chip_size, single_chip_transmission,
    tk_simulate, DepthCache, ScanOptions,
};
use meshc::circuit::{ChipLayout, Circuit};
use meshc::compiler::{compile, shallowest_compile, Infeasible};
use meshc::coupled::{greedy_coupled, greedy_longrange};
use meshc::linalg::{haar_random_unitary, random_isometry, ComplexMatrix, Isometry, UnitaryMatrix};
use meshc::par::Exec;
use meshc::synthesis::{isometry_error, synth_boson_sampling, Scheme};
use meshc::Error;

use grid::{Grid, IntRange};

const TOLERANCE: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "meshc", version, about = "Synthesize and compile Mach-Zehnder interferometer meshes")]
struct Cli {
    /// Report failures on stderr as JSON lines.
    #[arg(long, global = true)]
    json_errors: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a unitary into a rectangular or triangular mesh.
    Synth {
        #[arg(long, value_enum, default_value = "clements")]
        scheme: SchemeArg,
        #[arg(long)]
        unitary: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decompose an isometry with the partial (boson-sampling) scheme.
    BsSynth {
        #[arg(long)]
        isometry: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Assign angles on a given chip layout.
    Compile {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        unitary: PathBuf,
        /// Use the fewest leading layers and leave the rest idle.
        #[arg(long)]
        shallowest: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Coupled-chip design for an isometry.
    Coupled {
        #[arg(long)]
        isometry: PathBuf,
        #[arg(long, required_unless_present = "longrange")]
        chip_size: Option<usize>,
        /// Two-mode elimination with long-range MZIs instead of chips.
        #[arg(long)]
        longrange: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Depth of the long-range elimination and its bounds.
    Depth {
        /// Mode count, or a range `START:END[:STEP]`.
        #[arg(long)]
        m: IntRange,
        /// Photon count, or a range `START:END[:STEP]`.
        #[arg(long)]
        n: IntRange,
        #[arg(long, value_enum, default_value = "all")]
        bound: BoundArg,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Transmission of coupled designs and the best chip size.
    Transmission(TransmissionArgs),
    /// Haar-random unitary, or isometry with `--n`.
    Random {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare a circuit with a target matrix (all columns or the first n).
    Verify {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, alias = "isometry")]
        unitary: PathBuf,
        #[arg(long, default_value_t = TOLERANCE)]
        tolerance: f64,
    },
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["eta_mzi", "heatmap", "iso_curve"]))]
struct TransmissionArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, requires = "eta_c")]
    eta_mzi: Option<f64>,
    #[arg(long)]
    eta_c: Option<f64>,
    /// Grid `LO:HI:N/LO:HI:N` over (eta_mzi, eta_c).
    #[arg(long)]
    heatmap: Option<String>,
    /// Target per-photon transmission for the iso-curve.
    #[arg(long)]
    iso_curve: Option<f64>,
    /// eta_mzi grid `LO:HI:N` for the iso-curve.
    #[arg(long, default_value = "0.99:1:101")]
    grid: String,
    /// Largest chip size scanned besides the single chip.
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Run scans on the calling thread only.
    #[arg(long)]
    sequential: bool,
    /// Depth cache file (MESHC_CACHE takes precedence).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Keep measured depths in memory only.
    #[arg(long)]
    no_cache: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Clements,
    Reck,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundArg {
    Exact,
    Ineq,
    Analytic,
    All,
}

enum Failure {
    Input(String),
    Infeasible(Infeasible),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numeric(_) | Error::Singular | Error::DegenerateVector | Error::UnsupportedElement(_) => {
                Failure::Numeric(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Run<T = ()> = Result<T, Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Run<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Run {
    let written = match output {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    written.map_err(|e| Failure::Input(format!("writing output: {e}")))
}

fn emit_json<T: serde::Serialize>(output: Option<&Path>, value: &T) -> Run {
    let mut text = serde_json::to_string(value).map_err(|e| Failure::Numeric(e.to_string()))?;
    text.push('\n');
    emit(output, &text)
}

fn check_error(err: f64, what: &str) -> Run {
    if err > TOLERANCE {
        return Err(Failure::Numeric(format!("{what} reconstruction error {err:.3e} above {TOLERANCE:e}")));
    }
    Ok(())
}

fn synth(scheme: SchemeArg, unitary: &Path, output: Option<&Path>) -> Run {
    let u: UnitaryMatrix = read_json(unitary)?;
    let scheme = match scheme {
        SchemeArg::Clements => Scheme::Clements,
        SchemeArg::Reck => Scheme::Reck,
    };
    let c = scheme.synthesize(&u)?;
    check_error(c.evaluate()?.matrix().distance(u.matrix()), "circuit")?;
    emit_json(output, &c)
}

fn bs_synth(isometry: &Path, output: Option<&Path>) -> Run {
    let v: Isometry = read_json(isometry)?;
    let c = synth_boson_sampling(&v)?;
    emit_json(output, &c)
}

fn compile_cmd(layout: &Path, unitary: &Path, shallowest: bool, output: Option<&Path>) -> Run {
    let layout: ChipLayout = read_json(layout)?;
    let u: UnitaryMatrix = read_json(unitary)?;
    if shallowest {
        let (a, depth) = shallowest_compile(&u, &layout, Exec::default())?.map_err(Failure::Infeasible)?;
        emit_json(output, &json!({ "minimal_used_depth": depth, "assignment": a }))
    } else {
        let a = compile(&u, &layout)?.map_err(Failure::Infeasible)?;
        emit_json(output, &a)
    }
}

fn coupled_cmd(isometry: &Path, chip_size: Option<usize>, longrange: bool, output: Option<&Path>) -> Run {
    let v: Isometry = read_json(isometry)?;
    if longrange {
        let lr = greedy_longrange(&v)?;
        check_error(isometry_error(&lr.circuit, &v)?, "long-range")?;
        return emit_json(output, &lr);
    }
    let k = chip_size.ok_or_else(|| Failure::Input("--chip-size is required".into()))?;
    let cc = greedy_coupled(&v, k)?;
    check_error(cc.isometry_error(&v)?, "coupled")?;
    emit_json(output, &cc)
}

fn depth_cmd(ms: &IntRange, ns: &IntRange, bound: BoundArg, output: Option<&Path>) -> Run {
    let pairs: Vec<(usize, usize)> = ms.values().iter().flat_map(|&m| ns.values().iter().map(move |&n| (m, n))).collect();
    for &(m, n) in &pairs {
        if n == 0 || m < n {
            return Err(Failure::Input(format!("need m >= n >= 1, got m={m} n={n}")));
        }
    }
    let value = |m: usize, n: usize, b: BoundArg| -> Run<String> {
        Ok(match b {
            BoundArg::Exact => tk_simulate(m, n).0.to_string(),
            BoundArg::Ineq => depth_bound_inequality(m, n)?.to_string(),
            BoundArg::Analytic if m < 3 => String::new(),
            BoundArg::Analytic => depth_bound_analytic(m, n)?.k.to_string(),
            BoundArg::All => unreachable!("expanded by the caller"),
        })
    };
    if pairs.len() == 1 && bound != BoundArg::All {
        let (m, n) = pairs[0];
        if bound == BoundArg::Analytic && m < 3 {
            return Err(Failure::Input("the analytic bound needs m >= 3".into()));
        }
        if bound == BoundArg::Analytic && !depth_bound_analytic(m, n)?.regime_ok {
            eprintln!("note: analytic bound outside its K > 2n regime");
        }
        return emit(output, &format!("{}\n", value(m, n, bound)?));
    }
    let cols: Vec<(BoundArg, &str)> = [(BoundArg::Exact, "K_exact"), (BoundArg::Ineq, "K_ineq"), (BoundArg::Analytic, "K_analytic")]
        .into_iter()
        .filter(|&(b, _)| bound == BoundArg::All || bound == b)
        .collect();
    let mut text = format!("m,n,{}\n", cols.iter().map(|c| c.1).collect::<Vec<_>>().join(","));
    for (m, n) in pairs {
        let row: Vec<String> = cols.iter().map(|&(b, _)| value(m, n, b)).collect::<Run<_>>()?;
        text.push_str(&format!("{m},{n},{}\n", row.join(",")));
    }
    emit(output, &text)
}

fn cache_path(arg: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("MESHC_CACHE").filter(|p| !p.is_empty()) {
        return Some(PathBuf::from(p));
    }
    if let Some(p) = arg {
        return Some(p.to_path_buf());
    }
    let base = std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))?;
    Some(base.join("meshc").join("depths.json"))
}

fn check_probability(x: f64, name: &str) -> Run {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Failure::Input(format!("{name} = {x} outside (0, 1]")));
    }
    Ok(())
}

fn transmission_cmd(a: &TransmissionArgs) -> Run {
    if a.n == 0 || a.m < a.n || a.m < 2 {
        return Err(Failure::Input(format!("need m >= n >= 1 and m >= 2, got m={} n={}", a.m, a.n)));
    }
    let cache = match (a.no_cache, cache_path(a.cache.as_deref())) {
        (false, Some(path)) => DepthCache::open(path)?,
        _ => DepthCache::in_memory(),
    };
    let opts = ScanOptions {
        k_max: a.k_max,
        stride: a.stride.max(1),
        exec: if a.sequential { Exec::Sequential } else { Exec::default() },
    };
    let out = a.output.as_deref();
    let result = if let (Some(eta_mzi), Some(eta_c)) = (a.eta_mzi, a.eta_c) {
        check_probability(eta_mzi, "eta_mzi")?;
        check_probability(eta_c, "eta_c")?;
        let c = optimal_chip_size(a.m, a.n, eta_mzi, eta_c, &cache, &opts)?;
        let (single, _) = single_chip_transmission(a.m, eta_mzi, eta_c, a.n);
        emit(
            out,
            &format!(
                "m,n,eta_mzi,eta_c,k_star,d,eta_star,eta_star_n,eta_single_chip\n{},{},{eta_mzi},{eta_c},{},{},{},{},{single}\n",
                a.m, a.n, c.k, c.d, c.eta, c.eta_n
            ),
        )
    } else if let Some(spec) = &a.heatmap {
        let (gm, gc) = spec
            .split_once('/')
            .ok_or_else(|| Failure::Input(format!("heatmap grid {spec:?}: expected LO:HI:N/LO:HI:N")))?;
        let (gm, gc): (Grid, Grid) = (gm.parse().map_err(Failure::Input)?, gc.parse().map_err(Failure::Input)?);
        for &x in gm.points().iter().chain(gc.points().iter()) {
            check_probability(x, "grid point")?;
        }
        let rows = heatmap(a.m, a.n, &gm.points(), &gc.points(), &cache, &opts)?;
        let mut text = String::from("eta_mzi,eta_c,k_star,eta_star\n");
        for r in rows {
            text.push_str(&format!("{},{},{},{}\n", r.eta_mzi, r.eta_c, r.k_star, r.eta_star));
        }
        emit(out, &text)
    } else {
        let target = a.iso_curve.expect("argument group requires one mode");
        let grid: Grid = a.grid.parse().map_err(Failure::Input)?;
        for &x in &grid.points() {
            check_probability(x, "grid point")?;
        }
        let curve = iso_transmission_curve(a.m, a.n, target, &grid.points(), &cache, &opts)?;
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut text = String::from("eta_mzi,eta_c_required,k_star,eta_c_single_chip\n");
        for p in &curve.points {
            text.push_str(&format!(
                "{},{},{},{}\n",
                p.eta_mzi,
                cell(p.eta_c_required),
                p.k_star.map(|k| k.to_string()).unwrap_or_default(),
                cell(p.eta_c_single)
            ));
        }
        eprintln!("cutoff_eta_mzi={}", curve.cutoff_eta_mzi);
        emit(out, &text)
    };
    if let Err(e) = cache.save() {
        eprintln!("warning: depth cache not saved: {e}");
    }
    result
}

fn random_cmd(m: usize, n: Option<usize>, seed: u64, output: Option<&Path>) -> Run {
    let matrix: ComplexMatrix = match n {
        Some(n) => random_isometry(m, n, seed)?.matrix().clone(),
        None if m == 0 => return Err(Failure::Input("m must be positive".into())),
        None => haar_random_unitary(m, seed)?.into_inner(),
    };
    emit_json(output, &matrix)
}

fn verify_cmd(circuit: &Path, target: &Path, tolerance: f64) -> Run {
    let c: Circuit = read_json(circuit)?;
    let v: ComplexMatrix = read_json(target)?;
    if v.rows() != c.modes {
        return Err(Failure::Input(format!("circuit has {} modes, target has {} rows", c.modes, v.rows())));
    }
    let v = Isometry::new(v)?;
    let err = isometry_error(&c, &v)?;
    let ok = err <= tolerance;
    emit_json(None, &json!({ "error": err, "tolerance": tolerance, "columns": v.photons(), "ok": ok }))?;
    if !ok {
        return Err(Failure::Numeric(format!("reconstruction error {err:.3e} above {tolerance:e}")));
    }
    Ok(())
}

fn run(cli: &Cli) -> Run {
    match &cli.command {
        Command::Synth { scheme, unitary, output } => synth(*scheme, unitary, output.as_deref()),
        Command::BsSynth { isometry, output } => bs_synth(isometry, output.as_deref()),
        Command::Compile { layout, unitary, shallowest, output } => compile_cmd(layout, unitary, *shallowest, output.as_deref()),
        Command::Coupled { isometry, chip_size, longrange, output } => coupled_cmd(isometry, *chip_size, *longrange, output.as_deref()),
        Command::Depth { m, n, bound, output } => depth_cmd(m, n, *bound, output.as_deref()),
        Command::Transmission(args) => transmission_cmd(args),
        Command::Random { m, n, seed, output } => random_cmd(*m, *n, *seed, output.as_deref()),
        Command::Verify { circuit, unitary, tolerance } => verify_cmd(circuit, unitary, *tolerance),
    }
}

fn report(f: &Failure, json_errors: bool) {
    if json_errors {
        let line = match f {
            Failure::Input(msg) => json!({ "kind": "input", "exit_code": 1, "message": msg }),
            Failure::Numeric(msg) => json!({ "kind": "numeric", "exit_code": 3, "message": msg }),
            Failure::Infeasible(inf) => json!({
                "kind": "infeasible",
                "exit_code": 2,
                "message": inf.to_string(),
                "residual_permutation": inf.residual_permutation,
                "first_inversion": inf.first_inversion,
                "blocking_layer": inf.blocking_layer,
            }),
        };
        eprintln!("{line}");
    } else {
        match f {
            Failure::Input(msg) => eprintln!("error: {msg}"),
            Failure::Numeric(msg) => eprintln!("numerical failure: {msg}"),
            Failure::Infeasible(inf) => eprintln!("infeasible: {inf}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report(&f, cli.json_errors);
            ExitCode::from(f.code())
        }
    }
}
