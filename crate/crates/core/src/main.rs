use besovkit::admat::{ad_fit_epsilon, ad_membership, apply, read_binary, write_binary, AdParams, MatrixJson, ScaleMatrix};
use besovkit::funcspace::{default_corpus, equivalence_ratio, gramian, gramian_decay_check, DEFAULT_EPS0};
use besovkit::geometry::{builtin_manifold, ManifoldJson};
use besovkit::grid::{
    build_dyadic_grid, cardinality_check, check_dimension, check_net, check_separation, lift_grid, GridJson, MultiscaleGrid,
    DEFAULT_PROBE_DENSITY,
};
use besovkit::nterm::{diagram_export, error_curve, geometric_schedule, rate_fit};
use besovkit::report::{fmt_f64, Val};
use besovkit::seq::{embedding_exists, quasi_norm, BesovParams, CoeffSequence, SequenceJson};
use besovkit::wavelet::{moments_check, normalization_check, support_check, WaveletSystem};
use besovkit::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "besovkit", version, about = "Besov-type sequence and function space experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Seed for every randomized step; echoed in the output.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; falls back to BESOVKIT_THREADS, then to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Tolerance used by check commands.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sequence-space quasi-norm of a coefficient file.
    Norm {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        seq: PathBuf,
    },
    /// Whether `b^{from}` embeds into `b^{to}`.
    Embed {
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        bounded: bool,
    },
    /// Build multiscale grids and check their axioms.
    #[command(subcommand)]
    Grid(GridCmd),
    /// Almost-diagonal matrices: membership, fitted ε and application.
    #[command(subcommand)]
    Ad(AdCmd),
    /// Built-in patch decompositions.
    #[command(subcommand)]
    Manifold(ManifoldCmd),
    /// Structural checks of a wavelet system.
    #[command(subcommand)]
    Wavelet(WaveletCmd),
    /// Gramian between two wavelet systems, written as a matrix file.
    Gramian {
        #[arg(long)]
        basis_a: String,
        #[arg(long)]
        basis_b: String,
        #[arg(long)]
        manifold: String,
        #[arg(long)]
        levels: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the level-offset decay check for this smoothness.
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_EPS0)]
        eps0: f64,
    },
    /// Norm ratios between two systems over a test corpus.
    Equivalence {
        #[arg(long, default_value = "default")]
        corpus: String,
        #[arg(long, default_value = "haar")]
        basis_a: String,
        #[arg(long, default_value = "spline:D=2,Dt=2")]
        basis_b: String,
        #[arg(long, default_value = "interval")]
        manifold: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: String,
        /// Comma-separated truncation levels; the first is the reference band.
        #[arg(long, default_value = "4,5,6,7")]
        levels: String,
        /// Allowed relative growth of the band beyond the reference.
        #[arg(long, default_value_t = 0.15)]
        slack: f64,
    },
    /// Greedy n-term error curve of a coefficient file.
    Nterm {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        max_n: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        per_octave: usize,
    },
    /// DeVore–Triebel diagram points and lines as CSV.
    Diagram {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 21)]
        samples: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axiom {
    A1,
    A2,
    A3,
    A4,
}

#[derive(Subcommand)]
enum GridCmd {
    /// Dyadic grid on the unit cube, or lifted to a built-in manifold.
    Build {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        manifold: Option<String>,
        #[arg(long)]
        max_level: i64,
        #[arg(long, default_value_t = 1)]
        tags: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Checks one axiom on every level up to `max_level`.
    Check {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        axiom: Axiom,
        #[arg(long)]
        max_level: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_PROBE_DENSITY)]
        density: usize,
        /// Largest allowed neighbour count for the separation axiom.
        #[arg(long, default_value_t = 64)]
        cap: usize,
        /// Largest allowed max/min spread of the per-level ratios for a3 and a4.
        #[arg(long, default_value_t = 4.0)]
        band: f64,
    },
}

#[derive(Args)]
struct AdShape {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    alpha0: f64,
    #[arg(long, allow_hyphen_values = true)]
    alpha1: f64,
    #[arg(long)]
    p: f64,
}

#[derive(Subcommand)]
enum AdCmd {
    /// `sup |m| / ω(ε)`; fails when it exceeds `cap`.
    Check {
        #[command(flatten)]
        shape: AdShape,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        cap: f64,
    },
    /// Largest ε with `sup |m| / ω(ε) ≤ cap`.
    Fit {
        #[command(flatten)]
        shape: AdShape,
        #[arg(long, default_value_t = 1.0)]
        cap: f64,
        #[arg(long, default_value_t = 4.0)]
        eps_max: f64,
    },
    /// Applies a matrix to a coefficient file.
    Apply {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ManifoldCmd {
    /// Interface conformity and overlap probes.
    Check {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 16)]
        samples: usize,
    },
    /// The decomposition as JSON.
    Info {
        #[arg(long)]
        name: String,
    },
}

#[derive(Subcommand)]
enum WaveletCmd {
    /// Normalization, vanishing moments and support diameters.
    Check {
        #[arg(long)]
        basis: String,
        #[arg(long)]
        manifold: String,
        #[arg(long)]
        levels: u32,
    },
}

/// Check failures map to exit code 1, everything else that goes wrong to 2.
enum Failure {
    Check(Val),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = std::result::Result<Val, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let threads = cli
        .global
        .threads
        .or_else(|| std::env::var("BESOVKIT_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let seed = cli.global.seed;
    match run(cli.cmd, &cli.global) {
        Ok(v) => {
            println!("{}", v.with("seed", seed).render());
            ExitCode::SUCCESS
        }
        Err(Failure::Check(v)) => {
            println!("{}", v.with("seed", seed).render());
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| io_err(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> std::result::Result<(), Failure> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    serde_json::to_writer(BufWriter::new(f), v).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, s: &str) -> std::result::Result<(), Failure> {
    std::fs::write(path, s).map_err(|e| io_err(path, e))
}

fn read_seq(path: &Path) -> std::result::Result<CoeffSequence, Failure> {
    Ok(read_json::<SequenceJson>(path)?.into())
}

/// Matrices are JSON when the file name ends in `.json`, the binary format otherwise.
fn read_matrix(path: &Path) -> std::result::Result<ScaleMatrix, Failure> {
    if path.extension().is_some_and(|e| e == "json") {
        Ok(read_json::<MatrixJson>(path)?.into_matrix()?)
    } else {
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        Ok(read_binary(&mut BufReader::new(f))?)
    }
}

fn write_matrix(path: &Path, m: &ScaleMatrix) -> std::result::Result<(), Failure> {
    if path.extension().is_some_and(|e| e == "json") {
        write_json(path, &MatrixJson::from(m))
    } else {
        let f = File::create(path).map_err(|e| io_err(path, e))?;
        Ok(write_binary(m, &mut BufWriter::new(f))?)
    }
}

fn parse_q(q: &str) -> std::result::Result<f64, Failure> {
    match q {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        _ => q.parse().map_err(|_| Failure::Input(format!("bad q `{q}`"))),
    }
}

fn check(ok: bool, v: Val) -> Outcome {
    let v = v.with("ok", ok);
    if ok {
        Ok(v)
    } else {
        Err(Failure::Check(v))
    }
}

fn run(cmd: Cmd, g: &Global) -> Outcome {
    match cmd {
        Cmd::Norm { alpha, p, q, d, seq } => {
            let prm = BesovParams::new(alpha, p, parse_q(&q)?, d)?;
            let a = read_seq(&seq)?;
            Ok(Val::obj().with("norm", quasi_norm(&a, &prm)?).with("entries", a.len()))
        }
        Cmd::Embed { from, to, d, bounded } => {
            let from = BesovParams::parse_triple(&from, d)?;
            let to = BesovParams::parse_triple(&to, d)?;
            Ok(Val::obj()
                .with("exists", embedding_exists(&from, &to, bounded)?)
                .with("gamma", from.alpha - to.alpha))
        }
        Cmd::Grid(c) => run_grid(c),
        Cmd::Ad(c) => run_ad(c),
        Cmd::Manifold(c) => run_manifold(c),
        Cmd::Wavelet(WaveletCmd::Check { basis, manifold, levels }) => {
            let sys = WaveletSystem::from_names(&basis, &manifold, levels)?;
            let n = normalization_check(&sys, levels)?;
            let m = moments_check(&sys, levels)?;
            let s = support_check(&sys, levels)?;
            let moments_ok = m.line_primal_max.max(m.line_dual_max).max(m.patch_primal_max).max(m.patch_dual_max) <= g.tol.max(1e-8);
            let v = Val::obj()
                .with("system", sys.label.clone())
                .with("primal_norm_range", vec![n.primal_min, n.primal_max])
                .with("dual_norm_range", vec![n.dual_min, n.dual_max])
                .with("normalization_ok", n.ok)
                .with("moment_error", m.line_primal_max.max(m.line_dual_max).max(m.patch_primal_max).max(m.patch_dual_max))
                .with("moments_ok", moments_ok)
                .with("support_ratio_range", vec![s.ratio_min, s.ratio_max])
                .with("support_ok", s.ok);
            check(n.ok && moments_ok && s.ok, v)
        }
        Cmd::Gramian {
            basis_a,
            basis_b,
            manifold,
            levels,
            out,
            alpha,
            eps0,
        } => {
            let psi = WaveletSystem::from_names(&basis_a, &manifold, levels)?;
            let phi = WaveletSystem::from_names(&basis_b, &manifold, levels)?;
            let gm = gramian(&psi, &phi, levels)?;
            if let Some(path) = &out {
                write_matrix(path, &gm)?;
            }
            let v = Val::obj().with("nnz", gm.nnz()).with("levels", levels);
            match alpha {
                None => Ok(v),
                Some(alpha) => {
                    let r = gramian_decay_check(&gm, &psi, &phi, alpha, eps0)?;
                    let offsets: Vec<Val> = r
                        .offsets
                        .iter()
                        .map(|&(l, m)| Val::obj().with("offset", l).with("max_entry", m))
                        .collect();
                    let v = v
                        .with("offsets", offsets)
                        .with("slope_up", r.slope_up)
                        .with("slope_down", r.slope_down)
                        .with("required_up", r.required_up)
                        .with("required_down", r.required_down);
                    check(r.ok, v)
                }
            }
        }
        Cmd::Equivalence {
            corpus,
            basis_a,
            basis_b,
            manifold,
            alpha,
            p,
            q,
            levels,
            slack,
        } => {
            if corpus != "default" {
                return Err(Failure::Input(format!("unknown corpus `{corpus}`")));
            }
            let levels: Vec<u32> = levels
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Failure::Input(format!("bad level `{s}`"))))
                .collect::<std::result::Result<_, _>>()?;
            let top = levels.iter().copied().max().ok_or_else(|| Failure::Input("no levels".into()))?;
            let psi = WaveletSystem::from_names(&basis_a, &manifold, top)?;
            let phi = WaveletSystem::from_names(&basis_b, &manifold, top)?;
            let prm = BesovParams::new(alpha, p, parse_q(&q)?, psi.d())?;
            let r = equivalence_ratio(&default_corpus(&psi.dec), &psi, &phi, &prm, &levels)?;
            let (_, lo0, hi0) = r.bands[0];
            let ok = r.bands.iter().all(|&(_, lo, hi)| hi <= hi0 * (1.0 + slack) && lo >= lo0 / (1.0 + slack));
            let bands: Vec<Val> = r
                .bands
                .iter()
                .map(|&(j, lo, hi)| Val::obj().with("level", j).with("min_ratio", lo).with("max_ratio", hi))
                .collect();
            let v = Val::obj()
                .with("functions", r.labels.clone())
                .with("bands", bands)
                .with("min_ratio", r.min_ratio)
                .with("max_ratio", r.max_ratio);
            check(ok, v)
        }
        Cmd::Nterm {
            seq,
            target,
            d,
            max_n,
            csv,
            per_octave,
        } => {
            let t = BesovParams::parse_triple(&target, d)?;
            let a = read_seq(&seq)?;
            let curve = error_curve(&a, &t, &geometric_schedule(max_n, per_octave.max(1)), &seq.display().to_string())?;
            if let Some(path) = &csv {
                let body = besovkit::report::csv(
                    &["n", "error"],
                    curve.points.iter().map(|&(n, e)| vec![n.to_string(), fmt_f64(e)]),
                );
                write_text(path, &body)?;
            }
            let mut v = Val::obj()
                .with("support", curve.support)
                .with("points", curve.points.len())
                .with("upper_bound", curve.upper_bound);
            if let Ok(f) = rate_fit(&curve, None) {
                v = v
                    .with("slope", f.slope)
                    .with("r_squared", f.r_squared)
                    .with("window", vec![f.n_min, f.n_max]);
            }
            Ok(v)
        }
        Cmd::Diagram { d, csv, samples } => {
            let mut params = vec![BesovParams::new(0.0, 2.0, 2.0, d)?];
            for a in [1.0, 2.0] {
                let tau = 1.0 / (a / d as f64 + 0.5);
                params.push(BesovParams::new(a, tau, tau, d)?);
            }
            let body = diagram_export(&params, samples);
            match &csv {
                Some(path) => write_text(path, &body)?,
                None => print!("{body}"),
            }
            Ok(Val::obj().with("rows", body.lines().count() - 1))
        }
    }
}

fn load_grid(path: &Path) -> std::result::Result<MultiscaleGrid, Failure> {
    Ok(read_json::<GridJson>(path)?.into_grid()?)
}

fn run_grid(c: GridCmd) -> Outcome {
    match c {
        GridCmd::Build {
            d,
            manifold,
            max_level,
            tags,
            out,
        } => {
            let grid = match manifold {
                Some(name) => lift_grid(&builtin_manifold(&name)?, max_level, tags)?,
                None => build_dyadic_grid(d, max_level, tags)?,
            };
            write_json(&out, &GridJson::from(&grid))?;
            Ok(Val::obj().with("levels", grid.n_levels()).with("points", grid.total_len()))
        }
        GridCmd::Check {
            input,
            axiom,
            max_level,
            density,
            cap,
            band,
        } => {
            let grid = load_grid(&input)?;
            let top = grid.n_levels().saturating_sub(1).min(max_level.unwrap_or(usize::MAX));
            match axiom {
                Axiom::A1 => {
                    let mut worst = Val::Null;
                    let mut ok = true;
                    let mut gaps = vec![];
                    for j in 0..=top {
                        let r = check_net(&grid, j, density)?;
                        gaps.push(r.worst_gap);
                        if !r.ok && ok {
                            ok = false;
                            worst = Val::obj().with("level", j).with("gap", r.worst_gap).with("probe", r.witness);
                        }
                    }
                    check(ok, Val::obj().with("axiom", "a1").with("worst_gaps", gaps).with("witness", worst))
                }
                Axiom::A2 => {
                    let mut ok = true;
                    let mut counts = vec![];
                    let mut worst = Val::Null;
                    for j in 0..=top {
                        let r = check_separation(&grid, j, cap)?;
                        counts.push(r.max_count);
                        if !r.ok && ok {
                            ok = false;
                            worst = Val::obj().with("level", j).with("index", r.witness);
                        }
                    }
                    check(ok, Val::obj().with("axiom", "a2").with("max_counts", counts).with("witness", worst))
                }
                Axiom::A3 => {
                    let ratios = (0..=top)
                        .map(|j| Ok(check_dimension(&grid, j, 256)?.ratio))
                        .collect::<std::result::Result<Vec<f64>, Failure>>()?;
                    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = ratios.iter().copied().fold(0.0, f64::max);
                    check(lo > 0.0 && hi / lo <= band, Val::obj().with("axiom", "a3").with("ratios", ratios))
                }
                Axiom::A4 => {
                    let r = cardinality_check(&grid)?;
                    let ok = r.ratio_min > 0.0 && r.ratio_max / r.ratio_min <= band;
                    check(
                        ok,
                        Val::obj()
                            .with("axiom", "a4")
                            .with("counts", r.counts)
                            .with("ratios", r.ratios)
                            .with("bounded", r.bounded),
                    )
                }
            }
        }
    }
}

fn run_ad(c: AdCmd) -> Outcome {
    match c {
        AdCmd::Check { shape, eps, cap } => {
            let m = read_matrix(&shape.matrix)?;
            let prm = AdParams::new(shape.alpha0, shape.alpha1, shape.p, eps, m.row_grid.d)?;
            let r = ad_membership(&m, &prm)?;
            let witness = r
                .witness
                .map(|((j, xi), (k, eta))| Val::obj().with("j", j).with("xi", xi).with("k", k).with("eta", eta));
            check(r.sup_ratio <= cap, Val::obj().with("sup_ratio", r.sup_ratio).with("witness", witness))
        }
        AdCmd::Fit { shape, cap, eps_max } => {
            let m = read_matrix(&shape.matrix)?;
            let eps = ad_fit_epsilon(&m, shape.alpha0, shape.alpha1, shape.p, cap, eps_max)?;
            Ok(Val::obj().with("epsilon", eps))
        }
        AdCmd::Apply { matrix, seq, out } => {
            let m = read_matrix(&matrix)?;
            let b = apply(&m, &read_seq(&seq)?)?;
            write_json(&out, &SequenceJson::from(&b))?;
            Ok(Val::obj().with("entries", b.len()))
        }
    }
}

fn run_manifold(c: ManifoldCmd) -> Outcome {
    match c {
        ManifoldCmd::Check { name, samples } => {
            let dec = builtin_manifold(&name)?;
            let r = dec.conformity_check(samples);
            let devs: Vec<f64> = r.interfaces.iter().map(|i| i.max_deviation).collect();
            check(
                r.ok,
                Val::obj()
                    .with("name", name)
                    .with("interface_deviations", devs)
                    .with("overlap", r.overlap_witness.is_some()),
            )
        }
        ManifoldCmd::Info { name } => {
            let dec = builtin_manifold(&name)?;
            let json = serde_json::to_string(&ManifoldJson::from(&dec)).map_err(|e| Failure::Input(e.to_string()))?;
            Ok(Val::obj()
                .with("name", name)
                .with("d", dec.d)
                .with("m", dec.m)
                .with("patches", dec.n_patches())
                .with("interfaces", dec.interfaces.len())
                .with("json", json))
        }
    }
}
