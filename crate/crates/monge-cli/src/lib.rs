//! Command-line surface over the `monge` library: solves, embeddings,
//! distances, and the reproducible experiment suites.
//!
//! Every file-producing command writes CSV plus a JSON metadata sidecar
//! echoing the full configuration (including seeds), which is enough to
//! re-run the command and reproduce the CSV byte for byte. Output files are
//! written atomically. `MONGE_THREADS` caps worker parallelism (0 or unset
//! means all cores); results do not depend on the thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Once;

use serde_json::json;

use monge::embedding::{exact_l2_distance, monge_map, vector_distance, vectorize};
use monge::experiments::{
    barycenter_grid, distance_scatter, kmeanspp_cluster, onehalf_experiment, regular_bound_check,
    run_check_suite, sample_family, sampling_curve, stability_suite, ExperimentRecord, FamilyKind,
    FamilySpec, PrescribedMap, SamplingTarget, ScatterConfig,
};
use monge::geometry::ConvexPolygon;
use monge::io;
use monge::measure::DiscreteMeasure;
use monge::metrics::{holder_fit, sinkhorn, tv_distance, wasserstein_exact};
use monge::solver::{solve_semidiscrete, SolveConfig};

const USAGE: &str = "\
monge — semi-discrete optimal transport embeddings

USAGE:
    monge <COMMAND> [ARGS] [FLAGS]

COMMANDS:
    solve <points.csv>                solve for the optimal dual potential (JSON)
    embed <points.csv>                embed a point cloud (binary .memb file)
    dist <a> <b> [--metric M]         distance between two clouds or embeddings
                                      M in {w2rho, w2, w1, sinkhorn, tv}; --exact
                                      uses the overlay map distance for w2rho
    scatter                           pairwise W2 vs W2rho over sampled clouds
    sampling                          embedding error vs sample count
    onehalf                           antipodal-Dirac rate family on the disc
    stability                         potential/map stability suites
    regular-bound                     Lipschitz-target stability bound check
    barycenter <c1> <c2> <c3> <c4>    bilinear barycenter grid of 4 clouds
    cluster (--idx FILE | --images DIR)  k-means++ over image embeddings
    check                             run the full invariant suite

GLOBAL FLAGS:
    --seed N        master seed (default 0)
    --m N           grid resolution (default 64)
    --tol X         solver residual tolerance (default 1e-9)
    --out-dir DIR   output directory (default .)
";

/// Flags that take no value.
const BOOL_FLAGS: &[&str] = &["exact", "sinkhorn"];

enum CliError {
    Usage(String),
    Run(String),
}

type CliResult = Result<String, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn run_err(module: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Run(format!("{module}: {err}"))
}

/// Entry point; returns the process exit code (0 ok, 1 computation failure,
/// 2 usage error).
pub fn run_cli(args: &[String]) -> i32 {
    let (code, output) = run_cli_captured(args);
    if !output.is_empty() {
        print!("{output}");
    }
    code
}

/// Same as [`run_cli`] but returns what would be printed to stdout, for
/// tests.
pub fn run_cli_captured(args: &[String]) -> (i32, String) {
    init_thread_pool();
    match execute(args) {
        Ok(out) => (0, out),
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}\n\n{USAGE}");
            (2, String::new())
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            (1, String::new())
        }
    }
}

fn init_thread_pool() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Ok(v) = std::env::var("MONGE_THREADS") {
            if let Ok(n) = v.parse::<usize>() {
                if n > 0 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}

struct Parsed {
    positional: Vec<String>,
    values: BTreeMap<String, String>,
    switches: BTreeSet<String>,
}

impl Parsed {
    fn flag(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(|s| s.as_str())
    }

    fn f64_flag(&self, name: &str, default: f64) -> Result<f64, CliError> {
        match self.flag(name) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| usage(format!("--{name} expects a number, got {v}"))),
        }
    }

    fn usize_flag(&self, name: &str, default: usize) -> Result<usize, CliError> {
        match self.flag(name) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| usage(format!("--{name} expects an integer, got {v}"))),
        }
    }

    fn u64_flag(&self, name: &str, default: u64) -> Result<u64, CliError> {
        match self.flag(name) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| usage(format!("--{name} expects an integer, got {v}"))),
        }
    }

    fn usize_list_flag(&self, name: &str, default: &[usize]) -> Result<Vec<usize>, CliError> {
        match self.flag(name) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| usage(format!("--{name} expects a comma-separated integer list"))),
        }
    }

    fn f64_list_flag(&self, name: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.flag(name) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| usage(format!("--{name} expects a comma-separated number list"))),
        }
    }

    fn seed(&self) -> Result<u64, CliError> {
        self.u64_flag("seed", 0)
    }

    fn m(&self) -> Result<usize, CliError> {
        self.usize_flag("m", 64)
    }

    fn solve_config(&self) -> Result<SolveConfig, CliError> {
        Ok(SolveConfig {
            tol_residual: self.f64_flag("tol", 1e-9)?,
            ..SolveConfig::default()
        })
    }

    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = PathBuf::from(self.flag("out-dir").unwrap_or("."));
        fs::create_dir_all(&dir).map_err(|e| run_err("io", e))?;
        Ok(dir)
    }
}

fn parse_args(args: &[String]) -> Result<Parsed, CliError> {
    let mut positional = Vec::new();
    let mut values = BTreeMap::new();
    let mut switches = BTreeSet::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        if let Some(name) = a.strip_prefix("--") {
            if BOOL_FLAGS.contains(&name) {
                switches.insert(name.to_string());
                i += 1;
            } else {
                let value = args
                    .get(i + 1)
                    .ok_or_else(|| usage(format!("--{name} needs a value")))?;
                values.insert(name.to_string(), value.clone());
                i += 2;
            }
        } else {
            positional.push(a.clone());
            i += 1;
        }
    }
    Ok(Parsed {
        positional,
        values,
        switches,
    })
}

fn execute(args: &[String]) -> CliResult {
    let Some(command) = args.first() else {
        return Err(usage("missing command"));
    };
    let rest = parse_args(&args[1..])?;
    match command.as_str() {
        "solve" => cmd_solve(&rest),
        "embed" => cmd_embed(&rest),
        "dist" => cmd_dist(&rest),
        "scatter" => cmd_scatter(&rest),
        "sampling" => cmd_sampling(&rest),
        "onehalf" => cmd_onehalf(&rest),
        "stability" => cmd_stability(&rest),
        "regular-bound" => cmd_regular_bound(&rest),
        "barycenter" => cmd_barycenter(&rest),
        "cluster" => cmd_cluster(&rest),
        "check" => cmd_check(&rest),
        other => Err(usage(format!("unknown command {other}"))),
    }
}

fn write_record(dir: &Path, name: &str, record: &ExperimentRecord) -> Result<(), CliError> {
    let csv_path = dir.join(format!("{name}.csv"));
    io::write_atomic(&csv_path, record.to_csv().as_bytes()).map_err(|e| run_err("io", e))?;
    let meta = serde_json::to_string_pretty(&record.metadata_json()).expect("serializable");
    io::write_atomic(&dir.join(format!("{name}.json")), meta.as_bytes())
        .map_err(|e| run_err("io", e))?;
    Ok(())
}

fn load_cloud(path: &str) -> Result<DiscreteMeasure, CliError> {
    io::load_point_cloud(Path::new(path)).map_err(|e| run_err("io", e))
}

fn cmd_solve(args: &Parsed) -> CliResult {
    let [input] = args.positional.as_slice() else {
        return Err(usage("solve expects one point-cloud file"));
    };
    let measure = load_cloud(input)?;
    let config = args.solve_config()?;
    let domain = ConvexPolygon::unit_square();
    let report = solve_semidiscrete(&domain, &measure, &config).map_err(|e| run_err("solver", e))?;
    let out_dir = args.out_dir()?;
    let payload = json!({
        "input": input,
        "tol_residual": config.tol_residual,
        "sites": measure.points().iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
        "weights": measure.weights(),
        "potential": report.potential.values(),
        "final_residual": report.final_residual,
        "iterations": report.iterations,
    });
    let path = out_dir.join("potential.json");
    io::write_atomic(&path, serde_json::to_string_pretty(&payload).unwrap().as_bytes())
        .map_err(|e| run_err("io", e))?;
    Ok(format!(
        "solved {} sites in {} iterations, residual {}\nwrote {}\n",
        measure.len(),
        report.iterations,
        report.final_residual,
        path.display()
    ))
}

fn cmd_embed(args: &Parsed) -> CliResult {
    let [input] = args.positional.as_slice() else {
        return Err(usage("embed expects one point-cloud file"));
    };
    let measure = load_cloud(input)?;
    let m = args.m()?;
    let config = args.solve_config()?;
    let domain = ConvexPolygon::unit_square();
    let map = monge_map(&domain, &measure, &config).map_err(|e| run_err("solver", e))?;
    let embedding = vectorize(&map, m).map_err(|e| run_err("embedding", e))?;
    let out_dir = args.out_dir()?;
    let stem = Path::new(input)
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "embedding".into());
    let path = out_dir.join(format!("{stem}.memb"));
    io::save_embedding(&path, &embedding).map_err(|e| run_err("io", e))?;
    let meta = json!({
        "input": input,
        "m": m,
        "tol_residual": config.tol_residual,
        "atoms": measure.len(),
    });
    io::write_atomic(
        &out_dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&meta).unwrap().as_bytes(),
    )
    .map_err(|e| run_err("io", e))?;
    Ok(format!("wrote {}\n", path.display()))
}

fn is_embedding_file(path: &str) -> bool {
    fs::read(path)
        .map(|bytes| bytes.starts_with(&io::EMBEDDING_MAGIC))
        .unwrap_or(false)
}

fn cmd_dist(args: &Parsed) -> CliResult {
    let [a, b] = args.positional.as_slice() else {
        return Err(usage("dist expects two input files"));
    };
    let metric = args.flag("metric").unwrap_or("w2rho");
    let exact = args.switches.contains("exact");
    let config = args.solve_config()?;
    let domain = ConvexPolygon::unit_square();

    let value = match (metric, is_embedding_file(a) && is_embedding_file(b)) {
        ("w2rho", true) => {
            if exact {
                return Err(usage("--exact needs point clouds, not embeddings"));
            }
            let ea = io::load_embedding(Path::new(a)).map_err(|e| run_err("io", e))?;
            let eb = io::load_embedding(Path::new(b)).map_err(|e| run_err("io", e))?;
            vector_distance(&ea, &eb).map_err(|e| run_err("embedding", e))?
        }
        ("w2rho", false) => {
            let ma = monge_map(&domain, &load_cloud(a)?, &config).map_err(|e| run_err("solver", e))?;
            let mb = monge_map(&domain, &load_cloud(b)?, &config).map_err(|e| run_err("solver", e))?;
            if exact {
                exact_l2_distance(&ma, &mb).map_err(|e| run_err("embedding", e))?
            } else {
                let m = args.m()?;
                let ea = vectorize(&ma, m).map_err(|e| run_err("embedding", e))?;
                let eb = vectorize(&mb, m).map_err(|e| run_err("embedding", e))?;
                vector_distance(&ea, &eb).map_err(|e| run_err("embedding", e))?
            }
        }
        ("w2", _) => {
            let (d, _) = wasserstein_exact(&load_cloud(a)?, &load_cloud(b)?, 2)
                .map_err(|e| run_err("metrics", e))?;
            d
        }
        ("w1", _) => {
            let (d, _) = wasserstein_exact(&load_cloud(a)?, &load_cloud(b)?, 1)
                .map_err(|e| run_err("metrics", e))?;
            d
        }
        ("sinkhorn", _) => {
            let epsilon = args.f64_flag("epsilon", 2e-3)?;
            sinkhorn(&load_cloud(a)?, &load_cloud(b)?, epsilon, 200_000, 1e-8)
                .map_err(|e| run_err("metrics", e))?
        }
        ("tv", _) => tv_distance(&load_cloud(a)?, &load_cloud(b)?),
        (other, _) => return Err(usage(format!("unknown metric {other}"))),
    };
    Ok(format!("{value}\n"))
}

fn cmd_scatter(args: &Parsed) -> CliResult {
    let family = args.flag("family").unwrap_or("gaussian");
    let kind = FamilyKind::parse(family)
        .ok_or_else(|| usage(format!("unknown family {family}")))?;
    let seed = args.seed()?;
    let cfg = ScatterConfig {
        clouds: args.usize_flag("clouds", 20)?,
        n_points: args.usize_flag("n", 150)?,
        m: args.m()?,
        with_sinkhorn: args.switches.contains("sinkhorn"),
        sinkhorn_epsilon: args.f64_flag("epsilon", 2e-3)?,
        solve: args.solve_config()?,
    };
    let spec = FamilySpec::new(kind, seed);
    let record = distance_scatter(&spec, &cfg, seed).map_err(|e| run_err("experiments", e))?;
    let out_dir = args.out_dir()?;
    write_record(&out_dir, "scatter", &record)?;
    let flags = record.column("reverse_lipschitz_ok");
    let ok = flags.iter().filter(|&&f| f == 1.0).count();
    Ok(format!(
        "scatter: {} pairs, reverse-Lipschitz holds on {}/{}\nwrote {}\n",
        record.rows.len(),
        ok,
        flags.len(),
        out_dir.join("scatter.csv").display()
    ))
}

fn cmd_sampling(args: &Parsed) -> CliResult {
    let target_arg = args.flag("target").unwrap_or("square");
    let target = match PrescribedMap::parse(target_arg) {
        Some(map) => SamplingTarget::Prescribed(map),
        None => {
            if target_arg.ends_with(".csv") {
                SamplingTarget::Empirical(load_cloud(target_arg)?)
            } else if let Some(kind) = FamilyKind::parse(target_arg) {
                let seed = args.seed()?;
                let reference = args.usize_flag("reference", 2000)?;
                let spec = FamilySpec::new(kind, seed);
                SamplingTarget::Empirical(sample_family(&spec, reference, seed))
            } else {
                return Err(usage(format!(
                    "--target expects square|disk|cross, a family name, or a .csv file, got {target_arg}"
                )));
            }
        }
    };
    let ns = args.usize_list_flag("ns", &[50, 100, 200, 400, 800])?;
    let repeats = args.usize_flag("repeats", 10)?;
    let record = sampling_curve(
        &target,
        &ns,
        repeats,
        args.m()?,
        args.seed()?,
        &args.solve_config()?,
    )
    .map_err(|e| run_err("experiments", e))?;
    let summary = monge::experiments::summarize_sampling(&record);
    let out_dir = args.out_dir()?;
    write_record(&out_dir, "sampling", &record)?;
    write_record(&out_dir, "sampling_summary", &summary)?;
    Ok(format!(
        "sampling: {} rows\nwrote {}\n",
        record.rows.len(),
        out_dir.join("sampling.csv").display()
    ))
}

fn cmd_onehalf(args: &Parsed) -> CliResult {
    let k_gon = args.usize_flag("k-gon", 256)?;
    let default_thetas: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
    let thetas = args.f64_list_flag("thetas", &default_thetas)?;
    let record = onehalf_experiment(k_gon, &thetas, &args.solve_config()?)
        .map_err(|e| run_err("experiments", e))?;
    let pairs: Vec<(f64, f64)> = record
        .column("w2")
        .into_iter()
        .zip(record.column("map_distance"))
        .collect();
    let fit = holder_fit(&pairs).map_err(|e| run_err("metrics", e))?;
    let out_dir = args.out_dir()?;
    write_record(&out_dir, "onehalf", &record)?;
    Ok(format!(
        "onehalf: fitted exponent {:.4} (r² {:.4}) over {} thetas\nwrote {}\n",
        fit.slope,
        fit.r_squared,
        thetas.len(),
        out_dir.join("onehalf.csv").display()
    ))
}

fn cmd_stability(args: &Parsed) -> CliResult {
    let sizes = args.usize_list_flag("sizes", &[50])?;
    let trials = args.usize_flag("trials", 3)?;
    let steps = args.usize_flag("steps", 10)?;
    let outcome = stability_suite(&sizes, trials, steps, args.seed()?, &args.solve_config()?)
        .map_err(|e| run_err("experiments", e))?;
    let out_dir = args.out_dir()?;
    write_record(&out_dir, "stability", &outcome.record)?;
    let meta = json!({
        "experiment": "stability_exponents",
        "tv_exponents": outcome.tv_exponents,
        "w1_exponents": outcome.w1_exponents,
    });
    io::write_atomic(
        &out_dir.join("stability_exponents.json"),
        serde_json::to_string_pretty(&meta).unwrap().as_bytes(),
    )
    .map_err(|e| run_err("io", e))?;
    let min_tv = outcome.tv_exponents.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_w1 = outcome.w1_exponents.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(format!(
        "stability: min TV exponent {min_tv:.3}, min W1 exponent {min_w1:.3}\nwrote {}\n",
        out_dir.join("stability.csv").display()
    ))
}

fn cmd_regular_bound(args: &Parsed) -> CliResult {
    let record = regular_bound_check(
        args.usize_flag("n-grid", 16)?,
        args.usize_flag("perturbations", 20)?,
        args.usize_flag("nu-atoms", 100)?,
        args.seed()?,
        &args.solve_config()?,
    )
    .map_err(|e| run_err("experiments", e))?;
    let out_dir = args.out_dir()?;
    write_record(&out_dir, "regular_bound", &record)?;
    let ok = record.column("ok").iter().filter(|&&f| f == 1.0).count();
    Ok(format!(
        "regular-bound: {}/{} targets within bound\nwrote {}\n",
        ok,
        record.rows.len(),
        out_dir.join("regular_bound.csv").display()
    ))
}

fn cmd_barycenter(args: &Parsed) -> CliResult {
    let [c1, c2, c3, c4] = args.positional.as_slice() else {
        return Err(usage("barycenter expects four corner point-cloud files"));
    };
    let corners = [
        load_cloud(c1)?,
        load_cloud(c2)?,
        load_cloud(c3)?,
        load_cloud(c4)?,
    ];
    let grid_k = args.usize_flag("grid-k", 4)?;
    let out = barycenter_grid(&corners, grid_k, args.m()?, &args.solve_config()?)
        .map_err(|e| run_err("experiments", e))?;
    let out_dir = args.out_dir()?;
    write_record(&out_dir, "barycenter", &out.record)?;
    for (a, b, cloud) in &out.measures {
        io::save_point_cloud(&out_dir.join(format!("barycenter_{a}_{b}.csv")), cloud)
            .map_err(|e| run_err("io", e))?;
    }
    Ok(format!(
        "barycenter: wrote {} grid clouds to {}\n",
        out.measures.len(),
        out_dir.display()
    ))
}

fn cmd_cluster(args: &Parsed) -> CliResult {
    let threshold = args.f64_flag("threshold", 0.5)?;
    let m = args.usize_flag("m", 16)?;
    let clouds: Vec<(String, DiscreteMeasure)> = if let Some(idx_path) = args.flag("idx") {
        let max_records = args.usize_flag("max-records", 100)?;
        let images = io::parse_idx(Path::new(idx_path), max_records)
            .map_err(|e| run_err("io", e))?;
        images
            .iter()
            .enumerate()
            .map(|(k, img)| {
                io::image_record_to_pointcloud(img, threshold)
                    .map(|mu| (format!("record_{k}"), mu))
            })
            .collect::<Result<_, _>>()
            .map_err(|e| run_err("io", e))?
    } else if let Some(dir) = args.flag("images") {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| run_err("io", e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(usage(format!("no .pgm files in {dir}")));
        }
        paths
            .iter()
            .map(|p| {
                io::image_to_pointcloud(p, threshold)
                    .map(|mu| (p.file_name().unwrap().to_string_lossy().to_string(), mu))
            })
            .collect::<Result<_, _>>()
            .map_err(|e| run_err("io", e))?
    } else {
        return Err(usage("cluster needs --idx FILE or --images DIR"));
    };

    let k = args.usize_flag("k", 10)?;
    let config = args.solve_config()?;
    let domain = ConvexPolygon::unit_square();
    let embeddings: Vec<_> = clouds
        .iter()
        .map(|(_, mu)| {
            let map = monge_map(&domain, mu, &config).map_err(|e| run_err("solver", e))?;
            vectorize(&map, m).map_err(|e| run_err("embedding", e))
        })
        .collect::<Result<_, _>>()?;
    let clustering = kmeanspp_cluster(&embeddings, k, args.seed()?, 200)
        .map_err(|e| run_err("experiments", e))?;

    let mut record = ExperimentRecord::new(
        "cluster",
        json!({
            "inputs": clouds.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
            "k": k,
            "m": m,
            "threshold": threshold,
            "seed": args.seed()?,
            "inertia_history": clustering.inertia_history,
        }),
        &["index", "cluster"],
    );
    for (i, &a) in clustering.assignments.iter().enumerate() {
        record.push(vec![i as f64, a as f64]);
    }
    let out_dir = args.out_dir()?;
    write_record(&out_dir, "cluster", &record)?;
    for (c, centroid) in clustering.centroids.iter().enumerate() {
        let cloud = monge::embedding::pushforward_measure(centroid);
        io::save_point_cloud(&out_dir.join(format!("centroid_{c}.csv")), &cloud)
            .map_err(|e| run_err("io", e))?;
    }
    Ok(format!(
        "cluster: {} clouds into {} clusters, final inertia {}\nwrote {}\n",
        clouds.len(),
        k,
        clustering.inertia_history.last().unwrap_or(&0.0),
        out_dir.join("cluster.csv").display()
    ))
}

fn cmd_check(args: &Parsed) -> CliResult {
    let results = run_check_suite(args.seed()?);
    let mut out = String::new();
    let mut failed = Vec::new();
    for r in &results {
        if r.passed {
            out.push_str(&format!("PASS {}\n", r.name));
        } else {
            out.push_str(&format!("FAIL {} ({})\n", r.name, r.detail));
            failed.push(r.name.clone());
        }
    }
    if failed.is_empty() {
        out.push_str(&format!("all {} invariants hold\n", results.len()));
        Ok(out)
    } else {
        print!("{out}");
        Err(CliError::Run(format!(
            "invariant checks failed: {}",
            failed.join(", ")
        )))
    }
}
