mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;
use zoll_core::critical::{find_through_point, levels, multistart, refine_chart, CriticalPoint, Kind};
use zoll_core::diagnostics::{minmax_gap_report, DiagnosticReport};
use zoll_core::export::{polyline_text, survey_csv, CriticalRecord};
use zoll_core::loopspace::auto_k;
use zoll_core::manifold::random_sphere_point;
use zoll_core::morse::{iterate_index_expected, spectral_report, DEFAULT_ZERO_TOL};
use zoll_core::{Error, LoopSpace, SpectralReport};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "zoll", version, about = "Closed geodesics, Morse indices and Zoll diagnostics on Riemannian spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Survey critical points: survey CSV, per-point JSON and polylines.
    Find {
        #[command(flatten)]
        common: Common,
    },
    /// Morse index and kernel of a critical point written by `find`.
    Index {
        #[command(flatten)]
        common: Common,
        /// Critical-point JSON record.
        point: PathBuf,
        /// Compare iterates m = 1..=M with Bott's iteration formula.
        #[arg(long, value_name = "M")]
        check_bott: Option<usize>,
    },
    /// Closure scan, survey and Ev-coverage report.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Repeat with the first metric parameter set to each value.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
    },
    /// Search for a critical point at a given energy through given points.
    Cover {
        #[command(flatten)]
        common: Common,
        /// Embedding coordinates of the point (normalized onto the sphere).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
        /// Target energy.
        #[arg(long)]
        energy: f64,
        /// Number of seeded random points instead of `--point`.
        #[arg(long)]
        grid: Option<usize>,
    },
}

enum Failure {
    Config(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(format!("i/o: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Find { common } => setup(&common).and_then(|c| cmd_find(&c)),
        Command::Index {
            common,
            point,
            check_bott,
        } => setup(&common).and_then(|c| cmd_index(&c, &point, check_bott)),
        Command::Diagnose { common, sweep } => setup(&common).and_then(|c| cmd_diagnose(&c, sweep.as_deref())),
        Command::Cover {
            common,
            point,
            energy,
            grid,
        } => setup(&common).and_then(|c| cmd_cover(&c, point.as_deref(), energy, grid)),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn setup(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&common.config).map_err(Failure::Config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Failure::Config("--workers must be positive".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            warn!("worker pool already initialized: {e}");
        }
    }
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.toml"), cfg.to_toml())?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numeric(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn cmd_find(cfg: &RunConfig) -> Outcome {
    let space = cfg.space().map_err(Failure::Config)?;
    let search = cfg.search();
    let points = multistart(&space, &search);
    if points.is_empty() {
        return Err(Failure::Numeric(format!(
            "no critical point converged from {} starts",
            search.samples
        )));
    }
    fs::write(cfg.out.join("survey.csv"), survey_csv(&points, space.delta()))?;
    let mut lv = String::from("energy,kind,count\n");
    for l in levels(&points, search.energy_gap) {
        lv.push_str(&format!("{:.16e},{},{}\n", l.energy, l.kind, l.count));
    }
    fs::write(cfg.out.join("levels.csv"), lv)?;
    let pdir = cfg.out.join("points");
    let ldir = cfg.out.join("polylines");
    fs::create_dir_all(&pdir)?;
    fs::create_dir_all(&ldir)?;
    for (i, cp) in points.iter().enumerate() {
        write_json(&pdir.join(format!("cp_{i:03}.json")), &CriticalRecord::new(&space, cp))?;
        let geo = space.reconstruct(&cp.config)?;
        fs::write(ldir.join(format!("cp_{i:03}.txt")), polyline_text(&geo.polyline(&space.model, 16)))?;
    }
    info!("wrote {} critical points to {}", points.len(), cfg.out.display());
    Ok(())
}

#[derive(Serialize)]
struct BottRow {
    m: usize,
    k: usize,
    measured: usize,
    expected: usize,
    kernel: usize,
}

#[derive(Serialize)]
struct PartnerCheck {
    smooth_energy: f64,
    smooth_index: usize,
    smooth_kernel: usize,
    index_le: bool,
    index_plus_kernel_le: bool,
}

#[derive(Serialize)]
struct IndexReport {
    energy: f64,
    kind: Kind,
    period: Option<f64>,
    spectral: SpectralReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    bott: Option<Vec<BottRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    partner: Option<PartnerCheck>,
}

fn smooth_iterate(space: &LoopSpace, cp: &CriticalPoint, m: usize, cfg: &RunConfig) -> Result<(usize, SpectralReport), Failure> {
    let l = cp.period.expect("smooth point has a period") * m as f64;
    let k = space.k().max(auto_k(l, space.delta(), space.rho()));
    let sm = LoopSpace::new(space.model.clone(), space.delta(), k)?;
    let chart = sm.sample_geodesic_chart(&cp.chart.q0, &cp.chart.u, l)?;
    let it = refine_chart(&sm, &chart, &cfg.search())?;
    Ok((k, spectral_report(&sm, &it, DEFAULT_ZERO_TOL)?))
}

fn cmd_index(cfg: &RunConfig, point: &Path, check_bott: Option<usize>) -> Outcome {
    let space = cfg.space().map_err(Failure::Config)?;
    let text = fs::read_to_string(point).map_err(|e| Failure::Config(format!("{}: {e}", point.display())))?;
    let rec: CriticalRecord =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", point.display())))?;
    let cp = rec.restore(&space)?;
    let spectral = spectral_report(&space, &cp, DEFAULT_ZERO_TOL)?;
    let mut report = IndexReport {
        energy: cp.energy,
        kind: cp.kind,
        period: cp.period,
        spectral,
        bott: None,
        partner: None,
    };
    if cp.kind == Kind::ZigZag {
        let l = cp.period.expect("zig-zag has a period");
        let chart = space.sample_geodesic_chart(&cp.chart.q0, &cp.chart.u, l)?;
        let smooth = refine_chart(&space, &chart, &cfg.search())?;
        let s = spectral_report(&space, &smooth, DEFAULT_ZERO_TOL)?;
        let z = &report.spectral;
        report.partner = Some(PartnerCheck {
            smooth_energy: smooth.energy,
            smooth_index: s.index,
            smooth_kernel: s.kernel,
            index_le: s.index <= z.index,
            index_plus_kernel_le: s.index + s.kernel <= z.index + z.kernel,
        });
    }
    if let Some(mmax) = check_bott {
        if cp.kind != Kind::SmoothGeodesic {
            return Err(Failure::Config("--check-bott needs a smooth critical point".into()));
        }
        let n = space.model.dim();
        let prime = report.spectral.index;
        let mut rows = Vec::new();
        for m in 1..=mmax {
            let (k, r) = if m == 1 {
                (space.k(), report.spectral.clone())
            } else {
                smooth_iterate(&space, &cp, m, cfg)?
            };
            rows.push(BottRow {
                m,
                k,
                measured: r.index,
                expected: iterate_index_expected(prime, m, n),
                kernel: r.kernel,
            });
        }
        for r in &rows {
            println!("m = {}: measured {}, expected {}", r.m, r.measured, r.expected);
        }
        report.bott = Some(rows);
    }
    let stem = point.file_stem().and_then(|s| s.to_str()).unwrap_or("point");
    write_json(&cfg.out.join(format!("index_{stem}.json")), &report)?;
    println!(
        "{}: index {}, kernel {}, positive {}",
        cp.kind, report.spectral.index, report.spectral.kernel, report.spectral.positive
    );
    Ok(())
}

fn diagnose_one(cfg: &RunConfig) -> Result<DiagnosticReport, Failure> {
    let space = cfg.space().map_err(Failure::Config)?;
    Ok(minmax_gap_report(&space, &cfg.search(), &cfg.diagnostics)?)
}

fn cmd_diagnose(cfg: &RunConfig, sweep: Option<&[f64]>) -> Outcome {
    let mut csv = String::from(DiagnosticReport::csv_header());
    csv.push('\n');
    match sweep {
        None => {
            let r = diagnose_one(cfg)?;
            write_json(&cfg.out.join("report.json"), &r)?;
            csv.push_str(&r.csv_row());
            csv.push('\n');
            println!("{}: {} ({})", r.model, r.verdict(), r.statement);
        }
        Some(values) => {
            for (i, v) in values.iter().enumerate() {
                let mut c = cfg.clone();
                if c.metric.params.is_empty() {
                    return Err(Failure::Config("--sweep needs a model with parameters".into()));
                }
                c.metric.params[0] = *v;
                c.validate().map_err(Failure::Config)?;
                let r = diagnose_one(&c)?;
                write_json(&cfg.out.join(format!("report_{i:03}.json")), &r)?;
                csv.push_str(&r.csv_row());
                csv.push('\n');
                println!("{} {v}: {} ({})", r.model, r.verdict(), r.statement);
            }
        }
    }
    fs::write(cfg.out.join("report.csv"), csv)?;
    Ok(())
}

#[derive(Serialize)]
struct CoverRecord {
    point: Vec<f64>,
    hit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    record: Option<CriticalRecord>,
}

fn cmd_cover(cfg: &RunConfig, point: Option<&[f64]>, energy: f64, grid: Option<usize>) -> Outcome {
    let space = cfg.space().map_err(Failure::Config)?;
    let search = cfg.search();
    let d = space.model.ambient_dim();
    let points: Vec<Vec<f64>> = match (point, grid) {
        (Some(p), None) => {
            if p.len() != d || p.iter().all(|x| *x == 0.0) {
                return Err(Failure::Config(format!("--point needs {d} coordinates, not all zero")));
            }
            vec![zoll_core::vecops::normalized(p)]
        }
        (None, Some(n)) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..n).map(|_| random_sphere_point(&mut rng, d)).collect()
        }
        _ => return Err(Failure::Config("give exactly one of --point and --grid".into())),
    };
    let ldir = cfg.out.join("cover_polylines");
    fs::create_dir_all(&ldir)?;
    let mut out = Vec::with_capacity(points.len());
    for (i, q) in points.into_iter().enumerate() {
        let found = find_through_point(&space, &q, energy, &search)?;
        if let Some(cp) = &found {
            let geo = space.reconstruct(&cp.config)?;
            fs::write(ldir.join(format!("hit_{i:03}.txt")), polyline_text(&geo.polyline(&space.model, 16)))?;
        }
        println!("point {i}: {}", if found.is_some() { "hit" } else { "miss" });
        out.push(CoverRecord {
            point: q,
            hit: found.is_some(),
            record: found.map(|cp| CriticalRecord::new(&space, &cp)),
        });
    }
    let hits = out.iter().filter(|r| r.hit).count();
    println!("{hits} of {} points hit at energy {energy}", out.len());
    write_json(&cfg.out.join("cover.json"), &out)
}
