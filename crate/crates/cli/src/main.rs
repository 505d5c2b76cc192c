//! `wormhole-lab`: experiment harness over the core library.
//!
//! Every subcommand writes its numeric artifacts as versioned CSV plus a
//! gnuplot-ready `.dat` twin, and records a run manifest listing the
//! command, the full configuration echo (defaults included), the seed,
//! and every file written. Exit codes: 0 ok, 1 acceptance failure,
//! 2 usage/configuration error.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use wormhole_core::acceptance::run_suite;
use wormhole_core::evolution::{evolve, make_initial_data, DataFamily, EvolutionConfig};
use wormhole_core::geometry::{FieldState, Formulation};
use wormhole_core::harmonic::{shoot_harmonic, solve_prescribed, ShootConfig};
use wormhole_core::io::{Config, CsvTable, RunManifest};
use wormhole_core::numerics::{Coordinate, RadialGrid};
use wormhole_core::resolution::{extract_radiation, lambda_mu, local_energy};
use wormhole_core::spectral::{
    build_measure_on, dispersive_probe, log_lambda_grid,
    wronskian, zero_energy_solutions, LinePotential,
};

#[derive(Parser)]
#[command(name = "wormhole-lab", version, about = "Wave maps on a wormhole: numerical laboratory")]
struct Cli {
    /// Directory for output files (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Seed for the deterministic data families.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Reduced problem sizes for smoke runs.
    #[arg(long, global = true)]
    quick: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shoot the degree-n static solution and emit its table and diagnostics.
    Harmonic {
        #[arg(long, default_value_t = 1)]
        n: u32,
    },
    /// Scattering data: Wronskian and weight tables, resonance report.
    Spectral {
        /// Linearize around the degree-n static solution.
        #[arg(long, conflicts_with = "dim")]
        n: Option<u32>,
        /// Use the free operator of the given dimension instead.
        #[arg(long)]
        dim: Option<u32>,
    },
    /// Evolve initial data from a configuration file.
    Evolve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evolve and run the resolution diagnostics (local energy,
    /// radiation mismatch, far-field observables).
    Resolve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sup-norm decay of a frequency-localized free wave.
    Dispersive {
        #[arg(long, default_value_t = 5)]
        dim: u32,
        #[arg(long, default_value_t = -3)]
        j: i32,
    },
    /// Run the acceptance suite; non-zero exit on any failing criterion.
    Accept,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, String> {
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| format!("cannot create {}: {e}", cli.out_dir.display()))?;
    match &cli.command {
        Command::Harmonic { n } => cmd_harmonic(cli, *n),
        Command::Spectral { n, dim } => cmd_spectral(cli, *n, *dim),
        Command::Evolve { config } => cmd_evolve(cli, config.as_deref()),
        Command::Resolve { config } => cmd_resolve(cli, config.as_deref()),
        Command::Dispersive { dim, j } => cmd_dispersive(cli, *dim, *j),
        Command::Accept => cmd_accept(cli),
    }
}

/// Writes a table as versioned CSV plus a gnuplot-ready `.dat` twin and
/// records both in the manifest.
fn emit(
    dir: &Path,
    stem: &str,
    table: &CsvTable,
    manifest: &mut RunManifest,
) -> Result<(), String> {
    let csv_path = dir.join(format!("{stem}.csv"));
    table.write(&csv_path).map_err(|e| e.to_string())?;
    manifest.record_output(&csv_path);

    let mut dat = format!("# {}\n", table.columns.join(" "));
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        dat.push_str(&cells.join(" "));
        dat.push('\n');
    }
    let dat_path = dir.join(format!("{stem}.dat"));
    std::fs::write(&dat_path, dat).map_err(|e| format!("{}: {e}", dat_path.display()))?;
    manifest.record_output(&dat_path);
    Ok(())
}

fn emit_text(
    dir: &Path,
    name: &str,
    text: &str,
    manifest: &mut RunManifest,
) -> Result<(), String> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    manifest.record_output(&path);
    Ok(())
}

fn finish(
    dir: &Path,
    manifest: &mut RunManifest,
    started: Instant,
    stem: &str,
) -> Result<ExitCode, String> {
    manifest.elapsed_seconds = started.elapsed().as_secs_f64();
    let path = dir.join(format!("{stem}_manifest.txt"));
    manifest.write(&path).map_err(|e| e.to_string())?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// harmonic
// ---------------------------------------------------------------------------

fn cmd_harmonic(cli: &Cli, n: u32) -> Result<ExitCode, String> {
    let started = Instant::now();
    let mut manifest = RunManifest::new(format!("harmonic --n {n}"), cli.seed);
    let map = shoot_harmonic(n, &ShootConfig::default()).map_err(|e| e.to_string())?;

    let mut table = CsvTable::new(&["x", "r", "f", "df_dx"]);
    for i in 0..map.xs.len() {
        table.push(vec![map.xs[i], map.xs[i].sinh(), map.f[i], map.fx[i]]);
    }
    emit(&cli.out_dir, &format!("harmonic_n{n}"), &table, &mut manifest)?;

    let report = format!(
        "degree = {n}\nalpha_star = {:e}\nalpha_n = {:e}\nbeta_n = {:e}\n\
         symmetry_defect = {:e}\node_residual = {:e}\n",
        map.alpha_star, map.alpha_n, map.beta_n, map.symmetry_defect, map.residual
    );
    emit_text(&cli.out_dir, &format!("harmonic_n{n}_report.txt"), &report, &mut manifest)?;

    // Prescribed-asymptotics cross-check for n >= 1.
    if n >= 1 {
        let sol = solve_prescribed(n, -map.alpha_n, 4.0, 2.0).map_err(|e| e.to_string())?;
        let worst =
            sol.contraction_ratios.iter().cloned().fold(0.0_f64, f64::max);
        let mut sup = 0.0_f64;
        let mut x = 2.0;
        while x <= 11.0 {
            sup = sup.max((sol.eval_x(x).0 - map.q(x.sinh())).abs());
            x += 0.05;
        }
        manifest.config_echo.push(format!("crosscheck.contraction = {worst:e}"));
        manifest.config_echo.push(format!("crosscheck.overlap_sup = {sup:e}"));
    }
    finish(&cli.out_dir, &mut manifest, started, &format!("harmonic_n{n}"))
}

// ---------------------------------------------------------------------------
// spectral
// ---------------------------------------------------------------------------

fn cmd_spectral(cli: &Cli, n: Option<u32>, dim: Option<u32>) -> Result<ExitCode, String> {
    let started = Instant::now();
    let (pot, label) = match (n, dim) {
        (Some(n), None) => {
            let map = shoot_harmonic(n, &ShootConfig::default()).map_err(|e| {
                format!("spectral --n needs the degree-{n} static solution: {e}")
            })?;
            (LinePotential::linearized(&map), format!("linearized_n{n}"))
        }
        (None, Some(d)) => (LinePotential::free_wormhole(d), format!("free_d{d}")),
        (None, None) => return Err("pass either --n or --dim".into()),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let mut manifest = RunManifest::new(format!("spectral {label}"), cli.seed);

    let per_decade = if cli.quick { 20 } else { 60 };
    let (lams, quad) = log_lambda_grid(0.01, 10.0, per_decade);
    let measure = build_measure_on(&pot, lams, quad).map_err(|e| e.to_string())?;
    let mut table = CsvTable::new(&["lambda", "omega1", "omega2", "wronskian_abs"]);
    for (i, &lam) in measure.lambdas.iter().enumerate() {
        let w = wronskian(&pot, lam).map_err(|e| e.to_string())?;
        table.push(vec![lam, measure.omega1[i], measure.omega2[i], w.norm()]);
    }
    emit(&cli.out_dir, &format!("spectral_{label}"), &table, &mut manifest)?;

    let zero = zero_energy_solutions(&pot).map_err(|e| e.to_string())?;
    let report = format!(
        "a0 = {:e}\na1 = {:e}\nb0 = {:e}\nb1 = {:e}\nmatching_spread = {:e}\n\
         wronskian_defect = {:e}\nresonance = {}\n",
        zero.a0,
        zero.a1,
        zero.b0,
        zero.b1,
        zero.matching_spread,
        zero.wronskian_defect,
        if zero.a0.abs() > 0.01 && zero.b0.abs() > 0.01 { "absent" } else { "suspected" }
    );
    emit_text(&cli.out_dir, &format!("spectral_{label}_resonance.txt"), &report, &mut manifest)?;
    finish(&cli.out_dir, &mut manifest, started, &format!("spectral_{label}"))
}

// ---------------------------------------------------------------------------
// evolve / resolve (shared configuration)
// ---------------------------------------------------------------------------

struct EvolveSetup {
    map: Option<wormhole_core::harmonic::HarmonicMap>,
    data: FieldState,
    config: EvolutionConfig,
    degree: u32,
}

fn load_setup(cli: &Cli, path: Option<&Path>) -> Result<(Config, EvolveSetup), String> {
    let cfg = match path {
        Some(p) => Config::load(p).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    let r_min = cfg.get_f64("grid", "r_min", -60.0).map_err(|e| e.to_string())?;
    let r_max = cfg.get_f64("grid", "r_max", 60.0).map_err(|e| e.to_string())?;
    let nodes = cfg.get_u64("grid", "nodes", 2401).map_err(|e| e.to_string())? as usize;
    let grid = RadialGrid::uniform(Coordinate::R, r_min, r_max, nodes)
        .map_err(|e| format!("[grid]: {e}"))?;
    let h = grid.uniform_spacing().map_err(|e| format!("[grid]: {e}"))?;

    let t_final = cfg.get_f64("run", "t_final", 40.0).map_err(|e| e.to_string())?;
    let dt_factor = cfg.get_f64("run", "dt_factor", 0.3).map_err(|e| e.to_string())?;
    let stride = cfg.get_u64("run", "snapshot_stride", 0).map_err(|e| e.to_string())? as usize;

    let degree = cfg.get_u64("data", "degree", 1).map_err(|e| e.to_string())? as u32;
    let family = match cfg.get_str("data", "family", "bump").as_str() {
        "bump" => DataFamily::HarmonicPlusBump {
            degree,
            amplitude: cfg.get_f64("data", "amplitude", 0.2).map_err(|e| e.to_string())?,
            center: cfg.get_f64("data", "center", 2.0).map_err(|e| e.to_string())?,
            width: cfg.get_f64("data", "width", 1.5).map_err(|e| e.to_string())?,
        },
        "profile" => DataFamily::InterpolatingProfile {
            degree,
            steepness: cfg.get_f64("data", "steepness", 0.7).map_err(|e| e.to_string())?,
        },
        "radiation" => DataFamily::RadiationOnly {
            degree,
            amplitude: cfg.get_f64("data", "amplitude", 0.2).map_err(|e| e.to_string())?,
        },
        other => return Err(format!("[data] family: unknown family `{other}`")),
    };

    let map = if degree >= 1 {
        Some(shoot_harmonic(degree, &ShootConfig::default()).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let mut data =
        make_initial_data(&family, &grid, map.as_ref(), cli.seed).map_err(|e| e.to_string())?;
    // The resolution diagnostics work on the full field; radiation-only
    // data comes back in reduced form and is converted up front.
    if data.formulation == Formulation::U {
        let m = map.as_ref().ok_or("radiation data of degree 0 needs no conversion")?;
        data = wormhole_core::geometry::u_to_psi(&data, m).map_err(|e| e.to_string())?;
    }
    let config = EvolutionConfig::standard(dt_factor * h, t_final, stride.max(1));
    Ok((cfg, EvolveSetup { map, data, config, degree }))
}

fn snapshot_table(snapshots: &[FieldState]) -> CsvTable {
    let mut table = CsvTable::new(&["t", "r", "field", "velocity"]);
    for snap in snapshots {
        for (i, &r) in snap.grid.nodes().iter().enumerate() {
            table.push(vec![snap.time, r, snap.field[i], snap.velocity[i]]);
        }
    }
    table
}

fn cmd_evolve(cli: &Cli, path: Option<&Path>) -> Result<ExitCode, String> {
    let started = Instant::now();
    let (cfg, setup) = load_setup(cli, path)?;
    let mut manifest = RunManifest::new("evolve", cli.seed);
    let run =
        evolve(&setup.config, &setup.data, setup.map.as_ref()).map_err(|e| e.to_string())?;

    let mut energy = CsvTable::new(&["t", "energy"]);
    for (&t, &e) in run.energy.times.iter().zip(&run.energy.energies) {
        energy.push(vec![t, e]);
    }
    emit(&cli.out_dir, "evolve_energy", &energy, &mut manifest)?;
    let last = run.snapshots.last().unwrap();
    emit(
        &cli.out_dir,
        "evolve_final",
        &snapshot_table(std::slice::from_ref(last)),
        &mut manifest,
    )?;
    manifest.config_echo = cfg.echo();
    manifest.config_echo.push(format!("result.energy_drift = {:e}", run.energy.relative_drift));
    finish(&cli.out_dir, &mut manifest, started, "evolve")
}

fn cmd_resolve(cli: &Cli, path: Option<&Path>) -> Result<ExitCode, String> {
    let started = Instant::now();
    let (cfg, setup) = load_setup(cli, path)?;
    if setup.degree == 0 {
        return Err("[data] degree: resolution diagnostics need degree >= 1".into());
    }
    let map = setup.map.as_ref().unwrap();
    let local_radius = cfg.get_f64("resolve", "local_radius", 10.0).map_err(|e| e.to_string())?;
    let window = cfg.get_f64("resolve", "window", 20.0).map_err(|e| e.to_string())?;
    let t_match =
        cfg.get_f64("resolve", "t_match", 0.5 * setup.config.t_final).map_err(|e| e.to_string())?;
    let obs_r_min = cfg.get_f64("resolve", "observable_r_min", 20.0).map_err(|e| e.to_string())?;

    let mut manifest = RunManifest::new("resolve", cli.seed);
    let run =
        evolve(&setup.config, &setup.data, setup.map.as_ref()).map_err(|e| e.to_string())?;
    let series = &run.snapshots;

    let local = local_energy(series, map, local_radius).map_err(|e| e.to_string())?;
    let mut local_table = CsvTable::new(&["t", "local_energy"]);
    for &(t, e) in &local {
        local_table.push(vec![t, e]);
    }
    emit(&cli.out_dir, "resolve_local_energy", &local_table, &mut manifest)?;

    let t_snap = series
        .iter()
        .map(|s| s.time)
        .min_by(|a, b| (a - t_match).abs().partial_cmp(&(b - t_match).abs()).unwrap())
        .unwrap();
    let mismatch = extract_radiation(series, map, t_snap, window).map_err(|e| e.to_string())?;
    let mut mm_table = CsvTable::new(&["t", "mismatch"]);
    for &(t, m) in &mismatch {
        mm_table.push(vec![t, m]);
    }
    emit(&cli.out_dir, "resolve_radiation_mismatch", &mm_table, &mut manifest)?;

    let last = series.last().unwrap();
    let reduced =
        wormhole_core::geometry::psi_to_u(last, map).map_err(|e| e.to_string())?;
    let obs = lambda_mu(&reduced, obs_r_min).map_err(|e| e.to_string())?;
    let mut obs_table = CsvTable::new(&["r", "lambda", "mu"]);
    for i in 0..obs.rs.len() {
        obs_table.push(vec![obs.rs[i], obs.lambda[i], obs.mu[i]]);
    }
    emit(&cli.out_dir, "resolve_observables", &obs_table, &mut manifest)?;

    manifest.config_echo = cfg.echo();
    manifest.config_echo.push(format!("result.energy_drift = {:e}", run.energy.relative_drift));
    manifest.config_echo.push(format!("result.t_match = {t_snap:e}"));
    manifest.config_echo.push(format!("result.mu_tail_warning = {}", obs.tail_warning));
    finish(&cli.out_dir, &mut manifest, started, "resolve")
}

// ---------------------------------------------------------------------------
// dispersive
// ---------------------------------------------------------------------------

fn cmd_dispersive(cli: &Cli, dim: u32, j: i32) -> Result<ExitCode, String> {
    let started = Instant::now();
    let mut manifest = RunManifest::new(format!("dispersive --dim {dim} --j {j}"), cli.seed);
    let samples = if cli.quick { 5 } else { 11 };
    let base = 150.0 * (2.0_f64).powi(-j);
    let times: Vec<f64> =
        (0..samples).map(|i| base * 10.0_f64.powf(i as f64 / (samples - 1) as f64)).collect();
    let rep = dispersive_probe(dim, j, &times).map_err(|e| e.to_string())?;
    let mut table = CsvTable::new(&["t", "sup_field"]);
    for &(t, s) in &rep.curve {
        table.push(vec![t, s]);
    }
    let stem = format!("dispersive_d{dim}_j{j}");
    emit(&cli.out_dir, &stem, &table, &mut manifest)?;
    manifest.config_echo.push(format!("result.exponent = {:e}", rep.exponent));
    manifest.config_echo.push(format!("result.plateau = {:e}", rep.plateau));
    println!("decay exponent {:.3} (target {:.1})", rep.exponent, dim as f64 / 2.0);
    finish(&cli.out_dir, &mut manifest, started, &stem)
}

// ---------------------------------------------------------------------------
// accept
// ---------------------------------------------------------------------------

fn cmd_accept(cli: &Cli) -> Result<ExitCode, String> {
    let started = Instant::now();
    let mut manifest = RunManifest::new(
        format!("accept{}", if cli.quick { " --quick" } else { "" }),
        cli.seed,
    );
    let report = run_suite(cli.quick);
    let mut log = String::new();
    for (r, line) in report.reports.iter().zip(report.summary_lines()) {
        println!("{line}");
        log.push_str(&line);
        log.push('\n');
        for d in &r.details {
            log.push_str("    ");
            log.push_str(d);
            log.push('\n');
        }
        for (stem, table) in &r.tables {
            emit(&cli.out_dir, stem, table, &mut manifest)?;
        }
    }
    emit_text(&cli.out_dir, "acceptance_report.txt", &log, &mut manifest)?;
    manifest.elapsed_seconds = started.elapsed().as_secs_f64();
    let path = cli.out_dir.join("accept_manifest.txt");
    manifest.write(&path).map_err(|e| e.to_string())?;
    if report.all_passed() {
        println!("all criteria passed");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("acceptance failure; see {}", cli.out_dir.join("acceptance_report.txt").display());
        Ok(ExitCode::from(1))
    }
}
