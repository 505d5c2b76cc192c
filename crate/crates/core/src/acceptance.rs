//! Aggregated acceptance suite: ten criteria with pinned tolerances,
//! each reporting a single pass/fail line plus key measured values.
//!
//! The suite is shared between `cargo test` (the `acceptance`
//! integration target) and the CLI `accept` subcommand; the CLI
//! additionally writes every criterion's table artifacts as CSV. A
//! criterion that errors internally is reported as failed with the error
//! message — nothing panics across the suite boundary.

use crate::evolution::{
    convergence_order, evolve, make_initial_data, DataFamily, EvolutionConfig,
};
use crate::geometry::{u_to_psi, FieldState, Formulation};
use crate::harmonic::{
    extract_alpha_n, shoot_harmonic, shoot_harmonic_bracketed, solve_prescribed,
    uniqueness_probe, HarmonicMap, ShootConfig,
};
use crate::io::CsvTable;
use crate::numerics::{fit_power_law, Coordinate, RadialGrid};
use crate::resolution::{
    deviation_norm, exterior_energy_check, extract_radiation, local_energy, project_exterior,
};
use crate::spectral::{
    build_measure_on, count_negative_eigenvalues, dispersive_probe, linear_lambda_grid,
    spectral_weights, verify_groundstate, wronskian, zero_energy_solutions, LinePotential,
    TransformAudit,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::Instant;

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    /// `label = value [tolerance]` lines for the run log.
    pub details: Vec<String>,
    pub seconds: f64,
    /// CSV artifacts (file stem, table) the CLI writes out.
    pub tables: Vec<(String, CsvTable)>,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub quick: bool,
    pub reports: Vec<CriterionReport>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    /// One line per criterion: `criterion 3 [prescribed asymptotics] ... pass (1.2 s)`.
    pub fn summary_lines(&self) -> Vec<String> {
        self.reports
            .iter()
            .map(|r| {
                format!(
                    "criterion {:2} [{}] ... {} ({:.1} s)",
                    r.index,
                    r.name,
                    if r.passed { "pass" } else { "FAIL" },
                    r.seconds
                )
            })
            .collect()
    }
}

/// Check accumulator: every `require` adds a detail line and pulls the
/// overall verdict down on failure.
struct Check {
    details: Vec<String>,
    ok: bool,
}

impl Check {
    fn new() -> Self {
        Check { details: Vec::new(), ok: true }
    }

    fn require(&mut self, label: &str, pass: bool, value: String) {
        self.details.push(format!("{} {label}: {value}", if pass { "ok  " } else { "FAIL" }));
        self.ok &= pass;
    }

    fn note(&mut self, label: &str, value: String) {
        self.details.push(format!("     {label}: {value}"));
    }
}

/// Shared state across criteria (harmonic maps are reused rather than
/// re-shot per criterion).
struct Ctx {
    quick: bool,
    maps: BTreeMap<u32, HarmonicMap>,
    precise: BTreeMap<u32, HarmonicMap>,
}

impl Ctx {
    fn map(&mut self, n: u32) -> Result<&HarmonicMap, String> {
        if !self.maps.contains_key(&n) {
            let m = shoot_harmonic(n, &ShootConfig::default()).map_err(|e| e.to_string())?;
            self.maps.insert(n, m);
        }
        Ok(&self.maps[&n])
    }

    /// Tight-tolerance variant; its far-field coefficient is accurate
    /// enough for the prescribed-asymptotics comparison.
    fn map_precise(&mut self, n: u32) -> Result<&HarmonicMap, String> {
        if !self.precise.contains_key(&n) {
            let m = shoot_harmonic(n, &ShootConfig::precise()).map_err(|e| e.to_string())?;
            self.precise.insert(n, m);
        }
        Ok(&self.precise[&n])
    }
}

fn logspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a * (b / a).powf(i as f64 / (k - 1) as f64)).collect()
}

fn compact_bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-x * x / (1.0 - x * x)).exp()
    }
}

fn staggered(h: f64, n: usize) -> Result<RadialGrid, String> {
    RadialGrid::uniform(Coordinate::R, 0.5 * h, (n as f64 - 0.5) * h, n)
        .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Criterion 1: harmonic-map construction
// ---------------------------------------------------------------------------

fn c1_harmonic(ctx: &mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String> {
    let start = Instant::now();
    let mut check = Check::new();
    let mut table = CsvTable::new(&["n", "alpha_star", "alpha_n", "symmetry", "residual"]);
    let degrees: &[u32] = if ctx.quick { &[1] } else { &[1, 2, 3] };
    for &n in degrees {
        let map = ctx.map(n)?.clone();
        table.push(vec![n as f64, map.alpha_star, map.alpha_n, map.symmetry_defect, map.residual]);
        check.require(
            &format!("n={n} symmetry defect < 1e-8"),
            map.symmetry_defect < 1e-8,
            format!("{:.2e}", map.symmetry_defect),
        );

        // Halving the table spacing must shrink the finite-difference
        // residual of the tabulated solution by ~2^4. The comparison runs
        // at coarse spacings: the default table is already down at the
        // roundoff floor of the difference stencils.
        let a = map.alpha_star;
        let bracket = (a * (1.0 - 2e-9), a * (1.0 + 2e-9));
        let at_dx = |dx: f64| -> Result<f64, String> {
            let cfg = ShootConfig { table_dx: dx, ..Default::default() };
            Ok(shoot_harmonic_bracketed(n, bracket, &cfg).map_err(|e| e.to_string())?.residual)
        };
        let ratio = at_dx(0.02)? / at_dx(0.01)?.max(1e-300);
        check.require(
            &format!("n={n} residual refinement ratio in (8, 32)"),
            ratio > 8.0 && ratio < 32.0,
            format!("{ratio:.1}"),
        );

        // alpha* must be stable under tolerance refinement.
        let shift = (ctx.map_precise(n)?.alpha_star - map.alpha_star).abs();
        check.require(
            &format!("n={n} alpha* tolerance stability < 1e-8"),
            shift < 1e-8,
            format!("{shift:.2e}"),
        );

        if !ctx.quick {
            let uniq = uniqueness_probe(n, &ShootConfig::default()).map_err(|e| e.to_string())?;
            check.require(
                &format!("n={n} uniqueness probe (3 extra brackets)"),
                uniq.alpha_stars.len() == 4 && uniq.min_fx > 0.0,
                format!("spread {:.2e}, min dF/dx {:.3}", uniq.spread, uniq.min_fx),
            );
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check.require("runtime < 30 s", secs < 30.0, format!("{secs:.1} s"));
    Ok((check, vec![("harmonic_maps".into(), table)]))
}

// ---------------------------------------------------------------------------
// Criterion 2: far-field asymptotics
// ---------------------------------------------------------------------------

fn c2_asymptotics(ctx: &mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String> {
    let mut check = Check::new();
    let mut table = CsvTable::new(&["n", "window_start", "window_end", "alpha_n", "residual"]);
    let windows = [(8.0, 40.0), (12.0, 60.0), (20.0, 100.0)];
    let degrees: &[u32] = if ctx.quick { &[1] } else { &[1, 2, 3] };
    for &n in degrees {
        let map = ctx.map(n)?.clone();
        let mut alphas = Vec::new();
        let mut residuals = Vec::new();
        for &w in &windows {
            let (a, res) = extract_alpha_n(&map, w).map_err(|e| e.to_string())?;
            table.push(vec![n as f64, w.0, w.1, a, res]);
            alphas.push(a);
            residuals.push(res);
        }
        let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
        let spread = alphas.iter().fold(0.0_f64, |m, &a| m.max((a - mean).abs())) / mean.abs();
        check.require(
            &format!("n={n} window stability of alpha_n < 0.1%"),
            spread < 1e-3,
            format!("{spread:.2e} (alpha_n = {mean:.8})"),
        );
        check.require(
            &format!("n={n} fit residual decreases with window start"),
            residuals[1] < residuals[0] && residuals[2] < residuals[1],
            format!("{:.2e} > {:.2e} > {:.2e}", residuals[0], residuals[1], residuals[2]),
        );
    }
    Ok((check, vec![("asymptotic_fits".into(), table)]))
}

// ---------------------------------------------------------------------------
// Criterion 3: prescribed-asymptotics family
// ---------------------------------------------------------------------------

fn c3_prescribed(ctx: &mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String> {
    let mut check = Check::new();
    let degrees: &[u32] = if ctx.quick { &[1] } else { &[1, 2] };
    for &n in degrees {
        let map = ctx.map_precise(n)?.clone();
        let sol = solve_prescribed(n, -map.alpha_n, 4.0, 2.0).map_err(|e| e.to_string())?;
        let worst_ratio = sol.contraction_ratios.iter().cloned().fold(0.0_f64, f64::max);
        check.require(
            &format!("n={n} fixed-point contraction ratio < 1/2"),
            worst_ratio < 0.5,
            format!("{worst_ratio:.3} over {} sweeps", sol.iterations),
        );

        // The member with far-field coefficient −alpha_n is the shot
        // connecting solution itself; they must agree on the overlap.
        let mut sup = 0.0_f64;
        let mut x = 2.0;
        while x <= 11.0 {
            let (f, _) = sol.eval_x(x);
            sup = sup.max((f - map.q(x.sinh())).abs());
            x += 0.05;
        }
        check.require(
            &format!("n={n} overlap match with shot solution < 1e-6"),
            sup < 1e-6,
            format!("{sup:.2e}"),
        );
    }
    Ok((check, Vec::new()))
}

// ---------------------------------------------------------------------------
// Criterion 4: spectral facts of the linearized operator
// ---------------------------------------------------------------------------

fn c4_spectral(ctx: &mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String> {
    let start = Instant::now();
    let mut check = Check::new();
    let mut table = CsvTable::new(&["n", "negative_modes", "a0", "b0", "omega1_exponent"]);
    let degrees: &[u32] = if ctx.quick { &[1] } else { &[0, 1, 2] };
    let small_lams = [0.01, 0.0178, 0.0316, 0.0562, 0.1];
    for &n in degrees {
        let map = ctx.map(n)?.clone();
        let pot = LinePotential::linearized(&map);

        let neg = count_negative_eigenvalues(&pot, 40.0).map_err(|e| e.to_string())?;
        check.require(&format!("n={n} negative-eigenvalue count = 0"), neg == 0, format!("{neg}"));

        let zero = zero_energy_solutions(&pot).map_err(|e| e.to_string())?;
        let margin = zero.a0.abs().min(zero.b0.abs());
        check.require(
            &format!("n={n} no zero-energy resonance (|a0|, |b0| > 0.01)"),
            margin > 0.01,
            format!("a0 = {:.4}, b0 = {:.4}", zero.a0, zero.b0),
        );

        if n >= 1 {
            let gs = verify_groundstate(&map).map_err(|e| e.to_string())?;
            check.require(
                &format!("n={n} groundstate residual refines at 4th order"),
                gs.order_ratio > 8.0 && gs.order_ratio < 32.0 && gs.min_value > 0.0,
                format!("ratio {:.1}, residual {:.2e}", gs.order_ratio, gs.sup_residual_fine),
            );
        }

        let pts: Result<Vec<(f64, f64)>, String> = small_lams
            .iter()
            .map(|&l| Ok((l, spectral_weights(&pot, l).map_err(|e| e.to_string())?.0)))
            .collect();
        let fit = fit_power_law(&pts?, (0.009, 0.11)).map_err(|e| e.to_string())?;
        check.require(
            &format!("n={n} small-frequency weight exponent 4.0 +- 0.1"),
            (fit.exponent - 4.0).abs() < 0.1,
            format!("{:.3}", fit.exponent),
        );
        table.push(vec![n as f64, neg as f64, zero.a0, zero.b0, fit.exponent]);
    }

    // Free 5-dimensional comparison operator: |W(lambda)| grows like
    // lambda^{-3} at small frequency (inverse-square tail index 3/2).
    let free5 = LinePotential::free_wormhole(5);
    let wpts: Result<Vec<(f64, f64)>, String> = logspace(0.01, 0.1, 8)
        .into_iter()
        .map(|l| Ok((l, wronskian(&free5, l).map_err(|e| e.to_string())?.norm())))
        .collect();
    let wfit = fit_power_law(&wpts?, (0.009, 0.11)).map_err(|e| e.to_string())?;
    check.require(
        "free d=5 Wronskian growth exponent -3 +- 0.1",
        (wfit.exponent + 3.0).abs() < 0.1,
        format!("{:.3}", wfit.exponent),
    );

    let secs = start.elapsed().as_secs_f64();
    check.require("runtime < 120 s", secs < 120.0, format!("{secs:.1} s"));
    Ok((check, vec![("spectral_facts".into(), table)]))
}

// ---------------------------------------------------------------------------
// Criterion 5: transform round-trip and norm identity
// ---------------------------------------------------------------------------

fn c5_transform(ctx: &mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String> {
    let mut check = Check::new();
    let map = ctx.map(1)?.clone();
    let pot = LinePotential::linearized(&map);
    let grid = RadialGrid::uniform(Coordinate::R, -12.0, 12.0, 1601).map_err(|e| e.to_string())?;
    let (lams, quad) = linear_lambda_grid(0.02, 16.0, 1600);
    let measure = build_measure_on(&pot, lams, quad).map_err(|e| e.to_string())?;

    let bumps: Vec<(&str, Box<dyn Fn(f64) -> f64>)> = vec![
        ("gaussian", Box::new(|r: f64| (-r * r).exp())),
        ("offset", Box::new(|r: f64| (-((r - 2.0) / 1.5).powi(2)).exp())),
        ("odd", Box::new(|r: f64| r * (-r * r / 2.0).exp())),
        ("narrow", Box::new(|r: f64| (-((r + 3.0) / 0.8).powi(2)).exp())),
        ("ripple", Box::new(|r: f64| (1.0 - r * r / 9.0) * (-r * r / 4.0).exp())),
    ];
    let count = if ctx.quick { 2 } else { bumps.len() };
    let mut table = CsvTable::new(&["bump", "norm_defect", "roundtrip_error"]);
    for (i, (name, f)) in bumps.iter().take(count).enumerate() {
        let vals: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        let audit: TransformAudit = crate::spectral::audit_transform(&pot, &measure, &grid, &vals)
            .map_err(|e| e.to_string())?;
        table.push(vec![i as f64, audit.norm_defect, audit.roundtrip_error]);
        check.require(
            &format!("bump `{name}` norm identity < 1e-6"),
            audit.norm_defect < 1e-6,
            format!("{:.2e}", audit.norm_defect),
        );
        check.require(
            &format!("bump `{name}` round-trip error < 1e-6"),
            audit.roundtrip_error < 1e-6,
            format!("{:.2e}", audit.roundtrip_error),
        );
    }
    Ok((check, vec![("transform_audit".into(), table)]))
}

// ---------------------------------------------------------------------------
// Criterion 6: dispersive decay of frequency-localized waves
// ---------------------------------------------------------------------------

fn c6_dispersive(ctx: &mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String> {
    let mut check = Check::new();
    let mut table = CsvTable::new(&["d", "j", "t", "sup_field"]);
    let dims: &[u32] = if ctx.quick { &[3] } else { &[3, 5] };
    let samples = if ctx.quick { 5 } else { 11 };
    for &d in dims {
        // The fitted rate is asymptotic: the window starts well past the
        // band's plateau shoulder at 2^{-j}.
        let times3 = logspace(1200.0, 12000.0, samples);
        let times4 = logspace(2400.0, 24000.0, samples);
        let rep3 = dispersive_probe(d, -3, &times3).map_err(|e| e.to_string())?;
        let rep4 = dispersive_probe(d, -4, &times4).map_err(|e| e.to_string())?;
        for (rep, j) in [(&rep3, -3.0), (&rep4, -4.0)] {
            for &(t, s) in &rep.curve {
                table.push(vec![d as f64, j, t, s]);
            }
        }
        let target = d as f64 / 2.0;
        check.require(
            &format!("d={d} sup-norm decay exponent {target} +- 0.2"),
            (rep3.exponent - target).abs() < 0.2,
            format!("{:.3}", rep3.exponent),
        );
        check.note(
            &format!("d={d} next-band exponent"),
            format!("{:.3}", rep4.exponent),
        );
        // Plateau heights of consecutive dyadic bands scale by 2^{d+1}.
        let measured = rep3.plateau / rep4.plateau;
        let expected = (2.0_f64).powi(d as i32 + 1);
        check.require(
            &format!("d={d} plateau ratio within 30% of 2^{}", d + 1),
            (measured / expected - 1.0).abs() < 0.3,
            format!("{measured:.2} vs {expected}"),
        );
    }
    Ok((check, vec![("dispersive_decay".into(), table)]))
}

// ---------------------------------------------------------------------------
// Criterion 7: evolution quality
// ---------------------------------------------------------------------------

fn c7_evolution(ctx: &mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String> {
    let mut check = Check::new();
    let map = ctx.map(1)?.clone();

    // Long-horizon energy drift: the bump's waves stay inside the domain
    // for the whole run, so the full-line energy must be conserved.
    let (half, t_final) = if ctx.quick { (30.0_f64, 20.0) } else { (110.0, 100.0) };
    let n = (2.0 * half / 0.05).round() as usize + 1;
    let grid = RadialGrid::uniform(Coordinate::R, -half, half, n).map_err(|e| e.to_string())?;
    let h = grid.spacing().unwrap();
    let data = make_initial_data(
        &DataFamily::HarmonicPlusBump { degree: 1, amplitude: 0.2, center: 2.0, width: 1.5 },
        &grid,
        Some(&map),
        0,
    )
    .map_err(|e| e.to_string())?;
    let run = evolve(&EvolutionConfig::standard(0.2 * h, t_final, 1000), &data, Some(&map))
        .map_err(|e| e.to_string())?;
    check.require(
        &format!("energy drift < 1e-6 over T = {t_final}"),
        run.energy.relative_drift < 1e-6,
        format!("{:.2e}", run.energy.relative_drift),
    );
    let mut energy_table = CsvTable::new(&["t", "energy"]);
    for (&t, &e) in run.energy.times.iter().zip(&run.energy.energies) {
        energy_table.push(vec![t, e]);
    }

    // Self-convergence at the scheme's design order.
    let family = DataFamily::HarmonicPlusBump { degree: 0, amplitude: 0.4, center: 0.0, width: 1.5 };
    let cgrid = RadialGrid::uniform(Coordinate::R, -12.0, 12.0, 241).map_err(|e| e.to_string())?;
    let ch = cgrid.spacing().unwrap();
    let conv = convergence_order(&EvolutionConfig::standard(0.4 * ch, 2.0, 0), &family, &cgrid, None, 0)
        .map_err(|e| e.to_string())?;
    check.require(
        "self-convergence order 4.0 +- 0.3",
        !conv.indeterminate && (conv.order - 4.0).abs() < 0.3,
        format!("{:.3}", conv.order),
    );

    // Finite propagation speed: truncated-Gaussian data (grid-scale
    // spectral content below 1e-22) must stay inside the light cone.
    let fgrid = RadialGrid::uniform(Coordinate::R, -25.0, 25.0, 1001).map_err(|e| e.to_string())?;
    let fh = fgrid.spacing().unwrap();
    let r_support = 7.0;
    let field: Vec<f64> = fgrid
        .nodes()
        .iter()
        .map(|&r| if r.abs() >= r_support { 0.0 } else { 0.3 * (-r * r).exp() })
        .collect();
    let fs = FieldState::new(fgrid.clone(), field, vec![0.0; fgrid.len()], Formulation::Psi, 0)
        .map_err(|e| e.to_string())?;
    let t_cone = 8.0;
    let frun = evolve(&EvolutionConfig::standard(0.5 * fh, t_cone, 0), &fs, None)
        .map_err(|e| e.to_string())?;
    let fin = frun.snapshots.last().unwrap();
    let front = r_support + t_cone + 5.0 * fh;
    let leak = fgrid
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, &r)| r.abs() > front)
        .map(|(i, _)| fin.field[i].abs().max(fin.velocity[i].abs()))
        .fold(0.0_f64, f64::max);
    check.require("finite-speed audit: leakage < 1e-10", leak < 1e-10, format!("{leak:.2e}"));

    // Full-field vs reduced-field evolutions agree within 10x the
    // discretization error of the full-field run.
    let t_eq = 6.0;
    let run_at = |nn: usize, reduced: bool| -> Result<FieldState, String> {
        let g = RadialGrid::uniform(Coordinate::R, -20.0, 20.0, nn).map_err(|e| e.to_string())?;
        let gh = g.spacing().unwrap();
        let u0: Vec<f64> =
            g.nodes().iter().map(|&r| 0.05 * (-(r + 1.0) * (r + 1.0)).exp()).collect();
        let us = FieldState::new(g.clone(), u0, vec![0.0; g.len()], Formulation::U, 1)
            .map_err(|e| e.to_string())?;
        let cfg = EvolutionConfig::standard(0.4 * gh, t_eq, 0);
        if reduced {
            let r = evolve(&cfg, &us, Some(&map)).map_err(|e| e.to_string())?;
            u_to_psi(r.snapshots.last().unwrap(), &map).map_err(|e| e.to_string())
        } else {
            let ps = u_to_psi(&us, &map).map_err(|e| e.to_string())?;
            let r = evolve(&cfg, &ps, Some(&map)).map_err(|e| e.to_string())?;
            Ok(r.snapshots.last().unwrap().clone())
        }
    };
    let psi_coarse = run_at(801, false)?;
    let psi_fine = run_at(1601, false)?;
    let from_u = run_at(801, true)?;
    let disc_tol = psi_coarse
        .field
        .iter()
        .enumerate()
        .map(|(i, &f)| (f - psi_fine.field[2 * i]).abs())
        .fold(0.0_f64, f64::max);
    let diff = from_u
        .field
        .iter()
        .zip(&psi_coarse.field)
        .map(|(&a, &b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    check.require(
        "formulation equivalence within 10x discretization error",
        diff < 10.0 * disc_tol,
        format!("{diff:.2e} vs tolerance {:.2e}", 10.0 * disc_tol),
    );

    Ok((check, vec![("energy_trace".into(), energy_table)]))
}

// ---------------------------------------------------------------------------
// Criterion 8: exterior-energy channels in flat 1+5 dimensions
// ---------------------------------------------------------------------------

/// Seeded compactly supported bump pair for the channel test.
fn channel_bump(grid: &RadialGrid, seed: u64) -> Result<FieldState, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp: f64 = rng.gen_range(0.2..1.0);
    let center: f64 = rng.gen_range(7.0..13.0);
    let width: f64 = rng.gen_range(1.0..2.5);
    let vel_frac: f64 = rng.gen_range(-0.5..0.5);
    let field: Vec<f64> =
        grid.nodes().iter().map(|&r| amp * compact_bump((r - center) / width)).collect();
    let velocity: Vec<f64> = field.iter().map(|&f| vel_frac / width * f).collect();
    FieldState::new(grid.clone(), field, velocity, Formulation::FlatRadial(5), 0)
        .map_err(|e| e.to_string())
}

fn c8_exterior(ctx: &mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String> {
    let mut check = Check::new();
    let h = 0.025;
    let grid = staggered(h, 1800)?; // r up to 45
    let rb = grid.nodes()[200]; // ~ 5.01
    let t_grid: Vec<f64> = (0..=21).map(|i| i as f64).collect();
    let seeds = if ctx.quick { 0..3u64 } else { 0..10u64 };
    let mut table = CsvTable::new(&["seed", "ratio", "pythagoras_defect"]);
    for seed in seeds {
        let data = channel_bump(&grid, seed)?;
        let split = project_exterior(&grid, &data.field, &data.velocity, rb)
            .map_err(|e| e.to_string())?;
        let rep = exterior_energy_check(&data, rb, &t_grid).map_err(|e| e.to_string())?;
        table.push(vec![seed as f64, rep.ratio, split.pythagoras_defect]);
        check.require(
            &format!("seed {seed} exterior ratio >= 0.95"),
            !rep.t_grid_short && rep.ratio >= 0.95,
            format!("{:.3}", rep.ratio),
        );
        check.require(
            &format!("seed {seed} projection Pythagoras < 1e-8"),
            split.pythagoras_defect < 1e-8,
            format!("{:.2e}", split.pythagoras_defect),
        );
    }

    // Degenerate direction: data in the projected plane itself, capped
    // smoothly at the origin (the cap stays causally separated from the
    // exterior cone), whose exterior energy decays to below 1e-6 of its
    // initial value by the end of the time grid.
    let dh: f64 = if ctx.quick { 0.0625 } else { 0.03125 };
    let dn = (240.0 / dh).round() as usize; // r up to 240
    let dg = staggered(dh, dn)?;
    let drb = dg.nodes()[(2.0 / dh).round() as usize]; // ~ 2.02
    let sigma = 0.8f64;
    let f: Vec<f64> = dg
        .nodes()
        .iter()
        .map(|&r| (1.0 - (-(r / sigma).powi(4)).exp()) / r.powi(3))
        .collect();
    let ds = FieldState::new(dg.clone(), f, vec![0.0; dg.len()], Formulation::FlatRadial(5), 0)
        .map_err(|e| e.to_string())?;
    let dt_grid = [0.0, 40.0, 80.0, 120.0, 160.0, 200.0, 230.0];
    let drep = exterior_energy_check(&ds, drb, &dt_grid).map_err(|e| e.to_string())?;
    let initial = drep.exterior_forward[0].1;
    let final_e = drep.exterior_forward.last().unwrap().1;
    check.require(
        "degenerate data sheds exterior energy below 1e-6 of initial",
        final_e < 1e-6 * initial,
        format!("{:.2e} of initial", final_e / initial),
    );
    Ok((check, vec![("exterior_channels".into(), table)]))
}

// ---------------------------------------------------------------------------
// Criterion 9: resolution into the static map plus radiation
// ---------------------------------------------------------------------------

fn c9_resolution(ctx: &mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String> {
    let start = Instant::now();
    let mut check = Check::new();
    let map = ctx.map(1)?.clone();
    let (half, t_final, matches, window) = if ctx.quick {
        (80.0_f64, 40.0, (25.0, 32.0), 35.0)
    } else {
        (155.0, 80.0, (40.0, 60.0), 70.0)
    };
    let n = (2.0 * half / 0.05).round() as usize + 1;
    let grid = RadialGrid::uniform(Coordinate::R, -half, half, n).map_err(|e| e.to_string())?;
    let amplitudes: &[f64] = if ctx.quick { &[0.2] } else { &[0.1, 0.2, 0.3] };
    let mut table = CsvTable::new(&["amplitude", "t", "local_energy"]);
    for &amp in amplitudes {
        let data = make_initial_data(
            &DataFamily::HarmonicPlusBump { degree: 1, amplitude: amp, center: 2.0, width: 1.5 },
            &grid,
            Some(&map),
            0,
        )
        .map_err(|e| e.to_string())?;
        // dt = 0.02 with stride 50 puts a snapshot on every integer time.
        let run = evolve(&EvolutionConfig::standard(0.02, t_final, 50), &data, Some(&map))
            .map_err(|e| e.to_string())?;
        let series = &run.snapshots;

        // Local energy of the deviation inside |r| <= 10 must fall by at
        // least 10x from its peak over the first half of the run.
        let curve = local_energy(series, &map, 10.0).map_err(|e| e.to_string())?;
        for &(t, e) in &curve {
            table.push(vec![amp, t, e]);
        }
        let peak = curve
            .iter()
            .filter(|&&(t, _)| t <= 0.5 * t_final)
            .map(|&(_, e)| e)
            .fold(0.0_f64, f64::max);
        let last = curve.last().unwrap().1;
        check.require(
            &format!("amp {amp} local energy decays 10x by t = {t_final}"),
            last <= 0.1 * peak,
            format!("peak {peak:.3e} -> {last:.3e}"),
        );

        // Radiation mismatch: deviation at t_match propagated by the
        // linear flow must track the nonlinear deviation. Later matching
        // times must do better.
        let m_early = extract_radiation(series, &map, matches.0, window)
            .map_err(|e| e.to_string())?
            .last()
            .unwrap()
            .1;
        let m_late = extract_radiation(series, &map, matches.1, window)
            .map_err(|e| e.to_string())?
            .last()
            .unwrap()
            .1;
        let radiation = deviation_norm(series.last().unwrap(), &map, window)
            .map_err(|e| e.to_string())?;
        check.require(
            &format!("amp {amp} mismatch at t_match = {} below 20% of radiation", matches.0),
            m_early <= 0.2 * radiation,
            format!("{m_early:.3e} vs radiation norm {radiation:.3e}"),
        );
        check.require(
            &format!("amp {amp} later matching improves"),
            m_late < m_early,
            format!("{m_late:.3e} < {m_early:.3e}"),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    check.require("runtime < 600 s", secs < 600.0, format!("{secs:.1} s"));
    Ok((check, vec![("local_energy_decay".into(), table)]))
}

// ---------------------------------------------------------------------------
// Criterion 10: determinism
// ---------------------------------------------------------------------------

fn c10_determinism(_ctx: &mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String> {
    let mut check = Check::new();
    // Re-run two representative computations (one ODE-shooting artifact,
    // one seeded-PDE artifact) from scratch and require byte-identical
    // serializations. The CLI test repeats this at the file level for the
    // whole `accept` run.
    let build_harmonic = || -> Result<String, String> {
        let m = shoot_harmonic(1, &ShootConfig::default()).map_err(|e| e.to_string())?;
        let mut t = CsvTable::new(&["alpha_star", "alpha_n", "residual"]);
        t.push(vec![m.alpha_star, m.alpha_n, m.residual]);
        Ok(t.to_string())
    };
    let build_channel = || -> Result<String, String> {
        let grid = staggered(0.025, 1800)?;
        let rb = grid.nodes()[200];
        let t_grid: Vec<f64> = (0..=21).map(|i| i as f64).collect();
        let mut t = CsvTable::new(&["seed", "ratio"]);
        for seed in 0..2u64 {
            let data = channel_bump(&grid, seed)?;
            let rep = exterior_energy_check(&data, rb, &t_grid).map_err(|e| e.to_string())?;
            t.push(vec![seed as f64, rep.ratio]);
        }
        Ok(t.to_string())
    };
    check.require(
        "harmonic artifact byte-identical across runs",
        build_harmonic()? == build_harmonic()?,
        "rebuilt from scratch".into(),
    );
    check.require(
        "seeded channel artifact byte-identical across runs",
        build_channel()? == build_channel()?,
        "rebuilt from scratch".into(),
    );
    Ok((check, Vec::new()))
}

// ---------------------------------------------------------------------------
// Suite driver
// ---------------------------------------------------------------------------

type Criterion = fn(&mut Ctx) -> Result<(Check, Vec<(String, CsvTable)>), String>;

const CRITERIA: &[(usize, &str, Criterion)] = &[
    (1, "harmonic maps", c1_harmonic),
    (2, "far-field asymptotics", c2_asymptotics),
    (3, "prescribed asymptotics", c3_prescribed),
    (4, "spectral facts", c4_spectral),
    (5, "transform identities", c5_transform),
    (6, "dispersive decay", c6_dispersive),
    (7, "evolution quality", c7_evolution),
    (8, "exterior energy", c8_exterior),
    (9, "soliton resolution", c9_resolution),
    (10, "determinism", c10_determinism),
];

/// Runs the whole suite. `quick` substitutes reduced variants (fewer
/// degrees, seeds, and shorter horizons) for smoke runs; the pinned
/// tolerances are unchanged.
pub fn run_suite(quick: bool) -> SuiteReport {
    let mut ctx = Ctx { quick, maps: BTreeMap::new(), precise: BTreeMap::new() };
    let mut reports = Vec::new();
    for &(index, name, f) in CRITERIA {
        let start = Instant::now();
        let report = match f(&mut ctx) {
            Ok((check, tables)) => CriterionReport {
                index,
                name,
                passed: check.ok,
                details: check.details,
                seconds: start.elapsed().as_secs_f64(),
                tables,
            },
            Err(message) => CriterionReport {
                index,
                name,
                passed: false,
                details: vec![format!("FAIL internal error: {message}")],
                seconds: start.elapsed().as_secs_f64(),
                tables: Vec::new(),
            },
        };
        reports.push(report);
    }
    SuiteReport { quick, reports }
}
