//! Static solutions of the wave-map equation on the wormhole: the
//! degree-n harmonic maps `Q_n` found by shooting, their `r → ∞`
//! asymptotics, and the prescribed-asymptotics family built by Picard
//! iteration.
//!
//! The static equation in the metric radius `r` is
//!
//! ```text
//! F'' + (2r/(r²+1)) F' − sin(2F)/(r²+1) = 0,
//! ```
//!
//! and in the stretched coordinate `x = arcsinh r` (so `r = sinh x`)
//!
//! ```text
//! F'' + tanh(x) F' − sin(2F) = 0,
//! ```
//!
//! which is asymptotically autonomous. The auxiliary quantity
//! `Q(r) = (r²+1)(F')²/2 − sin²F` is nonincreasing for `r ≥ 0`
//! (`dQ/dr = −r(F')²`) and drives the undershoot/overshoot trichotomy:
//! a trajectory with `Q < 0` while `F < nπ` can never reach `nπ`, while
//! a trajectory touching `nπ` at finite radius keeps going past it.

use crate::numerics::{
    fit_two_basis, hermite_lookup, integrate_ivp, integrate_ivp_until, BisectError,
    FitError, OdeError, ToleranceSpec, Trajectory,
};
use std::f64::consts::PI;
use thiserror::Error;

/// Coordinate chart for the static ODE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// Metric radius r.
    R,
    /// Stretched coordinate x = arcsinh r.
    X,
}

/// Right-hand side of the static ODE as a first-order system
/// `(F, F')' = (F', F'')` in the selected chart.
pub fn ode_rhs(chart: Chart, pos: f64, f: f64, fp: f64) -> (f64, f64) {
    match chart {
        Chart::R => (fp, rhs_r(pos, f, fp)),
        Chart::X => (fp, rhs_x(pos, f, fp)),
    }
}

#[inline]
fn rhs_r(r: f64, f: f64, fp: f64) -> f64 {
    let w = r * r + 1.0;
    (2.0 * f).sin() / w - 2.0 * r * fp / w
}

#[inline]
fn rhs_x(x: f64, f: f64, fp: f64) -> f64 {
    (2.0 * f).sin() - x.tanh() * fp
}

/// Auxiliary quantity `Q(r) = (r²+1)(F')²/2 − sin²F` with `F' = dF/dr`.
pub fn aux_q(r: f64, f: f64, fp: f64) -> f64 {
    0.5 * (r * r + 1.0) * fp * fp - f.sin().powi(2)
}

/// The same quantity expressed through x-chart data: since
/// `dF/dr = (dF/dx)/cosh x` and `r²+1 = cosh²x`, it is
/// `(dF/dx)²/2 − sin²F`.
pub fn aux_q_x(f: f64, f_x: f64) -> f64 {
    0.5 * f_x * f_x - f.sin().powi(2)
}

/// Outcome of a single shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Undershoot,
    Overshoot,
    Inconclusive,
}

/// A classified shooting trajectory.
#[derive(Debug, Clone)]
pub struct ShotResult {
    pub alpha: f64,
    pub classification: Classification,
    /// Radius (in r) where the classification fired, or the final radius
    /// for inconclusive shots.
    pub exit_radius: f64,
    /// Field value and x-derivative at exit.
    pub f_exit: f64,
    pub fx_exit: f64,
    /// True when the classification came from the end-of-range heuristic
    /// rather than an actual trichotomy event.
    pub low_confidence: bool,
    /// r-chart leg of the trajectory (r from 0 to the chart switch).
    pub leg_r: Trajectory,
    /// x-chart leg (state is (F, dF/dx)).
    pub leg_x: Trajectory,
}

#[derive(Debug, Error)]
pub enum HarmonicError {
    #[error("shooting requires n >= 1 and alpha > 0 (got n = {n}, alpha = {alpha})")]
    BadShotParams { n: u32, alpha: f64 },
    #[error("undecidable shot at alpha = {alpha}; increase R_max beyond x = {x_max}")]
    Undecidable { alpha: f64, x_max: f64 },
    #[error("could not bracket alpha* for n = {0}")]
    BracketFailure(u32),
    #[error("uniqueness probe failed: alpha* spread {spread:e} exceeds {allowed:e}")]
    UniquenessFailed { spread: f64, allowed: f64 },
    #[error("Picard iteration not contracting (ratio {ratio}); x_start too small")]
    NotContracting { ratio: f64 },
    #[error("fit window error: {0}")]
    Fit(#[from] FitError),
    #[error("bisection error: {0}")]
    Bisect(#[from] BisectError),
    #[error("integration error: {0}")]
    Ode(#[from] OdeError),
}

/// Radius where integration switches from the r-chart to the x-chart.
const CHART_SWITCH_R: f64 = 10.0;
/// Default x-chart range; escalated ×2 on inconclusive shots.
pub const DEFAULT_X_MAX: f64 = 12.0;
/// Hard cap for escalation.
const X_MAX_CAP: f64 = 49.0;

/// Integrates a shot from `(F, F')(0) = (nπ/2, alpha)` and classifies it.
///
/// The r-chart is used for `r ≤ 10` and the x-chart beyond; `x_max`
/// bounds the x-chart leg. Overshoot fires when `F ≥ nπ`; undershoot
/// when the auxiliary quantity turns negative while `F < nπ`.
pub fn classify_shot(n: u32, alpha: f64, x_max: f64) -> Result<ShotResult, HarmonicError> {
    classify_shot_tol(n, alpha, x_max, &ToleranceSpec::default())
}

pub fn classify_shot_tol(
    n: u32,
    alpha: f64,
    x_max: f64,
    tol: &ToleranceSpec,
) -> Result<ShotResult, HarmonicError> {
    if n < 1 || !(alpha > 0.0) {
        return Err(HarmonicError::BadShotParams { n, alpha });
    }
    let target = n as f64 * PI;
    let y0 = [0.5 * target, alpha];

    let over = |f: f64| f >= target;
    let under_r = |r: f64, f: f64, fp: f64| f < target && aux_q(r, f, fp) < 0.0;
    let under_x = |f: f64, fx: f64| f < target && aux_q_x(f, fx) < 0.0;

    // r-chart leg.
    let mut rhs = |r: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = rhs_r(r, y[0], y[1]);
    };
    let leg_r = integrate_ivp_until(&mut rhs, &y0, (0.0, CHART_SWITCH_R), tol, |r, y| {
        over(y[0]) || under_r(r, y[0], y[1])
    })?;
    let end = leg_r.end_state().to_vec();
    let r_end = leg_r.end_time();
    let event_r = over(end[0]) || under_r(r_end, end[0], end[1]);
    if event_r || r_end < CHART_SWITCH_R {
        let class = if over(end[0]) { Classification::Overshoot } else { Classification::Undershoot };
        let x_end = r_end.asinh();
        let fx = end[1] * x_end.cosh();
        let leg_x = trivial_leg(x_end, end[0], fx);
        return Ok(ShotResult {
            alpha,
            classification: class,
            exit_radius: r_end,
            f_exit: end[0],
            fx_exit: fx,
            low_confidence: false,
            leg_r,
            leg_x,
        });
    }

    // x-chart leg: state (F, dF/dx) with dF/dx = cosh(x) dF/dr.
    let x0 = CHART_SWITCH_R.asinh();
    let yx0 = [end[0], end[1] * x0.cosh()];
    let mut rhs_xc = |x: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = rhs_x(x, y[0], y[1]);
    };
    let leg_x = integrate_ivp_until(&mut rhs_xc, &yx0, (x0, x_max), tol, |_, y| {
        over(y[0]) || under_x(y[0], y[1])
    })?;
    let endx = leg_x.end_state().to_vec();
    let x_end = leg_x.end_time();
    let r_exit = x_end.sinh();
    let classification = if over(endx[0]) {
        Classification::Overshoot
    } else if under_x(endx[0], endx[1]) {
        Classification::Undershoot
    } else {
        Classification::Inconclusive
    };
    Ok(ShotResult {
        alpha,
        classification,
        exit_radius: r_exit,
        f_exit: endx[0],
        fx_exit: endx[1],
        low_confidence: false,
        leg_r,
        leg_x,
    })
}

fn trivial_leg(t: f64, f: f64, fx: f64) -> Trajectory {
    // A one-point x-chart leg for shots that never left the r-chart.
    let tol = ToleranceSpec::default();
    integrate_ivp(
        |x, y, dy| {
            dy[0] = y[1];
            dy[1] = rhs_x(x, y[0], y[1]);
        },
        &[f, fx],
        (t, t),
        &tol,
    )
    .expect("zero-width integration cannot fail")
}

/// Classification with R_max escalation and the end-of-range heuristic
/// of last resort.
fn classify_escalating(
    n: u32,
    alpha: f64,
    x_max0: f64,
    tol: &ToleranceSpec,
) -> Result<ShotResult, HarmonicError> {
    let mut x_max = x_max0;
    loop {
        let mut shot = classify_shot_tol(n, alpha, x_max, tol)?;
        if shot.classification != Classification::Inconclusive {
            return Ok(shot);
        }
        if 2.0 * x_max <= X_MAX_CAP {
            x_max *= 2.0;
            continue;
        }
        // Heuristic: sign of F(x_max) − nπ + Q decides, flagged low-confidence.
        let target = n as f64 * PI;
        let score = shot.f_exit - target + aux_q_x(shot.f_exit, shot.fx_exit);
        shot.classification =
            if score > 0.0 { Classification::Overshoot } else { Classification::Undershoot };
        shot.low_confidence = true;
        return Ok(shot);
    }
}

/// A computed harmonic map `Q_n`, tabulated in the x-chart on `x ≥ 0`
/// and extended to the whole line by the reflection symmetry
/// `Q_n(−r) = nπ − Q_n(r)` and by the fitted `nπ − a r^{-2} − b r^{-4}`
/// asymptote beyond the table.
#[derive(Debug, Clone)]
pub struct HarmonicMap {
    pub degree: u32,
    pub alpha_star: f64,
    /// Uniform x-grid of the table (x ≥ 0).
    pub xs: Vec<f64>,
    /// F(x) on the table.
    pub f: Vec<f64>,
    /// dF/dx on the table.
    pub fx: Vec<f64>,
    /// Coefficient of r^{-2} in nπ − Q_n(r).
    pub alpha_n: f64,
    /// Coefficient of r^{-4} in the same fit.
    pub beta_n: f64,
    /// Sup of the x-chart ODE residual of the table by 4th-order differences.
    pub residual: f64,
    /// Sup over |x| ≤ 6 of |F(−x)+F(x)−nπ| from an independent
    /// negative-side integration.
    pub symmetry_defect: f64,
    /// Bracket width at which bisection stopped.
    pub width_tol: f64,
}

impl HarmonicMap {
    /// The zero map (degree 0).
    pub fn zero() -> Self {
        let xs: Vec<f64> = (0..=4).map(|i| i as f64).collect();
        let n = xs.len();
        Self {
            degree: 0,
            alpha_star: 0.0,
            xs,
            f: vec![0.0; n],
            fx: vec![0.0; n],
            alpha_n: 0.0,
            beta_n: 0.0,
            residual: 0.0,
            symmetry_defect: 0.0,
            width_tol: 0.0,
        }
    }

    /// Largest tabulated radius.
    pub fn r_table_max(&self) -> f64 {
        self.xs.last().copied().unwrap_or(0.0).sinh()
    }

    /// `(Q_n(r), Q_n'(r))` anywhere on the line. Uses the table for
    /// `|r| ≤ r_table_max`, the fitted asymptote beyond, and the
    /// reflection symmetry for `r < 0`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        if self.degree == 0 {
            return (0.0, 0.0);
        }
        let target = self.degree as f64 * PI;
        if r < 0.0 {
            let (q, qp) = self.eval(-r);
            return (target - q, qp);
        }
        let x_max = *self.xs.last().unwrap();
        let x = r.asinh();
        if x <= x_max {
            let (f, f_x) = self.quintic_lookup(x);
            // dF/dr = (dF/dx)/cosh x, cosh(arcsinh r) = sqrt(r²+1)
            (f, f_x / (r * r + 1.0).sqrt())
        } else {
            let r2 = r * r;
            let q = target - self.alpha_n / r2 - self.beta_n / (r2 * r2);
            let qp = 2.0 * self.alpha_n / (r2 * r) + 4.0 * self.beta_n / (r2 * r2 * r);
            (q, qp)
        }
    }

    /// `(Q_n, Q_n')` at the given radii by fresh node-to-node integration
    /// of the static equation from the stored shooting slope, bypassing
    /// table interpolation. Use this where samples feed finite-difference
    /// stencils: interpolation noise (≈1e−10) is amplified by 1/h² there,
    /// while re-integrated samples carry integrator accuracy (≈1e−12).
    ///
    /// Radii may be in any order; values for `|r| > sinh(x_max)` are
    /// capped at the table edge, so keep requests within the table.
    pub fn tabulate(&self, rs: &[f64]) -> Result<(Vec<f64>, Vec<f64>), HarmonicError> {
        if self.degree == 0 {
            return Ok((vec![0.0; rs.len()], vec![0.0; rs.len()]));
        }
        let target = self.degree as f64 * PI;
        // integrate once through the sorted distinct |x| values
        let mut order: Vec<usize> = (0..rs.len()).collect();
        order.sort_by(|&a, &b| rs[a].abs().partial_cmp(&rs[b].abs()).unwrap());
        let mut xs = Vec::with_capacity(rs.len() + 1);
        xs.push(0.0);
        for &i in &order {
            let x = rs[i].abs().asinh();
            if x > *xs.last().unwrap() + 1e-14 {
                xs.push(x);
            }
        }
        let states = tabulate_x([0.5 * target, self.alpha_star], &xs, &ToleranceSpec::tight(1e-13))
            .map_err(HarmonicError::Ode)?;
        let mut q = vec![0.0; rs.len()];
        let mut qp = vec![0.0; rs.len()];
        for &i in &order {
            let x = rs[i].abs().asinh();
            // xs is sorted; find the matching node
            let k = xs
                .binary_search_by(|v| v.partial_cmp(&x).unwrap())
                .unwrap_or_else(|k| if k == 0 { 0 } else { k - 1 });
            let (f, f_x) = (states[k][0], states[k][1]);
            let dr = f_x / (rs[i] * rs[i] + 1.0).sqrt();
            if rs[i] < 0.0 {
                q[i] = target - f;
                qp[i] = dr;
            } else {
                q[i] = f;
                qp[i] = dr;
            }
        }
        Ok((q, qp))
    }

    /// Quintic Hermite interpolation of `(F, F_x)` in the x-chart. Second
    /// derivatives at the nodes come from the ODE itself, which makes the
    /// interpolant C² across nodes: a merely C¹ table would leak a slow
    /// polynomial tail into the distorted Fourier transform of anything
    /// built from this potential.
    fn quintic_lookup(&self, x: f64) -> (f64, f64) {
        let h = self.xs[1] - self.xs[0];
        let i = (((x - self.xs[0]) / h) as usize).min(self.xs.len() - 2);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let s = ((x - x0) / h).clamp(0.0, 1.0);
        let (f0, f1) = (self.f[i], self.f[i + 1]);
        let (d0, d1) = (self.fx[i], self.fx[i + 1]);
        let (a0, a1) = (rhs_x(x0, f0, d0), rhs_x(x1, f1, d1));
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s * s);
        let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
        let h3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h5 = 0.5 * (s3 - 2.0 * s4 + s5);
        let val = f0 * h0 + h * d0 * h1 + h * h * a0 * h2 + f1 * h3 + h * d1 * h4
            + h * h * a1 * h5;
        let g0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
        let g1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
        let g2 = 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4);
        let g3 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
        let g4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
        let g5 = 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4);
        let der = (f0 * g0 + h * d0 * g1 + h * h * a0 * g2 + f1 * g3 + h * d1 * g4
            + h * h * a1 * g5)
            / h;
        (val, der)
    }

    /// Value only.
    pub fn q(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    /// Derivative dQ/dr only.
    pub fn qp(&self, r: f64) -> f64 {
        self.eval(r).1
    }
}

/// Shooting parameters; the defaults satisfy every acceptance tolerance.
#[derive(Debug, Clone, Copy)]
pub struct ShootConfig {
    /// Final bracket width, relative to max(1, alpha).
    pub width_tol: f64,
    pub tol: ToleranceSpec,
    pub x_max: f64,
    /// Table resolution in x.
    pub table_dx: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            width_tol: 1e-12,
            tol: ToleranceSpec::default(),
            x_max: DEFAULT_X_MAX,
            table_dx: 0.0025,
        }
    }
}

impl ShootConfig {
    /// Tight settings used where the asymptotic coefficient accuracy
    /// matters (prescribed-asymptotics comparison).
    pub fn precise() -> Self {
        Self { width_tol: 1e-15, tol: ToleranceSpec::tight(1e-12), ..Self::default() }
    }
}

/// Computes `Q_n` by bracketing and bisecting the shooting slope.
pub fn shoot_harmonic(n: u32, cfg: &ShootConfig) -> Result<HarmonicMap, HarmonicError> {
    if n == 0 {
        return Ok(HarmonicMap::zero());
    }
    let (lo0, hi0) = bracket_alpha(n, cfg)?;
    shoot_harmonic_bracketed(n, (lo0, hi0), cfg)
}

/// Doubling search for an (undershoot, overshoot) bracket.
fn bracket_alpha(n: u32, cfg: &ShootConfig) -> Result<(f64, f64), HarmonicError> {
    let mut lo = if n % 2 == 1 { 1.0 } else { 0.5 };
    let mut tries = 0;
    while classify_escalating(n, lo, cfg.x_max, &cfg.tol)?.classification
        != Classification::Undershoot
    {
        lo *= 0.5;
        tries += 1;
        if tries > 60 {
            return Err(HarmonicError::BracketFailure(n));
        }
    }
    let mut hi = (2.0 * lo).max(2.0);
    tries = 0;
    while classify_escalating(n, hi, cfg.x_max, &cfg.tol)?.classification
        != Classification::Overshoot
    {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(HarmonicError::BracketFailure(n));
        }
    }
    Ok((lo, hi))
}

/// Bisects alpha* inside a given (undershoot, overshoot) bracket and
/// assembles the map.
pub fn shoot_harmonic_bracketed(
    n: u32,
    bracket: (f64, f64),
    cfg: &ShootConfig,
) -> Result<HarmonicMap, HarmonicError> {
    let (mut lo, mut hi) = bracket;
    let width_tol = cfg.width_tol * lo.abs().max(hi.abs()).max(1.0);
    let check = |alpha: f64| classify_escalating(n, alpha, cfg.x_max, &cfg.tol);
    if check(lo)?.classification != Classification::Undershoot
        || check(hi)?.classification != Classification::Overshoot
    {
        return Err(HarmonicError::BracketFailure(n));
    }
    // Bisection that never terminates on a low-confidence shot: a
    // heuristic classification keeps the loop going until either a real
    // event decides or f64 resolution is reached.
    let mut last_confident_width = hi - lo;
    while hi - lo > width_tol || last_confident_width > 10.0 * width_tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let shot = check(mid)?;
        if !shot.low_confidence {
            last_confident_width = hi - lo;
        }
        match shot.classification {
            Classification::Undershoot => lo = mid,
            Classification::Overshoot => hi = mid,
            Classification::Inconclusive => unreachable!("classify_escalating always decides"),
        }
    }
    let alpha_star = 0.5 * (lo + hi);
    assemble_map(n, alpha_star, hi - lo, cfg)
}

/// Integrates the x-chart static ODE through a list of nodes, restarting
/// at every node so table values carry integrator accuracy rather than
/// dense-interpolation accuracy.
fn tabulate_x(y0: [f64; 2], nodes: &[f64], tol: &ToleranceSpec) -> Result<Vec<[f64; 2]>, OdeError> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut y = y0;
    out.push(y);
    for w in nodes.windows(2) {
        let traj = integrate_ivp(
            |x, s, ds| {
                ds[0] = s[1];
                ds[1] = rhs_x(x, s[0], s[1]);
            },
            &y,
            (w[0], w[1]),
            tol,
        )?;
        let e = traj.end_state();
        y = [e[0], e[1]];
        out.push(y);
    }
    Ok(out)
}

fn assemble_map(
    n: u32,
    alpha_star: f64,
    final_width: f64,
    cfg: &ShootConfig,
) -> Result<HarmonicMap, HarmonicError> {
    let target = n as f64 * PI;

    // Uniform x-table, filled by node-to-node integration. Near the
    // throat the x- and r-charts agree well enough that the x-chart is
    // used throughout for tabulation (it is smooth on the whole line).
    let n_nodes = (cfg.x_max / cfg.table_dx).round() as usize + 1;
    let xs: Vec<f64> = (0..n_nodes).map(|i| (i as f64 * cfg.table_dx).min(cfg.x_max)).collect();
    let states = tabulate_x([0.5 * target, alpha_star], &xs, &cfg.tol)?;
    let f: Vec<f64> = states.iter().map(|s| s[0]).collect();
    let fx: Vec<f64> = states.iter().map(|s| s[1]).collect();

    // Asymptotic fit nπ − F = a r^{-2} + b r^{-4} over the default window.
    let (alpha_n, beta_n, _res) = fit_asymptote(&xs, &f, target, (50.0, 400.0))?;

    // ODE residual by 4th-order central differences on the uniform table.
    let h = cfg.table_dx;
    let mut residual = 0.0f64;
    for i in 2..xs.len() - 2 {
        let fpp = (-f[i + 2] + 16.0 * f[i + 1] - 30.0 * f[i] + 16.0 * f[i - 1] - f[i - 2])
            / (12.0 * h * h);
        let fp = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h);
        let r = fpp + xs[i].tanh() * fp - (2.0 * f[i]).sin();
        residual = residual.max(r.abs());
    }

    // Independent symmetry audit on |x| ≤ 6: integrate to negative x and
    // compare against the reflection identity F(−x) + F(x) = nπ.
    let neg_count = xs.iter().take_while(|&&x| x <= 6.0).count();
    let neg_nodes: Vec<f64> = xs[..neg_count].iter().map(|&x| -x).collect();
    let neg_states = tabulate_x([0.5 * target, alpha_star], &neg_nodes, &cfg.tol)?;
    let mut symmetry_defect = 0.0f64;
    for i in 0..neg_count {
        symmetry_defect = symmetry_defect.max((neg_states[i][0] + f[i] - target).abs());
    }

    Ok(HarmonicMap {
        degree: n,
        alpha_star,
        xs,
        f,
        fx,
        alpha_n,
        beta_n,
        residual,
        symmetry_defect,
        width_tol: final_width,
    })
}

fn fit_asymptote(
    xs: &[f64],
    f: &[f64],
    target: f64,
    window: (f64, f64),
) -> Result<(f64, f64, f64), HarmonicError> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(f)
        .filter_map(|(&x, &fv)| {
            let r = x.sinh();
            (r >= window.0 && r <= window.1).then_some((r, target - fv))
        })
        .collect();
    if pts.len() < 8 {
        return Err(FitError::InsufficientData(pts.len()).into());
    }
    Ok(fit_two_basis(&pts, |r| r.powi(-2), |r| r.powi(-4))?)
}

/// Refits the asymptotic coefficient of a computed map over an explicit
/// window `[R1, R2]` in r. Returns `(alpha_n, rms_residual)`.
pub fn extract_alpha_n(
    map: &HarmonicMap,
    window: (f64, f64),
) -> Result<(f64, f64), HarmonicError> {
    let target = map.degree as f64 * PI;
    let (a, _b, res) = fit_asymptote(&map.xs, &map.f, target, window)?;
    Ok((a, res))
}

/// Prescribed-asymptotics solution of Prop-type: the unique solution
/// with `F(r) = kπ + α r^{-2} + O(r^{-4})`, built through the substitution
/// `G = e^{x/2}(F − kπ)` and the variation-of-constants fixed point with
/// fundamental system `G₁ = e^{−3x/2}`, `G₂ = e^{3x/2}` (Wronskian −3).
///
/// `alpha` is the coefficient of `r^{-2}`; in the x-chart the same
/// solution reads `kπ + 4α e^{−2x} + O(e^{−4x})` because
/// `r^{-2} = 4e^{−2x}(1 + O(e^{−2x}))`.
#[derive(Debug, Clone)]
pub struct PrescribedSolution {
    pub k: u32,
    pub alpha: f64,
    pub x_start: f64,
    /// Uniform x-grid of the constructed (and continued) solution.
    pub xs: Vec<f64>,
    /// F values on `xs`.
    pub f: Vec<f64>,
    /// dF/dx on `xs`.
    pub fx: Vec<f64>,
    /// Successive-difference contraction ratios of the Picard iteration.
    pub contraction_ratios: Vec<f64>,
    pub iterations: usize,
}

impl PrescribedSolution {
    /// `(F, dF/dx)` by table interpolation.
    pub fn eval_x(&self, x: f64) -> (f64, f64) {
        hermite_lookup(&self.xs, &self.f, &self.fx, x)
    }
}

/// Builds the prescribed-asymptotics solution on `[x_start, ∞)`
/// (truncated far out) by Picard iteration and continues it down to
/// `x_min` by direct ODE integration.
pub fn solve_prescribed(
    k: u32,
    alpha: f64,
    x_start: f64,
    x_min: f64,
) -> Result<PrescribedSolution, HarmonicError> {
    let a_x = 4.0 * alpha; // e^{-2x} coefficient
    let kpi = k as f64 * PI;
    let h = 5e-4;
    let x_end = x_start + 14.0;
    let m = ((x_end - x_start) / h).round() as usize + 1;
    let xs_c: Vec<f64> = (0..m).map(|i| x_start + i as f64 * h).collect();

    let g1: Vec<f64> = xs_c.iter().map(|&x| (-1.5 * x).exp()).collect();
    let g2: Vec<f64> = xs_c.iter().map(|&x| (1.5 * x).exp()).collect();

    let mut g: Vec<f64> = g1.iter().map(|&v| a_x * v).collect();
    let mut gp: Vec<f64> = g1.iter().map(|&v| -1.5 * a_x * v).collect();
    let mut ratios = Vec::new();
    let mut prev_diff = f64::INFINITY;
    let mut iterations = 0;

    let nonlin = |x: f64, g: f64, gp: f64| -> f64 {
        let e = (-0.5 * x).exp();
        let ei = (0.5 * x).exp();
        ei * ((2.0 * e * g).sin() - 2.0 * e * g) + (1.0 - x.tanh()) * (gp - 0.5 * g)
    };

    let scale = a_x.abs().max(1.0);
    for it in 0..60 {
        iterations = it + 1;
        // N on the grid, then suffix integrals of G1·N and G2·N.
        let nvals: Vec<f64> =
            xs_c.iter().zip(g.iter().zip(&gp)).map(|(&x, (&gv, &gpv))| nonlin(x, gv, gpv)).collect();
        let mut i1 = vec![0.0f64; m]; // ∫_x^∞ G1 N
        let mut i2 = vec![0.0f64; m]; // ∫_x^∞ G2 N
        for i in (0..m - 1).rev() {
            i1[i] = i1[i + 1] + 0.5 * h * (g1[i] * nvals[i] + g1[i + 1] * nvals[i + 1]);
            i2[i] = i2[i + 1] + 0.5 * h * (g2[i] * nvals[i] + g2[i + 1] * nvals[i + 1]);
        }
        let mut diff = 0.0f64;
        for i in 0..m {
            let gn = a_x * g1[i] + (g1[i] * i2[i] - g2[i] * i1[i]) / 3.0;
            let gpn = -1.5 * a_x * g1[i] + (-1.5 * g1[i] * i2[i] - 1.5 * g2[i] * i1[i]) / 3.0;
            diff = diff.max((gn - g[i]).abs());
            g[i] = gn;
            gp[i] = gpn;
        }
        if it > 0 && prev_diff > 0.0 {
            let ratio = diff / prev_diff;
            ratios.push(ratio);
            if ratio > 0.5 && diff > 1e-13 * scale {
                return Err(HarmonicError::NotContracting { ratio });
            }
        }
        if diff < 1e-15 * scale {
            break;
        }
        prev_diff = diff;
    }

    // Convert the constructed piece to (F, F_x).
    let f_of = |i: usize| kpi + (-0.5 * xs_c[i]).exp() * g[i];
    let fx_of = |i: usize| (-0.5 * xs_c[i]).exp() * (gp[i] - 0.5 * g[i]);

    // Continue to the left by ODE integration from x_start.
    let tol = ToleranceSpec::tight(1e-12);
    let mut xs = Vec::new();
    let mut f = Vec::new();
    let mut fx = Vec::new();
    if x_min < x_start {
        let left = integrate_ivp(
            |x, y, dy| {
                dy[0] = y[1];
                dy[1] = rhs_x(x, y[0], y[1]);
            },
            &[f_of(0), fx_of(0)],
            (x_start, x_min),
            &tol,
        )?;
        let hl = h * 4.0;
        let nl = ((x_start - x_min) / hl).ceil() as usize;
        let mut buf = [0.0f64; 2];
        for i in 0..nl {
            let x = x_min + i as f64 * hl;
            left.sample_into(x, &mut buf);
            xs.push(x);
            f.push(buf[0]);
            fx.push(buf[1]);
        }
    }
    for i in 0..m {
        xs.push(xs_c[i]);
        f.push(f_of(i));
        fx.push(fx_of(i));
    }

    Ok(PrescribedSolution {
        k,
        alpha,
        x_start,
        xs,
        f,
        fx,
        contraction_ratios: ratios,
        iterations,
    })
}

/// Report of the uniqueness probe: alpha* from several disjoint initial
/// brackets plus the phase-plane monotonicity check `dF/dx > 0`.
#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub n: u32,
    pub alpha_stars: Vec<f64>,
    pub spread: f64,
    /// Minimum of dF/dx along the connecting orbit for x ∈ [0, 10].
    pub min_fx: f64,
}

/// Runs the shooting construction from three disjoint initial brackets
/// and checks that all agree on alpha*; also verifies the strict
/// monotonicity of the connecting orbit.
pub fn uniqueness_probe(n: u32, cfg: &ShootConfig) -> Result<UniquenessReport, HarmonicError> {
    if n == 0 {
        return Ok(UniquenessReport { n, alpha_stars: vec![0.0], spread: 0.0, min_fx: 0.0 });
    }
    let first = shoot_harmonic(n, cfg)?;
    let a = first.alpha_star;
    let brackets = [(0.55 * a, 1.9 * a), (0.85 * a, 1.22 * a), (a - 0.013, a + 0.029)];
    let mut stars = vec![a];
    for &b in &brackets {
        let map = shoot_harmonic_bracketed(n, b, cfg)?;
        stars.push(map.alpha_star);
    }
    let lo = stars.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = stars.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    let allowed = 10.0 * cfg.width_tol * a.max(1.0);
    if spread > allowed {
        return Err(HarmonicError::UniquenessFailed { spread, allowed });
    }
    let mut min_fx = f64::INFINITY;
    for (&x, &fxv) in first.xs.iter().zip(&first.fx) {
        if x <= 10.0 {
            min_fx = min_fx.min(fxv);
        }
    }
    Ok(UniquenessReport { n, alpha_stars: stars, spread, min_fx })
}

/// Verifies `dQ/dr = −r (F')²` along a trajectory table by comparing
/// aux-Q differences against the quadrature of the right-hand side.
/// Returns the sup mismatch. Used by tests; exposed for the CLI report.
pub fn aux_q_consistency(map: &HarmonicMap, r_max: f64) -> f64 {
    let mut worst = 0.0f64;
    let m = 400;
    let h = r_max / m as f64;
    let q0 = {
        let (f, fp) = map.eval(0.0);
        aux_q(0.0, f, fp)
    };
    let mut acc = 0.0;
    for i in 1..=m {
        let r = i as f64 * h;
        // Simpson increment of −r (F')² over [r−h, r]
        let fp0 = map.eval(r - h).1;
        let fpm = map.eval(r - 0.5 * h).1;
        let fp1 = map.eval(r).1;
        acc -= h / 6.0
            * ((r - h) * fp0 * fp0 + 4.0 * (r - 0.5 * h) * fpm * fpm + r * fp1 * fp1);
        let (f, fp) = map.eval(r);
        let q = aux_q(r, f, fp);
        worst = worst.max(((q - q0) - acc).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_stationary_points() {
        // F ≡ kπ with F' = 0 is stationary in both charts
        for chart in [Chart::R, Chart::X] {
            let (df, dfp) = ode_rhs(chart, 1.3, 2.0 * PI, 0.0);
            assert_eq!(df, 0.0);
            assert!(dfp.abs() < 1e-15);
            // half-integer multiples of π are stationary too: sin 2F = 0
            let (_, dfp2) = ode_rhs(chart, 0.7, 1.5 * PI, 0.0);
            assert!(dfp2.abs() < 1e-12);
        }
        // direct evaluation at (r=0, F=π/2, F'=1): F'' = sin(π)/1 − 0 = 0
        let (_, dfp) = ode_rhs(Chart::R, 0.0, 0.5 * PI, 1.0);
        assert!(dfp.abs() < 1e-15);
    }

    #[test]
    fn aux_q_values() {
        assert!(aux_q(3.7, 2.0 * PI, 0.0).abs() < 1e-30);
        // odd degree at the throat: Q(0) = α²/2 − 1
        let alpha = 1.3;
        let q0 = aux_q(0.0, 1.5 * PI, alpha);
        assert!((q0 - (alpha * alpha / 2.0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn classify_small_alpha_odd_degree() {
        // n odd, alpha < √2: immediate undershoot (Q(0) < 0)
        let shot = classify_shot(1, 1.0, DEFAULT_X_MAX).unwrap();
        assert_eq!(shot.classification, Classification::Undershoot);
    }

    #[test]
    fn classify_large_alpha_overshoot() {
        let shot = classify_shot(1, 30.0, DEFAULT_X_MAX).unwrap();
        assert_eq!(shot.classification, Classification::Overshoot);
    }

    #[test]
    fn shoot_degree_zero_is_trivial() {
        let map = shoot_harmonic(0, &ShootConfig::default()).unwrap();
        assert_eq!(map.alpha_star, 0.0);
        assert_eq!(map.eval(5.0), (0.0, 0.0));
    }

    #[test]
    fn shoot_degree_one_basic() {
        let map = shoot_harmonic(1, &ShootConfig::default()).unwrap();
        assert!(map.alpha_star > 2.0f64.sqrt()); // undershoot below √2
        assert!((map.q(0.0) - 0.5 * PI).abs() < 1e-12);
        assert!(map.symmetry_defect < 1e-8);
        assert!(map.alpha_n > 0.0);
        // strict monotonicity on the table range
        assert!(map.xs.iter().zip(&map.fx).all(|(&x, &fx)| x > 11.0 || fx > 0.0));
        // approach to nπ from below
        assert!(map.q(300.0) < PI);
        assert!((map.q(300.0) - (PI - map.alpha_n / 300.0f64.powi(2))).abs() < 1e-7);
    }

    #[test]
    fn prescribed_zero_alpha_is_constant() {
        let sol = solve_prescribed(2, 0.0, 4.0, 0.0).unwrap();
        for (&fv, &fxv) in sol.f.iter().zip(&sol.fx) {
            assert!((fv - 2.0 * PI).abs() < 1e-12);
            assert!(fxv.abs() < 1e-12);
        }
    }

    #[test]
    fn prescribed_contracts() {
        let sol = solve_prescribed(1, -0.8, 4.0, 2.0).unwrap();
        assert!(sol.contraction_ratios.iter().all(|&r| r < 0.5));
        // tail behaviour: F − kπ ≈ α r^{-2} at large x
        let x = 9.0;
        let (fv, _) = sol.eval_x(x);
        let r = x.sinh();
        assert!(((fv - PI) * r * r - (-0.8)).abs() < 0.05);
    }
}
