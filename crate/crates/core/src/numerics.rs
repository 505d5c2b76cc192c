//! Shared numerical kernels: adaptive ODE integration with dense output,
//! bracketed bisection, quadrature, interpolation, and power-law fitting.
//!
//! Everything here is a pure function over immutable inputs and safe to
//! call concurrently.

use thiserror::Error;

/// Coordinate chart for radial grids: the metric radius `r` or the
/// stretched coordinate `x = arcsinh r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    R,
    X,
}

/// Discretization of (a segment of) the line in `r` or `x` coordinates.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub coordinate: Coordinate,
    nodes: Vec<f64>,
    spacing: Option<f64>,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("grid nodes must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("declared spacing {spacing} inconsistent with nodes at index {index}")]
    BadSpacing { spacing: f64, index: usize },
}

impl RadialGrid {
    /// Uniform grid with `n` nodes on `[a, b]`.
    pub fn uniform(coordinate: Coordinate, a: f64, b: f64, n: usize) -> Result<Self, GridError> {
        if n < 3 {
            return Err(GridError::TooFewNodes(n));
        }
        if !(b > a) {
            return Err(GridError::NotIncreasing(0));
        }
        let h = (b - a) / (n - 1) as f64;
        let nodes = (0..n).map(|i| a + h * i as f64).collect();
        Ok(Self { coordinate, nodes, spacing: Some(h) })
    }

    /// Grid from explicit nodes; `spacing` is detected if uniform.
    pub fn from_nodes(coordinate: Coordinate, nodes: Vec<f64>) -> Result<Self, GridError> {
        if nodes.len() < 3 {
            return Err(GridError::TooFewNodes(nodes.len()));
        }
        for i in 1..nodes.len() {
            if !(nodes[i] > nodes[i - 1]) {
                return Err(GridError::NotIncreasing(i));
            }
        }
        let h = nodes[1] - nodes[0];
        let uniform = nodes.windows(2).all(|w| ((w[1] - w[0]) - h).abs() < 1e-12 * h);
        Ok(Self { coordinate, nodes, spacing: uniform.then_some(h) })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least 3 nodes
    }

    /// Uniform spacing, if the grid is uniform.
    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    /// Uniform spacing or an error message for operations that require it.
    pub fn uniform_spacing(&self) -> Result<f64, GridError> {
        self.spacing.ok_or(GridError::BadSpacing { spacing: f64::NAN, index: 0 })
    }
}

/// Error control for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_steps: 10_000_000 }
    }
}

impl ToleranceSpec {
    pub fn tight(abs_tol: f64) -> Self {
        Self { abs_tol, rel_tol: abs_tol, ..Self::default() }
    }
}

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("integration stalled: {steps} steps without reaching span end (t = {t})")]
    Stalled { t: f64, steps: usize },
    #[error("blow-up detected at t = {t}; last good state stored")]
    BlowUp { t: f64, last_good: Vec<f64> },
    #[error("tolerances must be positive")]
    BadTolerance,
}

/// Dense trajectory from [`integrate_ivp`]: states and derivatives at the
/// accepted step endpoints, queryable anywhere on the span by cubic
/// Hermite interpolation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    ts: Vec<f64>,
    ys: Vec<f64>, // row-major [step][component]
    dys: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn derivative(&self, i: usize) -> &[f64] {
        &self.dys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn steps(&self) -> usize {
        self.ts.len()
    }

    pub fn end_time(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn end_state(&self) -> &[f64] {
        self.state(self.ts.len() - 1)
    }

    fn forward(&self) -> bool {
        self.ts[self.ts.len() - 1] >= self.ts[0]
    }

    /// Index of the step interval containing `t`.
    fn locate(&self, t: f64) -> usize {
        let n = self.ts.len();
        let fwd = self.forward();
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let before = if fwd { self.ts[mid] <= t } else { self.ts[mid] >= t };
            if before {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Cubic Hermite interpolation of the state at `t` (clamped to the span).
    pub fn sample(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(t, &mut out);
        out
    }

    pub fn sample_into(&self, t: f64, out: &mut [f64]) {
        let i = self.locate(t);
        let (t0, t1) = (self.ts[i], self.ts[i + 1]);
        let h = t1 - t0;
        let s = if h == 0.0 { 0.0 } else { ((t - t0) / h).clamp(0.0, 1.0) };
        let (y0, y1) = (self.state(i), self.state(i + 1));
        let (d0, d1) = (self.derivative(i), self.derivative(i + 1));
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        for k in 0..self.dim {
            out[k] = h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k];
        }
    }
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive embedded 4(5) integration of `y' = rhs(t, y)` over `span`
/// (forward or backward), returning a dense trajectory.
///
/// Local error per step is controlled against
/// `abs_tol + rel_tol * |y|` componentwise.
pub fn integrate_ivp<F>(
    mut rhs: F,
    y0: &[f64],
    span: (f64, f64),
    tol: &ToleranceSpec,
) -> Result<Trajectory, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_ivp_until(&mut rhs, y0, span, tol, |_, _| false)
}

/// Like [`integrate_ivp`], but stops early once `stop(t, y)` is true at an
/// accepted step endpoint. The trajectory then ends at that step.
pub fn integrate_ivp_until<F, S>(
    rhs: &mut F,
    y0: &[f64],
    span: (f64, f64),
    tol: &ToleranceSpec,
    mut stop: S,
) -> Result<Trajectory, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    if !(tol.abs_tol > 0.0 && tol.rel_tol > 0.0) {
        return Err(OdeError::BadTolerance);
    }
    let dim = y0.len();
    let (t0, t1) = span;
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let total = (t1 - t0).abs();

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0f64; dim]; 7];
    let mut ytmp = vec![0.0f64; dim];
    let mut ynew = vec![0.0f64; dim];

    rhs(t, &y, &mut k[0]);
    if !k[0].iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
        return Err(OdeError::BlowUp { t, last_good: y });
    }

    let mut traj = Trajectory {
        dim,
        ts: vec![t],
        ys: y.clone(),
        dys: k[0].clone(),
    };

    if total == 0.0 {
        return Ok(traj);
    }

    let mut h = (total * 1e-4).min(0.1).max(1e-12) * dir;
    let mut steps = 0usize;

    while (t - t1) * dir < 0.0 {
        if steps >= tol.max_steps {
            return Err(OdeError::Stalled { t, steps });
        }
        steps += 1;
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }

        // Stages (k[0] holds the FSAL derivative from the previous step).
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = DP_A[s][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                ytmp[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            rhs(t + DP_C[s] * h, &ytmp, &mut tail[0]);
        }

        let mut err = 0.0f64;
        let mut finite = true;
        for i in 0..dim {
            let mut y5 = 0.0;
            let mut y4 = 0.0;
            for s in 0..7 {
                y5 += DP_B5[s] * k[s][i];
                y4 += DP_B4[s] * k[s][i];
            }
            ynew[i] = y[i] + h * y5;
            let sc = tol.abs_tol + tol.rel_tol * y[i].abs().max(ynew[i].abs());
            let e = h * (y5 - y4) / sc;
            err += e * e;
            finite &= ynew[i].is_finite();
        }
        err = (err / dim as f64).sqrt();

        if !finite || !err.is_finite() {
            return Err(OdeError::BlowUp { t, last_good: y });
        }

        if err <= 1.0 {
            t += h;
            // k[6] is the derivative at the new point (FSAL property).
            k.swap(0, 6);
            y.copy_from_slice(&ynew);
            traj.ts.push(t);
            traj.ys.extend_from_slice(&y);
            traj.dys.extend_from_slice(&k[0]);
            if stop(t, &y) {
                break;
            }
        }

        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        let hmin = 1e-14 * (t.abs().max(1.0));
        if h.abs() < hmin {
            h = hmin * dir;
        }
    }

    Ok(traj)
}

#[derive(Debug, Error)]
pub enum BisectError {
    #[error("bracket not straddling: predicate must hold at the left endpoint and fail at the right")]
    NotStraddling,
    #[error("width tolerance must be positive")]
    BadTolerance,
}

/// Default bisection width tolerance for a bracket `(lo, hi)`.
pub fn default_width_tol(lo: f64, hi: f64) -> f64 {
    1e-12 * lo.abs().max(hi.abs()).max(1.0)
}

/// Bracketed bisection: `pred` must be true at `lo` and false at `hi`.
/// Returns the midpoint of the final bracket of width < `width_tol`.
pub fn bisect<P>(mut pred: P, bracket: (f64, f64), width_tol: f64) -> Result<f64, BisectError>
where
    P: FnMut(f64) -> bool,
{
    if !(width_tol > 0.0) {
        return Err(BisectError::BadTolerance);
    }
    let (mut lo, mut hi) = bracket;
    if !pred(lo) || pred(hi) {
        return Err(BisectError::NotStraddling);
    }
    while (hi - lo).abs() > width_tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break; // hit f64 resolution
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Result of a quadrature: value, error estimate, and a flag for
/// degenerate (zero-width) intervals.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub zero_width: bool,
}

/// Composite Simpson rule over uniformly spaced samples (order 4).
///
/// When the interval count is odd the last three intervals use the 3/8
/// rule. The error estimate compares against the stride-2 Simpson value
/// when the sample count allows it; it vanishes identically on
/// polynomials of degree ≤ 3.
pub fn quad_samples_uniform(ys: &[f64], h: f64) -> QuadResult {
    let n = ys.len();
    if n < 2 || h == 0.0 {
        return QuadResult { value: 0.0, error_estimate: 0.0, zero_width: true };
    }
    if n == 2 {
        // single interval: trapezoid, no better estimate available
        let value = 0.5 * h * (ys[0] + ys[1]);
        return QuadResult { value, error_estimate: f64::INFINITY, zero_width: false };
    }
    let value = simpson_uniform(ys, h);
    let intervals = n - 1;
    let error_estimate = if intervals % 4 == 0 {
        let coarse: Vec<f64> = ys.iter().step_by(2).copied().collect();
        let v2 = simpson_uniform(&coarse, 2.0 * h);
        (value - v2).abs() / 15.0
    } else {
        // fall back to comparing against the trapezoid rule (conservative)
        let trap = h * (ys.iter().sum::<f64>() - 0.5 * (ys[0] + ys[n - 1]));
        (value - trap).abs()
    };
    QuadResult { value, error_estimate, zero_width: false }
}

fn simpson_uniform(ys: &[f64], h: f64) -> f64 {
    let n = ys.len();
    debug_assert!(n >= 3);
    let intervals = n - 1;
    let (simpson_end, mut total) = if intervals % 2 == 0 {
        (n, 0.0)
    } else {
        // 3/8 rule on the last three intervals
        let m = n - 4;
        let tail = 3.0 * h / 8.0 * (ys[m] + 3.0 * ys[m + 1] + 3.0 * ys[m + 2] + ys[m + 3]);
        (n - 3, tail)
    };
    let mut s = ys[0] + ys[simpson_end - 1];
    for (i, &y) in ys.iter().enumerate().take(simpson_end - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * y } else { 2.0 * y };
    }
    total += s * h / 3.0;
    total
}

/// Adaptive Simpson quadrature of a callable on `[a, b]`.
pub fn quad_fn<F>(f: &F, a: f64, b: f64, tol: f64) -> QuadResult
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return QuadResult { value: 0.0, error_estimate: 0.0, zero_width: true };
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let (value, err) = adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 50);
    QuadResult { value, error_estimate: err, zero_width: false }
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        (left + right + delta / 15.0, delta.abs() / 15.0)
    } else {
        let (lv, le) = adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
        let (rv, re) = adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        (lv + rv, le + re)
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("insufficient data: {0} usable points (need at least 3)")]
    InsufficientData(usize),
    #[error("ill-conditioned fit window")]
    IllConditioned,
}

/// Power-law fit `y = prefactor * x^exponent` by least squares on log-log.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS of the log-space misfit.
    pub residual: f64,
    pub points_used: usize,
}

/// Fits `y = c * x^p` on the points with `window.0 <= x <= window.1`.
/// Points with `y` at or below the noise floor (100 × machine epsilon)
/// are discarded.
pub fn fit_power_law(points: &[(f64, f64)], window: (f64, f64)) -> Result<PowerLawFit, FitError> {
    let floor = 100.0 * f64::EPSILON;
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > floor && x >= window.0 && x <= window.1)
        .collect();
    if usable.len() < 3 {
        return Err(FitError::InsufficientData(usable.len()));
    }
    let n = usable.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &usable {
        let lx = x.ln();
        let ly = y.ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-14 * n * sxx.abs().max(1.0) {
        return Err(FitError::IllConditioned);
    }
    let exponent = (n * sxy - sx * sy) / det;
    let intercept = (sy - exponent * sx) / n;
    let mut ss = 0.0;
    for &(x, y) in &usable {
        let d = y.ln() - (intercept + exponent * x.ln());
        ss += d * d;
    }
    Ok(PowerLawFit {
        exponent,
        prefactor: intercept.exp(),
        residual: (ss / n).sqrt(),
        points_used: usable.len(),
    })
}

/// Least squares fit of `y ≈ a·f1(x) + b·f2(x)` via the normal equations.
/// Returns `(a, b, rms_residual)`.
pub fn fit_two_basis<F1, F2>(
    points: &[(f64, f64)],
    f1: F1,
    f2: F2,
) -> Result<(f64, f64, f64), FitError>
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    if points.len() < 2 {
        return Err(FitError::InsufficientData(points.len()));
    }
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let u = f1(x);
        let v = f2(x);
        a11 += u * u;
        a12 += u * v;
        a22 += v * v;
        b1 += u * y;
        b2 += v * y;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-14 * (a11 * a22).abs().max(f64::MIN_POSITIVE) {
        return Err(FitError::IllConditioned);
    }
    let a = (b1 * a22 - b2 * a12) / det;
    let b = (a11 * b2 - a12 * b1) / det;
    let mut ss = 0.0;
    for &(x, y) in points {
        let d = y - a * f1(x) - b * f2(x);
        ss += d * d;
    }
    Ok((a, b, (ss / points.len() as f64).sqrt()))
}

/// Cubic Hermite lookup in a table with known derivatives. `xs` must be
/// strictly increasing; `x` is clamped to the table range.
/// Returns the interpolated value and derivative.
pub fn hermite_lookup(xs: &[f64], ys: &[f64], dys: &[f64], x: f64) -> (f64, f64) {
    let n = xs.len();
    debug_assert!(n >= 2 && ys.len() == n && dys.len() == n);
    let x = x.clamp(xs[0], xs[n - 1]);
    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    };
    let h = xs[i + 1] - xs[i];
    let s = (x - xs[i]) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let val = h00 * ys[i] + h10 * h * dys[i] + h01 * ys[i + 1] + h11 * h * dys[i + 1];
    // derivative of the Hermite cubic
    let g00 = (6.0 * s2 - 6.0 * s) / h;
    let g10 = 3.0 * s2 - 4.0 * s + 1.0;
    let g01 = (-6.0 * s2 + 6.0 * s) / h;
    let g11 = 3.0 * s2 - 2.0 * s;
    let dval = g00 * ys[i] + g10 * dys[i] + g01 * ys[i + 1] + g11 * dys[i + 1];
    (val, dval)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let tol = ToleranceSpec::default();
        let traj = integrate_ivp(|_, y, dy| dy[0] = y[0], &[1.0], (0.0, 1.0), &tol).unwrap();
        assert!((traj.end_state()[0] - 1.0f64.exp()).abs() < 1e-9);
        // dense query in the middle (cubic interpolation, O(h_step^4))
        let mid = traj.sample(0.5)[0];
        assert!((mid - 0.5f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn constant_solution() {
        let tol = ToleranceSpec::default();
        let traj = integrate_ivp(|_, _, dy| dy[0] = 0.0, &[3.25], (0.0, 10.0), &tol).unwrap();
        for &t in &[0.0, 1.7, 4.2, 10.0] {
            assert!((traj.sample(t)[0] - 3.25).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_integration() {
        let tol = ToleranceSpec::default();
        let traj = integrate_ivp(|_, y, dy| dy[0] = y[0], &[1.0], (1.0, 0.0), &tol).unwrap();
        assert!((traj.end_state()[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn blow_up_reported() {
        let tol = ToleranceSpec { max_steps: 100_000, ..Default::default() };
        let res = integrate_ivp(|_, y, dy| dy[0] = y[0] * y[0], &[1.0], (0.0, 2.0), &tol);
        match res {
            Err(OdeError::BlowUp { t, .. }) => assert!(t <= 2.0),
            Err(OdeError::Stalled { .. }) => {} // acceptable: step collapse near t=1
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn bisect_sqrt2() {
        let root = bisect(|x| x * x < 2.0, (1.0, 2.0), 1e-10).unwrap();
        assert!((root - std::f64::consts::SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn bisect_bad_bracket() {
        assert!(matches!(
            bisect(|x| x < 0.0, (1.0, 2.0), 1e-10),
            Err(BisectError::NotStraddling)
        ));
    }

    #[test]
    fn quadrature_cubic_exact() {
        // Simpson is exact on cubics: both value and error estimate
        let n = 41;
        let h = 1.0 / (n - 1) as f64;
        let ys: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(3)).collect();
        let q = quad_samples_uniform(&ys, h);
        assert!((q.value - 0.25).abs() < 1e-14);
        assert!(q.error_estimate < 1e-14);
    }

    #[test]
    fn quadrature_x_squared() {
        let q = quad_fn(&|x: f64| x * x, 0.0, 1.0, 1e-13);
        assert!((q.value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_odd_symmetric() {
        let q = quad_fn(&|x: f64| x.powi(5) * (1.0 + x * x).cos(), -2.0, 2.0, 1e-12);
        assert!(q.value.abs() < 1e-10);
    }

    #[test]
    fn quadrature_zero_width() {
        let q = quad_fn(&|x: f64| x, 1.0, 1.0, 1e-12);
        assert!(q.zero_width);
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn power_law_exact() {
        let pts: Vec<(f64, f64)> = (1..50).map(|i| (i as f64, (i as f64).powi(4))).collect();
        let fit = fit_power_law(&pts, (1.0, 50.0)).unwrap();
        assert!((fit.exponent - 4.0).abs() < 1e-6);
    }

    #[test]
    fn power_law_negative_exponent() {
        let pts: Vec<(f64, f64)> =
            (1..40).map(|i| (i as f64, 5.0 * (i as f64).powf(-2.5))).collect();
        let fit = fit_power_law(&pts, (1.0, 40.0)).unwrap();
        assert!((fit.exponent + 2.5).abs() < 1e-8);
        assert!((fit.prefactor - 5.0).abs() < 1e-6);
    }

    #[test]
    fn power_law_insufficient() {
        let pts = [(1.0, 1.0), (2.0, 16.0)];
        assert!(matches!(
            fit_power_law(&pts, (0.5, 3.0)),
            Err(FitError::InsufficientData(_))
        ));
    }

    #[test]
    fn two_basis_exact_recovery() {
        let pts: Vec<(f64, f64)> = (10..60)
            .map(|i| {
                let x = i as f64;
                (x, 1.7 / (x * x) + 0.3 / (x * x * x * x))
            })
            .collect();
        let (a, b, res) = fit_two_basis(&pts, |x| x.powi(-2), |x| x.powi(-4)).unwrap();
        assert!((a - 1.7).abs() < 1e-10);
        assert!((b - 0.3).abs() < 1e-6);
        assert!(res < 1e-14);
    }

    #[test]
    fn grid_validation() {
        assert!(RadialGrid::uniform(Coordinate::R, 0.0, 1.0, 2).is_err());
        let g = RadialGrid::uniform(Coordinate::R, -1.0, 1.0, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g.spacing().unwrap() - 0.5).abs() < 1e-15);
        assert!(RadialGrid::from_nodes(Coordinate::X, vec![0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let f = |x: f64| x.powi(3) - 2.0 * x + 1.0;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let dys: Vec<f64> = xs.iter().map(|&x| df(x)).collect();
        let (v, d) = hermite_lookup(&xs, &ys, &dys, 1.23);
        assert!((v - f(1.23)).abs() < 1e-12);
        assert!((d - df(1.23)).abs() < 1e-11);
    }
}
