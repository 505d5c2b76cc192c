//! Metric weights, energies, weighted norms, and the change of variables
//! between the azimuth field ψ and the reduced field u = ⟨r⟩⁻¹(ψ − Q_n).
//!
//! Throughout, ⟨r⟩ = √(r²+1) is the wormhole area radius; the conserved
//! energy of the ψ-flow is
//!
//! ```text
//! E(ψ, ψ_t) = ½ ∫ [ψ_t² + ψ_r² + 2 sin²ψ/(r²+1)] (r²+1) dr,
//! ```
//!
//! and the u-form energy uses the linearized potential
//! `V(r) = ⟨r⟩⁻⁴ + 2⟨r⟩⁻²(cos 2Q_n − 1)` with the heavier weight
//! `(r²+1)² dr` of the 5-dimensional reduction.

use crate::harmonic::HarmonicMap;
use crate::numerics::{quad_samples_uniform, Coordinate, GridError, RadialGrid};
use thiserror::Error;

/// Which field the samples represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Azimuth angle ψ with limits (0, nπ).
    Psi,
    /// Reduced field u = ⟨r⟩⁻¹(ψ − Q_n).
    U,
    /// Solution of the linearized ψ-equation (radiation field).
    LinearPsi,
    /// Radial free wave in flat ℝ^{1+d}, sampled on r > 0.
    FlatRadial(u32),
}

/// A pair (field, time derivative) on a grid.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub grid: RadialGrid,
    pub field: Vec<f64>,
    pub velocity: Vec<f64>,
    pub formulation: Formulation,
    pub degree: u32,
    pub time: f64,
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("field/velocity length {got} does not match grid size {grid}")]
    LengthMismatch { got: usize, grid: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("operation requires formulation {expected:?}, state is {got:?}")]
    WrongFormulation { expected: Formulation, got: Formulation },
    #[error("operation requires a uniform grid in r")]
    NonUniformGrid,
    #[error("r0 = {0} outside the grid")]
    R0OutsideGrid(f64),
    #[error("grid error: {0}")]
    Grid(#[from] GridError),
}

impl FieldState {
    pub fn new(
        grid: RadialGrid,
        field: Vec<f64>,
        velocity: Vec<f64>,
        formulation: Formulation,
        degree: u32,
    ) -> Result<Self, GeometryError> {
        if field.len() != grid.len() {
            return Err(GeometryError::LengthMismatch { got: field.len(), grid: grid.len() });
        }
        if velocity.len() != grid.len() {
            return Err(GeometryError::LengthMismatch { got: velocity.len(), grid: grid.len() });
        }
        Ok(Self { grid, field, velocity, formulation, degree, time: 0.0 })
    }

    /// Zero state on a grid.
    pub fn zero(grid: RadialGrid, formulation: Formulation, degree: u32) -> Self {
        let n = grid.len();
        Self { grid, field: vec![0.0; n], velocity: vec![0.0; n], formulation, degree, time: 0.0 }
    }

    fn check_finite(&self) -> Result<(), GeometryError> {
        for (i, (&f, &v)) in self.field.iter().zip(&self.velocity).enumerate() {
            if !f.is_finite() || !v.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
        }
        Ok(())
    }

    /// Diagnostic: does a ψ-state attain its degree limits at the grid
    /// ends within the boundary tolerance 1e−3·π? Truncated domains
    /// never attain limits exactly, so this flags rather than errors.
    pub fn degree_consistent(&self) -> bool {
        if self.formulation != Formulation::Psi {
            return true;
        }
        let tol = 1e-3 * std::f64::consts::PI;
        let target = self.degree as f64 * std::f64::consts::PI;
        let lo = *self.field.first().unwrap();
        let hi = *self.field.last().unwrap();
        lo.abs() < tol && (hi - target).abs() < tol
    }
}

/// Weighted norm specification: `√∫_{r ≥ r0} (|∂_r f|² + |g|²) (r²+1)^k dr`
/// with `k = 1` (base energy space) or `k = 2` (5-dimensional reduction).
#[derive(Debug, Clone, Copy)]
pub struct NormSpec {
    /// Left endpoint; use `f64::NEG_INFINITY` for the whole grid.
    pub r0: f64,
    /// Weight exponent k in (r²+1)^k; the laboratory uses k ∈ {1, 2}.
    pub weight_exp: i32,
}

impl NormSpec {
    pub fn base(r0: f64) -> Self {
        Self { r0, weight_exp: 1 }
    }
    pub fn heavy(r0: f64) -> Self {
        Self { r0, weight_exp: 2 }
    }
}

/// First derivative on a uniform grid: centered 4th-order stencils in the
/// interior, one-sided 4th-order at the two points nearest each edge.
pub fn derivative4(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 5 {
        // too small for 4th order; fall back to 2nd-order differences
        for i in 0..n {
            out[i] = if i == 0 {
                (values[1] - values[0]) / h
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) / h
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            };
        }
        return out;
    }
    let c = 1.0 / (12.0 * h);
    out[0] = c * (-25.0 * values[0] + 48.0 * values[1] - 36.0 * values[2] + 16.0 * values[3]
        - 3.0 * values[4]);
    out[1] = c * (-3.0 * values[0] - 10.0 * values[1] + 18.0 * values[2] - 6.0 * values[3]
        + values[4]);
    for i in 2..n - 2 {
        out[i] = c * (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]);
    }
    out[n - 2] = c * (3.0 * values[n - 1] + 10.0 * values[n - 2] - 18.0 * values[n - 3]
        + 6.0 * values[n - 4]
        - values[n - 5]);
    out[n - 1] = c * (25.0 * values[n - 1] - 48.0 * values[n - 2] + 36.0 * values[n - 3]
        - 16.0 * values[n - 4]
        + 3.0 * values[n - 5]);
    out
}

/// Linearized potential of the u-formulation:
/// `V(r) = ⟨r⟩⁻⁴ + 2⟨r⟩⁻²(cos 2Q_n(r) − 1)`.
pub fn potential_v(map: &HarmonicMap, r: f64) -> f64 {
    let w = r * r + 1.0;
    let q = map.q(r);
    1.0 / (w * w) + 2.0 / w * ((2.0 * q).cos() - 1.0)
}

fn uniform_r_grid(state: &FieldState) -> Result<f64, GeometryError> {
    if state.grid.coordinate != Coordinate::R {
        return Err(GeometryError::NonUniformGrid);
    }
    state.grid.spacing().ok_or(GeometryError::NonUniformGrid)
}

/// Conserved ψ-energy over the grid.
pub fn energy_psi(state: &FieldState) -> Result<f64, GeometryError> {
    if !matches!(state.formulation, Formulation::Psi | Formulation::LinearPsi) {
        return Err(GeometryError::WrongFormulation {
            expected: Formulation::Psi,
            got: state.formulation,
        });
    }
    state.check_finite()?;
    let h = uniform_r_grid(state)?;
    let dpsi = derivative4(&state.field, h);
    let density: Vec<f64> = state
        .grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let w = r * r + 1.0;
            // The linear flow conserves the quadratic functional (potential
            // term 2φ²/w); the full flow conserves the trigonometric one.
            let s = match state.formulation {
                Formulation::LinearPsi => state.field[i],
                _ => state.field[i].sin(),
            };
            0.5 * (state.velocity[i].powi(2) + dpsi[i].powi(2) + 2.0 * s * s / w) * w
        })
        .collect();
    Ok(quad_samples_uniform(&density, h).value)
}

/// u-form energy `½∫(u_t² + u_r² + V u²)(r²+1)² dr` with the potential
/// fixed by the state's degree through `map`.
pub fn energy_u(state: &FieldState, map: &HarmonicMap) -> Result<f64, GeometryError> {
    if state.formulation != Formulation::U {
        return Err(GeometryError::WrongFormulation {
            expected: Formulation::U,
            got: state.formulation,
        });
    }
    state.check_finite()?;
    let h = uniform_r_grid(state)?;
    let du = derivative4(&state.field, h);
    let density: Vec<f64> = state
        .grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let w = r * r + 1.0;
            let v = potential_v(map, r);
            0.5 * (state.velocity[i].powi(2) + du[i].powi(2) + v * state.field[i].powi(2)) * w * w
        })
        .collect();
    Ok(quad_samples_uniform(&density, h).value)
}

/// Weighted norm of a pair on (part of) a grid.
pub fn weighted_norm(
    grid: &RadialGrid,
    pair: (&[f64], &[f64]),
    spec: NormSpec,
) -> Result<f64, GeometryError> {
    let (f, g) = pair;
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(GeometryError::LengthMismatch { got: f.len(), grid: grid.len() });
    }
    let h = grid.spacing().ok_or(GeometryError::NonUniformGrid)?;
    let nodes = grid.nodes();
    if spec.r0 > nodes[nodes.len() - 1] {
        return Err(GeometryError::R0OutsideGrid(spec.r0));
    }
    let df = derivative4(f, h);
    let start = nodes.iter().position(|&r| r >= spec.r0).unwrap_or(0);
    let density: Vec<f64> = (start..nodes.len())
        .map(|i| {
            let w = (nodes[i] * nodes[i] + 1.0).powi(spec.weight_exp);
            (df[i].powi(2) + g[i].powi(2)) * w
        })
        .collect();
    if density.len() < 2 {
        return Ok(0.0);
    }
    Ok(quad_samples_uniform(&density, h).value.max(0.0).sqrt())
}

/// ψ → u: `u = ⟨r⟩⁻¹(ψ − Q_n)`, velocities transformed by the same
/// pointwise factor.
pub fn psi_to_u(state: &FieldState, map: &HarmonicMap) -> Result<FieldState, GeometryError> {
    if state.formulation != Formulation::Psi {
        return Err(GeometryError::WrongFormulation {
            expected: Formulation::Psi,
            got: state.formulation,
        });
    }
    let nodes = state.grid.nodes();
    let mut field = Vec::with_capacity(nodes.len());
    let mut velocity = Vec::with_capacity(nodes.len());
    for (i, &r) in nodes.iter().enumerate() {
        let inv = 1.0 / (r * r + 1.0).sqrt();
        field.push((state.field[i] - map.q(r)) * inv);
        velocity.push(state.velocity[i] * inv);
    }
    Ok(FieldState {
        grid: state.grid.clone(),
        field,
        velocity,
        formulation: Formulation::U,
        degree: state.degree,
        time: state.time,
    })
}

/// u → ψ: exact inverse of [`psi_to_u`] on the grid.
pub fn u_to_psi(state: &FieldState, map: &HarmonicMap) -> Result<FieldState, GeometryError> {
    if state.formulation != Formulation::U {
        return Err(GeometryError::WrongFormulation {
            expected: Formulation::U,
            got: state.formulation,
        });
    }
    let nodes = state.grid.nodes();
    let mut field = Vec::with_capacity(nodes.len());
    let mut velocity = Vec::with_capacity(nodes.len());
    for (i, &r) in nodes.iter().enumerate() {
        let w = (r * r + 1.0).sqrt();
        field.push(state.field[i] * w + map.q(r));
        velocity.push(state.velocity[i] * w);
    }
    Ok(FieldState {
        grid: state.grid.clone(),
        field,
        velocity,
        formulation: Formulation::Psi,
        degree: state.degree,
        time: state.time,
    })
}

/// Report of the radial pointwise bound
/// `|u(r)| ≤ C ⟨r⟩^{-3/2} ‖∂_r u‖_{L²((r²+1)² dr)}`.
#[derive(Debug, Clone, Copy)]
pub struct StraussReport {
    /// Smallest admissible constant on the sampled grid.
    pub constant: f64,
    /// The gradient norm used in the bound.
    pub gradient_norm: f64,
}

/// Measures the smallest C making the pointwise weighted bound hold on
/// the grid.
pub fn strauss_check(state: &FieldState) -> Result<StraussReport, GeometryError> {
    if state.formulation != Formulation::U {
        return Err(GeometryError::WrongFormulation {
            expected: Formulation::U,
            got: state.formulation,
        });
    }
    state.check_finite()?;
    let h = uniform_r_grid(state)?;
    let du = derivative4(&state.field, h);
    let density: Vec<f64> = state
        .grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let w = r * r + 1.0;
            du[i] * du[i] * w * w
        })
        .collect();
    let gradient_norm = quad_samples_uniform(&density, h).value.max(0.0).sqrt();
    let mut constant = 0.0f64;
    if gradient_norm > 0.0 {
        for (i, &r) in state.grid.nodes().iter().enumerate() {
            let weight = (r * r + 1.0).powf(0.75); // ⟨r⟩^{3/2}
            constant = constant.max(state.field[i].abs() * weight / gradient_norm);
        }
    }
    Ok(StraussReport { constant, gradient_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::{shoot_harmonic, ShootConfig};
    use std::f64::consts::PI;

    fn grid(a: f64, b: f64, n: usize) -> RadialGrid {
        RadialGrid::uniform(Coordinate::R, a, b, n).unwrap()
    }

    fn q1() -> HarmonicMap {
        shoot_harmonic(1, &ShootConfig::default()).unwrap()
    }

    #[test]
    fn zero_energy() {
        let s = FieldState::zero(grid(-30.0, 30.0, 601), Formulation::Psi, 0);
        assert_eq!(energy_psi(&s).unwrap(), 0.0);
    }

    #[test]
    fn q1_energy_positive_and_symmetric() {
        let map = q1();
        let g = grid(-60.0, 60.0, 2401);
        let field: Vec<f64> = g.nodes().iter().map(|&r| map.q(r)).collect();
        let vel = vec![0.0; g.len()];
        let s = FieldState::new(g.clone(), field, vel, Formulation::Psi, 1).unwrap();
        let e = energy_psi(&s).unwrap();
        assert!(e > 0.0);
        // reflection symmetry ψ(r) → nπ − ψ(−r) preserves the energy
        let field_r: Vec<f64> = g.nodes().iter().map(|&r| PI - map.q(-r)).collect();
        let s_r = FieldState::new(g, field_r, vec![0.0; 2401], Formulation::Psi, 1).unwrap();
        let e_r = energy_psi(&s_r).unwrap();
        assert!((e - e_r).abs() < 1e-10 * e);
    }

    #[test]
    fn energy_additivity() {
        // energy over [a,c] = [a,b] + [b,c] for a grid-aligned midpoint
        let map = q1();
        let f = |r: f64| map.q(r) + 0.3 * (-r * r).exp();
        let g_all = grid(-20.0, 20.0, 1601);
        let g_lo = grid(-20.0, 0.0, 801);
        let g_hi = grid(0.0, 20.0, 801);
        let mk = |g: &RadialGrid| {
            let field: Vec<f64> = g.nodes().iter().map(|&r| f(r)).collect();
            FieldState::new(g.clone(), field, vec![0.0; g.len()], Formulation::Psi, 1).unwrap()
        };
        let (ea, el, eh) = (
            energy_psi(&mk(&g_all)).unwrap(),
            energy_psi(&mk(&g_lo)).unwrap(),
            energy_psi(&mk(&g_hi)).unwrap(),
        );
        // the split grids use one-sided stencils at r=0, so agreement is
        // at the discretization level, not roundoff
        assert!((ea - el - eh).abs() < 1e-5 * ea.abs());
    }

    #[test]
    fn psi_u_round_trip() {
        let map = q1();
        let g = grid(-25.0, 25.0, 501);
        let field: Vec<f64> = g.nodes().iter().map(|&r| map.q(r) + 0.2 * (-(r - 1.0).powi(2)).exp()).collect();
        let vel: Vec<f64> = g.nodes().iter().map(|&r| 0.1 * (-r * r).exp()).collect();
        let s = FieldState::new(g, field.clone(), vel.clone(), Formulation::Psi, 1).unwrap();
        let u = psi_to_u(&s, &map).unwrap();
        let back = u_to_psi(&u, &map).unwrap();
        for i in 0..field.len() {
            assert!((back.field[i] - field[i]).abs() < 1e-13);
            assert!((back.velocity[i] - vel[i]).abs() < 1e-13);
        }
        // ψ = Q_n maps to u = 0
        let sq = FieldState::new(
            s.grid.clone(),
            s.grid.nodes().iter().map(|&r| map.q(r)).collect(),
            vec![0.0; s.grid.len()],
            Formulation::Psi,
            1,
        )
        .unwrap();
        let uq = psi_to_u(&sq, &map).unwrap();
        assert!(uq.field.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn weighted_norm_scaling() {
        let g = grid(0.0, 10.0, 201);
        let f: Vec<f64> = g.nodes().iter().map(|&r| (-r * r).exp()).collect();
        let v: Vec<f64> = g.nodes().iter().map(|&r| r * (-r * r).exp()).collect();
        let spec = NormSpec::base(f64::NEG_INFINITY);
        let n1 = weighted_norm(&g, (&f, &v), spec).unwrap();
        let f2: Vec<f64> = f.iter().map(|&x| -3.0 * x).collect();
        let v2: Vec<f64> = v.iter().map(|&x| -3.0 * x).collect();
        let n2 = weighted_norm(&g, (&f2, &v2), spec).unwrap();
        assert!((n2 - 3.0 * n1).abs() < 1e-12 * n1);
        // zero pair
        let z = vec![0.0; g.len()];
        assert_eq!(weighted_norm(&g, (&z, &z), spec).unwrap(), 0.0);
        // r0 beyond grid errors
        assert!(weighted_norm(&g, (&f, &v), NormSpec::base(11.0)).is_err());
    }

    #[test]
    fn strauss_scale_invariance() {
        let g = grid(-15.0, 15.0, 601);
        let f: Vec<f64> = g.nodes().iter().map(|&r| (-(r * r) / 4.0).exp()).collect();
        let s = FieldState::new(g.clone(), f.clone(), vec![0.0; g.len()], Formulation::U, 1)
            .unwrap();
        let rep = strauss_check(&s).unwrap();
        assert!(rep.constant > 0.0 && rep.constant.is_finite());
        let f5: Vec<f64> = f.iter().map(|&x| 5.0 * x).collect();
        let s5 = FieldState::new(g.clone(), f5, vec![0.0; g.len()], Formulation::U, 1).unwrap();
        let rep5 = strauss_check(&s5).unwrap();
        assert!((rep.constant - rep5.constant).abs() < 1e-12 * rep.constant);
    }

    #[test]
    fn derivative4_accuracy() {
        let n = 101;
        let h = 0.05;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
        let d = derivative4(&f, h);
        for i in 0..n {
            let exact = (i as f64 * h).cos();
            assert!((d[i] - exact).abs() < 3e-6, "i={i}");
        }
    }
}
