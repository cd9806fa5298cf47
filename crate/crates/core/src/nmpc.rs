//! Discretized receding-horizon problem and its first-order optimality
//! residual.
//!
//! The horizon is discretized with explicit Euler steps of `Δτ = T_s / N`.
//! Each step carries nine unknowns: the dipole moment `m`, the dummy inputs
//! `v` that turn the bound `|m_k| <= u_max` into `m_k² + v_k² = u_max²`, and
//! the multipliers `μ` of those equality constraints. The residual `F` stacks
//! `∂H/∂m`, `∂H/∂v` and the constraint values per step; `F = 0` is the
//! discrete two-point boundary-value problem the continuation tracker
//! follows.
//!
//! The body-frame field at every horizon node is exogenous (a forecast), so
//! the state Jacobian of the dynamics only involves the kinematics and the
//! gyroscopic terms.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::actuation::{skew, ControlCommand, DipoleMoment};
use crate::dynamics::{dynamics, kinematics_matrix_unchecked, InertiaTensor, SatelliteState, StateVector};
use crate::{Error, Result};

/// Unknowns per horizon step: `m` (3), `v` (3), `μ` (3).
pub const STEP_DIM: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct NmpcWeights {
    /// Diagonal state weights.
    pub q: [f64; 7],
    /// Diagonal terminal weights.
    pub qt: [f64; 7],
    /// Diagonal input weights on `(m, v)`.
    pub r: [f64; 6],
    /// Rewards on the dummy inputs.
    pub p: [f64; 3],
    /// A·m²
    pub u_max: f64,
}

impl NmpcWeights {
    pub fn validate(&self) -> Result<()> {
        let nonneg = self.q.iter().chain(&self.qt).chain(&self.r).all(|w| *w >= 0.0 && w.is_finite());
        if !nonneg {
            return Err(Error::InvalidParameter("state and input weights must be non-negative"));
        }
        if !self.p.iter().all(|p| *p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidParameter("dummy-input rewards must be positive"));
        }
        if !(self.u_max > 0.0) || !self.u_max.is_finite() {
            return Err(Error::InvalidParameter("u_max must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonConfig {
    /// Prediction horizon `T_s`, s.
    pub horizon: f64,
    pub steps: usize,
}

impl HorizonConfig {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter("prediction horizon must be positive"));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("horizon needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn dtau(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn residual_len(&self) -> usize {
        STEP_DIM * self.steps
    }
}

/// Unknowns of one horizon step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepVariables {
    pub m: Vector3<f64>,
    pub v: Vector3<f64>,
    pub mu: Vector3<f64>,
}

impl StepVariables {
    pub fn from_slice(s: &[f64]) -> Self {
        Self {
            m: Vector3::new(s[0], s[1], s[2]),
            v: Vector3::new(s[3], s[4], s[5]),
            mu: Vector3::new(s[6], s[7], s[8]),
        }
    }

    pub fn write(&self, out: &mut [f64]) {
        out[0..3].copy_from_slice(self.m.as_slice());
        out[3..6].copy_from_slice(self.v.as_slice());
        out[6..9].copy_from_slice(self.mu.as_slice());
    }
}

/// Stacked per-step unknowns `[mx, my, mz, vx, vy, vz, μx, μy, μz]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSolution {
    steps: usize,
    data: Vec<f64>,
}

impl HorizonSolution {
    pub fn from_vec(steps: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != STEP_DIM * steps {
            return Err(Error::Dimension { expected: STEP_DIM * steps, found: data.len() });
        }
        Ok(Self { steps, data })
    }

    /// Every step set to `m = 0`, `v = u_max`, `μ = mu0`; the equality
    /// constraints hold exactly.
    pub fn warm_start(steps: usize, u_max: f64, mu0: f64) -> Self {
        let step = StepVariables { m: Vector3::zeros(), v: Vector3::repeat(u_max), mu: Vector3::repeat(mu0) };
        let mut data = vec![0.0; STEP_DIM * steps];
        for chunk in data.chunks_exact_mut(STEP_DIM) {
            step.write(chunk);
        }
        Self { steps, data }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self, i: usize) -> StepVariables {
        StepVariables::from_slice(&self.data[i * STEP_DIM..(i + 1) * STEP_DIM])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// First horizon step's moment and dummy inputs.
pub fn extract_control(u: &HorizonSolution) -> ControlCommand {
    let s = u.step(0);
    ControlCommand { moment: DipoleMoment(s.m), dummy: s.v }
}

/// Costates `λ₀ … λ_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory {
    pub lambda: Vec<StateVector>,
}

/// Everything that stays fixed while the controller runs.
#[derive(Debug, Clone, PartialEq)]
pub struct NmpcProblem {
    pub inertia: InertiaTensor,
    pub weights: NmpcWeights,
    pub horizon: HorizonConfig,
    pub reference: StateVector,
}

fn diag7(w: &[f64; 7], v: &StateVector) -> StateVector {
    StateVector::from_iterator(w.iter().zip(v.iter()).map(|(a, b)| a * b))
}

/// `½ Ω(ω)` with `q̇ = ½ Ω(ω) q`.
#[rustfmt::skip]
fn omega_matrix(w: &Vector3<f64>) -> Matrix4<f64> {
    Matrix4::new(
        0.0,   w.z, -w.y,  w.x,
        -w.z,  0.0,  w.x,  w.y,
        w.y,  -w.x,  0.0,  w.z,
        -w.x, -w.y, -w.z,  0.0,
    ) * 0.5
}

impl NmpcProblem {
    pub fn new(inertia: InertiaTensor, weights: NmpcWeights, horizon: HorizonConfig, reference: &SatelliteState) -> Result<Self> {
        weights.validate()?;
        Ok(Self { inertia, weights, horizon, reference: reference.to_vector() })
    }

    pub fn f(&self, x: &StateVector, m: &Vector3<f64>, b: &Vector3<f64>) -> StateVector {
        dynamics(x, m, b, &self.inertia)
    }

    pub fn constraint(&self, s: &StepVariables) -> Vector3<f64> {
        let u2 = self.weights.u_max * self.weights.u_max;
        s.m.component_mul(&s.m) + s.v.component_mul(&s.v) - Vector3::repeat(u2)
    }

    /// `L(x, u) = ½ [(x-x_f)ᵀQ(x-x_f) + uᵀRu - pᵀv]`.
    pub fn stage_cost(&self, x: &StateVector, s: &StepVariables) -> f64 {
        let w = &self.weights;
        let e = x - self.reference;
        let state = e.dot(&diag7(&w.q, &e));
        let mut input = 0.0;
        for k in 0..3 {
            input += w.r[k] * s.m[k] * s.m[k] + w.r[k + 3] * s.v[k] * s.v[k] - w.p[k] * s.v[k];
        }
        0.5 * (state + input)
    }

    pub fn terminal_cost(&self, x: &StateVector) -> f64 {
        let e = x - self.reference;
        0.5 * e.dot(&diag7(&self.weights.qt, &e))
    }

    /// `H = L + λᵀf + μᵀC`.
    pub fn hamiltonian(&self, x: &StateVector, lambda: &StateVector, s: &StepVariables, b: &Vector3<f64>) -> f64 {
        self.stage_cost(x, s) + lambda.dot(&self.f(x, &s.m, b)) + s.mu.dot(&self.constraint(s))
    }

    /// `∂H/∂x`. Independent of the inputs because the field is exogenous.
    pub fn hamiltonian_x(&self, x: &StateVector, lambda: &StateVector) -> StateVector {
        let w = Vector3::new(x[4], x[5], x[6]);
        let lq = Vector4::new(lambda[0], lambda[1], lambda[2], lambda[3]);
        let lw = Vector3::new(lambda[4], lambda[5], lambda[6]);
        let g = self.inertia.gyroscopic_coefficients();
        #[rustfmt::skip]
        let dwdw = Matrix3::new(
            0.0,       g.x * w.z, g.x * w.y,
            g.y * w.z, 0.0,       g.y * w.x,
            g.z * w.y, g.z * w.x, 0.0,
        );
        let e = kinematics_matrix_unchecked(x[0], x[1], x[2], x[3]);
        let hq = omega_matrix(&w).transpose() * lq;
        let hw = e.transpose() * lq + dwdw.transpose() * lw;
        let mut out = diag7(&self.weights.q, &(x - self.reference));
        for k in 0..4 {
            out[k] += hq[k];
        }
        for k in 0..3 {
            out[4 + k] += hw[k];
        }
        out
    }

    /// `∂H/∂(m, v)`.
    pub fn hamiltonian_u(&self, lambda: &StateVector, s: &StepVariables, b: &Vector3<f64>) -> [f64; 6] {
        let w = &self.weights;
        let lw = Vector3::new(lambda[4] / self.inertia.jx, lambda[5] / self.inertia.jy, lambda[6] / self.inertia.jz);
        let hm = skew(b).transpose() * lw;
        let mut out = [0.0; 6];
        for k in 0..3 {
            out[k] = w.r[k] * s.m[k] + hm[k] + 2.0 * s.mu[k] * s.m[k];
            out[k + 3] = w.r[k + 3] * s.v[k] - 0.5 * w.p[k] + 2.0 * s.mu[k] * s.v[k];
        }
        out
    }

    fn check_dims(&self, u: &[f64], forecast: &[Vector3<f64>]) -> Result<()> {
        let n = self.horizon.steps;
        if u.len() != STEP_DIM * n {
            return Err(Error::Dimension { expected: STEP_DIM * n, found: u.len() });
        }
        if forecast.len() != n {
            return Err(Error::Dimension { expected: n, found: forecast.len() });
        }
        Ok(())
    }

    /// Explicit-Euler prediction `x_{i+1} = x_i + f(x_i, u_i) Δτ`, `N+1` states.
    pub fn forward_rollout(&self, x0: &StateVector, u: &[f64], forecast: &[Vector3<f64>]) -> Result<Vec<StateVector>> {
        self.check_dims(u, forecast)?;
        let dtau = self.horizon.dtau();
        let mut traj = Vec::with_capacity(self.horizon.steps + 1);
        traj.push(*x0);
        for (i, b) in forecast.iter().enumerate() {
            let m = Vector3::new(u[i * STEP_DIM], u[i * STEP_DIM + 1], u[i * STEP_DIM + 2]);
            let x = traj[i];
            let next = x + self.f(&x, &m, b) * dtau;
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::Rollout(i + 1));
            }
            traj.push(next);
        }
        Ok(traj)
    }

    /// `λ_N = Q_t (x_N - x_f)`, `λ_i = λ_{i+1} + H_x(x_i, λ_{i+1}) Δτ`.
    pub fn backward_costate(&self, traj: &[StateVector]) -> CostateTrajectory {
        let n = traj.len() - 1;
        let dtau = self.horizon.dtau();
        let mut lambda = vec![StateVector::zeros(); n + 1];
        lambda[n] = diag7(&self.weights.qt, &(traj[n] - self.reference));
        for i in (0..n).rev() {
            lambda[i] = lambda[i + 1] + self.hamiltonian_x(&traj[i], &lambda[i + 1]) * dtau;
        }
        CostateTrajectory { lambda }
    }

    /// Writes the `9N` residual into `out`.
    pub fn residual_into(&self, x0: &StateVector, u: &[f64], forecast: &[Vector3<f64>], out: &mut [f64]) -> Result<()> {
        let traj = self.forward_rollout(x0, u, forecast)?;
        if out.len() != u.len() {
            return Err(Error::Dimension { expected: u.len(), found: out.len() });
        }
        let n = self.horizon.steps;
        let dtau = self.horizon.dtau();
        // Backward pass fused with the residual assembly; only λ_{i+1} is needed.
        let mut lambda = diag7(&self.weights.qt, &(traj[n] - self.reference));
        for i in (0..n).rev() {
            let s = StepVariables::from_slice(&u[i * STEP_DIM..(i + 1) * STEP_DIM]);
            let hu = self.hamiltonian_u(&lambda, &s, &forecast[i]);
            let c = self.constraint(&s);
            let chunk = &mut out[i * STEP_DIM..(i + 1) * STEP_DIM];
            chunk[..6].copy_from_slice(&hu);
            chunk[6..].copy_from_slice(c.as_slice());
            if i > 0 {
                lambda += self.hamiltonian_x(&traj[i], &lambda) * dtau;
            }
        }
        Ok(())
    }

    /// `F(U)`: per step `[H_m, H_v, C]`, evaluated at `(x_i, λ_{i+1}, u_i, μ_i)`.
    pub fn optimality_residual(&self, x0: &StateVector, u: &[f64], forecast: &[Vector3<f64>]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; u.len()];
        self.residual_into(x0, u, forecast, &mut out)?;
        Ok(out)
    }

    /// Discretized cost `ψ(x_N) + Σ L(x_i, u_i) Δτ`.
    pub fn cost(&self, x0: &StateVector, u: &[f64], forecast: &[Vector3<f64>]) -> Result<f64> {
        let traj = self.forward_rollout(x0, u, forecast)?;
        let dtau = self.horizon.dtau();
        let running: f64 = (0..self.horizon.steps)
            .map(|i| self.stage_cost(&traj[i], &StepVariables::from_slice(&u[i * STEP_DIM..(i + 1) * STEP_DIM])) * dtau)
            .sum();
        Ok(running + self.terminal_cost(&traj[self.horizon.steps]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AngularVelocity, Quaternion};
    use approx::assert_relative_eq;

    pub(crate) fn detumble_problem(steps: usize, horizon: f64) -> NmpcProblem {
        let weights = NmpcWeights {
            q: [0.0, 0.0, 0.0, 0.0, 100.0, 100.0, 250.0],
            qt: [0.0, 0.0, 0.0, 0.0, 100.0, 100.0, 250.0],
            r: [1e-8; 6],
            p: [0.1; 3],
            u_max: 0.1,
        };
        NmpcProblem::new(
            InertiaTensor::new(0.020, 0.030, 0.040).unwrap(),
            weights,
            HorizonConfig::new(horizon, steps).unwrap(),
            &SatelliteState::default(),
        )
        .unwrap()
    }

    fn detumble_x0() -> StateVector {
        SatelliteState::new(Quaternion::IDENTITY, AngularVelocity::from_deg_per_s(3.0, 3.0, 3.0)).to_vector()
    }

    fn field() -> Vector3<f64> {
        Vector3::new(1.2e-5, -2.1e-5, 0.9e-5)
    }

    #[test]
    fn zero_input_equilibrium_rollout_is_constant() {
        let p = detumble_problem(10, 10.0);
        let x0 = SatelliteState::default().to_vector();
        let u = HorizonSolution::warm_start(10, 0.1, 0.01);
        let traj = p.forward_rollout(&x0, u.as_slice(), &[field(); 10]).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.iter().all(|x| *x == x0));
    }

    #[test]
    fn single_step_rollout_is_one_euler_step() {
        let p = detumble_problem(1, 10.0);
        let x0 = detumble_x0();
        let mut u = HorizonSolution::warm_start(1, 0.1, 0.01);
        u.as_mut_slice()[..3].copy_from_slice(&[0.05, -0.02, 0.07]);
        let traj = p.forward_rollout(&x0, u.as_slice(), &[field()]).unwrap();
        let m = Vector3::new(0.05, -0.02, 0.07);
        assert_eq!(traj[1], x0 + dynamics(&x0, &m, &field(), &p.inertia) * 10.0);
    }

    #[test]
    fn rollout_matches_hand_euler_oracle() {
        // Hand-coded component-wise Euler recursion for zero input.
        let p = detumble_problem(10, 10.0);
        let x0 = detumble_x0();
        let u = HorizonSolution::warm_start(10, 0.1, 0.01);
        let traj = p.forward_rollout(&x0, u.as_slice(), &[field(); 10]).unwrap();
        let (jx, jy, jz) = (0.020, 0.030, 0.040);
        let mut s = [x0[0], x0[1], x0[2], x0[3], x0[4], x0[5], x0[6]];
        for i in 0..10 {
            let [q1, q2, q3, q4, wx, wy, wz] = s;
            let d = [
                0.5 * (q4 * wx - q3 * wy + q2 * wz),
                0.5 * (q3 * wx + q4 * wy - q1 * wz),
                0.5 * (-q2 * wx + q1 * wy + q4 * wz),
                0.5 * (-q1 * wx - q2 * wy - q3 * wz),
                (jy - jz) * wy * wz / jx,
                (jz - jx) * wz * wx / jy,
                (jx - jy) * wx * wy / jz,
            ];
            for k in 0..7 {
                s[k] += d[k] * 1.0;
            }
            for k in 0..7 {
                assert_relative_eq!(traj[i + 1][k], s[k], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rollout_rejects_bad_dimensions() {
        let p = detumble_problem(3, 3.0);
        let u = HorizonSolution::warm_start(2, 0.1, 0.01);
        assert!(matches!(p.forward_rollout(&detumble_x0(), u.as_slice(), &[field(); 3]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn hamiltonian_at_reference_is_zero() {
        let p = detumble_problem(10, 10.0);
        let s = StepVariables { m: Vector3::zeros(), v: Vector3::zeros(), mu: Vector3::zeros() };
        assert_eq!(p.hamiltonian(&p.reference, &StateVector::zeros(), &s, &field()), 0.0);
    }

    #[test]
    fn hamiltonian_without_adjoints_is_stage_cost() {
        let p = detumble_problem(10, 10.0);
        let x = detumble_x0();
        let s = StepVariables { m: Vector3::new(0.01, 0.02, -0.03), v: Vector3::new(0.09, 0.08, 0.07), mu: Vector3::zeros() };
        assert_eq!(p.hamiltonian(&x, &StateVector::zeros(), &s, &field()), p.stage_cost(&x, &s));
    }

    #[test]
    fn hamiltonian_matches_term_by_term_oracle() {
        let p = detumble_problem(10, 10.0);
        let x = StateVector::from_column_slice(&[0.1, -0.2, 0.3, 0.9, 0.02, -0.04, 0.03]);
        let lambda = StateVector::from_column_slice(&[0.5, -1.0, 2.0, 0.3, 4.0, -3.0, 1.5]);
        let s = StepVariables { m: Vector3::new(0.03, -0.05, 0.08), v: Vector3::new(0.06, 0.07, 0.04), mu: Vector3::new(0.2, 0.4, 0.3) };
        let b = field();
        // L
        let ew = [x[4], x[5], x[6]];
        let mut l = 100.0 * ew[0] * ew[0] + 100.0 * ew[1] * ew[1] + 250.0 * ew[2] * ew[2];
        for k in 0..3 {
            l += 1e-8 * (s.m[k] * s.m[k] + s.v[k] * s.v[k]) - 0.1 * s.v[k];
        }
        l *= 0.5;
        // λᵀf written out with T = m × B
        let t = s.m.cross(&b);
        let (q1, q2, q3, q4) = (x[0], x[1], x[2], x[3]);
        let (wx, wy, wz) = (x[4], x[5], x[6]);
        let f = [
            0.5 * (q4 * wx - q3 * wy + q2 * wz),
            0.5 * (q3 * wx + q4 * wy - q1 * wz),
            0.5 * (-q2 * wx + q1 * wy + q4 * wz),
            0.5 * (-q1 * wx - q2 * wy - q3 * wz),
            ((0.03 - 0.04) * wy * wz + t.x) / 0.02,
            ((0.04 - 0.02) * wz * wx + t.y) / 0.03,
            ((0.02 - 0.03) * wx * wy + t.z) / 0.04,
        ];
        let lf: f64 = (0..7).map(|k| lambda[k] * f[k]).sum();
        let mc: f64 = (0..3).map(|k| s.mu[k] * (s.m[k] * s.m[k] + s.v[k] * s.v[k] - 0.01)).sum();
        assert_relative_eq!(p.hamiltonian(&x, &lambda, &s, &b), l + lf + mc, max_relative = 1e-13);
    }

    #[test]
    fn costless_problem_has_zero_costate() {
        let mut p = detumble_problem(5, 5.0);
        p.weights.q = [0.0; 7];
        p.weights.qt = [0.0; 7];
        let u = HorizonSolution::warm_start(5, 0.1, 0.01);
        let traj = p.forward_rollout(&detumble_x0(), u.as_slice(), &[field(); 5]).unwrap();
        let lam = p.backward_costate(&traj);
        assert_eq!(lam.lambda.len(), 6);
        assert!(lam.lambda.iter().all(|l| *l == StateVector::zeros()));
    }

    #[test]
    fn terminal_costate_vanishes_at_reference() {
        let p = detumble_problem(5, 5.0);
        let u = HorizonSolution::warm_start(5, 0.1, 0.01);
        let traj = p.forward_rollout(&p.reference, u.as_slice(), &[field(); 5]).unwrap();
        let lam = p.backward_costate(&traj);
        assert_eq!(lam.lambda[5], StateVector::zeros());
    }

    #[test]
    fn terminal_costate_is_terminal_cost_gradient() {
        let p = detumble_problem(4, 4.0);
        let u = HorizonSolution::warm_start(4, 0.1, 0.01);
        let traj = p.forward_rollout(&detumble_x0(), u.as_slice(), &[field(); 4]).unwrap();
        let lam = p.backward_costate(&traj);
        let h = 1e-7;
        for k in 0..7 {
            let mut xp = traj[4];
            let mut xm = traj[4];
            xp[k] += h;
            xm[k] -= h;
            let fd = (p.terminal_cost(&xp) - p.terminal_cost(&xm)) / (2.0 * h);
            assert_relative_eq!(lam.lambda[4][k], fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn residual_has_nine_entries_per_step() {
        for n in [1, 2, 10, 20] {
            let p = detumble_problem(n, n as f64);
            let u = HorizonSolution::warm_start(n, 0.1, 0.01);
            let f = p.optimality_residual(&detumble_x0(), u.as_slice(), &alloc::vec![field(); n]).unwrap();
            assert_eq!(f.len(), 9 * n);
        }
    }

    #[test]
    fn single_step_residual_matches_symbolic_form() {
        // N = 1: λ₁ = Q_t (x₁ - x_f), F = [R m + S(B)ᵀ J⁻¹ λ₁,ω + 2 μ m, R v - p/2 + 2 μ v, m² + v² - u_max²].
        let p = detumble_problem(1, 2.0);
        let x0 = detumble_x0();
        let b = field();
        let s = StepVariables { m: Vector3::new(0.02, -0.04, 0.01), v: Vector3::new(0.09, 0.05, 0.099), mu: Vector3::new(0.3, 0.1, 0.2) };
        let mut u = [0.0; 9];
        s.write(&mut u);
        let f = p.optimality_residual(&x0, &u, &[b]).unwrap();
        let x1 = x0 + dynamics(&x0, &s.m, &b, &p.inertia) * 2.0;
        let lam_w = Vector3::new(100.0 * x1[4] / 0.02, 100.0 * x1[5] / 0.03, 250.0 * x1[6] / 0.04);
        // S(B)ᵀ y = y × B ... written out: (S(B)ᵀ y)_x = -Bz y_y + By y_z, etc.
        let hm = Vector3::new(-b.z * lam_w.y + b.y * lam_w.z, b.z * lam_w.x - b.x * lam_w.z, -b.y * lam_w.x + b.x * lam_w.y);
        for k in 0..3 {
            assert_relative_eq!(f[k], 1e-8 * s.m[k] + hm[k] + 2.0 * s.mu[k] * s.m[k], max_relative = 1e-12);
            assert_relative_eq!(f[3 + k], 1e-8 * s.v[k] - 0.05 + 2.0 * s.mu[k] * s.v[k], max_relative = 1e-12);
            assert_relative_eq!(f[6 + k], s.m[k] * s.m[k] + s.v[k] * s.v[k] - 0.01, max_relative = 1e-12);
        }
    }

    #[test]
    fn residual_is_gradient_of_cost_with_eliminated_dummies() {
        // With v = sqrt(u_max² - m²) and μ solving ∂H/∂v = 0, the m-block of F
        // equals (1/Δτ) ∂J/∂m of the discretized cost.
        let p = detumble_problem(3, 3.0);
        let x0 = detumble_x0();
        let fc = [field(), field() * 1.1, field() * 0.9];
        let ms = [Vector3::new(0.03, -0.02, 0.05), Vector3::new(-0.06, 0.01, 0.02), Vector3::new(0.0, 0.04, -0.07)];
        let build = |ms: &[Vector3<f64>; 3]| -> Vec<f64> {
            let mut u = alloc::vec![0.0; 27];
            for i in 0..3 {
                let v = ms[i].map(|m| (0.01 - m * m).sqrt());
                let mu = Vector3::from_iterator((0..3).map(|k| (0.05 - 1e-8 * v[k]) / (2.0 * v[k])));
                StepVariables { m: ms[i], v, mu }.write(&mut u[i * 9..(i + 1) * 9]);
            }
            u
        };
        let u = build(&ms);
        let f = p.optimality_residual(&x0, &u, &fc).unwrap();
        let h = 1e-7;
        for i in 0..3 {
            for k in 0..3 {
                let mut mp = ms;
                let mut mm = ms;
                mp[i][k] += h;
                mm[i][k] -= h;
                let fd = (p.cost(&x0, &build(&mp), &fc).unwrap() - p.cost(&x0, &build(&mm), &fc).unwrap()) / (2.0 * h);
                assert_relative_eq!(f[i * 9 + k], fd, max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn extract_control_reads_first_step() {
        let mut u = HorizonSolution::warm_start(3, 0.1, 0.01);
        u.as_mut_slice()[..6].copy_from_slice(&[0.01, 0.02, 0.03, 0.04, 0.05, 0.06]);
        let c = extract_control(&u);
        assert_eq!(c.moment.0, Vector3::new(0.01, 0.02, 0.03));
        assert_eq!(c.dummy, Vector3::new(0.04, 0.05, 0.06));
        assert_eq!(extract_control(&HorizonSolution::warm_start(3, 0.1, 0.01)).constraint_violation(0.1), 0.0);
    }

    #[test]
    fn weights_validation() {
        let mut p = detumble_problem(2, 2.0);
        p.weights.p[1] = 0.0;
        assert!(p.weights.validate().is_err());
        p.weights.p[1] = 0.1;
        p.weights.q[0] = -1.0;
        assert!(p.weights.validate().is_err());
    }
}
