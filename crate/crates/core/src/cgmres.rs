//! Continuation/GMRES tracking of the optimality residual's zero.
//!
//! Instead of solving `F(U, x, t) = 0` from scratch at every sample, the
//! tracker integrates `dF/dt = -ζ F`. The resulting linear system for `U̇`
//! is solved matrix-free with GMRES; every Jacobian-vector product is a
//! forward difference of `F` with step `h`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::actuation::ControlCommand;
use crate::dynamics::{SatelliteState, StateVector};
use crate::field::{Frame, FieldModel};
use crate::gmres::{gmres, GmresOutcome, GmresStatus};
use crate::nmpc::{extract_control, HorizonSolution, NmpcProblem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgmresParams {
    /// Stabilization gain of `dF/dt = -ζ F`, 1/s.
    pub zeta: f64,
    /// Forward-difference step.
    pub fd_step: f64,
    /// GMRES iteration cap, no restarts.
    pub max_iterations: usize,
    /// Absolute GMRES residual tolerance.
    pub gmres_tolerance: f64,
}

impl CgmresParams {
    /// `ζ = 1/dt_ctrl`, `h = 1e-6`, `k_max = min(9N, 30)`.
    pub fn for_period(dt_ctrl: f64, steps: usize) -> Self {
        Self { zeta: 1.0 / dt_ctrl, fd_step: 1e-6, max_iterations: (9 * steps).min(30), gmres_tolerance: 1e-12 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0) || !self.zeta.is_finite() {
            return Err(Error::InvalidParameter("zeta must be positive"));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::InvalidParameter("finite-difference step must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("GMRES needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    /// `‖F‖` of the carried solution at the current state and time, before
    /// the continuation step.
    pub residual_norm: f64,
    pub gmres: GmresOutcome,
}

impl UpdateReport {
    /// GMRES hit its iteration cap above tolerance.
    pub fn stagnated(&self) -> bool {
        self.gmres.status == GmresStatus::Stagnated
    }
}

/// Orbital-frame field at each horizon node `t + i Δτ`.
pub fn orbital_forecast(model: &dyn FieldModel, t: f64, steps: usize, dtau: f64) -> Result<Vec<Vector3<f64>>> {
    (0..steps)
        .map(|i| {
            let s = model.field(t + i as f64 * dtau)?;
            s.expect_frame(Frame::Orbital)?;
            Ok(s.b)
        })
        .collect()
}

/// Rotates an orbital forecast into the body frame of the attitude in `x`.
pub fn body_forecast(x: &StateVector, orbital: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>> {
    let q = SatelliteState::from_vector(x).q;
    if !(q.norm() > 0.0) || !q.norm().is_finite() {
        return Err(Error::InvalidState("attitude quaternion is degenerate"));
    }
    let a = q.renormalized().attitude_matrix();
    Ok(orbital.iter().map(|b| a * b).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Stateful tracker carrying the horizon solution and its rate between
/// samples.
#[derive(Debug, Clone)]
pub struct CgmresTracker {
    problem: NmpcProblem,
    params: CgmresParams,
    solution: HorizonSolution,
    rate: Vec<f64>,
}

impl CgmresTracker {
    pub fn new(problem: NmpcProblem, params: CgmresParams, initial: HorizonSolution) -> Result<Self> {
        params.validate()?;
        if initial.steps() != problem.horizon.steps {
            return Err(Error::Dimension { expected: problem.horizon.steps, found: initial.steps() });
        }
        if !initial.is_finite() {
            return Err(Error::InvalidState("initial horizon solution is not finite"));
        }
        let rate = vec![0.0; initial.as_slice().len()];
        Ok(Self { problem, params, solution: initial, rate })
    }

    pub fn problem(&self) -> &NmpcProblem {
        &self.problem
    }

    pub fn params(&self) -> &CgmresParams {
        &self.params
    }

    pub fn solution(&self) -> &HorizonSolution {
        &self.solution
    }

    pub fn control(&self) -> ControlCommand {
        extract_control(&self.solution)
    }

    fn forecast(&self, model: &dyn FieldModel, t: f64) -> Result<Vec<Vector3<f64>>> {
        orbital_forecast(model, t, self.problem.horizon.steps, self.problem.horizon.dtau())
    }

    /// `F` at the current solution.
    pub fn residual(&self, x: &StateVector, t: f64, model: &dyn FieldModel) -> Result<Vec<f64>> {
        let b = body_forecast(x, &self.forecast(model, t)?)?;
        self.problem.optimality_residual(x, self.solution.as_slice(), &b)
    }

    /// Newton iterations on `F(U) = 0` at a fixed `(x, t)`, each linear step
    /// solved by the same matrix-free GMRES. Returns the final `‖F‖`.
    pub fn initialize(&mut self, x: &StateVector, t: f64, model: &dyn FieldModel, max_newton: usize, tol: f64) -> Result<f64> {
        let b = body_forecast(x, &self.forecast(model, t)?)?;
        let p = &self.problem;
        let h = self.params.fd_step;
        let n = self.solution.as_slice().len();
        let mut f = p.optimality_residual(x, self.solution.as_slice(), &b)?;
        let mut res = norm(&f);
        let mut trial = vec![0.0; n];
        for _ in 0..max_newton {
            if res <= tol {
                break;
            }
            let u = self.solution.as_slice().to_vec();
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let mut du = vec![0.0; n];
            let mut failed = None;
            gmres(
                |v, out| {
                    for k in 0..n {
                        trial[k] = u[k] + h * v[k];
                    }
                    match p.residual_into(x, &trial, &b, out) {
                        Ok(()) => {
                            for (o, fk) in out.iter_mut().zip(&f) {
                                *o = (*o - fk) / h;
                            }
                        }
                        Err(e) => {
                            failed = Some(e);
                            out.iter_mut().for_each(|o| *o = 0.0);
                        }
                    }
                },
                &rhs,
                &mut du,
                n,
                tol * 1e-3,
            );
            if let Some(e) = failed {
                return Err(e);
            }
            // Backtracking keeps a diverging Newton step from wrecking the
            // warm start.
            let mut step = 1.0;
            loop {
                let cand: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a + step * d).collect();
                let fc = p.optimality_residual(x, &cand, &b);
                if let Ok(fc) = fc {
                    let rc = norm(&fc);
                    if rc < res {
                        self.solution.as_mut_slice().copy_from_slice(&cand);
                        f = fc;
                        res = rc;
                        break;
                    }
                }
                step *= 0.5;
                if step < 1e-4 {
                    return Ok(res);
                }
            }
        }
        self.rate.iter_mut().for_each(|r| *r = 0.0);
        Ok(res)
    }

    /// One continuation step over `dt`: solves
    /// `F_U U̇ = -ζ F - F_x ẋ - F_t` and advances `U ← U + U̇ dt`.
    pub fn update(&mut self, x: &StateVector, x_dot: &StateVector, t: f64, dt: f64, model: &dyn FieldModel) -> Result<UpdateReport> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("controller period must be positive"));
        }
        let h = self.params.fd_step;
        let p = &self.problem;
        let n = self.rate.len();

        let b_now = body_forecast(x, &self.forecast(model, t)?)?;
        let x1 = x + x_dot * h;
        let b_next = body_forecast(&x1, &self.forecast(model, t + h)?)?;

        let u = self.solution.as_slice().to_vec();
        let f0 = p.optimality_residual(x, &u, &b_now)?;
        let f1 = p.optimality_residual(&x1, &u, &b_next)?;
        let zeta = self.params.zeta;
        let rhs: Vec<f64> = f0.iter().zip(&f1).map(|(a, b)| -zeta * a - (b - a) / h).collect();

        let mut trial = vec![0.0; n];
        let mut failed = None;
        let mut rate = self.rate.clone();
        let outcome = gmres(
            |v, out| {
                for k in 0..n {
                    trial[k] = u[k] + h * v[k];
                }
                match p.residual_into(&x1, &trial, &b_next, out) {
                    Ok(()) => {
                        for (o, fk) in out.iter_mut().zip(&f1) {
                            *o = (*o - fk) / h;
                        }
                    }
                    Err(e) => {
                        failed = Some(e);
                        out.iter_mut().for_each(|o| *o = 0.0);
                    }
                }
            },
            &rhs,
            &mut rate,
            self.params.max_iterations,
            self.params.gmres_tolerance,
        );
        if let Some(e) = failed {
            return Err(e);
        }
        if !rate.iter().all(|r| r.is_finite()) {
            return Err(Error::InvalidState("continuation rate is not finite"));
        }
        let next: Vec<f64> = u.iter().zip(&rate).map(|(a, r)| a + r * dt).collect();
        self.solution = HorizonSolution::from_vec(p.horizon.steps, next)?;
        self.rate = rate;
        Ok(UpdateReport { residual_norm: norm(&f0), gmres: outcome })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AngularVelocity, InertiaTensor, Quaternion};
    use crate::field::MagneticFieldSample;
    use crate::nmpc::{HorizonConfig, NmpcWeights};

    struct Frozen(Vector3<f64>);

    impl FieldModel for Frozen {
        fn field(&self, t: f64) -> Result<MagneticFieldSample> {
            Ok(MagneticFieldSample::orbital(self.0, t))
        }
    }

    fn problem(steps: usize) -> NmpcProblem {
        NmpcProblem::new(
            InertiaTensor::new(0.020, 0.030, 0.040).unwrap(),
            NmpcWeights {
                q: [0.0, 0.0, 0.0, 0.0, 100.0, 100.0, 250.0],
                qt: [0.0, 0.0, 0.0, 0.0, 100.0, 100.0, 250.0],
                r: [1e-8; 6],
                p: [0.1; 3],
                u_max: 0.1,
            },
            HorizonConfig::new(steps as f64, steps).unwrap(),
            &SatelliteState::default(),
        )
        .unwrap()
    }

    fn x0() -> StateVector {
        SatelliteState::new(Quaternion::IDENTITY, AngularVelocity::from_deg_per_s(0.5, -0.3, 0.4)).to_vector()
    }

    #[test]
    fn default_params() {
        let p = CgmresParams::for_period(0.25, 20);
        assert_eq!(p.zeta, 4.0);
        assert_eq!(p.max_iterations, 30);
        assert_eq!(CgmresParams::for_period(1.0, 2).max_iterations, 18);
    }

    #[test]
    fn frozen_plant_residual_contracts() {
        let field = Frozen(Vector3::new(1.5e-5, -2.0e-5, 1.0e-5));
        let p = problem(4);
        let mut tr = CgmresTracker::new(p, CgmresParams::for_period(1.0, 4), HorizonSolution::warm_start(4, 0.1, 0.01)).unwrap();
        let x = x0();
        let zero = StateVector::zeros();
        let mut last = f64::INFINITY;
        for _ in 0..30 {
            let rep = tr.update(&x, &zero, 0.0, 1.0, &field).unwrap();
            assert!(rep.residual_norm < last.max(1e-10) * 1.0001, "{} !< {}", rep.residual_norm, last);
            last = rep.residual_norm;
        }
        assert!(last < 1e-8, "{last}");
    }

    #[test]
    fn converged_fixed_point_stays_put_on_frozen_plant() {
        let field = Frozen(Vector3::new(1.5e-5, -2.0e-5, 1.0e-5));
        let mut tr = CgmresTracker::new(problem(3), CgmresParams::for_period(1.0, 3), HorizonSolution::warm_start(3, 0.1, 0.01)).unwrap();
        let x = x0();
        let res = tr.initialize(&x, 0.0, &field, 50, 1e-11).unwrap();
        assert!(res < 1e-10, "{res}");
        let before = tr.solution().clone();
        tr.update(&x, &StateVector::zeros(), 0.0, 1.0, &field).unwrap();
        for (a, b) in before.as_slice().iter().zip(tr.solution().as_slice()) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_mismatched_initial_solution() {
        let r = CgmresTracker::new(problem(3), CgmresParams::for_period(1.0, 3), HorizonSolution::warm_start(2, 0.1, 0.01));
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }
}
