//! Pathwise simulation of the full system and additive functionals.
//!
//! Two schemes: an exact one (the `(κ, θ)` pair is advanced by its exact
//! Gaussian transition, so any step size is exact in law and only the
//! position quadrature sees the step) and Euler-Maruyama for generalized
//! curvature drifts. Position increments use the trapezoid rule, making the
//! position error `O(dt²)` per unit time.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PtwError, Result};
use crate::gaussian::{cholesky2, transition_law};
use crate::model::{speed, tau, DriftSpec, FullState, KineticState, ModelParams};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExactKinetic,
    EulerMaruyama,
}

/// A simulated path sampled on a uniform time grid starting at 0.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub dt: f64,
    pub times: Vec<f64>,
    pub frames: Vec<FullState>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// Precomputed exact kinetic update for a fixed step. The per-step work is
/// two standard normals and a handful of multiplications.
pub struct ExactStepper {
    dt: f64,
    e_dt: f64,
    one_m_e_dt: f64,
    chol: [f64; 3],
}

impl ExactStepper {
    pub fn new(params: &ModelParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if params.drift != DriftSpec::Ou {
            return Err(PtwError::RequiresOuDrift("exact scheme"));
        }
        if !(dt > 0.0) {
            return Err(PtwError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let law = transition_law(dt, (0.0, 0.0), params.alpha)?;
        Ok(Self {
            dt,
            e_dt: (-dt).exp(),
            one_m_e_dt: -(-dt).exp_m1(),
            chol: cholesky2(&law.cov),
        })
    }

    /// Advance only `(κ, θ)` with externally supplied standard normals.
    pub fn step_kinetic_with_normals(&self, kappa: f64, theta: f64, z1: f64, z2: f64) -> (f64, f64) {
        let k1 = self.e_dt * kappa + self.chol[0] * z1;
        let th1 = theta + self.one_m_e_dt * kappa + self.chol[1] * z1 + self.chol[2] * z2;
        (k1, th1)
    }

    /// Advance the full state with externally supplied standard normals.
    /// Position uses the trapezoid rule on `c(|κ|) τ(θ)`.
    pub fn step_with_normals(
        &self,
        params: &ModelParams,
        st: &FullState,
        z1: f64,
        z2: f64,
    ) -> FullState {
        let (k1, th1) = self.step_kinetic_with_normals(st.kappa, st.theta_unwrapped, z1, z2);
        let c0 = speed(params, st.kappa);
        let c1 = speed(params, k1);
        let t0 = tau(st.theta_unwrapped);
        let t1 = tau(th1);
        let h = 0.5 * self.dt;
        FullState {
            x: [st.x[0] + h * (c0 * t0[0] + c1 * t1[0]), st.x[1] + h * (c0 * t0[1] + c1 * t1[1])],
            theta_unwrapped: th1,
            kappa: k1,
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, params: &ModelParams, st: &FullState, rng: &mut R) -> FullState {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        self.step_with_normals(params, st, z1, z2)
    }

    pub fn step_kinetic<R: Rng + ?Sized>(&self, kappa: f64, theta: f64, rng: &mut R) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        self.step_kinetic_with_normals(kappa, theta, z1, z2)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// Euler-Maruyama update: works for any drift. The angle advances with the
/// pre-step curvature; noise amplitude is `√(2 dt)·α`.
pub struct EulerStepper {
    dt: f64,
    noise: f64,
}

impl EulerStepper {
    pub fn new(params: &ModelParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(PtwError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        // alpha = 0 is allowed here: the scheme degenerates to explicit Euler
        if params.alpha < 0.0 || !params.alpha.is_finite() {
            return Err(PtwError::InvalidParameter(format!("alpha must be >= 0, got {}", params.alpha)));
        }
        Ok(Self { dt, noise: (2.0 * dt).sqrt() * params.alpha })
    }

    pub fn step_with_normal(&self, params: &ModelParams, st: &FullState, z: f64) -> FullState {
        let k0 = st.kappa;
        let k1 = k0 + params.drift_at(k0) * self.dt + self.noise * z;
        let th1 = st.theta_unwrapped + k0 * self.dt;
        let c0 = speed(params, k0);
        let c1 = speed(params, k1);
        let t0 = tau(st.theta_unwrapped);
        let t1 = tau(th1);
        let h = 0.5 * self.dt;
        FullState {
            x: [st.x[0] + h * (c0 * t0[0] + c1 * t1[0]), st.x[1] + h * (c0 * t0[1] + c1 * t1[1])],
            theta_unwrapped: th1,
            kappa: k1,
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, params: &ModelParams, st: &FullState, rng: &mut R) -> FullState {
        let z: f64 = rng.sample(StandardNormal);
        self.step_with_normal(params, st, z)
    }
}

/// One exact step (OU drift only).
pub fn step_exact<R: Rng + ?Sized>(
    state: &FullState,
    dt: f64,
    params: &ModelParams,
    rng: &mut R,
) -> Result<FullState> {
    Ok(ExactStepper::new(params, dt)?.step(params, state, rng))
}

/// One Euler-Maruyama step.
pub fn step_euler_maruyama<R: Rng + ?Sized>(
    state: &FullState,
    dt: f64,
    params: &ModelParams,
    rng: &mut R,
) -> Result<FullState> {
    Ok(EulerStepper::new(params, dt)?.step(params, state, rng))
}

/// Simulate `⌈T/dt⌉` steps of the chosen scheme from `init`. Deterministic
/// function of `(init, rng state, dt, scheme)`.
pub fn simulate_path<R: Rng + ?Sized>(
    params: &ModelParams,
    scheme: Scheme,
    t_final: f64,
    dt: f64,
    init: &FullState,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(dt > 0.0) || t_final < dt {
        return Err(PtwError::InvalidParameter(format!(
            "need T >= dt > 0, got T={t_final}, dt={dt}"
        )));
    }
    let n_steps = (t_final / dt - 1e-9).ceil() as usize;
    let mut frames = Vec::with_capacity(n_steps + 1);
    let mut times = Vec::with_capacity(n_steps + 1);
    frames.push(*init);
    times.push(0.0);
    match scheme {
        Scheme::ExactKinetic => {
            let stepper = ExactStepper::new(params, dt)?;
            let mut st = *init;
            for i in 1..=n_steps {
                st = stepper.step(params, &st, rng);
                frames.push(st);
                times.push(i as f64 * dt);
            }
        }
        Scheme::EulerMaruyama => {
            let stepper = EulerStepper::new(params, dt)?;
            let mut st = *init;
            for i in 1..=n_steps {
                st = stepper.step(params, &st, rng);
                frames.push(st);
                times.push(i as f64 * dt);
            }
        }
    }
    Ok(Trajectory { scheme, dt, times, frames })
}

/// Trapezoid-rule value of `∫₀^T f(y_s) ds` along a trajectory.
pub fn additive_functional<F: Fn(&KineticState) -> f64>(traj: &Trajectory, f: F) -> f64 {
    let vals: Vec<f64> = traj.frames.iter().map(|fr| f(&fr.kinetic())).collect();
    trapezoid(&vals, traj.dt)
}

/// Trapezoid-rule value for a vector observable.
pub fn additive_functional_pair<F: Fn(&KineticState) -> [f64; 2]>(
    traj: &Trajectory,
    f: F,
) -> [f64; 2] {
    let mut acc = [0.0, 0.0];
    for w in traj.frames.windows(2) {
        let a = f(&w[0].kinetic());
        let b = f(&w[1].kinetic());
        acc[0] += 0.5 * traj.dt * (a[0] + b[0]);
        acc[1] += 0.5 * traj.dt * (a[1] + b[1]);
    }
    acc
}

fn trapezoid(vals: &[f64], dt: f64) -> f64 {
    if vals.len() < 2 {
        return 0.0;
    }
    let inner: f64 = vals[1..vals.len() - 1].iter().sum();
    dt * (0.5 * vals[0] + inner + 0.5 * vals[vals.len() - 1])
}

/// One entry of a rescaled sample: the scaled functional over `[0, t/ε²]`
/// and the kinetic state at `t/ε²`.
#[derive(Debug, Clone, Copy)]
pub struct RescaledSample {
    pub t: f64,
    pub z: f64,
    pub y: KineticState,
}

/// Diffusive rescaling `(ε ∫₀^{t/ε²} f, y_{t/ε²})` read off a stored
/// trajectory at the requested times. Each `t/ε²` must lie within the
/// trajectory horizon; it is snapped to the nearest stored frame.
pub fn rescale<F: Fn(&KineticState) -> f64>(
    traj: &Trajectory,
    epsilon: f64,
    f: F,
    t_grid: &[f64],
) -> Result<Vec<RescaledSample>> {
    if !(epsilon > 0.0) {
        return Err(PtwError::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let vals: Vec<f64> = traj.frames.iter().map(|fr| f(&fr.kinetic())).collect();
    // cumulative trapezoid
    let mut cum = Vec::with_capacity(vals.len());
    cum.push(0.0);
    for i in 1..vals.len() {
        cum.push(cum[i - 1] + 0.5 * traj.dt * (vals[i - 1] + vals[i]));
    }
    let horizon = traj.duration();
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let needed = t / (epsilon * epsilon);
        if needed > horizon * (1.0 + 1e-12) {
            return Err(PtwError::HorizonTooShort { horizon, needed });
        }
        let idx = ((needed / traj.dt).round() as usize).min(traj.frames.len() - 1);
        out.push(RescaledSample { t, z: epsilon * cum[idx], y: traj.frames[idx].kinetic() });
    }
    Ok(out)
}
