//! Shared physical environment: a linear discrete-time thermal model of
//! offices with actuator inputs `u` and sensor outputs `y`.
//!
//! Dynamics: `x' = A x + B u + e (t_out[k] - t_ref) + w`, `y = C x' + v`,
//! with counter-based Gaussian noise so rollouts are reproducible.

use crate::error::{LabError, Result};
use crate::rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnvModel {
    /// Number of offices (state dimension).
    pub n_states: usize,
    /// Seconds per step.
    pub dt: f64,
    /// n x n state-transition matrix, row major.
    pub a: Vec<Vec<f64>>,
    /// n x m input matrix (K per unit input per step).
    pub b: Vec<Vec<f64>>,
    /// n-vector disturbance gain.
    pub e: Vec<f64>,
    /// p x n output matrix.
    pub c: Vec<Vec<f64>>,
    /// Process noise standard deviation, K.
    pub process_noise_std: f64,
    /// Sensor noise standard deviation, K.
    pub sensor_noise_std: f64,
    /// Outdoor temperature trajectory, K, piecewise constant per step.
    /// Steps beyond the last entry hold the last value.
    pub t_out: Vec<f64>,
    /// Reference temperature subtracted from t_out in the disturbance term.
    #[serde(default)]
    pub t_ref: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Office temperatures, K.
    pub x_env: Vec<f64>,
    /// Step index.
    pub k: u64,
    /// Seed for the counter-based noise stream.
    pub rng_seed: u64,
}

impl EnvModel {
    pub fn input_count(&self) -> usize {
        self.b.first().map_or(0, |row| row.len())
    }

    pub fn output_count(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states;
        if n == 0 {
            return Err(LabError::Config("n_states must be positive".into()));
        }
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(LabError::Config("dt must be positive".into()));
        }
        if self.a.len() != n || self.a.iter().any(|r| r.len() != n) {
            return Err(LabError::Config(format!("A must be {n}x{n}")));
        }
        let m = self.input_count();
        if self.b.len() != n || self.b.iter().any(|r| r.len() != m) {
            return Err(LabError::Config(format!("B must be {n}x{m}")));
        }
        if self.e.len() != n {
            return Err(LabError::Config(format!("E must have {n} rows")));
        }
        if self.c.is_empty() || self.c.iter().any(|r| r.len() != n) {
            return Err(LabError::Config(format!("C must have {n} columns")));
        }
        if self.process_noise_std < 0.0 || self.sensor_noise_std < 0.0 {
            return Err(LabError::Config("noise std must be >= 0".into()));
        }
        if self.t_out.is_empty() {
            return Err(LabError::Config("t_out must be nonempty".into()));
        }
        let finite = |rows: &[Vec<f64>]| rows.iter().flatten().all(|v| v.is_finite());
        if !finite(&self.a) || !finite(&self.b) || !finite(&self.c) {
            return Err(LabError::Config("matrix entries must be finite".into()));
        }
        if !self.e.iter().all(|v| v.is_finite()) || !self.t_out.iter().all(|v| v.is_finite()) {
            return Err(LabError::Config("vector entries must be finite".into()));
        }
        let rho = spectral_radius(&self.a);
        if !(rho < 1.0) {
            return Err(LabError::Config(format!(
                "spectral radius of A must be < 1, got {rho}"
            )));
        }
        Ok(())
    }

    pub fn t_out_at(&self, k: u64) -> f64 {
        let i = (k as usize).min(self.t_out.len() - 1);
        self.t_out[i]
    }

    /// Canonical 4-office plant: 0.95 self-retention, 0.01 coupling between
    /// adjacent offices, leakage to the outdoor temperature making
    /// `t_out * 1` the zero-input equilibrium. Inputs 0-3 are heater powers
    /// (+0.5 K/step/unit, owned by CPS A), inputs 4-7 are ventilation
    /// commands (-0.4 K/step/unit, owned by CPS B). Outputs stack two
    /// co-located but distinct sensor sets: rows 0-3 for CPS A, rows 4-7
    /// for CPS B.
    pub fn canonical(process_noise_std: f64, sensor_noise_std: f64) -> EnvModel {
        let n = 4;
        let mut a = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        for i in 0..n {
            a[i][i] = 0.95;
            if i > 0 {
                a[i][i - 1] = 0.01;
            }
            if i + 1 < n {
                a[i][i + 1] = 0.01;
            }
            e[i] = 1.0 - a[i].iter().sum::<f64>();
        }
        let mut b = vec![vec![0.0; 2 * n]; n];
        for i in 0..n {
            b[i][i] = 0.5;
            b[i][n + i] = -0.4;
        }
        let mut c = vec![vec![0.0; n]; 2 * n];
        for i in 0..n {
            c[i][i] = 1.0;
            c[n + i][i] = 1.0;
        }
        EnvModel {
            n_states: n,
            dt: 60.0,
            a,
            b,
            e,
            c,
            process_noise_std,
            sensor_noise_std,
            t_out: vec![263.15],
            t_ref: 0.0,
        }
    }

    pub fn from_json(text: &str) -> Result<EnvModel> {
        let model: EnvModel =
            serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

/// Dominant eigenvalue magnitude estimate by power iteration.
pub fn spectral_radius(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut rho = 0.0;
    for _ in 0..300 {
        let w = mat_vec(a, &v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        rho = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / norm).collect();
    }
    rho
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(aij, xj)| aij * xj).sum())
        .collect()
}

/// Initialize the environment at `t_out[0]` in every office.
pub fn env_reset(model: &EnvModel, seed: u64) -> Result<EnvState> {
    model.validate()?;
    Ok(EnvState {
        x_env: vec![model.t_out[0]; model.n_states],
        k: 0,
        rng_seed: seed,
    })
}

/// Advance one step under actuation `u`; returns the new state and the
/// sensor measurements for that step. Noise draws are keyed by
/// (seed, k, draw index): process noise uses indices 0..n, sensor noise
/// n..n+p.
pub fn env_step(state: &EnvState, model: &EnvModel, u: &[f64]) -> Result<(EnvState, Vec<f64>)> {
    let m = model.input_count();
    if u.len() != m {
        return Err(LabError::Input(format!(
            "u must have length {m}, got {}",
            u.len()
        )));
    }
    if !u.iter().all(|v| v.is_finite()) {
        return Err(LabError::Input("u must be finite".into()));
    }
    let n = model.n_states;
    let d = model.t_out_at(state.k) - model.t_ref;
    let mut x_next = mat_vec(&model.a, &state.x_env);
    for i in 0..n {
        let drive: f64 = model.b[i].iter().zip(u).map(|(bij, uj)| bij * uj).sum();
        x_next[i] += drive + model.e[i] * d;
        if model.process_noise_std > 0.0 {
            x_next[i] += model.process_noise_std * rng::normal(state.rng_seed, state.k, i as u64);
        }
    }
    let mut y = mat_vec(&model.c, &x_next);
    if model.sensor_noise_std > 0.0 {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj += model.sensor_noise_std * rng::normal(state.rng_seed, state.k, (n + j) as u64);
        }
    }
    Ok((
        EnvState {
            x_env: x_next,
            k: state.k + 1,
            rng_seed: state.rng_seed,
        },
        y,
    ))
}

/// Trajectory export with header `k,t_seconds,x_1..x_n,u_1..u_m,y_1..y_p`.
pub fn trajectory_csv(
    model: &EnvModel,
    rows: &[(u64, Vec<f64>, Vec<f64>, Vec<f64>)],
) -> String {
    let mut header = String::from("k,t_seconds");
    for i in 1..=model.n_states {
        header.push_str(&format!(",x_{i}"));
    }
    for i in 1..=model.input_count() {
        header.push_str(&format!(",u_{i}"));
    }
    for i in 1..=model.output_count() {
        header.push_str(&format!(",y_{i}"));
    }
    let mut out = header;
    out.push('\n');
    for (k, x, u, y) in rows {
        out.push_str(&format!("{k},{}", *k as f64 * model.dt));
        for v in x.iter().chain(u).chain(y) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_free() -> EnvModel {
        EnvModel {
            t_out: vec![283.15],
            ..EnvModel::canonical(0.0, 0.0)
        }
    }

    #[test]
    fn reset_initializes_to_first_outdoor_temp() {
        let model = noise_free();
        let state = env_reset(&model, 7).unwrap();
        assert_eq!(state.x_env, vec![283.15; 4]);
        assert_eq!(state.k, 0);
    }

    #[test]
    fn reset_is_deterministic() {
        let model = EnvModel::canonical(0.05, 0.1);
        assert_eq!(env_reset(&model, 7).unwrap(), env_reset(&model, 7).unwrap());
    }

    #[test]
    fn bad_b_dimensions_rejected() {
        let mut model = noise_free();
        model.b.pop();
        assert!(matches!(env_reset(&model, 7), Err(LabError::Config(_))));
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        // With the canonical leakage construction, t_out * 1 solves
        // (I - A) x = E * t_out, so it is the zero-input equilibrium.
        let model = noise_free();
        let state = env_reset(&model, 1).unwrap();
        let (next, _) = env_step(&state, &model, &vec![0.0; 8]).unwrap();
        for (a, b) in state.x_env.iter().zip(&next.x_env) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn nan_input_rejected() {
        let model = noise_free();
        let state = env_reset(&model, 1).unwrap();
        let mut u = vec![0.0; 8];
        u[3] = f64::NAN;
        assert!(matches!(env_step(&state, &model, &u), Err(LabError::Input(_))));
    }

    #[test]
    fn matches_independent_dense_recursion_oracle() {
        // Independently coded recursion: explicit nested loops, no shared
        // helpers with the implementation path.
        let model = noise_free();
        let mut x = vec![283.15; 4];
        let mut u = vec![0.0; 8];
        u[0] = 1.0; // unit step on heater 0
        let mut state = env_reset(&model, 1).unwrap();
        for k in 0..50u64 {
            let (next, y) = env_step(&state, &model, &u).unwrap();
            // oracle step
            let d = model.t_out[0];
            let mut xn = vec![0.0; 4];
            for i in 0..4 {
                let mut acc = model.e[i] * d;
                for j in 0..4 {
                    acc += model.a[i][j] * x[j];
                }
                for j in 0..8 {
                    acc += model.b[i][j] * u[j];
                }
                xn[i] = acc;
            }
            let mut yo = vec![0.0; 8];
            for (i, row) in model.c.iter().enumerate() {
                for j in 0..4 {
                    yo[i] += row[j] * xn[j];
                }
            }
            x = xn;
            for (a, b) in y.iter().zip(&yo) {
                assert!((a - b).abs() < 1e-12, "step {k}: {a} vs {b}");
            }
            state = next;
        }
    }

    #[test]
    fn trajectories_are_bit_identical_given_seed() {
        let model = EnvModel::canonical(0.05, 0.1);
        let run = |seed| {
            let mut state = env_reset(&model, seed).unwrap();
            let mut ys = Vec::new();
            for _ in 0..100 {
                let (next, y) = env_step(&state, &model, &vec![0.3; 8]).unwrap();
                state = next;
                ys.push(y);
            }
            ys
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn bounded_for_a_million_steps() {
        let model = noise_free();
        let mut state = env_reset(&model, 1).unwrap();
        let u = vec![1.0; 8];
        for _ in 0..1_000_000 {
            let (next, _) = env_step(&state, &model, &u).unwrap();
            state = next;
        }
        assert!(state.x_env.iter().all(|x| x.is_finite() && x.abs() < 1e4));
    }

    #[test]
    fn superposition_holds_noise_free() {
        let model = noise_free();
        let rollout = |u: &[f64]| {
            let mut state = env_reset(&model, 1).unwrap();
            let mut last = Vec::new();
            for _ in 0..30 {
                let (next, y) = env_step(&state, &model, u).unwrap();
                state = next;
                last = y;
            }
            last
        };
        let mut u1 = vec![0.0; 8];
        u1[0] = 0.7;
        let mut u2 = vec![0.0; 8];
        u2[5] = 0.4;
        let u12: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
        let zero = rollout(&vec![0.0; 8]);
        let y1 = rollout(&u1);
        let y2 = rollout(&u2);
        let y12 = rollout(&u12);
        for i in 0..8 {
            let expect = y1[i] + y2[i] - zero[i];
            assert!((y12[i] - expect).abs() < 1e-9, "{} vs {}", y12[i], expect);
        }
    }

    #[test]
    fn heater_step_propagates_to_other_sensor_set() {
        // A step on a CPS-A heater input must change subsequent CPS-B
        // readings of the same office.
        let model = noise_free();
        let rollout = |heater: f64| {
            let mut state = env_reset(&model, 1).unwrap();
            let mut u = vec![0.0; 8];
            u[2] = heater;
            let mut last = Vec::new();
            for _ in 0..10 {
                let (next, y) = env_step(&state, &model, &u).unwrap();
                state = next;
                last = y;
            }
            last
        };
        let base = rollout(0.0);
        let stepped = rollout(1.0);
        assert!((stepped[6] - base[6]).abs() > 0.1, "no cross response");
    }

    #[test]
    fn canonical_plant_is_stable_and_consistent() {
        let model = EnvModel::canonical(0.05, 0.1);
        model.validate().unwrap();
        assert!(spectral_radius(&model.a) < 1.0);
        assert_eq!(model.input_count(), 8);
        assert_eq!(model.output_count(), 8);
    }

    #[test]
    fn json_round_trip_and_csv_header() {
        let model = EnvModel::canonical(0.0, 0.0);
        let text = serde_json::to_string(&model).unwrap();
        let back = EnvModel::from_json(&text).unwrap();
        assert_eq!(model, back);
        let csv = trajectory_csv(&model, &[]);
        assert!(csv.starts_with("k,t_seconds,x_1,x_2,x_3,x_4,u_1"));
        assert!(csv.contains("y_8"));
    }
}
