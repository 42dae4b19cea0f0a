//! Model predictive path integral control: sample perturbed action
//! sequences, roll out the transition model, and blend the sequences with
//! softmax weights on trajectory cost.
//!
//! Rollouts are pure given (model, start state, action sequence) and run in
//! parallel over fixed-size chunks; per-sample noise comes from a generator
//! seeded by (master seed, sample index), so results are identical
//! regardless of thread count or execution order.

use pushnav_adaptive::{Dynamics, ModelState};
use pushnav_se2::{wrap_angle, SE2Pose};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Fixed rollout chunk width; part of the deterministic contract, not a
/// tuning knob.
const CHUNK: usize = 64;

/// Controller configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MppiConfig {
    /// Number of sampled action sequences S.
    pub samples: usize,
    /// Horizon length T in control periods.
    pub horizon: usize,
    /// Softmax temperature.
    pub lambda_temp: f64,
    /// Action-magnitude penalty λ₁.
    pub lambda_action: f64,
    /// Action-change penalty λ₂.
    pub lambda_smooth: f64,
    /// Per-channel sampling noise std for [phi_x, phi_y, gamma].
    pub noise_sigma: [f64; 3],
    /// Temporal correlation of the exploration noise in [0, 1): 0 is white,
    /// higher values explore smoother sequences at the same marginal std.
    pub noise_beta: f64,
    /// Lean command limit (rad).
    pub phi_limit: f64,
    /// Steering command limit (rad).
    pub gamma_limit: f64,
    /// Sampling/blend refinements per control step. Each iteration
    /// re-centers the noise on the blended sequence from the previous one.
    pub opt_iters: usize,
}

impl Default for MppiConfig {
    fn default() -> Self {
        MppiConfig {
            samples: 500,
            horizon: 30,
            lambda_temp: 0.7,
            lambda_action: 0.01,
            lambda_smooth: 0.02,
            noise_sigma: [0.03, 0.03, 0.15],
            noise_beta: 0.85,
            phi_limit: 0.12,
            gamma_limit: 0.6,
            opt_iters: 1,
        }
    }
}

impl MppiConfig {
    pub fn clamp_action(&self, u: [f64; 3]) -> [f64; 3] {
        [
            u[0].clamp(-self.phi_limit, self.phi_limit),
            u[1].clamp(-self.phi_limit, self.phi_limit),
            u[2].clamp(-self.gamma_limit, self.gamma_limit),
        ]
    }
}

/// Result of one controller step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Plan {
    /// Blended action sequence whose first element is executed.
    pub nominal: Vec<[f64; 3]>,
    /// Normalized sample weights.
    pub weights: Vec<f64>,
    /// Terminal object poses of every rollout.
    pub terminal_object_poses: Vec<SE2Pose>,
    /// Indexes of the k lowest-cost rollouts (k = 3 or fewer).
    pub best_indices: Vec<usize>,
    pub cost_min: f64,
    pub cost_mean: f64,
    /// Effective sample size 1/Σw².
    pub effective_samples: f64,
    /// Set when every rollout went non-finite.
    pub failed: bool,
}

impl Plan {
    /// Terminal object poses of the best rollouts, for the manipulability
    /// check.
    pub fn best_terminals(&self) -> Vec<SE2Pose> {
        self.best_indices
            .iter()
            .map(|&i| self.terminal_object_poses[i])
            .collect()
    }
}

/// Roll a single action sequence from `x0`; returns the trajectory
/// including the start state (length `|seq| + 1`). A non-finite state poisons
/// the remainder of the trajectory.
pub fn rollout(model: &dyn Dynamics, x0: &ModelState, seq: &[[f64; 3]]) -> Vec<ModelState> {
    let mut out = Vec::with_capacity(seq.len() + 1);
    out.push(*x0);
    let mut s = *x0;
    for u in seq {
        s = model.step(&s, *u);
        out.push(s);
    }
    out
}

/// Trajectory cost: terminal Euclidean distance of the object pose to the
/// goal on (x, y, yaw) — yaw wrapped — plus summed action-magnitude and
/// action-change penalties. `prev_action` seeds the first smoothness term.
pub fn trajectory_cost(
    terminal_object: SE2Pose,
    seq: &[[f64; 3]],
    prev_action: [f64; 3],
    goal: SE2Pose,
    cfg: &MppiConfig,
) -> f64 {
    let dx = terminal_object.x - goal.x;
    let dy = terminal_object.y - goal.y;
    let dyaw = wrap_angle(terminal_object.yaw - goal.yaw);
    let mut cost = (dx * dx + dy * dy + dyaw * dyaw).sqrt();
    let mut prev = prev_action;
    for u in seq {
        let mag = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        let d = [u[0] - prev[0], u[1] - prev[1], u[2] - prev[2]];
        let change = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        cost += cfg.lambda_action * mag + cfg.lambda_smooth * change;
        prev = *u;
    }
    cost
}

/// Deterministic per-sample stream seed (splitmix64 over the master seed
/// and sample index).
fn sample_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One controller step: sample, roll out, weight, blend — repeated
/// `opt_iters` times with the sampling re-centered on each blend.
///
/// Returns the first action of the new nominal and the full [`Plan`]
/// (`plan.nominal` is the *unshifted* blended sequence; the caller passes
/// `shift_nominal(&plan.nominal)` into the next step).
pub fn mppi_step(
    model: &dyn Dynamics,
    x0: &ModelState,
    goal: SE2Pose,
    nominal: &[[f64; 3]],
    prev_action: [f64; 3],
    cfg: &MppiConfig,
    seed: u64,
) -> ([f64; 3], Plan) {
    let mut current = nominal.to_vec();
    let iters = cfg.opt_iters.max(1);
    let mut result = None;
    for pass in 0..iters {
        let pass_seed = seed ^ (pass as u64).wrapping_mul(0xA076_1D64_78BD_642F);
        let (u, plan) = mppi_pass(model, x0, goal, &current, prev_action, cfg, pass_seed);
        if plan.failed {
            return (u, plan);
        }
        current = plan.nominal.clone();
        result = Some((u, plan));
    }
    result.expect("opt_iters >= 1")
}

fn mppi_pass(
    model: &dyn Dynamics,
    x0: &ModelState,
    goal: SE2Pose,
    nominal: &[[f64; 3]],
    prev_action: [f64; 3],
    cfg: &MppiConfig,
    seed: u64,
) -> ([f64; 3], Plan) {
    assert!(cfg.samples >= 1 && cfg.horizon >= 1 && cfg.lambda_temp > 0.0);
    assert_eq!(nominal.len(), cfg.horizon);
    let s = cfg.samples;
    let t = cfg.horizon;

    // Per-sample perturbed sequences, seeded independently of execution
    // order.
    let make_sequence = |i: usize| -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i as u64));
        let beta = cfg.noise_beta.clamp(0.0, 0.999);
        let fresh = (1.0 - beta * beta).sqrt();
        let mut eps = [0.0f64; 3];
        (0..t)
            .map(|k| {
                for (d, e) in eps.iter_mut().enumerate() {
                    let xi = gauss(&mut rng) * cfg.noise_sigma[d];
                    *e = if k == 0 { xi } else { beta * *e + fresh * xi };
                }
                cfg.clamp_action([
                    nominal[k][0] + eps[0],
                    nominal[k][1] + eps[1],
                    nominal[k][2] + eps[2],
                ])
            })
            .collect()
    };

    let n_chunks = s.div_ceil(CHUNK);
    let chunk_results: Vec<Vec<(Vec<[f64; 3]>, SE2Pose, f64)>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * CHUNK;
            let hi = ((ci + 1) * CHUNK).min(s);
            let seqs: Vec<Vec<[f64; 3]>> = (lo..hi).map(make_sequence).collect();
            let mut states = vec![*x0; hi - lo];
            let mut alive = vec![true; hi - lo];
            for k in 0..t {
                let controls: Vec<[f64; 3]> = seqs.iter().map(|q| q[k]).collect();
                model.step_batch(&mut states, &controls);
                for (j, st) in states.iter().enumerate() {
                    if alive[j] && !st.is_finite() {
                        alive[j] = false;
                    }
                }
            }
            seqs.into_iter()
                .zip(states)
                .zip(alive)
                .map(|((seq, st), ok)| {
                    let cost = if ok {
                        trajectory_cost(st.object_pose, &seq, prev_action, goal, cfg)
                    } else {
                        f64::INFINITY
                    };
                    (seq, st.object_pose, cost)
                })
                .collect()
        })
        .collect();

    let mut sequences = Vec::with_capacity(s);
    let mut terminals = Vec::with_capacity(s);
    let mut costs = Vec::with_capacity(s);
    for chunk in chunk_results {
        for (seq, term, cost) in chunk {
            sequences.push(seq);
            terminals.push(term);
            costs.push(cost);
        }
    }

    let cost_min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !cost_min.is_finite() {
        return (
            [0.0; 3],
            Plan {
                nominal: nominal.to_vec(),
                weights: vec![0.0; s],
                terminal_object_poses: terminals,
                best_indices: vec![],
                cost_min,
                cost_mean: f64::INFINITY,
                effective_samples: 0.0,
                failed: true,
            },
        );
    }

    // Softmax weights with the minimum subtracted for numerical stability.
    let mut weights: Vec<f64> = costs
        .iter()
        .map(|c| {
            if c.is_finite() {
                (-(c - cost_min) / cfg.lambda_temp).exp()
            } else {
                0.0
            }
        })
        .collect();
    let z: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= z;
    }

    let mut new_nominal = vec![[0.0f64; 3]; t];
    for (w, seq) in weights.iter().zip(&sequences) {
        for k in 0..t {
            for d in 0..3 {
                new_nominal[k][d] += w * seq[k][d];
            }
        }
    }

    // Indices of the 3 lowest-cost rollouts for the object planner.
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| costs[a].partial_cmp(&costs[b]).unwrap().then(a.cmp(&b)));
    let best_indices: Vec<usize> = order.into_iter().take(3.min(s)).collect();

    let finite_count = costs.iter().filter(|c| c.is_finite()).count().max(1);
    let cost_mean = costs.iter().filter(|c| c.is_finite()).sum::<f64>() / finite_count as f64;
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>().max(1e-300);

    let u_first = new_nominal[0];
    (
        u_first,
        Plan {
            nominal: new_nominal,
            weights,
            terminal_object_poses: terminals,
            best_indices,
            cost_min,
            cost_mean,
            effective_samples: ess,
            failed: false,
        },
    )
}

/// Shift a nominal sequence one step (execute-and-repeat-last).
pub fn shift_nominal(nominal: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut out: Vec<[f64; 3]> = nominal[1..].to_vec();
    out.push(*nominal.last().expect("non-empty nominal"));
    out
}

/// A per-step debug record appended to a line-delimited log when tracing is
/// on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDebugRecord {
    pub step: usize,
    pub cost_min: f64,
    pub cost_mean: f64,
    pub effective_samples: f64,
    pub chosen_u: [f64; 3],
}

/// Standard-normal draw via Box-Muller (two uniform draws per call keeps
/// the stream layout independent of rejection behavior).
fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use pushnav_se2::{integrate, SE2Accel, SE2Twist};

    /// Frictionless planar point mass driven directly by the lean channels.
    struct PointMass {
        gain: f64,
        drag: f64,
        dt: f64,
    }

    impl Dynamics for PointMass {
        fn dt(&self) -> f64 {
            self.dt
        }
        fn step_batch(&self, states: &mut [ModelState], controls: &[[f64; 3]]) {
            for (s, u) in states.iter_mut().zip(controls) {
                let a = SE2Accel::new(
                    self.gain * u[0] - self.drag * s.object_twist.vx,
                    self.gain * u[1] - self.drag * s.object_twist.vy,
                    -2.0 * s.object_twist.omega,
                );
                let (p, v) = integrate(s.object_pose, s.object_twist, a, self.dt);
                s.object_pose = p;
                s.object_twist = v;
            }
        }
    }

    fn start_state() -> ModelState {
        ModelState::at_rest(SE2Pose::new(-1.0, 0.0, 0.0), SE2Pose::identity())
    }

    #[test]
    fn horizon_zero_style_rollout_is_start_only() {
        let m = PointMass {
            gain: 5.0,
            drag: 0.5,
            dt: 0.1,
        };
        let traj = rollout(&m, &start_state(), &[]);
        assert_eq!(traj.len(), 1);
    }

    #[test]
    fn zero_actions_object_at_rest_stays() {
        let m = PointMass {
            gain: 5.0,
            drag: 0.5,
            dt: 0.1,
        };
        let traj = rollout(&m, &start_state(), &vec![[0.0; 3]; 10]);
        for s in traj {
            assert_eq!(s.object_pose, SE2Pose::identity());
        }
    }

    #[test]
    fn cost_zero_at_goal_with_zero_actions() {
        let cfg = MppiConfig::default();
        let c = trajectory_cost(
            SE2Pose::new(1.0, 2.0, 0.3),
            &vec![[0.0; 3]; 5],
            [0.0; 3],
            SE2Pose::new(1.0, 2.0, 0.3),
            &cfg,
        );
        assert_eq!(c, 0.0);
    }

    #[test]
    fn cost_three_four_five() {
        let cfg = MppiConfig::default();
        let c = trajectory_cost(
            SE2Pose::new(3.0, 4.0, 0.0),
            &vec![[0.0; 3]; 5],
            [0.0; 3],
            SE2Pose::identity(),
            &cfg,
        );
        assert!((c - 5.0).abs() < 1e-12);
    }

    #[test]
    fn cost_action_terms_hand_sum() {
        // Constant u = (0.1,0,0), λ1 = λ2 = 0.01, T = 2, zero distance:
        // 2·0.01·0.1 magnitude + 0.01·0.1 first-step change.
        let mut cfg = MppiConfig::default();
        cfg.lambda_action = 0.01;
        cfg.lambda_smooth = 0.01;
        let seq = vec![[0.1, 0.0, 0.0]; 2];
        let c = trajectory_cost(SE2Pose::identity(), &seq, [0.0; 3], SE2Pose::identity(), &cfg);
        assert!((c - (2.0 * 0.01 * 0.1 + 0.01 * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn single_sample_zero_noise_returns_nominal() {
        let m = PointMass {
            gain: 5.0,
            drag: 0.5,
            dt: 0.1,
        };
        let mut cfg = MppiConfig::default();
        cfg.samples = 1;
        cfg.horizon = 5;
        cfg.noise_sigma = [0.0; 3];
        let nominal = vec![[0.05, -0.02, 0.1]; 5];
        let (u, plan) = mppi_step(
            &m,
            &start_state(),
            SE2Pose::new(1.0, 0.0, 0.0),
            &nominal,
            [0.0; 3],
            &cfg,
            42,
        );
        assert_eq!(u, [0.05, -0.02, 0.1]);
        assert!(!plan.failed);
    }

    #[test]
    fn weights_normalized_and_nonnegative() {
        let m = PointMass {
            gain: 5.0,
            drag: 0.5,
            dt: 0.1,
        };
        let mut cfg = MppiConfig::default();
        cfg.samples = 64;
        cfg.horizon = 8;
        let nominal = vec![[0.0; 3]; 8];
        let (_, plan) = mppi_step(
            &m,
            &start_state(),
            SE2Pose::new(1.0, 0.0, 0.0),
            &nominal,
            [0.0; 3],
            &cfg,
            7,
        );
        let sum: f64 = plan.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(plan.weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn deterministic_across_calls() {
        let m = PointMass {
            gain: 5.0,
            drag: 0.5,
            dt: 0.1,
        };
        let mut cfg = MppiConfig::default();
        cfg.samples = 50;
        cfg.horizon = 10;
        let nominal = vec![[0.01, 0.0, 0.0]; 10];
        let run = || {
            mppi_step(
                &m,
                &start_state(),
                SE2Pose::new(1.0, 0.5, 0.0),
                &nominal,
                [0.0; 3],
                &cfg,
                123,
            )
        };
        let (u1, p1) = run();
        let (u2, p2) = run();
        assert_eq!(u1, u2);
        assert_eq!(p1.nominal, p2.nominal);
        assert_eq!(p1.weights, p2.weights);
        assert_eq!(p1.cost_min, p2.cost_min);
    }

    #[test]
    fn low_temperature_tracks_best_sample() {
        let m = PointMass {
            gain: 5.0,
            drag: 0.5,
            dt: 0.1,
        };
        let mut cfg = MppiConfig::default();
        cfg.samples = 40;
        cfg.horizon = 6;
        cfg.lambda_temp = 1e-5;
        let nominal = vec![[0.0; 3]; 6];
        let (_, plan) = mppi_step(
            &m,
            &start_state(),
            SE2Pose::new(0.5, 0.0, 0.0),
            &nominal,
            [0.0; 3],
            &cfg,
            99,
        );
        // At near-zero temperature the blend collapses onto the best sample.
        let best = plan.best_indices[0];
        assert!(plan.weights[best] > 0.999, "w_best = {}", plan.weights[best]);
    }

    #[test]
    fn translation_invariance_of_costs() {
        let m = PointMass {
            gain: 5.0,
            drag: 0.5,
            dt: 0.1,
        };
        let mut cfg = MppiConfig::default();
        cfg.samples = 32;
        cfg.horizon = 8;
        let nominal = vec![[0.0; 3]; 8];
        let goal = SE2Pose::new(1.0, -0.5, 0.0);
        let (_, p1) = mppi_step(&m, &start_state(), goal, &nominal, [0.0; 3], &cfg, 5);
        let shift = [13.0, -7.0];
        let mut x2 = start_state();
        x2.object_pose = SE2Pose::new(shift[0], shift[1], 0.0);
        x2.robot_pose = SE2Pose::new(-1.0 + shift[0], shift[1], 0.0);
        let goal2 = SE2Pose::new(goal.x + shift[0], goal.y + shift[1], 0.0);
        let (_, p2) = mppi_step(&m, &x2, goal2, &nominal, [0.0; 3], &cfg, 5);
        assert!((p1.cost_min - p2.cost_min).abs() < 1e-9);
        assert!((p1.cost_mean - p2.cost_mean).abs() < 1e-9);
    }

    #[test]
    fn point_mass_reaches_goal_closed_loop() {
        let m = PointMass {
            gain: 5.0,
            drag: 0.5,
            dt: 0.1,
        };
        let mut cfg = MppiConfig::default();
        cfg.samples = 128;
        cfg.horizon = 30;
        // Temperature sized to the toy's sub-meter cost spread.
        cfg.lambda_temp = 0.05;
        cfg.noise_sigma = [0.05, 0.05, 0.15];
        let goal = SE2Pose::new(1.0, 0.0, 0.0);
        let mut state = start_state();
        let mut nominal = vec![[0.0; 3]; cfg.horizon];
        let mut prev = [0.0; 3];
        for step in 0..30 {
            let (u, plan) = mppi_step(&m, &state, goal, &nominal, prev, &cfg, 1000 + step);
            m.step_batch(std::slice::from_mut(&mut state), &[u]);
            nominal = shift_nominal(&plan.nominal);
            prev = u;
        }
        let d = ((state.object_pose.x - goal.x).powi(2)
            + (state.object_pose.y - goal.y).powi(2))
        .sqrt();
        assert!(d < 0.1, "terminal distance {d}");
    }
}
