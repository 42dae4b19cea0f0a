use pushnav_adaptive::{Dynamics, ModelState};
use pushnav_mppi::*;
use pushnav_se2::{integrate, SE2Accel, SE2Pose};

struct PointMass { gain: f64, drag: f64, dt: f64 }
impl Dynamics for PointMass {
    fn dt(&self) -> f64 { self.dt }
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

#[test]
fn dbg_toy() {
    let m = PointMass { gain: 8.0, drag: 0.8, dt: 0.1 };
    let mut cfg = MppiConfig::default();
    cfg.samples = 192;
    cfg.horizon = 30;
    cfg.lambda_temp = 0.08;
    cfg.opt_iters = 4;
    cfg.noise_sigma = [0.06, 0.06, 0.15];
    cfg.noise_beta = 0.9;
    cfg.lambda_action = 0.002;
    cfg.lambda_smooth = 0.002;
    let goal = SE2Pose::new(1.0, 0.0, 0.0);
    let mut state = ModelState::at_rest(SE2Pose::new(-1.0, 0.0, 0.0), SE2Pose::identity());
    let mut nominal = vec![[0.0; 3]; cfg.horizon];
    let mut prev = [0.0; 3];
    for step in 0..30 {
        let (u, plan) = mppi_step(&m, &state, goal, &nominal, prev, &cfg, 1000 + step);
        m.step_batch(std::slice::from_mut(&mut state), &[u]);
        nominal = shift_nominal(&plan.nominal);
        prev = u;
        let d = ((state.object_pose.x - goal.x).powi(2) + (state.object_pose.y - goal.y).powi(2)).sqrt();
        println!("step {step}: u=({:.3},{:.3}) pose=({:.3},{:.3},{:.3}) d={:.3} cmin={:.3} v=({:.3},{:.3})",
            u[0], u[1], state.object_pose.x, state.object_pose.y, state.object_pose.yaw, d, plan.cost_min, state.object_twist.vx, state.object_twist.vy);
    }
}

#[test]
fn dbg_refinement() {
    let m = PointMass { gain: 8.0, drag: 0.8, dt: 0.1 };
    let mut cfg = MppiConfig::default();
    cfg.samples = 192;
    cfg.horizon = 30;
    cfg.lambda_temp = 0.08;
    cfg.noise_sigma = [0.06, 0.06, 0.15];
    cfg.noise_beta = 0.9;
    cfg.lambda_action = 0.002;
    cfg.lambda_smooth = 0.002;
    let goal = SE2Pose::new(1.0, 0.0, 0.0);
    let state = ModelState::at_rest(SE2Pose::new(-1.0, 0.0, 0.0), SE2Pose::identity());
    for iters in [1usize, 2, 4, 8] {
        cfg.opt_iters = iters;
        let (_, plan) = mppi_step(&m, &state, goal, &vec![[0.0;3];30], [0.0;3], &cfg, 77);
        // Cost of the blended nominal itself.
        let traj = rollout(&m, &state, &plan.nominal);
        let c = trajectory_cost(traj.last().unwrap().object_pose, &plan.nominal, [0.0;3], goal, &cfg);
        println!("iters={iters}: blended-cost={c:.4} cmin={:.4} terminal=({:.3},{:.3})",
            plan.cost_min, traj.last().unwrap().object_pose.x, traj.last().unwrap().object_pose.y);
    }
}
