//! Synthetic planar handwriting demos and the DS-plus-stabilizer letter field
//! built from them.

use nalgebra::{Matrix6, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::OperatorConfig;
use super::engine::Engine;
use super::operator::LiveInput;
use super::scenario::{BodyParams, FixtureInstance, Scenario};
use crate::error::Result;
use crate::exec::Execution;
use crate::fixtures::ds::{DsFixture, DsPolicy, DsTrainConfig, Projection, StabilizingPolicy};
use crate::fixtures::FixtureModel;
use crate::geometry::frames::{Frame, FrameTree};
use crate::geometry::{ManifoldId, ManifoldPoint, Quat};
use crate::learning::{Demonstration, KmpParams};

/// Demos of an "A" stroke: an inverted V from `(0, 0)` over an apex near
/// `(0.5, 1)` to `(1, 0)`, slowing to rest at the end.
pub fn letter_a_demos(n_demos: usize, n_samples: usize, duration: f64, seed: u64) -> Result<Vec<Demonstration>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_demos);
    for _ in 0..n_demos {
        let mut jitter = || Vector2::<f64>::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
        let start = Vector2::new(0.0, 0.0) + jitter();
        let apex = Vector2::new(0.5, 1.0) + jitter();
        let end = Vector2::new(1.0, 0.0);
        let (l1, l2) = ((apex - start).norm(), (end - apex).norm());
        let mut times = Vec::with_capacity(n_samples);
        let mut points = Vec::with_capacity(n_samples);
        for k in 0..n_samples {
            let tau = k as f64 / (n_samples - 1) as f64;
            let s = (1.0 - (1.0 - tau).powi(2)) * (l1 + l2);
            let p: Vector2<f64> = if s <= l1 { start + (apex - start) * (s / l1) } else { apex + (end - apex) * ((s - l1) / l2) };
            times.push(tau * duration);
            points.push(ManifoldPoint::m1(Vector3::new(p.x, p.y, 0.0), Quat::identity()));
        }
        out.push(Demonstration::new(times, points)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LetterFieldParams {
    pub train: DsTrainConfig,
    pub d_vf: f64,
    pub stab_speed: f64,
    pub sigma_stab: f64,
    pub mass: f64,
    pub dt: f64,
    pub duration: f64,
}

impl Default for LetterFieldParams {
    fn default() -> Self {
        LetterFieldParams {
            train: DsTrainConfig {
                spacing: 0.1,
                n_components: 5,
                seed: 7,
                kmp: KmpParams { l: 0.3, lambda: 0.1, lambda_c: 10.0, alpha: 1.0 },
                stride: 2,
                exec: Execution::Parallel,
            },
            d_vf: 50.0,
            stab_speed: 0.3,
            sigma_stab: 0.1,
            mass: 1.0,
            dt: 5e-3,
            duration: 6.0,
        }
    }
}

/// Planar DS fixture plus stabilizer, trained once; the body starts at the
/// origin (use [`Engine::reset`] or [`rollouts`] for other starts).
pub fn letter_scenario(demos: &[Demonstration], p: &LetterFieldParams) -> Result<Scenario> {
    let policy = DsPolicy::train(demos, Projection::PositionXy, Projection::PositionXy.default_slots(), &p.train)?;
    let d = Matrix6::identity() * p.d_vf;
    let refs = policy.kmp.reference.inputs.clone();
    let ds = DsFixture::new(ManifoldId::M1, vec![policy], d, p.train.kmp.alpha)?;
    let stab = StabilizingPolicy::new(ManifoldId::M1, Projection::PositionXy, refs, p.stab_speed, p.sigma_stab, d)?;
    Ok(Scenario {
        frames: FrameTree::default(),
        fixtures: vec![
            FixtureInstance { id: "ds".into(), frame: Frame::Task, model: FixtureModel::Ds(ds) },
            FixtureInstance { id: "stab".into(), frame: Frame::Task, model: FixtureModel::Stab(stab) },
        ],
        body: BodyParams { mass: Matrix6::identity() * p.mass, ambient_damping: Matrix6::zeros() },
        x0: ManifoldPoint::m1(Vector3::zeros(), Quat::identity()),
        operator: OperatorConfig::default(),
        teleop: None,
        dt: p.dt,
        duration: p.duration,
        seed: p.train.seed,
        exec: Execution::Sequential,
    })
}

/// Positions visited from each start, one rollout per start, run in
/// parallel when `exec` allows.
pub fn rollouts(scenario: &Scenario, starts: &[Vector3<f64>], exec: Execution) -> Result<Vec<Vec<Vector3<f64>>>> {
    exec.map(starts, |s| {
        let mut e = Engine::new(scenario.clone())?;
        e.reset(ManifoldPoint::m1(*s, Quat::identity()));
        let live = LiveInput::default();
        let mut path = Vec::with_capacity(scenario.n_steps() + 1);
        while !e.finished() {
            e.step(&live)?;
            path.push(e.state.pose.position().unwrap_or_default());
        }
        Ok(path)
    })
    .into_iter()
    .collect()
}

/// Distance from `p` to the polyline through each demo.
pub fn distance_to_support(p: &Vector3<f64>, demos: &[Demonstration]) -> f64 {
    let mut best = f64::INFINITY;
    for d in demos {
        let pts: Vec<Vector3<f64>> = d.points.iter().filter_map(|x| x.position()).collect();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let ab = b - a;
            let t = if ab.norm_squared() > 0.0 { ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
            best = best.min((a + ab * t - p).norm());
        }
    }
    best
}
