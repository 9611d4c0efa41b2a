//! Loading a scenario: frames, body, operator and fixtures (learned on load
//! unless a trained model is supplied).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Matrix6, Vector3, Vector6};

use super::config::*;
use crate::error::{Result, VfError};
use crate::exec::Execution;
use crate::fixtures::ds::{DsFixture, DsPolicy, StabilizingPolicy};
use crate::fixtures::trajectory::{Automation, TrajectoryFixture, TrajectorySample};
use crate::fixtures::visual::{AdditionalExpert, VisualServoFixture};
use crate::fixtures::{ActiveRegion, ConstantWrenchFixture, FixtureModel};
use crate::geometry::frames::{isometry, Frame, FrameTree};
use crate::geometry::{convert, ManifoldId, ManifoldPoint};
use crate::learning::{read_csv, Demonstration};
use crate::prob::GaussianOnManifold;

#[derive(Debug, Clone)]
pub struct FixtureInstance {
    pub id: String,
    pub frame: Frame,
    pub model: FixtureModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyParams {
    pub mass: Matrix6<f64>,
    pub ambient_damping: Matrix6<f64>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub frames: FrameTree,
    pub fixtures: Vec<FixtureInstance>,
    pub body: BodyParams,
    pub x0: ManifoldPoint,
    pub operator: OperatorConfig,
    pub teleop: Option<TeleopConfig>,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub exec: Execution,
}

impl Scenario {
    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

fn diag(v: &[f64; 6]) -> Matrix6<f64> {
    Matrix6::from_diagonal(&Vector6::from_column_slice(v))
}

/// Parse a scenario file; errors carry the file name and TOML line context.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| VfError::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| VfError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    toml::from_str(text).map_err(|e| VfError::Config(e.to_string()))
}

/// Where trained models are read from or written to.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub models: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
}

pub fn load(path: &Path, opts: &LoadOptions) -> Result<Scenario> {
    let cfg = parse_config(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    build(&cfg, base, opts)
}

fn model_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

pub fn save_model(dir: &Path, id: &str, model: &FixtureModel) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let f = std::fs::File::create(model_path(dir, id))?;
    serde_json::to_writer(std::io::BufWriter::new(f), model)?;
    Ok(())
}

fn load_model(dir: &Path, id: &str) -> Result<Option<FixtureModel>> {
    let p = model_path(dir, id);
    if !p.exists() {
        return Ok(None);
    }
    let f = std::fs::File::open(&p)?;
    let m: FixtureModel = serde_json::from_reader(std::io::BufReader::new(f))?;
    if let FixtureModel::Ds(ds) = &m {
        if ds.policies.iter().any(|p| !p.kmp.verify()) {
            return Err(VfError::Fingerprint);
        }
    }
    Ok(Some(m))
}

fn pose_in(manifold: ManifoldId, pose: &[f64; 7]) -> Result<ManifoldPoint> {
    convert(&ManifoldPoint::from_pose7(pose)?, manifold)
}

fn read_demos(base: &Path, files: &[String], manifold: ManifoldId) -> Result<Vec<Demonstration>> {
    files.iter().map(|f| read_csv(base.join(f))?.convert(manifold)).collect()
}

pub fn build(cfg: &ScenarioConfig, base: &Path, opts: &LoadOptions) -> Result<Scenario> {
    let dt = opts.dt.unwrap_or(cfg.sim.dt);
    let seed = opts.seed.unwrap_or(cfg.sim.seed);
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(VfError::Config(format!("dt = {dt} outside (0, 0.01]")));
    }
    if !(cfg.sim.duration > 0.0) {
        return Err(VfError::Config("duration must be positive".into()));
    }
    let exec = cfg.sim.execution;

    let mut frames = FrameTree::default();
    if let Some(t) = &cfg.frames.task {
        frames.task = isometry(t.translation, t.rotation);
    }
    for (name, t) in &cfg.frames.fixtures {
        frames.add_fixture(name, isometry(t.translation, t.rotation));
    }

    let mass = diag(&cfg.body.mass);
    if cfg.body.mass.iter().any(|m| !(*m > 0.0)) {
        return Err(VfError::Config("body mass entries must be positive".into()));
    }
    let body = BodyParams { mass, ambient_damping: diag(&cfg.body.ambient_damping) };
    let x0 = ManifoldPoint::from_pose7(&cfg.body.pose)?;

    let mut seen = BTreeMap::new();
    for (k, f) in cfg.fixtures.iter().enumerate() {
        if seen.insert(f.id().to_string(), k).is_some() {
            return Err(VfError::Config(format!("duplicate fixture id '{}'", f.id())));
        }
        let frame = Frame::parse(f.frame());
        frames.in_base(&frame).map_err(|e| VfError::Config(format!("fixture '{}': {e}", f.id())))?;
    }

    let mut fixtures: Vec<FixtureInstance> = Vec::with_capacity(cfg.fixtures.len());
    // Stabilizers pool DS references, so DS fixtures are built first.
    let order: Vec<usize> = (0..cfg.fixtures.len())
        .filter(|&k| !matches!(cfg.fixtures[k], FixtureConfig::Stab { .. }))
        .chain((0..cfg.fixtures.len()).filter(|&k| matches!(cfg.fixtures[k], FixtureConfig::Stab { .. })))
        .collect();
    let mut built: Vec<Option<FixtureInstance>> = vec![None; cfg.fixtures.len()];
    for k in order {
        let fc = &cfg.fixtures[k];
        let id = fc.id().to_string();
        let frame = Frame::parse(fc.frame());
        let manifold = ManifoldId::parse(fc.manifold())?;
        let cached = match &opts.models {
            Some(dir) => load_model(dir, &id)?,
            None => None,
        };
        let model = match cached {
            Some(m) => m,
            None => build_fixture(fc, manifold, base, seed, exec, &built, &cfg.fixtures)
                .map_err(|e| VfError::Config(format!("fixture '{id}': {e}")))?,
        };
        if model.manifold() != manifold {
            return Err(VfError::Config(format!("fixture '{id}': model manifold differs from config")));
        }
        built[k] = Some(FixtureInstance { id, frame, model });
    }
    fixtures.extend(built.into_iter().flatten());

    Ok(Scenario {
        frames,
        fixtures,
        body,
        x0,
        operator: cfg.operator.clone(),
        teleop: cfg.teleop.clone(),
        dt,
        duration: cfg.sim.duration,
        seed,
        exec,
    })
}

fn build_fixture(
    fc: &FixtureConfig,
    manifold: ManifoldId,
    base: &Path,
    seed: u64,
    exec: Execution,
    built: &[Option<FixtureInstance>],
    all: &[FixtureConfig],
) -> Result<FixtureModel> {
    Ok(match fc {
        FixtureConfig::Ds { demos, policies, train, damping, sigma_far, .. } => {
            let demos = read_demos(base, demos, manifold)?;
            let cfg = train.resolve(seed, exec);
            let pcs = if policies.is_empty() {
                vec![PolicyConfig { projection: crate::fixtures::Projection::Full, slots: None }]
            } else {
                policies.clone()
            };
            let mut ps = Vec::with_capacity(pcs.len());
            for pc in &pcs {
                let slots = pc.slots.clone().unwrap_or_else(|| pc.projection.default_slots());
                ps.push(DsPolicy::train(&demos, pc.projection, slots, &cfg)?);
            }
            let far = sigma_far.unwrap_or(cfg.kmp.alpha);
            FixtureModel::Ds(DsFixture::new(manifold, ps, diag(damping), far)?)
        }
        FixtureConfig::Stab { projection, sources, speed, sigma_stab, damping, .. } => {
            let mut refs = Vec::new();
            for (k, inst) in built.iter().enumerate() {
                let Some(inst) = inst else { continue };
                if !matches!(all[k], FixtureConfig::Ds { .. }) {
                    continue;
                }
                if !sources.is_empty() && !sources.contains(&inst.id) {
                    continue;
                }
                if let FixtureModel::Ds(ds) = &inst.model {
                    for p in &ds.policies {
                        if p.projection == *projection {
                            refs.extend(p.kmp.reference.inputs.iter().cloned());
                        }
                    }
                }
            }
            FixtureModel::Stab(StabilizingPolicy::new(manifold, *projection, refs, *speed, *sigma_stab, diag(damping))?)
        }
        FixtureConfig::Trajectory { demos, samples, train, d_min, d_max, stiffness, zeta, automation, .. } => {
            let samples = if !samples.is_empty() {
                samples
                    .iter()
                    .map(|s| Ok(TrajectorySample { mean: pose_in(manifold, &s.pose)?, cov: diag(&s.cov) }))
                    .collect::<Result<Vec<_>>>()?
            } else if !demos.is_empty() {
                let demos = read_demos(base, demos, manifold)?;
                let mut tc = *train;
                if tc.seed == 0 {
                    tc.seed = seed;
                }
                TrajectoryFixture::learn_samples(&demos, &tc)?
            } else {
                return Err(VfError::Config("trajectory needs samples or demos".into()));
            };
            let aut = automation.map(|a| Automation { speed: a.speed, damping: diag(&a.damping) });
            let mut f = TrajectoryFixture::new(manifold, samples, *d_min, *d_max, *stiffness, aut)?;
            f.zeta = *zeta;
            FixtureModel::Trajectory(f)
        }
        FixtureConfig::Visual { experts, lengths, gamma, deadzone, insertion_axis, additional, stiffness, zeta, .. } => {
            let ex = experts
                .iter()
                .map(|e| {
                    GaussianOnManifold::new(
                        pose_in(manifold, &e.pose)?,
                        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&e.cov)),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let mut f = VisualServoFixture::new(manifold, ex, *lengths, *gamma, *stiffness)?;
            f.deadzone = *deadzone;
            if let Some(ax) = insertion_axis {
                if *ax >= 6 {
                    return Err(VfError::Config("insertion_axis must be below 6".into()));
                }
            }
            f.insertion_axis = *insertion_axis;
            f.zeta = *zeta;
            if let Some(a) = additional {
                f.additional = Some(AdditionalExpert {
                    l_add: a.l_add,
                    deadzone: a.deadzone,
                    x_targ: pose_in(manifold, &a.target)?,
                    sigma: a.sigma,
                });
            }
            FixtureModel::Visual(f)
        }
        FixtureConfig::Constant { slots, mean, cov, region, .. } => {
            let mut f = ConstantWrenchFixture::padded(manifold, slots, mean, cov)?;
            f.region = region.map(|r| ActiveRegion { min: Vector3::from(r.min), max: Vector3::from(r.max) });
            FixtureModel::Constant(f)
        }
    })
}

/// Train every learnable fixture of a scenario and write it to `out`.
pub fn train(path: &Path, out: &Path) -> Result<Vec<String>> {
    let s = load(path, &LoadOptions::default())?;
    let mut written = Vec::new();
    for f in &s.fixtures {
        if matches!(f.model, FixtureModel::Ds(_) | FixtureModel::Trajectory(_)) {
            save_model(out, &f.id, &f.model)?;
            written.push(f.id.clone());
        }
    }
    Ok(written)
}
