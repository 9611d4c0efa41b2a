//! Scenario file schema (TOML).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::fixtures::ds::{DsTrainConfig, Projection};
use crate::fixtures::trajectory::TrajectoryTrainConfig;
use crate::fixtures::Deadzone;
use crate::impedance::StiffnessParams;
use crate::learning::KmpParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sim: SimConfig,
    #[serde(default)]
    pub frames: FramesConfig,
    #[serde(default)]
    pub body: BodyConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub teleop: Option<TeleopConfig>,
    #[serde(default)]
    pub fixtures: Vec<FixtureConfig>,
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default = "identity_xyzw")]
    pub rotation: [f64; 4],
}

fn identity_xyzw() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramesConfig {
    pub task: Option<TransformConfig>,
    #[serde(default)]
    pub fixtures: BTreeMap<String, TransformConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodyConfig {
    /// `[x, y, z, qx, qy, qz, qw]` in BASE.
    pub pose: [f64; 7],
    /// Diagonal mass in TOOL coordinates.
    pub mass: [f64; 6],
    pub ambient_damping: [f64; 6],
}

impl Default for BodyConfig {
    fn default() -> Self {
        BodyConfig {
            pose: [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            mass: [5.0, 5.0, 5.0, 0.1, 0.1, 0.1],
            ambient_damping: [0.0; 6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrenchKey {
    pub t: f64,
    /// Force and torque in BASE.
    pub wrench: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointKey {
    pub t: f64,
    pub pose: [f64; 7],
}

fn default_k_h() -> f64 {
    300.0
}
fn default_d_h() -> f64 {
    40.0
}
fn default_max_force() -> f64 {
    200.0
}

/// Spring-damper hand surrogate parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandParams {
    #[serde(default = "default_k_h")]
    pub k_h: f64,
    #[serde(default = "default_d_h")]
    pub d_h: f64,
    #[serde(default)]
    pub k_rot: f64,
    #[serde(default)]
    pub d_rot: f64,
    #[serde(default = "default_max_force")]
    pub max_force: f64,
}

impl Default for HandParams {
    fn default() -> Self {
        HandParams { k_h: default_k_h(), d_h: default_d_h(), k_rot: 0.0, d_rot: 0.0, max_force: default_max_force() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum OperatorConfig {
    None {
        #[serde(default)]
        hand: HandParams,
    },
    /// Piecewise-constant wrench profile.
    Wrench {
        profile: Vec<WrenchKey>,
        #[serde(default)]
        hand: HandParams,
    },
    /// Hand spring pulling toward the latest waypoint.
    Waypoints {
        waypoints: Vec<WaypointKey>,
        #[serde(default)]
        hand: HandParams,
    },
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig::None { hand: HandParams::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeleopConfig {
    pub stiffness: [f64; 6],
    pub damping: [f64; 6],
    #[serde(default = "one")]
    pub chi: f64,
    /// Row-major 6 × 6 adjoint between device frames; identity if absent.
    #[serde(default)]
    pub adjoint: Option<Vec<f64>>,
    #[serde(default = "default_input_mass")]
    pub input_mass: [f64; 6],
}

fn one() -> f64 {
    1.0
}
fn default_input_mass() -> [f64; 6] {
    [1.0, 1.0, 1.0, 0.02, 0.02, 0.02]
}
fn default_frame() -> String {
    "task".into()
}
fn default_manifold() -> String {
    "M1".into()
}
fn default_zeta() -> f64 {
    0.7
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub projection: Projection,
    #[serde(default)]
    pub slots: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub pose: [f64; 7],
    /// Diagonal covariance in the fixture manifold tangent.
    pub cov: [f64; 6],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutomationConfig {
    pub speed: f64,
    pub damping: [f64; 6],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertConfig {
    pub pose: [f64; 7],
    pub cov: [f64; 6],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdditionalConfig {
    pub l_add: [f64; 6],
    #[serde(default)]
    pub deadzone: Deadzone,
    pub target: [f64; 7],
    #[serde(default = "default_sigma_add")]
    pub sigma: f64,
}

fn default_sigma_add() -> f64 {
    1e3
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Training knobs for DS policies; unset values fall back to defaults, with
/// the seed taken from `[sim]`.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsTrainOverrides {
    pub spacing: Option<f64>,
    pub n_components: Option<usize>,
    pub seed: Option<u64>,
    pub kmp: Option<KmpParams>,
    pub stride: Option<usize>,
    /// Accepted and ignored; kept for parameter lists that carry it.
    pub h: Option<f64>,
}

impl DsTrainOverrides {
    pub fn resolve(&self, sim_seed: u64, exec: Execution) -> DsTrainConfig {
        let d = DsTrainConfig::default();
        DsTrainConfig {
            spacing: self.spacing.unwrap_or(d.spacing),
            n_components: self.n_components.unwrap_or(d.n_components),
            seed: self.seed.unwrap_or(sim_seed),
            kmp: self.kmp.unwrap_or(d.kmp),
            stride: self.stride.unwrap_or(d.stride),
            exec,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FixtureConfig {
    Ds {
        id: String,
        #[serde(default = "default_frame")]
        frame: String,
        #[serde(default = "default_manifold")]
        manifold: String,
        demos: Vec<String>,
        #[serde(default)]
        policies: Vec<PolicyConfig>,
        #[serde(default)]
        train: DsTrainOverrides,
        damping: [f64; 6],
        #[serde(default)]
        sigma_far: Option<f64>,
    },
    Stab {
        id: String,
        #[serde(default = "default_frame")]
        frame: String,
        #[serde(default = "default_manifold")]
        manifold: String,
        projection: Projection,
        /// DS fixture ids whose references are pooled; all DS fixtures if empty.
        #[serde(default)]
        sources: Vec<String>,
        speed: f64,
        sigma_stab: f64,
        damping: [f64; 6],
    },
    Trajectory {
        id: String,
        #[serde(default = "default_frame")]
        frame: String,
        #[serde(default = "default_manifold")]
        manifold: String,
        #[serde(default)]
        demos: Vec<String>,
        #[serde(default)]
        samples: Vec<SampleConfig>,
        #[serde(default)]
        train: TrajectoryTrainConfig,
        d_min: f64,
        d_max: f64,
        #[serde(default)]
        stiffness: StiffnessParams,
        #[serde(default = "default_zeta")]
        zeta: f64,
        #[serde(default)]
        automation: Option<AutomationConfig>,
    },
    Visual {
        id: String,
        #[serde(default = "default_frame")]
        frame: String,
        #[serde(default = "default_manifold")]
        manifold: String,
        experts: Vec<ExpertConfig>,
        lengths: [f64; 6],
        gamma: f64,
        #[serde(default)]
        deadzone: Deadzone,
        #[serde(default)]
        insertion_axis: Option<usize>,
        #[serde(default)]
        additional: Option<AdditionalConfig>,
        #[serde(default)]
        stiffness: StiffnessParams,
        #[serde(default = "default_zeta")]
        zeta: f64,
    },
    Constant {
        id: String,
        #[serde(default = "default_frame")]
        frame: String,
        #[serde(default = "default_manifold")]
        manifold: String,
        slots: Vec<usize>,
        mean: Vec<f64>,
        /// Row-major `k × k` over the slots.
        cov: Vec<f64>,
        #[serde(default)]
        region: Option<RegionConfig>,
    },
}

impl FixtureConfig {
    pub fn id(&self) -> &str {
        match self {
            FixtureConfig::Ds { id, .. }
            | FixtureConfig::Stab { id, .. }
            | FixtureConfig::Trajectory { id, .. }
            | FixtureConfig::Visual { id, .. }
            | FixtureConfig::Constant { id, .. } => id,
        }
    }

    pub fn frame(&self) -> &str {
        match self {
            FixtureConfig::Ds { frame, .. }
            | FixtureConfig::Stab { frame, .. }
            | FixtureConfig::Trajectory { frame, .. }
            | FixtureConfig::Visual { frame, .. }
            | FixtureConfig::Constant { frame, .. } => frame,
        }
    }

    pub fn manifold(&self) -> &str {
        match self {
            FixtureConfig::Ds { manifold, .. }
            | FixtureConfig::Stab { manifold, .. }
            | FixtureConfig::Trajectory { manifold, .. }
            | FixtureConfig::Visual { manifold, .. }
            | FixtureConfig::Constant { manifold, .. } => manifold,
        }
    }
}
