//! Planar articulated-body environments: a hopper-topology runner carrying
//! gravity, morphology and wall/sensor variations, and a two-link arm with
//! randomized goal or start positions.

pub mod arm;
pub mod chain;
pub mod runner;


pub use arm::{arm_step, build_arm_task, ArmEnv, ArmKind, ArmTask, ArmVariant, ArmVariation};
pub use chain::{ChainState, PlanarChain, Terrain, WallBox};
pub use runner::{
    build_runner, dynamics_step, runner_reward, sample_wall, torso_sense, trajectory_to_text, BodyPart, PartScale,
    RunnerEnv, RunnerModel, SensorConfig, TrajectoryRow, VariationParams, WallConfig,
};
