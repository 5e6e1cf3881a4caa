//! Named environment catalogue.
//!
//! Ids follow the benchmark's published naming (`HopperGravityHalf-v0`,
//! `Limited-Range-Based-Navigation-2d-Map0-Goal0-v0`, ...). Every spec carries
//! the `planar-v1` physics tag: runner and arm ids keep their familiar names but
//! are simulated by this crate's planar dynamics, not by a 3D engine.

use indexmap::IndexMap;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::env::{EnvError, EnvInstance};
use crate::locomotion::{ArmEnv, ArmKind, ArmVariant, ArmVariation, BodyPart, RunnerEnv, VariationParams};
use crate::nav2d::{NavEnv, NavObsMode, NavVariation, MAP_COUNT};

pub const PHYSICS_TAG: &str = "planar-v1";

pub const NAV_HORIZON: usize = 1000;
pub const RUNNER_HORIZON: usize = 1000;
pub const ARM_HORIZON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Nav2d,
    Runner,
    Arm,
}

impl Family {
    pub fn parse(s: &str) -> Option<Family> {
        match s.to_ascii_lowercase().as_str() {
            "nav2d" | "nav" => Some(Family::Nav2d),
            "runner" => Some(Family::Runner),
            "arm" => Some(Family::Arm),
            _ => None,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Nav2d => "nav2d",
            Family::Runner => "runner",
            Family::Arm => "arm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Variation {
    Nav(NavVariation),
    Runner(VariationParams),
    Arm(ArmVariation),
}

impl Variation {
    pub fn family(&self) -> Family {
        match self {
            Variation::Nav(_) => Family::Nav2d,
            Variation::Runner(_) => Family::Runner,
            Variation::Arm(_) => Family::Arm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub id: String,
    pub family: Family,
    pub horizon: usize,
    pub seed: u64,
    pub physics: String,
    pub variation: Variation,
}

impl EnvSpec {
    pub fn new(id: impl Into<String>, variation: Variation, horizon: usize) -> Self {
        Self {
            id: id.into(),
            family: variation.family(),
            horizon,
            seed: 0,
            physics: PHYSICS_TAG.to_string(),
            variation,
        }
    }

    pub fn nav(map: usize, goal: usize, mode: NavObsMode) -> Self {
        let id = nav_env_id(map, goal, mode);
        Self::new(id, Variation::Nav(NavVariation { map, goal, mode }), NAV_HORIZON)
    }

    pub fn runner(id: impl Into<String>, params: VariationParams) -> Self {
        Self::new(id, Variation::Runner(params), RUNNER_HORIZON)
    }

    pub fn arm(id: impl Into<String>, kind: ArmKind, variant: ArmVariant) -> Self {
        Self::new(id, Variation::Arm(ArmVariation { kind, variant }), ARM_HORIZON)
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.horizon == 0 {
            return Err(EnvError::InvalidVariation(format!("{}: horizon must be at least 1", self.id)));
        }
        if self.family != self.variation.family() {
            return Err(EnvError::InvalidVariation(format!(
                "{}: family {} does not match {} variation",
                self.id,
                self.family,
                self.variation.family()
            )));
        }
        match &self.variation {
            Variation::Runner(p) => p.validate(),
            Variation::Nav(v) => v.validate(),
            Variation::Arm(v) => v.validate(),
        }
    }

    /// Construct a fresh instance whose random stream starts from `seed`.
    pub fn build(&self, seed: u64) -> Result<EnvInstance, EnvError> {
        Ok(match &self.variation {
            Variation::Nav(v) => Box::new(NavEnv::new(&self.id, *v, self.horizon, seed)?),
            Variation::Runner(p) => Box::new(RunnerEnv::new(&self.id, p, self.horizon, seed)?),
            Variation::Arm(v) => Box::new(ArmEnv::new(&self.id, *v, self.horizon, seed)?),
        })
    }
}

pub fn nav_env_id(map: usize, goal: usize, mode: NavObsMode) -> String {
    match mode {
        NavObsMode::State => format!("State-Based-Navigation-2d-Map{map}-Goal{goal}-v0"),
        NavObsMode::StateKnownGoal => {
            format!("State-Based-Navigation-2d-Map{map}-Goal{goal}-KnownGoalPosition-v0")
        }
        NavObsMode::Range => format!("Limited-Range-Based-Navigation-2d-Map{map}-Goal{goal}-v0"),
        NavObsMode::RangeKnownPos => {
            format!("Limited-Range-Based-Navigation-2d-Map{map}-Goal{goal}-KnownPositions-v0")
        }
        NavObsMode::Image => format!("Image-Based-Navigation-2d-Map{map}-Goal{goal}-v0"),
    }
}

/// Gravity grid, as (name suffix, scale), in training order.
pub const GRAVITY_GRID: [(&str, f64); 5] = [
    ("GravityHalf", 0.5),
    ("GravityThreeQuarters", 0.75),
    ("", 1.0),
    ("GravityOneAndQuarter", 1.25),
    ("GravityOneAndHalf", 1.5),
];

pub fn gravity_env_id(base: &str, suffix: &str) -> String {
    if suffix.is_empty() {
        format!("{base}-v1")
    } else {
        format!("{base}{suffix}-v0")
    }
}

/// Morphology variants in training order: (size label, part, scale).
pub const MORPHOLOGY_GRID: [(&str, BodyPart, f64); 8] = [
    ("Small", BodyPart::Foot, 0.75),
    ("Small", BodyPart::Leg, 0.75),
    ("Small", BodyPart::Thigh, 0.75),
    ("Small", BodyPart::Torso, 0.75),
    ("Big", BodyPart::Foot, 1.25),
    ("Big", BodyPart::Leg, 1.25),
    ("Big", BodyPart::Thigh, 1.25),
    ("Big", BodyPart::Torso, 1.25),
];

pub fn morphology_env_id(base: &str, size: &str, part: BodyPart) -> String {
    format!("{base}{size}{}-v0", part.label())
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    specs: IndexMap<String, EnvSpec>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every benchmark environment shipped with the crate.
    pub fn builtin() -> Self {
        let mut r = Registry::new();
        let mut add = |spec: EnvSpec| {
            r.register(spec).expect("builtin ids are unique and valid");
        };

        for (suffix, g) in GRAVITY_GRID {
            add(EnvSpec::runner(gravity_env_id("Hopper", suffix), VariationParams::gravity(g)));
        }
        for (size, part, s) in MORPHOLOGY_GRID {
            add(EnvSpec::runner(morphology_env_id("Hopper", size, part), VariationParams::morphology(part, s)));
        }
        add(EnvSpec::runner("HopperWithSensor-v0", VariationParams::with_sensor()));
        add(EnvSpec::runner("HopperWall-v0", VariationParams::with_wall()));

        add(EnvSpec::arm("Striker-v0", ArmKind::Striker, ArmVariant::Fixed));
        add(EnvSpec::arm("StrikerMovingStart-v0", ArmKind::Striker, ArmVariant::StrikerMovingStart));
        add(EnvSpec::arm("Pusher-v0", ArmKind::Pusher, ArmVariant::Fixed));
        add(EnvSpec::arm("PusherMovingGoal-v0", ArmKind::Pusher, ArmVariant::PusherMovingGoal));

        for mode in NavObsMode::ALL {
            for map in 0..MAP_COUNT {
                for goal in 0..3 {
                    add(EnvSpec::nav(map, goal, mode));
                }
            }
        }
        r
    }

    pub fn register(&mut self, spec: EnvSpec) -> Result<String, EnvError> {
        if self.specs.contains_key(&spec.id) {
            return Err(EnvError::DuplicateRegistration(spec.id));
        }
        spec.validate()?;
        let id = spec.id.clone();
        self.specs.insert(id.clone(), spec);
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<&EnvSpec> {
        self.specs.get(id)
    }

    pub fn spec(&self, id: &str) -> Result<&EnvSpec, EnvError> {
        self.get(id).ok_or_else(|| EnvError::UnknownEnvironment(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.specs.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Specs in registration order, optionally restricted to one family.
    pub fn list(&self, family: Option<Family>) -> Vec<&EnvSpec> {
        self.specs.values().filter(|s| family.is_none_or(|f| s.family == f)).collect()
    }

    pub fn make(&self, id: &str, seed: u64) -> Result<EnvInstance, EnvError> {
        self.spec(id)?.build(seed)
    }

    /// TOML manifest listing every spec.
    pub fn manifest(&self) -> String {
        #[derive(Serialize)]
        struct Manifest<'a> {
            physics: &'a str,
            env: Vec<&'a EnvSpec>,
        }
        toml::to_string(&Manifest { physics: PHYSICS_TAG, env: self.list(None) }).expect("env specs serialize to TOML")
    }

    pub fn from_manifest(text: &str) -> Result<Self, EnvError> {
        #[derive(Deserialize)]
        struct Manifest {
            env: Vec<EnvSpec>,
        }
        let m: Manifest = toml::from_str(text).map_err(|e| EnvError::InvalidVariation(format!("manifest: {e}")))?;
        let mut r = Registry::new();
        for spec in m.env {
            r.register(spec)?;
        }
        Ok(r)
    }
}

static BUILTIN: Lazy<Registry> = Lazy::new(Registry::builtin);

/// The shared built-in registry. Immutable after first use, so concurrent
/// readers need no locking.
pub fn registry() -> &'static Registry {
    &BUILTIN
}
