//! Scenario description and its TOML file format.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Deserialize;

use crate::bounds::{synthesize_certified, InitialErrors, TuningParams};
use crate::error::{Error, Result};
use crate::gains::GainSet;
use crate::model::{
    BlockStructure, ChuaField, DisturbanceSpec, NoiseModel, NonlinearField, SineField, StateBox,
    Uncertainty, ZeroField,
};
use crate::sim::schedule::{rng_for, stream};
use crate::topology::{certify, fig2_topology, Topology};

/// Scenario files compiled into the binary, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    (
        "chua_clean",
        include_str!("../../../../scenarios/chua_clean.toml"),
    ),
    (
        "chua_noisy",
        include_str!("../../../../scenarios/chua_noisy.toml"),
    ),
];

/// How observer estimates are initialized.
#[derive(Debug, Clone, PartialEq)]
pub enum ObserverInit {
    Zero,
    /// `x̂_{i,j}(0) = x_j(0)`.
    Exact,
    /// Explicit values per `(i, j)`; unlisted pairs start at zero.
    Explicit(BTreeMap<(usize, usize), DVector<f64>>),
}

/// Initial-condition specification. Missing leader/follower states are drawn
/// uniformly in `‖x‖∞ ≤ box_radius` from the scenario seed.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub leader: Option<DVector<f64>>,
    pub followers: Option<Vec<DVector<f64>>>,
    pub box_radius: f64,
    pub observers: ObserverInit,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            leader: None,
            followers: None,
            box_radius: 1.0,
            observers: ObserverInit::Zero,
        }
    }
}

/// Resolved initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialStates {
    pub leader: DVector<f64>,
    pub followers: Vec<DVector<f64>>,
    /// Indexed like [`Topology::observed_pairs`].
    pub observers: Vec<DVector<f64>>,
}

impl InitialStates {
    pub fn agent(&self, j: usize) -> &DVector<f64> {
        if j == 0 {
            &self.leader
        } else {
            &self.followers[j - 1]
        }
    }

    pub fn errors(&self, topology: &Topology) -> InitialErrors {
        let consensus_sum = self
            .followers
            .iter()
            .map(|x| (x - &self.leader).norm())
            .sum();
        let observer_sum = topology
            .observed_pairs()
            .iter()
            .zip(&self.observers)
            .map(|(&(_, j), xh)| (xh - self.agent(j)).norm())
            .sum();
        InitialErrors {
            consensus_sum,
            observer_sum,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub bs: BlockStructure,
    pub field: Arc<dyn NonlinearField>,
    /// Declared `L_φ` used by the bound calculator.
    pub l_phi: f64,
    pub topology: Topology,
    pub tuning: TuningParams,
    pub disturbances: DisturbanceSpec,
    pub initial: InitialSpec,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    /// Spacing of recorded trace rows, s.
    pub record_interval: f64,
    pub blowup_guard: f64,
}

impl ScenarioConfig {
    /// Noise-free Chua experiment on the ten-follower graph.
    pub fn chua_clean() -> Self {
        let chua = ChuaField::default();
        Self {
            name: "chua_clean".into(),
            bs: BlockStructure::new(2, 3).expect("valid"),
            l_phi: chua.lipschitz,
            field: Arc::new(chua),
            topology: fig2_topology(),
            tuning: TuningParams {
                c_bar: 1.0,
                lambda: 2.0,
                theta: 20.0,
                tau_m: 0.02,
                tau_max: 0.04,
            },
            disturbances: DisturbanceSpec::none(),
            initial: InitialSpec::default(),
            horizon: 30.0,
            dt: 1e-3,
            seed: 1,
            record_interval: 0.01,
            blowup_guard: 1e9,
        }
    }

    /// Chua experiment with the cosine leader uncertainty and Gaussian output
    /// noise of variance 0.1.
    pub fn chua_noisy() -> Self {
        let mut cfg = Self::chua_clean();
        cfg.name = "chua_noisy".into();
        cfg.disturbances.uncertainties.insert(
            0,
            Uncertainty::Cosine {
                block: 2,
                amplitude: vec![1.0; 3],
                frequency: vec![1.0, 2.0, 3.0],
            },
        );
        cfg.disturbances.noise = NoiseModel::Gaussian {
            std: 0.1_f64.sqrt(),
        };
        cfg
    }

    /// One pinned follower with a weak sine drift (`q = m = 1`), tuned so
    /// that every sufficient condition holds with `τ_M` at 90% of its bound.
    ///
    /// The resulting sampling gaps are tens of microseconds.
    pub fn certified_small() -> Result<Self> {
        let bs = BlockStructure::new(1, 1)?;
        let field = SineField { n: 1, gain: 0.05 };
        let topology = Topology::from_edges(1, &[], &[1])?;
        let cert = certify(&topology)?;
        let gains = GainSet::synthesize(bs)?;
        let tuning = synthesize_certified(&cert, &gains, field.gain, 0.9)?;
        Ok(Self {
            name: "certified_small".into(),
            bs,
            l_phi: field.gain,
            field: Arc::new(field),
            topology,
            tuning,
            disturbances: DisturbanceSpec::none(),
            initial: InitialSpec::default(),
            horizon: 10.0,
            dt: tuning.tau_m / 4.0,
            seed: 1,
            record_interval: 0.01,
            blowup_guard: 1e9,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.field.dim() != self.bs.n() {
            return bad(format!(
                "field dimension {} does not match n = {}",
                self.field.dim(),
                self.bs.n()
            ));
        }
        self.tuning
            .validate()
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        self.disturbances
            .validate(self.bs)
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive (got {})", self.horizon));
        }
        if !(self.dt > 0.0) || self.dt > self.tuning.tau_m / 4.0 {
            return bad(format!(
                "integrator step {} must be in (0, tau_m / 4 = {}]",
                self.dt,
                self.tuning.tau_m / 4.0
            ));
        }
        if !(self.record_interval > 0.0) {
            return bad("record_interval must be positive".into());
        }
        if !(self.blowup_guard > 0.0) {
            return bad("blowup_guard must be positive".into());
        }
        let n = self.bs.n();
        if let Some(l) = &self.initial.leader {
            if l.len() != n {
                return bad(format!(
                    "leader initial state has {} entries, expected {n}",
                    l.len()
                ));
            }
        }
        if let Some(f) = &self.initial.followers {
            if f.len() != self.topology.followers() {
                return bad(format!(
                    "{} follower initial states given for {} followers",
                    f.len(),
                    self.topology.followers()
                ));
            }
            if let Some(x) = f.iter().find(|x| x.len() != n) {
                return bad(format!(
                    "follower initial state has {} entries, expected {n}",
                    x.len()
                ));
            }
        }
        for i in 1..=self.topology.followers() {
            if !self.topology.self_observes(i) {
                return bad(format!(
                    "agent {i} must observe itself to compute its input"
                ));
            }
        }
        Ok(())
    }

    pub fn initial_states(&self) -> InitialStates {
        let n = self.bs.n();
        let mut rng = rng_for(self.seed, stream::INITIAL, 0);
        let bx = StateBox::symmetric(n, self.initial.box_radius);
        let draw = |rng: &mut _| {
            if self.initial.box_radius > 0.0 {
                bx.sample(rng)
            } else {
                DVector::zeros(n)
            }
        };
        let leader = self
            .initial
            .leader
            .clone()
            .unwrap_or_else(|| draw(&mut rng));
        let followers = self.initial.followers.clone().unwrap_or_else(|| {
            (0..self.topology.followers())
                .map(|_| draw(&mut rng))
                .collect()
        });
        let agent = |j: usize| if j == 0 { &leader } else { &followers[j - 1] };
        let observers = self
            .topology
            .observed_pairs()
            .into_iter()
            .map(|(i, j)| match &self.initial.observers {
                ObserverInit::Zero => DVector::zeros(n),
                ObserverInit::Exact => agent(j).clone(),
                ObserverInit::Explicit(map) => map
                    .get(&(i, j))
                    .cloned()
                    .unwrap_or_else(|| DVector::zeros(n)),
            })
            .collect();
        InitialStates {
            leader,
            followers,
            observers,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        let cfg = file.into_config()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads one of the scenario files shipped under `scenarios/`.
    pub fn bundled(name: &str) -> Result<Self> {
        let text = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                let known: Vec<_> = BUNDLED.iter().map(|(n, _)| *n).collect();
                Error::ConfigInvalid(format!("unknown scenario {name:?}; known: {known:?}"))
            })?;
        Self::from_toml_str(text)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    system: SystemSection,
    topology: TopologySection,
    tuning: TuningSection,
    #[serde(default)]
    disturbance: DisturbanceSection,
    #[serde(default)]
    initial: InitialSection,
    #[serde(default)]
    simulation: SimulationSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    q: usize,
    m: usize,
    field: String,
    lipschitz: Option<f64>,
    sine_gain: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    preset: Option<String>,
    followers: Option<usize>,
    #[serde(default)]
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    pinned: Vec<usize>,
    self_observe: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TuningSection {
    c_bar: f64,
    lambda: f64,
    theta: f64,
    tau_min: f64,
    tau_max: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisturbanceSection {
    #[serde(default)]
    noise: NoiseSection,
    #[serde(default)]
    uncertainty: Vec<UncertaintySection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    #[serde(default = "default_noise_kind")]
    kind: String,
    variance: Option<f64>,
    bound: Option<f64>,
}

fn default_noise_kind() -> String {
    "none".into()
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            kind: default_noise_kind(),
            variance: None,
            bound: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UncertaintySection {
    agent: usize,
    block: usize,
    amplitude: Vec<f64>,
    frequency: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    leader: Option<Vec<f64>>,
    followers: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    box_radius: f64,
    #[serde(default = "default_observers")]
    observers: String,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            leader: None,
            followers: None,
            box_radius: 1.0,
            observers: default_observers(),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_observers() -> String {
    "zero".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    #[serde(default = "default_horizon")]
    horizon: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "one_u64")]
    seed: u64,
    #[serde(default = "default_record")]
    record_interval: f64,
    #[serde(default = "default_guard")]
    blowup_guard: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            dt: default_dt(),
            seed: 1,
            record_interval: default_record(),
            blowup_guard: default_guard(),
        }
    }
}

fn default_horizon() -> f64 {
    30.0
}
fn default_dt() -> f64 {
    1e-3
}
fn one_u64() -> u64 {
    1
}
fn default_record() -> f64 {
    0.01
}
fn default_guard() -> f64 {
    1e9
}

impl ScenarioFile {
    fn into_config(self) -> Result<ScenarioConfig> {
        let invalid = |msg: String| Error::ConfigInvalid(msg);
        let bs = BlockStructure::new(self.system.q, self.system.m)
            .map_err(|e| invalid(e.to_string()))?;
        let n = bs.n();
        let (field, default_l): (Arc<dyn NonlinearField>, f64) = match self.system.field.as_str() {
            "chua" => {
                if (bs.q(), bs.m()) != (2, 3) {
                    return Err(invalid("the chua field needs q = 2, m = 3".into()));
                }
                let f = ChuaField::default();
                let l = f.lipschitz;
                (Arc::new(f), l)
            }
            "zero" => (Arc::new(ZeroField { n }), 0.0),
            "sine" => {
                let gain = self
                    .system
                    .sine_gain
                    .ok_or_else(|| invalid("field = \"sine\" requires system.sine_gain".into()))?;
                (Arc::new(SineField { n, gain }), gain.abs())
            }
            other => {
                return Err(invalid(format!(
                    "unknown field {other:?} (expected chua, zero or sine)"
                )))
            }
        };

        let topology = match self.topology.preset.as_deref() {
            Some("fig2") => fig2_topology(),
            Some(other) => return Err(invalid(format!("unknown topology preset {other:?}"))),
            None => {
                let followers = self
                    .topology
                    .followers
                    .ok_or_else(|| invalid("topology.followers is required".into()))?;
                let edges: Vec<(usize, usize)> =
                    self.topology.edges.iter().map(|e| (e[0], e[1])).collect();
                Topology::from_edges(followers, &edges, &self.topology.pinned)
                    .map_err(|e| invalid(e.to_string()))?
            }
        };
        let topology = match self.topology.self_observe {
            Some(flag) => {
                let n_f = topology.followers();
                topology.with_self_observe(vec![flag; n_f])?
            }
            None => topology,
        };

        let noise = match self.disturbance.noise.kind.as_str() {
            "none" => NoiseModel::None,
            "gaussian" => {
                let var = self
                    .disturbance
                    .noise
                    .variance
                    .ok_or_else(|| invalid("gaussian noise requires variance".into()))?;
                if !(var >= 0.0) {
                    return Err(invalid(format!("noise variance {var} is negative")));
                }
                NoiseModel::Gaussian { std: var.sqrt() }
            }
            "bounded" => NoiseModel::Bounded {
                bound: self
                    .disturbance
                    .noise
                    .bound
                    .ok_or_else(|| invalid("bounded noise requires bound".into()))?,
            },
            other => return Err(invalid(format!("unknown noise kind {other:?}"))),
        };
        let mut uncertainties = BTreeMap::new();
        for u in self.disturbance.uncertainty {
            if u.agent > topology.followers() {
                return Err(invalid(format!("uncertainty on unknown agent {}", u.agent)));
            }
            uncertainties.insert(
                u.agent,
                Uncertainty::Cosine {
                    block: u.block,
                    amplitude: u.amplitude,
                    frequency: u.frequency,
                },
            );
        }

        let observers = match self.initial.observers.as_str() {
            "zero" => ObserverInit::Zero,
            "exact" => ObserverInit::Exact,
            other => {
                return Err(invalid(format!(
                    "unknown observer initialization {other:?} (expected zero or exact)"
                )))
            }
        };

        Ok(ScenarioConfig {
            name: self.name.unwrap_or_else(|| "scenario".into()),
            bs,
            field,
            l_phi: self.system.lipschitz.unwrap_or(default_l),
            topology,
            tuning: TuningParams {
                c_bar: self.tuning.c_bar,
                lambda: self.tuning.lambda,
                theta: self.tuning.theta,
                tau_m: self.tuning.tau_min,
                tau_max: self.tuning.tau_max,
            },
            disturbances: DisturbanceSpec {
                uncertainties,
                noise,
            },
            initial: InitialSpec {
                leader: self.initial.leader.map(DVector::from_vec),
                followers: self
                    .initial
                    .followers
                    .map(|f| f.into_iter().map(DVector::from_vec).collect()),
                box_radius: self.initial.box_radius,
                observers,
            },
            horizon: self.simulation.horizon,
            dt: self.simulation.dt,
            seed: self.simulation.seed,
            record_interval: self.simulation.record_interval,
            blowup_guard: self.simulation.blowup_guard,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_files_match_presets() {
        for (name, preset) in [
            ("chua_clean", ScenarioConfig::chua_clean()),
            ("chua_noisy", ScenarioConfig::chua_noisy()),
        ] {
            let file = ScenarioConfig::bundled(name).unwrap();
            assert_eq!(format!("{file:?}"), format!("{preset:?}"), "{name}");
        }
        assert!(ScenarioConfig::bundled("nope").is_err());
    }

    #[test]
    fn certified_small_is_runnable() {
        let cfg = ScenarioConfig::certified_small().unwrap();
        cfg.validate().unwrap();
        assert!(cfg.tuning.tau_max < 1e-4);
    }

    const MINIMAL: &str = r#"
        [system]
        q = 2
        m = 1
        field = "zero"

        [topology]
        followers = 2
        edges = [[1, 2]]
        pinned = [1]

        [tuning]
        c_bar = 1.0
        lambda = 2.0
        theta = 20.0
        tau_min = 0.02
        tau_max = 0.04
    "#;

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.horizon, 30.0);
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.topology.observed_pairs().len(), 4);
        assert_eq!(cfg.disturbances.noise, NoiseModel::None);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let broken = MINIMAL.replace("theta = 20.0", "theta = ");
        match ScenarioConfig::from_toml_str(&broken) {
            Err(Error::ConfigParse(msg)) => assert!(msg.contains("line"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn step_must_resolve_sampling() {
        let text = format!("{MINIMAL}\n[simulation]\ndt = 0.01\n");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&text),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("field = \"zero\"", "field = \"zero\"\ncolour = 3");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn initial_states_are_seeded() {
        let cfg = ScenarioConfig::chua_clean();
        let a = cfg.initial_states();
        let b = cfg.initial_states();
        assert_eq!(a, b);
        assert!(a.followers.iter().all(|x| x.amax() <= 1.0));
        let mut other = cfg.clone();
        other.seed = 2;
        assert_ne!(other.initial_states().leader, a.leader);
    }

    #[test]
    fn exact_observers_have_zero_initial_error() {
        let mut cfg = ScenarioConfig::chua_clean();
        cfg.initial.observers = ObserverInit::Exact;
        let s = cfg.initial_states();
        assert_eq!(s.errors(&cfg.topology).observer_sum, 0.0);
    }
}
