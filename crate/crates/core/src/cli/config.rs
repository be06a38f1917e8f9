//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::check::CheckPoint;
use super::sweep::SweepSpec;
use crate::error::{Error, Result};
use crate::machines::{BrushlessKind, BrushlessSmParams, DcmParams, ImParams, Machine, WrsmParams};
use crate::sim::{EkfSpec, ImScenario, NoiseSpec, WrsmScenario};

/// Schema version accepted by this build.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MachineKind {
    Wrsm,
    Ipmsm,
    Spmsm,
    Syrm,
    Hesm,
    Im,
    PmDcm,
    SDcm,
}

impl MachineKind {
    /// Reference parameters of this kind.
    pub fn default_machine(self) -> Machine {
        let brushless = |k| Machine::Brushless(BrushlessSmParams::example(k));
        match self {
            MachineKind::Wrsm => Machine::Wrsm(WrsmParams::default()),
            MachineKind::Ipmsm => brushless(BrushlessKind::Ipmsm),
            MachineKind::Spmsm => brushless(BrushlessKind::Spmsm),
            MachineKind::Syrm => brushless(BrushlessKind::Syrm),
            MachineKind::Hesm => brushless(BrushlessKind::Hesm),
            MachineKind::Im => Machine::Im(ImParams::default()),
            MachineKind::PmDcm => Machine::Dcm(DcmParams::pm_example()),
            MachineKind::SDcm => Machine::Dcm(DcmParams::series_example()),
        }
    }
}

/// Machine kind and parameter overrides on top of the reference values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineBlock {
    pub kind: MachineKind,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
}

impl MachineBlock {
    pub fn new(kind: MachineKind) -> Self {
        Self { kind, params: Map::new() }
    }

    pub fn build(&self) -> Result<Machine> {
        if self.params.contains_key("kind") {
            return Err(Error::Config("machine.params: the kind is set by machine.kind".into()));
        }
        let machine = match self.kind.default_machine() {
            Machine::Wrsm(p) => Machine::Wrsm(overlay(&p, &self.params, "machine.params")?),
            Machine::Brushless(p) => Machine::Brushless(overlay(&p, &self.params, "machine.params")?),
            Machine::Im(p) => Machine::Im(overlay(&p, &self.params, "machine.params")?),
            Machine::Dcm(p) => Machine::Dcm(overlay(&p, &self.params, "machine.params")?),
        };
        machine.validate()?;
        Ok(machine)
    }
}

/// `base` with the top-level keys of `patch` replaced. Unknown keys are
/// rejected by the target type.
pub fn overlay<T: Serialize + DeserializeOwned>(base: &T, patch: &Map<String, Value>, what: &str) -> Result<T> {
    let mut value = serde_json::to_value(base).map_err(|e| Error::Config(format!("{what}: {e}")))?;
    let Value::Object(obj) = &mut value else {
        return Err(Error::Config(format!("{what}: expected an object")));
    };
    for (k, v) in patch {
        obj.insert(k.clone(), v.clone());
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{what}: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    /// Keep every n-th trace row.
    #[serde(default = "one")]
    pub decimate: usize,
    /// Emit a gnuplot script next to the trace.
    #[serde(default = "yes")]
    pub plot: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: None, decimate: 1, plot: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub machine: MachineBlock,
    /// Overrides on the default scenario of the machine.
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub scenario: Map<String, Value>,
    /// Replaces the default estimators when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ekfs: Option<Vec<EkfSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputBlock,
    /// Margin threshold (rad/s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug)]
pub enum Scenario {
    Wrsm(WrsmScenario),
    Im(ImScenario),
}

impl RunConfig {
    pub fn new(machine: MachineBlock) -> Self {
        Self {
            version: CONFIG_VERSION,
            machine,
            scenario: Map::new(),
            ekfs: None,
            noise: None,
            check: None,
            sweep: None,
            output: OutputBlock::default(),
            threshold: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        if cfg.output.decimate == 0 {
            return Err(Error::Config("output.decimate must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Simulation scenario of the configured machine. `threshold` and `seed`
    /// override the file.
    pub fn scenario(&self, threshold: Option<f64>, seed: Option<u64>) -> Result<Scenario> {
        for key in ["params", "ekfs", "noise"] {
            if self.scenario.contains_key(key) {
                return Err(Error::Config(format!("scenario.{key}: set it in the top-level block instead")));
            }
        }
        let machine = self.machine.build()?;
        let threshold = threshold.or(self.threshold);
        let mut noise = self.noise.clone();
        if let (Some(n), Some(s)) = (noise.as_mut(), seed) {
            n.seed = s;
        }
        match machine {
            Machine::Wrsm(params) => {
                let mut sc: WrsmScenario = overlay(&WrsmScenario::default(), &self.scenario, "scenario")?;
                sc.params = params;
                if let Some(e) = &self.ekfs {
                    sc.ekfs = e.clone();
                }
                sc.noise = noise;
                if let Some(t) = threshold {
                    sc.threshold = t;
                }
                sc.validate()?;
                Ok(Scenario::Wrsm(sc))
            }
            Machine::Im(params) => {
                let mut sc: ImScenario = overlay(&ImScenario::default(), &self.scenario, "scenario")?;
                sc.params = params;
                if let Some(e) = &self.ekfs {
                    sc.ekfs = e.clone();
                }
                sc.noise = noise;
                if let Some(t) = threshold {
                    sc.threshold = t;
                }
                sc.validate()?;
                Ok(Scenario::Im(sc))
            }
            other => Err(Error::Config(format!("no simulation scenario for {}", other.name()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_overlay_and_validation() {
        let mut b = MachineBlock::new(MachineKind::Spmsm);
        b.params.insert("psi_r".into(), Value::from(0.1));
        let Machine::Brushless(p) = b.build().unwrap() else { panic!() };
        assert_eq!(p.psi_r, 0.1);
        b.params.insert("bogus".into(), Value::from(1.0));
        assert!(b.build().is_err());
        let mut w = MachineBlock::new(MachineKind::Wrsm);
        w.params.insert("l2".into(), Value::from(-1e-4));
        assert!(matches!(w.build(), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn version_and_unknown_keys() {
        assert!(RunConfig::parse(r#"{"version":1,"machine":{"kind":"im"}}"#).is_ok());
        assert!(RunConfig::parse(r#"{"version":2,"machine":{"kind":"im"}}"#).is_err());
        assert!(RunConfig::parse(r#"{"version":1,"machine":{"kind":"im"},"extra":0}"#).is_err());
        assert!(RunConfig::parse(r#"{"version":1,"machine":{"kind":"im"},"output":{"decimate":0}}"#).is_err());
    }

    #[test]
    fn scenario_overrides() {
        let cfg = RunConfig::parse(
            r#"{"version":1,"machine":{"kind":"wrsm"},"scenario":{"theta0":0.7},"noise":{"std":[0.1,0.1,0.1],"seed":1}}"#,
        )
        .unwrap();
        let Scenario::Wrsm(sc) = cfg.scenario(Some(3.0), Some(9)).unwrap() else { panic!() };
        assert_eq!(sc.theta0, 0.7);
        assert_eq!(sc.threshold, 3.0);
        assert_eq!(sc.noise.unwrap().seed, 9);
        let bad = RunConfig::parse(r#"{"version":1,"machine":{"kind":"wrsm"},"scenario":{"nope":1}}"#).unwrap();
        assert!(bad.scenario(None, None).is_err());
        let dcm = RunConfig::parse(r#"{"version":1,"machine":{"kind":"pm-dcm"}}"#).unwrap();
        assert!(dcm.scenario(None, None).is_err());
    }
}
