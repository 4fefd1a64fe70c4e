//! Flat TOML run configuration. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use fdsmc_core::controllers::{FdsmcGains, PdGains, SmcGains};
use fdsmc_core::dde_sim::{Mode, ScenarioConfig};
use fdsmc_core::frac_ops::DEFAULT_MEMORY_LEN;
use fdsmc_core::robot_model::JointState;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    SinglePd,
    MasterSlaveFdsmc,
    MasterSlaveSmcBaseline,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::SinglePd => Mode::SinglePd,
            ModeName::MasterSlaveFdsmc => Mode::MasterSlaveFdsmc,
            ModeName::MasterSlaveSmcBaseline => Mode::MasterSlaveSmcBaseline,
        }
    }
}

fn default_name() -> String {
    "run".into()
}
fn l_master() -> f64 {
    0.005
}
fn l_slave() -> f64 {
    0.015
}
fn four() -> f64 {
    4.0
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn ten() -> f64 {
    10.0
}
fn kf() -> f64 {
    0.1
}
fn lambda() -> f64 {
    0.7
}
fn five() -> f64 {
    5.0
}
fn activation() -> f64 {
    0.1
}
fn yes() -> bool {
    true
}
fn memory_len() -> usize {
    DEFAULT_MEMORY_LEN
}
fn divergence_bound() -> f64 {
    1e6
}
fn discard() -> f64 {
    100.0
}
fn sample_dt() -> f64 {
    0.01
}
fn lyapunov_horizon() -> f64 {
    30.0
}
fn poincare_level() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub mode: ModeName,
    /// Integration step (s).
    pub h: f64,
    pub t_end: f64,
    #[serde(rename = "L_master", default = "l_master")]
    pub l_master: f64,
    #[serde(rename = "L_slave", default = "l_slave")]
    pub l_slave: f64,

    #[serde(default = "four")]
    pub pd_kp: f64,
    #[serde(default = "four")]
    pub pd_kd: f64,
    #[serde(default = "one")]
    pub ks: f64,
    #[serde(default = "two")]
    pub kp: f64,
    #[serde(default = "ten")]
    pub kd: f64,
    #[serde(default = "kf")]
    pub kf: f64,
    #[serde(default = "lambda")]
    pub lambda: f64,
    #[serde(default = "five")]
    pub smc_c: f64,
    #[serde(default = "five")]
    pub smc_k: f64,

    #[serde(default = "activation")]
    pub activation_time: f64,
    #[serde(default)]
    pub uncertainty: bool,
    #[serde(default = "yes")]
    pub delay_applies_to_control: bool,
    #[serde(default = "memory_len")]
    pub memory_len: usize,
    #[serde(default)]
    pub theta1_0: f64,
    #[serde(default)]
    pub theta2_0: f64,
    #[serde(default)]
    pub omega1_0: f64,
    #[serde(default)]
    pub omega2_0: f64,
    #[serde(default = "divergence_bound")]
    pub divergence_bound: f64,

    /// Start of the RMS and total-variation window (s).
    #[serde(default = "ten")]
    pub metrics_from: f64,
    /// Transient dropped before chaos diagnostics (s).
    #[serde(default = "discard")]
    pub discard: f64,
    /// Sampling interval of the series fed to the Lyapunov estimate and the
    /// embedding (s).
    #[serde(default = "sample_dt")]
    pub sample_dt: f64,
    #[serde(default)]
    pub lyapunov: bool,
    #[serde(default = "lyapunov_horizon")]
    pub lyapunov_horizon: f64,
    #[serde(default = "four")]
    pub theiler: f64,
    #[serde(default)]
    pub poincare: bool,
    #[serde(default = "poincare_level")]
    pub poincare_level: f64,
    #[serde(default)]
    pub embedding: bool,
    #[serde(default = "two_dims")]
    pub embedding_dim: usize,
    /// Reconstruction delay (s).
    #[serde(default = "five")]
    pub embedding_delay: f64,
    #[serde(default)]
    pub bifurcation: bool,
    #[serde(default)]
    pub bifurcation_delays: Vec<f64>,
    #[serde(default)]
    pub workspace: bool,
    #[serde(default)]
    pub plots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn two_dims() -> usize {
    2
}

/// Dead times swept when a bifurcation run lists none: 1 ms to 20 ms.
pub fn default_bifurcation_delays() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 1e-3).collect()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn scenario(&self) -> Result<ScenarioConfig, CliError> {
        let bad = |key: &str, e: &dyn std::fmt::Display| CliError::Config(format!("{key}: {e}"));
        Ok(ScenarioConfig {
            mode: self.mode.into(),
            h: self.h,
            t_end: self.t_end,
            l_master: self.l_master,
            l_slave: self.l_slave,
            pd: PdGains::new(self.pd_kp, self.pd_kd).map_err(|e| bad("pd_kp/pd_kd", &e))?,
            fdsmc: FdsmcGains::new(self.ks, self.kp, self.kd, self.kf, self.lambda)
                .map_err(|e| bad("ks/kp/kd/kf/lambda", &e))?,
            smc: SmcGains::new(self.smc_c, self.smc_k).map_err(|e| bad("smc_c/smc_k", &e))?,
            activation_time: self.activation_time,
            uncertain_slave: self.uncertainty,
            memory_len: self.memory_len,
            delay_applies_to_control: self.delay_applies_to_control,
            initial: JointState {
                theta: [self.theta1_0, self.theta2_0],
                theta_dot: [self.omega1_0, self.omega2_0],
            },
            divergence_bound: self.divergence_bound,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario()?
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(format!("{key}: {msg}")))
            }
        };
        check(
            self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') && !self.name.is_empty(),
            "name",
            "must be non-empty and use only letters, digits, '-' or '_'",
        )?;
        check(self.metrics_from >= 0.0, "metrics_from", "must be non-negative")?;
        let chaos = self.lyapunov || self.poincare || self.embedding || self.bifurcation;
        if chaos {
            check(self.discard >= 0.0 && self.discard < self.t_end, "discard", "must lie in [0, t_end)")?;
        }
        check(self.sample_dt > 0.0 && self.sample_dt >= self.h, "sample_dt", "must be at least h")?;
        check(self.lyapunov_horizon > 0.0, "lyapunov_horizon", "must be positive")?;
        check(self.theiler >= 0.0, "theiler", "must be non-negative")?;
        check(self.embedding_dim >= 2, "embedding_dim", "must be at least 2")?;
        check(self.embedding_delay > 0.0, "embedding_delay", "must be positive")?;
        if self.bifurcation {
            check(self.mode == ModeName::SinglePd, "bifurcation", "requires mode = \"single_pd\"")?;
            for &l in &self.bifurcation_delays {
                let probe = ScenarioConfig { l_slave: l, ..self.scenario()? };
                probe.validate().map_err(|e| CliError::Config(format!("bifurcation_delays: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn bifurcation_delays(&self) -> Vec<f64> {
        if self.bifurcation_delays.is_empty() {
            default_bifurcation_delays()
        } else {
            self.bifurcation_delays.clone()
        }
    }

    /// Samples of the fixed step per diagnostic sample.
    pub fn sample_stride(&self) -> usize {
        (self.sample_dt / self.h).round().max(1.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "mode = \"single_pd\"\nh = 0.0005\nt_end = 1.0\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.l_slave, 0.015);
        assert_eq!(c.kd, 10.0);
        assert_eq!(c.memory_len, 4000);
        assert!(c.delay_applies_to_control);
        assert_eq!(c.name, "run");
    }

    #[test]
    fn missing_step_is_rejected() {
        let err = RunConfig::from_toml("mode = \"single_pd\"\nt_end = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("`h`"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}kpp = 3.0\n")).unwrap_err();
        assert!(err.to_string().contains("kpp"), "{err}");
    }

    #[test]
    fn delay_off_grid_is_rejected() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}L_slave = 0.0152\n")).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn bad_mode_and_name() {
        assert!(RunConfig::from_toml("mode = \"pd\"\nh = 0.0005\nt_end = 1.0\n").is_err());
        assert!(RunConfig::from_toml(&format!("{MINIMAL}name = \"../x\"\n")).is_err());
    }

    #[test]
    fn bifurcation_needs_single_mode() {
        let text = "mode = \"master_slave_fdsmc\"\nh = 0.0005\nt_end = 200.0\nbifurcation = true\n";
        assert!(RunConfig::from_toml(text).is_err());
    }
}
