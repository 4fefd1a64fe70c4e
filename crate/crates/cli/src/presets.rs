//! Named configurations regenerating the data behind each figure.

use crate::config::{ModeName, RunConfig};
use crate::CliError;

pub const PRESET_NAMES: [&str; 9] = [
    "fig2-chaotic",
    "fig3a-bifurcation",
    "fig3b-embedding",
    "fig4-poincare",
    "fig5-sync",
    "fig6-surfaces",
    "fig7-attractor",
    "fig8-uncertain",
    "fig9-uncertain-surfaces",
];

fn base(name: &str, mode: ModeName, t_end: f64) -> RunConfig {
    let text = format!(
        "name = \"{name}\"\nmode = \"{}\"\nh = 0.0005\nt_end = {t_end:?}\nplots = true\n",
        match mode {
            ModeName::SinglePd => "single_pd",
            ModeName::MasterSlaveFdsmc => "master_slave_fdsmc",
            ModeName::MasterSlaveSmcBaseline => "master_slave_smc_baseline",
        }
    );
    RunConfig::from_toml(&text).expect("preset base is valid")
}

pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let cfg = match name {
        "fig2-chaotic" => RunConfig { workspace: true, ..base(name, ModeName::SinglePd, 100.0) },
        "fig3a-bifurcation" => RunConfig {
            bifurcation: true,
            bifurcation_delays: crate::config::default_bifurcation_delays(),
            ..base(name, ModeName::SinglePd, 300.0)
        },
        "fig3b-embedding" => RunConfig { embedding: true, ..base(name, ModeName::SinglePd, 400.0) },
        "fig4-poincare" => RunConfig {
            poincare: true,
            lyapunov: true,
            ..base(name, ModeName::SinglePd, 400.0)
        },
        "fig5-sync" => RunConfig { workspace: true, ..base(name, ModeName::MasterSlaveFdsmc, 100.0) },
        "fig6-surfaces" => base(name, ModeName::MasterSlaveFdsmc, 100.0),
        "fig7-attractor" => RunConfig {
            embedding: true,
            embedding_delay: 68.0,
            lyapunov: true,
            ..base(name, ModeName::MasterSlaveFdsmc, 400.0)
        },
        "fig8-uncertain" => RunConfig { uncertainty: true, ..base(name, ModeName::MasterSlaveFdsmc, 100.0) },
        "fig9-uncertain-surfaces" => {
            RunConfig { uncertainty: true, ..base(name, ModeName::MasterSlaveFdsmc, 100.0) }
        }
        _ => {
            return Err(CliError::Config(format!(
                "unknown preset {name:?}; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn presets() -> Vec<RunConfig> {
    PRESET_NAMES.iter().map(|n| preset(n).expect("listed preset exists")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_resolves() {
        let all = presets();
        assert_eq!(all.len(), PRESET_NAMES.len());
        for (cfg, name) in all.iter().zip(PRESET_NAMES) {
            assert_eq!(cfg.name, name);
        }
    }

    #[test]
    fn uncertain_preset_flags_slave() {
        let c = preset("fig8-uncertain").unwrap();
        assert!(c.uncertainty);
        assert_eq!(c.activation_time, 0.1);
        assert_eq!((c.ks, c.kp, c.kd, c.kf, c.lambda), (1.0, 2.0, 10.0, 0.1, 0.7));
    }

    #[test]
    fn chaotic_preset_uses_slow_delay() {
        let c = preset("fig2-chaotic").unwrap();
        assert_eq!(c.mode, ModeName::SinglePd);
        assert_eq!(c.l_slave, 0.015);
        assert_eq!((c.pd_kp, c.pd_kd), (4.0, 4.0));
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("fig10"), Err(CliError::Config(_))));
    }
}
