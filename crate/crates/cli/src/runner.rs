//! Executes a run configuration and writes its artifacts and manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use fdsmc_core::chaos_kit::{
    bifurcation_sweep, delay_embed, downsample, max_lyapunov, poincare_section, rms, total_variation,
    write_bifurcation_csv, write_embedding_csv, write_lyapunov_csv, write_poincare_csv, LyapunovOptions,
};
use fdsmc_core::dde_sim::{desired_trajectory, fmt_f64, simulate, SimError, SimOutput, Trajectory};
use fdsmc_core::robot_model::{fk_endeffector, RobotParams};

use crate::config::{ModeName, RunConfig};
use crate::plot::{render_svg, PlotKind, PlotSpec, Table};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
/// `|S_i|` threshold defining the reaching time.
pub const REACHING_BAND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSummary {
    pub lambda: f64,
    pub tau_s: f64,
    pub fit_t0: f64,
    pub fit_t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationSummary {
    #[serde(rename = "L")]
    pub delay: f64,
    pub maxima: usize,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunResults {
    /// RMS of the synchronization (or tracking) error per link over
    /// `rms_window`.
    pub rms: Option<[f64; 2]>,
    pub rms_window: Option<[f64; 2]>,
    /// Total variation of the applied torque per link over `rms_window`.
    pub tv: Option<[f64; 2]>,
    pub reaching_time: Option<f64>,
    pub lyapunov: Option<LyapunovSummary>,
    pub poincare_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bifurcation: Vec<BifurcationSummary>,
}

impl RunResults {
    fn scalars(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        v.extend(self.rms.iter().flatten());
        v.extend(self.tv.iter().flatten());
        v.extend(self.reaching_time);
        if let Some(l) = &self.lyapunov {
            v.extend([l.lambda, l.tau_s, l.fit_t0, l.fit_t1]);
        }
        v.extend(self.bifurcation.iter().flat_map(|b| [b.delay, b.spread]));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub status: RunStatus,
    pub error: Option<String>,
    pub config: RunConfig,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    pub results: RunResults,
    pub wall_clock_s: f64,
}

struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn plot(&mut self, csv: &str, spec: PlotSpec) -> Result<(), CliError> {
        let name = format!("{}.svg", csv.trim_end_matches(".csv"));
        self.plot_as(csv, &name, spec)
    }

    fn plot_as(&mut self, csv: &str, name: &str, spec: PlotSpec) -> Result<(), CliError> {
        let table = Table::read(&self.dir.join(csv))?;
        let xi = table.column_index(&spec.x)?;
        let mut series = Vec::new();
        for y in &spec.y {
            series.push((y.clone(), table.pairs(xi, table.column_index(y)?)));
        }
        let svg = render_svg(&spec, &series);
        self.write(name, |w| w.write_all(svg.as_bytes()))
    }
}

fn write_tracking_error<W: Write>(mut w: W, out: &SimOutput) -> std::io::Result<()> {
    let m = out.master.as_ref().expect("master present");
    writeln!(w, "t,e1,e2")?;
    for (a, b) in m.records.iter().zip(&out.plant.records) {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(a.t),
            fmt_f64(a.state.theta[0] - b.state.theta[0]),
            fmt_f64(a.state.theta[1] - b.state.theta[1])
        )?;
    }
    Ok(())
}

fn write_workspace<W: Write>(mut w: W, out: &SimOutput, plant: &RobotParams) -> std::io::Result<()> {
    let nominal = RobotParams::nominal();
    match &out.master {
        None => {
            writeln!(w, "t,x,y")?;
            for r in &out.plant.records {
                let (x, y) = fk_endeffector(plant, r.state.theta);
                writeln!(w, "{},{},{}", fmt_f64(r.t), fmt_f64(x), fmt_f64(y))?;
            }
        }
        Some(m) => {
            writeln!(w, "t,x_master,y_master,x_slave,y_slave")?;
            for (a, b) in m.records.iter().zip(&out.plant.records) {
                let (xm, ym) = fk_endeffector(&nominal, a.state.theta);
                let (xs, ys) = fk_endeffector(plant, b.state.theta);
                writeln!(w, "{},{},{},{},{}", fmt_f64(a.t), fmt_f64(xm), fmt_f64(ym), fmt_f64(xs), fmt_f64(ys))?;
            }
        }
    }
    Ok(())
}

/// Per-link error over `[t0, t_end]`: master minus slave, or desired minus
/// actual for a single robot.
pub fn error_series(out: &SimOutput, t0: f64) -> [Vec<f64>; 2] {
    let start = out.plant.records.partition_point(|r| r.t < t0 - 1e-9 * out.plant.h);
    let mut e = [Vec::new(), Vec::new()];
    for (j, r) in out.plant.records.iter().enumerate().skip(start) {
        let reference = match &out.master {
            Some(m) => m.records[j].state.theta,
            None => desired_trajectory(r.t).0,
        };
        for i in 0..2 {
            e[i].push(reference[i] - r.state.theta[i]);
        }
    }
    e
}

/// Applied torque per link over `[t0, t_end]`.
pub fn applied_torque_series(traj: &Trajectory, t0: f64) -> [Vec<f64>; 2] {
    let recs = traj.window(t0, f64::INFINITY);
    [0, 1].map(|i| recs.iter().map(|r| r.tau_applied[i]).collect())
}

/// First sample time at which every `|S_i|` is below [`REACHING_BAND`].
pub fn reaching_time(traj: &Trajectory) -> Option<f64> {
    traj.records
        .iter()
        .find(|r| r.surface.is_some_and(|s| s.iter().all(|v| v.abs() < REACHING_BAND)))
        .map(|r| r.t)
}

fn trajectory_plots(art: &mut Artifacts, cfg: &RunConfig, csv: &str, who: &str) -> Result<(), CliError> {
    art.plot(csv, PlotSpec::new(PlotKind::Line, "t", &["theta1", "theta2"], &format!("{who} joint angles")))?;
    if cfg.mode != ModeName::SinglePd && who == "slave" {
        let stem = csv.trim_end_matches(".csv");
        art.plot_as(csv, &format!("{stem}_surface.svg"), PlotSpec::new(PlotKind::Line, "t", &["S1", "S2"], "sliding variables"))?;
        art.plot_as(
            csv,
            &format!("{stem}_torque.svg"),
            PlotSpec::new(PlotKind::Line, "t", &["tau1_applied", "tau2_applied"], "control input"),
        )?;
    }
    Ok(())
}

fn finish(
    dir: &Path,
    cfg: &RunConfig,
    art: Artifacts,
    results: RunResults,
    started: Instant,
    error: Option<String>,
) -> Result<RunManifest, CliError> {
    let mut artifacts = art.names;
    artifacts.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        status: if error.is_none() { RunStatus::Ok } else { RunStatus::Failed },
        error,
        config: cfg.clone(),
        artifacts,
        results,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(manifest)
}

/// Run `cfg`, writing every artifact into `dir`. Numerical failures still
/// write a manifest with `status = failed` before returning
/// [`CliError::Numeric`].
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let started = Instant::now();
    std::fs::create_dir_all(dir)?;
    let mut art = Artifacts { dir: dir.to_path_buf(), names: Vec::new() };
    let mut results = RunResults::default();
    let scenario = cfg.scenario()?;

    let fail = |art: Artifacts, results: RunResults, msg: String| -> Result<RunManifest, CliError> {
        finish(dir, cfg, art, results, started, Some(msg.clone()))?;
        Err(CliError::Numeric(msg))
    };

    if cfg.bifurcation {
        let cols = match bifurcation_sweep(&scenario, &cfg.bifurcation_delays(), cfg.discard) {
            Ok(c) => c,
            Err(e) => return fail(art, results, e.to_string()),
        };
        art.write("bifurcation.csv", |w| write_bifurcation_csv(w, &cols))?;
        results.bifurcation = cols
            .iter()
            .map(|c| BifurcationSummary { delay: c.delay, maxima: c.maxima.len(), spread: c.spread() })
            .collect();
        if cfg.plots {
            art.plot("bifurcation.csv", PlotSpec::new(PlotKind::Scatter, "L", &["theta2_max"], "bifurcation over dead time"))?;
        }
        return finish(dir, cfg, art, results, started, None);
    }

    let out = match simulate(&scenario) {
        Ok(o) => o,
        Err(e @ SimError::Diverged { .. }) => return fail(art, results, e.to_string()),
        Err(SimError::Config(m)) => return Err(CliError::Config(m)),
        Err(e) => return fail(art, results, e.to_string()),
    };

    let plant_params =
        if cfg.mode != ModeName::SinglePd && cfg.uncertainty { RobotParams::uncertain() } else { RobotParams::nominal() };
    match &out.master {
        None => {
            art.write("plant.csv", |w| out.plant.write_csv(w))?;
        }
        Some(m) => {
            art.write("master.csv", |w| m.write_csv(w))?;
            art.write("slave.csv", |w| out.plant.write_csv(w))?;
            art.write("tracking_error.csv", |w| write_tracking_error(w, &out))?;
        }
    }
    if cfg.workspace {
        art.write("workspace.csv", |w| write_workspace(w, &out, &plant_params))?;
    }

    let e = error_series(&out, cfg.metrics_from);
    if !e[0].is_empty() {
        results.rms = Some([rms(&e[0]), rms(&e[1])]);
        results.rms_window = Some([cfg.metrics_from, cfg.t_end]);
        let tau = applied_torque_series(&out.plant, cfg.metrics_from);
        results.tv = Some([total_variation(&tau[0]), total_variation(&tau[1])]);
    }
    if cfg.mode != ModeName::SinglePd {
        results.reaching_time = reaching_time(&out.plant);
    }

    let recs = out.plant.window(cfg.discard, f64::INFINITY);
    let stride = cfg.sample_stride();
    let dt = stride as f64 * cfg.h;
    let theta2: Vec<f64> = recs.iter().map(|r| r.state.theta[1]).collect();
    let sampled = downsample(&theta2, stride);

    if cfg.lyapunov {
        let opts = LyapunovOptions {
            theiler: (cfg.theiler / dt).round() as usize,
            horizon: (cfg.lyapunov_horizon / dt).round() as usize,
            ..LyapunovOptions::for_step(dt)
        };
        match max_lyapunov(&sampled, dt, &opts) {
            Ok(est) => {
                art.write("lyapunov.csv", |w| write_lyapunov_csv(w, &est))?;
                results.lyapunov = Some(LyapunovSummary {
                    lambda: est.lambda,
                    tau_s: est.tau as f64 * dt,
                    fit_t0: est.fit_window.0,
                    fit_t1: est.fit_window.1,
                });
                if cfg.plots {
                    art.plot("lyapunov.csv", PlotSpec::new(PlotKind::Line, "t", &["mean_log_div"], "mean log divergence"))?;
                }
            }
            Err(e) => return fail(art, results, format!("lyapunov: {e}")),
        }
    }
    if cfg.poincare {
        let col = |f: fn(&fdsmc_core::dde_sim::Record) -> f64| recs.iter().map(f).collect::<Vec<f64>>();
        let pts = poincare_section(
            &col(|r| r.state.theta[0]),
            &col(|r| r.state.theta[1]),
            &col(|r| r.state.theta_dot[0]),
            &col(|r| r.state.theta_dot[1]),
            cfg.poincare_level,
        );
        art.write("poincare.csv", |w| write_poincare_csv(w, &pts))?;
        results.poincare_points = Some(pts.len());
        if cfg.plots {
            art.plot("poincare.csv", PlotSpec::new(PlotKind::Scatter, "theta2", &["omega2"], "Poincaré section"))?;
        }
    }
    if cfg.embedding {
        let delay = (cfg.embedding_delay / dt).round().max(1.0) as usize;
        match delay_embed(&sampled, cfg.embedding_dim, delay) {
            Ok(rows) => {
                art.write("embedding.csv", |w| write_embedding_csv(w, &rows))?;
                if cfg.plots {
                    art.plot("embedding.csv", PlotSpec::new(PlotKind::Line, "x0", &["x1"], "delay reconstruction"))?;
                }
            }
            Err(e) => return Err(CliError::Config(format!("embedding_delay: {e}"))),
        }
    }

    if cfg.plots {
        match &out.master {
            None => trajectory_plots(&mut art, cfg, "plant.csv", "robot")?,
            Some(_) => {
                trajectory_plots(&mut art, cfg, "slave.csv", "slave")?;
                art.plot("tracking_error.csv", PlotSpec::new(PlotKind::Line, "t", &["e2"], "tracking error of link 2"))?;
            }
        }
        if cfg.workspace {
            let spec = match out.master {
                None => PlotSpec::new(PlotKind::Line, "x", &["y"], "end-effector path"),
                Some(_) => PlotSpec::new(PlotKind::Line, "x_slave", &["y_slave"], "end-effector path"),
            };
            art.plot("workspace.csv", spec)?;
        }
    }

    if results.scalars().iter().any(|v| !v.is_finite()) {
        return fail(art, results, "non-finite scalar result".into());
    }
    finish(dir, cfg, art, results, started, None)
}
