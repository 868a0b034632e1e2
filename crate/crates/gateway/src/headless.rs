//! Batch runs driven through the same tick loop as live sessions, and the
//! config check suite.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mirroreyes::compositor::{compute_crop, flip_horizontal, PixelSize};
use mirroreyes::kinematics::{solve_gaze, AttentionTarget, JointVector};
use mirroreyes::scenario::{compute_metrics, MetricsSummary, ScenarioScript, TrialMetrics, ECDF_CSV_HEADER, METRICS_CSV_HEADER};
use mirroreyes::scene::{render_camera, roi_for};
use serde::Serialize;

use crate::config::SimConfig;
use crate::protocol::Command;
use crate::sim::Simulation;

/// Parses `"-,4.66,14.58"`: one entry per trial, `-` or empty for no stop.
pub fn parse_stops(text: &str) -> Result<Vec<Option<f64>>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| match s.trim() {
            "" | "-" => Ok(None),
            v => {
                let t: f64 = v.parse().with_context(|| format!("bad stop time `{v}`"))?;
                if !(t.is_finite() && t >= 0.0) {
                    bail!("stop time must be finite and >= 0, got {t}");
                }
                Ok(Some(t))
            }
        })
        .collect()
}

pub fn load_script(path: &Path) -> Result<ScenarioScript> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let script: ScenarioScript = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    script.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(script)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    /// Write every n-th eye raster as PNG.
    pub record_every: Option<u64>,
}

/// Plays the script trial by trial: each trial is requested on the tick
/// after the previous one ended, with its scripted stop sent alongside.
pub fn run_scenario(config: &SimConfig, script: &ScenarioScript, stops: &[Option<f64>], opts: &RunOptions) -> Result<Vec<TrialMetrics>> {
    let mut sim = Simulation::new(config.clone());
    sim.enqueue(Command::LoadScenario {
        path: None,
        inline: Some(script.clone()),
    });
    let frames_dir = match (&opts.out, opts.record_every) {
        (Some(out), Some(_)) => {
            let dir = out.join("frames");
            fs::create_dir_all(&dir)?;
            Some(dir)
        }
        _ => None,
    };
    let horizon = ((config.timeline.completed + config.timeline.place_down_duration + 10.0) * config.tick_rate) as usize;
    for (i, spec) in script.ordered_trials().iter().enumerate() {
        sim.enqueue(Command::Request {
            text: spec.instruction.clone(),
        });
        if let Some(t) = stops.get(i).copied().flatten() {
            sim.enqueue(Command::stop_at(t));
        }
        for step in 0.. {
            let snap = sim.step();
            if let Some(w) = snap.warnings.first() {
                bail!("trial {i}: {w}");
            }
            if let (Some(dir), Some(every)) = (&frames_dir, opts.record_every) {
                if snap.tick % every.max(1) == 0 {
                    if let Some(frame) = sim.eye_frame() {
                        frame.raster.save(dir.join(format!("eyes_{:06}.png", snap.tick)))?;
                    }
                }
            }
            if !sim.trial_active() {
                break;
            }
            if step > horizon {
                bail!("trial {i} did not finish");
            }
        }
    }
    let trials = sim.completed().to_vec();
    if let Some(out) = &opts.out {
        write_outputs(out, &trials)?;
        if opts.record_every.is_some() {
            render_camera(&script.scene(), &config.camera, 0).image.save(out.join("camera.png"))?;
        }
    }
    Ok(trials)
}

#[derive(Serialize)]
struct EventRow<'a> {
    trial: usize,
    condition: &'a str,
    kind: mirroreyes::scene::ActionEventKind,
    t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    entity: Option<&'a str>,
}

/// One JSON object per line and event.
pub fn event_log(trials: &[TrialMetrics]) -> String {
    let mut out = String::new();
    for trial in trials {
        for e in &trial.events {
            let row = EventRow {
                trial: trial.trial,
                condition: trial.condition.as_str(),
                kind: e.kind,
                t: e.t,
                entity: e.entity.as_deref(),
            };
            out.push_str(&serde_json::to_string(&row).expect("event rows serialize"));
            out.push('\n');
        }
    }
    out
}

/// Empty trial lists give header-only CSVs.
pub fn summarize(trials: &[TrialMetrics]) -> MetricsSummary {
    compute_metrics(trials).unwrap_or_default()
}

pub fn metrics_csv(trials: &[TrialMetrics]) -> String {
    if trials.is_empty() {
        return format!("{METRICS_CSV_HEADER}\n");
    }
    summarize(trials).metrics_csv()
}

pub fn ecdf_csv(trials: &[TrialMetrics]) -> String {
    if trials.is_empty() {
        return format!("{ECDF_CSV_HEADER}\n");
    }
    summarize(trials).ecdf_csv()
}

pub fn write_outputs(out: &Path, trials: &[TrialMetrics]) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("events.jsonl"), event_log(trials))?;
    fs::write(out.join("trials.json"), serde_json::to_string_pretty(trials)?)?;
    fs::write(out.join("metrics.csv"), metrics_csv(trials))?;
    fs::write(out.join("ecdf.csv"), ecdf_csv(trials))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

/// Invariants that depend on the configuration.
pub fn run_checks(config: &SimConfig) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |name, res: Result<String, String>| {
        let (ok, detail) = match res {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        out.push(CheckResult { name, ok, detail });
    };

    push(
        "config",
        config.validate().map(|_| "valid".to_string()).map_err(|e| e.to_string()),
    );

    let geom = &config.geometry;
    push("gaze_convergence", {
        let targets = [(1.5, 0.0, 0.0), (1.0, 0.5, 0.2), (2.0, -0.8, -0.3), (0.6, 0.1, -0.2)];
        let mut worst: f64 = 0.0;
        let mut failed = Vec::new();
        for (x, y, z) in targets {
            match solve_gaze(&JointVector::zero(), geom, &AttentionTarget::new(x, y, z), &config.ik) {
                Ok(sol) if sol.converged => worst = worst.max(sol.residual),
                Ok(sol) => failed.push(format!("({x}, {y}, {z}) residual {:.2e}", sol.residual)),
                Err(e) => failed.push(format!("({x}, {y}, {z}) {e}")),
            }
        }
        if failed.is_empty() {
            Ok(format!("worst residual {worst:.2e} m"))
        } else {
            Err(failed.join("; "))
        }
    });

    push("crop_containment", {
        let size = config.camera.size();
        let side = (2.0 * geom.pupil_radius * geom.pixels_per_meter).round().max(1.0) as u32;
        let mut bad = Vec::new();
        for obj in &config.scene.objects {
            let res = roi_for(&config.scene, &config.camera, &obj.id)
                .map_err(|e| e.to_string())
                .and_then(|roi| compute_crop(size, &roi, PixelSize::square(side)).map_err(|e| e.to_string()));
            match res {
                Ok(c) if c.tl_x + c.crop.width <= size.width && c.tl_y + c.crop.height <= size.height => {}
                Ok(c) => bad.push(format!("{}: {:?}", obj.id, c)),
                Err(e) => bad.push(format!("{}: {e}", obj.id)),
            }
        }
        if bad.is_empty() {
            Ok(format!("{} entities", config.scene.objects.len()))
        } else {
            Err(bad.join("; "))
        }
    });

    push("flip_involution", {
        let frame = render_camera(&config.scene, &config.camera, 0);
        if flip_horizontal(&flip_horizontal(&frame.image)) == frame.image {
            Ok("byte-exact".into())
        } else {
            Err("flip twice changed the image".into())
        }
    });

    push("timeline", {
        let script = ScenarioScript::standard_block(mirroreyes::scenario::Condition::EyesOnly, 0);
        match mirroreyes::scenario::run_block(&script, &[], config.tick_rate, &config.timeline) {
            Ok(trials) if trials.iter().all(|t| t.events.last().is_some_and(|e| e.t == config.timeline.completed)) => {
                Ok(format!("{} trials complete", trials.len()))
            }
            Ok(_) => Err("a trial ended before completion".into()),
            Err(e) => Err(e.to_string()),
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_parsing() {
        assert_eq!(parse_stops("-,4.66, 14.58").unwrap(), [None, Some(4.66), Some(14.58)]);
        assert_eq!(parse_stops("").unwrap(), []);
        assert_eq!(parse_stops("1,,2").unwrap(), [Some(1.0), None, Some(2.0)]);
        assert!(parse_stops("x").is_err());
        assert!(parse_stops("-1").is_err());
    }

    #[test]
    fn default_config_passes_checks() {
        for check in run_checks(&SimConfig::default()) {
            assert!(check.ok, "{}: {}", check.name, check.detail);
        }
    }
}
