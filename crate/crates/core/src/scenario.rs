//! Study protocol: instructions, deliberate misinterpretation, trial blocks,
//! interruption capture and stop-time metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{step_action, ActionEvent, ActionEventKind, ActionPlan, ActionStep, ArmAction, ArmPhase, Scene, SceneError, Timeline};

pub const DEFAULT_STOP_KEYWORDS: [&str; 3] = ["stop", "halt", "wait"];
pub const METRICS_CSV_HEADER: &str = "error_step,condition,n,mean_s,sd_s,min_s,max_s";
pub const ECDF_CSV_HEADER: &str = "condition,error_step,t_s,F";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown instruction `{0}`")]
    UnknownInstruction(String),
    #[error("cannot resolve `{0}` to a scene entity")]
    UnknownPhrase(String),
    #[error("no trial logs")]
    EmptyInput,
    #[error("invalid scenario: {0}")]
    InvalidScript(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    EyesOnly,
    MirrorEyes,
}

impl Condition {
    pub const BOTH: [Condition; 2] = [Condition::EyesOnly, Condition::MirrorEyes];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::EyesOnly => "eyes_only",
            Condition::MirrorEyes => "mirror_eyes",
        }
    }

    pub fn mirror_enabled(self) -> bool {
        self == Condition::MirrorEyes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub raw: String,
    pub object_phrase: String,
    pub plate_phrase: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    None,
    Step1,
    Step2,
}

impl ErrorClass {
    /// 1 or 2 for errors.
    pub fn step(self) -> Option<u8> {
        match self {
            ErrorClass::None => None,
            ErrorClass::Step1 => Some(1),
            ErrorClass::Step2 => Some(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedAction {
    pub pick_id: String,
    pub place_id: String,
    pub expected_pick: String,
    pub expected_place: String,
    pub error_class: ErrorClass,
}

impl PlannedAction {
    fn classify(pick_id: String, place_id: String, expected_pick: String, expected_place: String) -> Self {
        let error_class = if pick_id != expected_pick {
            ErrorClass::Step1
        } else if place_id != expected_place {
            ErrorClass::Step2
        } else {
            ErrorClass::None
        };
        Self {
            pick_id,
            place_id,
            expected_pick,
            expected_place,
            error_class,
        }
    }
}

/// (object phrase, plate phrase) of the instruction set, in study order.
pub const INSTRUCTION_SET: [(&str, &str); 6] = [
    ("red bottle", "red plate"),
    ("purple can", "red plate"),
    ("spray can", "white plate"),
    ("spray can", "red plate"),
    ("ketchup bottle", "red plate"),
    ("red bottle", "white plate"),
];

pub fn instruction_text(object: &str, plate: &str) -> String {
    format!("Put the {object} onto the {plate}")
}

fn normalize(text: &str) -> String {
    let lowered = text.trim().trim_end_matches(['.', '!']).to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_article(s: &str) -> &str {
    s.strip_prefix("the ").unwrap_or(s).trim()
}

pub fn parse_instruction(text: &str, mode: ParseMode) -> Result<Instruction, ScenarioError> {
    let norm = normalize(text);
    if norm.is_empty() {
        return Err(ScenarioError::UnknownInstruction(text.to_string()));
    }
    let make = |object: &str, plate: &str| Instruction {
        raw: text.to_string(),
        object_phrase: object.to_string(),
        plate_phrase: plate.to_string(),
    };
    if let Some((o, p)) = INSTRUCTION_SET
        .iter()
        .find(|(o, p)| normalize(&instruction_text(o, p)) == norm)
    {
        return Ok(make(o, p));
    }
    if mode == ParseMode::Strict {
        return Err(ScenarioError::UnknownInstruction(text.to_string()));
    }
    let body = ["please put ", "put ", "place ", "move "]
        .iter()
        .find_map(|p| norm.strip_prefix(p))
        .unwrap_or(&norm);
    for sep in [" onto ", " on ", " to "] {
        if let Some((o, p)) = body.split_once(sep) {
            let (o, p) = (strip_article(o), strip_article(p));
            if !o.is_empty() && !p.is_empty() {
                return Ok(make(o, p));
            }
        }
    }
    Err(ScenarioError::UnknownInstruction(text.to_string()))
}

/// Literal meaning of an object or plate phrase.
pub fn resolve_phrase(phrase: &str) -> Option<&'static str> {
    match normalize(phrase).as_str() {
        "red bottle" | "ketchup bottle" | "bottle" => Some(Scene::BOTTLE),
        "spray can" | "purple can" | "can" => Some(Scene::CAN),
        "red plate" => Some(Scene::RED_PLATE),
        "white plate" => Some(Scene::WHITE_PLATE),
        _ => None,
    }
}

/// The robot's deliberately misinterpreted plan for an instruction.
///
/// `purple can` is taken to mean the bottle, `ketchup bottle` the can and
/// `white plate` the red plate; every other phrase resolves literally.
/// Only lenient-mode phrases outside the scene fail.
pub fn inject_error(instr: &Instruction) -> Result<PlannedAction, ScenarioError> {
    let literal = |p: &str| resolve_phrase(p).ok_or_else(|| ScenarioError::UnknownPhrase(p.to_string()));
    let expected_pick = literal(&instr.object_phrase)?;
    let expected_place = literal(&instr.plate_phrase)?;
    let pick = match normalize(&instr.object_phrase).as_str() {
        "purple can" => Scene::BOTTLE,
        "ketchup bottle" => Scene::CAN,
        _ => expected_pick,
    };
    let place = match normalize(&instr.plate_phrase).as_str() {
        "white plate" => Scene::RED_PLATE,
        _ => expected_place,
    };
    Ok(PlannedAction::classify(
        pick.into(),
        place.into(),
        expected_pick.into(),
        expected_place.into(),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForcedOutcome {
    pub pick: String,
    pub place: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub instruction: String,
    /// Overrides the injected plan; the error class is recomputed against the instruction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced: Option<ForcedOutcome>,
}

impl TrialSpec {
    pub fn new(instruction: impl Into<String>) -> Self {
        Self {
            instruction: instruction.into(),
            forced: None,
        }
    }

    pub fn plan(&self, mode: ParseMode) -> Result<(Instruction, PlannedAction), ScenarioError> {
        let instr = parse_instruction(&self.instruction, mode)?;
        let mut planned = inject_error(&instr)?;
        if let Some(f) = &self.forced {
            planned = PlannedAction::classify(f.pick.clone(), f.place.clone(), planned.expected_pick, planned.expected_place);
        }
        Ok((instr, planned))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub condition: Condition,
    pub trials: Vec<TrialSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Shuffle trial order with `seed` when the block is run.
    #[serde(default)]
    pub shuffle: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<Scene>,
}

impl ScenarioScript {
    /// The six instructions in study order.
    pub fn instruction_set(condition: Condition) -> Self {
        Self {
            name: Some("instruction_set".into()),
            condition,
            trials: INSTRUCTION_SET
                .iter()
                .map(|(o, p)| TrialSpec::new(instruction_text(o, p)))
                .collect(),
            seed: 0,
            shuffle: false,
            scene: None,
        }
    }

    /// One correct, one step-1 and one step-2 trial drawn and ordered by `seed`.
    pub fn standard_block(condition: Condition, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trials = Vec::with_capacity(3);
        for class in [ErrorClass::None, ErrorClass::Step1, ErrorClass::Step2] {
            let rows: Vec<_> = INSTRUCTION_SET
                .iter()
                .filter(|(o, p)| {
                    let instr = parse_instruction(&instruction_text(o, p), ParseMode::Strict).unwrap();
                    inject_error(&instr).unwrap().error_class == class
                })
                .collect();
            let (o, p) = rows.choose(&mut rng).expect("every class has a row");
            trials.push(TrialSpec::new(instruction_text(o, p)));
        }
        trials.shuffle(&mut rng);
        Self {
            name: Some(format!("standard_block_{seed}")),
            condition,
            trials,
            seed,
            shuffle: false,
            scene: None,
        }
    }

    pub fn scene(&self) -> Scene {
        self.scene.clone().unwrap_or_default()
    }

    /// Trials in execution order.
    pub fn ordered_trials(&self) -> Vec<TrialSpec> {
        let mut trials = self.trials.clone();
        if self.shuffle {
            trials.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        }
        trials
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.trials.is_empty() {
            return Err(ScenarioError::InvalidScript("no trials".into()));
        }
        let scene = self.scene();
        scene.validate()?;
        for trial in &self.trials {
            let (_, planned) = trial.plan(ParseMode::Strict)?;
            ActionPlan::new(&scene, &planned.pick_id, &planned.place_id)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    CorrectUninterrupted,
    ErrorInterrupted,
    ErrorMissed,
    FalseStop,
}

pub fn classify(error_class: ErrorClass, stop_time: Option<f64>) -> Classification {
    match (error_class, stop_time.is_some()) {
        (ErrorClass::None, false) => Classification::CorrectUninterrupted,
        (ErrorClass::None, true) => Classification::FalseStop,
        (_, true) => Classification::ErrorInterrupted,
        (_, false) => Classification::ErrorMissed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub condition: Condition,
    pub instruction: String,
    pub planned: PlannedAction,
    pub events: Vec<ActionEvent>,
    /// Seconds since function onset.
    pub stop_time: Option<f64>,
    /// Tick time at which the arm came to rest.
    pub halted_at: Option<f64>,
    pub classification: Classification,
}

impl TrialMetrics {
    pub fn error_class(&self) -> ErrorClass {
        self.planned.error_class
    }
}

/// Onset-relative time of tick `tick`.
pub fn tick_time(tick: u64, tick_rate: f64) -> f64 {
    tick as f64 / tick_rate
}

/// Whether an utterance contains one of the interrupt keywords.
pub fn is_stop_utterance(text: &str, keywords: &[String]) -> bool {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .any(|w| keywords.iter().any(|k| k.eq_ignore_ascii_case(w)))
}

/// One trial advanced tick by tick. The gateway drives the same type live.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub index: usize,
    pub condition: Condition,
    pub instruction: String,
    pub planned: PlannedAction,
    pub plan: ActionPlan,
    pub scene: Scene,
    pub action: ArmAction,
    pub tick: u64,
    pub tick_rate: f64,
    pub timeline: Timeline,
    pub events: Vec<ActionEvent>,
    pending_stop: Option<f64>,
    halted_at: Option<f64>,
}

impl TrialRun {
    pub fn new(
        index: usize,
        condition: Condition,
        spec: &TrialSpec,
        scene: Scene,
        mode: ParseMode,
        tick_rate: f64,
        timeline: Timeline,
    ) -> Result<Self, ScenarioError> {
        let (_, planned) = spec.plan(mode)?;
        let plan = ActionPlan::new(&scene, &planned.pick_id, &planned.place_id)?;
        Ok(Self {
            index,
            condition,
            instruction: spec.instruction.clone(),
            action: ArmAction::new(&plan),
            planned,
            plan,
            scene,
            tick: 0,
            tick_rate,
            timeline,
            events: Vec::new(),
            pending_stop: None,
            halted_at: None,
        })
    }

    /// Time of the next tick to be stepped.
    pub fn time(&self) -> f64 {
        tick_time(self.tick, self.tick_rate)
    }

    /// Schedules an interrupt at onset-relative time `t`; the first one wins.
    pub fn request_stop(&mut self, t: f64) {
        if self.pending_stop.is_none() && self.action.stop_time.is_none() {
            self.pending_stop = Some(t.max(0.0));
        }
    }

    pub fn is_finished(&self) -> bool {
        self.action.is_finished()
    }

    pub fn step(&mut self) -> ActionStep {
        let t = self.time();
        let stop = self.pending_stop.filter(|s| *s <= t);
        let step = step_action(&self.action, &self.plan, t, stop, &self.timeline);
        if let Some((id, pos)) = &step.moved {
            // The id always names a scene entity of the plan.
            let _ = self.scene.set_position(id, *pos);
        }
        if stop.is_some() {
            self.pending_stop = None;
        }
        if self.halted_at.is_none() && step.action.phase == ArmPhase::Halted {
            self.halted_at = Some(t);
        }
        self.events.extend(step.events.iter().cloned());
        self.action = step.action.clone();
        self.tick += 1;
        step
    }

    pub fn metrics(&self) -> TrialMetrics {
        let stop_time = self.action.stop_time;
        TrialMetrics {
            trial: self.index,
            condition: self.condition,
            instruction: self.instruction.clone(),
            planned: self.planned.clone(),
            events: self.events.clone(),
            stop_time,
            halted_at: self.halted_at,
            classification: classify(self.planned.error_class, stop_time),
        }
    }
}

/// Upper bound on ticks per trial, far past any nominal completion.
fn tick_budget(tick_rate: f64, timeline: &Timeline) -> u64 {
    ((timeline.completed + timeline.place_down_duration + 10.0) * tick_rate).ceil() as u64
}

/// Runs every trial of `script`; `stops[i]` is the onset-relative stop time of
/// the i-th executed trial.
pub fn run_block(
    script: &ScenarioScript,
    stops: &[Option<f64>],
    tick_rate: f64,
    timeline: &Timeline,
) -> Result<Vec<TrialMetrics>, ScenarioError> {
    if !(tick_rate > 0.0) {
        return Err(ScenarioError::InvalidScript("tick_rate must be > 0".into()));
    }
    timeline.validate().map_err(ScenarioError::InvalidScript)?;
    let scene = script.scene();
    scene.validate()?;
    let budget = tick_budget(tick_rate, timeline);
    let mut out = Vec::new();
    for (i, spec) in script.ordered_trials().iter().enumerate() {
        let mut run = TrialRun::new(i, script.condition, spec, scene.clone(), ParseMode::Strict, tick_rate, *timeline)?;
        if let Some(t) = stops.get(i).copied().flatten() {
            run.request_stop(t);
        }
        while !run.is_finished() && run.tick < budget {
            run.step();
        }
        out.push(run.metrics());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary, ScenarioError> {
    if values.is_empty() {
        return Err(ScenarioError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(Summary {
        n: values.len(),
        mean,
        sd: var.sqrt(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Sorted `(t, k/n)` steps, one per distinct value.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, v) in sorted.iter().enumerate() {
        let f = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = f,
            _ => out.push((*v, f)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub error_step: u8,
    pub condition: Condition,
    #[serde(flatten)]
    pub stats: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfSeries {
    pub condition: Condition,
    pub error_step: u8,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub rows: Vec<SummaryRow>,
    pub ecdf: Vec<EcdfSeries>,
}

/// Stop-time statistics of interrupted erroneous trials per error step and condition.
pub fn compute_metrics(logs: &[TrialMetrics]) -> Result<MetricsSummary, ScenarioError> {
    if logs.is_empty() {
        return Err(ScenarioError::EmptyInput);
    }
    let mut groups: BTreeMap<(u8, Condition), Vec<f64>> = BTreeMap::new();
    for log in logs {
        if log.classification != Classification::ErrorInterrupted {
            continue;
        }
        if let (Some(step), Some(t)) = (log.error_class().step(), log.stop_time) {
            groups.entry((step, log.condition)).or_default().push(t);
        }
    }
    let mut summary = MetricsSummary::default();
    for ((error_step, condition), times) in &groups {
        summary.rows.push(SummaryRow {
            error_step: *error_step,
            condition: *condition,
            stats: summarize(times)?,
        });
    }
    let mut by_condition: Vec<_> = groups.iter().collect();
    by_condition.sort_by_key(|((step, cond), _)| (*cond, *step));
    for ((error_step, condition), times) in by_condition {
        summary.ecdf.push(EcdfSeries {
            condition: *condition,
            error_step: *error_step,
            points: ecdf(times),
        });
    }
    Ok(summary)
}

impl MetricsSummary {
    pub fn metrics_csv(&self) -> String {
        let mut out = format!("{METRICS_CSV_HEADER}\n");
        for r in &self.rows {
            let s = &r.stats;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.error_step,
                r.condition.as_str(),
                s.n,
                s.mean,
                s.sd,
                s.min,
                s.max
            );
        }
        out
    }

    pub fn ecdf_csv(&self) -> String {
        let mut out = format!("{ECDF_CSV_HEADER}\n");
        for series in &self.ecdf {
            for (t, f) in &series.points {
                let _ = writeln!(out, "{},{},{},{}", series.condition.as_str(), series.error_step, t, f);
            }
        }
        out
    }
}

/// Events of a trial excluding the interruption tail.
pub fn nominal_events(events: &[ActionEvent]) -> impl Iterator<Item = &ActionEvent> {
    events
        .iter()
        .filter(|e| !matches!(e.kind, ActionEventKind::Stopped | ActionEventKind::PlacedDown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parse_examples() {
        let i = parse_instruction("Put the red bottle onto the red plate", ParseMode::Strict).unwrap();
        assert_eq!((i.object_phrase.as_str(), i.plate_phrase.as_str()), ("red bottle", "red plate"));
        let i = parse_instruction("put the SPRAY can onto the white plate.", ParseMode::Strict).unwrap();
        assert_eq!((i.object_phrase.as_str(), i.plate_phrase.as_str()), ("spray can", "white plate"));
        assert!(matches!(
            parse_instruction("pass the salt", ParseMode::Strict),
            Err(ScenarioError::UnknownInstruction(_))
        ));
        assert!(parse_instruction("   ", ParseMode::Lenient).is_err());
    }

    #[test]
    fn lenient_parsing() {
        assert!(parse_instruction("move the can to the red plate", ParseMode::Strict).is_err());
        let i = parse_instruction("move the can to the red plate", ParseMode::Lenient).unwrap();
        assert_eq!((i.object_phrase.as_str(), i.plate_phrase.as_str()), ("can", "red plate"));
        let i = parse_instruction("Put the lamp onto the chair", ParseMode::Lenient).unwrap();
        assert!(matches!(inject_error(&i), Err(ScenarioError::UnknownPhrase(_))));
    }

    fn plan_of(text: &str) -> PlannedAction {
        inject_error(&parse_instruction(text, ParseMode::Strict).unwrap()).unwrap()
    }

    #[test]
    fn inject_examples() {
        let p = plan_of("Put the purple can onto the red plate");
        assert_eq!((p.pick_id.as_str(), p.place_id.as_str(), p.error_class), ("bottle", "red_plate", ErrorClass::Step1));
        let p = plan_of("Put the spray can onto the white plate");
        assert_eq!((p.pick_id.as_str(), p.place_id.as_str(), p.error_class), ("can", "red_plate", ErrorClass::Step2));
        let p = plan_of("Put the spray can onto the red plate");
        assert_eq!((p.pick_id.as_str(), p.place_id.as_str(), p.error_class), ("can", "red_plate", ErrorClass::None));
    }

    #[test]
    fn forced_outcome_reclassifies() {
        let spec = TrialSpec {
            instruction: "Put the red bottle onto the red plate".into(),
            forced: Some(ForcedOutcome {
                pick: "bottle".into(),
                place: "white_plate".into(),
            }),
        };
        assert_eq!(spec.plan(ParseMode::Strict).unwrap().1.error_class, ErrorClass::Step2);
    }

    #[test]
    fn standard_blocks_hold_one_of_each_class() {
        let mut orders = std::collections::HashSet::new();
        for seed in 0..40 {
            let block = ScenarioScript::standard_block(Condition::MirrorEyes, seed);
            let mut classes: Vec<_> = block
                .trials
                .iter()
                .map(|t| t.plan(ParseMode::Strict).unwrap().1.error_class)
                .collect();
            orders.insert(classes.clone());
            classes.sort();
            assert_eq!(classes, [ErrorClass::None, ErrorClass::Step1, ErrorClass::Step2]);
            assert_eq!(block, ScenarioScript::standard_block(Condition::MirrorEyes, seed));
        }
        assert!(orders.len() > 1);
    }

    #[test]
    fn script_json_round_trip() {
        let script = ScenarioScript::standard_block(Condition::EyesOnly, 7);
        let json = serde_json::to_string(&script).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioScript>(&json).unwrap(), script);
        let minimal: ScenarioScript =
            serde_json::from_str(r#"{"condition":"mirror_eyes","trials":[{"instruction":"Put the red bottle onto the red plate"}]}"#)
                .unwrap();
        minimal.validate().unwrap();
    }

    fn single(text: &str, stop: Option<f64>) -> TrialMetrics {
        let script = ScenarioScript {
            name: None,
            condition: Condition::MirrorEyes,
            trials: vec![TrialSpec::new(text)],
            seed: 0,
            shuffle: false,
            scene: None,
        };
        run_block(&script, &[stop], 30.0, &Timeline::default()).unwrap().remove(0)
    }

    #[test]
    fn run_block_examples() {
        let m = single("Put the purple can onto the red plate", Some(4.66));
        assert_eq!(m.classification, Classification::ErrorInterrupted);
        assert_eq!(m.stop_time, Some(4.66));
        let m = single("Put the red bottle onto the red plate", None);
        assert_eq!(m.classification, Classification::CorrectUninterrupted);
        let m = single("Put the red bottle onto the red plate", Some(3.0));
        assert_eq!(m.classification, Classification::FalseStop);
        let m = single("Put the red bottle onto the white plate", None);
        assert_eq!(m.classification, Classification::ErrorMissed);
        let m = single("Put the red bottle onto the white plate", Some(25.0));
        assert_eq!(m.classification, Classification::ErrorMissed);
        assert_eq!(m.stop_time, None);
    }

    #[test]
    fn metrics_examples() {
        let s = summarize(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max), (4.0, 2.0, 6.0));
        assert_relative_eq!(s.sd, (8.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        let s = summarize(&[5.0]).unwrap();
        assert_eq!((s.mean, s.sd), (5.0, 0.0));
        let e = ecdf(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(e, [(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]);
        assert!(matches!(compute_metrics(&[]), Err(ScenarioError::EmptyInput)));
    }

    #[test]
    fn csv_layout() {
        let logs = vec![
            single("Put the purple can onto the red plate", Some(4.5)),
            single("Put the red bottle onto the white plate", Some(14.25)),
        ];
        let summary = compute_metrics(&logs).unwrap();
        assert_eq!(
            summary.metrics_csv(),
            "error_step,condition,n,mean_s,sd_s,min_s,max_s\n1,mirror_eyes,1,4.5,0,4.5,4.5\n2,mirror_eyes,1,14.25,0,14.25,14.25\n"
        );
        assert_eq!(
            summary.ecdf_csv(),
            "condition,error_step,t_s,F\nmirror_eyes,1,4.5,1\nmirror_eyes,2,14.25,1\n"
        );
    }

    #[test]
    fn stop_keywords() {
        let kw: Vec<String> = DEFAULT_STOP_KEYWORDS.iter().map(|s| s.to_string()).collect();
        assert!(is_stop_utterance("Stop!", &kw));
        assert!(is_stop_utterance("no, wait", &kw));
        assert!(!is_stop_utterance("unstoppable", &kw));
        assert!(!is_stop_utterance("go on", &kw));
    }
}
