//! Scenario configuration in TOML.
//!
//! ```toml
//! [architecture]
//! beta_lbo = 0.5
//! phi_deg = 0.0
//! mode = "halmba"
//!
//! [load]
//! z = "2.0+0.0j"
//! vswr = 2.0
//! step_deg = 30.0
//!
//! [plan]
//! objective = "ampm"
//! phi_grid_deg = 1.0
//!
//! [tlfit]
//! segments = 3
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Every key is optional. Unknown sections or keys are rejected, and all
//! type and range problems are reported together.

use std::f64::consts::FRAC_2_PI;
use std::fmt::Write as _;

use halmba_core::engine::{ArchitectureConfig, ArchitectureParams, BaPort, Mode};
use halmba_core::reconfig::{Objective, PhaseSearch, PlanOptions, RolePolicy, Weights};
use halmba_core::Execution;
use num_complex::Complex64;
use thiserror::Error;
use toml::{Table, Value};

use crate::fmt::{complex, parse_complex};

/// One problem with one key.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct KeyIssue {
    pub key: String,
    pub problem: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Parse(String),
    #[error("invalid configuration: {}", summarize(.0))]
    Invalid(Vec<KeyIssue>),
}

impl ConfigError {
    pub fn issues(&self) -> &[KeyIssue] {
        match self {
            ConfigError::Parse(_) => &[],
            ConfigError::Invalid(v) => v,
        }
    }
}

fn summarize(issues: &[KeyIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("{}: {}", i.key, i.problem))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureSection {
    pub z0: f64,
    /// Physical reference impedance, echoed in exported files only.
    pub z0_ohms: Option<f64>,
    pub i_max_c: f64,
    pub i_max_b: f64,
    pub beta_lbo: f64,
    pub beta_hbo: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub vdd_ca0: Option<f64>,
    pub vdd_ba1: Option<f64>,
    pub vdd_ba2: Option<f64>,
    pub dc_ratio: f64,
    pub conduction_angle_ca_deg: Option<f64>,
    pub conduction_angle_ba1_deg: Option<f64>,
    pub conduction_angle_ba2_deg: Option<f64>,
    pub phi_deg: f64,
    pub mode: Mode,
    pub beta_points: usize,
    pub pd_scale: f64,
}

impl Default for ArchitectureSection {
    fn default() -> Self {
        ArchitectureSection {
            z0: 1.0,
            z0_ohms: None,
            i_max_c: 1.0,
            i_max_b: 1.0,
            beta_lbo: 0.5,
            beta_hbo: 0.75,
            lambda: 0.4,
            gamma: 0.3,
            vdd_ca0: None,
            vdd_ba1: None,
            vdd_ba2: None,
            dc_ratio: FRAC_2_PI,
            conduction_angle_ca_deg: None,
            conduction_angle_ba1_deg: None,
            conduction_angle_ba2_deg: None,
            phi_deg: 0.0,
            mode: Mode::Halmba,
            beta_points: 201,
            pd_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadSection {
    /// Normalized load for single-load subcommands.
    pub z: Complex64,
    pub vswr: f64,
    pub step_deg: f64,
    /// Explicit reflection angles; replaces the evenly stepped circle.
    pub phases_deg: Option<Vec<f64>>,
}

impl Default for LoadSection {
    fn default() -> Self {
        LoadSection {
            z: Complex64::new(1.0, 0.0),
            vswr: 2.0,
            step_deg: 30.0,
            phases_deg: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Ampm,
    Amam,
    Eff,
    Weighted,
}

impl ObjectiveKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ampm" => ObjectiveKind::Ampm,
            "amam" => ObjectiveKind::Amam,
            "eff" => ObjectiveKind::Eff,
            "weighted" => ObjectiveKind::Weighted,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Ampm => "ampm",
            ObjectiveKind::Amam => "amam",
            ObjectiveKind::Eff => "eff",
            ObjectiveKind::Weighted => "weighted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSection {
    pub objective: ObjectiveKind,
    pub phi_grid_deg: f64,
    /// `None` disables the floor.
    pub efficiency_floor: Option<f64>,
    pub obo_db: f64,
    pub role_policy: RolePolicy,
    pub swap_scale: bool,
    pub weight_ampm: f64,
    pub weight_amam: f64,
    pub weight_eff: f64,
}

impl Default for PlanSection {
    fn default() -> Self {
        PlanSection {
            objective: ObjectiveKind::Ampm,
            phi_grid_deg: 1.0,
            efficiency_floor: Some(0.05),
            obo_db: 10.0,
            role_policy: RolePolicy::Auto,
            swap_scale: true,
            weight_ampm: 1.0,
            weight_amam: 1.0,
            weight_eff: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TlfitSection {
    pub segments: usize,
    /// Reference frequency; `None` uses the midpoint of the data range.
    pub ref_freq: Option<f64>,
    /// CSV with `freq,phi_deg` rows.
    pub input: Option<String>,
    pub points: Option<Vec<(f64, f64)>>,
}

impl Default for TlfitSection {
    fn default() -> Self {
        TlfitSection {
            segments: 3,
            ref_freq: None,
            input: None,
            points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioConfig {
    pub architecture: ArchitectureSection,
    pub load: LoadSection,
    pub plan: PlanSection,
    pub tlfit: TlfitSection,
    pub output: OutputSection,
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "architecture",
        &[
            "z0",
            "z0_ohms",
            "i_max_c",
            "i_max_b",
            "beta_lbo",
            "beta_hbo",
            "lambda",
            "gamma",
            "vdd_ca0",
            "vdd_ba1",
            "vdd_ba2",
            "dc_ratio",
            "conduction_angle_ca_deg",
            "conduction_angle_ba1_deg",
            "conduction_angle_ba2_deg",
            "phi_deg",
            "mode",
            "beta_points",
            "pd_scale",
        ],
    ),
    ("load", &["z", "vswr", "step_deg", "phases_deg"]),
    (
        "plan",
        &[
            "objective",
            "phi_grid_deg",
            "efficiency_floor",
            "obo_db",
            "role_policy",
            "swap_scale",
            "weight_ampm",
            "weight_amam",
            "weight_eff",
        ],
    ),
    ("tlfit", &["segments", "ref_freq", "input", "points"]),
    ("output", &["dir"]),
];

struct Reader<'a> {
    issues: &'a mut Vec<KeyIssue>,
    section: &'static str,
    table: Option<&'a Table>,
}

impl Reader<'_> {
    fn issue(&mut self, key: &str, problem: impl Into<String>) {
        self.issues.push(KeyIssue {
            key: format!("{}.{}", self.section, key),
            problem: problem.into(),
        });
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                let t = other.type_str();
                self.issue(key, format!("expected a number, found {t}"));
                None
            }
        }
    }

    fn float_into(&mut self, key: &str, slot: &mut f64) {
        if let Some(x) = self.float(key) {
            *slot = x;
        }
    }

    fn int(&mut self, key: &str) -> Option<usize> {
        match self.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            Value::Integer(i) => {
                let i = *i;
                self.issue(key, format!("expected a nonnegative integer, found {i}"));
                None
            }
            other => {
                let t = other.type_str();
                self.issue(key, format!("expected an integer, found {t}"));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                let t = other.type_str();
                self.issue(key, format!("expected a string, found {t}"));
                None
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match self.get(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                let t = other.type_str();
                self.issue(key, format!("expected a boolean, found {t}"));
                None
            }
        }
    }

    fn float_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let Value::Array(items) = self.get(key)? else {
            self.issue(key, "expected an array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for v in items {
            match v {
                Value::Float(x) => out.push(*x),
                Value::Integer(i) => out.push(*i as f64),
                _ => {
                    self.issue(key, "expected an array of numbers");
                    return None;
                }
            }
        }
        Some(out)
    }

    fn pair_list(&mut self, key: &str) -> Option<Vec<(f64, f64)>> {
        let Value::Array(items) = self.get(key)? else {
            self.issue(key, "expected an array of [freq, phi_deg] pairs");
            return None;
        };
        let num = |v: &Value| match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        };
        let mut out = Vec::with_capacity(items.len());
        for v in items {
            match v.as_array().map(|a| a.as_slice()) {
                Some([f, p]) if num(f).is_some() && num(p).is_some() => {
                    out.push((num(f).unwrap_or(0.0), num(p).unwrap_or(0.0)))
                }
                _ => {
                    self.issue(key, "expected an array of [freq, phi_deg] pairs");
                    return None;
                }
            }
        }
        Some(out)
    }
}

/// Parses and validates a TOML scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string().trim().to_string()))?;
    let mut issues = unknown_keys(&root);

    let mut cfg = ScenarioConfig::default();
    let section = |name: &str| root.get(name).and_then(Value::as_table);

    {
        let a = &mut cfg.architecture;
        let mut r = Reader {
            issues: &mut issues,
            section: "architecture",
            table: section("architecture"),
        };
        r.float_into("z0", &mut a.z0);
        a.z0_ohms = r.float("z0_ohms");
        r.float_into("i_max_c", &mut a.i_max_c);
        r.float_into("i_max_b", &mut a.i_max_b);
        r.float_into("beta_lbo", &mut a.beta_lbo);
        r.float_into("beta_hbo", &mut a.beta_hbo);
        r.float_into("lambda", &mut a.lambda);
        r.float_into("gamma", &mut a.gamma);
        a.vdd_ca0 = r.float("vdd_ca0");
        a.vdd_ba1 = r.float("vdd_ba1");
        a.vdd_ba2 = r.float("vdd_ba2");
        r.float_into("dc_ratio", &mut a.dc_ratio);
        a.conduction_angle_ca_deg = r.float("conduction_angle_ca_deg");
        a.conduction_angle_ba1_deg = r.float("conduction_angle_ba1_deg");
        a.conduction_angle_ba2_deg = r.float("conduction_angle_ba2_deg");
        r.float_into("phi_deg", &mut a.phi_deg);
        if let Some(m) = r.string("mode") {
            match parse_mode(&m) {
                Some(m) => a.mode = m,
                None => r.issue("mode", format!("{m:?} is not one of halmba, pdlmba")),
            }
        }
        if let Some(n) = r.int("beta_points") {
            a.beta_points = n;
        }
        r.float_into("pd_scale", &mut a.pd_scale);
    }
    {
        let l = &mut cfg.load;
        let mut r = Reader {
            issues: &mut issues,
            section: "load",
            table: section("load"),
        };
        if let Some(s) = r.string("z") {
            match parse_complex(&s) {
                Ok(z) => l.z = z,
                Err(e) => r.issue("z", e.to_string()),
            }
        }
        r.float_into("vswr", &mut l.vswr);
        r.float_into("step_deg", &mut l.step_deg);
        l.phases_deg = r.float_list("phases_deg");
    }
    {
        let p = &mut cfg.plan;
        let mut r = Reader {
            issues: &mut issues,
            section: "plan",
            table: section("plan"),
        };
        if let Some(o) = r.string("objective") {
            match ObjectiveKind::parse(&o) {
                Some(o) => p.objective = o,
                None => r.issue(
                    "objective",
                    format!("{o:?} is not one of ampm, amam, eff, weighted"),
                ),
            }
        }
        r.float_into("phi_grid_deg", &mut p.phi_grid_deg);
        match r.get("efficiency_floor") {
            Some(Value::Boolean(false)) => p.efficiency_floor = None,
            Some(_) => p.efficiency_floor = r.float("efficiency_floor"),
            None => {}
        }
        r.float_into("obo_db", &mut p.obo_db);
        if let Some(s) = r.string("role_policy") {
            match parse_role_policy(&s) {
                Some(rp) => p.role_policy = rp,
                None => r.issue("role_policy", format!("{s:?} is not one of auto, ba1, ba2")),
            }
        }
        if let Some(b) = r.boolean("swap_scale") {
            p.swap_scale = b;
        }
        r.float_into("weight_ampm", &mut p.weight_ampm);
        r.float_into("weight_amam", &mut p.weight_amam);
        r.float_into("weight_eff", &mut p.weight_eff);
    }
    {
        let t = &mut cfg.tlfit;
        let mut r = Reader {
            issues: &mut issues,
            section: "tlfit",
            table: section("tlfit"),
        };
        if let Some(k) = r.int("segments") {
            t.segments = k;
        }
        t.ref_freq = r.float("ref_freq");
        t.input = r.string("input");
        t.points = r.pair_list("points");
    }
    {
        let mut r = Reader {
            issues: &mut issues,
            section: "output",
            table: section("output"),
        };
        if let Some(d) = r.string("dir") {
            cfg.output.dir = d;
        }
    }

    issues.extend(validate(&cfg));
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(issues))
    }
}

fn unknown_keys(root: &Table) -> Vec<KeyIssue> {
    let mut issues = Vec::new();
    for (name, value) in root {
        let Some((_, known)) = SECTIONS.iter().find(|(s, _)| s == name) else {
            issues.push(KeyIssue {
                key: name.clone(),
                problem: "unknown section".into(),
            });
            continue;
        };
        let Some(table) = value.as_table() else {
            issues.push(KeyIssue {
                key: name.clone(),
                problem: "expected a table".into(),
            });
            continue;
        };
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                issues.push(KeyIssue {
                    key: format!("{name}.{key}"),
                    problem: "unknown key".into(),
                });
            }
        }
    }
    issues
}

pub fn parse_mode(s: &str) -> Option<Mode> {
    match s {
        "halmba" => Some(Mode::Halmba),
        "pdlmba" => Some(Mode::Pdlmba),
        _ => None,
    }
}

pub fn mode_str(m: Mode) -> &'static str {
    match m {
        Mode::Halmba => "halmba",
        Mode::Pdlmba => "pdlmba",
    }
}

fn parse_role_policy(s: &str) -> Option<RolePolicy> {
    match s {
        "auto" => Some(RolePolicy::Auto),
        "ba1" => Some(RolePolicy::Fixed(BaPort::Ba1)),
        "ba2" => Some(RolePolicy::Fixed(BaPort::Ba2)),
        _ => None,
    }
}

fn role_policy_str(p: RolePolicy) -> &'static str {
    match p {
        RolePolicy::Auto => "auto",
        RolePolicy::Fixed(BaPort::Ba1) => "ba1",
        RolePolicy::Fixed(BaPort::Ba2) => "ba2",
    }
}

/// Range checks across every section. Each issue names the key at fault.
pub fn validate(cfg: &ScenarioConfig) -> Vec<KeyIssue> {
    let mut issues = Vec::new();
    let mut bad = |key: &str, problem: String| {
        issues.push(KeyIssue {
            key: key.into(),
            problem,
        })
    };
    let positive = |x: f64| x > 0.0 && x.is_finite();

    let a = &cfg.architecture;
    for (key, x) in [
        ("architecture.z0", a.z0),
        ("architecture.i_max_c", a.i_max_c),
        ("architecture.i_max_b", a.i_max_b),
        ("architecture.pd_scale", a.pd_scale),
    ] {
        if !positive(x) {
            bad(key, format!("{x} must be positive"));
        }
    }
    for (key, x) in [
        ("architecture.z0_ohms", a.z0_ohms),
        ("architecture.vdd_ca0", a.vdd_ca0),
        ("architecture.vdd_ba1", a.vdd_ba1),
        ("architecture.vdd_ba2", a.vdd_ba2),
    ] {
        if let Some(x) = x.filter(|&x| !positive(x)) {
            bad(key, format!("{x} must be positive"));
        }
    }
    if !(a.beta_lbo > 0.0 && a.beta_lbo < 1.0) {
        bad("architecture.beta_lbo", format!("{} must lie in (0, 1)", a.beta_lbo));
    }
    if !(a.beta_hbo > 0.0 && a.beta_hbo < 1.0) {
        bad("architecture.beta_hbo", format!("{} must lie in (0, 1)", a.beta_hbo));
    }
    if !(a.beta_lbo < a.beta_hbo) {
        let msg = format!(
            "beta_lbo ({}) must be below beta_hbo ({})",
            a.beta_lbo, a.beta_hbo
        );
        bad("architecture.beta_lbo", msg.clone());
        bad("architecture.beta_hbo", msg);
    }
    for (key, x) in [("architecture.lambda", a.lambda), ("architecture.gamma", a.gamma)] {
        if !(x > 0.0 && x <= 0.5) {
            bad(key, format!("{x} must lie in (0, 0.5]"));
        }
    }
    if !(a.dc_ratio > 0.0 && a.dc_ratio <= 1.0) {
        bad("architecture.dc_ratio", format!("{} must lie in (0, 1]", a.dc_ratio));
    }
    for (key, x) in [
        ("architecture.conduction_angle_ca_deg", a.conduction_angle_ca_deg),
        ("architecture.conduction_angle_ba1_deg", a.conduction_angle_ba1_deg),
        ("architecture.conduction_angle_ba2_deg", a.conduction_angle_ba2_deg),
    ] {
        if let Some(x) = x.filter(|&x| !(x > 0.0 && x <= 180.0)) {
            bad(key, format!("{x} must lie in (0, 180]"));
        }
    }
    if !a.phi_deg.is_finite() {
        bad("architecture.phi_deg", "must be finite".into());
    }
    if a.beta_points < 2 {
        bad("architecture.beta_points", format!("{} must be at least 2", a.beta_points));
    }

    let l = &cfg.load;
    if !(l.z.re > 0.0 && l.z.re.is_finite() && l.z.im.is_finite()) {
        bad("load.z", format!("{} needs a positive real part", complex(l.z)));
    }
    if !(l.vswr >= 1.0 && l.vswr.is_finite()) {
        bad("load.vswr", format!("{} must be at least 1", l.vswr));
    }
    let n = 360.0 / l.step_deg;
    if !(l.step_deg > 0.0 && l.step_deg.is_finite()) || (n - n.round()).abs() > 1e-9 {
        bad("load.step_deg", format!("{} must be positive and divide 360", l.step_deg));
    }
    if let Some(ph) = &l.phases_deg {
        if ph.is_empty() || ph.iter().any(|x| !x.is_finite()) {
            bad("load.phases_deg", "must be a nonempty list of finite angles".into());
        }
    }

    let p = &cfg.plan;
    if !positive(p.phi_grid_deg) {
        bad("plan.phi_grid_deg", format!("{} must be positive", p.phi_grid_deg));
    }
    if let Some(f) = p.efficiency_floor.filter(|&f| !(f >= 0.0 && f.is_finite())) {
        bad("plan.efficiency_floor", format!("{f} must be nonnegative, or false"));
    }
    if !(p.obo_db >= 0.0 && p.obo_db.is_finite()) {
        bad("plan.obo_db", format!("{} must be nonnegative", p.obo_db));
    }
    for (key, x) in [
        ("plan.weight_ampm", p.weight_ampm),
        ("plan.weight_amam", p.weight_amam),
        ("plan.weight_eff", p.weight_eff),
    ] {
        if !(x >= 0.0 && x.is_finite()) {
            bad(key, format!("{x} must be nonnegative"));
        }
    }

    let t = &cfg.tlfit;
    if t.segments < 1 {
        bad("tlfit.segments", "must be at least 1".into());
    }
    if let Some(f) = t.ref_freq.filter(|&f| !positive(f)) {
        bad("tlfit.ref_freq", format!("{f} must be positive"));
    }
    if t.input.is_some() && t.points.is_some() {
        bad("tlfit.input", "give either input or points, not both".into());
        bad("tlfit.points", "give either input or points, not both".into());
    }
    if cfg.output.dir.is_empty() {
        bad("output.dir", "must not be empty".into());
    }
    issues
}

impl ScenarioConfig {
    pub fn architecture_params(&self) -> ArchitectureParams {
        let a = &self.architecture;
        ArchitectureParams {
            z0: a.z0,
            i_max_c: a.i_max_c,
            i_max_b: a.i_max_b,
            beta_lbo: a.beta_lbo,
            beta_hbo: a.beta_hbo,
            lambda: a.lambda,
            gamma: a.gamma,
            vdd_ca0: a.vdd_ca0,
            vdd_ba1: a.vdd_ba1,
            vdd_ba2: a.vdd_ba2,
            dc_ratio: a.dc_ratio,
            conduction_angles: [
                a.conduction_angle_ca_deg,
                a.conduction_angle_ba1_deg,
                a.conduction_angle_ba2_deg,
            ]
            .map(|d| d.map(f64::to_radians)),
            phi: a.phi_deg.to_radians(),
            mode: a.mode,
            beta_points: a.beta_points,
            pd_scale: a.pd_scale,
        }
    }

    pub fn build_architecture(&self) -> Result<ArchitectureConfig, ConfigError> {
        self.architecture_params().build().map_err(|e| {
            ConfigError::Invalid(vec![KeyIssue {
                key: "architecture".into(),
                problem: e.to_string(),
            }])
        })
    }

    pub fn objective(&self) -> Objective {
        let p = &self.plan;
        match p.objective {
            ObjectiveKind::Ampm => Objective::AmpmSpan,
            ObjectiveKind::Amam => Objective::AmamSpan,
            ObjectiveKind::Eff => Objective::EfficiencyAtObo,
            ObjectiveKind::Weighted => Objective::Weighted(Weights {
                ampm_deg: p.weight_ampm,
                amam_db: p.weight_amam,
                efficiency: p.weight_eff,
            }),
        }
    }

    pub fn plan_options(&self, execution: Execution) -> PlanOptions {
        PlanOptions {
            search: PhaseSearch {
                objective: self.objective(),
                grid_deg: self.plan.phi_grid_deg,
                efficiency_floor: self.plan.efficiency_floor,
                obo_db: self.plan.obo_db,
                execution,
            },
            role_policy: self.plan.role_policy,
            swap_scale: self.plan.swap_scale,
        }
    }

    /// TOML text that [`parse_config`] maps back to `self`.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let f = |x: f64| Value::Float(x).to_string();
        let a = &self.architecture;
        s.push_str("[architecture]\n");
        let kv = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv(&mut s, "z0", f(a.z0));
        if let Some(x) = a.z0_ohms {
            kv(&mut s, "z0_ohms", f(x));
        }
        kv(&mut s, "i_max_c", f(a.i_max_c));
        kv(&mut s, "i_max_b", f(a.i_max_b));
        kv(&mut s, "beta_lbo", f(a.beta_lbo));
        kv(&mut s, "beta_hbo", f(a.beta_hbo));
        kv(&mut s, "lambda", f(a.lambda));
        kv(&mut s, "gamma", f(a.gamma));
        for (k, x) in [
            ("vdd_ca0", a.vdd_ca0),
            ("vdd_ba1", a.vdd_ba1),
            ("vdd_ba2", a.vdd_ba2),
        ] {
            if let Some(x) = x {
                kv(&mut s, k, f(x));
            }
        }
        kv(&mut s, "dc_ratio", f(a.dc_ratio));
        for (k, x) in [
            ("conduction_angle_ca_deg", a.conduction_angle_ca_deg),
            ("conduction_angle_ba1_deg", a.conduction_angle_ba1_deg),
            ("conduction_angle_ba2_deg", a.conduction_angle_ba2_deg),
        ] {
            if let Some(x) = x {
                kv(&mut s, k, f(x));
            }
        }
        kv(&mut s, "phi_deg", f(a.phi_deg));
        kv(&mut s, "mode", Value::from(mode_str(a.mode)).to_string());
        kv(&mut s, "beta_points", a.beta_points.to_string());
        kv(&mut s, "pd_scale", f(a.pd_scale));

        let l = &self.load;
        s.push_str("\n[load]\n");
        kv(&mut s, "z", Value::from(complex(l.z)).to_string());
        kv(&mut s, "vswr", f(l.vswr));
        kv(&mut s, "step_deg", f(l.step_deg));
        if let Some(ph) = &l.phases_deg {
            let items: Vec<String> = ph.iter().map(|&x| f(x)).collect();
            kv(&mut s, "phases_deg", format!("[{}]", items.join(", ")));
        }

        let p = &self.plan;
        s.push_str("\n[plan]\n");
        kv(&mut s, "objective", Value::from(p.objective.as_str()).to_string());
        kv(&mut s, "phi_grid_deg", f(p.phi_grid_deg));
        kv(
            &mut s,
            "efficiency_floor",
            p.efficiency_floor.map(f).unwrap_or_else(|| "false".into()),
        );
        kv(&mut s, "obo_db", f(p.obo_db));
        kv(
            &mut s,
            "role_policy",
            Value::from(role_policy_str(p.role_policy)).to_string(),
        );
        kv(&mut s, "swap_scale", p.swap_scale.to_string());
        kv(&mut s, "weight_ampm", f(p.weight_ampm));
        kv(&mut s, "weight_amam", f(p.weight_amam));
        kv(&mut s, "weight_eff", f(p.weight_eff));

        let t = &self.tlfit;
        s.push_str("\n[tlfit]\n");
        kv(&mut s, "segments", t.segments.to_string());
        if let Some(x) = t.ref_freq {
            kv(&mut s, "ref_freq", f(x));
        }
        if let Some(path) = &t.input {
            kv(&mut s, "input", Value::from(path.as_str()).to_string());
        }
        if let Some(pts) = &t.points {
            let items: Vec<String> = pts
                .iter()
                .map(|&(a, b)| format!("[{}, {}]", f(a), f(b)))
                .collect();
            kv(&mut s, "points", format!("[{}]", items.join(", ")));
        }

        s.push_str("\n[output]\n");
        kv(
            &mut s,
            "dir",
            Value::from(self.output.dir.as_str()).to_string(),
        );
        s
    }
}
