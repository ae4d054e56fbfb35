//! Load-mismatch countermeasures: BA role selection, carrier supply
//! rescaling and phase-offset search, plus the closed-form impedances that
//! describe the amplifier under a mismatched load.

use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::device::Region;
use crate::engine::{
    amam_ampm, clipping_count, efficiency_at_obo, first_peak_obo, sweep, ArchitectureConfig,
    BaPort, EngineError, SweepResult,
};
use crate::network::{Phasor, OFF_CURRENT_TOLERANCE};
use crate::par::{map_ordered, Execution};

/// Loads with `|z|` this close to 1 keep BA1 as primary.
pub const ROLE_TIE_BAND: f64 = 1e-9;
/// Objective values closer than this (relative) are treated as equal.
pub const OBJECTIVE_TIE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconfigError {
    #[error("invalid load: {0}")]
    InvalidLoad(String),
    #[error("vswr {0} must be finite and at least 1")]
    InvalidVswr(f64),
    #[error("step {0} deg must be positive and divide 360")]
    InvalidStep(f64),
    #[error("phase grid {0} deg must be positive and finite")]
    InvalidGrid(f64),
    #[error("load resistance {0} must be positive")]
    NonPositiveResistance(f64),
    #[error("impedance magnitude is zero")]
    ZeroImpedance,
    #[error("nominal supply {0} must be positive")]
    InvalidSupply(f64),
    #[error("every phase offset failed; first failure: {0}")]
    AllPhasesFailed(String),
    #[error("closed form needs {0}")]
    MissingSource(&'static str),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A load normalized to the coupler reference impedance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadCondition {
    z: Phasor,
    gamma: Phasor,
}

impl LoadCondition {
    pub const MATCHED: LoadCondition = LoadCondition {
        z: Phasor::new(1.0, 0.0),
        gamma: Phasor::new(0.0, 0.0),
    };

    pub fn from_z(z: Phasor) -> Result<Self, ReconfigError> {
        if !(z.re.is_finite() && z.im.is_finite()) || z.re <= 0.0 {
            return Err(ReconfigError::InvalidLoad(format!(
                "z = {}{:+}j needs a positive finite real part",
                z.re, z.im
            )));
        }
        Ok(LoadCondition {
            z,
            gamma: (z - 1.0) / (z + 1.0),
        })
    }

    pub fn from_gamma(gamma: Phasor) -> Result<Self, ReconfigError> {
        if !(gamma.norm() < 1.0) {
            return Err(ReconfigError::InvalidLoad(format!(
                "|gamma| = {} must be below 1",
                gamma.norm()
            )));
        }
        Ok(LoadCondition {
            z: (1.0 + gamma) / (1.0 - gamma),
            gamma,
        })
    }

    /// Normalized impedance.
    pub fn z(&self) -> Phasor {
        self.z
    }

    pub fn gamma(&self) -> Phasor {
        self.gamma
    }

    pub fn vswr(&self) -> f64 {
        let r = self.gamma.norm();
        (1.0 + r) / (1.0 - r)
    }

    /// Reflection angle in degrees within `[0, 360)`.
    pub fn gamma_phase_deg(&self) -> f64 {
        if self.gamma.norm() == 0.0 {
            return 0.0;
        }
        let d = self.gamma.arg().to_degrees();
        if d < -1e-9 {
            d + 360.0
        } else {
            d.max(0.0)
        }
    }

    /// Impedance in the units of a coupler with reference `z0`.
    pub fn absolute(&self, z0: f64) -> Phasor {
        self.z * z0
    }
}

/// Loads evenly spaced around a constant-VSWR circle, starting at zero
/// reflection angle.
pub fn vswr_circle(vswr: f64, step_deg: f64) -> Result<Vec<LoadCondition>, ReconfigError> {
    if !(vswr.is_finite() && vswr >= 1.0) {
        return Err(ReconfigError::InvalidVswr(vswr));
    }
    if !(step_deg.is_finite() && step_deg > 0.0) {
        return Err(ReconfigError::InvalidStep(step_deg));
    }
    let n = 360.0 / step_deg;
    if (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
        return Err(ReconfigError::InvalidStep(step_deg));
    }
    if vswr == 1.0 {
        return Ok(vec![LoadCondition::MATCHED]);
    }
    let r = (vswr - 1.0) / (vswr + 1.0);
    (0..n.round() as usize)
        .map(|k| {
            let theta = (k as f64 * step_deg).to_radians();
            LoadCondition::from_gamma(Phasor::from_polar(r, theta))
        })
        .collect()
}

/// BA1 for low-magnitude loads, BA2 for high-magnitude ones.
pub fn select_primary_ba(load: &LoadCondition) -> BaPort {
    if load.z.norm() <= 1.0 + ROLE_TIE_BAND {
        BaPort::Ba1
    } else {
        BaPort::Ba2
    }
}

/// Carrier supply that keeps its saturation power under the mismatched load.
pub fn scale_vdd(load: &LoadCondition, v0: f64) -> Result<f64, ReconfigError> {
    if !(load.z.re > 0.0) {
        return Err(ReconfigError::NonPositiveResistance(load.z.re));
    }
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(ReconfigError::InvalidSupply(v0));
    }
    Ok(v0 * (1.0 / load.z.re).sqrt())
}

/// Power the carrier delivers at voltage saturation into `z_ca`
/// (normalized).
pub fn ca_saturation_power(z_ca: Phasor, v_dd: f64, z0: f64) -> Result<f64, ReconfigError> {
    let mag2 = z_ca.norm_sqr();
    if !(mag2 > 0.0) {
        return Err(ReconfigError::ZeroImpedance);
    }
    Ok(v_dd * v_dd / (2.0 * z0) * z_ca.re / mag2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub ampm_deg: f64,
    pub amam_db: f64,
    /// Applied to efficiency in percent.
    pub efficiency: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            ampm_deg: 1.0,
            amam_db: 1.0,
            efficiency: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    AmpmSpan,
    AmamSpan,
    EfficiencyAtObo,
    /// Minimizes `ampm_deg·span + amam_db·span − efficiency·eff%`.
    Weighted(Weights),
}

impl Objective {
    pub fn as_str(&self) -> &'static str {
        match self {
            Objective::AmpmSpan => "ampm",
            Objective::AmamSpan => "amam",
            Objective::EfficiencyAtObo => "eff",
            Objective::Weighted(_) => "weighted",
        }
    }

    fn maximizes(&self) -> bool {
        matches!(self, Objective::EfficiencyAtObo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSearch {
    pub objective: Objective,
    pub grid_deg: f64,
    /// Reject phases whose back-off efficiency falls more than this
    /// (absolute fraction) below the best on the grid. Ignored for the
    /// efficiency objective.
    pub efficiency_floor: Option<f64>,
    pub obo_db: f64,
    pub execution: Execution,
}

impl Default for PhaseSearch {
    fn default() -> Self {
        PhaseSearch {
            objective: Objective::AmpmSpan,
            grid_deg: 1.0,
            efficiency_floor: Some(0.05),
            obo_db: 10.0,
            execution: Execution::default(),
        }
    }
}

/// Figures of merit at one phase offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMetrics {
    pub ampm_span_deg: f64,
    pub amam_span_db: f64,
    pub efficiency_at_obo: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSample {
    pub phi_deg: f64,
    /// `Err` holds the failure message for a phase excluded from the search.
    pub metrics: Result<PhaseMetrics, String>,
    /// Objective value, when it is defined at this phase.
    pub value: Option<f64>,
    /// Whether the phase passed the efficiency floor.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOptimum {
    pub phi_deg: f64,
    pub value: f64,
    pub scan: Vec<PhaseSample>,
}

/// Phase offsets `k·grid_deg` inside `[-180, 180)`.
pub fn phase_grid(grid_deg: f64) -> Result<Vec<f64>, ReconfigError> {
    if !(grid_deg.is_finite() && grid_deg > 0.0) {
        return Err(ReconfigError::InvalidGrid(grid_deg));
    }
    let k_lo = (-180.0 / grid_deg - 1e-9).ceil() as i64;
    let k_hi = (180.0 / grid_deg - 1e-9).ceil() as i64;
    Ok((k_lo..k_hi).map(|k| k as f64 * grid_deg).collect())
}

fn phase_metrics(
    cfg: &ArchitectureConfig,
    load: Phasor,
    phi_deg: f64,
    obo_db: f64,
) -> Result<PhaseMetrics, EngineError> {
    let result = sweep(&cfg.with_phi(phi_deg.to_radians()), load)?;
    let lin = amam_ampm(&result)?;
    Ok(PhaseMetrics {
        ampm_span_deg: lin.ampm_span_deg,
        amam_span_db: lin.amam_span_db,
        efficiency_at_obo: efficiency_at_obo(&result, obo_db),
    })
}

fn objective_value(objective: &Objective, m: &PhaseMetrics) -> Option<f64> {
    match objective {
        Objective::AmpmSpan => Some(m.ampm_span_deg),
        Objective::AmamSpan => Some(m.amam_span_db),
        Objective::EfficiencyAtObo => m.efficiency_at_obo,
        Objective::Weighted(w) => m.efficiency_at_obo.map(|e| {
            w.ampm_deg * m.ampm_span_deg + w.amam_db * m.amam_span_db - w.efficiency * 100.0 * e
        }),
    }
}

/// Exhaustive grid search for the phase offset, with ties broken toward
/// the smallest `|phi|` and then toward positive phases.
pub fn optimize_phase(
    cfg: &ArchitectureConfig,
    load: &LoadCondition,
    search: &PhaseSearch,
) -> Result<PhaseOptimum, ReconfigError> {
    let grid = phase_grid(search.grid_deg)?;
    let z_abs = load.absolute(cfg.net.z0());
    let metrics = map_ordered(search.execution, &grid, |&phi| {
        phase_metrics(cfg, z_abs, phi, search.obo_db).map_err(|e| e.to_string())
    });

    let mut scan: Vec<PhaseSample> = grid
        .iter()
        .zip(metrics)
        .map(|(&phi_deg, metrics)| {
            let value = metrics
                .as_ref()
                .ok()
                .and_then(|m| objective_value(&search.objective, m));
            PhaseSample {
                phi_deg,
                metrics,
                value,
                feasible: value.is_some(),
            }
        })
        .collect();

    if let (Some(floor), false) = (search.efficiency_floor, search.objective.maximizes()) {
        let best_eff = scan
            .iter()
            .filter(|s| s.feasible)
            .filter_map(|s| s.metrics.as_ref().ok()?.efficiency_at_obo)
            .fold(f64::NEG_INFINITY, f64::max);
        for s in scan.iter_mut().filter(|s| s.feasible) {
            let eff = s.metrics.as_ref().ok().and_then(|m| m.efficiency_at_obo);
            s.feasible = eff.is_some_and(|e| e >= best_eff - floor);
        }
    }

    let cost = |v: f64| if search.objective.maximizes() { -v } else { v };
    let best_cost = scan
        .iter()
        .filter(|s| s.feasible)
        .filter_map(|s| s.value.map(cost))
        .fold(f64::INFINITY, f64::min);
    if !best_cost.is_finite() {
        let why = scan
            .iter()
            .find_map(|s| s.metrics.as_ref().err().cloned())
            .unwrap_or_else(|| "objective undefined at every phase".into());
        return Err(ReconfigError::AllPhasesFailed(why));
    }
    let tie = OBJECTIVE_TIE * best_cost.abs().max(1.0);
    let winner = scan
        .iter()
        .filter(|s| s.feasible && s.value.is_some_and(|v| cost(v) <= best_cost + tie))
        .min_by(|a, b| {
            a.phi_deg
                .abs()
                .total_cmp(&b.phi_deg.abs())
                .then((a.phi_deg < 0.0).cmp(&(b.phi_deg < 0.0)))
        })
        .expect("a finite best cost has at least one sample");
    Ok(PhaseOptimum {
        phi_deg: winner.phi_deg,
        value: winner.value.unwrap_or(best_cost),
        scan,
    })
}

/// How the primary BA is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RolePolicy {
    /// Select by load magnitude.
    #[default]
    Auto,
    /// Always use the given port.
    Fixed(BaPort),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub search: PhaseSearch,
    pub role_policy: RolePolicy,
    /// Move the fundamental scale factors along with the bias on role
    /// exchange.
    pub swap_scale: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            search: PhaseSearch::default(),
            role_policy: RolePolicy::Auto,
            swap_scale: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconfigPlan {
    pub primary_ba: BaPort,
    pub v_dd_ca: f64,
    /// Phase offset in radians.
    pub phi: f64,
}

impl ReconfigPlan {
    /// Keeps the nominal settings of `cfg` regardless of the load.
    pub fn unplanned(cfg: &ArchitectureConfig) -> Self {
        ReconfigPlan {
            primary_ba: cfg.primary,
            v_dd_ca: cfg.ca.v_dd,
            phi: cfg.phi,
        }
    }

    pub fn apply(&self, cfg: &ArchitectureConfig, swap_scale: bool) -> ArchitectureConfig {
        cfg.with_primary(self.primary_ba, swap_scale)
            .with_ca_supply(self.v_dd_ca)
            .with_phi(self.phi)
    }
}

/// Role selection, supply rescaling and phase search for one load. `cfg`
/// holds the nominal matched-load settings.
pub fn plan(
    load: &LoadCondition,
    cfg: &ArchitectureConfig,
    opts: &PlanOptions,
) -> Result<ReconfigPlan, ReconfigError> {
    let primary_ba = match opts.role_policy {
        RolePolicy::Auto => select_primary_ba(load),
        RolePolicy::Fixed(p) => p,
    };
    plan_with_role(load, cfg, opts, primary_ba)
}

pub fn plan_with_role(
    load: &LoadCondition,
    cfg: &ArchitectureConfig,
    opts: &PlanOptions,
    primary_ba: BaPort,
) -> Result<ReconfigPlan, ReconfigError> {
    let v_dd_ca = scale_vdd(load, cfg.ca.v_dd)?;
    let staged = ReconfigPlan {
        primary_ba,
        v_dd_ca,
        phi: cfg.phi,
    }
    .apply(cfg, opts.swap_scale);
    let best = optimize_phase(&staged, load, &opts.search)?;
    Ok(ReconfigPlan {
        primary_ba,
        v_dd_ca,
        phi: best.phi_deg.to_radians(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanMetrics {
    /// `None` when the efficiency curve has no back-off peak.
    pub first_peak_obo_db: Option<f64>,
    pub efficiency_at_10db_obo: Option<f64>,
    /// Efficiency at full drive.
    pub peak_efficiency: f64,
    pub amam_span_db: f64,
    pub ampm_span_deg: f64,
    pub clipping_count: usize,
}

pub fn run_plan(
    plan: &ReconfigPlan,
    load: &LoadCondition,
    cfg: &ArchitectureConfig,
    swap_scale: bool,
) -> Result<SweepResult, ReconfigError> {
    let planned = plan.apply(cfg, swap_scale);
    Ok(sweep(&planned, load.absolute(cfg.net.z0()))?)
}

pub fn sweep_metrics(result: &SweepResult) -> Result<PlanMetrics, ReconfigError> {
    let lin = amam_ampm(result)?;
    Ok(PlanMetrics {
        first_peak_obo_db: first_peak_obo(result).ok(),
        efficiency_at_10db_obo: efficiency_at_obo(result, 10.0),
        peak_efficiency: result.last().efficiency,
        amam_span_db: lin.amam_span_db,
        ampm_span_deg: lin.ampm_span_deg,
        clipping_count: clipping_count(result),
    })
}

pub fn evaluate_plan(
    plan: &ReconfigPlan,
    load: &LoadCondition,
    cfg: &ArchitectureConfig,
    swap_scale: bool,
) -> Result<PlanMetrics, ReconfigError> {
    sweep_metrics(&run_plan(plan, load, cfg, swap_scale)?)
}

/// Outcome of planning and evaluating one load.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub load: LoadCondition,
    pub plan: ReconfigPlan,
    pub metrics: PlanMetrics,
    pub sweep: SweepResult,
}

fn plan_entry(
    load: &LoadCondition,
    cfg: &ArchitectureConfig,
    opts: &PlanOptions,
    planned: bool,
) -> Result<PlanEntry, ReconfigError> {
    let p = if planned {
        plan(load, cfg, opts)?
    } else {
        ReconfigPlan::unplanned(cfg)
    };
    let sweep = run_plan(&p, load, cfg, opts.swap_scale)?;
    Ok(PlanEntry {
        load: *load,
        plan: p,
        metrics: sweep_metrics(&sweep)?,
        sweep,
    })
}

/// Plans and evaluates every load. With `planned == false` the nominal
/// settings are kept for comparison. Results follow the input order.
pub fn plan_grid(
    loads: &[LoadCondition],
    cfg: &ArchitectureConfig,
    opts: &PlanOptions,
    planned: bool,
) -> Vec<Result<PlanEntry, ReconfigError>> {
    map_ordered(opts.search.execution, loads, |load| {
        plan_entry(load, cfg, opts, planned)
    })
}

/// Carrier description for the mismatch closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CarrierSource {
    /// Saturated carrier with port voltage `j·v`.
    Voltage(Phasor),
    /// Carrier injecting current `j·i`.
    Current(Phasor),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchSources {
    pub carrier: CarrierSource,
    pub i_b1: f64,
    pub i_b2: f64,
}

/// Device impedances under a mismatched load, `None` for devices that are off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchImpedances {
    pub z_ba1: Option<Phasor>,
    pub z_ba2: Option<Phasor>,
    pub z_ca: Option<Phasor>,
}

/// Closed-form device impedances with zero phase offset, BA1 driven with
/// `i_b1` and BA2 with `-j·i_b2`.
///
/// With a saturated carrier, BA1 sees an impedance that grows with the
/// load while BA2 sees one that falls with it. In the low-power region only
/// the carrier is on and sees the inverted load.
pub fn mismatch_closed_forms(
    load: &LoadCondition,
    sources: &MismatchSources,
    region: Region,
    z0: f64,
) -> Result<MismatchImpedances, ReconfigError> {
    let zl = load.z;
    if region == Region::LowPower {
        return Ok(MismatchImpedances {
            z_ba1: None,
            z_ba2: None,
            z_ca: Some(z0 / zl),
        });
    }
    let (ib1, ib2) = (sources.i_b1, sources.i_b2);
    let on = |i: f64| i.abs() > OFF_CURRENT_TOLERANCE;
    let (z_ca, z_ba1, i_c) = match sources.carrier {
        CarrierSource::Voltage(v) => {
            let v = v / z0;
            let i_c = zl * v + SQRT_2 * zl * ib1 - SQRT_2 * ib2;
            let den = zl * v - SQRT_2 * (ib2 - zl * ib1);
            let z_ca = (den.norm() > 0.0).then(|| z0 * v / den);
            let z_ba1 = on(ib1).then(|| z0 * (SQRT_2 * v * zl / ib1 + 2.0 * zl - ib2 / ib1));
            (z_ca, z_ba1, i_c)
        }
        CarrierSource::Current(i_c) => {
            let z_ca = on(i_c.norm())
                .then(|| z0 * ((i_c + SQRT_2 * ib2) / (zl * i_c) - SQRT_2 * ib1 / i_c));
            let z_ba1 = on(ib1).then(|| z0 * (SQRT_2 * i_c + ib2) / ib1);
            (z_ca, z_ba1, i_c)
        }
    };
    let z_ba2 = on(ib2).then(|| z0 * (SQRT_2 * i_c / (ib2 * zl) + 2.0 / zl - ib1 / ib2));
    Ok(MismatchImpedances {
        z_ba1,
        z_ba2,
        z_ca,
    })
}
