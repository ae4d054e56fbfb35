//! Drive sweeps of the three-way load-modulated balanced amplifier.
//!
//! Each drive level is turned into four port excitations, solved through the
//! coupler, and reduced to impedances, voltages, power, efficiency and
//! linearity figures. The carrier is a current source below `beta_hbo` and a
//! constant-amplitude voltage source from `beta_hbo` upward.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use thiserror::Error;

use crate::device::{
    ba_primary_fundamental, ba_secondary_fundamental, ca_fundamental, dc_current, region_of,
    DeviceError, DeviceProfile, Region, RegionBoundaries, Role,
};
use crate::network::{
    build_ideal_coupler, port_impedance, power_balance, solve, CouplerNetwork, NetworkError,
    NetworkSolution, Phasor, Port, PortExcitation, OFF_CURRENT_TOLERANCE,
};

/// Relative margin above a supply before a device is flagged as clipping.
pub const CLIP_MARGIN: f64 = 1e-6;
/// Differences below this are treated as a plateau when looking for maxima.
pub const PLATEAU_TOLERANCE: f64 = 1e-12;

const J: Phasor = Phasor::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid architecture: {0}")]
    InvalidConfig(String),
    #[error("operation requires {expected:?} mode")]
    ModeMismatch { expected: Mode },
    #[error("every sweep point failed; first failure: {0}")]
    AllPointsFailed(String),
    #[error("need at least two driven points with nonzero output")]
    InsufficientPoints,
    #[error("gain undefined: output is zero at every drive level")]
    UndefinedGain,
    #[error("no back-off efficiency peak below peak power")]
    NoBackoffPeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Three-way hybrid asymmetrical operation.
    Halmba,
    /// Two-way pseudo-Doherty comparison: both BAs turn on together.
    Pdlmba,
}

/// Physical BA port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaPort {
    Ba1,
    Ba2,
}

impl BaPort {
    pub fn other(self) -> BaPort {
        match self {
            BaPort::Ba1 => BaPort::Ba2,
            BaPort::Ba2 => BaPort::Ba1,
        }
    }

    pub fn port(self) -> Port {
        match self {
            BaPort::Ba1 => Port::Ba1,
            BaPort::Ba2 => Port::Ba2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BaPort::Ba1 => "BA1",
            BaPort::Ba2 => "BA2",
        }
    }
}

/// Which device a clipping flag, voltage or impedance refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Device {
    Ca,
    Ba1,
    Ba2,
}

impl Device {
    pub const ALL: [Device; 3] = [Device::Ca, Device::Ba1, Device::Ba2];

    pub fn port(self) -> Port {
        match self {
            Device::Ca => Port::Ca,
            Device::Ba1 => Port::Ba1,
            Device::Ba2 => Port::Ba2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Device::Ca => "ca",
            Device::Ba1 => "ba1",
            Device::Ba2 => "ba2",
        }
    }
}

/// Flat numeric description of an architecture, with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureParams {
    pub z0: f64,
    pub i_max_c: f64,
    pub i_max_b: f64,
    pub beta_lbo: f64,
    pub beta_hbo: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Carrier supply; `None` selects `beta_lbo * i_max_c * z0 / 2`.
    pub vdd_ca0: Option<f64>,
    /// BA supplies; `None` calibrates them to the matched full-drive swing.
    pub vdd_ba1: Option<f64>,
    pub vdd_ba2: Option<f64>,
    pub dc_ratio: f64,
    /// Optional conduction half-angles (radians) for CA, BA1, BA2. When set,
    /// they override `dc_ratio` for that device.
    pub conduction_angles: [Option<f64>; 3],
    /// CA–BA phase offset in radians.
    pub phi: f64,
    pub mode: Mode,
    pub beta_points: usize,
    pub pd_scale: f64,
}

impl Default for ArchitectureParams {
    fn default() -> Self {
        ArchitectureParams {
            z0: 1.0,
            i_max_c: 1.0,
            i_max_b: 1.0,
            beta_lbo: 0.5,
            beta_hbo: 0.75,
            lambda: 0.4,
            gamma: 0.3,
            vdd_ca0: None,
            vdd_ba1: None,
            vdd_ba2: None,
            dc_ratio: std::f64::consts::FRAC_2_PI,
            conduction_angles: [None; 3],
            phi: 0.0,
            mode: Mode::Halmba,
            beta_points: 201,
            pd_scale: 1.0,
        }
    }
}

impl ArchitectureParams {
    pub fn build(&self) -> Result<ArchitectureConfig, EngineError> {
        if self.beta_points < 2 {
            return Err(EngineError::InvalidConfig(format!(
                "beta_points {} must be at least 2",
                self.beta_points
            )));
        }
        let n = self.beta_points - 1;
        let grid = (0..=n).map(|k| k as f64 / n as f64).collect();
        self.build_with_grid(grid)
    }

    pub fn build_with_grid(&self, beta_grid: Vec<f64>) -> Result<ArchitectureConfig, EngineError> {
        let net = build_ideal_coupler(self.z0)?;
        let rb = RegionBoundaries::new(self.beta_lbo, self.beta_hbo)?;
        let vdd_ca = self
            .vdd_ca0
            .unwrap_or(self.beta_lbo * self.i_max_c * self.z0 / 2.0);
        let with_dc = |p: DeviceProfile, angle: Option<f64>| -> Result<DeviceProfile, EngineError> {
            let p = DeviceProfile {
                dc_ratio: self.dc_ratio,
                ..p
            };
            Ok(match angle {
                Some(a) => p.with_conduction_angle(a)?,
                None => p,
            })
        };
        let ca = with_dc(
            DeviceProfile::new(Role::Ca, self.i_max_c, 0.0, 0.5, vdd_ca),
            self.conduction_angles[0],
        )?;
        let ba1 = with_dc(
            DeviceProfile::new(Role::BaPrimary, self.i_max_b, self.beta_lbo, self.lambda, 1.0),
            self.conduction_angles[1],
        )?;
        let ba2 = with_dc(
            DeviceProfile::new(Role::BaSecondary, self.i_max_b, self.beta_hbo, self.gamma, 1.0),
            self.conduction_angles[2],
        )?;
        let mut cfg = ArchitectureConfig {
            net,
            ca,
            ba1,
            ba2,
            rb,
            phi: self.phi,
            mode: self.mode,
            primary: BaPort::Ba1,
            beta_grid,
            pd_scale: self.pd_scale,
        };
        cfg.validate()?;
        let (auto1, auto2) = calibrate_ba_supplies(&cfg)?;
        cfg.ba1.v_dd = self.vdd_ba1.unwrap_or(auto1);
        cfg.ba2.v_dd = self.vdd_ba2.unwrap_or(auto2);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Complete, validated architecture description used by every sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureConfig {
    pub net: CouplerNetwork,
    pub ca: DeviceProfile,
    /// Device on port 2.
    pub ba1: DeviceProfile,
    /// Device on port 4.
    pub ba2: DeviceProfile,
    pub rb: RegionBoundaries,
    pub phi: f64,
    pub mode: Mode,
    /// Port hosting the primary (early turn-on) peaking profile.
    pub primary: BaPort,
    pub beta_grid: Vec<f64>,
    /// Current scale of the pseudo-Doherty comparison ramp.
    pub pd_scale: f64,
}

impl ArchitectureConfig {
    /// Default architecture with auto-calibrated BA supplies.
    pub fn nominal() -> Self {
        ArchitectureParams::default()
            .build()
            .expect("default parameters are valid")
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let mut bad = Vec::new();
        if let Err(e) = self.rb.validate() {
            bad.push(e.to_string());
        }
        for p in [&self.ca, &self.ba1, &self.ba2] {
            if let Err(e) = p.validate() {
                bad.push(e.to_string());
            }
        }
        let (pri, sec) = (self.ba(self.primary), self.ba(self.primary.other()));
        if pri.role != Role::BaPrimary || sec.role != Role::BaSecondary {
            bad.push("role map must assign one primary and one secondary BA".into());
        }
        if !self.phi.is_finite() {
            bad.push("phi must be finite".into());
        }
        if !(self.pd_scale > 0.0 && self.pd_scale.is_finite()) {
            bad.push(format!("pd_scale {} must be positive", self.pd_scale));
        }
        if self.beta_grid.is_empty() {
            bad.push("beta grid is empty".into());
        }
        if self.beta_grid.windows(2).any(|w| !(w[0] < w[1]))
            || self.beta_grid.iter().any(|b| !(0.0..=1.0).contains(b))
        {
            bad.push("beta grid must be strictly increasing within [0, 1]".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(EngineError::InvalidConfig(bad.join("; ")))
        }
    }

    pub fn ba(&self, port: BaPort) -> &DeviceProfile {
        match port {
            BaPort::Ba1 => &self.ba1,
            BaPort::Ba2 => &self.ba2,
        }
    }

    pub fn device(&self, d: Device) -> &DeviceProfile {
        match d {
            Device::Ca => &self.ca,
            Device::Ba1 => &self.ba1,
            Device::Ba2 => &self.ba2,
        }
    }

    /// Moves the primary role to `port`. Thresholds and roles move with the
    /// role; `swap_scale` also moves the fundamental scale factors. Device
    /// size, supply and DC ratio stay with the physical port.
    pub fn with_primary(&self, port: BaPort, swap_scale: bool) -> Self {
        let mut cfg = self.clone();
        if port == self.primary {
            return cfg;
        }
        std::mem::swap(&mut cfg.ba1.role, &mut cfg.ba2.role);
        std::mem::swap(&mut cfg.ba1.turn_on, &mut cfg.ba2.turn_on);
        if swap_scale {
            std::mem::swap(&mut cfg.ba1.scale, &mut cfg.ba2.scale);
        }
        cfg.primary = port;
        cfg
    }

    pub fn with_ca_supply(&self, v_dd: f64) -> Self {
        let mut cfg = self.clone();
        cfg.ca.v_dd = v_dd;
        cfg
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        let mut cfg = self.clone();
        cfg.phi = phi;
        cfg
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        let mut cfg = self.clone();
        cfg.mode = mode;
        cfg
    }

    /// Matched termination at the reference impedance.
    pub fn matched_load(&self) -> Phasor {
        Phasor::new(self.net.z0(), 0.0)
    }

    /// Fundamental current magnitudes `(i_b1, i_b2)` on ports 2 and 4.
    pub fn ba_currents(&self, beta: f64) -> Result<(f64, f64), EngineError> {
        let (p1, p2) = match self.mode {
            Mode::Halmba => {
                let pri = ba_primary_fundamental(
                    beta,
                    self.ba(self.primary),
                    self.ca.i_max,
                    &self.rb,
                )?;
                let sec = ba_secondary_fundamental(beta, self.ba(self.primary.other()), &self.rb)?;
                match self.primary {
                    BaPort::Ba1 => (pri, sec),
                    BaPort::Ba2 => (sec, pri),
                }
            }
            Mode::Pdlmba => {
                region_of(beta, &self.rb)?;
                let ramp = ((beta - self.rb.beta_lbo) / (1.0 - self.rb.beta_lbo)).max(0.0);
                let each = |p: &DeviceProfile| 0.25 * ramp * p.i_max * self.pd_scale;
                (each(&self.ba1), each(&self.ba2))
            }
        };
        Ok((p1, p2))
    }
}

/// Computes the BA supplies as the fundamental swing of each port at full
/// drive under nominal conditions: matched load, zero phase offset, BA1
/// primary, three-way mode.
pub fn calibrate_ba_supplies(cfg: &ArchitectureConfig) -> Result<(f64, f64), EngineError> {
    let mut nominal = cfg.with_primary(BaPort::Ba1, true).with_phi(0.0);
    nominal.mode = Mode::Halmba;
    let load = nominal.matched_load();
    let ex = assemble_excitations(1.0, &nominal, load)?;
    let sol = solve(&nominal.net, &ex)?;
    Ok((sol.voltage(Port::Ba1).norm(), sol.voltage(Port::Ba2).norm()))
}

/// Builds the four port boundary conditions at one drive level.
pub fn assemble_excitations(
    beta: f64,
    cfg: &ArchitectureConfig,
    load: Phasor,
) -> Result<[PortExcitation; 4], EngineError> {
    let region = region_of(beta, &cfg.rb)?;
    let (ib1, ib2) = cfg.ba_currents(beta)?;
    let rot = Phasor::from_polar(1.0, cfg.phi);
    let carrier = match (cfg.mode, region) {
        (Mode::Halmba, Region::Almba) => PortExcitation::VoltageSource(J * rot * cfg.ca.v_dd),
        (Mode::Halmba, _) => {
            let ic = ca_fundamental(beta, &cfg.ca, &cfg.rb, None)?;
            PortExcitation::CurrentSource(J * rot * ic)
        }
        (Mode::Pdlmba, _) => {
            let held = beta.min(cfg.rb.beta_lbo);
            let ic = ca_fundamental(held, &cfg.ca, &cfg.rb, None)?;
            PortExcitation::CurrentSource(J * rot * ic)
        }
    };
    Ok([
        PortExcitation::PassiveLoad(load),
        PortExcitation::CurrentSource(Phasor::new(ib1, 0.0)),
        carrier,
        PortExcitation::CurrentSource(-J * ib2),
    ])
}

/// How the carrier was modeled at a sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarrierDrive {
    Current,
    Voltage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub beta: f64,
    pub region: Region,
    pub i_c: f64,
    pub i_b1: f64,
    pub i_b2: f64,
    /// `None` means the device is off (open circuit).
    pub z_ca: Option<Phasor>,
    pub z_ba1: Option<Phasor>,
    pub z_ba2: Option<Phasor>,
    pub v_ca: Phasor,
    pub v_ba1: Phasor,
    pub v_ba2: Phasor,
    pub v_out: Phasor,
    pub p_out: f64,
    pub p_dc: f64,
    pub efficiency: f64,
    /// `|v_out| / beta`; undefined at zero drive.
    pub gain: Option<f64>,
    /// Absolute angle of `v_out` in radians.
    pub out_phase: f64,
    /// Clipping flags for CA, BA1, BA2.
    pub clipping: [bool; 3],
    pub carrier: CarrierDrive,
    pub power_residual: f64,
    /// Set when the network solve failed at this point.
    pub fault: Option<String>,
}

impl SweepPoint {
    pub fn impedance(&self, d: Device) -> Option<Phasor> {
        match d {
            Device::Ca => self.z_ca,
            Device::Ba1 => self.z_ba1,
            Device::Ba2 => self.z_ba2,
        }
    }

    pub fn voltage(&self, d: Device) -> Phasor {
        match d {
            Device::Ca => self.v_ca,
            Device::Ba1 => self.v_ba1,
            Device::Ba2 => self.v_ba2,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.fault.is_none()
    }

    fn failed(beta: f64, region: Region, why: String) -> Self {
        let z = Phasor::new(0.0, 0.0);
        SweepPoint {
            beta,
            region,
            i_c: 0.0,
            i_b1: 0.0,
            i_b2: 0.0,
            z_ca: None,
            z_ba1: None,
            z_ba2: None,
            v_ca: z,
            v_ba1: z,
            v_ba2: z,
            v_out: z,
            p_out: 0.0,
            p_dc: 0.0,
            efficiency: 0.0,
            gain: None,
            out_phase: 0.0,
            clipping: [false; 3],
            carrier: CarrierDrive::Current,
            power_residual: 0.0,
            fault: Some(why),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub config: ArchitectureConfig,
    pub load: Phasor,
}

impl SweepResult {
    pub fn last(&self) -> &SweepPoint {
        self.points.last().expect("sweep results are never empty")
    }
}

fn impedance_or_open(sol: &NetworkSolution, port: Port) -> Option<Phasor> {
    port_impedance(sol, port).ok()
}

fn evaluate_point(
    beta: f64,
    cfg: &ArchitectureConfig,
    load: Phasor,
) -> Result<SweepPoint, EngineError> {
    let region = region_of(beta, &cfg.rb)?;
    let ex = assemble_excitations(beta, cfg, load)?;
    let sol = solve(&cfg.net, &ex)?;
    let i_c = sol.current(Port::Ca).norm();
    let i_b1 = sol.current(Port::Ba1).norm();
    let i_b2 = sol.current(Port::Ba2).norm();
    let p_dc = cfg.ca.v_dd * dc_current(i_c, &cfg.ca)
        + cfg.ba1.v_dd * dc_current(i_b1, &cfg.ba1)
        + cfg.ba2.v_dd * dc_current(i_b2, &cfg.ba2);
    let p_out = sol.load_power;
    let efficiency = if p_dc > 0.0 { p_out / p_dc } else { 0.0 };
    let v_out = sol.voltage(Port::Output);
    let gain = (beta > 0.0).then(|| v_out.norm() / beta);
    let clipping = Device::ALL.map(|d| {
        sol.voltage(d.port()).norm() > cfg.device(d).v_dd * (1.0 + CLIP_MARGIN)
    });
    Ok(SweepPoint {
        beta,
        region,
        i_c,
        i_b1,
        i_b2,
        z_ca: impedance_or_open(&sol, Port::Ca),
        z_ba1: impedance_or_open(&sol, Port::Ba1),
        z_ba2: impedance_or_open(&sol, Port::Ba2),
        v_ca: sol.voltage(Port::Ca),
        v_ba1: sol.voltage(Port::Ba1),
        v_ba2: sol.voltage(Port::Ba2),
        v_out,
        p_out,
        p_dc,
        efficiency,
        gain,
        out_phase: v_out.arg(),
        clipping,
        carrier: match ex[Port::Ca.index()] {
            PortExcitation::VoltageSource(_) => CarrierDrive::Voltage,
            _ => CarrierDrive::Current,
        },
        power_residual: power_balance(&sol),
        fault: None,
    })
}

/// Runs the configured architecture over its drive grid into `load`
/// (absolute impedance, same units as the coupler reference).
pub fn sweep(cfg: &ArchitectureConfig, load: Phasor) -> Result<SweepResult, EngineError> {
    cfg.validate()?;
    let mut points = Vec::with_capacity(cfg.beta_grid.len());
    let mut first_fault = None;
    for &beta in &cfg.beta_grid {
        let point = match evaluate_point(beta, cfg, load) {
            Ok(p) => p,
            Err(e) => {
                let region = region_of(beta, &cfg.rb).unwrap_or(Region::LowPower);
                first_fault.get_or_insert_with(|| e.to_string());
                SweepPoint::failed(beta, region, e.to_string())
            }
        };
        points.push(point);
    }
    if points.iter().all(|p| !p.is_ok()) {
        return Err(EngineError::AllPointsFailed(first_fault.unwrap_or_default()));
    }
    Ok(SweepResult {
        points,
        config: cfg.clone(),
        load,
    })
}

/// Sweep of the pseudo-Doherty comparison architecture.
pub fn pdlmba_sweep(cfg: &ArchitectureConfig, load: Phasor) -> Result<SweepResult, EngineError> {
    if cfg.mode != Mode::Pdlmba {
        return Err(EngineError::ModeMismatch {
            expected: Mode::Pdlmba,
        });
    }
    sweep(cfg, load)
}

/// Matched-load impedances `(z_ca, z_ba1, z_ba2)` straight from the closed
/// forms, without a network solve. `None` marks a device that is off.
///
/// Below `beta_hbo` the current-source forms are used. Above it the carrier
/// is voltage saturated and the unified forms expressed through `v_dd`
/// apply.
pub fn closed_form_impedances(
    beta: f64,
    cfg: &ArchitectureConfig,
) -> Result<[Option<Phasor>; 3], EngineError> {
    let region = region_of(beta, &cfg.rb)?;
    let z0 = cfg.net.z0();
    let (ib1, ib2) = cfg.ba_currents(beta)?;
    let on = |i: f64| i > OFF_CURRENT_TOLERANCE;
    let rot = Phasor::from_polar(1.0, cfg.phi);

    if cfg.mode == Mode::Halmba && region == Region::Almba {
        let v = cfg.ca.v_dd;
        let z_ca = z0 * v / (v + SQRT_2 * (ib1 - ib2) * rot.conj() * z0);
        let z_ba1 = on(ib1).then(|| 2.0 * z0 + (SQRT_2 * v * rot - z0 * ib2) / ib1);
        let z_ba2 = on(ib2).then(|| (z0 * ib1 + SQRT_2 * v * rot) / ib2);
        return Ok([Some(z_ca), z_ba1, z_ba2]);
    }

    let held = match cfg.mode {
        Mode::Halmba => beta,
        Mode::Pdlmba => beta.min(cfg.rb.beta_lbo),
    };
    let ic = ca_fundamental(held, &cfg.ca, &cfg.rb, None)?;
    let ic_rot = ic * rot;
    let z_ca = on(ic).then(|| z0 * (1.0 + SQRT_2 * (ib2 - ib1) / ic_rot));
    let z_ba1 = on(ib1).then(|| z0 * (SQRT_2 * ic_rot / ib1 + ib2 / ib1));
    let z_ba2 = on(ib2).then(|| z0 * (2.0 + SQRT_2 * ic_rot / ib2 - ib1 / ib2));
    Ok([z_ca, z_ba1, z_ba2])
}

/// AM-AM / AM-PM curves relative to the lowest driven point.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearity {
    /// Gain in dB relative to the reference, one entry per sweep point.
    pub gain_db: Vec<Option<f64>>,
    /// Unwrapped output phase in degrees relative to the reference.
    pub phase_deg: Vec<Option<f64>>,
    pub amam_span_db: f64,
    pub ampm_span_deg: f64,
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

pub fn amam_ampm(result: &SweepResult) -> Result<Linearity, EngineError> {
    let driven: Vec<usize> = result
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_ok() && p.beta > 0.0)
        .map(|(k, _)| k)
        .collect();
    if driven.len() < 2 {
        return Err(EngineError::InsufficientPoints);
    }
    let usable: Vec<usize> = driven
        .into_iter()
        .filter(|&k| result.points[k].gain.is_some_and(|g| g > 0.0))
        .collect();
    if usable.is_empty() {
        return Err(EngineError::UndefinedGain);
    }
    if usable.len() < 2 {
        return Err(EngineError::InsufficientPoints);
    }

    let n = result.points.len();
    let mut gain_db = vec![None; n];
    let mut phase_deg = vec![None; n];
    let ref_gain = result.points[usable[0]].gain.unwrap_or(1.0);
    let ref_phase = result.points[usable[0]].out_phase;
    let mut unwrapped = ref_phase;
    let mut prev = ref_phase;
    for &k in &usable {
        let p = &result.points[k];
        unwrapped += wrap_pi(p.out_phase - prev);
        prev = p.out_phase;
        gain_db[k] = p.gain.map(|g| 20.0 * (g / ref_gain).log10());
        phase_deg[k] = Some((unwrapped - ref_phase).to_degrees());
    }
    let span = |xs: &[Option<f64>]| {
        let (lo, hi) = xs
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo
    };
    Ok(Linearity {
        amam_span_db: span(&gain_db),
        ampm_span_deg: span(&phase_deg),
        gain_db,
        phase_deg,
    })
}

/// Per-point clipping flags `[ca, ba1, ba2]`: the fundamental voltage
/// exceeds the device supply.
pub fn detect_clipping(result: &SweepResult) -> Vec<[bool; 3]> {
    result
        .points
        .iter()
        .map(|p| {
            Device::ALL.map(|d| {
                p.is_ok()
                    && p.voltage(d).norm() > result.config.device(d).v_dd * (1.0 + CLIP_MARGIN)
            })
        })
        .collect()
}

pub fn clipping_count(result: &SweepResult) -> usize {
    detect_clipping(result)
        .iter()
        .flat_map(|f| f.iter())
        .filter(|&&f| f)
        .count()
}

/// Indices of strict local efficiency maxima. The last grid point counts
/// when it rises above its neighbour; the first never does.
pub fn local_efficiency_maxima(result: &SweepResult) -> Vec<usize> {
    let e: Vec<f64> = result.points.iter().map(|p| p.efficiency).collect();
    let last = e.len().saturating_sub(1);
    (1..e.len())
        .filter(|&k| {
            let rises = e[k] - e[k - 1] > PLATEAU_TOLERANCE;
            let falls = k == last || e[k] - e[k + 1] > PLATEAU_TOLERANCE;
            rises && falls
        })
        .collect()
}

/// Output back-off in dB between full drive and the lowest-drive interior
/// efficiency peak.
pub fn first_peak_obo(result: &SweepResult) -> Result<f64, EngineError> {
    let last = result.points.len() - 1;
    let peak = local_efficiency_maxima(result)
        .into_iter()
        .find(|&k| k < last && result.points[k].p_out > 0.0)
        .ok_or(EngineError::NoBackoffPeak)?;
    let p_max = result.points[last].p_out;
    if !(p_max > 0.0) {
        return Err(EngineError::NoBackoffPeak);
    }
    Ok(10.0 * (p_max / result.points[peak].p_out).log10())
}

/// Efficiency where the output first reaches `obo_db` below full-drive
/// power, linearly interpolated in output power between grid points.
pub fn efficiency_at_obo(result: &SweepResult, obo_db: f64) -> Option<f64> {
    let pts: Vec<&SweepPoint> = result.points.iter().filter(|p| p.is_ok()).collect();
    let p_max = pts.last()?.p_out;
    if !(p_max > 0.0) {
        return None;
    }
    let target = p_max / 10f64.powf(obo_db / 10.0);
    pts.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        if a.p_out <= target && b.p_out >= target {
            let t = if b.p_out > a.p_out {
                (target - a.p_out) / (b.p_out - a.p_out)
            } else {
                0.0
            };
            Some(a.efficiency + t * (b.efficiency - a.efficiency))
        } else {
            None
        }
    })
}

/// Angle offset that the carrier voltage source uses relative to `phi`.
pub const CARRIER_SOURCE_PHASE: f64 = FRAC_PI_2;
