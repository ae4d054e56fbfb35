//! CSV serialization of sweeps, Smith-chart trajectories and plan reports.
//!
//! Every writer builds the whole file in memory with fixed nine-digit
//! formatting and `\n` line endings, so output depends only on the data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use halmba_core::engine::{amam_ampm, Device, SweepResult};
use halmba_core::reconfig::{LoadCondition, PhaseOptimum, PlanMetrics, ReconfigPlan};
use halmba_core::tlfit::PhaseFitResult;
use halmba_core::Phasor;
use thiserror::Error;

use crate::fmt::{num, opt};

pub const SWEEP_HEADER: &str = "beta,region,i_c,i_b1,i_b2,z_ca_re,z_ca_im,z_ba1_re,z_ba1_im,z_ba2_re,z_ba2_im,v_out_re,v_out_im,p_out,p_dc,efficiency,gain_db,phase_deg,clip_ca,clip_ba1,clip_ba2";
pub const SMITH_HEADER: &str = "beta,device,gamma_re,gamma_im";
pub const PLAN_HEADER: &str = "gamma_phase_deg,vswr,z_re,z_im,primary_ba,vdd_ca,phi_deg,first_peak_obo_db,eff_at_10db_obo,peak_eff,amam_span_db,ampm_span_deg,clipping_count";
pub const PHASE_SCAN_HEADER: &str =
    "phi_deg,ampm_span_deg,amam_span_db,eff_at_obo,objective,feasible,selected";
pub const TLFIT_HEADER: &str =
    "segment,freq_lo,freq_hi,electrical_length_deg,max_abs_error_deg,first_index,last_index";
pub const COMPARE_HEADER: &str = "mode,first_peak_obo_db,eff_at_10db_obo,peak_eff,p_out_max,amam_span_db,ampm_span_deg,clipping_count";

#[derive(Debug, Error)]
#[error("cannot write {}: {source}", path.display())]
pub struct ExportError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// Creates parent directories and writes `contents` to `path`.
pub fn write_file(path: &Path, contents: &str) -> Result<(), ExportError> {
    let wrap = |source| ExportError {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(wrap)?;
    }
    std::fs::write(path, contents).map_err(wrap)
}

fn preamble(z0_ohms: Option<f64>, header: &str) -> String {
    let mut s = String::new();
    if let Some(ohms) = z0_ohms {
        let _ = writeln!(s, "# z0_ohms={}", num(ohms));
    }
    s.push_str(header);
    s.push('\n');
    s
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn z_fields(z: Option<Phasor>) -> String {
    match z {
        Some(z) => format!("{},{}", num(z.re), num(z.im)),
        None => ",".into(),
    }
}

pub fn sweep_csv(result: &SweepResult, z0_ohms: Option<f64>) -> String {
    let mut s = preamble(z0_ohms, SWEEP_HEADER);
    let lin = amam_ampm(result).ok();
    for (k, p) in result.points.iter().enumerate() {
        let gain = lin.as_ref().and_then(|l| l.gain_db[k]);
        let phase = lin.as_ref().and_then(|l| l.phase_deg[k]);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            num(p.beta),
            p.region.as_str(),
            num(p.i_c),
            num(p.i_b1),
            num(p.i_b2),
            z_fields(p.z_ca),
            z_fields(p.z_ba1),
            z_fields(p.z_ba2),
            num(p.v_out.re),
            num(p.v_out.im),
            num(p.p_out),
            num(p.p_dc),
            num(p.efficiency),
            opt(gain),
            opt(phase),
            flag(p.clipping[0]),
            flag(p.clipping[1]),
            flag(p.clipping[2]),
        );
    }
    s
}

/// Reflection coefficient of a device load against the coupler reference;
/// an off device is an open circuit.
pub fn device_gamma(z: Option<Phasor>, z0: f64) -> Phasor {
    match z {
        Some(z) => {
            let zn = z / z0;
            (zn - 1.0) / (zn + 1.0)
        }
        None => Phasor::new(1.0, 0.0),
    }
}

pub fn smith_csv(result: &SweepResult, z0_ohms: Option<f64>) -> String {
    let mut s = preamble(z0_ohms, SMITH_HEADER);
    let z0 = result.config.net.z0();
    for p in &result.points {
        for d in Device::ALL {
            let g = device_gamma(p.impedance(d), z0);
            let _ = writeln!(
                s,
                "{},{},{},{}",
                num(p.beta),
                d.as_str(),
                num(g.re),
                num(g.im)
            );
        }
    }
    s
}

pub fn plan_report_csv(
    rows: &[(LoadCondition, ReconfigPlan, PlanMetrics)],
    z0_ohms: Option<f64>,
) -> String {
    let mut s = preamble(z0_ohms, PLAN_HEADER);
    for (load, plan, m) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            num(load.gamma_phase_deg()),
            num(load.vswr()),
            num(load.z().re),
            num(load.z().im),
            plan.primary_ba.as_str(),
            num(plan.v_dd_ca),
            num(plan.phi.to_degrees()),
            opt(m.first_peak_obo_db),
            opt(m.efficiency_at_10db_obo),
            num(m.peak_efficiency),
            num(m.amam_span_db),
            num(m.ampm_span_deg),
            m.clipping_count,
        );
    }
    s
}

pub fn phase_scan_csv(best: &PhaseOptimum, z0_ohms: Option<f64>) -> String {
    let mut s = preamble(z0_ohms, PHASE_SCAN_HEADER);
    for sample in &best.scan {
        let m = sample.metrics.as_ref().ok();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(sample.phi_deg),
            opt(m.map(|m| m.ampm_span_deg)),
            opt(m.map(|m| m.amam_span_db)),
            opt(m.and_then(|m| m.efficiency_at_obo)),
            opt(sample.value),
            flag(sample.feasible),
            flag(sample.phi_deg == best.phi_deg),
        );
    }
    s
}

pub fn tlfit_csv(fit: &PhaseFitResult, z0_ohms: Option<f64>) -> String {
    let mut s = preamble(z0_ohms, TLFIT_HEADER);
    for (k, seg) in fit.segments.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            k + 1,
            num(seg.freq_lo),
            num(seg.freq_hi),
            num(seg.electrical_length_deg),
            num(seg.max_abs_error_deg),
            seg.first,
            seg.last,
        );
    }
    s
}

/// One summary row per labelled sweep.
pub fn compare_summary_csv(
    rows: &[(&str, &SweepResult, &PlanMetrics)],
    z0_ohms: Option<f64>,
) -> String {
    let mut s = preamble(z0_ohms, COMPARE_HEADER);
    for (label, result, m) in rows {
        let p_max = result
            .points
            .iter()
            .map(|p| p.p_out)
            .fold(0.0, f64::max);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            label,
            opt(m.first_peak_obo_db),
            opt(m.efficiency_at_10db_obo),
            num(m.peak_efficiency),
            num(p_max),
            num(m.amam_span_db),
            num(m.ampm_span_deg),
            m.clipping_count,
        );
    }
    s
}
