//! Piecewise-linear fundamental and DC current laws of the three
//! sub-amplifiers across the low-power, Doherty and ALMBA regions.

use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

use thiserror::Error;

use crate::network::Phasor;

/// Impedances below this magnitude cannot set a voltage-saturated current.
const MIN_IMPEDANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("drive level {0} outside [0, 1]")]
    DriveOutOfRange(f64),
    #[error("region boundaries must satisfy 0 < beta_lbo < beta_hbo < 1, got ({lbo}, {hbo})")]
    InvalidBoundaries { lbo: f64, hbo: f64 },
    #[error("invalid device profile: {0}")]
    InvalidProfile(String),
    #[error("carrier load impedance required in the ALMBA region")]
    MissingCarrierLoad,
    #[error("carrier load impedance magnitude {0} is too small")]
    CarrierLoadTooSmall(f64),
    #[error("conduction half-angle {0} rad outside (0, pi]")]
    ConductionAngle(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Ca,
    BaPrimary,
    BaSecondary,
}

/// Operating region, ordered by drive level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    LowPower,
    Doherty,
    Almba,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::LowPower => "low_power",
            Region::Doherty => "doherty",
            Region::Almba => "almba",
        }
    }
}

/// Drive levels at which the primary and secondary peaking amplifiers turn on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionBoundaries {
    pub beta_lbo: f64,
    pub beta_hbo: f64,
}

impl RegionBoundaries {
    pub fn new(beta_lbo: f64, beta_hbo: f64) -> Result<Self, DeviceError> {
        let rb = RegionBoundaries { beta_lbo, beta_hbo };
        rb.validate()?;
        Ok(rb)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let ok = self.beta_lbo > 0.0 && self.beta_lbo < self.beta_hbo && self.beta_hbo < 1.0;
        if ok {
            Ok(())
        } else {
            Err(DeviceError::InvalidBoundaries {
                lbo: self.beta_lbo,
                hbo: self.beta_hbo,
            })
        }
    }
}

impl Default for RegionBoundaries {
    fn default() -> Self {
        RegionBoundaries {
            beta_lbo: 0.5,
            beta_hbo: 0.75,
        }
    }
}

/// One sub-amplifier's current law parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceProfile {
    pub role: Role,
    /// Maximum channel current.
    pub i_max: f64,
    /// Drive level at which the device starts conducting.
    pub turn_on: f64,
    /// Fundamental scale factor relative to `i_max` (0.5 is class B).
    pub scale: f64,
    /// DC-to-fundamental current ratio.
    pub dc_ratio: f64,
    /// Supply, equal to the largest fundamental voltage swing.
    pub v_dd: f64,
}

impl DeviceProfile {
    pub fn new(role: Role, i_max: f64, turn_on: f64, scale: f64, v_dd: f64) -> Self {
        DeviceProfile {
            role,
            i_max,
            turn_on,
            scale,
            dc_ratio: FRAC_2_PI,
            v_dd,
        }
    }

    /// Replaces the DC ratio with the one of a truncated cosine of the given
    /// conduction half-angle.
    pub fn with_conduction_angle(mut self, half_angle: f64) -> Result<Self, DeviceError> {
        let (dc, fund) = truncated_cosine_fourier(half_angle)?;
        self.dc_ratio = dc / fund;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let mut bad = Vec::new();
        if !(0.0..1.0).contains(&self.turn_on) {
            bad.push(format!("turn_on {} not in [0, 1)", self.turn_on));
        }
        if !(self.scale > 0.0 && self.scale <= 0.5) {
            bad.push(format!("scale {} not in (0, 0.5]", self.scale));
        }
        if !(self.i_max > 0.0 && self.i_max.is_finite()) {
            bad.push(format!("i_max {} not positive", self.i_max));
        }
        if !(self.v_dd > 0.0 && self.v_dd.is_finite()) {
            bad.push(format!("v_dd {} not positive", self.v_dd));
        }
        if !(self.dc_ratio > 0.0 && self.dc_ratio <= 1.0) {
            bad.push(format!("dc_ratio {} not in (0, 1]", self.dc_ratio));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(DeviceError::InvalidProfile(format!(
                "{:?}: {}",
                self.role,
                bad.join("; ")
            )))
        }
    }
}

fn check_drive(beta: f64) -> Result<(), DeviceError> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(DeviceError::DriveOutOfRange(beta))
    }
}

pub fn region_of(beta: f64, rb: &RegionBoundaries) -> Result<Region, DeviceError> {
    check_drive(beta)?;
    Ok(if beta < rb.beta_lbo {
        Region::LowPower
    } else if beta < rb.beta_hbo {
        Region::Doherty
    } else {
        Region::Almba
    })
}

/// Carrier fundamental current magnitude.
///
/// Below `beta_hbo` the carrier is a class-B current source. Above it the
/// carrier is voltage saturated and its current is `v_dd / |z_ca|`.
pub fn ca_fundamental(
    beta: f64,
    p: &DeviceProfile,
    rb: &RegionBoundaries,
    z_ca: Option<Phasor>,
) -> Result<f64, DeviceError> {
    match region_of(beta, rb)? {
        Region::LowPower | Region::Doherty => Ok(beta * p.i_max / 2.0),
        Region::Almba => {
            let z = z_ca.ok_or(DeviceError::MissingCarrierLoad)?;
            if z.norm() < MIN_IMPEDANCE {
                return Err(DeviceError::CarrierLoadTooSmall(z.norm()));
            }
            Ok(p.v_dd / z.norm())
        }
    }
}

/// Current of the primary peaking amplifier at the end of the Doherty
/// region, where the ALMBA-region blend starts.
fn primary_doherty_current(beta: f64, i_max_c: f64, rb: &RegionBoundaries) -> f64 {
    SQRT_2 * (beta - rb.beta_lbo) / 4.0 * i_max_c
}

/// Primary peaking amplifier (BA1 in the nominal role assignment).
///
/// In the Doherty region its slope is tied to the carrier's `i_max_c` so the
/// carrier voltage stays pinned; above `beta_hbo` it blends linearly to
/// `scale * i_max` at full drive.
pub fn ba_primary_fundamental(
    beta: f64,
    p: &DeviceProfile,
    i_max_c: f64,
    rb: &RegionBoundaries,
) -> Result<f64, DeviceError> {
    Ok(match region_of(beta, rb)? {
        Region::LowPower => 0.0,
        Region::Doherty => primary_doherty_current(beta, i_max_c, rb),
        Region::Almba => {
            let span = 1.0 - rb.beta_hbo;
            let at_hbo = primary_doherty_current(rb.beta_hbo, i_max_c, rb);
            (beta - rb.beta_hbo) / span * p.scale * p.i_max + at_hbo * (1.0 - beta) / span
        }
    })
}

/// Secondary peaking amplifier: a single ramp from `beta_hbo` to full drive.
pub fn ba_secondary_fundamental(
    beta: f64,
    p: &DeviceProfile,
    rb: &RegionBoundaries,
) -> Result<f64, DeviceError> {
    Ok(match region_of(beta, rb)? {
        Region::LowPower | Region::Doherty => 0.0,
        Region::Almba => (beta - rb.beta_hbo) / (1.0 - rb.beta_hbo) * p.scale * p.i_max,
    })
}

pub fn dc_current(fund: f64, p: &DeviceProfile) -> f64 {
    debug_assert!(fund >= 0.0);
    p.dc_ratio * fund
}

/// DC and fundamental Fourier coefficients of a unit-peak truncated cosine
/// with conduction half-angle `alpha`.
pub fn truncated_cosine_fourier(alpha: f64) -> Result<(f64, f64), DeviceError> {
    if !(alpha > 0.0 && alpha <= PI) {
        return Err(DeviceError::ConductionAngle(alpha));
    }
    let (s, c) = alpha.sin_cos();
    let norm = PI * (1.0 - c);
    let dc = (s - alpha * c) / norm;
    let fund = (alpha - s * c) / norm;
    Ok((dc, fund))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rb() -> RegionBoundaries {
        RegionBoundaries::default()
    }

    fn ca() -> DeviceProfile {
        DeviceProfile::new(Role::Ca, 1.0, 0.0, 0.5, 0.25)
    }

    fn ba(scale: f64) -> DeviceProfile {
        DeviceProfile::new(Role::BaPrimary, 1.0, 0.5, scale, 0.85)
    }

    #[test]
    fn regions() {
        assert_eq!(region_of(0.3, &rb()).unwrap(), Region::LowPower);
        assert_eq!(region_of(0.5, &rb()).unwrap(), Region::Doherty);
        assert_eq!(region_of(1.0, &rb()).unwrap(), Region::Almba);
        assert!(region_of(-0.1, &rb()).is_err());
        assert!(region_of(1.01, &rb()).is_err());
        assert!(Region::LowPower < Region::Doherty && Region::Doherty < Region::Almba);
    }

    #[test]
    fn boundaries_validate() {
        assert!(RegionBoundaries::new(0.8, 0.75).is_err());
        assert!(RegionBoundaries::new(0.0, 0.75).is_err());
        assert!(RegionBoundaries::new(0.5, 1.0).is_err());
    }

    #[test]
    fn carrier_current() {
        assert_relative_eq!(ca_fundamental(0.5, &ca(), &rb(), None).unwrap(), 0.25);
        assert_eq!(ca_fundamental(0.0, &ca(), &rb(), None).unwrap(), 0.0);
        let z = Phasor::new(0.6387, 0.0);
        assert_relative_eq!(
            ca_fundamental(1.0, &ca(), &rb(), Some(z)).unwrap(),
            0.3914,
            epsilon = 1e-4
        );
        assert_eq!(
            ca_fundamental(0.9, &ca(), &rb(), None),
            Err(DeviceError::MissingCarrierLoad)
        );
        assert!(matches!(
            ca_fundamental(0.9, &ca(), &rb(), Some(Phasor::new(0.0, 0.0))),
            Err(DeviceError::CarrierLoadTooSmall(_))
        ));
    }

    #[test]
    fn primary_current() {
        assert_relative_eq!(
            ba_primary_fundamental(0.75, &ba(0.4), 1.0, &rb()).unwrap(),
            0.08839,
            epsilon = 1e-5
        );
        assert_eq!(ba_primary_fundamental(0.5, &ba(0.4), 1.0, &rb()).unwrap(), 0.0);
        assert_relative_eq!(ba_primary_fundamental(1.0, &ba(0.4), 1.0, &rb()).unwrap(), 0.4);
    }

    #[test]
    fn secondary_current() {
        assert_relative_eq!(ba_secondary_fundamental(1.0, &ba(0.3), &rb()).unwrap(), 0.3);
        assert_eq!(ba_secondary_fundamental(0.75, &ba(0.3), &rb()).unwrap(), 0.0);
        assert_relative_eq!(
            ba_secondary_fundamental(0.875, &ba(0.3), &rb()).unwrap(),
            0.15,
            epsilon = 1e-15
        );
    }

    #[test]
    fn dc_from_fundamental() {
        assert_relative_eq!(dc_current(0.25, &ca()), 0.15915, epsilon = 1e-5);
        assert_eq!(dc_current(0.0, &ca()), 0.0);
        assert_relative_eq!(dc_current(0.3914, &ca()), 0.24918, epsilon = 1e-5);
    }

    #[test]
    fn doherty_carrier_voltage_term_is_constant() {
        for k in 0..=50 {
            let beta = 0.5 + 0.25 * k as f64 / 50.0;
            let beta = beta.min(0.7499999);
            let ic = ca_fundamental(beta, &ca(), &rb(), None).unwrap();
            let ib1 = ba_primary_fundamental(beta, &ba(0.4), 1.0, &rb()).unwrap();
            assert!((ic - SQRT_2 * ib1 - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn profile_validation() {
        assert!(ca().validate().is_ok());
        let mut p = ca();
        p.scale = 0.6;
        p.turn_on = 1.0;
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("scale") && msg.contains("turn_on"));
    }

    #[test]
    fn class_b_ratio() {
        let (dc, fund) = truncated_cosine_fourier(PI / 2.0).unwrap();
        assert_relative_eq!(dc / fund, FRAC_2_PI, epsilon = 1e-15);
        assert!(truncated_cosine_fourier(0.0).is_err());
        assert!(truncated_cosine_fourier(3.5).is_err());
        let p = ca().with_conduction_angle(PI / 2.0).unwrap();
        assert_relative_eq!(p.dc_ratio, FRAC_2_PI, epsilon = 1e-15);
    }

    /// Trapezoid-rule Fourier coefficients over the conducting interval.
    fn numeric_fourier(alpha: f64, samples: usize) -> (f64, f64) {
        let c = alpha.cos();
        let h = 2.0 * alpha / samples as f64;
        let (mut dc, mut fund) = (0.0, 0.0);
        for k in 0..=samples {
            let t = -alpha + k as f64 * h;
            let w = if k == 0 || k == samples { 0.5 } else { 1.0 };
            let i = (t.cos() - c) / (1.0 - c);
            dc += w * i;
            fund += w * i * t.cos();
        }
        (dc * h / (2.0 * PI), fund * h / PI)
    }

    #[test]
    fn fourier_matches_quadrature() {
        for alpha in [0.9 * PI / 2.0, PI / 2.0, PI, 0.3] {
            let (dc, fund) = truncated_cosine_fourier(alpha).unwrap();
            let (ndc, nfund) = numeric_fourier(alpha, 1_000_000);
            assert!((dc - ndc).abs() < 1e-10, "dc at {alpha}: {dc} vs {ndc}");
            assert!((fund - nfund).abs() < 1e-10, "fund at {alpha}: {fund} vs {nfund}");
        }
        // Full conduction of a unit-peak raised cosine: dc = fund = 1/2.
        let (dc, fund) = truncated_cosine_fourier(PI).unwrap();
        assert_relative_eq!(dc, 0.5, epsilon = 1e-15);
        assert_relative_eq!(fund, 0.5, epsilon = 1e-15);
    }

    fn random_setup() -> impl Strategy<Value = (RegionBoundaries, f64, f64, f64, f64)> {
        (0.05f64..0.9, 0.02f64..0.9, 0.1f64..5.0, 0.1f64..5.0, 0.01f64..0.5).prop_map(
            |(lbo, frac, i_c, i_b, scale)| {
                let hbo = lbo + (0.99 - lbo) * frac.max(0.01);
                (RegionBoundaries::new(lbo, hbo).unwrap(), i_c, i_b, scale, lbo)
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn laws_are_continuous((rb, i_c, i_b, scale, _) in random_setup()) {
            let below = |x: f64| x - 1e-13;
            let ba = DeviceProfile::new(Role::BaPrimary, i_b, rb.beta_lbo, scale, 1.0);
            for edge in [rb.beta_lbo, rb.beta_hbo] {
                let l = ba_primary_fundamental(below(edge), &ba, i_c, &rb).unwrap();
                let r = ba_primary_fundamental(edge, &ba, i_c, &rb).unwrap();
                prop_assert!((l - r).abs() <= 1e-12);
                let l = ba_secondary_fundamental(below(edge), &ba, &rb).unwrap();
                let r = ba_secondary_fundamental(edge, &ba, &rb).unwrap();
                prop_assert!((l - r).abs() <= 1e-12);
            }
            // Carrier continuity at beta_hbo with the default supply and the
            // unified carrier impedance v / (v + sqrt2 * Ib1).
            let v = rb.beta_lbo * i_c / 2.0;
            let ca = DeviceProfile::new(Role::Ca, i_c, 0.0, 0.5, v);
            let ib1 = ba_primary_fundamental(rb.beta_hbo, &ba, i_c, &rb).unwrap();
            let z = Phasor::new(v / (v + SQRT_2 * ib1), 0.0);
            let l = ca_fundamental(below(rb.beta_hbo), &ca, &rb, None).unwrap();
            let r = ca_fundamental(rb.beta_hbo, &ca, &rb, Some(z)).unwrap();
            prop_assert!((l - r).abs() <= 1e-12);
        }

        #[test]
        fn monotone_laws((rb, i_c, i_b, scale, _) in random_setup(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let ba = DeviceProfile::new(Role::BaSecondary, i_b, rb.beta_hbo, scale, 1.0);
            prop_assert!(ba_secondary_fundamental(lo, &ba, &rb).unwrap()
                <= ba_secondary_fundamental(hi, &ba, &rb).unwrap());
            let ca = DeviceProfile::new(Role::Ca, i_c, 0.0, 0.5, 1.0);
            let lo = lo.min(rb.beta_hbo * 0.999_999);
            let hi = hi.min(rb.beta_hbo * 0.999_999);
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            prop_assert!(ca_fundamental(lo, &ca, &rb, None).unwrap()
                <= ca_fundamental(hi, &ca, &rb, None).unwrap());
        }

        #[test]
        fn dc_is_linear(x in 0.0f64..10.0, y in 0.0f64..10.0, k in 0.0f64..10.0) {
            let p = ca();
            let lhs = dc_current(k * x + y, &p);
            let rhs = k * dc_current(x, &p) + dc_current(y, &p);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
