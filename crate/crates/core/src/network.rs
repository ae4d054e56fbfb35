//! Ideal output quadrature coupler as a 4-port impedance matrix.
//!
//! Port layout follows the balanced-amplifier convention used throughout the
//! crate: port 1 is the antenna/load, port 2 is BA1, port 3 is the carrier
//! (CA) and port 4 is BA2. All port currents flow *into* the network, so a
//! passive termination obeys `V = -z * I`.

use num_complex::Complex64;
use thiserror::Error;

/// Complex amplitude of an RF voltage or current (normalized units).
pub type Phasor = Complex64;

/// Currents below this magnitude mark a port as switched off.
pub const OFF_CURRENT_TOLERANCE: f64 = 1e-12;

/// Relative pivot magnitude below which the boundary-condition system is
/// treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

const POWER_EPS: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("reference impedance must be positive and finite, got {0}")]
    InvalidReference(f64),
    #[error("passive load at port {port} must have a positive real part, got {z}")]
    NonPassiveLoad { port: usize, z: Phasor },
    #[error("excitation at port {0} is not finite")]
    NonFinite(usize),
    #[error("no source: every port is a passive load")]
    NoSource,
    #[error("degenerate boundary conditions: the port system is singular")]
    Degenerate,
    #[error("port {0} is off: impedance undefined (open circuit)")]
    PortOff(usize),
}

/// Physical port of the output coupler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    Output,
    Ba1,
    Ca,
    Ba2,
}

impl Port {
    pub const ALL: [Port; 4] = [Port::Output, Port::Ba1, Port::Ca, Port::Ba2];

    /// Zero-based index into matrices and solution arrays.
    pub const fn index(self) -> usize {
        match self {
            Port::Output => 0,
            Port::Ba1 => 1,
            Port::Ca => 2,
            Port::Ba2 => 3,
        }
    }

    /// Conventional one-based port number.
    pub const fn number(self) -> usize {
        self.index() + 1
    }
}

/// Boundary condition imposed at one coupler port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PortExcitation {
    CurrentSource(Phasor),
    VoltageSource(Phasor),
    PassiveLoad(Phasor),
}

impl PortExcitation {
    /// A port that injects no current. Used for devices that are off.
    pub const OFF: PortExcitation = PortExcitation::CurrentSource(Phasor::new(0.0, 0.0));

    pub fn is_passive(&self) -> bool {
        matches!(self, PortExcitation::PassiveLoad(_))
    }
}

/// Lossless reciprocal 4-port described by its impedance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplerNetwork {
    z0: f64,
    zmatrix: [[Phasor; 4]; 4],
}

/// Builds the ideal quadrature coupler scaled by the reference impedance.
pub fn build_ideal_coupler(z0: f64) -> Result<CouplerNetwork, NetworkError> {
    if !(z0.is_finite() && z0 > 0.0) {
        return Err(NetworkError::InvalidReference(z0));
    }
    let j = Phasor::new(0.0, z0);
    let r2 = std::f64::consts::SQRT_2;
    let o = Phasor::new(0.0, 0.0);
    let zmatrix = [
        [o, o, j, -j * r2],
        [o, o, -j * r2, j],
        [j, -j * r2, o, o],
        [-j * r2, j, o, o],
    ];
    Ok(CouplerNetwork { z0, zmatrix })
}

impl CouplerNetwork {
    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn zmatrix(&self) -> &[[Phasor; 4]; 4] {
        &self.zmatrix
    }

    /// Entry `(row, col)` with one-based port numbers.
    pub fn entry(&self, row: usize, col: usize) -> Phasor {
        self.zmatrix[row - 1][col - 1]
    }

    /// `Z * I` for a full set of port currents.
    pub fn apply(&self, i: &[Phasor; 4]) -> [Phasor; 4] {
        let mut v = [Phasor::new(0.0, 0.0); 4];
        for (row, out) in self.zmatrix.iter().zip(v.iter_mut()) {
            *out = row.iter().zip(i).map(|(z, c)| z * c).sum();
        }
        v
    }
}

/// Port voltages and currents satisfying `V = Z I` and every boundary
/// condition.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    pub v: [Phasor; 4],
    pub i: [Phasor; 4],
    /// `½ Re(V I*)` flowing into the network at each port. Negative at a
    /// passive load, which absorbs power.
    pub port_power: [f64; 4],
    /// Total power absorbed by passive terminations.
    pub load_power: f64,
    passive: [bool; 4],
}

impl NetworkSolution {
    pub fn voltage(&self, port: Port) -> Phasor {
        self.v[port.index()]
    }

    pub fn current(&self, port: Port) -> Phasor {
        self.i[port.index()]
    }

    /// Sum of power delivered by the non-passive ports.
    pub fn source_power(&self) -> f64 {
        self.port_power
            .iter()
            .zip(&self.passive)
            .filter(|(_, &p)| !p)
            .map(|(w, _)| w)
            .sum()
    }
}

/// Solves the coupler for all port voltages and currents.
///
/// Each port contributes one row to a 4×4 complex system in the port
/// currents: a current source fixes `I_k`, a voltage source fixes
/// `(Z I)_k`, and a passive load enforces `(Z I)_k + z I_k = 0`.
pub fn solve(
    net: &CouplerNetwork,
    excitations: &[PortExcitation; 4],
) -> Result<NetworkSolution, NetworkError> {
    let zero = Phasor::new(0.0, 0.0);
    let mut passive = [false; 4];
    for (k, ex) in excitations.iter().enumerate() {
        let val = match *ex {
            PortExcitation::CurrentSource(v) | PortExcitation::VoltageSource(v) => v,
            PortExcitation::PassiveLoad(z) => {
                if !(z.re > 0.0) || !z.im.is_finite() || !z.re.is_finite() {
                    return Err(NetworkError::NonPassiveLoad { port: k + 1, z });
                }
                passive[k] = true;
                z
            }
        };
        if !(val.re.is_finite() && val.im.is_finite()) {
            return Err(NetworkError::NonFinite(k + 1));
        }
    }
    if passive.iter().all(|&p| p) {
        return Err(NetworkError::NoSource);
    }

    let mut a = [[zero; 4]; 4];
    let mut b = [zero; 4];
    for (k, ex) in excitations.iter().enumerate() {
        match *ex {
            PortExcitation::CurrentSource(i) => {
                a[k][k] = Phasor::new(1.0, 0.0);
                b[k] = i;
            }
            PortExcitation::VoltageSource(v) => {
                a[k] = net.zmatrix[k];
                b[k] = v;
            }
            PortExcitation::PassiveLoad(z) => {
                a[k] = net.zmatrix[k];
                a[k][k] += z;
            }
        }
    }
    let i = solve_dense(a, b).ok_or(NetworkError::Degenerate)?;
    let v = net.apply(&i);
    let mut port_power = [0.0; 4];
    for k in 0..4 {
        port_power[k] = 0.5 * (v[k] * i[k].conj()).re;
    }
    let load_power = -port_power
        .iter()
        .zip(&passive)
        .filter(|(_, &p)| p)
        .map(|(w, _)| w)
        .sum::<f64>();
    Ok(NetworkSolution {
        v,
        i,
        port_power,
        load_power,
        passive,
    })
}

/// Gaussian elimination with partial pivoting on a 4×4 complex system.
fn solve_dense(mut a: [[Phasor; 4]; 4], mut b: [Phasor; 4]) -> Option<[Phasor; 4]> {
    const N: usize = 4;
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&r, &s| a[r][col].norm().total_cmp(&a[s][col].norm()))
            .unwrap_or(col);
        if a[pivot][col].norm() <= PIVOT_TOLERANCE * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let factor = a[row][col] / a[col][col];
            if factor.norm() == 0.0 {
                continue;
            }
            for k in col..N {
                let delta = factor * a[col][k];
                a[row][k] -= delta;
            }
            let delta = factor * b[col];
            b[row] -= delta;
        }
    }
    let mut x = [Phasor::new(0.0, 0.0); N];
    for row in (0..N).rev() {
        let tail: Phasor = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// `V / I` at a port, or [`NetworkError::PortOff`] when the port carries no
/// current (rendered as an open circuit by callers).
pub fn port_impedance(sol: &NetworkSolution, port: Port) -> Result<Phasor, NetworkError> {
    port_impedance_with_tolerance(sol, port, OFF_CURRENT_TOLERANCE)
}

pub fn port_impedance_with_tolerance(
    sol: &NetworkSolution,
    port: Port,
    tolerance: f64,
) -> Result<Phasor, NetworkError> {
    let i = sol.current(port);
    if i.norm() <= tolerance {
        return Err(NetworkError::PortOff(port.number()));
    }
    Ok(sol.voltage(port) / i)
}

/// Relative mismatch between power delivered by the sources and power
/// absorbed by the passive ports.
pub fn power_balance(sol: &NetworkSolution) -> f64 {
    (sol.source_power() - sol.load_power).abs() / sol.load_power.max(POWER_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Phasor {
        Phasor::new(re, im)
    }

    fn matched_currents(ic: f64, ib1: f64, ib2: f64, phi: f64) -> [PortExcitation; 4] {
        [
            PortExcitation::PassiveLoad(c(1.0, 0.0)),
            PortExcitation::CurrentSource(c(ib1, 0.0)),
            PortExcitation::CurrentSource(c(0.0, ic) * Phasor::from_polar(1.0, phi)),
            PortExcitation::CurrentSource(c(0.0, -ib2)),
        ]
    }

    #[test]
    fn ideal_entries() {
        let net = build_ideal_coupler(1.0).unwrap();
        assert_eq!(net.entry(1, 3), c(0.0, 1.0));
        assert_relative_eq!(net.entry(1, 4).im, -std::f64::consts::SQRT_2);
        assert_eq!(net.entry(1, 4).re, 0.0);
        for (r, s) in [(1, 1), (1, 2), (2, 2)] {
            assert_eq!(net.entry(r, s), c(0.0, 0.0));
        }
        let net50 = build_ideal_coupler(50.0).unwrap();
        assert_relative_eq!(net50.entry(2, 3).im, -70.71, epsilon = 5e-3);
    }

    #[test]
    fn rejects_bad_reference() {
        assert!(build_ideal_coupler(0.0).is_err());
        assert!(build_ideal_coupler(-1.0).is_err());
        assert!(build_ideal_coupler(f64::NAN).is_err());
    }

    #[test]
    fn ca_alone_sees_reference() {
        let net = build_ideal_coupler(1.0).unwrap();
        let sol = solve(&net, &matched_currents(0.25, 0.0, 0.0, 0.0)).unwrap();
        let z = port_impedance(&sol, Port::Ca).unwrap();
        assert_relative_eq!(z.re, 1.0, epsilon = 1e-12);
        assert!(z.im.abs() < 1e-12);
        assert_relative_eq!(sol.voltage(Port::Output).norm(), 0.25, epsilon = 1e-12);
        assert_relative_eq!(sol.port_power[2], 0.03125, epsilon = 1e-14);
        assert_relative_eq!(sol.load_power, 0.03125, epsilon = 1e-14);
        assert!(matches!(
            port_impedance(&sol, Port::Ba1),
            Err(NetworkError::PortOff(2))
        ));
    }

    #[test]
    fn homogeneous_solution_is_zero() {
        let net = build_ideal_coupler(1.0).unwrap();
        let sol = solve(&net, &matched_currents(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert!(sol.v.iter().chain(&sol.i).all(|p| p.norm() == 0.0));
        assert_eq!(power_balance(&sol), 0.0);
    }

    #[test]
    fn voltage_driven_carrier_sees_inverted_load() {
        let net = build_ideal_coupler(1.0).unwrap();
        let sol = solve(
            &net,
            &[
                PortExcitation::PassiveLoad(c(2.0, 0.0)),
                PortExcitation::OFF,
                PortExcitation::VoltageSource(c(0.17678, 0.0)),
                PortExcitation::OFF,
            ],
        )
        .unwrap();
        let z = port_impedance(&sol, Port::Ca).unwrap();
        assert_relative_eq!(z.re, 0.5, epsilon = 1e-12);
        assert!(z.im.abs() < 1e-12);
    }

    #[test]
    fn ba1_impedance_at_full_drive() {
        let net = build_ideal_coupler(1.0).unwrap();
        let sol = solve(&net, &matched_currents(0.3914, 0.4, 0.3, 0.0)).unwrap();
        let z = port_impedance(&sol, Port::Ba1).unwrap();
        assert_relative_eq!(z.re, 2.1338, epsilon = 1e-4);
        assert!(z.im.abs() < 1e-12);
    }

    #[test]
    fn rejects_all_passive_and_non_passive() {
        let net = build_ideal_coupler(1.0).unwrap();
        let load = PortExcitation::PassiveLoad(c(1.0, 0.0));
        assert_eq!(solve(&net, &[load; 4]), Err(NetworkError::NoSource));
        let bad = [
            PortExcitation::PassiveLoad(c(-1.0, 0.0)),
            PortExcitation::OFF,
            PortExcitation::OFF,
            PortExcitation::OFF,
        ];
        assert!(matches!(
            solve(&net, &bad),
            Err(NetworkError::NonPassiveLoad { port: 1, .. })
        ));
    }

    #[test]
    fn singular_boundaries_are_reported() {
        // Ports 1 and 2 only couple to ports 3 and 4; fixing both voltages
        // while 3 and 4 are current-driven leaves I1, I2 undetermined.
        let net = build_ideal_coupler(1.0).unwrap();
        let ex = [
            PortExcitation::VoltageSource(c(1.0, 0.0)),
            PortExcitation::VoltageSource(c(0.0, 1.0)),
            PortExcitation::OFF,
            PortExcitation::OFF,
        ];
        assert_eq!(solve(&net, &ex), Err(NetworkError::Degenerate));
    }
}
