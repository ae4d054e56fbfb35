//! Behavioral simulator and reconfiguration planner for a hybrid
//! asymmetrical load-modulated balanced amplifier.
//!
//! The amplifier combines a carrier (CA) and two balanced amplifiers (BA1,
//! BA2) through a four-port quadrature coupler terminated in the output load.
//! Port 1 is the load, port 2 BA1, port 3 the CA and port 4 BA2.

pub mod device;
pub mod engine;
pub mod network;
pub mod par;
pub mod reconfig;
pub mod tlfit;

pub use device::{DeviceError, DeviceProfile, Region, RegionBoundaries, Role};
pub use engine::{
    ArchitectureConfig, ArchitectureParams, BaPort, Device, EngineError, Mode, SweepPoint,
    SweepResult,
};
pub use network::{CouplerNetwork, NetworkError, Phasor, Port, PortExcitation};
pub use par::Execution;
