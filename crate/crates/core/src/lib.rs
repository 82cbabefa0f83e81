//! Simulation of N two-level atoms ultrastrongly coupled to a single resonator
//! mode: exact spectra and avoided crossings, effective couplings from virtual
//! paths, and master-equation dynamics with dressed jump operators.

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
mod ode;
pub mod perturbation;
pub mod spectral;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use dynamics::{
    calibrate_pi_pulse, evolve, full_protocol, ghz_fidelity, joint_absorption, lindblad_rhs,
    locate_resonance, Calibration, CalibrationOptions, DensityMatrix, EvolveOptions, GhzResult,
    JointRun, ProtocolOptions, ProtocolRun, Resonance, TrajectoryRecord,
};
pub use error::{Error, Result};
pub use hilbert::{
    annihilation, bare_state, creation, field_quadrature, number, pauli, BareLabel, CMatrix,
    CVector, OperatorMatrix, PauliKind, QubitState, SpaceShape, StateVector, C64,
};
pub use model::{
    drive_envelope, drive_hamiltonian, rwa_hamiltonian, static_hamiltonian, PulseSpec, SystemConfig,
};
pub use perturbation::{
    channels, compare_with_exact, effective_coupling_analytic, effective_coupling_path_sum,
    enumerate_paths, CouplingComparison, CouplingSource, EffectiveCoupling, PathContribution,
};
pub use spectral::{
    diagonalize, dressed_operators, find_anticrossing, identify_state, sweep_spectrum,
    AnticrossingResult, DressedPair, Spectrum, SpectrumSweep, SweepOptions,
};
