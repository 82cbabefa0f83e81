use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid space shape: {0}")]
    InvalidShape(String),

    #[error("qubit index {index} out of range for {n_qubits} qubit(s)")]
    QubitIndexOutOfRange { index: usize, n_qubits: usize },

    #[error("photon number {photons} outside truncation (n_fock = {n_fock})")]
    PhotonOutOfRange { photons: usize, n_fock: usize },

    #[error("label has {got} qubit state(s), space has {expected}")]
    LabelMismatch { expected: usize, got: usize },

    /// Every violated invariant, not just the first one found.
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("matrix is not Hermitian (max |M - M^dag| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("sweep too coarse to track levels between points {index} and {next}: best overlap^2 = {overlap:.3}")]
    SweepTooCoarse {
        index: usize,
        next: usize,
        overlap: f64,
    },

    #[error("no gap minimum inside bracket ({lo}, {hi}); best point sits on the edge at {at}")]
    NoMinimumInBracket { lo: f64, hi: f64, at: f64 },

    #[error("cannot follow target states: {0}")]
    TrackingFailure(String),

    #[error("initial and final states are not degenerate (|E_i - E_f| = {mismatch:e})")]
    NotResonant { mismatch: f64 },

    #[error("virtual path passes through {state}, which is degenerate with the initial state")]
    DegenerateIntermediate { state: String },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("density matrix invariant violated at t = {t}: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("initial state has weight {outside:e} outside the retained eigenbasis")]
    OutsideRetainedBasis { outside: f64 },

    #[error("pi-pulse calibration failed: best transfer {transfer:.4} is below {threshold}")]
    CalibrationFailed { transfer: f64, threshold: f64 },

    #[error("time grid must be non-empty and ascending")]
    BadTimeGrid,
}
