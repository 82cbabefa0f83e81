//! Static and driven Hamiltonians of N qubits coupled to one resonator mode.
//!
//! Units: `hbar = 1`. Frequencies are plain numbers; the reference
//! configurations measure everything in units of `omega_q = 1`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, field_quadrature, number, pauli, BareLabel, OperatorMatrix, PauliKind,
    SpaceShape, C64,
};

/// Kerr coefficient used unless a config says otherwise, in units of `omega_q`.
/// It has to beat the pulse bandwidth `1/tau` while staying well below `omega_q`.
pub const DEFAULT_KERR: f64 = 0.05;

pub const DEFAULT_N_FOCK: usize = 20;

/// Cavity and qubit loss rate quoted in the body text.
pub const LOSS_RATE_TEXT: f64 = 3e-5;

/// Loss rate quoted in the dynamics figure caption; differs from the text.
pub const LOSS_RATE_CAPTION: f64 = 4e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_qubits: usize,
    pub omega_q: f64,
    pub omega_c: f64,
    /// Per-qubit coupling rates `lambda_i`.
    pub lambdas: Vec<f64>,
    /// Symmetry-breaking angle in radians.
    pub theta: f64,
    /// Kerr coefficient of `mu a^dag^2 a^2`.
    pub mu: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub n_fock: usize,
}

impl SystemConfig {
    /// Lossless reference setup: `lambda = 0.1`, `theta = pi/6`, resonator at
    /// `n_qubits * omega_q`, Kerr on, `omega_q = 1`.
    pub fn reference(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            omega_q: 1.0,
            omega_c: n_qubits as f64,
            lambdas: vec![0.1; n_qubits],
            theta: PI / 6.0,
            mu: DEFAULT_KERR,
            kappa: 0.0,
            gamma: 0.0,
            n_fock: DEFAULT_N_FOCK,
        }
    }

    pub fn with_omega_c(mut self, omega_c: f64) -> Self {
        self.omega_c = omega_c;
        self
    }

    /// Same coupling for every qubit.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambdas = vec![lambda; self.n_qubits];
        self
    }

    pub fn with_lambdas(mut self, lambdas: Vec<f64>) -> Self {
        self.lambdas = lambdas;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_losses(mut self, kappa: f64, gamma: f64) -> Self {
        self.kappa = kappa;
        self.gamma = gamma;
        self
    }

    pub fn with_n_fock(mut self, n_fock: usize) -> Self {
        self.n_fock = n_fock;
        self
    }

    /// `Delta = omega_c - omega_q`
    pub fn detuning(&self) -> f64 {
        self.omega_c - self.omega_q
    }

    /// Collects every violated invariant into one error.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_qubits < 1 {
            problems.push("n_qubits must be >= 1".to_string());
        }
        if self.n_fock < 2 {
            problems.push("n_fock must be >= 2".to_string());
        }
        if !(self.omega_q > 0.0 && self.omega_q.is_finite()) {
            problems.push(format!("omega_q must be positive, got {}", self.omega_q));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            problems.push(format!("omega_c must be positive, got {}", self.omega_c));
        }
        if self.lambdas.len() != self.n_qubits {
            problems.push(format!(
                "lambdas has {} entries for {} qubit(s)",
                self.lambdas.len(),
                self.n_qubits
            ));
        }
        for (i, l) in self.lambdas.iter().enumerate() {
            if !(*l >= 0.0 && l.is_finite()) {
                problems.push(format!("lambdas[{i}] must be >= 0, got {l}"));
            }
        }
        if !self.theta.is_finite() {
            problems.push("theta must be finite".to_string());
        }
        for (name, v) in [
            ("mu", self.mu),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be >= 0, got {v}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    pub fn shape(&self) -> Result<SpaceShape> {
        self.validate()?;
        SpaceShape::new(self.n_qubits, self.n_fock)
    }

    /// Energy of a bare state under `H_q + H_c + H_K`. The Kerr part is
    /// diagonal in the bare basis, so it belongs to the unperturbed energies.
    pub fn bare_energy(&self, label: &BareLabel) -> f64 {
        let n = label.photons as f64;
        0.5 * self.omega_q * label.total_sz() + self.omega_c * n + self.mu * n * (n - 1.0)
    }
}

/// `(omega_q/2) sum_i sigma_z^(i) + omega_c a^dag a + mu a^dag^2 a^2`
fn bare_part(config: &SystemConfig, shape: SpaceShape) -> Result<OperatorMatrix> {
    let mut h = number(shape).scaled(config.omega_c);
    for i in 0..shape.n_qubits() {
        h = &h + &pauli(shape, i, PauliKind::Z)?.scaled(0.5 * config.omega_q);
    }
    if config.mu != 0.0 {
        let n = number(shape);
        // a^dag^2 a^2 = n (n - 1)
        let kerr = &(&n * &n) - &n;
        h = &h + &kerr.scaled(config.mu);
    }
    Ok(h)
}

/// The light-matter coupling `X sum_i lambda_i (cos theta sigma_x^(i) + sin theta sigma_z^(i))`.
pub fn interaction(config: &SystemConfig) -> Result<OperatorMatrix> {
    let shape = config.shape()?;
    let (s, c) = config.theta.sin_cos();
    let mut qubit_sum = OperatorMatrix::zeros(shape);
    for (i, &l) in config.lambdas.iter().enumerate() {
        let term = &pauli(shape, i, PauliKind::X)?.scaled(l * c)
            + &pauli(shape, i, PauliKind::Z)?.scaled(l * s);
        qubit_sum = &qubit_sum + &term;
    }
    Ok(&field_quadrature(shape) * &qubit_sum)
}

/// Full static Hamiltonian including the Kerr term.
pub fn static_hamiltonian(config: &SystemConfig) -> Result<OperatorMatrix> {
    let shape = config.shape()?;
    Ok(&bare_part(config, shape)? + &interaction(config)?)
}

/// Static Hamiltonian with every counter-rotating term dropped
/// (`sigma_+ a^dag`, `sigma_- a`, `sigma_z a`, `sigma_z a^dag`).
pub fn rwa_hamiltonian(config: &SystemConfig) -> Result<OperatorMatrix> {
    let shape = config.shape()?;
    let a = annihilation(shape);
    let ad = a.adjoint();
    let c = config.theta.cos();
    let mut h = bare_part(config, shape)?;
    for (i, &l) in config.lambdas.iter().enumerate() {
        let sp = pauli(shape, i, PauliKind::Plus)?;
        let sm = pauli(shape, i, PauliKind::Minus)?;
        let jc = &(&sp * &a) + &(&sm * &ad);
        h = &h + &jc.scaled(l * c);
    }
    Ok(h)
}

/// `exp(i pi (a^dag a + sum_i sigma_+ sigma_-))`, diagonal in the bare basis.
pub fn parity_operator(shape: SpaceShape) -> OperatorMatrix {
    let mut m = OperatorMatrix::zeros(shape).into_matrix();
    for (i, label) in shape.labels().enumerate() {
        let excitations = label.photons + label.n_excited();
        m[(i, i)] = C64::new(if excitations % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
    }
    OperatorMatrix::new(shape, m).expect("same shape")
}

/// Gaussian pulse driving the resonator through `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    /// Pulse area scalar `A`; the envelope integrates to it.
    pub amplitude: f64,
    pub center_time: f64,
    /// Standard deviation `tau` of the Gaussian.
    pub width: f64,
    pub carrier_frequency: f64,
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.width > 0.0 && self.width.is_finite()) {
            problems.push(format!("pulse width must be > 0, got {}", self.width));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            problems.push(format!(
                "pulse amplitude must be >= 0, got {}",
                self.amplitude
            ));
        }
        if !self.center_time.is_finite() || !self.carrier_frequency.is_finite() {
            problems.push("pulse center and carrier must be finite".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    /// Peak envelope value `A / (tau sqrt(2 pi))`.
    pub fn peak(&self) -> f64 {
        self.amplitude / (self.width * (2.0 * PI).sqrt())
    }
}

/// `E(t) = A exp(-(t - t0)^2 / (2 tau^2)) / (tau sqrt(2 pi))`
pub fn drive_envelope(t: f64, pulse: &PulseSpec) -> f64 {
    let x = (t - pulse.center_time) / pulse.width;
    pulse.peak() * (-0.5 * x * x).exp()
}

/// Prefactor of `X` in the drive Hamiltonian, `E(t) cos(omega t)`.
pub fn drive_coefficient(t: f64, pulse: &PulseSpec) -> f64 {
    drive_envelope(t, pulse) * (pulse.carrier_frequency * t).cos()
}

/// `H_d(t) = E(t) cos(omega t) (a + a^dag)`
pub fn drive_hamiltonian(t: f64, pulse: &PulseSpec, shape: SpaceShape) -> OperatorMatrix {
    field_quadrature(shape).scaled(drive_coefficient(t, pulse))
}
