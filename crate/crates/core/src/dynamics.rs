//! Master-equation dynamics with dressed jump operators, pi-pulse
//! calibration, and the joint-absorption observables.
//!
//! Propagation happens in the eigenbasis of the static Hamiltonian, truncated
//! to its lowest `n_levels` states, and in the interaction picture with
//! respect to it: `rho~_jk = rho_jk exp(i (E_j - E_k) t)`. Without drive or
//! losses the right-hand side is then exactly zero. Dressed lowering operators
//! only connect a level to lower ones, so their products are exact inside the
//! truncated block; only the drive `X` loses couplings to discarded levels.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{
    field_quadrature, pauli, BareLabel, CMatrix, CVector, OperatorMatrix, PauliKind, SpaceShape,
    StateVector, C64, ONE, ZERO,
};
use crate::model::{drive_coefficient, static_hamiltonian, PulseSpec, SystemConfig};
use crate::ode::{add_scaled, Dp5, StepControl};
use crate::perturbation::default_bracket;
use crate::spectral::{
    diagonalize, find_anticrossing, golden_section_min, identify_state, positive_frequency_part,
    AnticrossingResult, Spectrum,
};

pub use crate::ode::IntegrationStats;

pub const HERMITICITY_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-8;
/// Most negative eigenvalue tolerated.
pub const POSITIVITY_TOL: f64 = 1e-7;

/// The drive is switched off beyond this many widths from the pulse centre,
/// where the envelope is below `1.6e-8` of its peak.
pub const PULSE_CUTOFF_WIDTHS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    shape: SpaceShape,
    entries: CMatrix,
}

impl DensityMatrix {
    pub fn new(shape: SpaceShape, entries: CMatrix) -> Result<Self> {
        let d = shape.dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "density matrix is {}x{}, space dimension is {d}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { shape, entries })
    }

    /// `|psi><psi|` for the normalized state.
    pub fn pure(state: &StateVector) -> Self {
        let v = state.clone().normalized();
        let a = v.amplitudes();
        Self {
            shape: state.shape(),
            entries: a * a.adjoint(),
        }
    }

    pub fn shape(&self) -> SpaceShape {
        self.shape
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries)
    }

    /// Fails with the first violated invariant.
    pub fn check(&self, t: f64) -> Result<()> {
        check_invariants(&self.entries, t)
    }

    /// `Tr(rho O)`
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        if op.shape() != self.shape {
            return Err(Error::ShapeMismatch(
                "operator and density matrix live on different spaces".into(),
            ));
        }
        Ok((&self.entries * op.matrix()).trace())
    }

    /// `<psi|rho|psi>`
    pub fn population(&self, state: &StateVector) -> f64 {
        let a = state.amplitudes();
        (a.adjoint() * &self.entries * a)[(0, 0)].re
    }
}

fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn check_invariants(m: &CMatrix, t: f64) -> Result<()> {
    let dev = hermiticity_deviation(m);
    if dev > HERMITICITY_TOL {
        return Err(Error::InvariantViolation {
            t,
            what: format!("Hermiticity deviation {dev:e}"),
        });
    }
    let tr = m.trace();
    if (tr - ONE).norm() > TRACE_TOL {
        return Err(Error::InvariantViolation {
            t,
            what: format!("trace {tr}"),
        });
    }
    let min = min_eigenvalue(m);
    if min < -POSITIVITY_TOL {
        return Err(Error::InvariantViolation {
            t,
            what: format!("minimum eigenvalue {min:e}"),
        });
    }
    Ok(())
}

fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for r in 0..n {
        m[(r, r)] = C64::new(m[(r, r)].re, 0.0);
        for c in r + 1..n {
            let v = 0.5 * (m[(r, c)] + m[(c, r)].conj());
            m[(r, c)] = v;
            m[(c, r)] = v.conj();
        }
    }
}

/// `D[O] rho = O rho O^dag - (O^dag O rho + rho O^dag O) / 2`
fn dissipator(o: &CMatrix, o_dag: &CMatrix, o_dag_o: &CMatrix, rho: &CMatrix) -> CMatrix {
    let mut out = o * rho * o_dag;
    let anti = o_dag_o * rho + rho * o_dag_o;
    add_scaled(&mut out, -0.5, &anti);
    out
}

/// `i [rho, H] + kappa D[X+] rho + gamma sum_i D[C_i+] rho`
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    h: &OperatorMatrix,
    x_plus: &OperatorMatrix,
    c_plus: &[OperatorMatrix],
    kappa: f64,
    gamma: f64,
) -> Result<CMatrix> {
    let shape = rho.shape;
    if h.shape() != shape || x_plus.shape() != shape || c_plus.iter().any(|c| c.shape() != shape) {
        return Err(Error::ShapeMismatch(
            "all operators must live on the density matrix's space".into(),
        ));
    }
    let r = &rho.entries;
    let hm = h.matrix();
    let mut out = (r * hm - hm * r) * C64::new(0.0, 1.0);
    let mut add = |rate: f64, o: &CMatrix| {
        if rate != 0.0 {
            let od = o.adjoint();
            let odo = &od * o;
            add_scaled(&mut out, rate, &dissipator(o, &od, &odo, r));
        }
    };
    add(kappa, x_plus.matrix());
    for c in c_plus {
        add(gamma, c.matrix());
    }
    Ok(out)
}

struct Jump {
    rate: f64,
    op: CMatrix,
    op_dag: CMatrix,
    op_dag_op: CMatrix,
}

/// Static Hamiltonian eigenbasis truncated to its lowest `n_levels` states,
/// with the dressed operators needed for propagation and observables.
pub struct DressedFrame {
    spectrum: Spectrum,
    n_levels: usize,
    /// `E_j - E_0` for the retained levels.
    energies: Vec<f64>,
    /// Bare-to-eigenbasis columns of the retained levels (`dim x K`).
    basis: CMatrix,
    x: CMatrix,
    x_plus: CMatrix,
    c_plus: Vec<CMatrix>,
}

impl DressedFrame {
    pub fn new(config: &SystemConfig, n_levels: usize) -> Result<Self> {
        Self::from_hamiltonian(&static_hamiltonian(config)?, n_levels)
    }

    /// Frame of an arbitrary static Hamiltonian, e.g. a rotating-wave one.
    pub fn from_hamiltonian(h: &OperatorMatrix, n_levels: usize) -> Result<Self> {
        let shape = h.shape();
        let spectrum = diagonalize(h)?;
        if n_levels < 2 || n_levels > shape.dim() {
            return Err(Error::InvalidConfig(vec![format!(
                "n_levels must be in 2..={}, got {n_levels}",
                shape.dim()
            )]));
        }
        let k = n_levels;
        let basis = spectrum.eigenvectors().columns(0, k).into_owned();
        let crop = |m: CMatrix| m.view((0, 0), (k, k)).into_owned();
        let xq = field_quadrature(shape);
        let x = crop(spectrum.to_eigenbasis(xq.matrix()));
        let x_plus = crop(positive_frequency_part(&spectrum, xq.matrix()));
        let c_plus = (0..shape.n_qubits())
            .map(|i| {
                let sx = pauli(shape, i, PauliKind::X)?;
                Ok(crop(positive_frequency_part(&spectrum, sx.matrix())))
            })
            .collect::<Result<Vec<_>>>()?;
        let e0 = spectrum.energy(0);
        let energies = (0..k).map(|j| spectrum.energy(j) - e0).collect();
        Ok(Self {
            spectrum,
            n_levels: k,
            energies,
            basis,
            x,
            x_plus,
            c_plus,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    /// `omega_{j,0}` of the retained levels.
    pub fn transitions(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenbasis block of a bare-basis density matrix, with the weight that
    /// falls outside the retained levels.
    pub fn project(&self, rho: &DensityMatrix) -> Result<(CMatrix, f64)> {
        if rho.shape != self.spectrum.shape() {
            return Err(Error::ShapeMismatch(
                "density matrix and frame live on different spaces".into(),
            ));
        }
        let block = self.basis.adjoint() * &rho.entries * &self.basis;
        let outside = (rho.trace() - block.trace()).re;
        Ok((block, outside))
    }

    /// Bare-basis density matrix of an eigenbasis block.
    pub fn lift(&self, block: &CMatrix) -> DensityMatrix {
        DensityMatrix {
            shape: self.spectrum.shape(),
            entries: &self.basis * block * self.basis.adjoint(),
        }
    }

    fn phases(&self, t: f64) -> Vec<C64> {
        self.energies
            .iter()
            .map(|e| C64::from_polar(1.0, e * t))
            .collect()
    }

    fn observables(&self) -> Observables {
        let gram = |m: &CMatrix| m.adjoint() * m;
        let c1 = &self.c_plus[0];
        let gq = if self.c_plus.len() >= 2 {
            gram(&(&self.c_plus[1] * c1))
        } else {
            CMatrix::zeros(self.n_levels, self.n_levels)
        };
        Observables {
            photon: gram(&self.x_plus),
            qubits: self.c_plus.iter().map(gram).collect(),
            gq,
            gc: gram(&(&self.x_plus * &self.x_plus)),
            gqc: gram(&(&self.x_plus * c1)),
        }
    }
}

struct Observables {
    photon: CMatrix,
    qubits: Vec<CMatrix>,
    gq: CMatrix,
    gc: CMatrix,
    gqc: CMatrix,
}

/// `Tr(rho M)`, real part.
fn expect(rho: &CMatrix, m: &CMatrix) -> f64 {
    let mut s = ZERO;
    for r in 0..rho.nrows() {
        for c in 0..rho.ncols() {
            s += rho[(r, c)] * m[(c, r)];
        }
    }
    s.re
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Retained eigenstates of the static Hamiltonian.
    pub n_levels: usize,
    pub max_steps: usize,
    /// Sample times at which the full density matrix is stored.
    pub checkpoints: Vec<f64>,
    /// Check trace, Hermiticity and positivity at every sample.
    pub check_invariants: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            n_levels: 16,
            max_steps: 20_000_000,
            checkpoints: Vec::new(),
            check_invariants: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `<X- X+>`
    pub photon_xx: Vec<f64>,
    /// `<C_i- C_i+>`, indexed `[qubit][sample]`.
    pub qubit_excitations: Vec<Vec<f64>>,
    /// `<C_1- C_2- C_2+ C_1+>`
    pub gq2: Vec<f64>,
    /// `<(X-)^2 (X+)^2>`
    pub gc2: Vec<f64>,
    /// `<C_1- X- X+ C_1+>`
    pub gqc2: Vec<f64>,
    /// `<H_static> - E_0`
    pub energy: Vec<f64>,
    /// Retained-level populations, indexed `[sample][level]`.
    pub populations: Vec<Vec<f64>>,
    pub checkpoints: Vec<(f64, DensityMatrix)>,
    pub stats: IntegrationStats,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn qubit_excitation(&self, qubit: usize) -> &[f64] {
        &self.qubit_excitations[qubit]
    }

    pub fn checkpoint(&self, t: f64) -> Option<&DensityMatrix> {
        self.checkpoints
            .iter()
            .find(|(tc, _)| *tc == t)
            .map(|(_, r)| r)
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty()
        || t_grid.iter().any(|t| !t.is_finite())
        || t_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::BadTimeGrid);
    }
    Ok(())
}

/// Propagates `rho0` (bare basis) and samples the observables at `t_grid`.
///
/// The drive, if any, adds `E(t) cos(omega_d t) X` to the static Hamiltonian;
/// the jump operators are the drive-free dressed ones.
pub fn evolve(
    config: &SystemConfig,
    rho0: &DensityMatrix,
    pulse: Option<&PulseSpec>,
    t_grid: &[f64],
    options: &EvolveOptions,
) -> Result<TrajectoryRecord> {
    let frame = DressedFrame::new(config, options.n_levels)?;
    evolve_in_frame(&frame, config, rho0, pulse, t_grid, options)
}

/// [`evolve`] with a prebuilt frame, for repeated runs at one configuration.
pub fn evolve_in_frame(
    frame: &DressedFrame,
    config: &SystemConfig,
    rho0: &DensityMatrix,
    pulse: Option<&PulseSpec>,
    t_grid: &[f64],
    options: &EvolveOptions,
) -> Result<TrajectoryRecord> {
    check_grid(t_grid)?;
    if let Some(p) = pulse {
        p.validate()?;
    }
    if options.checkpoints.iter().any(|c| !t_grid.contains(c)) {
        return Err(Error::InvalidConfig(vec![
            "checkpoint times must be sample times".into(),
        ]));
    }
    rho0.check(t_grid[0])?;
    let (block, outside) = frame.project(rho0)?;
    if outside > 1e-6 {
        return Err(Error::OutsideRetainedBasis { outside });
    }
    let k = frame.n_levels;
    let t0 = t_grid[0];
    // move to the interaction picture at t0
    let p0 = frame.phases(t0);
    let start = CMatrix::from_fn(k, k, |r, c| block[(r, c)] * p0[r] * p0[c].conj());

    let jumps: Vec<Jump> = std::iter::once((config.kappa, &frame.x_plus))
        .chain(frame.c_plus.iter().map(|c| (config.gamma, c)))
        .filter(|(rate, _)| *rate != 0.0)
        .map(|(rate, o)| {
            let op_dag = o.adjoint();
            Jump {
                rate,
                op_dag_op: &op_dag * o,
                op: o.clone(),
                op_dag,
            }
        })
        .collect();
    let pulse = pulse.copied();
    let window = pulse.map(|p| {
        (
            p.center_time - PULSE_CUTOFF_WIDTHS * p.width,
            p.center_time + PULSE_CUTOFF_WIDTHS * p.width,
        )
    });
    let drive_at = move |t: f64| -> f64 {
        match (pulse, window) {
            (Some(p), Some((lo, hi))) if t >= lo && t <= hi => drive_coefficient(t, &p),
            _ => 0.0,
        }
    };

    let rhs = |t: f64, rt: &CMatrix| -> CMatrix {
        let c = drive_at(t);
        if c == 0.0 && jumps.is_empty() {
            return CMatrix::zeros(k, k);
        }
        let p = frame.phases(t);
        let rho = CMatrix::from_fn(k, k, |r, s| rt[(r, s)] * p[r].conj() * p[s]);
        let mut out = CMatrix::zeros(k, k);
        if c != 0.0 {
            let xr = &frame.x * &rho;
            // -i c [X, rho] with [X, rho] = X rho - (X rho)^dag
            out += (&xr - xr.adjoint()) * C64::new(0.0, -c);
        }
        for j in &jumps {
            add_scaled(
                &mut out,
                j.rate,
                &dissipator(&j.op, &j.op_dag, &j.op_dag_op, &rho),
            );
        }
        CMatrix::from_fn(k, k, |r, s| out[(r, s)] * p[r] * p[s].conj())
    };
    let control = StepControl {
        rtol: options.rtol,
        atol: options.atol,
        h_max: f64::INFINITY,
        max_steps: options.max_steps,
    };
    let mut stepper = Dp5::new(rhs, hermitize, t0, start, control);

    // drive switch-on/off instants become step boundaries
    let mut breaks: Vec<f64> = window
        .map(|(lo, hi)| vec![lo, hi])
        .unwrap_or_default()
        .into_iter()
        .filter(|b| *b > t0 && *b < t_grid[t_grid.len() - 1])
        .collect();
    breaks.sort_by(f64::total_cmp);

    let obs = frame.observables();
    let nq = frame.c_plus.len();
    let n = t_grid.len();
    let mut rec = TrajectoryRecord {
        times: t_grid.to_vec(),
        photon_xx: Vec::with_capacity(n),
        qubit_excitations: vec![Vec::with_capacity(n); nq],
        gq2: Vec::with_capacity(n),
        gc2: Vec::with_capacity(n),
        gqc2: Vec::with_capacity(n),
        energy: Vec::with_capacity(n),
        populations: Vec::with_capacity(n),
        checkpoints: Vec::new(),
        stats: IntegrationStats::default(),
    };
    let mut next_break = 0;
    for &t in t_grid {
        while next_break < breaks.len() && breaks[next_break] < t {
            stepper.advance_to(breaks[next_break])?;
            next_break += 1;
        }
        stepper.advance_to(t)?;
        let p = frame.phases(t);
        let rt = stepper.y();
        let rho = CMatrix::from_fn(k, k, |r, s| rt[(r, s)] * p[r].conj() * p[s]);
        if options.check_invariants {
            check_invariants(&rho, t)?;
        }
        rec.photon_xx.push(expect(&rho, &obs.photon));
        for (q, m) in obs.qubits.iter().enumerate() {
            rec.qubit_excitations[q].push(expect(&rho, m));
        }
        rec.gq2.push(expect(&rho, &obs.gq));
        rec.gc2.push(expect(&rho, &obs.gc));
        rec.gqc2.push(expect(&rho, &obs.gqc));
        let pops: Vec<f64> = (0..k).map(|j| rho[(j, j)].re).collect();
        rec.energy
            .push(pops.iter().zip(&frame.energies).map(|(p, e)| p * e).sum());
        rec.populations.push(pops);
        if options.checkpoints.contains(&t) {
            rec.checkpoints.push((t, frame.lift(&rho)));
        }
    }
    rec.stats = stepper.stats;
    Ok(rec)
}

/// Configuration moved to the minimum of the `|g..g,1>`/`|e..e,0>` splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Resonance {
    pub config: SystemConfig,
    pub anticrossing: AnticrossingResult,
}

impl Resonance {
    /// `Omega_eff = gap / 2`
    pub fn omega_eff(&self) -> f64 {
        0.5 * self.anticrossing.gap
    }
}

pub fn locate_resonance(config: &SystemConfig, bracket: Option<(f64, f64)>) -> Result<Resonance> {
    let n = config.n_qubits;
    let bracket = bracket.unwrap_or_else(|| default_bracket(config));
    let anticrossing = find_anticrossing(
        config,
        &BareLabel::all_ground(n, 1),
        &BareLabel::all_excited(n, 0),
        bracket,
    )?;
    Ok(Resonance {
        config: config.clone().with_omega_c(anticrossing.omega_c_star),
        anticrossing,
    })
}

/// Joint-absorption run from the `|g..g,1>`-like combination of the two
/// hybridized levels, sampled uniformly in `Omega_eff t / pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointRun {
    pub resonance: Resonance,
    pub record: TrajectoryRecord,
}

pub fn joint_absorption(
    config: &SystemConfig,
    bracket: Option<(f64, f64)>,
    duration_pi: f64,
    n_samples: usize,
    options: &EvolveOptions,
) -> Result<JointRun> {
    if n_samples < 2 || !(duration_pi > 0.0) {
        return Err(Error::BadTimeGrid);
    }
    let resonance = locate_resonance(config, bracket)?;
    let omega = resonance.omega_eff();
    let t_end = duration_pi * PI / omega;
    let grid: Vec<f64> = (0..n_samples)
        .map(|i| t_end * i as f64 / (n_samples - 1) as f64)
        .collect();
    let record = evolve_from_hybrid(&resonance, &grid, options)?;
    Ok(JointRun { resonance, record })
}

fn evolve_from_hybrid(
    resonance: &Resonance,
    grid: &[f64],
    options: &EvolveOptions,
) -> Result<TrajectoryRecord> {
    let cfg = &resonance.config;
    let frame = DressedFrame::new(cfg, options.n_levels)?;
    let start = frame.spectrum().hybrid_state(
        resonance.anticrossing.level_pair,
        &BareLabel::all_ground(cfg.n_qubits, 1),
    )?;
    evolve_in_frame(
        &frame,
        cfg,
        &DensityMatrix::pure(&start),
        None,
        grid,
        options,
    )
}

/// Pulse timing from the splitting of the hybridized pair: width
/// `tau = 1 / (4 omega_kj)`, carrier at the pair's mean transition frequency,
/// centre `PULSE_CUTOFF_WIDTHS` widths after `t = 0`.
pub fn pulse_timing(spectrum: &Spectrum, pair: (usize, usize)) -> (f64, f64, f64) {
    let gap = spectrum.energy(pair.1) - spectrum.energy(pair.0);
    let tau = 1.0 / (4.0 * gap);
    let omega_d = 0.5 * (spectrum.transition(pair.0) + spectrum.transition(pair.1));
    (tau, omega_d, PULSE_CUTOFF_WIDTHS * tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    /// Pulse areas of the coarse scan.
    pub scan: Vec<f64>,
    /// Relative bracket width at which the refinement stops.
    pub rel_tol: f64,
    /// Below this transfer the calibration is an error.
    pub min_transfer: f64,
    /// Samples across the pulse used to track leakage.
    pub n_samples: usize,
    pub evolve: EvolveOptions,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            scan: (1..=10).map(|i| 0.25 * PI * i as f64).collect(),
            rel_tol: 1e-4,
            min_transfer: 0.8,
            n_samples: 121,
            evolve: EvolveOptions {
                check_invariants: false,
                ..EvolveOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub pulse: PulseSpec,
    /// Population of the hybridized pair after the pulse.
    pub transfer: f64,
    /// Peak population of the `|g..g,2>`-like level during the pulse.
    pub leakage: f64,
    pub leakage_level: usize,
    pub level_pair: (usize, usize),
    /// Coarse scan as `(amplitude, transfer)`, in scan order.
    pub scan: Vec<(f64, f64)>,
}

/// Finds the pulse area that moves the most population from the dressed
/// ground state into the hybridized `pair`.
pub fn calibrate_pi_pulse(
    config: &SystemConfig,
    pair: (usize, usize),
    tau: f64,
    omega_d: f64,
    options: &CalibrationOptions,
) -> Result<Calibration> {
    let frame = DressedFrame::new(config, options.evolve.n_levels)?;
    if pair.0 >= pair.1 || pair.1 >= frame.n_levels {
        return Err(Error::InvalidConfig(vec![format!(
            "level pair {pair:?} must be ordered and inside the retained {} levels",
            frame.n_levels
        )]));
    }
    if options.scan.len() < 3 || options.n_samples < 2 {
        return Err(Error::InvalidConfig(vec![
            "calibration needs >= 3 scan points and >= 2 samples".into(),
        ]));
    }
    let n = config.n_qubits;
    let (leakage_level, _) = identify_state(frame.spectrum(), &BareLabel::all_ground(n, 2))?;
    let center = PULSE_CUTOFF_WIDTHS * tau;
    let t_end = 2.0 * center;
    let grid: Vec<f64> = (0..options.n_samples)
        .map(|i| t_end * i as f64 / (options.n_samples - 1) as f64)
        .collect();
    let ground = DensityMatrix::pure(&frame.spectrum().state(0));
    let pulse_with = |a: f64| PulseSpec {
        amplitude: a,
        center_time: center,
        width: tau,
        carrier_frequency: omega_d,
    };
    let outcome = |a: f64| -> Result<(f64, f64)> {
        let rec = evolve_in_frame(
            &frame,
            config,
            &ground,
            Some(&pulse_with(a)),
            &grid,
            &options.evolve,
        )?;
        let last = rec.populations.last().expect("non-empty grid");
        let leak = rec
            .populations
            .iter()
            .map(|p| p.get(leakage_level).copied().unwrap_or(0.0))
            .fold(0.0, f64::max);
        Ok((last[pair.0] + last[pair.1], leak))
    };

    let scan: Vec<(f64, f64)> = options
        .scan
        .par_iter()
        .map(|&a| outcome(a).map(|(tr, _)| (a, tr)))
        .collect::<Result<Vec<_>>>()?;
    let best = scan
        .iter()
        .enumerate()
        .max_by(|x, y| x.1 .1.total_cmp(&y.1 .1).then(y.0.cmp(&x.0)))
        .map(|(i, _)| i)
        .expect("scan is non-empty");
    let lo = if best == 0 { 0.0 } else { scan[best - 1].0 };
    let hi = if best + 1 < scan.len() {
        scan[best + 1].0
    } else {
        2.0 * scan[best].0 - scan[best - 1].0
    };
    let (amp, neg) = golden_section_min(|a| Ok(-outcome(a)?.0), lo, hi, options.rel_tol)?;
    let (transfer, amp) = if -neg >= scan[best].1 {
        (-neg, amp)
    } else {
        (scan[best].1, scan[best].0)
    };
    if transfer < options.min_transfer {
        return Err(Error::CalibrationFailed {
            transfer,
            threshold: options.min_transfer,
        });
    }
    let (_, leakage) = outcome(amp)?;
    Ok(Calibration {
        pulse: pulse_with(amp),
        transfer,
        leakage,
        leakage_level,
        level_pair: pair,
        scan,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOptions {
    pub bracket: Option<(f64, f64)>,
    /// Free evolution after the pulse, in units of `pi / Omega_eff`.
    pub after_pulse_pi: f64,
    pub n_samples: usize,
    pub calibration: CalibrationOptions,
    pub evolve: EvolveOptions,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            bracket: None,
            after_pulse_pi: 2.5,
            n_samples: 801,
            calibration: CalibrationOptions::default(),
            evolve: EvolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub resonance: Resonance,
    pub calibration: Calibration,
    /// End of the pulse window.
    pub pulse_end: f64,
    pub record: TrajectoryRecord,
}

/// Anticrossing search, pi-pulse calibration, then evolution from the dressed
/// ground state through the pulse and the subsequent Rabi oscillations.
pub fn full_protocol(config: &SystemConfig, options: &ProtocolOptions) -> Result<ProtocolRun> {
    if options.n_samples < 2 || !(options.after_pulse_pi > 0.0) {
        return Err(Error::BadTimeGrid);
    }
    let resonance = locate_resonance(config, options.bracket)?;
    let cfg = &resonance.config;
    let frame = DressedFrame::new(cfg, options.evolve.n_levels)?;
    let pair = resonance.anticrossing.level_pair;
    let (tau, omega_d, center) = pulse_timing(frame.spectrum(), pair);
    let calibration = calibrate_pi_pulse(cfg, pair, tau, omega_d, &options.calibration)?;
    let pulse_end = 2.0 * center;
    let t_end = pulse_end + options.after_pulse_pi * PI / resonance.omega_eff();
    let grid: Vec<f64> = (0..options.n_samples)
        .map(|i| t_end * i as f64 / (options.n_samples - 1) as f64)
        .collect();
    let ground = DensityMatrix::pure(&frame.spectrum().state(0));
    let record = evolve_in_frame(
        &frame,
        cfg,
        &ground,
        Some(&calibration.pulse),
        &grid,
        &options.evolve,
    )?;
    Ok(ProtocolRun {
        resonance,
        calibration,
        pulse_end,
        record,
    })
}

/// `max_phi <GHZ_phi| rho |GHZ_phi>` with
/// `|GHZ_phi> = (|a> + e^{i phi} |b>) / sqrt2`, which is
/// `(rho_aa + rho_bb) / 2 + |rho_ab|`. Returns the fidelity and the
/// maximizing phase.
pub fn ghz_overlap(rho: &DensityMatrix, a: &BareLabel, b: &BareLabel) -> Result<(f64, f64)> {
    let ia = a.index(&rho.shape)?;
    let ib = b.index(&rho.shape)?;
    let m = &rho.entries;
    let rab = m[(ia, ib)];
    // <GHZ|rho|GHZ> = ... + Re(e^{i phi} rho_ab): maximal at phi = -arg(rho_ab)
    let fidelity = 0.5 * (m[(ia, ia)].re + m[(ib, ib)].re) + rab.norm();
    Ok((fidelity, -rab.arg()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GhzResult {
    pub fidelity: f64,
    pub phase: f64,
    /// `pi / (4 Omega_eff)`
    pub time: f64,
    pub resonance: Resonance,
}

/// Lossless evolution from the `|g,g,1>`-like state, scored against
/// `(|g,g,1> + e^{i phi}|e,e,0>)/sqrt2` at `t = pi / (4 Omega_eff)`.
pub fn ghz_fidelity(
    config: &SystemConfig,
    bracket: Option<(f64, f64)>,
    options: &EvolveOptions,
) -> Result<GhzResult> {
    let lossless = config.clone().with_losses(0.0, 0.0);
    let resonance = locate_resonance(&lossless, bracket)?;
    let time = PI / (4.0 * resonance.omega_eff());
    let opts = EvolveOptions {
        checkpoints: vec![time],
        ..options.clone()
    };
    let rec = evolve_from_hybrid(&resonance, &[0.0, time], &opts)?;
    let rho = rec.checkpoint(time).expect("checkpoint requested");
    let n = config.n_qubits;
    let (fidelity, phase) = ghz_overlap(
        rho,
        &BareLabel::all_ground(n, 1),
        &BareLabel::all_excited(n, 0),
    )?;
    Ok(GhzResult {
        fidelity,
        phase,
        time,
        resonance,
    })
}

/// Bare-basis pure state helper for tests and callers building initial
/// states by hand.
pub fn pure_state(shape: SpaceShape, amplitudes: &[(BareLabel, C64)]) -> Result<DensityMatrix> {
    let mut v = CVector::zeros(shape.dim());
    for (l, a) in amplitudes {
        v[l.index(&shape)?] += *a;
    }
    Ok(DensityMatrix::pure(&StateVector::new(shape, v)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_state_is_valid() {
        let shape = SpaceShape::new(2, 4).unwrap();
        let rho = pure_state(
            shape,
            &[
                ("g,g,1".parse().unwrap(), C64::new(1.0, 0.0)),
                ("e,e,0".parse().unwrap(), C64::new(0.0, 1.0)),
            ],
        )
        .unwrap();
        rho.check(0.0).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
        let (f, phase) =
            ghz_overlap(&rho, &"g,g,1".parse().unwrap(), &"e,e,0".parse().unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-14);
        // |GHZ_phi> matches (|a> + i|b>)/sqrt2 at phi = pi/2
        assert!((phase - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn invariant_checks_fire() {
        let shape = SpaceShape::new(1, 2).unwrap();
        let mut m = CMatrix::identity(4, 4) * C64::new(0.25, 0.0);
        let ok = DensityMatrix::new(shape, m.clone()).unwrap();
        ok.check(0.0).unwrap();
        m[(0, 0)] = C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(shape, m.clone())
            .unwrap()
            .check(1.0)
            .is_err());
        m[(0, 0)] = C64::new(0.25, 0.0);
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(DensityMatrix::new(shape, m.clone())
            .unwrap()
            .check(1.0)
            .is_err());
        m[(1, 0)] = C64::new(0.0, -0.1);
        DensityMatrix::new(shape, m.clone())
            .unwrap()
            .check(1.0)
            .unwrap();
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![
            C64::new(1.1, 0.0),
            C64::new(-0.1, 0.0),
            ZERO,
            ZERO,
        ]));
        let err = DensityMatrix::new(shape, neg)
            .unwrap()
            .check(2.0)
            .unwrap_err();
        assert!(matches!(err, Error::InvariantViolation { t, .. } if t == 2.0));
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[0.0, 0.0]).is_err());
        assert!(check_grid(&[1.0, 0.5]).is_err());
        assert!(check_grid(&[0.0, f64::NAN]).is_err());
        check_grid(&[0.0]).unwrap();
    }
}
