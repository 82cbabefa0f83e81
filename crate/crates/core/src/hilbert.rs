//! States and operators on the space of `n_qubits` two-level systems and one
//! truncated bosonic mode.
//!
//! Tensor ordering is fixed: qubit 0 is the slowest-varying factor, the boson
//! the fastest. A bare basis index is therefore
//! `(sum_i s_i 2^(n_qubits-1-i)) * n_fock + n` with `s_i = 0` for `g` and `1`
//! for `e`. `sigma_z` has eigenvalue `+1` on `e`.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceShape {
    n_qubits: usize,
    n_fock: usize,
}

impl SpaceShape {
    pub fn new(n_qubits: usize, n_fock: usize) -> Result<Self> {
        if n_qubits < 1 {
            return Err(Error::InvalidShape("n_qubits must be >= 1".into()));
        }
        if n_fock < 2 {
            return Err(Error::InvalidShape("n_fock must be >= 2".into()));
        }
        if n_qubits > 16 {
            return Err(Error::InvalidShape(format!(
                "{n_qubits} qubits is beyond dense storage"
            )));
        }
        Ok(Self { n_qubits, n_fock })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn qubit_dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.qubit_dim() * self.n_fock
    }

    /// Every bare label in basis-index order.
    pub fn labels(&self) -> impl Iterator<Item = BareLabel> + '_ {
        (0..self.dim()).map(move |i| BareLabel::from_index(self, i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QubitState {
    G,
    E,
}

impl QubitState {
    /// Eigenvalue of `sigma_z`.
    pub fn sz(self) -> f64 {
        match self {
            QubitState::G => -1.0,
            QubitState::E => 1.0,
        }
    }

    fn bit(self) -> usize {
        match self {
            QubitState::G => 0,
            QubitState::E => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            QubitState::G => QubitState::E,
            QubitState::E => QubitState::G,
        }
    }
}

/// A bare-basis ket `|q_0, ..., q_{N-1}, n>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BareLabel {
    pub qubits: Vec<QubitState>,
    pub photons: usize,
}

impl BareLabel {
    pub fn new(qubits: Vec<QubitState>, photons: usize) -> Self {
        Self { qubits, photons }
    }

    pub fn all_ground(n_qubits: usize, photons: usize) -> Self {
        Self::new(vec![QubitState::G; n_qubits], photons)
    }

    pub fn all_excited(n_qubits: usize, photons: usize) -> Self {
        Self::new(vec![QubitState::E; n_qubits], photons)
    }

    pub fn n_excited(&self) -> usize {
        self.qubits.iter().filter(|q| **q == QubitState::E).count()
    }

    /// Sum of `sigma_z` eigenvalues over all qubits.
    pub fn total_sz(&self) -> f64 {
        self.qubits.iter().map(|q| q.sz()).sum()
    }

    pub fn check(&self, shape: &SpaceShape) -> Result<()> {
        if self.qubits.len() != shape.n_qubits {
            return Err(Error::LabelMismatch {
                expected: shape.n_qubits,
                got: self.qubits.len(),
            });
        }
        if self.photons >= shape.n_fock {
            return Err(Error::PhotonOutOfRange {
                photons: self.photons,
                n_fock: shape.n_fock,
            });
        }
        Ok(())
    }

    pub fn index(&self, shape: &SpaceShape) -> Result<usize> {
        self.check(shape)?;
        let qubit_index = self
            .qubits
            .iter()
            .fold(0usize, |acc, q| (acc << 1) | q.bit());
        Ok(qubit_index * shape.n_fock + self.photons)
    }

    pub fn from_index(shape: &SpaceShape, index: usize) -> Self {
        let photons = index % shape.n_fock;
        let mut q = index / shape.n_fock;
        let mut qubits = vec![QubitState::G; shape.n_qubits];
        for slot in qubits.iter_mut().rev() {
            if q & 1 == 1 {
                *slot = QubitState::E;
            }
            q >>= 1;
        }
        Self { qubits, photons }
    }
}

impl fmt::Display for BareLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for q in &self.qubits {
            let c = match q {
                QubitState::G => 'g',
                QubitState::E => 'e',
            };
            write!(f, "{c},")?;
        }
        write!(f, "{}>", self.photons)
    }
}

/// Parses `g,e,1`, optionally wrapped as `|g,e,1>`.
impl FromStr for BareLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let body = s
            .trim()
            .trim_start_matches('|')
            .trim_end_matches(['>', '\u{27e9}']);
        let parts: Vec<&str> = body.split(',').map(str::trim).collect();
        let Some((last, qubit_parts)) = parts.split_last() else {
            return Err(format!("empty bare label {s:?}"));
        };
        if qubit_parts.is_empty() {
            return Err(format!("bare label {s:?} has no qubit states"));
        }
        let photons = last
            .parse::<usize>()
            .map_err(|_| format!("bad photon number {last:?} in {s:?}"))?;
        let qubits = qubit_parts
            .iter()
            .map(|p| match *p {
                "g" | "G" => Ok(QubitState::G),
                "e" | "E" => Ok(QubitState::E),
                other => Err(format!("bad qubit state {other:?} in {s:?}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { qubits, photons })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliKind {
    X,
    Z,
    /// `sigma_+ = |e><g|`
    Plus,
    /// `sigma_- = |g><e|`
    Minus,
}

impl PauliKind {
    fn local(self) -> CMatrix {
        // local basis: 0 = g, 1 = e
        let (a, b, c, d) = match self {
            PauliKind::X => (0.0, 1.0, 1.0, 0.0),
            PauliKind::Z => (-1.0, 0.0, 0.0, 1.0),
            PauliKind::Plus => (0.0, 0.0, 1.0, 0.0),
            PauliKind::Minus => (0.0, 1.0, 0.0, 0.0),
        };
        DMatrix::from_row_slice(2, 2, &[a, b, c, d]).map(|x| C64::new(x, 0.0))
    }
}

/// Dense complex operator tied to a [`SpaceShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    shape: SpaceShape,
    matrix: CMatrix,
}

impl OperatorMatrix {
    pub fn new(shape: SpaceShape, matrix: CMatrix) -> Result<Self> {
        let d = shape.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "matrix is {}x{}, space dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { shape, matrix })
    }

    pub fn zeros(shape: SpaceShape) -> Self {
        let d = shape.dim();
        Self {
            shape,
            matrix: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(shape: SpaceShape) -> Self {
        let d = shape.dim();
        Self {
            shape,
            matrix: CMatrix::identity(d, d),
        }
    }

    /// Embeds a `n_fock x n_fock` operator acting on the boson.
    pub fn on_boson(shape: SpaceShape, local: &CMatrix) -> Result<Self> {
        if local.nrows() != shape.n_fock || local.ncols() != shape.n_fock {
            return Err(Error::ShapeMismatch("boson operator size".into()));
        }
        let id = CMatrix::identity(shape.qubit_dim(), shape.qubit_dim());
        Ok(Self {
            shape,
            matrix: id.kronecker(local),
        })
    }

    /// Embeds a `2 x 2` operator acting on qubit `index` (basis order `g, e`).
    pub fn on_qubit(shape: SpaceShape, index: usize, local: &CMatrix) -> Result<Self> {
        if index >= shape.n_qubits {
            return Err(Error::QubitIndexOutOfRange {
                index,
                n_qubits: shape.n_qubits,
            });
        }
        if local.nrows() != 2 || local.ncols() != 2 {
            return Err(Error::ShapeMismatch("qubit operator must be 2x2".into()));
        }
        let before = 1usize << index;
        let after = (1usize << (shape.n_qubits - 1 - index)) * shape.n_fock;
        let m = CMatrix::identity(before, before)
            .kronecker(local)
            .kronecker(&CMatrix::identity(after, after));
        Ok(Self { shape, matrix: m })
    }

    pub fn shape(&self) -> SpaceShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            shape: self.shape,
            matrix: self.matrix.adjoint(),
        }
    }

    /// `max |M - M^dag|` over all entries.
    pub fn hermiticity_deviation(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            shape: self.shape,
            matrix: &self.matrix * C64::new(factor, 0.0),
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self {
            shape: self.shape,
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        }
    }

    pub fn apply(&self, state: &StateVector) -> StateVector {
        StateVector {
            shape: self.shape,
            amplitudes: &self.matrix * &state.amplitudes,
        }
    }

    /// `<psi|O|psi>`
    pub fn expectation(&self, state: &StateVector) -> C64 {
        state.amplitudes.dotc(&(&self.matrix * &state.amplitudes))
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        debug_assert_eq!(self.shape, rhs.shape);
        OperatorMatrix {
            shape: self.shape,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        debug_assert_eq!(self.shape, rhs.shape);
        OperatorMatrix {
            shape: self.shape,
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        debug_assert_eq!(self.shape, rhs.shape);
        OperatorMatrix {
            shape: self.shape,
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    shape: SpaceShape,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(shape: SpaceShape, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != shape.dim() {
            return Err(Error::ShapeMismatch(format!(
                "state has {} amplitudes, space dimension is {}",
                amplitudes.len(),
                shape.dim()
            )));
        }
        Ok(Self { shape, amplitudes })
    }

    pub fn shape(&self) -> SpaceShape {
        self.shape
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes.unscale_mut(n);
        }
        self
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

fn boson_lowering(n_fock: usize) -> CMatrix {
    CMatrix::from_fn(n_fock, n_fock, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

/// Photon annihilation operator `a`, identity on every qubit.
pub fn annihilation(shape: SpaceShape) -> OperatorMatrix {
    OperatorMatrix::on_boson(shape, &boson_lowering(shape.n_fock))
        .expect("lowering operator matches its own shape")
}

pub fn creation(shape: SpaceShape) -> OperatorMatrix {
    annihilation(shape).adjoint()
}

/// `a^dag a`
pub fn number(shape: SpaceShape) -> OperatorMatrix {
    let n = CMatrix::from_diagonal(&CVector::from_fn(shape.n_fock, |i, _| {
        C64::new(i as f64, 0.0)
    }));
    OperatorMatrix::on_boson(shape, &n).expect("number operator matches its own shape")
}

/// `X = a + a^dag`
pub fn field_quadrature(shape: SpaceShape) -> OperatorMatrix {
    let a = annihilation(shape);
    &a + &a.adjoint()
}

pub fn pauli(shape: SpaceShape, qubit_index: usize, kind: PauliKind) -> Result<OperatorMatrix> {
    OperatorMatrix::on_qubit(shape, qubit_index, &kind.local())
}

pub fn bare_state(shape: SpaceShape, label: &BareLabel) -> Result<StateVector> {
    let idx = label.index(&shape)?;
    let mut v = CVector::zeros(shape.dim());
    v[idx] = ONE;
    Ok(StateVector {
        shape,
        amplitudes: v,
    })
}
