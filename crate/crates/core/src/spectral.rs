//! Exact diagonalization, level tracking, avoided crossings and dressed
//! positive/negative-frequency operators.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{
    max_abs, number, BareLabel, CMatrix, CVector, OperatorMatrix, SpaceShape, StateVector, C64,
    ZERO,
};
use crate::model::{static_hamiltonian, SystemConfig};

/// Eigenvalues closer than this (in units of the Hamiltonian) form one
/// degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    shape: SpaceShape,
    eigenvalues: Vec<f64>,
    /// Columns are the eigenstates, in bare-basis coordinates.
    eigenvectors: CMatrix,
}

impl Spectrum {
    pub fn shape(&self) -> SpaceShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn energy(&self, level: usize) -> f64 {
        self.eigenvalues[level]
    }

    /// `omega_{i,0} = omega_i - omega_0`
    pub fn transition(&self, level: usize) -> f64 {
        self.eigenvalues[level] - self.eigenvalues[0]
    }

    pub fn state(&self, level: usize) -> StateVector {
        StateVector::new(self.shape, self.eigenvectors.column(level).into_owned())
            .expect("eigenvector length equals dimension")
    }

    /// `|<bare|level>|^2`
    pub fn overlap(&self, level: usize, label: &BareLabel) -> Result<f64> {
        let idx = label.index(&self.shape)?;
        Ok(self.eigenvectors[(idx, level)].norm_sqr())
    }

    /// `U^dag O U`, the matrix of `op` between eigenstates.
    pub fn to_eigenbasis(&self, op: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * op * &self.eigenvectors
    }

    /// Inverse of [`Spectrum::to_eigenbasis`].
    pub fn from_eigenbasis(&self, m: &CMatrix) -> OperatorMatrix {
        OperatorMatrix::new(
            self.shape,
            &self.eigenvectors * m * self.eigenvectors.adjoint(),
        )
        .expect("eigenbasis matrix has full dimension")
    }

    /// Projection of a bare state onto the span of two eigenstates,
    /// renormalized. At an anticrossing this is the `(|j> -+ |k>)/sqrt(2)`
    /// combination resembling `label`, independent of eigenvector gauge.
    pub fn hybrid_state(&self, pair: (usize, usize), label: &BareLabel) -> Result<StateVector> {
        let idx = label.index(&self.shape)?;
        let cj = self.eigenvectors[(idx, pair.0)].conj();
        let ck = self.eigenvectors[(idx, pair.1)].conj();
        let v = self.eigenvectors.column(pair.0) * cj + self.eigenvectors.column(pair.1) * ck;
        if v.norm() == 0.0 {
            return Err(Error::TrackingFailure(format!(
                "{label} has no weight on levels {pair:?}"
            )));
        }
        Ok(StateVector::new(self.shape, v)?.normalized())
    }
}

/// Diagonalizes a Hermitian operator.
///
/// Eigenvalues come out ascending. Inside a degenerate cluster the basis is
/// rebuilt canonically: bare states are projected into the cluster in order of
/// decreasing overlap and orthonormalized. Each eigenvector is then rotated so
/// its largest-magnitude component (first one on ties) is real and positive.
/// Identical input gives bit-identical output.
pub fn diagonalize(h: &OperatorMatrix) -> Result<Spectrum> {
    let scale = h.max_abs().max(1.0);
    let deviation = h.hermiticity_deviation();
    if deviation > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation });
    }
    let dim = h.dim();
    // symmetrize so the solver sees an exactly Hermitian matrix
    let sym = (h.matrix() + h.matrix().adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);

    let tol = DEGENERACY_TOL * scale.max(1.0);
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && eigenvalues[end] - eigenvalues[end - 1] < tol {
            end += 1;
        }
        if end - start > 1 {
            canonicalize_cluster(&mut vectors, start, end);
        }
        start = end;
    }

    for c in 0..dim {
        fix_gauge(&mut vectors, c);
    }

    Ok(Spectrum {
        shape: h.shape(),
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn canonicalize_cluster(vectors: &mut CMatrix, start: usize, end: usize) {
    let dim = vectors.nrows();
    let block = vectors.columns(start, end - start).into_owned();
    let mut chosen: Vec<CVector> = Vec::with_capacity(end - start);
    let mut used = vec![false; dim];
    for _ in start..end {
        let mut best: Option<(usize, CVector, f64)> = None;
        for b in 0..dim {
            if used[b] {
                continue;
            }
            // projection of e_b into the cluster, minus what is already spanned
            let coeffs = block.row(b).adjoint();
            let mut r = &block * coeffs;
            for w in &chosen {
                let c = w[b].conj();
                r.axpy(-c, w, ONE_C);
            }
            let n2 = r.norm_squared();
            if best.as_ref().map_or(true, |(_, _, m)| n2 > *m) {
                best = Some((b, r, n2));
            }
        }
        let (b, r, n2) = best.expect("cluster is non-empty");
        used[b] = true;
        chosen.push(r.unscale(n2.sqrt()));
    }
    for (k, w) in chosen.into_iter().enumerate() {
        vectors.set_column(start + k, &w);
    }
}

const ONE_C: C64 = C64::new(1.0, 0.0);

fn fix_gauge(vectors: &mut CMatrix, c: usize) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (r, z) in vectors.column(c).iter().enumerate() {
        let n = z.norm();
        if n > best_norm {
            best_norm = n;
            best = r;
        }
    }
    let z = vectors[(best, c)];
    if best_norm > 0.0 {
        let phase = z.conj() / best_norm;
        for v in vectors.column_mut(c).iter_mut() {
            *v *= phase;
        }
        // exactly real and positive
        vectors[(best, c)] = C64::new(best_norm, 0.0);
    }
}

/// Level with the largest overlap with a bare state, and that overlap squared.
pub fn identify_state(spec: &Spectrum, target: &BareLabel) -> Result<(usize, f64)> {
    let idx = target.index(&spec.shape)?;
    let mut best = (0, -1.0);
    for level in 0..spec.len() {
        let w = spec.eigenvectors[(idx, level)].norm_sqr();
        if w > best.1 {
            best = (level, w);
        }
    }
    Ok(best)
}

/// `H(omega_c) = rest + omega_c * a^dag a`, so sweeps only rebuild a sum.
#[derive(Debug, Clone)]
pub struct HamiltonianFamily {
    rest: OperatorMatrix,
    number: OperatorMatrix,
}

impl HamiltonianFamily {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        let shape = config.shape()?;
        let h = static_hamiltonian(config)?;
        let number = number(shape);
        let rest = &h - &number.scaled(config.omega_c);
        Ok(Self { rest, number })
    }

    pub fn at(&self, omega_c: f64) -> OperatorMatrix {
        &self.rest + &self.number.scaled(omega_c)
    }

    pub fn spectrum(&self, omega_c: f64) -> Result<Spectrum> {
        diagonalize(&self.at(omega_c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Adjacent-point overlap squared below which tracking gives up.
    pub min_overlap: f64,
    /// Extra levels above `n_levels` considered as tracking candidates.
    pub margin: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            min_overlap: 0.6,
            margin: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSweep {
    pub omega_c: Vec<f64>,
    /// `transitions[p][i]` is `omega_{i,0}` at sweep point `p`, ascending in `i`.
    pub transitions: Vec<Vec<f64>>,
    /// `branches[p][b]` is the sorted level index occupied at point `p` by the
    /// branch that starts as level `b` at the first point.
    pub branches: Vec<Vec<usize>>,
    /// `branch_transitions[p][b]` is `omega_{i,0}` followed along branch `b`.
    pub branch_transitions: Vec<Vec<f64>>,
}

/// Transition frequencies of the lowest `n_levels` levels along a sweep of
/// `omega_c`. Points are diagonalized in parallel; level branches are followed
/// by eigenvector overlap between neighbouring points.
pub fn sweep_spectrum(
    config: &SystemConfig,
    omega_c_values: &[f64],
    n_levels: usize,
    options: SweepOptions,
) -> Result<SpectrumSweep> {
    config.validate()?;
    if omega_c_values.is_empty() || omega_c_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(vec![
            "sweep values must be non-empty and strictly ascending".into(),
        ]));
    }
    let family = HamiltonianFamily::new(config)?;
    let dim = config.shape()?.dim();
    if n_levels == 0 || n_levels > dim {
        return Err(Error::InvalidConfig(vec![format!(
            "n_levels must be in 1..={dim}"
        )]));
    }
    let keep = (n_levels + options.margin).min(dim);

    let points: Vec<(Vec<f64>, CMatrix)> = omega_c_values
        .par_iter()
        .map(|&w| {
            let spec = family.spectrum(w)?;
            let tr: Vec<f64> = (0..keep).map(|i| spec.transition(i)).collect();
            Ok((tr, spec.eigenvectors.columns(0, keep).into_owned()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut branches = vec![(0..n_levels).collect::<Vec<usize>>()];
    for p in 0..points.len() - 1 {
        let prev = &points[p].1;
        let next = &points[p + 1].1;
        let current = branches[p].clone();
        let overlaps = prev.adjoint() * next;
        let mut pairs: Vec<(f64, usize, usize)> = current
            .iter()
            .enumerate()
            .flat_map(|(b, &lvl)| {
                let o = &overlaps;
                (0..keep).map(move |c| (o[(lvl, c)].norm_sqr(), b, c))
            })
            .collect();
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut assigned = vec![None; n_levels];
        let mut taken = vec![false; keep];
        for (w, b, c) in pairs {
            if assigned[b].is_none() && !taken[c] {
                assigned[b] = Some((c, w));
                taken[c] = true;
            }
        }
        let mut row = Vec::with_capacity(n_levels);
        for a in assigned {
            let (c, w) = a.expect("more candidates than branches");
            if w < options.min_overlap {
                return Err(Error::SweepTooCoarse {
                    index: p,
                    next: p + 1,
                    overlap: w,
                });
            }
            row.push(c);
        }
        branches.push(row);
    }

    let branch_transitions = branches
        .iter()
        .zip(&points)
        .map(|(br, (tr, _))| br.iter().map(|&l| tr[l]).collect())
        .collect();
    let transitions = points
        .into_iter()
        .map(|(mut t, _)| {
            t.truncate(n_levels);
            t
        })
        .collect();
    Ok(SpectrumSweep {
        omega_c: omega_c_values.to_vec(),
        transitions,
        branches,
        branch_transitions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnticrossingResult {
    pub omega_c_star: f64,
    /// Minimum splitting `omega_k - omega_j`, i.e. `2 Omega_eff`.
    pub gap: f64,
    pub level_pair: (usize, usize),
    /// `overlaps[l][s]` is `|<state s|level l>|^2` for `l` in the pair and
    /// `s` in `(stateA, stateB)`.
    pub hybridized_overlaps: [[f64; 2]; 2],
}

struct PairAt {
    gap: f64,
    pair: (usize, usize),
    weights: [f64; 2],
    overlaps: [[f64; 2]; 2],
}

fn pair_at(spec: &Spectrum, ia: usize, ib: usize) -> PairAt {
    let v = &spec.eigenvectors;
    let mut ranked: Vec<(f64, usize)> = (0..spec.len())
        .map(|l| (v[(ia, l)].norm_sqr() + v[(ib, l)].norm_sqr(), l))
        .collect();
    ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let (mut j, mut k) = (ranked[0].1, ranked[1].1);
    let (mut wj, mut wk) = (ranked[0].0, ranked[1].0);
    if j > k {
        std::mem::swap(&mut j, &mut k);
        std::mem::swap(&mut wj, &mut wk);
    }
    PairAt {
        gap: spec.eigenvalues[k] - spec.eigenvalues[j],
        pair: (j, k),
        weights: [wj, wk],
        overlaps: [
            [v[(ia, j)].norm_sqr(), v[(ib, j)].norm_sqr()],
            [v[(ia, k)].norm_sqr(), v[(ib, k)].norm_sqr()],
        ],
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal function on `[lo, hi]` down to a
/// bracket of relative width `rel_tol`. Returns the best abscissa seen.
pub fn golden_section_min<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) > rel_tol * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) * 0.5 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Resonator frequency inside `bracket` where the two levels dominated by
/// `state_a` and `state_b` come closest.
pub fn find_anticrossing(
    config: &SystemConfig,
    state_a: &BareLabel,
    state_b: &BareLabel,
    bracket: (f64, f64),
) -> Result<AnticrossingResult> {
    let shape = config.shape()?;
    let ia = state_a.index(&shape)?;
    let ib = state_b.index(&shape)?;
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidConfig(vec![format!(
            "bracket ({lo}, {hi}) must satisfy 0 < lo < hi"
        )]));
    }
    let family = HamiltonianFamily::new(config)?;
    let (w_star, _) = golden_section_min(
        |w| Ok(pair_at(&family.spectrum(w)?, ia, ib).gap),
        lo,
        hi,
        1e-10,
    )?;
    let edge = 1e-6 * (hi - lo);
    if w_star - lo < edge || hi - w_star < edge {
        return Err(Error::NoMinimumInBracket { lo, hi, at: w_star });
    }
    let at = pair_at(&family.spectrum(w_star)?, ia, ib);
    if at.weights.iter().any(|w| *w < 0.25) {
        return Err(Error::TrackingFailure(format!(
            "levels {:?} carry weights {:?} on {state_a} + {state_b}",
            at.pair, at.weights
        )));
    }
    Ok(AnticrossingResult {
        omega_c_star: w_star,
        gap: at.gap,
        level_pair: at.pair,
        hybridized_overlaps: at.overlaps,
    })
}

/// `O^+ = sum_{j<k} O_jk |j><k|` and `O^- = (O^+)^dag`, in the bare basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedPair {
    pub plus: OperatorMatrix,
    pub minus: OperatorMatrix,
}

/// Positive-frequency part of `op` in the eigenbasis: only elements taking a
/// higher level `k` to a lower level `j < k` survive (strictly upper
/// triangular in row/column order).
pub fn positive_frequency_part(spec: &Spectrum, op: &CMatrix) -> CMatrix {
    let mut m = spec.to_eigenbasis(op);
    for r in 0..m.nrows() {
        for c in 0..=r {
            m[(r, c)] = ZERO;
        }
    }
    m
}

pub fn dressed_operators(spec: &Spectrum, bare_op: &OperatorMatrix) -> Result<DressedPair> {
    if bare_op.shape() != spec.shape {
        return Err(Error::ShapeMismatch(
            "operator and spectrum live on different spaces".into(),
        ));
    }
    let plus_e = positive_frequency_part(spec, bare_op.matrix());
    let plus = spec.from_eigenbasis(&plus_e);
    let minus = plus.adjoint();
    Ok(DressedPair { plus, minus })
}

/// `max |H - U D U^dag|`
pub fn reconstruction_error(h: &OperatorMatrix, spec: &Spectrum) -> f64 {
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        spec.len(),
        spec.eigenvalues.iter().map(|e| C64::new(*e, 0.0)),
    ));
    let r = &spec.eigenvectors * d * spec.eigenvectors.adjoint();
    max_abs(&(h.matrix() - r))
}

/// `max |U^dag U - 1|`
pub fn unitarity_error(spec: &Spectrum) -> f64 {
    let n = spec.len();
    max_abs(&(spec.eigenvectors.adjoint() * &spec.eigenvectors - CMatrix::identity(n, n)))
}
