//! Effective couplings between degenerate bare states from virtual paths.
//!
//! A path of order `k` is a sequence `[i, m_1, ..., m_{k-1}, f]` of bare
//! states joined by non-zero matrix elements of the interaction
//! `V = X sum_i lambda_i (cos theta sigma_x + sin theta sigma_z)`. Its amplitude
//! is `V_{f m_{k-1}} ... V_{m_1 i} / prod_j (E_i - E_{m_j})`. At third order,
//! with `V_ii = 0`, summing all paths gives the effective matrix element
//! `V^eff_fi`, and the effective coupling is `Omega_eff = -V^eff_fi`.

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{BareLabel, C64, ZERO};
use crate::model::{interaction, SystemConfig};
use crate::spectral::find_anticrossing;

/// Bare energies closer than this are treated as degenerate.
pub const RESONANCE_TOL: f64 = 1e-9;

/// Matrix elements below this are structural zeros.
const ELEMENT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CouplingSource {
    Analytic,
    PathSum,
    /// Half of the exact minimum splitting.
    ExactGap,
}

impl fmt::Display for CouplingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CouplingSource::Analytic => "analytic",
            CouplingSource::PathSum => "path_sum",
            CouplingSource::ExactGap => "exact_gap",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoupling {
    /// `Omega_eff` in units of `omega_q`.
    pub value: f64,
    pub order: usize,
    pub source: CouplingSource,
}

impl EffectiveCoupling {
    /// The splitting `2 Omega_eff`.
    pub fn splitting(&self) -> f64 {
        2.0 * self.value
    }
}

/// One virtual path from the initial to the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct PathContribution {
    /// `[i, m_1, ..., f]`
    pub states: Vec<BareLabel>,
    /// `V_{m_1 i}, V_{m_2 m_1}, ..., V_{f m_{k-1}}`, in path order.
    pub vertex_elements: Vec<C64>,
    /// `E_i - E_{m_j}` for each intermediate.
    pub denominators: Vec<f64>,
    pub amplitude: C64,
}

impl PathContribution {
    pub fn order(&self) -> usize {
        self.vertex_elements.len()
    }

    pub fn intermediates(&self) -> &[BareLabel] {
        &self.states[1..self.states.len() - 1]
    }
}

/// `Omega_eff / omega_q = (8/3) sin(theta) cos^2(theta) (lambda / omega_q)^3`
/// for two qubits at `omega_c = 2 omega_q`.
pub fn effective_coupling_analytic(lambda_over_wq: f64, theta: f64) -> EffectiveCoupling {
    let (s, c) = theta.sin_cos();
    EffectiveCoupling {
        value: 8.0 / 3.0 * s * c * c * lambda_over_wq.powi(3),
        order: 3,
        source: CouplingSource::Analytic,
    }
}

/// All paths of the given order from `initial` to `final_` through
/// non-degenerate intermediates.
///
/// Intermediates equal to `initial` or `final_` are the degenerate subspace
/// itself and are skipped. Any other intermediate degenerate with `initial`
/// that carries a non-zero vertex is an error: the expansion is not valid
/// there.
pub fn enumerate_paths(
    config: &SystemConfig,
    initial: &BareLabel,
    final_: &BareLabel,
    order: usize,
) -> Result<Vec<PathContribution>> {
    let shape = config.shape()?;
    let i0 = initial.index(&shape)?;
    let f0 = final_.index(&shape)?;
    if order == 0 {
        return Err(Error::InvalidConfig(vec!["path order must be >= 1".into()]));
    }
    let e_i = config.bare_energy(initial);
    let mismatch = (e_i - config.bare_energy(final_)).abs();
    if mismatch > RESONANCE_TOL {
        return Err(Error::NotResonant { mismatch });
    }

    let v = interaction(config)?.into_matrix();
    let dim = shape.dim();
    let labels: Vec<BareLabel> = shape.labels().collect();
    let energies: Vec<f64> = labels.iter().map(|l| config.bare_energy(l)).collect();
    // neighbours[s] = states t with <t|V|s> != 0
    let neighbours: Vec<Vec<usize>> = (0..dim)
        .map(|s| {
            (0..dim)
                .filter(|&t| v[(t, s)].norm() > ELEMENT_TOL)
                .collect()
        })
        .collect();

    let mut paths = Vec::new();
    let mut stack = vec![i0];
    extend(
        &Walk {
            v: &v,
            neighbours: &neighbours,
            energies: &energies,
            labels: &labels,
            initial: i0,
            final_: f0,
            e_i,
            order,
        },
        &mut stack,
        &mut paths,
    )?;
    Ok(paths)
}

struct Walk<'a> {
    v: &'a crate::hilbert::CMatrix,
    neighbours: &'a [Vec<usize>],
    energies: &'a [f64],
    labels: &'a [BareLabel],
    initial: usize,
    final_: usize,
    e_i: f64,
    order: usize,
}

fn extend(w: &Walk<'_>, stack: &mut Vec<usize>, out: &mut Vec<PathContribution>) -> Result<()> {
    let here = *stack.last().expect("path starts at the initial state");
    let steps_left = w.order + 1 - stack.len();
    if steps_left == 1 {
        if w.neighbours[here].contains(&w.final_) {
            stack.push(w.final_);
            out.push(contribution(w, stack));
            stack.pop();
        }
        return Ok(());
    }
    for &next in &w.neighbours[here] {
        if next == w.initial || next == w.final_ {
            continue;
        }
        if (w.energies[next] - w.e_i).abs() <= RESONANCE_TOL {
            return Err(Error::DegenerateIntermediate {
                state: w.labels[next].to_string(),
            });
        }
        stack.push(next);
        extend(w, stack, out)?;
        stack.pop();
    }
    Ok(())
}

fn contribution(w: &Walk<'_>, stack: &[usize]) -> PathContribution {
    let vertex_elements: Vec<C64> = stack.windows(2).map(|p| w.v[(p[1], p[0])]).collect();
    let denominators: Vec<f64> = stack[1..stack.len() - 1]
        .iter()
        .map(|&m| w.e_i - w.energies[m])
        .collect();
    let numerator = vertex_elements
        .iter()
        .fold(C64::new(1.0, 0.0), |acc, x| acc * x);
    let amplitude = numerator / denominators.iter().product::<f64>();
    PathContribution {
        states: stack.iter().map(|&s| w.labels[s].clone()).collect(),
        vertex_elements,
        denominators,
        amplitude,
    }
}

/// `Omega_eff = -Re sum(amplitudes)`. An empty list gives zero at order 0.
pub fn effective_coupling_path_sum(paths: &[PathContribution]) -> EffectiveCoupling {
    let total = paths.iter().fold(ZERO, |acc, p| acc + p.amplitude);
    EffectiveCoupling {
        value: -total.re,
        order: paths.first().map_or(0, PathContribution::order),
        source: CouplingSource::PathSum,
    }
}

/// Paths grouped by the unordered set of intermediates' qubit-excitation
/// counts and photon numbers, so that paths differing only by which
/// qubit flips first land together.
///
/// For two qubits at `omega_c = 2 omega_q` the eight third-order paths from
/// `|g,g,1>` to `|e,e,0>` collapse into four channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PathChannel {
    /// `(excited qubits, photons)` of each intermediate.
    pub signature: Vec<(usize, usize)>,
    pub paths: Vec<PathContribution>,
    pub amplitude: C64,
}

pub fn channels(paths: &[PathContribution]) -> Vec<PathChannel> {
    let mut out: Vec<PathChannel> = Vec::new();
    for p in paths {
        let signature: Vec<(usize, usize)> = p
            .intermediates()
            .iter()
            .map(|l| (l.n_excited(), l.photons))
            .collect();
        match out.iter_mut().find(|c| c.signature == signature) {
            Some(c) => {
                c.amplitude += p.amplitude;
                c.paths.push(p.clone());
            }
            None => out.push(PathChannel {
                signature,
                amplitude: p.amplitude,
                paths: vec![p.clone()],
            }),
        }
    }
    out
}

/// Plain-text audit listing: one line per path with states, vertices,
/// denominators and amplitude, then the total.
pub fn path_report(paths: &[PathContribution]) -> String {
    let mut s = String::new();
    for (n, p) in paths.iter().enumerate() {
        let states: Vec<String> = p.states.iter().map(ToString::to_string).collect();
        let vertices: Vec<String> = p
            .vertex_elements
            .iter()
            .map(|v| format!("{:+.6e}", v.re))
            .collect();
        let dens: Vec<String> = p.denominators.iter().map(|d| format!("{d:+.6}")).collect();
        let _ = writeln!(
            s,
            "path {n}: {}  V = [{}]  E_i - E_m = [{}]  amplitude = {:+.12e}",
            states.join(" -> "),
            vertices.join(", "),
            dens.join(", "),
            p.amplitude.re
        );
    }
    let total = effective_coupling_path_sum(paths);
    let _ = writeln!(s, "Omega_eff = {:+.12e}", total.value);
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingComparison {
    pub lambda: f64,
    pub two_omega_analytic: f64,
    pub two_omega_exact: f64,
}

impl CouplingComparison {
    pub fn relative_deviation(&self) -> f64 {
        (self.two_omega_exact - self.two_omega_analytic).abs() / self.two_omega_analytic.abs()
    }
}

/// Default search window for the two-qubit anticrossing near `omega_c = 2 omega_q`.
pub fn default_bracket(config: &SystemConfig) -> (f64, f64) {
    let n = config.n_qubits as f64 * config.omega_q;
    (n - 0.1 * config.omega_q, n + 0.1 * config.omega_q)
}

/// Exact versus closed-form splitting for each coupling in `lambda_grid`,
/// in grid order. Every qubit gets the same coupling.
pub fn compare_with_exact(
    config: &SystemConfig,
    lambda_grid: &[f64],
) -> Result<Vec<CouplingComparison>> {
    let n = config.n_qubits;
    let a = BareLabel::all_ground(n, 1);
    let b = BareLabel::all_excited(n, 0);
    lambda_grid
        .par_iter()
        .map(|&lambda| {
            let cfg = config.clone().with_lambda(lambda);
            let exact = find_anticrossing(&cfg, &a, &b, default_bracket(&cfg))?;
            let analytic = effective_coupling_analytic(lambda / cfg.omega_q, cfg.theta);
            Ok(CouplingComparison {
                lambda,
                two_omega_analytic: analytic.splitting() * cfg.omega_q,
                two_omega_exact: exact.gap,
            })
        })
        .collect()
}

/// `Omega_eff` from an exact splitting.
pub fn coupling_from_gap(gap: f64) -> EffectiveCoupling {
    EffectiveCoupling {
        value: 0.5 * gap,
        order: 0,
        source: CouplingSource::ExactGap,
    }
}
