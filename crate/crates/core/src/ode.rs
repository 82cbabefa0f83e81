//! Adaptive Dormand–Prince 5(4) stepping for matrix-valued ODEs.

use crate::error::{Error, Result};
use crate::hilbert::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// `y += a x`
pub(crate) fn add_scaled(y: &mut CMatrix, a: f64, x: &CMatrix) {
    y.zip_apply(x, |yi, xi| *yi += xi * a);
}

/// Integrator state. The right-hand side is `f(t, y)`; `tidy` runs on every
/// accepted state (used to restore exact Hermiticity).
pub(crate) struct Dp5<F, G>
where
    F: FnMut(f64, &CMatrix) -> CMatrix,
    G: FnMut(&mut CMatrix),
{
    f: F,
    tidy: G,
    control: StepControl,
    t: f64,
    y: CMatrix,
    k1: CMatrix,
    h: f64,
    pub stats: IntegrationStats,
}

impl<F, G> Dp5<F, G>
where
    F: FnMut(f64, &CMatrix) -> CMatrix,
    G: FnMut(&mut CMatrix),
{
    pub fn new(mut f: F, tidy: G, t0: f64, y0: CMatrix, control: StepControl) -> Self {
        let k1 = f(t0, &y0);
        Self {
            f,
            tidy,
            control,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            stats: IntegrationStats {
                rhs_evaluations: 1,
                ..Default::default()
            },
        }
    }

    #[cfg(test)]
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &CMatrix {
        &self.y
    }

    fn initial_step(&self, span: f64) -> f64 {
        let scale = self
            .y
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(self.control.atol);
        let slope = self.k1.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let h = if slope > 0.0 {
            0.01 * scale / slope
        } else {
            span
        };
        h.min(span).min(self.control.h_max)
    }

    /// Steps until `t_end` is reached exactly; the final step is shortened to
    /// land on it.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        if t_end <= self.t {
            return Ok(());
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(t_end - self.t);
        }
        while self.t < t_end {
            if self.stats.accepted + self.stats.rejected >= self.control.max_steps {
                return Err(Error::TooManySteps {
                    t: self.t,
                    max_steps: self.control.max_steps,
                });
            }
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let min_h = 64.0 * f64::EPSILON * self.t.abs().max(1.0);
            if h < min_h && !last {
                return Err(Error::StepSizeUnderflow { t: self.t, h });
            }
            let (y_new, k7, err) = self.trial(h);
            self.stats.rhs_evaluations += 6;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.y = y_new;
                (self.tidy)(&mut self.y);
                self.k1 = k7;
                self.stats.accepted += 1;
                // a step shortened to hit t_end says little about the next
                // interval, so keep the nominal size unless it may grow
                let proposed = h * factor;
                self.h = if last { self.h.max(proposed) } else { proposed };
                self.h = self.h.min(self.control.h_max);
            } else {
                self.stats.rejected += 1;
                self.h = h * factor.min(1.0);
            }
        }
        Ok(())
    }

    fn trial(&mut self, h: f64) -> (CMatrix, CMatrix, f64) {
        let mut ks: Vec<CMatrix> = Vec::with_capacity(7);
        ks.push(self.k1.clone());
        for s in 1..7 {
            let mut y = self.y.clone();
            for (j, k) in ks.iter().enumerate() {
                let a = A[s][j];
                if a != 0.0 {
                    add_scaled(&mut y, h * a, k);
                }
            }
            let k = (self.f)(self.t + C[s] * h, &y);
            if s == 6 {
                // A[6] are the fifth-order weights, so y is the new state
                let mut err = CMatrix::zeros(y.nrows(), y.ncols());
                for (j, kj) in ks.iter().chain(std::iter::once(&k)).enumerate() {
                    if E[j] != 0.0 {
                        add_scaled(&mut err, h * E[j], kj);
                    }
                }
                let mut worst: f64 = 0.0;
                for ((e, y0), y1) in err.iter().zip(self.y.iter()).zip(y.iter()) {
                    let sc = self.control.atol + self.control.rtol * y0.norm().max(y1.norm());
                    worst = worst.max(e.norm() / sc);
                }
                return (y, k, worst);
            }
            ks.push(k);
        }
        unreachable!("seven stages")
    }
}
