//! CSV tables with fixed headers and round-trip exact floats.

use std::fmt::Write as _;

pub const SPECTRUM_HEADER: &[&str] = &["omega_c_over_wq", "level_index", "omega_i0_over_wq"];
pub const ANTICROSSING_HEADER: &[&str] = &[
    "omega_c_star_over_wq",
    "gap_over_wq",
    "overlap_bareA_sq",
    "overlap_bareB_sq",
];
pub const COUPLING_HEADER: &[&str] = &["lambda_over_wq", "two_omega_analytic", "two_omega_exact"];
pub const DYNAMICS_HEADER: &[&str] = &[
    "time_wq",
    "omega_eff_t_over_pi",
    "photon_XX",
    "qubit1_CC",
    "qubit2_CC",
    "Gq2",
    "Gc2",
    "Gqc2",
];
pub const CALIBRATION_HEADER: &[&str] = &["amplitude", "transfer", "calibrated"];
pub const GHZ_HEADER: &[&str] = &["fidelity", "phase", "time_wq", "omega_eff_over_wq"];

const SEPARATOR: &str = ", ";

/// 17 significant digits, enough to recover every `f64` exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(usize),
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Float(x) => format_float(x),
            Cell::Int(i) => i.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(SEPARATOR);
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.render()).collect();
            let _ = writeln!(out, "{}", cells.join(SEPARATOR));
        }
        out
    }
}
