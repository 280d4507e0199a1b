//! Series/parallel scaling of identical, balanced cells to a bank.

use serde::{Deserialize, Serialize};

use crate::cell::CellParams;
use crate::error::Checker;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankConfig {
    /// Cells in series per string.
    pub n_s: u32,
    /// Strings in parallel.
    pub n_p: u32,
    /// Rated bank power [W].
    pub p_rated: f64,
    pub cell: CellParams,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            n_s: 370,
            n_p: 400,
            p_rated: 100e6,
            cell: CellParams::default(),
        }
    }
}

impl BankConfig {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut c = Checker::new(prefix);
        c.check(self.n_s >= 1, "n_s", || "must be >= 1".into());
        c.check(self.n_p >= 1, "n_p", || "must be >= 1".into());
        c.positive("p_rated", self.p_rated);
        c.extend(self.cell.validate(&format!("{prefix}.cell")));
        c.into_violations()
    }

    pub fn cell_count(&self) -> f64 {
        f64::from(self.n_s) * f64::from(self.n_p)
    }

    pub fn string_voltage(&self, u_cell: f64) -> f64 {
        f64::from(self.n_s) * u_cell
    }

    pub fn module_current(&self, i_cell: f64) -> f64 {
        f64::from(self.n_p) * i_cell
    }

    /// Power into the bank [W]; positive while charging.
    pub fn bank_power(&self, u_cell: f64, i_cell: f64) -> f64 {
        self.string_voltage(u_cell) * self.module_current(i_cell)
    }
}

pub fn string_voltage(cfg: &BankConfig, u_cell: f64) -> f64 {
    cfg.string_voltage(u_cell)
}

pub fn module_current(cfg: &BankConfig, i_cell: f64) -> f64 {
    cfg.module_current(i_cell)
}

pub fn bank_power(cfg: &BankConfig, u_cell: f64, i_cell: f64) -> f64 {
    cfg.bank_power(u_cell, i_cell)
}
