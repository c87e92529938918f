//! CSV and JSON rendering of experiment reports.
//!
//! CSV float columns are written with six significant digits and followed by
//! a `<name>_exact` column holding the shortest round-trip representation.

use std::io::Write;

use serde::Serialize;

use crate::{
    CalibrationReport, NormalReport, Result, SetsReport, SurvivalReport, TwoStateReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Bool(bool),
}

/// Column names and rows; `Float` cells expand to two CSV columns.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// `x` rounded to six significant digits.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..15).contains(&mag) {
        return format!("{x:.5e}");
    }
    format!("{:.*}", (5 - mag).max(0) as usize, x)
}

/// Shortest representation that parses back to the same `f64`.
pub fn exact(x: f64) -> String {
    format!("{x:?}")
}

impl Table {
    fn header(&self) -> Vec<String> {
        let Some(first) = self.rows.first() else {
            return self.columns.clone();
        };
        let mut out = Vec::new();
        for (name, v) in self.columns.iter().zip(first) {
            out.push(name.clone());
            if matches!(v, Value::Float(_)) {
                out.push(format!("{name}_exact"));
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for row in &self.rows {
            let mut rec = Vec::new();
            for v in row {
                match v {
                    Value::Int(i) => rec.push(i.to_string()),
                    Value::Bool(b) => rec.push(b.to_string()),
                    Value::Float(x) => {
                        rec.push(sig6(*x));
                        rec.push(exact(*x));
                    }
                }
            }
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// A report that can be flattened to a table.
pub trait Tabular: Serialize {
    fn table(&self) -> Table;
}

pub fn write_report<R: Tabular, W: Write>(report: &R, format: Format, mut w: W) -> Result<()> {
    match format {
        Format::Csv => report.table().write_csv(w),
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)?;
            Ok(())
        }
    }
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

use Value::{Bool, Float, Int};

impl Tabular for TwoStateReport {
    fn table(&self) -> Table {
        Table {
            columns: cols(&[
                "k",
                "unadjusted",
                "adjusted",
                "prop_nu_gt1",
                "holes",
                "sd",
                "se_unadjusted",
                "se_adjusted",
                "unadjusted_expected",
                "prop_nu_gt1_expected",
                "holes_expected",
                "n",
                "capped",
            ]),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        Int(r.k as u64),
                        Float(r.unadjusted),
                        Float(r.adjusted),
                        Float(r.prop_nu_gt1),
                        Float(r.holes),
                        Float(r.sd),
                        Float(r.se_unadjusted),
                        Float(r.se_adjusted),
                        Float(r.unadjusted_expected),
                        Float(r.prop_nu_gt1_expected),
                        Float(r.holes_expected),
                        Int(r.n as u64),
                        Int(r.capped as u64),
                    ]
                })
                .collect(),
        }
    }
}

impl Tabular for SurvivalReport {
    fn table(&self) -> Table {
        Table {
            columns: cols(&["i", "exceed", "n", "fraction", "expected", "z"]),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        Int(r.i as u64),
                        Int(r.exceed),
                        Int(r.n),
                        Float(r.fraction),
                        Float(r.expected),
                        Float(r.z),
                    ]
                })
                .collect(),
        }
    }
}

impl Tabular for SetsReport {
    fn table(&self) -> Table {
        let c = &self.config;
        Table {
            columns: cols(&[
                "k_set",
                "b",
                "n_sets",
                "n_points",
                "proportion_state1",
                "rho",
                "rho_se",
                "rho_expected",
                "cross_rho",
                "cross_rho_se",
                "n_pairs",
                "error_sets",
                "mean_blocks",
                "max_blocks",
            ]),
            rows: vec![vec![
                Int(c.set_size as u64),
                Int(c.block_len as u64),
                Int(c.n_sets as u64),
                Int(self.n_points as u64),
                Float(self.proportion_state1),
                Float(self.rho),
                Float(self.rho_se),
                Float(self.rho_expected),
                Float(self.cross_rho),
                Float(self.cross_rho_se),
                Int(self.n_pairs as u64),
                Int(self.error_sets as u64),
                Float(self.mean_blocks),
                Int(self.max_blocks as u64),
            ]],
        }
    }
}

impl Tabular for NormalReport {
    fn table(&self) -> Table {
        let c = &self.config;
        let mut columns = cols(&[
            "d",
            "b",
            "n",
            "mean_blocks",
            "max_blocks",
            "rho",
            "rho_se",
            "cross_rho",
            "pair_mean_blocks",
            "error_sets",
            "string_points",
            "cells_per_point",
        ]);
        let mut row = vec![
            Int(c.d as u64),
            Int(c.block_len as u64),
            Int(self.n_points as u64),
            Float(self.mean_blocks),
            Int(self.max_blocks as u64),
            Float(self.rho),
            Float(self.rho_se),
            Float(self.cross_rho),
            Float(self.pair_mean_blocks),
            Int(self.error_sets as u64),
            Int(self.string_points as u64),
            Float(self.cells_per_point),
        ];
        for ks in &self.ks {
            columns.push(format!("ks_statistic_x{}", ks.coordinate));
            columns.push(format!("ks_p_x{}", ks.coordinate));
            row.push(Float(ks.statistic));
            row.push(Float(ks.p_value));
        }
        Table {
            columns,
            rows: vec![row],
        }
    }
}

impl Tabular for CalibrationReport {
    fn table(&self) -> Table {
        Table {
            columns: cols(&[
                "b",
                "n_pairs",
                "noncoalesced",
                "fraction",
                "se",
                "recommended",
            ]),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        Int(r.block_len as u64),
                        Int(r.n_pairs as u64),
                        Int(r.noncoalesced as u64),
                        Float(r.fraction),
                        Float(r.se),
                        Bool(r.block_len == self.recommended),
                    ]
                })
                .collect(),
        }
    }
}
