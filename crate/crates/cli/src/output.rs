//! Plot-ready CSV tables and their readers.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sturmian_core::verify::ConvergenceStudy;

/// One point of an eigencharge trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub step: usize,
    pub parameter: f64,
    pub branch: usize,
    pub re: f64,
    pub im: f64,
}

/// Two branches whose nearest neighbour at `step` was the same eigencharge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub step: usize,
    pub parameter: f64,
    pub branch_a: usize,
    pub branch_b: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub n_interior: usize,
    pub h: f64,
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub reference_re: f64,
    pub reference_im: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// `log₂` of the error ratio to the previous grid; empty on the first.
    pub order: Option<f64>,
}

pub fn write_rows<T: Serialize, W: Write>(out: W, rows: &[T]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> csv::Result<Vec<T>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Flattens a convergence study into one row per (grid, eigencharge).
pub fn oracle_rows(study: &ConvergenceStudy) -> Vec<OracleRow> {
    let mut rows = Vec::new();
    for (i, row) in study.rows.iter().enumerate() {
        for (k, (v, e)) in row.eigencharges.iter().zip(&row.errors).enumerate() {
            let reference = study
                .reference
                .iter()
                .min_by(|a, b| (*a - v).norm().total_cmp(&(*b - v).norm()))
                .copied()
                .unwrap_or(*v);
            rows.push(OracleRow {
                n_interior: row.n_interior,
                h: row.h,
                index: k,
                re: v.re,
                im: v.im,
                reference_re: reference.re,
                reference_im: reference.im,
                abs_error: *e,
                rel_error: e / reference.norm(),
                order: if i == 0 { None } else { study.orders[i - 1].get(k).copied() },
            });
        }
    }
    rows
}

pub fn oracle_table(rows: &[OracleRow]) -> String {
    let mut s = format!(
        "{:>10} {:>12} {:>5} {:>22} {:>22} {:>11} {:>7}\n",
        "n", "h", "k", "numerical", "reference", "rel_error", "order"
    );
    for r in rows {
        let order = r.order.map_or_else(|| "-".to_string(), |o| format!("{o:.3}"));
        s.push_str(&format!(
            "{:>10} {:>12.5e} {:>5} {:>22} {:>22} {:>11.3e} {:>7}\n",
            r.n_interior,
            r.h,
            r.index,
            format_complex(r.re, r.im),
            format_complex(r.reference_re, r.reference_im),
            r.rel_error,
            order
        ));
    }
    s
}

fn format_complex(re: f64, im: f64) -> String {
    if im == 0.0 {
        format!("{re:.10}")
    } else {
        format!("{re:.6}{im:+.6}i")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_empty_orders() {
        let rows = vec![
            OracleRow {
                n_interior: 10,
                h: 0.5,
                index: 0,
                re: 1.25,
                im: -0.5,
                reference_re: 1.0,
                reference_im: 0.0,
                abs_error: 0.5590169943749475,
                rel_error: 0.5590169943749475,
                order: None,
            },
            OracleRow {
                order: Some(2.0),
                ..rows_seed()
            },
        ];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let back: Vec<OracleRow> = read_rows(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        assert!(oracle_table(&rows).lines().count() == 3);
    }

    fn rows_seed() -> OracleRow {
        OracleRow {
            n_interior: 21,
            h: 0.25,
            index: 1,
            re: 2.0001,
            im: 0.0,
            reference_re: 2.0,
            reference_im: 0.0,
            abs_error: 1e-4,
            rel_error: 5e-5,
            order: None,
        }
    }
}
