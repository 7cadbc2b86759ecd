//! Exact combinatorics of the square-root substitution: the derivative
//! coefficient table, its factorial-weighted growth bounds, and the
//! symbolic cross-check. Everything here is integer arithmetic; the mode
//! is `exact` by construction.

use anyhow::{bail, Result};
use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use propspeed_core::gevrey_comb::{
    check_diagonal_bound, check_iterated_sum_bound, coefficient_table, diagonal_coefficient,
    symbolic_derivative_check, MAX_SYMBOLIC_ORDER,
};

use super::{RunContext, RunOutcome};
use crate::render::{write_csv, write_json};

/// Keeps the CSV a plot-friendly size; the library itself tables far
/// higher orders.
const MAX_CSV_ORDER: u32 = 2_000;

const CSV_HEADER: &[&str] = &["n", "d", "i", "j", "value"];

#[derive(Serialize)]
struct Summary {
    kind: &'static str,
    mode: &'static str,
    n_max: u32,
    table_rows: usize,
    diagonal_bound_pass: bool,
    diagonal_max_ratio: f64,
    diagonal_worst_order: u32,
    diagonal_worst_diagonal: u32,
    diagonal_entries_checked: u64,
    iterated_sum_pass: bool,
    iterated_sum_max_ratio: f64,
    symbolic_orders_checked: u32,
    symbolic_pass: bool,
    symbolic_term_counts: Vec<usize>,
    doubling_orders_checked: u32,
    doubling_pass: bool,
    pass: bool,
}

pub fn run(ctx: &RunContext) -> Result<RunOutcome> {
    let cfg = ctx.config;
    let n_max = cfg.grid.clone().unwrap_or_default().n_max.unwrap_or(60);
    if n_max < 2 {
        bail!("grid.n-max must be at least 2");
    }
    if n_max > MAX_CSV_ORDER {
        bail!("grid.n-max {n_max} exceeds the artifact cap {MAX_CSV_ORDER}");
    }

    let mut csv_rows = Vec::new();
    for n in 0..=n_max {
        let table = coefficient_table(n);
        for (i, j, value) in table.entries() {
            csv_rows.push(vec![
                n.to_string(),
                (n - j).to_string(),
                i.to_string(),
                j.to_string(),
                value.to_string(),
            ]);
        }
    }

    let diagonal = check_diagonal_bound(n_max)?;
    let iterated = check_iterated_sum_bound(n_max)?;
    let symbolic = symbolic_derivative_check(n_max.min(MAX_SYMBOLIC_ORDER - 2))?;

    // The flattest diagonal doubles with the order; checked past the
    // table range because it costs nothing.
    let doubling_orders = n_max.max(64);
    let mut doubling_pass = true;
    for n in 0..=doubling_orders {
        doubling_pass &= diagonal_coefficient(n, 0) == BigUint::one() << n;
    }

    let pass = diagonal.pass && iterated.pass && symbolic.pass && doubling_pass;
    let (csv, json) = ctx.artifact_paths();
    write_csv(&csv, CSV_HEADER, &csv_rows)?;
    write_json(
        &json,
        &Summary {
            kind: cfg.kind.name(),
            mode: ctx.mode.name(),
            n_max,
            table_rows: csv_rows.len(),
            diagonal_bound_pass: diagonal.pass,
            diagonal_max_ratio: diagonal.max_ratio,
            diagonal_worst_order: diagonal.worst_order,
            diagonal_worst_diagonal: diagonal.worst_diagonal,
            diagonal_entries_checked: diagonal.entries_checked,
            iterated_sum_pass: iterated.pass,
            iterated_sum_max_ratio: iterated.max_ratio,
            symbolic_orders_checked: symbolic.orders_checked,
            symbolic_pass: symbolic.pass,
            symbolic_term_counts: symbolic.term_counts,
            doubling_orders_checked: doubling_orders,
            doubling_pass,
            pass,
        },
    )?;
    Ok(RunOutcome { pass, csv, json })
}
