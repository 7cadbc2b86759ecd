//! Moment vanishing below the support separation.
//!
//! For each grid separation `R` two deltas are placed `R` apart (split
//! around the origin to keep the box demand near `3R/2`) and the suite
//! checks that `<delta_x, H^n delta_y>` vanishes for every `n < R` and
//! that the order-`R` moment equals the shortest-walk count, which no
//! potential can touch. Both checks are exact in either arithmetic mode:
//! amplitudes that never reach the far site are structural zeros, not
//! cancellations, and the order-`R` entry is a small integer.

use anyhow::{bail, Context, Result};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use propspeed_core::lattice::{Hamiltonian, LatticeBox, SiteVector};
use propspeed_core::propagation::{check_vanishing, shortest_walk_count, VanishingReport};
use propspeed_core::scalar::Scalar;

use super::{RunContext, RunOutcome};
use crate::config::Mode;
use crate::render::{exact_decimal, sci, write_csv, write_json, yes_no};

const CSV_HEADER: &[&str] = &[
    "r",
    "separation",
    "max_abs_below",
    "boundary_moment",
    "walk_count",
    "vanish_pass",
    "walk_pass",
];

#[derive(Serialize)]
struct Summary {
    kind: &'static str,
    mode: &'static str,
    dimension: usize,
    half_width: i64,
    seed: Option<u64>,
    instances: usize,
    /// Largest `|m_n|` seen below any separation, as a string: `"0"` is
    /// the exact-rational zero.
    residual_max: String,
    vanishing_pass: bool,
    boundary_walks_pass: bool,
    pass: bool,
}

struct SuiteRow<S> {
    r: u64,
    report: VanishingReport<S>,
    walks: BigUint,
    walk_pass: bool,
}

/// Deltas `R` apart with the separation spread round-robin over the
/// axes (so the walk count is a genuine multinomial, not 1) and each
/// component split around the origin (so the box demand stays near
/// `3R/2` instead of `2R`).
fn endpoints(dim: usize, r: u64) -> (Vec<i64>, Vec<i64>) {
    let mut x = vec![0i64; dim];
    let mut y = vec![0i64; dim];
    for axis in 0..dim {
        let c = (r / dim as u64 + u64::from((axis as u64) < r % dim as u64)) as i64;
        x[axis] = -(c / 2);
        y[axis] = c - c / 2;
    }
    (x, y)
}

fn required_half_width(dim: usize, grid: &[u64]) -> i64 {
    grid.iter()
        .map(|&r| {
            let (x, y) = endpoints(dim, r);
            let radius = x.iter().map(|v| v.abs()).sum::<i64>().max(
                y.iter().map(|v| v.abs()).sum::<i64>(),
            );
            radius + r as i64
        })
        .max()
        .unwrap_or(1)
        .max(1)
}

fn run_suite<S: Scalar>(
    h: &Hamiltonian<S>,
    dim: usize,
    grid: &[u64],
    walk_matches: impl Fn(&S, &BigUint) -> Result<bool>,
) -> Result<Vec<SuiteRow<S>>> {
    grid.iter()
        .map(|&r| {
            let (x, y) = endpoints(dim, r);
            let dx = SiteVector::delta(h.lattice(), &x)?;
            let dy = SiteVector::delta(h.lattice(), &y)?;
            let report = check_vanishing(h, &dx, &dy)
                .with_context(|| format!("separation {r}"))?;
            let walks = shortest_walk_count(&x, &y)?;
            let walk_pass = walk_matches(&report.boundary_moment, &walks)?;
            Ok(SuiteRow {
                r,
                report,
                walks,
                walk_pass,
            })
        })
        .collect()
}

fn emit<S: Scalar>(
    ctx: &RunContext,
    dim: usize,
    half_width: i64,
    rows: &[SuiteRow<S>],
    render: impl Fn(&S) -> String,
) -> Result<RunOutcome> {
    let mut csv_rows = Vec::with_capacity(rows.len());
    let mut residual_max = S::zero();
    let mut vanishing_pass = true;
    let mut walks_pass = true;
    for row in rows {
        vanishing_pass &= row.report.all_zero_below;
        walks_pass &= row.walk_pass;
        if row.report.max_abs_below > residual_max {
            residual_max = row.report.max_abs_below.clone();
        }
        csv_rows.push(vec![
            row.r.to_string(),
            row.report.separation.to_string(),
            render(&row.report.max_abs_below),
            render(&row.report.boundary_moment),
            row.walks.to_string(),
            yes_no(row.report.all_zero_below),
            yes_no(row.walk_pass),
        ]);
    }
    let pass = vanishing_pass && walks_pass;
    let (csv, json) = ctx.artifact_paths();
    write_csv(&csv, CSV_HEADER, &csv_rows)?;
    write_json(
        &json,
        &Summary {
            kind: ctx.config.kind.name(),
            mode: ctx.mode.name(),
            dimension: dim,
            half_width,
            seed: ctx.config.seed,
            instances: rows.len(),
            residual_max: render(&residual_max),
            vanishing_pass,
            boundary_walks_pass: walks_pass,
            pass,
        },
    )?;
    Ok(RunOutcome { pass, csv, json })
}

pub fn run(ctx: &RunContext) -> Result<RunOutcome> {
    let cfg = ctx.config;
    let dim = cfg.dimension.unwrap_or(1);
    let grid = cfg
        .grid
        .clone()
        .unwrap_or_default()
        .r_or(&[1, 2, 3, 4, 5, 6]);
    if grid.is_empty() {
        bail!("grid.r must name at least one separation");
    }
    let needed = required_half_width(dim, &grid);
    let half_width = cfg.half_width.unwrap_or(needed);
    if half_width < needed {
        bail!(
            "half-width {half_width} cannot hold the requested moment orders; need at least {needed}"
        );
    }
    let lattice = LatticeBox::new(dim, half_width)?;
    let section = cfg.potential_section();
    match ctx.mode {
        Mode::Exact => {
            let h = Hamiltonian::new(section.build_exact(lattice, cfg.seed)?);
            let rows = run_suite(&h, dim, &grid, |m: &BigRational, w| {
                Ok(*m == BigRational::from_integer(w.clone().into()))
            })?;
            emit(ctx, dim, half_width, &rows, exact_decimal)
        }
        Mode::Float => {
            let h = Hamiltonian::new(section.build_float(lattice, cfg.seed)?);
            let rows = run_suite(&h, dim, &grid, |m: &f64, w| {
                if w.bits() > 53 {
                    bail!("walk count {w} exceeds exact float range; use exact mode");
                }
                Ok(*m == w.to_f64().expect("<= 53 bits"))
            })?;
            emit(ctx, dim, half_width, &rows, |v| sci(*v))
        }
    }
}
