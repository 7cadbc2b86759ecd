//! Off-diagonal decay of `f(H)` kernel entries against the smoothness
//! bound, plus a descriptive stretched-exponential fit of the decay.

use anyhow::{bail, Result};
use serde::Serialize;

use propspeed_core::lattice::{Hamiltonian, LatticeBox};
use propspeed_core::poly_calculus::{best_kernel_decay_bound, gevrey_decay_fit};

use super::{RunContext, RunOutcome};
use crate::render::{sci, write_csv, write_json, yes_no};

/// Dominance slack: the bound is exact mathematics, the measured entry
/// comes out of a dense float eigensolver.
const REL_SLACK: f64 = 1e-8;
const ABS_SLACK: f64 = 1e-13;

const CSV_HEADER: &[&str] = &["r", "kernel_abs", "best_bound", "best_order", "ratio", "pass"];

#[derive(Serialize)]
struct FitSummary {
    c: f64,
    gamma: f64,
    residual: f64,
    dropped: Vec<u64>,
}

#[derive(Serialize)]
struct Summary {
    kind: &'static str,
    mode: &'static str,
    dimension: usize,
    half_width: i64,
    sites: usize,
    seed: Option<u64>,
    function: String,
    interval_lo: f64,
    interval_hi: f64,
    rows: usize,
    dominance_pass: bool,
    /// Largest measured/bound ratio over the grid (1 would be tight).
    max_ratio: Option<f64>,
    smoothness: f64,
    fit: Option<FitSummary>,
    fit_error: Option<String>,
    pass: bool,
}

pub fn run(ctx: &RunContext) -> Result<RunOutcome> {
    let cfg = ctx.config;
    let dim = cfg.dimension.unwrap_or(1);
    let half_width = cfg.half_width.unwrap_or(40);
    let grid = cfg
        .grid
        .clone()
        .unwrap_or_default()
        .r_or(&[2, 4, 6, 8, 10, 12, 14]);
    if grid.is_empty() {
        bail!("grid.r must name at least one separation");
    }
    if let Some(&bad) = grid.iter().find(|&&r| r < 2) {
        bail!("separation {bad} admits no decay bound; grid.r entries must be >= 2");
    }
    let max_r = *grid.iter().max().expect("nonempty");
    if (max_r as i64) > half_width {
        bail!("separation {max_r} does not fit in a box of half-width {half_width}");
    }
    let section = cfg.function_section()?;
    let f = section.build()?;
    let smoothness = section.smoothness.unwrap_or(1.0);
    if !(smoothness > 0.0) || !smoothness.is_finite() {
        bail!("function.smoothness must be a positive finite number");
    }

    let lattice = LatticeBox::new(dim, half_width)?;
    let h = Hamiltonian::new(cfg.potential_section().build_float(lattice, cfg.seed)?);
    let interval = h.spectral_interval();
    let eig = h.eigendecomposition(ctx.oracle_limit)?;

    let mut csv_rows = Vec::with_capacity(grid.len());
    let mut entries = Vec::with_capacity(grid.len());
    let mut dominance_pass = true;
    let mut max_ratio: Option<f64> = None;
    for &r in &grid {
        let mut x = vec![0i64; dim];
        let mut y = vec![0i64; dim];
        x[0] = -((r / 2) as i64);
        y[0] = (r - r / 2) as i64;
        let kernel_abs = eig.kernel_entry(|lam| f.eval(lam), &x, &y)?.abs();
        let (best_order, best_bound) = best_kernel_decay_bound(&f, interval, r)?;
        let row_pass = kernel_abs <= best_bound * (1.0 + REL_SLACK) + ABS_SLACK;
        dominance_pass &= row_pass;
        let ratio = (best_bound > 0.0).then(|| kernel_abs / best_bound);
        if let Some(q) = ratio {
            max_ratio = Some(max_ratio.map_or(q, |m: f64| m.max(q)));
        }
        entries.push((r, kernel_abs));
        csv_rows.push(vec![
            r.to_string(),
            sci(kernel_abs),
            sci(best_bound),
            best_order.to_string(),
            ratio.map_or_else(String::new, sci),
            yes_no(row_pass),
        ]);
    }

    let (fit, fit_error) = match gevrey_decay_fit(&entries, smoothness) {
        Ok(fit) => (
            Some(FitSummary {
                c: fit.c,
                gamma: fit.gamma,
                residual: fit.residual,
                dropped: fit.dropped,
            }),
            None,
        ),
        // The fit is descriptive, not an asserted inequality; too few
        // usable magnitudes is reported, not fatal.
        Err(e) => (None, Some(e.to_string())),
    };

    let (csv, json) = ctx.artifact_paths();
    write_csv(&csv, CSV_HEADER, &csv_rows)?;
    write_json(
        &json,
        &Summary {
            kind: cfg.kind.name(),
            mode: ctx.mode.name(),
            dimension: dim,
            half_width,
            sites: lattice.site_count(),
            seed: cfg.seed,
            function: f.label().to_string(),
            interval_lo: interval.a(),
            interval_hi: interval.b(),
            rows: csv_rows.len(),
            dominance_pass,
            max_ratio,
            smoothness,
            fit,
            fit_error,
            pass: dominance_pass,
        },
    )?;
    Ok(RunOutcome {
        pass: dominance_pass,
        csv,
        json,
    })
}
