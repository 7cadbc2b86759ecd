//! Cosine-transform coefficients of even window profiles against their
//! derivative bounds, plus tail-mass comparisons.

use anyhow::{bail, Result};
use serde::Serialize;

use propspeed_core::cosine_transform::CosineProfile;

use super::{RunContext, RunOutcome};
use crate::render::{sci, write_csv, write_json, yes_no};

/// Coefficient rows compare two quadrature results to an exact bound;
/// the slack covers the quadrature noise floor.
const COEFF_ABS_SLACK: f64 = 1e-9;
/// Tail quadrature truncates a convergent integral; it can only
/// under-report, so a small relative margin suffices.
const TAIL_REL_SLACK: f64 = 1e-6;
const TAIL_ABS_SLACK: f64 = 1e-9;

const CSV_HEADER: &[&str] = &["t", "n", "coefficient_abs", "coefficient_bound", "pass"];

#[derive(Serialize)]
struct TailSummary {
    r: u64,
    order: u32,
    bound: f64,
    quadrature: f64,
    truncated_at: f64,
    pass: bool,
}

#[derive(Serialize)]
struct Summary {
    kind: &'static str,
    mode: &'static str,
    function: String,
    coefficient_rows: usize,
    coefficient_pass: bool,
    tails: Vec<TailSummary>,
    tail_pass: bool,
    /// Against `exp(-t^2/4)/sqrt(pi)`; only for the unit Gaussian.
    closed_form_max_err: Option<f64>,
    closed_form_pass: Option<bool>,
    pass: bool,
}

pub fn run(ctx: &RunContext) -> Result<RunOutcome> {
    let cfg = ctx.config;
    let section = cfg.function_section()?;
    let profile = CosineProfile::new(section.build()?)?;
    let grid = cfg.grid.clone().unwrap_or_default();
    let t_grid = grid.t_or(&[1.0, 2.0, 5.0, 10.0, 20.0]);
    let n_grid = grid.n_or(&[1, 2, 3, 4, 5, 6]);
    let r_grid = grid.r_or(&[2, 5, 10]);
    if t_grid.is_empty() || n_grid.is_empty() {
        bail!("grid.t and grid.n must each name at least one value");
    }
    if let Some(&bad) = t_grid.iter().find(|&&t| !(t > 0.0) || !t.is_finite()) {
        bail!("time {bad} is not usable; grid.t entries must be positive finite");
    }
    if let Some(&bad) = r_grid.iter().find(|&&r| r == 0) {
        bail!("tail radius {bad} must be positive");
    }

    let mut csv_rows = Vec::with_capacity(t_grid.len() * n_grid.len());
    let mut coefficient_pass = true;
    let mut closed_form_max_err: Option<f64> = None;
    for &t in &t_grid {
        let value = profile.coefficient(t)?.abs();
        if cfg.function_section()?.is_unit_gaussian() {
            let closed = (-t * t / 4.0).exp() / std::f64::consts::PI.sqrt();
            let err = (value - closed).abs();
            closed_form_max_err =
                Some(closed_form_max_err.map_or(err, |m: f64| m.max(err)));
        }
        for &n in &n_grid {
            let bound = profile.coefficient_bound(n, t)?;
            let row_pass = value <= bound + COEFF_ABS_SLACK;
            coefficient_pass &= row_pass;
            csv_rows.push(vec![
                sci(t),
                n.to_string(),
                sci(value),
                sci(bound),
                yes_no(row_pass),
            ]);
        }
    }

    let mut tails = Vec::with_capacity(r_grid.len());
    let mut tail_pass = true;
    for &r in &r_grid {
        let radius = r as f64;
        let (order, bound) = profile.best_tail_bound(radius)?;
        let (quadrature, truncated_at) = profile.tail_quadrature(radius)?;
        let row_pass = quadrature <= bound * (1.0 + TAIL_REL_SLACK) + TAIL_ABS_SLACK;
        tail_pass &= row_pass;
        tails.push(TailSummary {
            r,
            order,
            bound,
            quadrature,
            truncated_at,
            pass: row_pass,
        });
    }

    let closed_form_pass = closed_form_max_err.map(|err| err <= 1e-9);
    let pass = coefficient_pass && tail_pass && closed_form_pass.unwrap_or(true);
    let (csv, json) = ctx.artifact_paths();
    write_csv(&csv, CSV_HEADER, &csv_rows)?;
    write_json(
        &json,
        &Summary {
            kind: cfg.kind.name(),
            mode: ctx.mode.name(),
            function: profile.label().to_string(),
            coefficient_rows: csv_rows.len(),
            coefficient_pass,
            tails,
            tail_pass,
            closed_form_max_err,
            closed_form_pass,
            pass,
        },
    )?;
    Ok(RunOutcome { pass, csv, json })
}
