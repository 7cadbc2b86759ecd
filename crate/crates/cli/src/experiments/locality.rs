//! Stability of smoothed spectral data under far-away potential edits.
//!
//! For each grid separation `R` the base potential is edited on every
//! site at l1 distance >= R from the origin, and the difference of the
//! two window quadratic forms at `delta_0` is compared against the
//! locality bound (and against the trivial `2 sup |window|` bound, so a
//! vacuous locality bound is visible rather than hidden).

use anyhow::{bail, Result};
use serde::Serialize;

use propspeed_core::lattice::{l1_norm, LatticeBox, Potential, SiteVector};
use propspeed_core::spectral_locality::LocalityExperiment;

use super::{RunContext, RunOutcome};
use crate::render::{sci, write_csv, write_json, yes_no};

const REL_SLACK: f64 = 1e-8;
const ABS_SLACK: f64 = 1e-12;

const CSV_HEADER: &[&str] = &[
    "r",
    "epsilon",
    "difference",
    "best_order",
    "best_bound",
    "trivial_bound",
    "vacuous",
    "pass",
];

#[derive(Serialize)]
struct Summary {
    kind: &'static str,
    mode: &'static str,
    dimension: usize,
    half_width: i64,
    sites: usize,
    seed: Option<u64>,
    function: String,
    lambda0: f64,
    perturbation: f64,
    rows: usize,
    dominance_pass: bool,
    vacuous_rows: usize,
    /// Largest difference/bound ratio (bound = the tighter of the two).
    max_ratio: Option<f64>,
    pass: bool,
}

pub fn run(ctx: &RunContext) -> Result<RunOutcome> {
    let cfg = ctx.config;
    let dim = cfg.dimension.unwrap_or(1);
    let half_width = cfg.half_width.unwrap_or(40);
    let grid = cfg.grid.clone().unwrap_or_default();
    let r_grid = grid.r_or(&[4, 6, 8]);
    let eps_grid = grid.epsilon_or(&[1.0, 0.5, 0.25]);
    if r_grid.is_empty() || eps_grid.is_empty() {
        bail!("grid.r and grid.epsilon must each name at least one value");
    }
    if let Some(&bad) = r_grid.iter().find(|&&r| r < 1 || r as i64 > half_width) {
        bail!("separation {bad} must lie in 1..={half_width} so the edited shell is nonempty");
    }
    let strength = cfg.perturbation.unwrap_or(1.0);
    if strength == 0.0 || !strength.is_finite() {
        bail!("perturbation must be nonzero and finite");
    }
    let section = cfg.function_section()?;
    let base = section.build()?;
    let lambda0 = section.lambda0.unwrap_or(0.0);

    let lattice = LatticeBox::new(dim, half_width)?;
    let v1 = cfg.potential_section().build_float(lattice, cfg.seed)?;
    let phi = SiteVector::delta(lattice, &vec![0i64; dim])?;

    let mut csv_rows = Vec::with_capacity(r_grid.len() * eps_grid.len());
    let mut dominance_pass = true;
    let mut vacuous_rows = 0usize;
    let mut max_ratio: Option<f64> = None;
    for &r in &r_grid {
        let v2 = Potential::from_fn(lattice, |site| {
            let bump = if l1_norm(site) >= r as i64 { strength } else { 0.0 };
            v1.value(site).expect("site from the same box") + bump
        })?;
        for &eps in &eps_grid {
            let experiment = LocalityExperiment::new(
                phi.clone(),
                v1.clone(),
                v2.clone(),
                base.clone(),
                lambda0,
                eps,
            )?;
            debug_assert_eq!(experiment.separation(), Some(r));
            let report = experiment.run(ctx.oracle_limit)?;
            let bound_used = report.best_bound.min(report.trivial_bound);
            let row_pass = report.difference <= bound_used * (1.0 + REL_SLACK) + ABS_SLACK;
            dominance_pass &= row_pass;
            vacuous_rows += report.vacuous as usize;
            if bound_used > 0.0 {
                let q = report.difference / bound_used;
                max_ratio = Some(max_ratio.map_or(q, |m: f64| m.max(q)));
            }
            csv_rows.push(vec![
                r.to_string(),
                sci(eps),
                sci(report.difference),
                report.best_order.map_or_else(String::new, |n| n.to_string()),
                sci(report.best_bound),
                sci(report.trivial_bound),
                yes_no(report.vacuous),
                yes_no(row_pass),
            ]);
        }
    }

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
            function: base.label().to_string(),
            lambda0,
            perturbation: strength,
            rows: csv_rows.len(),
            dominance_pass,
            vacuous_rows,
            max_ratio,
            pass: dominance_pass,
        },
    )?;
    Ok(RunOutcome {
        pass: dominance_pass,
        csv,
        json,
    })
}
