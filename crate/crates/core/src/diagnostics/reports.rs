use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{nd_partition, nontrivial_unchecked, NdPartition};
use crate::config::communication_graph_unchecked;
use crate::config::components;
use crate::dynamics::Trajectory;
use crate::error::{HkError, Result};
use crate::spectral::{
    classified_active_energy, classified_energy, diameter, gap_bound, second_eigenvalue,
};

pub const REPORT_HEADER: &str =
    "t,energy,active_energy,lambda,gap_bound,decrement,guaranteed_decrement,total_movement,diameter,components";

/// Largest population for which spectral diagnostics run without override.
pub const DEFAULT_SPECTRAL_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub spectral: bool,
    /// Flag steps that are non-trivial at this scale.
    pub nontrivial_eps: Option<f64>,
    /// Attach the leftmost-agent partition (one-dimensional runs only).
    pub partitions: bool,
    pub spectral_limit: usize,
    pub allow_large: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            spectral: false,
            nontrivial_eps: None,
            partitions: false,
            spectral_limit: DEFAULT_SPECTRAL_LIMIT,
            allow_large: false,
        }
    }
}

impl ReportOptions {
    pub fn spectral() -> Self {
        ReportOptions {
            spectral: true,
            ..Default::default()
        }
    }
}

/// Diagnostics for the transition `t -> t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: usize,
    pub energy: Option<f64>,
    pub active_energy: Option<f64>,
    pub lambda: Option<f64>,
    pub gap_bound: Option<f64>,
    /// `E(x_t) - E(x_{t+1})`.
    pub decrement: Option<f64>,
    /// `(1 - lambda^2) E_act(x_t)`.
    pub guaranteed_decrement: Option<f64>,
    pub total_movement: f64,
    pub diameter: Option<usize>,
    pub components: Option<usize>,
    pub nontrivial: Option<bool>,
    pub partition: Option<NdPartition>,
}

pub fn attach_reports(traj: &mut Trajectory, opts: &ReportOptions) -> Result<()> {
    let n = traj.initial().n();
    if opts.spectral && n > opts.spectral_limit && !opts.allow_large {
        return Err(HkError::SpectralLimit {
            n,
            limit: opts.spectral_limit,
        });
    }
    if let Some(eps) = opts.nontrivial_eps {
        if !(eps > 0.0) {
            return Err(HkError::InvalidParameter(format!(
                "eps must be positive, got {eps}"
            )));
        }
    }
    let mut rows = Vec::with_capacity(traj.steps());
    // energy at t+1 is reused as energy at t on the next row
    let mut carried: Option<f64> = None;
    for t in 0..traj.steps() {
        let x_t = &traj.configs[t];
        let x_next = &traj.configs[t + 1];
        let g_t = traj.graph_at(t);
        let mut row = StepReport {
            t,
            energy: None,
            active_energy: None,
            lambda: None,
            gap_bound: None,
            decrement: None,
            guaranteed_decrement: None,
            total_movement: x_t.movement_to(x_next),
            diameter: None,
            components: None,
            nontrivial: opts
                .nontrivial_eps
                .map(|eps| nontrivial_unchecked(x_t, g_t, eps)),
            partition: None,
        };
        if opts.spectral {
            let cg = communication_graph_unchecked(x_t, g_t);
            let cg_next = communication_graph_unchecked(x_next, traj.graph_at(t + 1));
            let energy = carried.unwrap_or_else(|| classified_energy(x_t, &cg));
            let energy_next = classified_energy(x_next, &cg_next);
            carried = Some(energy_next);
            let active = classified_active_energy(x_t, &cg);
            let lambda = second_eigenvalue(&cg);
            row.energy = Some(energy);
            row.active_energy = Some(active);
            row.lambda = Some(lambda);
            row.gap_bound = Some(gap_bound(&cg));
            row.decrement = Some(energy - energy_next);
            row.guaranteed_decrement = Some((1.0 - lambda * lambda) * active);
            row.diameter = Some(diameter(&cg));
            row.components = Some(components(&cg).len());
        }
        if opts.partitions && x_t.dim() == 1 {
            row.partition = Some(nd_partition(x_t)?);
        }
        rows.push(row);
    }
    traj.reports = Some(rows);
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes reports in the CSV layout of [`REPORT_HEADER`]; columns that were
/// not computed are left empty.
pub fn write_report_csv<W: Write>(out: W, rows: &[StepReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            opt(r.energy),
            opt(r.active_energy),
            opt(r.lambda),
            opt(r.gap_bound),
            opt(r.decrement),
            opt(r.guaranteed_decrement),
            r.total_movement.to_string(),
            opt(r.diameter),
            opt(r.components),
        ])?;
    }
    w.flush().map_err(|e| HkError::io("<report>", e))?;
    Ok(())
}
