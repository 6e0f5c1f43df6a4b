//! Subcommand bodies. Each returns the JSON summary echoed into `meta.json`.

use std::fs;

use serde::Serialize;
use serde_json::{json, Value};

use qvi_core::analytic::{analytic_solution, AkClosedForm, AnalyticSolution};
use qvi_core::simulate::{
    dpp_check, euler_residual, simulate, utility_breakdown, NumericPolicy, Policy, SimConfig, Trajectory, ValueFunction,
};
use qvi_core::solver::{extract_regions, solve_qvi, DiscretizedSolution, Grid, SolverConfig};
use qvi_core::StationaryProblem;

use crate::config::{PolicySource, ProblemSection, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{numeric_csv, OutDir};
use crate::table::SolutionTable;

fn valid_problem(section: &ProblemSection) -> Result<StationaryProblem> {
    let p = section.build();
    let report = p.validate();
    if !report.is_valid() {
        return Err(CliError::Domain(format!("invalid problem: {report}")));
    }
    Ok(p)
}

/// Largest finite pairwise threshold, when closed forms exist.
fn largest_threshold(p: &StationaryProblem) -> Option<f64> {
    let closed = AkClosedForm::new(p).ok()?;
    closed.k_thr.iter().flatten().flatten().copied().filter(|k| k.is_finite()).reduce(f64::max)
}

fn warn_short_domain(p: &StationaryProblem, grid_top: f64) {
    if let Some(k) = largest_threshold(p) {
        if grid_top < 1.5 * k {
            eprintln!("warning: k_max = {grid_top} is below 1.5 x the largest threshold {k}");
        }
    }
}

pub fn validate(cfg: &RunConfig) -> Result<Value> {
    let p = cfg.problem.build();
    let report = p.validate();
    println!("{}", crate::output::to_json(&report).trim_end());
    if !report.is_valid() {
        return Err(CliError::Domain(format!("invalid problem: {report}")));
    }
    cfg.grid.build()?;
    cfg.solver.build()?;
    cfg.sim.build(p.prefs.gamma)?;
    p.regime(cfg.sim.i0)?;
    println!("valid");
    Ok(json!({ "valid": true }))
}

pub fn analytic(cfg: &RunConfig, out: &mut OutDir) -> Result<Value> {
    let p = valid_problem(&cfg.problem)?;
    if !(2..=3).contains(&p.num_regimes()) {
        return Err(CliError::Domain(format!(
            "closed-form regions need 2 or 3 regimes, got {}",
            p.num_regimes()
        )));
    }
    let sol = analytic_solution(&p)?;
    let grid = cfg.grid.build()?;
    warn_short_domain(&p, grid.k_max);
    let c = &sol.closed;
    let thresholds = json!({
        "q": c.q,
        "a": c.a,
        "k": c.k_thr,
        "growth": c.growth,
        "mpc": c.mpc,
        "value_map": sol.value_map,
        "regions": sol.regions,
    });
    out.json("thresholds.json", &thresholds)?;

    let n = p.num_regimes();
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("stay_{i}")));
    header.push("v".into());
    header.extend((1..=n).map(|i| format!("c_{i}")));
    let rows = grid.nodes().into_iter().map(|k| {
        let mut row = vec![k];
        row.extend(p.regime_ids().map(|i| qvi_core::analytic::stay_value(&p, i, k).map_or(f64::NAN, |v| v.to_f64())));
        row.push(sol.value(k).to_f64());
        row.extend(p.regime_ids().map(|i| sol.consumption(i, k)));
        row
    });
    out.csv("value.csv", &numeric_csv(&header, rows))?;
    Ok(thresholds)
}

fn solved(cfg: &RunConfig, p: &StationaryProblem) -> Result<(Grid, SolverConfig, DiscretizedSolution)> {
    let grid = cfg.grid.build()?;
    let scfg = cfg.solver.build()?;
    warn_short_domain(p, grid.k_max);
    let s = solve_qvi(p, &grid, &scfg)?;
    Ok((grid, scfg, s))
}

fn diagnostics(s: &DiscretizedSolution) -> Value {
    json!({
        "converged": s.converged,
        "iterations": s.iterations,
        "last_change": s.last_change,
        "mode": s.mode,
        "residual": s.diagnostics,
    })
}

fn not_converged(s: &DiscretizedSolution) -> CliError {
    CliError::NotConverged { iterations: s.iterations, last_change: s.last_change }
}

pub fn solve(cfg: &RunConfig, out: &mut OutDir) -> Result<Value> {
    let p = valid_problem(&cfg.problem)?;
    let (_, _, s) = solved(cfg, &p)?;
    out.csv("solution.csv", &SolutionTable::from_solution(&s).to_csv())?;
    out.json("regions.json", &extract_regions(&s))?;
    let diag = diagnostics(&s);
    out.json("diagnostics.json", &diag)?;
    if !s.converged {
        return Err(not_converged(&s));
    }
    Ok(diag)
}

#[derive(Debug, Serialize)]
struct PricePhase {
    regime: usize,
    t_start: f64,
    t_end: f64,
    rental_rate: f64,
    wage: f64,
}

/// Factor prices along the path: `R = A` of the active regime, `w = 0`.
fn price_phases(p: &StationaryProblem, tr: &Trajectory) -> Vec<PricePhase> {
    let mut phases: Vec<PricePhase> = Vec::new();
    for s in &tr.samples {
        match phases.last_mut() {
            Some(ph) if ph.regime == s.regime => ph.t_end = s.t,
            last => {
                if let Some(ph) = last {
                    ph.t_end = s.t;
                }
                phases.push(PricePhase {
                regime: s.regime,
                t_start: s.t,
                t_end: s.t,
                    rental_rate: p.regimes()[s.regime - 1].tech,
                    wage: 0.0,
                })
            }
        }
    }
    phases
}

fn run_simulation<P: Policy + ValueFunction>(
    cfg: &RunConfig,
    p: &StationaryProblem,
    policy: &P,
    sim: &SimConfig,
    out: &mut OutDir,
) -> Result<Value> {
    let tr = simulate(p, policy, cfg.sim.i0, cfg.sim.k0, sim)?;
    let header: Vec<String> = ["t", "k", "c", "regime", "u_inst", "U_cum"].map(String::from).to_vec();
    let rows = tr.samples.iter().map(|s| vec![s.t, s.k, s.c, s.regime as f64, s.u_inst, s.u_cum]);
    out.csv("trajectory.csv", &numeric_csv(&header, rows))?;
    out.json("events.json", &tr.events)?;

    let r = 0.5 * sim.t_max;
    let dpp = match dpp_check(p, policy, &tr, r) {
        Ok(v) => json!({ "r": r, "residual": v }),
        Err(e) => json!({ "r": r, "residual": null, "error": e.to_string() }),
    };
    let summary = json!({
        "total_utility": utility_breakdown(&tr, p).total,
        "utility": utility_breakdown(&tr, p),
        "dpp": dpp,
        "euler_residual": euler_residual(&tr, p),
        "termination": tr.termination,
        "switches": tr.events.len(),
        "final_capital": tr.samples.last().map(|s| s.k),
        "prices": price_phases(p, &tr),
    });
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn missing_policy(why: impl std::fmt::Display) -> CliError {
    CliError::Domain(format!("missing policy: {why}"))
}

pub fn simulate_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<Value> {
    let p = valid_problem(&cfg.problem)?;
    let sim = cfg.sim.build(p.prefs.gamma)?;
    match cfg.sim.policy {
        PolicySource::Analytic => {
            let sol = analytic_solution(&p).map_err(missing_policy)?;
            run_simulation(cfg, &p, &sol, &sim, out)
        }
        PolicySource::Numeric => {
            let (_, _, s) = solved(cfg, &p)?;
            if !s.converged {
                return Err(not_converged(&s));
            }
            run_simulation(cfg, &p, &NumericPolicy::new(&s), &sim, out)
        }
        PolicySource::SolutionFile => {
            let path = out.path("solution.csv");
            let text = fs::read_to_string(&path).map_err(|e| missing_policy(format!("{}: {e}", path.display())))?;
            let table = SolutionTable::parse(&text).map_err(|e| missing_policy(format!("{}: {e}", path.display())))?;
            if table.num_regimes() != p.num_regimes() {
                return Err(missing_policy("solution.csv does not match the configured regimes"));
            }
            run_simulation(cfg, &p, &table, &sim, out)
        }
    }
}

/// Closed-form thresholds `k_ij`, `i < j`, and the regime thresholds `x_i`.
fn kinks(p: &StationaryProblem, oracle: &AnalyticSolution) -> Vec<f64> {
    let mut k: Vec<f64> = p.regimes().iter().map(|r| r.threshold).collect();
    for i in p.regime_ids() {
        for j in i + 1..=p.num_regimes() {
            k.extend(oracle.closed.threshold(i, j));
        }
    }
    k
}

fn first_switch(tr: &Trajectory) -> Option<f64> {
    tr.events.iter().find(|e| e.time > 0.0).map(|e| e.time)
}

pub fn compare(cfg: &RunConfig, out: &mut OutDir) -> Result<Value> {
    let p = valid_problem(&cfg.problem)?;
    let reference = valid_problem(cfg.acceptance.reference.as_ref().unwrap_or(&cfg.problem))?;
    if reference.num_regimes() != p.num_regimes() {
        return Err(CliError::Domain("reference problem has a different number of regimes".into()));
    }
    let oracle = analytic_solution(&reference)?;
    let (grid, _, s) = solved(cfg, &p)?;
    let h = grid.h();
    let skip = kinks(&reference, &oracle);

    let mut ks = Vec::new();
    let mut abs_err = Vec::new();
    let mut rel_err = Vec::new();
    for (m, k) in grid.nodes().into_iter().enumerate() {
        if skip.iter().any(|&x| (k - x).abs() <= h) {
            continue;
        }
        let Some(exact) = oracle.value(k).finite() else { continue };
        let worst = (0..s.num_regimes()).map(|i| (s.values[i][m] - exact).abs()).fold(0.0, f64::max);
        ks.push(k);
        abs_err.push(worst);
        rel_err.push(worst / exact.abs());
    }
    let sup_abs = abs_err.iter().copied().fold(0.0, f64::max);
    let sup_rel = rel_err.iter().copied().fold(0.0, f64::max);

    let k12 = oracle.closed.threshold(1, 2);
    let k12_hat = extract_regions(&s).pieces_to(1, 2).first().map(|iv| iv.lo);
    let threshold_cells = match (k12, k12_hat) {
        (Some(a), Some(b)) => Some((a - b).abs() / h),
        _ => None,
    };

    let sim = cfg.sim.build(reference.prefs.gamma)?;
    let t_exact = first_switch(&simulate(&reference, &oracle, cfg.sim.i0, cfg.sim.k0, &sim)?);
    let t_numeric = first_switch(&simulate(&p, &NumericPolicy::new(&s), cfg.sim.i0, cfg.sim.k0, &sim)?);
    let switch_rel = t_exact.map(|t| t_numeric.map_or(f64::INFINITY, |tn| ((tn - t) / t).abs()));

    let acc = &cfg.acceptance;
    let mut failing = Vec::new();
    if !(sup_rel <= acc.value_rel_tol) {
        failing.push(format!("value_rel_error {sup_rel:e} > {:e}", acc.value_rel_tol));
    }
    if k12.is_some() && !threshold_cells.map_or(false, |c| c <= acc.threshold_cells) {
        failing.push(format!("threshold_cells {threshold_cells:?} > {}", acc.threshold_cells));
    }
    if let Some(e) = switch_rel {
        if !(e <= acc.switch_time_rel_tol) {
            failing.push(format!("switch_time_rel_error {e:e} > {:e}", acc.switch_time_rel_tol));
        }
    }

    let report = json!({
        "grid": { "k_min": grid.k_min, "k_max": grid.k_max, "n": grid.n, "h": h },
        "converged": s.converged,
        "excluded_points": skip,
        "sup_abs_error": sup_abs,
        "sup_rel_error": sup_rel,
        "profile": { "k": ks, "abs_error": abs_err, "rel_error": rel_err },
        "k12": k12,
        "k12_numeric": k12_hat,
        "threshold_error_cells": threshold_cells,
        "switch_time": { "analytic": t_exact, "numeric": t_numeric, "rel_error": switch_rel },
        "tolerances": acc,
        "failing": failing,
        "pass": failing.is_empty(),
    });
    out.json("compare.json", &report)?;
    if !s.converged {
        return Err(not_converged(&s));
    }
    if !failing.is_empty() {
        return Err(CliError::Tolerance(failing.join("; ")));
    }
    Ok(json!({ "sup_rel_error": sup_rel, "threshold_error_cells": threshold_cells, "switch_time_rel_error": switch_rel }))
}
