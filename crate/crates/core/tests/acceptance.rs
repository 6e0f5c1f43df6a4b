//! Acceptance suite for the benchmark economy and its variants.
//!
//! Every criterion prints exactly one `PASS` or `FAIL` line with the measured
//! quantity next to its tolerance. The binary exits non-zero when any
//! numbered criterion fails. Lines tagged `S*` are supplementary checks
//! against the exact costless solution, obtained by integrating the
//! regime-1 equation down from the net-output crossing.

use std::process::ExitCode;
use std::time::Instant;

use qvi_core::analytic::{
    a_ratio, a_ratio_from_gap, analytic_solution, k_threshold, q_coefficient, stay_value, switch_time,
    AnalyticSolution,
};
use qvi_core::simulate::{dpp_check, dynamics_probes, euler_residual, simulate, total_utility, NumericPolicy, SimConfig};
use qvi_core::solver::{extract_regions, solve_qvi, solve_vanishing, DiscretizedSolution, Grid, SolverConfig};
use qvi_core::{Preferences, StationaryProblem, SwitchingCostMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXPECTED_A12: f64 = 2.329640;
const EXPECTED_K12: f64 = 1.752084;
const EXPECTED_Q1: f64 = -110.8033;
const EXPECTED_Q2: f64 = -47.5624;
const EXPECTED_T12: f64 = 22.80;

// exact costless value below the flip at k = 2.5; 25-digit series integration
const ODE_REFERENCE: [(f64, f64); 6] = [
    (0.25, -440.77033261514466761),
    (0.5, -217.56902774682131112),
    (1.0, -104.15466960272649616),
    (1.5, -65.005559111193722386),
    (1.752084, -53.360054033873611544),
    (2.0, -44.571766313734503651),
];

fn bench() -> StationaryProblem {
    StationaryProblem::new(
        [(0.2, 0.0), (0.3, 1.0)],
        Preferences::new(2.0, 0.04, 0.0, 0.05),
        SwitchingCostMatrix::vanishing(2),
    )
}

fn three() -> StationaryProblem {
    StationaryProblem::new(
        [(0.2, 0.0), (0.3, 1.0), (0.4, 2.0)],
        Preferences::new(2.0, 0.04, 0.0, 0.05),
        SwitchingCostMatrix::vanishing(3),
    )
}

fn grid(n: usize) -> Grid {
    Grid::new(0.01, 6.0, n).expect("benchmark grid")
}

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, what: &str) {
        println!("{} [{id}] {what}", if ok { "PASS" } else { "FAIL" });
        if !ok && !id.starts_with('S') {
            self.failed += 1;
        }
    }
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Relative sup error on `[0.1, 5]` against `oracle`, skipping one cell
/// around each point of `kinks`.
fn sup_error(s: &DiscretizedSolution, oracle: impl Fn(f64) -> f64, kinks: &[f64]) -> f64 {
    let g = &s.grid;
    (0..g.n)
        .map(|m| (m, g.node(m)))
        .filter(|&(_, k)| (0.1..=5.0).contains(&k) && kinks.iter().all(|&x| (k - x).abs() > g.h()))
        .map(|(m, k)| rel(s.values[0][m], oracle(k)))
        .fold(0.0, f64::max)
}

/// Nodes where the active regime of a costless solution changes, as the
/// capital level of the first node of the new regime.
fn flips(s: &DiscretizedSolution) -> Vec<(f64, usize, usize)> {
    let act = s.active.as_ref().expect("costless solution");
    act.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(m, w)| (s.grid.node(m + 1), w[0], w[1]))
        .collect()
}

fn criterion_1(r: &mut Report, p: &StationaryProblem) {
    let a = a_ratio(p, 1, 2).unwrap();
    let b = a_ratio_from_gap(p, 1, 2).unwrap();
    let k12 = k_threshold(p, 1, 2).unwrap();
    let v1 = stay_value(p, 1, k12).unwrap().finite().unwrap();
    let v2 = stay_value(p, 2, k12).unwrap().finite().unwrap();
    let (q1, q2) = (q_coefficient(p, 1).unwrap(), q_coefficient(p, 2).unwrap());
    let ok = rel(a, b) <= 1e-10
        && rel(v1, v2) <= 1e-9
        // expected values are quoted to six decimals (four for Q): one unit
        // in the last quoted place
        && (a - EXPECTED_A12).abs() <= 1e-6
        && (k12 - EXPECTED_K12).abs() <= 1e-6
        && (q1 - EXPECTED_Q1).abs() <= 1e-4
        && (q2 - EXPECTED_Q2).abs() <= 1e-4;
    r.line(
        "1",
        ok,
        &format!(
            "analytic identities: a12 routes differ by {:.1e} (tol 1e-10), value match {:.1e} (tol 1e-9); \
             a12={a:.7} k12={k12:.7} Q1={q1:.5} Q2={q2:.5}",
            rel(a, b),
            rel(v1, v2)
        ),
    );
}

fn criteria_2_3_11(r: &mut Report, p: &StationaryProblem, oracle: &AnalyticSolution) {
    let k12 = k_threshold(p, 1, 2).unwrap();
    let piecewise = |k: f64| oracle.value(k).finite().unwrap();
    let cfg = SolverConfig::default();

    let t = Instant::now();
    let s = solve_vanishing(p, &grid(4001), &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let err = sup_error(&s, piecewise, &[1.0, k12]);
    r.line(
        "2",
        s.converged && err <= 1e-3 && secs <= 10.0,
        &format!("value error vs piecewise closed form at n=4001: {err:.3e} (tol 1e-3), {secs:.2} s (target 10 s)"),
    );

    let fine = solve_vanishing(p, &grid(8001), &cfg).unwrap();
    let cells = |s: &DiscretizedSolution| {
        flips(s).iter().filter(|f| f.1 == 1 && f.2 == 2).map(|f| (f.0 - k12).abs() / s.grid.h()).fold(f64::INFINITY, f64::min)
    };
    let (c4, c8) = (cells(&s), cells(&fine));
    r.line(
        "3",
        c4 <= 1.0 && c8 <= 1.0,
        &format!(
            "regime flip vs k12: {c4:.1} cells at n=4001, {c8:.1} cells at n=8001 (tol 1 cell); flip found at k={:.4}",
            flips(&s).first().map_or(f64::NAN, |f| f.0)
        ),
    );

    let mut errs = Vec::new();
    for n in [501, 1001, 2001, 4001] {
        let s = solve_vanishing(p, &grid(n), &cfg).unwrap();
        errs.push(sup_error(&s, piecewise, &[1.0, k12]));
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    r.line(
        "11",
        ratios.iter().all(|&q| q >= 1.7),
        &format!("refinement vs piecewise closed form: errors [{}], ratios {ratios:.2?} (tol >= 1.7)", sci(&errs)),
    );
}

fn supplementary_exact(r: &mut Report, p: &StationaryProblem) {
    let cfg = SolverConfig::default();
    let mut errs = Vec::new();
    let mut flip_cells = Vec::new();
    for n in [1001, 2001, 4001, 8001] {
        let s = solve_vanishing(p, &grid(n), &cfg).unwrap();
        let e = ODE_REFERENCE
            .iter()
            .map(|&(k, v)| rel(s.value(1, k), v))
            .fold(0.0, f64::max);
        errs.push(e);
        let f = flips(&s);
        flip_cells.push(if f.len() == 1 { (f[0].0 - 2.5).abs() / s.grid.h() } else { f64::INFINITY });
        if n == 4001 {
            let above = (0..s.grid.n)
                .filter(|&m| (2.6..=5.0).contains(&s.grid.node(m)))
                .map(|m| rel(s.values[0][m], stay_value(p, 2, s.grid.node(m)).unwrap().finite().unwrap()))
                .fold(0.0, f64::max);
            r.line("S1", above <= 1e-3, &format!("value above the flip vs regime-2 stay value at n=4001: {above:.3e} (tol 1e-3)"));
        }
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    r.line(
        "S2",
        ratios.iter().all(|&q| q >= 1.7),
        &format!("refinement vs exact costless value: errors [{}], ratios {ratios:.2?} (tol >= 1.7)", sci(&errs)),
    );
    r.line(
        "S3",
        flip_cells.iter().all(|&c| c <= 1.0),
        &format!("single flip at the net-output crossing k=2.5: {flip_cells:.2?} cells (tol 1 cell)"),
    );
}

fn criteria_4_5(r: &mut Report, p: &StationaryProblem, residual_ok: &mut Vec<(String, bool)>) {
    let g = grid(4001);
    let cfg = SolverConfig::default();
    let free = solve_vanishing(p, &g, &cfg).unwrap();
    residual_ok.push(("vanishing n=4001".into(), free.diagnostics.is_clean()));
    let mut gaps = Vec::new();
    let mut above = 0.0f64;
    let mut below = 0.0f64;
    let mut below_v1 = 0.0f64;
    for eta in [0.1, 0.01, 0.001] {
        let s = solve_qvi(&p.with_costs(SwitchingCostMatrix::uniform(2, eta)), &g, &cfg).unwrap();
        residual_ok.push((format!("eta={eta}"), s.converged && s.diagnostics.is_clean()));
        gaps.push((0..g.n).map(|m| (s.values[0][m] - s.values[1][m]).abs()).fold(0.0, f64::max));
        for m in 0..g.n {
            let vf = free.values[0][m];
            for i in 0..2 {
                above = above.max(s.values[i][m] - vf);
                below = below.max((vf - eta) - s.values[i][m]);
            }
            below_v1 = below_v1.max((vf - eta) - s.values[0][m]);
        }
    }
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let ok = decreasing && gaps[2] <= 5e-3 && above <= 1e-9 && below <= 1e-9;
    r.line(
        "4",
        ok,
        &format!(
            "vanishing-cost collapse: sup|v1-v2| = [{}] (strictly decreasing, last <= 5e-3); \
             sandwich excess above {above:.1e}, below {below:.1e} (regime 1 only {below_v1:.1e}) (tol 1e-9)",
            sci(&gaps)
        ),
    );

    let cheap = solve_qvi(&p.with_costs(SwitchingCostMatrix::uniform(2, 0.01)), &g, &cfg).unwrap();
    let dear = solve_qvi(&p.with_costs(SwitchingCostMatrix::uniform(2, 0.02)), &g, &cfg).unwrap();
    residual_ok.push(("eta=0.02".into(), dear.converged && dear.diagnostics.is_clean()));
    let excess = (0..2)
        .flat_map(|i| (0..g.n).map(move |m| (i, m)))
        .map(|(i, m)| dear.values[i][m] - cheap.values[i][m])
        .fold(f64::NEG_INFINITY, f64::max);
    r.line("5", excess <= 0.0, &format!("cost monotonicity 0.01 -> 0.02: max increase {excess:.3e} (tol 0)"));

    let t3 = solve_vanishing(&three(), &Grid::new(0.01, 10.0, 4001).unwrap(), &cfg).unwrap();
    residual_ok.push(("three regimes".into(), t3.converged && t3.diagnostics.is_clean()));
}

fn criterion_6_7_8(r: &mut Report, p: &StationaryProblem, oracle: &AnalyticSolution) {
    let cfg = SimConfig::default();
    let tr = simulate(p, oracle, 1, 0.5, &cfg).unwrap();
    let t12 = switch_time(p, 1, 0.5, k_threshold(p, 1, 2).unwrap()).unwrap();
    let k12 = k_threshold(p, 1, 2).unwrap();
    let v0 = oracle.value(0.5).finite().unwrap();
    let total = total_utility(&tr, p);
    let (dt_err, dk_err) = match tr.events.as_slice() {
        [e] => (rel(e.time, t12), (e.capital - k12).abs()),
        _ => (f64::INFINITY, f64::INFINITY),
    };
    let ok = tr.events.len() == 1 && dt_err <= 0.01 && dk_err <= 1e-3 && rel(total, v0) <= 5e-3;
    r.line(
        "6",
        ok,
        &format!(
            "analytic trajectory: {} switch(es), t_switch rel err {dt_err:.2e} (tol 1e-2, t12={t12:.4} ~ {EXPECTED_T12}), \
             k_switch err {dk_err:.2e} (tol 1e-3), total utility rel err {:.2e} (tol 5e-3)",
            tr.events.len(),
            rel(total, v0)
        ),
    );

    let d10 = dpp_check(p, oracle, &tr, 10.0).unwrap();
    let d30 = dpp_check(p, oracle, &tr, 30.0).unwrap();
    r.line(
        "7",
        d10.max(d30) <= 1e-3 * v0.abs(),
        &format!("DPP residual r=10: {d10:.3e}, r=30: {d30:.3e} (tol {:.3e})", 1e-3 * v0.abs()),
    );

    let ea = euler_residual(&tr, p);
    let s = solve_vanishing(p, &grid(4001), &SolverConfig::default()).unwrap();
    let numeric = simulate(p, &NumericPolicy::new(&s), 1, 0.5, &cfg).unwrap();
    let en = euler_residual(&numeric, p);
    r.line(
        "8",
        ea <= 1e-6 && en <= 1e-2,
        &format!("Euler residual analytic {ea:.3e} (tol 1e-6), numeric policy n=4001 {en:.3e} (tol 1e-2)"),
    );
}

fn criterion_10(r: &mut Report) {
    let p = three();
    let oracle = analytic_solution(&p).unwrap();
    let g = Grid::new(0.01, 10.0, 4001).unwrap();
    let s = solve_vanishing(&p, &g, &SolverConfig::default()).unwrap();
    let numeric = extract_regions(&s);
    let s1 = |rep: &qvi_core::regions::RegionReport| {
        let mut v: Vec<(f64, f64)> = rep.regime(1).unwrap().switch.iter().map(|pc| (pc.interval.lo, pc.interval.hi)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        // adjacent pieces with different targets form one interval of S_1
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in v {
            match merged.last_mut() {
                Some(last) if last.1 == lo => last.1 = hi,
                _ => merged.push((lo, hi)),
            }
        }
        merged
    };
    let want = s1(&oracle.regions);
    let got = s1(&numeric);
    let ok = want.len() == 2
        && got.len() == 2
        && want.iter().zip(&got).all(|(a, b)| {
            (a.0 - b.0).abs() <= g.h() && (a.1.is_infinite() && b.1 == g.k_max || (a.1 - b.1).abs() <= g.h())
        });
    let fl: Vec<String> = flips(&s).iter().map(|f| format!("{}->{} at {:.4}", f.1, f.2, f.0)).collect();
    r.line(
        "10",
        ok,
        &format!(
            "three-regime S1: closed form {want:.4?}, numeric {got:.4?} (tol 1 cell = {:.4}); numeric flips {fl:?}",
            g.h()
        ),
    );
}

fn criterion_12(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut held = 0;
    let mut draws = 0;
    while draws < 100 {
        let a1 = rng.gen_range(0.05..0.4);
        let a2 = a1 + rng.gen_range(0.01..0.3);
        let x2 = rng.gen_range(0.0..3.0);
        let gamma = rng.gen_range(1.1..5.0);
        let rho = rng.gen_range(0.01..0.1);
        let delta = rng.gen_range(0.0..0.1);
        let p = StationaryProblem::new(
            [(a1, 0.0), (a2, x2)],
            Preferences::new(gamma, rho, 0.0, delta),
            SwitchingCostMatrix::vanishing(2),
        );
        if !p.validate().is_valid() {
            continue;
        }
        draws += 1;
        let i = rng.gen_range(1..=2);
        let (x, y) = (rng.gen_range(0.01..10.0), rng.gen_range(0.01..10.0));
        let c = rng.gen_range(0.0..1.0);
        if dynamics_probes(&p, i, x, y, 30.0, c, 0.01).map_or(false, |rep| rep.holds) {
            held += 1;
        }
    }
    r.line("12", held == 100, &format!("Gronwall probes: {held}/100 draws within both bounds"));
}

fn main() -> ExitCode {
    let mut r = Report { failed: 0 };
    let p = bench();
    let oracle = analytic_solution(&p).expect("benchmark closed form");
    criterion_1(&mut r, &p);
    criteria_2_3_11(&mut r, &p, &oracle);
    let mut residuals = Vec::new();
    criteria_4_5(&mut r, &p, &mut residuals);
    criterion_6_7_8(&mut r, &p, &oracle);
    let dirty: Vec<&String> = residuals.iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect();
    r.line(
        "9",
        dirty.is_empty(),
        &format!("complementarity and obstacle dominance: {} solutions checked, violations in {dirty:?}", residuals.len()),
    );
    criterion_10(&mut r);
    criterion_12(&mut r);
    supplementary_exact(&mut r, &p);
    if r.failed == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria fail", r.failed);
        ExitCode::FAILURE
    }
}
