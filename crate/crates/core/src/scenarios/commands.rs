use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::report::{ecdf, fmt_f64, histogram, Bundle};
use super::validation::{run_checks, CheckResult};
use super::{OptimizeMode, RunConfig, ScenarioError};
use crate::dynamics::{simulate_with, to_com_coordinates, InitialState, SampleKind, SimOptions, Trajectory, Wall};
use crate::metrics::{
    amplitude_spectrum, build_ledger, cwt_morlet, default_scales, efficiency, frequency_of_scale, harvested_energy,
    impacts_per_cycle, EfficiencyMode, Window,
};
use crate::optimizer::{ga_optimize, nsga2_optimize, McObjective, OptimizationResult, Scored};
use crate::stochastic::{
    compare_designs_with, mc_estimate_with, Aleatory, DesignPoint, McEstimate, SampleEvaluator, Simulator,
    UncertaintyModel,
};

const HIST_BINS: usize = 20;

fn sim_err(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Simulation(e.to_string())
}

fn opt_err(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Optimization(e.to_string())
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

fn sample_evaluator(cfg: &RunConfig) -> Simulator {
    Simulator { mode: cfg.efficiency.mode, ..Simulator::default() }
}

/// Lends a borrowed evaluator to APIs that take one by value.
struct Lent<'a, E: ?Sized>(&'a E);

impl<E: SampleEvaluator + ?Sized> SampleEvaluator for Lent<'_, E> {
    fn evaluate(&self, p: &crate::dynamics::SystemParams, init: &InitialState, horizon: f64) -> Result<f64, String> {
        self.0.evaluate(p, init, horizon)
    }
}

fn kind_name(k: SampleKind) -> &'static str {
    match k {
        SampleKind::Grid => "grid",
        SampleKind::PreImpact => "pre_impact",
        SampleKind::PostImpact => "post_impact",
        SampleKind::Final => "final",
    }
}

fn wall_name(w: Wall) -> &'static str {
    match w {
        Wall::Upper => "upper",
        Wall::Lower => "lower",
    }
}

#[derive(Serialize)]
struct EfficiencySummary {
    horizon: f64,
    dissipation_fraction: f64,
    impact_share: f64,
    coil_share: f64,
    time_averaged_er: f64,
    harvested_fraction: Option<f64>,
    impacts: usize,
    stick_intervals: usize,
    projected_initial: bool,
}

/// Runs one trajectory and writes its time series, energy ledger, impact
/// log, phase coordinates, cycle counts and optional spectral products.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Bundle, ScenarioError> {
    cfg.validate()?;
    let p = cfg.model.params()?;
    let s = &cfg.simulate;
    let opts = SimOptions { tol: s.tolerances, sample_dt: Some(s.sample_dt) };
    let init: InitialState = cfg.initial.into();
    let tr = simulate_with(&p, &init, s.horizon, &opts).map_err(sim_err)?;
    let mut b = Bundle::create(out)?;
    if tr.projected_initial {
        b.warnings.push(format!(
            "initial ball position x2={} lies outside the cavity; moved to x2={}",
            init.x2,
            tr.initial().x2
        ));
    }
    write_trajectory(&mut b, &tr)?;

    let h = cfg.efficiency.horizon.min(s.horizon);
    let diss = efficiency(&tr, EfficiencyMode::DissipationFraction, h).map_err(sim_err)?;
    let avg = efficiency(&tr, EfficiencyMode::TimeAveragedEr, h).map_err(sim_err)?;
    let harvested = match (s.r_load, s.r_coil) {
        (Some(rl), Some(rc)) => Some(harvested_energy(&tr, rl, rc).map_err(sim_err)?),
        _ => None,
    };
    b.json(
        "efficiency.json",
        &EfficiencySummary {
            horizon: h,
            dissipation_fraction: diss.value,
            impact_share: diss.impact_share,
            coil_share: diss.coil_share,
            time_averaged_er: avg.value,
            harvested_fraction: harvested,
            impacts: tr.impacts.len(),
            stick_intervals: tr.sticks.len(),
            projected_initial: tr.projected_initial,
        },
    )?;

    let grid: Vec<_> = tr.grid_states().collect();
    let tau: Vec<f64> = grid.iter().map(|s| s.tau).collect();
    if s.spectrum {
        let x1: Vec<f64> = grid.iter().map(|s| s.x1).collect();
        let spec = amplitude_spectrum(&tau, &x1, Window::Hann).map_err(sim_err)?;
        b.csv("spectrum.csv", &["frequency", "magnitude"], spec.into_iter().map(|(fr, m)| vec![f(fr), f(m)]))?;
    }
    if s.wavelet {
        let w: Vec<f64> = grid.iter().map(|s| s.gap()).collect();
        let scales = default_scales();
        let m = cwt_morlet(&tau, &w, &scales).map_err(sim_err)?;
        let rows = scales.iter().enumerate().flat_map(|(k, sc)| {
            let row = &m[k];
            let tau = &tau;
            (0..tau.len())
                .step_by(s.wavelet_stride)
                .map(move |i| vec![f(tau[i]), f(*sc), f(frequency_of_scale(*sc)), f(row[i])])
        });
        b.csv("wavelet.csv", &["tau", "scale", "frequency", "modulus"], rows)?;
    }
    let notes = [("coil_scale", "model.c_e is the relative-coordinate coil parameter".to_string())];
    b.finish("simulate", cfg, &notes)
}

fn write_trajectory(b: &mut Bundle, tr: &Trajectory) -> Result<(), ScenarioError> {
    let eps = tr.params.eps;
    b.csv(
        "trajectory.csv",
        &["kind", "tau", "x1", "v1", "x2", "v2"],
        tr.samples.iter().map(|s| {
            let st = &s.state;
            vec![kind_name(s.kind).into(), f(st.tau), f(st.x1), f(st.v1), f(st.x2), f(st.v2)]
        }),
    )?;
    b.csv(
        "phase.csv",
        &["tau", "x_com", "x_com_dot", "w", "w_dot"],
        tr.samples.iter().map(|s| {
            let c = to_com_coordinates(&s.state, eps);
            vec![f(s.state.tau), f(c.x), f(c.x_dot), f(c.w), f(c.w_dot)]
        }),
    )?;
    let l = build_ledger(tr).map_err(sim_err)?;
    b.csv(
        "ledger.csv",
        &["tau", "e_mech", "e_damp", "e_coil", "e_imp", "e_r"],
        (0..l.len()).map(|i| vec![f(l.tau[i]), f(l.e_mech[i]), f(l.e_damp[i]), f(l.e_coil[i]), f(l.e_imp[i]), f(l.e_r[i])]),
    )?;
    b.csv(
        "impacts.csv",
        &["index", "tau", "wall", "v1_pre", "v2_pre", "v1_post", "v2_post", "energy_loss", "grazing"],
        tr.impacts.iter().enumerate().map(|(i, e)| {
            vec![
                i.to_string(),
                f(e.tau),
                wall_name(e.wall).into(),
                f(e.v1_pre),
                f(e.v2_pre),
                f(e.v1_post),
                f(e.v2_post),
                f(e.energy_loss),
                e.grazing.to_string(),
            ]
        }),
    )?;
    b.csv(
        "sticks.csv",
        &["wall", "start", "end"],
        tr.sticks.iter().map(|s| vec![wall_name(s.wall).into(), f(s.start), s.end.map_or(String::new(), f)]),
    )?;
    b.csv(
        "cycles.csv",
        &["cycle", "start", "end", "impacts"],
        impacts_per_cycle(tr).iter().map(|c| vec![c.index.to_string(), f(c.start), f(c.end), c.impacts.to_string()]),
    )
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<Bundle, ScenarioError> {
    cmd_sweep_with(cfg, out, &sample_evaluator(cfg))
}

/// Efficiency over a grid of two design variables, long format.
pub fn cmd_sweep_with<E: SampleEvaluator + ?Sized>(cfg: &RunConfig, out: &Path, eval: &E) -> Result<Bundle, ScenarioError> {
    cfg.validate()?;
    let w = &cfg.sweep;
    let mut cells = Vec::new();
    for x in w.x.values() {
        for y in w.y.values() {
            let mut d = w.fixed.to_array();
            d[w.x.var.index()] = x;
            d[w.y.var.index()] = y;
            cells.push((x, y, DesignPoint::from_array(d)));
        }
    }
    let base = cfg.uncertainty();
    let u = match w.v1 {
        Some(v) => UncertaintyModel { design_sd: [0.0; 3], aleatory: Aleatory::Point { value: v }, ..base },
        None => base,
    };
    // A fixed velocity needs one run per cell; parallelize over cells instead of samples.
    let results: Vec<Result<(f64, f64), ScenarioError>> = match w.v1 {
        Some(_) => cells
            .par_iter()
            .map(|(_, _, d)| {
                let (p, init) = crate::stochastic::sample_inputs(d, &u, 0, cfg.seed).map_err(sim_err)?;
                eval.evaluate(&p, &init, cfg.efficiency.horizon).map(|v| (v, 0.0)).map_err(sim_err)
            })
            .collect(),
        None => cells
            .iter()
            .map(|(_, _, d)| {
                mc_estimate_with(eval, d, &u, w.samples, cfg.seed, cfg.efficiency.horizon)
                    .map(|e| (e.mean, e.sigma))
                    .map_err(sim_err)
            })
            .collect(),
    };
    let mut rows = Vec::with_capacity(cells.len());
    for ((x, y, _), r) in cells.iter().zip(results) {
        let (v, s) = r?;
        rows.push(vec![f(*x), f(*y), f(v), f(s)]);
    }
    let mut b = Bundle::create(out)?;
    b.csv("sweep.csv", &[w.x.var.name(), w.y.var.name(), "value", "sigma"], rows)?;
    let how = match w.v1 {
        Some(v) => format!("single run per cell at v1={v}"),
        None => format!("Monte Carlo mean over {} samples per cell", w.samples),
    };
    b.finish("sweep", cfg, &[("cell_value", how)])
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    mode: OptimizeMode,
    best: DesignPoint,
    /// Score of `best` inside the GA (its own sample count and generation seed).
    ga_mean: f64,
    ga_sigma: f64,
    /// Re-evaluation under the reporting uncertainty model.
    final_estimate: McEstimate,
    /// Efficiency at the optimization velocity (deterministic mode only).
    deterministic_value: Option<f64>,
    evaluations: u64,
    cache_hits: u64,
    simulations: u64,
    log: &'a [String],
}

pub fn cmd_optimize(cfg: &RunConfig, out: &Path) -> Result<Bundle, ScenarioError> {
    cmd_optimize_with(cfg, out, &sample_evaluator(cfg))
}

/// GA or NSGA-II search followed by a re-evaluation of the optimum with
/// `optimize.final_samples` samples.
pub fn cmd_optimize_with<E: SampleEvaluator + ?Sized>(cfg: &RunConfig, out: &Path, eval: &E) -> Result<Bundle, ScenarioError> {
    cfg.validate()?;
    let o = &cfg.optimize;
    let report_u = cfg.uncertainty();
    let mut ga = cfg.ga_config();
    let search_u = match o.mode {
        OptimizeMode::Deterministic => {
            // Every sample would repeat the same run; two satisfy the estimator.
            ga.mc_samples = 2;
            UncertaintyModel { design_sd: [0.0; 3], aleatory: Aleatory::Point { value: o.v1 }, ..report_u }
        }
        _ => report_u,
    };
    let objective = McObjective { evaluator: Lent(eval), uncertainty: search_u, samples: ga.mc_samples, horizon: ga.horizon };
    let space = cfg.design_space();
    let r: OptimizationResult = match o.mode {
        OptimizeMode::Nsga2 => nsga2_optimize(&objective, &space, &ga),
        _ => ga_optimize(&objective, &space, &ga),
    }
    .map_err(opt_err)?;
    if !r.best.mean.is_finite() {
        return Err(opt_err(format!("no feasible design found; first failure: {:?}", r.log.first())));
    }
    let fin = mc_estimate_with(eval, &r.best.design, &report_u, o.final_samples, cfg.seed, ga.horizon).map_err(opt_err)?;
    let det = match o.mode {
        OptimizeMode::Deterministic => Some(
            mc_estimate_with(eval, &r.best.design, &search_u, 2, cfg.seed, ga.horizon).map_err(opt_err)?.mean,
        ),
        _ => None,
    };

    let mut b = Bundle::create(out)?;
    b.json(
        "result.json",
        &OptimizeReport {
            mode: o.mode,
            best: r.best.design,
            ga_mean: r.best.mean,
            ga_sigma: r.best.sigma,
            final_estimate: fin,
            deterministic_value: det,
            evaluations: r.evaluations,
            cache_hits: r.cache_hits,
            simulations: r.simulations,
            log: &r.log,
        },
    )?;
    b.csv(
        "history.csv",
        &["generation", "best", "mean", "best_ever"],
        r.history.iter().map(|h| vec![h.generation.to_string(), f(h.best), f(h.mean), f(h.best_ever)]),
    )?;
    if o.mode == OptimizeMode::Nsga2 {
        b.csv(
            "front.csv",
            &["mu_kappa", "mu_lc", "mu_ce", "mean", "sigma"],
            r.front.iter().map(|s: &Scored| {
                vec![f(s.design.mu_kappa), f(s.design.mu_lc), f(s.design.mu_ce), f(s.mean), f(s.sigma)]
            }),
        )?;
    }
    let notes = [
        ("final_estimate", format!("{} samples under [uncertainty], seed {}", o.final_samples, cfg.seed)),
        ("coil_scale", "mu_ce is the relative-coordinate coil parameter".into()),
    ];
    b.finish("optimize", cfg, &notes)
}

#[derive(Serialize)]
struct CompareEntry<'a> {
    label: &'a str,
    design: DesignPoint,
    estimate: McEstimate,
}

pub fn cmd_compare(cfg: &RunConfig, out: &Path) -> Result<Bundle, ScenarioError> {
    cmd_compare_with(cfg, out, &sample_evaluator(cfg))
}

/// Evaluates every design on the same draws and writes per-sample values,
/// fixed-bin histograms and empirical CDFs, overall and per velocity tercile.
pub fn cmd_compare_with<E: SampleEvaluator + ?Sized>(cfg: &RunConfig, out: &Path, eval: &E) -> Result<Bundle, ScenarioError> {
    cfg.validate()?;
    let c = &cfg.compare;
    let designs: Vec<DesignPoint> = c.designs.iter().map(|d| d.design()).collect();
    let cmp = compare_designs_with(eval, &designs, &cfg.uncertainty(), c.samples, cfg.seed, cfg.efficiency.horizon)
        .map_err(sim_err)?;
    let mut b = Bundle::create(out)?;
    let entries: Vec<CompareEntry> = c
        .designs
        .iter()
        .zip(&cmp.estimates)
        .map(|(d, e)| CompareEntry { label: &d.label, design: d.design(), estimate: *e })
        .collect();
    b.json("compare.json", &entries)?;

    let mut rows = Vec::new();
    for (d, vals) in c.designs.iter().zip(&cmp.values) {
        for (i, v) in vals.iter().enumerate() {
            rows.push(vec![i.to_string(), f(cmp.v1[i]), d.label.clone(), v.map_or(String::new(), f)]);
        }
    }
    b.csv("samples.csv", &["sample", "v1", "design", "efficiency"], rows)?;

    let clusters = cfg.clusters();
    let member = |v1: f64, k: usize| {
        let (_, lo, hi) = &clusters[k];
        if k + 1 == clusters.len() { v1 >= *lo && v1 <= *hi } else { v1 >= *lo && v1 < *hi }
    };
    let mut hist_rows = Vec::new();
    let mut cdf_rows = Vec::new();
    let width = 100.0 / HIST_BINS as f64;
    for (d, vals) in c.designs.iter().zip(&cmp.values) {
        let groups = std::iter::once(("all".to_string(), None)).chain(clusters.iter().enumerate().map(|(k, c)| (c.0.clone(), Some(k))));
        for (name, k) in groups {
            let sel: Vec<f64> = vals
                .iter()
                .zip(&cmp.v1)
                .filter(|(_, v1)| k.is_none_or(|k| member(**v1, k)))
                .filter_map(|(v, _)| *v)
                .collect();
            let counts = histogram(&sel, 0.0, 100.0, HIST_BINS);
            for (bin, n) in counts.iter().enumerate() {
                let density = if sel.is_empty() { 0.0 } else { *n as f64 / (sel.len() as f64 * width) };
                hist_rows.push(vec![
                    d.label.clone(),
                    name.clone(),
                    f(bin as f64 * width),
                    f((bin + 1) as f64 * width),
                    n.to_string(),
                    f(density),
                ]);
            }
            for (x, p) in ecdf(&sel) {
                cdf_rows.push(vec![d.label.clone(), name.clone(), f(x), f(p)]);
            }
        }
    }
    b.csv("histograms.csv", &["design", "cluster", "bin_lo", "bin_hi", "count", "density"], hist_rows)?;
    b.csv("cdf.csv", &["design", "cluster", "efficiency", "cdf"], cdf_rows)?;
    let rule = clusters.iter().map(|(n, lo, hi)| format!("{n}: [{lo}, {hi}]")).collect::<Vec<_>>().join("; ");
    let notes = [
        ("clusters", format!("fixed terciles of the initial-velocity range ({rule}); top edge inclusive")),
        ("histogram", format!("{HIST_BINS} fixed bins over [0, 100] %")),
    ];
    b.finish("compare", cfg, &notes)
}

/// Runs the acceptance checks and writes `validation.json` and `junit.xml`.
/// Returns the results; any failure is reported as a validation error after
/// the files are written.
pub fn cmd_validate(cfg: &RunConfig, out: &Path) -> Result<(Bundle, Vec<CheckResult>), ScenarioError> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let results = run_checks(cfg.validate.full, cfg.seed);
    let mut b = Bundle::create(out)?;
    b.json("validation.json", &results)?;
    b.text("junit.xml", &junit(&results))?;
    let b = b.finish("validate", cfg, &[])?;
    let timing: Vec<(&str, f64)> = results.iter().map(|r| (r.name, r.seconds)).collect();
    b.timing(start.elapsed().as_secs_f64(), &timing)?;
    let failed: Vec<_> = results.iter().filter(|r| !r.passed && !r.skipped).map(|r| r.id).collect();
    if !failed.is_empty() {
        return Err(ScenarioError::Validation(format!("failed checks: {failed:?}")));
    }
    Ok((b, results))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn junit(results: &[CheckResult]) -> String {
    let failures = results.iter().filter(|r| !r.passed && !r.skipped).count();
    let skipped = results.iter().filter(|r| r.skipped).count();
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s += &format!(
        "<testsuite name=\"vines-validate\" tests=\"{}\" failures=\"{failures}\" skipped=\"{skipped}\">\n",
        results.len()
    );
    for r in results {
        s += &format!("  <testcase classname=\"acceptance\" name=\"{:02}_{}\">\n", r.id, r.name);
        if r.skipped {
            s += &format!("    <skipped message=\"{}\"/>\n", xml_escape(&r.detail));
        } else if !r.passed {
            s += &format!("    <failure message=\"{}\"/>\n", xml_escape(&r.detail));
        } else {
            s += &format!("    <system-out>{}</system-out>\n", xml_escape(&r.detail));
        }
        s += "  </testcase>\n";
    }
    s + "</testsuite>\n"
}
