use num_complex::Complex64;
use serde_json::{json, Value};

use super::{ArtifactSink, ExperimentConfig, ExperimentKind, Gate};
use crate::fit::{fit_decay, fit_high_energy, fit_low_energy, non_increasing_after, transit_time, FitResult};
use crate::io::{comparison_table, format_float, scan_table, trace_table, write_field, CsvTable, FieldSidecar};
use crate::linalg::{matrix_norm, NormOptions};
use crate::model::{make_wavespeed, CauchyData, Grid, WavespeedProfile};
use crate::perturbed::{solve_problem, verify_identities, CutoffProblem, Method, SolveOptions};
use crate::scan::{sample_at, scan_lower_halfplane, scan_real_axis, ScanOptions, ScanReport};
use crate::stone::compare_propagators;
use crate::wave::{check_b_support, run_simulation, time_reversal_error, SimulationConfig, SimulationOutput};
use crate::{Error, Result};

struct Setup {
    grid: Grid,
    profile: WavespeedProfile,
    solve: SolveOptions,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let grid = cfg.build_grid()?;
    let profile = make_wavespeed(&cfg.profile.spec()?, &grid)?;
    let solve = SolveOptions {
        norm: NormOptions {
            seed: cfg.seed,
            ..NormOptions::default()
        },
        ..SolveOptions::default()
    };
    Ok(Setup { grid, profile, solve })
}

/// Runs the experiment body, writes `report.json` and returns its gates.
pub(super) fn dispatch(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<Vec<Gate>> {
    let s = setup(cfg)?;
    let (gates, results, tags) = match cfg.kind {
        ExperimentKind::ScanNorm => scan_norm(cfg, &s, sink)?,
        ExperimentKind::ScanStrip => scan_strip(cfg, &s, sink)?,
        ExperimentKind::Simulate => simulate(cfg, &s, sink)?,
        ExperimentKind::StoneCompare => stone_compare(cfg, &s, sink)?,
        ExperimentKind::FitDecay => decay(cfg, &s, sink)?,
        ExperimentKind::Verify => verify(cfg, &s, sink)?,
    };
    let p = &s.profile;
    let report = json!({
        "kind": cfg.kind.name(),
        "tags": tags,
        "seed": cfg.seed,
        "grid": {
            "dim": s.grid.dim(),
            "per_axis": s.grid.per_axis(),
            "spacing": s.grid.spacing(),
            "half_extent": s.grid.half_extent(),
        },
        "profile": {
            "spec": p.spec,
            "c_min": p.c_min,
            "c_max": p.c_max,
            "lipschitz": p.lipschitz,
            "analytic_lipschitz": p.analytic_lipschitz,
        },
        "tolerances": cfg.tolerances,
        "gates": gates,
        "passed": gates.iter().all(|g| g.passed),
        "results": results,
    });
    sink.json("report.json", &report)?;
    Ok(gates)
}

type Body = (Vec<Gate>, Value, &'static [&'static str]);

fn scan_options(cfg: &ExperimentConfig, s: &Setup) -> ScanOptions {
    ScanOptions {
        solve: s.solve,
        gradient_radius: cfg.masks.chi_tilde_radius,
        ..ScanOptions::default()
    }
}

fn ceiling_gate(report: &ScanReport, slack: f64) -> Gate {
    let worst = report
        .ceiling
        .iter()
        .map(|c| c.norm / c.bound)
        .fold(0.0, f64::max);
    Gate::at_most("norm / spectral ceiling", worst, 1.0 + slack)
}

/// A fit, or why it was skipped for lack of samples.
fn fit_or_skip(fit: Result<FitResult>) -> Result<Value> {
    match fit {
        Ok(f) => Ok(json!(f)),
        Err(Error::Samples { need, got }) => Ok(json!({ "skipped": format!("needs {need} samples, got {got}") })),
        Err(Error::Argument(msg)) => Ok(json!({ "skipped": msg })),
        Err(e) => Err(e),
    }
}

fn scan_norm(cfg: &ExperimentConfig, s: &Setup, sink: &mut ArtifactSink) -> Result<Body> {
    let sc = &cfg.scan;
    let report = scan_real_axis(
        sc.lambda_min,
        sc.lambda_max,
        sc.count,
        &s.profile,
        &s.grid,
        cfg.masks.chi_radius,
        &scan_options(cfg, s),
    )?;
    sink.csv("scan.csv", &scan_table(&report))?;
    let usable: Vec<(f64, f64)> = report
        .samples
        .iter()
        .filter(|x| !x.pole_flag && x.norm.is_finite())
        .map(|x| (x.re_lambda, x.norm))
        .collect();
    let low: Vec<(f64, f64)> = usable.iter().copied().filter(|x| x.0 <= sc.low_energy_cutoff).collect();
    let high: Vec<(f64, f64)> = usable.iter().copied().filter(|x| x.0 >= 1.0).collect();
    let gates = vec![
        Gate::at_most("real-axis pole flags", report.pole_count() as f64, 0.0),
        ceiling_gate(&report, cfg.tolerances.ceiling_slack),
    ];
    let results = json!({
        "epsilon0": report.epsilon0,
        "pole_count": report.pole_count(),
        "samples": report.samples.len(),
        "chi_radius": report.chi_radius,
        "ceiling": report.ceiling,
        "warnings": report.warnings,
        "low_energy_fit": fit_or_skip(fit_low_energy(&low, s.grid.dim()))?,
        "high_energy_fit": fit_or_skip(fit_high_energy(&high))?,
    });
    Ok((
        gates,
        results,
        &["low-energy envelope", "high-energy envelope", "spectral-theorem ceiling", "real-axis solvability"],
    ))
}

fn scan_strip(cfg: &ExperimentConfig, s: &Setup, sink: &mut ArtifactSink) -> Result<Body> {
    let st = &cfg.strip;
    let report = scan_lower_halfplane(
        (st.re_min, st.re_max),
        st.max_depth,
        (st.re_count, st.depth_count),
        &s.profile,
        &s.grid,
        cfg.masks.chi_radius,
        &scan_options(cfg, s),
    )?;
    sink.csv("strip.csv", &scan_table(&report))?;
    let mut columns = CsvTable::new(&["re_lambda", "pole_free_depth"]);
    for c in &report.columns {
        columns.push(vec![format_float(c.re_lambda), format_float(c.pole_free_depth)]);
    }
    sink.csv("strip_columns.csv", &columns)?;
    let shallowest = report
        .columns
        .iter()
        .map(|c| c.pole_free_depth)
        .fold(f64::INFINITY, f64::min);
    let gates = vec![
        ceiling_gate(&report, cfg.tolerances.ceiling_slack),
        Gate {
            name: "pole-free depth in every column".into(),
            value: shallowest,
            threshold: 0.0,
            passed: shallowest > 0.0,
        },
    ];
    let results = json!({
        "pole_count": report.pole_count(),
        "columns": report.columns,
        "ceiling": report.ceiling,
        "warnings": report.warnings,
    });
    Ok((gates, results, &["resonance-free strip", "spectral-theorem ceiling"]))
}

fn cauchy_data(cfg: &ExperimentConfig, s: &Setup) -> Result<CauchyData> {
    CauchyData::from_preset(&cfg.data.preset, &s.grid, cfg.data.r1)
}

fn run(cfg: &ExperimentConfig, s: &Setup, data: &CauchyData, snapshots: bool) -> Result<SimulationOutput> {
    let sim = &cfg.simulate;
    let mut c = SimulationConfig::new(sim.t_end, cfg.data.r2);
    c.safety = sim.safety;
    c.sample_stride = sim.sample_stride;
    c.weight = sim.weight;
    if snapshots {
        c.snapshot_times = sim.snapshot_times.clone();
    }
    run_simulation(data, &s.profile, &s.grid, &c)
}

fn simulate(cfg: &ExperimentConfig, s: &Setup, sink: &mut ArtifactSink) -> Result<Body> {
    let data = cauchy_data(cfg, s)?;
    let out = run(cfg, s, &data, true)?;
    sink.csv("trace.csv", &trace_table(&out.trace))?;
    for (k, snap) in out.snapshots.iter().enumerate() {
        for (component, values) in [("u", &snap.u), ("ut", &snap.ut)] {
            let side = FieldSidecar {
                grid: s.grid.clone(),
                t: snap.t,
                profile: s.profile.spec.name().to_string(),
                component: component.to_string(),
            };
            let z: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let paths = write_field(sink.dir(), &format!("snapshot_{k:03}_{component}"), &s.grid, &z, &side)?;
            sink.record(paths);
        }
    }
    let support = check_b_support(&data, data.support_radius + s.grid.spacing(), &s.profile, &s.grid)?;
    let band = out.trace.global_band();
    let mut gates = vec![
        Gate::at_most("global energy band", band, cfg.tolerances.energy_band),
        Gate {
            name: "B_h d vanishes outside B(0, R₁ + 2h)".into(),
            value: support.max_outside,
            threshold: 0.0,
            passed: support.pass,
        },
    ];
    let reversal = if cfg.simulate.reversal {
        let e = time_reversal_error(&data, &s.profile, &s.grid, cfg.simulate.t_end, cfg.simulate.safety)?;
        gates.push(Gate::at_most("time-reversal error", e, cfg.tolerances.reversal));
        Some(e)
    } else {
        None
    };
    let results = json!({
        "dt": out.dt,
        "steps": out.steps,
        "global_band": band,
        "graph_norms": out.trace.graph_norms,
        "final_local_energy": out.trace.local.last(),
        "time_reversal_error": reversal,
        "snapshots": out.snapshots.iter().map(|x| x.t).collect::<Vec<_>>(),
        "support": support,
    });
    Ok((gates, results, &["energy conservation", "finite propagation speed"]))
}

fn decay(cfg: &ExperimentConfig, s: &Setup, sink: &mut ArtifactSink) -> Result<Body> {
    let data = cauchy_data(cfg, s)?;
    let out = run(cfg, s, &data, false)?;
    sink.csv("trace.csv", &trace_table(&out.trace))?;
    let k = cfg.simulate.decay_k;
    let g = out.trace.graph_norms[k as usize - 1].ok_or_else(|| {
        Error::Support(format!("B_h^{k} d reaches the grid boundary; enlarge the grid or use a smaller k"))
    })?;
    let fit = fit_decay(&out.trace, k, g)?;
    let mut ratio = CsvTable::new(&["t", "ratio"]);
    for (t, r) in &fit.ratio_profile {
        ratio.push(vec![format_float(*t), format_float(*r)]);
    }
    sink.csv("decay_ratio.csv", &ratio)?;
    let transit = transit_time(cfg.data.r1, cfg.data.r2, s.profile.c_min);
    let band = fit.ratio_band();
    let c = fit.coefficients[0];
    let monotone = non_increasing_after(&out.trace, transit, cfg.tolerances.monotone);
    let gates = vec![
        Gate {
            name: "finite envelope constant".into(),
            value: c,
            threshold: f64::INFINITY,
            passed: c.is_finite(),
        },
        Gate::at_most("envelope ratio max/min", band, cfg.tolerances.decay_band),
        Gate {
            name: "local energy non-increasing after transit".into(),
            value: transit,
            threshold: cfg.tolerances.monotone,
            passed: monotone,
        },
    ];
    let results = json!({
        "c": c,
        "k": k,
        "graph_norm": g,
        "ratio_band": band,
        "transit_time": transit,
        "t_end": cfg.simulate.t_end,
        "steps": out.steps,
        "fit": FitSummary::from(&fit),
    });
    Ok((gates, results, &["logarithmic decay envelope", "local energy"]))
}

#[derive(serde::Serialize)]
struct FitSummary {
    model: crate::fit::FitModel,
    coefficients: Vec<f64>,
    samples: usize,
    range: [f64; 2],
}

impl From<&FitResult> for FitSummary {
    fn from(f: &FitResult) -> Self {
        Self {
            model: f.model,
            coefficients: f.coefficients.clone(),
            samples: f.samples,
            range: f.range,
        }
    }
}

fn stone_compare(cfg: &ExperimentConfig, s: &Setup, sink: &mut ArtifactSink) -> Result<Body> {
    let data = cauchy_data(cfg, s)?;
    let st = &cfg.stone;
    let report = compare_propagators(
        &data,
        &st.times,
        &st.stone_config(),
        st.safety,
        cfg.data.r2,
        &s.profile,
        &s.grid,
    )?;
    sink.csv("comparison.csv", &comparison_table(&report.rows))?;
    let worst = report.rows.iter().map(|r| r.l2_discrepancy).fold(0.0, f64::max);
    let gates = vec![Gate::at_most("propagator discrepancy on B(0, R₂)", worst, cfg.tolerances.stone)];
    let results = json!({
        "rows": report.rows,
        "r2": report.r2,
        "quadrature_nodes": report.quadrature_nodes,
        "window_tail_bound": report.window_tail_bound,
        "max_imag_ratio": report.max_imag_ratio,
        "stone": st.stone_config(),
    });
    Ok((gates, results, &["Stone formula", "propagator cross-check"]))
}

fn verify(cfg: &ExperimentConfig, s: &Setup, sink: &mut ArtifactSink) -> Result<Body> {
    let tol = &cfg.tolerances;
    let chi = cfg.masks.chi_radius;
    let mut gates = Vec::new();
    let mut table = CsvTable::new(&[
        "re_lambda",
        "im_lambda",
        "re_mu",
        "im_mu",
        "first_identity",
        "five_term",
        "adjoint",
        "gradient",
    ]);
    let mut identities = Vec::new();
    for p in &cfg.verify.pairs {
        let (l, m) = (Complex64::new(p[0], p[1]), Complex64::new(p[2], p[3]));
        let r = verify_identities(l, m, &s.profile, &s.grid, chi, cfg.masks.inner_radius, &s.solve)?;
        table.push(
            p.iter()
                .chain(&[r.first_identity, r.five_term, r.adjoint, r.gradient])
                .map(|&x| format_float(x))
                .collect(),
        );
        for (name, v) in [
            ("first resolvent identity", r.first_identity),
            ("five-term identity", r.five_term),
            ("adjoint relation", r.adjoint),
            ("gradient identity", r.gradient),
        ] {
            gates.push(Gate::at_most(format!("{name} at λ = {l}, μ = {m}"), v, tol.identity));
        }
        identities.push(r);
    }
    sink.csv("identities.csv", &table)?;

    let problem = CutoffProblem::new(&s.grid, &s.profile, chi)?;
    let mut neumann = CsvTable::new(&["re_lambda", "im_lambda", "k_norm", "series_norm", "relative_difference"]);
    let mut neumann_rows = Vec::new();
    for q in &cfg.verify.neumann_points {
        let l = Complex64::new(q[0], q[1]);
        let (xd, _) = solve_problem(&problem, l, Method::Direct, &s.solve)?;
        match solve_problem(&problem, l, Method::Neumann, &s.solve) {
            Ok((xn, rn)) => {
                let diff = matrix_norm(&xd.matrix.sub(&xn.matrix), &s.solve.norm)?.value;
                let rel = diff / matrix_norm(&xd.matrix, &s.solve.norm)?.value;
                let series = rn.series_norm.unwrap_or(f64::NAN);
                gates.push(Gate::at_most(
                    format!("Neumann against direct at λ = {l}"),
                    rel,
                    tol.neumann_agreement,
                ));
                gates.push(Gate::at_most(
                    format!("Neumann prefactor at λ = {l}"),
                    series,
                    tol.neumann_prefactor,
                ));
                neumann.push(vec![
                    format_float(l.re),
                    format_float(l.im),
                    format_float(rn.k_norm),
                    format_float(series),
                    format_float(rel),
                ]);
                neumann_rows.push(json!({ "lambda": [l.re, l.im], "k_norm": rn.k_norm, "series_norm": series, "relative_difference": rel }));
            }
            Err(Error::NeumannRegime(k)) => {
                neumann_rows.push(json!({ "lambda": [l.re, l.im], "k_norm": k, "skipped": "‖Kχ‖ ≥ 1/2" }));
            }
            Err(e) => return Err(e),
        }
    }
    sink.csv("neumann.csv", &neumann)?;

    let top = Complex64::new(0.0, 2.0);
    let opts = ScanOptions {
        solve: s.solve,
        ..ScanOptions::default()
    };
    let ceiling = sample_at(&problem, top, &opts)?;
    let bound = crate::scan::spectral_ceiling(top);
    gates.push(Gate::at_most(
        "norm at λ = 2i against 1/dist(λ², [0, ∞))",
        ceiling.norm,
        bound * (1.0 + tol.ceiling_slack),
    ));
    let results = json!({
        "identities": identities,
        "neumann": neumann_rows,
        "ceiling": { "lambda": [top.re, top.im], "norm": ceiling.norm, "bound": bound },
        "chi_radius": chi,
        "inner_radius": cfg.masks.inner_radius,
    });
    Ok((
        gates,
        results,
        &["first resolvent identity", "five-term identity", "adjoint relation", "gradient identity", "Neumann regime"],
    ))
}
