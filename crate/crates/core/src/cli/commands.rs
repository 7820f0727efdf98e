use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{Command, RunConfig, Suite};
use super::report::{config_err, Failure, Report, Table};
use crate::capacity::{self, CapacityDiagnostics, Condenser};
use crate::checks::{self, Contraction};
use crate::error::Error;
use crate::grid::{GridDomain, GridFunction, GridFunctionDoc, GridStructure};
use crate::intrinsic::{self, CaccioppoliReport};
use crate::pform::PFormContext;
use crate::quasiregular::{self, HarmonicityReport, QrAnalysis, QrSummary};
use crate::report::CheckReport;
use crate::solver::{self, SolveOptions};

type Outcome = std::result::Result<Report, Failure>;

/// Runs one command on a validated config. Relative paths resolve against `base`.
pub fn execute(cmd: Command, cfg: &RunConfig, base: &Path) -> Outcome {
    let (d, field) = cfg.domain.build(base, cfg.seed).map_err(config_err)?;
    let s = Arc::new(GridStructure::new(d, field).map_err(config_err)?);
    let ctx = PFormContext::new(s, cfg.p).map_err(config_err)?;
    let report = Report::new(cmd.name(), cfg);
    match cmd {
        Command::Solve => solve(cfg, base, &ctx, report),
        Command::Capacity => capacity_cmd(cfg, &ctx, report),
        Command::Caccioppoli => caccioppoli(cfg, base, &ctx, report),
        Command::Qr => qr(cfg, base, &ctx, report),
        Command::Metric => metric(cfg, &ctx, report),
        Command::Check => check(cfg, &ctx, report),
    }
}

fn coords_row(d: &GridDomain, j: usize) -> Vec<String> {
    d.node_coords(j)[..d.dim()].iter().map(|x| x.to_string()).collect()
}

fn coord_columns(d: &GridDomain, extra: &[&str]) -> Vec<String> {
    (0..d.dim())
        .map(|i| format!("x{i}"))
        .chain(extra.iter().map(|s| s.to_string()))
        .collect()
}

fn nodal_table(d: &GridDomain, names: &[&str], columns: &[&[f64]]) -> Table {
    let mut t = Table {
        columns: coord_columns(d, names),
        rows: Vec::with_capacity(d.node_count()),
    };
    for j in 0..d.node_count() {
        let mut row = coords_row(d, j);
        row.extend(columns.iter().map(|c| c[j].to_string()));
        t.push(row);
    }
    t
}

/// Boundary data pinned on the domain boundary and the `pinned` shapes.
fn dirichlet_data(cfg: &RunConfig, base: &Path, d: &GridDomain) -> std::result::Result<GridFunction, Failure> {
    let spec = cfg
        .boundary
        .as_ref()
        .ok_or_else(|| config_err(Error::Config("missing \"boundary\" block".into())))?;
    let mut mask = d.boundary_mask();
    for shape in &cfg.pinned {
        for (m, x) in mask.iter_mut().zip(shape.to_mask(d).map_err(config_err)?) {
            *m |= x;
        }
    }
    spec.build(d, base)
        .and_then(|u| u.with_mask(mask))
        .map_err(config_err)
}

#[derive(Serialize)]
struct SolveValues {
    solution: GridFunctionDoc,
    residual_norm: f64,
    iterations: usize,
    energy_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    complementarity: Option<f64>,
}

#[derive(Serialize)]
struct FailedSolve<'a> {
    iterations: usize,
    residual_norm: f64,
    energy_trace: &'a [f64],
}

fn solve(cfg: &RunConfig, base: &Path, ctx: &PFormContext, report: Report) -> Outcome {
    let d = ctx.structure().domain();
    let boundary = dirichlet_data(cfg, base, d)?;
    let obstacle = cfg
        .obstacle
        .as_ref()
        .map(|o| o.build(d, base))
        .transpose()
        .map_err(config_err)?;
    let result = match &obstacle {
        Some(psi) => solver::solve_obstacle(ctx, psi, &boundary, &cfg.solver),
        None => solver::solve_dirichlet(ctx, &boundary, &cfg.solver),
    };
    let r = match result {
        Ok(r) => r,
        Err(error @ Error::NotConverged { .. }) => {
            let Error::NotConverged { iterations, residual, ref trace } = error else {
                unreachable!()
            };
            let report = report
                .with_values(&FailedSolve {
                    iterations,
                    residual_norm: residual,
                    energy_trace: trace,
                })
                .with_error(&error);
            return Err(Failure::Compute {
                error,
                report: Some(report),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let check = CheckReport::new("residual", cfg.p, d.shape(), r.residual_norm, cfg.solver.grad_tol, 0.0);
    let table = nodal_table(d, &["u"], &[r.solution.values()]);
    Ok(report
        .with_values(&SolveValues {
            solution: r.solution.to_doc(d),
            residual_norm: r.residual_norm,
            iterations: r.iterations,
            energy_trace: r.energy_trace,
            complementarity: r.complementarity,
        })
        .with_checks(vec![check])
        .with_table(table))
}

#[derive(Serialize)]
struct CapacityValues {
    capacity: f64,
    vi_residual: f64,
    diagnostics: CapacityDiagnostics,
    potential: GridFunctionDoc,
}

/// Tolerance on the range `0 ≤ e_K ≤ 1` of an equilibrium potential.
const POTENTIAL_RANGE_TOL: f64 = 1e-8;
/// Largest admissible variational-inequality residual.
const VI_TOL: f64 = 1e-6;

fn capacity_cmd(cfg: &RunConfig, ctx: &PFormContext, report: Report) -> Outcome {
    let d = ctx.structure().domain();
    let spec = cfg
        .condenser
        .as_ref()
        .ok_or_else(|| config_err(Error::Config("missing \"condenser\" block".into())))?;
    let c = spec.build(d).map_err(config_err)?;
    let r = capacity::capacity(&c, ctx, &cfg.solver)?;
    let g = d.shape();
    let p = cfg.p;
    let on_k = r
        .potential
        .values()
        .iter()
        .zip(c.inner())
        .filter(|(_, &k)| k)
        .fold(0.0f64, |m, (v, _)| m.max((v - 1.0).abs()));
    let checks = vec![
        CheckReport::new("potential_upper", p, g, r.diagnostics.max_potential, 1.0, POTENTIAL_RANGE_TOL),
        CheckReport::new("potential_lower", p, g, 0.0, r.diagnostics.min_potential, POTENTIAL_RANGE_TOL),
        CheckReport::new("potential_on_inner", p, g, on_k, 0.0, 0.0),
        CheckReport::new("vi_residual", p, g, r.vi_residual, 0.0, VI_TOL),
    ];
    let inner: Vec<f64> = c.inner().iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
    let table = nodal_table(d, &["potential", "inner"], &[r.potential.values(), &inner]);
    Ok(report
        .with_values(&CapacityValues {
            capacity: r.value,
            vi_residual: r.vi_residual,
            diagnostics: r.diagnostics.clone(),
            potential: r.potential.to_doc(d),
        })
        .with_checks(checks)
        .with_table(table))
}

#[derive(Serialize)]
struct CaccioppoliValues {
    input_residual: f64,
    input_iterations: usize,
    alpha: f64,
    beta: f64,
    reports: Vec<CaccioppoliReport>,
}

fn to_check(name: String, r: &CaccioppoliReport) -> CheckReport {
    let mut c = CheckReport::new(&name, r.p, &[], r.lhs, r.rhs, r.tolerance)
        .with_detail("constant", r.constant_used)
        .with_detail("residual", r.residual);
    c.passed = r.passed;
    c
}

fn caccioppoli(cfg: &RunConfig, base: &Path, ctx: &PFormContext, report: Report) -> Outcome {
    let s = ctx.structure();
    let d = s.domain();
    let block = cfg.caccioppoli.clone().unwrap_or_default();
    if cfg.balls.is_empty() {
        return Err(config_err(Error::Config("caccioppoli needs at least one entry in \"balls\"".into())));
    }
    for b in &cfg.balls {
        if b.center.len() != d.dim() {
            return Err(config_err(Error::Config(format!(
                "ball center has {} entries in dimension {}",
                b.center.len(),
                d.dim()
            ))));
        }
    }
    let data = dirichlet_data(cfg, base, d)?;
    let (u, input_iterations) = if block.no_solve {
        (GridFunction::new(data.values().to_vec()), 0)
    } else {
        let r = solver::solve_dirichlet(ctx, &data, &cfg.solver)?;
        (GridFunction::new(r.solution.into_values()), r.iterations)
    };
    let interior = solver::interior_region(ctx);
    let input_residual = solver::harmonicity_residual(&u, &interior, ctx).unwrap_or(0.0);
    let (alpha, beta) = s.field().spectrum_bounds();
    let opts = &block.options;
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    for (i, b) in cfg.balls.iter().enumerate() {
        let x0 = d.nearest_node(&b.center);
        let ball = intrinsic::check_caccioppoli_ball(&u, x0, b.r, b.big_r, block.c, ctx, opts)?;
        let phi = intrinsic::truncation_function(x0, b.r, b.big_r, s, opts.stencil)?;
        let prop = intrinsic::check_caccioppoli(&u, &phi, block.c, ctx, opts)?;
        let bump = intrinsic::euclidean_bump(d, &b.center, b.r, b.big_r)?;
        let eucl = intrinsic::check_caccioppoli_euclidean(&u, &bump, block.c, alpha, beta, ctx, opts)?;
        for r in [prop, ball, eucl] {
            let mut c = to_check(format!("caccioppoli:{}:{i}", r.kind), &r);
            c.grid = d.shape().to_vec();
            checks.push(c);
            reports.push(r);
        }
    }
    let table = Table::checks(&checks);
    Ok(report
        .with_values(&CaccioppoliValues {
            input_residual,
            input_iterations,
            alpha,
            beta,
            reports,
        })
        .with_checks(checks)
        .with_table(table))
}

#[derive(Serialize)]
struct QrValues {
    summary: QrSummary,
    theta_spectrum: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    harmonicity: Option<HarmonicityReport>,
}

/// Algebraic identities of the cell analysis hold to this accuracy.
const QR_IDENTITY_TOL: f64 = 1e-10;

fn qr(cfg: &RunConfig, base: &Path, ctx: &PFormContext, report: Report) -> Outcome {
    let d = ctx.structure().domain();
    let n = d.dim();
    if cfg.p != n as f64 {
        return Err(config_err(Error::Config(format!(
            "qr works with p equal to the dimension ({n}), got p = {}",
            cfg.p
        ))));
    }
    let spec = cfg
        .mapping
        .as_ref()
        .ok_or_else(|| config_err(Error::Config("missing \"mapping\" block".into())))?;
    let mapping = spec.resolve(d, base).map_err(config_err)?;
    let block = cfg.qr.clone().unwrap_or_default();
    let analysis = QrAnalysis::new(&mapping, d, block.puncture)?;
    let induced = quasiregular::induced_structure(&analysis, d)?;
    let (lo, hi) = induced.structure().field().spectrum_bounds();
    let summary = analysis.summary();
    let g = d.shape();
    let p = cfg.p;
    let mut checks = vec![
        CheckReport::new("det_theta", p, g, summary.max_det_theta_error, 0.0, QR_IDENTITY_TOL),
        CheckReport::new("jacobian_singular_values", p, g, summary.max_jacobian_svd_error, 0.0, QR_IDENTITY_TOL),
        CheckReport::new("k_outer_at_least_one", p, g, 1.0, summary.k_outer, QR_IDENTITY_TOL),
        CheckReport::new("k_inner_at_least_one", p, g, 1.0, summary.k_inner, QR_IDENTITY_TOL),
        CheckReport::new("theta_lower_ellipticity", p, g, summary.alpha, lo, QR_IDENTITY_TOL * summary.beta),
        CheckReport::new("theta_upper_ellipticity", p, g, hi, summary.beta, QR_IDENTITY_TOL * summary.beta),
    ];
    let harmonicity = match &block.harmonicity {
        Some(h) => {
            let mut opts = h.options.clone();
            if opts.puncture.is_none() {
                opts.puncture = block.puncture;
            }
            let r = quasiregular::verify_component_harmonicity(&mapping, d.extent(), h.resolutions, &opts)
                .map_err(|e| match e {
                    Error::InvalidArgument(_) => config_err(e),
                    e => e.into(),
                })?;
            for c in &r.components {
                let check = match c.order {
                    None => CheckReport::new(&format!("harmonicity:{}", c.name), p, g, c.fine, 0.0, opts.exact_floor),
                    Some(o) => CheckReport::new(&format!("harmonicity_order:{}", c.name), p, g, opts.min_order, o, 0.0),
                };
                checks.push(check.with_detail("coarse", c.coarse).with_detail("fine", c.fine));
            }
            Some(r)
        }
        None => None,
    };
    let mut table = Table {
        columns: coord_columns(d, &["jacobian", "sigma_max", "sigma_min", "excluded"]),
        rows: Vec::with_capacity(d.cell_count()),
    };
    for (c, cd) in analysis.cells().iter().enumerate() {
        let mut row: Vec<String> = d.cell_center(c)[..n].iter().map(|x| x.to_string()).collect();
        row.push(cd.jacobian.to_string());
        row.push(cd.singular[0].to_string());
        row.push(cd.singular[n - 1].to_string());
        row.push((analysis.excluded()[c] as u8).to_string());
        table.push(row);
    }
    Ok(report
        .with_values(&QrValues {
            summary,
            theta_spectrum: [lo, hi],
            harmonicity,
        })
        .with_checks(checks)
        .with_table(table))
}

#[derive(Serialize)]
struct MetricValues {
    source_node: usize,
    stencil: intrinsic::Stencil,
    metrication: f64,
    gradient_metrication: f64,
    max_distance: f64,
    distances: GridFunctionDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff_max_gamma: Option<f64>,
}

fn metric(cfg: &RunConfig, ctx: &PFormContext, report: Report) -> Outcome {
    let s = ctx.structure();
    let d = s.domain();
    let block = cfg
        .metric
        .as_ref()
        .ok_or_else(|| config_err(Error::Config("missing \"metric\" block".into())))?;
    if block.source.len() != d.dim() {
        return Err(config_err(Error::Config(format!(
            "metric source has {} entries in dimension {}",
            block.source.len(),
            d.dim()
        ))));
    }
    let x0 = d.nearest_node(&block.source);
    let mf = intrinsic::intrinsic_distance(x0, s, block.stencil)?;
    let mut checks = Vec::new();
    let mut cutoff_max_gamma = None;
    if let Some(r) = block.cutoff_radius {
        let cut = intrinsic::cutoff_rho(x0, r, s, block.stencil).map_err(config_err)?;
        let g = intrinsic::max_cell_gamma(s, &cut)?;
        let bound = (1.0 + mf.gradient_metrication).powi(2);
        checks.push(CheckReport::new("cutoff_gamma", cfg.p, d.shape(), g, bound, 1e-12 * bound));
        cutoff_max_gamma = Some(g);
    }
    let table = nodal_table(d, &["rho"], &[&mf.distances]);
    Ok(report
        .with_values(&MetricValues {
            source_node: x0,
            stencil: block.stencil,
            metrication: mf.metrication,
            gradient_metrication: mf.gradient_metrication,
            max_distance: mf.distances.iter().cloned().fold(0.0, f64::max),
            distances: mf.to_function().to_doc(d),
            cutoff_max_gamma,
        })
        .with_checks(checks)
        .with_table(table))
}

#[derive(Serialize)]
struct CheckValues {
    suites: Vec<Suite>,
    samples: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    choquet_tolerance: Option<capacity::ChoquetTolerance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    poincare_k: Option<f64>,
}

fn random_function<R: Rng>(d: &GridDomain, rng: &mut R, amplitude: f64) -> GridFunction {
    GridFunction::new((0..d.node_count()).map(|_| rng.gen_range(-amplitude..amplitude)).collect())
}

fn masks(shapes: &[crate::capacity::ShapeSpec], d: &GridDomain) -> std::result::Result<Vec<Vec<bool>>, Failure> {
    shapes.iter().map(|s| s.to_mask(d).map_err(config_err)).collect()
}

fn check(cfg: &RunConfig, ctx: &PFormContext, report: Report) -> Outcome {
    let s = ctx.structure();
    let d = s.domain();
    let block = cfg
        .check
        .as_ref()
        .ok_or_else(|| config_err(Error::Config("missing \"check\" block".into())))?;
    if block.suites.is_empty() {
        return Err(config_err(Error::Config("\"suites\" is empty".into())));
    }
    let needs = |suite: Suite, count: usize, what: &str| -> std::result::Result<(), Failure> {
        if block.suites.contains(&suite) && count == 0 {
            return Err(config_err(Error::Config(format!("suite {suite:?} needs {what}"))));
        }
        Ok(())
    };
    needs(Suite::Choquet, block.sets.len(), "\"sets\"")?;
    needs(Suite::D1D2, block.sets.len().saturating_sub(1), "two \"sets\"")?;
    needs(Suite::Increments, block.e_sets.len().min(block.f_sets.len()), "\"e_sets\" and \"f_sets\"")?;
    needs(Suite::Sector, block.samples, "samples ≥ 1")?;
    if block.suites.contains(&Suite::Monotone) && cfg.p < 2.0 {
        return Err(config_err(Error::Config("the monotone suite needs p ≥ 2".into())));
    }
    let outer = block.outer.to_mask(d).map_err(config_err)?;
    let sets = masks(&block.sets, d)?;
    let e_sets = masks(&block.e_sets, d)?;
    let f_sets = masks(&block.f_sets, d)?;
    let opts: &SolveOptions = &cfg.solver;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();
    let mut values = CheckValues {
        suites: block.suites.clone(),
        samples: block.samples,
        seed: cfg.seed,
        choquet_tolerance: None,
        poincare_k: None,
    };
    for suite in &block.suites {
        match suite {
            Suite::Sector => {
                for _ in 0..block.samples {
                    let (u, v) = (random_function(d, &mut rng, 1.0), random_function(d, &mut rng, 1.0));
                    checks.push(checks::check_sector(&u, &v, ctx)?);
                }
            }
            Suite::Monotone => {
                for _ in 0..block.samples {
                    let (u, v) = (random_function(d, &mut rng, 1.0), random_function(d, &mut rng, 1.0));
                    checks.push(checks::check_monotone(&u, &v, ctx)?);
                }
            }
            Suite::Contraction => {
                let kinds = [
                    Contraction::Unit,
                    Contraction::Truncation(block.truncation),
                    Contraction::NegativePart,
                    Contraction::tanh(),
                ];
                for _ in 0..block.samples {
                    let (u, v) = (random_function(d, &mut rng, 1.5), random_function(d, &mut rng, 1.0));
                    for k in &kinds {
                        checks.push(checks::check_contraction_operates(&u, &v, ctx, k)?);
                    }
                }
            }
            Suite::D1D2 => {
                let potential = |k: &Vec<bool>| -> std::result::Result<GridFunction, Failure> {
                    let c = Condenser::new(d, k.clone(), outer.clone()).map_err(config_err)?;
                    let r = capacity::capacity(&c, ctx, opts)?;
                    Ok(GridFunction::new(r.potential.into_values()))
                };
                let (u, v) = (potential(&sets[0])?, potential(&sets[1])?);
                for (a, b) in [(&u, &v), (&v, &u)] {
                    let r = checks::check_d1_d2(a, b, block.alpha, &outer, ctx)?;
                    checks.push(r.d1);
                    checks.push(r.d2);
                }
            }
            Suite::Choquet => {
                let r = capacity::check_choquet(&sets, &outer, ctx, opts)?;
                values.choquet_tolerance = Some(r.tolerance);
                checks.extend(r.checks);
            }
            Suite::Increments => {
                checks.push(capacity::check_increment_subadditivity(&e_sets, &f_sets, &outer, ctx, opts)?);
            }
            Suite::Coercive => {
                let boundary = d.boundary_mask();
                let k = checks::estimate_poincare(s, &boundary)?;
                let samples: Vec<GridFunction> = (0..block.samples)
                    .map(|_| {
                        let u = random_function(d, &mut rng, 1.0);
                        GridFunction::new(
                            u.values().iter().zip(&boundary).map(|(x, &b)| if b { 0.0 } else { *x }).collect(),
                        )
                    })
                    .collect();
                checks.push(checks::check_coercive(ctx, k, &samples)?);
                values.poincare_k = Some(k);
            }
            Suite::Hemicontinuous => {
                for _ in 0..block.samples {
                    let (u, v) = (random_function(d, &mut rng, 1.0), random_function(d, &mut rng, 1.0));
                    checks.push(checks::check_hemicontinuous(&u, &v, ctx, 9)?);
                }
            }
        }
    }
    let table = Table::checks(&checks);
    Ok(report.with_values(&values).with_checks(checks).with_table(table))
}
