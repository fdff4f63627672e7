//! Command execution: each subcommand loads its config section, runs the
//! matching solver, and assembles a result document.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use representer::acceptance;
use representer::duality;
use representer::gtv;
use representer::hilbert;
use representer::lp;
use representer::measures::{self, AtomSet, SpikeTrain};
use representer::problem::{Domain, Loss, SolveReport};

use crate::config::{
    AtomsConfig, LoadedConfig, LossConfig, SpikesConfig, SyntheticGtv, SyntheticSpikes,
};
use crate::error::{CliError, CliResult};
use crate::io::{self, Document};

/// Flag values that override or complete the config file.
pub struct Overrides {
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub verbose: bool,
}

impl Overrides {
    fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(1e-9)
    }

    fn note(&self, message: &str) {
        if self.verbose {
            eprintln!("{message}");
        }
    }
}

fn resolved_config<T: Serialize>(section_name: &str, section: &T, seed: u64, tolerance: f64) -> serde_json::Value {
    json!({
        section_name: io::to_value(section),
        "seed": seed,
        "tolerance": tolerance,
    })
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn conjugate(cfg: &LoadedConfig, ov: &Overrides) -> CliResult<(Document, i32)> {
    let section = cfg.section("conjugate", &cfg.file.conjugate)?;
    let x = io::load_vector(cfg, &section.input, "conjugate.input")?;
    let pair = duality::conjugate_pair(x.as_slice(), section.p)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "conjugate.p"))?;
    let check = duality::check_conjugate_pair(&pair.primal, &pair.dual, section.p, ov.tolerance())
        .map_err(|e| CliError::from_solver(e, &cfg.path, "conjugate.p"))?;

    #[derive(Serialize)]
    struct ConjugateResult {
        p: f64,
        q: f64,
        primal: Vec<f64>,
        dual: Vec<f64>,
        primal_norm: f64,
        dual_norm: f64,
        pairing: f64,
        norm_residual: f64,
        pairing_residual: f64,
        threshold: f64,
        passed: bool,
    }
    let result = ConjugateResult {
        p: pair.p,
        q: pair.q,
        primal_norm: duality::lp_norm(&pair.primal, pair.p),
        dual_norm: duality::lp_norm(&pair.dual, pair.q),
        pairing: pair.dual.iter().zip(&pair.primal).map(|(d, v)| d * v).sum(),
        primal: pair.primal.clone(),
        dual: pair.dual.clone(),
        norm_residual: check.norm_residual,
        pairing_residual: check.pairing_residual,
        threshold: check.threshold,
        passed: check.passed,
    };
    let doc = Document {
        command: "conjugate",
        status: "ok",
        config: resolved_config("conjugate", section, ov.seed.unwrap_or(0), ov.tolerance()),
        result: io::to_value(&result),
        warnings: Vec::new(),
    };
    Ok((doc, 0))
}

pub fn tikhonov(cfg: &LoadedConfig, ov: &Overrides) -> CliResult<(Document, i32)> {
    let section = cfg.section("tikhonov", &cfg.file.tikhonov)?;
    let h = io::load_matrix(cfg, &section.operator, "tikhonov.operator")?;
    let y = io::load_vector(cfg, &section.data, "tikhonov.data")?;
    let (a, report) = hilbert::tikhonov_fit(&h, &y, section.lambda)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "tikhonov"))?;
    ov.note(&format!("tikhonov solved, objective {:.6e}", report.objective));

    #[derive(Serialize)]
    struct TikhonovResult {
        coefficients: Vec<f64>,
        report: SolveReport,
    }
    let warnings = report.warnings.clone();
    let result = TikhonovResult {
        coefficients: vec_of(&a),
        report,
    };
    let doc = Document {
        command: "tikhonov",
        status: "ok",
        config: resolved_config("tikhonov", section, ov.seed.unwrap_or(0), ov.tolerance()),
        result: io::to_value(&result),
        warnings,
    };
    Ok((doc, 0))
}

pub fn rkhs_fit(cfg: &LoadedConfig, ov: &Overrides) -> CliResult<(Document, i32)> {
    let section = cfg.section("rkhs-fit", &cfg.file.rkhs_fit)?;
    let sites = io::load_matrix(cfg, &section.sites, "rkhs-fit.sites")?;
    let y = io::load_vector(cfg, &section.data, "rkhs-fit.data")?;
    let kernel = section.kernel.to_kernel();
    let loss = section.loss.clone().unwrap_or(LossConfig::Quadratic).to_loss();
    let (model, report) = hilbert::rkhs_fit(&kernel, &sites, &y, section.lambda, &loss)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "rkhs-fit"))?;

    let samples = match &section.samples {
        Some(grid) => {
            if sites.ncols() != 1 {
                return Err(CliError::validation(
                    &cfg.path,
                    "rkhs-fit.samples",
                    "sampled output is only available for one-dimensional sites",
                ));
            }
            Some(sample_curve(grid.from, grid.to, grid.count, |x| {
                hilbert::rkhs_predict(&model, &[x])
            })
            .map_err(|e| CliError::from_solver(e, &cfg.path, "rkhs-fit.samples"))?)
        }
        None => None,
    };

    #[derive(Serialize)]
    struct RkhsResult {
        coefficients: Vec<f64>,
        report: SolveReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        samples: Option<Vec<[f64; 2]>>,
    }
    let warnings = report.warnings.clone();
    let result = RkhsResult {
        coefficients: vec_of(&model.coefficients),
        report,
        samples,
    };
    let doc = Document {
        command: "rkhs-fit",
        status: "ok",
        config: resolved_config("rkhs-fit", section, ov.seed.unwrap_or(0), ov.tolerance()),
        result: io::to_value(&result),
        warnings,
    };
    Ok((doc, 0))
}

fn sample_curve(
    from: f64,
    to: f64,
    count: usize,
    f: impl Fn(f64) -> representer::Result<f64>,
) -> representer::Result<Vec<[f64; 2]>> {
    let count = count.max(2);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let x = from + (to - from) * i as f64 / (count - 1) as f64;
        out.push([x, f(x)?]);
    }
    Ok(out)
}

pub fn lp_solve(cfg: &LoadedConfig, ov: &Overrides) -> CliResult<(Document, i32)> {
    let section = cfg.section("lp-solve", &cfg.file.lp_solve)?;
    let h = io::load_matrix(cfg, &section.operator, "lp-solve.operator")?;
    let y = io::load_vector(cfg, &section.data, "lp-solve.data")?;
    let loss_config = section.loss.clone().unwrap_or(LossConfig::Quadratic);
    let loss = loss_config.to_loss();
    let (solution, report) = lp::lp_primal_solve(&h, &y, section.lambda, section.p, &loss)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "lp-solve"))?;
    ov.note(&format!(
        "lp solve finished after {} iterations, residual {:.3e}",
        report.iterations, report.optimality_residual
    ));

    let mut warnings = report.warnings.clone();
    // The vanishing-regularization limit has no finite-lambda certificate.
    let certificate = if matches!(loss, Loss::Equality) {
        warnings.push("no dual certificate is reported for the equality loss".into());
        None
    } else {
        Some(vec_of(
            &lp::dual_certificate(&solution, &h, &y, section.lambda, &loss)
                .map_err(|e| CliError::from_solver(e, &cfg.path, "lp-solve"))?,
        ))
    };

    #[derive(Serialize)]
    struct PrunedResult {
        coefficients: Vec<f64>,
        support: Vec<usize>,
    }
    let pruned = if section.prune.unwrap_or(false) {
        let walked = lp::prune_to_extreme(&solution.coefficients, &h)
            .map_err(|e| CliError::from_solver(e, &cfg.path, "lp-solve.prune"))?;
        Some(PrunedResult {
            support: (0..walked.len()).filter(|&i| walked[i] != 0.0).collect(),
            coefficients: vec_of(&walked),
        })
    } else {
        None
    };

    #[derive(Serialize)]
    struct LpResult {
        coefficients: Vec<f64>,
        support: Vec<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        certificate: Option<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        pruned: Option<PrunedResult>,
        report: SolveReport,
    }
    let result = LpResult {
        coefficients: vec_of(&solution.coefficients),
        support: solution.support.clone(),
        certificate,
        pruned,
        report,
    };
    let doc = Document {
        command: "lp-solve",
        status: "ok",
        config: resolved_config("lp-solve", section, ov.seed.unwrap_or(0), ov.tolerance()),
        result: io::to_value(&result),
        warnings,
    };
    Ok((doc, 0))
}

fn build_atoms(cfg: &LoadedConfig, atoms: &AtomsConfig) -> CliResult<AtomSet> {
    Ok(match atoms {
        AtomsConfig::Fourier { max_frequency } => AtomSet::Fourier {
            max_frequency: *max_frequency,
        },
        AtomsConfig::GaussianWindows { centers, sigma } => AtomSet::GaussianWindows {
            centers: io::load_matrix(cfg, centers, "spikes.atoms.centers")?,
            sigma: *sigma,
        },
    })
}

fn spikes_domain(cfg: &LoadedConfig, section: &SpikesConfig, atoms: &AtomSet) -> CliResult<Domain> {
    match &section.domain {
        Some(d) => {
            let ok = !d.lower.is_empty()
                && d.lower.len() == d.upper.len()
                && d.lower
                    .iter()
                    .zip(&d.upper)
                    .all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo < hi);
            if !ok {
                return Err(CliError::validation(
                    &cfg.path,
                    "spikes.domain",
                    "domain bounds must be finite with lower < upper in every coordinate",
                ));
            }
            Ok(Domain {
                lower: d.lower.clone(),
                upper: d.upper.clone(),
            })
        }
        None => {
            if atoms.dim() == 1 {
                Ok(Domain::unit_interval())
            } else {
                Err(CliError::validation(
                    &cfg.path,
                    "spikes.domain",
                    "a domain is required for multi-dimensional atoms",
                ))
            }
        }
    }
}

fn synthesize_spikes(
    synth: &SyntheticSpikes,
    domain: &Domain,
    seed: u64,
    path: &str,
) -> CliResult<SpikeTrain> {
    let separation = synth.min_separation.unwrap_or(0.1);
    let [lo, hi] = synth.amplitude_range.unwrap_or([0.6, 1.4]);
    if !(lo > 0.0 && hi >= lo) {
        return Err(CliError::validation(
            path,
            "spikes.synthetic.amplitude-range",
            "amplitude range must satisfy 0 < low <= high",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = domain.dim();
    let mut positions: Vec<Vec<f64>> = Vec::new();
    let mut attempts = 0usize;
    while positions.len() < synth.count {
        attempts += 1;
        if attempts > 100_000 {
            return Err(CliError::validation(
                path,
                "spikes.synthetic",
                format!(
                    "could not place {} spikes separated by {separation} in the domain",
                    synth.count
                ),
            ));
        }
        let candidate: Vec<f64> = (0..dim)
            .map(|j| rng.random_range(domain.lower[j]..domain.upper[j]))
            .collect();
        let far_enough = positions.iter().all(|x| {
            let d2: f64 = x.iter().zip(&candidate).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() >= separation
        });
        if far_enough {
            positions.push(candidate);
        }
    }
    let amplitudes = (0..synth.count)
        .map(|_| {
            let sign = if rng.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 };
            sign * rng.random_range(lo..hi)
        })
        .collect();
    Ok(SpikeTrain {
        positions,
        amplitudes,
    })
}

pub fn spikes(cfg: &LoadedConfig, ov: &Overrides) -> CliResult<(Document, i32)> {
    let section = cfg.section("spikes", &cfg.file.spikes)?;
    let atoms = build_atoms(cfg, &section.atoms)?;
    let domain = spikes_domain(cfg, section, &atoms)?;
    let cells = section.cells.unwrap_or(512);
    let seed = ov.seed.or(section.seed).unwrap_or(0);

    let (y, truth) = match (&section.data, &section.synthetic) {
        (Some(source), None) => (io::load_vector(cfg, source, "spikes.data")?, None),
        (None, Some(synth)) => {
            let truth = synthesize_spikes(synth, &domain, seed, &cfg.path)?;
            let y = truth
                .measurements(&atoms)
                .map_err(|e| CliError::from_solver(e, &cfg.path, "spikes.synthetic"))?;
            (y, Some(truth))
        }
        _ => {
            return Err(CliError::validation(
                &cfg.path,
                "spikes.data",
                "exactly one of `data` and `synthetic` must be given",
            ))
        }
    };

    let lambda = match (section.lambda, section.lambda_relative) {
        (Some(l), None) => l,
        (None, Some(rel)) => rel * y.norm(),
        _ => {
            return Err(CliError::validation(
                &cfg.path,
                "spikes.lambda",
                "exactly one of `lambda` and `lambda-relative` must be given",
            ))
        }
    };

    let (grid_train, report) = measures::spike_solve(&atoms, &y, lambda, &domain, cells)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "spikes"))?;
    ov.note(&format!(
        "grid stage found {} spikes, residual {:.3e}",
        grid_train.len(),
        report.optimality_residual
    ));

    let refine_steps = section.refine_steps.unwrap_or(2000);
    let refined = if refine_steps > 0 {
        measures::refine_positions(&atoms, &y, lambda, &domain, &grid_train, refine_steps)
            .map_err(|e| CliError::from_solver(e, &cfg.path, "spikes.refine-steps"))?
            .0
    } else {
        grid_train.clone()
    };

    let widest_axis = (0..domain.dim())
        .map(|j| domain.upper[j] - domain.lower[j])
        .fold(0.0_f64, f64::max);
    let radius = section.merge_radius_cells.unwrap_or(1.0) * widest_axis / cells as f64;
    let merged = measures::merge_close(&refined, radius)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "spikes.merge-radius-cells"))?;
    // Merging replaces split grid spikes by their mass centers, so a second
    // refinement pass settles the merged train back onto the optimum.
    let train = if refine_steps > 0 && !merged.is_empty() {
        measures::refine_positions(&atoms, &y, lambda, &domain, &merged, refine_steps)
            .map_err(|e| CliError::from_solver(e, &cfg.path, "spikes.refine-steps"))?
            .0
    } else {
        merged
    };

    let z = train
        .measurements(&atoms)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "spikes"))?;
    let residual = &y - &z;
    let (_, eta) = measures::certificate_grid(&atoms, &residual, &domain, cells)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "spikes"))?;
    let certificate_peak = eta.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let objective = measures::measure_objective(&atoms, &y, lambda, &train)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "spikes"))?;

    #[derive(Serialize)]
    struct TruthEcho {
        positions: Vec<Vec<f64>>,
        amplitudes: Vec<f64>,
    }
    #[derive(Serialize)]
    struct SpikesResult {
        lambda: f64,
        positions: Vec<Vec<f64>>,
        amplitudes: Vec<f64>,
        total_variation: f64,
        objective: f64,
        certificate_peak: f64,
        report: SolveReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        truth: Option<TruthEcho>,
    }
    let warnings = report.warnings.clone();
    let result = SpikesResult {
        lambda,
        positions: train.positions.clone(),
        amplitudes: train.amplitudes.clone(),
        total_variation: train.total_variation(),
        objective,
        certificate_peak,
        report,
        truth: truth.map(|t| TruthEcho {
            positions: t.positions,
            amplitudes: t.amplitudes,
        }),
    };
    let doc = Document {
        command: "spikes",
        status: "ok",
        config: resolved_config("spikes", section, seed, ov.tolerance()),
        result: io::to_value(&result),
        warnings,
    };
    Ok((doc, 0))
}

fn synthesize_gtv(
    synth: &SyntheticGtv,
    kernel: &gtv::ResolvedKernel,
    seed: u64,
    path: &str,
) -> CliResult<(DMatrix<f64>, DVector<f64>)> {
    if synth.count < 2 {
        return Err(CliError::validation(
            path,
            "gtv-fit.synthetic.count",
            "at least two sites are required",
        ));
    }
    let [lo, hi] = synth.span;
    if hi <= lo || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::validation(
            path,
            "gtv-fit.synthetic.span",
            "span must be an increasing interval",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..synth.count).map(|_| rng.random_range(lo..hi)).collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite sites"));
    let sites = DMatrix::from_fn(synth.count, 1, |i, _| values[i]);
    let mut y = DVector::zeros(synth.count);
    for m in 0..synth.count {
        for [center, amplitude] in &synth.translates {
            y[m] += amplitude
                * kernel
                    .evaluate(&[sites[(m, 0)] - center])
                    .map_err(|e| CliError::from_solver(e, path, "gtv-fit.synthetic.translates"))?;
        }
    }
    Ok((sites, y))
}

pub fn gtv_fit(cfg: &LoadedConfig, ov: &Overrides) -> CliResult<(Document, i32)> {
    let section = cfg.section("gtv-fit", &cfg.file.gtv_fit)?;
    let spec = section.operator.to_spec();
    let kernel = gtv::kernel_from_operator(&spec)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "gtv-fit.operator"))?;
    let seed = ov.seed.or(section.seed).unwrap_or(0);

    let (sites, y) = match (&section.sites, &section.data, &section.synthetic) {
        (Some(sites), Some(data), None) => (
            io::load_matrix(cfg, sites, "gtv-fit.sites")?,
            io::load_vector(cfg, data, "gtv-fit.data")?,
        ),
        (None, None, Some(synth)) => synthesize_gtv(synth, &kernel, seed, &cfg.path)?,
        _ => {
            return Err(CliError::validation(
                &cfg.path,
                "gtv-fit.sites",
                "give either both `sites` and `data`, or a `synthetic` block",
            ))
        }
    };

    let per_dim = section.centers_per_dim.unwrap_or(64);
    let grid = gtv::CenterGrid::from_sites(&sites, kernel.width(), per_dim)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "gtv-fit.centers-per-dim"))?;
    let (model, report) = gtv::gtv_fit(&spec, &sites, &y, section.lambda, &grid)
        .map_err(|e| CliError::from_solver(e, &cfg.path, "gtv-fit"))?;
    ov.note(&format!(
        "gtv fit kept {} of {} candidate centers",
        model.coefficients.len(),
        grid.centers.nrows()
    ));

    let samples = match &section.samples {
        Some(grid) => {
            if sites.ncols() != 1 {
                return Err(CliError::validation(
                    &cfg.path,
                    "gtv-fit.samples",
                    "sampled output is only available for one-dimensional sites",
                ));
            }
            Some(sample_curve(grid.from, grid.to, grid.count, |x| {
                gtv::gtv_predict(&model, &[x])
            })
            .map_err(|e| CliError::from_solver(e, &cfg.path, "gtv-fit.samples"))?)
        }
        None => None,
    };

    #[derive(Serialize)]
    struct GtvResult {
        centers: Vec<Vec<f64>>,
        coefficients: Vec<f64>,
        regularization_cost: f64,
        report: SolveReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        samples: Option<Vec<[f64; 2]>>,
    }
    let warnings = report.warnings.clone();
    let result = GtvResult {
        centers: rows_of(&model.centers),
        coefficients: vec_of(&model.coefficients),
        regularization_cost: model.regularization_cost(),
        report,
        samples,
    };
    let doc = Document {
        command: "gtv-fit",
        status: "ok",
        config: resolved_config("gtv-fit", section, seed, ov.tolerance()),
        result: io::to_value(&result),
        warnings,
    };
    Ok((doc, 0))
}

pub fn selftest(
    cfg: &LoadedConfig,
    ov: &Overrides,
    criterion: Option<usize>,
) -> CliResult<(Document, i32)> {
    let criteria: Vec<usize> = match criterion {
        Some(index) => vec![index],
        None => match cfg.file.selftest.as_ref().and_then(|s| s.criteria.clone()) {
            Some(list) => list,
            None => (1..=8).collect(),
        },
    };
    for &index in &criteria {
        if !(1..=8).contains(&index) {
            return Err(CliError::validation(
                &cfg.path,
                "selftest.criteria",
                format!("criterion {index} does not exist; valid indices are 1 through 8"),
            ));
        }
    }

    #[derive(Serialize)]
    struct CriterionDoc {
        index: usize,
        name: String,
        passed: bool,
        detail: String,
    }
    let mut outcomes = Vec::new();
    for &index in &criteria {
        let outcome = match index {
            1 => acceptance::criterion_1_duality(),
            2 => acceptance::criterion_2_polarization(),
            3 => acceptance::criterion_3_hilbert(),
            4 => acceptance::criterion_4_lp_certificates(),
            5 => acceptance::criterion_5_extreme_points(),
            6 => acceptance::criterion_6_spike_recovery(),
            7 => acceptance::criterion_7_gtv(),
            _ => acceptance::criterion_8_gradient_audit(),
        };
        println!("{}", acceptance::format_line(&outcome));
        outcomes.push(outcome);
    }
    let all_passed = outcomes.iter().all(|o| o.passed);
    ov.note(if all_passed {
        "all criteria passed"
    } else {
        "some criteria failed"
    });

    // Timings are deliberately left out of the document so identical runs
    // serialize byte for byte.
    let docs: Vec<CriterionDoc> = outcomes
        .iter()
        .map(|o| CriterionDoc {
            index: o.index,
            name: o.name.to_string(),
            passed: o.passed,
            detail: o.detail.clone(),
        })
        .collect();
    let result = json!({
        "criteria": io::to_value(&docs),
        "all_passed": all_passed,
    });
    let config = json!({
        "selftest": { "criteria": criteria },
        "seed": ov.seed.unwrap_or(0),
        "tolerance": ov.tolerance(),
    });
    let doc = Document {
        command: "selftest",
        status: "ok",
        config,
        result,
        warnings: Vec::new(),
    };
    Ok((doc, if all_passed { 0 } else { 3 }))
}
