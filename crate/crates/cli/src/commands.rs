use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use simm::tasks::{cross_validate, holdout_accuracy, simulate, Classifier, NcClassifier, SimmClassifier, SimulationSpec};
use simm::{fit, DataSet, FittedModel, LatentWarp};

use crate::config::{MethodName, RunConfig};
use crate::error::{CliError, CliResult};
use crate::model_file::ModelFile;
use crate::report::{axes, chi2_quantile_95, marginal_cov, parameter_rows};
use crate::table::{self, fmt, write_rows, CurveTable};

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))
}

/// Fit the configured model to a curve table and warn about anything odd.
pub fn fit_table(config: &RunConfig, table: &CurveTable) -> CliResult<FittedModel> {
    let (spec, _) = config.initial_spec(&table.data)?;
    let fitted = fit(&table.data, &spec, &config.fit_options())?;
    warn_all(&fitted.warnings);
    Ok(fitted)
}

fn warp_rows(fitted: &FittedModel, data: &DataSet) -> (Vec<String>, Vec<Vec<String>>) {
    let m = fitted.spec.warp.m_w();
    let shift = fitted.spec.warp.include_shift();
    let mut header = vec!["sample_id".to_string()];
    header.extend((1..=m).map(|k| format!("w{k}")));
    if shift {
        header.push("shift".into());
    }
    let rows = data
        .samples()
        .iter()
        .zip(&fitted.latents)
        .map(|(s, l)| {
            let mut row = vec![s.id.clone()];
            row.extend(l.w.iter().map(|x| fmt(*x)));
            if shift {
                row.push(fmt(l.shift.unwrap_or(0.0)));
            }
            row
        })
        .collect();
    (header, rows)
}

/// Observations with their warped times, both in original units.
fn aligned_rows(fitted: &FittedModel, table: &CurveTable, latents: &[LatentWarp]) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let q = table.q();
    let mut header = vec!["sample_id".to_string(), "t".into(), "v".into()];
    header.extend((1..=q).map(|j| format!("y{j}")));
    let mut rows = Vec::new();
    for (n, s) in table.data.samples().iter().enumerate() {
        let curve = fitted.spec.warp.curve(&latents[n])?;
        for (k, &u) in s.times().iter().enumerate() {
            let mut row = vec![s.id.clone(), fmt(table.times[n][k]), fmt(table.to_original(n, curve.eval(u)))];
            row.extend((0..q).map(|j| s.value(k, j).map_or_else(String::new, fmt)));
            rows.push(row);
        }
    }
    Ok((header, rows))
}

pub fn run_fit(config: &RunConfig, data: &Path, out: &Path) -> CliResult<()> {
    let table = table::load(data)?;
    let fitted = fit_table(config, &table)?;
    create_dir(out)?;
    ModelFile::from_fit(config, &fitted, &table.data, table.common_range())?.save(&out.join("model.json"))?;
    let trace: Vec<Vec<String>> = fitted.trace.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), fmt(*v)]).collect();
    write_rows(&out.join("trace.csv"), &["iteration".into(), "criterion".into()], &trace)?;
    let (h, r) = warp_rows(&fitted, &table.data);
    write_rows(&out.join("warps.csv"), &h, &r)?;
    let (h, r) = aligned_rows(&fitted, &table, &fitted.latents)?;
    write_rows(&out.join("aligned.csv"), &h, &r)?;
    let report: Vec<Vec<String>> = parameter_rows(&fitted).into_iter().map(|(n, v)| vec![n, fmt(v)]).collect();
    write_rows(&out.join("parameters.csv"), &["name".into(), "value".into()], &report)?;
    println!(
        "fitted {} samples in {} outer iterations; sigma2 = {}; criterion = {}",
        table.data.len(),
        fitted.outer_iterations,
        fmt(fitted.sigma2),
        fitted.trace.last().map_or_else(|| "NA".into(), |v| fmt(*v))
    );
    Ok(())
}

pub fn run_align(config: &RunConfig, data: &Path, model: Option<&Path>, out: &Path) -> CliResult<()> {
    let (fitted, table, latents) = match model {
        Some(path) => {
            let file = ModelFile::load(path)?;
            let fitted = file.to_fitted()?;
            let reader = std::fs::File::open(data).map_err(|e| CliError::data(format!("{}: {e}", data.display())))?;
            let table = table::read(reader, Some(&file.subjects))?;
            let identity = LatentWarp::identity(&fitted.spec.warp);
            let mut latents = Vec::with_capacity(table.data.len());
            for s in table.data.samples() {
                if !fitted.trained[s.subject] {
                    return Err(CliError::data(format!("sample {}: subject {} has no template", s.id, file.subjects[s.subject])));
                }
                let p = simm::inference::predict_warp(&fitted.spec, fitted.params(), s, &fitted.coefficients[s.subject], &identity)?;
                if !p.converged {
                    eprintln!("warning: warp prediction for sample {} did not converge", s.id);
                }
                latents.push(p.latent);
            }
            (fitted, table, latents)
        }
        None => {
            let table = table::load(data)?;
            let fitted = fit_table(config, &table)?;
            let latents = fitted.latents.clone();
            (fitted, table, latents)
        }
    };
    let (h, r) = aligned_rows(&fitted, &table, &latents)?;
    write_rows(out, &h, &r)
}

/// Random-walk template coefficients, one `K x q` matrix per subject.
fn random_templates(k: usize, q: usize, subjects: usize, scale: f64, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..subjects)
        .map(|_| {
            let mut c = DMatrix::zeros(k, q);
            for j in 0..q {
                let mut level = 0.0;
                for i in 0..k {
                    level += scale * rng.sample::<f64, _>(StandardNormal);
                    c[(i, j)] = level;
                }
            }
            c
        })
        .collect()
}

pub fn run_simulate(config: &RunConfig, out: &Path, truth: Option<&Path>) -> CliResult<()> {
    let sc = &config.simulate;
    if sc.grid_points < 2 || sc.q == 0 || sc.subjects == 0 || sc.samples_per_subject == 0 {
        return Err(CliError::data("simulate: need q, subjects, samples_per_subject >= 1 and grid_points >= 2"));
    }
    let [t0, t1] = sc.time_range;
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err(CliError::data("simulate.time_range must be increasing"));
    }
    let basis = config.basis()?;
    let warp = config.warp_model()?;
    let q = sc.q;
    let templates = match &sc.templates {
        Some(t) => {
            if t.len() != sc.subjects || t.iter().any(|c| c.len() != basis.len() * q) {
                return Err(CliError::data(format!("simulate.templates: need {} lists of {} values", sc.subjects, basis.len() * q)));
            }
            t.iter().map(|c| DMatrix::from_row_slice(basis.len(), q, c)).collect()
        }
        None => random_templates(basis.len(), q, sc.subjects, sc.template_scale, config.fit.seed),
    };
    let scales = config.amplitude.scales.clone().unwrap_or_else(|| vec![0.05; q]);
    if scales.len() != q {
        return Err(CliError::data(format!("amplitude.scales has {} entries, simulate.q = {q}", scales.len())));
    }
    let spec = SimulationSpec {
        basis,
        warp,
        warp_cov: sc.warps.then(|| config.warp_covariance()),
        amplitude: if sc.amplitude { Some(config.amplitude_model(&scales)?) } else { None },
        noise: config.noise_model(q)?,
        noise_sd: sc.noise_sd,
        templates,
        samples_per_subject: sc.samples_per_subject,
        grid: (0..sc.grid_points).map(|i| i as f64 / (sc.grid_points - 1) as f64).collect(),
        seed: config.fit.seed,
    };
    let sim = simulate(&spec)?;
    let times: Vec<Vec<f64>> = sim.data.samples().iter().map(|s| s.times().iter().map(|u| t0 + u * (t1 - t0)).collect()).collect();
    let names: Vec<String> = (1..=sc.subjects).map(|j| format!("subject{j}")).collect();
    let data = DataSet::new(sim.data.samples().to_vec(), names)?;
    table::save(out, &CurveTable::new(data, times))?;
    if let Some(path) = truth {
        let m = spec.warp.m_w();
        let mut header = vec!["sample_id".to_string()];
        header.extend((1..=m).map(|k| format!("w{k}")));
        header.push("shift".into());
        let rows: Vec<Vec<String>> = sim
            .data
            .samples()
            .iter()
            .zip(&sim.latents)
            .map(|(s, l)| {
                let mut row = vec![s.id.clone()];
                row.extend(l.w.iter().map(|x| fmt(*x)));
                row.push(fmt(l.shift.unwrap_or(0.0)));
                row
            })
            .collect();
        write_rows(path, &header, &rows)?;
    }
    Ok(())
}

fn nc_weights(config: &RunConfig, q: usize) -> CliResult<Vec<f64>> {
    match &config.classify.weights {
        Some(w) if w.len() != q => Err(CliError::data(format!("classify.weights has {} entries, data have q = {q}", w.len()))),
        Some(w) => Ok(w.clone()),
        None => Ok(vec![1.0; q]),
    }
}

fn prediction_rows(data: &DataSet, predictions: &[usize]) -> (Vec<String>, Vec<Vec<String>>) {
    let names = data.subjects();
    let rows = data
        .samples()
        .iter()
        .zip(predictions)
        .map(|(s, &p)| vec![s.id.clone(), names[s.subject].clone(), names[p].clone()])
        .collect();
    (vec!["sample_id".into(), "subject_id".into(), "predicted".into()], rows)
}

fn holdout<C: Classifier>(train: &DataSet, test: &DataSet, c: &C) -> CliResult<Vec<usize>> {
    Ok(holdout_accuracy(train, test, c)?.1)
}

pub fn run_classify(config: &RunConfig, train: &Path, test: &Path, out: &Path) -> CliResult<()> {
    let train = table::load(train)?;
    let reader = std::fs::File::open(test).map_err(|e| CliError::data(format!("{}: {e}", test.display())))?;
    let test = table::read(reader, Some(train.data.subjects()))?;
    let predictions = match config.classify.method {
        MethodName::Simm => {
            let (spec, _) = config.initial_spec(&train.data)?;
            holdout(&train.data, &test.data, &SimmClassifier { spec, options: config.fit_options() })?
        }
        MethodName::Nc => holdout(&train.data, &test.data, &NcClassifier { weights: nc_weights(config, train.q())? })?,
    };
    let correct = test.data.samples().iter().zip(&predictions).filter(|(s, &p)| s.subject == p).count();
    let total = test.data.len();
    create_dir(out)?;
    let (h, r) = prediction_rows(&test.data, &predictions);
    write_rows(&out.join("predictions.csv"), &h, &r)?;
    let accuracy = correct as f64 / total as f64;
    write_rows(
        &out.join("summary.csv"),
        &["correct".into(), "total".into(), "accuracy".into()],
        &[vec![correct.to_string(), total.to_string(), fmt(accuracy)]],
    )?;
    println!("accuracy {correct}/{total} = {}", fmt(accuracy));
    Ok(())
}

pub fn run_cv(config: &RunConfig, data: &Path, out: &Path) -> CliResult<()> {
    let table = table::load(data)?;
    let k = config.classify.folds;
    let report = match config.classify.method {
        MethodName::Simm => {
            let (spec, _) = config.initial_spec(&table.data)?;
            cross_validate(&table.data, k, &SimmClassifier { spec, options: config.fit_options() })?
        }
        MethodName::Nc => cross_validate(&table.data, k, &NcClassifier { weights: nc_weights(config, table.q())? })?,
    };
    warn_all(&report.warnings);
    create_dir(out)?;
    let mut rows: Vec<Vec<String>> = report.fold_accuracy.iter().enumerate().map(|(f, a)| vec![(f + 1).to_string(), fmt(*a)]).collect();
    rows.push(vec!["mean".into(), fmt(report.mean_accuracy)]);
    write_rows(&out.join("folds.csv"), &["fold".into(), "accuracy".into()], &rows)?;
    let (h, r) = prediction_rows(&table.data, &report.predictions);
    write_rows(&out.join("predictions.csv"), &h, &r)?;
    println!("mean accuracy over {k} folds = {}", fmt(report.mean_accuracy));
    Ok(())
}

pub fn run_export_cov(model: &Path, grid: usize, with_noise: bool, out: &Path) -> CliResult<()> {
    if grid < 2 {
        return Err(CliError::data("grid needs at least two points"));
    }
    let file = ModelFile::load(model)?;
    let fitted = file.to_fitted()?;
    let q = file.q;
    let (t0, t1) = file.time_range.map_or((0.0, 1.0), |[a, b]| (a, b));
    let chi2 = chi2_quantile_95(q);
    let mut cov_header = vec!["t".to_string()];
    cov_header.extend((1..=q).map(|j| format!("var{j}")));
    for a in 0..q {
        for b in a + 1..q {
            cov_header.push(format!("corr{}{}", a + 1, b + 1));
        }
    }
    let mut axis_header = vec!["t".to_string(), "axis".into(), "eigenvalue".into(), "half_length".into()];
    axis_header.extend((1..=q).map(|j| format!("e{j}")));
    let mut cov_rows = Vec::with_capacity(grid);
    let mut axis_rows = Vec::with_capacity(grid * q);
    for i in 0..grid {
        let u = i as f64 / (grid - 1) as f64;
        let t = fmt(t0 + u * (t1 - t0));
        let s = marginal_cov(&fitted, u, with_noise);
        let mut row = vec![t.clone()];
        row.extend((0..q).map(|j| fmt(s[(j, j)])));
        for a in 0..q {
            for b in a + 1..q {
                let d = (s[(a, a)] * s[(b, b)]).sqrt();
                row.push(fmt(if d > 0.0 { s[(a, b)] / d } else { 0.0 }));
            }
        }
        cov_rows.push(row);
        for (k, (l, v)) in axes(&s).into_iter().enumerate() {
            let mut row = vec![t.clone(), (k + 1).to_string(), fmt(l), fmt((l.max(0.0) * chi2).sqrt())];
            row.extend(v.iter().map(|x| fmt(*x)));
            axis_rows.push(row);
        }
    }
    create_dir(out)?;
    write_rows(&out.join("covariance.csv"), &cov_header, &cov_rows)?;
    write_rows(&out.join("axes.csv"), &axis_header, &axis_rows)
}

pub fn resolve(path: &Option<PathBuf>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}
