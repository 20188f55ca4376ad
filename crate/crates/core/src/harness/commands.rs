//! The command implementations. Each writes PNG images, CSV tables and a
//! JSON manifest under `out`. Nothing written depends on wall-clock time, so
//! reruns with the same seed produce byte-identical files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;

use crate::degrade::{convolve2d_same, degrade, make_gaussian_kernel, residual_sigma, DegradationSpec};
use crate::error::{Error, Result};
use crate::image::{load_image, save_image, PlanarImage};
use crate::linalg::Matrix;
use crate::metrics::{compute_metrics, mean_metrics, mse, plane_metrics, Metrics};
use crate::model::checkpoint::{load_checkpoint, save_checkpoint, ModelMeta, TrainedModel};
use crate::model::train::{prepare_pair, train_one_shot, train_subset, TrainConfig};
use crate::model::{restore, restore_luminance};
use crate::patching::PatchMode;
use crate::rng::Rng;
use crate::sparse::{compound_dictionary, mutual_coherence, recovery_bound_ok, rnn_equiv_check, SparseProblem};

use super::config::config_hash;
use super::evaluation::{baseline_image, degrade_set, load_set};
use super::records::{fmt_f64, write_csv, write_manifest};
use super::synth::{render_pattern, Pattern};
use super::{collect_images, stem};

fn metric_fields(m: &Metrics) -> [String; 2] {
    [fmt_f64(m.psnr_db), fmt_f64(m.ssim)]
}

// ---------------------------------------------------------------- degrade

#[derive(Debug, Clone, Serialize)]
pub struct DegradeEntry {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    /// Index `i` of the per-file stream `Rng::derive(seed, i)`.
    pub stream: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegradeReport {
    pub spec: DegradationSpec,
    pub seed: u64,
    pub files: Vec<DegradeEntry>,
}

/// Degrades every image under `inputs`. Unreadable files are reported and
/// skipped; an image too small for the blur kernel stops the run before
/// anything is written.
pub fn cmd_degrade(inputs: &[PathBuf], spec: &DegradationSpec, seed: u64, out: &Path) -> Result<DegradeReport> {
    spec.validate()?;
    let files = collect_images(inputs)?;
    let mut loaded = Vec::with_capacity(files.len());
    for path in &files {
        match load_image(path) {
            Ok(img) => {
                if img.height() < spec.kernel_size || img.width() < spec.kernel_size {
                    return Err(Error::contract(format!(
                        "{}: {}x{} image is smaller than the {}x{} blur kernel",
                        path.display(),
                        img.height(),
                        img.width(),
                        spec.kernel_size,
                        spec.kernel_size
                    )));
                }
                loaded.push(Ok(img));
            }
            Err(e) => loaded.push(Err(e)),
        }
    }
    let mut entries = Vec::with_capacity(files.len());
    for (i, (path, img)) in files.iter().zip(loaded).enumerate() {
        let target = out.join(format!("{}.png", stem(path)));
        let result = img.and_then(|img| {
            let d = degrade(&img, spec, &mut Rng::derive(seed, i as u64))?;
            save_image(&d, &target)
        });
        let error = result.err().map(|e| {
            warn!("{}: {e}", path.display());
            e.to_string()
        });
        entries.push(DegradeEntry {
            input: path.clone(),
            output: error.is_none().then(|| target.clone()),
            stream: i as u64,
            error,
        });
    }
    let report = DegradeReport {
        spec: *spec,
        seed,
        files: entries,
    };
    write_manifest(&out.join("degrade_manifest.json"), &report)?;
    Ok(report)
}

// ------------------------------------------------------------------ train

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub config_hash: String,
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub initial_risk: f64,
    pub final_risk: f64,
    pub epochs: usize,
}

/// Trains on one degraded/clean pair and writes `model.osr`,
/// `train_loss.csv` and `train_manifest.json`.
pub fn cmd_train(clean: &Path, degraded: &Path, cfg: &TrainConfig, out: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    let clean_img = load_image(clean)?;
    let degraded_img = load_image(degraded)?;
    let hash = config_hash(cfg);
    let start = Instant::now();
    let outcome = train_one_shot(&degraded_img, &clean_img, cfg)?;
    info!(
        "trained {} epochs in {:.1}s, probe risk {:.3e} -> {:.3e}",
        outcome.history.len(),
        start.elapsed().as_secs_f64(),
        outcome.initial_risk,
        outcome.final_risk
    );
    let tm = TrainedModel {
        model: outcome.model,
        meta: ModelMeta::from_config(cfg)?,
    };
    let checkpoint = out.join("model.osr");
    save_checkpoint(&tm, &checkpoint)?;

    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let rows: Vec<Vec<String>> = outcome
        .history
        .iter()
        .map(|e| {
            vec![
                e.stage.to_string(),
                e.epoch.to_string(),
                fmt_f64(e.loss),
                fmt_f64(e.sparsity),
                opt(e.disc_loss),
                opt(e.adv_loss),
            ]
        })
        .collect();
    let loss_csv = out.join("train_loss.csv");
    write_csv(
        &loss_csv,
        &["stage", "epoch", "loss", "sparsity", "disc_loss", "adv_loss"],
        &rows,
        &hash,
    )?;
    let report = TrainReport {
        config: cfg.clone(),
        config_hash: hash,
        checkpoint,
        loss_csv,
        initial_risk: outcome.initial_risk,
        final_risk: outcome.final_risk,
        epochs: outcome.history.len(),
    };
    write_manifest(&out.join("train_manifest.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- restore

#[derive(Debug, Clone, Serialize)]
pub struct RestoreRow {
    pub image: String,
    pub output: PathBuf,
    /// Degraded input (or its bicubic upsampling) against ground truth.
    pub baseline: Option<Metrics>,
    pub restored: Option<Metrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestoreReport {
    pub config_hash: String,
    pub rows: Vec<RestoreRow>,
    pub mean_baseline: Option<Metrics>,
    pub mean_restored: Option<Metrics>,
}

fn find_ground_truth(dir: &Path, input: &Path) -> Result<PathBuf> {
    if dir.is_file() {
        return Ok(dir.to_path_buf());
    }
    let name = stem(input);
    super::list_images(dir)?
        .into_iter()
        .find(|p| stem(p) == name)
        .ok_or_else(|| Error::contract(format!("no ground truth for {name} in {}", dir.display())))
}

/// Restores every image under `inputs` with the checkpoint. `mode`, when
/// given, must match the checkpoint geometry. With `ground_truth` (a file or
/// a directory of same-named images) a per-image `metrics.csv` is written.
pub fn cmd_restore(
    checkpoint: &Path,
    inputs: &[PathBuf],
    out: &Path,
    mode: Option<PatchMode>,
    ground_truth: Option<&Path>,
) -> Result<RestoreReport> {
    let tm = load_checkpoint(checkpoint)?;
    if let Some(m) = mode {
        if m != tm.meta.geometry.mode() {
            return Err(Error::contract(format!(
                "requested {m:?} but the checkpoint was trained for {:?}",
                tm.meta.geometry.mode()
            )));
        }
    }
    let hash = config_hash(&tm.meta);
    let factor = tm.meta.degradation.decimation;
    let mut rows = Vec::new();
    for path in collect_images(inputs)? {
        let degraded = load_image(&path)?;
        let truth = ground_truth
            .map(|gt| find_ground_truth(gt, &path).and_then(load_image))
            .transpose()?;
        let shape = truth.as_ref().map(|t| (t.height(), t.width()));
        let restored = restore(&tm, &degraded, shape)?;
        let output = out.join(format!("{}.png", stem(&path)));
        save_image(&restored, &output)?;
        let (baseline, metrics) = match &truth {
            Some(t) => {
                let base = baseline_image(&degraded, factor, (t.height(), t.width()))?;
                (Some(compute_metrics(t, &base)?), Some(compute_metrics(t, &restored)?))
            }
            None => (None, None),
        };
        rows.push(RestoreRow {
            image: stem(&path),
            output,
            baseline,
            restored: metrics,
        });
    }
    let base: Vec<Metrics> = rows.iter().filter_map(|r| r.baseline).collect();
    let rest: Vec<Metrics> = rows.iter().filter_map(|r| r.restored).collect();
    if ground_truth.is_some() {
        let table: Vec<Vec<String>> = rows
            .iter()
            .filter_map(|r| {
                let (b, m) = (r.baseline?, r.restored?);
                let mut row = vec![r.image.clone()];
                row.extend(metric_fields(&b));
                row.extend(metric_fields(&m));
                Some(row)
            })
            .collect();
        write_csv(
            &out.join("metrics.csv"),
            &["image", "psnr_input", "ssim_input", "psnr_restored", "ssim_restored"],
            &table,
            &hash,
        )?;
    }
    let report = RestoreReport {
        config_hash: hash,
        rows,
        mean_baseline: mean_metrics(&base),
        mean_restored: mean_metrics(&rest),
    };
    write_manifest(&out.join("restore_manifest.json"), &report)?;
    Ok(report)
}

// ------------------------------------------------------------------- eval

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub rows: Vec<(String, Metrics)>,
    pub mean: Option<Metrics>,
}

/// Metrics between reference and estimate images, paired by file stem when
/// `estimate` is a directory.
pub fn cmd_eval(reference: &Path, estimate: &Path, out: &Path) -> Result<EvalReport> {
    let mut rows = Vec::new();
    for path in super::list_images(estimate)? {
        let truth = find_ground_truth(reference, &path)?;
        let m = compute_metrics(&load_image(&truth)?, &load_image(&path)?)?;
        rows.push((stem(&path), m));
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|(n, m)| {
            let [p, s] = metric_fields(m);
            vec![n.clone(), p, s]
        })
        .collect();
    let hash = config_hash(&("eval", reference, estimate));
    write_csv(&out.join("eval.csv"), &["image", "psnr", "ssim"], &table, &hash)?;
    let ms: Vec<Metrics> = rows.iter().map(|(_, m)| *m).collect();
    let report = EvalReport {
        mean: mean_metrics(&ms),
        rows,
    };
    write_manifest(&out.join("eval_manifest.json"), &report)?;
    Ok(report)
}

// ------------------------------------------------------------ sweep-noise

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseRow {
    pub sigma_n: f64,
    pub degraded: Metrics,
    pub restored: Metrics,
}

/// Restores `clean` degraded with the checkpoint's blur and each noise level
/// in `sigmas`. Every level reuses the stream `Rng::derive(seed, 0)`, so the
/// noise fields differ only in scale.
pub fn cmd_sweep_noise(checkpoint: &Path, clean: &Path, sigmas: &[f64], seed: u64, out: &Path) -> Result<Vec<NoiseRow>> {
    let tm = load_checkpoint(checkpoint)?;
    let img = load_image(clean)?;
    let shape = (img.height(), img.width());
    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma_n in sigmas {
        let spec = DegradationSpec {
            noise_sigma: sigma_n,
            ..tm.meta.degradation
        };
        let d = degrade(&img, &spec, &mut Rng::derive(seed, 0))?;
        let base = baseline_image(&d, spec.decimation, shape)?;
        let r = restore(&tm, &d, Some(shape))?;
        rows.push(NoiseRow {
            sigma_n,
            degraded: compute_metrics(&img, &base)?,
            restored: compute_metrics(&img, &r)?,
        });
    }
    let hash = config_hash(&(&tm.meta, seed));
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![fmt_f64(r.sigma_n)];
            row.extend(metric_fields(&r.degraded));
            row.extend(metric_fields(&r.restored));
            row
        })
        .collect();
    write_csv(
        &out.join("noise_sweep.csv"),
        &["sigma_n", "psnr_input", "ssim_input", "psnr", "ssim"],
        &table,
        &hash,
    )?;
    Ok(rows)
}

// ------------------------------------------------------------ sample-size

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleSizeRow {
    pub m: usize,
    pub epochs: usize,
    /// Empirical risk over the training subset when training stopped.
    pub train_risk: f64,
    pub reached_target: bool,
    /// Mean squared error of restored luminance on the `[0, 1]` scale,
    /// averaged over the evaluation set.
    pub recovery_error: f64,
    pub mean_psnr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSizeParams {
    pub sizes: Vec<usize>,
    /// Training stops once the subset risk is at or below this value.
    pub target_risk: f64,
    pub max_epochs: usize,
}

/// For each subset size, trains a fresh model until the empirical risk over
/// the subset reaches the target, then measures recovery error on the
/// evaluation images (degraded with `Rng::derive(cfg.seed, i)`).
pub fn cmd_sample_size(
    clean: &Path,
    degraded: &Path,
    cfg: &TrainConfig,
    params: &SampleSizeParams,
    eval_dir: &Path,
    out: &Path,
) -> Result<Vec<SampleSizeRow>> {
    cfg.validate()?;
    let pair = prepare_pair(&load_image(degraded)?, &load_image(clean)?, cfg)?;
    let set = degrade_set(&load_set(eval_dir)?, &cfg.degradation(), cfg.seed)?;
    let meta = ModelMeta::from_config(cfg)?;
    let mut rows = Vec::with_capacity(params.sizes.len());
    for &m in &params.sizes {
        let start = Instant::now();
        let sub = train_subset(&pair, cfg, m, params.target_risk, params.max_epochs)?;
        let tm = TrainedModel {
            model: sub.model,
            meta: meta.clone(),
        };
        let (mut err, mut psnr) = (0.0, 0.0);
        for e in &set {
            let truth = e.clean.luminance();
            let y = restore_luminance(&tm, &e.degraded.luminance(), Some(truth.shape()))?;
            err += mse(&truth, &y)? / (255.0 * 255.0);
            psnr += plane_metrics(&truth, &y)?.psnr_db;
        }
        let n = set.len() as f64;
        info!(
            "m = {m}: {} epochs, risk {:.3e}, {:.1}s",
            sub.epochs,
            sub.risk,
            start.elapsed().as_secs_f64()
        );
        rows.push(SampleSizeRow {
            m,
            epochs: sub.epochs,
            train_risk: sub.risk,
            reached_target: sub.reached_target,
            recovery_error: err / n,
            mean_psnr: psnr / n,
        });
    }
    let hash = config_hash(&(cfg, params));
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                r.epochs.to_string(),
                fmt_f64(r.train_risk),
                r.reached_target.to_string(),
                fmt_f64(r.recovery_error),
                fmt_f64(r.mean_psnr),
            ]
        })
        .collect();
    write_csv(
        &out.join("sample_size.csv"),
        &["m", "epochs", "train_risk", "reached_target", "recovery_error", "mean_psnr"],
        &table,
        &hash,
    )?;
    Ok(rows)
}

// --------------------------------------------------------------- mismatch

#[derive(Debug, Clone, Serialize)]
pub struct MismatchParams {
    pub sigma_t: Vec<f64>,
    pub seed: u64,
    /// Column whose profile is written out (clamped to the interior).
    pub column: usize,
    /// Pass threshold on the relative l2 deviation.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MismatchRow {
    pub sigma_s: f64,
    pub sigma_t: f64,
    /// Standard deviation of the residual blur between the two estimates.
    pub residual_sigma: f64,
    /// Relative l2 deviation on the profiled column.
    pub column_deviation: f64,
    /// Largest relative l2 deviation over all interior columns.
    pub max_interior_deviation: f64,
    pub pass: bool,
}

/// Relative l2 deviation `||a - b|| / ||b||` of every column in
/// `margin..w-margin`, over rows `margin..h-margin`.
pub fn column_deviations(a: &Matrix, b: &Matrix, margin: usize) -> Result<Vec<(usize, f64)>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let (h, w) = a.shape();
    if 2 * margin >= h || 2 * margin >= w {
        return Err(Error::contract(format!("margin {margin} leaves no interior in {h}x{w}")));
    }
    Ok((margin..w - margin)
        .map(|j| {
            let (mut num, mut den) = (0.0, 0.0);
            for i in margin..h - margin {
                num += (a[(i, j)] - b[(i, j)]).powi(2);
                den += b[(i, j)].powi(2);
            }
            (j, (num / den).sqrt())
        })
        .collect())
}

/// Restores `clean` degraded at the checkpoint's sigma (`sigma_s`) and at each
/// `sigma_t`, then blurs the sharper of each pair of estimates by the
/// residual Gaussian and compares it with the other one column by column.
pub fn cmd_mismatch(checkpoint: &Path, clean: &Path, params: &MismatchParams, out: &Path) -> Result<Vec<MismatchRow>> {
    let tm = load_checkpoint(checkpoint)?;
    let img = load_image(clean)?;
    let truth = img.luminance();
    let shape = truth.shape();
    let source = tm.meta.degradation;
    let sigma_s = source.blur_sigma;
    let estimate = |sigma: f64| -> Result<Matrix> {
        let spec = DegradationSpec {
            blur_sigma: sigma,
            ..source
        };
        let d = degrade(&img, &spec, &mut Rng::derive(params.seed, 0))?;
        restore_luminance(&tm, &d.luminance(), Some(shape))
    };
    let f_s = estimate(sigma_s)?;
    let margin = source.kernel_size / 2;
    let column = params.column.clamp(margin, shape.1 - margin - 1);
    let hash = config_hash(&(&tm.meta, params));
    let mut rows = Vec::new();
    let mut profile = Vec::new();
    for (k, &sigma_t) in params.sigma_t.iter().enumerate() {
        let f_t = estimate(sigma_t)?;
        save_image(&PlanarImage::gray(f_t.clone()), out.join(format!("restored_{k}_sigma_{sigma_t}.png")))?;
        let (lo, hi) = (sigma_s.min(sigma_t), sigma_s.max(sigma_t));
        let r = residual_sigma(lo, hi)?;
        let (compared, reference) = if r == 0.0 {
            (f_t.clone(), f_s.clone())
        } else {
            let kernel = make_gaussian_kernel(source.kernel_size, r)?;
            if sigma_t < sigma_s {
                (convolve2d_same(&f_t, &kernel)?, f_s.clone())
            } else {
                (convolve2d_same(&f_s, &kernel)?, f_t.clone())
            }
        };
        let devs = column_deviations(&compared, &reference, margin)?;
        let max_dev = devs.iter().map(|d| d.1).fold(0.0, f64::max);
        let col_dev = devs.iter().find(|d| d.0 == column).map_or(f64::NAN, |d| d.1);
        for i in 0..shape.0 {
            profile.push(vec![
                fmt_f64(sigma_t),
                i.to_string(),
                fmt_f64(compared[(i, column)]),
                fmt_f64(reference[(i, column)]),
                fmt_f64(truth[(i, column)]),
            ]);
        }
        rows.push(MismatchRow {
            sigma_s,
            sigma_t,
            residual_sigma: r,
            column_deviation: col_dev,
            max_interior_deviation: max_dev,
            pass: max_dev <= params.threshold,
        });
    }
    write_csv(
        &out.join("mismatch_profile.csv"),
        &["sigma_t", "row", "compared", "reference", "clean"],
        &profile,
        &hash,
    )?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.sigma_s),
                fmt_f64(r.sigma_t),
                fmt_f64(r.residual_sigma),
                column.to_string(),
                fmt_f64(r.column_deviation),
                fmt_f64(r.max_interior_deviation),
                r.pass.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("mismatch.csv"),
        &[
            "sigma_s",
            "sigma_t",
            "residual_sigma",
            "column",
            "column_deviation",
            "max_interior_deviation",
            "pass",
        ],
        &table,
        &hash,
    )?;
    Ok(rows)
}

// ------------------------------------------------------------ synth-pairs

#[derive(Debug, Clone, Serialize)]
pub struct SynthParams {
    pub pattern: Pattern,
    pub size: usize,
    pub cell: usize,
    /// Intensities of the two pattern levels.
    pub low: f64,
    pub high: f64,
    pub spec: DegradationSpec,
    pub seed: u64,
}

/// A synthetic clean image and its degradation under `Rng::new(seed)`.
pub fn synth_pair(p: &SynthParams) -> Result<(PlanarImage, PlanarImage)> {
    let clean = PlanarImage::gray(render_pattern(p.pattern, p.size, p.cell, p.low, p.high)?);
    let degraded = degrade(&clean, &p.spec, &mut Rng::new(p.seed))?;
    Ok((clean, degraded))
}

/// Writes `clean.png`, `degraded.png` and `synth_manifest.json`.
pub fn cmd_synth_pairs(p: &SynthParams, out: &Path) -> Result<(PlanarImage, PlanarImage)> {
    let (clean, degraded) = synth_pair(p)?;
    save_image(&clean, out.join("clean.png"))?;
    save_image(&degraded, out.join("degraded.png"))?;
    write_manifest(&out.join("synth_manifest.json"), p)?;
    Ok((clean, degraded))
}

// ---------------------------------------------------------------- sc-demo

#[derive(Debug, Clone, Serialize)]
pub struct ScDemoParams {
    /// Signal dimension (dictionary rows).
    pub n: usize,
    /// Number of atoms (dictionary columns).
    pub m: usize,
    pub sparsity: usize,
    pub lambda: f64,
    pub iters: usize,
    /// Use an orthonormal dictionary (requires `m <= n`).
    pub orthonormal: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScDemoReport {
    pub params: ScDemoParams,
    pub iterations: usize,
    pub converged: bool,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Largest increase between consecutive costs (0 when monotone).
    pub max_cost_increase: f64,
    /// Absent for single-atom dictionaries.
    pub coherence: Option<f64>,
    pub recovery_bound_holds: Option<bool>,
    /// Largest elementwise gap between the recurrent cell and the
    /// nonnegative ISTA step over the recorded iterates.
    pub max_equivalence_deviation: f64,
    pub code: Vec<f64>,
    pub true_code: Vec<f64>,
}

fn orthonormal_columns(n: usize, m: usize, rng: &mut Rng) -> Result<Matrix> {
    if m > n {
        return Err(Error::contract(format!("{m} orthonormal atoms need n >= {m}, got {n}")));
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    while cols.len() < m {
        let mut v: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        for c in &cols {
            let p = crate::linalg::dot(&v, c);
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
        }
        let norm = crate::linalg::dot(&v, &v).sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Ok(Matrix::from_fn(n, m, |i, j| cols[j][i]))
}

/// Random sparse-coding problem: unit-norm Gaussian dictionary, a code with
/// `sparsity` nonzeros of magnitude in [0.5, 1.5] and random sign, and
/// `y = D z`.
pub fn random_sparse_problem(p: &ScDemoParams, rng: &mut Rng) -> Result<(SparseProblem, Vec<f64>)> {
    if p.n == 0 || p.m == 0 || p.sparsity > p.m {
        return Err(Error::contract("need n, m >= 1 and sparsity <= m"));
    }
    let d = if p.orthonormal {
        orthonormal_columns(p.n, p.m, rng)?
    } else {
        Matrix::from_fn(p.n, p.m, |_, _| rng.standard_normal())
    };
    let mut support: Vec<usize> = (0..p.m).collect();
    rng.shuffle(&mut support);
    let mut z = vec![0.0; p.m];
    for &k in &support[..p.sparsity] {
        let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
        z[k] = sign * rng.uniform(0.5, 1.5);
    }
    let probe = SparseProblem::new(&d, &vec![0.0; p.n], p.lambda)?;
    let y = probe.dictionary().matvec(&z)?;
    Ok((SparseProblem::new(probe.dictionary(), &y, p.lambda)?, z))
}

/// Runs ISTA on a random problem and writes `sc_cost.csv` and
/// `sc_report.json`. The equivalence check runs the nonnegative split
/// `z = z+ - z-` over the compound dictionary `[D, -D]`.
pub fn cmd_sc_demo(p: &ScDemoParams, out: &Path) -> Result<ScDemoReport> {
    let mut rng = Rng::new(p.seed);
    let (problem, truth) = random_sparse_problem(p, &mut rng)?;
    let state = problem.ista_solve(p.iters, 0.0)?;
    let max_increase = state
        .cost_history
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);

    let compound = SparseProblem::new(&compound_dictionary(problem.dictionary()), problem.observation(), p.lambda)?;
    let mut z = vec![0.0; compound.code_len()];
    let mut max_dev: f64 = 0.0;
    for _ in 0..p.iters.min(1000) {
        max_dev = max_dev.max(rnn_equiv_check(&compound, &z, problem.observation())?);
        z = compound.ista_step_nonneg(&z)?;
    }

    let hash = config_hash(p);
    let table: Vec<Vec<String>> = state
        .cost_history
        .iter()
        .enumerate()
        .map(|(k, c)| vec![k.to_string(), fmt_f64(*c)])
        .collect();
    write_csv(&out.join("sc_cost.csv"), &["iteration", "cost"], &table, &hash)?;
    let report = ScDemoReport {
        params: p.clone(),
        iterations: state.iteration,
        converged: state.converged,
        initial_cost: state.cost_history[0],
        final_cost: *state.cost_history.last().expect("history starts with z0"),
        max_cost_increase: max_increase,
        coherence: mutual_coherence(problem.dictionary()).ok(),
        recovery_bound_holds: recovery_bound_ok(problem.dictionary(), &truth).ok(),
        max_equivalence_deviation: max_dev,
        code: state.z,
        true_code: truth,
    };
    write_manifest(&out.join("sc_report.json"), &report)?;
    Ok(report)
}
