//! One-shot training from a single degraded/clean pair.
//!
//! Stage 1 minimises the content loss over patches drawn from the pair.
//! Stage 2 (optional) alternates one discriminator step with one generator
//! step on `content + lambda_adv * adversarial`.

use serde::{Deserialize, Serialize};

use crate::degrade::DegradationSpec;
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::linalg::Matrix;
use crate::model::adam::{AdamConfig, AdamState};
use crate::model::discriminator::Discriminator;
use crate::model::loss::{loss_and_grad, LossKind};
use crate::model::rnn::{RnnGrads, RnnModel};
use crate::patching::{training_anchors, write_target_step, write_time_step, Anchor, PatchGeometry, PatchMode};
use crate::resample::bicubic_upsample;
use crate::rng::Rng;

/// Intensity scale: planes are divided by this before entering the network.
pub const INTENSITY_SCALE: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Every training anchor, reshuffled each epoch.
    All,
    /// `samples_per_epoch` anchors drawn without replacement each epoch.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    pub lambda_adv: f64,
    pub n_n: usize,
    pub seed: u64,
    pub sampling: Sampling,
    pub samples_per_epoch: usize,
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub mode: PatchMode,
    /// Scan stride used at restore time (patch-to-patch only).
    pub stride: Option<usize>,
    /// Predict `clean - input` instead of `clean`.
    pub residual: bool,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub disc_hidden: usize,
    pub kernel_size: usize,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    pub decimation: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let deg = DegradationSpec::deblur_default();
        let adam = AdamConfig::default();
        TrainConfig {
            epochs_stage1: 45,
            epochs_stage2: 0,
            batch_size: 32,
            loss: LossKind::L2,
            lambda_adv: 1e-3,
            n_n: 256,
            seed: 0,
            sampling: Sampling::Random,
            samples_per_epoch: 4096,
            patch_rows: 9,
            patch_cols: 9,
            mode: PatchMode::Patch2Patch,
            stride: None,
            residual: false,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            disc_hidden: 256,
            kernel_size: deg.kernel_size,
            blur_sigma: deg.blur_sigma,
            noise_sigma: deg.noise_sigma,
            decimation: deg.decimation,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.n_n == 0 {
            return bad("n_n must be >= 1".into());
        }
        if !(self.lambda_adv >= 0.0) {
            return bad(format!("lambda_adv must be >= 0, got {}", self.lambda_adv));
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("invalid Adam hyper-parameters".into());
        }
        if self.sampling == Sampling::Random && self.samples_per_epoch == 0 {
            return bad("samples_per_epoch must be >= 1".into());
        }
        self.geometry()?;
        self.degradation().validate()
    }

    pub fn geometry(&self) -> Result<PatchGeometry> {
        let g = PatchGeometry::new(self.patch_rows, self.patch_cols, self.mode)?;
        match self.stride {
            Some(s) => g.with_stride(s),
            None => Ok(g),
        }
    }

    pub fn degradation(&self) -> DegradationSpec {
        DegradationSpec {
            kernel_size: self.kernel_size,
            blur_sigma: self.blur_sigma,
            noise_sigma: self.noise_sigma,
            decimation: self.decimation,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Network-ready planes on the `[0, 1]` scale.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    /// Degraded luminance, upsampled to the clean grid when decimated.
    pub input: Matrix,
    /// What the network regresses: clean, or clean minus input.
    pub target: Matrix,
    /// Clean luminance.
    pub clean: Matrix,
    /// Added to network outputs to form the estimate (input or zero).
    pub base: Matrix,
}

/// Luminance of `degraded` mapped onto the clean grid, on the `[0, 1]` scale.
pub fn network_input(degraded: &Matrix, decimation: usize, rows: usize, cols: usize) -> Result<Matrix> {
    let y = if decimation > 1 {
        bicubic_upsample(degraded, decimation, rows, cols)?
    } else {
        if degraded.shape() != (rows, cols) {
            return Err(Error::shape(format!(
                "degraded {:?} differs from clean {:?}",
                degraded.shape(),
                (rows, cols)
            )));
        }
        degraded.clone()
    };
    Ok(y.scale(1.0 / INTENSITY_SCALE))
}

pub fn prepare_pair(degraded: &PlanarImage, clean: &PlanarImage, cfg: &TrainConfig) -> Result<TrainingPair> {
    let clean = clean.luminance().scale(1.0 / INTENSITY_SCALE);
    let (rows, cols) = clean.shape();
    let input = network_input(&degraded.luminance(), cfg.decimation, rows, cols)?;
    let base = if cfg.residual {
        input.clone()
    } else {
        Matrix::zeros(rows, cols)
    };
    let target = clean.sub(&base)?;
    Ok(TrainingPair {
        input,
        target,
        clean,
        base,
    })
}

/// Per-time-step target rows of `plane` for a batch of anchors.
pub fn target_steps(plane: &Matrix, geom: &PatchGeometry, anchors: &[Anchor]) -> Vec<Matrix> {
    (0..geom.rows())
        .map(|t| {
            let mut y = Matrix::zeros(anchors.len(), geom.output_width());
            for (r, &a) in anchors.iter().enumerate() {
                write_target_step(plane, geom, a, t, y.row_mut(r));
            }
            y
        })
        .collect()
}

/// Time-step inputs and targets for a batch of anchors.
pub fn assemble_batch(
    input: &Matrix,
    target: &Matrix,
    geom: &PatchGeometry,
    anchors: &[Anchor],
) -> (Vec<Matrix>, Vec<Matrix>) {
    let xs = (0..geom.rows())
        .map(|t| {
            let mut x = Matrix::zeros(anchors.len(), geom.cols());
            for (r, &a) in anchors.iter().enumerate() {
                write_time_step(input, geom, a, t, x.row_mut(r));
            }
            x
        })
        .collect();
    (xs, target_steps(target, geom, anchors))
}

/// Content loss of a batch and its exact gradients.
pub fn batch_loss_and_grads(
    model: &RnnModel,
    inputs: &[Matrix],
    targets: &[Matrix],
    kind: LossKind,
) -> Result<(f64, RnnGrads, f64)> {
    let cache = model.forward_batch(inputs)?;
    let (loss, d_out) = loss_and_grad(&cache.outputs, targets, kind)?;
    let grads = model.backward_batch(inputs, &cache, &d_out)?;
    Ok((loss, grads, cache.latent_sparsity()))
}

/// Mean content loss over `anchors`, evaluated in chunks.
pub fn empirical_risk(model: &RnnModel, pair: &TrainingPair, anchors: &[Anchor], kind: LossKind) -> Result<f64> {
    if anchors.is_empty() {
        return Err(Error::contract("empty patch set"));
    }
    let geom = *model.geometry();
    let mut total = 0.0;
    for chunk in anchors.chunks(256) {
        let (xs, ts) = assemble_batch(&pair.input, &pair.target, &geom, chunk);
        let cache = model.forward_batch(&xs)?;
        let (loss, _) = loss_and_grad(&cache.outputs, &ts, kind)?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / anchors.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub stage: u8,
    pub epoch: usize,
    /// Mean content loss over the epoch's mini-batches.
    pub loss: f64,
    /// Fraction of zero latent activations.
    pub sparsity: f64,
    pub disc_loss: Option<f64>,
    pub adv_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: RnnModel,
    pub discriminator: Option<Discriminator>,
    pub history: Vec<EpochLog>,
    /// Content loss of the initial model on the probe set.
    pub initial_risk: f64,
    /// Content loss of the final model on the probe set.
    pub final_risk: f64,
}

fn apply_adam(model: &mut RnnModel, adam: &mut AdamState, grads: &RnnGrads) -> Result<()> {
    let g: Vec<&[f64]> = grads.tensors().iter().map(|t| t.as_slice()).collect();
    let mut p: Vec<&mut [f64]> = model.tensors_mut().into_iter().map(|t| t.as_mut_slice()).collect();
    adam.step(&mut p, &g)?;
    model.round_to_f32();
    Ok(())
}

fn draw_epoch(pool: &[Anchor], cfg: &TrainConfig, rng: &mut Rng) -> Vec<Anchor> {
    let mut order = pool.to_vec();
    rng.shuffle(&mut order);
    if cfg.sampling == Sampling::Random {
        order.truncate(cfg.samples_per_epoch);
    }
    order
}

/// Flattened absolute-intensity patches (`base + values`) for the
/// discriminator, one row per sequence.
fn flatten_patches(steps: &[Matrix], base: Option<&[Matrix]>) -> Matrix {
    let b = steps[0].rows();
    let p = steps[0].cols();
    let mut out = Matrix::zeros(b, steps.len() * p);
    for (t, s) in steps.iter().enumerate() {
        for r in 0..b {
            let dst = &mut out.row_mut(r)[t * p..(t + 1) * p];
            dst.copy_from_slice(s.row(r));
            if let Some(base) = base {
                for (d, &c) in dst.iter_mut().zip(base[t].row(r)) {
                    *d += c;
                }
            }
        }
    }
    out
}

struct Stage2 {
    disc: Discriminator,
    disc_adam: AdamState,
}

/// Trains a model on `pool` with the schedule in `cfg`. The probe set is used
/// for the initial and final risk.
pub fn fit(pair: &TrainingPair, pool: &[Anchor], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::contract("empty patch set"));
    }
    let geom = cfg.geometry()?;
    let mut init_rng = Rng::derive(cfg.seed, 0);
    let mut order_rng = Rng::derive(cfg.seed, 1);
    let mut model = RnnModel::init(geom, cfg.n_n, &mut init_rng);
    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(cfg.adam(), &sizes);

    let mut probe = pool.to_vec();
    Rng::derive(cfg.seed, 3).shuffle(&mut probe);
    probe.truncate(2048);
    let initial_risk = empirical_risk(&model, pair, &probe, cfg.loss)?;
    let mut history = Vec::new();

    for epoch in 0..cfg.epochs_stage1 {
        let order = draw_epoch(pool, cfg, &mut order_rng);
        let (mut sum, mut sparsity, mut batches) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let (xs, ts) = assemble_batch(&pair.input, &pair.target, &geom, chunk);
            let (loss, grads, sp) = batch_loss_and_grads(&model, &xs, &ts, cfg.loss)?;
            apply_adam(&mut model, &mut adam, &grads)?;
            sum += loss;
            sparsity += sp;
            batches += 1;
        }
        let log = EpochLog {
            stage: 1,
            epoch,
            loss: sum / batches as f64,
            sparsity: sparsity / batches as f64,
            disc_loss: None,
            adv_loss: None,
        };
        log::info!(
            "stage 1 epoch {epoch}: loss {:.6e}, latent sparsity {:.3}",
            log.loss,
            log.sparsity
        );
        history.push(log);
    }

    let mut stage2 = None;
    if cfg.epochs_stage2 > 0 {
        let mut disc_rng = Rng::derive(cfg.seed, 2);
        let disc = Discriminator::init(geom.rows() * geom.output_width(), cfg.disc_hidden, &mut disc_rng);
        let dsizes: Vec<usize> = disc.tensors().iter().map(|t| t.len()).collect();
        stage2 = Some(Stage2 {
            disc,
            disc_adam: AdamState::new(cfg.adam(), &dsizes),
        });
    }
    if let Some(st) = stage2.as_mut() {
        for epoch in 0..cfg.epochs_stage2 {
            let order = draw_epoch(pool, cfg, &mut order_rng);
            let (mut sum, mut sparsity, mut dsum, mut asum, mut batches) = (0.0, 0.0, 0.0, 0.0, 0usize);
            for chunk in order.chunks(cfg.batch_size) {
                let (xs, ts) = assemble_batch(&pair.input, &pair.target, &geom, chunk);
                let real_steps = target_steps(&pair.clean, &geom, chunk);
                let base_steps = target_steps(&pair.base, &geom, chunk);
                let real = flatten_patches(&real_steps, None);

                let cache = model.forward_batch(&xs)?;
                let fake = flatten_patches(&cache.outputs, Some(&base_steps));

                let (d_loss, d_grads) = st.disc.loss_and_grads(&real, &fake)?;
                {
                    let g: Vec<&[f64]> = d_grads.tensors().iter().map(|t| t.as_slice()).collect();
                    let mut p: Vec<&mut [f64]> =
                        st.disc.tensors_mut().into_iter().map(|t| t.as_mut_slice()).collect();
                    st.disc_adam.step(&mut p, &g)?;
                }

                let (content, mut d_out) = loss_and_grad(&cache.outputs, &ts, cfg.loss)?;
                let (adv, d_fake) = st.disc.generator_loss_and_input_grad(&fake)?;
                let p = geom.output_width();
                for (t, d) in d_out.iter_mut().enumerate() {
                    for r in 0..d.rows() {
                        let src = &d_fake.row(r)[t * p..(t + 1) * p];
                        for (g, &a) in d.row_mut(r).iter_mut().zip(src) {
                            *g += cfg.lambda_adv * a;
                        }
                    }
                }
                let grads = model.backward_batch(&xs, &cache, &d_out)?;
                apply_adam(&mut model, &mut adam, &grads)?;
                sum += content;
                sparsity += cache.latent_sparsity();
                dsum += d_loss;
                asum += adv;
                batches += 1;
            }
            let n = batches as f64;
            let log = EpochLog {
                stage: 2,
                epoch,
                loss: sum / n,
                sparsity: sparsity / n,
                disc_loss: Some(dsum / n),
                adv_loss: Some(asum / n),
            };
            log::info!(
                "stage 2 epoch {epoch}: content {:.6e}, D {:.4}, adv {:.4}",
                log.loss,
                dsum / n,
                asum / n
            );
            history.push(log);
        }
    }

    let final_risk = empirical_risk(&model, pair, &probe, cfg.loss)?;
    Ok(TrainOutcome {
        model,
        discriminator: stage2.map(|s| s.disc),
        history,
        initial_risk,
        final_risk,
    })
}

/// Full one-shot training on a degraded/clean image pair.
pub fn train_one_shot(degraded: &PlanarImage, clean: &PlanarImage, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let pair = prepare_pair(degraded, clean, cfg)?;
    let (h, w) = pair.input.shape();
    let pool = training_anchors(h, w, &cfg.geometry()?)?;
    fit(&pair, &pool, cfg)
}

#[derive(Debug, Clone)]
pub struct SubsetOutcome {
    pub model: RnnModel,
    pub epochs: usize,
    /// Empirical risk over the whole training subset at stop time.
    pub risk: f64,
    pub reached_target: bool,
}

/// Trains on a fixed random subset of `m` anchors until the empirical risk
/// over that subset drops to `target_risk` or `max_epochs` is reached.
pub fn train_subset(
    pair: &TrainingPair,
    cfg: &TrainConfig,
    m: usize,
    target_risk: f64,
    max_epochs: usize,
) -> Result<SubsetOutcome> {
    cfg.validate()?;
    let geom = cfg.geometry()?;
    let (h, w) = pair.input.shape();
    let mut pool = training_anchors(h, w, &geom)?;
    if m == 0 || m > pool.len() {
        return Err(Error::contract(format!(
            "sample size {m} outside 1..={} available patches",
            pool.len()
        )));
    }
    Rng::derive(cfg.seed, 4).shuffle(&mut pool);
    pool.truncate(m);
    // Scan order, so that m = all anchors reproduces `fit` with `Sampling::All`.
    pool.sort_by_key(|a| (a.row, a.col));

    let mut model = RnnModel::init(geom, cfg.n_n, &mut Rng::derive(cfg.seed, 0));
    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(cfg.adam(), &sizes);
    let mut order_rng = Rng::derive(cfg.seed, 1);
    let mut risk = empirical_risk(&model, pair, &pool, cfg.loss)?;
    let mut epochs = 0;
    while risk > target_risk && epochs < max_epochs {
        let mut order = pool.clone();
        order_rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let (xs, ts) = assemble_batch(&pair.input, &pair.target, &geom, chunk);
            let (_, grads, _) = batch_loss_and_grads(&model, &xs, &ts, cfg.loss)?;
            apply_adam(&mut model, &mut adam, &grads)?;
        }
        epochs += 1;
        risk = empirical_risk(&model, pair, &pool, cfg.loss)?;
    }
    Ok(SubsetOutcome {
        model,
        epochs,
        risk,
        reached_target: risk <= target_risk,
    })
}
