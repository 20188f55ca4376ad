//! Behaviour of the experiment commands on small inputs.

use std::path::{Path, PathBuf};

use oneshot_restore::degrade::{degrade, DegradationSpec};
use oneshot_restore::harness::{self, MismatchParams, Pattern, SampleSizeParams, ScDemoParams, SynthParams};
use oneshot_restore::image::{load_image, save_image, PlanarImage};
use oneshot_restore::metrics::compute_metrics;
use oneshot_restore::model::checkpoint::{save_checkpoint, ModelMeta};
use oneshot_restore::model::{load_checkpoint, RnnModel, TrainConfig, TrainedModel};
use oneshot_restore::patching::PatchMode;
use oneshot_restore::{Error, Matrix, Rng};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        epochs_stage1: 4,
        samples_per_epoch: 2048,
        ..TrainConfig::default()
    }
}

/// Degraded copy of the training image written to `dir`.
fn degraded_training_image(dir: &Path, spec: &DegradationSpec) -> PathBuf {
    let img = load_image(data("train/astronaut.png")).unwrap();
    let d = degrade(&img, spec, &mut Rng::new(1)).unwrap();
    let p = dir.join("astronaut_degraded.png");
    save_image(&d, &p).unwrap();
    p
}

/// A 9x9 patch-to-patch model that reproduces its input.
fn identity_checkpoint(path: &Path, mode: PatchMode) {
    let cfg = TrainConfig {
        n_n: 18,
        mode,
        ..TrainConfig::default()
    };
    let geom = cfg.geometry().unwrap();
    let mut m = RnnModel::zeros(geom, 18);
    for l in 0..9 {
        m.cell.w_zy[(l, l)] = 1.0;
        m.cell.w_zy[(l, 9 + l)] = -1.0;
    }
    for k in 0..geom.output_width() {
        let src = if geom.output_width() == 1 { geom.left() } else { k };
        m.w_xz[(src, k)] = 1.0;
        m.w_xz[(9 + src, k)] = -1.0;
    }
    let tm = TrainedModel {
        model: m,
        meta: ModelMeta::from_config(&cfg).unwrap(),
    };
    save_checkpoint(&tm, path).unwrap();
}

#[test]
fn degrade_is_reproducible_and_records_its_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DegradationSpec::deblur_default();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ra = harness::cmd_degrade(&[data("eval")], &spec, 9, &a).unwrap();
    harness::cmd_degrade(&[data("eval")], &spec, 9, &b).unwrap();
    assert_eq!(ra.files.len(), 5);
    for f in &ra.files {
        let name = f.output.as_ref().unwrap().file_name().unwrap();
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("degrade_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["spec"]["blur_sigma"], 1.6);
}

#[test]
fn degrade_reports_bad_files_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("in");
    std::fs::create_dir_all(&inputs).unwrap();
    std::fs::copy(data("eval/coins.png"), inputs.join("coins.png")).unwrap();
    std::fs::write(inputs.join("broken.png"), b"not a png").unwrap();
    let r = harness::cmd_degrade(&[inputs], &DegradationSpec::deblur_default(), 0, &dir.path().join("out")).unwrap();
    assert_eq!(r.files.len(), 2);
    assert!(r.files[0].error.is_some());
    assert!(r.files[1].error.is_none());
    assert!(dir.path().join("out/coins.png").exists());
}

#[test]
fn degrade_rejects_images_smaller_than_the_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.png");
    save_image(&PlanarImage::gray(Matrix::filled(12, 12, 100.0)), &small).unwrap();
    let spec = DegradationSpec::sr_default();
    let err = harness::cmd_degrade(&[small], &spec, 0, &dir.path().join("out")).unwrap_err();
    assert!(matches!(err, Error::Contract(_)), "{err}");
    assert!(!dir.path().join("out/small.png").exists());
}

#[test]
fn degraded_test_image_psnr_matches_reported_input_quality() {
    // A 24.8 dB input is reported for a natural test image at the default
    // deblurring degradation; the bundled camera image sits in the same band.
    let img = load_image(data("eval/camera.png")).unwrap();
    let d = degrade(&img, &DegradationSpec::deblur_default(), &mut Rng::new(0)).unwrap();
    let p = compute_metrics(&img, &d).unwrap().psnr_db;
    assert!((p - 24.8).abs() <= 1.5, "{p}");
}

#[test]
fn train_with_zero_epochs_saves_the_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        epochs_stage1: 0,
        ..TrainConfig::default()
    };
    let deg = degraded_training_image(dir.path(), &cfg.degradation());
    let r = harness::cmd_train(&data("train/astronaut.png"), &deg, &cfg, dir.path()).unwrap();
    let tm = load_checkpoint(&r.checkpoint).unwrap();
    let mut init = RnnModel::init(cfg.geometry().unwrap(), cfg.n_n, &mut Rng::derive(cfg.seed, 0));
    init.round_to_f32();
    assert_eq!(tm.model, init);
    let csv = std::fs::read_to_string(&r.loss_csv).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("stage,epoch,loss,sparsity,disc_loss,adv_loss,config_hash"));
}

#[test]
fn short_training_reduces_loss_tenfold_and_restores() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let deg = degraded_training_image(dir.path(), &cfg.degradation());
    let r = harness::cmd_train(&data("train/astronaut.png"), &deg, &cfg, dir.path()).unwrap();
    assert!(r.final_risk * 10.0 <= r.initial_risk, "{} -> {}", r.initial_risk, r.final_risk);
    let csv = std::fs::read_to_string(&r.loss_csv).unwrap();
    assert_eq!(csv.lines().count(), 1 + cfg.epochs_stage1);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(&r.config_hash)));

    let eval_dir = dir.path().join("eval_degraded");
    harness::cmd_degrade(&[data("eval")], &cfg.degradation(), 3, &eval_dir).unwrap();
    let out = dir.path().join("restored");
    let rr = harness::cmd_restore(&r.checkpoint, &[eval_dir.clone()], &out, None, Some(&data("eval"))).unwrap();
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 5);
    let mean = rr.mean_restored.unwrap();
    let psnrs: Vec<f64> = rr.rows.iter().map(|r| r.restored.unwrap().psnr_db).collect();
    assert!((mean.psnr_db - psnrs.iter().sum::<f64>() / 5.0).abs() <= 1e-12);

    let sweep = harness::cmd_sweep_noise(&r.checkpoint, &data("eval/camera.png"), &[0.0, 1.5, 5.0, 10.0], 0, dir.path()).unwrap();
    assert_eq!(sweep.iter().map(|s| s.sigma_n).collect::<Vec<_>>(), vec![0.0, 1.5, 5.0, 10.0]);
    assert!(sweep.iter().all(|s| s.restored.psnr_db.is_finite()));
    assert!(sweep.iter().all(|s| s.restored.psnr_db <= sweep[0].restored.psnr_db));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "n_n = 64\nepochs_stage1 = 3\nlearning_rate = 0.1\n").unwrap();
    let err = harness::load_train_config(&p).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(err.to_string().contains("line 3"), "{err}");
}

#[test]
fn identity_checkpoint_reproduces_inputs() {
    let dir = tempfile::tempdir().unwrap();
    for mode in [PatchMode::Patch2Patch, PatchMode::Patch2Pixel] {
        let ck = dir.path().join("identity.osr");
        identity_checkpoint(&ck, mode);
        let out = dir.path().join("out");
        let r = harness::cmd_restore(&ck, &[data("eval")], &out, Some(mode), Some(&data("eval"))).unwrap();
        assert_eq!(r.rows.len(), 5);
        for row in &r.rows {
            let a = load_image(data(&format!("eval/{}.png", row.image))).unwrap();
            let b = load_image(&row.output).unwrap();
            assert_eq!(a, b, "{}", row.image);
        }
        assert_eq!(std::fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 6);
    }
}

#[test]
fn restore_rejects_a_mode_the_checkpoint_was_not_trained_for() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("identity.osr");
    identity_checkpoint(&ck, PatchMode::Patch2Patch);
    let err = harness::cmd_restore(&ck, &[data("eval/coins.png")], dir.path(), Some(PatchMode::Patch2Pixel), None)
        .unwrap_err();
    assert!(matches!(err, Error::Contract(_)), "{err}");
}

#[test]
fn eval_pairs_images_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let r = harness::cmd_eval(&data("eval"), &data("eval"), dir.path()).unwrap();
    assert_eq!(r.rows.len(), 5);
    assert!(r.rows.iter().all(|(_, m)| m.psnr_db == f64::INFINITY && m.ssim == 1.0));
}

#[test]
fn sample_size_rejects_more_patches_than_available() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let deg = degraded_training_image(dir.path(), &cfg.degradation());
    let params = SampleSizeParams {
        sizes: vec![1_000_000],
        target_risk: 1e-3,
        max_epochs: 1,
    };
    let err = harness::cmd_sample_size(&data("train/astronaut.png"), &deg, &cfg, &params, &data("eval"), dir.path())
        .unwrap_err();
    assert!(matches!(err, Error::Contract(_)), "{err}");
}

#[test]
fn mismatch_at_the_training_sigma_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("identity.osr");
    identity_checkpoint(&ck, PatchMode::Patch2Patch);
    let params = MismatchParams {
        sigma_t: vec![1.6],
        seed: 0,
        column: 55,
        threshold: 0.15,
    };
    let rows = harness::cmd_mismatch(&ck, &data("eval/camera.png"), &params, dir.path()).unwrap();
    assert_eq!(rows[0].residual_sigma, 0.0);
    assert_eq!(rows[0].max_interior_deviation, 0.0);
    let profile = std::fs::read_to_string(dir.path().join("mismatch_profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 1 + 120);
}

#[test]
fn synthetic_pair_matches_the_forward_model() {
    let dir = tempfile::tempdir().unwrap();
    let p = SynthParams {
        pattern: Pattern::Chessboard,
        size: 128,
        cell: 16,
        low: 0.0,
        high: 255.0,
        spec: DegradationSpec::deblur_default(),
        seed: 5,
    };
    let (clean, degraded) = harness::cmd_synth_pairs(&p, dir.path()).unwrap();
    let expected = degrade(&clean, &p.spec, &mut Rng::new(5)).unwrap();
    assert_eq!(degraded, expected);
    assert_eq!(load_image(dir.path().join("clean.png")).unwrap(), clean);
}

#[test]
#[ignore = "chessboard-trained models lose PSNR on natural images at desk scale; see README"]
fn chessboard_training_generalises_to_natural_images() {
    let dir = tempfile::tempdir().unwrap();
    let p = SynthParams {
        pattern: Pattern::Chessboard,
        size: 128,
        cell: 16,
        low: 0.0,
        high: 255.0,
        spec: DegradationSpec::deblur_default(),
        seed: 1,
    };
    harness::cmd_synth_pairs(&p, dir.path()).unwrap();
    let cfg = harness::deblur_desk_config();
    let r = harness::cmd_train(&dir.path().join("clean.png"), &dir.path().join("degraded.png"), &cfg, dir.path()).unwrap();
    let eval_dir = dir.path().join("eval_degraded");
    harness::cmd_degrade(&[data("eval")], &cfg.degradation(), 7, &eval_dir).unwrap();
    let rr = harness::cmd_restore(&r.checkpoint, &[eval_dir], &dir.path().join("out"), None, Some(&data("eval"))).unwrap();
    assert!(rr.mean_restored.unwrap().psnr_db > rr.mean_baseline.unwrap().psnr_db);
}

#[test]
fn sc_demo_cost_is_monotone_and_cell_matches_ista() {
    let dir = tempfile::tempdir().unwrap();
    let p = ScDemoParams {
        n: 8,
        m: 16,
        sparsity: 3,
        lambda: 0.05,
        iters: 2000,
        orthonormal: false,
        seed: 1,
    };
    let r = harness::cmd_sc_demo(&p, dir.path()).unwrap();
    assert!(r.max_cost_increase <= 1e-12, "{}", r.max_cost_increase);
    assert!(r.max_equivalence_deviation < 1e-12);
    let csv = std::fs::read_to_string(dir.path().join("sc_cost.csv")).unwrap();
    let costs: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(costs.len(), r.iterations + 1);
    assert!(costs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn sc_demo_orthonormal_without_penalty_recovers_projection() {
    let dir = tempfile::tempdir().unwrap();
    let p = ScDemoParams {
        n: 12,
        m: 12,
        sparsity: 4,
        lambda: 0.0,
        iters: 500,
        orthonormal: true,
        seed: 2,
    };
    let r = harness::cmd_sc_demo(&p, dir.path()).unwrap();
    for (a, b) in r.code.iter().zip(&r.true_code) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}
