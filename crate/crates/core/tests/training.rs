use rrf::dataset::{gen_dataset, Dataset, GenConfig, Split};
use rrf::io::model_to_bytes;
use rrf::model::init_model;
use rrf::train::{train_stage1, train_stage2, LogRecord, Phase, RadioSample, TrainConfig, VisualSample};
use rrf::{RrfModel, Scene, CH_GAIN, CH_TOF, CH_VISUAL};

fn small_dataset(dir: &std::path::Path, seed: u64) -> Dataset {
    let cfg = GenConfig {
        n_train: 12,
        n_test: 2,
        height: 32,
        seed,
        visual_resolution: 32,
        ..Default::default()
    };
    gen_dataset(&Scene::reference_box(), dir, &cfg).unwrap();
    Dataset::open(dir).unwrap()
}

fn small_config(stage1: usize, stage2: usize) -> TrainConfig {
    let mut cfg = TrainConfig {
        stage1_phases: vec![Phase {
            scale: 1.0,
            iterations: stage1,
        }],
        stage2_iterations: stage2,
        stage2_tof_iterations: stage2,
        log_interval: 1,
        ..Default::default()
    };
    cfg.densify.start = 10;
    cfg.densify.interval = 10;
    cfg
}

fn samples(ds: &Dataset) -> (Vec<VisualSample>, Vec<RadioSample>) {
    (ds.visual_samples(Split::Train).unwrap(), ds.radio_samples(Split::Train).unwrap())
}

/// f32 bit patterns of every parameter outside `channels`' SH and opacity.
fn frozen_bits(model: &RrfModel, free_channels: &[usize], opacity_free: bool) -> Vec<u32> {
    let mut out = Vec::new();
    for g in &model.gaussians {
        let f = |v: f64| (v as f32).to_bits();
        out.extend(g.position.iter().map(|&v| f(v)));
        out.extend(g.log_scale.iter().map(|&v| f(v)));
        out.extend(g.rotation.iter().map(|&v| f(v)));
        if !opacity_free {
            out.push(f(g.opacity_logit));
        }
        for c in [CH_VISUAL, CH_GAIN, CH_TOF] {
            if !free_channels.contains(&c) {
                out.extend(g.sh_channel(c).iter().map(|&v| f(v)));
            }
        }
    }
    out
}

#[test]
fn stage2_freezes_geometry_and_visual_appearance() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path(), 1);
    let (_, radio) = samples(&ds);
    let mut model = init_model(&ds.scene, 800, 200, 3, 2).unwrap();
    assert_eq!(model.len(), 1000);
    let before = model.clone();
    train_stage2(&mut model, &radio, &small_config(0, 25), &mut |_| {}).unwrap();
    assert_eq!(model.len(), before.len());
    assert_eq!(
        frozen_bits(&model, &[CH_GAIN, CH_TOF], true),
        frozen_bits(&before, &[CH_GAIN, CH_TOF], true)
    );
    let moved = model
        .gaussians
        .iter()
        .zip(&before.gaussians)
        .filter(|(a, b)| a.sh_channel(CH_GAIN) != b.sh_channel(CH_GAIN))
        .count();
    assert!(moved > 0, "stage 2 did not update any gain coefficients");
}

#[test]
fn stage1_leaves_radio_coefficients_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path(), 2);
    let (visual, _) = samples(&ds);
    let mut model = init_model(&ds.scene, 300, 50, 4, 1).unwrap();
    for g in &mut model.gaussians {
        g.sh_channel_mut(CH_GAIN)[0] = 0.25;
        g.sh_channel_mut(CH_TOF)[1] = -0.125;
    }
    train_stage1(&mut model, &visual, &small_config(30, 0), &mut |_| {}).unwrap();
    // densification copies coefficients, so every primitive keeps them
    for g in &model.gaussians {
        assert_eq!(g.sh_channel(CH_GAIN)[0], 0.25);
        assert_eq!(g.sh_channel(CH_TOF)[1], -0.125);
        assert!(g.sh_channel(CH_GAIN)[1..].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn zero_iterations_leave_the_model_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path(), 3);
    let (visual, radio) = samples(&ds);
    let mut model = init_model(&ds.scene, 200, 20, 5, 1).unwrap();
    let before = model.clone();
    let cfg = small_config(0, 0);
    train_stage1(&mut model, &visual, &cfg, &mut |_| {}).unwrap();
    train_stage2(&mut model, &radio, &cfg, &mut |_| {}).unwrap();
    assert_eq!(model, before);
}

#[test]
fn empty_datasets_are_rejected() {
    let scene = Scene::reference_box();
    let mut model = init_model(&scene, 10, 0, 0, 0).unwrap();
    let cfg = small_config(1, 1);
    assert!(train_stage1(&mut model, &[], &cfg, &mut |_| {}).is_err());
    assert!(train_stage2(&mut model, &[], &cfg, &mut |_| {}).is_err());
}

#[test]
fn deterministic_runs_are_bit_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let ds = small_dataset(dir.path(), 9);
        let (visual, radio) = samples(&ds);
        let mut cfg = small_config(40, 20);
        cfg.deterministic = true;
        cfg.seed = 17;
        let mut model = init_model(&ds.scene, 300, 50, cfg.seed, 1).unwrap();
        train_stage1(&mut model, &visual, &cfg, &mut |_| {}).unwrap();
        train_stage2(&mut model, &radio, &cfg, &mut |_| {}).unwrap();
        model_to_bytes(&model).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn stage2_windowed_loss_does_not_increase_within_a_phase() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path(), 4);
    let (visual, radio) = samples(&ds);
    let cfg = small_config(150, 1500);
    let mut model = init_model(&ds.scene, 600, 100, 6, 1).unwrap();
    train_stage1(&mut model, &visual, &cfg, &mut |_| {}).unwrap();
    let mut losses = vec![Vec::new(), Vec::new()];
    train_stage2(&mut model, &radio, &cfg, &mut |r: &LogRecord| losses[r.phase].push(r.loss.total)).unwrap();
    for (phase, losses) in losses.iter().enumerate() {
        assert_eq!(losses.len(), 1500);
        let windows: Vec<f64> = losses.chunks(500).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
        for pair in windows.windows(2) {
            assert!(pair[1] <= pair[0], "phase {phase} windowed loss rose: {windows:?}");
        }
    }
}
