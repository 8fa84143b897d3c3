use rrf::gradcheck::{check_gradients, gradcheck, random_problem, GradcheckConfig};
use rrf::train::{GainNorm, View};
use rrf::RxPose;

#[test]
fn pinhole_gradients_match_finite_differences() {
    for seed in 0..3 {
        let cfg = GradcheckConfig {
            primitives: 30,
            seed,
            ..Default::default()
        };
        let r = gradcheck(&cfg).unwrap();
        for g in &r.groups {
            println!("seed {seed} {:<14} checked {:>5} skipped {:>3} max rel {:.2e}", g.group, g.checked, g.skipped, g.max_rel_error);
        }
        assert!(r.passed, "seed {seed}: max rel error {}", r.max_rel_error);
    }
}

#[test]
fn squared_gain_loss_gradients_match_finite_differences() {
    let cfg = GradcheckConfig {
        primitives: 30,
        seed: 21,
        gain_norm: GainNorm::L2,
        ..Default::default()
    };
    let r = gradcheck(&cfg).unwrap();
    assert!(r.passed, "max rel error {}", r.max_rel_error);
}

#[test]
fn panorama_gradients_match_finite_differences() {
    let cfg = GradcheckConfig {
        primitives: 12,
        sh_degree: 1,
        seed: 11,
        ..Default::default()
    };
    let (model, _, _) = random_problem(&cfg);
    let view = View::panorama(RxPose::from_yaw(rrf::Vec3::new(0.2, 0.1, -0.1), 0.4), 16).unwrap();
    let mut target = rrf::ChannelImage::zeros(16, 32, 3);
    for (i, v) in target.data.iter_mut().enumerate() {
        *v = ((i * 7919) % 101) as f64 / 100.0;
    }
    let r = check_gradients(&model, &view, &target, &cfg).unwrap();
    for g in &r.groups {
        println!("{:<14} checked {:>5} skipped {:>3} max rel {:.2e}", g.group, g.checked, g.skipped, g.max_rel_error);
    }
    assert!(r.passed, "max rel error {}", r.max_rel_error);
}
