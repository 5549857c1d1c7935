//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line. Tests hold a shared lock so their wall-clock budgets are measured
//! without competing for cores.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use social_bigat::autodiff::{Graph, Tensor};
use social_bigat::config::RunConfig;
use social_bigat::data::{
    format_tracks, frame_step, lateral_offset, load_scene_file, parse_tracks, synth_generate, to_displacements,
    SynthKind, SynthSpec, MIDPOINT, SCENE_NAMES,
};
use social_bigat::eval::{ade, evaluate_best_of_k, evaluate_with, fde, latent_draws, linear_baseline, scene_best_of, Pairing};
use social_bigat::layers::FeatureGrid;
use social_bigat::model::{reconstruct, LatentCode, ModelConfig, Point, SceneSample, SocialBiGat, TrajectoryWindow, OBS_LEN, PRED_LEN};
use social_bigat::training::{
    bce_with_logits, gradient_suite, kl_divergence, latent_recovery_error, loss_path_noise, loss_path_trajectory,
    train_step, draw_normal, generator_loss, LossWeights, TrainConfig, Trainer, SUITE_TOLERANCE,
};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes to the raw stderr handle so the line shows even when output is captured.
fn verdict(n: u32, ok: bool, detail: &str) {
    let line = format!("criterion {n}: {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(ok, "criterion {n} failed: {detail}");
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn criterion_1_gradient_suite() {
    let _lock = serial();
    let start = Instant::now();
    let checks = gradient_suite(0).unwrap();
    let elapsed = start.elapsed();
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.report.passed())
        .map(|c| format!("{} ({:.2e})", c.name, c.report.max_relative_error))
        .collect();
    let worst = checks.iter().map(|c| c.report.max_relative_error).fold(0.0, f64::max);
    let ok = failed.is_empty() && worst <= SUITE_TOLERANCE && elapsed < Duration::from_secs(60) && checks.len() >= 10;
    verdict(
        1,
        ok,
        &format!("{} checks, worst relative error {worst:.2e}, {:.1}s, failed {failed:?}", checks.len(), elapsed.as_secs_f64()),
    );
}

fn random_scene(rng: &mut ChaCha8Rng, n: usize, grid: bool) -> SceneSample {
    let peds = (0..n)
        .map(|i| {
            let start = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let v = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
            let pts: Vec<Point> = (0..OBS_LEN + PRED_LEN)
                .map(|t| {
                    let t = t as f64;
                    [start[0] + v[0] * t + rng.gen_range(-0.05..0.05), start[1] + v[1] * t + rng.gen_range(-0.05..0.05)]
                })
                .collect();
            TrajectoryWindow::from_positions(100 + i as i64, &pts).unwrap()
        })
        .collect();
    let grid = grid.then(|| {
        let cells = (0..9 * 9).map(|_| rng.gen_range(0.0..1.0)).collect();
        FeatureGrid::new(9, 9, 1, cells, (-4.0, -4.0), 1.0).unwrap()
    });
    SceneSample::new("random", peds, grid).unwrap()
}

#[test]
fn criterion_2_permutation_equivariance() {
    let _lock = serial();
    let start = Instant::now();
    let model = SocialBiGat::new(ModelConfig::tiny()).unwrap();
    let mut store = model.init_params::<f64>(2).unwrap();
    common::randomize(&mut store, 3, 0.4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for case in 0..100 {
        let n = rng.gen_range(1..=6);
        let scene = random_scene(&mut rng, n, case % 2 == 0);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let perm = scene.permuted(&order);
        let z = LatentCode(draw_normal(&mut rng, model.latent_dim()));
        let a = model.predict(&store, &scene, &z).unwrap();
        let b = model.predict(&store, &perm, &z).unwrap();
        let (la, ga) = model.discriminate(&store, &scene, &a.futures).unwrap();
        let (lb, gb) = model.discriminate(&store, &perm, &b.futures).unwrap();
        for (k, &i) in order.iter().enumerate() {
            let same = b.futures[k] == a.futures[i] && lb[k].to_bits() == la[i].to_bits() && gb[k].to_bits() == ga[i].to_bits();
            mismatches += usize::from(!same);
        }
    }
    verdict(2, mismatches == 0, &format!("100 scenes, {mismatches} mismatched pedestrians, {:.2}s", start.elapsed().as_secs_f64()));
}

#[test]
fn criterion_3_loss_oracles() {
    let _lock = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut kl_err: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.gen_range(1..9);
        let mu: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let lv: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let closed: f64 = mu.iter().zip(&lv).map(|(m, l)| 0.5 * (m * m + l.exp() - l - 1.0)).sum();
        let g = Graph::new();
        let kl = kl_divergence(g.constant(Tensor::vector(mu)), g.constant(Tensor::vector(lv))).unwrap().item();
        kl_err = kl_err.max((kl - closed).abs());
    }

    let mut bce_err: f64 = 0.0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let real = -x.iter().map(|&v| sig(v).ln()).sum::<f64>() / 4.0;
        let fake = -x.iter().map(|&v| (1.0 - sig(v)).ln()).sum::<f64>() / 4.0;
        let g = Graph::new();
        let logits = g.constant(Tensor::vector(x));
        bce_err = bce_err.max((bce_with_logits(logits, true).unwrap().item() - real).abs());
        bce_err = bce_err.max((bce_with_logits(logits, false).unwrap().item() - fake).abs());
    }

    let model = SocialBiGat::new(ModelConfig::tiny()).unwrap();
    let mut store = model.init_params::<f64>(6).unwrap();
    let cfg = TrainConfig {
        weights: LossWeights { lambda_z: 0.7, lambda_traj: 3.0, lambda_kl: 0.2, lambda_variety: 0.0 },
        ..TrainConfig::default()
    };
    let mut total_err: f64 = 0.0;
    for seed in 0..10 {
        let scene = common::toy_scene(1 + seed % 4, seed as u64);
        let z = draw_normal(&mut rng, 3);
        let eps = draw_normal(&mut rng, 3);
        let g = Graph::new();
        let total = generator_loss(&model, &g, &store, &scene, &z, &eps, &cfg).unwrap().item();
        let h = Graph::new();
        let noise = loss_path_noise(&model, &h, &store, &scene, &z, true).unwrap();
        let traj = loss_path_trajectory(&model, &h, &store, &scene, &eps).unwrap();
        let w = &cfg.weights;
        let parts = noise.gan.item() + w.lambda_z * noise.z.item() + traj.gan.item()
            + w.lambda_traj * traj.traj.item() + w.lambda_kl * traj.kl.item();
        total_err = total_err.max((total - parts).abs());
        let r = train_step(&model, &mut store, &[scene], &cfg, &mut rng).unwrap();
        let recomposed = r.gan1 + w.lambda_z * r.z + r.gan2 + w.lambda_traj * r.traj + w.lambda_kl * r.kl;
        total_err = total_err.max((r.total - recomposed).abs());
    }
    let ok = kl_err <= 1e-10 && bce_err <= 1e-12 && total_err <= 1e-12;
    verdict(3, ok, &format!("max |KL err| {kl_err:.1e}, |BCE err| {bce_err:.1e}, |total err| {total_err:.1e}"));
}

#[test]
fn criterion_4_metric_oracles() {
    let _lock = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let future = |rng: &mut ChaCha8Rng| -> [Point; PRED_LEN] {
        std::array::from_fn(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)])
    };
    let mut metric_err: f64 = 0.0;
    for _ in 0..1000 {
        let (p, t) = (future(&mut rng), future(&mut rng));
        let mut brute = 0.0;
        for i in 0..PRED_LEN {
            brute += ((p[i][0] - t[i][0]).powi(2) + (p[i][1] - t[i][1]).powi(2)).sqrt();
        }
        metric_err = metric_err.max((ade(&p, &t).unwrap() - brute / PRED_LEN as f64).abs());
        let last = (p[PRED_LEN - 1][0] - t[PRED_LEN - 1][0]).hypot(p[PRED_LEN - 1][1] - t[PRED_LEN - 1][1]);
        metric_err = metric_err.max((fde(&p, &t).unwrap() - last).abs());
    }
    let mut violations = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=4);
        let scene = random_scene(&mut rng, n, false);
        let pool: Vec<Vec<[Point; PRED_LEN]>> = (0..20).map(|_| (0..n).map(|_| future(&mut rng)).collect()).collect();
        let mut prev = f64::INFINITY;
        for k in 1..=20 {
            let (a, _) = scene_best_of(&pool[..k], &scene, Pairing::MinAde).unwrap();
            violations += usize::from(a > prev);
            prev = a;
        }
    }
    verdict(
        4,
        metric_err <= 1e-12 && violations == 0,
        &format!("max metric error {metric_err:.1e}, {violations} monotonicity violations in 100 cases"),
    );
}

fn constant_velocity(scenes: usize, seed: u64) -> Vec<SceneSample> {
    let mut spec = SynthSpec::new(SynthKind::ConstantVelocity, scenes, seed);
    spec.noise = 0.05;
    synth_generate(&spec).unwrap().scenes
}

#[test]
fn criterion_5_constant_velocity_convergence() {
    let _lock = serial();
    let start = Instant::now();
    let train = constant_velocity(500, 1);
    let test = constant_velocity(100, 2);
    let base = evaluate_with("baseline", &test, 1, Pairing::MinAde, |_, s| Ok(vec![linear_baseline(s).futures])).unwrap();

    let model = SocialBiGat::new(ModelConfig { latent_dim: 2, ..ModelConfig::default() }).unwrap();
    let mut store = model.init_params::<f64>(3).unwrap();
    let mut cfg = TrainConfig::default();
    cfg.weights.lambda_z = 0.1;
    cfg.weights.lambda_traj = 20.0;
    cfg.weights.lambda_variety = 20.0;
    cfg.optimizer.variety_k = 1;
    cfg.optimizer.lr_generator = 5e-4;
    cfg.optimizer.lr_discriminator = 1e-4;
    cfg.optimizer.batch_scenes = 8;
    let mut trainer = Trainer::new(model.clone(), cfg, 4).unwrap();
    trainer.run(&mut store, &train, 2000, |_, _, _| Ok(())).unwrap();
    let learned = evaluate_best_of_k(&model, &store, "learned", &test, 1, 9, Pairing::MinAde).unwrap();
    let elapsed = start.elapsed();

    let ok = learned.ade <= 0.10 && base.ade <= 0.05 && elapsed <= Duration::from_secs(600);
    verdict(
        5,
        ok,
        &format!(
            "best-of-1 ADE {:.4} m (<= 0.10), baseline ADE {:.4} m (<= 0.05), 2000 steps in {:.0}s",
            learned.ade,
            base.ade,
            elapsed.as_secs_f64()
        ),
    );
}

struct Bimodal {
    model: SocialBiGat,
    store: social_bigat::autodiff::ParameterStore<f64>,
    test: Vec<SceneSample>,
    lz_init: f64,
    train_time: Duration,
}

const RECOVERY_SCENES: usize = 50;
const RECOVERY_DRAWS: usize = 4;
const RECOVERY_SEED: u64 = 77;

fn recovery(b: &Bimodal, store: &social_bigat::autodiff::ParameterStore<f64>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(RECOVERY_SEED);
    latent_recovery_error(&b.model, store, &b.test[..RECOVERY_SCENES], RECOVERY_DRAWS, &mut rng).unwrap()
}

fn bimodal_model() -> &'static Bimodal {
    static TRAINED: OnceLock<Bimodal> = OnceLock::new();
    TRAINED.get_or_init(|| {
        let start = Instant::now();
        let train = synth_generate(&SynthSpec::new(SynthKind::BimodalAvoidance, 1000, 11)).unwrap().scenes;
        let test = synth_generate(&SynthSpec::new(SynthKind::BimodalAvoidance, 100, 12)).unwrap().scenes;
        let model = SocialBiGat::new(ModelConfig { latent_dim: 1, ..ModelConfig::default() }).unwrap();
        let store = model.init_params::<f64>(3).unwrap();
        let mut b = Bimodal { model, store, test, lz_init: 0.0, train_time: Duration::ZERO };
        b.lz_init = recovery(&b, &b.store);

        let mut cfg = TrainConfig::default();
        cfg.weights.lambda_z = 4.0;
        cfg.weights.lambda_variety = 10.0;
        cfg.optimizer.variety_k = 4;
        cfg.optimizer.lr_generator = 1e-3;
        cfg.optimizer.lr_discriminator = 1e-3;
        cfg.optimizer.batch_scenes = 8;
        let mut trainer = Trainer::new(b.model.clone(), cfg, 4).unwrap();
        trainer.run(&mut b.store, &train, 1500, |_, _, _| Ok(())).unwrap();
        b.train_time = start.elapsed();
        b
    })
}

/// A sampled future passes left or right when the scripted pedestrian's
/// lateral offset at the detour peak is at least half the scripted amplitude.
const SIDE_THRESHOLD: f64 = 0.4;

#[test]
fn criterion_6_multimodality() {
    let _lock = serial();
    let start = Instant::now();
    let b = bimodal_model();
    let mut both = 0;
    for (i, scene) in b.test.iter().enumerate() {
        let (mut left, mut right) = (false, false);
        for z in latent_draws(9, i, 20, b.model.latent_dim()) {
            let pred = b.model.predict(&b.store, scene, &z).unwrap();
            let off = lateral_offset(&scene.pedestrians[0], pred.futures[0][MIDPOINT]);
            left |= off >= SIDE_THRESHOLD;
            right |= off <= -SIDE_THRESHOLD;
        }
        both += usize::from(left && right);
    }
    let frac = both as f64 / b.test.len() as f64;
    let k1 = evaluate_best_of_k(&b.model, &b.store, "bimodal", &b.test, 1, 9, Pairing::MinAde).unwrap();
    let k20 = evaluate_best_of_k(&b.model, &b.store, "bimodal", &b.test, 20, 9, Pairing::MinAde).unwrap();
    let ratio = k20.ade / k1.ade;
    let elapsed = start.elapsed().max(b.train_time);
    let ok = frac >= 0.8 && ratio <= 0.6 && elapsed <= Duration::from_secs(1200);
    verdict(
        6,
        ok,
        &format!(
            "both sides in {both}/{} scenes ({:.0}%), best-of-20 ADE {:.3} / best-of-1 {:.3} = {ratio:.2}, {:.0}s",
            b.test.len(),
            100.0 * frac,
            k20.ade,
            k1.ade,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_7_latent_recovery() {
    let _lock = serial();
    let b = bimodal_model();
    let trained = recovery(b, &b.store);
    let drop = 1.0 - trained / b.lz_init;
    verdict(
        7,
        drop >= 0.5,
        &format!("L_z on fresh samples {:.4} at init, {trained:.4} trained ({:.0}% lower)", b.lz_init, 100.0 * drop),
    );
}

#[test]
fn criterion_8_data_round_trip() {
    let _lock = serial();
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixtures())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    let (mut worst, mut peds): (f64, usize) = (0.0, 0);
    for path in &files {
        let rows = parse_tracks(&std::fs::read_to_string(path).unwrap()).unwrap();
        let truth: BTreeMap<(i64, i64), Point> = rows.iter().map(|r| ((r.frame, r.ped), [r.x, r.y])).collect();
        let step = frame_step(&rows).unwrap();
        for scene in load_scene_file(path, 1).unwrap() {
            let start: i64 = scene.scene_id.rsplit('@').next().unwrap().parse().unwrap();
            for ped in &scene.pedestrians {
                let pos = ped.positions();
                for (t, p) in reconstruct(pos[0], &to_displacements(ped)).iter().enumerate() {
                    let q = truth[&(start + t as i64 * step, ped.pedestrian_id)];
                    worst = worst.max((p[0] - q[0]).abs()).max((p[1] - q[1]).abs());
                }
                peds += 1;
            }
        }
    }
    let mut reproducible = true;
    for kind in [SynthKind::ConstantVelocity, SynthKind::SocialForces, SynthKind::BimodalAvoidance] {
        for seed in [0, 1, 42] {
            let mut spec = SynthSpec::new(kind, 20, seed);
            spec.noise = 0.05;
            let a = format_tracks(&synth_generate(&spec).unwrap().rows);
            let b = format_tracks(&synth_generate(&spec).unwrap().rows);
            reproducible &= a.as_bytes() == b.as_bytes();
        }
    }
    verdict(
        8,
        worst <= 1e-12 && peds > 0 && reproducible,
        &format!("{} fixtures, {peds} windows, max error {worst:.1e}, synthetic output byte-reproducible: {reproducible}", files.len()),
    );
}

/// Reference best-of-20 ADE / FDE per held-out set.
const REFERENCE: [(&str, f64, f64); 5] =
    [("eth", 0.69, 1.29), ("hotel", 0.49, 1.01), ("univ", 0.55, 1.32), ("zara1", 0.30, 0.62), ("zara2", 0.36, 0.75)];

/// Full hold-one-out training on the real benchmark files. Needs
/// `BIGAT_DATA_DIR` pointing at `eth.txt`, `hotel.txt`, ... in meters and
/// takes hours. `BIGAT_EPOCHS` overrides the epoch count.
#[test]
#[ignore]
fn criterion_9_benchmark_long_run() {
    let dir = std::env::var("BIGAT_DATA_DIR").expect("set BIGAT_DATA_DIR to the benchmark track files");
    let epochs: usize = std::env::var("BIGAT_EPOCHS").ok().and_then(|s| s.parse().ok()).unwrap_or(200);
    let mut within = 0;
    for (name, pub_ade, pub_fde) in REFERENCE {
        assert!(SCENE_NAMES.contains(&name));
        let mut cfg = RunConfig::default();
        cfg.data_dir = Some(PathBuf::from(&dir));
        cfg.held_out = Some(name.to_string());
        cfg.epochs = epochs;
        let sets = cfg.scene_sets().unwrap();
        let train = sets.train_scenes();
        let model = SocialBiGat::new(cfg.model.clone()).unwrap();
        let mut store = model.init_params::<f64>(cfg.seed).unwrap();
        let mut trainer = Trainer::new(model.clone(), cfg.train.clone(), cfg.seed).unwrap();
        trainer.run(&mut store, &train, cfg.total_steps(train.len()), |_, _, _| Ok(())).unwrap();
        let test: Vec<SceneSample> = sets.test.into_iter().flat_map(|(_, s)| s).collect();
        let r = evaluate_best_of_k(&model, &store, name, &test, 20, cfg.seed, Pairing::MinAde).unwrap();
        let ok = r.ade <= 1.25 * pub_ade && r.fde <= 1.25 * pub_fde;
        within += usize::from(ok);
        println!("{name}: ADE {:.3} / FDE {:.3} against {pub_ade} / {pub_fde}", r.ade, r.fde);
    }
    verdict(9, within == REFERENCE.len(), &format!("{within}/5 held-out sets within 25% of the reference numbers"));
}
