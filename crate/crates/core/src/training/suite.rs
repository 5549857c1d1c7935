use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::losses::{discriminator_losses, variety_loss, without_discriminators};
use super::trainer::{draw_normal, generator_loss, TrainConfig};
use crate::autodiff::{
    check_parameters, gradient_check, GradCheckReport, Graph, ParamCheckOptions, ParameterStore, Tensor, Value,
};
use crate::error::Result;
use crate::layers::{
    Activation, ConvSpec, FeatureGrid, GatStack, GridCnn, Lstm, LstmState, Mlp, MlpSpec, PhysicalAttention,
};
use crate::model::{
    reparameterize, ModelConfig, SceneSample, SocialBiGat, TrajectoryWindow, DISCRIMINATOR_PREFIX,
    ENCODER_PREFIX, GENERATOR_PREFIX, OBS_LEN,
    PRED_LEN,
};

/// Finite-difference step and tolerance used by [`gradient_suite`].
pub const SUITE_STEP: f64 = 1e-4;
pub const SUITE_TOLERANCE: f64 = 1e-4;
/// Relative-error denominator floor for the end-to-end objectives.
pub const OBJECTIVE_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct SuiteCheck {
    pub name: String,
    pub report: GradCheckReport,
}

/// Two pedestrians on gently curving paths over a 9x9 one-channel grid.
pub fn toy_scene(seed: u64) -> Result<SceneSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut peds = Vec::new();
    for id in 0..2 {
        let start = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let vel = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let bend = rng.gen_range(-0.05..0.05);
        let pos: Vec<[f64; 2]> = (0..OBS_LEN + PRED_LEN)
            .map(|t| {
                let t = t as f64;
                [start[0] + vel[0] * t, start[1] + vel[1] * t + bend * t * t]
            })
            .collect();
        peds.push(TrajectoryWindow::from_positions(id, &pos)?);
    }
    let cells = (0..81).map(|_| rng.gen_range(0.0..1.0)).collect();
    let grid = FeatureGrid::new(9, 9, 1, cells, (-4.0, -4.0), 1.0)?;
    SceneSample::new(format!("toy{seed}"), peds, Some(grid))
}

fn uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Result<Tensor<f64>> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn weighted_sum<'g>(y: Value<'g, f64>, w: &Tensor<f64>) -> Result<Value<'g, f64>> {
    let w = y.graph().constant(w.clone().reshaped(y.shape())?);
    y.mul(w)?.sum_all()
}

fn layer_checks(seed: u64, opts: &ParamCheckOptions) -> Result<Vec<SuiteCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = uniform(&mut rng, vec![2, 5])?;
    let weights = uniform(&mut rng, vec![2, 4])?;
    let mut out = Vec::new();
    let mut push = |name: &str, report| {
        out.push(SuiteCheck { name: name.into(), report });
    };

    let mlp = Mlp::new("mlp", MlpSpec::new(vec![5, 6, 4], Activation::Tanh, Activation::Tanh))?;
    let mut store = ParameterStore::<f64>::new();
    mlp.init(&mut store, &mut rng)?;
    push(
        "mlp",
        check_parameters(&mut store, |g, s| weighted_sum(mlp.forward(g, s, g.constant(nodes.clone()))?, &weights), opts)?,
    );

    let lstm = Lstm::new("lstm", 5, 4)?;
    let mut store = ParameterStore::<f64>::new();
    lstm.init(&mut store, &mut rng)?;
    let seq = (0..4).map(|_| uniform(&mut rng, vec![2, 5])).collect::<Result<Vec<_>>>()?;
    push(
        "lstm",
        check_parameters(
            &mut store,
            |g, s| {
                let xs: Vec<_> = seq.iter().map(|t| g.constant(t.clone())).collect();
                weighted_sum(lstm.forward(g, s, &xs, LstmState::zeros(g, 2, 4))?.1.h, &weights)
            },
            opts,
        )?,
    );

    let gat = GatStack::uniform("gat", 5, 4, 2, 0.2)?;
    let mut store = ParameterStore::<f64>::new();
    gat.init(&mut store, &mut rng)?;
    push(
        "gat",
        check_parameters(&mut store, |g, s| weighted_sum(gat.forward(g, s, g.constant(nodes.clone()))?, &weights), opts)?,
    );
    push(
        "gat input",
        gradient_check(
            |g, x| weighted_sum(gat.forward(g, &store, x)?, &weights),
            &nodes,
            SUITE_STEP,
            SUITE_TOLERANCE,
        )?,
    );

    let att = PhysicalAttention::new("att", 4, 5, 3)?;
    let mut store = ParameterStore::<f64>::new();
    att.init(&mut store, &mut rng)?;
    let cells = uniform(&mut rng, vec![6, 4])?;
    push(
        "physical attention",
        check_parameters(
            &mut store,
            |g, s| weighted_sum(att.forward(g, s, g.constant(cells.clone()), g.constant(nodes.clone()))?, &weights),
            opts,
        )?,
    );

    let conv = |out_channels| ConvSpec { out_channels, kernel: 3, stride: 2 };
    let cnn = GridCnn::new("cnn", 1, vec![conv(2), conv(4)])?;
    let mut store = ParameterStore::<f64>::new();
    cnn.init(&mut store, &mut rng)?;
    let grid = FeatureGrid::new(7, 7, 1, (0..49).map(|_| rng.gen_range(0.0..1.0)).collect(), (0.0, 0.0), 1.0)?;
    push("cnn", check_parameters(&mut store, |g, s| cnn.forward(g, s, &grid)?.sum_all(), opts)?);
    Ok(out)
}

fn discriminator_objective<'g>(
    model: &SocialBiGat,
    g: &'g Graph<f64>,
    store: &ParameterStore<f64>,
    scene: &SceneSample,
    z: &[f64],
    eps: &[f64],
) -> Result<Value<'g, f64>> {
    let fakes = g.with_frozen(GENERATOR_PREFIX, || {
        g.with_frozen(ENCODER_PREFIX, || -> Result<Vec<Value<'g, f64>>> {
            let zv = g.constant(Tensor::vector(z.to_vec()));
            let a = model.generator.forward(g, store, scene, zv)?.positions;
            let (mean, log_var) = model.encoder.encode(g, store, scene, g.constant(scene.future_tensor()))?;
            let b = model.generator.forward(g, store, scene, reparameterize(mean, log_var, eps)?)?.positions;
            Ok(vec![a, b])
        })
    })?;
    let (local, global) = discriminator_losses(model, g, store, scene, &fakes)?;
    local.add(global)
}

/// Central finite-difference checks of every layer type and of the
/// generator, discriminator and variety objectives of the narrow model on a
/// two-pedestrian scene. Parameters are freshly initialized from `seed`.
pub fn gradient_suite(seed: u64) -> Result<Vec<SuiteCheck>> {
    let opts = ParamCheckOptions {
        step: SUITE_STEP,
        tolerance: SUITE_TOLERANCE,
        max_per_parameter: 16,
        ..ParamCheckOptions::default()
    };
    let mut checks = layer_checks(seed, &opts)?;

    let model = SocialBiGat::new(ModelConfig::tiny())?;
    let mut store = model.init_params::<f64>(seed)?;
    let scene = toy_scene(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let dim = model.latent_dim();
    let (z, eps) = (draw_normal(&mut rng, dim), draw_normal(&mut rng, dim));
    let codes: Vec<Vec<f64>> = (0..3).map(|_| draw_normal(&mut rng, dim)).collect();

    let mut add = |name: &str, report| checks.push(SuiteCheck { name: name.into(), report });
    // Each objective is checked against the parameters it trains; the rest
    // enter it as constants. The objectives are O(10), so central differences
    // carry roundoff near 1e-10 and tiny gradient entries get a wider floor.
    let scoped = |prefixes: &[&str]| ParamCheckOptions {
        prefixes: prefixes.iter().map(|p| p.to_string()).collect(),
        floor: OBJECTIVE_FLOOR,
        ..opts.clone()
    };
    let cfg = TrainConfig::default();
    add(
        "generator objective",
        check_parameters(
            &mut store,
            |g, s| generator_loss(&model, g, s, &scene, &z, &eps, &cfg),
            &scoped(&[GENERATOR_PREFIX, ENCODER_PREFIX]),
        )?,
    );
    let g_only = TrainConfig { encoder_learns_z: false, ..cfg.clone() };
    add(
        "generator objective with L_z on the generator only",
        check_parameters(
            &mut store,
            |g, s| generator_loss(&model, g, s, &scene, &z, &eps, &g_only),
            &scoped(&[GENERATOR_PREFIX]),
        )?,
    );
    add(
        "discriminator objective",
        check_parameters(
            &mut store,
            |g, s| discriminator_objective(&model, g, s, &scene, &z, &eps),
            &scoped(&[DISCRIMINATOR_PREFIX]),
        )?,
    );
    add(
        "variety loss",
        check_parameters(
            &mut store,
            |g, s| without_discriminators(g, || variety_loss(&model, g, s, &scene, &codes)),
            &scoped(&[GENERATOR_PREFIX]),
        )?,
    );
    Ok(checks)
}
