//! Plain-loop reference implementations of every network, reading weights
//! straight out of a parameter store. They share no code with the graph engine.

#![allow(dead_code)]

use social_bigat::autodiff::ParameterStore;
use social_bigat::model::{displacements, ModelConfig, Point, SceneSample, OBS_LEN, PRED_LEN};

pub type Mat = Vec<Vec<f64>>;

#[derive(Clone, Copy)]
pub enum Act {
    Tanh,
    Relu,
    None,
}

fn act(a: Act, x: f64) -> f64 {
    match a {
        Act::Tanh => x.tanh(),
        Act::Relu => x.max(0.0),
        Act::None => x,
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub struct Reference<'a> {
    pub store: &'a ParameterStore<f64>,
    pub cfg: ModelConfig,
}

impl<'a> Reference<'a> {
    pub fn new(store: &'a ParameterStore<f64>, cfg: ModelConfig) -> Self {
        Reference { store, cfg }
    }

    pub fn matrix(&self, name: &str) -> Mat {
        let t = self.store.value(name).unwrap();
        let (r, c) = (t.shape()[0], t.shape()[1]);
        (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
    }

    pub fn vector(&self, name: &str) -> Vec<f64> {
        self.store.value(name).unwrap().data().to_vec()
    }

    /// `x W + b` for row vector `x`.
    pub fn affine(&self, w: &str, b: &str, x: &[f64]) -> Vec<f64> {
        let w = self.matrix(w);
        let b = self.vector(b);
        (0..b.len())
            .map(|j| b[j] + x.iter().enumerate().map(|(i, xi)| xi * w[i][j]).sum::<f64>())
            .collect()
    }

    pub fn mlp(&self, prefix: &str, layers: usize, hidden: Act, last: Act, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for k in 0..layers {
            h = self.affine(&format!("{prefix}.w{k}"), &format!("{prefix}.b{k}"), &h);
            let a = if k + 1 == layers { last } else { hidden };
            h = h.into_iter().map(|v| act(a, v)).collect();
        }
        h
    }

    pub fn lstm_step(&self, prefix: &str, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w_ih = self.matrix(&format!("{prefix}.w_ih"));
        let w_hh = self.matrix(&format!("{prefix}.w_hh"));
        let b = self.vector(&format!("{prefix}.b"));
        let hd = h.len();
        let pre: Vec<f64> = (0..4 * hd)
            .map(|j| {
                b[j] + x.iter().enumerate().map(|(i, v)| v * w_ih[i][j]).sum::<f64>()
                    + h.iter().enumerate().map(|(i, v)| v * w_hh[i][j]).sum::<f64>()
            })
            .collect();
        let mut h2 = vec![0.0; hd];
        let mut c2 = vec![0.0; hd];
        for k in 0..hd {
            let i = sigmoid(pre[k]);
            let f = sigmoid(pre[hd + k]);
            let g = pre[2 * hd + k].tanh();
            let o = sigmoid(pre[3 * hd + k]);
            c2[k] = f * c[k] + i * g;
            h2[k] = o * c2[k].tanh();
        }
        (h2, c2)
    }

    pub fn lstm(&self, prefix: &str, inputs: &[Vec<f64>], hidden: usize) -> Vec<f64> {
        let (mut h, mut c) = (vec![0.0; hidden], vec![0.0; hidden]);
        for x in inputs {
            (h, c) = self.lstm_step(prefix, x, &h, &c);
        }
        h
    }

    /// Attention weights and output of one GAT layer, straight from the formula.
    pub fn gat_layer(&self, prefix: &str, nodes: &Mat, slope: f64) -> (Mat, Mat) {
        let w = self.matrix(&format!("{prefix}.w"));
        let a = self.vector(&format!("{prefix}.a"));
        let out = w[0].len();
        let wh: Mat = nodes
            .iter()
            .map(|v| (0..out).map(|j| v.iter().enumerate().map(|(i, x)| x * w[i][j]).sum()).collect())
            .collect();
        let n = nodes.len();
        let mut alpha = vec![vec![0.0; n]; n];
        for i in 0..n {
            let e: Vec<f64> = (0..n)
                .map(|j| {
                    let s: f64 = (0..out).map(|k| a[k] * wh[i][k] + a[out + k] * wh[j][k]).sum();
                    if s > 0.0 {
                        s
                    } else {
                        slope * s
                    }
                })
                .collect();
            let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = e.iter().map(|x| (x - m).exp()).sum();
            for j in 0..n {
                alpha[i][j] = (e[j] - m).exp() / z;
            }
        }
        let outm: Mat = (0..n)
            .map(|i| (0..out).map(|k| (0..n).map(|j| alpha[i][j] * wh[j][k]).sum()).collect())
            .collect();
        (alpha, outm)
    }

    pub fn gat_stack(&self, prefix: &str, layers: usize, nodes: &Mat, slope: f64) -> Mat {
        let mut x = nodes.clone();
        for k in 0..layers {
            if k > 0 {
                x = x
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| if v > 0.0 { v } else { v.exp() - 1.0 }).collect())
                    .collect();
            }
            x = self.gat_layer(&format!("{prefix}.{k}"), &x, slope).1;
        }
        x
    }

    /// Naive valid convolution with ReLU. `grid[y][x][c]`.
    pub fn conv(&self, prefix: &str, grid: &Vec<Mat>, kernel: usize, stride: usize) -> Vec<Mat> {
        let w = self.matrix(&format!("{prefix}.w"));
        let b = self.vector(&format!("{prefix}.b"));
        let (h, wd, cin) = (grid.len(), grid[0].len(), grid[0][0].len());
        let oh = (h - kernel) / stride + 1;
        let ow = (wd - kernel) / stride + 1;
        let mut out = vec![vec![vec![0.0; b.len()]; ow]; oh];
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..b.len() {
                    let mut s = b[co];
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            for ci in 0..cin {
                                s += grid[oy * stride + ky][ox * stride + kx][ci] * w[(ky * kernel + kx) * cin + ci][co];
                            }
                        }
                    }
                    out[oy][ox][co] = s.max(0.0);
                }
            }
        }
        out
    }

    pub fn cnn(&self, prefix: &str, grid: &Vec<Mat>) -> Mat {
        let mut x = grid.clone();
        for k in 0..self.cfg.cnn_channels.len() {
            x = self.conv(&format!("{prefix}.conv{k}"), &x, self.cfg.cnn_kernel, self.cfg.cnn_stride);
        }
        x.into_iter().flatten().collect()
    }

    pub fn physical(&self, prefix: &str, cells: &Mat, query: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = cells
            .iter()
            .map(|c| {
                let input: Vec<f64> = c.iter().chain(query).copied().collect();
                self.mlp(prefix, 2, Act::Tanh, Act::None, &input)[0]
            })
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
        let dim = cells[0].len();
        (0..dim)
            .map(|k| cells.iter().zip(&scores).map(|(c, s)| (s - m).exp() / z * c[k]).sum())
            .collect()
    }

    pub fn encode(&self, prefix: &str, steps: &[Point]) -> Vec<f64> {
        let embedded: Vec<Vec<f64>> = steps
            .iter()
            .map(|d| self.mlp(&format!("{prefix}.emb"), 1, Act::Tanh, Act::Tanh, d))
            .collect();
        self.lstm(&format!("{prefix}.lstm_en"), &embedded, self.cfg.encoder_hidden)
    }

    fn scene_grid(&self, scene: &SceneSample) -> Vec<Mat> {
        match &scene.grid {
            Some(g) => (0..g.height())
                .map(|y| (0..g.width()).map(|x| (0..g.channels()).map(|c| g.get(y, x, c)).collect()).collect())
                .collect(),
            None => {
                let side = receptive_field(&self.cfg);
                vec![vec![vec![0.0; self.cfg.grid_channels]; side]; side]
            }
        }
    }

    pub fn generator(&self, scene: &SceneSample, z: &[f64]) -> Vec<[Point; PRED_LEN]> {
        let vs: Mat = scene
            .pedestrians
            .iter()
            .map(|p| self.encode("gen", &displacements(&p.observed)))
            .collect();
        let cs = self.gat_stack("gen.gat", self.cfg.gat_layers, &vs, self.cfg.leaky_slope);
        let cells = self.cnn("gen.cnn", &self.scene_grid(scene));
        let mut out = Vec::new();
        for (i, p) in scene.pedestrians.iter().enumerate() {
            let cp = self.physical("gen.att_p", &cells, &vs[i]);
            let ctx: Vec<f64> = vs[i].iter().chain(&cs[i]).chain(&cp).chain(z).copied().collect();
            let mut h = self.mlp("gen.dec_init", 1, Act::Tanh, Act::Tanh, &ctx);
            let mut c = vec![0.0; h.len()];
            let mut prev = p.last_observed_displacement().to_vec();
            let mut pos = p.last_observed();
            let mut fut = [[0.0; 2]; PRED_LEN];
            for slot in fut.iter_mut() {
                let e = self.mlp("gen.dec_emb", 1, Act::Tanh, Act::Tanh, &prev);
                (h, c) = self.lstm_step("gen.lstm_dec", &e, &h, &c);
                let d = self.mlp("gen.mlp_d", 1, Act::None, Act::None, &h);
                pos = [pos[0] + d[0], pos[1] + d[1]];
                *slot = pos;
                prev = d;
            }
            out.push(fut);
        }
        out
    }

    fn full_steps(scene: &SceneSample, futures: &[[Point; PRED_LEN]]) -> Vec<Vec<Point>> {
        scene
            .pedestrians
            .iter()
            .zip(futures)
            .map(|(p, f)| {
                let pts: Vec<Point> = p.observed.iter().chain(f.iter()).copied().collect();
                displacements(&pts)
            })
            .collect()
    }

    pub fn local_scores(&self, scene: &SceneSample, futures: &[[Point; PRED_LEN]]) -> Vec<f64> {
        Self::full_steps(scene, futures)
            .iter()
            .map(|steps| {
                let v = self.encode("disc.local", steps);
                sigmoid(self.mlp("disc.local.clf", 2, Act::Tanh, Act::None, &v)[0])
            })
            .collect()
    }

    pub fn global_scores(&self, scene: &SceneSample, futures: &[[Point; PRED_LEN]]) -> Vec<f64> {
        let vs: Mat = Self::full_steps(scene, futures)
            .iter()
            .map(|s| self.encode("disc.global", s))
            .collect();
        let cs = self.gat_stack("disc.global.gat", self.cfg.gat_layers, &vs, self.cfg.leaky_slope);
        let cells = self.cnn("disc.global.cnn", &self.scene_grid(scene));
        (0..vs.len())
            .map(|i| {
                let cp = self.physical("disc.global.att_p", &cells, &vs[i]);
                let joint: Vec<f64> = vs[i].iter().chain(&cs[i]).chain(&cp).copied().collect();
                sigmoid(self.mlp("disc.global.clf", 2, Act::Tanh, Act::None, &joint)[0])
            })
            .collect()
    }

    /// Per-pedestrian heads before pooling.
    pub fn latent_heads(&self, scene: &SceneSample, futures: &[[Point; PRED_LEN]]) -> (Mat, Mat) {
        let mut means = Vec::new();
        let mut log_vars = Vec::new();
        for steps in Self::full_steps(scene, futures) {
            let v = self.encode("enc", &steps[OBS_LEN..]);
            let t = self.mlp("enc.mlp_l", 1, Act::Tanh, Act::Tanh, &v);
            means.push(self.mlp("enc.mlp_mu", 1, Act::None, Act::None, &t));
            log_vars.push(self.mlp("enc.mlp_sigma", 1, Act::None, Act::None, &t));
        }
        (means, log_vars)
    }
}

pub fn receptive_field(cfg: &ModelConfig) -> usize {
    cfg.cnn_channels
        .iter()
        .fold(1, |r, _| (r - 1) * cfg.cnn_stride + cfg.cnn_kernel)
}

pub fn elementwise_max(rows: &Mat) -> Vec<f64> {
    (0..rows[0].len())
        .map(|k| rows.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Overwrites every parameter with uniform draws in `[-scale, scale]`, biases included.
pub fn randomize(store: &mut ParameterStore<f64>, seed: u64, scale: f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = store.names().map(String::from).collect();
    for name in names {
        let shape = store.value(&name).unwrap().shape().to_vec();
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..=scale)).collect();
        store
            .set_value(&name, social_bigat::autodiff::Tensor::new(shape, data).unwrap())
            .unwrap();
    }
}

/// Scene of `n` pedestrians on gently curving paths, deterministic in `seed`.
pub fn toy_scene(n: usize, seed: u64) -> SceneSample {
    use rand::{Rng, SeedableRng};
    use social_bigat::model::TrajectoryWindow;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let peds = (0..n)
        .map(|i| {
            let start = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let v = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let curve = rng.gen_range(-0.02..0.02);
            let pts: Vec<Point> = (0..OBS_LEN + PRED_LEN)
                .map(|t| {
                    let t = t as f64;
                    [start[0] + v[0] * t + curve * t * t, start[1] + v[1] * t - curve * t * t]
                })
                .collect();
            TrajectoryWindow::from_positions(i as i64, &pts).unwrap()
        })
        .collect();
    SceneSample::new("toy", peds, None).unwrap()
}
