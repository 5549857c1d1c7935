use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::tracks::RawTrackRow;
use super::windows::WINDOW_LEN;
use crate::error::{Error, Result};
use crate::model::{Point, SceneSample, TrajectoryWindow, OBS_LEN, TIMESTEP};

/// Frame id increment between consecutive positions in emitted files.
pub const FRAME_STEP: i64 = 10;
/// Frame ids reserved per synthetic scene; scenes never share a window.
pub const FRAMES_PER_SCENE: i64 = 40 * FRAME_STEP;
/// Pedestrian ids reserved per synthetic scene.
pub const IDS_PER_SCENE: i64 = 1000;

/// Future index at which the bimodal detour peaks and sides are judged.
pub const MIDPOINT: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthKind {
    ConstantVelocity,
    SocialForces,
    BimodalAvoidance,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant-velocity" => Ok(SynthKind::ConstantVelocity),
            "social-forces" => Ok(SynthKind::SocialForces),
            "bimodal-avoidance" => Ok(SynthKind::BimodalAvoidance),
            other => Err(Error::Config(format!(
                "unknown synthetic kind `{other}` (constant-velocity, social-forces, bimodal-avoidance)"
            ))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::ConstantVelocity => "constant-velocity",
            SynthKind::SocialForces => "social-forces",
            SynthKind::BimodalAvoidance => "bimodal-avoidance",
        })
    }
}

/// Which side of its observed heading a pedestrian passes on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PassingSide {
    Left,
    Right,
}

/// What to generate. `noise` is the standard deviation, in meters per step, of
/// a per-pedestrian perturbation of its velocity; paths stay smooth.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub scenes: usize,
    pub min_peds: usize,
    pub max_peds: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, scenes: usize, seed: u64) -> Self {
        let (min_peds, max_peds) = match kind {
            SynthKind::ConstantVelocity => (1, 4),
            SynthKind::SocialForces => (2, 5),
            SynthKind::BimodalAvoidance => (2, 2),
        };
        SynthSpec {
            kind,
            scenes,
            min_peds,
            max_peds,
            noise: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_peds == 0 || self.min_peds > self.max_peds || self.max_peds as i64 >= IDS_PER_SCENE {
            return Err(Error::Config(format!(
                "pedestrian range {}..={} invalid",
                self.min_peds, self.max_peds
            )));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::Config(format!("noise {} must be finite and nonnegative", self.noise)));
        }
        Ok(())
    }
}

/// Generated scenes, the same data as track rows, and for the bimodal kind the
/// side taken by each scene's scripted pedestrian (always index 0).
#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutput {
    pub scenes: Vec<SceneSample>,
    pub rows: Vec<RawTrackRow>,
    pub modes: Vec<Option<PassingSide>>,
}

fn normal2<R: Rng>(rng: &mut R, sd: f64) -> Point {
    [sd * rng.sample::<f64, _>(StandardNormal), sd * rng.sample::<f64, _>(StandardNormal)]
}

fn constant_velocity<R: Rng>(rng: &mut R, n: usize, noise: f64) -> Vec<Vec<Point>> {
    (0..n)
        .map(|_| {
            let start = [rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)];
            let heading = rng.gen_range(-PI..PI);
            let speed = rng.gen_range(0.2..0.6);
            let jitter = normal2(rng, noise);
            let v = [speed * heading.cos() + jitter[0], speed * heading.sin() + jitter[1]];
            (0..WINDOW_LEN)
                .map(|t| [start[0] + v[0] * t as f64, start[1] + v[1] * t as f64])
                .collect()
        })
        .collect()
}

/// Goal attraction plus exponential pairwise repulsion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SocialForceParams {
    pub relaxation: f64,
    pub strength: f64,
    pub range: f64,
    pub radius: f64,
    pub substeps: usize,
}

impl Default for SocialForceParams {
    fn default() -> Self {
        SocialForceParams {
            relaxation: 0.5,
            strength: 2.1,
            range: 0.3,
            radius: 0.6,
            substeps: 8,
        }
    }
}

/// Integrates pedestrians from `starts` towards `goals` at preferred speeds
/// (m/s), recording `steps` positions spaced by the sampling interval.
pub fn social_forces_rollout(
    starts: &[Point],
    goals: &[Point],
    speeds: &[f64],
    steps: usize,
    params: &SocialForceParams,
) -> Vec<Vec<Point>> {
    let n = starts.len();
    let dt = TIMESTEP / params.substeps as f64;
    let mut pos = starts.to_vec();
    let desired = |p: Point, i: usize| -> Point {
        let d = [goals[i][0] - p[0], goals[i][1] - p[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if len < 1e-9 {
            [0.0, 0.0]
        } else {
            let s = speeds[i] * (len / 0.5).min(1.0);
            [s * d[0] / len, s * d[1] / len]
        }
    };
    let mut vel: Vec<Point> = (0..n).map(|i| desired(pos[i], i)).collect();
    let mut out: Vec<Vec<Point>> = pos.iter().map(|p| vec![*p]).collect();
    for _ in 1..steps {
        for _ in 0..params.substeps {
            let mut acc = vec![[0.0; 2]; n];
            for i in 0..n {
                let want = desired(pos[i], i);
                acc[i][0] += (want[0] - vel[i][0]) / params.relaxation;
                acc[i][1] += (want[1] - vel[i][1]) / params.relaxation;
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let d = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]];
                    let dist = (d[0] * d[0] + d[1] * d[1]).sqrt().max(1e-6);
                    let f = params.strength * ((params.radius - dist) / params.range).exp();
                    acc[i][0] += f * d[0] / dist;
                    acc[i][1] += f * d[1] / dist;
                }
            }
            for i in 0..n {
                vel[i][0] += dt * acc[i][0];
                vel[i][1] += dt * acc[i][1];
                let speed = (vel[i][0] * vel[i][0] + vel[i][1] * vel[i][1]).sqrt();
                let cap = 1.3 * speeds[i];
                if speed > cap {
                    vel[i] = [vel[i][0] * cap / speed, vel[i][1] * cap / speed];
                }
                pos[i][0] += dt * vel[i][0];
                pos[i][1] += dt * vel[i][1];
            }
        }
        for (track, p) in out.iter_mut().zip(&pos) {
            track.push(*p);
        }
    }
    out
}

fn social_forces<R: Rng>(rng: &mut R, n: usize, noise: f64) -> Vec<Vec<Point>> {
    let mut starts = Vec::with_capacity(n);
    let mut goals = Vec::with_capacity(n);
    let mut speeds = Vec::with_capacity(n);
    for _ in 0..n {
        let angle = rng.gen_range(-PI..PI);
        let radius = rng.gen_range(4.0..6.0);
        // a goal shift of this size tilts the mean velocity by about `noise` per step
        let jitter = normal2(rng, noise * WINDOW_LEN as f64);
        starts.push([radius * angle.cos(), radius * angle.sin()]);
        goals.push([-radius * angle.cos() + jitter[0], -radius * angle.sin() + jitter[1]]);
        speeds.push(rng.gen_range(1.0..1.4));
    }
    social_forces_rollout(&starts, &goals, &speeds, WINDOW_LEN, &SocialForceParams::default())
}

/// Two pedestrians approach head-on along the x axis and would meet near the
/// middle of the predicted window. The first keeps a straight past, then
/// swerves about 0.8 m to one side and returns; the second walks straight.
fn bimodal<R: Rng>(rng: &mut R, noise: f64) -> (Vec<Vec<Point>>, PassingSide) {
    let speed = rng.gen_range(0.3..0.5);
    let meet = (OBS_LEN + MIDPOINT) as f64 + 0.5;
    let origin = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
    let side = if rng.gen_bool(0.5) { PassingSide::Left } else { PassingSide::Right };
    let sign = if side == PassingSide::Left { 1.0 } else { -1.0 };
    let amplitude = 0.8 * sign;
    let gap = rng.gen_range(-0.1..0.1);
    let ja = normal2(rng, noise);
    let jb = normal2(rng, noise);
    let last_obs = (OBS_LEN - 1) as f64;
    let span = (WINDOW_LEN - OBS_LEN) as f64;
    let walker: Vec<Point> = (0..WINDOW_LEN)
        .map(|t| {
            let t = t as f64;
            let detour = if t > last_obs { amplitude * (PI * (t - last_obs) / span).sin() } else { 0.0 };
            [
                origin[0] - speed * meet + (speed + ja[0]) * t,
                origin[1] + ja[1] * t + detour,
            ]
        })
        .collect();
    let oncoming: Vec<Point> = (0..WINDOW_LEN)
        .map(|t| {
            let t = t as f64;
            [origin[0] + speed * meet - (speed + jb[0]) * t, origin[1] + gap + jb[1] * t]
        })
        .collect();
    (vec![walker, oncoming], side)
}

/// Generates `spec.scenes` scenes. Output is a pure function of the spec.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = SynthOutput {
        scenes: Vec::with_capacity(spec.scenes),
        rows: Vec::new(),
        modes: Vec::with_capacity(spec.scenes),
    };
    for k in 0..spec.scenes {
        let n = rng.gen_range(spec.min_peds..=spec.max_peds);
        let (tracks, mode) = match spec.kind {
            SynthKind::ConstantVelocity => (constant_velocity(&mut rng, n, spec.noise), None),
            SynthKind::SocialForces => (social_forces(&mut rng, n, spec.noise), None),
            SynthKind::BimodalAvoidance => {
                let (t, side) = bimodal(&mut rng, spec.noise);
                (t, Some(side))
            }
        };
        let base_frame = k as i64 * FRAMES_PER_SCENE;
        let base_id = k as i64 * IDS_PER_SCENE;
        let mut windows = Vec::with_capacity(tracks.len());
        for (i, track) in tracks.iter().enumerate() {
            let id = base_id + i as i64;
            windows.push(TrajectoryWindow::from_positions(id, track)?);
            for (t, p) in track.iter().enumerate() {
                out.rows.push(RawTrackRow {
                    frame: base_frame + t as i64 * FRAME_STEP,
                    ped: id,
                    x: p[0],
                    y: p[1],
                });
            }
        }
        out.scenes.push(SceneSample::new(format!("{}-{k}", spec.kind), windows, None)?);
        out.modes.push(mode);
    }
    out.rows.sort_by_key(|r| (r.frame, r.ped));
    Ok(out)
}

/// Signed lateral offset of `point` from the last observed position, measured
/// perpendicular to the observed heading; positive is to the left.
pub fn lateral_offset(window: &TrajectoryWindow, point: Point) -> f64 {
    let last = window.last_observed();
    let first = window.observed[0];
    let h = [last[0] - first[0], last[1] - first[1]];
    let len = (h[0] * h[0] + h[1] * h[1]).sqrt();
    if len < 1e-9 {
        return 0.0;
    }
    let d = [point[0] - last[0], point[1] - last[1]];
    (h[0] * d[1] - h[1] * d[0]) / len
}

/// Side implied by the sign of the lateral offset at the midpoint of `future`.
pub fn passing_side(window: &TrajectoryWindow, future: &[Point]) -> Option<PassingSide> {
    let off = lateral_offset(window, future[MIDPOINT]);
    if off > 0.0 {
        Some(PassingSide::Left)
    } else if off < 0.0 {
        Some(PassingSide::Right)
    } else {
        None
    }
}
