use std::collections::HashSet;
use std::fmt::Write as _;

use crate::autodiff::ParameterStore;
use crate::data::{passing_side, PassingSide};
use crate::error::{Error, Result};
use crate::model::{LatentCode, Point, SceneSample, SocialBiGat, OBS_LEN, PRED_LEN};
use crate::scalar::Scalar;

/// One exported position: sample `z_index`, pedestrian `ped_id`, window timestep `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub z_index: usize,
    pub ped_id: i64,
    pub t: usize,
    pub x: f64,
    pub y: f64,
}

pub const TRAJECTORY_CSV_HEADER: &str = "z_index,ped_id,t,x,y";

/// `count` codes evenly spaced on `[-span, span]` along one latent axis, zero elsewhere.
pub fn axis_grid(dim: usize, axis: usize, count: usize, span: f64) -> Result<Vec<LatentCode>> {
    if axis >= dim || count == 0 {
        return Err(Error::Config(format!("sweep axis {axis} of {dim}, {count} points")));
    }
    Ok((0..count)
        .map(|i| {
            let mut z = vec![0.0; dim];
            z[axis] = if count == 1 { 0.0 } else { -span + 2.0 * span * i as f64 / (count - 1) as f64 };
            LatentCode(z)
        })
        .collect())
}

/// Generator output for each code, as rows ordered by code, pedestrian, time.
/// Timesteps count from the start of the window, so futures run `OBS_LEN..`.
pub fn latent_sweep<T: Scalar>(
    model: &SocialBiGat,
    store: &ParameterStore<T>,
    scene: &SceneSample,
    codes: &[LatentCode],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(codes.len() * scene.len() * PRED_LEN);
    for (zi, z) in codes.iter().enumerate() {
        let pred = model.predict(store, scene, z)?;
        for (ped, fut) in scene.pedestrians.iter().zip(&pred.futures) {
            for (k, p) in fut.iter().enumerate() {
                rows.push(SweepRow {
                    z_index: zi,
                    ped_id: ped.pedestrian_id,
                    t: OBS_LEN + k,
                    x: p[0],
                    y: p[1],
                });
            }
        }
    }
    Ok(rows)
}

pub fn trajectory_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{TRAJECTORY_CSV_HEADER}\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.z_index, r.ped_id, r.t, r.x, r.y).expect("write to string");
    }
    s
}

/// Sides taken by pedestrian `ped` across the given sampled futures.
pub fn passing_sides(scene: &SceneSample, ped: usize, samples: &[Vec<[Point; PRED_LEN]>]) -> HashSet<PassingSide> {
    let window = &scene.pedestrians[ped];
    samples
        .iter()
        .filter_map(|s| passing_side(window, &s[ped]))
        .collect()
}

/// Observed paths solid, generated paths dashed, one colour per pedestrian.
pub fn sweep_svg(scene: &SceneSample, rows: &[SweepRow]) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 20.0;
    const COLOURS: [&str; 6] = ["#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#2c3e50"];
    let mut pts: Vec<Point> = scene.pedestrians.iter().flat_map(|p| p.observed).collect();
    pts.extend(rows.iter().map(|r| [r.x, r.y]));
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6);
    let scale = (SIZE - 2.0 * PAD) / extent;
    let map = |p: Point| (PAD + (p[0] - lo[0]) * scale, SIZE - PAD - (p[1] - lo[1]) * scale);
    let polyline = |points: &[Point], colour: &str, dashed: bool| {
        let coords: Vec<String> = points
            .iter()
            .map(|p| {
                let (x, y) = map(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let dash = if dashed { " stroke-dasharray=\"4 3\"" } else { "" };
        format!(
            "  <polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
            coords.join(" ")
        )
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    );
    for (i, ped) in scene.pedestrians.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        svg.push_str(&polyline(&ped.observed, colour, false));
        let zs: std::collections::BTreeSet<usize> = rows.iter().map(|r| r.z_index).collect();
        for z in zs {
            let mut path = vec![ped.last_observed()];
            path.extend(
                rows.iter()
                    .filter(|r| r.z_index == z && r.ped_id == ped.pedestrian_id)
                    .map(|r| [r.x, r.y]),
            );
            if path.len() > 1 {
                svg.push_str(&polyline(&path, colour, true));
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}
