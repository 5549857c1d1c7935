use std::collections::{BTreeMap, BTreeSet};

use super::tracks::RawTrackRow;
use crate::error::Result;
use crate::layers::FeatureGrid;
use crate::model::{displacements, Point, SceneSample, TrajectoryWindow, OBS_LEN, PRED_LEN};

/// Frames per window.
pub const WINDOW_LEN: usize = OBS_LEN + PRED_LEN;

/// Smallest positive gap between distinct frame ids, if any.
pub fn frame_step(rows: &[RawTrackRow]) -> Option<i64> {
    let frames: BTreeSet<i64> = rows.iter().map(|r| r.frame).collect();
    frames
        .iter()
        .zip(frames.iter().skip(1))
        .map(|(a, b)| b - a)
        .min()
}

/// Sliding windows of `WINDOW_LEN` frames spaced by the file's frame step.
///
/// Windows start at every `stride`-th distinct frame. A pedestrian joins a
/// window only if present in all of its frames; windows with nobody are dropped.
pub fn build_windows(
    rows: &[RawTrackRow],
    scene_id: &str,
    stride: usize,
    grid: Option<&FeatureGrid>,
) -> Result<Vec<SceneSample>> {
    let Some(step) = frame_step(rows) else {
        return Ok(Vec::new());
    };
    let stride = stride.max(1);
    let mut by_frame: BTreeMap<i64, BTreeMap<i64, Point>> = BTreeMap::new();
    for r in rows {
        by_frame.entry(r.frame).or_default().insert(r.ped, [r.x, r.y]);
    }
    let starts: Vec<i64> = by_frame.keys().copied().collect();
    let mut scenes = Vec::new();
    for &start in starts.iter().step_by(stride) {
        let frames: Vec<i64> = (0..WINDOW_LEN as i64).map(|k| start + k * step).collect();
        let Some(first) = by_frame.get(&start) else { continue };
        let mut pedestrians = Vec::new();
        for &ped in first.keys() {
            let track: Option<Vec<Point>> = frames
                .iter()
                .map(|f| by_frame.get(f).and_then(|m| m.get(&ped)).copied())
                .collect();
            if let Some(track) = track {
                pedestrians.push(TrajectoryWindow::from_positions(ped, &track)?);
            }
        }
        if !pedestrians.is_empty() {
            scenes.push(SceneSample::new(format!("{scene_id}@{start}"), pedestrians, grid.cloned())?);
        }
    }
    Ok(scenes)
}

/// Per-step displacements of the whole window; the first is `(0, 0)`.
pub fn to_displacements(window: &TrajectoryWindow) -> Vec<Point> {
    displacements(&window.positions())
}
