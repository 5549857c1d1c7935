use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::tracks::load_tracks;
use super::windows::build_windows;
use crate::error::{Error, Result};
use crate::layers::FeatureGrid;
use crate::model::SceneSample;

/// The five benchmark scene sets, in the usual reporting order.
pub const SCENE_NAMES: [&str; 5] = ["eth", "hotel", "univ", "zara1", "zara2"];

fn check_name(held_out: &str) -> Result<()> {
    if SCENE_NAMES.contains(&held_out) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unknown held-out scene `{held_out}`; expected one of {}",
            SCENE_NAMES.join(", ")
        )))
    }
}

/// Training and test scenes for one hold-one-out fold.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub held_out: String,
    pub train: Vec<SceneSample>,
    pub test: Vec<SceneSample>,
}

/// Tests on `held_out`, trains on the other four sets. `sets` must hold
/// exactly the five scene names.
pub fn hold_one_out_split(sets: &BTreeMap<String, Vec<SceneSample>>, held_out: &str) -> Result<DatasetSplit> {
    check_name(held_out)?;
    for name in SCENE_NAMES {
        if !sets.contains_key(name) {
            return Err(Error::Config(format!("scene set `{name}` missing")));
        }
    }
    if let Some(extra) = sets.keys().find(|k| !SCENE_NAMES.contains(&k.as_str())) {
        return Err(Error::Config(format!("unexpected scene set `{extra}`")));
    }
    let mut split = DatasetSplit {
        held_out: held_out.to_string(),
        train: Vec::new(),
        test: Vec::new(),
    };
    for name in SCENE_NAMES {
        let scenes = sets[name].iter().cloned();
        if name == held_out {
            split.test.extend(scenes);
        } else {
            split.train.extend(scenes);
        }
    }
    Ok(split)
}

/// Lists of track files on each side of a split.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitManifest {
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

impl SplitManifest {
    /// Manifest for holding out `held_out`, where `dir` holds `<name>.txt` per scene set.
    pub fn hold_one_out(dir: impl AsRef<Path>, held_out: &str) -> Result<Self> {
        check_name(held_out)?;
        let mut m = SplitManifest::default();
        for name in SCENE_NAMES {
            let path = dir.as_ref().join(format!("{name}.txt"));
            if name == held_out {
                m.test.push(path);
            } else {
                m.train.push(path);
            }
        }
        Ok(m)
    }

    /// Reads `train:` / `test:` sections with one path per line. Relative paths
    /// are kept as written.
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = SplitManifest::default();
        let mut section: Option<bool> = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "train:" => section = Some(true),
                "test:" => section = Some(false),
                path => match section {
                    Some(true) => m.train.push(PathBuf::from(path)),
                    Some(false) => m.test.push(PathBuf::from(path)),
                    None => {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: "path before any `train:` or `test:` header".into(),
                        })
                    }
                },
            }
        }
        if let Some(p) = m.train.iter().find(|p| m.test.contains(p)) {
            return Err(Error::Config(format!("{} listed on both sides of the split", p.display())));
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        std::fs::read_to_string(path)
            .map_err(Error::from)
            .and_then(|t| Self::parse(&t))
            .map_err(|e| e.at_path(path))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("train:\n");
        for p in &self.train {
            writeln!(s, "{}", p.display()).expect("write to string");
        }
        s.push_str("test:\n");
        for p in &self.test {
            writeln!(s, "{}", p.display()).expect("write to string");
        }
        s
    }

    /// Loads and windows every listed file. Paths are resolved against `base`
    /// when relative.
    pub fn load_scenes(&self, base: impl AsRef<Path>, stride: usize) -> Result<(Vec<SceneSample>, Vec<SceneSample>)> {
        let load = |paths: &[PathBuf]| -> Result<Vec<SceneSample>> {
            let mut all = Vec::new();
            for p in paths {
                let p = if p.is_relative() { base.as_ref().join(p) } else { p.clone() };
                all.extend(load_scene_file(&p, stride)?);
            }
            Ok(all)
        };
        Ok((load(&self.train)?, load(&self.test)?))
    }
}

/// Windows of one track file. A sibling file with extension `grid`
/// (`eth.txt` -> `eth.grid`) supplies the scene grid when present.
pub fn load_scene_file(path: impl AsRef<Path>, stride: usize) -> Result<Vec<SceneSample>> {
    let path = path.as_ref();
    let rows = load_tracks(path)?;
    let grid_path = path.with_extension("grid");
    let grid = if grid_path.exists() { Some(FeatureGrid::load(&grid_path)?) } else { None };
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    build_windows(&rows, &id, stride, grid.as_ref())
}
