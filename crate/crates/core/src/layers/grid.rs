use std::fmt::Write as _;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rasterized scene features, `height x width x channels`, row-major.
///
/// Text form: a header line `GRID H W C origin_x origin_y cell_size` followed by
/// `H*W*C` whitespace-separated values.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    channels: usize,
    cells: Vec<f64>,
    /// World coordinates in meters of cell (0, 0).
    pub origin: (f64, f64),
    /// Meters per cell.
    pub cell_size: f64,
}

impl FeatureGrid {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        cells: Vec<f64>,
        origin: (f64, f64),
        cell_size: f64,
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        if !(cell_size > 0.0) {
            return Err(Error::Config(format!("grid cell size {cell_size} must be positive")));
        }
        if cells.len() != height * width * channels {
            return Err(Error::dim("grid", &[height, width, channels], &[cells.len()]));
        }
        if cells.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("grid values must be finite".into()));
        }
        Ok(FeatureGrid {
            height,
            width,
            channels,
            cells,
            origin,
            cell_size,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::new(height, width, channels, vec![0.0; height * width * channels], (0.0, 0.0), 1.0)
            .expect("positive dims")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.cells[(row * self.width + col) * self.channels + channel]
    }

    /// Cells as rows: `[height * width, channels]`.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        Tensor::from_f64(vec![self.height * self.width, self.channels], &self.cells).expect("grid shape")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty grid file".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "GRID" {
            return Err(Error::Parse {
                line: hline + 1,
                message: "expected `GRID H W C origin_x origin_y cell_size`".into(),
            });
        }
        let bad = |what: &str| Error::Parse {
            line: hline + 1,
            message: format!("invalid {what}"),
        };
        let dim = |s: &str, what: &str| s.parse::<usize>().map_err(|_| bad(what));
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
        let (h, w, c) = (dim(fields[1], "H")?, dim(fields[2], "W")?, dim(fields[3], "C")?);
        let origin = (num(fields[4], "origin_x")?, num(fields[5], "origin_y")?);
        let cell_size = num(fields[6], "cell_size")?;

        let mut cells = Vec::with_capacity(h * w * c);
        for (idx, line) in lines {
            for tok in line.split_whitespace() {
                let v = tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("non-numeric grid value `{tok}`"),
                })?;
                cells.push(v);
            }
        }
        if cells.len() != h * w * c {
            return Err(Error::Parse {
                line: hline + 1,
                message: format!("header declares {} values, found {}", h * w * c, cells.len()),
            });
        }
        Self::new(h, w, c, cells, origin, cell_size)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        std::fs::read_to_string(path)
            .map_err(Error::from)
            .and_then(|t| Self::parse(&t))
            .map_err(|e| e.at_path(path))
    }

    /// Text form; one grid row per line.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "GRID {} {} {} {} {} {}\n",
            self.height, self.width, self.channels, self.origin.0, self.origin.1, self.cell_size
        );
        for row in self.cells.chunks(self.width * self.channels) {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let g = FeatureGrid::new(2, 3, 2, (0..12).map(|i| i as f64 * 0.5 - 1.0).collect(), (-3.5, 2.0), 0.25)
            .unwrap();
        assert_eq!(FeatureGrid::parse(&g.to_text()).unwrap(), g);
        assert_eq!(g.get(1, 2, 1), g.cells()[11]);
    }

    #[test]
    fn malformed_grids_rejected() {
        assert!(FeatureGrid::parse("GRID 1 1 1 0 0 1\n1 2\n").is_err());
        assert!(FeatureGrid::parse("GRID 1 1 1 0 0 0\n1\n").is_err());
        let err = FeatureGrid::parse("GRID 1 2 1 0 0 1\n1\nx\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(FeatureGrid::parse("").is_err());
    }
}
