use rand::Rng;

use super::grid::FeatureGrid;
use super::{glorot, init_uniform};
use crate::autodiff::{Graph, ParameterStore, Tensor, Value};

/// Small positive bias keeps fresh units off the relu kink.
const BIAS_INIT: f64 = 0.01;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Stack of valid (unpadded) strided convolutions with ReLU after each layer.
///
/// Each layer gathers its receptive patches into rows and multiplies by a
/// `[kernel * kernel * in_channels, out_channels]` weight; row index of the
/// weight is `(ky * kernel + kx) * in_channels + channel`. The output is the
/// final feature map flattened to `[cells, channels]`.
#[derive(Clone, Debug)]
pub struct GridCnn {
    prefix: String,
    in_channels: usize,
    convs: Vec<ConvSpec>,
}

impl GridCnn {
    pub fn new(prefix: impl Into<String>, in_channels: usize, convs: Vec<ConvSpec>) -> Result<Self> {
        if in_channels == 0 || convs.is_empty() {
            return Err(Error::Config("cnn needs input channels and at least one layer".into()));
        }
        if convs.iter().any(|c| c.out_channels == 0 || c.kernel == 0 || c.stride == 0) {
            return Err(Error::Config("cnn layer sizes must be positive".into()));
        }
        Ok(GridCnn {
            prefix: prefix.into(),
            in_channels,
            convs,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn output_channels(&self) -> usize {
        self.convs.last().unwrap().out_channels
    }

    /// Smallest square grid side that yields at least one output cell.
    pub fn receptive_field(&self) -> usize {
        self.convs
            .iter()
            .rev()
            .fold(1, |r, c| (r - 1) * c.stride + c.kernel)
    }

    pub fn weight_name(&self, layer: usize) -> String {
        format!("{}.conv{layer}.w", self.prefix)
    }

    pub fn bias_name(&self, layer: usize) -> String {
        format!("{}.conv{layer}.b", self.prefix)
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        let mut cin = self.in_channels;
        for (k, c) in self.convs.iter().enumerate() {
            let fan_in = c.kernel * c.kernel * cin;
            init_uniform(store, self.weight_name(k), vec![fan_in, c.out_channels], glorot(fan_in, c.out_channels), rng)?;
            store.insert(self.bias_name(k), Tensor::filled(vec![c.out_channels], T::lit(BIAS_INIT)))?;
            cin = c.out_channels;
        }
        Ok(())
    }

    pub fn forward<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        grid: &FeatureGrid,
    ) -> Result<Value<'g, T>> {
        if grid.channels() != self.in_channels {
            return Err(Error::dim("grid_cnn", &[grid.channels()], &[self.in_channels]));
        }
        let mut x = g.constant(grid.to_tensor());
        let (mut h, mut w, mut cin) = (grid.height(), grid.width(), grid.channels());
        for (layer, c) in self.convs.iter().enumerate() {
            if h < c.kernel || w < c.kernel {
                return Err(Error::dim("grid_cnn", &[h, w], &[c.kernel, c.kernel]));
            }
            let oh = (h - c.kernel) / c.stride + 1;
            let ow = (w - c.kernel) / c.stride + 1;
            let mut idx = Vec::with_capacity(oh * ow * c.kernel * c.kernel);
            for oy in 0..oh {
                for ox in 0..ow {
                    for ky in 0..c.kernel {
                        for kx in 0..c.kernel {
                            idx.push((oy * c.stride + ky) * w + ox * c.stride + kx);
                        }
                    }
                }
            }
            let patches = x
                .gather_rows(&idx)?
                .reshape(&[oh * ow, c.kernel * c.kernel * cin])?;
            x = patches
                .matmul(g.param(store, &self.weight_name(layer))?)?
                .add(g.param(store, &self.bias_name(layer))?)?
                .relu()?;
            (h, w, cin) = (oh, ow, c.out_channels);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_cnn() -> GridCnn {
        GridCnn::new(
            "cnn",
            1,
            vec![
                ConvSpec { out_channels: 8, kernel: 3, stride: 2 },
                ConvSpec { out_channels: 16, kernel: 3, stride: 2 },
            ],
        )
        .unwrap()
    }

    fn zero_biases(store: &mut ParameterStore<f64>, layers: usize) {
        for k in 0..layers {
            let name = format!("cnn.conv{k}.b");
            let shape = store.value(&name).unwrap().shape().to_vec();
            store.set_value(&name, Tensor::zeros(shape)).unwrap();
        }
    }

    #[test]
    fn fresh_biases_are_small_and_positive() {
        let mut store = ParameterStore::<f64>::new();
        default_cnn().init(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(store.value("cnn.conv1.b").unwrap().data().iter().all(|&b| b == BIAS_INIT));
    }

    #[test]
    fn zero_grid_gives_zero_features() {
        let cnn = default_cnn();
        let mut store = ParameterStore::<f64>::new();
        cnn.init(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        zero_biases(&mut store, 2);
        let g = Graph::new();
        let out = cnn.forward(&g, &store, &FeatureGrid::zeros(8, 8, 1)).unwrap();
        assert_eq!(out.shape(), vec![1, 16]);
        assert!(out.to_vec().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identity_one_by_one_kernels_downsample() {
        let cnn = GridCnn::new(
            "cnn",
            1,
            vec![
                ConvSpec { out_channels: 1, kernel: 1, stride: 2 },
                ConvSpec { out_channels: 1, kernel: 1, stride: 2 },
            ],
        )
        .unwrap();
        let mut store = ParameterStore::<f64>::new();
        cnn.init(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        store.set_value("cnn.conv0.w", Tensor::ones(vec![1, 1])).unwrap();
        store.set_value("cnn.conv1.w", Tensor::ones(vec![1, 1])).unwrap();
        zero_biases(&mut store, 2);
        let cells: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let grid = FeatureGrid::new(8, 8, 1, cells, (0.0, 0.0), 1.0).unwrap();
        let g = Graph::new();
        let out = cnn.forward(&g, &store, &grid).unwrap();
        // every fourth row and column: rows/cols 0 and 4
        assert_eq!(out.to_vec(), vec![0.0, 4.0, 32.0, 36.0]);
    }

    #[test]
    fn receptive_field_and_small_grid() {
        let cnn = default_cnn();
        assert_eq!(cnn.receptive_field(), 7);
        let mut store = ParameterStore::<f64>::new();
        cnn.init(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let g = Graph::new();
        assert!(matches!(
            cnn.forward(&g, &store, &FeatureGrid::zeros(6, 6, 1)),
            Err(Error::Dimension { .. })
        ));
        assert!(cnn.forward(&g, &store, &FeatureGrid::zeros(7, 7, 1)).is_ok());
    }
}
