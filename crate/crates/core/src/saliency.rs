//! Where a rebuild changed the pressure, and which pixels drive the
//! classifier's healthy score.

use crate::classifier::ClassifierModel;
use crate::error::{Error, Result};
use crate::nn::{BackwardOptions, Gradients, LayerSpec, Network, Tensor};
use crate::preprocess::{denormalize, Label, PressureImage};
use crate::{IMAGE_COLS, IMAGE_LEN, IMAGE_ROWS};

/// Signed `rebuilt - original` difference; positive means added pressure.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffHeatmap {
    pub grid: Vec<f64>,
    /// The same difference in sensor units.
    pub absolute: Vec<f64>,
}

pub fn diff_heatmap(original: &PressureImage, rebuilt: &PressureImage) -> Result<DiffHeatmap> {
    if original.grid().len() != rebuilt.grid().len() {
        return Err(Error::Shape("heatmap inputs differ in size".into()));
    }
    let grid = rebuilt.grid().iter().zip(original.grid()).map(|(r, o)| r - o).collect();
    // Each image is restored with its own extrema before subtracting.
    let absolute = denormalize(rebuilt)
        .data
        .iter()
        .zip(&denormalize(original).data)
        .map(|(r, o)| r - o)
        .collect();
    Ok(DiffHeatmap { grid, absolute })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    pub grid: Vec<f64>,
    /// Class whose score was differentiated.
    pub target: Label,
}

/// Gradient of a network's logit with respect to its input.
///
/// The logit is the input of a trailing sigmoid, or the output itself when
/// the network does not end in one. With `guided`, negative backward
/// signal is dropped at every ReLU-family layer.
pub fn input_gradient(net: &Network, input: &Tensor, guided: bool, trace: bool) -> Result<Gradients> {
    let cache = net.forward(input)?;
    let top = match net.layers().last() {
        Some(LayerSpec::Sigmoid) => net.layers().len() - 1,
        _ => net.layers().len(),
    };
    let upstream = Tensor::filled(cache.activations[top].shape(), 1.0);
    net.backward_from(
        &cache,
        top,
        &upstream,
        BackwardOptions {
            param_grads: false,
            input_grad: true,
            guided,
            trace,
        },
    )
}

/// Guided-backpropagation saliency of the healthy logit.
pub fn guided_backprop(model: &ClassifierModel, img: &PressureImage) -> Result<SaliencyMap> {
    if !model.is_trained() {
        return Err(Error::Untrained);
    }
    let x = Tensor::new(vec![1, 1, IMAGE_ROWS, IMAGE_COLS], img.grid().to_vec())?;
    let grads = input_gradient(model.network(), &x, true, false)?;
    Ok(SaliencyMap {
        grid: grads.input.expect("input gradient requested").into_data(),
        target: Label::Healthy,
    })
}

/// Row bands as fractions of the image height, top (toes) to bottom (heel).
pub const REGION_BANDS: [(&str, f64, f64); 4] = [
    ("toes", 0.0, 0.15),
    ("forefoot", 0.15, 0.45),
    ("midfoot", 0.45, 0.75),
    ("heel", 0.75, 1.0),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionStats {
    pub toes: f64,
    pub forefoot: f64,
    pub midfoot: f64,
    pub heel: f64,
}

impl RegionStats {
    pub fn as_array(&self) -> [f64; 4] {
        [self.toes, self.forefoot, self.midfoot, self.heel]
    }
}

/// Rows `[lo, hi)` covered by each band.
pub fn band_rows() -> [(usize, usize); 4] {
    let edge = |f: f64| ((f * IMAGE_ROWS as f64).ceil() as usize).min(IMAGE_ROWS);
    REGION_BANDS.map(|(_, lo, hi)| (edge(lo), edge(hi)))
}

/// Mean change in each band.
pub fn region_stats(diff: &DiffHeatmap) -> RegionStats {
    debug_assert_eq!(diff.grid.len(), IMAGE_LEN);
    let means = band_rows().map(|(lo, hi)| {
        let band = &diff.grid[lo * IMAGE_COLS..hi * IMAGE_COLS];
        band.iter().sum::<f64>() / band.len() as f64
    });
    RegionStats {
        toes: means[0],
        forefoot: means[1],
        midfoot: means[2],
        heel: means[3],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{Aggregation, FootSide, ImageMeta};

    fn img(v: f64) -> PressureImage {
        PressureImage::new(
            vec![v; IMAGE_LEN],
            0.0,
            2.0,
            ImageMeta {
                aggregation: Aggregation::Max,
                foot_side: FootSide::Left,
                case_id: "x".into(),
                label: Label::Acld,
            },
        )
        .unwrap()
    }

    #[test]
    fn constant_difference() {
        let d = diff_heatmap(&img(0.2), &img(0.5)).unwrap();
        assert!(d.grid.iter().all(|&v| (v - 0.3).abs() < 1e-15));
        assert!(d.absolute.iter().all(|&v| (v - 0.6).abs() < 1e-12));
        let z = diff_heatmap(&img(0.4), &img(0.4)).unwrap();
        assert!(z.grid.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bands_partition_rows() {
        assert_eq!(band_rows(), [(0, 8), (8, 24), (24, 39), (39, 52)]);
    }

    #[test]
    fn heel_only_change() {
        let mut grid = vec![0.0; IMAGE_LEN];
        grid[39 * IMAGE_COLS..].fill(1.0);
        let s = region_stats(&DiffHeatmap {
            absolute: grid.clone(),
            grid,
        });
        assert_eq!(s.heel, 1.0);
        assert_eq!((s.toes, s.forefoot, s.midfoot), (0.0, 0.0, 0.0));
    }

    #[test]
    fn untrained_model_refuses() {
        assert!(matches!(
            guided_backprop(&ClassifierModel::untrained(0), &img(0.1)),
            Err(Error::Untrained)
        ));
    }
}
