//! Field complexity via the entropy of the joint gradient histogram.
//!
//! Gradients come from 3x3 cross-correlation with the kernel
//! [[-1,0,1],[-1,0,1],[-1,0,1]] (x direction) and its transpose
//! (y direction), evaluated on the interior of the raster. The two gradient
//! images are binned into a joint 256x256 histogram over [-3,3]^2 and the
//! measure is half the Shannon entropy of the normalized histogram, in bits.

use ndarray::Array2;

use crate::{Error, Result};

pub const HIST_BINS: usize = 256;
pub const HIST_RANGE: f64 = 3.0;

/// Gradient rasters plus their joint histogram.
#[derive(Clone, Debug)]
pub struct GradientHistogram {
    /// x gradient, (H-2) x (W-2).
    pub dx: Array2<f64>,
    /// y gradient, (H-2) x (W-2).
    pub dy: Array2<f64>,
    /// Joint counts, dx along rows, dy along columns.
    pub counts: Array2<u64>,
    /// counts / total.
    pub p: Array2<f64>,
    /// Bins cover [-range, range] per axis.
    pub range: f64,
}

/// Cross-correlates the raster interior with the x/y difference kernels.
///
/// Values are expected in [0, 1], which bounds each gradient by 3 in
/// magnitude. Rasters smaller than 3x3 have no interior.
pub fn gradient_field(raster: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let (h, w) = raster.dim();
    if h < 3 || w < 3 {
        return Err(Error::invalid(format!(
            "raster {w}x{h} has no interior for a 3x3 kernel"
        )));
    }
    let mut dx = Array2::zeros((h - 2, w - 2));
    let mut dy = Array2::zeros((h - 2, w - 2));
    for i in 1..h - 1 {
        for j in 1..w - 1 {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for k in 0..3 {
                gx += raster[[i - 1 + k, j + 1]] - raster[[i - 1 + k, j - 1]];
                gy += raster[[i + 1, j - 1 + k]] - raster[[i - 1, j - 1 + k]];
            }
            dx[[i - 1, j - 1]] = gx;
            dy[[i - 1, j - 1]] = gy;
        }
    }
    Ok((dx, dy))
}

fn bin_index(v: f64) -> usize {
    let scaled = (v + HIST_RANGE) / (2.0 * HIST_RANGE) * HIST_BINS as f64;
    (scaled.floor() as isize).clamp(0, HIST_BINS as isize - 1) as usize
}

/// Joint gradient histogram of the raster.
pub fn gradient_histogram(raster: &Array2<f64>) -> Result<GradientHistogram> {
    let (dx, dy) = gradient_field(raster)?;
    let mut counts = Array2::<u64>::zeros((HIST_BINS, HIST_BINS));
    for (gx, gy) in dx.iter().zip(dy.iter()) {
        counts[[bin_index(*gx), bin_index(*gy)]] += 1;
    }
    let total = dx.len() as f64;
    let p = counts.mapv(|c| c as f64 / total);
    Ok(GradientHistogram {
        dx,
        dy,
        counts,
        p,
        range: HIST_RANGE,
    })
}

impl GradientHistogram {
    /// Half Shannon entropy of the joint histogram, in bits.
    pub fn delentropy(&self) -> f64 {
        let mut acc = 0.0;
        for &p in self.p.iter() {
            if p > 0.0 {
                acc += p * p.log2();
            }
        }
        // + 0.0 turns the -0.0 of a single-bin histogram into +0.0
        -0.5 * acc + 0.0
    }
}

/// Gradient-histogram entropy of a raster (values expected in [0, 1]).
pub fn delentropy(raster: &Array2<f64>) -> Result<f64> {
    Ok(gradient_histogram(raster)?.delentropy())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_raster_has_zero_entropy() {
        let raster = Array2::from_elem((5, 7), 0.4);
        let de = delentropy(&raster).unwrap();
        assert_eq!(de, 0.0);
        let h = gradient_histogram(&raster).unwrap();
        assert_eq!(h.counts[[128, 128]], (5 - 2) * (7 - 2));
    }

    #[test]
    fn x_ramp_gradient_is_uniform() {
        let w = 7;
        let raster = Array2::from_shape_fn((5, w), |(_, j)| j as f64 / (w - 1) as f64);
        let (dx, dy) = gradient_field(&raster).unwrap();
        for &g in dx.iter() {
            assert!((g - 6.0 / (w - 1) as f64).abs() < 1e-12);
        }
        for &g in dy.iter() {
            assert!(g.abs() < 1e-12);
        }
        // single occupied bin -> zero entropy
        assert_eq!(delentropy(&raster).unwrap(), 0.0);
    }

    /// Hand-computed oracle: 6x6 raster with columns 0 and 3 set to 1.
    /// The 4x4 interior has dx = -3 on 8 pixels, +3 on 4, 0 on 4, dy = 0
    /// everywhere, so p = (1/2, 1/4, 1/4) over three bins and the measure is
    /// -(1/2)(p log2 p summed) = 0.75 exactly.
    #[test]
    fn striped_raster_matches_hand_computation() {
        let raster = Array2::from_shape_fn((6, 6), |(_, j)| if j % 3 == 0 { 1.0 } else { 0.0 });
        let de = delentropy(&raster).unwrap();
        assert!((de - 0.75).abs() < 1e-12, "{de}");
        let h = gradient_histogram(&raster).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 3);
        assert_eq!(h.counts[[bin_index(-3.0), bin_index(0.0)]], 8);
        assert_eq!(h.counts[[bin_index(3.0), bin_index(0.0)]], 4);
        assert_eq!(h.counts[[bin_index(0.0), bin_index(0.0)]], 4);
    }

    #[test]
    fn transpose_swaps_gradient_components() {
        let raster = Array2::from_shape_fn((6, 8), |(i, j)| ((i * 31 + j * 17) % 11) as f64 / 10.0);
        let (dx, dy) = gradient_field(&raster).unwrap();
        let t = raster.t().to_owned();
        let (tdx, tdy) = gradient_field(&t).unwrap();
        assert_eq!(tdx, dy.t().to_owned());
        assert_eq!(tdy, dx.t().to_owned());
    }

    #[test]
    fn transpose_preserves_entropy() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let h = rng.random_range(3..12);
            let w = rng.random_range(3..12);
            let raster = Array2::from_shape_fn((h, w), |_| rng.random_range(0.0..1.0));
            let a = delentropy(&raster).unwrap();
            let b = delentropy(&raster.t().to_owned()).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn entropy_nonnegative_and_p_sums_to_one() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let raster = Array2::from_shape_fn((9, 9), |_| rng.random_range(0.0..1.0));
            let h = gradient_histogram(&raster).unwrap();
            assert!(h.delentropy() >= 0.0);
            assert!((h.p.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_small_raster_rejected() {
        let raster = Array2::from_elem((2, 5), 0.0);
        assert!(gradient_field(&raster).is_err());
    }

    #[test]
    fn boundary_values_land_in_end_bins() {
        assert_eq!(bin_index(-3.0), 0);
        assert_eq!(bin_index(3.0), HIST_BINS - 1);
        assert_eq!(bin_index(0.0), HIST_BINS / 2);
        assert_eq!(bin_index(-3.1), 0);
        assert_eq!(bin_index(3.1), HIST_BINS - 1);
    }
}
