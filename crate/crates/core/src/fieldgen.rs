//! Heterogeneous stiffness fields: Gaussian random field samples, image-derived
//! intensity maps, per-element modulus, and synthetic strain noise.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::Mesh;
use crate::linalg;
use crate::{Error, Result};

/// Jitter ladder for the covariance factorization. The first rung that
/// yields a positive-definite matrix wins; exhausting the ladder is a
/// numerical error.
const CHOLESKY_JITTER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Where a nodal intensity field came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldSource {
    Grf,
    Image,
}

/// Scalar field on mesh nodes, min-max normalized to [0, 1].
#[derive(Clone, Debug)]
pub struct IntensityField {
    pub values: Vec<f64>,
    pub source: FieldSource,
    /// Seed used for GRF sampling; `None` for image-derived fields.
    pub seed: Option<u64>,
}

/// Per-element elastic modulus.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulusField {
    pub values: Vec<f64>,
}

impl ModulusField {
    pub fn uniform(value: f64, elements: usize) -> ModulusField {
        ModulusField {
            values: vec![value; elements],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Nodal (or elemental) plane tensor field stored as parallel component
/// vectors: xx, yy, and the single shear component xy.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Tensor2Field {
    pub xx: Vec<f64>,
    pub yy: Vec<f64>,
    pub xy: Vec<f64>,
}

impl Tensor2Field {
    pub fn zeros(n: usize) -> Tensor2Field {
        Tensor2Field {
            xx: vec![0.0; n],
            yy: vec![0.0; n],
            xy: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.xx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xx.is_empty()
    }

    pub fn components(&self) -> [(&'static str, &[f64]); 3] {
        [("xx", &self.xx), ("yy", &self.yy), ("xy", &self.xy)]
    }

    /// Concatenated (xx, yy, xy) vector, for norms over all components.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.xx.len());
        v.extend_from_slice(&self.xx);
        v.extend_from_slice(&self.yy);
        v.extend_from_slice(&self.xy);
        v
    }
}

/// Squared-exponential covariance k(r) = exp(-r^2 / (2 l^2)).
fn covariance(dx: f64, dy: f64, length_scale: f64) -> f64 {
    let r2 = dx * dx + dy * dy;
    (-r2 / (2.0 * length_scale * length_scale)).exp()
}

fn jittered_cholesky(cov: &Array2<f64>) -> Result<Array2<f64>> {
    for &jitter in &CHOLESKY_JITTER {
        let mut m = cov.clone();
        for i in 0..m.nrows() {
            m[[i, i]] += jitter;
        }
        if let Ok(l) = linalg::cholesky_lower(&m) {
            return Ok(l);
        }
    }
    Err(Error::Numerical(format!(
        "covariance factorization failed with diagonal jitter up to {:e}",
        CHOLESKY_JITTER[CHOLESKY_JITTER.len() - 1]
    )))
}

/// Draws one GRF sample at the mesh nodes, without normalization.
///
/// Unit variance, squared-exponential covariance with the given length
/// scale; deterministic in `seed`. The covariance depends only on node
/// coordinates, so node order does not change a node's marginal law.
pub fn sample_grf_raw(mesh: &Mesh, length_scale: f64, seed: u64) -> Result<Vec<f64>> {
    if !(length_scale > 0.0) {
        return Err(Error::invalid(format!(
            "length scale must be positive, got {length_scale}"
        )));
    }
    let n = mesh.node_count();
    let mut cov = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let k = covariance(
                mesh.nodes[i][0] - mesh.nodes[j][0],
                mesh.nodes[i][1] - mesh.nodes[j][1],
                length_scale,
            );
            cov[[i, j]] = k;
            cov[[j, i]] = k;
        }
    }
    let l = jittered_cholesky(&cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(linalg::lower_triangular_matvec(&l, &z))
}

/// Min-max rescale to [0, 1]; a constant input has no usable range.
pub fn min_max_normalize(values: &[f64]) -> Result<Vec<f64>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        return Err(Error::DegenerateInput(format!(
            "constant field (min = max = {lo}) cannot be normalized"
        )));
    }
    let span = hi - lo;
    Ok(values.iter().map(|&v| (v - lo) / span).collect())
}

/// GRF intensity field on the mesh nodes, min-max normalized to [0, 1].
pub fn sample_grf(mesh: &Mesh, length_scale: f64, seed: u64) -> Result<IntensityField> {
    let raw = sample_grf_raw(mesh, length_scale, seed)?;
    Ok(IntensityField {
        values: min_max_normalize(&raw)?,
        source: FieldSource::Grf,
        seed: Some(seed),
    })
}

/// Loads an 8-bit grayscale raster (PGM P2/P5 or grayscale PNG) as a
/// row-major array of sample values in [0, 255]. Rasters smaller than
/// 2x2 cannot be interpolated and are rejected.
pub fn load_image(path: &Path) -> Result<Array2<f64>> {
    let img = image::open(path)
        .map_err(|e| Error::Format(format!("cannot read image {}: {e}", path.display())))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::Format(format!(
                "{}: expected 8-bit grayscale, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    if w < 2 || h < 2 {
        return Err(Error::Format(format!(
            "{}: raster {w}x{h} is too small (need at least 2x2)",
            path.display()
        )));
    }
    let mut raster = Array2::zeros((h, w));
    for (x, y, p) in gray.enumerate_pixels() {
        raster[[y as usize, x as usize]] = f64::from(p.0[0]);
    }
    Ok(raster)
}

/// Keys cubic interpolation weights (a = -1/2) for the four taps around a
/// sample with fractional offset `t` in [0, 1).
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

fn tap_indices(coord: f64, len: usize) -> ([usize; 4], f64) {
    let base = coord.floor().min((len - 1) as f64).max(0.0);
    let t = coord - base;
    let b = base as isize;
    let clamp = |i: isize| -> usize { i.clamp(0, len as isize - 1) as usize };
    ([clamp(b - 1), clamp(b), clamp(b + 1), clamp(b + 2)], t)
}

/// Bicubic sample of a row-major raster at unit-square coordinates, with
/// edge rows/columns clamped for the outer taps.
fn sample_bicubic(raster: &Array2<f64>, x: f64, y: f64) -> f64 {
    let (h, w) = raster.dim();
    let (cols, tx) = tap_indices(x * (w - 1) as f64, w);
    let (rows, ty) = tap_indices(y * (h - 1) as f64, h);
    let wx = catmull_rom_weights(tx);
    let wy = catmull_rom_weights(ty);
    let mut acc = 0.0;
    for (r, &wr) in rows.iter().zip(&wy) {
        let mut row = 0.0;
        for (c, &wc) in cols.iter().zip(&wx) {
            row += wc * raster[[*r, *c]];
        }
        acc += wr * row;
    }
    acc
}

/// Interpolates a raster onto the mesh nodes.
///
/// The raster is min-max normalized, sampled bicubically (image column 0
/// maps to x = 0, image row 0 maps to y = 0; no vertical flip), and the
/// interpolated values are clamped to [0, 1] since the cubic kernel can
/// overshoot.
pub fn map_image_to_nodes(raster: &Array2<f64>, mesh: &Mesh) -> Result<IntensityField> {
    let (h, w) = raster.dim();
    if w < 2 || h < 2 {
        return Err(Error::invalid(format!(
            "raster {w}x{h} is too small to interpolate"
        )));
    }
    let flat = raster.as_slice().expect("contiguous raster");
    let normalized = min_max_normalize(flat)?;
    let norm = Array2::from_shape_vec((h, w), normalized).expect("shape preserved");
    let values = mesh
        .nodes
        .iter()
        .map(|&[x, y]| sample_bicubic(&norm, x, y).clamp(0.0, 1.0))
        .collect();
    Ok(IntensityField {
        values,
        source: FieldSource::Image,
        seed: None,
    })
}

/// Per-element modulus E_e = f_i + f_j + f_k + 1 from the nodal intensity
/// field, giving E in [1, 4] for intensities in [0, 1].
pub fn elemental_modulus(field: &IntensityField, mesh: &Mesh) -> ModulusField {
    assert_eq!(
        field.values.len(),
        mesh.node_count(),
        "intensity field does not match mesh"
    );
    let values = mesh
        .elements
        .iter()
        .map(|&[a, b, c]| field.values[a] + field.values[b] + field.values[c] + 1.0)
        .collect();
    ModulusField { values }
}

/// Adds zero-mean Gaussian noise to each strain component with standard
/// deviation `percent`/100 of that component's RMS over the field.
///
/// Component order of random draws is xx, then yy, then xy; `percent = 0`
/// returns the input bit-for-bit.
pub fn add_strain_noise(strains: &Tensor2Field, percent: f64, seed: u64) -> Result<Tensor2Field> {
    if !(percent >= 0.0) {
        return Err(Error::invalid(format!(
            "noise percent must be non-negative, got {percent}"
        )));
    }
    if percent == 0.0 {
        return Ok(strains.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = strains.clone();
    for comp in [&mut out.xx, &mut out.yy, &mut out.xy] {
        let n = comp.len();
        if n == 0 {
            continue;
        }
        let rms = (comp.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        let sigma = percent / 100.0 * rms;
        for v in comp.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
    Ok(out)
}
