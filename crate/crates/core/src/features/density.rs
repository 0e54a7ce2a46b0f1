//! Fixation density maps and their entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAP_COLS: usize = 20;
pub const MAP_ROWS: usize = 15;
pub const MAP_CELLS: usize = MAP_COLS * MAP_ROWS;

const NORMALIZATION_TOL: f64 = 1e-9;

/// A 20x15 fixation density map, row-major, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMap {
    values: Vec<f64>,
    pub source_width: f64,
    pub source_height: f64,
    pub kernel_sigma: f64,
}

impl DensityMap {
    /// Wraps precomputed cell values (row-major, 300 cells).
    pub fn from_values(values: Vec<f64>, source_width: f64, source_height: f64, kernel_sigma: f64) -> Result<Self> {
        if values.len() != MAP_CELLS {
            return Err(Error::Contract(format!(
                "density map needs {MAP_CELLS} cells, got {}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            source_width,
            source_height,
            kernel_sigma,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * MAP_COLS + col]
    }

    /// `(col, row)` of the first maximal cell.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % MAP_COLS, best / MAP_COLS)
    }
}

/// Cell index of a pixel along one axis; pixels are assigned by their centre.
pub fn cell_of_pixel(pixel: usize, extent: usize, cells: usize) -> usize {
    let c = ((pixel as f64 + 0.5) * cells as f64 / extent as f64).floor() as usize;
    c.min(cells - 1)
}

/// Cell containing a (possibly fractional) pixel coordinate.
pub fn cell_of_location(x: f64, y: f64, width: f64, height: f64) -> usize {
    let w = pixel_extent(width);
    let h = pixel_extent(height);
    let px = (x.round().max(0.0) as usize).min(w - 1);
    let py = (y.round().max(0.0) as usize).min(h - 1);
    cell_of_pixel(py, h, MAP_ROWS) * MAP_COLS + cell_of_pixel(px, w, MAP_COLS)
}

fn pixel_extent(size: f64) -> usize {
    (size.round() as usize).max(1)
}

/// Pixels per cell along one axis.
fn cell_sizes(extent: usize, cells: usize) -> Vec<f64> {
    let mut n = vec![0.0; cells];
    for p in 0..extent {
        n[cell_of_pixel(p, extent, cells)] += 1.0;
    }
    n
}

/// Cell-averaged 1-D Gaussian centred on `center`, evaluated at pixel
/// indices.
fn axis_profile(center: f64, extent: usize, cells: usize, sigma: f64, sizes: &[f64]) -> Vec<f64> {
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut sums = vec![0.0; cells];
    for p in 0..extent {
        let d = p as f64 - center;
        sums[cell_of_pixel(p, extent, cells)] += norm * (-d * d * inv).exp();
    }
    for (s, n) in sums.iter_mut().zip(sizes) {
        if *n > 0.0 {
            *s /= n;
        }
    }
    sums
}

/// Places a unit-mass isotropic Gaussian on every fixation, evaluates the
/// mixture at every image pixel, box-averages it onto the 20x15 grid and
/// renormalizes to sum one.
///
/// The kernel is separable, so each fixation's box average is the outer
/// product of two per-axis profiles; this is exact, not an approximation.
pub fn fixation_density_map<I>(locations: I, width: f64, height: f64, kernel_sigma: f64) -> Result<DensityMap>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    if !(kernel_sigma > 0.0 && kernel_sigma.is_finite()) {
        return Err(Error::Domain(format!("kernel sigma must be positive, got {kernel_sigma}")));
    }
    let w = pixel_extent(width);
    let h = pixel_extent(height);
    let col_sizes = cell_sizes(w, MAP_COLS);
    let row_sizes = cell_sizes(h, MAP_ROWS);
    let mut values = vec![0.0; MAP_CELLS];
    let mut count = 0usize;
    for (x, y) in locations {
        count += 1;
        let cols = axis_profile(x, w, MAP_COLS, kernel_sigma, &col_sizes);
        let rows = axis_profile(y, h, MAP_ROWS, kernel_sigma, &row_sizes);
        for (r, &ry) in rows.iter().enumerate() {
            if ry == 0.0 {
                continue;
            }
            let row = &mut values[r * MAP_COLS..(r + 1) * MAP_COLS];
            for (v, &cx) in row.iter_mut().zip(&cols) {
                *v += ry * cx;
            }
        }
    }
    if count == 0 {
        return Err(Error::InsufficientData("density map of an image without fixations".into()));
    }
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain(format!(
            "kernel sigma {kernel_sigma} px too narrow: density underflowed"
        )));
    }
    values.iter_mut().for_each(|v| *v /= total);
    DensityMap::from_values(values, width, height, kernel_sigma)
}

/// Shannon entropy of a density map in bits.
pub fn density_entropy(map: &DensityMap) -> Result<f64> {
    let total: f64 = map.values().iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL || map.values().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Contract(format!("density map is not normalized (sum {total})")));
    }
    Ok(-map
        .values()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centre_fixation_peaks_at_centre_cell() {
        let m = fixation_density_map([(512.0, 384.0)], 1024.0, 768.0, 20.48).unwrap();
        assert_eq!(m.argmax(), (10, 7));
        assert!((m.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mirrored_fixations_give_mirrored_map() {
        let (w, h) = (1024.0, 768.0);
        let m = fixation_density_map([(100.0, 200.0), (w - 1.0 - 100.0, 200.0)], w, h, 30.0).unwrap();
        for r in 0..MAP_ROWS {
            for c in 0..MAP_COLS {
                assert!((m.get(c, r) - m.get(MAP_COLS - 1 - c, r)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn no_fixations_is_an_error() {
        let e = fixation_density_map(std::iter::empty(), 100.0, 100.0, 5.0);
        assert!(matches!(e, Err(Error::InsufficientData(_))));
        assert!(fixation_density_map([(1.0, 1.0)], 100.0, 100.0, 0.0).is_err());
    }

    #[test]
    fn entropy_extremes() {
        let uniform = DensityMap::from_values(vec![1.0 / 300.0; 300], 1.0, 1.0, 1.0).unwrap();
        assert!((density_entropy(&uniform).unwrap() - 300f64.log2()).abs() < 1e-12);
        assert!((300f64.log2() - 8.2288).abs() < 1e-4);
        let mut one = vec![0.0; 300];
        one[17] = 1.0;
        let peaked = DensityMap::from_values(one, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(density_entropy(&peaked).unwrap(), 0.0);
    }

    #[test]
    fn entropy_rejects_unnormalized() {
        let m = DensityMap::from_values(vec![0.01; 300], 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(density_entropy(&m), Err(Error::Contract(_))));
    }

    #[test]
    fn cell_assignment_covers_all_cells() {
        let sizes = cell_sizes(1024, MAP_COLS);
        assert!(sizes.iter().all(|&n| n >= 51.0 && n <= 52.0));
        assert_eq!(sizes.iter().sum::<f64>(), 1024.0);
    }

    proptest! {
        #[test]
        fn map_is_a_distribution(
            pts in proptest::collection::vec((0.0..640.0f64, 0.0..480.0f64), 1..20),
            sigma in 2.0..80.0f64,
        ) {
            let m = fixation_density_map(pts, 640.0, 480.0, sigma).unwrap();
            prop_assert!(m.values().iter().all(|&v| v >= 0.0));
            prop_assert!((m.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let e = density_entropy(&m).unwrap();
            prop_assert!(e >= 0.0 && e <= 300f64.log2() + 1e-12);
        }

        #[test]
        fn entropy_ignores_cell_order(seed_vals in proptest::collection::vec(0.0..1.0f64, 300), rot in 0usize..300) {
            let total: f64 = seed_vals.iter().sum();
            prop_assume!(total > 0.0);
            let v: Vec<f64> = seed_vals.iter().map(|x| x / total).collect();
            let mut p = v.clone();
            p.rotate_left(rot);
            p.reverse();
            let a = density_entropy(&DensityMap::from_values(v, 1.0, 1.0, 1.0).unwrap()).unwrap();
            let b = density_entropy(&DensityMap::from_values(p, 1.0, 1.0, 1.0).unwrap()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
