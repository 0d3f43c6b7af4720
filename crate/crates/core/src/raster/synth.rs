//! Deterministic synthetic DEMs for tests, benchmarks and demos.
//!
//! Elevations are rounded through `f32` so that adding small integer offsets
//! stays exact in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dem, GeoTransform, DEFAULT_DEM_NODATA};

/// Square grid with its north-west corner at (0, size · pixel).
pub fn square(size: usize, pixel_size: f64) -> GeoTransform {
    GeoTransform::new(0.0, size as f64 * pixel_size, pixel_size, size, size).expect("valid synthetic grid")
}

pub fn flat(t: GeoTransform, elevation: f64) -> Dem {
    Dem::new(t, vec![elevation; t.len()], DEFAULT_DEM_NODATA).expect("flat DEM")
}

/// Flat ground with a one-cell-thick wall of `height` meters along column `col`.
pub fn wall(t: GeoTransform, col: usize, height: f64) -> Dem {
    let mut values = vec![0.0; t.len()];
    for r in 0..t.rows {
        values[r * t.cols + col] = height;
    }
    Dem::new(t, values, DEFAULT_DEM_NODATA).expect("wall DEM")
}

/// Sum of `hills` random Gaussian bumps and pits, seeded.
///
/// Widths span 4–16 % of the grid, amplitudes ±(2–15) m, plus a gentle
/// random plane tilt.
pub fn gaussian_hills(t: GeoTransform, hills: usize, seed: u64) -> Dem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (t.rows as f64, t.cols as f64);
    let extent = rows.max(cols);
    let mut values = vec![0.0f64; t.len()];

    let tilt_x: f64 = rng.gen_range(-0.02..0.02);
    let tilt_y: f64 = rng.gen_range(-0.02..0.02);
    for r in 0..t.rows {
        for c in 0..t.cols {
            values[r * t.cols + c] = (tilt_x * c as f64 + tilt_y * r as f64) * t.pixel_size;
        }
    }

    for _ in 0..hills {
        let cr: f64 = rng.gen_range(0.0..rows);
        let cc: f64 = rng.gen_range(0.0..cols);
        let sigma: f64 = rng.gen_range(0.04..0.16) * extent;
        let amp: f64 = rng.gen_range(2.0..15.0) * if rng.gen_bool(0.7) { 1.0 } else { -1.0 };
        let reach = (4.0 * sigma).ceil();
        let r0 = (cr - reach).max(0.0) as usize;
        let r1 = ((cr + reach) as usize).min(t.rows - 1);
        let c0 = (cc - reach).max(0.0) as usize;
        let c1 = ((cc + reach) as usize).min(t.cols - 1);
        let k = -0.5 / (sigma * sigma);
        for r in r0..=r1 {
            let dr = r as f64 + 0.5 - cr;
            for c in c0..=c1 {
                let dc = c as f64 + 0.5 - cc;
                values[r * t.cols + c] += amp * (k * (dr * dr + dc * dc)).exp();
            }
        }
    }
    for v in &mut values {
        *v = *v as f32 as f64;
    }
    Dem::new(t, values, DEFAULT_DEM_NODATA).expect("synthetic DEM")
}
