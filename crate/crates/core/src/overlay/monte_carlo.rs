//! Rejection-sampling estimate of an intersection area.
//!
//! Shares nothing with the sweep: membership is a plain winding-number test
//! per sample, so it serves as an independent check on the exact overlay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::OverlayError;
use crate::geo::{Coord, MultiPolygon};
use crate::parallel::{map_range, Parallelism};

/// Samples drawn from one RNG stream.
const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaEstimate {
    pub estimate: f64,
    /// Binomial standard error of the estimate.
    pub std_error: f64,
    pub samples: u64,
    pub hits: u64,
}

/// Estimates area(a ∩ b) by sampling a's bounding box.
pub fn monte_carlo_area_estimate(
    a: &MultiPolygon,
    b: &MultiPolygon,
    samples: u64,
    seed: u64,
) -> Result<AreaEstimate, OverlayError> {
    monte_carlo_area_estimate_with(a, b, samples, seed, Parallelism::Sequential)
}

/// As [`monte_carlo_area_estimate`]; the result is identical for every mode
/// because each fixed-size chunk of samples owns its own RNG stream.
pub fn monte_carlo_area_estimate_with(
    a: &MultiPolygon,
    b: &MultiPolygon,
    samples: u64,
    seed: u64,
    mode: Parallelism,
) -> Result<AreaEstimate, OverlayError> {
    if samples == 0 {
        return Err(OverlayError::NoSamples);
    }
    let bb = a.bbox();
    if bb.is_empty() || bb.area() <= 0.0 {
        return Err(OverlayError::EmptyBoundingBox);
    }
    let chunks = samples.div_ceil(CHUNK as u64) as usize;
    let hits: u64 = map_range(chunks, mode, |c| {
        let n = if c + 1 == chunks {
            samples - (c as u64) * CHUNK as u64
        } else {
            CHUNK as u64
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let mut hits = 0u64;
        for _ in 0..n {
            let p = Coord::new(
                rng.random_range(bb.min_x..bb.max_x),
                rng.random_range(bb.min_y..bb.max_y),
            );
            if a.contains(p) && b.contains(p) {
                hits += 1;
            }
        }
        hits
    })
    .into_iter()
    .sum();
    let box_area = bb.area();
    let frac = hits as f64 / samples as f64;
    Ok(AreaEstimate {
        estimate: box_area * frac,
        std_error: box_area * (frac * (1.0 - frac) / samples as f64).sqrt(),
        samples,
        hits,
    })
}
