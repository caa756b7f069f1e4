//! Procedural images for demos and tests: smooth reference scenes and small
//! labeled texture pools.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffusion::ExemplarPool;
use crate::error::Result;
use crate::image::ImageBuffer;

/// Texture families used for pool labels, in label order.
pub const TEXTURE_LABELS: [&str; 4] = ["stripes", "dots", "waves", "grain"];

/// A smooth RGB scene: a diagonal color ramp with a few soft discs.
pub fn reference_image(height: usize, width: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [[f64; 3]; 2] = [
        [rng.random(), rng.random(), rng.random()],
        [rng.random(), rng.random(), rng.random()],
    ];
    let discs: Vec<(f64, f64, f64, [f64; 3])> = (0..4)
        .map(|_| {
            (
                rng.random::<f64>(),
                rng.random::<f64>(),
                0.1 + 0.25 * rng.random::<f64>(),
                [rng.random(), rng.random(), rng.random()],
            )
        })
        .collect();
    ImageBuffer::from_fn(3, height, width, |c, y, x| {
        let (v, u) = ((y as f64 + 0.5) / height as f64, (x as f64 + 0.5) / width as f64);
        let t = 0.5 * (u + v);
        let mut value = base[0][c] * (1.0 - t) + base[1][c] * t;
        for &(cy, cx, r, color) in &discs {
            let d2 = ((v - cy).powi(2) + (u - cx).powi(2)) / (r * r);
            let a = (-d2 * d2).exp();
            value = value * (1.0 - a) + color[c] * a;
        }
        value.clamp(0.0, 1.0)
    })
}

/// One texture of family `kind` (an index into [`TEXTURE_LABELS`]).
pub fn texture(kind: usize, height: usize, width: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let color: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let accent: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let freq = 2.0 + 4.0 * rng.random::<f64>();
    let angle = std::f64::consts::PI * rng.random::<f64>();
    let phase = std::f64::consts::TAU * rng.random::<f64>();
    let (ca, sa) = (angle.cos(), angle.sin());
    let grain: Vec<f64> = (0..height * width).map(|_| rng.random()).collect();
    let tau = std::f64::consts::TAU;
    ImageBuffer::from_fn(3, height, width, |c, y, x| {
        let (v, u) = ((y as f64 + 0.5) / height as f64, (x as f64 + 0.5) / width as f64);
        let along = u * ca + v * sa;
        let a = match kind % TEXTURE_LABELS.len() {
            0 => 0.5 + 0.5 * (tau * freq * along + phase).sin(),
            1 => {
                let (fu, fv) = ((u * freq).fract() - 0.5, (v * freq).fract() - 0.5);
                (-(fu * fu + fv * fv) * 30.0).exp()
            }
            2 => 0.5 + 0.5 * (tau * freq * v + 2.0 * (tau * u + phase).sin()).sin(),
            _ => 0.3 * grain[y * width + x] + 0.7 * (0.5 + 0.5 * (tau * along + phase).cos()),
        };
        color[c] * (1.0 - a) + accent[c] * a
    })
}

/// `count` textures cycling through the label families.
pub fn exemplar_pool(count: usize, height: usize, width: usize, seed: u64) -> Result<ExemplarPool> {
    let mut exemplars = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let kind = i % TEXTURE_LABELS.len();
        exemplars.push(texture(kind, height, width, seed.wrapping_mul(1_000_003).wrapping_add(i as u64)));
        labels.push(TEXTURE_LABELS[kind].to_owned());
    }
    ExemplarPool::new(exemplars, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_are_in_range_and_deterministic() {
        let a = reference_image(32, 48, 1);
        assert_eq!(a.shape(), (3, 32, 48));
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a, reference_image(32, 48, 1));
        assert_ne!(a, reference_image(32, 48, 2));
        let pool = exemplar_pool(8, 16, 16, 0).unwrap();
        assert_eq!(pool.len(), 8);
        assert_eq!(pool.distinct_labels().len(), 4);
        for e in pool.exemplars() {
            assert!(e.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
