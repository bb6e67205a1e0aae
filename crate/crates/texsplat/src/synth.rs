//! Seeded synthetic workloads.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use texsplat_core::gs::{Camera, Gaussian3D};
use texsplat_core::texsort::KvPair;

/// Default image edge for synthetic renders.
pub const DEFAULT_SIZE: u32 = 256;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random finite keys in `[-1e6, 1e6)` with values `0..n`.
pub fn random_pairs(n: usize, seed: u64) -> Vec<KvPair> {
    let mut rng = rng(seed);
    (0..n)
        .map(|i| KvPair::new(rng.gen_range(-1.0e6f32..1.0e6), i as u32))
        .collect()
}

/// Camera at the origin looking down `+z` with roughly a 45 degree field of
/// view.
pub fn default_camera(width: u32, height: u32) -> Camera {
    Camera::axis_aligned([0.0, 0.0, 0.0], width.max(height) as f32 * 1.2, width, height)
}

/// `n` Gaussians in front of [`default_camera`], with mixed opacities,
/// anisotropic covariances and view-dependent colour.
///
/// Depths are a shuffled arithmetic progression over `[2, 10)`, so no two
/// Gaussians share a depth and the gap between any two is `8 / n`.
pub fn random_scene(n: usize, seed: u64) -> Vec<Gaussian3D> {
    let mut rng = rng(seed);
    let mut slots: Vec<usize> = (0..n).collect();
    slots.shuffle(&mut rng);
    slots
        .into_iter()
        .map(|slot| {
            let z = 2.0 + 8.0 * slot as f32 / n.max(1) as f32;
            let mean = [rng.gen_range(-0.35..0.35) * z, rng.gen_range(-0.35..0.35) * z, z];
            let a: [[f32; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-0.12..0.12)));
            let idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
            let mut cov = [0.0f32; 6];
            for (k, &(i, j)) in idx.iter().enumerate() {
                cov[k] = (0..3).map(|m| a[i][m] * a[j][m]).sum();
            }
            let sh = std::array::from_fn(|i| if i < 3 { rng.gen_range(-1.5..1.5) } else { rng.gen_range(-0.2..0.2) });
            Gaussian3D {
                mean,
                opacity: rng.gen_range(0.05..1.0),
                cov3d: cov,
                sh,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(random_scene(50, 9), random_scene(50, 9));
        assert_ne!(random_scene(50, 9), random_scene(50, 10));
        assert_eq!(random_pairs(100, 1), random_pairs(100, 1));
    }

    #[test]
    fn scene_is_valid_with_distinct_depths() {
        let scene = random_scene(500, 4);
        for (i, g) in scene.iter().enumerate() {
            g.validate(i).unwrap();
        }
        let mut z: Vec<f32> = scene.iter().map(|g| g.mean[2]).collect();
        z.sort_by(f32::total_cmp);
        assert!(z.windows(2).all(|w| w[0] < w[1]));
    }
}
