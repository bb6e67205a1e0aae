//! Scalar reference renderer: no textures, no packing, exact ordering.

use alloc::vec::Vec;

use libm::expf;

use crate::Result;

use super::pipeline::{ALPHA_MAX, ALPHA_MIN, T_MIN};
use super::project::project_gaussian;
use super::types::{Camera, FrameBuffer, Gaussian3D};
use super::TILE;

/// Renders by walking, for every pixel, the Gaussians of its tile sorted by
/// exact `(tile, depth)` with ties kept in input order.
pub fn render_reference(gaussians: &[Gaussian3D], camera: &Camera, background: [f32; 3]) -> Result<FrameBuffer> {
    camera.validate()?;
    for (i, g) in gaussians.iter().enumerate() {
        g.validate(i)?;
    }
    let eye = camera.position()?;
    let (tiles_x, tiles_y) = camera.tiles();
    let projected: Vec<_> = gaussians.iter().map(|g| project_gaussian(g, camera, &eye).ok()).collect();

    let mut entries: Vec<(u64, f64, usize)> = Vec::new();
    for (i, p) in projected.iter().enumerate() {
        let Some(p) = p else { continue };
        for ty in p.tile_min.1..p.tile_max.1 {
            for tx in p.tile_min.0..p.tile_max.0 {
                entries.push(((ty * tiles_x + tx) as u64, p.depth as f64, i));
            }
        }
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut starts = alloc::vec![entries.len(); (tiles_x * tiles_y) as usize + 1];
    for (k, e) in entries.iter().enumerate().rev() {
        starts[e.0 as usize] = k;
    }
    for t in (0..(tiles_x * tiles_y) as usize).rev() {
        starts[t] = starts[t].min(starts[t + 1]);
    }

    let mut fb = FrameBuffer::filled(camera.width, camera.height, background);
    for y in 0..camera.height {
        for x in 0..camera.width {
            let tile = ((y / TILE) * tiles_x + x / TILE) as usize;
            let mut c = [0.0f32; 3];
            let mut t = 1.0f32;
            for e in &entries[starts[tile]..starts[tile + 1]] {
                let p = projected[e.2].as_ref().expect("listed Gaussians are visible");
                let [a, b, cc, op] = p.conic_opacity;
                let dx = p.xy[0] - x as f32;
                let dy = p.xy[1] - y as f32;
                let power = -0.5 * (a * dx * dx + cc * dy * dy) - b * dx * dy;
                if power > 0.0 {
                    continue;
                }
                let alpha = (op * expf(power)).min(ALPHA_MAX);
                if alpha < ALPHA_MIN {
                    continue;
                }
                for (acc, rgb) in c.iter_mut().zip(p.rgb) {
                    *acc += rgb * alpha * t;
                }
                t *= 1.0 - alpha;
                if t < T_MIN {
                    break;
                }
            }
            fb.set(
                x,
                y,
                [c[0] + background[0] * t, c[1] + background[1] * t, c[2] + background[2] * t],
            );
        }
    }
    Ok(fb)
}
