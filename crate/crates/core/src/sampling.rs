//! Deterministic sample plans: tensor grids, scrambled Sobol points, balls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Sobol dimensions supported by the scrambled generator.
pub const MAX_SOBOL_DIM: usize = 256;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` Owen-scrambled Sobol points in `[0, 1)^dim`.
///
/// Dimensions beyond the generator's table fall back to a seeded uniform stream.
pub fn sobol_unit(dim: usize, n: usize, seed: u32) -> Vec<Vec<f64>> {
    let mut fallback = rng(u64::from(seed) ^ 0x5eed_5eed);
    (0..n)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    if d < MAX_SOBOL_DIM {
                        f64::from(sobol_burley::sample(i as u32, d as u32, seed))
                    } else {
                        fallback.random::<f64>()
                    }
                })
                .collect()
        })
        .collect()
}

/// Sobol points scaled into `[-radius, radius]^dim`.
pub fn sobol_box(dim: usize, n: usize, radius: f64, seed: u32) -> Vec<Vec<f64>> {
    sobol_unit(dim, n, seed)
        .into_iter()
        .map(|p| p.into_iter().map(|t| radius * (2.0 * t - 1.0)).collect())
        .collect()
}

/// Sobol points scaled into the box `[lo, hi]`.
pub fn sobol_in(lo: &[f64], hi: &[f64], n: usize, seed: u32) -> Vec<Vec<f64>> {
    sobol_unit(lo.len(), n, seed)
        .into_iter()
        .map(|p| {
            p.iter()
                .zip(lo.iter().zip(hi))
                .map(|(t, (a, b))| a + t * (b - a))
                .collect()
        })
        .collect()
}

/// Axis points `-r, ..., r` (inclusive) with `per_axis` entries.
pub fn linspace(radius: f64, per_axis: usize) -> Vec<f64> {
    if per_axis == 1 {
        return vec![0.0];
    }
    (0..per_axis)
        .map(|i| radius * (-1.0 + 2.0 * i as f64 / (per_axis - 1) as f64))
        .collect()
}

/// Cartesian product of the axis points.
pub fn tensor_grid(dim: usize, axis: &[f64]) -> Vec<Vec<f64>> {
    let total = axis.len().pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; dim];
            for slot in p.iter_mut() {
                *slot = axis[idx % axis.len()];
                idx /= axis.len();
            }
            p
        })
        .collect()
}

/// Cell midpoints of `linspace(radius, per_axis)`.
pub fn midpoints(radius: f64, per_axis: usize) -> Vec<f64> {
    let axis = linspace(radius, per_axis);
    axis.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Vertices of the box `[lo, hi]`, only for `dim <= 12`.
pub fn box_vertices(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let dim = lo.len();
    if dim > 12 {
        return Vec::new();
    }
    (0..1usize << dim)
        .map(|mask| {
            (0..dim)
                .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                .collect()
        })
        .collect()
}

/// Points for sup-norm estimates on `[-radius, radius]^dim`: a 17-per-axis
/// tensor grid for `dim <= 3`, else 4096 Sobol points.
pub fn sup_plan(dim: usize, radius: f64) -> Vec<Vec<f64>> {
    if dim <= 3 {
        tensor_grid(dim, &linspace(radius, 17))
    } else {
        sobol_box(dim, 4096, radius, 17)
    }
}

/// Samples of the closed ball `B_radius(center)`: the center, the `2m` axis
/// extremes, then `n` seeded points (half on the sphere, half inside).
pub fn ball_samples(center: &[f64], radius: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let m = center.len();
    let mut out = Vec::with_capacity(1 + 2 * m + n);
    out.push(center.to_vec());
    for j in 0..m {
        for sign in [1.0, -1.0] {
            let mut p = center.to_vec();
            p[j] += sign * radius;
            out.push(p);
        }
    }
    let mut r = rng(seed);
    for i in 0..n {
        let mut dir: Vec<f64> = (0..m).map(|_| r.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let scale = if i % 2 == 0 {
            radius
        } else {
            radius * r.random::<f64>().powf(1.0 / m as f64)
        };
        for (d, c) in dir.iter_mut().zip(center) {
            *d = c + *d / norm * scale;
        }
        out.push(dir);
    }
    out
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
