//! Fixtures shared by the benchmarks.

use anamorph::Image;

/// A smooth, deterministic test image with values in [-1, 1].
pub fn pattern(n: usize, channels: usize) -> Image {
    Image::from_fn(n, n, channels, |x, y, c| {
        let (fx, fy) = (x as f32 / n as f32, y as f32 / n as f32);
        (9.0 * fx + 5.0 * fy * fy + c as f32).sin() * (7.0 * fy - 3.0 * fx).cos()
    })
}
