//! Baseline JPEG round trip (8x8 DCT, quantize, dequantize) on an 8-bit copy.
//! No chroma subsampling and no entropy coding, neither of which changes pixels.

const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, 12, 12, 14, 19, 26, 58, 60, 55, 14, 13, 16, 24, 40, 57, 69, 56, 14, 17, 22, 29, 51, 87,
    80, 62, 18, 22, 37, 56, 68, 109, 103, 77, 24, 35, 55, 64, 81, 104, 113, 92, 49, 64, 78, 87, 103, 121, 120, 101, 72,
    92, 95, 98, 112, 100, 103, 99,
];

const CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99,
];

/// Base table scaled to `quality` with the usual libjpeg rule.
pub fn quant_table(base: &[u16; 64], quality: u8) -> [f64; 64] {
    let q = u32::from(quality.clamp(1, 100));
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    base.map(|t| ((u32::from(t) * scale + 50) / 100).clamp(1, 255) as f64)
}

fn dct_matrix() -> [[f64; 8]; 8] {
    let mut c = [[0.0; 8]; 8];
    for (k, row) in c.iter_mut().enumerate() {
        let a = if k == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        for (n, v) in row.iter_mut().enumerate() {
            *v = a * ((2 * n + 1) as f64 * k as f64 * std::f64::consts::PI / 16.0).cos();
        }
    }
    c
}

/// `C X C^T` when `forward`, `C^T X C` otherwise.
fn transform(block: &[f64; 64], c: &[[f64; 8]; 8], forward: bool) -> [f64; 64] {
    let m = |i: usize, j: usize| if forward { c[i][j] } else { c[j][i] };
    let mut tmp = [0.0; 64];
    for i in 0..8 {
        for j in 0..8 {
            tmp[i * 8 + j] = (0..8).map(|k| m(i, k) * block[k * 8 + j]).sum();
        }
    }
    let mut out = [0.0; 64];
    for i in 0..8 {
        for j in 0..8 {
            out[i * 8 + j] = (0..8).map(|k| tmp[i * 8 + k] * m(j, k)).sum();
        }
    }
    out
}

/// Compresses one channel in place; edges are padded by replication.
fn channel(values: &mut [f64], height: usize, width: usize, table: &[f64; 64], c: &[[f64; 8]; 8]) {
    for by in (0..height).step_by(8) {
        for bx in (0..width).step_by(8) {
            let mut block = [0.0; 64];
            for i in 0..8 {
                for j in 0..8 {
                    let y = (by + i).min(height - 1);
                    let x = (bx + j).min(width - 1);
                    block[i * 8 + j] = values[y * width + x] - 128.0;
                }
            }
            let mut coef = transform(&block, c, true);
            for (v, q) in coef.iter_mut().zip(table) {
                *v = (*v / q).round() * q;
            }
            let back = transform(&coef, c, false);
            for i in 0..8.min(height - by) {
                for j in 0..8.min(width - bx) {
                    values[(by + i) * width + bx + j] = back[i * 8 + j] + 128.0;
                }
            }
        }
    }
}

/// JPEG round trip of one `[3, H, W]` plane with values in `[0, 1]`.
pub fn jpeg_round_trip(plane: &mut [f32], height: usize, width: usize, quality: u8) {
    let n = height * width;
    let to8 = |v: f32| (f64::from(v).clamp(0.0, 1.0) * 255.0).round();
    let mut ycc = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let [r, g, b] = [0, 1, 2].map(|ch| to8(plane[ch * n + i]));
        ycc[0][i] = 0.299 * r + 0.587 * g + 0.114 * b;
        ycc[1][i] = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
        ycc[2][i] = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
    }
    let c = dct_matrix();
    let luma = quant_table(&LUMA_TABLE, quality);
    let chroma = quant_table(&CHROMA_TABLE, quality);
    for (k, values) in ycc.iter_mut().enumerate() {
        channel(values, height, width, if k == 0 { &luma } else { &chroma }, &c);
    }
    for i in 0..n {
        let (y, cb, cr) = (ycc[0][i], ycc[1][i] - 128.0, ycc[2][i] - 128.0);
        let rgb = [y + 1.402 * cr, y - 0.344136 * cb - 0.714136 * cr, y + 1.772 * cb];
        for (ch, v) in rgb.into_iter().enumerate() {
            plane[ch * n + i] = (v.round().clamp(0.0, 255.0) / 255.0) as f32;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dct_is_orthonormal() {
        let c = dct_matrix();
        let block: [f64; 64] = std::array::from_fn(|i| ((i * 37) % 255) as f64 - 128.0);
        let back = transform(&transform(&block, &c, true), &c, false);
        for (a, b) in back.iter().zip(&block) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn quality_scaling_matches_libjpeg() {
        assert_eq!(quant_table(&LUMA_TABLE, 50)[0], 16.0);
        assert_eq!(quant_table(&LUMA_TABLE, 100), [1.0; 64]);
        assert_eq!(quant_table(&LUMA_TABLE, 25)[0], 32.0);
        assert_eq!(quant_table(&CHROMA_TABLE, 1)[63], 255.0);
    }

    fn test_plane(h: usize, w: usize) -> Vec<f32> {
        (0..3 * h * w).map(|i| (i % w) as f32 / w as f32 * 0.8 + (i / (h * w)) as f32 * 0.1).collect()
    }

    fn mean_abs(a: &[f32], b: &[f32]) -> f32 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f32>() / a.len() as f32
    }

    #[test]
    fn flat_color_survives() {
        let mut plane = vec![0.4f32; 3 * 16 * 16];
        jpeg_round_trip(&mut plane, 16, 16, 30);
        assert!(plane.iter().all(|&v| (v - 0.4).abs() < 2.5 / 255.0));
    }

    #[test]
    fn lower_quality_loses_more() {
        let (h, w) = (20, 28);
        let mut noisy = test_plane(h, w);
        for (i, v) in noisy.iter_mut().enumerate() {
            if (i / w + i) % 3 == 0 {
                *v = 1.0 - *v;
            }
        }
        let err = |q| {
            let mut p = noisy.clone();
            jpeg_round_trip(&mut p, h, w, q);
            mean_abs(&p, &noisy)
        };
        let (e95, e70, e30) = (err(95), err(70), err(30));
        assert!(e95 < e70 && e70 < e30, "{e95} {e70} {e30}");
    }
}
