use super::{ImagePlane, ImageRgb};
use crate::error::Result;

/// Studio-swing BT.601 planes.
#[derive(Clone, Debug, PartialEq)]
pub struct YCbCr {
    pub y: ImagePlane,
    pub cb: ImagePlane,
    pub cr: ImagePlane,
}

const OFFSET: [f64; 3] = [16.0, 128.0, 128.0];

const FORWARD: [[f64; 3]; 3] = [
    [65.481, 128.553, 24.966],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
];

fn inverse(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let (r0, r1) = ((c + 1) % 3, (c + 2) % 3);
            let (c0, c1) = ((r + 1) % 3, (r + 2) % 3);
            *v = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    inv
}

pub fn rgb_to_ycbcr(img: &ImageRgb) -> YCbCr {
    let n = img.height() * img.width();
    let mut planes = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for px in img.data().chunks_exact(3) {
        let rgb = [px[0] as f64, px[1] as f64, px[2] as f64];
        for (k, plane) in planes.iter_mut().enumerate() {
            let v = OFFSET[k] + (FORWARD[k][0] * rgb[0] + FORWARD[k][1] * rgb[1] + FORWARD[k][2] * rgb[2]) / 255.0;
            plane.push(v as f32);
        }
    }
    let [y, cb, cr] = planes.map(|p| ImagePlane::new(img.height(), img.width(), p).expect("dims match"));
    YCbCr { y, cb, cr }
}

/// Inverse of [`rgb_to_ycbcr`], rounded and clamped to 8 bits.
pub fn ycbcr_to_rgb(ycc: &YCbCr) -> Result<ImageRgb> {
    let (h, w) = ycc.y.dims();
    for p in [&ycc.cb, &ycc.cr] {
        if p.dims() != (h, w) {
            return Err(crate::error::Error::Image(format!(
                "chroma plane {}x{} does not match luma {h}x{w}",
                p.height(),
                p.width()
            )));
        }
    }
    let inv = inverse(&FORWARD);
    let mut data = Vec::with_capacity(3 * h * w);
    for i in 0..h * w {
        let d = [
            ycc.y.data()[i] as f64 - OFFSET[0],
            ycc.cb.data()[i] as f64 - OFFSET[1],
            ycc.cr.data()[i] as f64 - OFFSET[2],
        ];
        for row in &inv {
            let v = 255.0 * (row[0] * d[0] + row[1] * d[1] + row[2] * d[2]);
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    ImageRgb::new(h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one(r: u8, g: u8, b: u8) -> YCbCr {
        rgb_to_ycbcr(&ImageRgb::new(1, 1, vec![r, g, b]).unwrap())
    }

    #[test]
    fn black_and_white_luma() {
        assert_eq!(one(0, 0, 0).y.data()[0], 16.0);
        assert!((one(255, 255, 255).y.data()[0] - 235.0).abs() < 1e-3);
        let gray = one(90, 90, 90);
        assert!((gray.cb.data()[0] - 128.0).abs() < 1e-3);
        assert!((gray.cr.data()[0] - 128.0).abs() < 1e-3);
    }

    #[test]
    fn inverse_matrix_is_an_inverse() {
        let inv = inverse(&FORWARD);
        for r in 0..3 {
            for c in 0..3 {
                let v: f64 = (0..3).map(|k| FORWARD[r][k] * inv[k][c]).sum();
                assert!((v - if r == c { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_within_one_level(px in proptest::collection::vec(any::<u8>(), 3..=48)) {
            let n = px.len() / 3;
            let img = ImageRgb::new(1, n, px[..3 * n].to_vec()).unwrap();
            let back = ycbcr_to_rgb(&rgb_to_ycbcr(&img)).unwrap();
            for (a, b) in img.data().iter().zip(back.data()) {
                prop_assert!((*a as i32 - *b as i32).abs() <= 1);
            }
        }
    }
}
