/// Quantises one frame to a byte: `round(v * 255)` after clamping to [0, 1].
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary portable graymap (P5, maxval 255) of a row-major `height × width` frame.
pub fn encode_p5(pixels: &[f64], height: usize, width: usize) -> Vec<u8> {
    debug_assert_eq!(pixels.len(), height * width);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| quantize(v)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_extremes() {
        let bytes = encode_p5(&[0.0, 1.0, 0.5, 0.2], 2, 2);
        assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 255, 128, 51]);
        assert_eq!(quantize(-0.3), 0);
        assert_eq!(quantize(7.0), 255);
    }
}
