use crate::qconv::{ImageTensor, QconvError};

/// Per-axis sampling plan: the two source indices and the weight of the
/// second.
fn plan(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            // half-pixel centers
            let x = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(src - 1);
            (x0, x1, x - x0 as f64)
        })
        .collect()
}

/// Bilinear resampling of every channel to `out_len x out_width`.
pub fn bilinear_resize(
    image: &ImageTensor,
    out_len: usize,
    out_width: usize,
) -> Result<ImageTensor, QconvError> {
    if out_len == 0 || out_width == 0 {
        return Err(QconvError::Image(
            "output dimensions must be positive".into(),
        ));
    }
    if (out_len, out_width) == (image.len(), image.width()) {
        return Ok(image.clone());
    }
    let rows = plan(image.len(), out_len);
    let cols = plan(image.width(), out_width);
    let channels = image.channels();
    let mut data = Vec::with_capacity(out_len * out_width * channels);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            for ch in 0..channels {
                let p = |r, c| image.get(r, c, ch) as f64;
                let top = p(r0, c0) * (1.0 - fc) + p(r0, c1) * fc;
                let bottom = p(r1, c0) * (1.0 - fc) + p(r1, c1) * fc;
                let v = top * (1.0 - fr) + bottom * fr;
                data.push(v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    ImageTensor::new(out_len, out_width, channels, data)
}
