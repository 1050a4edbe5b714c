use crate::error::Result;
use crate::frame::Frame;

/// Value reported when two images are identical.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Mean squared error over all channels.
pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    a.check_same_dims(b, "mse")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio for 8-bit images, `20·log10(255/√MSE)`,
/// capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (20.0 * (255.0 / mse.sqrt()).log10()).min(PSNR_CAP_DB)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_hit_the_cap() {
        let f = Frame::filled(4, 4, 3, 17);
        assert_eq!(psnr(&f, &f).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn unit_difference_everywhere() {
        let a = Frame::filled(5, 3, 3, 100);
        let b = Frame::filled(5, 3, 3, 101);
        let p = psnr(&a, &b).unwrap();
        assert!((p - 48.1308).abs() < 1e-4, "{p}");
        assert_eq!(p, psnr(&b, &a).unwrap());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Frame::filled(4, 4, 3, 0);
        let b = Frame::filled(4, 4, 1, 0);
        assert!(psnr(&a, &b).is_err());
    }
}
