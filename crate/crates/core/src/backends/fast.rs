use crate::error::Result;
use crate::frame::Frame;

/// Pixelwise mean of the two frames, rounded half up.
pub fn interpolate_fast(frame0: &Frame, frame1: &Frame) -> Result<Frame> {
    frame0.check_same_dims(frame1, "interpolate_fast")?;
    let data = frame0
        .data()
        .iter()
        .zip(frame1.data())
        .map(|(&a, &b)| ((u16::from(a) + u16::from(b) + 1) >> 1) as u8)
        .collect();
    Frame::new(frame0.width(), frame0.height(), frame0.channels(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_of_equals_is_identity() {
        let f = Frame::new(2, 1, 1, vec![3, 250]).unwrap();
        assert_eq!(interpolate_fast(&f, &f).unwrap(), f);
    }

    #[test]
    fn arithmetic() {
        let a = Frame::filled(1, 1, 1, 10);
        let b = Frame::filled(1, 1, 1, 20);
        assert_eq!(interpolate_fast(&a, &b).unwrap().data(), &[15]);
        let c = Frame::filled(1, 1, 1, 255);
        let d = Frame::filled(1, 1, 1, 254);
        assert_eq!(interpolate_fast(&c, &d).unwrap().data(), &[255]);
    }

    #[test]
    fn size_mismatch() {
        assert!(interpolate_fast(&Frame::filled(2, 2, 3, 0), &Frame::filled(2, 3, 3, 0)).is_err());
    }
}
