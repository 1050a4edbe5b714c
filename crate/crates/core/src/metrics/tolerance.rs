use crate::error::{Error, Result};

/// Fraction of predictions whose absolute error is strictly below `tol`.
pub fn tolerance_accuracy(preds: &[f64], gts: &[f64], tol: f64) -> Result<f64> {
    if preds.len() != gts.len() {
        return Err(Error::InvalidArgument(format!(
            "tolerance_accuracy: {} predictions vs {} targets",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument(
            "tolerance_accuracy: no predictions".into(),
        ));
    }
    let hits = preds
        .iter()
        .zip(gts)
        .filter(|(p, g)| (*p - *g).abs() < tol)
        .count();
    Ok(hits as f64 / preds.len() as f64)
}
