use super::NnError;

/// Pairwise hinge `max(0, -y * (r1 - r2) + margin)`.
///
/// `y` is `+1` when the first item should score higher, `-1` when the second
/// should, and `0` for a tie (no loss). Returns the loss and its derivatives
/// with respect to `r1` and `r2`.
pub fn margin_ranking_loss(r1: f64, r2: f64, y: f64, margin: f64) -> (f64, f64, f64) {
    if y == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let v = -y * (r1 - r2) + margin;
    if v > 0.0 {
        (v, -y, y)
    } else {
        (0.0, 0.0, 0.0)
    }
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(NnError::Mismatch(format!(
            "mse over {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_cases() {
        let (l, _, _) = margin_ranking_loss(0.9, 0.1, 1.0, 1.0);
        assert!((l - 0.2).abs() < 1e-12);
        assert_eq!(margin_ranking_loss(3.0, 1.0, 1.0, 1.0), (0.0, 0.0, 0.0));
        assert_eq!(margin_ranking_loss(0.0, 5.0, 0.0, 1.0), (0.0, 0.0, 0.0));
        let (l, d1, d2) = margin_ranking_loss(0.5, 0.0, -1.0, 1.0);
        assert!((l - 1.5).abs() < 1e-12);
        assert_eq!((d1, d2), (1.0, -1.0));
    }

    #[test]
    fn mse_basic() {
        let (l, g) = mse_loss(&[1.0, 3.0], &[0.0, 1.0]).unwrap();
        assert!((l - 2.5).abs() < 1e-12);
        assert_eq!(g, vec![1.0, 2.0]);
        assert!(mse_loss(&[], &[]).is_err());
    }
}
