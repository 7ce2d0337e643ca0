use super::EvalError;

fn check_aligned(a: &[f64], b: &[f64]) -> Result<(), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Length(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(EvalError::TooShort);
    }
    Ok(())
}

/// Fraction of pairs with distinct runtimes whose predicted order (lower
/// score = faster) matches the true order. Equal scores count as wrong.
pub fn ordered_pair_accuracy(scores: &[f64], runtimes: &[f64]) -> Result<f64, EvalError> {
    check_aligned(scores, runtimes)?;
    let (mut total, mut correct) = (0u64, 0u64);
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            let dt = runtimes[i] - runtimes[j];
            if dt == 0.0 {
                continue;
            }
            total += 1;
            let ds = scores[i] - scores[j];
            if ds != 0.0 && (ds > 0.0) == (dt > 0.0) {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(EvalError::AllTies);
    }
    Ok(correct as f64 / total as f64)
}

/// Kendall's tau-b.
pub fn kendall_tau(scores: &[f64], runtimes: &[f64]) -> Result<f64, EvalError> {
    check_aligned(scores, runtimes)?;
    let n = scores.len();
    let (mut concordant, mut discordant, mut ties_s, mut ties_t) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let ds = scores[i] - scores[j];
            let dt = runtimes[i] - runtimes[j];
            if ds == 0.0 {
                ties_s += 1;
            }
            if dt == 0.0 {
                ties_t += 1;
            }
            if ds != 0.0 && dt != 0.0 {
                if (ds > 0.0) == (dt > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if n0 == ties_s || n0 == ties_t {
        return Err(EvalError::ZeroVariance);
    }
    let denom = (((n0 - ties_s) as f64) * ((n0 - ties_t) as f64)).sqrt();
    Ok((concordant - discordant) as f64 / denom)
}

/// Mean absolute percentage gap between the chosen and optimal runtimes.
pub fn ape(pairs: &[(f64, f64)]) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sum = 0.0;
    for &(t_cm, t_star) in pairs {
        if t_star <= 0.0 || !t_star.is_finite() {
            return Err(EvalError::NonPositive(t_star));
        }
        sum += (t_cm - t_star).abs() / t_star;
    }
    Ok(sum / pairs.len() as f64 * 100.0)
}

/// `exp(mean(log(default / achieved)))`.
pub fn geomean_speedup(default: &[f64], achieved: &[f64]) -> Result<f64, EvalError> {
    if default.len() != achieved.len() {
        return Err(EvalError::Length(default.len(), achieved.len()));
    }
    if default.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut acc = 0.0;
    for (&d, &a) in default.iter().zip(achieved) {
        for v in [d, a] {
            if v <= 0.0 || !v.is_finite() {
                return Err(EvalError::NonPositive(v));
            }
        }
        acc += (d / a).ln();
    }
    Ok((acc / default.len() as f64).exp())
}

/// Data-collection expense `Σ β·|D|`, in millions.
pub fn dce(datasets: &[(f64, usize)]) -> f64 {
    datasets.iter().map(|&(beta, n)| beta * n as f64).sum::<f64>() / 1e6
}

/// Mean margin ranking loss over all pairs with distinct runtimes.
pub fn pairwise_ranking_loss(scores: &[f64], runtimes: &[f64], margin: f64) -> Result<f64, EvalError> {
    check_aligned(scores, runtimes)?;
    let (mut total, mut sum) = (0u64, 0.0);
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            if runtimes[i] == runtimes[j] {
                continue;
            }
            let y = (runtimes[i] - runtimes[j]).signum();
            total += 1;
            sum += crate::nn::margin_ranking_loss(scores[i], scores[j], y, margin).0;
        }
    }
    if total == 0 {
        return Err(EvalError::AllTies);
    }
    Ok(sum / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opa_examples() {
        assert_eq!(ordered_pair_accuracy(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(ordered_pair_accuracy(&[-1.0, -2.0, -3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let v = ordered_pair_accuracy(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ordered_pair_accuracy(&[1.0, 2.0], &[5.0, 5.0]), Err(EvalError::AllTies));
    }

    #[test]
    fn tau_examples() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(kendall_tau(&[3.0, 2.0, 1.0], &[10.0, 20.0, 30.0]).unwrap(), -1.0);
        let v = kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(kendall_tau(&[1.0, 1.0], &[1.0, 2.0]), Err(EvalError::ZeroVariance));
    }

    #[test]
    fn tau_b_with_ties() {
        // scores tie on one pair; n0 = 3, ties_s = 1, C = 2, D = 0
        let v = kendall_tau(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((v - 2.0 / (2.0f64 * 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ape_examples() {
        assert_eq!(ape(&[(100.0, 100.0)]).unwrap(), 0.0);
        assert!((ape(&[(110.0, 100.0)]).unwrap() - 10.0).abs() < 1e-12);
        assert!((ape(&[(110.0, 100.0), (100.0, 100.0)]).unwrap() - 5.0).abs() < 1e-12);
        assert!(ape(&[(1.0, 0.0)]).is_err());
    }

    #[test]
    fn geomean_examples() {
        assert_eq!(geomean_speedup(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        let v = geomean_speedup(&[2.0, 8.0], &[1.0, 2.0]).unwrap();
        assert!((v - 8f64.sqrt()).abs() < 1e-12);
        assert!(geomean_speedup(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn dce_examples() {
        assert_eq!(format!("{:.2}", dce(&[(1000.0, 500)])), "0.50");
        assert_eq!(format!("{:.2}", dce(&[(1.0, 10_000), (1000.0, 500)])), "0.51");
        assert_eq!(dce(&[]), 0.0);
    }

    #[test]
    fn ranking_loss_mean() {
        // pair (0,1): y = -1, r1 - r2 = -1 -> max(0, -1 + 1) = 0
        // pair (0,2): y = -1, r1 - r2 = 1 -> 2
        // pair (1,2): y = -1, r1 - r2 = 2 -> 3
        let v = pairwise_ranking_loss(&[1.0, 2.0, 0.0], &[1.0, 2.0, 3.0], 1.0).unwrap();
        assert!((v - 5.0 / 3.0).abs() < 1e-12);
    }
}
