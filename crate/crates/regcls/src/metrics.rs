use crate::error::{HarnessError, Result};

/// Mean absolute difference between paired MSEs.
pub fn gap_metric(reg_mses: &[f64], regcls_mses: &[f64]) -> Result<f64> {
    if reg_mses.len() != regcls_mses.len() {
        return Err(HarnessError::LengthMismatch { left: reg_mses.len(), right: regcls_mses.len() });
    }
    if reg_mses.is_empty() {
        return Err(HarnessError::Empty("gap pairs"));
    }
    let sum: f64 = reg_mses.iter().zip(regcls_mses).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / reg_mses.len() as f64)
}

/// Percentage of `(reg, reg+cls)` pairs where the second MSE is strictly lower.
/// `None` without pairs.
pub fn helps_percentage(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let helped = pairs.iter().filter(|(reg, cls)| cls < reg).count();
    Some(100.0 * helped as f64 / pairs.len() as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gap_examples() {
        assert_eq!(gap_metric(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(gap_metric(&[1.0, 2.0], &[0.5, 2.5]).unwrap(), 0.5);
        assert!(matches!(gap_metric(&[1.0], &[1.0, 2.0]), Err(HarnessError::LengthMismatch { .. })));
        assert!(gap_metric(&[], &[]).is_err());
    }

    #[test]
    fn help_rate_examples() {
        assert_eq!(helps_percentage(&[(2.0, 1.0), (3.0, 2.0)]), Some(100.0));
        assert_eq!(helps_percentage(&[(1.0, 2.0), (1.0, 1.0)]), Some(0.0));
        let mut pairs = vec![(1.0, 2.0); 5];
        pairs.extend([(2.0, 1.0); 3]);
        assert_eq!(helps_percentage(&pairs), Some(37.5));
        assert_eq!(helps_percentage(&[]), None);
    }

    #[test]
    fn mean_std_is_population() {
        let (m, s) = mean_std(&[1.0, 3.0]).unwrap();
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_std(&[]), None);
    }

    proptest! {
        #[test]
        fn gap_is_symmetric(pairs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..20)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert_eq!(gap_metric(&a, &b).unwrap(), gap_metric(&b, &a).unwrap());
        }
    }
}
