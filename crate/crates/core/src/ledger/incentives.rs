use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IncentiveError {
    #[error("no validated costs to reward")]
    Empty,
    #[error("payout total overflows")]
    Overflow,
}

/// Splits `fee * valid_count` by negated, clamped z-scores of `costs`.
///
/// Lower cost earns more. Shares are rounded half away from zero and each
/// is capped by what is left, so the last entry takes the remainder and
/// the total is exact.
pub fn compute_incentives(costs: &[u128], fee: u128, valid_count: usize) -> Result<Vec<u128>, IncentiveError> {
    if costs.is_empty() {
        return Err(IncentiveError::Empty);
    }
    let total = fee.checked_mul(valid_count as u128).ok_or(IncentiveError::Overflow)?;
    let len = costs.len() as f64;
    let values: Vec<f64> = costs.iter().map(|&c| c as f64).collect();
    let mean = values.iter().sum::<f64>() / len;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len).sqrt();
    let mut shares: Vec<f64> = if std > 0.0 {
        values.iter().map(|v| (-(v - mean) / std).max(0.0)).collect()
    } else {
        vec![0.0; costs.len()]
    };
    let sum: f64 = shares.iter().sum();
    if sum > 0.0 {
        shares.iter_mut().for_each(|s| *s /= sum);
    } else {
        shares = vec![1.0 / len; costs.len()];
    }
    let mut remaining = total;
    let mut out = Vec::with_capacity(costs.len());
    for s in &shares[..shares.len() - 1] {
        let v = ((total as f64) * s).round().max(0.0) as u128;
        let v = v.min(remaining);
        remaining -= v;
        out.push(v);
    }
    out.push(remaining);
    Ok(out)
}
