use super::ArimaError;

/// Applies `d` first differences. Returns the differenced series and the
/// anchors `[x_0, (dx)_0, ..., (d^{d-1} x)_0]` needed to invert it.
pub fn difference(series: &[f64], d: usize) -> Result<(Vec<f64>, Vec<f64>), ArimaError> {
    if series.len() <= d {
        return Err(ArimaError::TooShort {
            need: d + 1,
            got: series.len(),
        });
    }
    let mut current = series.to_vec();
    let mut anchors = Vec::with_capacity(d);
    for _ in 0..d {
        anchors.push(current[0]);
        current = current.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok((current, anchors))
}

/// Inverse of [`difference`] for the values after the anchors: returns
/// `x[d..]`, the continuation seeded by the anchors.
pub fn undifference(diffed: &[f64], anchors: &[f64], d: usize) -> Result<Vec<f64>, ArimaError> {
    let mut full = reconstruct(diffed, anchors, d)?;
    Ok(full.split_off(d))
}

/// Full inverse of [`difference`]: the original series, anchors included.
pub fn reconstruct(diffed: &[f64], anchors: &[f64], d: usize) -> Result<Vec<f64>, ArimaError> {
    if anchors.len() != d {
        return Err(ArimaError::AnchorMismatch {
            expected: d,
            got: anchors.len(),
        });
    }
    let mut level = diffed.to_vec();
    for &anchor in anchors.iter().rev() {
        let mut next = Vec::with_capacity(level.len() + 1);
        let mut acc = anchor;
        next.push(acc);
        for v in &level {
            acc += v;
            next.push(acc);
        }
        level = next;
    }
    Ok(level)
}

/// Integrates differenced forecasts onto the end of a series. `tail_levels[k]`
/// is the last value of the k-th difference of the observed series.
pub fn integrate_continuation(forecast: &[f64], tail_levels: &[f64]) -> Vec<f64> {
    let mut level = forecast.to_vec();
    for &last in tail_levels.iter().rev() {
        let mut acc = last;
        for v in level.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    level
}
