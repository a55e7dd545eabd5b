use super::lm::{levenberg_marquardt, LmOptions};
use super::{names, FitResult};
use crate::error::{Error, Result};
use crate::stats::{linear_regression, mean};

/// Fit of y = A·exp(−t/τ) + c.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<FitResult> {
    let n = t.len();
    if n != y.len() || n < 4 {
        return Err(Error::InsufficientData("exponential fit needs at least 4 paired points".into()));
    }
    let t0 = t.iter().copied().fold(f64::INFINITY, f64::min);
    let t1 = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(Error::InsufficientData("exponential fit needs distinct times".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
    let tail = (n / 10).max(1);
    let c0 = mean(&idx[n - tail..].iter().map(|&i| y[i]).collect::<Vec<_>>());
    let first = y[idx[0]] - c0;
    let sign = if first >= 0.0 { 1.0 } else { -1.0 };
    let zmax = idx.iter().map(|&i| sign * (y[i] - c0)).fold(0.0_f64, f64::max);
    let (xs, ls): (Vec<f64>, Vec<f64>) = idx
        .iter()
        .filter(|&&i| sign * (y[i] - c0) > 0.1 * zmax)
        .map(|&i| (t[i], (sign * (y[i] - c0)).ln()))
        .unzip();
    let (a0, tau0) = match linear_regression(&xs, &ls) {
        Ok(line) if line.slope < 0.0 => (sign * line.intercept.exp(), -1.0 / line.slope),
        _ => (first * (t0 / (span / 3.0)).exp(), span / 3.0),
    };
    // Fitted in terms of the rate 1/τ so that growth stays reachable.
    let mut p0 = [a0, 1.0 / tau0, c0];
    if let Some(growth) = three_point_growth(&idx, t, y) {
        p0 = growth;
    }
    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let residuals = |p: &[f64], r: &mut [f64]| {
        for i in 0..n {
            r[i] = p[0] * (-t[i] * p[1]).exp() + p[2] - y[i];
        }
    };
    let steps = vec![
        1e-6 * p0[0].abs().max(1e-9 * scale),
        1e-6 * p0[1].abs().max(1e-9 / span),
        1e-6 * scale,
    ];
    let opts = LmOptions {
        steps: Some(steps),
        ..LmOptions::default()
    };
    let mut out = levenberg_marquardt(residuals, n, &p0, &opts);
    let rate = out.params[1];
    out.params[1] = 1.0 / rate;
    out.stderr[1] /= rate * rate;
    let mut fit = FitResult::from_outcome(&names(&["amplitude", "tau", "offset"]), &out);
    let tau = out.params[1];
    if !(tau > 0.0) {
        fit.flag("non_positive_decay");
    } else if span < 3.0 * tau {
        fit.flag("span_shorter_than_3tau");
    }
    Ok(fit)
}


/// Start values for an increasing-magnitude series, from the means of the
/// first, middle and last twentieth of the samples.
fn three_point_growth(idx: &[usize], t: &[f64], y: &[f64]) -> Option<[f64; 3]> {
    let n = idx.len();
    let w = (n / 20).max(1);
    let avg = |range: &[usize]| -> (f64, f64) {
        let k = range.len() as f64;
        (
            range.iter().map(|&i| t[i]).sum::<f64>() / k,
            range.iter().map(|&i| y[i]).sum::<f64>() / k,
        )
    };
    let (ta, ya) = avg(&idx[..w]);
    let mid = n / 2;
    let (tm, ym) = avg(&idx[mid.saturating_sub(w / 2)..(mid + w - w / 2).min(n)]);
    let (tb, yb) = avg(&idx[n - w..]);
    let q = (yb - ym) / (ym - ya);
    if !(q > 1.0) || !q.is_finite() {
        return None;
    }
    let rate = -q.ln() / (tb - tm);
    let (ea, eb) = ((-rate * ta).exp(), (-rate * tb).exp());
    let a = (yb - ya) / (eb - ea);
    Some([a, rate, ya - a * ea])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_decay() {
        let t: Vec<f64> = (0..60).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|&x| 20.0 * (-x / 0.5).exp() + 0.3).collect();
        let fit = fit_exponential(&t, &y).unwrap();
        assert!(((fit.get("amplitude").unwrap() - 20.0) / 20.0).abs() < 1e-8);
        assert!(((fit.get("tau").unwrap() - 0.5) / 0.5).abs() < 1e-8);
        assert!(((fit.get("offset").unwrap() - 0.3) / 0.3).abs() < 1e-8);
        assert!(fit.flags.is_empty());
    }

    #[test]
    fn noiseless_rise() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&x| 10.0 * (1.0 - (-x).exp())).collect();
        let fit = fit_exponential(&t, &y).unwrap();
        assert!((fit.get("amplitude").unwrap() + 10.0).abs() < 1e-7);
        assert!((fit.get("tau").unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn growth_is_flagged() {
        let t: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&x| (x / 0.7).exp()).collect();
        let fit = fit_exponential(&t, &y).unwrap();
        assert!(fit.has_flag("non_positive_decay"), "{fit:?}");
    }
}
