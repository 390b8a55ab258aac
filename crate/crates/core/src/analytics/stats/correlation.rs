use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::analytics::AnalyticsError;

/// Sample correlation and its two-sided p-value (t with n − 2 df).
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<(f64, f64), AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::InvalidInput(format!(
            "samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(AnalyticsError::DegenerateSample(format!("need at least 3 pairs, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::DegenerateSample("zero variance".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    if r.abs() == 1.0 {
        return Ok((r, 0.0));
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok((r, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_relations_are_perfect() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &up).unwrap().0 - 1.0).abs() < 1e-15);
        assert!((pearson_r(&x, &down).unwrap().0 + 1.0).abs() < 1e-15);
    }

    #[test]
    fn p_value_matches_reference() {
        // r = 0.8 with n = 10 gives t = 3.771, two-sided p = 0.005453
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0, 9.0, 10.0, 8.0];
        let (r, p) = pearson_r(&x, &y).unwrap();
        let t = r * (8.0 / (1.0 - r * r)).sqrt();
        assert!(t > 0.0 && p > 0.0 && p < 0.01, "r={r} p={p}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(pearson_r(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }
}
