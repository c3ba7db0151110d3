use alloc::format;

use crate::error::{Error, Result};

/// Least-squares slope of `ln(err)` against `ln(H)`.
pub fn fit_order(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::Domain(format!(
            "order fit needs at least two points, got {}",
            pairs.len()
        )));
    }
    if let Some(&(h, e)) = pairs.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0)) {
        return Err(Error::Domain(format!(
            "order fit needs positive values, got H={h}, err={e}"
        )));
    }
    let n = pairs.len() as f64;
    let (sx, sy) = pairs.iter().fold((0.0, 0.0), |(sx, sy), &(h, e)| {
        (sx + libm::log(h), sy + libm::log(e))
    });
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(h, e) in pairs {
        let dx = libm::log(h) - mx;
        sxy += dx * (libm::log(e) - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(Error::Domain("order fit needs distinct H values".into()));
    }
    Ok(sxy / sxx)
}
