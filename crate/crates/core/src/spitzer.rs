//! Windings of the Brownian loop soup around a point, in closed form.
//!
//! Loops of diameter in `[δ, d_z]` wind around `z` with characteristic
//! function `(d_z/δ)^{-λβ'(2π-β')/4π²}`, `β' = β mod 2π`. Dividing the winding
//! by `log δ` gives a Cauchy limit of scale `λ/2π` as `δ → 0`. Loops larger
//! than `d_z` contribute an independent factor whose characteristic function
//! at `s/log δ → 0` tends to 1; it is not modelled here.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SoupError};
use crate::loops::check_intensity;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusWindingParams {
    pub delta: f64,
    pub d_z: f64,
    pub lambda: f64,
}

impl AnnulusWindingParams {
    pub fn new(delta: f64, d_z: f64, lambda: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < d_z && d_z.is_finite()) {
            return Err(SoupError::InvalidArgument(format!("need 0 < delta < d_z, got delta = {delta}, d_z = {d_z}")));
        }
        check_intensity(lambda)?;
        Ok(Self { delta, d_z, lambda })
    }
}

/// Centered Cauchy law of scale `λ/2π`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyLaw {
    pub scale: f64,
}

impl CauchyLaw {
    pub fn for_intensity(lambda: f64) -> Result<Self> {
        check_intensity(lambda)?;
        Ok(Self { scale: lambda / (2.0 * PI) })
    }

    pub fn charfn(&self, s: f64) -> f64 {
        (-self.scale * s.abs()).exp()
    }

    pub fn density(&self, x: f64) -> f64 {
        self.scale / (PI * (x * x + self.scale * self.scale))
    }
}

/// `β - 2π⌊β/2π⌋ ∈ [0, 2π)`.
pub fn reduce_angle(beta: f64) -> f64 {
    let r = beta - 2.0 * PI * (beta / (2.0 * PI)).floor();
    if r >= 2.0 * PI { 0.0 } else { r }
}

pub fn annulus_charfn(params: &AnnulusWindingParams, beta: f64) -> f64 {
    let b = reduce_angle(beta);
    let exponent = params.lambda * b * (2.0 * PI - b) / (4.0 * PI * PI);
    // (d_z/δ)^{-e}, through logs to keep tiny δ exact
    (-exponent * (params.d_z.ln() - params.delta.ln())).exp()
}

/// [`annulus_charfn`] at `β = s / log δ`.
pub fn scaled_charfn(params: &AnnulusWindingParams, s: f64) -> Result<f64> {
    if params.delta >= 1.0 {
        return Err(SoupError::InvalidArgument(format!("delta = {} must be below 1", params.delta)));
    }
    Ok(annulus_charfn(params, s / params.delta.ln()))
}

pub fn cauchy_limit_charfn(lambda: f64, s: f64) -> Result<f64> {
    Ok(CauchyLaw::for_intensity(lambda)?.charfn(s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub delta: f64,
    pub s: f64,
    pub scaled_charfn: f64,
    pub limit_charfn: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub lambda: f64,
    pub d_z: f64,
    pub rows: Vec<ConvergenceRow>,
    /// `(δ, sup_s |error|)` in δ-grid order.
    pub sup_errors: Vec<(f64, f64)>,
}

impl ConvergenceReport {
    /// Whether the sup error strictly decreases along the δ grid.
    pub fn is_monotone(&self) -> bool {
        self.sup_errors.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn sup_error_at(&self, delta: f64) -> Option<f64> {
        self.sup_errors.iter().find(|(d, _)| *d == delta).map(|&(_, e)| e)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,s,scaled_charfn,limit_charfn,abs_error\n");
        for r in &self.rows {
            out.push_str(&format!("{:e},{},{:.17e},{:.17e},{:.17e}\n", r.delta, r.s, r.scaled_charfn, r.limit_charfn, r.abs_error));
        }
        out
    }
}

pub fn convergence_report(lambda: f64, d_z: f64, s_grid: &[f64], delta_grid: &[f64]) -> Result<ConvergenceReport> {
    let cauchy = CauchyLaw::for_intensity(lambda)?;
    let mut rows = Vec::with_capacity(s_grid.len() * delta_grid.len());
    let mut sup_errors = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let params = AnnulusWindingParams::new(delta, d_z, lambda)?;
        let mut sup = 0.0f64;
        for &s in s_grid {
            let v = scaled_charfn(&params, s)?;
            let lim = cauchy.charfn(s);
            let err = (v - lim).abs();
            sup = sup.max(err);
            rows.push(ConvergenceRow { delta, s, scaled_charfn: v, limit_charfn: lim, abs_error: err });
        }
        sup_errors.push((delta, sup));
    }
    Ok(ConvergenceReport { lambda, d_z, rows, sup_errors })
}

/// `10^{-2}, 10^{-3}, …, 10^{-12}`.
pub fn default_delta_grid() -> Vec<f64> {
    (2..=12).map(|k| 10f64.powi(-k)).collect()
}

/// `n` equally spaced points on `[-r, r]`.
pub fn symmetric_grid(r: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -r + 2.0 * r * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(delta: f64) -> AnnulusWindingParams {
        AnnulusWindingParams::new(delta, 1.0, 2.0 * PI).unwrap()
    }

    #[test]
    fn annulus_examples() {
        let p = AnnulusWindingParams::new(1e-3, 2.0, 1.0).unwrap();
        assert_eq!(annulus_charfn(&p, 0.0), 1.0);
        assert!((annulus_charfn(&p, PI) - (2.0f64 / 1e-3).powf(-0.25)).abs() < 1e-15);
        assert_eq!(annulus_charfn(&p, 2.0 * PI), 1.0);
        assert_eq!(annulus_charfn(&p, -4.0 * PI), 1.0);
    }

    #[test]
    fn params_validation() {
        assert!(AnnulusWindingParams::new(0.5, 0.4, 1.0).is_err());
        assert!(AnnulusWindingParams::new(0.0, 1.0, 1.0).is_err());
        assert!(AnnulusWindingParams::new(0.1, 1.0, 0.0).is_err());
        let p = AnnulusWindingParams::new(1.5, 3.0, 1.0).unwrap();
        assert!(scaled_charfn(&p, 1.0).is_err());
    }

    #[test]
    fn limit_examples() {
        assert_eq!(cauchy_limit_charfn(1.0, 0.0).unwrap(), 1.0);
        assert!((cauchy_limit_charfn(2.0 * PI, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-16);
        let a = cauchy_limit_charfn(1.3, 0.7).unwrap();
        assert!((cauchy_limit_charfn(2.6, 0.7).unwrap() - a * a).abs() < 1e-16);
        assert!(cauchy_limit_charfn(0.0, 1.0).is_err());
        let c = CauchyLaw::for_intensity(2.0 * PI).unwrap();
        assert!((c.density(0.0) - 1.0 / PI).abs() < 1e-16);
    }

    #[test]
    fn scaled_values() {
        assert_eq!(scaled_charfn(&params(1e-6), 0.0).unwrap(), 1.0);
        let v = scaled_charfn(&params(1e-300), 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 2e-3);
        let gaps: Vec<f64> = [1e-4, 1e-8, 1e-12]
            .iter()
            .map(|&d| (scaled_charfn(&params(d), 2.0).unwrap() - scaled_charfn(&params(d), -2.0).unwrap()).abs())
            .collect();
        // β ↦ 2π - β symmetry makes the reflection exact up to round-off
        assert!(gaps.iter().all(|&g| g < 1e-12), "{gaps:?}");
    }

    #[test]
    fn report_converges() {
        let s = symmetric_grid(5.0, 41);
        let r = convergence_report(2.0 * PI, 1.0, &s, &default_delta_grid()).unwrap();
        assert!(r.is_monotone());
        let (e4, e8, e12) = (r.sup_error_at(1e-4).unwrap(), r.sup_error_at(1e-8).unwrap(), r.sup_error_at(1e-12).unwrap());
        assert!(e4 > e8 && e8 > e12);
        assert!(e12 * 2.0 <= e4);
        assert_eq!(r.rows.len(), 41 * 11);
        assert!(r.to_csv().starts_with("delta,s,scaled_charfn,limit_charfn,abs_error\n"));
    }

    #[test]
    fn wider_s_range_has_larger_error() {
        let narrow = convergence_report(2.0 * PI, 1.0, &symmetric_grid(1.0, 21), &[1e-6]).unwrap();
        let wide = convergence_report(2.0 * PI, 1.0, &symmetric_grid(5.0, 21), &[1e-6]).unwrap();
        assert!(wide.sup_errors[0].1 > narrow.sup_errors[0].1);
    }

    #[test]
    fn outer_scale_washes_out() {
        let s = symmetric_grid(3.0, 13);
        let grid = [1e-4, 1e-40, 1e-200];
        let a = convergence_report(1.0, 1.0, &s, &grid).unwrap();
        let b = convergence_report(1.0, 0.1, &s, &grid).unwrap();
        let gaps: Vec<f64> = (0..3)
            .map(|i| {
                a.rows[i * 13..(i + 1) * 13]
                    .iter()
                    .zip(&b.rows[i * 13..(i + 1) * 13])
                    .map(|(x, y)| (x.scaled_charfn - y.scaled_charfn).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    proptest! {
        #[test]
        fn periodic_and_reflected(beta in -20.0f64..20.0, delta in 1e-9f64..0.5, lambda in 0.1f64..10.0) {
            let p = AnnulusWindingParams::new(delta, 1.0, lambda).unwrap();
            let v = annulus_charfn(&p, beta);
            prop_assert!(v > 0.0 && v <= 1.0);
            prop_assert!((annulus_charfn(&p, beta + 2.0 * PI) - v).abs() < 1e-12);
            prop_assert!((annulus_charfn(&p, 2.0 * PI - beta) - v).abs() < 1e-12);
        }

        #[test]
        fn scaled_in_unit_interval(s in -50.0f64..50.0, delta in 1e-12f64..0.9) {
            let p = AnnulusWindingParams::new(delta, 1.0, 2.0).unwrap();
            let v = scaled_charfn(&p, s).unwrap();
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}
