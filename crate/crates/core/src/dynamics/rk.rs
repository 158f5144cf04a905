//! Verner's efficient 6(5) pair with a proportional step-size controller.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub type Vec6 = SVector<f64, 6>;

const STAGES: usize = 9;

const A: [[f64; STAGES]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.6e-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.923_996_296_296_296_2e-2, 7.669_337_037_037_037e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.35975e-1, 0.0, 0.107925, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.318_683_415_233_148_4, 0.0, -5.042_058_063_628_562, 4.220_674_648_395_414, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-41.872_591_664_327_516, 0.0, 159.432_562_163_137_5, -122.119_213_565_010_03, 5.531_743_066_200_054, 0.0, 0.0, 0.0, 0.0],
    [-54.430_156_935_316_504, 0.0, 207.067_251_365_018_48, -158.610_813_784_59, 6.991_816_585_950_242, -1.859_723_106_220_323_4e-2, 0.0, 0.0, 0.0],
    [-54.663_741_787_281_98, 0.0, 207.952_806_255_389_36, -159.288_957_474_499_5, 7.018_743_740_796_944, -1.833_878_590_504_572_2e-2, -5.119_484_997_882_099e-4, 0.0, 0.0],
    [3.438_957_868_357_036e-2, 0.0, 0.0, 0.258_262_455_563_350_3, 0.420_937_118_967_353_7, 4.405_396_469_669_31, -176.483_119_024_298_65, 172.364_133_401_415_07, 0.0],
];

const B_HIGH: [f64; STAGES] = [
    3.438_957_868_357_036e-2, 0.0, 0.0, 0.258_262_455_563_350_3, 0.420_937_118_967_353_7,
    4.405_396_469_669_31, -176.483_119_024_298_65, 172.364_133_401_415_07, 0.0,
];

const B_LOW: [f64; STAGES] = [
    4.909_967_648_382_49e-2, 0.0, 0.0, 0.225_111_222_951_652_42, 0.469_468_225_302_956_2,
    0.806_579_224_998_886_8, 0.0, -0.607_119_489_177_796, 5.686_113_944_047_569_6e-2,
];

/// Error-control settings of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
}

pub const DEFAULT_TOL: f64 = 1e-12;

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: DEFAULT_TOL, atol: DEFAULT_TOL, h_init: 1e-3, h_min: 1e-14, h_max: 0.05 }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Tolerances { rtol: tol, atol: tol, ..Default::default() }
    }

    /// Defaults, with `BILLIARDS_TOL` overriding both tolerances when set.
    pub fn from_env() -> Self {
        match std::env::var("BILLIARDS_TOL").ok().and_then(|s| s.trim().parse::<f64>().ok()) {
            Some(tol) if tol > 0.0 && tol.is_finite() => Self::uniform(tol),
            _ => Self::default(),
        }
    }
}

/// One Runge–Kutta step of size `h` for the autonomous system `y' = f(y)`.
/// Returns the sixth-order solution and the difference to the embedded
/// fifth-order one.
pub fn rk_step<const N: usize, F>(f: &F, y: &SVector<f64, N>, h: f64) -> Result<(SVector<f64, N>, SVector<f64, N>)>
where
    F: Fn(&SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let mut k = [SVector::<f64, N>::zeros(); STAGES];
    k[0] = f(y)?;
    for i in 1..STAGES {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(i) {
            if A[i][j] != 0.0 {
                yi += kj * (A[i][j] * h);
            }
        }
        k[i] = f(&yi)?;
    }
    let mut high = *y;
    let mut err = SVector::<f64, N>::zeros();
    for i in 0..STAGES {
        high += k[i] * (B_HIGH[i] * h);
        err += k[i] * ((B_HIGH[i] - B_LOW[i]) * h);
    }
    Ok((high, err))
}

/// Weighted RMS norm of the error estimate.
pub fn error_norm<const N: usize>(err: &SVector<f64, N>, y0: &SVector<f64, N>, y1: &SVector<f64, N>, tol: &Tolerances) -> f64 {
    let mut sum = 0.0;
    for i in 0..N {
        let scale = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
        sum += (err[i] / scale).powi(2);
    }
    (sum / N as f64).sqrt()
}

/// Step-size factor from the error norm, clamped to `[0.2, 5]`.
pub fn step_factor(err_norm: f64) -> f64 {
    if err_norm == 0.0 {
        return 5.0;
    }
    (0.9 * err_norm.powf(-1.0 / 6.0)).clamp(0.2, 5.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_rows_sum_to_nodes() {
        let c = [0.0, 0.6e-1, 9.593_333_333_333_333e-2, 0.1439, 0.4973, 0.9725, 0.9995, 1.0, 1.0];
        for i in 0..STAGES {
            let s: f64 = A[i].iter().sum();
            assert!((s - c[i]).abs() < 1e-12, "row {i}");
        }
        assert!((B_HIGH.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((B_LOW.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sixth_order_on_exponential() {
        let f = |y: &Vec6| Ok(*y);
        let y0 = Vec6::from_element(1.0);
        let err_at = |h: f64| ((rk_step(&f, &y0, h).unwrap().0[0]) - h.exp()).abs();
        let ratio = err_at(0.2) / err_at(0.1);
        assert!(ratio > 100.0 && ratio < 160.0, "ratio {ratio}");
    }
}
