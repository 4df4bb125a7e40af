//! Dormand-Prince 8(5,3) explicit Runge-Kutta integrator for complex state vectors.
//!
//! Coefficients follow Hairer, Norsett & Wanner's DOP853. Step-size control uses the
//! combined fifth/third-order error estimate and the usual safety factors; there is no
//! dense output, callers that need samples integrate interval by interval.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dop853Options {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step; `None` means the whole interval.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dop853Options {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            h_max: None,
            max_steps: 2_000_000,
        }
    }
}

impl Dop853Options {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rel_tol: tol,
            abs_tol: tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for IntegrationStats {
    fn add_assign(&mut self, rhs: Self) {
        self.accepted += rhs.accepted;
        self.rejected += rhs.rejected;
        self.evaluations += rhs.evaluations;
    }
}

const SAFE: f64 = 0.9;
const FAC1: f64 = 0.333;
const FAC2: f64 = 6.0;
const EXPO1: f64 = 1.0 / 8.0;

/// Integrates `dy/dt = rhs(t, y)` from `t0` to `t1` in place.
pub fn integrate<F>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y: &mut [Complex64],
    opts: &Dop853Options,
) -> Result<IntegrationStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let mut stats = IntegrationStats::default();
    let span = t1 - t0;
    if span == 0.0 || y.is_empty() {
        return Ok(stats);
    }
    if !(opts.rel_tol > 0.0) || !(opts.abs_tol >= 0.0) {
        return Err(Error::invalid("rel_tol", "tolerances must be positive"));
    }
    let dir = span.signum();
    let h_max = opts.h_max.unwrap_or(span.abs()).min(span.abs());
    let n = y.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut k: Vec<Vec<Complex64>> = (0..12).map(|_| vec![zero; n]).collect();
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];

    let mut t = t0;
    rhs(t, y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = initial_step(&mut rhs, t, y, &k[0], dir, h_max, opts, &mut stage, &mut y_new);
    stats.evaluations += 1;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::IntegratorFailure(format!(
                "maximum step count {} reached at t = {t:e}",
                opts.max_steps
            )));
        }
        let remaining = t1 - t;
        if (remaining * dir) <= 1e-15 * t1.abs().max(t0.abs()).max(span.abs()) {
            break;
        }
        let mut last = false;
        if (t + 1.01 * h - t1) * dir >= 0.0 {
            h = t1 - t;
            last = true;
        }
        if h.abs() < 1e-14 * t.abs().max(span.abs()) || h.abs() < f64::MIN_POSITIVE {
            return Err(Error::Stiffness { t, h });
        }

        for s in 1..12 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += kj[i] * (a * h);
                    }
                }
                stage[i] = acc;
            }
            rhs(t + C[s] * h, &stage, &mut k[s]);
        }
        stats.evaluations += 11;

        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..n {
            let mut incr = zero;
            for j in 0..12 {
                if B[j] != 0.0 {
                    incr += k[j][i] * B[j];
                }
            }
            y_new[i] = y[i] + incr * h;
            let sk = opts.abs_tol + opts.rel_tol * y[i].norm().max(y_new[i].norm());
            let e3 = incr - k[0][i] * BHH[0] - k[8][i] * BHH[1] - k[11][i] * BHH[2];
            let mut e5 = zero;
            for j in 0..12 {
                if ER[j] != 0.0 {
                    e5 += k[j][i] * ER[j];
                }
            }
            err2 += (e3 / sk).norm_sqr();
            err += (e5 / sk).norm_sqr();
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * n as f64)).sqrt();
        if !err.is_finite() {
            return Err(Error::IntegratorFailure(format!(
                "non-finite error estimate at t = {t:e}"
            )));
        }

        let fac11 = err.powf(EXPO1);
        let fac = (1.0 / FAC2).max((1.0 / FAC1).min(fac11 / SAFE));
        let mut h_new = h / fac;

        if err <= 1.0 {
            stats.accepted += 1;
            t += h;
            y.copy_from_slice(&y_new);
            if last {
                break;
            }
            rhs(t, y, &mut k[0]);
            stats.evaluations += 1;
            if h_new.abs() > h_max {
                h_new = dir * h_max;
            }
            if last_rejected && h_new.abs() > h.abs() {
                h_new = h;
            }
            last_rejected = false;
        } else {
            h_new = h / (1.0 / FAC1).min(fac11 / SAFE);
            stats.rejected += 1;
            last_rejected = true;
        }
        h = h_new;
    }
    Ok(stats)
}

#[allow(clippy::too_many_arguments)]
fn initial_step<F>(
    rhs: &mut F,
    t: f64,
    y: &[Complex64],
    f0: &[Complex64],
    dir: f64,
    h_max: f64,
    opts: &Dop853Options,
    y1: &mut [Complex64],
    f1: &mut [Complex64],
) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y.len() as f64;
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..y.len() {
        let sk = opts.abs_tol + opts.rel_tol * y[i].norm();
        dnf += (f0[i] / sk).norm_sqr();
        dny += (y[i] / sk).norm_sqr();
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(h_max);
    for i in 0..y.len() {
        y1[i] = y[i] + f0[i] * (dir * h);
    }
    rhs(t + dir * h, y1, f1);
    let mut der2 = 0.0;
    for i in 0..y.len() {
        let sk = opts.abs_tol + opts.rel_tol * y[i].norm();
        der2 += ((f1[i] - f0[i]) / sk).norm_sqr();
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.abs().max((dnf / n).sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    dir * (100.0 * h).min(h1).min(h_max)
}

const C: [f64; 12] = [
    0.0,
    5.260_015_195_876_773E-2,
    7.890_022_793_815_16E-2,
    1.183_503_419_072_274E-1,
    2.816_496_580_927_726E-1,
    3.333_333_333_333_333E-1,
    0.25,
    3.076_923_076_923_077E-1,
    6.512_820_512_820_513E-1,
    0.6,
    8.571_428_571_428_571E-1,
    1.0,
];

const A: [[f64; 12]; 12] = [
    [0.0; 12],
    [5.260_015_195_876_773E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        1.972_505_698_453_79E-2,
        5.917_517_095_361_37E-2,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        2.958_758_547_680_685E-2,
        0.0,
        8.876_275_643_042_054E-2,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        2.413_651_341_592_667E-1,
        0.0,
        -8.845_494_793_282_861E-1,
        9.248_340_032_617_92E-1,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        3.703_703_703_703_703_5E-2,
        0.0,
        0.0,
        1.708_286_087_294_738_6E-1,
        1.254_676_875_668_224_2E-1,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        3.7109375E-2,
        0.0,
        0.0,
        1.702_522_110_195_440_5E-1,
        6.021_653_898_045_596E-2,
        -1.7578125E-2,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        3.709_200_011_850_479E-2,
        0.0,
        0.0,
        1.703_839_257_122_399_8E-1,
        1.072_620_304_463_732_8E-1,
        -1.531_943_774_862_440_2E-2,
        8.273_789_163_814_023E-3,
        0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        6.241_109_587_160_757E-1,
        0.0,
        0.0,
        -3.360_892_629_446_941_4,
        -8.682_193_468_417_26E-1,
        2.759_209_969_944_671E1,
        2.015_406_755_047_789_4E1,
        -4.348_988_418_106_996E1,
        0.0, 0.0, 0.0, 0.0,
    ],
    [
        4.776_625_364_382_643_4E-1,
        0.0,
        0.0,
        -2.488_114_619_971_667_7,
        -5.902_908_268_368_43E-1,
        2.123_005_144_818_119_3E1,
        1.527_923_363_288_242_3E1,
        -3.328_821_096_898_486E1,
        -2.033_120_170_850_862_7E-2,
        0.0, 0.0, 0.0,
    ],
    [
        -9.371_424_300_859_873E-1,
        0.0,
        0.0,
        5.186_372_428_844_064,
        1.091_437_348_996_729_5,
        -8.149_787_010_746_927,
        -1.852_006_565_999_696E1,
        2.273_948_709_935_050_5E1,
        2.493_605_552_679_652_3,
        -3.046_764_471_898_219_6,
        0.0, 0.0,
    ],
    [
        2.273_310_147_516_538,
        0.0,
        0.0,
        -1.053_449_546_673_725E1,
        -2.000_872_058_224_862_5,
        -1.795_893_186_311_88E1,
        2.794_888_452_941_996E1,
        -2.858_998_277_135_023_5,
        -8.872_856_933_530_63,
        1.236_056_717_579_430_3E1,
        6.433_927_460_157_636E-1,
        0.0,
    ],
];

const B: [f64; 12] = [
    5.429_373_411_656_876_5E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199E-1,
    -1.521_609_496_625_161E-1,
    2.013_654_008_040_303_4E-1,
    4.471_061_572_777_259E-2,
];

const ER: [f64; 12] = [
    1.312_004_499_419_488E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502E-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6E-1,
    3.341_791_187_130_175E-1,
    8.192_320_648_511_571E-2,
    -2.235_530_786_388_629_4E-2,
];

const BHH: [f64; 3] = [
    2.440_944_881_889_764E-1,
    7.338_466_882_816_118E-1,
    2.205_882_352_941_176_6E-2,
];

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rotating_phase_matches_exponential() {
        let omega = 3.7;
        let mut y = vec![c(1.0, 0.0)];
        let stats = integrate(
            |_, y, dy| dy[0] = c(0.0, -omega) * y[0],
            0.0,
            10.0,
            &mut y,
            &Dop853Options::with_tol(1e-12),
        )
        .unwrap();
        let exact = Complex64::from_polar(1.0, -omega * 10.0);
        assert!((y[0] - exact).norm() < 1e-10, "{:?} vs {:?}", y[0], exact);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn eighth_order_convergence_on_fixed_steps() {
        // y' = t^7 is integrated exactly by an order-8 method
        let mut y = vec![c(0.0, 0.0)];
        integrate(
            |t, _, dy| dy[0] = c(t.powi(7), 0.0),
            0.0,
            2.0,
            &mut y,
            &Dop853Options::with_tol(1e-6),
        )
        .unwrap();
        assert!((y[0].re - 2f64.powi(8) / 8.0).abs() < 1e-9);
    }

    #[test]
    fn backward_integration() {
        let mut y = vec![c(1.0, 0.0)];
        integrate(
            |_, y, dy| dy[0] = y[0],
            1.0,
            0.0,
            &mut y,
            &Dop853Options::with_tol(1e-12),
        )
        .unwrap();
        assert!((y[0].re - (-1f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn zero_span_is_identity() {
        let mut y = vec![c(0.3, 0.4)];
        let stats = integrate(|_, _, dy| dy[0] = c(1.0, 0.0), 2.0, 2.0, &mut y, &Default::default())
            .unwrap();
        assert_eq!(y[0], c(0.3, 0.4));
        assert_eq!(stats.evaluations, 0);
    }

    #[test]
    fn max_steps_is_reported() {
        let mut y = vec![c(1.0, 0.0)];
        let opts = Dop853Options {
            max_steps: 3,
            ..Dop853Options::with_tol(1e-13)
        };
        let err = integrate(|_, y, dy| dy[0] = y[0] * c(0.0, 50.0), 0.0, 100.0, &mut y, &opts)
            .unwrap_err();
        assert!(matches!(err, Error::IntegratorFailure(_)));
    }
}
