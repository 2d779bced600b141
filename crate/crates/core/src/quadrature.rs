//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Every radial integral in the crate reduces to a smooth integrand on a
//! short interval, so a globally adaptive bisection with the 15-point
//! Kronrod rule and its embedded 7-point Gauss rule is sufficient.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadTolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        Self {
            rel: 1e-12,
            abs: 0.0,
            max_intervals: 2000,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// One application of the 15-point Kronrod rule. Returns (kronrod, |kronrod - gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        resk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

/// Globally adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTolerance) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite interval [{a}, {b}]")));
    }
    let (v, e) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    loop {
        if !total.is_finite() {
            return Err(Error::Quadrature(format!(
                "integrand is not finite on [{a}, {b}]"
            )));
        }
        let target = tol.abs.max(tol.rel * total.abs());
        // Below roughly 50 ulps of the result the Kronrod error estimate is
        // dominated by rounding and further bisection cannot improve it.
        if err <= target || err <= 50.0 * f64::EPSILON * total.abs() {
            return Ok(Quadrature {
                value: total,
                error: err,
                intervals: pieces.len(),
            });
        }
        if pieces.len() >= tol.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:.3e} above target {target:.3e} after {} subintervals on [{a}, {b}]",
                pieces.len()
            )));
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one subinterval");
        let (lo, hi, pv, pe) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let q = integrate(|x| x.powi(20) - 3.0 * x, 0.0, 1.0, QuadTolerance::default()).unwrap();
        assert!((q.value - (1.0 / 21.0 - 1.5)).abs() < 1e-15);
    }

    #[test]
    fn adapts_to_peaked_integrand() {
        // Lorentzian peak: exact value is atan(100) - atan(-100) over 1/100 scaling.
        let q = integrate(|x| 1.0 / (1.0 + 1e4 * x * x), -1.0, 1.0, QuadTolerance::default()).unwrap();
        let exact = 2.0 * (100.0f64).atan() / 100.0;
        assert!(((q.value - exact) / exact).abs() < 1e-12, "{}", q.value);
        assert!(q.intervals > 1);
    }

    #[test]
    fn reversed_interval_is_negative() {
        let q = integrate(|x| x.exp(), 1.0, 0.0, QuadTolerance::default()).unwrap();
        assert!((q.value + (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn reports_failure_on_nonintegrable() {
        let tol = QuadTolerance {
            max_intervals: 50,
            ..Default::default()
        };
        assert!(integrate(|x| 1.0 / x.abs().sqrt().max(1e-300).powi(4), -1.0, 1.0, tol).is_err());
    }
}
