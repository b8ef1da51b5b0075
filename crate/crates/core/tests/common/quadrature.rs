//! Adaptive Gauss-Kronrod (7/15) quadrature used as an independent oracle
//! in tests. Never used by the library itself.

#![allow(dead_code)]

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
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

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// ∫_a^b f by globally adaptive bisection: the panel with the largest error
/// estimate is split until the summed error meets `max(tol, 1e-14 |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    // Seed with a uniform partition so narrow features are not missed.
    let pieces = 16;
    let h = (b - a) / pieces as f64;
    let mut panels: Vec<(f64, f64, f64, f64)> = (0..pieces)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == pieces { b } else { lo + h };
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    for _ in 0..20_000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= tol.max(1e-14 * total.abs()) {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// ∫_0^∞ g(a) da for a density-like g, via a = e^t so that integrable
/// power-law behaviour at 0 becomes exponential decay in t.
pub fn integrate_positive_axis<F: Fn(f64) -> f64>(g: F, t_lo: f64, t_hi: f64, tol: f64) -> f64 {
    integrate(
        |t| {
            let a = t.exp();
            let v = g(a) * a;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        t_lo,
        t_hi,
        tol,
    )
}

/// ln K_ν(x) from the integral representation
/// K_ν(x) = ∫_0^∞ exp(-x cosh t) cosh(ν t) dt, evaluated with a log shift so
/// that the result is usable where K_ν overflows f64.
pub fn ln_bessel_k_oracle(nu: f64, x: f64) -> f64 {
    let nu = nu.abs();
    let g = |t: f64| -x * t.cosh() + nu * t;
    // Peak of g at sinh t = ν/x.
    let t_peak = (nu / x).asinh();
    let shift = g(t_peak).max(g(0.0));
    // Extend until the integrand is e^-60 below the peak value.
    let mut t_hi = t_peak + 1.0;
    while g(t_hi) - shift > -60.0 {
        t_hi += 0.5 * (1.0 + t_hi);
    }
    let integrand = |t: f64| {
        let e = g(t) - shift;
        // cosh(νt) = e^{νt} (1 + e^{-2νt}) / 2
        e.exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp())
    };
    let mut pieces = vec![0.0, t_peak, t_hi];
    pieces.dedup();
    let mut total = 0.0;
    for w in pieces.windows(2) {
        if w[1] > w[0] {
            total += integrate(integrand, w[0], w[1], 1e-16);
        }
    }
    shift + total.ln()
}

#[cfg(test)]
mod self_check {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_polynomials() {
        for k in 0..=20 {
            let got = gk15(&|x: f64| x.powi(k), 0.0, 1.0).0;
            let want = 1.0 / (k as f64 + 1.0);
            assert!((got - want).abs() < 1e-15, "degree {k}: {got} vs {want}");
        }
    }

    #[test]
    fn adaptive_exp() {
        let got = integrate(|x: f64| x.exp(), 0.0, 1.0, 1e-14);
        assert!((got - (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
