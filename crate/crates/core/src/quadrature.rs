//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued
//! integrands.
//!
//! Several integrals that share one expensive weight (the determinant and
//! its log-derivatives) are evaluated together so they see the same nodes.
//! Component `k` is converged when its error estimate is below
//! `rel_tol * ∫|f_k|`, which stays meaningful for integrands that change
//! sign.

#[allow(clippy::excessive_precision)]
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

#[allow(clippy::excessive_precision)]
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

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Debug)]
pub struct QuadratureOutcome<const K: usize> {
    pub value: [f64; K],
    pub abs_error: [f64; K],
    /// `∫|f_k|`, the scale against which `rel_tol` is applied.
    pub l1_norm: [f64; K],
    pub intervals: usize,
    pub converged: bool,
}

#[derive(Clone, Copy)]
struct Segment<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: [f64; K],
    l1: [f64; K],
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        e = res_asc * (200.0 * e / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

fn gk15<const K: usize, F: Fn(f64) -> [f64; K]>(f: &F, a: f64, b: f64) -> Segment<K> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let habs = half.abs();

    let fc = f(center);
    let mut fv1 = [[0.0; K]; 7];
    let mut fv2 = [[0.0; K]; 7];
    for (j, &x) in XGK[..7].iter().enumerate() {
        fv1[j] = f(center - half * x);
        fv2[j] = f(center + half * x);
    }

    let mut value = [0.0; K];
    let mut error = [0.0; K];
    let mut l1 = [0.0; K];
    for k in 0..K {
        let mut kron = fc[k] * WGK[7];
        let mut gauss = fc[k] * WG[3];
        let mut res_abs = kron.abs();
        for j in 0..7 {
            let pair = fv1[j][k] + fv2[j][k];
            kron += WGK[j] * pair;
            res_abs += WGK[j] * (fv1[j][k].abs() + fv2[j][k].abs());
            if j % 2 == 1 {
                gauss += WG[j / 2] * pair;
            }
        }
        let mean = 0.5 * kron;
        let mut res_asc = WGK[7] * (fc[k] - mean).abs();
        for j in 0..7 {
            res_asc += WGK[j] * ((fv1[j][k] - mean).abs() + (fv2[j][k] - mean).abs());
        }
        value[k] = kron * half;
        l1[k] = res_abs * habs;
        error[k] = rescale_error((kron - gauss) * half, res_abs * habs, res_asc * habs);
    }
    Segment { a, b, value, error, l1 }
}

/// Integrates `f` over `[breakpoints[0], breakpoints[last]]`, starting from
/// the given partition and bisecting the worst segment until every
/// component meets `rel_tol` or `max_segments` is reached.
pub fn integrate<const K: usize, F>(
    f: F,
    breakpoints: &[f64],
    rel_tol: f64,
    max_segments: usize,
) -> QuadratureOutcome<K>
where
    F: Fn(f64) -> [f64; K],
{
    assert!(breakpoints.len() >= 2, "need at least one interval");
    let mut segs: Vec<Segment<K>> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();

    loop {
        let (value, error, l1) = totals(&segs);
        let tol: [f64; K] = std::array::from_fn(|k| rel_tol * l1[k]);
        let done = (0..K).all(|k| error[k] <= tol[k]);
        if done || segs.len() >= max_segments {
            return QuadratureOutcome {
                value,
                abs_error: error,
                l1_norm: l1,
                intervals: segs.len(),
                converged: done,
            };
        }

        // bisect the segment contributing most to the normalized error
        let score = |s: &Segment<K>| -> f64 {
            (0..K)
                .map(|k| if tol[k] > 0.0 { s.error[k] / tol[k] } else { 0.0 })
                .fold(0.0, f64::max)
        };
        let mut worst = 0;
        let mut worst_score = score(&segs[0]);
        for (i, s) in segs.iter().enumerate().skip(1) {
            let sc = score(s);
            if sc > worst_score {
                worst = i;
                worst_score = sc;
            }
        }
        let s = segs[worst];
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // interval exhausted at machine precision
            let (value, error, l1) = totals(&segs);
            return QuadratureOutcome {
                value,
                abs_error: error,
                l1_norm: l1,
                intervals: segs.len(),
                converged: false,
            };
        }
        segs[worst] = gk15(&f, s.a, mid);
        segs.insert(worst + 1, gk15(&f, mid, s.b));
    }
}

fn totals<const K: usize>(segs: &[Segment<K>]) -> ([f64; K], [f64; K], [f64; K]) {
    let mut value = [0.0; K];
    let mut error = [0.0; K];
    let mut l1 = [0.0; K];
    for s in segs {
        for k in 0..K {
            value[k] += s.value[k];
            error[k] += s.error[k];
            l1[k] += s.l1[k];
        }
    }
    (value, error, l1)
}
