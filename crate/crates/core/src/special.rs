//! Special functions for the analysis module: log-gamma and the
//! regularized incomplete beta function at integer parameters.

use crate::num::Scalar;

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma<F: Scalar>(x: F) -> F {
    debug_assert!(x > F::zero());
    let g = F::c(7.0);
    let half = F::c(0.5);
    let x = x - F::one();
    let mut acc = F::c(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + F::c(c) / (x + F::from_usize(i).unwrap());
    }
    let t = x + g + half;
    let sqrt_two_pi = F::c(2.506_628_274_631_000_5);
    sqrt_two_pi.ln() + (x + half) * t.ln() - t + acc.ln()
}

/// `ln C(n, k)`.
pub fn ln_binomial<F: Scalar>(n: u64, k: u64) -> F {
    debug_assert!(k <= n);
    let nf = F::from_u64(n).unwrap();
    let kf = F::from_u64(k).unwrap();
    ln_gamma(nf + F::one()) - ln_gamma(kf + F::one()) - ln_gamma(nf - kf + F::one())
}

/// Natural log of the regularized incomplete beta function `I_x(a, b)` for
/// integer parameters, via the exact finite binomial identity
/// `I_x(a, b) = sum_{j=a}^{a+b-1} C(a+b-1, j) x^j (1-x)^(a+b-1-j)`,
/// accumulated in the log domain so extreme tails stay representable.
///
/// Returns negative infinity for `x = 0` and zero for `x = 1`.
pub fn ln_reg_inc_beta_int<F: Scalar>(a: u64, b: u64, x: F) -> F {
    assert!(a >= 1 && b >= 1, "integer beta parameters must be >= 1");
    assert!(
        x >= F::zero() && x <= F::one(),
        "beta argument outside [0, 1]"
    );
    if x == F::zero() {
        return F::neg_infinity();
    }
    if x == F::one() {
        return F::zero();
    }
    let n = a + b - 1;
    let ln_x = x.ln();
    let ln_1mx = (-x).ln_1p();
    // log-sum-exp over j = a..=n, scanning from the largest term.
    let mut terms = Vec::with_capacity((n - a + 1) as usize);
    let mut max = F::neg_infinity();
    for j in a..=n {
        let jf = F::from_u64(j).unwrap();
        let njf = F::from_u64(n - j).unwrap();
        let t = ln_binomial::<F>(n, j) + jf * ln_x + njf * ln_1mx;
        if t > max {
            max = t;
        }
        terms.push(t);
    }
    if max == F::neg_infinity() {
        return F::neg_infinity();
    }
    let sum = terms
        .into_iter()
        .fold(F::zero(), |acc, t| acc + (t - max).exp());
    (max + sum.ln()).min(F::zero())
}

/// `I_x(a, b)` for integer parameters. May underflow to zero for extreme
/// tails; use [`ln_reg_inc_beta_int`] when the magnitude matters.
pub fn reg_inc_beta_int<F: Scalar>(a: u64, b: u64, x: F) -> F {
    ln_reg_inc_beta_int(a, b, x).exp()
}
