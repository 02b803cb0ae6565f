//! Probability kernels: Poisson-Binomial and multinomial PMFs in exact
//! rational arithmetic, and Clopper-Pearson binomial confidence bounds.

use num::{BigInt, BigRational, Integer, One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{from_f64, to_f64};

/// Bisection stops once the bracket is this narrow.
pub const CP_TOLERANCE: f64 = 1e-12;

/// Parameters of `PB([p_a, n_a], [p_b, n_b])`: the number of successes among
/// `n_a` Bernoulli(`p_a`) and `n_b` Bernoulli(`p_b`) independent trials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PBParams {
    pub p_a: BigRational,
    pub n_a: u32,
    pub p_b: BigRational,
    pub n_b: u32,
}

impl PBParams {
    pub fn new(p_a: BigRational, n_a: u32, p_b: BigRational, n_b: u32) -> Result<Self> {
        for (name, p) in [("p_a", &p_a), ("p_b", &p_b)] {
            if p.is_negative() || p > &BigRational::one() {
                return Err(Error::Range { name, value: p.to_string() });
            }
        }
        Ok(Self { p_a, n_a, p_b, n_b })
    }
}

/// One group of identical trials as seen by the recursion: odds `u / w`,
/// `p = u / d`, and `n` trials. Groups with `p = 1` never reach this point.
struct Group {
    u: BigInt,
    w: BigInt,
    d: BigInt,
    n: u32,
}

impl Group {
    fn from(p: &BigRational, n: u32) -> Self {
        let u = p.numer().clone();
        let d = p.denom().clone();
        let w = &d - &u;
        Self { u, w, d, n }
    }
}

/// PMF of the two-group Poisson-Binomial distribution, indexed by `q = 0..=n_a + n_b`.
///
/// Uses the power-sum recursion over the odds `o = p / (1 - p)`:
///
/// ```text
/// T(i) = n_a * o_a^i + n_b * o_b^i
/// R(q) = 1/q * sum_{i=1..q} (-1)^(i+1) T(i) R(q - i),   R(0) = 1
/// PB(q) = R(q) * (1 - p_a)^n_a * (1 - p_b)^n_b
/// ```
///
/// The table is unrolled bottom-up. `R(q) * (w_a w_b)^q` is an integer (it is
/// the `q`-th elementary symmetric polynomial of the odds, with denominators
/// cleared), so the recursion runs on big integers with exact division.
/// A group with `p = 1` always succeeds and only shifts the support.
pub fn pb_pmf(params: &PBParams) -> Vec<BigRational> {
    let one = BigRational::one();
    let mut offset = 0usize;
    let mut groups = Vec::with_capacity(2);
    for (p, n) in [(&params.p_a, params.n_a), (&params.p_b, params.n_b)] {
        if *p == one {
            offset += n as usize;
        } else {
            groups.push(Group::from(p, n));
        }
    }
    let total = (params.n_a + params.n_b) as usize;
    let len = groups.iter().map(|g| g.n as usize).sum::<usize>();

    // scaled[i] = T(i) * D^i with D = prod(w)
    let big_d: BigInt = groups.iter().map(|g| g.w.clone()).product();
    let mut t_scaled = vec![BigInt::zero(); len + 1];
    for (gi, g) in groups.iter().enumerate() {
        // o_g * D = u_g * prod_{h != g} w_h
        let step: BigInt = &g.u * groups.iter().enumerate().filter(|(hi, _)| *hi != gi).map(|(_, h)| h.w.clone()).product::<BigInt>();
        let mut pw = BigInt::one();
        for t in t_scaled.iter_mut().skip(1) {
            pw *= &step;
            *t += &pw * BigInt::from(g.n);
        }
    }

    let mut e = Vec::with_capacity(len + 1);
    e.push(BigInt::one());
    for q in 1..=len {
        let mut acc = BigInt::zero();
        for i in 1..=q {
            let term = &t_scaled[i] * &e[q - i];
            if i % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        let (quot, rem) = acc.div_rem(&BigInt::from(q));
        debug_assert!(rem.is_zero(), "elementary symmetric recursion must divide exactly");
        e.push(quot);
    }

    // (1 - p)^n = w^n / d^n
    let mut base_num = BigInt::one();
    let mut base_den = BigInt::one();
    for g in &groups {
        base_num *= num::pow(g.w.clone(), g.n as usize);
        base_den *= num::pow(g.d.clone(), g.n as usize);
    }

    let mut pmf = vec![BigRational::zero(); total + 1];
    let mut d_pow = BigInt::one();
    for (q, eq) in e.into_iter().enumerate() {
        pmf[q + offset] = BigRational::new(eq * &base_num, &base_den * &d_pow);
        d_pow *= &big_d;
    }
    pmf
}

/// `total! / (q! p! s!) * a^q * b^p * c^s`, with `0^0 = 1`.
pub fn multinomial_pmf(probs: (&BigRational, &BigRational, &BigRational), total: u32, counts: (u32, u32, u32)) -> Result<BigRational> {
    let (q, p, s) = counts;
    let got = u64::from(q) + u64::from(p) + u64::from(s);
    if got != u64::from(total) {
        return Err(Error::Count { got, expected: u64::from(total) });
    }
    let coeff = factorial(total) / (factorial(q) * factorial(p) * factorial(s));
    let mut v = BigRational::from_integer(coeff);
    for (prob, k) in [(probs.0, q), (probs.1, p), (probs.2, s)] {
        if k > 0 {
            v *= num::pow(prob.clone(), k as usize);
        }
    }
    Ok(v)
}

pub(crate) fn factorial(n: u32) -> BigInt {
    (1..=n).map(BigInt::from).product()
}

/// `C(n, k)` as a big integer.
pub(crate) fn binomial_coefficient(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

fn alpha_f64(alpha: &BigRational) -> f64 {
    let a = to_f64(alpha);
    assert!(a > 0.0 && a < 1.0, "alpha must lie in (0, 1), got {alpha}");
    a
}

/// One-sided Clopper-Pearson lower bound on a Bernoulli success probability.
///
/// Returns the lower end of a bisection bracket (width at most
/// [`CP_TOLERANCE`]) around the `p` solving `P[Bin(n, p) >= successes] = alpha`,
/// i.e. `I_p(successes, n - successes + 1) = alpha`.
pub fn clopper_pearson_lower(successes: u64, n: u64, alpha: &BigRational) -> BigRational {
    assert!(successes <= n, "successes {successes} > n {n}");
    let a = alpha_f64(alpha);
    if successes == 0 {
        return BigRational::zero();
    }
    let (k, nf) = (successes as f64, n as f64);
    // upper tail is increasing in p
    let tail = |p: f64| statrs::function::beta::beta_reg(k, nf - k + 1.0, p);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > CP_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if tail(mid) < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    from_f64(lo)
}

/// One-sided Clopper-Pearson upper bound: the upper end of a bisection bracket
/// around the `p` solving `P[Bin(n, p) <= successes] = alpha`.
pub fn clopper_pearson_upper(successes: u64, n: u64, alpha: &BigRational) -> BigRational {
    assert!(successes <= n, "successes {successes} > n {n}");
    let a = alpha_f64(alpha);
    if successes == n {
        return BigRational::one();
    }
    let (k, nf) = (successes as f64, n as f64);
    // lower tail P[X <= k] = I_{1-p}(n - k, k + 1), decreasing in p
    let tail = |p: f64| statrs::function::beta::beta_reg(nf - k, k + 1.0, 1.0 - p);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > CP_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    from_f64(hi)
}
