//! Brute-force references for small instances.
//!
//! Nothing here uses the region constructions or the certificate solvers:
//! probabilities come from per-coordinate products over an explicit
//! enumeration of the noisy space, and the linear program is solved with
//! every point as its own region.

use std::collections::BTreeMap;

use num::{BigRational, One, Zero};

use crate::error::{Error, Result};
use crate::regions::{LikelihoodRatio, Region, RegionTable};
use crate::smoothing::BaseClassifier;
use crate::types::{ClassId, DiscreteVector, NoiseSpec, RadiiSpec};

/// Largest number of points the oracle will enumerate.
pub const MAX_POINTS: u128 = 1_000_000;

/// Exact `Pr(phi(x)_i = z)` for one coordinate with clean value `x`.
pub fn coordinate_probability(noise: &NoiseSpec, x: u32, z: u32) -> BigRational {
    let p = if x == 0 { noise.p_plus() } else { noise.p_minus() };
    if x == z {
        BigRational::one() - p
    } else {
        p / BigRational::from_integer((noise.num_categories() - 1).into())
    }
}

fn check_size(dims: usize, k: u32) -> Result<()> {
    let points = (k as u128).checked_pow(dims as u32).unwrap_or(u128::MAX);
    if points > MAX_POINTS {
        return Err(Error::Size(points));
    }
    Ok(())
}

fn check_pair(x: &DiscreteVector, x_tilde: &DiscreteVector, noises: &[&NoiseSpec]) -> Result<u32> {
    let k = x.num_categories();
    if x.dims() != x_tilde.dims() || x_tilde.num_categories() != k || noises.len() != x.dims() {
        return Err(Error::Shape("x, x~ and per-coordinate noise must agree".into()));
    }
    if noises.iter().any(|n| n.num_categories() != k) {
        return Err(Error::Shape("noise K differs from vector K".into()));
    }
    check_size(x.dims(), k)?;
    Ok(k)
}

/// Calls `visit(z, Pr(phi(x) = z), Pr(phi(x~) = z))` for every `z` in `{0..K-1}^d`.
fn for_each_point(
    x: &DiscreteVector,
    x_tilde: &DiscreteVector,
    noises: &[&NoiseSpec],
    mut visit: impl FnMut(&[u32], BigRational, BigRational),
) -> Result<()> {
    let k = check_pair(x, x_tilde, noises)?;
    let d = x.dims();
    // per-coordinate tables [i][z]
    let px: Vec<Vec<BigRational>> = (0..d).map(|i| (0..k).map(|z| coordinate_probability(noises[i], x.values()[i], z)).collect()).collect();
    let pxt: Vec<Vec<BigRational>> = (0..d).map(|i| (0..k).map(|z| coordinate_probability(noises[i], x_tilde.values()[i], z)).collect()).collect();
    let mut z = vec![0u32; d];
    loop {
        let mut a = BigRational::one();
        let mut b = BigRational::one();
        for i in 0..d {
            a *= &px[i][z[i] as usize];
            b *= &pxt[i][z[i] as usize];
        }
        visit(&z, a, b);
        // odometer, last coordinate fastest
        let mut i = d;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            z[i] += 1;
            if z[i] < k {
                break;
            }
            z[i] = 0;
        }
    }
}

fn ratio_key(a: &BigRational, b: &BigRational) -> Option<LikelihoodRatio> {
    if a.is_zero() && b.is_zero() {
        None
    } else if b.is_zero() {
        Some(LikelihoodRatio::Infinite)
    } else {
        Some(LikelihoodRatio::Finite(a / b))
    }
}

/// Region table obtained by grouping every point of the noisy space by its
/// exact likelihood ratio, with per-coordinate noise.
pub fn enumerate_regions_grouped(x: &DiscreteVector, x_tilde: &DiscreteVector, noises: &[&NoiseSpec]) -> Result<RegionTable> {
    let mut groups: BTreeMap<LikelihoodRatio, (BigRational, BigRational)> = BTreeMap::new();
    for_each_point(x, x_tilde, noises, |_, a, b| {
        if let Some(key) = ratio_key(&a, &b) {
            let slot = groups.entry(key).or_insert_with(|| (BigRational::zero(), BigRational::zero()));
            slot.0 += a;
            slot.1 += b;
        }
    })?;
    let entries = groups.into_iter().rev().map(|(ratio, (prob_x, prob_xt))| Region { ratio, prob_x, prob_xt }).collect();
    Ok(RegionTable::from_entries(entries))
}

pub fn enumerate_regions(x: &DiscreteVector, x_tilde: &DiscreteVector, noise: &NoiseSpec) -> Result<RegionTable> {
    let noises = vec![noise; x.dims()];
    enumerate_regions_grouped(x, x_tilde, &noises)
}

/// The linear program over the finest partition (every point its own
/// region), enumerated once and solvable for any budget.
pub struct ExactLp {
    /// Per-point masses `(Pr(phi(x) = z), Pr(phi(x~) = z))`, decreasing ratio.
    points: Vec<(BigRational, BigRational)>,
}

impl ExactLp {
    pub fn new(x: &DiscreteVector, x_tilde: &DiscreteVector, noise: &NoiseSpec) -> Result<Self> {
        let noises = vec![noise; x.dims()];
        let mut keyed = Vec::new();
        for_each_point(x, x_tilde, &noises, |_, a, b| {
            if let Some(key) = ratio_key(&a, &b) {
                keyed.push((key, a, b));
            }
        })?;
        keyed.sort_by(|l, r| r.0.cmp(&l.0));
        Ok(Self { points: keyed.into_iter().map(|(_, a, b)| (a, b)).collect() })
    }

    /// `min E_{x~}[h]` s.t. `E_x[h] = p_lower`, `0 <= h <= 1`.
    pub fn rho(&self, p_lower: &BigRational) -> Result<BigRational> {
        fill(&self.points, 0..self.points.len(), p_lower, false)
    }

    /// `min E_{x~}[h] - E_{x~}[t]` s.t. `E_x[h] = p_star`, `E_x[t] = p_runner`.
    pub fn margin(&self, p_star: &BigRational, p_runner: &BigRational) -> Result<BigRational> {
        let h = self.rho(p_star)?;
        let t = fill(&self.points, (0..self.points.len()).rev(), p_runner, true)?;
        Ok(h - t)
    }
}

fn fill(points: &[(BigRational, BigRational)], order: impl Iterator<Item = usize>, budget: &BigRational, free_xt: bool) -> Result<BigRational> {
    let mut left = budget.clone();
    let mut value = BigRational::zero();
    for i in order {
        let (a, b) = &points[i];
        if a.is_zero() {
            if free_xt {
                value += b;
            }
            continue;
        }
        if left.is_zero() {
            continue;
        }
        if a <= &left {
            left -= a;
            value += b;
        } else {
            value += &left * b / a;
            left = BigRational::zero();
        }
    }
    if !left.is_zero() {
        return Err(Error::Budget(budget.to_string()));
    }
    Ok(value)
}

pub fn lp_exact(x: &DiscreteVector, x_tilde: &DiscreteVector, noise: &NoiseSpec, p_lower: &BigRational) -> Result<BigRational> {
    ExactLp::new(x, x_tilde, noise)?.rho(p_lower)
}

pub fn lp_exact_margin(x: &DiscreteVector, x_tilde: &DiscreteVector, noise: &NoiseSpec, p_star: &BigRational, p_runner: &BigRational) -> Result<BigRational> {
    ExactLp::new(x, x_tilde, noise)?.margin(p_star, p_runner)
}

/// Worst-case classifier for the binary-class problem: the probability of
/// voting for the top class at every point `z`, listed in enumeration order.
pub fn worst_case_classifier(x: &DiscreteVector, x_tilde: &DiscreteVector, noise: &NoiseSpec, p_lower: &BigRational) -> Result<Vec<(Vec<u32>, BigRational)>> {
    let noises = vec![noise; x.dims()];
    let mut points = Vec::new();
    for_each_point(x, x_tilde, &noises, |z, a, b| points.push((z.to_vec(), a, b)))?;
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| ratio_key(&points[i].1, &points[i].2).is_some()).collect();
    order.sort_by(|&i, &j| (&points[j].1 * &points[i].2).cmp(&(&points[i].1 * &points[j].2)));
    let mut h = vec![BigRational::zero(); points.len()];
    let mut left = p_lower.clone();
    for i in order {
        let a = &points[i].1;
        if left.is_zero() || a.is_zero() {
            continue;
        }
        if a <= &left {
            h[i] = BigRational::one();
            left -= a;
        } else {
            h[i] = &left / a;
            left = BigRational::zero();
        }
    }
    Ok(points.into_iter().zip(h).map(|((z, _, _), h)| (z, h)).collect())
}

/// `E_{phi(x)}[h]` for a point-wise assignment from [`worst_case_classifier`].
pub fn expected_vote(x: &DiscreteVector, noise: &NoiseSpec, h: &[(Vec<u32>, BigRational)]) -> BigRational {
    h.iter()
        .map(|(z, w)| {
            let p: BigRational = z.iter().zip(x.values()).map(|(&zi, &xi)| coordinate_probability(noise, xi, zi)).product();
            p * w
        })
        .sum()
}

/// Exact class probabilities `Pr(f(phi(x)) = y)` of a deterministic classifier.
pub fn smoothed_probabilities(classifier: &dyn BaseClassifier, x: &DiscreteVector, noise: &NoiseSpec) -> Result<Vec<BigRational>> {
    let mut probs = vec![BigRational::zero(); classifier.num_classes() as usize];
    let noises = vec![noise; x.dims()];
    let mut failure = None;
    for_each_point(x, x, &noises, |z, a, _| {
        if a.is_zero() || failure.is_some() {
            return;
        }
        let v = DiscreteVector::from_raw(z.to_vec(), x.num_categories());
        match classifier.classify(&v) {
            Ok(c) if (c as usize) < probs.len() => probs[c as usize] += a,
            Ok(c) => failure = Some(format!("class {c} out of range")),
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(message) => Err(Error::Classifier { index: 0, message }),
        None => Ok(probs),
    }
}

/// Class with strictly the highest probability, if any.
pub fn strict_top(probs: &[BigRational]) -> Option<ClassId> {
    let (best, p) = probs.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    let unique = probs.iter().enumerate().all(|(c, q)| c == best || q < p);
    unique.then_some(best as ClassId)
}

/// Every `x~` with at most `r_add` additions, `r_del` deletions and
/// `r_change` changes relative to `x`.
pub fn ball(x: &DiscreteVector, radii: RadiiSpec) -> Result<Vec<DiscreteVector>> {
    let k = x.num_categories();
    check_size(x.dims(), k)?;
    let mut out = Vec::new();
    let d = x.dims();
    let mut z = vec![0u32; d];
    loop {
        let cand = DiscreteVector::from_raw(z.clone(), k);
        let r = crate::types::radii_between(x, &cand)?;
        if r.r_add <= radii.r_add && r.r_del <= radii.r_del && r.r_change <= radii.r_change {
            out.push(cand);
        }
        let mut i = d;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            z[i] += 1;
            if z[i] < k {
                break;
            }
            z[i] = 0;
        }
    }
}

/// Checks by exhaustive enumeration that the smoothed classifier predicts the
/// same class, with a strict majority over every other class, at every point
/// of the ball around `x`. Returns `false` when `x` itself has no strict top class.
pub fn exhaustive_ball_check(classifier: &dyn BaseClassifier, x: &DiscreteVector, noise: &NoiseSpec, radii: RadiiSpec) -> Result<bool> {
    let Some(top) = strict_top(&smoothed_probabilities(classifier, x, noise)?) else {
        return Ok(false);
    };
    for xt in ball(x, radii)? {
        if strict_top(&smoothed_probabilities(classifier, &xt, noise)?) != Some(top) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_decimal;
    use crate::smoothing::{Constant, Parity};

    fn r(s: &str) -> BigRational {
        parse_decimal(s).unwrap()
    }

    #[test]
    fn two_bit_table() {
        let n = NoiseSpec::binary("0.2", "0.4").unwrap();
        let t = enumerate_regions(&DiscreteVector::binary(&[1, 0]), &DiscreteVector::binary(&[0, 1]), &n).unwrap();
        t.validate().unwrap();
        let e = t.entries();
        assert_eq!(e.len(), 3);
        assert_eq!((e[0].prob_x.clone(), e[0].prob_xt.clone()), (r("0.48"), r("0.08")));
        assert_eq!((e[1].prob_x.clone(), e[1].prob_xt.clone()), (r("0.44"), r("0.44")));
        assert_eq!((e[2].prob_x.clone(), e[2].prob_xt.clone()), (r("0.08"), r("0.48")));
    }

    #[test]
    fn identical_inputs_single_region() {
        let n = NoiseSpec::binary("0.2", "0.4").unwrap();
        let x = DiscreteVector::binary(&[1, 0, 1]);
        assert_eq!(enumerate_regions(&x, &x, &n).unwrap(), RegionTable::trivial());
    }

    #[test]
    fn size_guard() {
        let n = NoiseSpec::parse("0.2", "0.4", 4).unwrap();
        let x = DiscreteVector::zeros(11, 4);
        assert!(matches!(enumerate_regions(&x, &x, &n), Err(Error::Size(_))));
    }

    #[test]
    fn lp_endpoints() {
        let n = NoiseSpec::binary("0.2", "0.4").unwrap();
        let (x, xt) = (DiscreteVector::binary(&[1, 0, 1]), DiscreteVector::binary(&[0, 1, 1]));
        assert_eq!(lp_exact(&x, &xt, &n, &BigRational::one()).unwrap(), BigRational::one());
        assert_eq!(lp_exact(&x, &xt, &n, &BigRational::zero()).unwrap(), BigRational::zero());
        assert_eq!(lp_exact(&x, &xt, &n, &r("0.9")).unwrap(), r("0.5"));
    }

    #[test]
    fn witness_attains_the_optimum() {
        let n = NoiseSpec::binary("0.2", "0.4").unwrap();
        let (x, xt) = (DiscreteVector::binary(&[1, 0, 0]), DiscreteVector::binary(&[0, 1, 0]));
        let p = r("0.9");
        let h = worst_case_classifier(&x, &xt, &n, &p).unwrap();
        assert_eq!(expected_vote(&x, &n, &h), p);
        assert_eq!(expected_vote(&xt, &n, &h), lp_exact(&x, &xt, &n, &p).unwrap());
        assert!(h.iter().all(|(_, w)| w >= &BigRational::zero() && w <= &BigRational::one()));
    }

    #[test]
    fn ball_sizes() {
        let x = DiscreteVector::binary(&[1, 0, 0, 1]);
        assert_eq!(ball(&x, RadiiSpec::zero()).unwrap(), vec![x.clone()]);
        // 1 + 2 additions + 2 deletions + 4 (one of each)
        assert_eq!(ball(&x, RadiiSpec::binary(1, 1)).unwrap().len(), 9);
    }

    #[test]
    fn ball_checks() {
        let n = NoiseSpec::binary("0.2", "0.3").unwrap();
        let x = DiscreteVector::binary(&[1, 0, 1]);
        assert!(exhaustive_ball_check(&Constant { class: 0, num_classes: 2 }, &x, &n, RadiiSpec::binary(2, 2)).unwrap());
        let clean = NoiseSpec::binary("0", "0").unwrap();
        assert!(!exhaustive_ball_check(&Parity { width: 3 }, &x, &clean, RadiiSpec::binary(1, 0)).unwrap());
        assert!(exhaustive_ball_check(&Parity { width: 3 }, &x, &clean, RadiiSpec::zero()).unwrap());
    }

    #[test]
    fn strict_top_needs_a_unique_maximum() {
        assert_eq!(strict_top(&[r("0.5"), r("0.5")]), None);
        assert_eq!(strict_top(&[r("0.2"), r("0.5"), r("0.3")]), Some(1));
    }
}
