//! Validated domain types. Everything here is immutable once constructed.

use std::fmt;

use num::{BigRational, One, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, parse_decimal};

/// Opaque class label produced by a base classifier.
pub type ClassId = u32;

/// Flip probabilities of the sparsity-aware noise.
///
/// A zero is flipped with probability `p_plus`, a non-zero with probability
/// `p_minus`; a flipped entry moves uniformly to one of the other `K - 1`
/// categories. `K = 2` is the binary scheme.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NoiseSpec {
    p_plus: BigRational,
    p_minus: BigRational,
    num_categories: u32,
}

impl NoiseSpec {
    pub fn new(p_plus: BigRational, p_minus: BigRational, num_categories: u32) -> Result<Self> {
        if num_categories < 2 {
            return Err(Error::Category(num_categories));
        }
        for (name, v) in [("p_plus", &p_plus), ("p_minus", &p_minus)] {
            if v < &BigRational::zero() || v > &BigRational::one() {
                return Err(Error::Range { name, value: v.to_string() });
            }
        }
        Ok(Self { p_plus, p_minus, num_categories })
    }

    /// Builds a spec from decimal strings, keeping the probabilities exact.
    pub fn parse(p_plus: &str, p_minus: &str, num_categories: u32) -> Result<Self> {
        Self::new(parse_decimal(p_plus)?, parse_decimal(p_minus)?, num_categories)
    }

    pub fn binary(p_plus: &str, p_minus: &str) -> Result<Self> {
        Self::parse(p_plus, p_minus, 2)
    }

    pub fn p_plus(&self) -> &BigRational {
        &self.p_plus
    }

    pub fn p_minus(&self) -> &BigRational {
        &self.p_minus
    }

    pub fn num_categories(&self) -> u32 {
        self.num_categories
    }

    pub fn is_binary(&self) -> bool {
        self.num_categories == 2
    }

    fn others(&self) -> BigRational {
        rational::int(i64::from(self.num_categories) - 1)
    }

    /// Probability a zero stays zero.
    pub fn a0(&self) -> BigRational {
        BigRational::one() - &self.p_plus
    }

    /// Probability a zero becomes one specific other value.
    pub fn b0(&self) -> BigRational {
        &self.p_plus / self.others()
    }

    /// Probability a zero becomes a value outside a fixed pair of targets.
    pub fn c0(&self) -> BigRational {
        BigRational::one() - self.a0() - self.b0()
    }

    pub fn a1(&self) -> BigRational {
        BigRational::one() - &self.p_minus
    }

    pub fn b1(&self) -> BigRational {
        &self.p_minus / self.others()
    }

    pub fn c1(&self) -> BigRational {
        BigRational::one() - self.a1() - self.b1()
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p+={} p-={} K={}", self.p_plus, self.p_minus, self.num_categories)
    }
}

/// Perturbation budget: `r_add` zeros turned non-zero, `r_del` non-zeros
/// turned zero and `r_change` non-zeros turned into a different non-zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RadiiSpec {
    pub r_add: u32,
    pub r_del: u32,
    pub r_change: u32,
}

impl RadiiSpec {
    pub fn new(r_add: u32, r_del: u32, r_change: u32, num_categories: u32) -> Result<Self> {
        if num_categories < 2 {
            return Err(Error::Category(num_categories));
        }
        if num_categories == 2 && r_change != 0 {
            return Err(Error::Radii(format!("r_change = {r_change} but binary data cannot change a one into another one")));
        }
        Ok(Self { r_add, r_del, r_change })
    }

    pub fn binary(r_add: u32, r_del: u32) -> Self {
        Self { r_add, r_del, r_change: 0 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Total number of perturbed dimensions.
    pub fn total(&self) -> u32 {
        self.r_add + self.r_del + self.r_change
    }
}

impl fmt::Display for RadiiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(ra={}, rd={}, rc={})", self.r_add, self.r_del, self.r_change)
    }
}

/// Noise applied to the whole vector, or independently to two index groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Smoothing {
    Single(NoiseSpec),
    Joint { a: NoiseSpec, f: NoiseSpec },
}

/// Radii matching a [`Smoothing`] layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Perturbation {
    Single(RadiiSpec),
    Joint { a: RadiiSpec, f: RadiiSpec },
}

impl Perturbation {
    pub fn zero_like(&self) -> Self {
        match self {
            Perturbation::Single(_) => Perturbation::Single(RadiiSpec::zero()),
            Perturbation::Joint { .. } => Perturbation::Joint { a: RadiiSpec::zero(), f: RadiiSpec::zero() },
        }
    }

    /// The single-group radii, or the first group's radii in joint mode.
    pub fn primary(&self) -> RadiiSpec {
        match self {
            Perturbation::Single(r) => *r,
            Perturbation::Joint { a, .. } => *a,
        }
    }
}

impl From<RadiiSpec> for Perturbation {
    fn from(r: RadiiSpec) -> Self {
        Perturbation::Single(r)
    }
}

/// A point of `{0, ..., K-1}^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DiscreteVector {
    values: Vec<u32>,
    num_categories: u32,
}

impl DiscreteVector {
    pub fn new(values: Vec<u32>, num_categories: u32) -> Result<Self> {
        if num_categories < 2 {
            return Err(Error::Category(num_categories));
        }
        if let Some(&bad) = values.iter().find(|&&v| v >= num_categories) {
            return Err(Error::Value { value: bad, k: num_categories });
        }
        Ok(Self { values, num_categories })
    }

    pub fn binary(bits: &[u8]) -> Self {
        let values = bits.iter().map(|&b| u32::from(b != 0)).collect();
        Self { values, num_categories: 2 }
    }

    pub fn zeros(dims: usize, num_categories: u32) -> Self {
        Self { values: vec![0; dims], num_categories }
    }

    pub(crate) fn from_raw(values: Vec<u32>, num_categories: u32) -> Self {
        debug_assert!(values.iter().all(|&v| v < num_categories));
        Self { values, num_categories }
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn num_categories(&self) -> u32 {
        self.num_categories
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn count_nonzero(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    /// Concatenation, used to assemble joint-group vectors.
    pub fn concat(&self, other: &DiscreteVector) -> Result<DiscreteVector> {
        if self.num_categories != other.num_categories {
            return Err(Error::Shape("category counts differ".into()));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Self { values, num_categories: self.num_categories })
    }
}

/// Radii `(adds, dels, changes)` needed to turn `x` into `x_tilde`.
pub fn radii_between(x: &DiscreteVector, x_tilde: &DiscreteVector) -> Result<RadiiSpec> {
    if x.dims() != x_tilde.dims() || x.num_categories != x_tilde.num_categories {
        return Err(Error::Shape(format!("{} vs {} dims", x.dims(), x_tilde.dims())));
    }
    let mut r = RadiiSpec::zero();
    for (&a, &b) in x.values.iter().zip(&x_tilde.values) {
        match (a, b) {
            (a, b) if a == b => {}
            (0, _) => r.r_add += 1,
            (_, 0) => r.r_del += 1,
            _ => r.r_change += 1,
        }
    }
    Ok(r)
}

/// Canonical pair realizing exactly the given radii on the disagreement set.
///
/// Binary: `x = (1,..,1,0,..,0)` with `r_del` ones and `x~` its complement.
/// `K > 2`: adds first (`0 -> 1`), then deletions (`1 -> 0`), then changes (`1 -> 2`).
pub fn sphere_representatives(radii: RadiiSpec, num_categories: u32) -> Result<(DiscreteVector, DiscreteVector)> {
    let radii = RadiiSpec::new(radii.r_add, radii.r_del, radii.r_change, num_categories)?;
    let rep = |n: u32, v: u32| std::iter::repeat_n(v, n as usize);
    let (x, xt): (Vec<u32>, Vec<u32>) = if num_categories == 2 {
        (
            rep(radii.r_del, 1).chain(rep(radii.r_add, 0)).collect(),
            rep(radii.r_del, 0).chain(rep(radii.r_add, 1)).collect(),
        )
    } else {
        (
            rep(radii.r_add, 0).chain(rep(radii.r_del, 1)).chain(rep(radii.r_change, 1)).collect(),
            rep(radii.r_add, 1).chain(rep(radii.r_del, 0)).chain(rep(radii.r_change, 2)).collect(),
        )
    };
    Ok((DiscreteVector::from_raw(x, num_categories), DiscreteVector::from_raw(xt, num_categories)))
}

/// Monte-Carlo class counts for one input. `counts[c]` is the number of
/// noisy samples the base classifier assigned to class `c`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VoteRecord {
    pub input_id: String,
    counts: Vec<u64>,
    num_samples: u64,
}

impl VoteRecord {
    pub fn new(input_id: impl Into<String>, counts: Vec<u64>) -> Self {
        let num_samples = counts.iter().sum();
        Self { input_id: input_id.into(), counts, num_samples }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, class: ClassId) -> u64 {
        self.counts.get(class as usize).copied().unwrap_or(0)
    }

    pub fn num_samples(&self) -> u64 {
        self.num_samples
    }

    /// Most voted class; ties go to the smallest class id.
    pub fn top_class(&self) -> Option<ClassId> {
        if self.num_samples == 0 {
            return None;
        }
        let mut best = 0usize;
        for (c, &n) in self.counts.iter().enumerate() {
            if n > self.counts[best] {
                best = c;
            }
        }
        Some(best as ClassId)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundMode {
    BinaryClass,
    MultiClass,
}

impl BoundMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundMode::BinaryClass => "binary",
            BoundMode::MultiClass => "multi",
        }
    }
}

impl fmt::Display for BoundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Confidence bounds for the top class (and, in multi-class mode, the runner-up).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClassBounds {
    pub top_class: ClassId,
    pub p_lower: BigRational,
    /// Upper bound on the strongest competing class; `1 - p_lower` in binary mode.
    pub p_upper_runner: BigRational,
    pub alpha: BigRational,
    pub mode: BoundMode,
}

impl ClassBounds {
    pub fn binary(top_class: ClassId, p_lower: BigRational, alpha: BigRational) -> Result<Self> {
        check_unit("p_lower", &p_lower)?;
        let p_upper_runner = BigRational::one() - &p_lower;
        Ok(Self { top_class, p_lower, p_upper_runner, alpha, mode: BoundMode::BinaryClass })
    }

    pub fn multi(top_class: ClassId, p_lower: BigRational, p_upper_runner: BigRational, alpha: BigRational) -> Result<Self> {
        check_unit("p_lower", &p_lower)?;
        check_unit("p_upper_runner", &p_upper_runner)?;
        Ok(Self { top_class, p_lower, p_upper_runner, alpha, mode: BoundMode::MultiClass })
    }
}

fn check_unit(name: &'static str, v: &BigRational) -> Result<()> {
    if v < &BigRational::zero() || v > &BigRational::one() {
        return Err(Error::Range { name, value: v.to_string() });
    }
    Ok(())
}

/// Certification verdict for one input at one perturbation budget.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CertResult {
    pub input_id: String,
    pub radii: Perturbation,
    pub certified: bool,
    /// `rho` (binary-class) or the worst-case margin (multi-class).
    pub rho_or_margin: BigRational,
    pub abstained: bool,
    /// Mode that produced `rho_or_margin`.
    pub mode: BoundMode,
    /// Multi-class bounds were requested but were not a valid LP; the
    /// binary-class certificate was used instead.
    pub fallback: bool,
}
