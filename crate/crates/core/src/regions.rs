//! Regions of constant likelihood ratio.
//!
//! For a clean input `x` and a perturbed `x~`, the noisy space is split into
//! regions on which `Pr(phi(x) = z) / Pr(phi(x~) = z)` is constant. A table
//! stores, per region, that ratio and the probability mass the two noisy
//! distributions put on it. Tables depend only on the noise and the radii,
//! never on the dimension or on the coordinates where `x` and `x~` agree.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num::{BigRational, One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exactmath::{binomial_coefficient, multinomial_pmf, pb_pmf, PBParams};
use crate::rational::pow;
use crate::types::{NoiseSpec, Perturbation, RadiiSpec, Smoothing};

/// `Pr(phi(x) = z) / Pr(phi(x~) = z)`; infinite where only `x` reaches `z`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LikelihoodRatio {
    Finite(BigRational),
    Infinite,
}

impl LikelihoodRatio {
    /// Ratio of two masses; `None` when both are zero.
    pub fn of(prob_x: &BigRational, prob_xt: &BigRational) -> Option<Self> {
        match (prob_x.is_zero(), prob_xt.is_zero()) {
            (true, true) => None,
            (_, true) => Some(LikelihoodRatio::Infinite),
            _ => Some(LikelihoodRatio::Finite(prob_x / prob_xt)),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, LikelihoodRatio::Infinite)
    }

    pub fn finite(&self) -> Option<&BigRational> {
        match self {
            LikelihoodRatio::Finite(r) => Some(r),
            LikelihoodRatio::Infinite => None,
        }
    }
}

impl Ord for LikelihoodRatio {
    fn cmp(&self, other: &Self) -> Ordering {
        use LikelihoodRatio::*;
        match (self, other) {
            (Infinite, Infinite) => Ordering::Equal,
            (Infinite, Finite(_)) => Ordering::Greater,
            (Finite(_), Infinite) => Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for LikelihoodRatio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for LikelihoodRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LikelihoodRatio::Finite(r) => write!(f, "{r}"),
            LikelihoodRatio::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub ratio: LikelihoodRatio,
    /// `Pr(phi(x) in R)`
    pub prob_x: BigRational,
    /// `Pr(phi(x~) in R)`
    pub prob_xt: BigRational,
}

/// Regions sorted by strictly decreasing likelihood ratio.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegionTable {
    entries: Vec<Region>,
}

impl RegionTable {
    /// Merges cells sharing an exact ratio, drops cells without mass under
    /// either distribution and sorts by decreasing ratio.
    pub fn from_cells<I>(cells: I) -> Self
    where
        I: IntoIterator<Item = (BigRational, BigRational)>,
    {
        let mut merged: BTreeMap<LikelihoodRatio, (BigRational, BigRational)> = BTreeMap::new();
        for (px, pxt) in cells {
            let Some(ratio) = LikelihoodRatio::of(&px, &pxt) else { continue };
            let slot = merged.entry(ratio).or_insert_with(|| (BigRational::zero(), BigRational::zero()));
            slot.0 += px;
            slot.1 += pxt;
        }
        let entries = merged
            .into_iter()
            .rev()
            .map(|(ratio, (prob_x, prob_xt))| Region { ratio, prob_x, prob_xt })
            .collect();
        Self { entries }
    }

    /// Takes entries as given. Use [`RegionTable::validate`] to check them.
    pub fn from_entries(entries: Vec<Region>) -> Self {
        Self { entries }
    }

    /// A single region of ratio one holding all mass (`x = x~`).
    pub fn trivial() -> Self {
        Self::from_entries(vec![Region {
            ratio: LikelihoodRatio::Finite(BigRational::one()),
            prob_x: BigRational::one(),
            prob_xt: BigRational::one(),
        }])
    }

    pub fn entries(&self) -> &[Region] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_x(&self) -> BigRational {
        self.entries.iter().map(|e| &e.prob_x).sum()
    }

    pub fn total_xt(&self) -> BigRational {
        self.entries.iter().map(|e| &e.prob_xt).sum()
    }

    /// Checks the table invariants exactly: both masses sum to one, ratios are
    /// strictly decreasing, and every finite positive ratio equals `prob_x / prob_xt`.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let one = BigRational::one();
        if self.total_x() != one {
            return Err(format!("prob_x sums to {}", self.total_x()));
        }
        if self.total_xt() != one {
            return Err(format!("prob_xt sums to {}", self.total_xt()));
        }
        for w in self.entries.windows(2) {
            if w[0].ratio <= w[1].ratio {
                return Err(format!("ratios not strictly decreasing: {} then {}", w[0].ratio, w[1].ratio));
            }
        }
        for e in &self.entries {
            if e.prob_x.is_negative() || e.prob_xt.is_negative() {
                return Err("negative mass".into());
            }
            if e.prob_x.is_zero() && e.prob_xt.is_zero() {
                return Err("empty region kept".into());
            }
            match &e.ratio {
                LikelihoodRatio::Infinite if !e.prob_xt.is_zero() => return Err("infinite ratio with prob_xt > 0".into()),
                LikelihoodRatio::Finite(r) if r.is_zero() && !e.prob_x.is_zero() => return Err("zero ratio with prob_x > 0".into()),
                LikelihoodRatio::Finite(r) if !r.is_zero() && e.prob_x != r * &e.prob_xt => {
                    return Err(format!("prob_x != ratio * prob_xt at ratio {r}"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn is_interior(p: &BigRational) -> bool {
    p.is_positive() && p < &BigRational::one()
}

/// Binary regions for `p_plus, p_minus` strictly inside `(0, 1)`.
///
/// Region `q` collects the noisy vectors obtained from `x` by flipping exactly
/// `q` of the `r_add + r_del` disagreeing bits. Its mass under `x` is the
/// Poisson-Binomial PMF `PB(q; [p+, r_add], [p-, r_del])` and its ratio is
/// `(p+ / (1 - p-))^(q - r_del) * (p- / (1 - p+))^(q - r_add)`.
/// The ratio is monotone in `q`, so regions are emitted in decreasing order
/// without sorting; if `p+ + p- = 1` every ratio is one and a single region remains.
pub fn binary_regions(noise: &NoiseSpec, radii: RadiiSpec) -> Result<RegionTable> {
    if !noise.is_binary() {
        return Err(Error::Boundary(format!("binary regions need K = 2, got K = {}", noise.num_categories())));
    }
    if radii.r_change != 0 {
        return Err(Error::Radii("r_change must be 0 for binary data".into()));
    }
    let (pp, pm) = (noise.p_plus(), noise.p_minus());
    if !is_interior(pp) || !is_interior(pm) {
        return Err(Error::Boundary(format!("need 0 < p+, p- < 1, got {noise}")));
    }
    let one = BigRational::one();
    let total = radii.total();
    let sum = pp + pm;
    if sum == one {
        return Ok(RegionTable::trivial());
    }

    let pmf = pb_pmf(&PBParams::new(pp.clone(), radii.r_add, pm.clone(), radii.r_del)?);
    let add_odds = pp / (&one - pm);
    let del_odds = pm / (&one - pp);
    let ratio_at = |q: u32| {
        pow(&add_odds, i64::from(q) - i64::from(radii.r_del)) * pow(&del_odds, i64::from(q) - i64::from(radii.r_add))
    };
    let order: Box<dyn Iterator<Item = u32>> = if sum < one { Box::new(0..=total) } else { Box::new((0..=total).rev()) };
    let entries = order
        .map(|q| {
            let ratio = ratio_at(q);
            let prob_x = pmf[q as usize].clone();
            let prob_xt = &prob_x / &ratio;
            Region { ratio: LikelihoodRatio::Finite(ratio), prob_x, prob_xt }
        })
        .collect();
    Ok(RegionTable::from_entries(entries))
}

/// Binary regions when exactly one flip probability is zero.
///
/// With `p+ = 0` (only deletions) there are three regions: vectors reachable
/// from both `x` and `x~` (all disagreeing bits zero), vectors only `x`
/// reaches, and vectors only `x~` reaches. `p- = 0` mirrors this with `p+`.
/// The third region has `prob_x = 0` and is kept; the multi-class certificate
/// assigns mass to it.
pub fn special_regions(noise: &NoiseSpec, radii: RadiiSpec) -> Result<RegionTable> {
    if !noise.is_binary() || radii.r_change != 0 {
        return Err(Error::Boundary("special regions are defined for binary data only".into()));
    }
    let (pp, pm) = (noise.p_plus(), noise.p_minus());
    let (p, reach_x, reach_xt) = match (pp.is_zero(), pm.is_zero()) {
        (true, false) if is_interior(pm) => (pm, radii.r_del, radii.r_add),
        (false, true) if is_interior(pp) => (pp, radii.r_add, radii.r_del),
        _ => return Err(Error::Boundary(format!("exactly one of p+, p- must be 0 and the other in (0, 1), got {noise}"))),
    };
    let one = BigRational::one();
    let shared_x = num::pow(p.clone(), reach_x as usize);
    let shared_xt = num::pow(p.clone(), reach_xt as usize);
    let only_x = &one - &shared_x;
    let only_xt = &one - &shared_xt;
    Ok(RegionTable::from_cells([
        (shared_x, shared_xt),
        (only_x, BigRational::zero()),
        (BigRational::zero(), only_xt),
    ]))
}

/// Binary regions for arbitrary `p+, p-` in `[0, 1]`, built from
/// `(i, j)` cells: `i` of the `r_add` bits and `j` of the `r_del` bits flipped
/// away from `x`. Used for the corner cases the other constructions reject.
pub fn binary_cell_regions(noise: &NoiseSpec, radii: RadiiSpec) -> Result<RegionTable> {
    if !noise.is_binary() || radii.r_change != 0 {
        return Err(Error::Boundary("binary cell regions need K = 2 and r_change = 0".into()));
    }
    let one = BigRational::one();
    let (pp, pm) = (noise.p_plus(), noise.p_minus());
    let (kp, km) = (&one - pp, &one - pm);
    let pw = |b: &BigRational, e: u32| num::pow(b.clone(), e as usize);
    let (ra, rd) = (radii.r_add, radii.r_del);
    let mut cells = Vec::with_capacity(((ra + 1) * (rd + 1)) as usize);
    for i in 0..=ra {
        let ca = BigRational::from_integer(binomial_coefficient(ra, i));
        for j in 0..=rd {
            let c = &ca * BigRational::from_integer(binomial_coefficient(rd, j));
            let px = &c * pw(pp, i) * pw(&kp, ra - i) * pw(pm, j) * pw(&km, rd - j);
            let pxt = &c * pw(&km, i) * pw(pm, ra - i) * pw(&kp, j) * pw(pp, rd - j);
            cells.push((px, pxt));
        }
    }
    Ok(RegionTable::from_cells(cells))
}

/// Merge key for triplet configurations: `(q0 - p1, p0 - q1, s0 - s1, q2 - p2)`.
/// Configurations with equal keys have equal likelihood ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripletKey(pub i32, pub i32, pub i32, pub i32);

/// All `(q, p, s)` with `q + p + s = r`.
fn triplets(r: u32) -> impl Iterator<Item = (u32, u32, u32)> {
    (0..=r).flat_map(move |q| (0..=r - q).map(move |p| (q, p, r - q - p)))
}

/// Regions for `K > 2` categories.
///
/// Within the disagreeing dimensions each coordinate of `z` either matches
/// `x`, matches `x~`, or matches neither. Counting these outcomes separately
/// for the added (`r_add`), deleted (`r_del`) and changed (`r_change`)
/// coordinates gives triplets `(q_j, p_j, s_j)`; each group is multinomial
/// with three outcomes regardless of `K`. Triplet combinations are grouped by
/// [`TripletKey`] and then merged on exact ratio equality. With `p+ = p-` the
/// ratio depends only on `q' - p'` and the table has exactly `2r + 1` regions.
pub fn discrete_regions(noise: &NoiseSpec, radii: RadiiSpec) -> Result<RegionTable> {
    if noise.num_categories() < 3 {
        return Err(Error::Boundary(format!("discrete regions need K >= 3, got K = {}", noise.num_categories())));
    }
    if !is_interior(noise.p_plus()) || !is_interior(noise.p_minus()) {
        return Err(Error::Boundary(format!("need 0 < p+, p- < 1 for K > 2, got {noise}")));
    }
    if noise.p_plus() == noise.p_minus() {
        Ok(symmetric_discrete_regions(noise, radii.total()))
    } else {
        Ok(triplet_regions(noise, radii))
    }
}

/// `p+ = p-`: regions indexed by `q' - p'` where `q'` counts coordinates
/// matching `x` and `p'` those matching `x~`; mass is `Mul([a, b, c], r)`.
pub(crate) fn symmetric_discrete_regions(noise: &NoiseSpec, r: u32) -> RegionTable {
    let (a, b, c) = (noise.a0(), noise.b0(), noise.c0());
    let base = &a / noise.b1();
    let mut by_diff: HashMap<i64, BigRational> = HashMap::new();
    for (q, p, s) in triplets(r) {
        let prob = multinomial_pmf((&a, &b, &c), r, (q, p, s)).expect("triplet sums to r");
        *by_diff.entry(i64::from(q) - i64::from(p)).or_insert_with(BigRational::zero) += prob;
    }
    RegionTable::from_cells(by_diff.into_iter().map(|(diff, px)| {
        let pxt = &px / pow(&base, diff);
        (px, pxt)
    }))
}

/// General triplet enumeration. Valid for any `K >= 2` with interior flip
/// probabilities; cells without mass under `x` are skipped (for `K = 2` these
/// are exactly the cells with some `s_j > 0`).
pub(crate) fn triplet_regions(noise: &NoiseSpec, radii: RadiiSpec) -> RegionTable {
    let (a0, b0, c0) = (noise.a0(), noise.b0(), noise.c0());
    let (a1, b1, c1) = (noise.a1(), noise.b1(), noise.c1());
    let g0: Vec<_> = triplets(radii.r_add)
        .map(|t| (t, multinomial_pmf((&a0, &b0, &c0), radii.r_add, t).expect("sums")))
        .collect();
    let g1: Vec<_> = triplets(radii.r_del)
        .map(|t| (t, multinomial_pmf((&a1, &b1, &c1), radii.r_del, t).expect("sums")))
        .collect();
    let g2: Vec<_> = triplets(radii.r_change)
        .map(|t| (t, multinomial_pmf((&a1, &b1, &c1), radii.r_change, t).expect("sums")))
        .collect();

    let mut grouped: HashMap<TripletKey, BigRational> = HashMap::new();
    for ((q0, p0, s0), m0) in g0.iter().filter(|(_, m)| !m.is_zero()) {
        for ((q1, p1, s1), m1) in g1.iter().filter(|(_, m)| !m.is_zero()) {
            let m01 = m0 * m1;
            for ((q2, p2, _), m2) in g2.iter().filter(|(_, m)| !m.is_zero()) {
                let key = TripletKey(
                    *q0 as i32 - *p1 as i32,
                    *p0 as i32 - *q1 as i32,
                    *s0 as i32 - *s1 as i32,
                    *q2 as i32 - *p2 as i32,
                );
                *grouped.entry(key).or_insert_with(BigRational::zero) += &m01 * m2;
            }
        }
    }

    let factor = |num: &BigRational, den: &BigRational, e: i32| {
        if e == 0 {
            BigRational::one()
        } else {
            pow(&(num / den), i64::from(e))
        }
    };
    RegionTable::from_cells(grouped.into_iter().map(|(TripletKey(k0, k1, k2, k3), px)| {
        let ratio = factor(&a0, &b1, k0) * factor(&b0, &a1, k1) * factor(&c0, &c1, k2) * factor(&a1, &b1, k3);
        let pxt = &px / &ratio;
        (px, pxt)
    }))
}

/// Region table for independent noise on two index groups: the Cartesian
/// product of the two tables, with masses and ratios multiplied.
pub fn joint_regions(table_a: &RegionTable, table_f: &RegionTable) -> RegionTable {
    let mut cells = Vec::with_capacity(table_a.len() * table_f.len());
    for ra in table_a.entries() {
        for rf in table_f.entries() {
            cells.push((&ra.prob_x * &rf.prob_x, &ra.prob_xt * &rf.prob_xt));
        }
    }
    RegionTable::from_cells(cells)
}

/// Region table for a single noise spec, choosing the construction that fits.
pub fn regions_for_noise(noise: &NoiseSpec, radii: RadiiSpec) -> Result<RegionTable> {
    if radii.total() == 0 {
        return Ok(RegionTable::trivial());
    }
    if noise.is_binary() {
        let (pp, pm) = (noise.p_plus(), noise.p_minus());
        if is_interior(pp) && is_interior(pm) {
            binary_regions(noise, radii)
        } else if (pp.is_zero() && is_interior(pm)) || (pm.is_zero() && is_interior(pp)) {
            special_regions(noise, radii)
        } else {
            binary_cell_regions(noise, radii)
        }
    } else {
        discrete_regions(noise, radii)
    }
}

/// Region table for a smoothing layout and matching radii.
pub fn regions_for(smoothing: &Smoothing, radii: &Perturbation) -> Result<RegionTable> {
    match (smoothing, radii) {
        (Smoothing::Single(n), Perturbation::Single(r)) => regions_for_noise(n, *r),
        (Smoothing::Joint { a, f }, Perturbation::Joint { a: ra, f: rf }) => {
            Ok(joint_regions(&regions_for_noise(a, *ra)?, &regions_for_noise(f, *rf)?))
        }
        _ => Err(Error::Radii("radii layout does not match the smoothing layout".into())),
    }
}
