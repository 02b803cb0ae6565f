//! Worst-case classifier problems over a region table.
//!
//! Certifying `x` against `x~` asks how little probability a classifier that
//! votes for `y*` with probability `p_lower` at `x` can keep at `x~`. The
//! answer is a fractional knapsack: spend the `p_lower` budget on regions in
//! decreasing likelihood-ratio order, consuming the last one partially.

use std::collections::HashMap;

use num::{BigRational, One, Zero};
use rayon::prelude::*;

use crate::confidence::{binary_bounds, multiclass_bounds};
use crate::error::{Error, Result};
use crate::rational::half;
use crate::regions::{regions_for, RegionTable};
use crate::types::{BoundMode, CertResult, ClassBounds, Perturbation, RadiiSpec, Smoothing, VoteRecord};

/// Default per-axis search limit for radius sweeps.
pub const DEFAULT_RADIUS_CAP: u32 = 200;

/// Fractions of each region assigned by a greedy solve, in table order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BudgetTrace {
    pub fractions: Vec<BigRational>,
    /// `sum(fraction * prob_xt)`
    pub value: BigRational,
}

impl BudgetTrace {
    /// `sum(fraction * prob_x)`, which equals the requested budget.
    pub fn spent(&self, table: &RegionTable) -> BigRational {
        self.fractions.iter().zip(table.entries()).map(|(h, e)| h * &e.prob_x).sum()
    }
}

fn check_budget(table: &RegionTable, budget: &BigRational) -> Result<()> {
    if budget < &BigRational::zero() || budget > &table.total_x() {
        return Err(Error::Budget(budget.to_string()));
    }
    Ok(())
}

/// Spend `budget` of `x`-mass on regions visited in `order`, minimizing or
/// maximizing the `x~`-mass collected depending on the direction. Regions with
/// no `x`-mass are free: skipped when descending, taken when ascending.
fn greedy(table: &RegionTable, budget: &BigRational, descending: bool) -> Result<BudgetTrace> {
    check_budget(table, budget)?;
    let entries = table.entries();
    let mut fractions = vec![BigRational::zero(); entries.len()];
    let mut spent = BigRational::zero();
    let mut value = BigRational::zero();
    let order: Box<dyn Iterator<Item = usize>> =
        if descending { Box::new(0..entries.len()) } else { Box::new((0..entries.len()).rev()) };
    for i in order {
        let e = &entries[i];
        if e.prob_x.is_zero() {
            if !descending {
                fractions[i] = BigRational::one();
                value += &e.prob_xt;
            }
            continue;
        }
        if &spent == budget {
            continue;
        }
        let remaining = budget - &spent;
        if e.prob_x <= remaining {
            fractions[i] = BigRational::one();
            spent += &e.prob_x;
            value += &e.prob_xt;
        } else {
            let h = &remaining / &e.prob_x;
            value += &h * &e.prob_xt;
            fractions[i] = h;
            spent = budget.clone();
        }
    }
    if &spent != budget {
        return Err(Error::Budget(budget.to_string()));
    }
    Ok(BudgetTrace { fractions, value })
}

/// Smallest probability a classifier with `Pr(y* | x) = p_lower` can keep at `x~`.
pub fn rho(table: &RegionTable, p_lower: &BigRational) -> Result<BigRational> {
    Ok(rho_trace(table, p_lower)?.value)
}

pub fn rho_trace(table: &RegionTable, p_lower: &BigRational) -> Result<BudgetTrace> {
    greedy(table, p_lower, true)
}

/// Worst-case margin `Pr(y* | x~) - Pr(runner-up | x~)` given a lower bound on
/// the top class and an upper bound on the runner-up at `x`.
///
/// The top-class assignment takes regions in decreasing ratio order, the
/// runner-up assignment in increasing order. Requires `p_lower_star + p_upper_runner <= 1`.
pub fn margin(table: &RegionTable, p_lower_star: &BigRational, p_upper_runner: &BigRational) -> Result<BigRational> {
    let total = p_lower_star + p_upper_runner;
    if total > BigRational::one() {
        return Err(Error::Validity(total.to_string()));
    }
    let top = greedy(table, p_lower_star, true)?;
    let runner = greedy(table, p_upper_runner, false)?;
    Ok(top.value - runner.value)
}

/// Certificate value at a given table. `(value, certified, mode, fallback)`.
fn evaluate(table: &RegionTable, bounds: &ClassBounds) -> Result<(BigRational, bool, BoundMode, bool)> {
    match bounds.mode {
        BoundMode::MultiClass if &bounds.p_lower + &bounds.p_upper_runner <= BigRational::one() => {
            let m = margin(table, &bounds.p_lower, &bounds.p_upper_runner)?;
            let ok = m > BigRational::zero();
            Ok((m, ok, BoundMode::MultiClass, false))
        }
        mode => {
            let v = rho(table, &bounds.p_lower)?;
            let ok = v > half();
            Ok((v, ok, BoundMode::BinaryClass, mode == BoundMode::MultiClass))
        }
    }
}

fn abstains(bounds: &ClassBounds) -> Result<bool> {
    Ok(!evaluate(&RegionTable::trivial(), bounds)?.1)
}

/// Certifies one input at the given radii from its class bounds.
///
/// Binary-class: certified iff `rho > 1/2`. Multi-class: certified iff the
/// worst-case margin is `> 0`; if the bounds do not form a valid multi-class
/// problem the binary-class certificate on `p_lower` is used and `fallback`
/// is set. `abstained` means the bounds fail even at radius zero.
pub fn certify_point(smoothing: &Smoothing, radii: &Perturbation, bounds: &ClassBounds) -> Result<CertResult> {
    let table = regions_for(smoothing, radii)?;
    certify_with_table(&table, *radii, bounds)
}

pub fn certify_with_table(table: &RegionTable, radii: Perturbation, bounds: &ClassBounds) -> Result<CertResult> {
    let (rho_or_margin, certified, mode, fallback) = evaluate(table, bounds)?;
    Ok(CertResult { input_id: String::new(), radii, certified, rho_or_margin, abstained: abstains(bounds)?, mode, fallback })
}

fn certified_at(smoothing: &Smoothing, radii: RadiiSpec, bounds: &ClassBounds) -> Result<bool> {
    Ok(certify_point(smoothing, &Perturbation::Single(radii), bounds)?.certified)
}

/// Largest certifiable `r_add` for each `r_del = 0, 1, ...` (at fixed `r_change`),
/// stopping at the first `r_del` that fails even with `r_add = 0`.
///
/// Assumes certifiability is monotone in the radii: the sweep walks the
/// staircase boundary once, so it costs `O(cap)` certificate evaluations.
/// Empty when the input is not certifiable at the starting point.
pub fn max_radius_frontier(smoothing: &Smoothing, bounds: &ClassBounds, cap: u32, r_change: u32) -> Result<Vec<RadiiSpec>> {
    let at = |ra, rd| RadiiSpec { r_add: ra, r_del: rd, r_change };
    let mut frontier = Vec::new();
    if !certified_at(smoothing, at(0, 0), bounds)? {
        return Ok(frontier);
    }
    let mut ra = 0;
    while ra < cap && certified_at(smoothing, at(ra + 1, 0), bounds)? {
        ra += 1;
    }
    frontier.push(at(ra, 0));
    for rd in 1..=cap {
        if !certified_at(smoothing, at(0, rd), bounds)? {
            break;
        }
        while ra > 0 && !certified_at(smoothing, at(ra, rd), bounds)? {
            ra -= 1;
        }
        frontier.push(at(ra, rd));
    }
    Ok(frontier)
}

/// Largest `r_del` certifiable with `r_add = r_change = 0`, or `None` if the
/// input is not certifiable at all.
pub fn max_certified_deletions(smoothing: &Smoothing, bounds: &ClassBounds, cap: u32) -> Result<Option<u32>> {
    if !certified_at(smoothing, RadiiSpec::zero(), bounds)? {
        return Ok(None);
    }
    let mut rd = 0;
    while rd < cap && certified_at(smoothing, RadiiSpec::binary(0, rd + 1), bounds)? {
        rd += 1;
    }
    Ok(Some(rd))
}

/// Every radii split with `r_add + r_del (+ r_change) = r`.
pub fn l0_splits(r: u32, num_categories: u32) -> Vec<RadiiSpec> {
    let mut out = Vec::new();
    for ra in 0..=r {
        if num_categories == 2 {
            out.push(RadiiSpec::binary(ra, r - ra));
        } else {
            for rd in 0..=r - ra {
                out.push(RadiiSpec { r_add: ra, r_del: rd, r_change: r - ra - rd });
            }
        }
    }
    out
}

/// Certifies the whole `l0` ball of radius `r`: every split of `r` into
/// additions, deletions (and changes) must certify. Identical tables are
/// evaluated once. The reported radii and value are those of the worst split.
pub fn certify_l0(smoothing: &Smoothing, bounds: &ClassBounds, r: u32) -> Result<CertResult> {
    let Smoothing::Single(noise) = smoothing else {
        return Err(Error::Radii("l0 certification needs a single noise spec".into()));
    };
    let mut seen: HashMap<RegionTable, CertResult> = HashMap::new();
    let mut worst: Option<CertResult> = None;
    for split in l0_splits(r, noise.num_categories()) {
        let radii = Perturbation::Single(split);
        let table = regions_for(smoothing, &radii)?;
        let res = match seen.get(&table) {
            Some(hit) => CertResult { radii, ..hit.clone() },
            None => {
                let res = certify_with_table(&table, radii, bounds)?;
                seen.insert(table, res.clone());
                res
            }
        };
        let replace = match &worst {
            None => true,
            Some(w) => (!res.certified && w.certified) || (res.certified == w.certified && res.rho_or_margin < w.rho_or_margin),
        };
        if replace {
            worst = Some(res);
        }
    }
    Ok(worst.expect("at least one split"))
}

/// Work counters reported by the batch certifiers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BatchStats {
    pub bound_computations: usize,
    pub certificate_computations: usize,
}

/// Key identifying bounds that certify identically regardless of class label.
fn bounds_key(b: &ClassBounds) -> (BigRational, BigRational, BoundMode) {
    (b.p_lower.clone(), b.p_upper_runner.clone(), b.mode)
}

/// Certifies many inputs whose bounds are already known. Inputs sharing
/// `(p_lower, runner bound, mode)` are certified once; distinct profiles are
/// evaluated in parallel and results come back in input order.
pub fn certify_bounds_batch(items: &[(String, ClassBounds)], smoothing: &Smoothing, radii: &Perturbation) -> Result<(Vec<CertResult>, usize)> {
    let mut keys = Vec::new();
    let mut index: HashMap<(BigRational, BigRational, BoundMode), usize> = HashMap::new();
    for (_, b) in items {
        index.entry(bounds_key(b)).or_insert_with(|| {
            keys.push(b.clone());
            keys.len() - 1
        });
    }
    let table = regions_for(smoothing, radii)?;
    let computed: Vec<CertResult> = keys.par_iter().map(|b| certify_with_table(&table, *radii, b)).collect::<Result<_>>()?;
    let results = items
        .iter()
        .map(|(id, b)| CertResult { input_id: id.clone(), ..computed[index[&bounds_key(b)]].clone() })
        .collect();
    Ok((results, keys.len()))
}

/// Bounds-and-certify for single-stage vote records with memoization: vote
/// profiles that lead to the same bounds are bounded once, and identical
/// bounds are certified once.
pub fn memoized_certify(
    votes: &[VoteRecord],
    smoothing: &Smoothing,
    radii: &Perturbation,
    alpha: &BigRational,
    mode: BoundMode,
    num_classes: u32,
) -> Result<(Vec<CertResult>, BatchStats)> {
    // binary bounds depend on (n, top count); multi-class also on the largest other count
    let profile = |v: &VoteRecord| -> Result<(u64, u64, u64)> {
        let top = v.top_class().ok_or_else(|| Error::EmptyVotes(v.input_id.clone()))?;
        let other = match mode {
            BoundMode::BinaryClass => 0,
            BoundMode::MultiClass => v.counts().iter().enumerate().filter(|(c, _)| *c as u32 != top).map(|(_, &n)| n).max().unwrap_or(0),
        };
        Ok((v.num_samples(), v.count(top), other))
    };
    let mut reps: Vec<&VoteRecord> = Vec::new();
    let mut index = HashMap::new();
    let mut slots = Vec::with_capacity(votes.len());
    for v in votes {
        let key = profile(v)?;
        let slot = *index.entry(key).or_insert_with(|| {
            reps.push(v);
            reps.len() - 1
        });
        slots.push(slot);
    }
    let bounds: Vec<ClassBounds> = reps
        .par_iter()
        .map(|v| match mode {
            BoundMode::BinaryClass => binary_bounds(v, alpha),
            BoundMode::MultiClass => multiclass_bounds(v, alpha, num_classes),
        })
        .collect::<Result<_>>()?;
    let items: Vec<(String, ClassBounds)> = votes
        .iter()
        .zip(&slots)
        .map(|(v, &s)| {
            let top = v.top_class().expect("checked above");
            (v.input_id.clone(), ClassBounds { top_class: top, ..bounds[s].clone() })
        })
        .collect();
    let (results, certs) = certify_bounds_batch(&items, smoothing, radii)?;
    Ok((results, BatchStats { bound_computations: reps.len(), certificate_computations: certs }))
}
