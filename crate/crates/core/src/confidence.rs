//! Vote counts to class probability bounds.

use num::{BigRational, Zero};

use crate::error::{Error, Result};
use crate::exactmath::{clopper_pearson_lower, clopper_pearson_upper};
use crate::types::{BoundMode, ClassBounds, ClassId, VoteRecord};

/// Default sample counts for selecting the top class and for bounding it.
pub const DEFAULT_SELECTION_SAMPLES: u64 = 1_000;
pub const DEFAULT_ESTIMATION_SAMPLES: u64 = 1_000_000;

fn nonempty(votes: &VoteRecord) -> Result<()> {
    if votes.num_samples() == 0 {
        return Err(Error::EmptyVotes(votes.input_id.clone()));
    }
    Ok(())
}

fn bound_top(votes: &VoteRecord, top: ClassId, alpha: &BigRational) -> Result<ClassBounds> {
    nonempty(votes)?;
    let p_lower = clopper_pearson_lower(votes.count(top), votes.num_samples(), alpha);
    ClassBounds::binary(top, p_lower, alpha.clone())
}

fn bound_all(votes: &VoteRecord, top: ClassId, alpha: &BigRational, num_classes: u32) -> Result<ClassBounds> {
    nonempty(votes)?;
    if let Some((c, _)) = votes.counts().iter().enumerate().skip(num_classes as usize).find(|(_, &n)| n > 0) {
        return Err(Error::Config(format!("{}: votes for class {c} but only {num_classes} classes declared", votes.input_id)));
    }
    let n = votes.num_samples();
    let per_class = alpha / BigRational::from_integer(num_classes.into());
    let p_lower = clopper_pearson_lower(votes.count(top), n, &per_class);
    let runner = (0..num_classes)
        .filter(|&c| c != top)
        .map(|c| votes.count(c))
        .max()
        .map(|k| clopper_pearson_upper(k, n, &per_class))
        .unwrap_or_else(BigRational::zero);
    ClassBounds::multi(top, p_lower, runner, alpha.clone())
}

/// Clopper-Pearson lower bound on the most voted class at level `alpha`;
/// the runner-up bound is its complement.
pub fn binary_bounds(votes: &VoteRecord, alpha: &BigRational) -> Result<ClassBounds> {
    let top = votes.top_class().ok_or_else(|| Error::EmptyVotes(votes.input_id.clone()))?;
    bound_top(votes, top, alpha)
}

/// Simultaneous bounds over `num_classes` hypotheses (Bonferroni, `alpha / C`
/// per class): a lower bound for the top class and the largest upper bound
/// among the others.
///
/// `num_classes` is the declared class count, which may exceed the number of
/// classes that actually received votes.
pub fn multiclass_bounds(votes: &VoteRecord, alpha: &BigRational, num_classes: u32) -> Result<ClassBounds> {
    let top = votes.top_class().ok_or_else(|| Error::EmptyVotes(votes.input_id.clone()))?;
    bound_all(votes, top, alpha, num_classes)
}

/// Picks the top class from `selection` and bounds it using `estimation`
/// only, so the bound does not reuse the samples that chose the class.
pub fn two_stage_estimate(
    selection: &VoteRecord,
    estimation: &VoteRecord,
    alpha: &BigRational,
    mode: BoundMode,
    num_classes: u32,
) -> Result<ClassBounds> {
    let top = selection.top_class().ok_or_else(|| Error::EmptyVotes(selection.input_id.clone()))?;
    match mode {
        BoundMode::BinaryClass => bound_top(estimation, top, alpha),
        BoundMode::MultiClass => bound_all(estimation, top, alpha, num_classes),
    }
}
