//! The sparsity-aware noise process and Monte-Carlo vote collection.
//!
//! Randomness is ChaCha20 keyed by `(seed, stage)` with the sample index as
//! the stream id, so every noisy sample is a pure function of
//! `(seed, stage, index)` and vote counts do not depend on thread count.

use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use num::BigRational;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::confidence::two_stage_estimate;
use crate::error::{Error, Result};
use crate::rational::{half, u64_threshold};
use crate::types::{BoundMode, ClassId, DiscreteVector, NoiseSpec, VoteRecord};

/// A (possibly external) base classifier over `{0, ..., K-1}^d`.
pub trait BaseClassifier: Sync {
    fn num_classes(&self) -> u32;

    fn classify(&self, v: &DiscreteVector) -> std::result::Result<ClassId, String>;
}

/// Noise for a contiguous block of coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoiseGroup {
    pub name: String,
    pub indices: Range<usize>,
    pub noise: NoiseSpec,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoisePlan {
    Uniform(NoiseSpec),
    /// Disjoint groups covering every coordinate, each with its own noise.
    Grouped(Vec<NoiseGroup>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplerConfig {
    pub noise: NoisePlan,
    pub seed: u64,
    pub num_selection: u64,
    pub num_estimation: u64,
}

impl SamplerConfig {
    pub fn new(noise: NoiseSpec, seed: u64, num_selection: u64, num_estimation: u64) -> Self {
        Self { noise: NoisePlan::Uniform(noise), seed, num_selection, num_estimation }
    }
}

/// Flip thresholds resolved per coordinate block.
#[derive(Clone, Debug)]
pub struct Perturber {
    blocks: Vec<(Range<usize>, u64, u64)>,
    num_categories: u32,
}

impl Perturber {
    pub fn new(plan: &NoisePlan, dims: usize) -> Result<Self> {
        let thresholds = |n: &NoiseSpec| (u64_threshold(n.p_plus()), u64_threshold(n.p_minus()));
        match plan {
            NoisePlan::Uniform(n) => {
                let (tp, tm) = thresholds(n);
                Ok(Self { blocks: vec![(0..dims, tp, tm)], num_categories: n.num_categories() })
            }
            NoisePlan::Grouped(groups) => {
                let Some(first) = groups.first() else {
                    return Err(Error::Config("no noise groups".into()));
                };
                let k = first.noise.num_categories();
                let mut sorted: Vec<&NoiseGroup> = groups.iter().collect();
                sorted.sort_by_key(|g| g.indices.start);
                let mut next = 0;
                let mut blocks = Vec::new();
                for g in sorted {
                    if g.noise.num_categories() != k {
                        return Err(Error::Config("groups disagree on the number of categories".into()));
                    }
                    if g.indices.start != next || g.indices.end < g.indices.start {
                        return Err(Error::Config(format!("group {} does not continue at index {next}", g.name)));
                    }
                    let (tp, tm) = thresholds(&g.noise);
                    blocks.push((g.indices.clone(), tp, tm));
                    next = g.indices.end;
                }
                if next != dims {
                    return Err(Error::Config(format!("groups cover {next} of {dims} coordinates")));
                }
                Ok(Self { blocks, num_categories: k })
            }
        }
    }

    /// Applies the noise once. Zeros flip with `p_plus`, non-zeros with
    /// `p_minus`; a flipped coordinate moves uniformly to one of the other
    /// `K - 1` values (for `K = 2`, the complement bit).
    pub fn perturb<R: RngCore>(&self, x: &DiscreteVector, rng: &mut R) -> DiscreteVector {
        let k = self.num_categories;
        let mut out = x.values().to_vec();
        for (range, tp, tm) in &self.blocks {
            for v in &mut out[range.clone()] {
                let threshold = if *v == 0 { *tp } else { *tm };
                // u64::MAX stands for probability one
                let flip = threshold == u64::MAX || rng.next_u64() < threshold;
                if flip {
                    *v = if k == 2 {
                        1 - *v
                    } else {
                        let r = rng.gen_range(0..k - 1);
                        if r >= *v { r + 1 } else { r }
                    };
                }
            }
        }
        DiscreteVector::from_raw(out, k)
    }
}

/// Single application of the noise to `x`.
pub fn perturb<R: RngCore>(x: &DiscreteVector, noise: &NoiseSpec, rng: &mut R) -> Result<DiscreteVector> {
    if x.num_categories() != noise.num_categories() {
        return Err(Error::Shape("vector and noise disagree on K".into()));
    }
    Ok(Perturber::new(&NoisePlan::Uniform(noise.clone()), x.dims())?.perturb(x, rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Selection = 1,
    Estimation = 2,
}

/// Generator for one noisy sample: key = `seed` (little endian) followed by the
/// stage byte and zero padding; stream = sample index.
pub fn sample_rng(seed: u64, stage: Stage, index: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = stage as u8;
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

const BLOCK: u64 = 2048;

fn count_votes(x: &DiscreteVector, classifier: &dyn BaseClassifier, perturber: &Perturber, seed: u64, stage: Stage, n: u64) -> Result<Vec<u64>> {
    let classes = classifier.num_classes() as usize;
    let blocks: Vec<u64> = (0..n.div_ceil(BLOCK)).collect();
    let partial: Vec<Result<Vec<u64>>> = blocks
        .par_iter()
        .map(|&b| {
            let mut counts = vec![0u64; classes];
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let mut rng = sample_rng(seed, stage, i);
                let z = perturber.perturb(x, &mut rng);
                let c = classifier.classify(&z).map_err(|message| Error::Classifier { index: i, message })?;
                let slot = counts.get_mut(c as usize).ok_or_else(|| Error::Classifier {
                    index: i,
                    message: format!("class {c} outside 0..{classes}"),
                })?;
                *slot += 1;
            }
            Ok(counts)
        })
        .collect();
    let mut total = vec![0u64; classes];
    for p in partial {
        for (t, c) in total.iter_mut().zip(p?) {
            *t += c;
        }
    }
    Ok(total)
}

/// Draws `num_selection` and `num_estimation` noisy copies of `x` from
/// disjoint sample streams and counts the classifier's votes on each.
pub fn collect_votes(id: &str, x: &DiscreteVector, classifier: &dyn BaseClassifier, cfg: &SamplerConfig) -> Result<(VoteRecord, VoteRecord)> {
    if cfg.num_selection == 0 || cfg.num_estimation == 0 {
        return Err(Error::Config("sample counts must be positive".into()));
    }
    let perturber = Perturber::new(&cfg.noise, x.dims())?;
    if perturber.num_categories != x.num_categories() {
        return Err(Error::Shape("vector and noise disagree on K".into()));
    }
    let sel = count_votes(x, classifier, &perturber, cfg.seed, Stage::Selection, cfg.num_selection)?;
    let est = count_votes(x, classifier, &perturber, cfg.seed, Stage::Estimation, cfg.num_estimation)?;
    Ok((VoteRecord::new(id, sel), VoteRecord::new(id, est)))
}

/// Smoothed prediction: the selection votes pick the class, the estimation
/// votes must lower-bound it above one half; `None` means abstain.
pub fn smoothed_predict(x: &DiscreteVector, classifier: &dyn BaseClassifier, cfg: &SamplerConfig, alpha: &BigRational) -> Result<Option<ClassId>> {
    let (sel, est) = collect_votes("", x, classifier, cfg)?;
    let b = two_stage_estimate(&sel, &est, alpha, BoundMode::BinaryClass, classifier.num_classes())?;
    Ok((b.p_lower > half()).then_some(b.top_class))
}

// Built-in toy classifiers.

/// Always predicts the same class.
#[derive(Clone, Debug)]
pub struct Constant {
    pub class: ClassId,
    pub num_classes: u32,
}

impl BaseClassifier for Constant {
    fn num_classes(&self) -> u32 {
        self.num_classes
    }

    fn classify(&self, _: &DiscreteVector) -> std::result::Result<ClassId, String> {
        Ok(self.class)
    }
}

/// Parity of the number of non-zeros among the first `width` coordinates.
#[derive(Clone, Debug)]
pub struct Parity {
    pub width: usize,
}

impl BaseClassifier for Parity {
    fn num_classes(&self) -> u32 {
        2
    }

    fn classify(&self, v: &DiscreteVector) -> std::result::Result<ClassId, String> {
        Ok((v.values().iter().take(self.width).filter(|&&x| x != 0).count() % 2) as ClassId)
    }
}

/// Class 1 iff coordinate `index` is at least `threshold`.
#[derive(Clone, Debug)]
pub struct Threshold {
    pub index: usize,
    pub threshold: u32,
}

impl BaseClassifier for Threshold {
    fn num_classes(&self) -> u32 {
        2
    }

    fn classify(&self, v: &DiscreteVector) -> std::result::Result<ClassId, String> {
        let x = v.values().get(self.index).ok_or_else(|| format!("index {} out of range", self.index))?;
        Ok(ClassId::from(*x >= self.threshold))
    }
}

/// Class 1 iff more than half of the first `width` coordinates are non-zero.
#[derive(Clone, Debug)]
pub struct Majority {
    pub width: usize,
}

impl BaseClassifier for Majority {
    fn num_classes(&self) -> u32 {
        2
    }

    fn classify(&self, v: &DiscreteVector) -> std::result::Result<ClassId, String> {
        let ones = v.values().iter().take(self.width).filter(|&&x| x != 0).count();
        Ok(ClassId::from(2 * ones > self.width))
    }
}

/// Splits the coordinates into `blocks` equal contiguous blocks and predicts
/// the block with the most non-zeros (ties to the lowest block).
#[derive(Clone, Debug)]
pub struct Blocks {
    pub blocks: u32,
}

impl BaseClassifier for Blocks {
    fn num_classes(&self) -> u32 {
        self.blocks
    }

    fn classify(&self, v: &DiscreteVector) -> std::result::Result<ClassId, String> {
        let d = v.dims();
        let b = self.blocks as usize;
        if b == 0 || d < b {
            return Err(format!("{d} coordinates cannot form {b} blocks"));
        }
        let size = d / b;
        let mut best = (0usize, 0usize);
        for i in 0..b {
            let end = if i + 1 == b { d } else { (i + 1) * size };
            let n = v.values()[i * size..end].iter().filter(|&&x| x != 0).count();
            if n > best.1 {
                best = (i, n);
            }
        }
        Ok(best.0 as ClassId)
    }
}

/// Class 1 iff `sum(w_i * [x_i != 0]) > bias`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Linear {
    pub fn score(&self, v: &DiscreteVector) -> f64 {
        self.weights.iter().zip(v.values()).filter(|(_, &x)| x != 0).map(|(w, _)| w).sum()
    }

    /// Difference-of-centroids fit on binary labels. With `augment`, every
    /// training point is replaced by one noisy copy drawn with the given noise
    /// and seed.
    pub fn fit_centroids(data: &[DiscreteVector], labels: &[ClassId], augment: Option<(&NoiseSpec, u64)>) -> Result<Self> {
        let d = data.first().map(|v| v.dims()).ok_or_else(|| Error::Config("empty training set".into()))?;
        if data.len() != labels.len() {
            return Err(Error::Shape("data and labels differ in length".into()));
        }
        let mut sums = [vec![0f64; d], vec![0f64; d]];
        let mut counts = [0usize; 2];
        for (i, (x, &y)) in data.iter().zip(labels).enumerate() {
            let y = y.min(1) as usize;
            let noisy;
            let x = match augment {
                Some((noise, seed)) => {
                    let mut rng = sample_rng(seed, Stage::Selection, i as u64);
                    noisy = perturb(x, noise, &mut rng)?;
                    &noisy
                }
                None => x,
            };
            for (s, &v) in sums[y].iter_mut().zip(x.values()) {
                *s += f64::from(u8::from(v != 0));
            }
            counts[y] += 1;
        }
        if counts.contains(&0) {
            return Err(Error::Config("both classes need training points".into()));
        }
        let mean = |c: usize, j: usize| sums[c][j] / counts[c] as f64;
        let weights: Vec<f64> = (0..d).map(|j| mean(1, j) - mean(0, j)).collect();
        // nearest centroid on 0/1 features: ||x - m1||^2 < ||x - m0||^2
        let bias = (0..d).map(|j| mean(1, j).powi(2) - mean(0, j).powi(2)).sum::<f64>() / 2.0;
        Ok(Self { weights, bias })
    }
}

impl BaseClassifier for Linear {
    fn num_classes(&self) -> u32 {
        2
    }

    fn classify(&self, v: &DiscreteVector) -> std::result::Result<ClassId, String> {
        Ok(ClassId::from(self.score(v) > self.bias))
    }
}

/// Lookup-table classifier over all `K^d` inputs, indexed in base `K` with the
/// first coordinate most significant.
#[derive(Clone, Debug)]
pub struct Table {
    pub labels: Vec<ClassId>,
    pub num_classes: u32,
}

impl BaseClassifier for Table {
    fn num_classes(&self) -> u32 {
        self.num_classes
    }

    fn classify(&self, v: &DiscreteVector) -> std::result::Result<ClassId, String> {
        let k = v.num_categories() as usize;
        let idx = v.values().iter().fold(0usize, |acc, &x| acc * k + x as usize);
        self.labels.get(idx).copied().ok_or_else(|| format!("table has no entry {idx}"))
    }
}

/// Classifier backed by a child process speaking a line protocol: one vector
/// per line (space-separated integers) in, one class id per line out.
pub struct ExternalClassifier {
    io: Mutex<(ChildStdin, BufReader<ChildStdout>)>,
    child: Mutex<Child>,
    num_classes: u32,
}

impl ExternalClassifier {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str, num_classes: u32) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Config(format!("cannot start {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(Self { io: Mutex::new((stdin, stdout)), child: Mutex::new(child), num_classes })
    }
}

impl BaseClassifier for ExternalClassifier {
    fn num_classes(&self) -> u32 {
        self.num_classes
    }

    fn classify(&self, v: &DiscreteVector) -> std::result::Result<ClassId, String> {
        let mut guard = self.io.lock().map_err(|_| "classifier pipe poisoned".to_string())?;
        let (stdin, stdout) = &mut *guard;
        let line: Vec<String> = v.values().iter().map(u32::to_string).collect();
        writeln!(stdin, "{}", line.join(" ")).and_then(|_| stdin.flush()).map_err(|e| format!("write failed: {e}"))?;
        let mut reply = String::new();
        let n = stdout.read_line(&mut reply).map_err(|e| format!("read failed: {e}"))?;
        if n == 0 {
            return Err("classifier closed its output".into());
        }
        reply.trim().parse().map_err(|_| format!("bad class id {:?}", reply.trim()))
    }
}

impl Drop for ExternalClassifier {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
