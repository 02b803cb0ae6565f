use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sparsecert::smoothing::{
    collect_votes, BaseClassifier, Blocks, Constant, ExternalClassifier, Linear, Majority, NoiseGroup, NoisePlan, Parity, SamplerConfig, Threshold,
};
use sparsecert::{DiscreteVector, NoiseSpec};

use crate::votes::{self, VotesFile};
use crate::{emit, usage, CliError, SampleArgs};

fn bad_spec(spec: &str, why: &str) -> CliError {
    CliError::Usage(format!("bad classifier spec {spec:?}: {why}"))
}

/// Parses a built-in classifier spec such as `majority:5` or `threshold:3:1`.
pub fn parse_classifier(spec: &str) -> Result<Box<dyn BaseClassifier>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |i: usize| -> Result<u64, CliError> {
        parts.get(i).ok_or_else(|| bad_spec(spec, "missing argument"))?.parse().map_err(|_| bad_spec(spec, "expected a non-negative integer"))
    };
    let arity = |lo: usize, hi: usize| {
        if parts.len() < lo || parts.len() > hi {
            Err(bad_spec(spec, "wrong number of arguments"))
        } else {
            Ok(())
        }
    };
    Ok(match parts[0] {
        "majority" => {
            arity(2, 2)?;
            Box::new(Majority { width: num(1)? as usize })
        }
        "parity" => {
            arity(2, 2)?;
            Box::new(Parity { width: num(1)? as usize })
        }
        "constant" => {
            arity(2, 3)?;
            let class = num(1)? as u32;
            let num_classes = if parts.len() == 3 { num(2)? as u32 } else { (class + 1).max(2) };
            if class >= num_classes {
                return Err(bad_spec(spec, "class must be below the class count"));
            }
            Box::new(Constant { class, num_classes })
        }
        "threshold" => {
            arity(2, 3)?;
            let threshold = if parts.len() == 3 { num(2)? as u32 } else { 1 };
            Box::new(Threshold { index: num(1)? as usize, threshold })
        }
        "blocks" => {
            arity(2, 2)?;
            let blocks = num(1)? as u32;
            if blocks < 2 {
                return Err(bad_spec(spec, "need at least two blocks"));
            }
            Box::new(Blocks { blocks })
        }
        "linear" => {
            arity(2, 3)?;
            let weights = parts[1].split(',').map(|w| w.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad_spec(spec, "bad weight"))?;
            let bias = match parts.get(2) {
                Some(b) => b.parse().map_err(|_| bad_spec(spec, "bad bias"))?,
                None => 0.0,
            };
            Box::new(Linear { weights, bias })
        }
        _ => return Err(bad_spec(spec, "unknown classifier")),
    })
}

/// Parses `NAME:LO..HI:P+,P-` with an inclusive index range.
pub fn parse_group(s: &str, k: u32) -> Result<NoiseGroup, CliError> {
    let err = |why: &str| CliError::Usage(format!("bad group {s:?}: {why}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [name, range, probs] = parts[..] else {
        return Err(err("expected NAME:LO..HI:P+,P-"));
    };
    let (lo, hi) = range.split_once("..").ok_or_else(|| err("expected LO..HI"))?;
    let (lo, hi): (usize, usize) = (lo.parse().map_err(|_| err("bad LO"))?, hi.parse().map_err(|_| err("bad HI"))?);
    if lo > hi {
        return Err(err("LO exceeds HI"));
    }
    let (pp, pm) = probs.split_once(',').ok_or_else(|| err("expected P+,P-"))?;
    Ok(NoiseGroup { name: name.to_string(), indices: lo..hi + 1, noise: usage(NoiseSpec::parse(pp, pm, k))? })
}

fn read_inputs(text: &str, k: u32) -> Result<Vec<(String, DiscreteVector)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = |m: String| CliError::Parse { line: i + 1, message: m };
        let mut tokens = t.split_whitespace();
        let id = tokens.next().expect("non-empty line").to_string();
        let values = tokens.map(|v| v.parse::<u32>().map_err(|_| bad(format!("bad value {v:?}")))).collect::<Result<Vec<_>, _>>()?;
        let v = DiscreteVector::new(values, k).map_err(|e| bad(e.to_string()))?;
        if let Some((_, first)) = out.first() {
            let first: &DiscreteVector = first;
            if first.dims() != v.dims() {
                return Err(bad(format!("{} values, earlier inputs have {}", v.dims(), first.dims())));
            }
        }
        out.push((id, v));
    }
    Ok(out)
}

/// Random sparse inputs: every coordinate is non-zero with probability
/// `density`, with a uniformly chosen non-zero value.
pub fn synthetic_inputs(n: usize, dims: usize, density: f64, k: u32, seed: u64) -> Vec<(String, DiscreteVector)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let width = n.saturating_sub(1).to_string().len();
    (0..n)
        .map(|i| {
            let values = (0..dims).map(|_| if rng.gen_bool(density) { rng.gen_range(1..k) } else { 0 }).collect();
            (format!("s{i:0width$}"), DiscreteVector::new(values, k).expect("values below k"))
        })
        .collect()
}

pub fn run(a: &SampleArgs, out: &mut (dyn Write + Send), log: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let plan = if a.group.is_empty() {
        let (pp, pm) = (a.p_plus.as_deref().unwrap_or_default(), a.p_minus.as_deref().unwrap_or_default());
        NoisePlan::Uniform(usage(NoiseSpec::parse(pp, pm, a.k))?)
    } else {
        NoisePlan::Grouped(a.group.iter().map(|g| parse_group(g, a.k)).collect::<Result<_, _>>()?)
    };
    if !(0.0..=1.0).contains(&a.density) {
        return Err(CliError::Usage("--density must lie in [0, 1]".into()));
    }
    let inputs = match (&a.inputs, a.synthetic) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            read_inputs(&text, a.k)?
        }
        (None, Some(n)) => synthetic_inputs(n, a.dims, a.density, a.k, a.seed),
        (None, None) => unreachable!("clap requires one input source"),
    };
    let classifier: Box<dyn BaseClassifier> = match (&a.classifier, &a.external) {
        (Some(spec), _) => parse_classifier(spec)?,
        (None, Some(cmd)) => Box::new(ExternalClassifier::spawn(cmd, a.classes)?),
        (None, None) => unreachable!("clap requires a classifier"),
    };
    let cfg = SamplerConfig { noise: plan, seed: a.seed, num_selection: a.selection, num_estimation: a.estimation };
    let mut file = VotesFile { num_classes: classifier.num_classes(), selection: a.selection, estimation: a.estimation, records: Vec::new() };
    for (id, x) in &inputs {
        file.records.push(collect_votes(id, x, classifier.as_ref(), &cfg)?);
    }
    emit(a.out.as_ref(), &votes::render(&file), out)?;
    writeln!(log, "sampled {} inputs ({} + {} draws each)", inputs.len(), a.selection, a.estimation)?;
    Ok(())
}
