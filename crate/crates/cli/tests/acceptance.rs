//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use num::{BigRational, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use sparsecert::certify::{certify_l0, certify_point, margin, max_certified_deletions, rho};
use sparsecert::confidence::{binary_bounds, multiclass_bounds, two_stage_estimate};
use sparsecert::exactmath::clopper_pearson_lower;
use sparsecert::oracle::{enumerate_regions, exhaustive_ball_check, smoothed_probabilities, ExactLp};
use sparsecert::rational::{half, parse_decimal, ratio, to_f64};
use sparsecert::regions::{binary_regions, discrete_regions, regions_for_noise};
use sparsecert::smoothing::{collect_votes, Blocks, SamplerConfig, Table};
use sparsecert::types::{radii_between, sphere_representatives};
use sparsecert::{BoundMode, ClassBounds, DiscreteVector, NoiseSpec, Perturbation, RadiiSpec, Smoothing, VoteRecord};

// Pinned limits.
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const L0_BUDGET: Duration = Duration::from_millis(100);
const CP_TOLERANCE: f64 = 1e-10;
const SOUNDNESS_INSTANCES: usize = 1000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tenths() -> Vec<String> {
    (1..=9).map(|i| format!("0.{i}")).collect()
}

fn noise(pp: &str, pm: &str, k: u32) -> NoiseSpec {
    NoiseSpec::parse(pp, pm, k).unwrap()
}

fn pad(x: &DiscreteVector, values: &[u32]) -> DiscreteVector {
    x.concat(&DiscreteVector::new(values.to_vec(), x.num_categories()).unwrap()).unwrap()
}

fn oracle_regions() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for pp in tenths() {
        for pm in tenths() {
            let n = noise(&pp, &pm, 2);
            for ra in 0..=6 {
                for rd in 0..=6 - ra {
                    let r = RadiiSpec::binary(ra, rd);
                    let (x, xt) = sphere_representatives(r, 2).unwrap();
                    let want = enumerate_regions(&x, &xt, &n).unwrap();
                    ensure(binary_regions(&n, r).unwrap() == want, || format!("binary p=({pp},{pm}) r=({ra},{rd})"))?;
                    checked += 1;
                }
            }
        }
    }
    let grid = ["0.1", "0.3", "0.5", "0.7", "0.9"];
    for pp in grid {
        for pm in grid {
            let n = noise(pp, pm, 3);
            for total in 1..=3u32 {
                for ra in 0..=total {
                    for rd in 0..=total - ra {
                        let r = RadiiSpec { r_add: ra, r_del: rd, r_change: total - ra - rd };
                        let (x, xt) = sphere_representatives(r, 3).unwrap();
                        let got = discrete_regions(&n, r).unwrap();
                        // shared coordinates up to d = 5 leave the table unchanged
                        let spare = 5 - total as usize;
                        for fill in [vec![], vec![0; spare], vec![2; spare], (0..spare as u32).map(|i| i % 3).collect()] {
                            let want = enumerate_regions(&pad(&x, &fill), &pad(&xt, &fill), &n).unwrap();
                            ensure(got == want, || format!("K=3 p=({pp},{pm}) r={r:?} pad={fill:?}"))?;
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    ensure(t < ORACLE_BUDGET, || format!("took {t:?}"))?;
    Ok(format!("{checked} tables equal, {:.2?}", t))
}

/// Every binary pair with `d <= 6` up to a permutation of coordinates:
/// additions, deletions, shared ones and shared zeros.
fn binary_instances() -> Vec<(DiscreteVector, DiscreteVector, RadiiSpec)> {
    let mut out = Vec::new();
    for d in 1..=6usize {
        for ra in 0..=d {
            for rd in 0..=d - ra {
                for ones in 0..=d - ra - rd {
                    let mut x = vec![0u8; ra];
                    let mut xt = vec![1u8; ra];
                    x.extend(std::iter::repeat_n(1, rd));
                    xt.extend(std::iter::repeat_n(0, rd));
                    x.extend(std::iter::repeat_n(1, ones));
                    xt.extend(std::iter::repeat_n(1, ones));
                    x.resize(d, 0);
                    xt.resize(d, 0);
                    out.push((DiscreteVector::binary(&x), DiscreteVector::binary(&xt), RadiiSpec::binary(ra as u32, rd as u32)));
                }
            }
        }
    }
    out
}

fn lp_equivalence() -> Outcome {
    let start = Instant::now();
    let grid = ["0.1", "0.3", "0.5", "0.7", "0.9"];
    let instances = binary_instances();
    let cases: Vec<(NoiseSpec, &(DiscreteVector, DiscreteVector, RadiiSpec))> =
        grid.iter().flat_map(|pp| grid.iter().map(move |pm| noise(pp, pm, 2))).flat_map(|n| instances.iter().map(move |i| (n.clone(), i))).collect();
    let checked: Vec<usize> = cases
        .par_iter()
        .map(|(n, (x, xt, r))| {
            ensure(radii_between(x, xt).unwrap() == *r, || "instance builder".into())?;
            let table = regions_for_noise(n, *r).unwrap();
            let lp = ExactLp::new(x, xt, n).unwrap();
            for p in tenths() {
                let p = parse_decimal(&p).unwrap();
                ensure(rho(&table, &p).unwrap() == lp.rho(&p).unwrap(), || format!("rho {n} {x:?}->{xt:?} p={p}"))?;
                let runner = (BigRational::one() - &p) * ratio(2, 3);
                let m = margin(&table, &p, &runner).unwrap();
                ensure(m == lp.margin(&p, &runner).unwrap(), || format!("margin {n} {x:?}->{xt:?} p={p}"))?;
            }
            Ok(2 * 9)
        })
        .collect::<Result<_, String>>()?;
    let t = start.elapsed();
    ensure(t < ORACLE_BUDGET, || format!("took {t:?}"))?;
    Ok(format!("{} optima equal over {} instances, {:.2?}", checked.iter().sum::<usize>(), cases.len(), t))
}

fn golden_value() -> Outcome {
    let n = noise("0.2", "0.4", 2);
    let table = binary_regions(&n, RadiiSpec::binary(1, 1)).unwrap();
    let v = rho(&table, &ratio(9, 10)).unwrap();
    ensure(v == half(), || format!("rho = {v}"))?;
    let bounds = ClassBounds::binary(0, ratio(9, 10), ratio(1, 100)).unwrap();
    let res = certify_point(&Smoothing::Single(n), &Perturbation::Single(RadiiSpec::binary(1, 1)), &bounds).unwrap();
    ensure(!res.certified && res.rho_or_margin == half(), || format!("{res:?}"))?;
    Ok("rho = 1/2, not certified".into())
}

fn region_counts() -> Outcome {
    let mut checked = 0;
    for pp in tenths() {
        for pm in tenths() {
            let n = noise(&pp, &pm, 2);
            let merged = n.p_plus() + n.p_minus() == BigRational::one();
            for ra in 0..=8 {
                for rd in 0..=8 {
                    let len = regions_for_noise(&n, RadiiSpec::binary(ra, rd)).unwrap().len();
                    // with p+ + p- = 1 every ratio is one
                    let want = if merged { 1 } else { (ra + rd + 1) as usize };
                    ensure(len == want, || format!("binary p=({pp},{pm}) r=({ra},{rd}): {len} regions"))?;
                    checked += 1;
                }
            }
        }
    }
    for p in tenths() {
        for (pp, pm) in [("0", p.as_str()), (p.as_str(), "0")] {
            let n = noise(pp, pm, 2);
            for ra in 1..=6 {
                for rd in 1..=6 {
                    let len = regions_for_noise(&n, RadiiSpec::binary(ra, rd)).unwrap().len();
                    ensure(len == 3, || format!("special p=({pp},{pm}) r=({ra},{rd}): {len} regions"))?;
                    checked += 1;
                }
            }
        }
    }
    for k in [3u32, 4, 8, 256] {
        for p in ["0.1", "0.3", "0.5", "0.8"] {
            let n = noise(p, p, k);
            for total in 1..=6u32 {
                for ra in 0..=total {
                    for rd in 0..=total - ra {
                        let r = RadiiSpec { r_add: ra, r_del: rd, r_change: total - ra - rd };
                        let len = discrete_regions(&n, r).unwrap().len();
                        ensure(len == (2 * total + 1) as usize, || format!("K={k} p={p} r={r:?}: {len} regions"))?;
                        checked += 1;
                    }
                }
            }
        }
        for (pp, pm) in [("0.1", "0.3"), ("0.05", "0.6"), ("0.7", "0.2")] {
            let n = noise(pp, pm, k);
            for total in 1..=5u32 {
                for ra in 0..=total {
                    for rd in 0..=total - ra {
                        let r = RadiiSpec { r_add: ra, r_del: rd, r_change: total - ra - rd };
                        let len = discrete_regions(&n, r).unwrap().len();
                        ensure(len <= ((total + 1) * (total + 1)) as usize, || format!("K={k} p=({pp},{pm}) r={r:?}: {len} regions"))?;
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{checked} tables with the expected size"))
}

fn performance() -> Outcome {
    let smoothing = Smoothing::Single(noise("0.8", "0.8", 256));
    let bounds = ClassBounds::binary(0, ratio(999, 1000), ratio(1, 100)).unwrap();
    let start = Instant::now();
    let l0 = certify_l0(&smoothing, &bounds, 7).unwrap();
    let t_l0 = start.elapsed();
    ensure(t_l0 < L0_BUDGET, || format!("l0 radius 7 took {t_l0:?}"))?;

    // the certificate only sees the radii, whatever the dimension
    let mut timings = Vec::new();
    let mut results = Vec::new();
    for d in [100usize, 1_000_000] {
        let mut x = vec![0u32; d];
        let mut xt = vec![0u32; d];
        xt[..3].fill(5);
        x[3..6].fill(7);
        x[6] = 1;
        xt[6] = 2;
        let (x, xt) = (DiscreteVector::new(x, 256).unwrap(), DiscreteVector::new(xt, 256).unwrap());
        let r = radii_between(&x, &xt).unwrap();
        let start = Instant::now();
        let res = certify_point(&smoothing, &Perturbation::Single(r), &bounds).unwrap();
        timings.push(start.elapsed());
        results.push(res);
    }
    ensure(results[0] == results[1], || "results differ between d = 1e2 and d = 1e6".into())?;
    ensure(timings.iter().all(|t| *t < L0_BUDGET), || format!("single certificate {timings:?}"))?;
    Ok(format!(
        "l0 r=7 in {t_l0:.2?} (worst split rho {:.4}); d=1e2 {:.2?} vs d=1e6 {:.2?}, identical results",
        to_f64(&l0.rho_or_margin),
        timings[0],
        timings[1]
    ))
}

/// Two classes, each concentrated in its own half of a sparse binary vector.
fn sparse_dataset(n: usize, d: usize, seed: u64) -> Vec<DiscreteVector> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y = rng.gen_range(0..2usize);
            let half = d / 2;
            let bits: Vec<u8> = (0..d)
                .map(|i| {
                    let density = if i / half == y { 0.2 } else { 0.01 };
                    u8::from(rng.gen_bool(density))
                })
                .collect();
            DiscreteVector::binary(&bits)
        })
        .collect()
}

fn sparsity_ordering() -> Outcome {
    let data = sparse_dataset(40, 100, 11);
    let classifier = Blocks { blocks: 2 };
    let alpha = ratio(1, 100);
    let mut means = Vec::new();
    for (pp, pm) in [("0.01", "0.6"), ("0.1", "0.1")] {
        let n = noise(pp, pm, 2);
        let cfg = SamplerConfig::new(n.clone(), 5, 1_000, 20_000);
        let smoothing = Smoothing::Single(n);
        let mut total = 0u32;
        for (i, x) in data.iter().enumerate() {
            let (sel, est) = collect_votes(&i.to_string(), x, &classifier, &cfg).unwrap();
            let b = two_stage_estimate(&sel, &est, &alpha, BoundMode::BinaryClass, 2).unwrap();
            // abstentions count as radius zero
            total += max_certified_deletions(&smoothing, &b, 100).unwrap().unwrap_or(0);
        }
        means.push(f64::from(total) / data.len() as f64);
    }
    ensure(means[0] > means[1], || format!("mean max r_d {:.2} vs {:.2}", means[0], means[1]))?;
    Ok(format!("mean max r_d {:.2} (0.01, 0.6) > {:.2} (0.1, 0.1)", means[0], means[1]))
}

fn soundness() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let (mut certified, mut tried, mut violations) = (0usize, 0usize, 0usize);
    let grid2: Vec<BigRational> = (0..=10).map(|i| ratio(i, 10)).collect();
    let grid3: Vec<BigRational> = (1..=9).map(|i| ratio(i, 10)).collect();
    while certified < SOUNDNESS_INSTANCES && tried < 200 * SOUNDNESS_INSTANCES {
        tried += 1;
        let k = if rng.gen_bool(0.6) { 2 } else { 3 };
        let d = rng.gen_range(2..=if k == 2 { 5 } else { 4 });
        let grid = if k == 2 { &grid2 } else { &grid3 };
        let n = NoiseSpec::new(grid[rng.gen_range(0..grid.len())].clone(), grid[rng.gen_range(0..grid.len())].clone(), k).unwrap();
        let classes = rng.gen_range(2..=3u32);
        // mostly-constant lookup tables certify often enough to be informative
        let base = rng.gen_range(0..classes);
        let noise_rate = rng.gen_range(0.0..0.4);
        let labels = (0..k.pow(d as u32)).map(|_| if rng.gen_bool(noise_rate) { rng.gen_range(0..classes) } else { base }).collect();
        let clf = Table { labels, num_classes: classes };
        let x = DiscreteVector::new((0..d).map(|_| rng.gen_range(0..k)).collect(), k).unwrap();
        let radii = if k == 2 {
            RadiiSpec::binary(rng.gen_range(0..=2), rng.gen_range(0..=2))
        } else {
            RadiiSpec { r_add: rng.gen_range(0..=1), r_del: rng.gen_range(0..=1), r_change: rng.gen_range(0..=1) }
        };
        let probs = smoothed_probabilities(&clf, &x, &n).unwrap();
        let top = (0..probs.len()).max_by(|&a, &b| probs[a].cmp(&probs[b]).then(b.cmp(&a))).unwrap();
        let runner = probs.iter().enumerate().filter(|(c, _)| *c != top).map(|(_, p)| p.clone()).max().unwrap_or_else(BigRational::zero);
        let bounds = if rng.gen_bool(0.5) {
            ClassBounds::binary(top as u32, probs[top].clone(), ratio(1, 100)).unwrap()
        } else {
            ClassBounds::multi(top as u32, probs[top].clone(), runner, ratio(1, 100)).unwrap()
        };
        let res = certify_point(&Smoothing::Single(n.clone()), &Perturbation::Single(radii), &bounds).unwrap();
        if !res.certified {
            continue;
        }
        certified += 1;
        if !exhaustive_ball_check(&clf, &x, &n, radii).unwrap() {
            violations += 1;
        }
    }
    ensure(certified >= SOUNDNESS_INSTANCES, || format!("only {certified} certified instances in {tried} draws"))?;
    ensure(violations == 0, || format!("{violations} violations in {certified} certified instances"))?;
    Ok(format!("{certified} certified instances ({tried} drawn), 0 violations"))
}

fn confidence_bounds() -> Outcome {
    for a in [ratio(1, 100), ratio(1, 20), ratio(1, 1000)] {
        for n in [1u64, 2, 10, 100, 1000, 10_000, 1_000_000] {
            let got = to_f64(&clopper_pearson_lower(n, n, &a));
            let want = to_f64(&a).powf(1.0 / n as f64);
            ensure((got - want).abs() <= CP_TOLERANCE, || format!("n={n} alpha={a}: {got} vs {want}"))?;
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let alpha = ratio(1, 100);
    let mut tested = 0;
    for _ in 0..300 {
        let classes = rng.gen_range(2..=6usize);
        let total = rng.gen_range(1..=5000u64);
        let mut counts = vec![0u64; classes];
        for _ in 0..total.min(200) {
            counts[rng.gen_range(0..classes)] += 1;
        }
        counts[0] += total.saturating_sub(200);
        let v = VoteRecord::new("v", counts);
        let bin = binary_bounds(&v, &alpha).unwrap();
        let multi = multiclass_bounds(&v, &alpha, classes as u32).unwrap();
        ensure(multi.p_lower <= bin.p_lower, || format!("{:?}", v.counts()))?;
        tested += 1;
    }
    Ok(format!("closed form within {CP_TOLERANCE:e}; Bonferroni <= binary on {tested} count vectors"))
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sparsecert")).args(args).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (run, jobs) in [(0, "1"), (1, "1"), (2, "8"), (3, "8")] {
        let votes = dir.path().join(format!("votes{run}.txt"));
        let votes = votes.to_str().unwrap();
        #[rustfmt::skip]
        let sample = ["--jobs", jobs, "sample", "--classifier", "blocks:3", "--synthetic", "12", "--dims", "60", "--density", "0.1",
            "-K", "3", "--p-plus", "0.02", "--p-minus", "0.5", "--seed", "42", "--selection", "500", "--estimation", "20000", "--out", votes];
        run_cli(&sample)?;
        let sampled = std::fs::read(votes).map_err(|e| e.to_string())?;
        let cert = run_cli(&["--jobs", jobs, "certify", "--votes", votes, "-K", "3", "--p-plus", "0.02", "--p-minus", "0.5", "--mode", "multi", "--ra", "1", "--rd", "2"])?;
        let grid = run_cli(&["--jobs", jobs, "certify", "--votes", votes, "-K", "3", "--p-plus", "0.02", "--p-minus", "0.5", "--grid-ra", "0..2", "--grid-rd", "0..4"])?;
        outputs.push((sampled, cert, grid));
    }
    ensure(outputs.windows(2).all(|w| w[0] == w[1]), || "outputs differ between runs".into())?;
    Ok("sample + certify byte-identical over 2 runs x jobs {1, 8}".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle region equivalence", oracle_regions),
        ("LP equivalence", lp_equivalence),
        ("worked golden value", golden_value),
        ("region counts", region_counts),
        ("performance", performance),
        ("sparsity ordering", sparsity_ordering),
        ("statistical soundness", soundness),
        ("confidence bounds", confidence_bounds),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
