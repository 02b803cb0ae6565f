use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use num::{BigRational, One, Zero};
use rayon::prelude::*;
use sparsecert::certify::{certify_bounds_batch, certify_l0, max_radius_frontier};
use sparsecert::confidence::two_stage_estimate;
use sparsecert::rational::{parse_decimal, ratio, to_decimal_string};
use sparsecert::{BoundMode, CertResult, ClassBounds, NoiseSpec, Perturbation, RadiiSpec, Smoothing};

use crate::votes::{self, VotesFile};
use crate::{emit, usage, CertifyArgs, CliError, ModeArg};

const DIGITS: usize = 12;

pub const RESULTS_HEADER: &str = "id,mode,p_lower,runner_upper,ra,rd,rc,rho_or_margin,certified,abstained";

fn dec(v: &BigRational) -> String {
    to_decimal_string(v, DIGITS)
}

/// Parses an inclusive range `A..B`.
pub fn parse_range(s: &str) -> Result<std::ops::RangeInclusive<u32>, CliError> {
    let err = || CliError::Usage(format!("bad range {s:?}, expected A..B"));
    let (a, b) = s.split_once("..").ok_or_else(err)?;
    let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| err())?, b.trim().parse().map_err(|_| err())?);
    if a > b {
        return Err(err());
    }
    Ok(a..=b)
}

/// Parses one `--joint` group `p+,p-,ra,rd`.
fn parse_joint(s: &str) -> Result<(NoiseSpec, RadiiSpec), CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [pp, pm, ra, rd] = parts[..] else {
        return Err(CliError::Usage(format!("--joint expects p+,p-,ra,rd, got {s:?}")));
    };
    let noise = usage(NoiseSpec::binary(pp, pm))?;
    let r = |v: &str| v.parse::<u32>().map_err(|_| CliError::Usage(format!("bad radius {v:?} in --joint")));
    Ok((noise, RadiiSpec::binary(r(ra)?, r(rd)?)))
}

fn setup(a: &CertifyArgs) -> Result<(Smoothing, Perturbation), CliError> {
    if let Some(j) = &a.joint {
        let (na, ra) = parse_joint(&j[0])?;
        let (nf, rf) = parse_joint(&j[1])?;
        return Ok((Smoothing::Joint { a: na, f: nf }, Perturbation::Joint { a: ra, f: rf }));
    }
    let (pp, pm) = (a.p_plus.as_deref().unwrap_or_default(), a.p_minus.as_deref().unwrap_or_default());
    let noise = usage(NoiseSpec::parse(pp, pm, a.k))?;
    let radii = usage(RadiiSpec::new(a.ra, a.rd, a.rc, a.k))?;
    Ok((Smoothing::Single(noise), Perturbation::Single(radii)))
}

/// Bounds for every record, each distinct vote profile computed once.
fn all_bounds(file: &VotesFile, alpha: &BigRational, mode: BoundMode) -> Result<Vec<(String, ClassBounds)>, CliError> {
    let key = |(s, e): &(sparsecert::VoteRecord, sparsecert::VoteRecord)| (s.top_class(), e.counts().to_vec());
    let mut distinct = Vec::new();
    let mut index = HashMap::new();
    let slots: Vec<usize> = file
        .records
        .iter()
        .map(|r| {
            *index.entry(key(r)).or_insert_with(|| {
                distinct.push(r);
                distinct.len() - 1
            })
        })
        .collect();
    let bounds: Vec<ClassBounds> = distinct
        .par_iter()
        .map(|(s, e)| two_stage_estimate(s, e, alpha, mode, file.num_classes))
        .collect::<sparsecert::Result<_>>()?;
    Ok(file.records.iter().zip(slots).map(|((s, _), i)| (s.input_id.clone(), bounds[i].clone())).collect())
}

/// Bounds that certify identically, each listed once, and every item's slot.
fn distinct_bounds(items: &[(String, ClassBounds)]) -> (Vec<&ClassBounds>, Vec<usize>) {
    let mut index: HashMap<(&BigRational, &BigRational, BoundMode), usize> = HashMap::new();
    let mut distinct = Vec::new();
    let slots = items
        .iter()
        .map(|(_, b)| {
            *index.entry((&b.p_lower, &b.p_upper_runner, b.mode)).or_insert_with(|| {
                distinct.push(b);
                distinct.len() - 1
            })
        })
        .collect();
    (distinct, slots)
}

fn radii_cells(p: &Perturbation) -> [String; 3] {
    match p {
        Perturbation::Single(r) => [r.r_add.to_string(), r.r_del.to_string(), r.r_change.to_string()],
        Perturbation::Joint { a, f } => [format!("{}+{}", a.r_add, f.r_add), format!("{}+{}", a.r_del, f.r_del), format!("{}+{}", a.r_change, f.r_change)],
    }
}

fn mode_cell(r: &CertResult) -> &'static str {
    if r.fallback {
        "binary-fallback"
    } else {
        r.mode.as_str()
    }
}

pub fn results_csv(rows: &[(ClassBounds, CertResult)]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for (b, r) in rows {
        let [ra, rd, rc] = radii_cells(&r.radii);
        let _ = writeln!(
            s,
            "{},{},{},{},{ra},{rd},{rc},{},{},{}",
            r.input_id,
            mode_cell(r),
            dec(&b.p_lower),
            dec(&b.p_upper_runner),
            dec(&r.rho_or_margin),
            r.certified,
            r.abstained
        );
    }
    s
}

fn share(k: usize, n: usize) -> String {
    if n == 0 {
        return "0".into();
    }
    dec(&ratio(k as i64, n as i64))
}

fn read_votes(a: &CertifyArgs) -> Result<VotesFile, CliError> {
    let text = std::fs::read_to_string(&a.votes).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.votes.display())))?;
    votes::parse(&text)
}

pub fn run(a: &CertifyArgs, out: &mut (dyn Write + Send), log: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let alpha = usage(parse_decimal(&a.alpha))?;
    if alpha <= BigRational::zero() || alpha >= BigRational::one() {
        return Err(CliError::Usage("--alpha must lie strictly between 0 and 1".into()));
    }
    let (smoothing, radii) = setup(a)?;
    let file = read_votes(a)?;
    let mode = match a.mode {
        ModeArg::Binary => BoundMode::BinaryClass,
        ModeArg::Multi => BoundMode::MultiClass,
    };
    let items = all_bounds(&file, &alpha, mode)?;
    let n = items.len();

    if a.frontier {
        return frontier(a, &smoothing, &items, out, log);
    }
    if let (Some(gra), Some(grd)) = (&a.grid_ra, &a.grid_rd) {
        return grid(a, &smoothing, &items, (parse_range(gra)?, parse_range(grd)?), out, log);
    }

    let results: Vec<CertResult> = match a.l0 {
        Some(r) => {
            let (distinct, slots) = distinct_bounds(&items);
            let done: Vec<CertResult> = distinct.par_iter().map(|b| certify_l0(&smoothing, b, r)).collect::<sparsecert::Result<_>>()?;
            items.iter().zip(slots).map(|((id, _), i)| CertResult { input_id: id.clone(), ..done[i].clone() }).collect()
        }
        None => certify_bounds_batch(&items, &smoothing, &radii)?.0,
    };
    let certified = results.iter().filter(|r| r.certified).count();
    let rows: Vec<(ClassBounds, CertResult)> = items.into_iter().map(|(_, b)| b).zip(results).collect();
    emit(a.out.as_ref(), &results_csv(&rows), out)?;
    let at = match a.l0 {
        Some(r) => format!("l0 radius {r}"),
        None => {
            let [ra, rd, rc] = radii_cells(&radii);
            format!("ra={ra} rd={rd} rc={rc}")
        }
    };
    writeln!(log, "certified {certified}/{n} ({}) at {at}", share(certified, n))?;
    Ok(())
}

fn frontier(a: &CertifyArgs, smoothing: &Smoothing, items: &[(String, ClassBounds)], out: &mut (dyn Write + Send), log: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let (distinct, slots) = distinct_bounds(items);
    let done: Vec<Vec<RadiiSpec>> = distinct
        .par_iter()
        .map(|b| max_radius_frontier(smoothing, b, a.cap, a.rc))
        .collect::<sparsecert::Result<_>>()?;
    let rows: Vec<&Vec<RadiiSpec>> = slots.iter().map(|&i| &done[i]).collect();
    let mut s = String::from("id,mode,p_lower,runner_upper,rc,rd,max_ra\n");
    for ((id, b), f) in items.iter().zip(&rows) {
        let head = format!("{id},{},{},{},{}", b.mode.as_str(), dec(&b.p_lower), dec(&b.p_upper_runner), a.rc);
        if f.is_empty() {
            let _ = writeln!(s, "{head},,");
        }
        for r in f.iter() {
            let _ = writeln!(s, "{head},{},{}", r.r_del, r.r_add);
        }
    }
    emit(a.out.as_ref(), &s, out)?;
    let ok = rows.iter().filter(|f| !f.is_empty()).count();
    writeln!(log, "certified {ok}/{} ({}) at radius zero", items.len(), share(ok, items.len()))?;
    Ok(())
}

type Range = std::ops::RangeInclusive<u32>;

fn grid(a: &CertifyArgs, smoothing: &Smoothing, items: &[(String, ClassBounds)], (gra, grd): (Range, Range), out: &mut (dyn Write + Send), log: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let mut cells = Vec::new();
    for ra in gra {
        for rd in grd.clone() {
            cells.push(usage(RadiiSpec::new(ra, rd, a.rc, a.k))?);
        }
    }
    let counts: Vec<usize> = cells
        .par_iter()
        .map(|&r| Ok(certify_bounds_batch(items, smoothing, &Perturbation::Single(r))?.0.iter().filter(|c| c.certified).count()))
        .collect::<sparsecert::Result<_>>()?;
    let mut s = String::from("ra,rd,certified_ratio\n");
    for (r, k) in cells.iter().zip(&counts) {
        let _ = writeln!(s, "{},{},{}", r.r_add, r.r_del, share(*k, items.len()));
    }
    emit(a.out.as_ref(), &s, out)?;
    writeln!(log, "grid of {} cells over {} inputs", cells.len(), items.len())?;
    Ok(())
}
