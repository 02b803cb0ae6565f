//! Oracle sweeps and worked examples, one PASS/FAIL line each.

use std::io::Write;

use num::{BigRational, One};
use sparsecert::certify::{margin, rho};
use sparsecert::exactmath::clopper_pearson_lower;
use sparsecert::oracle::{enumerate_regions, lp_exact, lp_exact_margin};
use sparsecert::rational::{half, parse_decimal, ratio, to_f64};
use sparsecert::regions::{binary_regions, discrete_regions};
use sparsecert::types::sphere_representatives;
use sparsecert::{NoiseSpec, RadiiSpec};

use crate::{CliError, SelftestArgs};

type Check = Result<(), String>;
type Named = (&'static str, Box<dyn Fn() -> Check>);

fn tenths(step: usize) -> Vec<String> {
    (1..=9).step_by(step).map(|i| format!("0.{i}")).collect()
}

fn binary_tables(max_r: u32, step: usize) -> Check {
    for pp in tenths(step) {
        for pm in tenths(step) {
            let noise = NoiseSpec::binary(&pp, &pm).map_err(|e| e.to_string())?;
            for ra in 0..=max_r {
                for rd in 0..=max_r - ra {
                    let r = RadiiSpec::binary(ra, rd);
                    let (x, xt) = sphere_representatives(r, 2).map_err(|e| e.to_string())?;
                    let want = enumerate_regions(&x, &xt, &noise).map_err(|e| e.to_string())?;
                    if binary_regions(&noise, r).map_err(|e| e.to_string())? != want {
                        return Err(format!("p=({pp},{pm}) r=({ra},{rd})"));
                    }
                }
            }
        }
    }
    Ok(())
}

fn discrete_tables(max_r: u32) -> Check {
    for (pp, pm) in [("0.1", "0.3"), ("0.4", "0.4"), ("0.7", "0.2")] {
        let noise = NoiseSpec::parse(pp, pm, 3).map_err(|e| e.to_string())?;
        for total in 0..=max_r {
            for ra in 0..=total {
                for rd in 0..=total - ra {
                    let r = RadiiSpec { r_add: ra, r_del: rd, r_change: total - ra - rd };
                    let (x, xt) = sphere_representatives(r, 3).map_err(|e| e.to_string())?;
                    let want = enumerate_regions(&x, &xt, &noise).map_err(|e| e.to_string())?;
                    if discrete_regions(&noise, r).map_err(|e| e.to_string())? != want {
                        return Err(format!("p=({pp},{pm}) r={r:?}"));
                    }
                }
            }
        }
    }
    Ok(())
}

fn solvers(step: usize) -> Check {
    let noise = NoiseSpec::binary("0.2", "0.4").map_err(|e| e.to_string())?;
    for ra in 0..=2 {
        for rd in 0..=2 {
            let r = RadiiSpec::binary(ra, rd);
            let table = binary_regions(&noise, r).map_err(|e| e.to_string())?;
            let (x, xt) = sphere_representatives(r, 2).map_err(|e| e.to_string())?;
            for p in tenths(step) {
                let p = parse_decimal(&p).map_err(|e| e.to_string())?;
                let runner = (BigRational::one() - &p) / BigRational::from_integer(2.into());
                let got = rho(&table, &p).map_err(|e| e.to_string())?;
                if got != lp_exact(&x, &xt, &noise, &p).map_err(|e| e.to_string())? {
                    return Err(format!("rho at r=({ra},{rd}) p={p}"));
                }
                let m = margin(&table, &p, &runner).map_err(|e| e.to_string())?;
                if m != lp_exact_margin(&x, &xt, &noise, &p, &runner).map_err(|e| e.to_string())? {
                    return Err(format!("margin at r=({ra},{rd}) p={p}"));
                }
            }
        }
    }
    Ok(())
}

fn golden() -> Check {
    let noise = NoiseSpec::binary("0.2", "0.4").map_err(|e| e.to_string())?;
    let table = binary_regions(&noise, RadiiSpec::binary(1, 1)).map_err(|e| e.to_string())?;
    let v = rho(&table, &ratio(9, 10)).map_err(|e| e.to_string())?;
    if v != half() {
        return Err(format!("rho = {v}"));
    }
    Ok(())
}

fn closed_form() -> Check {
    let alpha = ratio(1, 100);
    for n in [1u64, 10, 1000, 100_000] {
        let got = to_f64(&clopper_pearson_lower(n, n, &alpha));
        let want = 0.01f64.powf(1.0 / n as f64);
        if (got - want).abs() > 1e-10 {
            return Err(format!("n={n}: {got} vs {want}"));
        }
    }
    Ok(())
}

pub fn run(a: &SelftestArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let (max_r, step, max_k3) = if a.full { (6, 1, 3) } else { (4, 2, 2) };
    let checks: Vec<Named> = vec![
        ("binary regions match enumeration", Box::new(move || binary_tables(max_r, step))),
        ("K=3 regions match enumeration", Box::new(move || discrete_tables(max_k3))),
        ("rho and margin match the exact LP", Box::new(move || solvers(step))),
        ("worked example rho = 1/2", Box::new(golden)),
        ("Clopper-Pearson closed form", Box::new(closed_form)),
    ];
    let mut failed = false;
    for (name, check) in checks {
        match check() {
            Ok(()) => writeln!(out, "PASS {name}")?,
            Err(e) => {
                failed = true;
                writeln!(out, "FAIL {name}: {e}")?;
            }
        }
    }
    if failed {
        return Err(CliError::SelfTest);
    }
    Ok(())
}
