use num::{BigRational, One, Zero};
use proptest::prelude::*;
use sparsecert::certify::{margin, rho};
use sparsecert::exactmath::{clopper_pearson_lower, clopper_pearson_upper, pb_pmf, PBParams};
use sparsecert::oracle::{enumerate_regions, enumerate_regions_grouped, lp_exact, lp_exact_margin};
use sparsecert::rational::ratio;
use sparsecert::regions::{joint_regions, regions_for_noise, LikelihoodRatio};
use sparsecert::types::{radii_between, sphere_representatives};
use sparsecert::{DiscreteVector, NoiseSpec, RadiiSpec};

fn prob() -> impl Strategy<Value = BigRational> {
    (1i64..20).prop_map(|n| ratio(n, 20))
}

fn prob_closed() -> impl Strategy<Value = BigRational> {
    (0i64..=20).prop_map(|n| ratio(n, 20))
}

fn binary_noise() -> impl Strategy<Value = NoiseSpec> {
    (prob(), prob()).prop_map(|(a, b)| NoiseSpec::new(a, b, 2).unwrap())
}

/// Direct convolution of Bernoulli trials.
fn convolve(p_a: &BigRational, n_a: u32, p_b: &BigRational, n_b: u32) -> Vec<BigRational> {
    let mut pmf = vec![BigRational::one()];
    for p in std::iter::repeat_n(p_a, n_a as usize).chain(std::iter::repeat_n(p_b, n_b as usize)) {
        let mut next = vec![BigRational::zero(); pmf.len() + 1];
        for (k, m) in pmf.iter().enumerate() {
            next[k] += m * (BigRational::one() - p);
            next[k + 1] += m * p;
        }
        pmf = next;
    }
    pmf
}

/// Representatives padded with shared coordinates, which must not matter.
fn padded(r: RadiiSpec, k: u32, shared: &[u32]) -> (DiscreteVector, DiscreteVector) {
    let (x, xt) = sphere_representatives(r, k).unwrap();
    let pad = DiscreteVector::new(shared.to_vec(), k).unwrap();
    (x.concat(&pad).unwrap(), xt.concat(&pad).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pb_matches_convolution(p_a in prob_closed(), n_a in 0u32..7, p_b in prob_closed(), n_b in 0u32..7) {
        let got = pb_pmf(&PBParams::new(p_a.clone(), n_a, p_b.clone(), n_b).unwrap());
        let want = convolve(&p_a, n_a, &p_b, n_b);
        prop_assert_eq!(got.iter().sum::<BigRational>(), BigRational::one());
        prop_assert_eq!(got, want);
    }

    #[test]
    fn cp_bounds_bracket_the_estimate(n in 1u64..500, frac in 0u64..=100, a in 1i64..20) {
        let k = n * frac / 100;
        let alpha = ratio(a, 100);
        let lo = clopper_pearson_lower(k, n, &alpha);
        let hi = clopper_pearson_upper(k, n, &alpha);
        let p = ratio(k as i64, n as i64);
        prop_assert!(lo <= p && p <= hi);
        prop_assert!(lo >= BigRational::zero() && hi <= BigRational::one());
        if k < n {
            prop_assert!(clopper_pearson_lower(k + 1, n, &alpha) >= lo);
        }
        // a looser level gives a tighter bound
        prop_assert!(clopper_pearson_lower(k, n, &(alpha.clone() / BigRational::from_integer(2.into()))) <= lo);
    }

    #[test]
    fn tables_are_valid_and_sorted(noise in binary_noise(), ra in 0u32..12, rd in 0u32..12) {
        let t = regions_for_noise(&noise, RadiiSpec::binary(ra, rd)).unwrap();
        prop_assert!(t.validate().is_ok());
        prop_assert_eq!(t.total_x(), BigRational::one());
        prop_assert_eq!(t.total_xt(), BigRational::one());
        for w in t.entries().windows(2) {
            prop_assert!(w[0].ratio > w[1].ratio);
        }
    }

    #[test]
    fn corner_noise_tables_are_valid(pp in prob_closed(), pm in prob_closed(), ra in 0u32..6, rd in 0u32..6) {
        let noise = NoiseSpec::new(pp, pm, 2).unwrap();
        let r = RadiiSpec::binary(ra, rd);
        let t = regions_for_noise(&noise, r).unwrap();
        prop_assert!(t.validate().is_ok());
        let (x, xt) = sphere_representatives(r, 2).unwrap();
        prop_assert_eq!(t, enumerate_regions(&x, &xt, &noise).unwrap());
    }

    #[test]
    fn binary_tables_match_the_oracle(noise in binary_noise(), ra in 0u32..4, rd in 0u32..4, shared in prop::collection::vec(0u32..2, 0..3)) {
        let r = RadiiSpec::binary(ra, rd);
        let (x, xt) = padded(r, 2, &shared);
        prop_assert_eq!(radii_between(&x, &xt).unwrap(), r);
        prop_assert_eq!(regions_for_noise(&noise, r).unwrap(), enumerate_regions(&x, &xt, &noise).unwrap());
    }

    #[test]
    fn categorical_tables_match_the_oracle(pp in prob(), pm in prob(), ra in 0u32..3, rd in 0u32..3, rc in 0u32..2, shared in prop::collection::vec(0u32..3, 0..2)) {
        prop_assume!(ra + rd + rc <= 4);
        let noise = NoiseSpec::new(pp, pm, 3).unwrap();
        let r = RadiiSpec { r_add: ra, r_del: rd, r_change: rc };
        let (x, xt) = padded(r, 3, &shared);
        let t = regions_for_noise(&noise, r).unwrap();
        prop_assert!(t.len() <= ((ra + rd + rc + 1) * (ra + rd + rc + 1)) as usize);
        prop_assert_eq!(t, enumerate_regions(&x, &xt, &noise).unwrap());
    }

    #[test]
    fn solvers_match_the_exact_lp(noise in binary_noise(), ra in 0u32..3, rd in 0u32..3, p in prob_closed(), share in 0i64..=10) {
        let r = RadiiSpec::binary(ra, rd);
        let (x, xt) = sphere_representatives(r, 2).unwrap();
        let t = regions_for_noise(&noise, r).unwrap();
        prop_assert_eq!(rho(&t, &p).unwrap(), lp_exact(&x, &xt, &noise, &p).unwrap());
        let runner = (BigRational::one() - &p) * ratio(share, 10);
        prop_assert_eq!(margin(&t, &p, &runner).unwrap(), lp_exact_margin(&x, &xt, &noise, &p, &runner).unwrap());
    }

    #[test]
    fn rho_is_monotone(noise in binary_noise(), ra in 0u32..8, rd in 0u32..8, p in prob_closed(), q in prob_closed()) {
        let t = regions_for_noise(&noise, RadiiSpec::binary(ra, rd)).unwrap();
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let (a, b) = (rho(&t, &lo).unwrap(), rho(&t, &hi).unwrap());
        prop_assert!(BigRational::zero() <= a && a <= b && b <= BigRational::one());
        // a larger perturbation never helps
        let wider = regions_for_noise(&noise, RadiiSpec::binary(ra + 1, rd)).unwrap();
        prop_assert!(rho(&wider, &hi).unwrap() <= b);
        let wider = regions_for_noise(&noise, RadiiSpec::binary(ra, rd + 1)).unwrap();
        prop_assert!(rho(&wider, &hi).unwrap() <= b);
    }

    #[test]
    fn margin_with_complement_runner_is_two_rho_minus_one(noise in binary_noise(), ra in 0u32..6, rd in 0u32..6, p in prob_closed()) {
        let t = regions_for_noise(&noise, RadiiSpec::binary(ra, rd)).unwrap();
        let two = BigRational::from_integer(2.into());
        let runner = BigRational::one() - &p;
        prop_assert_eq!(margin(&t, &p, &runner).unwrap(), two * rho(&t, &p).unwrap() - BigRational::one());
        // the constant classifier h = p is feasible
        prop_assert!(rho(&t, &p).unwrap() <= p);
    }

    #[test]
    fn joint_tables_match_the_oracle(na in binary_noise(), nf in binary_noise(), ra in 0u32..2, rd in 0u32..2, fa in 0u32..2, fd in 0u32..2) {
        let (ra_, rf) = (RadiiSpec::binary(ra, rd), RadiiSpec::binary(fa, fd));
        let (xa, xta) = sphere_representatives(ra_, 2).unwrap();
        let (xf, xtf) = sphere_representatives(rf, 2).unwrap();
        let x = xa.concat(&xf).unwrap();
        let xt = xta.concat(&xtf).unwrap();
        let noises: Vec<&NoiseSpec> = std::iter::repeat_n(&na, xa.dims()).chain(std::iter::repeat_n(&nf, xf.dims())).collect();
        let want = enumerate_regions_grouped(&x, &xt, &noises).unwrap();
        let got = joint_regions(&regions_for_noise(&na, ra_).unwrap(), &regions_for_noise(&nf, rf).unwrap());
        prop_assert_eq!(got, want);
    }
}

#[test]
fn infinite_ratio_sorts_first() {
    assert!(LikelihoodRatio::Infinite > LikelihoodRatio::Finite(ratio(1_000_000, 1)));
}
