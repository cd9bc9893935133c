use celldiv::basis::{laguerre_fn, laguerre_poly_explicit, BasisFamily, LaguerreBasis};
use celldiv::io::{fmt_num, read_sample, write_sample};
use celldiv::kernels::{KernelSpec, KernelVariant};
use celldiv::pde::{DensityGrid1D, Grid1D};
use celldiv::sampling::{kde_1d, rejection_sample_1d, Sample, SampleData};
use celldiv::stationary::ExplicitNull;
use proptest::prelude::*;

fn naive_u(xs: &[f64], d: usize) -> f64 {
    let b = LaguerreBasis::new(d).unwrap();
    let phis: Vec<Vec<f64>> = xs.iter().map(|&x| b.eval_all(x).unwrap()).collect();
    let n = xs.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            s += phis[i]
                .iter()
                .zip(&phis[j])
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
    }
    s / (n * (n - 1)) as f64
}

fn kernel() -> impl Strategy<Value = KernelVariant> {
    prop_oneof![
        Just(KernelVariant::Beta22),
        Just(KernelVariant::Uniform),
        Just(KernelVariant::TRUNC_NORMAL_DEFAULT),
        Just(KernelVariant::GaussMixture),
    ]
}

proptest! {
    #[test]
    fn numbers_round_trip_through_text(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
        prop_assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn kernels_are_symmetric(k in kernel(), theta in 0.0f64..1.0) {
        let spec = KernelSpec::new(k);
        let (a, b) = (spec.density(theta).unwrap(), spec.density(1.0 - theta).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn laguerre_recurrence_matches_explicit_form(j in 0usize..12, x in 0.0f64..5.0) {
        let expect = std::f64::consts::SQRT_2 * laguerre_poly_explicit(j, 2.0 * x) * (-x).exp();
        prop_assert!((laguerre_fn(j, x).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn fast_u_statistic_equals_pairwise_sum(xs in prop::collection::vec(0.0f64..10.0, 2..30), d in 1usize..20) {
        let fast = BasisFamily::Laguerre { dims: vec![d] }.u_stats(&SampleData::One(xs.clone())).unwrap()[0];
        let naive = naive_u(&xs, d);
        prop_assert!((fast - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }

    #[test]
    fn samples_are_reproducible_and_in_range(seed in any::<u64>(), n in 1usize..200) {
        let d = ExplicitNull::new(1.0).unwrap().tabulate(10.0, 500);
        let a = rejection_sample_1d(&d, n, seed, "p").unwrap();
        let b = rejection_sample_1d(&d, n, seed, "p").unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.points.iter().all(|&x| (0.0..=d.x_last()).contains(&x)));
        let mut buf = Vec::new();
        write_sample(&mut buf, &Sample::One(a.clone())).unwrap();
        prop_assert_eq!(read_sample(buf.as_slice()).unwrap(), Sample::One(a));
    }

    #[test]
    fn kde_has_unit_mass(xs in prop::collection::vec(0.5f64..4.0, 2..100)) {
        prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-3));
        let d: DensityGrid1D = kde_1d(&xs, None, Grid1D::new(6.0, 300).unwrap()).unwrap();
        prop_assert!((d.mass() - 1.0).abs() < 1e-9);
        prop_assert!(d.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn explicit_profile_is_positive(x in 1e-3f64..20.0, r in 0.2f64..5.0) {
        prop_assert!(ExplicitNull::new(r).unwrap().eval(x).unwrap() > 0.0);
    }
}
