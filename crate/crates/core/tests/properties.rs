use kslab::inequality::*;
use kslab::io::{density_csv, parse_density, Table};
use kslab::metrics::{fourier_d1, wasserstein2};
use kslab::{fourier_transform, normalize, AnyDensity, Density1D, RadialDensity2D};
use proptest::prelude::*;

fn mixture_density(comps: &[(f64, f64, f64)]) -> Density1D {
    let d = Density1D::from_fn(8.0, 256, |x| {
        comps
            .iter()
            .map(|&(w, m, v)| w * (-(x - m).powi(2) / (2.0 * v)).exp() / v.sqrt())
            .sum()
    })
    .unwrap();
    normalize(&d).unwrap()
}

fn component() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.1f64..1.0, -2.0f64..2.0, 0.2f64..1.5)
}

fn mixture() -> impl Strategy<Value = Density1D> {
    prop::collection::vec(component(), 1..4).prop_map(|c| mixture_density(&c))
}

fn positive() -> impl Strategy<Value = f64> {
    (-3.0 * std::f64::consts::LN_10..3.0 * std::f64::consts::LN_10).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wasserstein_is_a_metric(a in mixture(), b in mixture(), c in mixture()) {
        let (a, b, c): (AnyDensity, AnyDensity, AnyDensity) = (a.into(), b.into(), c.into());
        let ab = wasserstein2(&a, &b).unwrap();
        prop_assert_eq!(ab, wasserstein2(&b, &a).unwrap());
        prop_assert_eq!(wasserstein2(&a, &a).unwrap(), 0.0);
        let (ac, cb) = (wasserstein2(&a, &c).unwrap(), wasserstein2(&c, &b).unwrap());
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn fourier_distance_is_a_metric(a in mixture(), b in mixture(), c in mixture()) {
        let t = |d: &Density1D| fourier_transform(d, 8.0, 128).unwrap();
        let (a, b, c) = (t(&a), t(&b), t(&c));
        let ab = fourier_d1(&a, &b).unwrap().value;
        prop_assert_eq!(ab, fourier_d1(&b, &a).unwrap().value);
        let (ac, cb) = (fourier_d1(&a, &c).unwrap().value, fourier_d1(&c, &b).unwrap().value);
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn normalized_mixtures_are_centred(d in mixture()) {
        prop_assert!((d.mass() - 1.0).abs() < 1e-12);
        prop_assert!(d.mean().abs() < 1e-10);
    }

    #[test]
    fn csv_round_trip_is_exact(d in mixture()) {
        let any: AnyDensity = d.clone().into();
        let back = parse_density(&Table::parse(&density_csv(&any), "mem").unwrap(), "mem").unwrap();
        let AnyDensity::Line(back) = back else { panic!("dimension changed") };
        prop_assert_eq!(back.values(), d.values());
    }

    #[test]
    fn pointwise_margins_are_nonnegative(u in positive(), v in positive(), a in positive(), b in positive(), g in 1e-3f64..10.0) {
        prop_assert!(check_pointwise(u, v, a, b, g).unwrap() >= -1e-12);
        prop_assert!(check_quadratic_jensen(u, v, a, b).unwrap() >= -1e-12);
        prop_assert!(check_pointwise_continuous(&[u, v, a, b], 1.0, 1.0, g).unwrap() >= -1e-12);
    }

    #[test]
    fn equality_case_is_exact(a in positive(), b in positive(), g in 1e-3f64..10.0) {
        for lemma in PointwiseLemma::ALL {
            prop_assert_eq!(lemma.equality_margin(a, b, g).unwrap(), 0.0);
        }
    }

    #[test]
    fn strict_away_from_the_equality_case(u in positive(), a in positive(), b in positive(), g in 0.1f64..5.0) {
        prop_assume!((u - 1.0).abs() > 1e-2);
        prop_assert!(check_pointwise(u, u, a, b, g).unwrap() > 0.0);
        prop_assert!(check_quadratic_jensen(u, 1.0, a, b).unwrap() > 0.0);
    }

    #[test]
    fn transport_jensen_margins_are_nonnegative(
        coeffs in prop::collection::vec(-1.0f64..1.0, 3),
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let psi2 = Curvature::from_fn(0.0, 1.0, 129, |x| {
            coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * 3.0 * x).sin()).sum::<f64>().exp()
        }).unwrap();
        for k in [ConcaveK::Log, ConcaveK::NegInverse] {
            prop_assert!(transport_jensen_margin(&psi2, k, a, b) >= -1e-10);
        }
    }

    #[test]
    fn newton_error_is_scale_invariant(r in 0.1f64..5.0, s in 0.1f64..5.0, lambda in 0.1f64..10.0) {
        let e1 = check_newton(r, s).unwrap();
        let e2 = check_newton(lambda * r, lambda * s).unwrap();
        prop_assert!((e1 - e2).abs() < 1e-10);
    }
}

#[test]
fn newton_error_decreases_under_refinement() {
    for (r, s) in [(1.0, 1.0), (2.0, 1.0), (0.3, 0.31)] {
        let errors: Vec<f64> = [1.0, 1e-1, 1e-2, 1e-4, 1e-8, 1e-12]
            .iter()
            .map(|&tol| newton_error(r, s, tol).unwrap())
            .collect();
        // monotone down to the rounding floor
        assert!(errors.windows(2).all(|w| w[1] <= w[0].max(1e-14)), "{errors:?}");
        assert!(errors[5] < 1e-12);
    }
}

#[test]
fn obstruction_second_differences_are_strictly_negative() {
    let d2 = obstruction_second_differences(&obstruction_grid(10_000)).unwrap();
    assert!(d2.iter().all(|&(_, d)| d < 0.0));
}

#[test]
fn loghls_margins_are_dilation_invariant_in_one_dimension() {
    let corpus = corpus(
        kslab::profiles::Grid::Line {
            half_width: 60.0,
            cells: 8192,
        },
        12,
        4,
        &|x| 1.0 / (std::f64::consts::PI * (1.0 + x * x)),
    )
    .unwrap();
    let base = loghls_margins(&corpus).unwrap();
    for lambda in [0.5, 2.0, 3.0] {
        // rho_lambda(x) = lambda rho(lambda x): same values scaled, grid shrunk
        let dilated: Vec<AnyDensity> = corpus
            .iter()
            .map(|d| {
                let AnyDensity::Line(d) = d else { unreachable!() };
                let v = d.values().iter().map(|v| lambda * v).collect();
                Density1D::from_values(d.half_width() / lambda, v).unwrap().into()
            })
            .collect();
        let m = loghls_margins(&dilated).unwrap();
        for (a, b) in base.iter().zip(&m) {
            assert!((a - b).abs() <= 1e-6, "lambda {lambda}: {a} vs {b}");
        }
    }
}

#[test]
fn loghls_margins_are_dilation_invariant_in_the_plane() {
    let corpus = corpus(
        kslab::profiles::Grid::Radial {
            radius: 30.0,
            cells: 4096,
        },
        9,
        4,
        &|r| 1.0 / (std::f64::consts::PI * (1.0 + r * r).powi(2)),
    )
    .unwrap();
    let base = loghls_margins(&corpus).unwrap();
    for lambda in [0.5, 2.0] {
        let dilated: Vec<AnyDensity> = corpus
            .iter()
            .map(|d| {
                let AnyDensity::Radial(d) = d else { unreachable!() };
                let v = d.values().iter().map(|v| lambda * lambda * v).collect();
                RadialDensity2D::from_values(d.radius() / lambda, v).unwrap().into()
            })
            .collect();
        let m = loghls_margins(&dilated).unwrap();
        for (a, b) in base.iter().zip(&m) {
            assert!((a - b).abs() <= 1e-6, "lambda {lambda}: {a} vs {b}");
        }
    }
}

#[test]
fn loghls_extremal_has_zero_margin() {
    let v = check_loghls_dilations(1, &[1.0]).unwrap();
    assert!(v.holds, "{v:?}");
}

#[test]
fn confined_inequality_at_zero_coupling_has_the_gaussian_extremal() {
    let nu = confined_profile(1, 0.0).unwrap();
    let AnyDensity::Line(d) = &nu else { unreachable!() };
    let gauss = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let err = d
        .centers()
        .zip(d.values())
        .map(|(x, v)| (v - gauss(x)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
    let v = check_loghls_confined(&confined_corpus(&nu, 9).unwrap(), 0.0, &nu).unwrap();
    assert!(v.holds, "{v:?}");
}
