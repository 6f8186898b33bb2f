use std::f64::consts::PI;

use kslab::config::{SimConfig, Solver};
use kslab::initial::{initial_density, initial_spectrum};
use kslab::metrics::{log_interaction_radial, second_moment, wasserstein2};
use kslab::physical::run_physical;
use kslab::profiles::Frame;
use kslab::quadrature::{gauss_legendre, integrate};
use kslab::spectral::run_spectral;
use kslab::{AnyDensity, Density1D, RadialDensity2D};

/// Composite Gauss-Legendre rule on `[a, b]`.
fn composite(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let lo = a + p as f64 * h;
            x.iter()
                .zip(&w)
                .map(move |(x, w)| (lo + h * x, h * w))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// `int int log|x - y| rho rho` over the plane with the angular integral
/// done numerically: `2 pi int int rho(r) rho(s) A(r, s) r s dr ds` with
/// `A(r, s) = int_0^{2 pi} log|r - s e^{it}| dt`.
fn interaction_by_angles(rho: &dyn Fn(f64) -> f64, radius: f64) -> f64 {
    let angular = |r: f64, s: f64| {
        // (r - s)^2 + 4 r s sin^2(t/2) avoids the cancellation in r^2 + s^2 - 2 r s cos t
        let f = |t: f64| 0.5 * ((r - s).powi(2) + 4.0 * r * s * (0.5 * t).sin().powi(2)).ln();
        2.0 * integrate(f, 0.0, PI, 1e-9).0
    };
    composite(0.0, radius, 10, 12)
        .into_iter()
        .map(|(r, wr)| {
            let inner: f64 = composite(0.0, r, 4, 12)
                .into_iter()
                .chain(composite(r, radius, 8, 12))
                .map(|(s, ws)| ws * s * rho(s) * angular(r, s))
                .sum();
            wr * r * rho(r) * inner
        })
        .sum::<f64>()
        * 2.0
        * PI
}

#[test]
fn newton_reduction_matches_full_angular_quadrature() {
    type Case<'a> = (&'a str, f64, Box<dyn Fn(f64) -> f64>);
    let cases: Vec<Case> = vec![
        ("gaussian", 8.0, Box::new(|r: f64| (-r * r).exp() / PI)),
        (
            "wide gaussian",
            10.0,
            Box::new(|r: f64| (-r * r / 3.0).exp() / (3.0 * PI)),
        ),
        ("ring", 8.0, Box::new(|r: f64| r * r * (-r * r).exp() / PI)),
        ("algebraic", 30.0, Box::new(|r: f64| 2.0 / (PI * (1.0 + r * r).powi(3)))),
        (
            "mixture",
            10.0,
            Box::new(|r: f64| 0.3 * (-r * r / 0.5).exp() / (0.5 * PI) + 0.7 * (-r * r / 2.0).exp() / (2.0 * PI)),
        ),
    ];
    for (name, radius, rho) in cases {
        let full = interaction_by_angles(&*rho, radius);
        let grid = RadialDensity2D::from_fn(radius, 8192, &rho).unwrap();
        let newton = log_interaction_radial(&grid);
        assert!(
            (full - newton).abs() < 1e-4,
            "{name}: angular {full} vs Newton {newton}"
        );
    }
}

#[test]
fn free_and_rescaled_runs_agree_under_the_similarity_map() {
    // x = y sqrt(1 + 2t), tau = log(1 + 2t) / 2; at t = 1 the dilation is sqrt 3
    let base = SimConfig {
        chi: 0.5,
        half_width: 10.0,
        cells: 512,
        cadence: 0.05,
        ..SimConfig::default()
    };
    let free = SimConfig {
        t_final: 1.0,
        ..base.clone()
    };
    let resc = SimConfig {
        frame: Frame::Rescaled,
        half_width: 8.0,
        t_final: 0.5 * 3.0f64.ln(),
        ..base
    };
    let rf = run_physical(&free, initial_density(&free).unwrap()).unwrap();
    let rr = run_physical(&resc, initial_density(&resc).unwrap()).unwrap();
    let (AnyDensity::Line(df), AnyDensity::Line(dr)) = (rf.final_density().unwrap(), rr.final_density().unwrap())
    else {
        unreachable!()
    };
    let s = 3.0f64.sqrt();
    let mapped: AnyDensity = Density1D::from_fn(10.0, 512, |x| dr.interpolate(x / s) / s)
        .unwrap()
        .into();
    let w2 = wasserstein2(&df.clone().into(), &mapped).unwrap();
    assert!(w2 < 2e-3, "W2 between free and mapped rescaled densities: {w2}");
    let (m_free, m_resc) = (df.moment(2), dr.moment(2));
    assert!(
        (m_free - 3.0 * m_resc).abs() < 1e-3 * m_free,
        "{m_free} vs 3 x {m_resc}"
    );
    assert!((second_moment(&mapped) - m_free).abs() < 1e-3 * m_free);
}

#[test]
fn truncating_the_frequency_box_leaves_lower_modes_unchanged() {
    // equal spacing 1/32 on both boxes
    let wide = SimConfig {
        chi: 0.8,
        solver: Solver::Spectral,
        freq_max: 8.0,
        modes: 257,
        t_final: 0.5,
        cadence: 0.1,
        ..SimConfig::default()
    };
    let narrow = SimConfig {
        freq_max: 4.0,
        modes: 129,
        ..wide.clone()
    };
    let a = run_spectral(&wide, initial_spectrum(&wide).unwrap()).unwrap();
    let b = run_spectral(&narrow, initial_spectrum(&narrow).unwrap()).unwrap();
    assert_eq!(a.spectra.len(), b.spectra.len());
    for ((ta, sa), (tb, sb)) in a.spectra.iter().zip(&b.spectra) {
        assert_eq!(ta, tb);
        for j in 0..sb.len() {
            let d = (sa.values()[j] - sb.values()[j]).norm();
            assert!(d < 1e-12, "t = {ta}, xi = {}: {d:e}", sb.xi(j));
        }
    }
}
