use std::f64::consts::PI;

use biphoton::fields::*;
use biphoton::{collinear_angle, CrystalSetup, PumpSpec, SellmeierModel, SpdcSource};
use num_complex::Complex64;

fn source(theta_deg: f64) -> SpdcSource {
    SpdcSource::new(
        &SellmeierModel::bbo(),
        PumpSpec {
            lambda_p: 355e-9,
            waist: 507e-6,
        },
        CrystalSetup::single(5e-3, theta_deg.to_radians()),
    )
    .unwrap()
}

/// Literal 4D sum `(2 pi)^-2 sum_q A(q) exp(-i |q|^2 z / 2k) exp(i q . rho) dq^4`.
fn brute_force_position(src: &SpdcSource, grid: &MomentumGrid4, z: f64) -> Vec<Complex64> {
    let n = grid.n();
    let q = grid.axis.momenta();
    let k = src.kinematics().signal_wavenumber();
    let dq4 = grid.dq().powi(4);
    let mut amp = Vec::with_capacity(n.pow(4));
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let s2 = q[a] * q[a] + q[b] * q[b] + q[c] * q[c] + q[d] * q[d];
                    let prop = Complex64::from_polar(1.0, -s2 * z / (2.0 * k));
                    amp.push(src.amplitude_raw(q[a], q[b], q[c], q[d]) * prop);
                }
            }
        }
    }
    let norm = (amp.iter().map(|v| v.norm_sqr()).sum::<f64>() * dq4).sqrt();
    amp.iter_mut().for_each(|v| *v /= norm);

    // separable phase table e^{i q_j x_m}
    let phase: Vec<Complex64> = (0..n * n)
        .map(|jm| Complex64::from_polar(1.0, q[jm / n] * grid.axis.x(jm % n)))
        .collect();
    let e = |j: usize, m: usize| phase[j * n + m];
    let mut out = vec![Complex64::new(0.0, 0.0); n.pow(4)];
    for (idx, o) in out.iter_mut().enumerate() {
        let m = [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n];
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, v) in amp.iter().enumerate() {
            let jj = [j / (n * n * n), (j / (n * n)) % n, (j / n) % n, j % n];
            acc += v * e(jj[0], m[0]) * e(jj[1], m[1]) * e(jj[2], m[2]) * e(jj[3], m[3]);
        }
        *o = acc * dq4 / (4.0 * PI * PI);
    }
    out
}

#[test]
fn fft_path_matches_brute_force_sum() {
    let src = source(32.94);
    let grid = MomentumGrid4::auto(8, &src, &ExtentPolicy::default()).unwrap();
    let z = 5e-3;
    let fast = build_amplitude(&grid, &src, AmplitudeOptions::unchecked())
        .unwrap()
        .propagate(z)
        .unwrap()
        .to_position()
        .unwrap();
    let slow = brute_force_position(&src, &grid, z);
    let peak = slow.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = fast
        .values()
        .iter()
        .zip(&slow)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(err / peak <= 1e-9, "relative deviation {err:e}");
}

#[test]
fn gaussian_stub_has_the_analytic_width() {
    // V exp(-|q_s - q_i|^2 s^2 / 4) gives Var(x_s) = (w0^2 + s^2) / 4
    let (w0, s) = (100e-6, 200e-6);
    let grid = MomentumGrid4::new(32, 0.5 / w0).unwrap();
    let amp = BiphotonAmplitude4::from_fn(&grid, 1e7, AmplitudeOptions::default(), |a, b, c, d| {
        let plus = (a + c).powi(2) + (b + d).powi(2);
        let minus = (a - c).powi(2) + (b - d).powi(2);
        Complex64::new((-plus * w0 * w0 / 4.0 - minus * s * s / 4.0).exp(), 0.0)
    })
    .unwrap();
    let pos = position_pdf(&amp.to_position().unwrap()).unwrap();
    let single = singles(&pos).unwrap().marginal(&[0]).unwrap();
    let axis = &single.axes()[0];
    let var: f64 = single
        .values()
        .iter()
        .enumerate()
        .map(|(i, p)| p * axis.coordinate(i).powi(2))
        .sum();
    let expect = (w0 * w0 + s * s) / 4.0;
    assert!((var / expect - 1.0).abs() < 1e-6, "{var:e} vs {expect:e}");
}

#[test]
fn conservation_and_symmetry() {
    let theta = collinear_angle(&SellmeierModel::bbo(), 355e-9, 710e-9).unwrap();
    let src = source(theta.to_degrees());
    let grid = MomentumGrid4::auto(32, &src, &ExtentPolicy::default()).unwrap();
    let amp = build_amplitude(&grid, &src, AmplitudeOptions::default()).unwrap();
    let n = grid.n();
    let peak = amp
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .unwrap()
        .0;
    let origin = ((n / 2 * n + n / 2) * n + n / 2) * n + n / 2;
    assert_eq!(peak, origin);

    let mom0 = momentum_pdf(&amp).unwrap();
    for z in [5e-3, 10e-3] {
        let moved = momentum_pdf(&amp.clone().propagate(z).unwrap()).unwrap();
        let diff = mom0
            .values()
            .iter()
            .zip(moved.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-12);
    }

    let pos = amp.clone().propagate(5e-3).unwrap().to_position().unwrap();
    assert!((pos.norm_sqr() - amp.norm_sqr()).abs() <= 1e-10);
    let pdf = position_pdf(&pos).unwrap();
    assert!(pdf.values().iter().all(|&v| v >= 0.0));

    let s = singles(&pdf).unwrap();
    let idler = pdf.marginal(&[2, 3]).unwrap();
    for (a, b) in s.values().iter().zip(idler.values()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(momentum_pdf(&pos).is_err());
    assert!(pos.propagate(1e-3).is_err());
}

#[test]
fn averaged_joints_show_the_expected_correlations() {
    let src = source(32.9);
    let grid = MomentumGrid4::auto(64, &src, &ExtentPolicy::default()).unwrap();
    let amp = build_amplitude(&grid, &src, AmplitudeOptions::default()).unwrap();
    let mom = averaged_joint_x(&momentum_pdf(&amp).unwrap()).unwrap();
    assert!((mom.total() - 1.0).abs() < 1e-12);
    assert!(pearson(&mom).unwrap() < -0.99);

    let pos = position_pdf(&amp.propagate(5e-3).unwrap().to_position().unwrap()).unwrap();
    let avg = averaged_joint_x(&pos).unwrap();
    assert!(pearson(&avg).unwrap() > 0.3);
    let n = grid.n();
    for col in n / 4..3 * n / 4 {
        let column: Vec<f64> = (0..n).map(|r| avg.at2(r, col)).collect();
        assert!(
            (argmax(&column) as isize - col as isize).abs() <= 1,
            "column {col}"
        );
    }
}

#[test]
fn conditional_structure_grows_with_angle() {
    let mut radii = Vec::new();
    for theta in [32.90, 32.96] {
        let src = source(theta);
        let grid = MomentumGrid4::auto(64, &src, &ExtentPolicy::default()).unwrap();
        let amp = build_amplitude(&grid, &src, AmplitudeOptions::default()).unwrap();
        let pos = position_pdf(&amp.propagate(5e-3).unwrap().to_position().unwrap()).unwrap();
        let cond = conditional_position(&pos, (0.0, 0.0)).unwrap();
        radii.push(argmax(&radial_profile(&cond).unwrap()));
        let s = singles(&pos).unwrap();
        assert_eq!(argmax(&radial_profile(&s).unwrap()), 0);
    }
    assert_eq!(radii[0], 0);
    assert!(radii[1] > 0);
}

#[test]
fn memory_budget_is_checked_before_allocation() {
    let src = source(32.9);
    let grid = MomentumGrid4::auto(512, &src, &ExtentPolicy::default()).unwrap();
    let err = build_amplitude(&grid, &src, AmplitudeOptions::default()).unwrap_err();
    assert_eq!(err.category(), "fields");
}
