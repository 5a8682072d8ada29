use num_complex::Complex64;
use proptest::prelude::*;

use schwarma::arma::{convert_timescale, fit_ma_to_autocovariance, ArmaModel, AutocovarianceSequence, PowerSpectrum};
use schwarma::experiments::{qns_build_design, qns_forward_chi, qns_reconstruct};
use schwarma::linalg::{self, CMatrix};
use schwarma::quantum::{apply_channel, is_cptp, process_fidelity, DensityMatrix, SuperOperator};
use schwarma::rng::{seeded, substream};
use schwarma::schwarma::{
    amplitude_damping_step, lindblad_depolarizing_step, multiaxis_step, stiefel_exp, z_dephasing_step, NoiseSource,
    SchwarmaModel, TangentVector,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn complex_matrix(n: usize, entries: &[(f64, f64)]) -> CMatrix {
    CMatrix::from_iterator(n, n, entries.iter().map(|&(r, i)| c(r, i)))
}

fn hermitian(n: usize, entries: &[(f64, f64)]) -> CMatrix {
    let m = complex_matrix(n, entries);
    (&m + m.adjoint()) * c(0.5, 0.0)
}

fn entries(n: usize, scale: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-scale..scale, -scale..scale), n * n)
}

fn density(n: usize, entries: &[(f64, f64)]) -> DensityMatrix {
    let g = complex_matrix(n, entries);
    let mut rho = &g * g.adjoint() + linalg::identity(n) * c(1e-3, 0.0);
    let tr = rho.trace();
    rho /= tr;
    DensityMatrix::new((&rho + rho.adjoint()) * c(0.5, 0.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_steps_are_cptp(
        y in prop::array::uniform3(-3.0f64..3.0),
        z in prop::array::uniform3((-2.0f64..2.0, -2.0f64..2.0)),
    ) {
        let steps = [
            z_dephasing_step(y[0]),
            multiaxis_step(y[0], y[1], y[2]),
            amplitude_damping_step(c(z[0].0, z[0].1)),
            lindblad_depolarizing_step(c(z[0].0, z[0].1), c(z[1].0, z[1].1), c(z[2].0, z[2].1)),
        ];
        for k in &steps {
            let r = is_cptp(&k.to_superoperator());
            prop_assert!(r.is_cptp, "{r:?}");
        }
    }

    #[test]
    fn stiefel_exp_stays_on_the_manifold(
        h in entries(3, 1.0),
        b1 in entries(3, 1.0),
        b2 in entries(3, 1.0),
        scale in 0.0f64..2.0,
    ) {
        let a = hermitian(3, &h) * c(0.0, -scale);
        let mut b = CMatrix::zeros(6, 3);
        b.view_mut((0, 0), (3, 3)).copy_from(&(complex_matrix(3, &b1) * c(scale, 0.0)));
        b.view_mut((3, 0), (3, 3)).copy_from(&(complex_matrix(3, &b2) * c(scale, 0.0)));
        let x = TangentVector::new(a, b).unwrap();
        let p = stiefel_exp(&linalg::identity(3), &x).unwrap();
        prop_assert!(p.orthonormality_residual() < 1e-10);
        prop_assert!(p.to_kraus().tp_residual() < 1e-10);
    }

    #[test]
    fn superoperator_matches_kraus_action(
        b in entries(2, 1.5),
        h in entries(2, 1.5),
        r in entries(2, 1.0),
    ) {
        let x = TangentVector::new(hermitian(2, &h) * c(0.0, -1.0), complex_matrix(2, &b)).unwrap();
        let k = stiefel_exp(&linalg::identity(2), &x).unwrap().to_kraus();
        let rho = density(2, &r);
        let direct = apply_channel(&k, &rho).unwrap();
        let via_super = k.to_superoperator().apply(&rho).unwrap();
        prop_assert!(linalg::max_abs_diff(direct.matrix(), &via_super) < 1e-12);
    }

    #[test]
    fn process_fidelity_ignores_global_phase(
        rot in prop::array::uniform3(-3.0f64..3.0),
        noise in prop::array::uniform3(-0.5f64..0.5),
        phase in -3.2f64..3.2,
    ) {
        let u = linalg::to_dynamic(&linalg::su2_rotation(rot[0], rot[1], rot[2]));
        let s = multiaxis_step(noise[0], noise[1], noise[2]).to_superoperator();
        let s = s.after(&SuperOperator::from_unitary(&u)).unwrap();
        let f = process_fidelity(&u, &s).unwrap();
        let f_phase = process_fidelity(&(&u * Complex64::from_polar(1.0, phase)), &s).unwrap();
        prop_assert!((f - f_phase).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        prop_assert!((process_fidelity(&u, &SuperOperator::from_unitary(&u)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn arma_streams_are_reproducible_and_resumable(
        seed in any::<u64>(),
        a in -0.9f64..0.9,
        ma in prop::collection::vec(-1.0f64..1.0, 1..6),
        split in 1usize..40,
    ) {
        let model = ArmaModel::new(vec![a], ma).unwrap();
        let whole = model.clone().generate(40, &mut seeded(seed), 0.7);
        prop_assert_eq!(&whole, &model.clone().generate(40, &mut seeded(seed), 0.7));
        let mut m = model.clone();
        let mut rng = seeded(seed);
        let mut parts = m.generate(split, &mut rng, 0.7);
        parts.extend(m.generate(40 - split, &mut rng, 0.7));
        prop_assert_eq!(whole, parts);
    }

    #[test]
    fn schwarma_trials_reproduce_per_substream(seed in any::<u64>(), trial in 0u64..1000) {
        let src = NoiseSource::real(ArmaModel::new(vec![0.6], vec![0.2]).unwrap(), 1.0);
        let model = SchwarmaModel::multiaxis(src.clone(), src.clone(), src).unwrap();
        let run = || {
            let mut m = model.clone();
            m.reset();
            let mut rng = substream(seed, trial);
            (0..5).map(|_| m.step(&mut rng).unwrap().to_superoperator().into_matrix()).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn fitted_ma_reproduces_its_autocovariance(ma in prop::collection::vec(-1.0f64..1.0, 1..8)) {
        prop_assume!(ma.iter().any(|v| v.abs() > 0.05));
        let q = ma.len() - 1;
        let r = ArmaModel::pure_ma(ma).unwrap().autocovariance(q, 1.0);
        let fitted = fit_ma_to_autocovariance(&r).unwrap();
        let r2 = fitted.autocovariance(q, 1.0);
        for (x, y) in r.values.iter().zip(&r2.values) {
            prop_assert!((x - y).abs() < 1e-6 * r.values[0], "{:?} vs {:?}", r.values, r2.values);
        }
        // refitting the fit's own autocovariance changes nothing
        let again = fit_ma_to_autocovariance(&r2).unwrap();
        for (x, y) in fitted.ma_coeffs().iter().zip(again.ma_coeffs()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn timescale_conversion_preserves_block_variance(
        a in -0.9f64..0.9,
        t in 1usize..6,
        n_slow in 1usize..6,
    ) {
        let r = ArmaModel::new(vec![a], vec![1.0]).unwrap().autocovariance(n_slow * t, 1.0);
        let rs = convert_timescale(&r, t, n_slow).unwrap();
        let direct: f64 = (0..t).flat_map(|i| (0..t).map(move |j| (i, j)))
            .map(|(i, j)| r.values[i.abs_diff(j)]).sum();
        prop_assert!((rs.values[0] - direct).abs() < 1e-9 * direct.max(1.0));
        if t == 1 {
            prop_assert_eq!(&rs.values[..], &r.values[..n_slow]);
        }
        prop_assert!(rs.is_bounded_by_variance(1e-9));
    }

    #[test]
    fn qns_forward_then_inverse_recovers_spectrum(values in prop::collection::vec(0.0f64..1e-3, 16)) {
        let design = qns_build_design(32).unwrap();
        let spectrum = PowerSpectrum::new(design.grid(), values.clone()).unwrap();
        let chi = qns_forward_chi(&design, &spectrum).unwrap();
        let p: Vec<f64> = chi.iter().map(|x| 0.5 * (1.0 + (-x).exp())).collect();
        let rec = qns_reconstruct(&p, &design).unwrap();
        let scale = values.iter().cloned().fold(1e-6, f64::max);
        for (x, y) in rec.spectrum.values.iter().zip(&values) {
            prop_assert!((x - y).abs() < 1e-6 * scale, "{x} vs {y}");
        }
    }
}

#[test]
fn autocovariance_sequence_rejects_negative_variance() {
    assert!(AutocovarianceSequence::new(vec![-1.0, 0.0], 1.0).is_err());
}
