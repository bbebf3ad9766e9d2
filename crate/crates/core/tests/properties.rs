//! Structural and statistical properties that cut across modules.

use csbpc::cellmodel::{alpha, infected_regime, to_environment, CellModel, ThetaLaw};
use csbpc::env::{Atom, Component, EnvironmentSpec, JumpPath, MultiplierLaw};
use csbpc::mechanisms::{GeneralMechanism, Mechanism, StableMechanism};
use csbpc::montecarlo::{a_f_series, mean_stderr, with_workers, Method, TestFunction};
use csbpc::quenched_ode::{solve_backward, DEFAULT_TOLERANCE};
use csbpc::quenched_stable::{quenched_survival, sample_feller_grid};
use csbpc::regimes::{classify, RegimeLabel};
use csbpc::rng::stream;
use proptest::prelude::*;

/// Two-sample Kolmogorov-Smirnov distance.
fn ks2(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn spec_strategy() -> impl Strategy<Value = EnvironmentSpec> {
    (
        -1.0f64..1.5,
        prop::collection::vec((0.05f64..3.0, 0.1f64..2.0), 1..4),
        prop::option::of((0.1f64..1.0, 0.5f64..4.0, 0.5f64..4.0)),
    )
        .prop_map(|(g, atoms, beta)| {
            let atoms = atoms.into_iter().map(|(m, r)| Atom::new(m, r)).collect();
            let comps = beta
                .map(|(rate, a, b)| {
                    vec![Component {
                        rate,
                        law: MultiplierLaw::Beta { a, b },
                    }]
                })
                .unwrap_or_default();
            EnvironmentSpec::new(g, atoms, comps).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi_is_midpoint_convex(spec in spec_strategy(), a in 0.0f64..3.0, w in 0.01f64..2.0) {
        let c = a + 2.0 * w;
        prop_assume!(c < spec.theta_max());
        let mid = spec.phi(a + w).unwrap();
        let ends = spec.phi(a).unwrap() + spec.phi(c).unwrap();
        prop_assert!(2.0 * mid <= ends + 1e-12 * ends.abs().max(1.0));
    }

    #[test]
    fn drift_at_minus_phi_prime_is_critical(spec in spec_strategy()) {
        prop_assume!(spec.theta_max() > 1.0);
        let g = -spec.phi_prime(0.0).unwrap();
        let r = classify(&spec, g, 1.0).unwrap();
        prop_assert_eq!(r.label, RegimeLabel::Critical);
        prop_assert_eq!(r.poly_exponent, 0.5);
    }

    #[test]
    fn general_without_jumps_is_feller(g in -2.0f64..2.0, s2 in 0.01f64..5.0, l in 0.0f64..1e3) {
        let s = StableMechanism::feller(g, s2).unwrap();
        let m = GeneralMechanism::new(g, s2, vec![], None).unwrap();
        let (a, b) = (s.psi(l).unwrap(), m.psi(l).unwrap());
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }

    #[test]
    fn psi_slope_at_zero_is_minus_g(g in -2.0f64..2.0, s2 in 0.0f64..3.0, z in 0.1f64..2.0, rate in 0.0f64..2.0) {
        let m = GeneralMechanism::new(g, s2, vec![csbpc::mechanisms::ReproductionAtom { z, rate }], None).unwrap();
        let h = 1e-6;
        let d = (m.psi(h).unwrap() - m.psi(0.0).unwrap()) / h;
        prop_assert!((d + g).abs() <= 1e-4 * g.abs().max(1.0) + s2 * h + rate * z * z * h);
    }

    #[test]
    fn quenched_survival_decreases_along_each_path(seed in any::<u64>(), beta in prop::sample::select(vec![0.5, 1.0])) {
        let spec = EnvironmentSpec::with_atoms(0.3, &[(0.5, 1.0), (1.5, 0.5)]).unwrap();
        let m = StableMechanism::new(0.3, 1.0, beta).unwrap();
        let path = spec.sample_path(20.0, &mut stream(seed, 0)).unwrap();
        let mut last = 1.0;
        for k in 1..=40 {
            let p = quenched_survival(&m, 1.0, 0.5 * k as f64, &path).unwrap();
            prop_assert!(p <= last);
            last = p;
        }
    }

    #[test]
    fn laplace_exponent_increases_with_lambda(seed in any::<u64>()) {
        let spec = EnvironmentSpec::with_atoms(0.1, &[(0.5, 1.0)]).unwrap();
        let mech = Mechanism::from(GeneralMechanism::new(
            0.1,
            1.0,
            vec![csbpc::mechanisms::ReproductionAtom { z: 1.0, rate: 1.0 }],
            None,
        ).unwrap());
        let path = spec.sample_path(5.0, &mut stream(seed, 0)).unwrap();
        let vs: Vec<f64> = [0.1, 1.0, 10.0, 100.0]
            .iter()
            .map(|&l| solve_backward(&mech, l, 5.0, &path, DEFAULT_TOLERANCE).unwrap().v0)
            .collect();
        prop_assert!(vs.windows(2).all(|w| w[0] < w[1]), "{:?}", vs);
    }

    #[test]
    fn infected_label_matches_induced_classification(theta in 0.01f64..0.49, gr in 0.0f64..3.0, r in 0.2f64..3.0) {
        let model = CellModel::new(gr * r, 1.0, r, ThetaLaw::TwoPoint { theta }).unwrap();
        let (spec, mech) = to_environment(&model).unwrap();
        let direct = classify(&spec, mech.g, 1.0).unwrap();
        let report = infected_regime(&model).unwrap();
        prop_assert_eq!(report.label, direct.label);
        let (a, _) = alpha(&model).unwrap();
        let g = model.g;
        let mean_theta = model.theta_law.moment(1.0).unwrap();
        prop_assert!(a <= g.min(2.0 * r * (mean_theta - 0.5) + g) + 1e-12);
        if report.label == RegimeLabel::WeaklySubcritical {
            prop_assert!(a < g);
        }
    }

    #[test]
    fn estimates_do_not_depend_on_workers(seed in any::<u64>(), workers in 2usize..6) {
        let spec = EnvironmentSpec::with_atoms(0.5, &[(0.5, 1.0)]).unwrap();
        let f = TestFunction::survival(&StableMechanism::feller(0.5, 1.0).unwrap(), 1.0);
        let run = |w| with_workers(Some(w), || a_f_series(&f, &spec, &[2.0, 8.0], Method::EsscherAuto, 400, seed).unwrap()).unwrap();
        let one = run(1);
        prop_assert_eq!(&one, &run(workers));
        prop_assert_eq!(&one, &run(1));
    }
}

#[test]
fn one_step_and_two_step_sampling_agree() {
    let spec = EnvironmentSpec::with_atoms(0.4, &[(0.5, 1.0)]).unwrap();
    let mech = StableMechanism::feller(0.4, 1.0).unwrap();
    let path = spec.sample_path(3.0, &mut stream(1, 0)).unwrap();
    let n = 10_000;
    let one: Vec<f64> = (0..n)
        .map(|i| sample_feller_grid(&mech, 2.0, &[3.0], &path, &mut stream(2, i)).unwrap()[0])
        .collect();
    let two: Vec<f64> = (0..n)
        .map(|i| sample_feller_grid(&mech, 2.0, &[1.5, 3.0], &path, &mut stream(3, i)).unwrap()[1])
        .collect();
    let d = ks2(&one, &two);
    assert!(d < 0.05, "KS {d}");
}

#[test]
fn cumulant_identity() {
    let spec = EnvironmentSpec::with_atoms(0.0, &[(0.5, 1.0), (1.8, 0.4)]).unwrap();
    let t = 2.0;
    let n = 100_000;
    let deltas: Vec<f64> = (0..n)
        .map(|i| spec.sample_path(t, &mut stream(11, i)).unwrap().delta_at(t).unwrap())
        .collect();
    for lambda in [0.5, 1.0] {
        let xs: Vec<f64> = deltas.iter().map(|d| (lambda * d).exp()).collect();
        let (m, se) = mean_stderr(&xs);
        let target = (t * spec.phi(lambda).unwrap()).exp();
        assert!((m - target).abs() <= 3.0 * se, "lambda {lambda}: {m} vs {target} (se {se})");
    }
}

#[test]
fn esscher_reweighting_is_unbiased() {
    let spec = EnvironmentSpec::with_atoms(0.2, &[(0.5, 1.0), (2.0, 0.3)]).unwrap();
    let t = 4.0;
    let lambda = 0.7;
    let tilted = spec.esscher(lambda).unwrap();
    let phi = spec.phi_k(lambda).unwrap();
    let g = |k: f64| 1.0 / (1.0 + k.exp());
    let n = 50_000;
    let plain: Vec<f64> = (0..n)
        .map(|i| g(spec.sample_path(t, &mut stream(21, i)).unwrap().k_at(t).unwrap()))
        .collect();
    let weighted: Vec<f64> = (0..n)
        .map(|i| {
            let k = tilted.sample_path(t, &mut stream(22, i)).unwrap().k_at(t).unwrap();
            g(k) * (-lambda * k + t * phi).exp()
        })
        .collect();
    let (a, sa) = mean_stderr(&plain);
    let (b, sb) = mean_stderr(&weighted);
    assert!((a - b).abs() <= 3.0 * (sa * sa + sb * sb).sqrt(), "{a} vs {b}");
}

#[test]
fn time_reversed_functional_has_the_same_law() {
    let spec = EnvironmentSpec::with_atoms(0.3, &[(0.5, 1.0), (1.4, 0.6)]).unwrap();
    let (t, beta) = (3.0, 1.0);
    let n = 10_000;
    let forward: Vec<f64> = (0..n)
        .map(|i| spec.sample_path(t, &mut stream(31, i)).unwrap().exp_functional(beta, t).unwrap())
        .collect();
    let reversed: Vec<f64> = (0..n)
        .map(|i| {
            let p: JumpPath = spec.sample_path(t, &mut stream(32, i)).unwrap();
            (-beta * p.k_at(t).unwrap() + p.log_exponential_integral(beta, 0.0, t).unwrap()).exp()
        })
        .collect();
    let d = ks2(&forward, &reversed);
    assert!(d < 0.05, "KS {d}");
}

/// Total variation of `e^{-βK}` on `[0, t]`: monotone pieces plus jumps.
fn total_variation(path: &JumpPath, beta: f64, t: f64) -> f64 {
    let segs = path.segments(0.0, t).unwrap();
    let f = |k: f64| (-beta * k).exp();
    let mut tv = 0.0;
    for (i, s) in segs.iter().enumerate() {
        let k_end = s.value + path.drift() * (s.end - s.start);
        tv += (f(s.value) - f(k_end)).abs();
        if let Some(next) = segs.get(i + 1) {
            tv += (f(next.value) - f(k_end)).abs();
        }
    }
    tv
}

#[test]
fn riemann_sums_converge_at_first_order() {
    let spec = EnvironmentSpec::with_atoms(0.1, &[(0.5, 1.0)]).unwrap();
    let qs: Vec<usize> = (4..=10).map(|k| 1usize << k).collect();
    let (t, beta) = (5.0, 1.0);
    let mut sup = vec![0.0f64; qs.len()];
    for i in 0..20 {
        let path = spec.sample_path(t, &mut stream(41, i)).unwrap();
        let errs = csbpc::montecarlo::discretization_errors(&path, beta, t, &qs).unwrap();
        // left sums: error <= (TV + f(t)) / q on every path
        let bound = total_variation(&path, beta, t) + (-beta * path.k_at(t).unwrap()).exp();
        for (e, &q) in errs.iter().zip(&qs) {
            assert!(e * q as f64 <= bound * (1.0 + 1e-9), "path {i}, q {q}: {e} vs {}", bound / q as f64);
        }
        for (s, e) in sup.iter_mut().zip(&errs) {
            *s = s.max(*e);
        }
    }
    let xs: Vec<f64> = qs.iter().map(|&q| (q as f64).ln()).collect();
    let ys: Vec<f64> = sup.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let order = -sxy / sxx;
    assert!(order >= 0.9, "order of the sup error {order}");
}
