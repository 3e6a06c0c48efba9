use super::*;
use crate::datamodel::{decision, fit_q_models, Action, UtilityModel};
use crate::numcore::{expit, std_normal_density, RngStream};

/// `E[g(Z)]` for standard normal `Z` by Simpson's rule on `[−10, 10]`.
fn normal_expectation(g: impl Fn(f64) -> f64) -> f64 {
    let m = 20_000;
    let h = 20.0 / m as f64;
    let mut total = 0.0;
    for i in 0..=m {
        let z = -10.0 + i as f64 * h;
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * g(z) * std_normal_density(z);
    }
    total * h / 3.0
}

/// Optimal value `E|D(X)/2|` for fixed weight `omega` in the two-outcome
/// model, where `D/2 = (2 + 2ω)x₁ − (4 − 2ω)x₂ − 2 + 4ω` is normal.
fn fixed_optimal_value(omega: f64) -> f64 {
    let a = 4.0 * omega + 2.0 * (1.0 - omega);
    let b = -2.0 * omega - 4.0 * (1.0 - omega);
    let c = 2.0 * omega - 2.0 * (1.0 - omega);
    let sd = 0.5 * (a * a + b * b).sqrt();
    normal_expectation(|z| (c + sd * z).abs())
}

#[test]
fn perfect_clinician_always_treats_optimally() {
    let s = Scenario::fixed_fixed(300, 0.25, 1.0).unwrap();
    let (data, truth) = s.generate(&mut RngStream::new(1)).unwrap();
    assert_eq!(data.actions(), truth.optimal.as_slice());
    assert_eq!(data.p(), 5);
    assert_eq!(data.k(), 2);
}

#[test]
fn hidden_errors_reproduce_outcomes() {
    let s = Scenario::fixed_var_rho(50, 0.75).unwrap();
    let (data, truth) = s.generate(&mut RngStream::new(2)).unwrap();
    for i in 0..50 {
        let x = data.covariate_row(i);
        let a = data.actions()[i].sign();
        let y = data.outcome_row(i);
        assert!((y[0] - a * (4.0 * x[0] - 2.0 * x[1] + 2.0) - truth.errors[(i, 0)]).abs() < 1e-12);
        assert!((y[1] - a * (2.0 * x[0] - 4.0 * x[1] - 2.0) - truth.errors[(i, 1)]).abs() < 1e-12);
    }
}

#[test]
fn standard_of_care_matches_closed_form() {
    let s = Scenario::fixed_fixed(100_000, 0.25, 0.8).unwrap();
    let (_, truth) = s.generate(&mut RngStream::new(3)).unwrap();
    let oracle = 0.6 * fixed_optimal_value(0.25);
    assert!((oracle - 1.14).abs() < 0.01);
    assert!((truth.standard_of_care_value() - oracle).abs() < 0.02);
}

#[test]
fn agreement_rate_matches_behavior_model() {
    let s = Scenario::var_var(100_000).unwrap();
    let (data, truth) = s.generate(&mut RngStream::new(4)).unwrap();
    let rate = data.actions().iter().zip(&truth.optimal).filter(|(a, o)| a == o).count() as f64 / 1e5;
    let oracle = normal_expectation(|z| expit(0.5 + 0.5 * z));
    assert!((oracle - 0.61).abs() < 0.01);
    assert!((rate - oracle).abs() < 0.01);

    let s = Scenario::fixed_fixed(100_000, 0.75, 0.6).unwrap();
    let (data, truth) = s.generate(&mut RngStream::new(5)).unwrap();
    let rate = data.actions().iter().zip(&truth.optimal).filter(|(a, o)| a == o).count() as f64 / 1e5;
    assert!((rate - 0.6).abs() < 0.01);
}

#[test]
fn optimal_policy_value_matches_closed_form() {
    let s = Scenario::fixed_fixed(100, 0.25, 0.8).unwrap();
    let mut rng = RngStream::new(6);
    let values: Vec<f64> = (0..40)
        .map(|_| value_mc(&s, |x| s.optimal_action(x), 500, &mut rng).unwrap())
        .collect();
    let mean = values.iter().sum::<f64>() / 40.0;
    let oracle = fixed_optimal_value(0.25);
    assert!((oracle - 1.90).abs() < 0.01);
    let sd = MetricSummary::from_values(values).sd;
    assert!((mean - oracle).abs() < 3.0 * sd / 40f64.sqrt());
}

#[test]
fn optimal_policy_dominates_constant_policies() {
    for id in ScenarioId::ALL {
        let s = Scenario::default_for(id, 100).unwrap();
        let test = TestSample::draw(&s, 5000, &mut RngStream::new(7)).unwrap();
        let best = test.value(&s, |x| s.optimal_action(x));
        for a in [Action::Positive, Action::Negative] {
            assert!(best >= test.value(&s, |_| a), "{id}");
        }
        assert_eq!(test.error_rate(&s, |x| s.optimal_action(x)), 0.0);
    }
}

#[test]
fn multiplicative_third_outcome_has_no_mean_effect() {
    let add = Scenario::three_outcomes(10, 0.8, Y3Reading::Additive).unwrap();
    let mul = Scenario::three_outcomes(10, 0.8, Y3Reading::Multiplicative).unwrap();
    let x = [0.3, 0.2, 0.0, 0.0, 0.0];
    assert!((add.true_contrasts(&x)[2] - 3.0).abs() < 1e-15);
    assert_eq!(mul.true_contrasts(&x)[2], 0.0);
    assert_eq!(add.outcomes[2].draw(&x, Action::Negative, 0.5), 1.0 - 1.5 + 0.5);
    assert_eq!(mul.outcomes[2].draw(&x, Action::Negative, 0.5), 1.0 - 1.5 * 0.5);
}

#[test]
fn misspecified_scenario_uses_squared_term() {
    let s = Scenario::misspec(10, false).unwrap();
    let x = [0.4, 0.1, -0.2, 0.3, 0.5];
    let expect = expit(1.0 + 0.16 - 0.5 * 0.4 + 0.3 + 0.5 * 0.5);
    assert!((s.utility.weights_at(&x)[0] - expect).abs() < 1e-15);
    let strong = Scenario::misspec(10, true).unwrap();
    let expect = expit(1.0 + 4.0 * 0.16 - 0.5 * 0.4 + 0.3 + 4.0 * 0.5);
    assert!((strong.utility.weights_at(&x)[0] - expect).abs() < 1e-15);
}

#[test]
fn scenario_names_parse() {
    for id in ScenarioId::ALL {
        assert_eq!(id.name().parse::<ScenarioId>().unwrap(), id);
    }
    assert_eq!("s3".parse::<ScenarioId>().unwrap(), ScenarioId::VarVar);
    assert!("S9".parse::<ScenarioId>().is_err());
    for t in TableId::ALL {
        assert_eq!(t.name().parse::<TableId>().unwrap(), t);
    }
    assert_eq!("power".parse::<TableId>().unwrap(), TableId::Power);
}

#[test]
fn observational_value_with_agreeing_policy_is_plain_mean() {
    // Actions are a deterministic function of x₁, so a policy reproducing
    // that function agrees with every record.
    let s = Scenario::fixed_fixed(60, 0.5, 1.0).unwrap();
    let (data, _) = s.generate(&mut RngStream::new(8)).unwrap();
    let half = UtilityModel::scalar(0.5).unwrap();
    let observed = |x: &[f64]| s.optimal_action(x);
    let v = value_observational(&data, 5, |_| Ok((observed, half.clone()))).unwrap();
    let plain: f64 = (0..60).map(|i| half.value(&[], data.outcome_row(i)).unwrap()).sum::<f64>() / 60.0;
    assert!((v.value - plain).abs() < 1e-12);
    assert!((v.standard_of_care - plain).abs() < 1e-12);
    assert!(v.percent_improvement.abs() < 1e-9);
    assert_eq!(v.folds.len(), 5);
    assert!(v.folds.iter().all(|f| f.agreeing == f.held_out));
}

#[test]
fn observational_value_single_outcome_reduction() {
    let s = Scenario::fixed_fixed(100, 0.25, 0.7).unwrap();
    let (data, _) = s.generate(&mut RngStream::new(9)).unwrap();
    let policy = |x: &[f64]| Action::from_score(x[0]);
    let one = UtilityModel::scalar(1.0).unwrap();
    let v = value_observational(&data, 2, |_| Ok((policy, one.clone()))).unwrap();
    let mut per_fold = [(0.0, 0usize); 2];
    for i in 0..100 {
        if policy(data.covariate_row(i)) == data.actions()[i] {
            per_fold[i % 2].0 += data.outcome_row(i)[0];
            per_fold[i % 2].1 += 1;
        }
    }
    let expect = (per_fold[0].0 / per_fold[0].1 as f64 + per_fold[1].0 / per_fold[1].1 as f64) / 2.0;
    assert!((v.value - expect).abs() < 1e-12);
    assert!(value_observational(&data, 1, |_| Ok((policy, one.clone()))).is_err());
}

#[test]
fn observational_value_flags_folds_without_agreement() {
    let s = Scenario::fixed_fixed(40, 0.5, 1.0).unwrap();
    let (data, _) = s.generate(&mut RngStream::new(10)).unwrap();
    let opposite = |x: &[f64]| s.optimal_action(x).flipped();
    let half = UtilityModel::scalar(0.5).unwrap();
    assert!(value_observational(&data, 4, |_| Ok((opposite, half.clone()))).is_err());
}

#[test]
fn estimated_policy_beats_standard_of_care_observationally() {
    let s = Scenario::fixed_fixed(500, 0.25, 0.8).unwrap();
    let settings = ReplicationSettings::default();
    let mut wins = 0;
    for r in 0..20 {
        let (data, _) = s.generate(&mut RngStream::with_stream(11, r)).unwrap();
        let v = value_observational(&data, 5, |train| {
            let q = fit_q_models(train)?;
            let fit = fit_with_plan(train, &q, &s.plan, &settings, 0)?;
            let utility = fit.utility.clone();
            Ok((move |x: &[f64]| decision(&q, &fit.utility, x), utility))
        })
        .unwrap();
        if v.value > v.standard_of_care {
            wins += 1;
        }
    }
    assert!(wins >= 19, "{wins}");
}

#[test]
fn replicate_is_deterministic_with_full_layout() {
    let settings = ReplicationSettings { sizes: vec![100], test_n: 100, ..Default::default() };
    let a = replicate_table(TableId::T1, 2, 5, &settings).unwrap();
    let b = replicate_table(TableId::T1, 2, 5, &settings).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rows.len(), 4);
    assert_eq!(a.rows[0].settings, vec!["100", "0.25", "0.60"]);
    assert!(a.to_csv().starts_with("n,omega,rho,omega_hat_mean,omega_hat_sd,"));
    assert!(a.to_text().contains("0.25"));

    // Value and estimation tables of the same setting share replications.
    let values = replicate_table(TableId::T2, 2, 5, &settings).unwrap();
    let est = run_cell(&Scenario::fixed_fixed(100, 0.25, 0.6).unwrap(), 2, 5, 0, &settings).unwrap();
    assert_eq!(values.rows[0].metrics[1].values, est.iter().map(|r| r.value_estimated).collect::<Vec<_>>());

    let full = ReplicationSettings { test_n: 50, ..Default::default() };
    assert_eq!(replicate_table(TableId::T1, 1, 1, &full).unwrap().rows.len(), 16);
}

#[test]
fn metric_summary_statistics() {
    let m = MetricSummary::from_values(vec![1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m.mean, 2.5);
    assert!((m.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(m.median(), 2.5);
    assert_eq!(MetricSummary::from_values(vec![7.0]).sd, 0.0);
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
}
