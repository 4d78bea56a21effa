//! Parametric chains: stochasticity under substitution, policy reweighting
//! and model-file identity.

mod common;

use proptest::prelude::*;

use common::*;
use paraguard::rational::{int, ratio, Rational};
use paraguard::shell::parse_model;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn substituted_rows_are_distributions(seed in any::<u64>(), n in 3u32..=20, k in 1usize..=6) {
        let mut rng = rng(seed);
        let model = random_chain(&mut rng, n, k);
        prop_assert!(model.validate(&model.default_reference_valuations()).is_empty());
        let v = random_valuation(&mut rng, &model);
        let rows = model.to_parametric_matrix().unwrap().substitute(&v).unwrap();
        prop_assert_eq!(rows.len(), n as usize);
        for row in rows.values() {
            prop_assert_eq!(row.values().sum::<Rational>(), int(1));
            prop_assert!(row.values().all(|p| *p >= int(0)));
        }
    }

    #[test]
    fn policy_weights_mix_the_action_rows(g in 0i64..=100) {
        let model = uuv();
        let truth = model.truth.clone().unwrap();
        let s1 = model.state_named("S1").unwrap();
        let gamma = ratio(g, 100);
        let mixed = model.dtmc.with_policy_weights(s1, &[gamma.clone(), int(1) - &gamma]).unwrap();
        let rows = mixed.to_parametric_matrix().unwrap().substitute(&truth.values).unwrap();
        let to_s2 = &rows[&s1][&model.state_named("S2").unwrap()];
        // a1 = 0.05 under the first action, a2 = 0.03 under the second
        prop_assert_eq!(to_s2.clone(), &gamma * ratio(5, 100) + (int(1) - &gamma) * ratio(3, 100));
    }
}

#[test]
fn model_identity_ignores_formatting_but_not_content() {
    let text = std::fs::read_to_string(model_path("tiny.toml")).unwrap();
    let a = parse_model(&text).unwrap();
    let reformatted = text.replace("# Three-state toy", "# A comment that changes nothing").replace(" = ", "=");
    assert_eq!(parse_model(&reformatted).unwrap().hash, a.hash);
    let changed = text.replace("range = [\"0.01\", \"0.4\"]", "range = [\"0.01\", \"0.3\"]");
    assert_ne!(parse_model(&changed).unwrap().hash, a.hash);
}

#[test]
fn rows_that_do_not_sum_to_one_are_reported() {
    let text = std::fs::read_to_string(model_path("tiny.toml"))
        .unwrap()
        .replace("S1 = \"remainder\"", "S1 = \"0.5\"");
    assert!(parse_model(&text).is_err());
}
