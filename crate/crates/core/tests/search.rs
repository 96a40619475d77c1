mod common;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use telltale::data::{shape_sample, shapes};
use telltale::model::{forward, train_toy, Activation, Layer, Model};
use telltale::numerics::{AccumulationStrategy as S, Tensor};
use telltale::search::{generate, local_phase, remote_phase, SearchConfig, SearchError};

fn toy_model() -> Arc<Model> {
    let init = Model::random(&[256, 16, 4], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    Arc::new(train_toy(&init, &shapes(400, 0), 300, 0.5).unwrap().0)
}

fn zero_model() -> Arc<Model> {
    let layer = Layer::new(Tensor::zeros(vec![3, 4]), Tensor::zeros(vec![3]), Activation::Identity).unwrap();
    Arc::new(Model::new(vec![layer]).unwrap())
}

#[test]
fn single_ma_is_rejected() {
    let m = zero_model();
    let mut oracles = common::local_oracles(&m, &[S::Sequential]);
    let err = generate(&mut oracles, 0, &Tensor::vector(vec![0.5; 4]), &SearchConfig::default()).unwrap_err();
    assert!(matches!(err, SearchError::NeedTwoMas(1)));
    assert!(err.to_string().contains("need >= 2 MAs"));
}

#[test]
fn uniform_softmax_is_already_on_the_boundary() {
    let m = zero_model();
    let mut oracle = telltale::oracle::LocalOracle::new(0, 0, m, S::Sequential);
    let x = Tensor::vector(vec![0.1, 0.2, 0.3, 0.4]);
    let out = local_phase(&mut oracle, &x, 0, &SearchConfig::default()).unwrap();
    assert!(out.reached);
    assert_eq!(out.steps, 0);
    assert!(out.sample.bit_eq(&x));
}

#[test]
fn exhausted_remote_budget_fails() {
    let m = toy_model();
    let mut oracles = common::local_oracles(&m, &[S::Sequential, S::KahanCompensated]);
    let x = shape_sample(3).input;
    let cfg = SearchConfig {
        remote_max: 1,
        ..SearchConfig::default()
    };
    let out = remote_phase(&mut oracles, &x, &cfg).unwrap();
    assert!(!out.success);
    assert_eq!(out.steps, 1);
    assert!(out.identified_ma.is_none());
}

#[test]
fn identifying_start_is_returned_untouched() {
    let m = toy_model();
    let strategies = [S::Sequential, S::Reversed, S::PairwiseTree, S::KahanCompensated];
    let cfg = SearchConfig::default();
    let mut oracles = common::local_oracles(&m, &strategies);
    let first = (0..20)
        .map(|seed| generate(&mut oracles, 0, &shape_sample(seed).input, &cfg).unwrap())
        .find(|r| r.success)
        .expect("a success among 20 starts");
    let again = generate(&mut oracles, 0, &first.sample, &cfg).unwrap();
    assert!(again.success);
    assert!(again.sample.bit_eq(&first.sample));
    assert_eq!((again.local_steps, again.remote_steps), (0, 0));
    assert_eq!(again.psnr_db, f64::INFINITY);
    assert_eq!(again.identified_ma, first.identified_ma);
}

#[test]
fn results_respect_invariants() {
    let m = toy_model();
    let strategies = [S::Sequential, S::Reversed, S::PairwiseTree, S::KahanCompensated];
    let cfg = SearchConfig::default();
    for seed in 0..10 {
        let mut oracles = common::local_oracles(&m, &strategies);
        let r = generate(&mut oracles, 0, &shape_sample(seed).input, &cfg).unwrap();
        assert!(r.local_steps <= cfg.local_max && r.remote_steps <= cfg.remote_max);
        assert!(r.sample.data().iter().all(|v| (0.0..=1.0).contains(v)));
        if r.success {
            let (i, c) = (r.identifying_label.unwrap(), r.contrast_label.unwrap());
            assert_ne!(i, c);
            let ma = r.identified_ma.unwrap() as usize;
            assert_eq!(forward(&m, &r.sample, strategies[ma]).unwrap().label, i);
            for (k, &s) in strategies.iter().enumerate() {
                if k != ma {
                    assert_ne!(forward(&m, &r.sample, s).unwrap().label, i);
                }
            }
        }
        // every query round after the entry check touches every oracle
        assert!(r.queries.predict_count >= strategies.len() as u64);
    }
}

#[test]
fn two_oracles_per_ma_need_the_whole_ma() {
    let m = toy_model();
    let cfg = SearchConfig::default();
    let strategies = [S::Sequential, S::Sequential, S::KahanCompensated, S::KahanCompensated];
    let mut oracles: Vec<telltale::oracle::BoxedOracle> = strategies
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            Box::new(telltale::oracle::LocalOracle::new(i, (i / 2) as u32, m.clone(), s)) as telltale::oracle::BoxedOracle
        })
        .collect();
    let successes = (0..10)
        .map(|seed| generate(&mut oracles, 0, &shape_sample(seed).input, &cfg).unwrap())
        .filter(|r| r.success)
        .count();
    assert!(successes > 0);
}
