mod common;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{abs_error, default_pairs, exact_sum, format_witness, load_witnesses, witness_path, Witness};
use telltale::numerics::{reduce_sum, AccumulationStrategy};

fn errors(values: &[f32]) -> (BigInt, Vec<BigInt>) {
    let exact = exact_sum(values);
    let errs = AccumulationStrategy::DEFAULTS
        .iter()
        .map(|&s| abs_error(reduce_sum(values, s), &exact))
        .collect();
    (exact, errs)
}

fn kahan_error(values: &[f32]) -> BigInt {
    let exact = exact_sum(values);
    abs_error(reduce_sum(values, AccumulationStrategy::KahanCompensated), &exact)
}

#[test]
fn committed_witnesses_cover_every_pair() {
    let witnesses = load_witnesses();
    for (a, b) in default_pairs() {
        let w = witnesses
            .iter()
            .find(|w| (w.a, w.b) == (a, b))
            .unwrap_or_else(|| panic!("no witness for {a} / {b}"));
        let (ra, rb) = (reduce_sum(&w.values, a), reduce_sum(&w.values, b));
        assert_ne!(ra.to_bits(), rb.to_bits(), "{a} / {b} agree on their witness");
    }
}

#[test]
fn compensated_sum_is_never_worse_on_witnesses() {
    for w in load_witnesses() {
        let (_, errs) = errors(&w.values);
        let kahan = kahan_error(&w.values);
        assert!(errs.iter().all(|e| &kahan <= e), "{}", format_witness(&w));
    }
}

#[test]
fn cancellation_case_matches_exact_sum() {
    let v = [1e8f32, 1.0, 1.0, -1e8];
    assert_eq!(reduce_sum(&v, AccumulationStrategy::Sequential), 0.0);
    assert_eq!(reduce_sum(&v, AccumulationStrategy::KahanCompensated), 2.0);
    assert_eq!(exact_sum(&v), common::scaled(2.0));
}

#[test]
fn exact_oracle_handles_subnormals_and_signs() {
    let tiny = f32::from_bits(1);
    assert_eq!(common::scaled(tiny), BigInt::from(1));
    assert_eq!(common::scaled(-0.0), BigInt::from(0));
    assert_eq!(exact_sum(&[tiny, -tiny, 1.5, -0.5]), common::scaled(1.0));
}

fn random_vector(rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = rng.random_range(9..=24);
    (0..n)
        .map(|_| {
            let mag = rng.random_range(1.0f32..2.0) * 2f32.powi(rng.random_range(-12..24));
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

/// Rewrites the committed witness file. Run with `--ignored` after changing a strategy.
#[test]
#[ignore]
fn regenerate_witnesses() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut lines = vec!["# divergence witnesses: strategy strategy f32-bits...".to_string()];
    for (a, b) in default_pairs() {
        let w = if (a, b) == (AccumulationStrategy::Sequential, AccumulationStrategy::KahanCompensated) {
            Witness {
                a,
                b,
                values: vec![1e8, 1.0, 1.0, -1e8],
            }
        } else {
            loop {
                let values = random_vector(&mut rng);
                let differ = reduce_sum(&values, a).to_bits() != reduce_sum(&values, b).to_bits();
                let (_, errs) = errors(&values);
                let kahan = kahan_error(&values);
                if differ && errs.iter().all(|e| &kahan <= e) {
                    break Witness { a, b, values };
                }
            }
        };
        lines.push(format_witness(&w));
    }
    std::fs::write(witness_path(), lines.join("\n") + "\n").unwrap();
}
