//! Randomized property checks across the fitting and codelength machinery.
//!
//! Seeded ChaCha streams keep every run identical; sizes are chosen so the
//! whole file stays fast in debug builds.

use maxnml_core::*;
use rand_core::{Rng, SeedableRng};

type TestRng = rand_chacha::ChaCha8Rng;

fn uniform_index(rng: &mut TestRng, k: usize) -> usize {
    ((rng.next_u64() as u128 * k as u128) >> 64) as usize
}

fn uniform_f64(rng: &mut TestRng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// A strictly positive random distribution over k symbols.
fn random_interior_distribution(rng: &mut TestRng, k: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..k).map(|_| 0.05 + uniform_f64(rng)).collect();
    let total: f64 = p.iter().sum();
    for v in p.iter_mut() {
        *v /= total;
    }
    p
}

fn moments_of(dist: &[f64], table: &FeatureTable) -> MomentVector {
    let m = table.num_features();
    let mut means = vec![0.0; m];
    for (j, &pj) in dist.iter().enumerate() {
        for k in 0..m {
            means[k] += pj * table.value(j, k);
        }
    }
    MomentVector::new(means)
}

#[test]
fn dual_gradient_matches_finite_differences_on_random_instances() {
    let mut rng = TestRng::seed_from_u64(101);
    for _ in 0..50 {
        let k = 2 + uniform_index(&mut rng, 4); // 2..=5
        let m = 1 + uniform_index(&mut rng, (k - 1).min(3));
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let table = build_moment_features(&alphabet, m).unwrap();
        let dist = random_interior_distribution(&mut rng, k);
        let moments = moments_of(&dist, &table);
        let lambda: Vec<f64> = (0..m)
            .map(|_| (uniform_f64(&mut rng) - 0.5) * 1.2)
            .collect();

        let (_, grad) = dual_value_and_gradient(&table, &moments, &lambda).unwrap();
        let h = 1e-6;
        for i in 0..m {
            let mut lp = lambda.clone();
            lp[i] += h;
            let mut lm = lambda.clone();
            lm[i] -= h;
            let (vp, _) = dual_value_and_gradient(&table, &moments, &lp).unwrap();
            let (vm, _) = dual_value_and_gradient(&table, &moments, &lm).unwrap();
            let fd = (vp - vm) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(1e-8);
            assert!(rel < 1e-5, "k={k} m={m} comp {i}: {} vs {fd}", grad[i]);
        }
    }
}

#[test]
fn maximum_likelihood_equals_negative_n_entropy() {
    let mut rng = TestRng::seed_from_u64(202);
    for _ in 0..60 {
        let k = 2 + uniform_index(&mut rng, 3);
        let n = 3 + uniform_index(&mut rng, 10);
        let m = 1 + uniform_index(&mut rng, (k - 1).min(2));
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let table = build_moment_features(&alphabet, m).unwrap();
        let sample = Sample::new((0..n).map(|_| uniform_index(&mut rng, k)).collect(), k).unwrap();
        let moments = empirical_moments(&sample, &table).unwrap();
        let fit = fit_maxent(&table, &moments).unwrap();
        let ll = log_likelihood(&fit, &sample);
        assert!(
            (ll + n as f64 * fit.entropy_nats()).abs() < 1e-8,
            "loglik {ll} vs -nH {}",
            -(n as f64) * fit.entropy_nats()
        );
    }
}

#[test]
fn nested_features_never_increase_entropy() {
    let mut rng = TestRng::seed_from_u64(303);
    for _ in 0..60 {
        let k = 2 + uniform_index(&mut rng, 4);
        let m_big = 1 + uniform_index(&mut rng, (k - 1).min(3));
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let big = build_moment_features(&alphabet, m_big).unwrap();
        let n = 3 + uniform_index(&mut rng, 8);
        let sample = Sample::new((0..n).map(|_| uniform_index(&mut rng, k)).collect(), k).unwrap();

        let mut prev = f64::INFINITY;
        for m in 0..=m_big {
            let table = big.prefix(m).unwrap();
            let moments = empirical_moments(&sample, &table).unwrap();
            let fit = fit_maxent(&table, &moments).unwrap();
            assert!(
                fit.entropy_nats() <= prev + 1e-10,
                "entropy rose from {prev} to {} at m={m}",
                fit.entropy_nats()
            );
            prev = fit.entropy_nats();
        }
    }
}

#[test]
fn saturated_features_reproduce_the_empirical_type() {
    let mut rng = TestRng::seed_from_u64(404);
    for _ in 0..40 {
        let k = 2 + uniform_index(&mut rng, 3);
        let n = 4 + uniform_index(&mut rng, 12);
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let sample = Sample::new((0..n).map(|_| uniform_index(&mut rng, k)).collect(), k).unwrap();
        let counts = sample.counts(k);

        for table in [
            build_moment_features(&alphabet, k - 1).unwrap(),
            FeatureTable::indicators(&alphabet),
        ] {
            let moments = empirical_moments(&sample, &table).unwrap();
            let fit = fit_maxent(&table, &moments).unwrap();
            for j in 0..k {
                let type_p = counts[j] as f64 / n as f64;
                assert!(
                    (fit.probs()[j] - type_p).abs() < 1e-9,
                    "k={k} n={n} symbol {j}: {} vs type {type_p}",
                    fit.probs()[j]
                );
            }
        }
    }
}

#[test]
fn generative_oracle_equivalence_small_grid() {
    let caps = Caps::default();
    for k in 2..=3usize {
        let alphabet = Alphabet::integer_levels(k).unwrap();
        for m in 0..=2usize {
            let table = build_moment_features(&alphabet, m).unwrap();
            for n in 1..=6usize {
                let enum_v = comp_exact_enum(&table, &alphabet, n, &caps).unwrap();
                let types_v = comp_by_types(&table, &alphabet, n, &caps).unwrap();
                assert!(
                    (enum_v - types_v).abs() < 1e-9,
                    "K={k} m={m} n={n}: enum {enum_v} vs types {types_v}"
                );
            }
        }
    }
}

#[test]
fn err_decreases_and_comp_increases_with_nesting() {
    let caps = Caps::default();
    let mut rng = TestRng::seed_from_u64(505);
    for _ in 0..60 {
        let k = 2 + uniform_index(&mut rng, 4); // 2..=5
        let n = 2 + uniform_index(&mut rng, 7); // 2..=8
        let m_max = (k - 1).min(3);
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let sample = Sample::new((0..n).map(|_| uniform_index(&mut rng, k)).collect(), k).unwrap();

        let mut prev_err = f64::INFINITY;
        let mut prev_comp = f64::NEG_INFINITY;
        for m in 0..=m_max {
            let table = build_moment_features(&alphabet, m).unwrap();
            let err = err_codelength(&table, &sample).unwrap();
            let comp = comp_by_types(&table, &alphabet, n, &caps).unwrap();
            assert!(
                err <= prev_err + 1e-8,
                "ERR rose at m={m}: {prev_err} -> {err}"
            );
            assert!(
                comp >= prev_comp - 1e-8,
                "COMP fell at m={m}: {prev_comp} -> {comp}"
            );
            assert!(comp >= 0.0);
            prev_err = err;
            prev_comp = comp;
        }
    }
}

#[test]
fn saturated_comp_matches_direct_multinomial_summation() {
    // independent oracle: Σ over types of exp(ln multiplicity + Σ k_j ln(k_j/n))
    let caps = Caps::default();
    for k in 2..=4usize {
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let table = FeatureTable::indicators(&alphabet);
        for n in [1usize, 2, 5, 11, 20] {
            let mut acc: Vec<f64> = Vec::new();
            for tc in type_classes(n, k) {
                let mut ll = 0.0;
                for &c in &tc.counts {
                    if c > 0 {
                        ll += c as f64 * ((c as f64 / n as f64).ln());
                    }
                }
                acc.push(tc.log_multiplicity + ll);
            }
            let max = acc.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let direct = max + acc.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let via_types = comp_by_types(&table, &alphabet, n, &caps).unwrap();
            assert!(
                (direct - via_types).abs() < 1e-9,
                "K={k} n={n}: direct {direct} vs fitted {via_types}"
            );
        }
    }
}

#[test]
fn nml_is_err_plus_nonnegative_comp() {
    let caps = Caps::default();
    let mut rng = TestRng::seed_from_u64(606);
    for _ in 0..40 {
        let k = 2 + uniform_index(&mut rng, 3);
        let n = 2 + uniform_index(&mut rng, 6);
        let m = uniform_index(&mut rng, k.min(3));
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let table = build_moment_features(&alphabet, m).unwrap();
        let sample = Sample::new((0..n).map(|_| uniform_index(&mut rng, k)).collect(), k).unwrap();
        let report =
            nml_codelength(&table, &alphabet, &sample, CompMethod::TypeClasses, &caps).unwrap();
        assert!(report.comp_nats >= 0.0);
        assert!(report.nml_nats >= report.err_nats);
        assert_eq!(report.nml_nats, report.err_nats + report.comp_nats);
    }
}

#[test]
fn monte_carlo_converges_to_the_exact_value() {
    let caps = Caps::default();
    let alphabet = Alphabet::integer_levels(3).unwrap();
    let table = build_moment_features(&alphabet, 1).unwrap();
    let exact = comp_by_types(&table, &alphabet, 10, &caps).unwrap();
    let mut last_err = f64::INFINITY;
    for draws in [1_000u64, 100_000] {
        let (est, stderr) = comp_monte_carlo(&table, &alphabet, 10, draws, 99).unwrap();
        assert!(
            (est - exact).abs() <= 3.0 * stderr,
            "draws={draws}: {est} vs {exact} (stderr {stderr})"
        );
        last_err = last_err.min((est - exact).abs());
    }
    // the heavier run should sit well inside a nat
    assert!(last_err < 0.05);
}

#[test]
fn conditional_gradient_matches_finite_differences_on_random_instances() {
    let mut rng = TestRng::seed_from_u64(707);
    for _ in 0..40 {
        let k = 2 + uniform_index(&mut rng, 2);
        let n = 4 + uniform_index(&mut rng, 8);
        let m = uniform_index(&mut rng, 3);
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let classes = ClassSet::of_size(2).unwrap();
        let table = build_cond_moment_features(&alphabet, &classes, m).unwrap();
        let x = Sample::new((0..n).map(|_| uniform_index(&mut rng, k)).collect(), k).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| uniform_index(&mut rng, 2)).collect();
        let lambda: Vec<f64> = (0..table.num_features())
            .map(|_| (uniform_f64(&mut rng) - 0.5) * 1.5)
            .collect();

        let (_, grad) = cond_value_and_gradient(&table, &x, &labels, &lambda).unwrap();
        let h = 1e-6;
        for i in 0..table.num_features() {
            let mut lp = lambda.clone();
            lp[i] += h;
            let mut lm = lambda.clone();
            lm[i] -= h;
            let (vp, _) = cond_value_and_gradient(&table, &x, &labels, &lp).unwrap();
            let (vm, _) = cond_value_and_gradient(&table, &x, &labels, &lm).unwrap();
            let fd = (vp - vm) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(1e-8);
            assert!(rel < 1e-5, "comp {i}: {} vs {fd}", grad[i]);
        }
    }
}

#[test]
fn conditional_err_identity_on_random_instances() {
    let mut rng = TestRng::seed_from_u64(808);
    for _ in 0..30 {
        let k = 2 + uniform_index(&mut rng, 2);
        let n = 5 + uniform_index(&mut rng, 10);
        let m = uniform_index(&mut rng, 2);
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let classes = ClassSet::of_size(2).unwrap();
        let table = build_cond_moment_features(&alphabet, &classes, m).unwrap();
        let x = Sample::new((0..n).map(|_| uniform_index(&mut rng, k)).collect(), k).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| uniform_index(&mut rng, 2)).collect();

        let err = cond_err_codelength(&table, &x, &labels).unwrap();
        let model = fit_conditional(&table, &x, &labels).unwrap();
        assert!(
            (err + model.log_likelihood(&x, &labels)).abs() < 1e-7,
            "ERR {err} vs -loglik {}",
            -model.log_likelihood(&x, &labels)
        );
    }
}

#[test]
fn conditional_nesting_monotonicity() {
    let caps = Caps::default();
    let mut rng = TestRng::seed_from_u64(909);
    for _ in 0..25 {
        let k = 2 + uniform_index(&mut rng, 2);
        let n = 4 + uniform_index(&mut rng, 5);
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let classes = ClassSet::of_size(2).unwrap();
        let x = Sample::new((0..n).map(|_| uniform_index(&mut rng, k)).collect(), k).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| uniform_index(&mut rng, 2)).collect();

        let mut prev_err = f64::INFINITY;
        let mut prev_comp = f64::NEG_INFINITY;
        for m in 0..=2usize {
            let table = build_cond_moment_features(&alphabet, &classes, m).unwrap();
            let err = cond_err_codelength(&table, &x, &labels).unwrap();
            let comp = cond_comp_grouped(&table, &x, &caps).unwrap();
            assert!(err <= prev_err + 1e-8, "cond ERR rose at m={m}");
            assert!(comp >= prev_comp - 1e-8, "cond COMP fell at m={m}");
            prev_err = err;
            prev_comp = comp;
        }
    }
}

#[test]
fn nml_beats_the_uncompressed_baseline_on_informative_data() {
    let caps = Caps::default();
    let alphabet = Alphabet::integer_levels(2).unwrap();
    let classes = ClassSet::of_size(2).unwrap();

    // strong x -> c dependence: labels copy the covariate with one flip
    let x = Sample::new(vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 2).unwrap();
    let mut labels = x.indices().to_vec();
    labels[11] = 0;
    let t1 = build_cond_moment_features(&alphabet, &classes, 1).unwrap();
    let informative = cond_nml(&t1, &x, &labels, CompMethod::TypeClasses, &caps).unwrap();
    assert!(
        informative.nml_nats < 12.0 * 2.0f64.ln(),
        "NML {} should beat n ln 2 = {}",
        informative.nml_nats,
        12.0 * 2.0f64.ln()
    );

    // pure-noise labels: the m >= 1 model pays its complexity premium
    let noise = vec![0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0];
    let t0 = build_cond_moment_features(&alphabet, &classes, 0).unwrap();
    let base = cond_nml(&t0, &x, &noise, CompMethod::TypeClasses, &caps).unwrap();
    let rich = cond_nml(&t1, &x, &noise, CompMethod::TypeClasses, &caps).unwrap();
    assert!(
        rich.nml_nats > base.nml_nats,
        "m=1 on noise ({}) should exceed m=0 ({})",
        rich.nml_nats,
        base.nml_nats
    );
}

#[test]
fn constant_complexity_reduces_nml_selection_to_minimax() {
    let caps = Caps::default();
    let mut rng = TestRng::seed_from_u64(1111);
    for round in 0..40 {
        let k = 2 + uniform_index(&mut rng, 3);
        let n = 3 + uniform_index(&mut rng, 8);
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let m_max = (k - 1).min(3);
        let candidates: Vec<(String, FeatureTable)> = (0..=m_max)
            .map(|m| {
                (
                    format!("m{m}"),
                    build_moment_features(&alphabet, m).unwrap(),
                )
            })
            .collect();
        let set = CandidateSet::new(alphabet, candidates).unwrap();
        let sample = Sample::new((0..n).map(|_| uniform_index(&mut rng, k)).collect(), k).unwrap();

        let shared = uniform_f64(&mut rng) * 5.0;
        let nml = select_by_nml(&set, &sample, CompMethod::Constant(shared), &caps).unwrap();
        let minimax = select_by_minimax(&set, &sample).unwrap();
        assert_eq!(
            nml.chosen_id, minimax.chosen_id,
            "round {round}: constant-COMP NML chose {} but minimax chose {}",
            nml.chosen_id, minimax.chosen_id
        );
    }
}

#[test]
fn minimax_never_strictly_prefers_the_smaller_nested_set() {
    let mut rng = TestRng::seed_from_u64(1212);
    for _ in 0..40 {
        let k = 2 + uniform_index(&mut rng, 3);
        let n = 3 + uniform_index(&mut rng, 8);
        let alphabet = Alphabet::integer_levels(k).unwrap();
        let m_small = uniform_index(&mut rng, (k - 1).min(2));
        let m_big = m_small + 1;
        let sample = Sample::new((0..n).map(|_| uniform_index(&mut rng, k)).collect(), k).unwrap();
        let t_small = build_moment_features(&alphabet, m_small).unwrap();
        let t_big = build_moment_features(&alphabet, m_big).unwrap();
        let h_small = fit_maxent(&t_small, &empirical_moments(&sample, &t_small).unwrap())
            .unwrap()
            .entropy_nats();
        let h_big = fit_maxent(&t_big, &empirical_moments(&sample, &t_big).unwrap())
            .unwrap()
            .entropy_nats();
        assert!(h_big <= h_small + 1e-10);
    }
}

#[test]
fn selection_is_deterministic() {
    let caps = Caps::default();
    let alphabet = Alphabet::integer_levels(3).unwrap();
    let candidates: Vec<(String, FeatureTable)> = (0..=2usize)
        .map(|m| {
            (
                format!("m{m}"),
                build_moment_features(&alphabet, m).unwrap(),
            )
        })
        .collect();
    let set = CandidateSet::new(alphabet, candidates).unwrap();
    let sample = Sample::new(vec![0, 0, 1, 2, 2, 0], 3).unwrap();
    let a = select_by_nml(&set, &sample, CompMethod::TypeClasses, &caps).unwrap();
    let b = select_by_nml(&set, &sample, CompMethod::TypeClasses, &caps).unwrap();
    assert_eq!(a.chosen_id, b.chosen_id);
    for (ra, rb) in a.per_candidate.iter().zip(&b.per_candidate) {
        assert_eq!(
            ra.report.as_ref().map(|r| r.nml_nats).unwrap(),
            rb.report.as_ref().map(|r| r.nml_nats).unwrap()
        );
    }
}
