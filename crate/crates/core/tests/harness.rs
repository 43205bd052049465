mod common;

use std::sync::OnceLock;

use bpl_core::config::RunConfig;
use bpl_core::exec::Exec;
use bpl_core::files::{read_suite, write_suite, Suite};
use bpl_core::grammar::MetaGrammar;
use bpl_core::harness::{
    anchor_neighbourhood, euclidean_distance, evaluate_generation, generate_metric, modified_hausdorff,
    nonrecursive_predictive, prefers_all_off, run_classification, run_generation, Condition, Euclidean, Model,
    ModifiedHausdorff, SimilarityMetric, CANDIDATES,
};
use bpl_core::inference::{greedy_assignment, SegmentOrder};
use bpl_core::lsystem::expand_to_depth_capped;
use bpl_core::render::{BinaryImage, Resolution};
use proptest::prelude::*;

use common::{brute_mhd, image_from_bits};

fn suite() -> &'static Suite {
    static SUITE: OnceLock<Suite> = OnceLock::new();
    SUITE.get_or_init(|| Suite::sample(&RunConfig::default(), &Condition::ALL).unwrap())
}

#[test]
fn default_suite_has_the_experiment_sizes() {
    let s = suite();
    assert_eq!(s.classification.len(), 48);
    assert_eq!(s.generation.len(), 26);
    for c in Condition::ALL {
        assert_eq!(s.classification.iter().filter(|t| t.condition == c).count(), 24);
        assert_eq!(s.generation.iter().filter(|t| t.condition == c).count(), 13);
    }
    for t in &s.classification {
        assert_eq!(t.candidates.len(), CANDIDATES);
        let depths: Vec<u8> = t.observed.iter().map(|(d, _)| *d).collect();
        assert_eq!(depths, if t.condition == Condition::Incremental { vec![0, 1, 2] } else { vec![0, 2] });
    }
    for t in &s.generation {
        assert!((22..=125).contains(&t.m()), "{} has {} segments", t.id, t.m());
    }
}

#[test]
fn suites_are_deterministic_per_seed() {
    let again = Suite::sample(&RunConfig::default(), &Condition::ALL).unwrap();
    let s = suite();
    assert_eq!(again.classification, s.classification);
    let ids = |v: &Suite| v.generation.iter().map(|t| (t.id.clone(), t.concept.clone())).collect::<Vec<_>>();
    assert_eq!(ids(&again), ids(s));
}

#[test]
fn true_candidate_is_the_unique_best_under_the_true_program() {
    let s = suite();
    for t in &s.classification {
        let s3 = expand_to_depth_capped(&t.concept, 3, usize::MAX).unwrap();
        let predictive = s.render.mean_image(&s3, t.concept.angle_deg);
        let scores: Vec<f64> = t.candidates.iter().map(|c| predictive.log_likelihood(c).unwrap()).collect();
        for (i, v) in scores.iter().enumerate() {
            if i != t.truth_index {
                assert!(*v < scores[t.truth_index], "{}: candidate {i} ties or beats the truth", t.id);
            }
        }
    }
}

#[test]
fn greedy_pass_from_the_truth_draws_the_true_form() {
    let s = suite();
    for t in &s.generation {
        let truth = t.interface.truth_assignment();
        let predictive = t.interface.render(&truth).unwrap();
        for (order, seed) in [(SegmentOrder::Fixed, 0), (SegmentOrder::Random, 99)] {
            let r = greedy_assignment(&t.interface, &predictive, order, seed);
            assert_eq!(r.evaluations, t.m());
            assert_eq!(r.renders, t.m() + 1);
            assert_eq!(t.interface.image(&r.assignment).unwrap(), t.truth_image, "{}", t.id);
        }
    }
}

#[test]
fn visual_baselines_and_the_nonrecursive_model_prefer_no_growth() {
    let s = suite();
    for t in &s.generation {
        let target = t.interface.display_image();
        for metric in [&Euclidean as &dyn SimilarityMetric, &ModifiedHausdorff] {
            assert!(prefers_all_off(t, |img| Ok(-metric.distance(img, &target)?)).unwrap(), "{} {}", t.id, metric.name());
            assert_eq!(generate_metric(t, metric).unwrap(), vec![false; t.m()]);
        }
        let predictive = nonrecursive_predictive(t);
        assert!(prefers_all_off(t, |img| Ok(predictive.log_likelihood(img)?)).unwrap(), "{} nonrecursive", t.id);
    }
}

#[test]
fn all_off_scores_the_fraction_of_dormant_segments() {
    for t in &suite().generation {
        let truth = t.interface.truth_assignment();
        let off = truth.iter().filter(|b| !**b).count() as f64 / t.m() as f64;
        let score = evaluate_generation(&vec![false; t.m()], t).unwrap();
        assert_eq!(score.segment_accuracy, off);
        assert!(!score.exact_visual_match);
        let exact = evaluate_generation(&truth, t).unwrap();
        assert_eq!(exact.segment_accuracy, 1.0);
        assert!(exact.exact_visual_match);
    }
}

#[test]
fn random_classifier_is_at_chance() {
    let s = suite();
    let g = MetaGrammar::default_grammar();
    let r = run_classification(&s.classification, &g, &s.render, Model::Random { participants: 1000 }, 0, Exec::Sequential)
        .unwrap();
    assert!((r.mean_accuracy() - 1.0 / 6.0).abs() < 0.02, "{}", r.mean_accuracy());
    assert!(r.rows.iter().all(|row| row.responses == 1000));
}

#[test]
fn execution_policies_give_identical_reports() {
    let s = suite();
    let g = MetaGrammar::default_grammar();
    let trials = &s.generation[..3];
    let model = Model::Limited { steps: 30, participants: 3 };
    let a = run_generation(trials, &g, &s.render, model, 4, Exec::Sequential).unwrap();
    let b = run_generation(trials, &g, &s.render, model, 4, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn suites_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = suite();
    write_suite(dir.path(), s).unwrap();
    let back = read_suite(dir.path()).unwrap();
    assert_eq!(back.render, s.render);
    assert_eq!(back.classification, s.classification);
    assert_eq!(back.generation.len(), s.generation.len());
    for (a, b) in back.generation.iter().zip(&s.generation) {
        assert_eq!((&a.id, &a.concept, a.condition, &a.observed, &a.truth_image), (&b.id, &b.concept, b.condition, &b.observed, &b.truth_image));
        assert_eq!(a.interface.truth_assignment(), b.interface.truth_assignment());
    }
}

#[test]
fn modified_hausdorff_matches_brute_force_on_all_3x3_pairs() {
    let res = Resolution::square(3);
    let images: Vec<BinaryImage> = (1..512).map(|b| image_from_bits(b, res)).collect();
    for a in &images {
        for b in &images {
            assert_eq!(modified_hausdorff(a, b).unwrap(), brute_mhd(a, b));
        }
    }
    assert!(modified_hausdorff(&image_from_bits(0, res), &images[0]).is_err());
}

proptest! {
    #[test]
    fn anchor_neighbourhood_is_both_anchors_and_their_flips(m in 1usize..40) {
        let n = anchor_neighbourhood(m);
        prop_assert_eq!(n.len(), 2 * (m + 1));
        for a in &n {
            let on = a.iter().filter(|b| **b).count();
            prop_assert!(on <= 1 || on >= m - 1);
        }
    }

    #[test]
    fn segment_accuracy_is_one_minus_normalized_hamming(flips in proptest::collection::vec(any::<bool>(), 22..=22)) {
        let t = suite().generation.iter().find(|t| t.m() == 22).unwrap();
        let truth = t.interface.truth_assignment();
        let response: Vec<bool> = truth.iter().zip(&flips).map(|(a, f)| a ^ f).collect();
        let hamming = flips.iter().filter(|f| **f).count();
        let score = evaluate_generation(&response, t).unwrap();
        prop_assert!((score.segment_accuracy - (1.0 - hamming as f64 / 22.0)).abs() < 1e-12);
        if hamming == 0 {
            prop_assert!(score.exact_visual_match);
        }
    }

    #[test]
    fn euclidean_distance_is_a_symmetric_count(a in 0u32..512, b in 0u32..512) {
        let res = Resolution::square(3);
        let (x, y) = (image_from_bits(a, res), image_from_bits(b, res));
        let d = euclidean_distance(&x, &y).unwrap();
        prop_assert_eq!(d, euclidean_distance(&y, &x).unwrap());
        prop_assert!((d * d - (a ^ b).count_ones() as f64).abs() < 1e-9);
    }
}
