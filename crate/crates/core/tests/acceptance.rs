mod common;

use std::time::{Duration, Instant};

use rand::Rng;

use bpl_core::config::RunConfig;
use bpl_core::exec::Exec;
use bpl_core::files::Suite;
use bpl_core::grammar::{enumerate_support, log_prior, sample_lsystem, MetaGrammar};
use bpl_core::harness::{
    evaluate_generation, modified_hausdorff, nonrecursive_predictive, prefers_all_off, run_classification,
    run_generation, simulate_generation, simulate_participants, Condition, Euclidean, Model, ModifiedHausdorff,
};
use bpl_core::inference::{classify_with_state, ideal_observer};
use bpl_core::lsystem::{expand_once_capped, expand_to_depth_capped, SymbolString};
use bpl_core::render::Resolution;
use bpl_core::seed;

use common::*;

const IDEAL_STEPS: usize = 20_000;
const IDEAL_CHAINS: usize = 4;
const DOSE_SEEDS: u64 = 10;
const CLS_CHECKPOINTS: [usize; 12] = [1, 30, 40, 80, 100, 160, 240, 400, 600, 1000, 2000, 20_000];
const CLS_MONOTONE: [usize; 5] = [1, 30, 240, 2000, 20_000];
const GEN_CHECKPOINTS: [usize; 6] = [1, 40, 80, 160, 240, 400];

#[derive(Default)]
struct Gate {
    failed: usize,
}

impl Gate {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.failed += !pass as usize;
    }
}

fn pct(x: f64) -> f64 {
    100.0 * x
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ideal_observer_and_depths(gate: &mut Gate, suite: &Suite, g: &MetaGrammar) {
    let start = Instant::now();
    let mut correct = 0;
    let mut depth_ok = 0;
    let mut block = 0;
    for (t, trial) in suite.classification.iter().enumerate() {
        let problem = trial.problem(g, &suite.render).unwrap();
        let best = ideal_observer(&problem, IDEAL_CHAINS, IDEAL_STEPS, seed::derive(0, &[t as u64]), Exec::Parallel);
        let (choice, _) = classify_with_state(&best, &problem, &trial.candidates).unwrap();
        correct += (choice == trial.truth_index) as usize;
        if trial.condition == Condition::Block {
            block += 1;
            depth_ok += (best.depth == Some(2) && best.lsystem.f_rule.count_f() > 0) as usize;
        }
    }
    let model = Model::Bpl { steps: IDEAL_STEPS, chains: IDEAL_CHAINS };
    let gen = run_generation(&suite.generation, g, &suite.render, model, 0, Exec::Parallel).unwrap();
    let elapsed = start.elapsed();
    let cls = correct as f64 / suite.classification.len() as f64;
    gate.check(
        "ideal observer ceiling",
        cls == 1.0 && gen.mean_accuracy() == 1.0 && elapsed <= Duration::from_secs(30 * 60),
        format!(
            "classification {:.1}% ({correct}/{}), generation {:.1}%, {:.0}s",
            pct(cls),
            suite.classification.len(),
            pct(gen.mean_accuracy()),
            elapsed.as_secs_f64()
        ),
    );
    gate.check(
        "depth identification",
        depth_ok >= 22,
        format!("{depth_ok}/{block} block posterior modes recursive at depth 2"),
    );
}

fn recursion_necessity(gate: &mut Gate, suite: &Suite, g: &MetaGrammar) {
    let cls = run_classification(&suite.classification, g, &suite.render, Model::Nonrecursive, 0, Exec::Parallel).unwrap();
    let gen = run_generation(&suite.generation, g, &suite.render, Model::Nonrecursive, 0, Exec::Parallel).unwrap();
    let all_off = suite
        .generation
        .iter()
        .filter(|t| {
            let predictive = nonrecursive_predictive(t);
            prefers_all_off(t, |img| Ok(predictive.log_likelihood(img)?)).unwrap()
        })
        .count();
    let acc = pct(cls.mean_accuracy());
    gate.check(
        "recursion necessity",
        (20.0..=45.0).contains(&acc) && gen.mean_accuracy() == 0.0 && all_off == suite.generation.len(),
        format!(
            "nonrecursive classification {acc:.1}%, generation {:.1}%, all-off preferred on {all_off}/{}",
            pct(gen.mean_accuracy()),
            suite.generation.len()
        ),
    );
}

fn baselines(gate: &mut Gate, suite: &Suite, g: &MetaGrammar) {
    let mut details = Vec::new();
    let mut pass = true;
    for (name, metric) in [("euclidean", &Euclidean as &dyn bpl_core::harness::SimilarityMetric), ("hausdorff", &ModifiedHausdorff)] {
        let cls = run_classification(&suite.classification, g, &suite.render, Model::Metric(metric), 0, Exec::Parallel).unwrap();
        let gen = run_generation(&suite.generation, g, &suite.render, Model::Metric(metric), 0, Exec::Parallel).unwrap();
        let acc = pct(cls.mean_accuracy());
        pass &= (10.0..=45.0).contains(&acc) && gen.mean_accuracy() == 0.0;
        details.push(format!("{name} {acc:.1}%/{:.1}%", pct(gen.mean_accuracy())));
    }
    let random =
        run_classification(&suite.classification, g, &suite.render, Model::Random { participants: 1000 }, 0, Exec::Parallel)
            .unwrap();
    let r = pct(random.mean_accuracy());
    pass &= (r - 100.0 / 6.0).abs() <= 3.0;
    details.push(format!("random {r:.1}%"));
    gate.check("baseline failure", pass, details.join(", "));
}

fn dose_response(gate: &mut Gate, suite: &Suite, g: &MetaGrammar) {
    let mut cls = vec![0.0; CLS_CHECKPOINTS.len()];
    let mut gen = vec![0.0; GEN_CHECKPOINTS.len()];
    for s in 0..DOSE_SEEDS {
        let per = simulate_participants(&suite.classification, g, &suite.render, &CLS_CHECKPOINTS, 2, s, Exec::Parallel).unwrap();
        for (k, row) in per.iter().enumerate() {
            cls[k] += pct(mean(row)) / DOSE_SEEDS as f64;
        }
        let per = simulate_generation(&suite.generation, g, &suite.render, &GEN_CHECKPOINTS, 3, s, Exec::Parallel).unwrap();
        for (k, row) in per.iter().enumerate() {
            gen[k] += pct(mean(row)) / DOSE_SEEDS as f64;
        }
    }
    let at = |k: usize| cls[CLS_CHECKPOINTS.iter().position(|&c| c == k).unwrap()];
    let monotone = CLS_MONOTONE.windows(2).all(|w| at(w[1]) >= at(w[0]) - 2.0);
    let cls_hit = CLS_CHECKPOINTS
        .iter()
        .zip(&cls)
        .any(|(&c, &a)| (100..=1000).contains(&c) && (a - 64.5).abs() <= 10.0);
    let gen_hit = GEN_CHECKPOINTS
        .iter()
        .zip(&gen)
        .any(|(&c, &a)| (40..=400).contains(&c) && (a - 58.2).abs() <= 10.0);
    let show = |cs: &[usize], v: &[f64]| cs.iter().zip(v).map(|(c, a)| format!("{c}:{a:.1}")).collect::<Vec<_>>().join(" ");
    gate.check(
        "dose-response",
        monotone && cls_hit && gen_hit,
        format!(
            "classification [{}] monotone={monotone} band={cls_hit}; generation [{}] band={gen_hit}",
            show(&CLS_CHECKPOINTS, &cls),
            show(&GEN_CHECKPOINTS, &gen)
        ),
    );
}

fn exactness_gate(gate: &mut Gate) {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for (i, (name, problem)) in exactness_problems().iter().enumerate() {
        let e = exactness(problem, 100_000, 11 + i as u64);
        pass &= e.hypotheses <= 50 && !e.left_support && e.tv <= 0.02;
        details.push(format!("{name} tv={:.4} ({} hypotheses)", e.tv, e.hypotheses));
    }
    let elapsed = start.elapsed();
    pass &= elapsed <= Duration::from_secs(120);
    details.push(format!("{:.1}s", elapsed.as_secs_f64()));
    gate.check("inference exactness", pass, details.join(", "));
}

fn oracles(gate: &mut Gate) {
    let g = MetaGrammar::default_grammar();
    let mut rng = seed::rng(2024);
    let mut expand_ok = 0;
    for case in 0..200 {
        let (l, _) = sample_lsystem(&g, &mut rng, false).unwrap();
        let input: SymbolString = if case % 2 == 0 {
            expand_to_depth_capped(&l, rng.random_range(0..3), usize::MAX).unwrap()
        } else {
            let n = rng.random_range(1..30);
            (0..n).map(|_| ['F', 'G', '+', '-'][rng.random_range(0..4)]).collect::<String>().parse().unwrap()
        };
        let out = expand_once_capped(&input, &l, usize::MAX).unwrap();
        let naive = naive_rewrite(&input.to_string(), &l.f_rule.to_string(), &l.g_rule.to_string());
        expand_ok += (out.to_string() == naive) as usize;
    }

    let res = Resolution::square(3);
    let images: Vec<_> = (1..512).map(|b| image_from_bits(b, res)).collect();
    let mut mhd_bad = 0;
    for a in &images {
        for b in &images {
            mhd_bad += (modified_hausdorff(a, b).unwrap() != brute_mhd(a, b)) as usize;
        }
    }

    let mut prior_err: f64 = 0.0;
    for text in [SMALL, AMBIGUOUS, WITH_EMPTY] {
        let g = MetaGrammar::parse(text).unwrap();
        let mass = derivation_mass(&g);
        let support = enumerate_support(&g, 16, 1000).unwrap();
        let mut total = 0.0;
        for (l, _) in &support {
            let p = log_prior(&g, l).unwrap().exp();
            let expected = mass.get(&l.f_rule.to_string()).copied().unwrap_or(0.0) / g.angles().len() as f64;
            prior_err = prior_err.max((p - expected).abs());
            total += p;
        }
        prior_err = prior_err.max((total - 1.0).abs());
        if support.len() != mass.len() * g.angles().len() {
            prior_err = f64::INFINITY;
        }
    }

    gate.check(
        "oracle equivalence",
        expand_ok == 200 && mhd_bad == 0 && prior_err <= 1e-12,
        format!(
            "expansion {expand_ok}/200, hausdorff mismatches {mhd_bad}/{}, prior max error {prior_err:.1e}",
            images.len() * images.len()
        ),
    );
}

fn all_off_figure(gate: &mut Gate, suite: &Suite) {
    let acc: Vec<f64> = suite
        .generation
        .iter()
        .map(|t| evaluate_generation(&vec![false; t.m()], t).unwrap().segment_accuracy)
        .collect();
    let a = pct(mean(&acc));
    gate.check("all-off segment accuracy", (50.0..=65.0).contains(&a), format!("{a:.1}%"));
}

fn main() {
    let suite = Suite::sample(&RunConfig::default(), &Condition::ALL).unwrap();
    let g = MetaGrammar::default_grammar();
    let mut gate = Gate::default();
    oracles(&mut gate);
    exactness_gate(&mut gate);
    recursion_necessity(&mut gate, &suite, &g);
    baselines(&mut gate, &suite, &g);
    all_off_figure(&mut gate, &suite);
    ideal_observer_and_depths(&mut gate, &suite, &g);
    dose_response(&mut gate, &suite, &g);
    if gate.failed > 0 {
        println!("{} acceptance criteria failed", gate.failed);
        std::process::exit(1);
    }
}
