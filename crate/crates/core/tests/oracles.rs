//! Library results checked against independent, deliberately naive
//! reimplementations.

use leakest::estimators::{exact_estimate, EvalSet};
use leakest::measures::{bayes_risk, expected_error};
use leakest::synth::{self, SpikySpec};
use leakest::{sample, Dataset, EstimatorKind, Metric, NeighborIndex, System};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_bayes_risk(sys: &System<f64>) -> f64 {
    let mut success = 0.0;
    for o in 0..sys.n_objects() {
        let mut best = 0.0f64;
        for s in 0..sys.n_secrets() {
            best = best.max(sys.channel().get(s, o) * sys.prior().get(s));
        }
        success += best;
    }
    1.0 - success
}

#[test]
fn bayes_risk_matches_brute_force_on_random_systems() {
    for seed in 0..20 {
        let sys = synth::random_system::<f64>(20, 20, seed).unwrap();
        let got = bayes_risk(&sys).unwrap();
        let want = naive_bayes_risk(&sys);
        assert!((got - want).abs() <= 1e-12, "seed {seed}: {got} vs {want}");
    }
}

/// Plain majority with the smallest id winning ties.
fn majority(secrets: &[usize]) -> usize {
    let top = secrets.iter().copied().max().unwrap();
    let mut counts = vec![0usize; top + 1];
    for &s in secrets {
        counts[s] += 1;
    }
    let best = *counts.iter().max().unwrap();
    counts.iter().position(|&c| c == best).unwrap()
}

/// k-NN by full sort, following the tie-block procedure step by step.
fn naive_knn(train: &[(usize, Vec<f64>)], q: &[f64], k: usize, metric: &Metric) -> usize {
    let mut by_dist: Vec<(f64, usize)> = train.iter().map(|(s, o)| (metric.dist2(o, q), *s)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = by_dist.len();
    if n <= k || by_dist[k - 1].0 != by_dist[k].0 {
        let first: Vec<usize> = by_dist[..k.min(n)].iter().map(|p| p.1).collect();
        return majority(&first);
    }
    let d = by_dist[k - 1].0;
    let lo = by_dist.iter().position(|p| p.0 == d).unwrap();
    let hi = by_dist.iter().rposition(|p| p.0 == d).unwrap();
    let block: Vec<usize> = by_dist[lo..=hi].iter().map(|p| p.1).collect();
    let mode = majority(&block);
    let mut votes: Vec<usize> = by_dist[..lo].iter().map(|p| p.1).collect();
    votes.resize(k, mode);
    majority(&votes)
}

fn naive_nn(train: &[(usize, Vec<f64>)], q: &[f64], metric: &Metric) -> usize {
    let dmin = train
        .iter()
        .map(|(_, o)| metric.dist2(o, q))
        .fold(f64::INFINITY, f64::min);
    let at_min: Vec<usize> = train
        .iter()
        .filter(|(_, o)| metric.dist2(o, q) == dmin)
        .map(|(s, _)| *s)
        .collect();
    majority(&at_min)
}

fn index_of(train: &[(usize, Vec<f64>)], dim: usize, metric: Metric) -> NeighborIndex {
    let mut ix = NeighborIndex::new(dim, metric).unwrap();
    for (s, o) in train {
        ix.add(*s, o).unwrap();
    }
    ix
}

fn grid_points(dim: usize) -> impl Strategy<Value = Vec<(usize, Vec<f64>)>> {
    // Small integer coordinates make distance ties common.
    prop::collection::vec((0usize..4, prop::collection::vec(0i32..6, dim)), 1..40).prop_map(|v| {
        v.into_iter()
            .map(|(s, o)| (s, o.into_iter().map(f64::from).collect()))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn knn_matches_naive_in_one_dimension(train in grid_points(1), q in -1i32..7, k in 1usize..12) {
        let ix = index_of(&train, 1, Metric::Euclidean);
        let q = [f64::from(q) + 0.5 * f64::from(q % 2)];
        prop_assert_eq!(ix.knn_predict(&q, k).unwrap(), naive_knn(&train, &q, k, &Metric::Euclidean));
        prop_assert_eq!(ix.nn_predict(&q).unwrap(), naive_nn(&train, &q, &Metric::Euclidean));
    }

    #[test]
    fn knn_matches_naive_in_two_dimensions(train in grid_points(2), qx in 0i32..6, qy in 0i32..6, k in 1usize..12) {
        let ix = index_of(&train, 2, Metric::Euclidean);
        let q = [f64::from(qx), f64::from(qy)];
        prop_assert_eq!(ix.knn_predict(&q, k).unwrap(), naive_knn(&train, &q, k, &Metric::Euclidean));
    }

    #[test]
    fn knn_matches_naive_in_five_dimensions(train in grid_points(5), q in prop::collection::vec(0i32..6, 5), k in 1usize..12) {
        let ix = index_of(&train, 5, Metric::Euclidean);
        let q: Vec<f64> = q.into_iter().map(f64::from).collect();
        prop_assert_eq!(ix.knn_predict(&q, k).unwrap(), naive_knn(&train, &q, k, &Metric::Euclidean));
    }

    #[test]
    fn knn_matches_naive_on_a_ring(train in grid_points(1), q in 0i32..6, k in 1usize..12) {
        let ring = Metric::ring(6.0).unwrap();
        let ix = index_of(&train, 1, ring);
        let q = [f64::from(q)];
        prop_assert_eq!(ix.knn_predict(&q, k).unwrap(), naive_knn(&train, &q, k, &ring));
    }
}

#[test]
fn knn_matches_naive_on_continuous_planar_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let train: Vec<(usize, Vec<f64>)> = (0..3000)
        .map(|_| {
            (
                rng.random_range(0..5),
                vec![rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0],
            )
        })
        .collect();
    let ix = index_of(&train, 2, Metric::Euclidean);
    for _ in 0..300 {
        let q = [rng.random::<f64>() * 120.0 - 10.0, rng.random::<f64>() * 120.0 - 10.0];
        for k in [1, 3, 8, 21] {
            assert_eq!(
                ix.knn_predict(&q, k).unwrap(),
                naive_knn(&train, &q, k, &Metric::Euclidean)
            );
        }
    }
}

/// Frequentist rule from raw counts: joint argmax on seen observations,
/// empirical prior argmax elsewhere.
#[test]
fn frequentist_matches_counting_loop() {
    let sys = synth::random_system::<f64>(10, 10, 4).unwrap();
    let data = sample(&sys, 2000, 5).unwrap();
    let ix = NeighborIndex::from_dataset(&data, Metric::Euclidean).unwrap();
    let mut joint = vec![vec![0u32; 10]; 10];
    let mut marginal = [0u32; 10];
    for ex in data.iter() {
        joint[ex.observation[0] as usize][ex.secret] += 1;
        marginal[ex.secret] += 1;
    }
    let prior_best = (0..10).max_by_key(|&s| (marginal[s], std::cmp::Reverse(s))).unwrap();
    for o in 0..12 {
        let want = match joint.get(o) {
            Some(row) if row.iter().any(|&c| c > 0) => (0..10).max_by_key(|&s| (row[s], std::cmp::Reverse(s))).unwrap(),
            _ => prior_best,
        };
        assert_eq!(ix.frequentist_predict(&[o as f64]).unwrap(), want, "o = {o}");
    }
}

#[test]
fn nn_expected_error_matches_exhaustive_sum() {
    let sys = synth::random_system::<f64>(10, 10, 6).unwrap();
    let data = sample(&sys, 500, 7).unwrap();
    let ix = NeighborIndex::from_dataset(&data, Metric::Euclidean).unwrap();
    assert_eq!(ix.n_distinct(), 10, "training must cover every observation");
    let got = expected_error(&sys, |o| ix.nn_predict(&[o as f64]).ok()).unwrap();
    let mut correct = 0.0;
    for o in 0..10 {
        let guess = ix.nn_predict(&[o as f64]).unwrap();
        let p_o: f64 = (0..10).map(|s| sys.joint(s, o)).sum();
        let p_right = sys.joint(guess, o) / p_o;
        correct += p_o * p_right;
    }
    assert!((got - (1.0 - correct)).abs() < 1e-12);
    assert!((exact_estimate(&ix, &sys, EstimatorKind::Nn).unwrap() - got).abs() < 1e-12);
}

/// Exact NN error on spiky after `q/2` examples against Monte-Carlo draws
/// of fresh examples.
#[test]
fn spiky_exact_estimate_matches_monte_carlo() {
    let spec = SpikySpec::new(1000).unwrap();
    let sys = synth::spiky_system::<f64>(&spec).unwrap();
    let train = sample(&sys, 500, 21).unwrap();
    let ix = NeighborIndex::from_dataset(&train, spec.metric()).unwrap();
    let exact = exact_estimate(&ix, &sys, EstimatorKind::Nn).unwrap();
    let fresh = sample(&sys, 100_000, 22).unwrap();
    let wrong = fresh
        .iter()
        .filter(|ex| ix.nn_predict(ex.observation).unwrap() != ex.secret)
        .count();
    let mc = wrong as f64 / 1e5;
    assert!((exact - mc).abs() < 0.01, "{exact} vs {mc}");
}

/// Total variation between the empirical joint and the true joint, for a
/// draw of `n` pairs.
fn joint_tv(sys: &System<f64>, pairs: impl Iterator<Item = (usize, usize)>, n: usize) -> f64 {
    let m = sys.n_objects();
    let mut counts = vec![0u32; sys.n_secrets() * m];
    for (s, o) in pairs {
        counts[s * m + o] += 1;
    }
    let mut tv = 0.0;
    for s in 0..sys.n_secrets() {
        for o in 0..m {
            tv += (sys.joint(s, o) - f64::from(counts[s * m + o]) / n as f64).abs();
        }
    }
    tv / 2.0
}

/// The empirical joint of a correct sampler is far from 0.02 in total
/// variation at this size (about 6000 cells carry mass), so the sampler is
/// compared with the noise floor of an independent linear-scan sampler.
#[test]
fn sampled_joint_matches_independent_sampler() {
    let sys = synth::geometric_system::<f64>(&synth::GeometricSpec::new(100, 10_000, 0.1)).unwrap();
    let n = 100_000;
    let data: Dataset<f64> = sample(&sys, n, 1).unwrap();
    // Geometric observations are the positions 1..=|O|.
    let ours = joint_tv(&sys, data.iter().map(|e| (e.secret, e.observation[0] as usize - 1)), n);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let naive = joint_tv(
        &sys,
        (0..n).map(|_| {
            let s = rng.random_range(0..100);
            let mut u: f64 = rng.random();
            let row = sys.channel().row(s);
            let mut o = 0;
            while o + 1 < row.len() && u >= row[o] {
                u -= row[o];
                o += 1;
            }
            (s, o)
        }),
        n,
    );
    assert!((ours - naive).abs() < 0.01, "{ours} vs {naive}");
    let big = sample(&sys, 1_000_000, 2).unwrap();
    let ours_big = joint_tv(
        &sys,
        big.iter().map(|e| (e.secret, e.observation[0] as usize - 1)),
        1_000_000,
    );
    assert!(ours_big < ours / 2.0, "{ours_big} vs {ours}");
}

#[test]
fn secret_marginal_approaches_prior() {
    let prior = leakest::Prior::from_weights(&[5.0, 1.0, 3.0, 1.0]).unwrap();
    let sys = synth::random_system::<f64>(4, 7, 2).unwrap().with_prior(prior).unwrap();
    let tv = |n: usize| {
        let d = sample(&sys, n, 12).unwrap();
        let mut freq = [0.0; 4];
        for &s in d.secrets() {
            freq[s] += 1.0 / n as f64;
        }
        (0..4).map(|s| (freq[s] - sys.prior().get(s)).abs()).sum::<f64>() / 2.0
    };
    let (small, large) = (tv(1_000), tv(100_000));
    assert!(large < small, "{large} vs {small}");
    assert!(large < 0.01);
}

#[test]
fn holdout_error_matches_direct_count() {
    let sys = synth::geometric_system::<f64>(&synth::GeometricSpec::new(10, 100, 0.3)).unwrap();
    let train = sample(&sys, 300, 1).unwrap();
    let hold = sample(&sys, 200, 2).unwrap();
    let ix = NeighborIndex::from_dataset(&train, Metric::Euclidean).unwrap();
    for kind in EstimatorKind::ALL {
        let got = EvalSet::holdout(&hold).unwrap().batch_error(&ix, kind).unwrap();
        let wrong = hold
            .iter()
            .filter(|e| ix.predict(kind, e.observation).unwrap() != e.secret)
            .count();
        assert!((got - wrong as f64 / 200.0).abs() < 1e-12, "{kind}");
    }
}
