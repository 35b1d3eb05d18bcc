use isgp::experiment::{generate_synthetic, CenterPlacement, SyntheticSpec};
use isgp::skeptic::{replay_model, run_episode};
use isgp::{
    skeptic_probability, ImgpModel, InteractionRecord, KernelSpec, LabelId, OracleConfig, PolicyKind, SimulatedOracle,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Stream = Vec<(Vec<f64>, LabelId)>;

fn six_class_stream(seed: u64) -> Stream {
    let data = generate_synthetic(&SyntheticSpec {
        seed,
        ..Default::default()
    })
    .unwrap();
    data.features.into_iter().zip(data.labels).collect()
}

fn episode(stream: &Stream, eta: f64, policy: PolicyKind, seed: u64) -> (ImgpModel, Vec<InteractionRecord>) {
    let mut model = ImgpModel::new(KernelSpec::squared_exponential(2.0), 1e-8, [stream[0].1]).unwrap();
    let mut oracle = SimulatedOracle::new(OracleConfig::new(eta, (0..6).map(LabelId).collect(), seed ^ 0xABC)).unwrap();
    let mut coins = ChaCha8Rng::seed_from_u64(seed);
    let records = run_episode(&mut model, stream, &mut oracle, policy, &mut coins).unwrap();
    (model, records)
}

fn check_record(r: &InteractionRecord, policy: PolicyKind) {
    assert!((0.0..=1.0).contains(&r.alpha));
    assert_eq!(r.active_coin, r.rng_draws[0] < r.alpha);
    assert_eq!(r.consensus_label.is_some(), r.active_coin);
    assert_eq!(r.annotator_label.is_some(), r.active_coin);
    if let Some(gamma) = r.gamma {
        assert!((0.0..=1.0).contains(&gamma));
        let answer = r.annotator_label.unwrap();
        if answer == r.prediction {
            assert_eq!(gamma, 0.0);
        }
        assert_eq!(r.skeptic_coin, Some(r.rng_draws[1] < gamma));
    }
    if r.challenged() {
        assert!(r.active_coin && r.annotator_label != Some(r.prediction));
        assert_eq!(r.consensus_label, r.challenge_answer);
    } else if r.active_coin {
        assert_eq!(r.consensus_label, r.annotator_label);
    }
    match policy {
        PolicyKind::GpNever => assert!(!r.challenged()),
        PolicyKind::GpAlways if r.active_coin => assert_eq!(r.challenged(), r.annotator_label != Some(r.prediction)),
        _ => {}
    }
}

#[test]
fn record_invariants_hold_for_every_policy() {
    let stream = six_class_stream(3);
    for policy in PolicyKind::ALL {
        for seed in 0..5 {
            let (model, records) = episode(&stream, 0.4, policy, seed);
            assert_eq!(records.len(), stream.len());
            for (i, r) in records.iter().enumerate() {
                assert_eq!(r.round, i as u64 + 1);
                check_record(r, policy);
            }
            let queries = records.iter().filter(|r| r.active_coin).count();
            assert_eq!(model.len(), queries);
        }
    }
}

#[test]
fn fixed_seeds_replay_bit_identically() {
    let stream = six_class_stream(8);
    let (model, a) = episode(&stream, 0.4, PolicyKind::Isgp, 77);
    let (_, b) = episode(&stream, 0.4, PolicyKind::Isgp, 77);
    assert_eq!(a, b);
    let rebuilt = replay_model(KernelSpec::squared_exponential(2.0), 1e-8, [stream[0].1], &a).unwrap();
    assert_eq!(rebuilt.snapshot(), model.snapshot());
}

#[test]
fn policies_see_the_same_coins() {
    let stream = six_class_stream(4);
    let draws = |p| {
        episode(&stream, 0.1, p, 5)
            .1
            .iter()
            .map(|r| r.rng_draws)
            .collect::<Vec<_>>()
    };
    let isgp = draws(PolicyKind::Isgp);
    assert_eq!(isgp, draws(PolicyKind::GpNever));
    assert_eq!(isgp, draws(PolicyKind::GpAlways));
}

#[test]
fn challenge_counts_are_ordered_on_average() {
    let (mut never, mut isgp, mut always) = (0usize, 0usize, 0usize);
    for seed in 0..24 {
        let stream = six_class_stream(seed);
        let count = |p| {
            episode(&stream, 0.4, p, seed)
                .1
                .iter()
                .filter(|r| r.challenged())
                .count()
        };
        never += count(PolicyKind::GpNever);
        isgp += count(PolicyKind::Isgp);
        always += count(PolicyKind::GpAlways);
    }
    assert_eq!(never, 0);
    assert!(isgp <= always, "isgp {isgp} > always {always}");
    assert!(isgp > 0);
}

#[test]
fn gp_never_learns_two_separated_blobs() {
    let data = generate_synthetic(&SyntheticSpec {
        n_classes: 2,
        n_instances: 400,
        class_std: 1.0,
        centers: CenterPlacement::Explicit {
            centers: vec![vec![-6.0, 0.0], vec![6.0, 0.0]],
        },
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let mut order: Vec<usize> = (0..data.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(1));
    let stream: Stream = order
        .iter()
        .map(|&i| (data.features[i].clone(), data.labels[i]))
        .collect();
    let mut model = ImgpModel::new(KernelSpec::squared_exponential(2.0), 1e-8, [stream[0].1]).unwrap();
    let mut oracle = SimulatedOracle::new(OracleConfig::new(0.0, vec![LabelId(0), LabelId(1)], 0)).unwrap();
    let records = run_episode(
        &mut model,
        &stream,
        &mut oracle,
        PolicyKind::GpNever,
        &mut ChaCha8Rng::seed_from_u64(3),
    )
    .unwrap();
    let last = &records[records.len() * 3 / 4..];
    let correct = last
        .iter()
        .zip(&stream[records.len() * 3 / 4..])
        .filter(|(r, (_, t))| r.prediction == *t)
        .count();
    let accuracy = correct as f64 / last.len() as f64;
    assert!(accuracy > 0.9, "final-quarter accuracy {accuracy}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn disagreement_with_a_known_class_is_challenged_at_least_half_the_time(
        pts in prop::collection::vec(prop::collection::vec(-8.0f64..8.0, 2), 1..15),
        ls in prop::collection::vec(0u32..4, 15),
        x in prop::collection::vec(-8.0f64..8.0, 2),
    ) {
        let mut model = ImgpModel::new(KernelSpec::squared_exponential(1.5), 1e-2, [LabelId(0)]).unwrap();
        for (p, &l) in pts.iter().zip(&ls) {
            let _ = model.add_example(p, LabelId(l));
        }
        let (pred, post) = model.predict(&x).unwrap();
        prop_assert_eq!(skeptic_probability(&post, pred, pred).unwrap(), 0.0);
        for &other in model.known_classes().iter().filter(|&&c| c != pred) {
            prop_assert!(skeptic_probability(&post, pred, other).unwrap() >= 0.5);
        }
    }
}
