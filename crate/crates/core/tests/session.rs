use isgp::session::{Command, Event, InstanceSource, Request, Session, SessionConfig, SessionError};
use proptest::prelude::*;

fn config(seed: u64) -> SessionConfig {
    SessionConfig {
        seed,
        ..SessionConfig::new(
            InstanceSource::Points {
                points: (0..25)
                    .map(|i| vec![(i * 7 % 25) as f64 * 2.5, (i % 4) as f64])
                    .collect(),
            },
            ["red", "blue"],
        )
    }
}

fn command() -> impl Strategy<Value = Command> {
    let name = prop_oneof![Just("red"), Just("blue"), Just("green"), Just("")].prop_map(String::from);
    prop_oneof![
        Just(Command::Advance),
        (name.clone(), any::<bool>()).prop_map(|(label, allow_new)| Command::SubmitLabel { label, allow_new }),
        name.prop_map(|final_label| Command::ResolveChallenge { final_label }),
    ]
}

proptest! {
    /// Arbitrary command sequences: rejected commands change nothing, and
    /// the accepted ones replay to the same session.
    #[test]
    fn random_command_sequences(seed in 0u64..50, commands in prop::collection::vec(command(), 1..80)) {
        let mut s = Session::new("p", config(seed)).unwrap();
        for c in commands {
            let before = s.state(&[]).unwrap();
            match s.apply(c.into()) {
                Ok(_) => prop_assert_eq!(s.version(), before.version + 1),
                Err(SessionError::Model(e)) => panic!("{e}"),
                Err(_) => prop_assert_eq!(&s.state(&[]).unwrap(), &before),
            }
            let pending_rounds = usize::from(s.pending().is_some());
            let view = s.state(&[]).unwrap();
            prop_assert_eq!(view.counters.instances as usize, s.model().len());
            prop_assert_eq!(view.log.len() + pending_rounds + view.remaining, 25);
        }
        let replayed = Session::replay("p", s.config().clone(), s.commands()).unwrap();
        prop_assert_eq!(replayed.snapshot(), s.snapshot());
        prop_assert_eq!(replayed.state(&[vec![1.0, 1.0]]).unwrap(), s.state(&[vec![1.0, 1.0]]).unwrap());
    }
}

#[test]
fn shown_probabilities_are_the_coin_parameters() {
    let mut s = Session::new("h", config(4)).unwrap();
    for _ in 0..25 {
        match s.advance().unwrap() {
            Event::LabelRequest { round, alpha, .. } => {
                let ev = s.submit_label("blue", false).unwrap();
                if let Event::Challenge { gamma, .. } = &ev {
                    s.resolve_challenge("red").unwrap();
                    let r = &s.log()[round as usize - 1];
                    assert_eq!(r.gamma, Some(*gamma));
                    assert!(r.rng_draws[1] < *gamma);
                }
                let r = &s.log()[round as usize - 1];
                assert_eq!(r.alpha, alpha);
                assert!(r.rng_draws[0] < alpha);
            }
            Event::Predicted { round, alpha, .. } => {
                let r = &s.log()[round as usize - 1];
                assert_eq!(r.alpha, alpha);
                assert!(r.rng_draws[0] >= alpha);
            }
            e => panic!("{e:?}"),
        }
    }
}

#[test]
fn idempotency_key_survives_a_retry_after_state_moved_on() {
    let mut s = Session::new("i", config(2)).unwrap();
    let first = Request {
        request_id: Some("adv-1".into()),
        expected_version: Some(0),
        command: Command::Advance,
    };
    let ev = s.apply(first.clone()).unwrap();
    if matches!(ev, Event::LabelRequest { .. }) {
        s.submit_label("red", false).unwrap();
    }
    let version = s.version();
    // the retry would be stale, but the key is known so it is answered, not applied
    assert_eq!(s.apply(first).unwrap(), ev);
    assert_eq!(s.version(), version);
}
