use std::sync::Arc;

use proptest::prelude::*;

use schmidt::badapprox::{bad_margin, best_approx_sequence, AffineSystem, RealEntry};
use schmidt::config::{prepare, Overrides, RunConfig};
use schmidt::engine::{limit_margin, run_game, validate_transcript, GameConfig, Player, Variant};
use schmidt::geometry::{point_clears, schmidt_leq, Ball, SlabConstraint};
use schmidt::harness::{play, verify_records};
use schmidt::linalg::QMatrix;
use schmidt::matseq::MatrixSequence;
use schmidt::numeric::{dist_to_integer, int, ratio, Bound, Scalar};
use schmidt::strategies::{avoidance_move, certified_k_max, schedule_params, BobRandom, EpochAlice};
use schmidt::supports::{epsilon_for, max_alpha, DecayParams, SupportModel};
use schmidt::targets::TargetFamily;
use schmidt::transcript::{read_records, Record, TranscriptWriter};

fn one_d(center: Scalar, seed: u64) -> String {
    format!(
        r#"
seed = {seed}
epochs = 1
[game]
alpha = "1/4"
beta = "1/2"
center = ["{center}"]
radius = "1/40"
[sequence]
kind = "powers"
matrix = [["3"]]
[targets]
kind = "lattice"
base = ["1/2"]
[bob]
kind = "random"
"#
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn classic_games_nest_with_exact_radii(c in -512i64..512, seed in any::<u64>()) {
        let seq = Arc::new(MatrixSequence::powers(QMatrix::scalar(int(3))).unwrap());
        let z = Arc::new(TargetFamily::constant_lattice(vec![ratio(1, 2)]));
        let p = schedule_params(&ratio(1, 4), &ratio(1, 2), &int(3), &DecayParams::lebesgue(1), &int(1), &ratio(1, 40)).unwrap();
        let cfg = GameConfig {
            alpha: p.alpha.clone(),
            beta: p.beta.clone(),
            variant: Variant::Classic,
            support: SupportModel::euclidean(1),
            initial_ball: Ball::new(vec![ratio(c, 256)], p.rho.clone()).unwrap(),
            max_rounds: p.rounds_for_epochs(1),
        };
        let mut alice = EpochAlice::new(p.clone(), seq.clone(), z.clone());
        let t = run_game(&cfg, &mut alice, &mut BobRandom::new(seed), seed).unwrap();
        prop_assert!(validate_transcript(&t, &cfg));
        for w in t.moves.windows(2) {
            prop_assert!(schmidt_leq(&w[1].ball, &w[0].ball).unwrap());
            let f = if w[1].player == Player::Alice { &p.alpha } else { &p.beta };
            prop_assert_eq!(&w[1].ball.radius, &(f * &w[0].ball.radius));
        }
        // more indices can only shrink the margin
        let kmax = certified_k_max(&seq, &p, 1);
        let mut last = Bound::Infinite;
        for k in 0..=kmax {
            let m = limit_margin(&t, &seq, &z, k);
            prop_assert!(m <= last);
            last = m;
        }
        prop_assert!(last >= Bound::Finite(p.c.clone()));
    }

    #[test]
    fn transcripts_replay_and_tampering_is_located(c in -100i64..100, seed in 0u64..1000, pick in any::<prop::sample::Index>()) {
        let run = RunConfig::from_toml(&one_d(ratio(c, 300), seed)).unwrap();
        let p = prepare(&run, &Overrides::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let mut w = TranscriptWriter::create(&path).unwrap();
        play(&p, Some(&mut w)).unwrap();
        drop(w);
        let records = read_records(&path).unwrap();
        prop_assert!(verify_records(records.clone()).unwrap().ok);

        let moves: Vec<usize> = records.iter().enumerate().filter(|(_, r)| matches!(r, Record::Move(_))).map(|(i, _)| i).collect();
        let at = moves[1 + pick.index(moves.len() - 1)];
        let mut bad = records;
        let round = match &mut bad[at] {
            Record::Move(m) => {
                m.ball.center[0] += int(1);
                m.round
            }
            _ => unreachable!(),
        };
        let report = verify_records(bad).unwrap();
        prop_assert!(!report.ok);
        prop_assert_eq!(report.first_bad_round, Some(round));
    }

    #[test]
    fn avoidance_clears_the_guaranteed_fraction(
        n in 1usize..=3,
        seed in any::<u64>(),
        normals in prop::collection::vec(prop::collection::vec(-5i64..=5, 3), 0..16),
        offsets in prop::collection::vec(-64i64..=64, 16),
    ) {
        let k = SupportModel::euclidean(n);
        let alpha = ratio(9, 10) * max_alpha(&k.decay);
        let eps = epsilon_for(&k.decay, &alpha).unwrap();
        let ball = Ball::new(vec![ratio(seed as i64 % 7, 8); n], ratio(1, 4)).unwrap();
        let slabs: Vec<SlabConstraint> = normals
            .iter()
            .zip(&offsets)
            .filter(|(v, _)| v[..n].iter().any(|&x| x != 0))
            .map(|(v, &o)| SlabConstraint::new(v[..n].iter().map(|&x| int(x)).collect(), ratio(o, 64), int(0)).unwrap())
            .collect();
        let av = avoidance_move(&k, &ball, &slabs, &alpha).unwrap();
        prop_assert!(schmidt_leq(&Ball::new(av.center.clone(), &alpha * &ball.radius).unwrap(), &ball).unwrap());
        let clr = int(2) * &alpha * &ball.radius;
        let cleared = slabs.iter().filter(|s| point_clears(&av.center, s, &clr)).count();
        prop_assert!(Scalar::from_integer(cleared.into()) >= &eps * int(slabs.len() as i64));
    }

    #[test]
    fn rational_margin_is_at_least_the_lattice_distance(p in -20i64..20, l in 1i64..12, x in -200i64..200, d in 1i64..50) {
        let a = AffineSystem::scalar(RealEntry::rational(ratio(p, l)));
        let x = ratio(x, d);
        let m = bad_margin(&a, &[x.clone()], &int(0), 500).unwrap();
        prop_assert!(m >= dist_to_integer(&(&x * int(l))) / int(l));
    }
}

#[test]
fn best_approximation_errors_decrease() {
    for k in [2u64, 3, 5, 7] {
        let a = AffineSystem::scalar(RealEntry::sqrt(k));
        let s = best_approx_sequence(&a, 6, &int(3)).unwrap();
        for w in s.errors.windows(2) {
            assert!(w[1].hi <= w[0].lo, "sqrt({k}): errors not decreasing");
        }
        for w in s.all.windows(2) {
            assert!(w[0][0] < w[1][0]);
        }
    }
}
