use std::sync::Arc;
use std::time::Instant;

use schmidt::engine::{limit_margin, run_game, validate_transcript, GameConfig, Strategy, Variant};
use schmidt::geometry::Ball;
use schmidt::linalg::QMatrix;
use schmidt::matseq::MatrixSequence;
use schmidt::numeric::{int, pow, ratio, Bound};
use schmidt::strategies::{certified_k_max, schedule_params, BobChase, BobRandom, EpochAlice};
use schmidt::supports::{DecayParams, SupportModel};
use schmidt::targets::TargetFamily;

#[test]
fn one_dimensional_epochs_against_chase_and_random() {
    let seq = Arc::new(MatrixSequence::powers(QMatrix::scalar(int(3))).unwrap());
    let z = Arc::new(TargetFamily::constant_lattice(vec![ratio(1, 2)]));
    let p = schedule_params(&ratio(1, 4), &ratio(1, 2), &int(3), &DecayParams::lebesgue(1), &int(1), &ratio(1, 40)).unwrap();
    let cfg = GameConfig {
        alpha: p.alpha.clone(),
        beta: p.beta.clone(),
        variant: Variant::Classic,
        support: SupportModel::euclidean(1),
        initial_ball: Ball::new(vec![ratio(1, 6)], p.rho.clone()).unwrap(),
        max_rounds: p.rounds_for_epochs(2),
    };
    let bobs: Vec<Box<dyn Strategy>> =
        vec![Box::new(BobChase::new(seq.clone(), z.clone(), 64)), Box::new(BobRandom::new(3))];
    for mut bob in bobs {
        let start = Instant::now();
        let mut alice = EpochAlice::new(p.clone(), seq.clone(), z.clone());
        let t = run_game(&cfg, &mut alice, bob.as_mut(), 9).unwrap();
        assert!(validate_transcript(&t, &cfg));
        assert!(t.certificates.iter().all(|c| c.margin > int(0)));
        let kmax = certified_k_max(&seq, &p, 2);
        assert_eq!(kmax, 26);
        let m = limit_margin(&t, &seq, &z, kmax);
        assert!(m >= Bound::Finite(ratio(1, 40) * pow(&int(8), -13)), "{m}");
        eprintln!("{}: {} certificates, {:?}", bob.name(), t.certificates.len(), start.elapsed());
    }
}

fn certified_run(
    m: QMatrix,
    y: Vec<schmidt::numeric::Scalar>,
    support: SupportModel,
    alpha: schmidt::numeric::Scalar,
    q: schmidt::numeric::Scalar,
    rho: schmidt::numeric::Scalar,
    center: Vec<schmidt::numeric::Scalar>,
    epochs: usize,
) {
    let seq = Arc::new(MatrixSequence::powers(m).unwrap());
    let z = Arc::new(TargetFamily::constant_lattice(y));
    let p = schedule_params(&alpha, &ratio(1, 2), &q, &support.decay, &int(1), &rho).unwrap();
    eprintln!("N = {}, r = {}, eps = {}", p.n, p.r, p.epsilon);
    let cfg = GameConfig {
        alpha: p.alpha.clone(),
        beta: p.beta.clone(),
        variant: Variant::Classic,
        support,
        initial_ball: Ball::new(center, p.rho.clone()).unwrap(),
        max_rounds: p.rounds_for_epochs(epochs),
    };
    let start = Instant::now();
    let mut alice = EpochAlice::new(p.clone(), seq.clone(), z.clone());
    let mut bob = BobChase::new(seq.clone(), z.clone(), 200);
    let t = run_game(&cfg, &mut alice, &mut bob, 1).unwrap();
    assert!(validate_transcript(&t, &cfg));
    let kmax = certified_k_max(&seq, &p, epochs);
    let m = limit_margin(&t, &seq, &z, kmax);
    assert!(m >= Bound::Finite(p.c.clone()));
    eprintln!("{} certificates, kmax {kmax}, {:?}", t.certificates.len(), start.elapsed());
}

#[test]
fn two_dimensional_epoch() {
    certified_run(
        QMatrix::diag(&[int(2), int(3)]),
        vec![int(0), int(0)],
        SupportModel::euclidean(2),
        ratio(1, 4),
        int(3),
        ratio(1, 40),
        vec![ratio(1, 2), ratio(1, 3)],
        1,
    );
}

#[test]
fn cantor_epoch() {
    let decay = DecayParams::new(int(4), ratio(5, 8), Bound::Finite(int(1))).unwrap();
    let k = SupportModel::ifs(schmidt::supports::Ifs::cantor(), decay, 1).unwrap();
    certified_run(QMatrix::scalar(int(2)), vec![ratio(1, 2)], k, ratio(1, 40), int(2), ratio(1, 400), vec![ratio(1, 4)], 1);
}
