//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schmidt::badapprox::{bad_margin, best_approx_sequence, AffineSystem, RealEntry};
use schmidt::config::{prepare, Overrides, Prepared, RunConfig};
use schmidt::engine::{limit_margin, run_game, validate_transcript, GameTranscript, Player, Variant};
use schmidt::geometry::{point_clears, schmidt_leq, Ball, SlabConstraint};
use schmidt::harness::{play, verify_records};
use schmidt::linalg::QMatrix;
use schmidt::matseq::{
    analyze_lacunarity, invariant_hyperplane_family, jordan_dominance_check, kronecker_order, spectral_radius_exceeds_one,
    MatrixSequence,
};
use schmidt::numeric::{int, pow, ratio, Bound, Scalar};
use schmidt::strategies::{avoidance_move, certified_k_max, schedule_params, BobMaximal, StrongWrapper, EpochAlice};
use schmidt::supports::{epsilon_for, estimate_decay, max_alpha, pointwise_dim_lower, DecayParams, Ifs, SupportModel};
use schmidt::transcript::{read_records, TranscriptWriter};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn prepared(text: &str) -> Prepared {
    prepare(&RunConfig::from_toml(text).expect("config parses"), &Overrides::default()).expect("config is feasible")
}

/// Plays through the transcript writer and re-verifies the file from disk.
fn play_and_verify(p: &Prepared, limit: Duration) -> Result<(GameTranscript, schmidt::transcript::RunSummary), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("t.jsonl");
    let start = Instant::now();
    let mut w = TranscriptWriter::create(&path).map_err(|e| e.to_string())?;
    let (t, s) = play(p, Some(&mut w)).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    drop(w);
    check(s.error.is_none(), || format!("game error: {:?}", s.error))?;
    check(took < limit, || format!("took {took:?}"))?;
    let report = verify_records(read_records(&path)?).map_err(|e| e.to_string())?;
    check(report.ok, || format!("verify: {:?}", report.problems))?;
    Ok((t, s))
}

const ONE_D: &str = r#"
epochs = 2
[game]
alpha = "1/4"
beta = "1/2"
center = ["1/6"]
radius = "1/40"
[sequence]
kind = "powers"
matrix = [["3"]]
[targets]
kind = "lattice"
base = ["1/2"]
"#;

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut slowest = Duration::ZERO;
    let mut total_avoided = 0;
    for inst in 0..500 {
        let n = 1 + inst % 3;
        let k = SupportModel::euclidean(n);
        let alpha = ratio(9, 10) * max_alpha(&k.decay);
        let eps = epsilon_for(&k.decay, &alpha).map_err(|e| e.to_string())?;
        let dy = |rng: &mut ChaCha8Rng| ratio(rng.gen_range(-256..=256), 256);
        let rho = ratio(1, 1 << rng.gen_range(0..6));
        let center: Vec<Scalar> = (0..n).map(|_| dy(&mut rng)).collect();
        let ball = Ball::new(center.clone(), rho.clone()).unwrap();
        let count = rng.gen_range(0..=20);
        let slabs: Vec<SlabConstraint> = (0..count)
            .map(|_| {
                let normal: Vec<Scalar> = loop {
                    let v: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
                    if v.iter().any(|&x| x != 0) {
                        break v.into_iter().map(int).collect();
                    }
                };
                // through a point of the ball
                let p: Vec<Scalar> = center.iter().map(|c| c + dy(&mut rng) * &rho / int(n as i64)).collect();
                let off = normal.iter().zip(&p).map(|(a, b)| a * b).sum();
                SlabConstraint::new(normal, off, int(0)).unwrap()
            })
            .collect();
        let start = Instant::now();
        let av = avoidance_move(&k, &ball, &slabs, &alpha).map_err(|e| format!("instance {inst}: {e}"))?;
        slowest = slowest.max(start.elapsed());
        let inner = Ball::new(av.center.clone(), &alpha * &rho).unwrap();
        check(schmidt_leq(&inner, &ball).unwrap(), || format!("instance {inst}: containment"))?;
        let clr = int(2) * &alpha * &rho;
        check(av.avoided.iter().all(|&i| point_clears(&av.center, &slabs[i], &clr)), || {
            format!("instance {inst}: a reported slab is not cleared")
        })?;
        let cleared = slabs.iter().filter(|s| point_clears(&av.center, s, &clr)).count();
        let need = (&eps * int(count as i64)).ceil().to_integer();
        check(BigInt::from(cleared) >= need && BigInt::from(av.avoided.len()) >= need, || {
            format!("instance {inst}: cleared {cleared} < {need}")
        })?;
        total_avoided += cleared;
    }
    check(slowest < Duration::from_secs(1), || format!("slowest instance {slowest:?}"))?;
    Ok(format!("500 instances, {total_avoided} clearances, slowest {slowest:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut notes = Vec::new();
    for (label, extra) in [
        ("chase", "[bob]\nkind = \"chase\"\n"),
        ("random", "[bob]\nkind = \"random\"\n"),
        ("maximal/strong", "[alice]\nstrong = true\n[bob]\nkind = \"maximal\"\n"),
    ] {
        let mut text = format!("{ONE_D}{extra}");
        if label.starts_with("maximal") {
            text = text.replace("radius = \"1/40\"", "radius = \"1/40\"\nvariant = \"strong\"");
        }
        let p = prepared(&text);
        let s = p.problems[0].params.as_ref().unwrap();
        check((s.n, s.r) == (14, 7), || format!("N = {}, r = {}", s.n, s.r))?;
        let c = ratio(1, 40) * pow(&int(8), -13);
        check(s.c == c, || "c differs from rho 8^-13".into())?;
        let (t, summary) = play_and_verify(&p, Duration::from_secs(60))?;
        check(t.certificates.iter().all(|c| c.margin > int(0)), || "certificate margin".into())?;
        let kmax = certified_k_max(&p.problems[0].seq, s, 2);
        let m = limit_margin(&t, &p.problems[0].seq, &p.problems[0].targets, kmax);
        check(m >= Bound::Finite(c.clone()), || format!("{label}: margin {m}"))?;
        check(summary.won && summary.epochs_completed == 2, || format!("{label}: summary {summary:?}"))?;
        notes.push(format!("{label}: {} certs", t.certificates.len()));
    }
    Ok(format!("N = 14, r = 7; {}", notes.join(", ")))
}

fn criterion_3() -> Outcome {
    let p = prepared(
        r#"
[game]
alpha = "1/4"
beta = "1/2"
center = ["1/2", "1/3"]
radius = "1/40"
[sequence]
kind = "powers"
matrix = [["2", "0"], ["0", "3"]]
[targets]
kind = "lattice"
base = ["0", "0"]
"#,
    );
    let (t, s) = play_and_verify(&p, Duration::from_secs(300))?;
    check(s.won, || format!("summary {s:?}"))?;
    check(!t.certificates.is_empty() && t.certificates.iter().all(|c| c.margin > int(0)), || "certificates".into())?;
    Ok(format!("{} certificates, k_max {:?}", t.certificates.len(), s.k_max))
}

fn criterion_4() -> Outcome {
    let p = prepared(
        r#"
[game]
alpha = "1/40"
beta = "1/2"
center = ["1/4"]
radius = "1/400"
[support]
kind = "cantor"
decay = { C = "4", gamma = "5/8", rho0 = "1" }
[sequence]
kind = "powers"
matrix = [["2"]]
[targets]
kind = "lattice"
base = ["1/2"]
"#,
    );
    // the configured constants dominate the estimate and its safety factor
    let est = estimate_decay(&p.game.support, 2000, 7).map_err(|e| e.to_string())?;
    check(est.c_hat <= 4.0 && est.gamma_hat >= 0.625, || format!("estimate {est:?}"))?;
    let (t, s) = play_and_verify(&p, Duration::from_secs(300))?;
    check(s.won, || format!("summary {s:?}"))?;
    let k = &p.game.support;
    check(t.alice_moves().all(|m| k.contains(&m.ball.center)), || "an Alice center is off the Cantor set".into())?;
    Ok(format!("{} certificates, C_hat {:.2}", t.certificates.len(), est.c_hat))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tested = 0;
    let mut undecided = 0;
    while tested < 100 {
        let e: Vec<i64> = (0..9).map(|_| rng.gen_range(-3..=3)).collect();
        let m = QMatrix::from_ints(&[&e[0..3], &e[3..6], &e[6..9]]);
        if !spectral_radius_exceeds_one(&m) {
            continue;
        }
        tested += 1;
        let seq = MatrixSequence::powers(m.clone()).map_err(|e| e.to_string())?;
        let rep = analyze_lacunarity(&seq, 60).map_err(|e| e.to_string())?;
        if !rep.lacunary() {
            undecided += 1;
            continue;
        }
        let (l, n0) = rep.decomposition.ok_or("lacunary without decomposition")?;
        let q = rep.q.clone().ok_or("lacunary without Q")?;
        check(q > int(1), || "Q <= 1".into())?;
        // independent re-check of every residue ratio in log space
        let logs = schmidt::matseq::log_norm_sequence(&m, 60);
        let lq = schmidt::numeric::ln_abs(&q);
        for k in n0..=60 - l {
            let d = logs[k + l - 1] - logs[k - 1];
            check(d >= lq - 1e-9, || format!("{e:?}: ratio at k = {k}, l = {l} below Q"))?;
        }
    }
    check(undecided <= 5, || format!("{undecided} of 100 undecided"))?;
    for (lam, size, horizon) in [(2, 2, 60), (3, 3, 60), (-2, 2, 60), (2, 1, 60), (1, 2, 400)] {
        let rows: Vec<Vec<Scalar>> = (0..size)
            .map(|i| (0..size).map(|j| if i == j { int(lam) } else if j == i + 1 { int(1) } else { int(0) }).collect())
            .collect();
        let r = jordan_dominance_check(&QMatrix::from_rows(rows), horizon).map_err(|e| e.to_string())?;
        check(r.within_tolerance, || format!("jordan λ = {lam}, size {size}: {r:?}"))?;
    }
    let controls = [
        QMatrix::from_ints(&[&[0, -1], &[1, 0]]),
        QMatrix::from_ints(&[&[1, 1], &[0, 1]]),
        QMatrix::from_ints(&[&[0, -1], &[1, -1]]),
        QMatrix::from_ints(&[&[1, 1, 0], &[0, 1, 1], &[0, 0, 1]]),
        QMatrix::from_ints(&[&[0, 0, 1], &[1, 0, 0], &[0, 1, 0]]),
    ];
    for c in controls {
        let rep = analyze_lacunarity(&MatrixSequence::powers(c.clone()).unwrap(), 60).map_err(|e| e.to_string())?;
        check(!rep.lacunary(), || format!("control {c:?} reported lacunary"))?;
    }
    Ok(format!("100 matrices ({undecided} undecided), 5 Jordan blocks, 5 controls"))
}

fn criterion_6() -> Outcome {
    let mut count = 0;
    let range = -2..=2i64;
    for a in range.clone() {
        for b in range.clone() {
            for c in range.clone() {
                for d in range.clone() {
                    if a * d - b * c == 0 {
                        continue;
                    }
                    let m = QMatrix::from_ints(&[&[a, b], &[c, d]]);
                    if spectral_radius_exceeds_one(&m) {
                        continue;
                    }
                    count += 1;
                    let n = kronecker_order(&m).map_err(|e| e.to_string())?.ok_or_else(|| format!("{m:?}: no order"))?;
                    check([1, 2, 3, 4, 6].contains(&n), || format!("{m:?}: order {n}"))?;
                    let mn = m.pow(n);
                    let u = mn.sub(&QMatrix::identity(2));
                    check(u.mul(&u).is_zero(), || format!("{m:?}: (M^N - I)^2 != 0"))?;
                    let f = invariant_hyperplane_family(&m, n).map_err(|e| e.to_string())?;
                    let w: Vec<Scalar> = f.normal.iter().map(|x| Scalar::from_integer(x.clone())).collect();
                    let wm: Vec<Scalar> = (0..2).map(|j| (0..2).map(|i| &w[i] * mn.get(i, j)).sum()).collect();
                    check(wm == w, || format!("{m:?}: hyperplane not invariant"))?;
                }
            }
        }
    }
    Ok(format!("{count} matrices"))
}

fn criterion_7() -> Outcome {
    let a = AffineSystem::scalar(RealEntry::rational(ratio(1, 2)));
    let m = bad_margin(&a, &[ratio(1, 3)], &int(0), 10_000).map_err(|e| e.to_string())?;
    check(m == ratio(1, 6), || format!("bad_margin = {m}"))?;
    Ok("bad_margin(1/2, 1/3, 10^4) = 1/6".into())
}

fn criterion_8() -> Outcome {
    let a = AffineSystem::scalar(RealEntry::sqrt(2));
    let s = best_approx_sequence(&a, 6, &int(3)).map_err(|e| e.to_string())?;
    let dens: Vec<i64> = s.all.iter().take(7).map(|v| v[0]).collect();
    // convergent denominators q_{k+1} = 2q_k + q_{k-1}
    let mut oracle = vec![1i64, 2];
    while oracle.len() < 7 {
        let l = oracle.len();
        oracle.push(2 * oracle[l - 1] + oracle[l - 2]);
    }
    check(dens == oracle, || format!("denominators {dens:?}"))?;
    let p = prepared(
        r#"
epochs = 2
[game]
alpha = "1/4"
beta = "1/2"
center = ["1/3"]
[sequence]
kind = "badapprox"
a = [[{ poly = ["-2", "0", "1"], interval = ["1", "2"] }]]
margin_q = 100000
"#,
    );
    let (t, s) = play_and_verify(&p, Duration::from_secs(300))?;
    check(s.won, || format!("summary {s:?}"))?;
    let f = &t.final_enclosure;
    let m = bad_margin(&a, &f.center, &f.radius, 100_000).map_err(|e| e.to_string())?;
    check(m > int(0), || "bad_margin is zero".into())?;
    Ok(format!("denominators {dens:?}; bad_margin = {:.3e}", schmidt::numeric::to_f64(&m)))
}

fn criterion_9() -> Outcome {
    let p = prepared(&format!("{ONE_D}[alice]\nstrong = true\n").replace("radius = \"1/40\"", "radius = \"1/40\"\nvariant = \"strong\""));
    let q = &p.problems[0];
    let params = q.params.clone().unwrap();
    let inner = EpochAlice::new(params.clone(), q.seq.clone(), q.targets.clone());
    let mut alice = StrongWrapper::new(Box::new(inner)).with_limit(p.virtual_rounds);
    let t = run_game(&p.game, &mut alice, &mut BobMaximal, p.seed).map_err(|e| e.to_string())?;
    check(validate_transcript(&t, &p.game), || "strong transcript invalid".into())?;
    let (vc, vt) = alice.observed().ok_or("no observed game")?;
    check(vc.variant == Variant::Classic && validate_transcript(&vt, &vc), || "observed game is not Classic".into())?;
    let classic = |i: usize, m: &schmidt::engine::Move| {
        let f = if m.player == Player::Alice { &vc.alpha } else { &vc.beta };
        vt.moves.get(i.wrapping_sub(1)).is_none_or(|prev| m.ball.radius == f * &prev.ball.radius)
    };
    check(vt.moves.iter().enumerate().skip(1).all(|(i, m)| classic(i, m)), || "non-classic radius".into())?;
    // the wrapper leaves the inner schedule unchanged: same c from a fresh scan
    let fresh = schedule_params(&vc.alpha, &vc.beta, &int(3), &DecayParams::lebesgue(1), &int(1), &vc.initial_ball.radius)
        .map_err(|e| e.to_string())?;
    check(fresh.c == params.c, || "recomputed c differs".into())?;
    let kmax = certified_k_max(&q.seq, &fresh, 2);
    let m = limit_margin(&t, &q.seq, &q.targets, kmax);
    check(m >= Bound::Finite(fresh.c.clone()), || format!("margin {m}"))?;
    let dummies = t.alice_moves().filter(|m| m.tags.contains_key("dummy")).count();
    Ok(format!("{} real rounds, {dummies} dummies, {} inner rounds", t.alice_moves().count(), vt.moves.len() / 2))
}

fn criterion_10() -> Outcome {
    let p = prepared(
        r#"
[game]
alpha = "1/4"
beta = "1/2"
center = ["1/2"]
radius = "1/512"
[sequence]
kind = "powers"
matrix = [["5"]]
[[family]]
targets = { kind = "lattice", base = ["1/2"] }
[[family]]
targets = { kind = "lattice", base = ["1/4"] }
"#,
    );
    let (t, s) = play_and_verify(&p, Duration::from_secs(300))?;
    check(s.won, || format!("summary {s:?}"))?;
    let mut margins = Vec::new();
    for (q, &k) in p.problems.iter().zip(&s.k_max) {
        let m = limit_margin(&t, &q.seq, &q.targets, k);
        let c = q.params.as_ref().unwrap().c.clone();
        check(k > 0 && m >= Bound::Finite(c) && m > Bound::Finite(int(0)), || format!("family margin {m}"))?;
        margins.push(m);
    }
    check(t.certificates.iter().all(|c| c.margin > int(0)), || "certificate margin".into())?;
    let per: Vec<usize> =
        (0..2).map(|i| t.certificates.iter().filter(|c| c.id.starts_with(&format!("f{i}."))).count()).collect();
    Ok(format!("k_max {:?}, certificates per family {per:?}", s.k_max))
}

fn criterion_11() -> Outcome {
    let line = SupportModel::euclidean(1);
    let cantor = SupportModel::ifs(Ifs::cantor(), DecayParams::new(int(4), ratio(5, 8), Bound::Finite(int(1))).unwrap(), 1)
        .map_err(|e| e.to_string())?;
    let target = 2f64.ln() / 3f64.ln();
    let mut notes = Vec::new();
    for (name, k, want) in [("lebesgue", &line, 1.0), ("cantor", &cantor, target)] {
        let est = estimate_decay(k, 4000, 11).map_err(|e| e.to_string())?;
        check((est.gamma_hat - want).abs() < 0.05, || format!("{name}: gamma_hat {}", est.gamma_hat))?;
        let region = Ball::new(vec![int(0)], int(1)).unwrap();
        let pd = pointwise_dim_lower(k, &region, 64, 11).map_err(|e| e.to_string())?;
        check((pd - want).abs() < 0.05, || format!("{name}: pointwise {pd}"))?;
        notes.push(format!("{name}: gamma_hat {:.3}, pointwise {:.3}", est.gamma_hat, pd));
    }
    Ok(notes.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("avoidance suite", criterion_1),
        ("1-D end-to-end, three adversaries", criterion_2),
        ("2-D end-to-end", criterion_3),
        ("Cantor support", criterion_4),
        ("lacunarity and Jordan suite", criterion_5),
        ("Kronecker suite", criterion_6),
        ("Bad_A rational case", criterion_7),
        ("Bad_A irrational case", criterion_8),
        ("strong game", criterion_9),
        ("intersection", criterion_10),
        ("estimators", criterion_11),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = f();
        let took = start.elapsed();
        match r {
            Ok(note) => println!("PASS criterion {} ({name}): {note} [{took:.2?}]", i + 1),
            Err(why) => {
                println!("FAIL criterion {} ({name}): {why} [{took:.2?}]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
