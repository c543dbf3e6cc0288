//! Running configured games, persisting them, and checking saved runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::badapprox::{bad_margin, best_approx_sequence, rational_case_set, rational_rank_check};
use crate::config::{
    affine_system, build_sequence, build_support, parse_runs, prepare, BobKind, ConfigError, Mode, Overrides, Prepared,
    SequenceSection, DEFAULT_MARGIN_Q, DEFAULT_THIN,
};
use crate::engine::{
    limit_margin, run_game_with_sink, validate_transcript_detailed, GameError, GameTranscript, Strategy,
    StrategyError,
};
use crate::geometry::{slab_ball_distance, Ball};
use crate::matseq::{analyze_lacunarity, describe_norm, jordan_dominance_check, kronecker_order, SeqKind};
use crate::numeric::{fmt_scalar, int, parse_scalar, Bound, Scalar};
use crate::strategies::{
    certified_k_max, make_slab, BobChase, BobMaximal, BobRandom, GreedyAlice, IntersectStrategies, StrongWrapper,
    EpochAlice,
};
use crate::supports::{estimate_decay, pointwise_dim_lower};
use crate::transcript::{load, read_records, Record, RunSummary, TranscriptWriter, FORMAT_VERSION};

pub const EXIT_WON: i32 = 0;
pub const EXIT_LOST: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_INVALID_MOVE: i32 = 5;
pub const EXIT_NO_CENTER: i32 = 6;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("i/o: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(ConfigError::Infeasible(_)) => EXIT_INFEASIBLE,
            _ => EXIT_IO,
        }
    }
}

fn io(e: impl ToString) -> HarnessError {
    HarnessError::Io(e.to_string())
}

pub fn exit_code_for(err: &GameError) -> i32 {
    match err {
        GameError::InvalidMove { .. } => EXIT_INVALID_MOVE,
        GameError::Config(_) => EXIT_IO,
        GameError::Strategy { error, .. } => match error {
            StrategyError::NoFeasibleCenter(_) => EXIT_NO_CENTER,
            StrategyError::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_LOST,
        },
    }
}

pub fn build_alice(p: &Prepared) -> Box<dyn Strategy> {
    let inner: Box<dyn Strategy> = match p.mode {
        Mode::Certified if p.problems.len() > 1 => {
            let subs = p
                .problems
                .iter()
                .map(|q| {
                    let a = EpochAlice::new(q.params.clone().expect("certified"), q.seq.clone(), q.targets.clone());
                    Box::new(a.with_label(&q.label)) as Box<dyn Strategy>
                })
                .collect();
            return Box::new(IntersectStrategies::new(subs));
        }
        Mode::Certified => {
            let q = &p.problems[0];
            Box::new(EpochAlice::new(q.params.clone().expect("certified"), q.seq.clone(), q.targets.clone()))
        }
        Mode::Greedy => {
            let q = &p.problems[0];
            Box::new(GreedyAlice::new(q.seq.clone(), q.targets.clone(), p.run.alice.horizon))
        }
    };
    if p.strong {
        Box::new(StrongWrapper::new(inner).with_limit(p.virtual_rounds))
    } else {
        inner
    }
}

pub fn build_bob(p: &Prepared) -> Box<dyn Strategy> {
    let q = &p.problems[0];
    match p.bob {
        BobKind::Chase => Box::new(BobChase::new(q.seq.clone(), q.targets.clone(), p.run.bob.horizon)),
        BobKind::Random => Box::new(BobRandom::new(p.seed)),
        BobKind::Maximal => Box::new(BobMaximal),
    }
}

/// Inner rounds played by problem i's strategy.
fn virtual_rounds_played(p: &Prepared, t: &GameTranscript, i: usize) -> usize {
    let alice = t.alice_moves();
    if p.problems.len() > 1 {
        let id = i.to_string();
        alice.filter(|m| m.tags.get("sub") == Some(&id)).count()
    } else if p.strong {
        alice.filter(|m| m.tags.contains_key("virtual_round")).count()
    } else {
        alice.count()
    }
}

fn fmt_bound(b: &Bound) -> String {
    match b {
        Bound::Finite(v) => fmt_scalar(v),
        Bound::Infinite => "inf".into(),
    }
}

/// Recomputes the summary of a finished (or aborted) game from its transcript.
pub fn summarize(p: &Prepared, t: &GameTranscript, error: Option<&GameError>) -> RunSummary {
    let mut k_max = Vec::new();
    let mut margin = Bound::Infinite;
    let mut epochs_completed = usize::MAX;
    for (i, q) in p.problems.iter().enumerate() {
        let played = virtual_rounds_played(p, t, i);
        // greedy play is scored on the indices resolved at 1/8 of the final scale
        let k = match &q.params {
            Some(s) => {
                let done = (0..=p.epochs).take_while(|&e| e == 0 || s.rounds_for_epochs(e) <= played).last().unwrap_or(0);
                epochs_completed = epochs_completed.min(done);
                if done == 0 {
                    0
                } else {
                    certified_k_max(&q.seq, s, done)
                }
            }
            None => {
                epochs_completed = 0;
                let r = &t.final_enclosure.radius;
                (1..=p.run.alice.horizon)
                    .take_while(|&k| q.seq.has_index(k))
                    .take_while(|&k| q.seq.norm(k).is_ok_and(|n| &n.hi * r * int(8) <= int(1)))
                    .last()
                    .unwrap_or(0)
            }
        };
        k_max.push(k);
        margin = margin.min(limit_margin(t, &q.seq, &q.targets, k));
    }
    let c_theory = p.c_theory();
    let certs_ok = t.certificates.iter().all(|c| c.margin > int(0));
    let margin_ok = match (&c_theory, &margin) {
        (Some(c), m) => *m >= Bound::Finite(c.clone()),
        (None, Bound::Finite(m)) => m > &int(0),
        (None, Bound::Infinite) => false,
    };
    let finished = p.mode == Mode::Greedy || epochs_completed == p.epochs;
    let won = error.is_none() && certs_ok && margin_ok && finished;
    let (bad, bad_q) = match (&p.problems[0].affine, &p.run.sequence) {
        (Some(a), Some(SequenceSection::Badapprox { margin_q, .. })) => {
            let qb = margin_q.unwrap_or(DEFAULT_MARGIN_Q);
            let f = &t.final_enclosure;
            (bad_margin(a, &f.center, &f.radius, qb).ok().map(|v| fmt_scalar(&v)), Some(qb))
        }
        _ => (None, None),
    };
    let exit_code = match error {
        Some(e) => exit_code_for(e),
        None if won => EXIT_WON,
        None => EXIT_LOST,
    };
    RunSummary {
        name: p.run.name.clone(),
        won,
        mode: p.mode,
        c_theory: c_theory.map(|c| fmt_scalar(&c)),
        realized_margin: fmt_bound(&margin),
        k_max,
        epochs_completed: if epochs_completed == usize::MAX { 0 } else { epochs_completed },
        rounds: t.alice_moves().count(),
        certificates: t.certificates.len(),
        bad_margin: bad,
        bad_margin_q: bad_q,
        error: error.map(|e| e.to_string()),
        exit_code,
        transcript: None,
        wall_time: None,
    }
}

/// Plays one prepared run, streaming records to `writer` if given.
pub fn play(p: &Prepared, mut writer: Option<&mut TranscriptWriter>) -> Result<(GameTranscript, RunSummary), HarnessError> {
    let start = Instant::now();
    if let Some(w) = writer.as_deref_mut() {
        w.record(&Record::Header { version: FORMAT_VERSION, seed: p.seed, config: p.run.clone() }).map_err(io)?;
    }
    let mut alice = build_alice(p);
    let mut bob = build_bob(p);
    let mut io_err = None;
    let outcome = run_game_with_sink(&p.game, alice.as_mut(), bob.as_mut(), p.seed, &mut |m| {
        if let Some(w) = writer.as_deref_mut() {
            if let Err(e) = w.record(&Record::Move(m.clone())) {
                io_err.get_or_insert(e);
            }
        }
    });
    if let Some(e) = io_err {
        return Err(io(e));
    }
    let mut summary = summarize(p, &outcome.transcript, outcome.error.as_ref());
    if let Some(w) = writer {
        for c in &outcome.transcript.certificates {
            w.record(&Record::Certificate(c.clone())).map_err(io)?;
        }
        w.record(&Record::Summary(summary.clone())).map_err(io)?;
    }
    summary.wall_time = Some(start.elapsed());
    Ok((outcome.transcript, summary))
}

fn read_config(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| io(format!("{}: {e}", path.display())))
}

/// Plays every run of a config file concurrently, one transcript and one
/// summary file per run under `out`.
pub fn cmd_play(config: &Path, out: Option<&Path>, over: &Overrides) -> Result<Vec<RunSummary>, HarnessError> {
    let runs = parse_runs(&read_config(config)?)?;
    let prepared = runs.iter().map(|r| prepare(r, over)).collect::<Result<Vec<_>, _>>()?;
    let batch = prepared.len() > 1;
    let jobs: Vec<(Prepared, PathBuf)> = prepared
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let dir = out.map(Path::to_path_buf).or_else(|| p.run.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| ".".into());
            let name = p.run.name.clone().unwrap_or_else(|| if batch { format!("run{i}") } else { "run".into() });
            (p, dir.join(name))
        })
        .collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(p, stem)| {
                scope.spawn(move || -> Result<RunSummary, HarnessError> {
                    if let Some(d) = stem.parent() {
                        std::fs::create_dir_all(d).map_err(io)?;
                    }
                    let tpath = stem.with_extension("transcript.jsonl");
                    let mut w = TranscriptWriter::create(&tpath).map_err(io)?;
                    let (_, mut s) = play(p, Some(&mut w))?;
                    s.transcript = Some(tpath.file_name().unwrap().to_string_lossy().into_owned());
                    let json = serde_json::to_string_pretty(&s).map_err(io)?;
                    std::fs::write(stem.with_extension("summary.json"), json + "\n").map_err(io)?;
                    Ok(s)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread")).collect()
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub ok: bool,
    pub first_bad_round: Option<usize>,
    pub problems: Vec<String>,
    pub certificates_checked: usize,
    pub realized_margin: String,
}

impl VerifyReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "verdict: {}", if self.ok { "ok" } else { "FAILED" });
        if let Some(r) = self.first_bad_round {
            let _ = writeln!(s, "first bad round: {r}");
        }
        let _ = writeln!(s, "certificates checked: {}", self.certificates_checked);
        let _ = writeln!(s, "realized margin: {}", self.realized_margin);
        for p in &self.problems {
            let _ = writeln!(s, "problem: {p}");
        }
        s
    }
}

/// (family index, k, y) from a certificate id.
fn parse_certificate_id(id: &str) -> Option<(usize, usize, Vec<Scalar>)> {
    let (prefix, body) = id.split_once(':')?;
    let fam = match prefix.strip_prefix('f').and_then(|r| r.split_once('.')) {
        Some((i, _)) => i.parse().ok()?,
        None => 0,
    };
    let (k, y) = body.split_once(";y=(")?;
    let k = k.strip_prefix("k=")?.parse().ok()?;
    let y = y.strip_suffix(')')?.split(',').map(|v| parse_scalar(v).ok()).collect::<Option<Vec<_>>>()?;
    Some((fam, k, y))
}

/// Re-checks every move, every certificate, and the recorded summary.
pub fn verify_records(records: Vec<Record>) -> Result<VerifyReport, HarnessError> {
    let l = load(records).map_err(io)?;
    let p = prepare(&l.config, &Overrides { seed: Some(l.seed), ..Overrides::default() })?;
    let mut problems = Vec::new();
    let Some(t) = l.transcript() else {
        return Ok(VerifyReport {
            ok: false,
            first_bad_round: Some(1),
            problems: vec!["no moves".into()],
            certificates_checked: 0,
            realized_margin: "-".into(),
        });
    };
    let mut first_bad = None;
    if let Err((round, reason)) = validate_transcript_detailed(&t, &p.game) {
        first_bad = Some(round);
        problems.push(format!("round {round}: {reason}"));
    }
    for c in &t.certificates {
        let checked = parse_certificate_id(&c.id).and_then(|(i, k, y)| {
            let q = p.problems.get(i)?;
            let data = q.seq.index(k).ok()?;
            let slab = make_slab(&data, &y, &q.params.as_ref()?.c)?;
            Some(slab_ball_distance(&t.final_enclosure, &slab).ok()?)
        });
        match checked {
            Some(d) if d >= c.margin && c.margin > int(0) => {}
            Some(d) => problems.push(format!("certificate {}: distance {} below recorded {}", c.id, fmt_scalar(&d), fmt_scalar(&c.margin))),
            None => problems.push(format!("certificate {}: cannot be rebuilt", c.id)),
        }
    }
    let recomputed = summarize(&p, &t, None);
    if first_bad.is_none() {
        if let Some(s) = &l.summary {
            if s.error.is_none() && (s.realized_margin != recomputed.realized_margin || s.won != recomputed.won) {
                problems.push(format!(
                    "summary claims margin {} (won = {}), recomputed {} (won = {})",
                    s.realized_margin, s.won, recomputed.realized_margin, recomputed.won
                ));
            }
        }
    }
    Ok(VerifyReport {
        ok: problems.is_empty(),
        first_bad_round: first_bad,
        problems,
        certificates_checked: t.certificates.len(),
        realized_margin: recomputed.realized_margin,
    })
}

pub fn cmd_verify(transcript: &Path) -> Result<VerifyReport, HarnessError> {
    verify_records(read_records(transcript).map_err(io)?)
}

fn first_run(config: &Path) -> Result<crate::config::RunConfig, HarnessError> {
    parse_runs(&read_config(config)?)?.into_iter().next().ok_or_else(|| io("no runs in config"))
}

pub fn cmd_analyze_seq(config: &Path, horizon: usize) -> Result<String, HarnessError> {
    let run = first_run(config)?;
    let s = run.sequence.as_ref().ok_or_else(|| io("config has no [sequence]"))?;
    let (seq, _) = build_sequence(s)?;
    let rep = analyze_lacunarity(&seq, horizon).map_err(io)?;
    let mut out = String::new();
    let _ = writeln!(out, "verdict: {:?}", rep.verdict);
    if let Some(q) = &rep.q {
        let _ = writeln!(out, "Q: {} (~{:.6})", fmt_scalar(q), crate::numeric::to_f64(q));
    }
    if let Some((l, n0)) = rep.decomposition {
        let _ = writeln!(out, "decomposition: l = {l}, from index {n0}");
    }
    if let Some(r) = &rep.spectral_radius {
        let _ = writeln!(out, "spectral radius: {r}");
    }
    if let SeqKind::Powers(m) = seq.kind() {
        if let Ok(j) = jordan_dominance_check(m, horizon) {
            let _ = writeln!(out, "dominant block size: {}, ratio {:.6} (tolerance {:.3})", j.size, j.ratio, j.tolerance);
        }
        if let Ok(Some(n)) = kronecker_order(m) {
            let _ = writeln!(out, "kronecker order: {n}");
        }
    }
    for k in (1..=horizon.min(8)).take_while(|&k| seq.has_index(k)) {
        if let Ok(n) = seq.norm(k) {
            let _ = writeln!(out, "t_{k} = {}", describe_norm(&n));
        }
    }
    Ok(out)
}

pub fn cmd_estimate_decay(config: &Path, seed: u64, trials: usize) -> Result<String, HarnessError> {
    let run = first_run(config)?;
    let dim = run.game.center.len().max(1);
    let mut support = run.support.clone();
    // estimation needs no constants; supply placeholders for fractals
    if support.decay.is_none() && support.kind != crate::config::SupportKindSection::Euclidean {
        support.decay = Some(crate::config::DecaySection { c: "1".into(), gamma: "1".into(), rho0: None });
    }
    let k = build_support(&support, dim)?;
    let est = estimate_decay(&k, trials, seed).map_err(io)?;
    let region = Ball::new(k.nearest_on_support(&vec![int(0); dim], &int(1)), int(1)).map_err(io)?;
    let pd = pointwise_dim_lower(&k, &region, trials.min(64), seed).map_err(io)?;
    let mut out = String::new();
    let _ = writeln!(out, "samples: {}", est.samples);
    let _ = writeln!(out, "gamma_hat: {:.4}", est.gamma_hat);
    let _ = writeln!(out, "C_hat: {:.4}", est.c_hat);
    let _ = writeln!(out, "D_hat: {:.4}", est.d_hat);
    let _ = writeln!(out, "pointwise_dim_lower: {:.4}", pd);
    Ok(out)
}

pub fn cmd_badapprox(config: &Path, count: usize) -> Result<String, HarnessError> {
    let run = first_run(config)?;
    let Some(SequenceSection::Badapprox { a, thin, .. }) = &run.sequence else {
        return Err(io("config has no [sequence] of kind badapprox"));
    };
    let a = affine_system(a)?;
    let mut out = String::new();
    if let Some(u) = rational_rank_check(&a, 1000) {
        let fam = rational_case_set(&a, u.clone());
        let _ = writeln!(out, "rational relation: u = {u:?}");
        let _ = writeln!(out, "excluded: {{x : u.x in Z}}, separation {}", fam.separation());
        let x: Vec<Scalar> = run.game.center.iter().filter_map(|s| parse_scalar(s).ok()).collect();
        if x.len() == a.n {
            let _ = writeln!(out, "center excluded: {}", fam.excludes(&x));
            if let Ok(m) = bad_margin(&a, &x, &int(0), DEFAULT_MARGIN_Q) {
                let _ = writeln!(out, "bad_margin(center, q <= {DEFAULT_MARGIN_Q}): {}", fmt_scalar(&m));
            }
        }
        return Ok(out);
    }
    let thin = thin.as_deref().and_then(|t| parse_scalar(t).ok()).unwrap_or_else(|| int(DEFAULT_THIN));
    let s = best_approx_sequence(&a, count, &thin).map_err(|e| io(e.to_string()))?;
    let _ = writeln!(out, "best approximations:");
    for y in &s.all {
        let _ = writeln!(out, "  {y:?}");
    }
    let _ = writeln!(out, "thinned (ratio >= {}):", fmt_scalar(&thin));
    for (y, e) in s.vectors.iter().zip(&s.errors) {
        let _ = writeln!(out, "  {y:?}  eta = {e}");
    }
    if let Some(r) = &s.ratio {
        let _ = writeln!(out, "certified min ratio: {}", fmt_scalar(r));
    }
    Ok(out)
}

/// Exit code of a batch: the first nonzero run code, else 0.
pub fn batch_exit_code(summaries: &[RunSummary]) -> i32 {
    summaries.iter().map(|s| s.exit_code).find(|&c| c != EXIT_WON).unwrap_or(EXIT_WON)
}
