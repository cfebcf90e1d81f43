//! Acceptance suite. Each criterion prints one PASS/FAIL line; tolerances
//! and sizes are pinned below. A criterion that cannot be met as stated is
//! listed in `KNOWN_UNATTAINABLE` and must keep failing.

// published figures, not approximations of constants
#![allow(clippy::approx_constant)]

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctlens::analysis::{engagement_compare, prevalence_bounds, ClassifiedPost, Direction, Measure};
use ctlens::classifiers::{lr_gradient, lr_objective, svm_objective, svm_subgradient};
use ctlens::corpus::{ingest_files, IngestOptions};
use ctlens::embedding::{top_n, Candidate};
use ctlens::llm::{render_prompt, PromptSpec, Role, Strategy};
use ctlens::split::make_stratified_folds;
use ctlens::stats::{cohen_kappa, fleiss_kappa, mann_whitney_u_with, rank_auc, UTestOptions};
use ctlens::{Error, Label, Verdict};

const BOUND_TOL: f64 = 0.001;
const BOUND_RUNTIME: Duration = Duration::from_secs(1);
const AUC_INSTANCES: usize = 1000;
const MWU_EXACT_MAX_N: usize = 8;
const MWU_APPROX_TOL: f64 = 0.02;
const MWU_APPROX_MIN_N: usize = 15;
const KAPPA_FIXTURE: f64 = 0.6;
const FLEISS_MATRICES: usize = 50;
const FLEISS_TOL: f64 = 1e-12;
const STATS_RUNTIME: Duration = Duration::from_secs(30);
const GRAD_CONFIGS: usize = 100;
const LR_GRAD_TOL: f64 = 1e-5;
const SVM_GRAD_TOL: f64 = 1e-4;
const FOLD_VECTORS: usize = 1000;
const FEW_SHOT_INSTANCES: usize = 500;
const SMOKE_RUNTIME: Duration = Duration::from_secs(60);
const ENGAGEMENT_P: f64 = 1e-3;

/// Criteria that fail as stated; see the project decisions record.
const KNOWN_UNATTAINABLE: &[&str] = &["published_prevalence_bounds"];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// subreddit, posts, ratio, upper, lower as published (P = 0.700, R = 0.738)
const PUBLISHED: [(&str, u64, f64, f64, f64); 12] = [
    ("conspiracy", 201054, 0.312, 0.422, 0.218),
    ("TruthLeaks", 872, 0.279, 0.377, 0.195),
    ("TopConspiracy", 311, 0.405, 0.547, 0.284),
    ("conspiracy_commons", 12941, 0.321, 0.434, 0.225),
    ("climateskeptics", 3078, 0.235, 0.318, 0.165),
    ("conspiracytheories", 11379, 0.337, 0.455, 0.236),
    ("DescentIntoTyranny", 121, 0.273, 0.369, 0.191),
    ("ConspiracyII", 1059, 0.355, 0.480, 0.249),
    ("FringeTheory", 385, 0.200, 0.270, 0.140),
    ("conspiracyundone", 1420, 0.419, 0.566, 0.293),
    ("C_S_T", 4974, 0.318, 0.430, 0.223),
    ("1984isreality", 43, 0.465, 0.628, 0.326),
];
const PUBLISHED_OVERALL: (f64, &str, &str) = (0.313, "0.423", "0.219");
const PUBLISHED_P: f64 = 0.700;
const PUBLISHED_R: f64 = 0.738;

fn published_prevalence_bounds() -> Outcome {
    let start = Instant::now();
    let mut misses = Vec::new();
    let mut worst = 0.0f64;
    for (sub, _, ratio, up, low) in PUBLISHED {
        let (u, l) = prevalence_bounds(ratio, PUBLISHED_P, PUBLISHED_R).map_err(|e| e.to_string())?;
        for (what, got, want) in [("upper", u, up), ("lower", l, low)] {
            let d = (got - want).abs();
            worst = worst.max(d);
            if d > BOUND_TOL + 1e-12 {
                misses.push(format!("{sub} {what} {got:.4} vs {want}"));
            }
        }
    }
    let (ratio, up, low) = PUBLISHED_OVERALL;
    let (u, l) = prevalence_bounds(ratio, PUBLISHED_P, PUBLISHED_R).map_err(|e| e.to_string())?;
    if format!("{u:.3}") != up || format!("{l:.3}") != low {
        misses.push(format!("Overall {u:.3}/{l:.3} vs {up}/{low}"));
    }
    check(start.elapsed() < BOUND_RUNTIME, || "too slow".into())?;
    check(misses.is_empty(), || {
        format!(
            "{} of 25 checks off (max |d| = {worst:.4}): {}",
            misses.len(),
            misses.join("; ")
        )
    })?;
    Ok(format!("24 bounds within {BOUND_TOL}, max |d| = {worst:.4}"))
}

const GOLDEN_TEXT: &str = "The moon landing was filmed in a studio.";

fn prompt_golden_files() -> Outcome {
    for (strategy, file) in [
        (Strategy::Simple, "simple.txt"),
        (Strategy::Justification, "justification.txt"),
        (Strategy::Sbs, "sbs.txt"),
    ] {
        let want = std::fs::read(common::golden(file)).map_err(|e| format!("{file}: {e}"))?;
        let spec = PromptSpec {
            strategy,
            n_shots: 0,
            examples: vec![],
            target_text: GOLDEN_TEXT.into(),
            seed: 0,
            allow_any_shots: false,
        };
        let msgs = render_prompt(&spec).map_err(|e| e.to_string())?;
        check(msgs.len() == 1, || format!("{strategy}: {} messages", msgs.len()))?;
        check(msgs[0].content.as_bytes() == want.as_slice(), || {
            format!("{strategy} differs from {file}: {:?}", msgs[0].content)
        })?;
        for n in [1usize, 3, 5] {
            let mut examples = Vec::new();
            for i in 0..n {
                examples.push((format!("ct {i}"), Label::Ct));
                examples.push((format!("non {i}"), Label::NonCt));
            }
            let msgs = render_prompt(&PromptSpec {
                n_shots: n,
                examples,
                ..spec.clone()
            })
            .map_err(|e| e.to_string())?;
            let turns = msgs.iter().filter(|m| m.role == Role::Assistant).count();
            check(turns == 2 * n, || format!("{strategy} {n}-shot: {turns} example turns"))?;
            check(
                msgs.last().map(|m| m.content.as_bytes()) == Some(want.as_slice()),
                || format!("{strategy} {n}-shot query turn differs"),
            )?;
        }
    }
    Ok("3 templates byte-exact; 2n example turns for n in {1,3,5}".into())
}

fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut twice = 0u64;
    for p in pos {
        for n in neg {
            twice += if p > n {
                2
            } else if p == n {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / 2.0 / (pos.len() * neg.len()) as f64
}

/// Two-sided p by enumerating every assignment of the pooled values to the
/// first sample.
fn enumerate_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let n1 = x.len();
    let nn = (x.len() * y.len()) as f64;
    let twice_u = |sel: &[bool]| -> i64 {
        let mut t = 0i64;
        for (i, a) in pooled.iter().enumerate() {
            if !sel[i] {
                continue;
            }
            for (j, b) in pooled.iter().enumerate() {
                if sel[j] {
                    continue;
                }
                t += if a > b {
                    2
                } else if a == b {
                    1
                } else {
                    0
                };
            }
        }
        t
    };
    let mut observed = vec![false; pooled.len()];
    observed[..n1].iter_mut().for_each(|s| *s = true);
    let obs_dev = (twice_u(&observed) as f64 - nn).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    let n = pooled.len();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let sel: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        total += 1;
        if (twice_u(&sel) as f64 - nn).abs() >= obs_dev {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

/// Reference Fleiss' kappa, written from the textbook definition.
fn fleiss_reference(m: &[Vec<u32>], raters: u32) -> Option<f64> {
    let n = raters as f64;
    let items = m.len() as f64;
    let cats = m[0].len();
    let p_bar = m
        .iter()
        .map(|row| (row.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() - n) / (n * (n - 1.0)))
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..cats)
        .map(|j| {
            let pj = m.iter().map(|row| row[j] as f64).sum::<f64>() / (items * n);
            pj * pj
        })
        .sum();
    (p_e < 1.0).then(|| (p_bar - p_e) / (1.0 - p_e))
}

fn statistical_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);

    for i in 0..AUC_INSTANCES {
        let np = rng.random_range(1..40);
        let nn = rng.random_range(1..40);
        let levels = rng.random_range(2..12);
        let draw = |rng: &mut ChaCha8Rng, k| {
            (0..k)
                .map(|_| rng.random_range(0..levels) as f64 / 4.0)
                .collect::<Vec<_>>()
        };
        let pos = draw(&mut rng, np);
        let neg = draw(&mut rng, nn);
        let got = rank_auc(&pos, &neg).map_err(|e| e.to_string())?;
        let want = brute_auc(&pos, &neg);
        check(got == want, || format!("AUC instance {i}: {got} vs {want}"))?;
    }

    let mut exact_cases = 0;
    for n1 in 1..=MWU_EXACT_MAX_N {
        for n2 in 1..=MWU_EXACT_MAX_N {
            let x: Vec<f64> = (0..n1).map(|_| rng.random_range(0..6) as f64).collect();
            let y: Vec<f64> = (0..n2).map(|_| rng.random_range(0..6) as f64).collect();
            let got = mann_whitney_u_with(&x, &y, UTestOptions { exact_cap: usize::MAX })
                .map_err(|e| e.to_string())?
                .p_two_sided;
            let want = enumerate_p(&x, &y);
            check(got == want, || format!("exact p for n1={n1}, n2={n2}: {got} vs {want}"))?;
            exact_cases += 1;
        }
    }

    let mut worst_approx = 0.0f64;
    for trial in 0..40 {
        let n1 = MWU_APPROX_MIN_N + trial % 6;
        let n2 = MWU_APPROX_MIN_N + (trial / 6) % 6;
        // distinct values: a shuffled range, shifted for half the trials
        let mut pool: Vec<f64> = (0..(n1 + n2)).map(|v| v as f64).collect();
        ctlens::rng::shuffle(&mut pool, &mut ctlens::rng::seeded(trial as u64));
        let shift = if trial % 2 == 0 { 0.0 } else { 0.37 * trial as f64 };
        let x: Vec<f64> = pool[..n1].iter().map(|v| v + shift).collect();
        let y = &pool[n1..];
        if x.iter().any(|a| y.contains(a)) {
            continue;
        }
        let exact = mann_whitney_u_with(&x, y, UTestOptions { exact_cap: usize::MAX })
            .map_err(|e| e.to_string())?
            .p_two_sided;
        let approx = mann_whitney_u_with(&x, y, UTestOptions { exact_cap: 0 })
            .map_err(|e| e.to_string())?
            .p_two_sided;
        worst_approx = worst_approx.max((exact - approx).abs());
    }
    check(worst_approx < MWU_APPROX_TOL, || {
        format!("normal approximation off by {worst_approx}")
    })?;

    // 20 items: 8 yes/yes, 8 no/no, 2 yes/no, 2 no/yes -> po 0.8, pe 0.5
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (va, vb, k) in [
        (Verdict::Yes, Verdict::Yes, 8),
        (Verdict::No, Verdict::No, 8),
        (Verdict::Yes, Verdict::No, 2),
        (Verdict::No, Verdict::Yes, 2),
    ] {
        a.extend(std::iter::repeat_n(va, k));
        b.extend(std::iter::repeat_n(vb, k));
    }
    let k = cohen_kappa(&a, &b).map_err(|e| e.to_string())?.kappa;
    check((k - KAPPA_FIXTURE).abs() < 1e-15, || format!("Cohen kappa {k}"))?;

    let mut fleiss_checked = 0;
    while fleiss_checked < FLEISS_MATRICES {
        let items = rng.random_range(2..10);
        let cats = rng.random_range(2..5);
        let raters: u32 = rng.random_range(2..7);
        let m: Vec<Vec<u32>> = (0..items)
            .map(|_| {
                let mut row = vec![0u32; cats];
                for _ in 0..raters {
                    row[rng.random_range(0..cats)] += 1;
                }
                row
            })
            .collect();
        match (fleiss_kappa(&m, raters), fleiss_reference(&m, raters)) {
            (Ok(got), Some(want)) => {
                check((got.kappa - want).abs() <= FLEISS_TOL, || {
                    format!("Fleiss {} vs {want}", got.kappa)
                })?;
                fleiss_checked += 1;
            }
            (Err(Error::Undefined(_)) | Ok(_), None) => {}
            (got, want) => return Err(format!("Fleiss disagreement on {m:?}: {got:?} vs {want:?}")),
        }
    }
    check(start.elapsed() < STATS_RUNTIME, || {
        format!("took {:?}", start.elapsed())
    })?;
    Ok(format!(
        "{AUC_INSTANCES} AUC, {exact_cases} exact-p, approx max |d| = {worst_approx:.4}, kappa 0.6, {FLEISS_MATRICES} Fleiss"
    ))
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-12)
}

/// Central differences over (weights, bias).
fn numeric_grad(f: impl Fn(&[f64], f64) -> f64, w: &[f64], b: f64, h: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(w.len() + 1);
    for i in 0..w.len() {
        let mut up = w.to_vec();
        let mut down = w.to_vec();
        up[i] += h;
        down[i] -= h;
        g.push((f(&up, b) - f(&down, b)) / (2.0 * h));
    }
    g.push((f(w, b + h) - f(w, b - h)) / (2.0 * h));
    g
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (mut worst_lr, mut worst_svm) = (0.0f64, 0.0f64);
    let mut svm_done = 0;
    for _ in 0..GRAD_CONFIGS {
        let n = rng.random_range(4..25);
        let d = rng.random_range(1..8);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<Label> = (0..n).map(|_| Label::from_positive(rng.random_bool(0.4))).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let b = rng.random_range(-1.0..1.0);
        let l2 = 10f64.powf(rng.random_range(-4.0..0.0));
        let c = 10f64.powf(rng.random_range(-1.0..2.0));

        let (gw, gb) = lr_gradient(&w, b, &x, &y, l2);
        let analytic: Vec<f64> = gw.into_iter().chain([gb]).collect();
        let numeric = numeric_grad(|w, b| lr_objective(w, b, &x, &y, l2), &w, b, 1e-5);
        worst_lr = worst_lr.max(rel_err(&analytic, &numeric));

        // non-kink: every margin at least 1e-3 away from 1
        let h = 1e-6;
        let kink = x.iter().zip(&y).any(|(xi, yi)| {
            let m =
                if yi.is_positive() { 1.0 } else { -1.0 } * (xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b);
            (m - 1.0).abs() < 1e-3
        });
        if kink {
            continue;
        }
        let (gw, gb) = svm_subgradient(&w, b, &x, &y, c);
        let analytic: Vec<f64> = gw.into_iter().chain([gb]).collect();
        let numeric = numeric_grad(|w, b| svm_objective(w, b, &x, &y, c), &w, b, h);
        worst_svm = worst_svm.max(rel_err(&analytic, &numeric));
        svm_done += 1;
    }
    check(worst_lr < LR_GRAD_TOL, || {
        format!("LR gradient relative error {worst_lr:e}")
    })?;
    check(worst_svm < SVM_GRAD_TOL, || {
        format!("SVM subgradient relative error {worst_svm:e}")
    })?;
    check(svm_done >= GRAD_CONFIGS / 2, || {
        format!("only {svm_done} kink-free SVM configurations")
    })?;
    Ok(format!(
        "LR max rel err {worst_lr:.1e} over {GRAD_CONFIGS}, SVM {worst_svm:.1e} over {svm_done} kink-free"
    ))
}

fn fold_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for trial in 0..FOLD_VECTORS {
        let k = rng.random_range(2..11);
        let pos = rng.random_range(k..k + 120);
        let neg = rng.random_range(k..k + 120);
        let mut labels: Vec<(String, Label)> = (0..pos)
            .map(|i| (format!("p{i}"), Label::Ct))
            .chain((0..neg).map(|i| (format!("n{i}"), Label::NonCt)))
            .collect();
        ctlens::rng::shuffle(&mut labels, &mut rng);
        let seed = rng.random();
        let folds = make_stratified_folds(&labels, k, seed).map_err(|e| e.to_string())?;
        check(folds.len() == labels.len(), || {
            format!("trial {trial}: not a partition")
        })?;
        let mut seen = BTreeSet::new();
        let mut counts = vec![[0usize; 2]; k];
        for (a, (id, l)) in folds.iter().zip(&labels) {
            check(&a.post_id == id && a.fold < k && seen.insert(id.clone()), || {
                format!("trial {trial}: bad assignment for {id}")
            })?;
            counts[a.fold][usize::from(l.is_positive())] += 1;
        }
        for class in 0..2 {
            let max = counts.iter().map(|c| c[class]).max().unwrap_or(0);
            let min = counts.iter().map(|c| c[class]).min().unwrap_or(0);
            check(max - min <= 1, || format!("trial {trial}: class spread {min}..{max}"))?;
        }
    }
    Ok(format!(
        "{FOLD_VECTORS} label vectors partitioned, per-class spread <= 1"
    ))
}

/// Exact comparison of cos(q, a) against cos(q, b) for integer vectors:
/// sign(d_a) d_a^2 |b|^2 versus sign(d_b) d_b^2 |a|^2.
fn cmp_cos(q: &[i64], a: &[i64], b: &[i64]) -> std::cmp::Ordering {
    let dot = |u: &[i64], v: &[i64]| u.iter().zip(v).map(|(x, y)| (x * y) as i128).sum::<i128>();
    let (da, db) = (dot(q, a), dot(q, b));
    let (na, nb) = (dot(a, a), dot(b, b));
    (da.signum() * da * da * nb).cmp(&(db.signum() * db * db * na))
}

fn parallel_distinct(a: &[i64], b: &[i64]) -> bool {
    if a == b {
        return false;
    }
    let dot = |u: &[i64], v: &[i64]| u.iter().zip(v).map(|(x, y)| (x * y) as i128).sum::<i128>();
    let d = dot(a, b);
    d > 0 && d * d == dot(a, a) * dot(b, b)
}

fn few_shot_selection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut instances = 0;
    while instances < FEW_SHOT_INSTANCES {
        let dim = rng.random_range(2..6);
        let distinct = rng.random_range(2..12);
        let basis: Vec<Vec<i64>> = (0..distinct)
            .map(|_| {
                let mut v: Vec<i64> = (0..dim).map(|_| rng.random_range(-4..5)).collect();
                if v.iter().all(|x| *x == 0) {
                    v[0] = 1;
                }
                v
            })
            .collect();
        if basis
            .iter()
            .enumerate()
            .any(|(i, a)| basis[..i].iter().any(|b| parallel_distinct(a, b)))
        {
            continue;
        }
        let size = rng.random_range(1..30);
        let pool: Vec<(String, Vec<i64>)> = (0..size)
            .map(|i| {
                (
                    format!("d{:02}", rng.random_range(0..100) * 100 + i),
                    basis[rng.random_range(0..distinct)].clone(),
                )
            })
            .collect();
        let query = basis[rng.random_range(0..distinct)].clone();
        let query_id = pool
            .get(rng.random_range(0..pool.len() + 3))
            .map(|p| p.0.clone())
            .unwrap_or("q".into());
        let n = rng.random_range(0..=size.min(6));

        let floats: Vec<(String, Vec<f64>)> = pool
            .iter()
            .map(|(id, v)| (id.clone(), v.iter().map(|x| *x as f64).collect()))
            .collect();
        let cands: Vec<Candidate> = floats.iter().map(|(id, v)| Candidate { id, vector: v }).collect();
        let qf: Vec<f64> = query.iter().map(|x| *x as f64).collect();

        let mut oracle: Vec<&(String, Vec<i64>)> = pool.iter().filter(|p| p.0 != query_id).collect();
        if oracle.len() < n {
            continue;
        }
        oracle.sort_by(|a, b| cmp_cos(&query, &b.1, &a.1).then_with(|| a.0.cmp(&b.0)));
        let want: Vec<&str> = oracle[..n].iter().map(|p| p.0.as_str()).collect();
        let got = top_n(&query_id, &qf, &cands, n).map_err(|e| e.to_string())?;
        let got: Vec<&str> = got.neighbors.iter().map(|(id, _)| id.as_str()).collect();
        check(got == want, || format!("instance {instances}: {got:?} vs {want:?}"))?;
        instances += 1;
    }
    Ok(format!("{FEW_SHOT_INSTANCES} pools match exhaustive top-n"))
}

fn pipeline_smoke() -> Outcome {
    let start = Instant::now();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = common::run_smoke(a.path());
    let second = common::run_smoke(b.path());
    check(first == second, || "reports differ between two runs".into())?;
    check(first.prevalence_md.contains("| Overall | 30 |"), || {
        first.prevalence_md.clone()
    })?;
    check(first.ecdf_csv.starts_with("group,measure,x,F\n"), || {
        "eCDF header".into()
    })?;
    let elapsed = start.elapsed();
    check(elapsed < SMOKE_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!("two runs bit-identical in {:.1}s", elapsed.as_secs_f64()))
}

fn filtering_semantics() -> Outcome {
    let (docs, summary) =
        ingest_files(&[common::fixture("posts.ndjson")], IngestOptions::default()).map_err(|e| e.to_string())?;
    // hand count: 40 posts; rm00-02 [removed], dl00-01 [deleted], da00 deleted
    // author; sh00-03 shorter than 30 characters (sh03 is 27 characters but
    // 31 bytes); 30 remain
    check(summary.parsed == 40, || format!("parsed {}", summary.parsed))?;
    check(
        summary.filter.full_count == 40 && summary.filter.clean_count == 34,
        || format!("filter {:?}", summary.filter),
    )?;
    check(summary.too_short == 4, || format!("too short {}", summary.too_short))?;
    let ids: BTreeSet<&str> = docs.iter().map(|d| d.post_id.as_str()).collect();
    let expected: BTreeSet<String> = (0..12)
        .map(|i| format!("ct{i:02}"))
        .chain((0..18).map(|i| format!("nc{i:02}")))
        .collect();
    check(ids == expected.iter().map(String::as_str).collect(), || {
        format!("kept {ids:?}")
    })?;
    let karma: BTreeMap<&str, u64> = docs.iter().map(|d| (d.post_id.as_str(), d.karma)).collect();
    check(karma["ct05"] == 0 && karma["nc02"] == 0, || {
        "negative scores not floored".into()
    })?;
    Ok("6 sentinel and 4 short posts excluded, 30 kept".into())
}

fn engagement_direction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut posts = Vec::new();
    for i in 0..50 {
        let base: u64 = rng.random_range(0..30);
        let karma: u64 = rng.random_range(0..200);
        for (ct, shift) in [(false, 0u64), (true, 10)] {
            posts.push(ClassifiedPost {
                post_id: format!("{}{i}", if ct { "c" } else { "n" }),
                subreddit: "s".into(),
                predicted: Label::from_positive(ct),
                score: if ct { 0.9 } else { 0.1 },
                num_comments: base + shift,
                karma: karma + shift * 10,
            });
        }
    }
    let report = engagement_compare(&posts).map_err(|e| e.to_string())?;
    let comments = report
        .comparisons
        .iter()
        .find(|c| c.measure == Measure::Comments)
        .ok_or("no comments comparison")?;
    check(comments.direction == Direction::CtHigher, || {
        format!("direction {:?}", comments.direction)
    })?;
    check(comments.test.p_two_sided < ENGAGEMENT_P, || {
        format!("p = {}", comments.test.p_two_sided)
    })?;
    Ok(format!("CT higher, p = {:.2e}", comments.test.p_two_sided))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("published_prevalence_bounds", published_prevalence_bounds),
        ("prompt_golden_files", prompt_golden_files),
        ("statistical_oracles", statistical_oracles),
        ("gradient_checks", gradient_checks),
        ("fold_properties", fold_properties),
        ("few_shot_selection", few_shot_selection),
        ("pipeline_smoke", pipeline_smoke),
        ("filtering_semantics", filtering_semantics),
        ("engagement_direction", engagement_direction),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert_eq!(failed, KNOWN_UNATTAINABLE, "unexpected acceptance outcome");
}

/// The published upper bounds are consistent with R rounded to 0.74.
#[test]
fn published_upper_bounds_match_two_decimal_recall() {
    for (sub, _, ratio, up, low) in PUBLISHED {
        let (u, l) = prevalence_bounds(ratio, PUBLISHED_P, 0.74).unwrap();
        assert!((u - up).abs() <= BOUND_TOL, "{sub}: {u} vs {up}");
        assert!((l - low).abs() <= BOUND_TOL, "{sub}: {l} vs {low}");
    }
}
