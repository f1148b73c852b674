//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! Every criterion also returns a serialized artifact; criterion 10 runs
//! criteria 1-9 a second time and compares those artifacts byte for byte.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use hgc::coding::{allocate, verify_decodability, CodingError, CodingScheme, VerifyMode};
use hgc::config::Config;
use hgc::jncss::{self, JncssError};
use hgc::rng::{derive_seed, Streams};
use hgc::runtime::{
    case1_expected, case1_optimal, case2_expected, case2_optimal, sample_transmissions, EdgeProfile, HomogeneousParams,
    IterationSample, RawDraws, SystemProfile, WorkerProfile,
};
use hgc::schemes::{Scheme, SchemeKind, SchemeSpec};
use hgc::stats::{chunked, Moments};
use hgc::tradeoff::{bounds_coincide, conventional_min_load, hgc_min_load};
use hgc::traindemo::{run_centralized, run_training, StragglerPolicy, SyntheticTask};
use hgc::{Tolerance, Topology};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
    artifact: String,
}

fn artifact(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("artifact serializes")
}

fn random_topology(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> Topology {
    let n = rng.random_range(1..=max_n);
    Topology::new((0..n).map(|_| rng.random_range(1..=max_m)).collect()).unwrap()
}

fn random_tolerance(rng: &mut ChaCha8Rng, t: &Topology) -> Tolerance {
    Tolerance::new(rng.random_range(0..t.edges()), rng.random_range(0..t.min_workers()))
}

/// A random instance that admits a code: topology, tolerance and the first
/// valid `K` among small multiples of `Σm`.
fn random_codable(rng: &mut ChaCha8Rng) -> (Topology, Tolerance, usize) {
    loop {
        let t = random_topology(rng, 4, 5);
        let tol = random_tolerance(rng, &t);
        for mult in 1..=3 {
            let k = t.total_workers() * mult;
            match allocate(&t, tol, k) {
                Ok(_) => return (t, tol, k),
                Err(CodingError::Divisibility { .. }) => continue,
                Err(_) => break,
            }
        }
    }
}

fn criterion_1_and_2() -> (Outcome, Outcome) {
    let start = Instant::now();
    let plan = allocate(&Topology::uniform(3, 3).unwrap(), Tolerance::new(1, 1), 9).unwrap();
    let example = CodingScheme::build(plan, SEED).unwrap();
    let report = verify_decodability(&example, VerifyMode::Exhaustive);
    let example_time = start.elapsed();
    let mut ok1 = report.all_passed()
        && report.total_patterns == 81
        && report.worst_relative_error <= 1e-9
        && example_time < Duration::from_secs(1);
    let mut detail1 = format!(
        "Example 1 {} (worst rel. error {:.1e}, {:.0} ms)",
        report.summary(),
        report.worst_relative_error,
        example_time.as_secs_f64() * 1e3
    );

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, 1));
    let mut schemes = vec![example.clone()];
    let mut summaries = vec![report.summary()];
    let mut random_pass = 0;
    let mut patterns = 0u128;
    let mut worst = report.worst_relative_error;
    for case in 0..50 {
        let (t, tol, k) = random_codable(&mut rng);
        let code = match CodingScheme::build(allocate(&t, tol, k).unwrap(), derive_seed(SEED, 100 + case)) {
            Ok(c) => c,
            Err(e) => {
                detail1.push_str(&format!("; build failed for {:?} {tol} K={k}: {e}", t.workers_per_edge()));
                ok1 = false;
                continue;
            }
        };
        let r = verify_decodability(&code, VerifyMode::Exhaustive);
        patterns += r.total_patterns;
        worst = worst.max(r.worst_relative_error);
        if r.all_passed() && r.worst_relative_error <= 1e-9 {
            random_pass += 1;
        } else {
            detail1.push_str(&format!("; {:?} {tol} K={k}: {}", t.workers_per_edge(), r.summary()));
        }
        summaries.push(r.summary());
        schemes.push(code);
    }
    ok1 &= random_pass == 50;
    detail1.push_str(&format!("; {random_pass}/50 random topologies pass ({patterns} patterns, worst {worst:.1e})"));

    // criterion 2 on every constructed code
    let mut violations = Vec::new();
    for s in &schemes {
        let p = &s.plan;
        let total = p.topology.total_workers();
        let product = p.k * (p.tolerance.edge + 1) * (p.tolerance.worker + 1);
        let sizes_ok = p.worker_sets.iter().flatten().all(|w| w.len() == p.load)
            && s.expanded_worker_codes
                .iter()
                .all(|d| (0..d.rows).all(|j| d.row(j).iter().filter(|v| **v != 0.0).count() == p.load));
        if p.load * total != product || !sizes_ok {
            violations.push(format!("{:?} {} K={}", p.topology.workers_per_edge(), p.tolerance, p.k));
        }
    }
    let ok2 = example.plan.load == 4 && violations.is_empty();
    let detail2 = format!(
        "Example 1 D = {}; D·Σm = K(s_e+1)(s_w+1) on {}/{} codes{}",
        example.plan.load,
        schemes.len() - violations.len(),
        schemes.len(),
        if violations.is_empty() { String::new() } else { format!(" (violations: {violations:?})") }
    );
    let loads: Vec<(usize, usize)> = schemes.iter().map(|s| (s.plan.k, s.plan.load)).collect();
    (
        Outcome {
            pass: ok1,
            detail: detail1,
            artifact: artifact(&(summaries, worst, schemes.iter().map(CodingScheme::to_json).collect::<Vec<_>>())),
        },
        Outcome { pass: ok2, detail: detail2, artifact: artifact(&loads) },
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, 3));
    let (mut strict, mut excluded, mut tight, mut violations) = (0, 0, 0, Vec::new());
    for _ in 0..1000 {
        let t = random_topology(&mut rng, 8, 10);
        let tol = random_tolerance(&mut rng, &t);
        let conv = conventional_min_load(&t, tol).unwrap();
        let hier = hgc_min_load(&t, tol).unwrap();
        if conv < hier {
            violations.push(format!("{:?} {tol}", t.workers_per_edge()));
        }
        if bounds_coincide(&t, tol) {
            excluded += 1;
            if tol.edge + 1 == t.edges() && tol.worker + 1 == t.min_workers() {
                tight += 1;
            }
            if conv != hier {
                violations.push(format!("{:?} {tol}: marked equal but differ", t.workers_per_edge()));
            }
            continue;
        }
        if conv > hier {
            strict += 1;
        } else {
            violations.push(format!("{:?} {tol}", t.workers_per_edge()));
        }
    }
    Outcome {
        pass: violations.is_empty() && strict + excluded == 1000,
        detail: format!(
            "strict on {strict}/{} non-coinciding instances; {excluded} coinciding excluded ({tight} tight n=s_e+1, m=s_w+1); {} violations",
            1000 - excluded,
            violations.len()
        ),
        artifact: artifact(&(strict, excluded, tight, violations)),
    }
}

fn random_profiles(rng: &mut ChaCha8Rng, t: &Topology) -> SystemProfile {
    let edges = (0..t.edges())
        .map(|_| EdgeProfile { tau: rng.random_range(1.0..500.0), p: rng.random_range(0.0..0.3) })
        .collect();
    let workers = (0..t.edges())
        .map(|i| {
            (0..t.workers(i))
                .map(|_| WorkerProfile {
                    c: rng.random_range(1.0..50.0),
                    gamma: rng.random_range(0.01..1.0),
                    tau: rng.random_range(1.0..100.0),
                    p: rng.random_range(0.0..0.5),
                })
                .collect()
        })
        .collect();
    SystemProfile { edges, workers }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, 4));
    let (mut equal, mut both_empty, mut mismatches, mut visited) = (0, 0, Vec::new(), 0u128);
    let mut objectives = Vec::new();
    for _ in 0..100 {
        let t = random_topology(&mut rng, 4, 5);
        let p = random_profiles(&mut rng, &t);
        let k = t.total_workers() * rng.random_range(1..=3);
        visited += jncss::brute_force_size(&t, k);
        let fast = jncss::solve(&t, &p, k).map(|r| r.selection);
        let brute = jncss::brute_force_solve(&t, &p, k);
        match (fast, brute) {
            (Ok(a), Ok(b)) if a.objective.to_bits() == b.objective.to_bits() && a.is_valid(&t) => {
                equal += 1;
                objectives.push(a.objective);
            }
            (Err(JncssError::NoFeasibleTolerance { .. }), Err(JncssError::NoFeasibleTolerance { .. })) => {
                both_empty += 1
            }
            (a, b) => mismatches.push(format!(
                "{:?} K={k}: {:?} vs {:?}",
                t.workers_per_edge(),
                a.map(|s| s.objective),
                b.map(|s| s.objective)
            )),
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: mismatches.is_empty() && equal > 0 && elapsed < Duration::from_secs(30),
        detail: format!(
            "{equal} equal objectives, {both_empty} with no admissible tolerance in both, {} mismatches; {visited} brute-force selections in {:.1} s",
            mismatches.len(),
            elapsed.as_secs_f64()
        ),
        artifact: artifact(&(objectives, mismatches)),
    }
}

#[derive(Clone, Copy, Serialize)]
enum Family {
    Exponential { rate: f64 },
    ScaledGeometric { tau: f64, p: f64 },
    ShiftedExponential { shift: f64, rate: f64 },
    Constant { value: f64 },
}

impl Family {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        match rng.random_range(0..4) {
            0 => Family::Exponential { rate: rng.random_range(0.05..2.0) },
            1 => Family::ScaledGeometric { tau: rng.random_range(1.0..20.0), p: rng.random_range(0.05..0.7) },
            2 => Family::ShiftedExponential { shift: rng.random_range(0.0..10.0), rate: rng.random_range(0.05..2.0) },
            _ => Family::Constant { value: rng.random_range(0.0..20.0) },
        }
    }

    fn mean_var(self) -> (f64, f64) {
        match self {
            Family::Exponential { rate } => (1.0 / rate, 1.0 / (rate * rate)),
            Family::ScaledGeometric { tau, p } => (tau / (1.0 - p), tau * tau * p / ((1.0 - p) * (1.0 - p))),
            Family::ShiftedExponential { shift, rate } => (shift + 1.0 / rate, 1.0 / (rate * rate)),
            Family::Constant { value } => (value, 0.0),
        }
    }

    fn sample(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Family::Exponential { rate } => Exp::new(rate).unwrap().sample(rng),
            Family::ScaledGeometric { tau, p } => tau * sample_transmissions(p, rng) as f64,
            Family::ShiftedExponential { shift, rate } => shift + Exp::new(rate).unwrap().sample(rng),
            Family::Constant { value } => value,
        }
    }
}

fn criterion_5() -> Outcome {
    const TRIALS: u64 = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, 5));
    let (mut checks, mut violations, mut worst_ratio) = (0, Vec::new(), 0.0f64);
    let mut estimates = Vec::new();
    for family in 0..20u64 {
        let n = rng.random_range(2..=6);
        let vars: Vec<Family> = (0..n).map(|_| Family::random(&mut rng)).collect();
        let (means, variances): (Vec<f64>, Vec<f64>) = vars.iter().map(|f| f.mean_var()).unzip();
        let streams = Streams::new(derive_seed(SEED, 500 + family));
        let acc = chunked(
            TRIALS,
            || vec![Moments::default(); n],
            |acc, trial| {
                let mut r = streams.stream(trial, 0);
                let mut xs: Vec<f64> = vars.iter().map(|f| f.sample(&mut r)).collect();
                xs.sort_by(f64::total_cmp);
                for (m, x) in acc.iter_mut().zip(xs) {
                    m.push(x);
                }
            },
            |a, b| a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y)),
        );
        let mut sorted_means = means.clone();
        sorted_means.sort_by(f64::total_cmp);
        for r in 1..=n {
            let bound = jncss::order_stat_gap_bound(r, &means, &variances).unwrap();
            let gap = (acc[r - 1].mean - sorted_means[r - 1]).abs();
            let margin = 3.0 * acc[r - 1].std_error();
            checks += 1;
            if gap > bound + margin {
                violations.push(format!("family {family} r={r}: gap {gap:.4} > bound {bound:.4} + {margin:.4}"));
            }
            if bound > 0.0 {
                worst_ratio = worst_ratio.max(gap / bound);
            }
            estimates.push((family, r, acc[r - 1].mean, bound));
        }
    }
    Outcome {
        pass: violations.is_empty(),
        detail: format!(
            "{checks} order statistics over 20 families at 1e6 trials; {} violations; largest gap/bound {worst_ratio:.3}",
            violations.len()
        ),
        artifact: artifact(&(estimates, violations)),
    }
}

fn sec6() -> (Config, SystemProfile) {
    let c = Config::preset("paper-sec6").unwrap();
    let p = c.validate().unwrap();
    (c, p)
}

fn criterion_6() -> Outcome {
    let (c, p) = sec6();
    let report = jncss::solve(&c.topology, &p, c.k).unwrap();
    let sel = &report.selection;
    let inputs = jncss::estimate_gap_inputs(&c.topology, &p, sel.tolerance, sel.load, 100_000, c.seed).unwrap();
    let bound = jncss::theorem3_bound(sel, &inputs).unwrap();
    let gap = (inputs.runtime_mean - sel.objective).abs();
    Outcome {
        pass: gap <= bound.bound,
        detail: format!(
            "selection {} D={}: |E[T] - T̂| = |{:.2} - {:.2}| = {:.2} ms <= bound {:.2} ms",
            sel.tolerance, sel.load, inputs.runtime_mean, sel.objective, gap, bound.bound
        ),
        artifact: artifact(&(sel, inputs.runtime_mean, inputs.runtime_std_error, &bound)),
    }
}

fn simulate_homogeneous(params: &HomogeneousParams, tol: Tolerance, trials: u64, seed: u64) -> Moments {
    let t = params.topology();
    let p = params.profiles();
    let d = params.k * (tol.edge + 1) * (tol.worker + 1) / (params.n * params.m);
    let streams = Streams::new(seed);
    chunked(
        trials,
        Moments::default,
        |m, trial| {
            let draws = RawDraws::sample(&t, &p, &streams, trial);
            m.push(IterationSample::from_totals(draws.worker_totals(&p, d), &draws.edge_upload_times(&p), tol).total);
        },
        |a, b| a.merge(&b),
    )
}

fn criterion_7() -> Outcome {
    let params =
        HomogeneousParams { c: 10.0, gamma: 0.1, tau1: 100.0, tau2: 100.0, p1: 0.0, p2: 0.0, n: 4, m: 10, k: 40 };
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for tol in Tolerance::domain(&params.topology()) {
        if (params.n - tol.edge) * (params.m - tol.worker) < 20 {
            continue;
        }
        let sim = simulate_homogeneous(&params, tol, 10_000, derive_seed(SEED, 700));
        let formula = case1_expected(&params, tol.edge, tol.worker);
        let rel = (sim.mean - formula).abs() / formula;
        worst = worst.max(rel);
        rows.push((tol, sim.mean, formula, rel));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, 7));
    let mut disagreements = Vec::new();
    for _ in 0..1000 {
        let hp = HomogeneousParams {
            c: rng.random_range(0.01..100.0),
            gamma: rng.random_range(0.001..10.0),
            tau1: rng.random_range(0.0..200.0),
            tau2: rng.random_range(0.0..200.0),
            p1: rng.random_range(0.0..0.9),
            p2: rng.random_range(0.01..0.95),
            n: rng.random_range(1..=8),
            m: rng.random_range(1..=12),
            k: rng.random_range(1..=200),
        };
        // grid over the endpoints, ties to the lexicographically smaller tolerance
        let pick = |cands: &[(Tolerance, f64)]| {
            cands.iter().copied().fold(None::<(Tolerance, f64)>, |best, (t, v)| match best {
                Some((bt, bv)) if bv < v || (bv == v && bt <= t) => Some((bt, bv)),
                _ => Some((t, v)),
            })
        };
        let ends_e = [0, hp.n - 1];
        let ends_w = [0, hp.m - 1];
        let c1: Vec<(Tolerance, f64)> = ends_e
            .iter()
            .flat_map(|&e| ends_w.iter().map(move |&w| Tolerance::new(e, w)))
            .map(|t| (t, case1_expected(&hp, t.edge, t.worker)))
            .collect();
        let (g1, v1) = pick(&c1).unwrap();
        let opt1 = case1_optimal(&hp);
        let full1 = Tolerance::domain(&hp.topology())
            .map(|t| case1_expected(&hp, t.edge, t.worker))
            .fold(f64::INFINITY, f64::min);
        if opt1.tolerance != g1 || opt1.value.to_bits() != v1.to_bits() || full1 < v1 {
            disagreements
                .push(format!("case1 {hp:?}: {} {} vs grid {g1} {v1} (full {full1})", opt1.tolerance, opt1.value));
        }
        let c2: Vec<(Tolerance, f64)> =
            ends_e.iter().map(|&e| (Tolerance::new(e, 0), case2_expected(&hp, e).unwrap())).collect();
        let (g2, v2) = pick(&c2).unwrap();
        let opt2 = case2_optimal(&hp).unwrap();
        let full2 = (0..hp.n).map(|e| case2_expected(&hp, e).unwrap()).fold(f64::INFINITY, f64::min);
        if opt2.tolerance != g2 || opt2.value.to_bits() != v2.to_bits() || full2 < v2 {
            disagreements
                .push(format!("case2 {hp:?}: {} {} vs grid {g2} {v2} (full {full2})", opt2.tolerance, opt2.value));
        }
    }
    Outcome {
        pass: worst <= 0.05 && disagreements.is_empty(),
        detail: format!(
            "case1 vs simulation worst relative error {:.2}% over {} tolerances; closed-form optima agree with grid on 1000/1000 instances: {}",
            worst * 100.0,
            rows.len(),
            disagreements.is_empty()
        ),
        artifact: artifact(&(rows, disagreements)),
    }
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let (c, _) = sec6();
    let exp = hgc::sim::run(&c).unwrap();
    let elapsed = start.elapsed();
    let rows = &exp.report.schemes;
    let mut failures = Vec::new();
    for row in rows {
        for r in &row.results {
            if let Some(e) = &r.error {
                failures.push(format!("{} K={}: {e}", row.scheme, r.k));
            }
        }
    }
    let get = |name: &str| rows.iter().find(|r| r.scheme == name).unwrap();
    let jn = get("hgc-jncss");
    for (col, &k) in exp.report.k_values.iter().enumerate() {
        let Some(js) = jn.results[col].stats.as_ref() else { continue };
        for row in rows.iter().filter(|r| r.spec.kind.is_full_gradient() && r.spec.kind != SchemeKind::HgcJncss) {
            if let Some(s) = row.results[col].stats.as_ref() {
                let se = (js.std_error.powi(2) + s.std_error.powi(2)).sqrt();
                if js.mean > s.mean + 2.0 * se {
                    failures.push(format!("(a) K={k}: hgc-jncss {:.1} > {} {:.1}", js.mean, row.scheme, s.mean));
                }
            }
        }
    }
    for row in rows {
        let means: Vec<f64> = row.results.iter().filter_map(|r| r.stats.as_ref().map(|s| s.mean)).collect();
        if means.windows(2).any(|w| w[1] < w[0]) {
            failures.push(format!("(b) {} means not nondecreasing: {means:?}", row.scheme));
        }
    }
    for col in 0..exp.report.k_values.len() {
        let load = |name: &str| get(name).results[col].master_comm_load;
        let uncoded = load("uncoded");
        let standard = load("standard-gc");
        for name in ["cgc-w", "cgc-e", "hgc", "hgc-jncss"] {
            if load(name) > uncoded {
                failures.push(format!("(c) {name} load {:?} > uncoded {uncoded:?}", load(name)));
            }
        }
        if uncoded > standard {
            failures.push(format!("(c) uncoded {uncoded:?} > standard-gc {standard:?}"));
        }
    }
    let first = |name: &str| get(name).results[0].stats.as_ref().map_or(f64::NAN, |s| s.mean);
    Outcome {
        pass: failures.is_empty() && elapsed < Duration::from_secs(120),
        detail: format!(
            "K=40 means: hgc-jncss {:.1}, hgc {:.1}, standard-gc {:.1}, uncoded {:.1} ms; comm loads {}/{}/{}; {} failures{} ({:.1} s)",
            first("hgc-jncss"),
            first("hgc"),
            first("standard-gc"),
            first("uncoded"),
            get("hgc").results[0].master_comm_load.unwrap_or(0),
            get("uncoded").results[0].master_comm_load.unwrap_or(0),
            get("standard-gc").results[0].master_comm_load.unwrap_or(0),
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(": {failures:?}") },
            elapsed.as_secs_f64()
        ),
        artifact: artifact(&exp.report) + &exp.samples_jsonl(),
    }
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut trajectories = Vec::new();
    let mut summary = Vec::new();
    for (preset, rows) in [("example-1", 4), ("paper-sec6", 2)] {
        let c = Config::preset(preset).unwrap();
        let p = c.validate().unwrap();
        let task = SyntheticTask {
            samples_per_subdataset: rows,
            dimension: 5,
            k: c.k,
            iterations: 200,
            noise: 0.1,
            seed: SEED,
        };
        let central = run_centralized(&task).unwrap();
        let hgc_spec = SchemeSpec { kind: SchemeKind::Hgc, tolerance: Some(c.tolerance) };
        let hgc = Scheme::build(&hgc_spec, &c.topology, &p, c.k, SEED).unwrap();
        let tr = run_training(&task, &hgc, &StragglerPolicy::AdversarialCycle).unwrap();
        let gap = tr.max_relative_gap(&central);
        let res = tr.max_residual();
        if gap > 1e-7 || res > 1e-9 {
            failures.push(format!("{preset}: hgc gap {gap:.1e}, residual {res:.1e}"));
        }
        let greedy_spec = SchemeSpec { kind: SchemeKind::Greedy, tolerance: Some(c.tolerance) };
        let greedy = Scheme::build(&greedy_spec, &c.topology, &p, c.k, SEED).unwrap();
        let policy = StragglerPolicy::Random { edges: 1, workers: 1, seed: SEED };
        let gr = run_training(&task, &greedy, &policy).unwrap();
        if gr.max_residual() <= 0.01 {
            failures.push(format!("{preset}: greedy residual never exceeds 0.01"));
        }
        summary.push(format!(
            "{preset}: hgc gap {gap:.1e}, residual {res:.1e}, greedy max residual {:.2}",
            gr.max_residual()
        ));
        trajectories.push((tr, gr));
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: failures.is_empty() && elapsed < Duration::from_secs(10),
        detail: format!("{} ({:.1} s)", summary.join("; "), elapsed.as_secs_f64()),
        artifact: artifact(&trajectories),
    }
}

fn run_all() -> Vec<(usize, Outcome)> {
    let (c1, c2) = criterion_1_and_2();
    vec![
        (1, c1),
        (2, c2),
        (3, criterion_3()),
        (4, criterion_4()),
        (5, criterion_5()),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8()),
        (9, criterion_9()),
    ]
}

fn main() {
    let first = run_all();
    let mut all_pass = true;
    for (id, o) in &first {
        all_pass &= o.pass;
        println!("criterion {id}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let second = run_all();
    let differing: Vec<usize> =
        first.iter().zip(&second).filter(|(a, b)| a.1.artifact != b.1.artifact).map(|(a, _)| a.0).collect();
    let bytes: usize = first.iter().map(|(_, o)| o.artifact.len()).sum();
    let ok10 = differing.is_empty();
    all_pass &= ok10;
    println!(
        "criterion 10: {} - second run of criteria 1-9 reproduced {bytes} artifact bytes{}",
        if ok10 { "PASS" } else { "FAIL" },
        if ok10 { " exactly".to_string() } else { format!("; differing criteria {differing:?}") }
    );
    if !all_pass {
        std::process::exit(1);
    }
}
