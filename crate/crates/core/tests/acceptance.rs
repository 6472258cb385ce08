//! Acceptance checks, one line per criterion. Exits non-zero if any fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::seq::IteratorRandom;
use rand::Rng;

use census_core::experiment::{preset, run_batch, summarize, to_csv_string, ExperimentRecord, THREADS_ENV};
use census_core::gossip::{
    baseline_round, cluster_round, init_gossip, run_adapted, GossipParams, GossipStates, PrecisionSpec,
};
use census_core::sim::{Network, SeededRng, Stream};
use census_core::topology::{
    compute_stats, generate_topology, mutate_topology, proposition1_exact, star, ChangeEvent, ChurnParams, GenParams,
    NodeId, Role, Topology,
};
use census_core::tour::{
    adapted_finalize, adapted_update, init_adapted, run_tour, AdaptedRules, BaselineRules, Completion, TokenRules,
    TourOutcome, TourParams,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Connected topologies of 2–200 nodes with PMP fractions in [0, 0.4].
fn ensemble(count: usize) -> Vec<Topology> {
    let mut rng = SeededRng::new(1, Stream::Harness);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.gen_range(2..=200usize);
        let masters = rng.gen_range(1..=(n / 3).max(1));
        let p = GenParams {
            n_masters: masters,
            n_slaves: n - masters,
            pmp_fraction: rng.gen_range(0.0..=0.4),
            max_pmp_degree: rng.gen_range(2..=4),
            connected: true,
        };
        if p.validate().is_err() {
            continue;
        }
        out.push(generate_topology(&mut SeededRng::new(out.len() as u64, Stream::Topology), &p).unwrap());
    }
    out
}

/// (masters, pmps, slaves, master degree sum, pmp degree sum, slave degree sum), counted directly.
fn tally(t: &Topology) -> (i64, i64, i64, i64, i64, i64) {
    let mut c = (0, 0, 0, 0, 0, 0);
    for v in t.nodes() {
        let d = t.neighbors(v).unwrap().count() as i64;
        match t.classify_role(v).unwrap() {
            Role::Master => {
                c.0 += 1;
                c.3 += d;
            }
            Role::Pmp => {
                c.1 += 1;
                c.2 += 1;
                c.4 += d;
                c.5 += d;
            }
            Role::PureSlave => {
                c.2 += 1;
                c.5 += d;
            }
        }
    }
    c
}

fn ratio(num: i64, den: i64) -> Ratio<i64> {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num, den)
    }
}

fn criterion_1(ens: &[Topology]) -> Verdict {
    let mut sizes = BTreeSet::new();
    let mut bad = 0;
    for t in ens {
        let (m, p, _, dm, dp, _) = tally(t);
        let est = proposition1_exact(m as u64, ratio(dm, m), p as u64, ratio(dp, p));
        if est != Ratio::from_integer(t.len() as i64) {
            bad += 1;
        }
        sizes.insert(t.len());
    }
    verdict(
        bad == 0 && ens.len() >= 1000,
        format!(
            "size formula exact on {}/{} topologies of {}..{} nodes",
            ens.len() - bad,
            ens.len(),
            sizes.first().unwrap(),
            sizes.last().unwrap()
        ),
    )
}

fn criterion_2(ens: &[Topology]) -> Verdict {
    let mut bad = 0;
    for t in ens {
        let (_, p, s, dm, dp, ds) = tally(t);
        // S (d̄s - 1) = P (d̄p - 1) in exact rationals
        let lhs = Ratio::from_integer(s) * (ratio(ds, s) - 1);
        let rhs = Ratio::from_integer(p) * (ratio(dp, p) - 1);
        let rhs = if p == 0 { Ratio::from_integer(0) } else { rhs };
        let stats = compute_stats(t).unwrap();
        if lhs != rhs || dm != ds || stats.master_degree_sum != stats.slave_degree_sum {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("degree identities hold on {}/{} topologies", ens.len() - bad, ens.len()))
}

/// Depth-first walk from the originator that returns home, visiting
/// every node of a connected graph.
fn covering_walk(t: &Topology, start: NodeId) -> Vec<NodeId> {
    fn go(t: &Topology, v: NodeId, seen: &mut BTreeSet<NodeId>, walk: &mut Vec<NodeId>) {
        for u in t.neighbors(v).unwrap().collect::<Vec<_>>() {
            if seen.insert(u) {
                walk.push(u);
                go(t, u, seen, walk);
                walk.push(v);
            }
        }
    }
    let mut seen = BTreeSet::from([start]);
    let mut walk = Vec::new();
    go(t, start, &mut seen, &mut walk);
    walk
}

fn criterion_3() -> Verdict {
    let mut rng = SeededRng::new(3, Stream::Harness);
    let (mut scripted, mut engine_covers, mut bad) = (0, 0, 0);
    let mut seed = 0u64;
    while scripted < 500 {
        seed += 1;
        let n = rng.gen_range(2..=10usize);
        let masters = rng.gen_range(1..=(n / 2).max(1));
        let p = GenParams {
            n_masters: masters,
            n_slaves: n - masters,
            pmp_fraction: rng.gen_range(0.0..=0.6),
            max_pmp_degree: rng.gen_range(2..=3),
            connected: true,
        };
        let Ok(t) = generate_topology(&mut SeededRng::new(seed, Stream::Topology), &p) else {
            continue;
        };
        scripted += 1;
        let origin = t.masters().choose(&mut rng).unwrap();
        let mut token = init_adapted(&t, origin, 0).unwrap();
        for v in covering_walk(&t, origin) {
            if v != origin {
                token = adapted_update(token, v, t.classify_role(v).unwrap(), t.degree(v).unwrap() as u64);
            }
        }
        if adapted_finalize(&token).0 != t.len() as f64 {
            bad += 1;
        }

        // Tours of the real engine that happen to cover every master and PMP.
        let (m, pmp, ..) = tally(&t);
        for k in 0..20 {
            let mut net = Network::new(t.clone());
            let out = run_tour(
                &mut net,
                &AdaptedRules,
                origin,
                TourParams::default(),
                &mut SeededRng::new(seed * 100 + k, Stream::Protocol),
            )
            .unwrap();
            let s = out.stats_gathered.unwrap();
            if s.n_masters == m as u64 && s.n_pmp == pmp as u64 {
                engine_covers += 1;
                if out.estimate != Some(t.len() as f64) {
                    bad += 1;
                }
            }
        }
    }
    verdict(
        bad == 0 && engine_covers > 0,
        format!("{scripted} scripted covering walks and {engine_covers} covering engine tours, {bad} inexact"),
    )
}

fn with_threads<T>(threads: Option<&str>, f: impl FnOnce() -> T) -> T {
    let old = std::env::var(THREADS_ENV).ok();
    match threads {
        Some(v) => std::env::set_var(THREADS_ENV, v),
        None => std::env::remove_var(THREADS_ENV),
    }
    let out = f();
    match old {
        Some(v) => std::env::set_var(THREADS_ENV, v),
        None => std::env::remove_var(THREADS_ENV),
    }
    out
}

fn run_preset(name: &str) -> Vec<ExperimentRecord> {
    preset(name)
        .unwrap()
        .iter()
        .flat_map(|c| run_batch(c).unwrap())
        .collect()
}

fn mare_bias(rows: &[&ExperimentRecord]) -> (f64, f64) {
    let errs: Vec<f64> = rows.iter().filter_map(|r| r.signed_error()).collect();
    let n = errs.len() as f64;
    (errs.iter().map(|e| e.abs()).sum::<f64>() / n, errs.iter().sum::<f64>() / n)
}

fn criterion_4(rows: &[ExperimentRecord]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for churn in ["static", "low"] {
        let pick = |proto: &str| -> Vec<&ExperimentRecord> {
            rows.iter()
                .filter(|r| r.protocol == proto && r.scenario.ends_with(churn))
                .collect()
        };
        let (a, b) = (pick("rt_adapted"), pick("rt_baseline"));
        let (ma, ba) = mare_bias(&a);
        let (mb, bb) = mare_bias(&b);
        let topologies: BTreeSet<(&str, u64)> = a.iter().map(|r| (r.scenario.as_str(), r.topology_seed)).collect();
        let ok = ma < mb && ba.abs() < bb.abs();
        pass &= ok && topologies.len() == 50 && a.len() == 5000;
        parts.push(format!(
            "{churn}: {} topologies, adapted mare {ma:.3} bias {ba:+.3} vs baseline mare {mb:.3} bias {bb:+.3} ({})",
            topologies.len(),
            match (ma < mb, ba.abs() < bb.abs()) {
                (true, true) => "both lower",
                (true, false) => "mare lower, |bias| not lower",
                (false, true) => "|bias| lower, mare not lower",
                (false, false) => "neither lower",
            }
        ));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_5() -> Verdict {
    let p = census_core::experiment::ensemble(20);
    let t = generate_topology(&mut SeededRng::new(5, Stream::Topology), &p).unwrap();
    let n = t.len() as f64;
    let origin = t.masters().next().unwrap();
    let tours = 10_000;
    let mut sum = 0.0;
    for seed in 0..tours {
        let mut net = Network::new(t.clone());
        let out = run_tour(
            &mut net,
            &BaselineRules,
            origin,
            TourParams { disseminate: false, ..TourParams::default() },
            &mut SeededRng::new(seed, Stream::Protocol),
        )
        .unwrap();
        sum += out.estimate.unwrap();
    }
    let mean = sum / tours as f64;
    let dev = (mean - n).abs() / n;
    verdict(dev <= 0.05, format!("mean baseline estimate {mean:.3} over {tours} tours, N = {n}, deviation {:.2}%", dev * 100.0))
}

fn churn_tour<R: TokenRules>(t: Topology, rules: &R, origin: NodeId, rate: f64, seed: u64) -> TourOutcome {
    let churn = ChurnParams { migration_rate: rate, pmp_link_rate: rate / 2.0, ..ChurnParams::none() };
    let mut net = Network::new(t).with_churn(churn, 1, SeededRng::new(seed, Stream::Churn));
    run_tour(&mut net, rules, origin, TourParams::default(), &mut SeededRng::new(seed, Stream::Protocol)).unwrap()
}

/// Crashes the first holder after the originator before it forwards.
fn crash_tour<R: TokenRules>(t: Topology, rules: &R, origin: NodeId, seed: u64) -> TourOutcome {
    let params = TourParams { tour_id: 0, ..TourParams::default() };
    let mut probe = Network::new(t.clone()).with_trace();
    run_tour(&mut probe, rules, origin, params.clone(), &mut SeededRng::new(seed, Stream::Protocol)).unwrap();
    let first: u32 = probe
        .trace_lines()
        .iter()
        .find_map(|l| l.strip_prefix("tour 0 hop 1 at "))
        .and_then(|r| r.split(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    let mut net = Network::new(t);
    // Received at tick 1, forwarded at tick 2.
    net.script(2, ChangeEvent::Crash { node: NodeId(first), orphans: vec![] }).unwrap();
    run_tour(&mut net, rules, origin, params, &mut SeededRng::new(seed, Stream::Protocol)).unwrap()
}

fn criterion_6() -> Verdict {
    let p = census_core::experiment::ensemble(30);
    let mut failures = Vec::new();
    let total = 1000u64;
    for seed in 0..total {
        let t = generate_topology(&mut SeededRng::new(seed, Stream::Topology), &p).unwrap();
        let origin = t.masters().next().unwrap();
        let rate = [0.025, 0.05, 0.075, 0.1][(seed % 4) as usize];
        let out = match seed % 10 {
            8 => crash_tour(t, &AdaptedRules, origin, seed),
            9 => crash_tour(t, &BaselineRules, origin, seed),
            k if k % 2 == 0 => churn_tour(t, &AdaptedRules, origin, rate, seed),
            _ => churn_tour(t, &BaselineRules, origin, rate, seed),
        };
        if !matches!(out.completed_via, Completion::NaturalReturn | Completion::RoutedReturn) {
            failures.push(seed);
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{}/{total} tours completed (800 under churn up to 0.1, 200 crash-before-forward); failed seeds {failures:?}",
            total as usize - failures.len()
        ),
    )
}

fn criterion_7() -> Verdict {
    let p = census_core::experiment::ensemble(40);
    let churn = ChurnParams { migration_rate: 0.1, pmp_link_rate: 0.05, ..ChurnParams::none() };
    let mut worst: f64 = 0.0;
    let mut runs = Vec::new();
    for adapted in [true, false] {
        for churning in [false, true] {
            let mut t = generate_topology(&mut SeededRng::new(7, Stream::Topology), &p).unwrap();
            let mut rng = SeededRng::new(7, Stream::Protocol);
            let mut churn_rng = SeededRng::new(7, Stream::Churn);
            let mut s: GossipStates<f64> = init_gossip(&t, NodeId(0)).unwrap();
            for _ in 0..10_000 {
                if adapted {
                    let m = t.masters().choose(&mut rng).unwrap();
                    cluster_round(&t, &mut s, m).unwrap();
                } else {
                    baseline_round(&t, &mut s, &mut rng);
                }
                worst = worst.max((s.total(&t) - 1.0).abs());
                if churning {
                    mutate_topology(&mut t, &mut churn_rng, &churn);
                }
            }
            runs.push(format!(
                "{} {}",
                if adapted { "adapted" } else { "baseline" },
                if churning { "churn" } else { "static" }
            ));
        }
    }
    verdict(worst <= 1e-9, format!("max |sum - 1| = {worst:.2e} over 10000 rounds each for {}", runs.join(", ")))
}

fn criterion_8(rows: &[ExperimentRecord]) -> Verdict {
    let summary = summarize(rows).unwrap();
    let mut pass = summary.len() == 6;
    let mut parts = Vec::new();
    for (n, reference) in [(20, 132.0), (60, 232.0), (100, 277.0)] {
        let name = format!("tbl1_n{n}");
        let get = |proto: &str| summary.iter().find(|s| s.scenario == name && s.protocol == proto).unwrap();
        let (a, b) = (get("gossip_adapted"), get("gossip_baseline"));
        let (ra, rb) = (a.mean_rounds_or_hops.unwrap(), b.mean_rounds_or_hops.unwrap());
        let all_converged = a.censored + a.failed + b.censored + b.failed == 0 && a.runs == 20 && b.runs == 20;
        let ratio = rb / ra;
        let ok = all_converged && ra < rb && ratio >= 5.0 && ra >= reference / 3.0 && ra <= reference * 3.0;
        pass &= ok;
        parts.push(format!("n={n}: adapted {ra:.1} (window {:.0}..{:.0}) baseline {rb:.1} ratio {ratio:.1}", reference / 3.0, reference * 3.0));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_9() -> Verdict {
    let mut bad = Vec::new();
    let sizes: Vec<usize> = (1..=64).chain([100, 250, 500, 1000]).collect();
    for &k in &sizes {
        let out = run_adapted(
            star(k),
            NodeId(0),
            &GossipParams::default(),
            &mut SeededRng::new(k as u64, Stream::Protocol),
            SeededRng::new(k as u64, Stream::Churn),
        )
        .unwrap();
        let n = (k + 1) as f64;
        let exact = out.topology.nodes().all(|v| (1.0 / out.states.avg(v)).round() == n);
        if out.rounds != 1 || !out.converged || !exact || !PrecisionSpec::exact().is_converged(&out.topology, &out.states) {
            bad.push(k + 1);
        }
    }
    verdict(bad.is_empty(), format!("{} star sizes from 2 to 1001 nodes, non-conforming {bad:?}", sizes.len()))
}

fn criterion_10(first: &[(&str, String)]) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, csv) in first {
        let again = with_threads(Some("2"), || to_csv_string(&run_preset(name)));
        let same = *csv == again;
        pass &= same;
        parts.push(format!("{name} {} ({} bytes)", if same { "identical" } else { "DIFFERS" }, csv.len()));
    }
    verdict(pass, parts.join("; "))
}

fn main() {
    let mut results: Vec<(u32, Verdict, Duration)> = Vec::new();
    let mut timed = |id: u32, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let elapsed = start.elapsed();
        println!(
            "criterion {id:>2} {}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
        results.push((id, v, elapsed));
    };

    let ens = ensemble(1000);
    timed(1, &mut || criterion_1(&ens));
    timed(2, &mut || criterion_2(&ens));
    timed(3, &mut criterion_3);
    let mut fig1 = Vec::new();
    timed(4, &mut || {
        fig1 = with_threads(None, || run_preset("fig1_random_tour"));
        criterion_4(&fig1)
    });
    timed(5, &mut criterion_5);
    timed(6, &mut criterion_6);
    timed(7, &mut criterion_7);
    let mut tbl1 = Vec::new();
    timed(8, &mut || {
        tbl1 = with_threads(None, || run_preset("tbl1_gossip"));
        criterion_8(&tbl1)
    });
    timed(9, &mut criterion_9);
    timed(10, &mut || {
        let mobility = with_threads(None, || run_preset("mobility_stress"));
        let first = [
            ("fig1_random_tour", to_csv_string(&fig1)),
            ("tbl1_gossip", to_csv_string(&tbl1)),
            ("mobility_stress", to_csv_string(&mobility)),
        ];
        criterion_10(&first)
    });

    let failed: Vec<u32> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
