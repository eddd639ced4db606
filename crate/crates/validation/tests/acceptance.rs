//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Run with `cargo test -p ecofin-validation --test acceptance --release`.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use ecofin_core::engine::{load_rates, run_batch, BatchOptions};
use ecofin_core::network::{
    estimate_pc, fit_fc, generate_synthetic, lscc, randomize, removal_sweep, survivors_report,
    ContagionOptions, Firm, FirmGraph, PlantedCluster, RemovalOrder, ReportOptions, Sector,
    SyntheticParams,
};
use ecofin_core::environment::{compute_cluster_q, compute_mu};
use ecofin_core::par::{self, Exec};
use ecofin_core::{RateSeries, SimConfig, Simulation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// What the ensemble criteria need from a run.
struct RunSummary {
    crises: usize,
    first_crisis: Option<usize>,
    distinct: Vec<usize>,
    dominant_share: Vec<f64>,
}

fn ensemble(cfg: &SimConfig, rates: &RateSeries, seeds: &[u64]) -> (Vec<RunSummary>, Duration) {
    let t = Instant::now();
    let runs = par::map_indexed(Exec::Parallel, seeds, |_, &seed| {
        let r = Simulation::new(cfg, rates, seed)
            .and_then(|s| s.run_to_end())
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        RunSummary {
            crises: r.crisis_count(),
            first_crisis: r.crisis_cycles.first().copied(),
            distinct: r.metrics.distinct_strategies,
            dominant_share: r.metrics.dominant_share,
        }
    });
    (runs, t.elapsed())
}

fn histogram(runs: &[RunSummary]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for r in runs {
        *h.entry(r.crises).or_insert(0) += 1;
    }
    h
}

fn mode(h: &BTreeMap<usize, usize>) -> usize {
    let best = h.values().copied().max().unwrap_or(0);
    h.iter().find(|(_, &v)| v == best).map_or(0, |(&k, _)| k)
}

fn mean(runs: &[RunSummary]) -> f64 {
    runs.iter().map(|r| r.crises as f64).sum::<f64>() / runs.len() as f64
}

struct Ensembles {
    without: Vec<RunSummary>,
    with: Vec<RunSummary>,
    first_fifty: Duration,
    total: Duration,
}

fn ensembles() -> Ensembles {
    let on = SimConfig::default();
    let mut off = on.clone();
    off.evolution.enabled = false;
    let rates = load_rates(&on).expect("bundled rates");
    let seeds: Vec<u64> = (1..=100).collect();
    let (mut without, first_fifty) = ensemble(&off, &rates, &seeds[..50]);
    let (rest, t_rest) = ensemble(&off, &rates, &seeds[50..]);
    without.extend(rest);
    let (with, t_on) = ensemble(&on, &rates, &seeds);
    Ensembles {
        without,
        with,
        first_fifty,
        total: first_fifty + t_rest + t_on,
    }
}

fn criterion_1(e: &Ensembles) -> Outcome {
    let runs = &e.without[..50];
    let h = histogram(runs);
    let zero = *h.get(&0).unwrap_or(&0) as f64 / runs.len() as f64;
    let m = mode(&h);
    let secs = e.first_fifty.as_secs_f64();
    outcome(
        zero >= 0.9 && m == 0 && secs < 300.0,
        format!(
            "50 seeds without evolution: {:.0}% with 0 crises (need >= 90%), mode {m}, histogram {h:?}, {secs:.0} s (limit 300 s)",
            100.0 * zero
        ),
    )
}

fn criterion_2(e: &Ensembles) -> Outcome {
    let (on, off) = (mean(&e.with), mean(&e.without));
    let h = histogram(&e.with);
    let m = mode(&h);
    let secs = e.total.as_secs_f64();
    outcome(
        on > off && (m == 1 || m == 2) && secs < 900.0,
        format!(
            "100 paired seeds: mean crises {on:.3} with evolution vs {off:.3} without, modal count {m} (need 1 or 2), histogram {h:?}, {secs:.0} s (limit 900 s)"
        ),
    )
}

fn criterion_3(e: &Ensembles) -> Outcome {
    let increasing = e
        .with
        .iter()
        .filter(|r| r.distinct.windows(2).any(|w| w[1] > w[0]))
        .count();
    let crisis_runs: Vec<&RunSummary> = e.with.iter().filter(|r| r.crises > 0).collect();
    let not_concentrated = crisis_runs
        .iter()
        .filter(|r| {
            let c = r.first_crisis.expect("crisis run");
            r.dominant_share[c] <= r.dominant_share[0] || r.dominant_share[c].is_nan()
        })
        .count();
    outcome(
        increasing == 0 && not_concentrated == 0,
        format!(
            "{} evolved runs: {increasing} with a rise in distinct strategies; {} of {} crisis runs without a higher dominant share at the first crisis",
            e.with.len(),
            not_concentrated,
            crisis_runs.len()
        ),
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn criterion_4() -> Outcome {
    let cfg = SimConfig::default();
    let rates = load_rates(&cfg).expect("bundled rates");
    let seeds: Vec<u64> = (1..=10).collect();
    let counts = par::map_indexed(Exec::Parallel, &seeds, |_, &seed| {
        let mut sim = Simulation::new(&cfg, &rates, seed).expect("valid config");
        sim.state_mut().enable_audit();
        let mut v = [0usize; 5];
        let mut placed_over = 0usize;
        let mut checks = 0usize;
        while !sim.is_finished() {
            sim.step().expect("cycle runs");
            let a = sim.state().last_audit().expect("audit on");
            for &(_, before, td, lim) in &a.limits {
                let over = td > lim * (1.0 + 1e-9);
                v[0] += usize::from(over);
                placed_over += usize::from(over && td > before);
            }
            for g in &a.clearings {
                let c = g.clearing;
                let tol = 1e-12;
                v[1] += usize::from(c.funding_spread < c.min_rex - tol || c.funding_spread > c.max_rex + tol);
            }
            for &(_, delta, net, div) in &a.capital {
                v[2] += usize::from(!close(delta, net * (1.0 - div)));
            }
            for &(_, _, bor, incv) in &a.vintages {
                v[3] += usize::from(!close(bor, incv));
            }
            for &(parent, sum, _) in &a.partitions {
                v[4] += usize::from(!close(parent, sum));
            }
            checks += a.limits.len() + a.clearings.len() + a.capital.len() + a.vintages.len() + a.partitions.len();
        }
        (v, placed_over, checks)
    });
    let mut v = [0usize; 5];
    let (mut placed_over, mut checks) = (0, 0);
    for (c, p, n) in counts {
        for i in 0..5 {
            v[i] += c[i];
        }
        placed_over += p;
        checks += n;
    }
    outcome(
        v.iter().all(|&x| x == 0) && checks > 0,
        format!(
            "10 seeds x full horizon, {checks} checks; violations: TD<=Lim {} ({placed_over} after taking new deposits), FS in Rex bounds {}, capital step {}, vintage Bor=Incv {}, tranche partitions {}",
            v[0], v[1], v[2], v[3], v[4]
        ),
    )
}

/// `erfc(z)` as `2/sqrt(pi)` times the integral of `exp(-t^2)` from `z` to
/// well past the point where the integrand underflows, by composite Simpson.
fn erfc_quadrature(z: f64) -> f64 {
    let hi = z.max(0.0) + 12.0;
    let n = 60_000usize;
    let h = (hi - z) / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(z) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(z + i as f64 * h);
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}

#[allow(clippy::needless_range_loop)]
fn criterion_5() -> Outcome {
    let m = SimConfig::default().market;
    let mus = [0.0, 0.05, 0.1322, 0.2583];
    let n = 41usize;
    let mut worst = 0.0f64;
    let mut grid = vec![vec![0.0; n + 1]; mus.len()];
    for (j, &mu) in mus.iter().enumerate() {
        for ls in 1..=n {
            let q = compute_cluster_q(ls, n, mu, m.sigma2).expect("valid index");
            let x = (5.0 * (n + 1 - ls) as f64 / n as f64).ln();
            let oracle = 0.5 * erfc_quadrature((x - mu) / (2.0 * m.sigma2).sqrt());
            worst = worst.max((q - oracle).abs());
            grid[j][ls] = q;
        }
    }
    let in_ls = grid.iter().all(|row| row[1..].windows(2).all(|w| w[1] > w[0]));
    let in_mu = (1..=n).all(|ls| grid.windows(2).all(|w| w[1][ls] > w[0][ls]));
    let mu_check = compute_mu(0.0, m.mu_scale).is_ok_and(|v| v == 0.0);
    outcome(
        worst <= 1e-10 && in_ls && in_mu && mu_check,
        format!(
            "41 x 4 grid: max |q - quadrature| = {worst:.2e} (limit 1e-10), increasing in ls {in_ls}, increasing in mu {in_mu}"
        ),
    )
}

fn firms(n: usize) -> Vec<Firm> {
    (0..n)
        .map(|i| Firm {
            id: i as u64,
            sales: 1.0,
            sector: Sector::Other,
            region: "R".into(),
        })
        .collect()
}

/// Largest set of mutually reachable nodes from an all-pairs reachability
/// table, ties going to the set with the smallest member.
fn brute_lscc(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    let reach: Vec<Vec<bool>> = (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen
        })
        .collect();
    let mut best: Vec<usize> = Vec::new();
    let mut done = vec![false; n];
    for s in 0..n {
        if done[s] {
            continue;
        }
        let comp: Vec<usize> = (0..n).filter(|&v| reach[s][v] && reach[v][s]).collect();
        for &v in &comp {
            done[v] = true;
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let factors = [0.5, 2.0, 8.0];
    let mut mismatches = 0;
    for i in 0..100 {
        let n = rng.random_range(1..=200usize);
        let p = (factors[i % 3] / n as f64).min(1.0);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && rng.random::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        let g = FirmGraph::new(firms(n), edges.clone()).expect("simple graph");
        if lscc(&g) != brute_lscc(n, &edges) {
            mismatches += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 60.0,
        format!("100 random digraphs (n <= 200, densities 0.5/n, 2/n, 8/n): {mismatches} mismatches, {secs:.1} s (limit 60 s)"),
    )
}

fn criterion_7() -> Outcome {
    let params = SyntheticParams {
        nodes: 25_000,
        ..Default::default()
    };
    let g = generate_synthetic(&params, 7).expect("generator").graph;
    let t = Instant::now();
    let swaps = 10 * g.edge_count() as u64;
    let (r, stats) = randomize(&g, swaps, 7).expect("randomize");
    let secs = t.elapsed().as_secs_f64();
    let same_nodes = g.firms() == r.firms();
    let same_out = g.out_degrees() == r.out_degrees();
    let same_in = g.in_degrees() == r.in_degrees();
    let edges = r.edges();
    let no_loops = edges.iter().all(|&(a, b)| a != b);
    let distinct = edges.iter().collect::<HashSet<_>>().len() == edges.len();
    outcome(
        g.edge_count() == 100_000 && same_nodes && same_in && same_out && no_loops && distinct && secs < 30.0,
        format!(
            "{} edges, {} of {} swaps accepted: per-node in-degrees kept {same_in}, out-degrees kept {same_out}, no self-loops {no_loops}, no multi-edges {distinct}, {secs:.1} s (limit 30 s)",
            g.edge_count(),
            stats.accepted,
            stats.attempted
        ),
    )
}

/// Branching estimate from small directed ER instances: the mean number of
/// further neighbours reached through a random edge end, inverted.
fn branching_oracle(n: usize, mean_total_degree: f64, instances: u64) -> f64 {
    let p = mean_total_degree / (2.0 * (n - 1) as f64);
    let (mut sum_k, mut sum_kk) = (0.0, 0.0);
    for s in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
        let mut nbrs: Vec<HashSet<usize>> = vec![HashSet::new(); n];
        for a in 0..n {
            for b in 0..n {
                if a != b && rng.random::<f64>() < p {
                    nbrs[a].insert(b);
                    nbrs[b].insert(a);
                }
            }
        }
        for set in &nbrs {
            let k = set.len() as f64;
            sum_k += k;
            sum_kk += k * (k - 1.0);
        }
    }
    sum_k / sum_kk
}

fn criterion_8() -> Outcome {
    let oracle = branching_oracle(1000, 8.0, 20);
    let params = SyntheticParams {
        degree_exponent: None,
        assortativity: 0.0,
        ..Default::default()
    };
    let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.01).collect();
    let mut estimates = Vec::new();
    for seed in 1..=3 {
        let g = generate_synthetic(&params, seed).expect("generator").graph;
        let opts = ContagionOptions {
            seed,
            ..Default::default()
        };
        let est = estimate_pc(&g, &grid, &opts, Exec::Parallel).expect("estimate");
        estimates.push(est.p_c);
    }
    let p_c = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let rel = (p_c - oracle) / oracle;
    outcome(
        rel.abs() <= 0.2,
        format!(
            "directed ER n=10^4, mean total degree 8: p_c = {p_c:.4} (per graph {:?}) vs branching oracle {oracle:.4}, relative error {:+.1}% (limit 20%)",
            estimates.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>(),
            100.0 * rel
        ),
    )
}

fn criterion_9() -> Outcome {
    let t = Instant::now();
    let params = SyntheticParams {
        planted: vec![PlantedCluster {
            size: 50,
            density: 0.5,
            sector: Sector::Construction,
            region: "R03".into(),
            sales_percentile: 0.05,
        }],
        ..Default::default()
    };
    let cell = (Sector::Construction, "R03".to_string());
    let seeds: Vec<u64> = (1..=20).collect();
    let rows = par::map_indexed(Exec::Sequential, &seeds, |_, &seed| {
        let syn = generate_synthetic(&params, seed).expect("generator");
        let g = &syn.graph;
        let (r, _) = randomize(g, 10 * g.edge_count() as u64, seed).expect("randomize");
        let sweep = removal_sweep(g, RemovalOrder::BySales, 0.005, Exec::Parallel).expect("sweep");
        let rsweep = removal_sweep(&r, RemovalOrder::BySales, 0.005, Exec::Parallel).expect("sweep");
        let (fit, rfit) = match (fit_fc(&sweep), fit_fc(&rsweep)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return (false, false),
        };
        let rep = survivors_report(g, &sweep, fit.f_c, None, &ReportOptions::default());
        let planted = &syn.truth.clusters[0];
        let hits = rep
            .survivors
            .iter()
            .filter(|s| planted.binary_search(&s.id).is_ok())
            .count();
        let flagged = rep.flagged_cells().contains(&cell);
        (fit.f_c > rfit.f_c, flagged && hits as f64 >= 0.8 * planted.len() as f64)
    });
    let wins = rows.iter().filter(|r| r.0).count();
    let found = rows.iter().filter(|r| r.1).count();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        wins >= 18 && found == 20 && secs < 600.0,
        format!(
            "20 generator seeds: f_c(real) > f_c(randomized) in {wins} (need 18); planted cell flagged with >= 80% recall in {found} (need 20); {secs:.0} s (limit 600 s)"
        ),
    )
}

fn digest(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

fn criterion_10() -> Outcome {
    let cfg = SimConfig::default();
    let rates = load_rates(&cfg).expect("bundled rates");
    let run = |seed| {
        Simulation::new(&cfg, &rates, seed)
            .and_then(|s| s.run_to_end())
            .expect("run")
            .to_json()
    };
    let repeat_ok = digest(&run(11)) == digest(&run(11));
    let seeds = [1u64, 2, 3];
    let batch = |exec, workers| {
        let report = run_batch(
            &cfg,
            &rates,
            &seeds,
            BatchOptions {
                exec,
                workers,
                compare_without_evolution: false,
            },
        );
        digest(&serde_json::to_string(&report).expect("serializes"))
    };
    let hashes = [
        batch(Exec::Parallel, Some(1)),
        batch(Exec::Parallel, Some(3)),
        batch(Exec::Sequential, None),
    ];
    let batch_ok = hashes.iter().all(|h| h == &hashes[0]);
    outcome(
        repeat_ok && batch_ok,
        format!(
            "run JSON repeated: identical {repeat_ok}; batch report with 1 worker, 3 workers and sequential: identical {batch_ok} ({})",
            &hashes[0][..16]
        ),
    )
}

fn report(n: usize, o: &Outcome, elapsed: Duration) -> bool {
    println!(
        "criterion {n:>2}: {} | {} [{:.1} s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    o.pass
}

fn timed<F: FnOnce() -> Outcome>(f: F) -> (Outcome, Duration) {
    let t = Instant::now();
    let o = f();
    (o, t.elapsed())
}

fn main() {
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);
    let mut failed = Vec::new();
    let mut check = |n: usize, o: Outcome, d: Duration| {
        if !report(n, &o, d) {
            failed.push(n);
        }
    };

    if wanted(1) || wanted(2) || wanted(3) {
        let (e, d) = {
            let t = Instant::now();
            let e = ensembles();
            (e, t.elapsed())
        };
        for n in 1..=3 {
            if wanted(n) {
                let o = match n {
                    1 => criterion_1(&e),
                    2 => criterion_2(&e),
                    _ => criterion_3(&e),
                };
                check(n, o, if n == 1 { e.first_fifty } else { d });
            }
        }
    }
    let singles: [(usize, fn() -> Outcome); 7] = [
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    for (n, f) in singles {
        if wanted(n) {
            let (o, d) = timed(f);
            check(n, o, d);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
