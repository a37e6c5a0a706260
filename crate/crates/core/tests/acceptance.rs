//! Acceptance suite. Runs without the libtest harness so each criterion
//! prints a single PASS/FAIL line; the process fails if any criterion does.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cct_core::analytic::{self, InterTxInputs};
use cct_core::experiment::{
    self, replicate, seeds, Execution, Replication, SweepAxis, SweepProtocol, SweepSpec,
};
use cct_core::metrics;
use cct_core::sim::{self, Protocol, SimConfig};
use cct_core::{AlohaParams, ChannelEvent, ChannelTrace, CsmaMode, CsmaParams, Tick, UserSet};

const EXEC: Execution = Execution::Parallel;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn csma_config(pkt: u64, mode: CsmaMode, horizon: u64) -> SimConfig {
    SimConfig::new(
        1,
        Tick(horizon),
        Protocol::Csma {
            params: CsmaParams::reference(Tick(pkt)),
            mode,
        },
    )
}

fn aloha_config(p_a: f64, p_b: f64, horizon: u64) -> SimConfig {
    SimConfig::new(
        1,
        Tick(horizon),
        Protocol::Aloha(AlohaParams::new(p_a, p_b, Tick(1)).unwrap()),
    )
}

fn psi_mean(rep: &Replication) -> f64 {
    rep.psi.expect("every run has cycles").mean
}

/// Successes end at `10k` and last 5 slots; position 3 is a collision.
fn example_trace() -> ChannelTrace {
    let users = vec!["A".to_string(), "B".to_string(), "C".to_string()];
    // t1..t12 from the example, then one more success so t12 is a refresh moment
    let pattern = "AB*BCCBACBCAB";
    let events = pattern
        .chars()
        .enumerate()
        .map(|(i, c)| {
            let end = Tick(10 * (i as u64 + 1));
            let start = end - Tick(5);
            match c {
                '*' => ChannelEvent::collision(start, end, UserSet::from_indices([0, 1])),
                c => ChannelEvent::success(start, end, (c as u8 - b'A') as usize),
            }
        })
        .collect();
    ChannelTrace::new(users, events, Tick(10 * pattern.len() as u64)).unwrap()
}

fn t(k: u64) -> Tick {
    Tick(10 * k)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let trace = example_trace();
    let expect_refresh = [
        ("A", vec![t(1), t(8), t(12)]),
        ("B", vec![t(4), t(7), t(10)]),
        ("C", vec![t(6), t(9), t(11)]),
    ];
    // cycles as (start, end) pairs, since t7 - t4 and t10 - t7 have equal length
    let expect_cycles = [
        ("A", vec![(t(1), t(8)), (t(8), t(12))]),
        ("B", vec![(t(4), t(10)), (t(7), t(10))]),
        ("C", vec![(t(6), t(9))]),
    ];
    let mut ok = true;
    for (user, want) in &expect_refresh {
        ok &= metrics::refresh_moments(&trace, user).unwrap() == *want;
    }
    for (user, want) in &expect_cycles {
        let mut got: Vec<(Tick, Tick)> = metrics::cycles(&trace, user)
            .unwrap()
            .iter()
            .map(|c| (c.start, c.end))
            .collect();
        got.sort();
        let mut want = want.clone();
        want.sort();
        ok &= got == want;
        let times = metrics::cycle_times(&trace, user).unwrap();
        ok &= times.len() == want.len()
            && want.iter().all(|&(a, b)| times.contains(&(b - a)));
    }
    let excluded = [("B", t(4), t(7)), ("C", t(6), t(11))];
    for (user, a, b) in excluded {
        ok &= !metrics::cycles(&trace, user)
            .unwrap()
            .iter()
            .any(|c| (c.start, c.end) == (a, b));
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(ok && elapsed < 1.0, format!("exact sets match={ok}, {elapsed:.3}s"))
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let rep = replicate(&aloha_config(0.5, 0.5, 10_000_000), &seeds(1, 10), EXEC).unwrap();
    let psi = psi_mean(&rep);
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        rel(psi, 8.0) <= 0.02 && elapsed < 60.0,
        format!("psi={psi:.4} vs 8 (rel {:.4}), {elapsed:.1}s", rel(psi, 8.0)),
    )
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let grid = [0.2, 0.35, 0.5, 0.65, 0.8];
    let mut worst: (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &a in &grid {
        for &b in &grid {
            let rep = replicate(&aloha_config(a, b, 1_000_000), &seeds(1, 10), EXEC).unwrap();
            let want = analytic::aloha_cct(&AlohaParams::new(a, b, Tick(1)).unwrap())
                .unwrap()
                .psi_slots;
            let e = rel(psi_mean(&rep), want);
            if e > worst.0 {
                worst = (e, a, b);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        worst.0 <= 0.03 && elapsed < 600.0,
        format!(
            "worst rel error {:.4} at ({}, {}), {elapsed:.1}s",
            worst.0, worst.1, worst.2
        ),
    )
}

fn criterion_4() -> Verdict {
    let fp = analytic::solve_collision_probability(32, 5).unwrap();
    let mut ok = fp.residual <= 1e-12;
    let mut worst_closed = 0.0f64;
    for w in [8u32, 16, 32, 64] {
        let p = analytic::solve_collision_probability(w, 0).unwrap().p_c;
        worst_closed = worst_closed.max((p - 2.0 / (w as f64 + 3.0)).abs());
    }
    ok &= worst_closed <= 1e-12;
    let n = 10_000;
    let g = |p: f64| analytic::collision_rhs(p, 32, 5) - p;
    let signs: Vec<bool> = (1..n)
        .map(|i| g(0.5 * i as f64 / n as f64) > 0.0)
        .collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    ok &= changes == 1;
    verdict(
        ok,
        format!(
            "p_c={:.7} residual={:.1e}, closed-form err={worst_closed:.1e}, sign changes={changes}",
            fp.p_c, fp.residual
        ),
    )
}

fn criterion_5() -> Verdict {
    let (w, beta, p) = (32u32, 5u32, 0.0542);
    let at_zero = analytic::expected_backoff_sum(0.0, w, beta).unwrap();
    let series = analytic::expected_backoff_sum(p, w, beta).unwrap();
    let params = CsmaParams {
        cw_min: w,
        beta,
        ..CsmaParams::reference(Tick(30))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples = 1_000_000;
    let mut total = 0u64;
    for _ in 0..samples {
        let mut stage = 0;
        loop {
            total += rng.random_range(1..=params.cw(stage)) as u64;
            if !rng.random_bool(p) {
                break;
            }
            stage = (stage + 1).min(beta);
        }
    }
    let mc = total as f64 / samples as f64;
    verdict(
        at_zero == 16.5 && rel(mc, series) <= 0.01,
        format!("mu(0)={at_zero}, series={series:.4}, monte carlo={mc:.4}"),
    )
}

struct CsmaRuns {
    pkt: u64,
    rep: Replication,
}

fn csma_runs() -> Vec<CsmaRuns> {
    [30u64, 50, 70, 100]
        .into_iter()
        .map(|pkt| CsmaRuns {
            pkt,
            rep: replicate(
                &csma_config(pkt, CsmaMode::RtsCts, 10_000_000),
                &seeds(1, 10),
                EXEC,
            )
            .unwrap(),
        })
        .collect()
}

fn criterion_6(runs: &[CsmaRuns], elapsed: f64) -> Verdict {
    let mut ok = elapsed < 900.0;
    let mut parts = Vec::new();
    for r in runs {
        let params = CsmaParams::reference(Tick(r.pkt));
        let theory = analytic::csma_cct(&params, CsmaMode::RtsCts, InterTxInputs::default())
            .unwrap()
            .psi_slots;
        let sim = psi_mean(&r.rep);
        // the same expression fed each run's own inter-transmission probability
        let own: f64 = r
            .rep
            .runs
            .iter()
            .map(|run| {
                let inputs = InterTxInputs {
                    p_ni0: run.p_ni0.unwrap(),
                    e_ni: analytic::DEFAULT_E_NI,
                };
                analytic::csma_cct(&params, CsmaMode::RtsCts, inputs)
                    .unwrap()
                    .psi_slots
            })
            .sum::<f64>()
            / r.rep.runs.len() as f64;
        ok &= rel(sim, theory) <= 0.05 && rel(sim, own) <= 0.05;
        parts.push(format!(
            "pkt {}: sim {sim:.2} / eq {theory:.2} / own {own:.2}",
            r.pkt
        ));
    }
    verdict(ok, format!("{}, {elapsed:.1}s", parts.join("; ")))
}

fn criterion_7(runs: &[CsmaRuns]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let p0 = r.rep.p_ni0.unwrap().mean;
        let e = r.rep.e_ni.unwrap().mean;
        ok &= (p0 - 0.32).abs() <= 0.03 && (e - 1.0).abs() <= 0.05;
        parts.push(format!("pkt {}: P0={p0:.4} E={e:.4}", r.pkt));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_8() -> Verdict {
    let mut cycles = 0usize;
    let mut mismatches = 0usize;
    for mode in [CsmaMode::RtsCts, CsmaMode::Basic] {
        let config = csma_config(30, mode, 10_000_000);
        let Protocol::Csma { params, .. } = config.protocol else {
            unreachable!()
        };
        let (trace, audit) = sim::simulate_csma_audited(&config).unwrap();
        for (owner, user) in trace.users().iter().enumerate() {
            for d in metrics::part_decomposition(&trace, user).unwrap() {
                let a = sim::audited_parts(
                    &params,
                    mode,
                    &audit,
                    owner,
                    d.cycle.start,
                    d.split,
                    d.cycle.end,
                );
                cycles += 1;
                if (a.n_b, a.n_a_prime, a.t_part1, a.t_part2)
                    != (d.n_b, d.n_a_prime, d.t_part1, d.t_part2)
                {
                    mismatches += 1;
                }
            }
        }
    }
    verdict(
        mismatches == 0 && cycles >= 100_000,
        format!("{cycles} cycles, {mismatches} mismatches"),
    )
}

fn ordering_spec(pkts: Vec<Tick>) -> SweepSpec {
    SweepSpec {
        axis: SweepAxis::PacketLength(pkts),
        protocols: vec![
            SweepProtocol::Tdma,
            SweepProtocol::CsmaRtsCts,
            SweepProtocol::CsmaBasic,
            SweepProtocol::Aloha,
        ],
        csma: CsmaParams::reference(Tick(30)),
        aloha_p: 0.5,
        inputs: InterTxInputs::default(),
        horizon: Tick(10_000_000),
        base_seed: 1,
        repetitions: 3,
    }
}

fn criterion_9() -> Verdict {
    let pkts: Vec<Tick> = (30..=100).step_by(10).map(Tick).collect();
    let rows = experiment::sweep(&ordering_spec(pkts.clone()), EXEC).unwrap();
    let mut bad = Vec::new();
    for (chunk, pkt) in rows.chunks(4).zip(&pkts) {
        let get = |f: fn(&experiment::SweepRow) -> Option<f64>| -> Vec<f64> {
            chunk.iter().map(|r| f(r).unwrap()).collect()
        };
        for (kind, v) in [
            ("analytic", get(|r| r.psi_analytic_slots)),
            ("sim", get(|r| r.psi_sim_mean_slots)),
        ] {
            let (tdma, rts, basic, aloha) = (v[0], v[1], v[2], v[3]);
            if !(tdma < rts.min(basic) && rts.max(basic) < aloha) {
                bad.push(format!("{kind} at {pkt}: {v:?}"));
            }
        }
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() {
            format!("tdma < csma < aloha at {} packet lengths", pkts.len())
        } else {
            bad.join("; ")
        },
    )
}

/// Linear interpolation of the first sign change of `y` over `x`.
fn zero_crossing(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    (1..x.len()).find_map(|i| {
        (y[i - 1].signum() != y[i].signum()).then(|| {
            let z = x[i - 1] + (x[i] - x[i - 1]) * y[i - 1] / (y[i - 1] - y[i]);
            (z, x[i] - x[i - 1])
        })
    })
}

fn criterion_10() -> Verdict {
    let p_c = analytic::solve_collision_probability(32, 5).unwrap().p_c;
    let reference = CsmaParams::reference(Tick(30));
    let target = analytic::rtscts_basic_inflection(p_c, reference.l_rcts()).unwrap();
    // the crossover is stated in l_tran = l_pkt + l_ack
    let ack = reference.l_ack.as_f64();

    let fine: Vec<u64> = (30..=120).collect();
    let diff = |pkt: u64| {
        let params = CsmaParams::reference(Tick(pkt));
        let inputs = InterTxInputs::default();
        analytic::csma_cct(&params, CsmaMode::RtsCts, inputs).unwrap().psi_slots
            - analytic::csma_cct(&params, CsmaMode::Basic, inputs).unwrap().psi_slots
    };
    let x: Vec<f64> = fine.iter().map(|&p| p as f64 + ack).collect();
    let y: Vec<f64> = fine.iter().map(|&p| diff(p)).collect();
    let analytic_cross = zero_crossing(&x, &y);

    let coarse: Vec<u64> = (50..=94).step_by(4).collect();
    let mut y_sim = Vec::new();
    for &pkt in &coarse {
        let s = seeds(1, 10);
        let rts = replicate(&csma_config(pkt, CsmaMode::RtsCts, 10_000_000), &s, EXEC).unwrap();
        let basic = replicate(&csma_config(pkt, CsmaMode::Basic, 10_000_000), &s, EXEC).unwrap();
        y_sim.push(psi_mean(&rts) - psi_mean(&basic));
    }
    let x_sim: Vec<f64> = coarse.iter().map(|&p| p as f64 + ack).collect();
    let sim_cross = zero_crossing(&x_sim, &y_sim);

    let within = |c: Option<(f64, f64)>| {
        c.is_some_and(|(z, step)| rel(z, target) <= 0.10 && (z - target).abs() <= step + 0.10 * target)
    };
    let show = |c: Option<(f64, f64)>| c.map_or("none".to_string(), |(z, _)| format!("{z:.2}"));
    verdict(
        within(analytic_cross) && within(sim_cross),
        format!(
            "l_tran crossover: target {target:.2}, analytic {}, sim {}",
            show(analytic_cross),
            show(sim_cross)
        ),
    )
}

fn criterion_11() -> Verdict {
    let mut worst = 0.0f64;
    let inputs = InterTxInputs::default();
    let base = CsmaParams {
        beta: 0,
        ..CsmaParams::reference(Tick(30))
    };
    let mut best = (f64::INFINITY, 0u32);
    for w in 2..=64u32 {
        let params = CsmaParams { cw_min: w, ..base };
        let full = analytic::csma_cct(&params, CsmaMode::RtsCts, inputs)
            .unwrap()
            .psi_slots;
        let simple = analytic::csma_cct_fixed_window(&params, inputs.p_ni0).unwrap();
        worst = worst.max(rel(full, simple));
        if full < best.0 {
            best = (full, w);
        }
    }
    let predicted = (2.0 * (base.l_difs + base.l_rcts()).as_f64().sqrt() - 1.0).round();
    let gap = (best.1 as f64 - predicted).abs();
    verdict(
        worst <= 1e-9 && gap <= 1.0,
        format!(
            "max rel diff {worst:.1e}, argmin {} vs predicted {predicted}",
            best.1
        ),
    )
}

fn criterion_12() -> Verdict {
    let periodic = |pattern: &str, len: u64, repeats: usize| {
        let events: Vec<ChannelEvent> = pattern
            .chars()
            .cycle()
            .take(pattern.len() * repeats)
            .enumerate()
            .map(|(i, c)| {
                let s = Tick(i as u64 * len);
                ChannelEvent::success(s, s + Tick(len), (c as u8 - b'A') as usize)
            })
            .collect();
        let horizon = events.last().unwrap().end;
        ChannelTrace::new(vec!["A".into(), "B".into()], events, horizon).unwrap()
    };
    let psi = |trace: &ChannelTrace| metrics::channel_cycle_time(trace).unwrap().psi.unwrap();
    let abab = psi(&periodic("AB", 7, 200));
    let aabb = psi(&periodic("AABB", 7, 100));
    verdict(aabb == 2.0 * abab, format!("AABB {aabb} vs ABAB {abab}"))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Verdict)> = vec![
        (1, "example trace refresh moments and cycle times", criterion_1()),
        (2, "aloha optimum", criterion_2()),
        (3, "aloha formula grid", criterion_3()),
        (4, "collision fixed point", criterion_4()),
        (5, "backoff series", criterion_5()),
    ];
    let start = Instant::now();
    let runs = csma_runs();
    let elapsed = start.elapsed().as_secs_f64();
    results.push((6, "csma/ca rts/cts closed loop", criterion_6(&runs, elapsed)));
    results.push((7, "inter-transmission statistics", criterion_7(&runs)));
    results.push((8, "part conservation", criterion_8()));
    results.push((9, "tdma < csma < aloha ordering", criterion_9()));
    results.push((10, "rts/cts vs basic crossover", criterion_10()));
    results.push((11, "fixed-window simplification", criterion_11()));
    results.push((12, "AABB vs ABAB", criterion_12()));

    let mut failed = 0;
    for (n, name, v) in &results {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {n:>2} {name}: {}", v.detail);
        failed += usize::from(!v.passed);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
