//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use secure_ntt::campaign::{run_campaign, CampaignConfig, KyberVariant, StuckSelection};
use secure_ntt::correction::{
    choose_measure, FaultKind, MeasureKind, PatcherTable, Policy, Thresholds, Weights,
};
use secure_ntt::injector::{is_effective, FaultPlan, StuckMode};
use secure_ntt::masking::{mask_pair, MaskContext, MaskMode};
use secure_ntt::monitors::MonitorConfig;
use secure_ntt::ntt::{intt_behavioral, ntt_behavioral, NttParams, Polynomial};
use secure_ntt::pipeline::{run, RunOptions, TraceMode};
use secure_ntt::signals::{golden_schedule, Signal};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn quiet() -> RunOptions {
    RunOptions {
        trace: TraceMode::Off,
        ..RunOptions::default()
    }
}

fn ntt_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, q, cases) in [(8usize, 17u32, 200), (256, 3329, 1000)] {
        let p = NttParams::new(n, q).unwrap();
        for i in 0..cases {
            let a = Polynomial::random(&mut rng, &p);
            let b = Polynomial::random(&mut rng, &p);
            let (fa, fb) = (
                ntt_behavioral(&a, &p).unwrap(),
                ntt_behavioral(&b, &p).unwrap(),
            );
            ensure!(
                intt_behavioral(&fa, &p).unwrap() == a,
                "roundtrip failed at n={n} case {i}"
            );
            let conv = intt_behavioral(&fa.pointwise(&fb, &p), &p).unwrap();
            let expect = common::cyclic_convolution(a.coeffs(), b.coeffs(), q);
            ensure!(
                conv.coeffs() == &expect[..],
                "convolution mismatch at n={n} case {i}"
            );
        }
    }
    Ok("200 cases at n=8 and 1000 at n=256: roundtrip and convolution exact".into())
}

fn cycle_count() -> Check {
    let mut got = Vec::new();
    for (n, q, expect) in [(256usize, 3329u32, 1028u64), (8, 17, 16)] {
        let p = NttParams::new(n, q).unwrap();
        let out = run(&Polynomial::zero(&p), &p, &quiet(), None).unwrap();
        ensure!(
            out.cycles == expect,
            "n={n}: {} cycles, expected {expect}",
            out.cycles
        );
        got.push(format!("n={n}: {} cycles", out.cycles));
    }
    Ok(got.join(", "))
}

fn pipeline_equivalence() -> Check {
    let p = NttParams::kyber();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..500 {
        let a = Polynomial::random(&mut rng, &p);
        let opts = RunOptions {
            mask_seed: i,
            ..quiet()
        };
        let out = run(&a, &p, &opts, None).unwrap();
        ensure!(
            out.output == ntt_behavioral(&a, &p).unwrap(),
            "mismatch on input {i}"
        );
        ensure!(!out.flags.any(), "fault-free run {i} raised a flag");
    }
    Ok("500 random inputs at n=256 match the behavioral model".into())
}

fn table2_reproduction() -> Check {
    let mut lines = Vec::new();
    for variant in KyberVariant::ALL {
        let mut cfg = CampaignConfig {
            variants: vec![variant],
            samples: 64,
            seed: 2024,
            ..CampaignConfig::default()
        };
        cfg.injection.stuck = StuckSelection::Both;
        let r = run_campaign(&cfg).map_err(|e| e.to_string())?;
        let t = r.totals;
        let expect_runs = 64 * u64::from([17u32, 24, 31][variant as usize]);
        ensure!(
            t.runs == expect_runs,
            "{variant}: {} runs, expected {expect_runs}",
            t.runs
        );
        ensure!(
            t.detected == t.effective,
            "{variant}: detected {} of {}",
            t.detected,
            t.effective
        );
        ensure!(
            t.corrected == t.effective,
            "{variant}: corrected {} of {}",
            t.corrected,
            t.effective
        );
        ensure!(
            t.golden_mismatches == 0,
            "{variant}: {} golden mismatches",
            t.golden_mismatches
        );
        lines.push(format!(
            "{variant} {} runs, {} effective, det {:.0}% corr {:.0}%",
            t.runs,
            t.effective,
            r.detection_eff.unwrap_or(f64::NAN),
            r.correction_eff.unwrap_or(f64::NAN)
        ));
    }
    Ok(lines.join("; "))
}

fn monitor_soundness() -> Check {
    let mut effective = 0;
    let p8 = NttParams::new(8, 17).unwrap();
    let sched8 = golden_schedule(p8.butterflies());
    let a8 = Polynomial::random(&mut ChaCha8Rng::seed_from_u64(5), &p8);
    for cycle in 0..sched8.len() as u32 {
        for sig in Signal::ALL {
            for mode in StuckMode::BOTH {
                let plan = FaultPlan::single(cycle, sig, mode);
                if !is_effective(&plan, &sched8).unwrap() {
                    continue;
                }
                effective += 1;
                let out = run(
                    &a8,
                    &p8,
                    &RunOptions {
                        plans: vec![plan],
                        ..quiet()
                    },
                    None,
                )
                .unwrap();
                ensure!(out.flags.any(), "missed at n=8: cycle {cycle} {sig} {mode}");
            }
        }
    }
    let exhaustive = effective;

    let p = NttParams::kyber();
    let sched = golden_schedule(p.butterflies());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut sampled = 0;
    for _ in 0..1000 {
        let plan = FaultPlan::single(
            rng.gen_range(0..(sched.len() as u32).min(1024)),
            Signal::ALL[rng.gen_range(0..Signal::COUNT)],
            StuckMode::BOTH[rng.gen_range(0..2)],
        );
        let a = Polynomial::random(&mut rng, &p);
        if !is_effective(&plan, &sched).unwrap() {
            continue;
        }
        sampled += 1;
        let out = run(
            &a,
            &p,
            &RunOptions {
                plans: vec![plan],
                ..quiet()
            },
            None,
        )
        .unwrap();
        ensure!(out.flags.any(), "missed at n=256: {plan:?}");
    }
    Ok(format!(
        "n=8 exhaustive: {exhaustive} effective faults, n=256 sample: {sampled} effective of 1000, none missed"
    ))
}

fn no_false_positives() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (n, q, runs) in [(8usize, 17u32, 10_000u64), (256, 3329, 200)] {
        let p = NttParams::new(n, q).unwrap();
        for i in 0..runs {
            let a = Polynomial::random(&mut rng, &p);
            let opts = RunOptions {
                mask_seed: i,
                monitors: MonitorConfig {
                    strict_ccc: true,
                    ..MonitorConfig::default()
                },
                ..quiet()
            };
            let out = run(&a, &p, &opts, None).unwrap();
            ensure!(
                !out.flags.any(),
                "flag raised in fault-free run {i} at n={n}"
            );
        }
    }
    Ok("10000 runs at n=8 and 200 at n=256 raised no flag".into())
}

fn ccc_delay_detection() -> Check {
    let mut checked = 0;
    for (n, q) in [(8usize, 17u32), (256, 3329)] {
        let p = NttParams::new(n, q).unwrap();
        let a = Polynomial::random(&mut ChaCha8Rng::seed_from_u64(8), &p);
        let last = p.butterflies() as u64 + 3;
        let cycles: Vec<u64> = if n == 8 {
            (1..=last).collect()
        } else {
            vec![1, 4, 300, 512, 1000, last]
        };
        for c in cycles {
            let opts = RunOptions {
                stall_cycles: vec![c],
                ..quiet()
            };
            let out = run(&a, &p, &opts, None).unwrap();
            ensure!(
                out.flags.ccc_fault,
                "stall at cycle {c} (n={n}) not flagged by the counter"
            );
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} single-cycle stalls all raised ccc_fault"
    ))
}

fn risk_and_policy() -> Check {
    let mut t = PatcherTable::new(2, Weights::default());
    for (slot, nr, ncfi, nccc) in [(0, 10, 2, 0), (1, 5, 2, 1)] {
        t.slots[slot].nr = nr;
        t.slots[slot].ncfi = ncfi;
        t.slots[slot].nccc = nccc;
    }
    // hand evaluation of the weighted, rate-normalized risk
    let (cfi_a, cfi_b, ccc_a, ccc_b) = (2.0 / 10.0, 2.0 / 5.0, 0.0, 1.0 / 5.0);
    let (max_cfi, max_ccc) = (f64::max(cfi_a, cfi_b), f64::max(ccc_a, ccc_b));
    let want_a = 0.5 * (cfi_a / max_cfi) + 0.5 * (ccc_a / max_ccc);
    let want_b = 0.5 * (cfi_b / max_cfi) + 0.5 * (ccc_b / max_ccc);
    let ra = t.risk(0, 0.5, 0.5).unwrap().unwrap();
    let rb = t.risk(1, 0.5, 0.5).unwrap().unwrap();
    ensure!(
        ((ra - want_a) / want_a).abs() <= 1e-12,
        "R_A = {ra}, expected {want_a}"
    );
    ensure!(
        ((rb - want_b) / want_b).abs() <= 1e-12,
        "R_B = {rb}, expected {want_b}"
    );
    t.recompute_risks();
    ensure!(t.select_slot().unwrap() == 0, "min-risk slot not selected");

    let th = Thresholds::fidelity();
    let got: Vec<MeasureKind> = [10, 300, 600]
        .iter()
        .map(|&c| choose_measure(c, &th, FaultKind::Cfi))
        .collect();
    let want = [
        MeasureKind::RepeatLoop,
        MeasureKind::ReloadAndRepeat,
        MeasureKind::RelocateAndRepeat,
    ];
    ensure!(got == want, "measures {got:?}");
    for kind in [FaultKind::Cfi, FaultKind::Ccc] {
        let g: Vec<MeasureKind> = [10, 300, 600]
            .iter()
            .map(|&c| choose_measure(c, &th, kind))
            .collect();
        ensure!(g == want, "{kind} measures {g:?}");
    }

    let mut tie = PatcherTable::new(2, Weights::default());
    tie.slots[0].nr = 5;
    tie.slots[1].nr = 10;
    tie.recompute_risks();
    ensure!(
        tie.select_slot().unwrap() == 1,
        "equal risks did not prefer the higher NR"
    );
    Ok(format!(
        "R_A={ra} R_B={rb}; measures {got:?}; tie-break picks NR=10"
    ))
}

fn masking() -> Check {
    let p = NttParams::kyber();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..100u64 {
        let a = Polynomial::random(&mut rng, &p);
        let masked = run(
            &a,
            &p,
            &RunOptions {
                mask_seed: i,
                ..quiet()
            },
            None,
        )
        .unwrap();
        let plain = run(
            &a,
            &p,
            &RunOptions {
                mask_mode: MaskMode::Off,
                ..quiet()
            },
            None,
        )
        .unwrap();
        let unmasked: Vec<u32> = masked.memory.iter().map(|w| w.unmasked(&p)).collect();
        let raw: Vec<u32> = plain.memory.iter().map(|w| w.value).collect();
        ensure!(unmasked == raw, "run {i}: unmasked image differs");
        ensure!(
            masked.memory.iter().all(|w| w.mask.is_some()),
            "run {i}: unmasked word left in memory"
        );
    }
    let q = u64::from(p.q());
    for _ in 0..1000 {
        let (u, v) = (rng.gen_range(0..p.q()), rng.gen_range(0..p.q()));
        let (s, d) = mask_pair(u, v, &MaskContext::identity(), &p);
        let want = (
            (u64::from(u) + u64::from(v)) % q,
            (u64::from(u) + q - u64::from(v)) % q,
        );
        ensure!(
            (u64::from(s), u64::from(d)) == want,
            "omega_r = 1 changed ({u}, {v})"
        );
    }
    Ok("100 masked runs unmask to the unmasked image; omega_r = 1 is the plain butterfly".into())
}

fn time_accounting() -> Check {
    let p = NttParams::kyber();
    let a = Polynomial::random(&mut ChaCha8Rng::seed_from_u64(10), &p);
    let opts = RunOptions {
        plans: [100, 400, 700]
            .iter()
            .map(|&c| FaultPlan::single(c, Signal::RdEn, StuckMode::StuckAt0))
            .collect(),
        ..quiet()
    };
    let policy = Policy {
        thresholds: Thresholds {
            cfi_th_reld: 1,
            cfi_th_relc: 2,
            ccc_th_reld: 1,
            ccc_th_relc: 2,
        },
        ..Policy::default()
    };
    let mut c = common::corrector(4, policy);
    let out = run(&a, &p, &opts, Some(&mut c)).unwrap();
    let kinds: Vec<MeasureKind> = out.measures.iter().map(|m| m.kind).collect();
    ensure!(
        kinds
            == [
                MeasureKind::RepeatLoop,
                MeasureKind::ReloadAndRepeat,
                MeasureKind::RelocateAndRepeat
            ],
        "measures {kinds:?}"
    );
    let want = 1028 * 10 + 10 + 150_000 + 256_000;
    ensure!(
        out.elapsed_ns == want,
        "elapsed {} ns, expected {want}",
        out.elapsed_ns
    );
    ensure!(
        out.output == ntt_behavioral(&a, &p).unwrap(),
        "corrected output differs"
    );
    Ok(format!("repeat + reload + relocate: {} ns", out.elapsed_ns))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("NTT correctness", ntt_correctness),
        ("cycle count", cycle_count),
        ("pipeline/golden equivalence", pipeline_equivalence),
        ("Kyber campaign efficiency", table2_reproduction),
        ("monitor soundness sweep", monitor_soundness),
        ("no false positives", no_false_positives),
        ("CCC delay detection", ccc_delay_detection),
        ("risk and measure policy", risk_and_policy),
        ("masking", masking),
        ("simulated-time accounting", time_accounting),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] {:>2}. {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2}. {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
