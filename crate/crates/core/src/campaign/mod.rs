//! Seeded fault-injection campaigns over Kyber workload profiles.
//!
//! Every NTT run draws its input, mask seed and attack from its own ChaCha8
//! stream keyed by `(variant index, run index)`, so a report depends only on
//! the configuration.

mod config;
mod profile;
mod report;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{CampaignConfig, Injection, Preset, SlotTrojan, StuckSelection};
pub use profile::{kyber_profile, Block, KyberProfile, KyberVariant, Phase};
pub use report::{
    emit_report, BlockReport, Counters, Report, ReportFormat, VariantReport, SCHEMA_VERSION,
};

use crate::correction::{Corrector, MeasureKind, PatcherTable};
use crate::error::Result;
use crate::injector::{is_effective, FaultPlan, PATTERN_MAX};
use crate::ntt::{ntt_behavioral, NttParams, Polynomial, TwiddleTable};
use crate::pipeline::{run_with_twiddles, RunOptions, TraceMode};
use crate::signals::{golden_schedule, ControlSignalVector};

/// Shared, read-only context for the runs of one campaign.
struct Bench {
    params: NttParams,
    twiddles: Arc<TwiddleTable>,
    golden: Vec<ControlSignalVector>,
}

/// The RNG stream of one run.
pub fn run_rng(seed: u64, variant_index: usize, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((variant_index as u64) << 48) | run_index);
    rng
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<Report> {
    cfg.validate()?;
    let params = NttParams::kyber();
    let bench = Bench {
        twiddles: Arc::new(TwiddleTable::new(&params)),
        golden: golden_schedule(params.butterflies()),
        params,
    };
    let mut report = Report::empty(cfg.clone());
    for (vi, &variant) in cfg.variants.iter().enumerate() {
        report.variants.push(run_variant(cfg, &bench, vi, variant)?);
    }
    report.finalize();
    Ok(report)
}

fn run_variant(
    cfg: &CampaignConfig,
    bench: &Bench,
    vi: usize,
    variant: KyberVariant,
) -> Result<VariantReport> {
    let profile = KyberProfile::new(variant);
    let mut table = PatcherTable::new(cfg.m, cfg.weights);
    for t in &cfg.trojan_profiles {
        table.slots[t.slot].trojan_profile = Some(t.profile()?);
    }
    let mut corrector = Corrector::new(table.shared(), cfg.policy(), 0)?;

    let mut rows_seen = [0usize; 3];
    let mut blocks: Vec<BlockReport> = profile
        .blocks
        .iter()
        .map(|b| {
            let slot = &mut rows_seen[b.phase as usize];
            let row = *slot;
            *slot += 1;
            BlockReport {
                phase: b.phase,
                row,
                ntt_runs_per_sample: b.ntt_runs,
                counters: Counters::default(),
                detection_eff: None,
                correction_eff: None,
            }
        })
        .collect();

    let mut run_index = 0u64;
    for _ in 0..cfg.samples {
        for (bi, b) in profile.blocks.iter().enumerate() {
            for _ in 0..b.ntt_runs {
                let c = execute_run(cfg, bench, vi, run_index, &mut corrector)?;
                blocks[bi].counters.merge(&c);
                run_index += 1;
            }
        }
    }

    let patcher = corrector.table().clone();
    Ok(VariantReport {
        variant,
        runs_per_sample: profile.total(),
        blocks,
        totals: Counters::default(),
        detection_eff: None,
        correction_eff: None,
        unmasked_read_fraction: None,
        patcher,
        final_slot: corrector.active_slot(),
    })
}

fn draw_plan(cfg: &CampaignConfig, rng: &mut ChaCha8Rng, run_index: u64) -> Option<FaultPlan> {
    let inj = &cfg.injection;
    let attacked = rng.gen_bool(inj.rate);
    let (r_t, r_s) = if inj.pairs.is_empty() {
        (
            rng.gen_range(0..=PATTERN_MAX),
            rng.gen_range(0..=PATTERN_MAX),
        )
    } else {
        inj.pairs[(run_index % inj.pairs.len() as u64) as usize]
    };
    let modes = inj.stuck.modes();
    let mode = modes[rng.gen_range(0..modes.len())];
    attacked.then_some(FaultPlan {
        r_t,
        r_s,
        mode,
        persistence: inj.persistence,
        slot_scope: None,
    })
}

fn execute_run(
    cfg: &CampaignConfig,
    bench: &Bench,
    vi: usize,
    run_index: u64,
    corrector: &mut Corrector,
) -> Result<Counters> {
    let mut rng = run_rng(cfg.seed, vi, run_index);
    let input = Polynomial::random(&mut rng, &bench.params);
    let mask_seed: u64 = rng.gen();
    let plan = draw_plan(cfg, &mut rng, run_index);
    let effective = match &plan {
        Some(p) => is_effective(p, &bench.golden)?,
        None => false,
    };

    let opts = RunOptions {
        plans: plan.into_iter().collect(),
        monitors: cfg.monitors(),
        mask_mode: cfg.masking,
        mask_seed,
        trace: TraceMode::Off,
        cycle_ns: cfg.latencies.cycle_ns,
        ..RunOptions::default()
    };
    let out = run_with_twiddles(
        &input,
        &bench.params,
        Arc::clone(&bench.twiddles),
        &opts,
        Some(corrector),
    )?;
    let golden = ntt_behavioral(&input, &bench.params)?;
    let matches = out.output == golden;
    let flagged = out.flags.any();

    Ok(Counters {
        runs: 1,
        injected: u64::from(plan.is_some()),
        effective: u64::from(effective),
        detected: u64::from(effective && flagged),
        corrected: u64::from(effective && flagged && matches && !out.uncorrected),
        false_alarms: u64::from(!effective && flagged),
        golden_mismatches: u64::from(!matches),
        repeats: out.measure_count(MeasureKind::RepeatLoop) as u64,
        reloads: out.measure_count(MeasureKind::ReloadAndRepeat) as u64,
        relocates: out.measure_count(MeasureKind::RelocateAndRepeat) as u64,
        cfi_flags: u64::from(out.flags.cfi_fault),
        ccc_flags: u64::from(out.flags.ccc_fault),
        reads: out.stats.reads,
        unmasked_reads: out.stats.unmasked_reads,
        stepped_cycles: out.cycles,
        measure_ns: out.measures.iter().map(|m| m.cost_ns).sum(),
        simulated_ns: out.elapsed_ns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_campaign_is_fully_effective() {
        let cfg = CampaignConfig {
            samples: 1,
            seed: 3,
            ..CampaignConfig::default()
        };
        let r = run_campaign(&cfg).unwrap();
        let t = r.totals;
        assert_eq!(t.runs, 17);
        assert_eq!(t.injected, 17);
        assert_eq!(t.detected, t.effective);
        assert_eq!(t.corrected, t.effective);
        assert_eq!(t.golden_mismatches, 0);
        assert_eq!(t.false_alarms, 0);
        t.check().unwrap();
        assert_eq!(r.variants[0].patcher.slots[0].nr, 17);
    }

    #[test]
    fn zero_rate_injects_nothing() {
        let mut cfg = CampaignConfig {
            samples: 1,
            ..CampaignConfig::default()
        };
        cfg.injection.rate = 0.0;
        let r = run_campaign(&cfg).unwrap();
        assert_eq!(r.totals.injected, 0);
        assert_eq!(r.detection_eff, None);
        assert_eq!(r.simulated_time_ns, 17 * 1028 * 10);
    }

    #[test]
    fn external_pairs_are_used() {
        let mut cfg = CampaignConfig {
            samples: 1,
            ..CampaignConfig::default()
        };
        cfg.injection.pairs = vec![(500, 1023)];
        let r = run_campaign(&cfg).unwrap();
        assert_eq!(r.totals.injected, 17);
        assert_eq!(r.totals.effective, 0);
    }
}
