use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use secure_ntt::campaign::{
    emit_report, run_campaign, CampaignConfig, KyberVariant, Preset, Report, ReportFormat,
    StuckSelection,
};
use secure_ntt::correction::{Corrector, PatcherTable, Policy, Thresholds, Weights};
use secure_ntt::injector::{FaultPlan, Persistence, StuckMode};
use secure_ntt::masking::MaskMode;
use secure_ntt::ntt::{intt_behavioral, ntt_behavioral, to_natural_order, NttParams, Polynomial};
use secure_ntt::pipeline::{run, RunOptions, TraceMode};
use secure_ntt::signals::Signal;

#[derive(Parser)]
#[command(
    name = "secure-ntt",
    version,
    about = "Fault-injection simulator for a monitored pipelined NTT"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded Kyber fault-injection campaign.
    Run(RunArgs),
    /// Transform one polynomial with the golden model or the pipeline.
    Ntt(NttArgs),
    /// Execute one pipelined transform under a single fault plan.
    Inject(InjectArgs),
    /// Re-render a saved JSON report.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON campaign configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Threshold preset: fidelity (256/512) or scaled (8/16).
    #[arg(long)]
    preset: Option<Preset>,
    /// Kyber variants: 512, 768, 1024 or all (comma separated).
    #[arg(long, value_delimiter = ',')]
    variant: Option<Vec<String>>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of reconfiguration slots.
    #[arg(long)]
    slots: Option<usize>,
    /// cfi_th_reld,cfi_th_relc,ccc_th_reld,ccc_th_relc
    #[arg(long, value_parser = parse_thresholds)]
    thresholds: Option<Thresholds>,
    /// w_cfi,w_ccc
    #[arg(long, value_parser = parse_weights)]
    weights: Option<Weights>,
    /// Attack polarity: 0, 1 or both.
    #[arg(long)]
    stuck: Option<StuckSelection>,
    #[arg(long)]
    mask: Option<MaskMode>,
    /// Hold each attack until the next reconfiguration.
    #[arg(long)]
    permanent: bool,
    /// Probability that a run is attacked.
    #[arg(long)]
    rate: Option<f64>,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
struct NttArgs {
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 3329)]
    q: u32,
    /// Comma-separated coefficients; random when absent.
    #[arg(long, value_delimiter = ',')]
    coeffs: Option<Vec<u32>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// golden or pipeline.
    #[arg(long, default_value = "pipeline")]
    engine: String,
    /// Inverse transform of the input (golden engine only).
    #[arg(long)]
    inverse: bool,
    /// Print the output in natural order instead of bit-reversed order.
    #[arg(long)]
    natural: bool,
    #[arg(long, default_value = "per-write")]
    mask: MaskMode,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 3329)]
    q: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Attack cycle R_t.
    #[arg(long)]
    r_t: u32,
    /// Signal selector R_s (10-bit pattern, 0 = attacked).
    #[arg(long, conflicts_with = "signal")]
    r_s: Option<u32>,
    /// Attack exactly one named signal, e.g. rd_en.
    #[arg(long)]
    signal: Option<Signal>,
    /// Polarity: 0 or 1.
    #[arg(long, default_value = "0", value_parser = parse_polarity)]
    stuck: StuckMode,
    #[arg(long)]
    permanent: bool,
    /// Enable the correction policy.
    #[arg(long)]
    correct: bool,
    #[arg(long, default_value_t = 4)]
    slots: usize,
    #[arg(long, value_parser = parse_thresholds)]
    thresholds: Option<Thresholds>,
    #[arg(long, default_value = "per-write")]
    mask: MaskMode,
    /// Keep every cycle of the trace instead of the last 16.
    #[arg(long)]
    full_trace: bool,
    #[arg(long, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
struct ReportArgs {
    path: PathBuf,
    #[arg(long, default_value = "table")]
    format: ReportFormat,
}

fn parse_list<T: std::str::FromStr>(s: &str, len: usize, what: &str) -> Result<Vec<T>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != len {
        return Err(format!("{what} takes {len} comma-separated values"));
    }
    parts
        .iter()
        .map(|p| {
            p.parse()
                .map_err(|_| format!("`{p}` is not a valid {what} value"))
        })
        .collect()
}

fn parse_thresholds(s: &str) -> Result<Thresholds, String> {
    let v: Vec<u64> = parse_list(s, 4, "thresholds")?;
    Ok(Thresholds {
        cfi_th_reld: v[0],
        cfi_th_relc: v[1],
        ccc_th_reld: v[2],
        ccc_th_relc: v[3],
    })
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    let v: Vec<f64> = parse_list(s, 2, "weights")?;
    Ok(Weights {
        w_cfi: v[0],
        w_ccc: v[1],
    })
}

fn parse_polarity(s: &str) -> Result<StuckMode, String> {
    match s {
        "0" => Ok(StuckMode::StuckAt0),
        "1" => Ok(StuckMode::StuckAt1),
        other => Err(format!("`{other}` is not 0 or 1")),
    }
}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    /// A corrected output disagreed with the golden model.
    Violation(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation(msg)) => {
            eprintln!("invariant violation: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<Status> {
    match cmd {
        Command::Run(a) => cmd_run(a),
        Command::Ntt(a) => cmd_ntt(a),
        Command::Inject(a) => cmd_inject(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn build_config(a: &RunArgs) -> anyhow::Result<CampaignConfig> {
    let mut cfg = match &a.config {
        Some(p) => CampaignConfig::from_json(&read_text(p)?)?,
        None => CampaignConfig::default(),
    };
    if let Some(p) = a.preset {
        cfg.thresholds = p.thresholds();
    }
    if let Some(vs) = &a.variant {
        cfg.variants = if vs.iter().any(|v| v == "all") {
            KyberVariant::ALL.to_vec()
        } else {
            vs.iter().map(|v| v.parse()).collect::<Result<_, _>>()?
        };
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.slots {
        cfg.m = v;
    }
    if let Some(v) = a.thresholds {
        cfg.thresholds = v;
    }
    if let Some(v) = a.weights {
        cfg.weights = v;
    }
    if let Some(v) = a.stuck {
        cfg.injection.stuck = v;
    }
    if let Some(v) = a.mask {
        cfg.masking = v;
    }
    if a.permanent {
        cfg.injection.persistence = Persistence::Permanent;
    }
    if let Some(v) = a.rate {
        cfg.injection.rate = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(a: RunArgs) -> anyhow::Result<Status> {
    let cfg = build_config(&a)?;
    let report = run_campaign(&cfg)?;
    if let Some(path) = &a.out {
        std::fs::write(path, report.to_json())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", emit_report(&report, a.format));
    let t = report.totals;
    if t.golden_mismatches > 0 {
        return Ok(Status::Violation(format!(
            "{} of {} runs ended with output differing from the golden model",
            t.golden_mismatches, t.runs
        )));
    }
    Ok(Status::Ok)
}

fn input_poly(coeffs: &Option<Vec<u32>>, seed: u64, p: &NttParams) -> anyhow::Result<Polynomial> {
    Ok(match coeffs {
        Some(c) => Polynomial::new(c.clone(), p)?,
        None => Polynomial::random(&mut ChaCha8Rng::seed_from_u64(seed), p),
    })
}

fn cmd_ntt(a: NttArgs) -> anyhow::Result<Status> {
    let p = NttParams::new(a.n, a.q)?;
    let input = input_poly(&a.coeffs, a.seed, &p)?;
    let (mut output, cycles) = match a.engine.as_str() {
        "golden" if a.inverse => (intt_behavioral(&input, &p)?, None),
        "golden" => (ntt_behavioral(&input, &p)?, None),
        "pipeline" if a.inverse => bail!("--inverse is only available with --engine golden"),
        "pipeline" => {
            let opts = RunOptions {
                mask_mode: a.mask,
                mask_seed: a.seed,
                trace: TraceMode::Off,
                ..RunOptions::default()
            };
            let out = run(&input, &p, &opts, None)?;
            (out.output, Some(out.cycles))
        }
        other => bail!("unknown engine `{other}` (expected golden or pipeline)"),
    };
    if a.natural && !a.inverse {
        output = to_natural_order(&output, &p);
    }
    match a.format {
        ReportFormat::Json => {
            let doc = json!({
                "n": a.n,
                "q": a.q,
                "omega": p.omega(),
                "engine": a.engine,
                "inverse": a.inverse,
                "order": if a.natural || a.inverse { "natural" } else { "bit-reversed" },
                "cycles": cycles,
                "input": input.coeffs(),
                "output": output.coeffs(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        ReportFormat::Table => {
            if let Some(c) = cycles {
                println!("cycles: {c}");
            }
            for (i, (x, y)) in input.coeffs().iter().zip(output.coeffs()).enumerate() {
                println!("{i:>5} {x:>6} {y:>6}");
            }
        }
    }
    Ok(Status::Ok)
}

fn cmd_inject(a: InjectArgs) -> anyhow::Result<Status> {
    let p = NttParams::new(a.n, a.q)?;
    let input = Polynomial::random(&mut ChaCha8Rng::seed_from_u64(a.seed), &p);
    let mut plan = match (a.signal, a.r_s) {
        (Some(sig), _) => FaultPlan::single(a.r_t, sig, a.stuck),
        (None, Some(r_s)) => FaultPlan::new(a.r_t, r_s, a.stuck)?,
        (None, None) => bail!("one of --r-s or --signal is required"),
    };
    plan.validate()?;
    if a.permanent {
        plan = plan.permanent();
    }
    let opts = RunOptions {
        plans: vec![plan],
        mask_mode: a.mask,
        mask_seed: a.seed,
        trace: if a.full_trace {
            TraceMode::Full
        } else {
            TraceMode::default()
        },
        ..RunOptions::default()
    };
    let mut corrector = if a.correct {
        let policy = Policy {
            thresholds: a.thresholds.unwrap_or_default(),
            ..Policy::default()
        };
        if a.slots == 0 {
            bail!("--slots must be at least 1");
        }
        Some(Corrector::new(
            PatcherTable::new(a.slots, Weights::default()).shared(),
            policy,
            0,
        )?)
    } else {
        None
    };
    let out = run(&input, &p, &opts, corrector.as_mut())?;
    let golden = ntt_behavioral(&input, &p)?;
    let matches = out.output == golden;

    match a.format {
        ReportFormat::Json => {
            let doc = json!({
                "plan": plan,
                "attacked": plan.gate_word().attacked().iter().map(|s| s.name()).collect::<Vec<_>>(),
                "flags": out.flags,
                "events": out.events,
                "cycles": out.cycles,
                "elapsed_ns": out.elapsed_ns,
                "matches_golden": matches,
                "trace": out.trace,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        ReportFormat::Table => print!("{}", render_inject(&plan, &out, matches)),
    }
    if a.correct && !matches {
        return Ok(Status::Violation(
            "corrected output differs from the golden model".into(),
        ));
    }
    Ok(Status::Ok)
}

fn render_inject(
    plan: &FaultPlan,
    out: &secure_ntt::pipeline::RunOutcome,
    matches: bool,
) -> String {
    let mut s = String::new();
    let names: Vec<&str> = plan
        .gate_word()
        .attacked()
        .iter()
        .map(|x| x.name())
        .collect();
    let _ = writeln!(
        s,
        "plan: R_t={} R_s={} ({}) {} {:?}",
        plan.r_t,
        plan.r_s,
        if names.is_empty() {
            "none".to_string()
        } else {
            names.join(",")
        },
        plan.mode,
        plan.persistence
    );
    let _ = writeln!(
        s,
        "{:>6} {:>5} {:>4} {:>4} {:>10} {:>10}",
        "cycle", "seg", "csr", "rsr", "derived", "observed"
    );
    for e in &out.trace {
        let mark = if e.derived != e.observed { " *" } else { "" };
        let _ = writeln!(
            s,
            "{:>6} {:>5} {:>4} {:>4} {:>10} {:>10}{}",
            e.cycle,
            e.seg_cycle,
            e.csr.to_string(),
            e.rsr.to_string(),
            e.derived.to_string(),
            e.observed.to_string(),
            mark
        );
    }
    let f = &out.flags;
    let _ = writeln!(
        s,
        "flags: barrett_cfi={} polymem_cfi={} uv_cfi={} cfi_fault={} ccc_fault={}",
        u8::from(f.barrett_cfi),
        u8::from(f.polymem_cfi),
        u8::from(f.uv_cfi),
        u8::from(f.cfi_fault),
        u8::from(f.ccc_fault)
    );
    for m in &out.measures {
        let _ = writeln!(
            s,
            "measure: {} after {} fault at cycle {} (slot {} -> {}, {} ns)",
            m.kind, m.trigger, m.cycle, m.from_slot, m.to_slot, m.cost_ns
        );
    }
    let _ = writeln!(
        s,
        "cycles: {} (nominal {}), simulated time: {} ns, output matches golden: {}",
        out.cycles, out.nominal_cycles, out.elapsed_ns, matches
    );
    s
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<Status> {
    let report = Report::from_json(&read_text(&a.path)?)?;
    print!("{}", emit_report(&report, a.format));
    Ok(Status::Ok)
}
