use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::CampaignConfig;
use super::profile::{KyberVariant, Phase};
use crate::correction::PatcherTable;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Outcome tallies. Merging is field-wise addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub runs: u64,
    pub injected: u64,
    /// Injections that changed at least one control signal.
    pub effective: u64,
    /// Effective injections that raised a flag.
    pub detected: u64,
    /// Detected injections whose final output equals the golden model.
    pub corrected: u64,
    /// Flags raised in runs without an effective injection.
    pub false_alarms: u64,
    /// Runs whose final output differs from the golden model.
    pub golden_mismatches: u64,
    pub repeats: u64,
    pub reloads: u64,
    pub relocates: u64,
    pub cfi_flags: u64,
    pub ccc_flags: u64,
    pub reads: u64,
    pub unmasked_reads: u64,
    pub stepped_cycles: u64,
    /// Cost of all applied measures.
    pub measure_ns: u64,
    /// Nominal transform time plus `measure_ns`.
    pub simulated_ns: u64,
}

impl Counters {
    pub fn merge(&mut self, o: &Counters) {
        self.runs += o.runs;
        self.injected += o.injected;
        self.effective += o.effective;
        self.detected += o.detected;
        self.corrected += o.corrected;
        self.false_alarms += o.false_alarms;
        self.golden_mismatches += o.golden_mismatches;
        self.repeats += o.repeats;
        self.reloads += o.reloads;
        self.relocates += o.relocates;
        self.cfi_flags += o.cfi_flags;
        self.ccc_flags += o.ccc_flags;
        self.reads += o.reads;
        self.unmasked_reads += o.unmasked_reads;
        self.stepped_cycles += o.stepped_cycles;
        self.measure_ns += o.measure_ns;
        self.simulated_ns += o.simulated_ns;
    }

    /// Percentage of effective injections that were detected.
    pub fn detection_eff(&self) -> Option<f64> {
        percent(self.detected, self.effective)
    }

    /// Percentage of effective injections that were detected and corrected.
    pub fn correction_eff(&self) -> Option<f64> {
        percent(self.corrected, self.effective)
    }

    pub fn unmasked_read_fraction(&self) -> Option<f64> {
        (self.reads > 0).then(|| self.unmasked_reads as f64 / self.reads as f64)
    }

    pub fn check(&self) -> Result<()> {
        if self.detected > self.effective
            || self.corrected > self.detected
            || self.effective > self.injected
        {
            return Err(Error::InvalidParams(format!(
                "inconsistent counters {self:?}"
            )));
        }
        Ok(())
    }
}

fn percent(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub phase: Phase,
    /// Row index within the phase.
    pub row: usize,
    pub ntt_runs_per_sample: u32,
    pub counters: Counters,
    pub detection_eff: Option<f64>,
    pub correction_eff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: KyberVariant,
    pub runs_per_sample: u64,
    pub blocks: Vec<BlockReport>,
    pub totals: Counters,
    pub detection_eff: Option<f64>,
    pub correction_eff: Option<f64>,
    pub unmasked_read_fraction: Option<f64>,
    pub patcher: PatcherTable,
    pub final_slot: usize,
}

impl VariantReport {
    pub(crate) fn finalize(&mut self) {
        let mut totals = Counters::default();
        for b in &mut self.blocks {
            b.detection_eff = b.counters.detection_eff();
            b.correction_eff = b.counters.correction_eff();
            totals.merge(&b.counters);
        }
        self.totals = totals;
        self.detection_eff = totals.detection_eff();
        self.correction_eff = totals.correction_eff();
        self.unmasked_read_fraction = totals.unmasked_read_fraction();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub seed: u64,
    pub samples: u64,
    pub config: CampaignConfig,
    pub variants: Vec<VariantReport>,
    pub totals: Counters,
    pub detection_eff: Option<f64>,
    pub correction_eff: Option<f64>,
    /// Sum over runs of nominal transform time plus measure costs.
    pub simulated_time_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReportFormat {
    Json,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "table" => Ok(ReportFormat::Table),
            other => Err(Error::config(
                "format",
                format!("`{other}` is not json or table"),
            )),
        }
    }
}

impl Report {
    /// A report with no variant rows.
    pub fn empty(config: CampaignConfig) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            seed: config.seed,
            samples: config.samples,
            config,
            variants: Vec::new(),
            totals: Counters::default(),
            detection_eff: None,
            correction_eff: None,
            simulated_time_ns: 0,
        }
    }

    pub(crate) fn finalize(&mut self) {
        let mut totals = Counters::default();
        for v in &mut self.variants {
            v.finalize();
            totals.merge(&v.totals);
        }
        self.totals = totals;
        self.detection_eff = totals.detection_eff();
        self.correction_eff = totals.correction_eff();
        self.simulated_time_ns = totals.simulated_ns;
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report =
            serde_json::from_str(text).map_err(|e| Error::config("report", e.to_string()))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", r.schema_version),
            ));
        }
        Ok(r)
    }

    pub fn render_table(&self) -> String {
        render_table(self)
    }
}

pub fn emit_report(r: &Report, fmt: ReportFormat) -> String {
    match fmt {
        ReportFormat::Json => r.to_json(),
        ReportFormat::Table => r.render_table(),
    }
}

fn eff(v: Option<f64>) -> String {
    match v {
        Some(p) if p.fract() == 0.0 => format!("{p:.0}"),
        Some(p) => format!("{p:.2}"),
        None => "-".into(),
    }
}

fn runs_cell(c: &Counters) -> String {
    if c.runs == c.injected {
        c.runs.to_string()
    } else {
        format!("{}/{}", c.runs, c.injected)
    }
}

const GROUP: [&str; 5] = [
    "#NTT/Block",
    "Runs & Faults",
    "Effective",
    "Det.%",
    "Corr.%",
];

fn render_table(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Fault detection and correction efficiency (seed {}, {} samples, {} slots)",
        r.seed, r.samples, r.config.m
    );
    if r.variants.is_empty() {
        let _ = writeln!(out, "(no runs)");
        return out;
    }

    let widths = [10usize, 13, 9, 6, 6];
    let group_w: usize = widths.iter().sum::<usize>() + 3 * (widths.len() - 1);
    let mut header1 = format!("{:<7} | {:>7} ", "Block", "Samples");
    let mut header2 = format!("{:<7} | {:>7} ", "", "");
    for v in &r.variants {
        let _ = write!(header1, "| {:^group_w$} ", v.variant.to_string());
        let cells: Vec<String> = GROUP
            .iter()
            .zip(widths)
            .map(|(h, w)| format!("{h:>w$}"))
            .collect();
        let _ = write!(header2, "| {} ", cells.join(" | "));
    }
    let rule = "-".repeat(header2.trim_end().len());
    let _ = writeln!(out, "{}", header1.trim_end());
    let _ = writeln!(out, "{}", header2.trim_end());
    let _ = writeln!(out, "{rule}");

    let rows = r.variants[0].blocks.len();
    for i in 0..rows {
        let first = &r.variants[0].blocks[i];
        let starts_phase = i == 0 || r.variants[0].blocks[i - 1].phase != first.phase;
        let (name, samples) = if starts_phase {
            (first.phase.to_string(), r.samples.to_string())
        } else {
            (String::new(), String::new())
        };
        let mut line = format!("{name:<7} | {samples:>7} ");
        for v in &r.variants {
            let b = &v.blocks[i];
            let _ = write!(
                line,
                "| {:>w0$} | {:>w1$} | {:>w2$} | {:>w3$} | {:>w4$} ",
                b.ntt_runs_per_sample,
                runs_cell(&b.counters),
                b.counters.effective,
                eff(b.detection_eff),
                eff(b.correction_eff),
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3],
                w4 = widths[4],
            );
        }
        let _ = writeln!(out, "{}", line.trim_end());
        let next_phase = r.variants[0].blocks.get(i + 1).map(|b| b.phase);
        if next_phase != Some(first.phase) {
            let _ = writeln!(out, "{rule}");
        }
    }

    let mut line = format!(
        "{:<7} | {:>7} ",
        "Total",
        r.samples * Phase::ALL.len() as u64
    );
    for v in &r.variants {
        let _ = write!(
            line,
            "| {:>w0$} | {:>w1$} | {:>w2$} | {:>w3$} | {:>w4$} ",
            v.runs_per_sample,
            runs_cell(&v.totals),
            v.totals.effective,
            eff(v.detection_eff),
            eff(v.correction_eff),
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3],
            w4 = widths[4],
        );
    }
    let _ = writeln!(out, "{}", line.trim_end());
    let _ = writeln!(out, "{rule}");

    for v in &r.variants {
        let t = &v.totals;
        let _ = writeln!(
            out,
            "{}: measures repeat={} reload={} relocate={}; false alarms={}; golden mismatches={}; unmasked reads={}; final slot={}",
            v.variant,
            t.repeats,
            t.reloads,
            t.relocates,
            t.false_alarms,
            t.golden_mismatches,
            v.unmasked_read_fraction.map_or("-".into(), |f| format!("{:.4}", f)),
            v.final_slot,
        );
        for s in &v.patcher.slots {
            let _ = writeln!(
                out,
                "  slot {}: NR={} NCFI={} NCCC={} risk={:.4}{}",
                s.slot_id,
                s.nr,
                s.ncfi,
                s.nccc,
                s.risk,
                if s.trojan_profile.is_some() {
                    " (trojan)"
                } else {
                    ""
                }
            );
        }
    }
    let _ = writeln!(out, "simulated time: {} ns", r.simulated_time_ns);
    out
}
