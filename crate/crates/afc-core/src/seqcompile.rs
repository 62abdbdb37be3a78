//! Compiles a declarative pump target into an RF schedule for the
//! double-pass AOM channel and the EOM sideband channel, with etalon and
//! tuning-range checks, plus static coverage verification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pumping::{PulseTrain, PumpTarget};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Etalon {
    pub center_mhz: f64,
    pub bandwidth_mhz: f64,
}

impl Etalon {
    pub fn passes(&self, freq_mhz: f64) -> bool {
        (freq_mhz - self.center_mhz).abs() <= self.bandwidth_mhz / 2.0
    }
}

/// Modulator and filter limits of the pump chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardwareLimits {
    /// AOM RF modulation bandwidth (MHz).
    pub aom_bandwidth_mhz: f64,
    /// Double-pass doubles the optical shift per RF Hz.
    pub aom_double_pass: bool,
    pub eom_max_tones: usize,
    /// Ratio of a driven sideband to a suppressed tone.
    pub eom_extinction: f64,
    /// Ideal bandpass selecting the EOM sidebands; `None` passes everything.
    pub etalon: Option<Etalon>,
}

impl Default for HardwareLimits {
    fn default() -> Self {
        HardwareLimits {
            aom_bandwidth_mhz: 50.0,
            aom_double_pass: true,
            eom_max_tones: 4,
            eom_extinction: 20.0,
            etalon: None,
        }
    }
}

impl HardwareLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.aom_bandwidth_mhz > 0.0) || !(self.eom_extinction > 0.0) {
            return Err(Error::InvalidParameter(
                "hardware limits must be positive".into(),
            ));
        }
        if self.eom_max_tones == 0 {
            return Err(Error::InvalidParameter(
                "eom_max_tones must be >= 1".into(),
            ));
        }
        if let Some(e) = &self.etalon {
            if !(e.bandwidth_mhz > 0.0) {
                return Err(Error::InvalidParameter(
                    "etalon bandwidth must be > 0 MHz".into(),
                ));
            }
        }
        Ok(())
    }

    /// Largest optical detuning (window-local) the AOM can reach.
    pub fn optical_half_range_mhz(&self) -> f64 {
        if self.aom_double_pass {
            self.aom_bandwidth_mhz
        } else {
            self.aom_bandwidth_mhz / 2.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    Sech,
    Square,
    Cw,
}

impl Envelope {
    pub fn as_str(&self) -> &'static str {
        match self {
            Envelope::Sech => "sech",
            Envelope::Square => "square",
            Envelope::Cw => "cw",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "sech" => Ok(Envelope::Sech),
            "square" => Ok(Envelope::Square),
            "cw" => Ok(Envelope::Cw),
            other => Err(Error::MalformedSchedule(format!(
                "unknown envelope '{other}'"
            ))),
        }
    }
}

/// One AOM chirp within a repetition. Sweep frequencies are window-local
/// optical detunings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AomSegment {
    pub start_ms: f64,
    pub duration_ms: f64,
    pub sweep_start_mhz: f64,
    pub sweep_stop_mhz: f64,
    pub envelope: Envelope,
    pub amplitude: f64,
}

/// One EOM drive tone. A gate restricts the tone to a slice of each
/// repetition (used when windows carry different comb spacings).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EomTone {
    pub freq_mhz: f64,
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_ms: Option<(f64, f64)>,
}

/// Compiled pump schedule: one repetition of AOM segments, the EOM tone
/// table, and the repetition count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RFSchedule {
    pub aom_segments: Vec<AomSegment>,
    pub eom_tones: Vec<EomTone>,
    pub repetitions: u32,
    pub rep_duration_ms: f64,
    pub total_duration_ms: f64,
}

impl RFSchedule {
    pub fn validate(&self, limits: &HardwareLimits) -> Result<()> {
        limits.validate()?;
        let half_range = limits.optical_half_range_mhz();
        let mut prev_stop = 0.0_f64;
        for seg in &self.aom_segments {
            if seg.start_ms < prev_stop - 1e-12 {
                return Err(Error::MalformedSchedule(format!(
                    "segment at {} ms overlaps the previous one",
                    seg.start_ms
                )));
            }
            prev_stop = seg.start_ms + seg.duration_ms;
            let lo = seg.sweep_start_mhz.min(seg.sweep_stop_mhz);
            let hi = seg.sweep_start_mhz.max(seg.sweep_stop_mhz);
            if lo < -half_range - 1e-9 || hi > half_range + 1e-9 {
                return Err(Error::SweepOutOfRange {
                    start_mhz: seg.sweep_start_mhz,
                    stop_mhz: seg.sweep_stop_mhz,
                    limit_mhz: half_range,
                });
            }
        }
        let n_tones = self
            .eom_tones
            .iter()
            .filter(|t| t.freq_mhz != 0.0)
            .count();
        if n_tones > limits.eom_max_tones {
            return Err(Error::InvalidParameter(format!(
                "{n_tones} EOM tones exceed the budget of {}",
                limits.eom_max_tones
            )));
        }
        Ok(())
    }

    /// Optical tones delivered to the crystal: carrier plus both sidebands
    /// of every drive tone.
    pub fn optical_tones(&self) -> Vec<f64> {
        let mut tones = vec![0.0];
        for t in &self.eom_tones {
            if t.freq_mhz != 0.0 {
                tones.push(t.freq_mhz);
                tones.push(-t.freq_mhz);
            }
        }
        tones.sort_by(|a, b| a.partial_cmp(b).unwrap());
        tones.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        tones
    }
}

/// Compiles the pump target into an RF schedule.
///
/// Windows sharing one comb geometry are swept together with all tones on;
/// windows with different spacings get their own time block per repetition
/// and a gated tone.
pub fn compile(
    target: &PumpTarget,
    train: &PulseTrain,
    limits: &HardwareLimits,
) -> Result<RFSchedule> {
    target.validate()?;
    train.validate()?;
    limits.validate()?;

    // EOM plan: one drive tone per distinct nonzero window-centre magnitude.
    let mut tone_freqs: Vec<f64> = Vec::new();
    for (i, w) in target.windows.iter().enumerate() {
        if let Some(et) = &limits.etalon {
            if !et.passes(w.center_mhz) {
                return Err(Error::UnreachableWindow {
                    index: i,
                    center_mhz: w.center_mhz,
                    reason: format!(
                        "outside the etalon passband {} +- {} MHz",
                        et.center_mhz,
                        et.bandwidth_mhz / 2.0
                    ),
                });
            }
        }
        let f = w.center_mhz.abs();
        if f > 1e-9 && !tone_freqs.iter().any(|&t| (t - f).abs() < 1e-9) {
            tone_freqs.push(f);
        }
    }
    tone_freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if tone_freqs.len() > limits.eom_max_tones {
        return Err(Error::InvalidParameter(format!(
            "target needs {} EOM tones but the budget is {}",
            tone_freqs.len(),
            limits.eom_max_tones
        )));
    }

    let uniform = target.windows.windows(2).all(|pair| {
        target.window_spacing(&pair[0]) == target.window_spacing(&pair[1])
            && pair[0].pump_span_mhz == pair[1].pump_span_mhz
    });
    if !uniform {
        // Gated tones carry the block association; a carrier-addressed
        // window would be pumped during every block.
        if target.windows.iter().any(|w| w.center_mhz.abs() < 1e-9) {
            return Err(Error::InvalidParameter(
                "mixed comb spacings cannot include a carrier-addressed window".into(),
            ));
        }
    }

    let envelope = if train.sech_amplitude {
        Envelope::Sech
    } else {
        Envelope::Square
    };
    let half_range = limits.optical_half_range_mhz();

    let mut segments: Vec<AomSegment> = Vec::new();
    let mut gates: Vec<(f64, f64, f64)> = Vec::new(); // (tone freq, start, stop)
    let mut cursor = 0.0_f64;
    if uniform {
        // One shared block: local teeth of the first window (all windows
        // replicate it through their tones).
        let w = &target.windows[0];
        let span = w.pump_span_mhz.unwrap_or(train.delta_p_mhz);
        let n = target.comb_positions(w);
        let spacing = target.window_spacing(w);
        for k in 0..n {
            let local = (k as f64 - (n as f64 - 1.0) / 2.0) * spacing;
            push_segment(
                &mut segments,
                &mut cursor,
                local,
                span,
                train.t0_ms,
                envelope,
                half_range,
            )?;
        }
    } else {
        for w in &target.windows {
            let span = w.pump_span_mhz.unwrap_or(train.delta_p_mhz);
            let n = target.comb_positions(w);
            let spacing = target.window_spacing(w);
            let block_start = cursor;
            for k in 0..n {
                let local = (k as f64 - (n as f64 - 1.0) / 2.0) * spacing;
                push_segment(
                    &mut segments,
                    &mut cursor,
                    local,
                    span,
                    train.t0_ms,
                    envelope,
                    half_range,
                )?;
            }
            gates.push((w.center_mhz.abs(), block_start, cursor));
        }
    }

    let eom_tones = tone_freqs
        .iter()
        .map(|&f| EomTone {
            freq_mhz: f,
            amplitude: 1.0,
            gate_ms: if uniform {
                None
            } else {
                gates
                    .iter()
                    .find(|(tf, _, _)| (tf - f).abs() < 1e-9)
                    .map(|&(_, a, b)| (a, b))
            },
        })
        .collect();

    let rep_duration_ms = cursor;
    let schedule = RFSchedule {
        aom_segments: segments,
        eom_tones,
        repetitions: train.n_l,
        rep_duration_ms,
        total_duration_ms: rep_duration_ms * train.n_l as f64,
    };
    schedule.validate(limits)?;
    Ok(schedule)
}

#[allow(clippy::too_many_arguments)]
fn push_segment(
    segments: &mut Vec<AomSegment>,
    cursor: &mut f64,
    local_center_mhz: f64,
    span_mhz: f64,
    t0_ms: f64,
    envelope: Envelope,
    half_range_mhz: f64,
) -> Result<()> {
    let start = local_center_mhz - span_mhz / 2.0;
    let stop = local_center_mhz + span_mhz / 2.0;
    if start < -half_range_mhz - 1e-9 || stop > half_range_mhz + 1e-9 {
        return Err(Error::SweepOutOfRange {
            start_mhz: start,
            stop_mhz: stop,
            limit_mhz: half_range_mhz,
        });
    }
    // Store the duration exactly as a CSV reader will recompute it from
    // stop - start, so emit/parse round-trips bit-exactly.
    let next = *cursor + t0_ms;
    segments.push(AomSegment {
        start_ms: *cursor,
        duration_ms: next - *cursor,
        sweep_start_mhz: start,
        sweep_stop_mhz: stop,
        envelope,
        amplitude: 1.0,
    });
    *cursor = next;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageWarning {
    pub freq_mhz: f64,
    /// Relative amplitude of the suppressed tone (1/extinction).
    pub amplitude: f64,
    pub within_etalon: bool,
    /// Whether the leaked tone lands inside a target window.
    pub overlaps_comb: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Comb positions pumped across all windows.
    pub comb_lines: usize,
    /// Sum of per-window comb extents (lines times spacing).
    pub covered_bandwidth_mhz: f64,
    /// Envelope from the lowest to the highest pumped frequency.
    pub span_mhz: f64,
    pub leakage: Vec<LeakageWarning>,
}

/// Static verification of a schedule against its target: counts the comb
/// lines implied by sweeps and tones and flags spurious pumping from the
/// finite EOM extinction.
pub fn coverage(
    schedule: &RFSchedule,
    target: &PumpTarget,
    limits: &HardwareLimits,
) -> Result<CoverageReport> {
    let mut comb_lines = 0usize;
    let mut covered = 0.0_f64;
    let mut span_lo = f64::INFINITY;
    let mut span_hi = f64::NEG_INFINITY;

    for w in &target.windows {
        let spacing = target.window_spacing(w);
        let tone = schedule
            .eom_tones
            .iter()
            .find(|t| (t.freq_mhz - w.center_mhz.abs()).abs() < 1e-9);
        let in_gate = |seg: &AomSegment| match tone.and_then(|t| t.gate_ms) {
            Some((a, b)) => seg.start_ms >= a - 1e-12 && seg.start_ms < b - 1e-12,
            None => true,
        };
        let mut n = 0usize;
        for seg in schedule.aom_segments.iter().filter(|s| in_gate(s)) {
            n += 1;
            let center = w.center_mhz + 0.5 * (seg.sweep_start_mhz + seg.sweep_stop_mhz);
            span_lo = span_lo.min(center - spacing / 2.0);
            span_hi = span_hi.max(center + spacing / 2.0);
        }
        comb_lines += n;
        covered += n as f64 * spacing;
    }
    if schedule.aom_segments.is_empty() {
        span_lo = 0.0;
        span_hi = 0.0;
    }

    // Optical tones not aimed at a window leak at 1/extinction.
    let mut leakage = Vec::new();
    for f in schedule.optical_tones() {
        let designated = target
            .windows
            .iter()
            .any(|w| (w.center_mhz - f).abs() < 1e-9);
        if designated {
            continue;
        }
        if f == 0.0 && schedule.eom_tones.is_empty() {
            // AOM-only schedule: the carrier is the pump itself.
            continue;
        }
        let overlaps_comb = target
            .windows
            .iter()
            .any(|w| (f - w.center_mhz).abs() <= w.bandwidth_mhz / 2.0);
        leakage.push(LeakageWarning {
            freq_mhz: f,
            amplitude: 1.0 / limits.eom_extinction,
            within_etalon: limits.etalon.map(|e| e.passes(f)).unwrap_or(true),
            overlaps_comb,
        });
    }

    Ok(CoverageReport {
        comb_lines,
        covered_bandwidth_mhz: covered,
        span_mhz: span_hi - span_lo,
        leakage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    Csv,
    Json,
}

const CSV_HEADER: &str = "channel,t_start_ms,t_stop_ms,f_start_MHz,f_stop_MHz,envelope,amplitude";

/// Serializes the schedule. CSV unrolls every repetition into absolute-time
/// rows; JSON keeps the folded structure. Both formats are byte-stable and
/// round-trip through `parse`.
pub fn emit(schedule: &RFSchedule, format: EmitFormat) -> Result<String> {
    match format {
        EmitFormat::Json => {
            let mut s = serde_json::to_string_pretty(schedule)
                .map_err(|e| Error::Config(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        EmitFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for rep in 0..schedule.repetitions {
                let off = rep as f64 * schedule.rep_duration_ms;
                for seg in &schedule.aom_segments {
                    let t0 = off + seg.start_ms;
                    let t1 = t0 + seg.duration_ms;
                    out.push_str(&format!(
                        "aom,{},{},{},{},{},{}\n",
                        t0,
                        t1,
                        seg.sweep_start_mhz,
                        seg.sweep_stop_mhz,
                        seg.envelope.as_str(),
                        seg.amplitude
                    ));
                }
            }
            for tone in &schedule.eom_tones {
                match tone.gate_ms {
                    None => out.push_str(&format!(
                        "eom,0,{},{},{},cw,{}\n",
                        schedule.total_duration_ms, tone.freq_mhz, tone.freq_mhz, tone.amplitude
                    )),
                    Some((a, b)) => {
                        for rep in 0..schedule.repetitions {
                            let off = rep as f64 * schedule.rep_duration_ms;
                            out.push_str(&format!(
                                "eom,{},{},{},{},cw,{}\n",
                                off + a,
                                off + b,
                                tone.freq_mhz,
                                tone.freq_mhz,
                                tone.amplitude
                            ));
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Parses a schedule back from either emitted format.
pub fn parse(data: &str, format: EmitFormat) -> Result<RFSchedule> {
    match format {
        EmitFormat::Json => {
            serde_json::from_str(data).map_err(|e| Error::MalformedSchedule(e.to_string()))
        }
        EmitFormat::Csv => parse_csv(data),
    }
}

struct CsvRow {
    channel: String,
    t_start: f64,
    t_stop: f64,
    f_start: f64,
    f_stop: f64,
    envelope: Envelope,
    amplitude: f64,
}

fn parse_csv(data: &str) -> Result<RFSchedule> {
    let mut lines = data.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedSchedule("empty file".into()))?;
    if header != CSV_HEADER {
        return Err(Error::MalformedSchedule(format!(
            "unexpected header '{header}'"
        )));
    }
    let mut rows: Vec<CsvRow> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(Error::MalformedSchedule(format!(
                "line {}: expected 7 fields, got {}",
                lineno + 2,
                parts.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::MalformedSchedule(format!("line {}: {e}", lineno + 2)))
        };
        rows.push(CsvRow {
            channel: parts[0].to_string(),
            t_start: num(parts[1])?,
            t_stop: num(parts[2])?,
            f_start: num(parts[3])?,
            f_stop: num(parts[4])?,
            envelope: Envelope::parse(parts[5])?,
            amplitude: num(parts[6])?,
        });
    }

    let aom: Vec<&CsvRow> = rows.iter().filter(|r| r.channel == "aom").collect();
    let eom: Vec<&CsvRow> = rows.iter().filter(|r| r.channel == "eom").collect();
    if rows.len() != aom.len() + eom.len() {
        return Err(Error::MalformedSchedule("unknown channel".into()));
    }

    if aom.is_empty() {
        return Ok(RFSchedule {
            aom_segments: Vec::new(),
            eom_tones: eom
                .iter()
                .map(|r| EomTone {
                    freq_mhz: r.f_start,
                    amplitude: r.amplitude,
                    gate_ms: None,
                })
                .collect(),
            repetitions: 0,
            rep_duration_ms: 0.0,
            total_duration_ms: 0.0,
        });
    }

    // Fold the unrolled repetitions: find the block length whose repeated
    // time-shifted copies reproduce the row list.
    let n = aom.len();
    let seg_eq = |a: &CsvRow, b: &CsvRow| -> bool {
        a.f_start == b.f_start
            && a.f_stop == b.f_stop
            && a.envelope == b.envelope
            && a.amplitude == b.amplitude
            && ((a.t_stop - a.t_start) - (b.t_stop - b.t_start)).abs() < 1e-9
    };
    let mut fold: Option<(usize, f64)> = None;
    'outer: for p in 1..=n {
        if !n.is_multiple_of(p) {
            continue;
        }
        let shift = if p == n {
            0.0
        } else {
            aom[p].t_start - aom[0].t_start
        };
        for i in 0..n {
            let base = i % p;
            let rep = (i / p) as f64;
            if !seg_eq(aom[i], aom[base]) || (aom[i].t_start - (aom[base].t_start + rep * shift)).abs() > 1e-9 {
                continue 'outer;
            }
        }
        fold = Some((p, shift));
        break;
    }
    let (p, shift) = fold.ok_or_else(|| {
        Error::MalformedSchedule("aom rows do not form uniform repetitions".into())
    })?;
    let repetitions = (n / p) as u32;
    let rep_duration_ms = if repetitions > 1 {
        shift
    } else {
        aom[p - 1].t_stop - aom[0].t_start
    };
    let total_duration_ms = rep_duration_ms * repetitions as f64;

    let aom_segments: Vec<AomSegment> = aom[..p]
        .iter()
        .map(|r| AomSegment {
            start_ms: r.t_start,
            duration_ms: r.t_stop - r.t_start,
            sweep_start_mhz: r.f_start,
            sweep_stop_mhz: r.f_stop,
            envelope: r.envelope,
            amplitude: r.amplitude,
        })
        .collect();

    // EOM rows: one full-span row per ungated tone, otherwise one row per
    // repetition whose first instance carries the gate.
    let mut eom_tones: Vec<EomTone> = Vec::new();
    for r in &eom {
        let full_span = r.t_start == 0.0 && (r.t_stop - total_duration_ms).abs() < 1e-9;
        if full_span {
            eom_tones.push(EomTone {
                freq_mhz: r.f_start,
                amplitude: r.amplitude,
                gate_ms: None,
            });
        } else if r.t_start < rep_duration_ms {
            eom_tones.push(EomTone {
                freq_mhz: r.f_start,
                amplitude: r.amplitude,
                gate_ms: Some((r.t_start, r.t_stop)),
            });
        }
    }

    Ok(RFSchedule {
        aom_segments,
        eom_tones,
        repetitions,
        rep_duration_ms,
        total_duration_ms,
    })
}
