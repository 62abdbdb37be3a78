//! Ideal comb spectra, the analytic echo efficiency, brute-force pulse
//! propagation through an arbitrary absorption spectrum, and photon-counting
//! statistics.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{Grid, Spectrum};

/// Ideal square-comb description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfcSpec {
    /// Comb spacing (MHz).
    pub spacing_mhz: f64,
    /// Finesse: spacing over tooth width.
    pub finesse: f64,
    /// Optical depth of the comb teeth (the pre-pumping depth retained by
    /// the teeth).
    pub depth: f64,
    /// Residual background optical depth.
    pub background: f64,
    /// Comb bandwidth per window (MHz).
    pub bandwidth_mhz: f64,
    /// Window centres (MHz).
    pub centers_mhz: Vec<f64>,
}

impl AfcSpec {
    pub fn single(spacing_mhz: f64, finesse: f64, depth: f64, background: f64, bandwidth_mhz: f64) -> Self {
        AfcSpec {
            spacing_mhz,
            finesse,
            depth,
            background,
            bandwidth_mhz,
            centers_mhz: vec![0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.finesse > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "finesse must be > 1, got {}",
                self.finesse
            )));
        }
        if !(self.depth >= 0.0) || !(self.background >= 0.0) {
            return Err(Error::InvalidParameter(
                "optical depths must be >= 0".into(),
            ));
        }
        if !(self.spacing_mhz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "comb spacing must be > 0 MHz, got {}",
                self.spacing_mhz
            )));
        }
        if self.bandwidth_mhz / self.spacing_mhz < 2.0 {
            return Err(Error::InvalidParameter(format!(
                "comb needs at least two teeth: bandwidth {} MHz at spacing {} MHz",
                self.bandwidth_mhz, self.spacing_mhz
            )));
        }
        if self.centers_mhz.is_empty() {
            return Err(Error::EmptyRange("comb has no windows".into()));
        }
        Ok(())
    }

    pub fn teeth_per_window(&self) -> usize {
        (self.bandwidth_mhz / self.spacing_mhz).round().max(1.0) as usize
    }
}

/// First-echo storage efficiency of a square comb: teeth of depth `d` and
/// duty 1/F over a background `d0`.
///
/// eta = (d/F)^2 exp(-d/F) sinc^2(pi/F) exp(-d0), sinc(x) = sin(x)/x.
pub fn efficiency_analytic(depth: f64, finesse: f64, background: f64) -> f64 {
    let d_tilde = depth / finesse;
    let x = std::f64::consts::PI / finesse;
    let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
    d_tilde * d_tilde * (-d_tilde).exp() * sinc * sinc * (-background).exp()
}

/// Pre-pumping depth that maximizes the analytic efficiency at a given
/// finesse: d_opt = 2F (tooth depth over finesse equal to 2). The background
/// factors out of the optimum.
pub fn optimal_depth(finesse: f64, _background: f64) -> f64 {
    2.0 * finesse
}

/// Builds the ideal square-comb spectrum. Edge channels are anti-aliased in
/// the transmission amplitude, which is what the propagation integrates, so
/// the sampled comb carries the ideal comb's harmonic content.
pub fn square_comb(afc: &AfcSpec, grid: Grid) -> Result<Spectrum> {
    afc.validate()?;
    let max_step = afc.spacing_mhz / (4.0 * afc.finesse);
    if grid.step_mhz > max_step {
        return Err(Error::UnderResolvedGrid {
            step: grid.step_mhz,
            fwhm: afc.spacing_mhz / afc.finesse,
            max: max_step,
        });
    }
    let tooth_width = afc.spacing_mhz / afc.finesse;
    let step = grid.step_mhz;

    // Triangle-weighted deposit of the ideal square profile. The entire
    // echo series is the exponential series of the od profile's Fourier
    // coefficients, so the deposit must preserve both the area and the
    // sub-cell edge positions of the od staircase: a plain cell average
    // keeps the area but biases the edge positions, which beats coherently
    // against the echo phase. The triangle costs a negligible
    // sinc^2(pi*step/spacing) on the first harmonic.
    // G(e) is the triangle mass below a point e cells from the centre.
    let g = |e: f64| -> f64 {
        if e <= -1.0 {
            0.0
        } else if e <= 0.0 {
            (e + 1.0) * (e + 1.0) / 2.0
        } else if e <= 1.0 {
            1.0 - (1.0 - e) * (1.0 - e) / 2.0
        } else {
            1.0
        }
    };

    let mut od = vec![afc.background; grid.len];
    for &center in &afc.centers_mhz {
        let n = afc.teeth_per_window();
        for k in 0..n {
            let tooth = center + (k as f64 - (n as f64 - 1.0) / 2.0) * afc.spacing_mhz;
            let lo = tooth - tooth_width / 2.0;
            let hi = tooth + tooth_width / 2.0;
            let j_lo = ((lo - grid.min_mhz) / step - 1.0).floor().max(0.0) as usize;
            let j_hi = (((hi - grid.min_mhz) / step + 1.0).ceil() as usize).min(grid.len - 1);
            for (j, od_j) in od.iter_mut().enumerate().take(j_hi + 1).skip(j_lo) {
                let f = grid.freq(j);
                let coverage = g((hi - f) / step) - g((lo - f) / step);
                if coverage > 0.0 {
                    *od_j += afc.depth * coverage;
                }
            }
        }
    }
    Ok(Spectrum::from_profile(grid, od))
}

/// Storage probe pulse: Gaussian intensity profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Intensity FWHM (ns).
    pub duration_ns: f64,
    /// Carrier detuning (MHz).
    pub center_mhz: f64,
}

impl Pulse {
    pub fn new(duration_ns: f64, center_mhz: f64) -> Self {
        Pulse {
            duration_ns,
            center_mhz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoEfficiency {
    pub order: usize,
    /// Nominal echo time m/spacing (ns).
    pub time_ns: f64,
    /// Location of the intensity maximum inside the echo window (ns,
    /// relative to the input pulse centre).
    pub peak_time_ns: f64,
    /// Echo arrival relative to the transmitted pulse peak: the dispersive
    /// group delay of the tailored window cancels in this difference, which
    /// is what a storage experiment times.
    pub storage_time_ns: f64,
    /// Energy in the echo window over the input energy.
    pub efficiency: f64,
}

/// Time-domain output of a propagation run. Times are relative to the input
/// pulse centre; intensity is normalized so that the summed energy over the
/// trace equals the transmitted fraction of the input energy.
#[derive(Debug, Clone)]
pub struct EchoTrace {
    pub time_ns: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Energy in the transmission window around t = 0.
    pub transmission: f64,
    /// Arrival of the transmitted pulse peak (carries the medium's group
    /// delay).
    pub transmission_peak_ns: f64,
    pub echoes: Vec<EchoEfficiency>,
    pub total_output_energy: f64,
    /// Largest pre-pulse intensity over the pulse peak intensity.
    pub prepulse_ratio: f64,
}

const MIN_FFT_SPAN_MHZ: f64 = 2000.0;
const MAX_ECHO_ORDER: usize = 5;

/// Propagates a weak probe pulse through the spectrum.
///
/// The transfer function combines the Beer-Lambert amplitude exp(-od/2)
/// with the minimum-phase (Kramers-Kronig consistent) phase computed by the
/// cepstral method, so the output is causal. When `comb_spacing_mhz` is
/// given, echo energies are integrated in windows of +-1/(2*spacing) around
/// m/spacing.
pub fn propagate(
    spectrum: &Spectrum,
    pulse: &Pulse,
    comb_spacing_mhz: Option<f64>,
) -> Result<EchoTrace> {
    let grid = spectrum.grid;
    if !(pulse.duration_ns > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pulse duration must be > 0 ns, got {}",
            pulse.duration_ns
        )));
    }
    if !grid.contains(pulse.center_mhz) {
        return Err(Error::OutOfGrid {
            freq: pulse.center_mhz,
            min: grid.min_mhz,
            max: grid.max_mhz(),
        });
    }
    // Pulse spectrum must be well inside the simulated window.
    let sigma_t_us = pulse.duration_ns * 1e-3 / (8.0 * std::f64::consts::LN_2).sqrt();
    let sigma_f_mhz = 1.0 / (2.0 * std::f64::consts::PI * sigma_t_us);
    let span = grid.max_mhz() - grid.min_mhz;
    if 4.0 * sigma_f_mhz > span / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "pulse bandwidth {:.2} MHz too wide for the {:.2} MHz grid span",
            2.0 * sigma_f_mhz,
            span
        )));
    }

    let dv = grid.step_mhz;
    // Pad with the edge optical depth to a wide span for fine time steps.
    let span_target = span.max(MIN_FFT_SPAN_MHZ);
    let n_fft = ((span_target / dv) as usize + 1).next_power_of_two();
    let t_total_us = 1.0 / dv;
    let dt_us = t_total_us / n_fft as f64;

    let f_mid = 0.5 * (grid.min_mhz + grid.max_mhz());
    let od_at = |f_abs: f64| -> f64 {
        if f_abs <= grid.min_mhz {
            spectrum.od[0]
        } else if f_abs >= grid.max_mhz() {
            spectrum.od[grid.len - 1]
        } else {
            let x = grid.coord(f_abs);
            let k = x.floor() as usize;
            let frac = x - k as f64;
            let k1 = (k + 1).min(grid.len - 1);
            (1.0 - frac) * spectrum.od[k] + frac * spectrum.od[k1]
        }
    };

    // Log-magnitude on FFT-ordered frequency bins.
    let mut log_mag = vec![Complex64::new(0.0, 0.0); n_fft];
    for (k, lm) in log_mag.iter_mut().enumerate() {
        let k_signed = if k <= n_fft / 2 {
            k as i64
        } else {
            k as i64 - n_fft as i64
        };
        let f_abs = f_mid + k_signed as f64 * dv;
        *lm = Complex64::new(-0.5 * od_at(f_abs), 0.0);
    }

    // Minimum phase via the cepstral fold: one-sided quefrency content.
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);
    let ifft = planner.plan_fft_inverse(n_fft);

    let mut cep = log_mag.clone();
    ifft.process(&mut cep);
    let scale = 1.0 / n_fft as f64;
    for c in cep.iter_mut() {
        *c *= scale;
    }
    for (n, c) in cep.iter_mut().enumerate() {
        if n == 0 || n == n_fft / 2 {
            // kept once
        } else if n < n_fft / 2 {
            *c *= 2.0;
        } else {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    let mut log_h = cep;
    fft.process(&mut log_h);
    let mut transfer: Vec<Complex64> = log_h.iter().map(|l| l.exp()).collect();

    // Input pulse: Gaussian amplitude with carrier at the pulse detuning,
    // placed an eighth of the window in so causality is observable.
    let t0_us = t_total_us / 8.0;

    // Gate the impulse response to the observable window: sharp combs ring
    // for hundreds of periods and the tail would otherwise wrap circularly
    // into the pre-pulse region.
    {
        let mut impulse = transfer.clone();
        ifft.process(&mut impulse);
        // Leave room for the pulse placement and its tails so the output
        // support ends before the buffer does.
        let keep = n_fft - n_fft / 8 - n_fft / 64;
        for h in impulse.iter_mut().skip(keep) {
            *h = Complex64::new(0.0, 0.0);
        }
        for h in impulse.iter_mut() {
            *h *= scale;
        }
        fft.process(&mut impulse);
        transfer = impulse;
    }
    let f_rel = pulse.center_mhz - f_mid;
    let sigma_i_us = pulse.duration_ns * 1e-3 / (8.0 * std::f64::consts::LN_2).sqrt();
    let mut field: Vec<Complex64> = (0..n_fft)
        .map(|m| {
            let t = m as f64 * dt_us - t0_us;
            let envelope = (-t * t / (4.0 * sigma_i_us * sigma_i_us)).exp();
            let phase = 2.0 * std::f64::consts::PI * f_rel * t;
            Complex64::from_polar(envelope, phase)
        })
        .collect();
    let energy_in: f64 = field.iter().map(|a| a.norm_sqr()).sum::<f64>() * dt_us;
    let norm = 1.0 / energy_in.sqrt();
    for a in field.iter_mut() {
        *a *= norm;
    }

    fft.process(&mut field);
    for (a, h) in field.iter_mut().zip(transfer.iter()) {
        *a *= h;
    }
    ifft.process(&mut field);
    for a in field.iter_mut() {
        *a *= scale;
    }

    let intensity: Vec<f64> = field.iter().map(|a| a.norm_sqr()).collect();
    let total_output_energy: f64 = intensity.iter().sum::<f64>() * dt_us;
    let time_ns: Vec<f64> = (0..n_fft)
        .map(|m| (m as f64 * dt_us - t0_us) * 1e3)
        .collect();

    let peak = intensity.iter().cloned().fold(0.0_f64, f64::max);
    let prepulse_end_ns = -5.0 * pulse.duration_ns;
    let prepulse_max = time_ns
        .iter()
        .zip(intensity.iter())
        .filter(|(t, _)| **t < prepulse_end_ns)
        .map(|(_, i)| *i)
        .fold(0.0_f64, f64::max);
    let prepulse_ratio = if peak > 0.0 { prepulse_max / peak } else { 0.0 };

    let peak_between = |lo_ns: f64, hi_ns: f64| -> f64 {
        time_ns
            .iter()
            .zip(intensity.iter())
            .filter(|(t, _)| **t >= lo_ns && **t < hi_ns)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(t, _)| *t)
            .unwrap_or(0.0)
    };
    let energy_between = |lo_ns: f64, hi_ns: f64| -> f64 {
        time_ns
            .iter()
            .zip(intensity.iter())
            .filter(|(t, _)| **t >= lo_ns && **t < hi_ns)
            .map(|(_, i)| *i)
            .sum::<f64>()
            * dt_us
    };

    let mut transmission = total_output_energy;
    let mut transmission_peak_ns = peak_between(-4.0 * pulse.duration_ns, 4.0 * pulse.duration_ns);
    let mut echoes = Vec::new();
    if let Some(spacing) = comb_spacing_mhz {
        if !(spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "comb spacing must be > 0 MHz, got {spacing}"
            )));
        }
        let period_ns = 1e3 / spacing;
        let trace_end_ns = (t_total_us - t0_us) * 1e3;
        transmission = energy_between(-period_ns / 2.0, period_ns / 2.0);
        transmission_peak_ns = peak_between(-period_ns / 2.0, period_ns / 2.0);
        for order in 1..=MAX_ECHO_ORDER {
            let center = order as f64 * period_ns;
            let (lo, hi) = (center - period_ns / 2.0, center + period_ns / 2.0);
            if hi >= trace_end_ns {
                return Err(Error::EchoAliasing {
                    order,
                    time_ns: center,
                    window_ns: trace_end_ns,
                });
            }
            let eff = energy_between(lo, hi);
            let peak_time = peak_between(lo, hi);
            echoes.push(EchoEfficiency {
                order,
                time_ns: center,
                peak_time_ns: peak_time,
                storage_time_ns: peak_time - transmission_peak_ns,
                efficiency: eff,
            });
        }
    }

    Ok(EchoTrace {
        time_ns,
        intensity,
        transmission,
        transmission_peak_ns,
        echoes,
        total_output_energy,
        prepulse_ratio,
    })
}

/// Measured shape of a tailored comb around its strongest tooth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombMetrics {
    pub finesse: f64,
    pub background_od: f64,
    pub tooth_od: f64,
    pub tooth_fwhm_mhz: f64,
}

/// Measures finesse and background from a spectrum: locates the absorption
/// maximum within one period of `center`, the adjacent minima, and the full
/// width at half depth.
pub fn comb_metrics(spec: &Spectrum, center_mhz: f64, spacing_mhz: f64) -> Result<CombMetrics> {
    let grid = spec.grid;
    if !(spacing_mhz > 0.0) {
        return Err(Error::InvalidParameter("spacing must be > 0".into()));
    }
    let lo = grid.index_of((center_mhz - spacing_mhz).max(grid.min_mhz))?;
    let hi = grid.index_of((center_mhz + spacing_mhz).min(grid.max_mhz()))?;
    let tooth_idx = (lo..=hi)
        .max_by(|&a, &b| spec.od[a].partial_cmp(&spec.od[b]).unwrap())
        .unwrap();
    let tooth_od = spec.od[tooth_idx];
    let half_span = (spacing_mhz / 2.0 / grid.step_mhz).round() as usize;
    let min_lo = tooth_idx.saturating_sub(half_span);
    let min_hi = (tooth_idx + half_span).min(grid.len - 1);
    let background_od = (min_lo..=min_hi)
        .map(|j| spec.od[j])
        .fold(f64::INFINITY, f64::min);
    let level = background_od + 0.5 * (tooth_od - background_od);

    // Half-depth crossings by linear interpolation outward from the peak.
    let mut left = tooth_idx as f64;
    for j in (min_lo..tooth_idx).rev() {
        if spec.od[j] < level {
            let frac = (level - spec.od[j]) / (spec.od[j + 1] - spec.od[j]);
            left = j as f64 + frac;
            break;
        }
        left = j as f64;
    }
    let mut right = tooth_idx as f64;
    for j in tooth_idx + 1..=min_hi {
        if spec.od[j] < level {
            let frac = (level - spec.od[j]) / (spec.od[j - 1] - spec.od[j]);
            right = j as f64 - frac;
            break;
        }
        right = j as f64;
    }
    let tooth_fwhm_mhz = ((right - left) * grid.step_mhz).max(grid.step_mhz);
    Ok(CombMetrics {
        finesse: spacing_mhz / tooth_fwhm_mhz,
        background_od,
        tooth_od,
        tooth_fwhm_mhz,
    })
}

/// Photon-counting outcome of a storage run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountStats {
    pub events: u64,
    pub mean_photon: f64,
    pub window_ns: f64,
    pub signal_counts: u64,
    pub noise_counts: u64,
    pub snr: f64,
}

/// Poisson-samples the total signal and noise counts over `events` storage
/// trials. Deterministic for a given seed.
pub fn count_statistics(
    eta: f64,
    mean_photon: f64,
    events: u64,
    noise_per_window: f64,
    window_ns: f64,
    seed: u64,
) -> Result<CountStats> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "efficiency must lie in [0, 1], got {eta}"
        )));
    }
    if events < 1 {
        return Err(Error::InvalidParameter("events must be >= 1".into()));
    }
    if !(mean_photon >= 0.0) || !(noise_per_window >= 0.0) {
        return Err(Error::InvalidParameter(
            "photon numbers and noise must be >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |mean: f64| -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        let poisson = Poisson::new(mean).expect("positive mean");
        poisson.sample(&mut rng) as u64
    };
    let signal_counts = draw(eta * mean_photon * events as f64);
    let noise_counts = draw(noise_per_window * events as f64);
    let snr = if noise_counts == 0 {
        f64::INFINITY
    } else {
        signal_counts as f64 / noise_counts as f64
    };
    Ok(CountStats {
        events,
        mean_photon,
        window_ns,
        signal_counts,
        noise_counts,
        snr,
    })
}
