//! Uniform detuning grid and the absorption/population spectrum carried
//! between the tailoring, propagation and readout stages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform detuning axis in MHz, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min_mhz: f64,
    pub step_mhz: f64,
    pub len: usize,
}

impl Grid {
    /// Builds a grid spanning `[min, max]` with the given step. The upper end
    /// is kept within one step of `max`.
    pub fn from_span(min_mhz: f64, max_mhz: f64, step_mhz: f64) -> Result<Self> {
        if !(step_mhz > 0.0) || !min_mhz.is_finite() || !max_mhz.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid span [{min_mhz}, {max_mhz}] @ {step_mhz} MHz"
            )));
        }
        if max_mhz <= min_mhz {
            return Err(Error::EmptyRange(format!(
                "grid span [{min_mhz}, {max_mhz}] MHz"
            )));
        }
        let len = ((max_mhz - min_mhz) / step_mhz).round() as usize + 1;
        Ok(Grid {
            min_mhz,
            step_mhz,
            len,
        })
    }

    /// Symmetric grid `[-half_span, +half_span]`.
    pub fn symmetric(half_span_mhz: f64, step_mhz: f64) -> Result<Self> {
        Self::from_span(-half_span_mhz, half_span_mhz, step_mhz)
    }

    pub fn max_mhz(&self) -> f64 {
        self.min_mhz + self.step_mhz * (self.len - 1) as f64
    }

    pub fn freq(&self, idx: usize) -> f64 {
        self.min_mhz + self.step_mhz * idx as f64
    }

    pub fn contains(&self, freq_mhz: f64) -> bool {
        freq_mhz >= self.min_mhz - 1e-9 && freq_mhz <= self.max_mhz() + 1e-9
    }

    /// Nearest channel index for a frequency inside the grid.
    pub fn index_of(&self, freq_mhz: f64) -> Result<usize> {
        if !self.contains(freq_mhz) {
            return Err(Error::OutOfGrid {
                freq: freq_mhz,
                min: self.min_mhz,
                max: self.max_mhz(),
            });
        }
        let idx = ((freq_mhz - self.min_mhz) / self.step_mhz).round() as usize;
        Ok(idx.min(self.len - 1))
    }

    /// Fractional channel coordinate (may fall outside `[0, len-1]`).
    pub fn coord(&self, freq_mhz: f64) -> f64 {
        (freq_mhz - self.min_mhz) / self.step_mhz
    }

    pub fn axis(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.freq(i))
    }
}

/// Absorption spectrum with the per-channel ion-packet populations.
///
/// A channel indexes the packet of ions whose spin-conserved ground
/// transition sits at that detuning. `pop_g1` is the directly addressed
/// ground state, `pop_g2` the shelving state and `pop_exc` the combined
/// excited/bottleneck occupancy; they sum to one per channel because each
/// packet is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: Grid,
    /// Optical depth per channel as seen by a probe.
    pub od: Vec<f64>,
    /// Optical depth per unit addressable population (the pre-tailoring
    /// profile), used to rescale `od` from the populations.
    pub unit_od: Vec<f64>,
    pub pop_g1: Vec<f64>,
    pub pop_g2: Vec<f64>,
    pub pop_exc: Vec<f64>,
}

impl Spectrum {
    /// Flat spectrum of the given optical depth with equal ground-state
    /// occupancy and an empty excited state.
    pub fn flat(grid: Grid, od: f64) -> Self {
        let n = grid.len;
        Spectrum {
            grid,
            od: vec![od; n],
            unit_od: vec![od; n],
            pop_g1: vec![0.5; n],
            pop_g2: vec![0.5; n],
            pop_exc: vec![0.0; n],
        }
    }

    /// Spectrum with a prescribed optical-depth profile; populations are set
    /// to the unpumped equilibrium.
    pub fn from_profile(grid: Grid, od: Vec<f64>) -> Self {
        let n = grid.len;
        assert_eq!(od.len(), n);
        Spectrum {
            grid,
            unit_od: od.clone(),
            od,
            pop_g1: vec![0.5; n],
            pop_g2: vec![0.5; n],
            pop_exc: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len
    }

    pub fn is_empty(&self) -> bool {
        self.grid.len == 0
    }

    /// Total population summed over the grid.
    pub fn total_population(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.len() {
            total += self.pop_g1[i] + self.pop_g2[i] + self.pop_exc[i];
        }
        total
    }

    pub fn total_excited(&self) -> f64 {
        self.pop_exc.iter().sum()
    }

    /// Writes the spectrum as CSV: detuning_mhz, od, pop_g1, pop_g2, pop_exc.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("detuning_mhz,od,pop_g1,pop_g2,pop_exc\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.grid.freq(i),
                self.od[i],
                self.pop_g1[i],
                self.pop_g2[i],
                self.pop_exc[i]
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_span_round_trip() {
        let g = Grid::from_span(-50.0, 50.0, 0.05).unwrap();
        assert_eq!(g.len, 2001);
        assert_eq!(g.freq(0), -50.0);
        assert!((g.max_mhz() - 50.0).abs() < 1e-12);
        assert_eq!(g.index_of(0.0).unwrap(), 1000);
    }

    #[test]
    fn grid_rejects_bad_spans() {
        assert!(Grid::from_span(1.0, -1.0, 0.1).is_err());
        assert!(Grid::from_span(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn out_of_grid_lookup_errors() {
        let g = Grid::symmetric(10.0, 0.1).unwrap();
        assert!(g.index_of(10.05).is_err());
        assert!(g.index_of(-11.0).is_err());
    }

    #[test]
    fn flat_spectrum_is_normalized() {
        let g = Grid::symmetric(5.0, 0.1).unwrap();
        let s = Spectrum::flat(g, 1.0);
        for i in 0..s.len() {
            assert_eq!(s.pop_g1[i] + s.pop_g2[i] + s.pop_exc[i], 1.0);
            assert_eq!(s.od[i], 1.0);
        }
    }
}
