//! Commensurate intrinsic pumping: how well the hole/anti-hole pattern of a
//! given field lines up with an AFC of spacing delta, mismatch maps over
//! field and storage time, and field search for a requested spacing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{zeeman_splittings, FieldConfig, IonClass};

/// Distance of `x` to the nearest integer, in [0, 0.5].
fn dist_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Distance of `x` to the nearest half-integer (n + 1/2), in [0, 0.5].
fn dist_to_half_integer(x: f64) -> f64 {
    dist_to_integer(x - 0.5)
}

/// The four commensurability quotients and their distances to the admissible
/// values: the holes (0, +-de) must land on comb positions and the
/// anti-holes (+-dg, +-(dg-de), +-(dg+de)) midway between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommensurateResidues {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub n4: f64,
    pub dist1: f64,
    pub dist2: f64,
    pub dist3: f64,
    pub dist4: f64,
}

impl CommensurateResidues {
    pub fn distances(&self) -> [f64; 4] {
        [self.dist1, self.dist2, self.dist3, self.dist4]
    }
}

pub fn residues(b_gauss: f64, spacing_mhz: f64, ion: &IonClass) -> Result<CommensurateResidues> {
    if !(b_gauss > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "field must be > 0 G, got {b_gauss}"
        )));
    }
    if !(spacing_mhz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spacing must be > 0 MHz, got {spacing_mhz}"
        )));
    }
    let (de, dg) = zeeman_splittings(ion, &FieldConfig { b_gauss });
    let n1 = de / spacing_mhz;
    let n2 = dg / spacing_mhz;
    let n3 = (dg - de).abs() / spacing_mhz;
    let n4 = (dg + de) / spacing_mhz;
    Ok(CommensurateResidues {
        n1,
        n2,
        n3,
        n4,
        dist1: dist_to_integer(n1),
        dist2: dist_to_half_integer(n2),
        dist3: dist_to_half_integer(n3),
        dist4: dist_to_half_integer(n4),
    })
}

/// Degree of mismatch in [0, 1]: the summed distances over their maximum.
/// Zero is perfect commensurability.
pub fn mismatch(b_gauss: f64, spacing_mhz: f64, ion: &IonClass) -> Result<f64> {
    let r = residues(b_gauss, spacing_mhz, ion)?;
    Ok(r.distances().iter().sum::<f64>() / 2.0)
}

/// Dense mismatch map over magnetic field and storage time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchMap {
    pub b_axis_gauss: Vec<f64>,
    pub storage_axis_ns: Vec<f64>,
    /// Row-major: values[i_b * storage_axis.len() + i_t].
    pub values: Vec<f64>,
}

impl MismatchMap {
    pub fn value(&self, i_b: usize, i_t: usize) -> f64 {
        self.values[i_b * self.storage_axis_ns.len() + i_t]
    }

    /// CSV emission: b_gauss, storage_ns, spacing_mhz, mismatch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("b_gauss,storage_ns,spacing_mhz,mismatch\n");
        for (i, &b) in self.b_axis_gauss.iter().enumerate() {
            for (j, &t) in self.storage_axis_ns.iter().enumerate() {
                out.push_str(&format!("{},{},{},{}\n", b, t, 1e3 / t, self.value(i, j)));
            }
        }
        out
    }
}

fn axis(min: f64, max: f64, step: f64, what: &str) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) || !(min > 0.0) {
        return Err(Error::EmptyRange(format!(
            "{what} range [{min}, {max}] @ {step}"
        )));
    }
    let n = ((max - min) / step).round() as usize + 1;
    Ok((0..n).map(|k| min + step * k as f64).collect())
}

/// Evaluates the mismatch over a (field, storage-time) grid. Storage time in
/// ns maps to spacing as delta = 1000/t.
pub fn mismatch_map(
    b_range_gauss: (f64, f64, f64),
    storage_range_ns: (f64, f64, f64),
    ion: &IonClass,
) -> Result<MismatchMap> {
    let b_axis = axis(b_range_gauss.0, b_range_gauss.1, b_range_gauss.2, "field")?;
    let t_axis = axis(
        storage_range_ns.0,
        storage_range_ns.1,
        storage_range_ns.2,
        "storage time",
    )?;
    let n_t = t_axis.len();
    let mut values = vec![0.0; b_axis.len() * n_t];
    values
        .par_chunks_mut(n_t)
        .zip(b_axis.par_iter())
        .for_each(|(row, &b)| {
            for (j, &t) in t_axis.iter().enumerate() {
                let spacing = 1e3 / t;
                row[j] = mismatch(b, spacing, ion).expect("positive inputs");
            }
        });
    Ok(MismatchMap {
        b_axis_gauss: b_axis,
        storage_axis_ns: t_axis,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldCandidate {
    pub b_gauss: f64,
    pub mismatch: f64,
}

/// Grid scan over the field range followed by golden-section refinement of
/// each local minimum; returns the best `top_k` candidates.
pub fn search_field(
    spacing_mhz: f64,
    b_range_gauss: (f64, f64),
    step_gauss: f64,
    ion: &IonClass,
    top_k: usize,
) -> Result<Vec<FieldCandidate>> {
    let (b_min, b_max) = b_range_gauss;
    let bs = axis(b_min, b_max, step_gauss, "field")?;
    let f = |b: f64| mismatch(b, spacing_mhz, ion).expect("positive inputs");
    let vals: Vec<f64> = bs.iter().map(|&b| f(b)).collect();

    let mut candidates = Vec::new();
    for i in 0..bs.len() {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
        let right = if i + 1 == bs.len() {
            f64::INFINITY
        } else {
            vals[i + 1]
        };
        if vals[i] <= left && vals[i] <= right {
            let lo = if i == 0 { bs[i] } else { bs[i - 1] };
            let hi = if i + 1 == bs.len() { bs[i] } else { bs[i + 1] };
            let (b, m) = golden_section(f, lo, hi, 0.01);
            // Refinement never worsens the grid value.
            if m <= vals[i] + 1e-12 {
                candidates.push(FieldCandidate {
                    b_gauss: b,
                    mismatch: m,
                });
            } else {
                candidates.push(FieldCandidate {
                    b_gauss: bs[i],
                    mismatch: vals[i],
                });
            }
        }
    }
    candidates.sort_by(|a, b| a.mismatch.partial_cmp(&b.mismatch).unwrap());
    candidates.dedup_by(|a, b| (a.b_gauss - b.b_gauss).abs() < step_gauss / 2.0);
    candidates.truncate(top_k);
    Ok(candidates)
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// Comb spacing recommended by the intrinsic pumping condition
/// dg - de = spacing/2.
pub fn intrinsic_delta(b_gauss: f64, ion: &IonClass) -> Result<f64> {
    if !(b_gauss > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "field must be > 0 G, got {b_gauss}"
        )));
    }
    let (de, dg) = zeeman_splittings(ion, &FieldConfig { b_gauss });
    if dg <= de {
        return Err(Error::InvalidParameter(format!(
            "ground splitting {dg} MHz must exceed excited splitting {de} MHz"
        )));
    }
    Ok(2.0 * (dg - de))
}

/// Warns when the hole linewidth is too coarse to resolve the comb troughs.
pub fn linewidth_feasible(spacing_mhz: f64, ion: &IonClass) -> bool {
    spacing_mhz / 2.0 >= 2.0 * ion.hole_fwhm_mhz
}
