//! Material constants of the ion ensemble, Zeeman splittings and the
//! hole/anti-hole pattern produced by burning at a single frequency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{Grid, Spectrum};

/// Static constants of one ion class in the host crystal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IonClass {
    /// Excited-doublet splitting rate (MHz/G).
    pub mu_e_mhz_per_g: f64,
    /// Ground-doublet splitting rate (MHz/G).
    pub mu_g_mhz_per_g: f64,
    /// Branching ratio into the bottleneck (shelving) decay path.
    pub branching_ratio: f64,
    /// Intermediate-level lifetime (ms).
    pub t_bottleneck_ms: f64,
    /// Ground-state (shelving) lifetime (ms).
    pub t_ground_ms: f64,
    /// Optical coherence time (us).
    pub t2_opt_us: f64,
    /// Spectral-hole linewidth, FWHM (MHz).
    pub hole_fwhm_mhz: f64,
    /// Spin-crossed vs spin-conserved transition-strength ratio.
    pub rel_crossed: f64,
}

impl Default for IonClass {
    fn default() -> Self {
        Self::tm_yag()
    }
}

impl IonClass {
    /// Tm3+:YAG constants at 3.5 K.
    pub fn tm_yag() -> Self {
        IonClass {
            mu_e_mhz_per_g: 0.006,
            mu_g_mhz_per_g: 0.0285,
            branching_ratio: 0.25,
            t_bottleneck_ms: 10.0,
            t_ground_ms: 170.0,
            t2_opt_us: 38.0,
            hole_fwhm_mhz: 0.5,
            rel_crossed: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu_e_mhz_per_g", self.mu_e_mhz_per_g),
            ("mu_g_mhz_per_g", self.mu_g_mhz_per_g),
            ("t_bottleneck_ms", self.t_bottleneck_ms),
            ("t_ground_ms", self.t_ground_ms),
            ("t2_opt_us", self.t2_opt_us),
            ("hole_fwhm_mhz", self.hole_fwhm_mhz),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "IonClass.{name} must be > 0, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.branching_ratio) {
            return Err(Error::InvalidParameter(format!(
                "IonClass.branching_ratio must lie in [0, 1], got {}",
                self.branching_ratio
            )));
        }
        if !(self.rel_crossed > 0.0 && self.rel_crossed < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "IonClass.rel_crossed must lie in (0, 1), got {}",
                self.rel_crossed
            )));
        }
        Ok(())
    }
}

/// Applied magnetic field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub b_gauss: f64,
}

impl FieldConfig {
    pub fn new(b_gauss: f64) -> Result<Self> {
        if !(b_gauss >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "magnetic field must be >= 0 G, got {b_gauss}"
            )));
        }
        Ok(FieldConfig { b_gauss })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.b_gauss).map(|_| ())
    }
}

/// Zeeman splittings of the excited and ground doublets, MHz.
pub fn zeeman_splittings(ion: &IonClass, field: &FieldConfig) -> (f64, f64) {
    (
        ion.mu_e_mhz_per_g * field.b_gauss,
        ion.mu_g_mhz_per_g * field.b_gauss,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Hole,
    AntiHole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFeature {
    pub offset_mhz: f64,
    pub kind: FeatureKind,
    pub weight: f64,
}

/// Pattern of holes and anti-holes produced by burning one frequency, plus
/// the splittings that generated it (needed by the pumping dynamics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolePattern {
    pub delta_e_mhz: f64,
    pub delta_g_mhz: f64,
    /// Spin-crossed transition-strength ratio used for the weights.
    pub rel_crossed: f64,
    pub features: Vec<SpectralFeature>,
}

impl HolePattern {
    pub fn holes(&self) -> impl Iterator<Item = &SpectralFeature> {
        self.features
            .iter()
            .filter(|f| f.kind == FeatureKind::Hole)
    }

    pub fn anti_holes(&self) -> impl Iterator<Item = &SpectralFeature> {
        self.features
            .iter()
            .filter(|f| f.kind == FeatureKind::AntiHole)
    }
}

const MERGE_EPS_MHZ: f64 = 1e-9;

/// Hole/anti-hole pattern for a doublet-doublet ion.
///
/// Holes sit at {0, ±de}; anti-holes at {±(dg-de), ±dg, ±(dg+de)} with
/// weights {1, r, r^2} per the conserved/crossed dipole-strength products.
/// Coinciding same-kind features merge by summing weights; an anti-hole
/// landing on a hole offset is re-pumped and therefore dropped.
pub fn hole_pattern(delta_e_mhz: f64, delta_g_mhz: f64, ion: &IonClass) -> Result<HolePattern> {
    if !(delta_e_mhz >= 0.0) || !(delta_g_mhz >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "splittings must be >= 0 MHz, got ({delta_e_mhz}, {delta_g_mhz})"
        )));
    }
    let r = ion.rel_crossed;
    let de = delta_e_mhz;
    let dg = delta_g_mhz;

    let mut raw: Vec<SpectralFeature> = Vec::with_capacity(9);
    let mut push = |offset: f64, kind: FeatureKind, weight: f64| {
        raw.push(SpectralFeature {
            offset_mhz: offset,
            kind,
            weight,
        });
    };
    // Central hole carries both conserved^2 and crossed^2 pump paths.
    push(0.0, FeatureKind::Hole, 1.0 + r * r);
    for s in [-1.0, 1.0] {
        push(s * de, FeatureKind::Hole, r);
        push(s * (dg - de).abs(), FeatureKind::AntiHole, 1.0);
        push(s * dg, FeatureKind::AntiHole, r);
        push(s * (dg + de), FeatureKind::AntiHole, r * r);
    }

    // Merge same-kind features at equal offsets; holes absorb coinciding
    // anti-holes (population shelved onto a pumped frequency is re-pumped).
    let mut holes: Vec<SpectralFeature> = Vec::new();
    let mut antis: Vec<SpectralFeature> = Vec::new();
    for f in raw {
        let bucket = match f.kind {
            FeatureKind::Hole => &mut holes,
            FeatureKind::AntiHole => &mut antis,
        };
        match bucket
            .iter_mut()
            .find(|g| (g.offset_mhz - f.offset_mhz).abs() <= MERGE_EPS_MHZ)
        {
            Some(g) => g.weight += f.weight,
            None => bucket.push(f),
        }
    }
    antis.retain(|a| {
        !holes
            .iter()
            .any(|h| (h.offset_mhz - a.offset_mhz).abs() <= MERGE_EPS_MHZ)
    });

    let mut features = holes;
    features.append(&mut antis);
    features.sort_by(|a, b| a.offset_mhz.partial_cmp(&b.offset_mhz).unwrap());

    Ok(HolePattern {
        delta_e_mhz: de,
        delta_g_mhz: dg,
        rel_crossed: r,
        features,
    })
}

/// Hole-only pattern of the second ion class (excited splitting only, no
/// observable anti-holes). Off by default; rendered additively on request.
pub fn second_class_pattern(delta_e_mhz: f64, ion: &IonClass) -> Result<HolePattern> {
    if !(delta_e_mhz >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "splitting must be >= 0 MHz, got {delta_e_mhz}"
        )));
    }
    let r = ion.rel_crossed;
    let mut features = vec![SpectralFeature {
        offset_mhz: 0.0,
        kind: FeatureKind::Hole,
        weight: 1.0 + r * r,
    }];
    if delta_e_mhz > MERGE_EPS_MHZ {
        for s in [-1.0, 1.0] {
            features.push(SpectralFeature {
                offset_mhz: s * delta_e_mhz,
                kind: FeatureKind::Hole,
                weight: r,
            });
        }
    } else {
        features[0].weight += 2.0 * r;
    }
    features.sort_by(|a, b| a.offset_mhz.partial_cmp(&b.offset_mhz).unwrap());
    Ok(HolePattern {
        delta_e_mhz,
        delta_g_mhz: 0.0,
        rel_crossed: r,
        features,
    })
}

/// Optical-depth profile over the simulated window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    /// Flat profile; the simulated windows are far narrower than the
    /// inhomogeneous line.
    #[default]
    Flat,
    /// Gaussian inhomogeneous profile centred on the grid.
    Gaussian { fwhm_mhz: f64 },
}

/// Baseline spectrum before any tailoring. Effective OD is per-pass depth
/// times the number of passes through the crystal.
pub fn baseline_spectrum(
    peak_od: f64,
    passes: u32,
    grid: Grid,
    profile: Profile,
    ion: &IonClass,
) -> Result<Spectrum> {
    if !(peak_od > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "peak_od must be > 0, got {peak_od}"
        )));
    }
    if passes < 1 {
        return Err(Error::InvalidParameter("passes must be >= 1".into()));
    }
    let max_step = ion.hole_fwhm_mhz / 4.0;
    if grid.step_mhz > max_step {
        return Err(Error::UnderResolvedGrid {
            step: grid.step_mhz,
            fwhm: ion.hole_fwhm_mhz,
            max: max_step,
        });
    }
    let effective = peak_od * passes as f64;
    let od: Vec<f64> = match profile {
        Profile::Flat => vec![effective; grid.len],
        Profile::Gaussian { fwhm_mhz } => {
            if !(fwhm_mhz > 0.0) {
                return Err(Error::InvalidParameter(
                    "inhomogeneous fwhm must be > 0".into(),
                ));
            }
            let center = 0.5 * (grid.min_mhz + grid.max_mhz());
            let sigma = fwhm_mhz / (8.0 * std::f64::consts::LN_2).sqrt();
            grid.axis()
                .map(|f| effective * (-0.5 * ((f - center) / sigma).powi(2)).exp())
                .collect()
        }
    };
    Ok(Spectrum::from_profile(grid, od))
}

/// Renders a hole pattern onto a baseline spectrum for display: each feature
/// is a Gaussian of FWHM `hole_fwhm` scaled by `burn_depth` in [0, 1].
pub fn render_pattern(
    baseline: &Spectrum,
    pattern: &HolePattern,
    burn_depth: f64,
    ion: &IonClass,
) -> Spectrum {
    let max_w = pattern
        .features
        .iter()
        .map(|f| f.weight)
        .fold(0.0_f64, f64::max)
        .max(1e-12);
    let sigma = ion.hole_fwhm_mhz / (8.0 * std::f64::consts::LN_2).sqrt();
    let mut out = baseline.clone();
    for (i, f) in out.grid.axis().enumerate() {
        let mut delta = 0.0;
        for feat in &pattern.features {
            let shape = (-0.5 * ((f - feat.offset_mhz) / sigma).powi(2)).exp();
            let signed = match feat.kind {
                FeatureKind::Hole => -1.0,
                FeatureKind::AntiHole => 1.0,
            };
            delta += signed * burn_depth * feat.weight / max_w * shape;
        }
        out.od[i] = (baseline.od[i] * (1.0 + delta)).max(0.0);
    }
    out
}
