//! Strict plain-text experiment configuration.
//!
//! The on-disk format is TOML: a handful of top-level keys plus the
//! `[potential]`, `[function]`, and `[grid]` sections. Unknown keys are
//! rejected (the parser reports line and column), a random potential
//! without a seed is refused, and a parsed config re-serializes to an
//! equivalent document, so artifacts can embed the exact configuration
//! that produced them.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use propspeed_core::lattice::{LatticeBox, Potential};
use propspeed_core::smoothfn::SmoothFunction;

use crate::render::parse_exact_decimal;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Propagation,
    KernelDecay,
    SpectralLocality,
    CosineBounds,
    GevreyCoefficients,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Propagation => "propagation",
            Kind::KernelDecay => "kernel-decay",
            Kind::SpectralLocality => "spectral-locality",
            Kind::CosineBounds => "cosine-bounds",
            Kind::GevreyCoefficients => "gevrey-coefficients",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Float,
    Exact,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Float => "float",
            Mode::Exact => "exact",
        }
    }
}

/// One experiment instance. Defaults when a key is omitted:
/// `dimension = 1`, `half-width` chosen per experiment, `mode` per
/// experiment (`exact` for propagation and the coefficient table, `float`
/// elsewhere), `potential` identically zero, grids as documented by each
/// subcommand, output files `<kind>.csv` / `<kind>.json` under `--out`.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Required whenever the potential is random; it determines the
    /// potential completely.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Spectral-locality only: amount added to the base potential on every
    /// site at l1 distance >= R from the origin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
}

/// Numeric potential values are written as plain decimal strings
/// (`"-0.25"`), which both the float and the exact pipeline read exactly
/// as printed; exact arithmetic then stays in terminating decimals all
/// the way to the artifacts.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PotentialSection {
    /// `constant` | `sites` | `uniform`.
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// Background value for `sites` (default `0`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<SiteEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_lo: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_hi: Option<String>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteEntry {
    pub site: Vec<i64>,
    pub value: String,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FunctionSection {
    /// `gaussian` | `bump` | `gevrey-bump` | `polynomial` |
    /// `cosine-window` | `exponential`.
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Flatness exponent of the `gevrey-bump` family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// Spectral-locality only: center of the window on the spectral axis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    /// Kernel-decay only: smoothness index of the descriptive decay fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GridSection {
    /// Support separations / tail radii.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<u64>>,
    /// Window widths (spectral-locality).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    /// Derivative orders (cosine-bounds).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<u32>>,
    /// Times (cosine-bounds).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    /// Top order of the coefficient table (gevrey-coefficients).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| anyhow!("config parse error: {e}"))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if let Some(p) = &self.potential {
            p.validate(self.seed)?;
        }
        if let Some(f) = &self.function {
            f.validate()?;
        }
        if let Some(d) = self.dimension {
            if d == 0 {
                bail!("dimension must be at least 1");
            }
        }
        Ok(())
    }

    /// The potential section, defaulting to the zero potential.
    pub fn potential_section(&self) -> PotentialSection {
        self.potential.clone().unwrap_or(PotentialSection {
            kind: "constant".into(),
            value: Some("0".into()),
            background: None,
            sites: None,
            v_lo: None,
            v_hi: None,
        })
    }

    pub fn function_section(&self) -> Result<&FunctionSection> {
        self.function.as_ref().ok_or_else(|| {
            anyhow!("the {} experiment needs a [function] section", self.kind.name())
        })
    }
}

impl PotentialSection {
    fn validate(&self, seed: Option<u64>) -> Result<()> {
        let used: Vec<&str> = [
            ("value", self.value.is_some()),
            ("background", self.background.is_some()),
            ("sites", self.sites.is_some()),
            ("v-lo", self.v_lo.is_some()),
            ("v-hi", self.v_hi.is_some()),
        ]
        .into_iter()
        .filter_map(|(k, set)| set.then_some(k))
        .collect();
        let allowed: &[&str] = match self.kind.as_str() {
            "constant" => &["value"],
            "sites" => &["sites", "background"],
            "uniform" => &["v-lo", "v-hi"],
            other => bail!("unknown potential type `{other}` (expected constant, sites, uniform)"),
        };
        for key in &used {
            if !allowed.contains(key) {
                bail!("potential key `{key}` is not used by type `{}`", self.kind);
            }
        }
        match self.kind.as_str() {
            "constant" => {
                let v = self.value.as_deref().unwrap_or("0");
                parse_exact_decimal(v).context("potential value")?;
            }
            "sites" => {
                let sites = self
                    .sites
                    .as_ref()
                    .ok_or_else(|| anyhow!("potential type `sites` needs a `sites` list"))?;
                for entry in sites {
                    parse_exact_decimal(&entry.value)
                        .with_context(|| format!("potential value at site {:?}", entry.site))?;
                }
                if let Some(bg) = &self.background {
                    parse_exact_decimal(bg).context("potential background")?;
                }
            }
            "uniform" => {
                let (lo, hi) = self.uniform_range()?;
                if lo >= hi {
                    bail!("uniform potential needs v-lo < v-hi");
                }
                if seed.is_none() {
                    bail!("a uniform random potential needs a top-level `seed` (reproducibility is enforced)");
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    fn uniform_range(&self) -> Result<(BigRational, BigRational)> {
        let lo = self
            .v_lo
            .as_deref()
            .ok_or_else(|| anyhow!("uniform potential needs `v-lo`"))?;
        let hi = self
            .v_hi
            .as_deref()
            .ok_or_else(|| anyhow!("uniform potential needs `v-hi`"))?;
        Ok((
            parse_exact_decimal(lo).context("v-lo")?,
            parse_exact_decimal(hi).context("v-hi")?,
        ))
    }

    /// Builds the exact potential. Uniform draws take one value per site
    /// in lattice index order: `v_lo + k (v_hi - v_lo)/256` with `k`
    /// uniform on `0..=256`, so exact and float runs sample the same grid.
    pub fn build_exact(&self, lattice: LatticeBox, seed: Option<u64>) -> Result<Potential<BigRational>> {
        match self.kind.as_str() {
            "constant" => {
                let v = parse_exact_decimal(self.value.as_deref().unwrap_or("0"))?;
                Ok(Potential::constant(lattice, v)?)
            }
            "sites" => {
                let bg = parse_exact_decimal(self.background.as_deref().unwrap_or("0"))?;
                let mut pot = Potential::constant(lattice, bg)?;
                for entry in self.sites.as_ref().expect("validated") {
                    pot = pot.with_site_value(&entry.site, parse_exact_decimal(&entry.value)?)?;
                }
                Ok(pot)
            }
            "uniform" => {
                let (lo, hi) = self.uniform_range()?;
                let span = hi - &lo;
                let mut rng = seeded(seed)?;
                let values: Vec<BigRational> = (0..lattice.site_count())
                    .map(|_| {
                        let k = rng.random_range(0..=256u32);
                        &lo + &span * BigRational::new(k.into(), 256.into())
                    })
                    .collect();
                Ok(Potential::from_values(lattice, values)?)
            }
            _ => unreachable!("validated"),
        }
    }

    pub fn build_float(&self, lattice: LatticeBox, seed: Option<u64>) -> Result<Potential<f64>> {
        if self.kind == "uniform" {
            let (lo, hi) = self.uniform_range()?;
            let (lo, hi) = (to_f64(&lo)?, to_f64(&hi)?);
            let mut rng = seeded(seed)?;
            let values: Vec<f64> = (0..lattice.site_count())
                .map(|_| {
                    let k = rng.random_range(0..=256u32);
                    lo + (hi - lo) * f64::from(k) / 256.0
                })
                .collect();
            return Ok(Potential::from_values(lattice, values)?);
        }
        Ok(self.build_exact(lattice, seed)?.to_float())
    }
}

fn seeded(seed: Option<u64>) -> Result<ChaCha8Rng> {
    let seed = seed.ok_or_else(|| {
        anyhow!("a uniform random potential needs a top-level `seed` (reproducibility is enforced)")
    })?;
    Ok(ChaCha8Rng::seed_from_u64(seed))
}

fn to_f64(r: &BigRational) -> Result<f64> {
    r.to_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| anyhow!("value {r} does not fit in a float"))
}

impl FunctionSection {
    fn validate(&self) -> Result<()> {
        let used: Vec<&str> = [
            ("center", self.center.is_some()),
            ("width", self.width.is_some()),
            ("shape", self.shape.is_some()),
            ("coeffs", self.coeffs.is_some()),
            ("frequency", self.frequency.is_some()),
            ("rate", self.rate.is_some()),
        ]
        .into_iter()
        .filter_map(|(k, set)| set.then_some(k))
        .collect();
        let allowed: &[&str] = match self.family.as_str() {
            "gaussian" | "bump" => &["center", "width"],
            "gevrey-bump" => &["shape", "center", "width"],
            "polynomial" => &["coeffs"],
            "cosine-window" => &["frequency", "center"],
            "exponential" => &["rate"],
            other => bail!(
                "unknown function family `{other}` (expected gaussian, bump, gevrey-bump, polynomial, cosine-window, exponential)"
            ),
        };
        for key in &used {
            if !allowed.contains(key) {
                bail!("function key `{key}` is not used by family `{}`", self.family);
            }
        }
        self.build().map(drop)
    }

    pub fn build(&self) -> Result<SmoothFunction> {
        let center = self.center.unwrap_or(0.0);
        let width = self.width.unwrap_or(1.0);
        let f = match self.family.as_str() {
            "gaussian" => SmoothFunction::gaussian(center, width)?,
            "bump" => {
                if self.center.is_none() && self.width.is_none() {
                    SmoothFunction::bump()
                } else {
                    SmoothFunction::bump_scaled(center, width)?
                }
            }
            "gevrey-bump" => {
                let b = self
                    .shape
                    .ok_or_else(|| anyhow!("family `gevrey-bump` needs a `shape` exponent"))?;
                if self.center.is_none() && self.width.is_none() {
                    SmoothFunction::gevrey_bump(b)?
                } else {
                    SmoothFunction::gevrey_bump_scaled(b, center, width)?
                }
            }
            "polynomial" => {
                let coeffs = self
                    .coeffs
                    .as_ref()
                    .ok_or_else(|| anyhow!("family `polynomial` needs `coeffs`"))?;
                SmoothFunction::polynomial(coeffs)?
            }
            "cosine-window" => {
                let freq = self
                    .frequency
                    .ok_or_else(|| anyhow!("family `cosine-window` needs `frequency`"))?;
                SmoothFunction::cosine_window(freq, center)?
            }
            "exponential" => {
                let rate = self
                    .rate
                    .ok_or_else(|| anyhow!("family `exponential` needs `rate`"))?;
                SmoothFunction::exponential(rate)?
            }
            other => bail!("unknown function family `{other}`"),
        };
        Ok(f)
    }

    /// True when the profile is the unit Gaussian, whose transform has a
    /// closed form worth checking against.
    pub fn is_unit_gaussian(&self) -> bool {
        self.family == "gaussian"
            && self.center.unwrap_or(0.0) == 0.0
            && self.width.unwrap_or(1.0) == 1.0
    }
}

impl GridSection {
    pub fn r_or(&self, default: &[u64]) -> Vec<u64> {
        self.r.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn epsilon_or(&self, default: &[f64]) -> Vec<f64> {
        self.epsilon.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn n_or(&self, default: &[u32]) -> Vec<u32> {
        self.n.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn t_or(&self, default: &[f64]) -> Vec<f64> {
        self.t.clone().unwrap_or_else(|| default.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
kind = "kernel-decay"
dimension = 1
half-width = 30
mode = "float"
seed = 7

[potential]
type = "uniform"
v-lo = "-1"
v-hi = "1"

[function]
family = "gaussian"
center = 0.5
width = 2.0

[grid]
r = [2, 4, 6]
"#;

    #[test]
    fn parse_and_reserialize_round_trips() {
        let config = parse_config(FULL).unwrap();
        assert_eq!(config.kind, Kind::KernelDecay);
        assert_eq!(config.grid.as_ref().unwrap().r.as_deref(), Some(&[2, 4, 6][..]));
        let text = toml::to_string(&config).unwrap();
        let again = parse_config(&text).unwrap();
        assert_eq!(config, again);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = parse_config("kind = \"propagation\"\nwavelength = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("wavelength"), "{err}");
        assert!(err.contains("line"), "{err}");

        let err = parse_config(
            "kind = \"propagation\"\n[grid]\nr = [1]\nrr = [2]\n",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("rr"), "{err}");
    }

    #[test]
    fn random_potential_without_seed_is_refused() {
        let text = "kind = \"propagation\"\n[potential]\ntype = \"uniform\"\nv-lo = \"-1\"\nv-hi = \"1\"\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn keys_foreign_to_the_family_are_rejected() {
        let text = "kind = \"cosine-bounds\"\n[function]\nfamily = \"gaussian\"\nrate = 2.0\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("rate"), "{err}");
        assert!(err.contains("gaussian"), "{err}");

        let text = "kind = \"propagation\"\n[potential]\ntype = \"constant\"\nv-lo = \"0\"\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("v-lo"), "{err}");
    }

    #[test]
    fn minimal_configs_parse_with_defaults() {
        let config = parse_config("kind = \"gevrey-coefficients\"\n").unwrap();
        assert_eq!(config.kind, Kind::GevreyCoefficients);
        assert!(config.grid.is_none());
        let pot = config.potential_section();
        assert_eq!(pot.kind, "constant");
    }

    #[test]
    fn seeded_potentials_are_reproducible_and_mode_consistent() {
        let lat = LatticeBox::new(1, 6).unwrap();
        let section = PotentialSection {
            kind: "uniform".into(),
            value: None,
            background: None,
            sites: None,
            v_lo: Some("-1".into()),
            v_hi: Some("1".into()),
        };
        let a = section.build_exact(lat, Some(11)).unwrap();
        let b = section.build_exact(lat, Some(11)).unwrap();
        assert!(a.disagreement_sites(&b).unwrap().is_empty());
        let c = section.build_exact(lat, Some(12)).unwrap();
        assert!(!a.disagreement_sites(&c).unwrap().is_empty());
        // The float build samples the same dyadic grid.
        let f = section.build_float(lat, Some(11)).unwrap();
        let exact_as_float = a.to_float();
        assert!(f.disagreement_sites(&exact_as_float).unwrap().is_empty());
        let (lo, hi) = f.bounds();
        assert!(lo >= -1.0 && hi <= 1.0);
    }
}
