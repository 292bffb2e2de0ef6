//! Config schemas for the experiment driver.
//!
//! All rationals travel as `"p/q"` strings (integers may drop the `/q`), and
//! every schema rejects unknown keys so that a misspelled field fails the run
//! as a usage error instead of being silently ignored.

use divergia_core::constructions::SeqKind;
use divergia_core::rat::{parse_rat, rat_int};
use divergia_core::weights::{materialize, WeightSequence, WeightTag};
use divergia_core::Rat;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest horizon a tag may be materialized at; beyond this the sequence
/// itself no longer fits the desk-scale budget.
pub const MAX_HORIZON: usize = 1 << 20;

pub fn load<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
}

pub fn parse_rat_field(s: &str, key: &str) -> Result<Rat, CliError> {
    parse_rat(s).map_err(|e| CliError::Usage(format!("field `{key}`: {e}")))
}

pub fn positive_rat_field(s: &str, key: &str) -> Result<Rat, CliError> {
    let r = parse_rat_field(s, key)?;
    if r <= rat_int(0) {
        return Err(CliError::Usage(format!("field `{key}` must be positive")));
    }
    Ok(r)
}

/// A weight sequence: either a generator tag plus a horizon, or explicit
/// values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub family: WeightTag,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub values: Option<Vec<String>>,
}

impl WeightSpec {
    pub fn resolve(&self) -> Result<WeightSequence, CliError> {
        match (&self.family, &self.values) {
            (WeightTag::Explicit, None) | (WeightTag::DyadicEnvelope, None) => Err(
                CliError::Usage("this weight family needs explicit `values`".into()),
            ),
            (WeightTag::Explicit, Some(vs)) | (WeightTag::DyadicEnvelope, Some(vs)) => {
                if vs.is_empty() {
                    return Err(CliError::Usage("weight `values` must be nonempty".into()));
                }
                let mut parsed = Vec::with_capacity(vs.len());
                for (i, s) in vs.iter().enumerate() {
                    parsed.push(positive_rat_field(s, &format!("values[{i}]"))?);
                }
                if let Some(h) = self.horizon {
                    if h != parsed.len() {
                        return Err(CliError::Usage(format!(
                            "weight horizon {h} disagrees with {} explicit values",
                            parsed.len()
                        )));
                    }
                }
                Ok(WeightSequence::new(self.family.clone(), parsed))
            }
            (_, Some(_)) => Err(CliError::Usage(
                "`values` is only meaningful for explicit or dyadic-envelope weights".into(),
            )),
            (tag, None) => {
                let h = self
                    .horizon
                    .ok_or_else(|| CliError::Usage("weight spec needs a `horizon`".into()))?;
                if h == 0 {
                    return Err(CliError::Usage("weight horizon must be ≥ 1".into()));
                }
                if h > MAX_HORIZON {
                    return Err(CliError::Guard(format!(
                        "weight horizon {h} exceeds the cap {MAX_HORIZON}"
                    )));
                }
                if let WeightTag::Band { lo, hi, .. } = tag {
                    if !(*lo >= 1 && lo <= hi && *hi <= h) {
                        return Err(CliError::Usage(format!(
                            "band [{lo}, {hi}] does not fit inside horizon {h}"
                        )));
                    }
                }
                if let WeightTag::Constant { level } = tag {
                    if *level <= rat_int(0) {
                        return Err(CliError::Usage("constant level must be positive".into()));
                    }
                }
                if let WeightTag::Band { height, filler, .. } = tag {
                    if *height <= rat_int(0) || *filler <= rat_int(0) {
                        return Err(CliError::Usage(
                            "band height and filler must be positive".into(),
                        ));
                    }
                }
                Ok(materialize(tag, h))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrendExpect {
    Bounded,
    Growing,
}

/// `weights-analyze`: threshold functionals of one weight family across a
/// grid of horizons.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub family: WeightTag,
    #[serde(default)]
    pub values: Option<Vec<String>>,
    /// Strictly increasing horizons; the functional is evaluated on each
    /// truncation.
    pub horizons: Vec<usize>,
    /// Exponent for the growth-trend diagnostic (default 1).
    #[serde(default)]
    pub trend_p: Option<String>,
    /// When set, also computes the weak p-norm at the largest horizon and
    /// asserts its scaling identity.
    #[serde(default)]
    pub weak_norm_p: Option<String>,
    /// Expected growth behaviour of the largest-horizon pair; drives the
    /// 5%/25% growth assertions.
    #[serde(default)]
    pub expect: Option<TrendExpect>,
}

/// `ubl1`: weak (1,1) counterexample builder.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ubl1Config {
    /// Target constant: the run certifies a weak (1,1) ratio > m_goal/4.
    pub m_goal: u64,
    pub weight: WeightSpec,
    #[serde(default = "default_one")]
    pub n_min: u64,
    pub seq: SeqKind,
}

/// `ublp`: weak (p,p) counterexample builder.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UblpConfig {
    pub j_set: Vec<u32>,
    pub p: String,
    #[serde(default = "default_one")]
    pub n0: u64,
    pub seq: SeqKind,
}

/// `infection`: digit-infection rotation builder.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfectionConfig {
    /// Digit base of the rotation.
    pub k: u32,
    pub weight: WeightSpec,
    /// Height scale: f has height 2^y.
    pub y: u32,
    /// Dyadic time horizon 2^t_horizon.
    pub t_horizon: u32,
}

/// `sumset`: integer sumset family with exhaustive verification.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumsetConfig {
    pub k: u32,
    pub j_set: Vec<u32>,
    pub p: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumProbe {
    /// Orbit start, as "p/q" in [0, 1).
    pub x: String,
    /// Horizons for the scaled multiplicative sums.
    pub grid: Vec<u64>,
    /// "linear" or "linear_log2".
    pub normalizer: divergia_core::khintchine::SumNormalizer,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerProbe {
    pub dim: usize,
    pub side: u32,
    pub base_size: usize,
    pub power_cap: u32,
    #[serde(default = "default_error_mass")]
    pub error_mass: String,
    #[serde(default)]
    pub seed: u64,
}

/// `khintchine`: certified lower bound for the dilation maximal operator,
/// with optional observational probes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KhintchineConfig {
    pub j_set: Vec<u32>,
    pub p: String,
    #[serde(default)]
    pub sum: Option<SumProbe>,
    #[serde(default)]
    pub tower: Option<TowerProbe>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilySpec {
    /// Multiplicative semigroup generated by the given integers ≥ 2.
    Generated { generators: Vec<u64> },
    /// All perfect squares n², n ≥ 2 (growing prime support).
    Squares,
    /// An explicitly listed multiplicatively closed sample.
    Explicit { elements: Vec<u64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideExpect {
    ConvergenceSide,
    DivergenceSide,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeProbe {
    pub primes: Vec<u64>,
    /// Bounds y, as "p/q" strings.
    pub bounds: Vec<String>,
    /// Cap asserted on residual/y^{d−1} (default 2).
    #[serde(default = "default_two")]
    pub residual_bound: String,
}

/// `semigroup`: growth-dichotomy diagnostics of a multiplicative sample
/// family at increasing bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupConfig {
    pub family: FamilySpec,
    /// Strictly increasing enumeration bounds.
    pub bounds: Vec<u64>,
    #[serde(default)]
    pub include_identity: bool,
    /// When set, runs translate diagnostics at this element over `bounds`
    /// and asserts the ratio decreases.
    #[serde(default)]
    pub folner_x: Option<u64>,
    #[serde(default)]
    pub expect: Option<SideExpect>,
    #[serde(default)]
    pub lattice: Option<LatticeProbe>,
}

/// `audit`: randomized maximal-inequality audits.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub instances: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_levels")]
    pub max_levels: u32,
    #[serde(default = "default_maps")]
    pub max_maps: usize,
    /// (p, r) exponent pairs for the tail bound, r as "p/q".
    #[serde(default = "default_pairs")]
    pub pairs: Vec<(i64, String)>,
}

fn default_one() -> u64 {
    1
}

fn default_two() -> String {
    "2".into()
}

fn default_error_mass() -> String {
    "1/100".into()
}

fn default_levels() -> u32 {
    16
}

fn default_maps() -> usize {
    64
}

fn default_pairs() -> Vec<(i64, String)> {
    vec![(2, "3/2".into()), (3, "2".into())]
}
