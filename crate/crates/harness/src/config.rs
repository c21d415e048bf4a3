//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wignerlab_core::cumulants::SymmetryClass;
use wignerlab_core::ensembles::{CompositeModel, EnsembleError, EnsembleSpec, EntryDistribution, Symmetry};
use wignerlab_core::semicircle::{in_domain, DomainParams, SpectralPoint};
use wignerlab_core::verify::Thresholds;
use wignerlab_core::C64;

/// Environment variable consulted when the config has no seed.
pub const SEED_ENV: &str = "WIGNERLAB_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}, column {column}: field `{field}`: {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("invalid model: {0}")]
    Model(#[from] EnsembleError),
    #[error("invalid {SEED_ENV}={0:?}: expected an unsigned 64-bit integer")]
    SeedEnv(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Equipartition,
    EnergyIdentity,
    GaussianLemma,
    LocalLaw,
    Rigidity,
    Observable,
    Overlap,
    CumulantExpansion,
    DerivationCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Equipartition => "equipartition",
            Experiment::EnergyIdentity => "energy_identity",
            Experiment::GaussianLemma => "gaussian_lemma",
            Experiment::LocalLaw => "local_law",
            Experiment::Rigidity => "rigidity",
            Experiment::Observable => "observable",
            Experiment::Overlap => "overlap",
            Experiment::CumulantExpansion => "cumulant_expansion",
            Experiment::DerivationCheck => "derivation_check",
        }
    }

    fn needs_domain(self) -> bool {
        matches!(self, Experiment::LocalLaw | Experiment::Observable)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomTable {
    pub name: String,
    pub class: SymmetryClass,
    /// `[re, im]` pairs.
    pub points: Vec<(f64, f64)>,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionRef {
    Named(String),
    Custom { custom_table: CustomTable },
}

impl DistributionRef {
    pub fn resolve(&self) -> Result<EntryDistribution, EnsembleError> {
        match self {
            DistributionRef::Named(name) => EntryDistribution::builtin(name),
            DistributionRef::Custom { custom_table: t } => {
                let pts = t.points.iter().map(|&(re, im)| C64::new(re, im)).collect();
                EntryDistribution::custom_table(&t.name, t.class, pts, t.probs.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub symmetry: Symmetry,
    pub offdiag: DistributionRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag: Option<DistributionRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigmas {
    Equal(EqualTag),
    Values(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualTag {
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of components; a single listed component is repeated `k` times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub sigmas: Sigmas,
    pub components: Vec<ComponentConfig>,
}

impl ModelConfig {
    /// The composite model at dimension `n`.
    pub fn build(&self, n: usize) -> Result<CompositeModel, ConfigError> {
        let k = self.k.unwrap_or(self.components.len());
        let comps: Vec<&ComponentConfig> = match (self.components.len(), k) {
            (1, k) => std::iter::repeat(&self.components[0]).take(k).collect(),
            (c, k) if c == k => self.components.iter().collect(),
            (c, k) => return Err(ConfigError::Invalid(format!("model.k = {k} but {c} components are listed"))),
        };
        let specs = comps
            .iter()
            .map(|c| {
                let diag = match &c.diag {
                    Some(d) => d.resolve()?,
                    None => EntryDistribution::builtin("gaussian_real")?,
                };
                EnsembleSpec::new(n, c.symmetry, c.offdiag.resolve()?, diag)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let sigmas = match &self.sigmas {
            Sigmas::Equal(_) => vec![1.0 / (k as f64).sqrt(); k],
            Sigmas::Values(v) => v.clone(),
        };
        Ok(CompositeModel::new(sigmas, specs)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivationConfig {
    pub step: f64,
    /// `[i, j]` index pairs; the variable is entry `(j, i)`.
    pub entries: Vec<(usize, usize)>,
}

impl Default for DerivationConfig {
    fn default() -> Self {
        DerivationConfig {
            step: 1e-5,
            entries: vec![(2, 5), (3, 3)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionConfig {
    pub l: u32,
    pub max_degree: u32,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig { l: 3, max_degree: 3 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub experiment: Experiment,
    pub model: ModelConfig,
    #[serde(alias = "Ns")]
    pub ns: Vec<usize>,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub z_points: Vec<(f64, f64)>,
    /// Second spectral argument for the observable, paired with `z_points`;
    /// defaults to `z2 = z1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z2_points: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub domain: DomainParams,
    #[serde(default)]
    pub derivation: DerivationConfig,
    #[serde(default)]
    pub expansion: ExpansionConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            ConfigError::Schema { line, column, field, message, .. } => ConfigError::Schema {
                path: path.display().to_string(),
                line,
                column,
                field,
                message,
            },
            e => e,
        })?;
        Ok(cfg)
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Schema {
                path: "<config>".into(),
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.experiment != Experiment::CumulantExpansion {
            if self.ns.is_empty() {
                return bad("ns must list at least one dimension".into());
            }
            if self.ns.windows(2).any(|w| w[0] >= w[1]) || self.ns[0] == 0 {
                return bad("ns must be positive and strictly ascending".into());
            }
            if self.trials == 0 {
                return bad("trials must be at least 1".into());
            }
        }
        for &n in self.ns.iter().take(1) {
            self.model.build(n)?;
        }
        if self.ns.is_empty() {
            self.model.build(1)?;
        }
        self.domain.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let zs = self.spectral_points()?;
        let z2 = self.second_points()?;
        if z2.len() != zs.len() {
            return bad(format!("z2_points has {} entries for {} z_points", z2.len(), zs.len()));
        }
        let needs_z = matches!(self.experiment, Experiment::LocalLaw | Experiment::Observable | Experiment::DerivationCheck);
        if needs_z && zs.is_empty() {
            return bad(format!("experiment {} needs z_points", self.experiment.name()));
        }
        if self.experiment.needs_domain() {
            for &n in &self.ns {
                for z in zs.iter().chain(&z2) {
                    if !in_domain(*z, n, &self.domain) {
                        return bad(format!(
                            "z = {z} is outside the spectral domain for N={n} (|E| <= 2+{}, N^(-1+{}) <= |eta| <= 1)",
                            self.domain.rho, self.domain.epsilon
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn spectral_points(&self) -> Result<Vec<SpectralPoint>, ConfigError> {
        points(&self.z_points)
    }

    pub fn second_points(&self) -> Result<Vec<SpectralPoint>, ConfigError> {
        match &self.z2_points {
            Some(z) => points(z),
            None => self.spectral_points(),
        }
    }

    /// Config seed, then `WIGNERLAB_SEED`, then 0.
    pub fn resolve_seed(&self, env: Option<&str>) -> Result<u64, ConfigError> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match env {
            Some(v) => v.trim().parse().map_err(|_| ConfigError::SeedEnv(v.to_string())),
            None => Ok(0),
        }
    }

    /// Canonical JSON: sorted keys, compact, shortest round-trip floats.
    pub fn canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

fn points(raw: &[(f64, f64)]) -> Result<Vec<SpectralPoint>, ConfigError> {
    raw.iter()
        .map(|&(e, eta)| SpectralPoint::new(e, eta).map_err(|err| ConfigError::Invalid(err.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "experiment": "equipartition",
        "model": {"k": 2, "sigmas": "equal", "components": [{"symmetry": "complex_hermitian", "offdiag": "gaussian_complex"}]},
        "ns": [64],
        "trials": 5
    }"#;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.experiment, Experiment::Equipartition);
        let m = c.model.build(64).unwrap();
        assert_eq!(m.k(), 2);
        assert!((m.sigmas()[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(c.thresholds, Thresholds::default());
    }

    #[test]
    fn sigma_normalization_is_enforced() {
        let text = MINIMAL.replace("\"equal\"", "[0.6, 0.9]");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("Σσ² = 1"), "{err}");
    }

    #[test]
    fn schema_errors_name_field_and_line() {
        let text = MINIMAL.replace("\"trials\": 5", "\"trials\": -5");
        match ExperimentConfig::parse(&text).unwrap_err() {
            ConfigError::Schema { field, line, .. } => {
                assert_eq!(field, "trials");
                assert_eq!(line, 5);
            }
            e => panic!("{e}"),
        }
        let text = MINIMAL.replace("\"trials\": 5", "\"trials\": 5, \"colour\": 1");
        assert!(matches!(ExperimentConfig::parse(&text), Err(ConfigError::Schema { .. })));
        let text = MINIMAL.replace("\"ns\"", "\"Ns\"");
        assert!(ExperimentConfig::parse(&text).is_ok());
        let text = MINIMAL.replace("gaussian_complex", "cauchy");
        assert!(matches!(ExperimentConfig::parse(&text), Err(ConfigError::Model(_))));
    }

    #[test]
    fn domain_is_checked_for_every_n() {
        let text = r#"{
            "experiment": "local_law",
            "model": {"sigmas": "equal", "components": [{"symmetry": "complex_hermitian", "offdiag": "gaussian_complex"}, {"symmetry": "complex_hermitian", "offdiag": "gaussian_complex"}]},
            "ns": [64, 1024], "trials": 2, "z_points": [[0.0, 0.01]]
        }"#;
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert!(err.to_string().contains("N=64"), "{err}");
    }

    #[test]
    fn hash_ignores_key_order_and_whitespace() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let b = ExperimentConfig::parse(
            r#"{"trials":5,"ns":[64],"model":{"components":[{"offdiag":"gaussian_complex","symmetry":"complex_hermitian"}],"sigmas":"equal","k":2},"experiment":"equipartition"}"#,
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse(&MINIMAL.replace("\"trials\": 5", "\"trials\": 6")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn seed_precedence() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.resolve_seed(None).unwrap(), 0);
        assert_eq!(c.resolve_seed(Some("42")).unwrap(), 42);
        assert!(c.resolve_seed(Some("x")).is_err());
        c.seed = Some(7);
        assert_eq!(c.resolve_seed(Some("42")).unwrap(), 7);
    }

    #[test]
    fn custom_table_component() {
        let text = MINIMAL.replace(
            "\"gaussian_complex\"",
            r#"{"custom_table": {"name": "pm1", "class": "real", "points": [[1, 0], [-1, 0]], "probs": [0.5, 0.5]}}"#,
        ).replace("complex_hermitian", "real_symmetric");
        let c = ExperimentConfig::parse(&text).unwrap();
        let m = c.model.build(4).unwrap();
        assert_eq!(m.components()[0].offdiag().name(), "pm1");
    }
}
