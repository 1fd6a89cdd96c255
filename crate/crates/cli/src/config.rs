//! Experiment configuration: one TOML document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use delocspec_core::cyclotomic::Cyclotomic;
use delocspec_core::group::{ConjugacyClassInfo, Group, GroupElement};
use delocspec_core::parse::parse_element;
use delocspec_core::ring::RingMatrix;
use delocspec_core::spectral::Thresholds;
use serde::Deserialize;

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "DELOCSPEC_OUT";

/// Budget for the conjugacy-class search of a tracked element.
pub const CLASS_BUDGET: usize = 1 << 16;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub group: Vec<FactorSpec>,
    /// Rows of ring-element expressions.
    pub matrix: Vec<Vec<String>>,
    #[serde(default)]
    pub track: Vec<String>,
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub stages: Option<StageList>,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub compute: ComputeSpec,
    /// Known limit coefficients by tracked word, as exact numbers such as
    /// `1/2` or `z@4`.
    #[serde(default)]
    pub limits: BTreeMap<String, String>,
    #[serde(default)]
    pub sofic: SoficSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reproducible: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorSpec {
    Cyclic {
        order: u32,
        generator: String,
    },
    FreeAbelian {
        generators: Vec<String>,
    },
    Free {
        generators: Vec<String>,
    },
    /// Multiplication table over `0..n` with `0` the identity.
    Table {
        rows: Vec<Vec<u32>>,
        generators: Vec<(String, u32)>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    /// `G → G/nG` on every free abelian factor; stages are the moduli `n`.
    Quotient,
    /// Compressions to boxes `{0..n−1}ᵐ` of `G/U`; stages are side lengths.
    Folner,
    /// `ℤ/2ᵏ` inside `ℤ/2^window`; stages are indices `0..window`.
    Prufer { window: u32 },
    /// `G × ℤ/2` for `depth` stages, then `G`; stages are indices.
    Collapsing { depth: usize },
    /// The group is finite and is its own single stage.
    Finite,
}

/// `[2, 3, 5]`, or a string such as `"2..64"`, `"2..64:2"` or `"2,4,8..16"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum StageList {
    List(Vec<u64>),
    Text(String),
}

impl StageList {
    pub fn expand(&self) -> Result<Vec<u64>> {
        let stages = match self {
            StageList::List(v) => v.clone(),
            StageList::Text(s) => parse_stage_text(s)?,
        };
        if stages.is_empty() {
            bail!("stage list is empty");
        }
        if let Some(w) = stages.windows(2).find(|w| w[0] >= w[1]) {
            bail!(
                "stage list must be strictly increasing, found {} then {}",
                w[0],
                w[1]
            );
        }
        Ok(stages)
    }
}

pub fn parse_stage_text(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| {
            t.trim()
                .parse::<u64>()
                .with_context(|| format!("bad stage `{t}` in `{s}`"))
        };
        match part.split_once("..") {
            Some((lo, rest)) => {
                let (hi, step) = match rest.split_once(':') {
                    Some((hi, step)) => (num(hi)?, num(step)?),
                    None => (num(rest)?, 1),
                };
                if step == 0 {
                    bail!("zero step in `{part}`");
                }
                out.extend((num(lo)?..=hi).step_by(step as usize));
            }
            None => out.push(num(part)?),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Points of `[0, κ]` at which the oracle density is sampled.
    #[serde(default = "default_density_points")]
    pub density_points: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            enabled: true,
            grid: default_grid(),
            density_points: default_density_points(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "zero_rel")]
    pub zero_rel: f64,
    #[serde(default = "zero_abs")]
    pub zero_abs: f64,
    #[serde(default = "cluster_rel")]
    pub cluster_rel: f64,
    /// Exact versus floating values of the same stage quantity.
    #[serde(default = "nine")]
    pub agreement: f64,
    /// Positivity of deviated weights and per-eigenvalue domination.
    #[serde(default = "nine")]
    pub weights: f64,
    /// Slack for determinant lower bounds and `lndet ≥ 0`.
    #[serde(default = "nine")]
    pub bounds: f64,
    /// Largest tolerated delta at the last stage; unchecked when absent.
    #[serde(default)]
    pub final_delta: Option<f64>,
    /// Tail limsup − liminf above this is flagged in the report.
    #[serde(default = "tail")]
    pub tail_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            zero_rel: zero_rel(),
            zero_abs: zero_abs(),
            cluster_rel: cluster_rel(),
            agreement: nine(),
            weights: nine(),
            bounds: nine(),
            final_delta: None,
            tail_spread: tail(),
        }
    }
}

impl Tolerances {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            zero_rel: self.zero_rel,
            zero_abs: self.zero_abs,
            cluster_rel: self.cluster_rel,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeSpec {
    /// Exact kernel data whenever the coefficients are exact.
    #[serde(default = "yes")]
    pub exact: bool,
    /// Largest realization that gets a dense eigendecomposition.
    #[serde(default = "default_float_dim")]
    pub float_max_dim: usize,
    /// Powers `1..=n` checked by the telescope estimate on Følner stages.
    #[serde(default = "default_powers")]
    pub telescope_powers: u32,
}

impl Default for ComputeSpec {
    fn default() -> Self {
        ComputeSpec {
            exact: true,
            float_max_dim: default_float_dim(),
            telescope_powers: default_powers(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoficSpec {
    /// Graph files in the `vertices / labels / edges / good` text form.
    #[serde(default)]
    pub files: Vec<PathBuf>,
    /// Certification radius; defaults to the support radius of the matrix.
    #[serde(default)]
    pub radius: Option<usize>,
    /// Edges redirected at random in each generated graph.
    #[serde(default)]
    pub corrupt: usize,
}

fn yes() -> bool {
    true
}
fn default_grid() -> usize {
    4096
}
fn default_density_points() -> usize {
    33
}
fn zero_rel() -> f64 {
    1e-10
}
fn zero_abs() -> f64 {
    1e-12
}
fn cluster_rel() -> f64 {
    1e-9
}
fn nine() -> f64 {
    1e-9
}
fn tail() -> f64 {
    1e-2
}
fn default_float_dim() -> usize {
    256
}
fn default_powers() -> u32 {
    3
}

/// A tracked element with its class in `G`.
#[derive(Clone, Debug)]
pub struct Tracked {
    pub word: String,
    pub element: GroupElement,
    pub class: ConjugacyClassInfo,
    pub limit: Option<Cyclotomic>,
}

/// Parsed and checked experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub group: Group,
    pub matrix: RingMatrix,
    pub tracked: Vec<Tracked>,
    pub stages: Vec<u64>,
    pub out_dir: PathBuf,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub stages: Option<String>,
    pub track: Option<String>,
    pub reproducible: bool,
    pub grid: Option<usize>,
    pub no_oracle: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow!("config: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn build_group(&self) -> Result<Group> {
        fn names(v: &[String]) -> Vec<&str> {
            v.iter().map(String::as_str).collect()
        }
        if self.group.is_empty() {
            bail!("config: `group` needs at least one factor");
        }
        let factors = self
            .group
            .iter()
            .enumerate()
            .map(|(i, f)| {
                match f {
                    FactorSpec::Cyclic { order, generator } => Group::cyclic(*order, generator),
                    FactorSpec::FreeAbelian { generators } => {
                        Group::free_abelian(&names(generators))
                    }
                    FactorSpec::Free { generators } => Group::free(&names(generators)),
                    FactorSpec::Table { rows, generators } => {
                        Group::finite_table(rows.clone(), generators.clone())
                    }
                }
                .with_context(|| format!("config: group[{i}]"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(if factors.len() == 1 {
            factors.into_iter().next().unwrap()
        } else {
            Group::direct_product(factors)?
        })
    }

    pub fn build_matrix(&self, group: &Group) -> Result<RingMatrix> {
        let d = self.matrix.len();
        if d == 0 {
            bail!("config: `matrix` is empty");
        }
        let mut rows = Vec::with_capacity(d);
        for (k, row) in self.matrix.iter().enumerate() {
            if row.len() != d {
                bail!(
                    "config: matrix row {k} has {} entries, expected {d}",
                    row.len()
                );
            }
            let parsed = row
                .iter()
                .enumerate()
                .map(|(l, s)| {
                    parse_element(group, s)
                        .with_context(|| format!("config: matrix[{k}][{l}] = {s:?}"))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(parsed);
        }
        let m = RingMatrix::from_rows(group, rows)?;
        if !m.is_hermitian() {
            bail!(
                "config: matrix is not self-adjoint (deviation {:.3e})",
                m.hermitian_deviation()
            );
        }
        Ok(m)
    }
}

impl Experiment {
    pub fn new(mut config: ExperimentConfig, ov: &Overrides) -> Result<Self> {
        if let Some(k) = config.limits.keys().find(|k| !config.track.contains(k)) {
            bail!("config: limit given for `{k}`, which is not tracked");
        }
        if let Some(t) = &ov.track {
            config.track = t
                .split(',')
                .map(|w| w.trim().to_string())
                .filter(|w| !w.is_empty())
                .collect();
        }
        if let Some(s) = &ov.stages {
            config.stages = Some(StageList::Text(s.clone()));
        }
        if let Some(g) = ov.grid {
            config.oracle.grid = g;
        }
        if ov.no_oracle {
            config.oracle.enabled = false;
        }
        config.reproducible |= ov.reproducible;
        let group = config.build_group()?;
        let matrix = config.build_matrix(&group)?;
        let mut tracked = Vec::new();
        for word in &config.track {
            let element = group
                .parse_word(word)
                .with_context(|| format!("config: track entry {word:?}"))?;
            let class = group.conjugacy_class(&element, CLASS_BUDGET)?;
            if !class.is_finite() {
                bail!(
                    "tracked element `{word}` does not have a finite conjugacy class ({:?}); \
                     only finite classes carry delocalized coefficients",
                    class.status
                );
            }
            let limit = config
                .limits
                .get(word)
                .map(|s| {
                    Cyclotomic::parse(s).with_context(|| format!("config: limits.{word} = {s:?}"))
                })
                .transpose()?;
            tracked.push(Tracked {
                word: word.clone(),
                element,
                class,
                limit,
            });
        }
        let stages = match (&config.scheme, &config.stages) {
            (SchemeSpec::Finite, _) => vec![0],
            (_, Some(s)) => s.expand()?,
            (_, None) => bail!("config: `stages` is required for this scheme"),
        };
        let out_dir = ov
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .or_else(|| config.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Experiment {
            config,
            group,
            matrix,
            tracked,
            stages,
            out_dir,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
matrix = [["(1 - t)(2 - u - u^-1)"]]
track = ["e", "t"]
stages = "2..8"

[[group]]
kind = "cyclic"
order = 2
generator = "t"

[[group]]
kind = "free_abelian"
generators = ["u"]

[scheme]
kind = "quotient"

[limits]
t = "1/2"
"#;

    fn experiment(text: &str) -> Result<Experiment> {
        let ov = Overrides { out: Some("unused".into()), ..Default::default() };
        Experiment::new(ExperimentConfig::from_toml(text)?, &ov)
    }

    #[test]
    fn stage_text_forms() {
        assert_eq!(parse_stage_text("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_stage_text("2..9:3").unwrap(), vec![2, 5, 8]);
        assert_eq!(parse_stage_text("1, 4,6..7").unwrap(), vec![1, 4, 6, 7]);
        assert!(parse_stage_text("2..x").is_err());
        assert!(parse_stage_text("2..8:0").is_err());
    }

    #[test]
    fn stage_list_must_increase() {
        assert!(StageList::Text("4,4".into()).expand().is_err());
        assert!(StageList::List(vec![8, 2]).expand().is_err());
        assert!(StageList::List(vec![]).expand().is_err());
        assert_eq!(StageList::List(vec![2, 8]).expand().unwrap(), vec![2, 8]);
    }

    #[test]
    fn defaults_match_spectral_thresholds() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.tolerances.thresholds(), Thresholds::default());
        assert!(c.oracle.enabled && c.compute.exact);
        assert_eq!(c.oracle.grid, 4096);
    }

    #[test]
    fn builds_experiment() {
        let e = experiment(BASE).unwrap();
        assert_eq!(e.stages, vec![2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(e.tracked.len(), 2);
        assert_eq!(e.tracked[1].limit, Some(Cyclotomic::from_fraction(1, 2)));
        assert!(e.tracked[0].limit.is_none());
        assert_eq!(e.out_dir, PathBuf::from("unused"));
    }

    #[test]
    fn overrides_apply() {
        let ov = Overrides {
            out: Some("o".into()),
            stages: Some("3,5".into()),
            track: Some("t".into()),
            reproducible: true,
            grid: Some(64),
            no_oracle: false,
        };
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        let e = Experiment::new(c, &ov).unwrap();
        assert_eq!(e.stages, vec![3, 5]);
        assert_eq!(e.tracked.len(), 1);
        assert!(e.config.reproducible);
        assert_eq!(e.config.oracle.grid, 64);
    }

    #[test]
    fn rejects_bad_documents() {
        let unknown = BASE.replace("seed", "x").replace("track =", "trakc =");
        let err = format!("{:#}", ExperimentConfig::from_toml(&unknown).unwrap_err());
        assert!(err.contains("trakc"), "{err}");

        let not_hermitian = BASE.replace("(1 - t)(2 - u - u^-1)", "2 - u");
        let err = format!("{:#}", experiment(&not_hermitian).unwrap_err());
        assert!(err.contains("self-adjoint"), "{err}");

        let bad_entry = BASE.replace("(1 - t)(2 - u - u^-1)", "2 - v");
        let err = format!("{:#}", experiment(&bad_entry).unwrap_err());
        assert!(err.contains("matrix[0][0]"), "{err}");

        let stray_limit = BASE.replace("t = \"1/2\"", "u = \"0\"");
        assert!(experiment(&stray_limit).is_err());
    }

    #[test]
    fn infinite_class_is_rejected() {
        let text = r#"
matrix = [["4 - a - a^-1 - b - b^-1"]]
track = ["a"]
stages = [2]
[[group]]
kind = "free"
generators = ["a", "b"]
[scheme]
kind = "quotient"
"#;
        let err = format!("{:#}", experiment(text).unwrap_err());
        assert!(err.contains("finite conjugacy class"), "{err}");
    }
}
