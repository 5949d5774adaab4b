//! JSON-configurable descriptions of hypotheses and simulation experiments.

use serde::{Deserialize, Serialize};

use assort_core::dataset::ScenarioSpec;
use assort_core::hypotheses::{
    blocks_represented, contained_in, group_not_contained, leading_block, product_excluded,
    share_exceeds, Partition, PropertySet,
};
use assort_core::{Error, Result};

/// A testable claim about the optimal assortment, in its JSON form. Each
/// variant maps to a set of optimal-assortment sizes K₀ for which the claim
/// holds; the test then checks K₀ against the confidence interval.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HypothesisSpec {
    /// Product i is not stocked.
    ProductExcluded { i: usize },
    /// Group A is not entirely stocked.
    GroupNotContained { a: Vec<usize> },
    /// Everything stocked belongs to A.
    ContainedIn { a: Vec<usize> },
    /// Products from A exceed q percent of the stocked assortment.
    ShareExceeds { a: Vec<usize>, q: u32 },
    /// The first block of a partition is the plurality among stocked
    /// products.
    LeadingBlock { partition: Vec<Vec<usize>> },
    /// At least n0 partition blocks have a stocked representative.
    BlocksRepresented { partition: Vec<Vec<usize>>, n0: usize },
    /// An explicit set of sizes.
    Members { k0: Vec<usize> },
}

impl HypothesisSpec {
    pub fn build(&self, n: usize) -> Result<PropertySet> {
        match self {
            HypothesisSpec::ProductExcluded { i } => product_excluded(n, *i),
            HypothesisSpec::GroupNotContained { a } => group_not_contained(n, a),
            HypothesisSpec::ContainedIn { a } => contained_in(n, a),
            HypothesisSpec::ShareExceeds { a, q } => share_exceeds(n, a, *q),
            HypothesisSpec::LeadingBlock { partition } => {
                leading_block(&Partition::new(n, partition.clone())?)
            }
            HypothesisSpec::BlocksRepresented { partition, n0 } => {
                blocks_represented(&Partition::new(n, partition.clone())?, *n0)
            }
            HypothesisSpec::Members { k0 } => {
                PropertySet::from_members(n, k0.iter().copied(), "members")
            }
        }
    }

    /// Stable identifier used in experiment output tables.
    pub fn label(&self) -> String {
        match self {
            HypothesisSpec::ProductExcluded { i } => format!("product_excluded_{i}"),
            HypothesisSpec::GroupNotContained { .. } => "group_not_contained".into(),
            HypothesisSpec::ContainedIn { .. } => "contained_in".into(),
            HypothesisSpec::ShareExceeds { q, .. } => format!("share_exceeds_{q}"),
            HypothesisSpec::LeadingBlock { .. } => "leading_block".into(),
            HypothesisSpec::BlocksRepresented { n0, .. } => format!("blocks_represented_{n0}"),
            HypothesisSpec::Members { .. } => "members".into(),
        }
    }
}

fn default_lambda_c() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.05
}
fn default_b() -> usize {
    200
}
fn default_reps() -> usize {
    200
}
fn default_l_grid() -> Vec<usize> {
    vec![50, 100, 300]
}
fn default_d_grid() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

/// One simulation study: a base scenario plus the grids the study sweeps.
/// The same config type drives all three experiment kinds; each kind reads
/// the fields it needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base scenario; grids override its `k_star_target` and `L` per cell.
    pub scenario: ScenarioSpec,
    #[serde(default = "default_lambda_c")]
    pub lambda_c: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Bootstrap replicates per fit.
    #[serde(default = "default_b")]
    pub b: usize,
    /// Monte Carlo replications per cell.
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Sample sizes swept by the coverage and power studies.
    #[serde(default = "default_l_grid")]
    pub l_grid: Vec<usize>,
    /// Optimal sizes swept by the coverage study; defaults to the base
    /// scenario's target only.
    #[serde(default)]
    pub k_star_grid: Vec<usize>,
    /// Distances d from the null swept by the power study: cell d plants
    /// the truth at (base k_star_target) + d.
    #[serde(default = "default_d_grid")]
    pub d_grid: Vec<usize>,
    /// Claim under test; required by the power study.
    #[serde(default)]
    pub hypothesis: Option<HypothesisSpec>,
    /// Root seed; every cell and replication derives from it.
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if !(self.lambda_c.is_finite() && self.lambda_c > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda_c {} must be positive",
                self.lambda_c
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha {} must be in (0, 1)",
                self.alpha
            )));
        }
        if self.b < 2 {
            return Err(Error::InvalidInput("b must be at least 2".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if self.l_grid.is_empty() || self.l_grid.iter().any(|&l| l == 0) {
            return Err(Error::InvalidInput("l_grid entries must be >= 1".into()));
        }
        if let Some(h) = &self.hypothesis {
            h.build(self.scenario.n)?;
        }
        Ok(())
    }

    /// Grid checks for the coverage study, which sweeps `k_star_grid`.
    pub fn validate_for_coverage(&self) -> Result<()> {
        self.validate()?;
        for &k in &self.k_star_cells() {
            if k == 0 || k > self.scenario.n {
                return Err(Error::InvalidInput(format!(
                    "k_star_grid entry {k} outside 1..={}",
                    self.scenario.n
                )));
            }
        }
        Ok(())
    }

    /// Grid checks for the power study, which sweeps `d_grid`.
    pub fn validate_for_power(&self) -> Result<()> {
        self.validate()?;
        for &d in &self.d_grid {
            if self.scenario.k_star_target + d > self.scenario.n {
                return Err(Error::InvalidInput(format!(
                    "d = {d} pushes the planted optimum past n = {}",
                    self.scenario.n
                )));
            }
        }
        Ok(())
    }

    /// K* values the coverage study sweeps.
    pub fn k_star_cells(&self) -> Vec<usize> {
        if self.k_star_grid.is_empty() {
            vec![self.scenario.k_star_target]
        } else {
            self.k_star_grid.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypothesis_specs_round_trip_and_build() {
        let specs = vec![
            (r#"{"kind":"product_excluded","i":3}"#, vec![1, 2]),
            (r#"{"kind":"group_not_contained","a":[2,4]}"#, vec![1, 2, 3]),
            (r#"{"kind":"members","k0":[1,4]}"#, vec![1, 4]),
        ];
        for (json, members) in specs {
            let spec: HypothesisSpec = serde_json::from_str(json).unwrap();
            let set = spec.build(5).unwrap();
            assert_eq!(set.members(), members.as_slice(), "{json}");
            let back: HypothesisSpec =
                serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn partition_kinds_build_from_json() {
        let json = r#"{"kind":"leading_block","partition":[[4,5,6,13,14,15],[1,2,3,8,9],[7,10,11,12]]}"#;
        let spec: HypothesisSpec = serde_json::from_str(json).unwrap();
        let set = spec.build(15).unwrap();
        assert_eq!(set.members(), &[6, 7, 14, 15]);
        assert_eq!(spec.label(), "leading_block");

        let json = r#"{"kind":"blocks_represented","partition":[[1,2],[3,4],[5]],"n0":2}"#;
        let spec: HypothesisSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.build(5).unwrap().members(), &[3, 4, 5]);
        assert_eq!(spec.label(), "blocks_represented_2");
    }

    #[test]
    fn experiment_config_defaults_and_validation() {
        let json = r#"{
            "scenario": {"n": 15, "sigma_theta_sq": 1.0, "k_star_target": 7, "L": 300},
            "master_seed": 42
        }"#;
        let cfg = ExperimentConfig::from_json_str(json).unwrap();
        assert_eq!(cfg.lambda_c, 1.0);
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.b, 200);
        assert_eq!(cfg.reps, 200);
        assert_eq!(cfg.l_grid, vec![50, 100, 300]);
        assert_eq!(cfg.d_grid, vec![0, 1, 2, 3]);
        assert_eq!(cfg.k_star_cells(), vec![7]);
        assert!(cfg.hypothesis.is_none());

        let bad = json.replace("\"master_seed\": 42", "\"master_seed\": 42, \"alpha\": 1.5");
        assert!(ExperimentConfig::from_json_str(&bad).is_err());
        let unknown = json.replace("\"master_seed\": 42", "\"master_seed\": 42, \"oops\": 1");
        assert!(ExperimentConfig::from_json_str(&unknown).is_err());
    }

    #[test]
    fn grid_checks_apply_per_study_kind() {
        // d_grid only matters to the power study: the same config must stay
        // usable for a QQ run even when k_star_target + d would pass n.
        let json = r#"{
            "scenario": {"n": 8, "sigma_theta_sq": 1.0, "k_star_target": 7, "L": 50},
            "d_grid": [0, 2],
            "master_seed": 1
        }"#;
        let cfg = ExperimentConfig::from_json_str(json).unwrap();
        assert!(cfg.validate_for_power().is_err());
        assert!(cfg.validate_for_coverage().is_ok());

        let json = r#"{
            "scenario": {"n": 8, "sigma_theta_sq": 1.0, "k_star_target": 7, "L": 50},
            "k_star_grid": [9],
            "d_grid": [0, 1],
            "master_seed": 1
        }"#;
        let cfg = ExperimentConfig::from_json_str(json).unwrap();
        assert!(cfg.validate_for_coverage().is_err());
        assert!(cfg.validate_for_power().is_ok());
    }

    #[test]
    fn bundled_configs_are_valid() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = std::fs::read_to_string(&path).unwrap();
            let cfg = ExperimentConfig::from_json_str(&text)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            if name.starts_with("coverage") {
                cfg.validate_for_coverage().unwrap_or_else(|e| panic!("{name}: {e}"));
            } else if name.starts_with("power") {
                cfg.validate_for_power().unwrap_or_else(|e| panic!("{name}: {e}"));
                assert!(cfg.hypothesis.is_some(), "{name} must name a hypothesis");
            }
            seen += 1;
        }
        assert_eq!(seen, 8, "expected the full set of bundled configs");
    }
}
