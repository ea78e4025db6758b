//! Stochastic blockmodel generator with class-correlated binary features.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::rng;

/// Parameters of the blockmodel.
///
/// `inprob` is the extra within-block probability `x`; the between-block
/// probability is `y = 0.004 − 0.2x` and the within-block probability is
/// `x + y`. Class `c` owns features `[c·k, c·k + k)` where `k` is
/// `per_class_feature_count`; those are on with probability
/// `p_feature_on_class`, every other feature with `p_feature_off_class`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub inprob: f64,
    pub n_features: usize,
    pub per_class_feature_count: usize,
    pub p_feature_on_class: f64,
    pub p_feature_off_class: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        SbmConfig {
            block_sizes: vec![400; 5],
            inprob: 0.0125,
            n_features: 50,
            per_class_feature_count: 10,
            p_feature_on_class: 0.35,
            p_feature_off_class: 0.1,
            seed: 0,
        }
    }
}

impl SbmConfig {
    pub fn p_out(&self) -> f64 {
        0.004 - 0.2 * self.inprob
    }

    pub fn p_in(&self) -> f64 {
        self.inprob + self.p_out()
    }

    pub fn n_nodes(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {p} is not a probability")))
            }
        };
        unit("inprob", self.inprob)?;
        unit("between-block probability 0.004 - 0.2*inprob", self.p_out())?;
        unit("within-block probability", self.p_in())?;
        unit("p_feature_on_class", self.p_feature_on_class)?;
        unit("p_feature_off_class", self.p_feature_off_class)?;
        if self.block_sizes.len() < 2 {
            return Err(Error::invalid("need at least two blocks"));
        }
        if self.block_sizes.contains(&0) {
            return Err(Error::invalid("empty block"));
        }
        if self.block_sizes.len() * self.per_class_feature_count > self.n_features {
            return Err(Error::invalid(format!(
                "{} classes x {} features per class exceed n_features = {}",
                self.block_sizes.len(),
                self.per_class_feature_count,
                self.n_features
            )));
        }
        Ok(())
    }
}

pub fn generate_sbm(cfg: &SbmConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = rng(cfg.seed);
    let labels: Vec<usize> = cfg
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
        .collect();
    let n = labels.len();
    let (p_in, p_out) = (cfg.p_in(), cfg.p_out());

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;

    let k = cfg.per_class_feature_count;
    let mut entries = Vec::new();
    for (i, &c) in labels.iter().enumerate() {
        for f in 0..cfg.n_features {
            let p = if f / k == c && k > 0 {
                cfg.p_feature_on_class
            } else {
                cfg.p_feature_off_class
            };
            if rng.gen::<f64>() < p {
                entries.push((i, f));
            }
        }
    }
    let features = FeatureMatrix::from_entries(n, cfg.n_features, entries)?;

    Dataset::new(
        format!("sbm-inprob{}-seed{}", cfg.inprob, cfg.seed),
        graph,
        features,
        labels,
        cfg.block_sizes.len(),
    )
}
