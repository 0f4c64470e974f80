//! Supervised-classification study: one MLP architecture trained separately
//! under each configured cost, from the same seeded initialization, so the
//! curves isolate the effect of the training criterion.

use serde::{Deserialize, Serialize};

use super::{check_labels, config_err, derive_seed, Curve, MixSpec, Result};
use crate::mlp::{gen_clusters, load_csv_dataset, load_idx_images, load_idx_labels};
use crate::mlp::{CostKind, Dataset, MlpNet, UpdateMode};

/// Where the train/test datasets come from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// Seeded Gaussian clusters on a circle; linearly separable when
    /// `separation` dominates `noise`.
    Synthetic {
        #[serde(default = "default_train")]
        train: usize,
        #[serde(default = "default_test")]
        test: usize,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    /// IDX-format image/label files (the MNIST layout).
    Idx {
        train_images: String,
        train_labels: String,
        test_images: String,
        test_labels: String,
        /// Cap on samples actually used, applied after loading.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit_train: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit_test: Option<usize>,
        #[serde(default = "default_idx_classes")]
        classes: usize,
    },
    /// CSV rows `label,v0,v1,…`.
    Csv {
        train: String,
        test: String,
        classes: usize,
    },
}

fn default_train() -> usize {
    1000
}

fn default_test() -> usize {
    200
}

fn default_classes() -> usize {
    2
}

fn default_dim() -> usize {
    2
}

fn default_separation() -> f64 {
    6.0
}

fn default_noise() -> f64 {
    1.0
}

fn default_idx_classes() -> usize {
    10
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            train: default_train(),
            test: default_test(),
            classes: default_classes(),
            dim: default_dim(),
            separation: default_separation(),
            noise: default_noise(),
        }
    }
}

/// One training cost. An absent `mix` falls back to per-cost defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub cost: CostKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<MixSpec>,
}

fn default_rate() -> f64 {
    1.5
}

/// Study defaults for each cost's kernel-pair parameters.
pub fn default_mix_for(cost: CostKind) -> MixSpec {
    match cost {
        CostKind::Gmcc => MixSpec {
            lambda: 1.0,
            alpha1: 2.0,
            beta1: 1.5,
            ..MixSpec::gmeef_classify()
        },
        CostKind::Gmee => MixSpec {
            lambda: 0.0,
            alpha2: 3.5,
            beta2: 6.0,
            ..MixSpec::gmeef_classify()
        },
        CostKind::Gmeef | CostKind::CrossEntropy => MixSpec::gmeef_classify(),
    }
}

impl MixSpec {
    /// Kernel-pair block used by the classification study's blended cost.
    pub fn gmeef_classify() -> Self {
        Self {
            lambda: 0.8,
            alpha1: 2.0,
            beta1: 1.5,
            alpha2: 2.5,
            beta2: 3.0,
        }
    }
}

impl CostSpec {
    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.cost.name().to_string())
    }

    pub fn resolved_mix(&self) -> MixSpec {
        self.mix.unwrap_or_else(|| default_mix_for(self.cost))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    #[serde(default)]
    pub data: DataSource,
    /// Hidden-layer widths; input/output widths come from the data.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Mini-batch (or sliding-window) length.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub mode: UpdateMode,
    pub costs: Vec<CostSpec>,
}

fn default_hidden() -> Vec<usize> {
    vec![6]
}

fn default_epochs() -> usize {
    30
}

fn default_window() -> usize {
    8
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.data {
            DataSource::Synthetic {
                train,
                test,
                classes,
                dim,
                separation,
                noise,
            } => {
                if *train == 0 || *test == 0 {
                    return Err(config_err("data.train", "train/test must be positive"));
                }
                if *classes < 2 {
                    return Err(config_err("data.classes", "at least two classes"));
                }
                if *dim < 2 {
                    return Err(config_err("data.dim", "at least two features"));
                }
                if !separation.is_finite() || *separation <= 0.0 {
                    return Err(config_err(
                        "data.separation",
                        format!("{separation} must be finite and positive"),
                    ));
                }
                if !noise.is_finite() || *noise < 0.0 {
                    return Err(config_err(
                        "data.noise",
                        format!("{noise} must be finite and >= 0"),
                    ));
                }
            }
            DataSource::Idx { classes, .. } => {
                if *classes < 2 {
                    return Err(config_err("data.classes", "at least two classes"));
                }
            }
            DataSource::Csv { classes, .. } => {
                if *classes < 2 {
                    return Err(config_err("data.classes", "at least two classes"));
                }
            }
        }
        for (i, h) in self.hidden.iter().enumerate() {
            if *h == 0 {
                return Err(config_err(format!("hidden[{i}]"), "must be positive"));
            }
        }
        if self.epochs == 0 {
            return Err(config_err("epochs", "must be positive"));
        }
        if self.window == 0 {
            return Err(config_err("window", "must be positive"));
        }
        if self.costs.is_empty() {
            return Err(config_err("costs", "at least one cost required"));
        }
        for (i, c) in self.costs.iter().enumerate() {
            if !c.rate.is_finite() || c.rate <= 0.0 {
                return Err(config_err(
                    format!("costs[{i}].rate"),
                    format!("{} must be finite and positive", c.rate),
                ));
            }
            c.resolved_mix().build(&format!("costs[{i}].mix"))?;
        }
        let labels: Vec<String> = self.costs.iter().map(|c| c.label()).collect();
        check_labels(&labels, "costs")?;
        Ok(())
    }
}

fn load_data(source: &DataSource, seed: u64) -> Result<(Dataset, Dataset)> {
    match source {
        DataSource::Synthetic {
            train,
            test,
            classes,
            dim,
            separation,
            noise,
        } => {
            let train = gen_clusters(
                *train,
                *classes,
                *dim,
                *separation,
                *noise,
                derive_seed(seed, 21),
            )?;
            let test = gen_clusters(
                *test,
                *classes,
                *dim,
                *separation,
                *noise,
                derive_seed(seed, 22),
            )?;
            Ok((train, test))
        }
        DataSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            limit_train,
            limit_test,
            classes,
        } => {
            let mut tri = load_idx_images(std::path::Path::new(train_images))?;
            let mut trl = load_idx_labels(std::path::Path::new(train_labels))?;
            let mut tei = load_idx_images(std::path::Path::new(test_images))?;
            let mut tel = load_idx_labels(std::path::Path::new(test_labels))?;
            if let Some(n) = limit_train {
                tri.truncate(*n);
                trl.truncate(*n);
            }
            if let Some(n) = limit_test {
                tei.truncate(*n);
                tel.truncate(*n);
            }
            Ok((
                Dataset::new(tri, trl, *classes)?,
                Dataset::new(tei, tel, *classes)?,
            ))
        }
        DataSource::Csv {
            train,
            test,
            classes,
        } => Ok((
            load_csv_dataset(std::path::Path::new(train), *classes)?,
            load_csv_dataset(std::path::Path::new(test), *classes)?,
        )),
    }
}

/// Per-cost training result: accuracy trajectories plus the trained network.
pub struct TrainedCost {
    pub label: String,
    pub train_curve: Curve,
    pub test_curve: Curve,
    pub final_test_accuracy: f64,
}

/// Runs every cost from one shared seeded initialization. Each cost yields
/// two curves labeled `<cost>/train` and `<cost>/test`, with accuracy at
/// epoch 0 (untrained) through `epochs`.
pub fn run_classify(cfg: &ClassifyConfig, seed: u64) -> Result<Vec<TrainedCost>> {
    cfg.validate()?;
    let (train, test) = load_data(&cfg.data, seed)?;
    let dim = train.inputs[0].len();
    let mut sizes = vec![dim];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(train.classes);

    let init_seed = derive_seed(seed, 31);
    let shuffle_seed = derive_seed(seed, 32);
    let mut out = Vec::with_capacity(cfg.costs.len());
    for spec in &cfg.costs {
        let mix = spec.resolved_mix().build("costs.mix")?;
        let mut net = MlpNet::new(&sizes, init_seed)?;
        let report = net.train(
            &train,
            &test,
            spec.cost,
            &mix,
            cfg.epochs,
            cfg.window,
            spec.rate,
            shuffle_seed,
            cfg.mode,
        )?;
        let label = spec.label();
        let mut train_curve = Curve::new(format!("{label}/train"));
        for (epoch, acc) in report.train_accuracy.iter().enumerate() {
            train_curve.points.push((epoch as u64, *acc));
        }
        let mut test_curve = Curve::new(format!("{label}/test"));
        for (epoch, acc) in report.test_accuracy.iter().enumerate() {
            test_curve.points.push((epoch as u64, *acc));
        }
        let final_test_accuracy = *report.test_accuracy.last().unwrap();
        out.push(TrainedCost {
            label,
            train_curve,
            test_curve,
            final_test_accuracy,
        });
    }
    Ok(out)
}
