use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::em::{fit_group, EmOptions, FitStrategy};
use super::mixture::GaussianMixture;
use crate::policy::SuccessModel;
use crate::{FitError, ModelFileError, RngStream, Scalar};

pub const MODEL_FILE_VERSION: u32 = 1;

/// Name recorded in model metadata for the per-condition EM estimator.
pub const ESTIMATOR: &str = "per-condition-gaussian-mixture-em";

/// Fit diagnostics for one predecessor count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionFit {
    pub x: usize,
    /// Training samples observed with exactly this predecessor count.
    pub samples: usize,
    /// Condition whose mixture was copied when this one had no samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filled_from: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<FitStrategy>,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_log_likelihood: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub samples: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_concentration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilization: Option<f64>,
    #[serde(default)]
    pub estimator: String,
    #[serde(default)]
    pub components: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fit: Vec<ConditionFit>,
}

/// `p(latency | predecessors)` as one mixture per predecessor count.
///
/// Counts above the largest trained condition reuse that condition's
/// mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalLatencyModel<T> {
    conditions: Vec<GaussianMixture<T>>,
    metadata: ModelMetadata,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FitOptions {
    pub em: EmOptions,
    /// Seeds the per-condition `em-init` streams.
    pub seed: u64,
}

impl<T: Scalar> ConditionalLatencyModel<T> {
    /// # Panics
    ///
    /// If `conditions` is empty.
    pub fn from_parts(conditions: Vec<GaussianMixture<T>>, metadata: ModelMetadata) -> Self {
        assert!(!conditions.is_empty(), "model needs at least one condition");
        Self { conditions, metadata }
    }

    /// Groups samples by predecessor count and fits each group.
    ///
    /// Conditions with no samples copy the nearest populated condition,
    /// preferring the larger count on a tie.
    pub fn fit(dataset: &Dataset<T>, options: &FitOptions) -> Result<Self, FitError> {
        if dataset.samples.is_empty() {
            return Err(FitError::EmptyDataset);
        }
        if options.em.components == 0 {
            return Err(FitError::NoComponents);
        }
        let mut groups: BTreeMap<usize, Vec<T>> = BTreeMap::new();
        for (index, s) in dataset.samples.iter().enumerate() {
            if !(s.sojourn > T::zero() && s.sojourn.is_finite()) {
                return Err(FitError::BadSample {
                    index,
                    value: s.sojourn.as_f64(),
                });
            }
            groups.entry(s.predecessors).or_default().push(s.sojourn);
        }
        let max_x = *groups.keys().next_back().expect("non-empty");
        let mut fitted: BTreeMap<usize, (GaussianMixture<T>, ConditionFit)> = BTreeMap::new();
        for (x, xs) in &groups {
            let mut rng = RngStream::new(options.seed, format!("em-init/{x}"));
            let fit = fit_group(xs, &options.em, &mut rng);
            let diag = ConditionFit {
                x: *x,
                samples: xs.len(),
                filled_from: None,
                strategy: Some(fit.strategy),
                iterations: fit.iterations,
                mean_log_likelihood: fit.final_log_likelihood().map(Scalar::as_f64),
            };
            fitted.insert(*x, (fit.mixture, diag));
        }
        let mut conditions = Vec::with_capacity(max_x + 1);
        let mut diagnostics = Vec::with_capacity(max_x + 1);
        for x in 0..=max_x {
            if let Some((m, d)) = fitted.get(&x) {
                conditions.push(m.clone());
                diagnostics.push(d.clone());
                continue;
            }
            let below = fitted.range(..x).next_back().map(|(k, _)| *k);
            let above = fitted.range(x..).next().map(|(k, _)| *k);
            let source = match (below, above) {
                (Some(b), Some(a)) => {
                    if x - b < a - x {
                        b
                    } else {
                        a
                    }
                }
                (Some(b), None) => b,
                (None, Some(a)) => a,
                (None, None) => unreachable!("at least one group exists"),
            };
            conditions.push(fitted[&source].0.clone());
            diagnostics.push(ConditionFit {
                x,
                samples: 0,
                filled_from: Some(source),
                strategy: None,
                iterations: 0,
                mean_log_likelihood: None,
            });
        }
        let link = dataset.link.unwrap_or_default();
        let metadata = ModelMetadata {
            samples: dataset.samples.len() as u64,
            gamma_concentration: link.gamma_concentration,
            gamma_rate: link.gamma_rate,
            utilization: link.utilization,
            estimator: ESTIMATOR.to_string(),
            components: options.em.components,
            fit: diagnostics,
        };
        Ok(Self { conditions, metadata })
    }

    pub fn max_condition(&self) -> usize {
        self.conditions.len() - 1
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut ModelMetadata {
        &mut self.metadata
    }

    /// Mixture for `predecessors`, clamped to the largest trained count.
    pub fn condition(&self, predecessors: usize) -> &GaussianMixture<T> {
        &self.conditions[predecessors.min(self.max_condition())]
    }

    pub fn conditions(&self) -> &[GaussianMixture<T>] {
        &self.conditions
    }

    pub fn cdf(&self, latency: T, predecessors: usize) -> T {
        self.condition(predecessors).cdf(latency)
    }

    /// Delay violation probability `P(latency > budget | X)`.
    pub fn violation_prob(&self, budget: T, predecessors: usize) -> T {
        self.condition(predecessors).ccdf(budget)
    }

    /// `P(latency ≤ budget | X)`.
    pub fn success_prob(&self, budget: T, predecessors: usize) -> T {
        self.cdf(budget, predecessors)
    }

    fn to_file(&self) -> ModelFile {
        ModelFile {
            version: MODEL_FILE_VERSION,
            metadata: self.metadata.clone(),
            conditions: self
                .conditions
                .iter()
                .enumerate()
                .map(|(x, m)| ConditionRecord {
                    x,
                    weights: m.weights().iter().map(|v| v.as_f64()).collect(),
                    means: m.means().iter().map(|v| v.as_f64()).collect(),
                    stddevs: m.stddevs().iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
        }
    }

    fn from_file(file: ModelFile) -> Result<Self, ModelFileError> {
        if file.version != MODEL_FILE_VERSION {
            return Err(ModelFileError::Version {
                found: file.version,
                expected: MODEL_FILE_VERSION,
            });
        }
        if file.conditions.is_empty() {
            return Err(ModelFileError::field("conditions", "no conditions present"));
        }
        let mut conditions = Vec::with_capacity(file.conditions.len());
        for (i, c) in file.conditions.into_iter().enumerate() {
            if c.x != i {
                return Err(ModelFileError::field(
                    format!("conditions[{i}].x"),
                    format!("expected {i}, found {} (conditions must be 0..=max in order)", c.x),
                ));
            }
            let convert = |name: &str, xs: Vec<f64>| -> Result<Vec<T>, ModelFileError> {
                xs.into_iter()
                    .map(|v| {
                        T::from_f64(v).ok_or_else(|| {
                            ModelFileError::field(format!("conditions[{i}].{name}"), format!("{v} not representable"))
                        })
                    })
                    .collect()
            };
            let mixture = GaussianMixture::new(
                convert("weights", c.weights)?,
                convert("means", c.means)?,
                convert("stddevs", c.stddevs)?,
            )
            .map_err(|e| ModelFileError::field(format!("conditions[{i}].{}", e.field), e.reason))?;
            conditions.push(mixture);
        }
        Ok(Self {
            conditions,
            metadata: file.metadata,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn save<W: Write>(&self, mut writer: W) -> Result<(), ModelFileError> {
        writer.write_all(self.to_json().as_bytes())?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn load<R: Read>(mut reader: R) -> Result<Self, ModelFileError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
        let mut file = fs::File::create(path)?;
        self.save(&mut file)?;
        file.sync_all()?;
        Ok(())
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self, ModelFileError> {
        Self::load(fs::File::open(path)?)
    }
}

impl<T: Scalar> SuccessModel<T> for ConditionalLatencyModel<T> {
    fn success_prob(&self, budget: T, predecessors: usize) -> T {
        self.cdf(budget, predecessors)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    metadata: ModelMetadata,
    conditions: Vec<ConditionRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionRecord {
    x: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    stddevs: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::TrainingSample;

    fn dataset(pairs: &[(usize, f64)]) -> Dataset<f64> {
        Dataset {
            samples: pairs
                .iter()
                .map(|(x, z)| TrainingSample {
                    predecessors: *x,
                    sojourn: *z,
                })
                .collect(),
            link: None,
        }
    }

    fn two_condition_model() -> ConditionalLatencyModel<f64> {
        ConditionalLatencyModel::from_parts(
            vec![
                GaussianMixture::single(10.0, 2.0).unwrap(),
                GaussianMixture::new(vec![0.25, 0.75], vec![18.0, 22.0], vec![3.0, 4.5]).unwrap(),
            ],
            ModelMetadata::default(),
        )
    }

    #[test]
    fn rejects_empty_dataset() {
        assert!(matches!(
            ConditionalLatencyModel::<f64>::fit(&dataset(&[]), &FitOptions::default()),
            Err(FitError::EmptyDataset)
        ));
    }

    #[test]
    fn rejects_non_positive_latency() {
        let err = ConditionalLatencyModel::fit(&dataset(&[(0, 1.0), (0, -2.0)]), &FitOptions::default());
        assert!(matches!(err, Err(FitError::BadSample { index: 1, .. })));
    }

    #[test]
    fn single_condition_clamps_queries() {
        let m = ConditionalLatencyModel::fit(&dataset(&[(0, 9.0), (0, 10.0), (0, 11.0)]), &FitOptions::default())
            .unwrap();
        assert_eq!(m.max_condition(), 0);
        assert_eq!(m.success_prob(10.0, 7), m.success_prob(10.0, 0));
        assert!((m.success_prob(10.0, 3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaps_copy_nearest_condition() {
        let m = ConditionalLatencyModel::fit(
            &dataset(&[(0, 1.0), (0, 2.0), (3, 30.0), (3, 31.0), (6, 60.0), (6, 62.0)]),
            &FitOptions::default(),
        )
        .unwrap();
        assert_eq!(m.max_condition(), 6);
        assert_eq!(m.condition(1), m.condition(0));
        // 2 is nearer to 3; 4 and 5 pick 3 and 6.
        assert_eq!(m.condition(2), m.condition(3));
        assert_eq!(m.condition(4), m.condition(3));
        assert_eq!(m.condition(5), m.condition(6));
        assert_eq!(m.metadata().fit[2].filled_from, Some(3));
    }

    #[test]
    fn tie_between_neighbours_prefers_larger_count() {
        let m = ConditionalLatencyModel::fit(&dataset(&[(0, 1.0), (0, 2.0), (2, 5.0), (2, 6.0)]), &FitOptions::default())
            .unwrap();
        assert_eq!(m.condition(1), m.condition(2));
    }

    #[test]
    fn success_and_violation_are_complements() {
        let m = two_condition_model();
        for z in [-5.0, 0.0, 3.3, 10.0, 19.9, 1e6] {
            for x in 0..4 {
                assert_eq!(m.success_prob(z, x) + m.violation_prob(z, x), 1.0);
            }
        }
        assert_eq!(m.success_prob(10.0, 0), 0.5);
        assert!(m.success_prob(0.0, 0) < 1e-6);
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let m = two_condition_model();
        let back = ConditionalLatencyModel::<f64>::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let m32 = ConditionalLatencyModel::<f32>::from_json(&m.to_json()).unwrap();
        let back32 = ConditionalLatencyModel::<f32>::from_json(&m32.to_json()).unwrap();
        assert_eq!(back32, m32);
    }

    fn corrupt(edit: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(&two_condition_model().to_json()).unwrap();
        edit(&mut v);
        v.to_string()
    }

    #[test]
    fn rejects_weights_not_summing_to_one() {
        let text = corrupt(|v| v["conditions"][1]["weights"] = serde_json::json!([0.2, 0.6]));
        let err = ConditionalLatencyModel::<f64>::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("conditions[1].weights"), "{err}");
    }

    #[test]
    fn rejects_negative_stddev() {
        let text = corrupt(|v| v["conditions"][0]["stddevs"] = serde_json::json!([-2.0]));
        let err = ConditionalLatencyModel::<f64>::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("conditions[0].stddevs"), "{err}");
    }

    #[test]
    fn rejects_missing_fields_and_bad_versions() {
        let text = corrupt(|v| {
            v["conditions"][0].as_object_mut().unwrap().remove("means");
        });
        let err = ConditionalLatencyModel::<f64>::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("means"), "{err}");
        let text = corrupt(|v| v["version"] = serde_json::json!(9));
        assert!(matches!(
            ConditionalLatencyModel::<f64>::from_json(&text),
            Err(ModelFileError::Version { found: 9, .. })
        ));
        let text = corrupt(|v| v["conditions"][1]["x"] = serde_json::json!(5));
        assert!(ConditionalLatencyModel::<f64>::from_json(&text).is_err());
    }
}
