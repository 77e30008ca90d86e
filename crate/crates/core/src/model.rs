//! JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discretize::GranularityLadder;
use crate::error::{Error, Result};
use crate::evolution::Chromosome;
use crate::fuzzy::{apply_displacement, build_partition, FuzzyPartition};
use crate::tsk::{DataBase, TskRule, TskRuleBase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub granularity: usize,
    /// Undisplaced split points, domain ends included.
    pub splits: Vec<f64>,
    /// One displacement per inner split point.
    pub alphas: Vec<f64>,
    pub fuzziness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub antecedent: Vec<Option<usize>>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub seed: u64,
    pub lambda: f64,
    pub alpha: f64,
    pub eta0: f64,
    /// Half-factor training error.
    pub train_mse: f64,
    /// Prediction for inputs no rule covers.
    pub fallback: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub variables: Vec<VariableSpec>,
    pub rules: Vec<RuleSpec>,
    pub metadata: Metadata,
}

impl ModelFile {
    pub fn new(
        names: &[String],
        ladders: &[GranularityLadder],
        chromosome: &Chromosome,
        rb: &TskRuleBase,
        metadata: Metadata,
    ) -> Self {
        let variables = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let g = chromosome.granularities[j];
                let partition = &rb.database.partitions[j];
                let splits = if g == 1 {
                    partition.splits().to_vec()
                } else {
                    ladders[j].splits(g).to_vec()
                };
                VariableSpec {
                    name: name.clone(),
                    granularity: g,
                    splits,
                    alphas: chromosome.displacements[j].clone(),
                    fuzziness: partition.fuzziness(),
                }
            })
            .collect();
        let rules = rb
            .rules
            .iter()
            .map(|r| RuleSpec {
                antecedent: r.antecedent.clone(),
                beta: r.beta.clone(),
            })
            .collect();
        Self {
            variables,
            rules,
            metadata,
        }
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    /// Rebuilds the rule base, checking that every part of the file is
    /// consistent with the others.
    pub fn to_rulebase(&self) -> Result<TskRuleBase> {
        let p = self.variables.len();
        let schema = |msg: String| Error::Schema(msg);
        let partitions = self
            .variables
            .iter()
            .map(|v| -> Result<FuzzyPartition> {
                if v.granularity == 0 || v.splits.len() != v.granularity + 1 {
                    return Err(schema(format!(
                        "variable {}: granularity {} with {} split points",
                        v.name,
                        v.granularity,
                        v.splits.len()
                    )));
                }
                if v.alphas.len() != v.granularity - 1 {
                    return Err(schema(format!(
                        "variable {}: {} displacements for granularity {}",
                        v.name,
                        v.alphas.len(),
                        v.granularity
                    )));
                }
                let displaced = apply_displacement(&v.splits, &v.alphas)?;
                build_partition(&displaced.splits, v.fuzziness).map_err(|e| schema(format!("variable {}: {e}", v.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        if self.rules.is_empty() {
            return Err(schema("model has no rules".into()));
        }
        for (k, r) in self.rules.iter().enumerate() {
            if r.antecedent.len() != p || r.beta.len() != p + 1 {
                return Err(schema(format!(
                    "rule {k}: expected {p} antecedent entries and {} coefficients",
                    p + 1
                )));
            }
            for (j, label) in r.antecedent.iter().enumerate() {
                if let Some(l) = label {
                    if *l >= partitions[j].granularity() {
                        return Err(schema(format!("rule {k}: label {l} out of range for variable {j}")));
                    }
                }
            }
        }
        Ok(TskRuleBase {
            database: DataBase::new(partitions),
            rules: self
                .rules
                .iter()
                .map(|r| TskRule {
                    antecedent: r.antecedent.clone(),
                    beta: r.beta.clone(),
                })
                .collect(),
            fallback: self.metadata.fallback,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        crate::data::write_file(path.as_ref(), text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}
