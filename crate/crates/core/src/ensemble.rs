//! The deployable predictor: expert outputs weighted by the thresholded
//! Bayesian-network gate posterior.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayesnet::{BayesianNetwork, Imputation};
use crate::clustering::ClusterModel;
use crate::experts::{Expert, ExpertNet};
use crate::{Error, Result};

/// Threshold used for every reported experiment.
pub const DEFAULT_THRESHOLD: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedEnsemble<E = ExpertNet> {
    pub experts: Vec<E>,
    pub bn: BayesianNetwork,
    pub threshold: f64,
    pub clusters: ClusterModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateProbs {
    pub posterior: Vec<f64>,
    pub thresholded: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: u8,
    /// Unnormalized mixture `Σ_c P̂_c · expert_c(x)`.
    pub combined: [f64; 2],
    pub gate: GateProbs,
    /// Filled-in values for missing features, by feature index.
    pub imputed: Vec<(usize, Imputation)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchPrediction {
    pub labels: Vec<u8>,
    pub combined: Vec<[f64; 2]>,
    /// `[m × K]` gate posterior.
    pub posterior: Vec<Vec<f64>>,
    /// `[m × K]` after thresholding.
    pub thresholded: Vec<Vec<f64>>,
}

/// Zero every entry below `h`; keep the rest unchanged (no renormalization).
pub fn apply_threshold(posterior: &[f64], h: f64) -> Vec<f64> {
    posterior.iter().map(|&p| if p >= h { p } else { 0.0 }).collect()
}

/// `Σ_c weight_c · output_c`.
pub fn mix(weights: &[f64], outputs: &[[f64; 2]]) -> [f64; 2] {
    weights.iter().zip(outputs).fold([0.0, 0.0], |acc, (w, o)| {
        [acc[0] + w * o[0], acc[1] + w * o[1]]
    })
}

/// Class with the larger mixed score; ties → 0.
pub fn decide(combined: [f64; 2]) -> u8 {
    u8::from(combined[1] > combined[0])
}

impl<E: Expert> GatedEnsemble<E> {
    pub fn new(experts: Vec<E>, bn: BayesianNetwork, threshold: f64, clusters: ClusterModel) -> Result<Self> {
        if experts.len() != bn.gate_states() || experts.len() != clusters.k {
            return Err(Error::Data(format!(
                "{} experts, {} gate states, {} clusters must agree",
                experts.len(),
                bn.gate_states(),
                clusters.k
            )));
        }
        if !(0.0..1.0).contains(&threshold) {
            return Err(Error::Config(format!("threshold must be in [0, 1), got {threshold}")));
        }
        Ok(GatedEnsemble { experts, bn, threshold, clusters })
    }

    pub fn feature_count(&self) -> usize {
        self.bn.feature_count()
    }

    pub fn k(&self) -> usize {
        self.experts.len()
    }

    pub fn gate_probs(&self, x: &[f64], missing: &[bool]) -> Result<GateProbs> {
        let posterior = self.bn.posterior_gate(x, missing)?;
        let thresholded = apply_threshold(&posterior, self.threshold);
        Ok(GateProbs { posterior, thresholded })
    }

    pub fn predict_one(&self, x: &[f64], missing: &[bool]) -> Result<Prediction> {
        let gate = self.gate_probs(x, missing)?;
        let weights = if gate.thresholded.iter().all(|&p| p == 0.0) {
            log::warn!("every gate probability fell below threshold {}; using the raw posterior", self.threshold);
            &gate.posterior
        } else {
            &gate.thresholded
        };

        // experts need a complete row: missing features take the
        // representative value of their most probable bin
        let mut row = x.to_vec();
        let mut imputed = Vec::new();
        for j in (0..x.len()).filter(|&j| missing[j]) {
            let imp = self.bn.impute(x, missing, j)?;
            row[j] = self.bn.discretizer.center(j, imp.state);
            imputed.push((j, imp));
        }

        let outputs: Vec<[f64; 2]> = self.experts.iter().map(|e| e.predict_proba(&row)).collect();
        let combined = mix(weights, &outputs);
        Ok(Prediction { label: decide(combined), combined, gate, imputed })
    }

    /// Row-wise [`Self::predict_one`] on complete rows.
    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<BatchPrediction> {
        let mask = vec![false; self.feature_count()];
        let mut out = BatchPrediction::default();
        for x in rows {
            let p = self.predict_one(x, &mask)?;
            out.labels.push(p.label);
            out.combined.push(p.combined);
            out.posterior.push(p.gate.posterior);
            out.thresholded.push(p.gate.thresholded);
        }
        Ok(out)
    }
}

/// Bundle manifest; each component is stored in its own JSON file next to it
/// and pinned by SHA-256.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub threshold: f64,
    pub k: usize,
    pub features: usize,
    pub feature_names: Vec<String>,
    pub bayesnet: ComponentRef,
    pub clusters: ComponentRef,
    pub experts: Vec<ComponentRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRef {
    pub file: String,
    pub sha256: String,
}

pub const BUNDLE_FORMAT: &str = "bnmoe-ensemble/1";
pub const MANIFEST_FILE: &str = "ensemble.json";

fn write_component(dir: &Path, file: &str, value: &impl Serialize) -> Result<ComponentRef> {
    let bytes = serde_json::to_vec_pretty(value)?;
    let path = dir.join(file);
    fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    Ok(ComponentRef { file: file.to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
}

fn read_component<T: serde::de::DeserializeOwned>(dir: &Path, c: &ComponentRef) -> Result<T> {
    let path = dir.join(&c.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    if digest != c.sha256 {
        return Err(Error::Data(format!("{} does not match its manifest checksum", path.display())));
    }
    Ok(serde_json::from_slice(&bytes)?)
}

impl GatedEnsemble<ExpertNet> {
    /// Write the manifest plus one file per component into `dir`; returns
    /// the manifest path.
    pub fn save_bundle(&self, dir: impl AsRef<Path>, feature_names: &[String]) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = BundleManifest {
            format: BUNDLE_FORMAT.into(),
            threshold: self.threshold,
            k: self.k(),
            features: self.feature_count(),
            feature_names: feature_names.to_vec(),
            bayesnet: write_component(dir, "bayesnet.json", &self.bn)?,
            clusters: write_component(dir, "clusters.json", &self.clusters)?,
            experts: self
                .experts
                .iter()
                .enumerate()
                .map(|(c, e)| write_component(dir, &format!("expert_{c}.json"), e))
                .collect::<Result<_>>()?,
        };
        let path = dir.join(MANIFEST_FILE);
        let bytes = serde_json::to_vec_pretty(&manifest)?;
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Load from a manifest file or a directory containing one.
    pub fn load_bundle(path: impl AsRef<Path>) -> Result<(Self, BundleManifest)> {
        let path = path.as_ref();
        let manifest_path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let dir = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let bytes = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: BundleManifest = serde_json::from_slice(&bytes)?;
        if manifest.format != BUNDLE_FORMAT {
            return Err(Error::Data(format!("unsupported bundle format {:?}", manifest.format)));
        }
        let bn: BayesianNetwork = read_component(&dir, &manifest.bayesnet)?;
        let clusters: ClusterModel = read_component(&dir, &manifest.clusters)?;
        let experts = manifest
            .experts
            .iter()
            .map(|c| read_component(&dir, c))
            .collect::<Result<Vec<ExpertNet>>>()?;
        let ens = GatedEnsemble::new(experts, bn, manifest.threshold, clusters)?;
        Ok((ens, manifest))
    }
}
