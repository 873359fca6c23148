//! On-disk configuration documents.
//!
//! File naming inside a bundle directory:
//! `node-<id>.json` simulated QKD pair, `kmstn-<id>.json` trusted node,
//! `sae-<id>.json` SAE client, `edges.json` overlay links plus simulation
//! settings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use keymesh_core::{KmeId, SaeId};

use crate::RoutingError;

/// TLS material references for one process.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TlsPaths {
    pub ca_cert: PathBuf,
    pub cert: PathBuf,
    pub key: PathBuf,
}

/// Parameters of one simulated QKD link.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinkProfileConfig {
    pub mean_skr_bps: f64,
    #[serde(default = "default_block_size_bits")]
    pub block_size_bits: u32,
    #[serde(default = "default_blocks_per_burst")]
    pub blocks_per_burst: u32,
    #[serde(default = "default_buffer_capacity")]
    pub buffer_capacity_keys: u32,
    /// Median of the lognormal per-request service latency.
    #[serde(default = "default_latency_median_ms")]
    pub latency_median_ms: f64,
    /// Shape parameter (sigma) of the lognormal service latency.
    #[serde(default = "default_latency_sigma")]
    pub latency_sigma: f64,
}

fn default_block_size_bits() -> u32 {
    256
}
fn default_blocks_per_burst() -> u32 {
    8
}
fn default_buffer_capacity() -> u32 {
    64
}
fn default_latency_median_ms() -> f64 {
    5.0
}
fn default_latency_sigma() -> f64 {
    0.25
}

/// Fault injection for tests and drills.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    /// dec_keys responses return corrupted key material.
    CorruptDecMaterial,
}

/// One side of a simulated QKD pair.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PairSideConfig {
    pub kme_id: KmeId,
    pub sae_id: SaeId,
    /// host:port the side's key-delivery API listens on.
    pub listen: String,
}

/// A simulated QKD node pair (`node-*.json`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QkdPairConfig {
    pub pair_id: String,
    pub alice: PairSideConfig,
    pub bob: PairSideConfig,
    pub profile: LinkProfileConfig,
    #[serde(default)]
    pub seed: u64,
    /// Keys present in the buffer at startup.
    #[serde(default)]
    pub initial_fill: u32,
    /// Start with the generator paused.
    #[serde(default)]
    pub paused: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls: Option<TlsPaths>,
}

/// A southbound attachment of a trusted node to one side of a QKD pair.
/// `master_sae_id` is the QKD-side SAE of the attached side (the owner of
/// keys popped here); `slave_sae_id` is the opposite side's SAE.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct AttachedKme {
    pub kme_id: KmeId,
    /// Base URL of the attached side's key-delivery API.
    pub endpoint: String,
    pub master_sae_id: SaeId,
    pub slave_sae_id: SaeId,
}

/// A trusted-node server instance (`kmstn-*.json`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KmstnConfig {
    pub kmstn_id: String,
    pub host: String,
    pub port: u16,
    /// Port for PQC key exchange.
    pub pqc_port: u16,
    #[serde(default)]
    pub attached_kmes: Vec<AttachedKme>,
    #[serde(default)]
    pub bound_master_saes: Vec<SaeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls: Option<TlsPaths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_secret: Option<PathBuf>,
    /// Extension names this node implements (mandatory extensions outside
    /// this set are refused).
    #[serde(default)]
    pub supported_extensions: Vec<String>,
}

/// An SAE client profile (`sae-*.json`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SaeConfig {
    pub sae_id: SaeId,
    /// The trusted node this SAE is homed at.
    pub kmstn_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls: Option<TlsPaths>,
}

/// One overlay link between trusted nodes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EdgeConfig {
    pub a: String,
    pub b: String,
    pub qkd_link: bool,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

/// Deployment-wide simulation settings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimSettings {
    /// Factor by which simulated time runs faster than wall time.
    #[serde(default = "default_time_scale")]
    pub time_scale: f64,
    /// Serve plain HTTP instead of mutually-authenticated TLS.
    #[serde(default)]
    pub insecure_sim: bool,
}

fn default_time_scale() -> f64 {
    1.0
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            time_scale: 1.0,
            insecure_sim: false,
        }
    }
}

/// The `edges.json` document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EdgesFile {
    pub edges: Vec<EdgeConfig>,
    #[serde(default)]
    pub sim: SimSettings,
}

/// A fully loaded configuration bundle.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub pairs: Vec<QkdPairConfig>,
    pub kmstns: Vec<KmstnConfig>,
    pub saes: Vec<SaeConfig>,
    pub edges: Vec<EdgeConfig>,
    pub sim: SimSettings,
}

impl Bundle {
    pub fn kmstn(&self, id: &str) -> Option<&KmstnConfig> {
        self.kmstns.iter().find(|k| k.kmstn_id == id)
    }

    pub fn sae(&self, id: &SaeId) -> Option<&SaeConfig> {
        self.saes.iter().find(|s| &s.sae_id == id)
    }

    pub fn pair(&self, id: &str) -> Option<&QkdPairConfig> {
        self.pairs.iter().find(|p| p.pair_id == id)
    }

    /// Default state directory for a node without an explicit one.
    pub fn state_dir_for(&self, config: &KmstnConfig) -> PathBuf {
        config
            .state_dir
            .clone()
            .unwrap_or_else(|| self.dir.join("state").join(&config.kmstn_id))
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for pair in &self.pairs {
            write_json(&dir.join(format!("node-{}.json", pair.pair_id)), pair)?;
        }
        for kmstn in &self.kmstns {
            write_json(&dir.join(format!("kmstn-{}.json", kmstn.kmstn_id)), kmstn)?;
        }
        for sae in &self.saes {
            write_json(&dir.join(format!("sae-{}.json", sae.sae_id)), sae)?;
        }
        write_json(
            &dir.join("edges.json"),
            &EdgesFile {
                edges: self.edges.clone(),
                sim: self.sim.clone(),
            },
        )?;
        Ok(())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)
}

/// Reads every configuration document in `dir`, classified by filename.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Bundle, RoutingError> {
    let dir = dir.as_ref();
    let mut bundle = Bundle {
        dir: dir.to_path_buf(),
        pairs: Vec::new(),
        kmstns: Vec::new(),
        saes: Vec::new(),
        edges: Vec::new(),
        sim: SimSettings::default(),
    };

    let entries = fs::read_dir(dir)
        .map_err(|e| RoutingError::Config(format!("cannot read bundle {}: {e}", dir.display())))?;
    let mut saw_edges = false;
    for entry in entries {
        let path = entry
            .map_err(|e| RoutingError::Config(e.to_string()))?
            .path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if !name.ends_with(".json") {
            continue;
        }
        if name.starts_with("node-") {
            bundle.pairs.push(read_json(&path)?);
        } else if name.starts_with("kmstn-") {
            bundle.kmstns.push(read_json(&path)?);
        } else if name.starts_with("sae-") {
            bundle.saes.push(read_json(&path)?);
        } else if name == "edges.json" {
            let edges: EdgesFile = read_json(&path)?;
            bundle.edges = edges.edges;
            bundle.sim = edges.sim;
            saw_edges = true;
        }
    }
    if !saw_edges {
        return Err(RoutingError::Config(format!(
            "bundle {} has no edges.json",
            dir.display()
        )));
    }
    bundle.pairs.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    bundle.kmstns.sort_by(|a, b| a.kmstn_id.cmp(&b.kmstn_id));
    bundle
        .saes
        .sort_by(|a, b| a.sae_id.as_str().cmp(b.sae_id.as_str()));
    Ok(bundle)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, RoutingError> {
    let bytes = fs::read(path)
        .map_err(|e| RoutingError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| RoutingError::Config(format!("{}: {e}", path.display())))
}
