//! Service and CLI configuration (TOML).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use troubleshoot_core::curation::{DEFAULT_INFORMATIVENESS_THRESHOLD, DEFAULT_INFORMATIVENESS_TOP_K};
use troubleshoot_core::fault_analysis::{TemperatureGrid, DEFAULT_RAG_TEMPERATURE};
use troubleshoot_core::mock::{MockEmbedder, MockGenerator};
use troubleshoot_core::retrieval::{DEFAULT_CANDIDATE_ORDER, DEFAULT_RANKERS, DEFAULT_TOKEN_BUDGET};
use troubleshoot_core::rlrf::{DEFAULT_PATHOLOGY_THRESHOLD, DEFAULT_P_GROUNDTRUTH, DEFAULT_TAU};
use troubleshoot_core::routing::DEFAULT_ROUTE_K;
use troubleshoot_core::{Embedder, Generator, LabelSet};

use crate::cache::{CachedEmbedder, EmbeddingCache};
use crate::error::{AppError, Result};
use crate::http::{probe_url, BackendHealth, ClientOptions, HttpEmbedder, HttpGenerator};

/// Prefix of environment variables overriding scalar config keys,
/// e.g. `TROUBLESHOOT_CANDIDATE_ORDER=500`.
pub const ENV_PREFIX: &str = "TROUBLESHOOT_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderSpec {
    Mock {
        #[serde(default = "default_dimension")]
        dimension: usize,
        seed: u64,
    },
    Http {
        url: String,
        model: String,
        #[serde(default)]
        dimension: Option<usize>,
        #[serde(default)]
        client: ClientOptions,
    },
}

fn default_dimension() -> usize {
    troubleshoot_core::backend::DEFAULT_DIMENSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Mock {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        degeneration_rate: f64,
        /// Answer plain fault-analysis prompts from the corpus reports.
        #[serde(default = "yes")]
        memory: bool,
        #[serde(default = "yes")]
        prefill: bool,
    },
    Http {
        url: String,
        model: String,
        #[serde(default = "yes")]
        prefill: bool,
        #[serde(default)]
        client: ClientOptions,
    },
}

fn yes() -> bool {
    true
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::Mock {
            seed: 0,
            degeneration_rate: 0.0,
            memory: true,
            prefill: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Defaults {
    pub candidate_order: usize,
    pub route_k: usize,
    pub token_budget: usize,
    pub grid: TemperatureGrid,
    pub preference_grid: TemperatureGrid,
    pub tau: f64,
    pub p_groundtruth: f64,
    pub pathology_threshold: f64,
    pub informativeness_threshold: f64,
    pub informativeness_top_k: usize,
    pub rag_temperature: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            candidate_order: DEFAULT_CANDIDATE_ORDER,
            route_k: DEFAULT_ROUTE_K,
            token_budget: DEFAULT_TOKEN_BUDGET,
            grid: TemperatureGrid::response_ranking(),
            preference_grid: TemperatureGrid::preference(),
            tau: DEFAULT_TAU,
            p_groundtruth: DEFAULT_P_GROUNDTRUTH,
            pathology_threshold: DEFAULT_PATHOLOGY_THRESHOLD,
            informativeness_threshold: DEFAULT_INFORMATIVENESS_THRESHOLD,
            informativeness_top_k: DEFAULT_INFORMATIVENESS_TOP_K,
            rag_temperature: DEFAULT_RAG_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    /// Directory with `tickets.jsonl` and `faults.jsonl`.
    pub corpus: PathBuf,
    /// Directory of per-ranker index files; built when missing.
    pub index: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub listen: String,
    pub auth_token: Option<String>,
    pub seed: u64,
    pub labels: Vec<String>,
    pub catch_all: String,
    /// Optional closed set of root-cause labels.
    pub root_causes: Option<Vec<String>>,
    pub embedders: Vec<EmbedderSpec>,
    pub generator: GeneratorSpec,
    pub defaults: Defaults,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let labels = LabelSet::default();
        ServiceConfig {
            corpus: PathBuf::from("corpus"),
            index: None,
            cache: None,
            listen: "127.0.0.1:8080".into(),
            auth_token: None,
            seed: 0,
            catch_all: labels.catch_all().as_str().to_string(),
            labels: labels.labels().to_vec(),
            root_causes: None,
            embedders: (1..=DEFAULT_RANKERS as u64)
                .map(|seed| EmbedderSpec::Mock {
                    dimension: default_dimension(),
                    seed,
                })
                .collect(),
            generator: GeneratorSpec::default(),
            defaults: Defaults::default(),
        }
    }
}

fn parse_env<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| AppError::Config(format!("{ENV_PREFIX}{key}: cannot parse `{raw}`")))
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ServiceConfig = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&crate::io::read_text(path)?)
    }

    /// Applies `TROUBLESHOOT_<KEY>` overrides for scalar keys. Unknown keys
    /// with the prefix are rejected so typos do not pass silently.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<()> {
        for (name, raw) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let d = &mut self.defaults;
            match key {
                "CONFIG" => {}
                "CORPUS" => self.corpus = PathBuf::from(raw),
                "INDEX" => self.index = Some(PathBuf::from(raw)),
                "CACHE" => self.cache = Some(PathBuf::from(raw)),
                "LISTEN" => self.listen = raw,
                "AUTH_TOKEN" => self.auth_token = Some(raw),
                "SEED" => self.seed = parse_env(key, &raw)?,
                "CANDIDATE_ORDER" => d.candidate_order = parse_env(key, &raw)?,
                "ROUTE_K" => d.route_k = parse_env(key, &raw)?,
                "TOKEN_BUDGET" => d.token_budget = parse_env(key, &raw)?,
                "TAU" => d.tau = parse_env(key, &raw)?,
                "P_GROUNDTRUTH" => d.p_groundtruth = parse_env(key, &raw)?,
                "PATHOLOGY_THRESHOLD" => d.pathology_threshold = parse_env(key, &raw)?,
                "INFORMATIVENESS_THRESHOLD" => d.informativeness_threshold = parse_env(key, &raw)?,
                "INFORMATIVENESS_TOP_K" => d.informativeness_top_k = parse_env(key, &raw)?,
                "RAG_TEMPERATURE" => d.rag_temperature = parse_env(key, &raw)?,
                other => return Err(AppError::Config(format!("unknown variable {ENV_PREFIX}{other}"))),
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AppError::Config(m.into()));
        let d = &self.defaults;
        if self.embedders.is_empty() {
            return bad("at least one embedder (rn >= 1) is required");
        }
        if d.candidate_order == 0 || d.route_k == 0 || d.token_budget == 0 || d.informativeness_top_k == 0 {
            return bad("candidate_order, route_k, token_budget and informativeness_top_k must be >= 1");
        }
        if d.route_k > d.candidate_order {
            return bad("route_k must not exceed candidate_order");
        }
        d.grid.validate()?;
        d.preference_grid.validate()?;
        if d.tau.is_nan() || d.tau < 0.0 {
            return bad("tau must be >= 0");
        }
        if !(0.0..=1.0).contains(&d.p_groundtruth) {
            return bad("p_groundtruth must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&d.pathology_threshold) {
            return bad("pathology_threshold must be in [0, 1]");
        }
        if d.informativeness_threshold.is_nan() || d.informativeness_threshold < 0.0 {
            return bad("informativeness_threshold must be >= 0");
        }
        if !(d.rag_temperature >= 0.0 && d.rag_temperature.is_finite()) {
            return bad("rag_temperature must be >= 0");
        }
        for e in &self.embedders {
            if let EmbedderSpec::Mock { dimension, .. } = e {
                if *dimension < 2 {
                    return bad("mock embedder dimension must be >= 2");
                }
            }
        }
        if let GeneratorSpec::Mock { degeneration_rate, .. } = &self.generator {
            if !(0.0..=1.0).contains(degeneration_rate) {
                return bad("degeneration_rate must be in [0, 1]");
            }
        }
        self.label_set()?;
        Ok(())
    }

    pub fn label_set(&self) -> Result<LabelSet> {
        Ok(LabelSet::new(self.labels.clone(), &self.catch_all)?)
    }

    pub fn build_embedders(&self) -> Result<Vec<Arc<dyn Embedder>>> {
        let cache = match &self.cache {
            Some(p) => Some(Arc::new(EmbeddingCache::open(p)?)),
            None => None,
        };
        self.embedders
            .iter()
            .map(|spec| {
                let e: Arc<dyn Embedder> = match spec {
                    EmbedderSpec::Mock { dimension, seed } => Arc::new(
                        MockEmbedder::new(*dimension, *seed).map_err(troubleshoot_core::Error::from)?,
                    ),
                    EmbedderSpec::Http {
                        url,
                        model,
                        dimension,
                        client,
                    } => Arc::new(
                        HttpEmbedder::connect(url, model, *dimension, client.clone())
                            .map_err(troubleshoot_core::Error::from)?,
                    ),
                };
                Ok(match &cache {
                    Some(c) => Arc::new(CachedEmbedder::new(e, c.clone())) as Arc<dyn Embedder>,
                    None => e,
                })
            })
            .collect()
    }

    /// `memory` supplies (ticket text, report text) pairs for a mock generator.
    pub fn build_generator(&self, memory: impl FnOnce() -> Vec<(String, String)>) -> Arc<dyn Generator> {
        match &self.generator {
            GeneratorSpec::Mock {
                seed,
                degeneration_rate,
                memory: use_memory,
                prefill,
            } => {
                let mut g = MockGenerator::new(*seed)
                    .with_catch_all(self.catch_all.clone())
                    .with_degeneration_rate(*degeneration_rate);
                if *use_memory {
                    g = g.with_memory(memory());
                }
                if !prefill {
                    g = g.without_prefill();
                }
                Arc::new(g)
            }
            GeneratorSpec::Http {
                url,
                model,
                prefill,
                client,
            } => Arc::new(HttpGenerator::new(url, model, *prefill, client.clone())),
        }
    }
}

impl ServiceConfig {
    /// Probes every remote backend; mock backends are always healthy.
    pub fn probe_backends(&self) -> Vec<BackendHealth> {
        let timeout = std::time::Duration::from_secs(2);
        let check = |name: String, url: Option<String>| {
            let res = url.map_or(Ok(()), |u| probe_url(&u, timeout));
            BackendHealth {
                name,
                ok: res.is_ok(),
                error: res.err(),
            }
        };
        let mut out: Vec<BackendHealth> = self
            .embedders
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let url = match e {
                    EmbedderSpec::Mock { .. } => None,
                    EmbedderSpec::Http { url, .. } => Some(format!("{}/info", url.trim_end_matches('/'))),
                };
                check(format!("embedder-{i}"), url)
            })
            .collect();
        let url = match &self.generator {
            GeneratorSpec::Mock { .. } => None,
            GeneratorSpec::Http { url, .. } => Some(format!("{}/", url.trim_end_matches('/'))),
        };
        out.push(check("generator".into(), url));
        out
    }
}
