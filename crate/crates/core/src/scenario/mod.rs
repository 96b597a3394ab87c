//! End-to-end protocol runs over synthetic or CSV data, with optional
//! misbehaving clients, and their JSON reports.

pub mod data;
pub mod run;
pub mod summary;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::BoundOverrides;
use crate::client::ClientError;
use crate::hash::HashAlg;
use crate::ledger::ContractError;

pub use data::{gen_data, read_csv, read_dataset_dir, write_csv, write_dataset_dir, GeneratedData};
pub use run::{run, ClientReport, ProofVerdict, RunReport, Timings};
pub use summary::{summarize, Fit, RunPoint, Summary};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Contract(#[from] ContractError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// Swaps two committed feature values before proving.
    FlipData,
    /// Adds 0.5 to the intercept after noising.
    FakeWeight,
    /// Uses a table entry other than the hash-derived one.
    WrongNoise,
    /// Submits the noise-free weights.
    SkipNoise,
    /// Scales the approximate inverse by 1.05.
    BadInverse,
    /// Commits data with a duplicated feature column and proves with `I/n`.
    SingularInverse,
    /// Claims a cost one unit lower than the true one.
    ForgedCost,
    /// Proves the cost on a test set other than the committed one.
    SwappedTestSet,
}

impl AttackKind {
    pub const ALL: [AttackKind; 8] = [
        AttackKind::FlipData,
        AttackKind::FakeWeight,
        AttackKind::WrongNoise,
        AttackKind::SkipNoise,
        AttackKind::BadInverse,
        AttackKind::SingularInverse,
        AttackKind::ForgedCost,
        AttackKind::SwappedTestSet,
    ];

    /// The check that rejects this attack.
    pub fn expected_check(self) -> &'static str {
        match self {
            AttackKind::FlipData => "merkle_root",
            AttackKind::FakeWeight | AttackKind::SkipNoise => "noisy_weight",
            AttackKind::WrongNoise => "noise_derivation",
            AttackKind::BadInverse | AttackKind::SingularInverse => "inverse_residual",
            AttackKind::ForgedCost => "cost",
            AttackKind::SwappedTestSet => "merkle_root_test",
        }
    }

    pub fn targets_cost(self) -> bool {
        matches!(self, AttackKind::ForgedCost | AttackKind::SwappedTestSet)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attack {
    /// Zero-based client index.
    pub client: usize,
    pub kind: AttackKind,
}

fn default_d() -> u32 {
    5
}

fn default_d_l() -> usize {
    1000
}

fn default_epsilon() -> f64 {
    1.0
}

fn default_alg() -> HashAlg {
    HashAlg::PoseidonLite
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub k: usize,
    pub n: usize,
    /// Defaults to `ceil(0.1 n)`.
    #[serde(default)]
    pub n_test: Option<usize>,
    #[serde(default = "default_d")]
    pub d: u32,
    #[serde(default = "default_d_l")]
    pub d_l: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub clients: usize,
    /// At scale `d`; defaults to `10 * 10^d`.
    #[serde(default)]
    pub admission_fee: Option<u128>,
    #[serde(default)]
    pub bounds: BoundOverrides,
    #[serde(default = "default_alg")]
    pub hash_alg: HashAlg,
    #[serde(default)]
    pub seed: u64,
    /// Directory holding `client_1.csv ..` and `test.csv`.
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    #[serde(default)]
    pub attacks: Vec<Attack>,
}

impl Scenario {
    pub fn new(k: usize, n: usize, clients: usize, seed: u64) -> Self {
        Scenario {
            k,
            n,
            n_test: None,
            d: default_d(),
            d_l: default_d_l(),
            epsilon: default_epsilon(),
            clients,
            admission_fee: None,
            bounds: BoundOverrides::default(),
            hash_alg: default_alg(),
            seed,
            dataset_path: None,
            attacks: Vec::new(),
        }
    }

    pub fn n_test(&self) -> usize {
        self.n_test.unwrap_or_else(|| self.n.div_ceil(10))
    }

    pub fn admission_fee(&self) -> u128 {
        self.admission_fee
            .unwrap_or_else(|| 10 * crate::field::pow10(self.d))
    }

    pub fn attack_on(&self, client: usize) -> Option<AttackKind> {
        self.attacks.iter().find(|a| a.client == client).map(|a| a.kind)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Config(m));
        if self.clients < 1 {
            return bad("clients must be at least 1".into());
        }
        if self.k < 1 || self.n < self.k + 2 {
            return bad(format!("need k >= 1 and n >= k + 2, got k = {}, n = {}", self.k, self.n));
        }
        if self.n_test() < 2 {
            return bad("n_test must be at least 2".into());
        }
        if self.d > crate::circuits::MAX_DECIMALS {
            return bad(format!("d must be at most {}", crate::circuits::MAX_DECIMALS));
        }
        if self.d_l < 2 || self.d_l > crate::circuits::MAX_TABLE {
            return bad(format!("d_L must be in 2..={}", crate::circuits::MAX_TABLE));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.attacks {
            if a.client >= self.clients {
                return bad(format!("attack on client {} but only {} clients", a.client, self.clients));
            }
            if !seen.insert(a.client) {
                return bad(format!("client {} has more than one attack", a.client));
            }
            if a.kind == AttackKind::SingularInverse && self.k < 2 {
                return bad("singular-inverse needs k >= 2".into());
            }
            if a.kind == AttackKind::WrongNoise && self.d_l < 3 {
                return bad("wrong-noise needs d_L >= 3".into());
            }
        }
        Ok(())
    }
}
