//! The ten protocol steps: join, train, perturb, prove and submit weights,
//! aggregate, prove and submit costs, verify, pay out.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{gen_data, read_dataset_dir};
use super::{AttackKind, Scenario, ScenarioError};
use crate::bounds::BoundSet;
use crate::circuits::{synthesize_cost_witness, synthesize_weight_witness, Witness};
use crate::client::{encode_normalized, ClientError, LocalModel};
use crate::dp::{build_noise_table, NoiseTable, PrivacyParams};
use crate::field::{fp_decode, fp_encode, CodecError, FieldElement, ScaledMatrix, SignMag};
use crate::ledger::{aggregate, ClientsContract, GenericParams, Ledger, TxRecord, TxStatus};
use crate::linreg::{matmul, normal_equations, Dataset, TrainedModel};
use crate::merkle::commit_dataset;

pub const DEPLOYER: &str = "deployer";

pub fn client_address(i: usize) -> String {
    format!("client_{}", i + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProofVerdict {
    Pass { evaluated: usize },
    Fail { check: String, label: String, evaluated: usize },
    Reverted { reason: String },
    LocalError { reason: String },
    NotSubmitted,
}

impl ProofVerdict {
    fn from_tx(tx: &TxRecord) -> Self {
        match &tx.outcome {
            TxStatus::Applied => ProofVerdict::Pass { evaluated: tx.evaluated },
            TxStatus::ProofRejected { check, label } => ProofVerdict::Fail {
                check: check.clone(),
                label: label.clone(),
                evaluated: tx.evaluated,
            },
            TxStatus::Reverted { reason } => ProofVerdict::Reverted { reason: reason.clone() },
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, ProofVerdict::Pass { .. })
    }

    /// Name of the failing check, if the verifier rejected the proof.
    pub fn check(&self) -> Option<&str> {
        match self {
            ProofVerdict::Fail { check, .. } => Some(check),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientReport {
    pub address: String,
    pub attack: Option<AttackKind>,
    pub weight: ProofVerdict,
    pub cost: ProofVerdict,
    /// Submitted noisy weights, decoded.
    pub w_noisy: Option<Vec<f64>>,
    /// Noise-free fixed-point weights, decoded.
    pub w: Option<Vec<f64>>,
    pub inverse_residual: Option<f64>,
    /// Claimed cost, decoded.
    pub cost_value: Option<f64>,
    /// Payout at scale `d`.
    pub incentive: Option<u128>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_ms: f64,
    pub join_ms: f64,
    pub train_ms: f64,
    pub prove_weight_ms: f64,
    pub verify_weight_ms: f64,
    pub prove_cost_ms: f64,
    pub verify_cost_ms: f64,
    pub incentivize_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCounts {
    pub weight: usize,
    pub cost: usize,
    pub weight_public: usize,
    pub cost_public: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub n_test: usize,
    pub admission_fee: u128,
    pub bounds: BoundSet,
    pub constraints: ConstraintCounts,
    /// Real-unit variance of a uniformly drawn table entry.
    pub noise_variance: f64,
    pub planted_beta: Option<Vec<f64>>,
    pub clients: Vec<ClientReport>,
    pub valid_count: usize,
    pub global_w: Option<Vec<f64>>,
    /// Mean of the accepted clients' noise-free weights.
    pub noise_free_global_w: Option<Vec<f64>>,
    /// Euclidean distance between the two aggregates.
    pub aggregation_deviation: Option<f64>,
    pub costs: Vec<(String, f64)>,
    pub incentives: Vec<(String, u128)>,
    pub incentives_total: u128,
    pub incentivize: Option<ProofVerdict>,
    pub final_balance: u128,
    pub final_block_hash: FieldElement,
    pub transactions: usize,
    pub timings: Timings,
}

impl RunReport {
    /// Copy with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        RunReport {
            timings: Timings::default(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Committed data, with the singular-inverse attacker duplicating `x1`.
fn committed_data(raw: &Dataset, d: u32, attack: Option<AttackKind>) -> Result<ScaledMatrix, ClientError> {
    let mut data = encode_normalized(raw, d)?;
    if attack == Some(AttackKind::SingularInverse) {
        for i in 0..data.rows() {
            let v = data.get(i, 0);
            data.set(i, 1, v);
        }
    }
    Ok(data)
}

/// Weights from `Z = I/n`, which cannot satisfy the residual check.
fn singular_model(data: ScaledMatrix) -> Result<LocalModel, ClientError> {
    let d = data.scale();
    let m = data.cols();
    let n = data.rows() as f64;
    let ds = Dataset::from_scaled(&data)?;
    let z: Vec<f64> = (0..m * m).map(|i| if i % (m + 1) == 0 { 1.0 / n } else { 0.0 }).collect();
    let (xtx, xty) = normal_equations(&ds);
    let w = matmul(&z, &xty, m, m, 1);
    let inverse_residual = crate::linreg::inverse_residual(&xtx, &z, m);
    Ok(LocalModel {
        z: ScaledMatrix::encode(m, m, &z, d)?,
        w: ScaledMatrix::encode(m, 1, &w, d)?,
        model: TrainedModel {
            w,
            z,
            residual: Vec::new(),
            inverse_residual,
        },
        data,
    })
}

struct WeightSubmission {
    w_noisy: ScaledMatrix,
    witness: Witness,
}

fn prove_weight(
    local: &LocalModel,
    root: FieldElement,
    block_hash: FieldElement,
    table: &NoiseTable,
    bounds: BoundSet,
    sc: &Scenario,
    attack: Option<AttackKind>,
) -> Result<WeightSubmission, ClientError> {
    let alg = sc.hash_alg;
    let params = local.weight_params(sc.d_l, alg)?;
    let (mut w_noisy, mut draws) = local.perturb(block_hash, table, alg)?;
    let mut local = std::borrow::Cow::Borrowed(local);
    match attack {
        Some(AttackKind::FakeWeight) => {
            let shifted = w_noisy.get(0, 0).checked_add(&fp_encode(0.5, sc.d)?).ok_or(CodecError::MagnitudeOverflow)?;
            w_noisy.set(0, 0, shifted);
        }
        Some(AttackKind::WrongNoise) => {
            let p = draws[0].p % (sc.d_l - 1) + 1;
            draws[0].p = p;
            draws[0].q = table.entry(p);
            let forged = local.w.get(0, 0).checked_add(&draws[0].q).ok_or(CodecError::MagnitudeOverflow)?;
            w_noisy.set(0, 0, forged);
        }
        Some(AttackKind::SkipNoise) => w_noisy = local.w.clone(),
        Some(AttackKind::BadInverse) => {
            let mut lm = local.into_owned();
            let scaled: Vec<f64> = lm.z.decode().iter().map(|v| v * 1.05).collect();
            lm.z = ScaledMatrix::encode(lm.z.rows(), lm.z.cols(), &scaled, sc.d)?;
            local = std::borrow::Cow::Owned(lm);
        }
        Some(AttackKind::FlipData) => {
            let mut lm = local.into_owned();
            let col0 = lm.data.column(0);
            let j = (1..col0.len()).find(|&j| col0[j] != col0[0]).unwrap_or(1);
            lm.data.set(0, 0, col0[j]);
            lm.data.set(j, 0, col0[0]);
            local = std::borrow::Cow::Owned(lm);
        }
        _ => {}
    }
    let (st, pv) = local.weight_inputs(root, table, block_hash, &w_noisy, draws, bounds);
    let (witness, _) = synthesize_weight_witness(&params, &st, &pv)?;
    Ok(WeightSubmission { w_noisy, witness })
}

struct CostSubmission {
    cost: u128,
    witness: Witness,
}

fn prove_cost(
    local: &LocalModel,
    root: FieldElement,
    test: &ScaledMatrix,
    root_test: FieldElement,
    eps_w: u128,
    sc: &Scenario,
    attack: Option<AttackKind>,
) -> Result<CostSubmission, ClientError> {
    let params = local.cost_params(test.rows(), sc.hash_alg)?;
    let substitute;
    let used_test = if attack == Some(AttackKind::SwappedTestSet) {
        // The client's own first rows stand in for the shared test set.
        let m = local.data.cols();
        let rows = test.rows().min(local.data.rows());
        let entries = local.data.entries()[..rows * m].to_vec();
        substitute = ScaledMatrix::new(rows, m, entries, local.data.scale())?;
        &substitute
    } else {
        test
    };
    let (mut st, pv) = local.cost_inputs(root, used_test, root_test, eps_w)?;
    if attack == Some(AttackKind::ForgedCost) {
        st.cost = if st.cost > 0 { st.cost - 1 } else { 1 };
    }
    let (witness, _) = synthesize_cost_witness(&params, &st, &pv)?;
    Ok(CostSubmission { cost: st.cost, witness })
}

fn load_data(sc: &Scenario) -> Result<(Vec<Dataset>, Dataset, Option<Vec<f64>>), ScenarioError> {
    match &sc.dataset_path {
        Some(dir) => {
            let (clients, test) = read_dataset_dir(dir, sc.clients)?;
            for (i, ds) in clients.iter().enumerate() {
                if ds.k() != sc.k || ds.n() != sc.n {
                    return Err(ScenarioError::Config(format!(
                        "client {} has k = {}, n = {}, scenario says k = {}, n = {}",
                        i + 1,
                        ds.k(),
                        ds.n(),
                        sc.k,
                        sc.n
                    )));
                }
            }
            if test.k() != sc.k || test.n() != sc.n_test() {
                return Err(ScenarioError::Config(format!(
                    "test set has k = {}, n = {}, expected n_test = {}",
                    test.k(),
                    test.n(),
                    sc.n_test()
                )));
            }
            Ok((clients, test, None))
        }
        None => {
            let g = gen_data(sc.k, sc.n, sc.n_test(), sc.clients, sc.seed)?;
            Ok((g.clients, g.test, Some(g.beta)))
        }
    }
}

fn local_error(e: impl std::fmt::Display) -> ProofVerdict {
    ProofVerdict::LocalError { reason: e.to_string() }
}

pub fn run(sc: &Scenario) -> Result<RunReport, ScenarioError> {
    sc.validate()?;
    let started = Instant::now();
    let mut timings = Timings::default();
    let (k, n, d, alg) = (sc.k, sc.n, sc.d, sc.hash_alg);

    let t = Instant::now();
    let (raw_clients, raw_test, planted_beta) = load_data(sc)?;
    let table = build_noise_table(&PrivacyParams::new(sc.epsilon, sc.d_l, d)).map_err(ClientError::from)?;
    let bounds = BoundSet::defaults(k, n, d)
        .with_overrides(&sc.bounds, d)
        .map_err(|e| ScenarioError::Config(format!("bounds: {e}")))?;
    if !bounds.fits_comparators() {
        return Err(ScenarioError::Config("a bound exceeds the comparator width".into()));
    }
    let test = encode_normalized(&raw_test, d)?;
    let root_test = commit_dataset(&test, alg).map_err(ClientError::from)?.root;
    let generic = GenericParams {
        k,
        n,
        n_test: sc.n_test(),
        d,
        d_l: sc.d_l,
        admission_fee: sc.admission_fee(),
        root_test,
        table: table.entries.clone(),
        bounds,
        hash_alg: alg,
    };
    let contract = ClientsContract::deploy(generic, DEPLOYER.into())?;
    let constraints = ConstraintCounts {
        weight: contract.weight_circuit().num_constraints(),
        cost: contract.cost_circuit().num_constraints(),
        weight_public: contract.weight_circuit().num_public(),
        cost_public: contract.cost_circuit().num_public(),
    };
    let mut ledger = Ledger::new(sc.seed, contract);
    timings.setup_ms = ms(t);

    let attacks: Vec<Option<AttackKind>> = (0..sc.clients).map(|i| sc.attack_on(i)).collect();
    let mut reports: Vec<ClientReport> = (0..sc.clients)
        .map(|i| ClientReport {
            address: client_address(i),
            attack: attacks[i],
            weight: ProofVerdict::NotSubmitted,
            cost: ProofVerdict::NotSubmitted,
            w_noisy: None,
            w: None,
            inverse_residual: None,
            cost_value: None,
            incentive: None,
        })
        .collect();

    // Step 1: commit and join.
    let t = Instant::now();
    let committed: Vec<Result<(ScaledMatrix, FieldElement), ClientError>> = raw_clients
        .par_iter()
        .zip(&attacks)
        .map(|(raw, &attack)| {
            let data = committed_data(raw, d, attack)?;
            let root = commit_dataset(&data, alg)?.root;
            Ok((data, root))
        })
        .collect();
    for (i, c) in committed.iter().enumerate() {
        match c {
            Ok((_, root)) => {
                let tx = ledger.register(&client_address(i), *root, sc.admission_fee());
                if let TxStatus::Reverted { reason } = tx.outcome {
                    reports[i].weight = ProofVerdict::Reverted { reason };
                }
            }
            Err(e) => reports[i].weight = local_error(e),
        }
    }
    timings.join_ms = ms(t);

    // Step 2: local training on the committed fixed-point data.
    let t = Instant::now();
    let models: Vec<Option<Result<LocalModel, ClientError>>> = committed
        .into_par_iter()
        .zip(&attacks)
        .map(|(c, &attack)| {
            let (data, _) = c.ok()?;
            Some(if attack == Some(AttackKind::SingularInverse) {
                singular_model(data)
            } else {
                LocalModel::from_encoded(data)
            })
        })
        .collect();
    let models: Vec<Option<LocalModel>> = models
        .into_iter()
        .enumerate()
        .map(|(i, m)| match m {
            Some(Ok(m)) => {
                reports[i].w = Some(m.w.decode());
                reports[i].inverse_residual = Some(m.model.inverse_residual);
                Some(m)
            }
            Some(Err(e)) => {
                reports[i].weight = local_error(e);
                None
            }
            None => None,
        })
        .collect();
    timings.train_ms = ms(t);

    // Steps 3-4: perturb with the registration block hash and prove.
    let t = Instant::now();
    let state = ledger.state().clone();
    let weight_subs: Vec<Option<Result<WeightSubmission, ClientError>>> = models
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let local = m.as_ref()?;
            let rec = state.clients.get(&client_address(i))?;
            Some(prove_weight(local, rec.rt_train, rec.hash_bc, &table, bounds, sc, attacks[i]))
        })
        .collect();
    timings.prove_weight_ms = ms(t);

    // Steps 5-6: verify on the ledger, which aggregates accepted weights.
    let t = Instant::now();
    for (i, sub) in weight_subs.iter().enumerate() {
        match sub {
            Some(Ok(s)) => {
                let tx = ledger.upload_beta(&client_address(i), &s.w_noisy, &s.witness);
                reports[i].weight = ProofVerdict::from_tx(&tx);
                reports[i].w_noisy = Some(s.w_noisy.decode());
            }
            Some(Err(e)) => reports[i].weight = local_error(e),
            None => {}
        }
    }
    timings.verify_weight_ms = ms(t);

    // Steps 7-8: cost on the shared test set.
    let t = Instant::now();
    let state = ledger.state().clone();
    let eps_w = state.generic.bounds.eps_w;
    let cost_subs: Vec<Option<Result<CostSubmission, ClientError>>> = models
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let local = m.as_ref()?;
            let rec = state.clients.get(&client_address(i)).filter(|r| r.betaproof_valid)?;
            Some(prove_cost(local, rec.rt_train, &test, root_test, eps_w, sc, attacks[i]))
        })
        .collect();
    timings.prove_cost_ms = ms(t);

    // Step 9: verify costs.
    let t = Instant::now();
    for (i, sub) in cost_subs.iter().enumerate() {
        match sub {
            Some(Ok(s)) => {
                let tx = ledger.upload_cost(&client_address(i), s.cost, &s.witness);
                reports[i].cost = ProofVerdict::from_tx(&tx);
                reports[i].cost_value = Some(fp_decode(SignMag::new(false, s.cost), 2 * d));
            }
            Some(Err(e)) => reports[i].cost = local_error(e),
            None => {}
        }
    }
    timings.verify_cost_ms = ms(t);

    // Step 10: payout.
    let t = Instant::now();
    let incentivize = if ledger.state().cost_list.is_empty() {
        None
    } else {
        Some(ProofVerdict::from_tx(&ledger.incentivize(DEPLOYER)))
    };
    timings.incentivize_ms = ms(t);

    let st = ledger.state();
    let incentives = st.incentives.clone().unwrap_or_default();
    for (addr, v) in &incentives {
        if let Some(r) = reports.iter_mut().find(|r| &r.address == addr) {
            r.incentive = Some(*v);
        }
    }
    let accepted: Vec<&ScaledMatrix> = models
        .iter()
        .enumerate()
        .filter(|(i, _)| st.clients.get(&client_address(*i)).is_some_and(|r| r.betaproof_valid))
        .filter_map(|(_, m)| m.as_ref().map(|m| &m.w))
        .collect();
    let noise_free = aggregate(&accepted).map(|m| m.decode());
    let global_w = st.global_w.as_ref().map(ScaledMatrix::decode);
    let aggregation_deviation = match (&global_w, &noise_free) {
        (Some(g), Some(f)) => Some(g.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()),
        _ => None,
    };
    timings.total_ms = ms(started);

    Ok(RunReport {
        scenario: sc.clone(),
        n_test: sc.n_test(),
        admission_fee: sc.admission_fee(),
        bounds,
        constraints,
        noise_variance: table.exact_variance(),
        planted_beta,
        clients: reports,
        valid_count: st.valid_count,
        global_w,
        noise_free_global_w: noise_free,
        aggregation_deviation,
        costs: st
            .cost_list
            .iter()
            .map(|(a, c)| (a.clone(), fp_decode(SignMag::new(false, *c), 2 * d)))
            .collect(),
        incentives_total: incentives.iter().map(|(_, v)| v).sum(),
        incentives,
        incentivize,
        final_balance: st.balance,
        final_block_hash: ledger.block_hash(),
        transactions: ledger.log().len(),
        timings,
    })
}
