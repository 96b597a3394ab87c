use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::chain::{tx_digest, Chain};
use super::incentives::{compute_incentives, IncentiveError};
use crate::bounds::BoundSet;
use crate::circuits::{
    build_cost_circuit, build_weight_circuit, cs_verify, CircuitError, ConstraintSystem, CostCircuitParams, CostStatement,
    Verdict, WeightCircuitParams, WeightStatement, Witness,
};
use crate::field::{div_round_half_away, FieldElement, ScaledMatrix, SignMag};
use crate::hash::HashAlg;

pub type Address = String;

/// Protocol parameters fixed at deployment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericParams {
    pub k: usize,
    pub n: usize,
    pub n_test: usize,
    pub d: u32,
    pub d_l: usize,
    /// At scale `d`.
    pub admission_fee: u128,
    pub root_test: FieldElement,
    pub table: Vec<SignMag>,
    pub bounds: BoundSet,
    pub hash_alg: HashAlg,
}

impl GenericParams {
    pub fn weight_params(&self) -> Result<WeightCircuitParams, CircuitError> {
        WeightCircuitParams::new(self.k, self.n, self.d, self.d_l, self.hash_alg)
    }

    pub fn cost_params(&self) -> Result<CostCircuitParams, CircuitError> {
        CostCircuitParams::new(self.k, self.n, self.n_test, self.d, self.hash_alg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientRecord {
    pub address: Address,
    pub client_id: u64,
    pub rt_train: FieldElement,
    pub hash_bc: FieldElement,
    pub w_noisy: Option<ScaledMatrix>,
    pub betaproof_valid: bool,
    pub cost: Option<u128>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractState {
    pub generic: GenericParams,
    pub count: u64,
    pub clients: BTreeMap<Address, ClientRecord>,
    pub global_w: Option<ScaledMatrix>,
    pub valid_count: usize,
    pub cost_list: Vec<(Address, u128)>,
    pub balance: u128,
    pub deployer: Address,
    pub incentives: Option<Vec<(Address, u128)>>,
    pub payouts: BTreeMap<Address, u128>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error("Pay fee: paid {paid}, admission fee is {required}")]
    Fee { paid: u128, required: u128 },
    #[error("unknown client {0}")]
    Unregistered(Address),
    #[error("no beta")]
    NoBeta,
    #[error("cost already submitted")]
    DuplicateCost,
    #[error("only initclient")]
    OnlyInitClient,
    #[error("low balance: {balance} available, {required} required")]
    LowBalance { balance: u128, required: u128 },
    #[error("incentives already paid")]
    AlreadyPaid,
    #[error("weight must have {expected} entries at scale {scale}")]
    WeightShape { expected: usize, scale: u32 },
    #[error("malformed proof: {0}")]
    Malformed(String),
    #[error(transparent)]
    Incentive(#[from] IncentiveError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Element-wise mean, rounded half away from zero at the common scale.
pub fn aggregate(weights: &[&ScaledMatrix]) -> Option<ScaledMatrix> {
    let first = weights.first()?;
    let count = BigInt::from(weights.len());
    let entries = (0..first.rows())
        .map(|r| {
            let sum: BigInt = weights.iter().map(|w| w.get(r, 0).to_bigint()).sum();
            SignMag::try_from_bigint(&div_round_half_away(&sum, &count)).expect("mean is bounded by the inputs")
        })
        .collect();
    Some(ScaledMatrix::column_vector(entries, first.scale()))
}

/// Contract state plus the two verification circuits.
#[derive(Clone, Debug)]
pub struct ClientsContract {
    state: ContractState,
    weight_params: WeightCircuitParams,
    cost_params: CostCircuitParams,
    weight_cs: Arc<ConstraintSystem>,
    cost_cs: Arc<ConstraintSystem>,
}

impl ClientsContract {
    pub fn deploy(generic: GenericParams, deployer: Address) -> Result<Self, ContractError> {
        let weight_cs = Arc::new(build_weight_circuit(&generic.weight_params()?)?);
        let cost_cs = Arc::new(build_cost_circuit(&generic.cost_params()?)?);
        Self::with_circuits(generic, deployer, weight_cs, cost_cs)
    }

    /// Deploys with circuits built earlier for the same parameters.
    pub fn with_circuits(
        generic: GenericParams,
        deployer: Address,
        weight_cs: Arc<ConstraintSystem>,
        cost_cs: Arc<ConstraintSystem>,
    ) -> Result<Self, ContractError> {
        let weight_params = generic.weight_params()?;
        let cost_params = generic.cost_params()?;
        if generic.table.len() != generic.d_l - 1 {
            return Err(CircuitError::Shape(format!("table has {} entries for d_L = {}", generic.table.len(), generic.d_l)).into());
        }
        if weight_cs.num_public() != weight_params.num_public() || cost_cs.num_public() != cost_params.num_public() {
            return Err(CircuitError::Params("circuits do not match the parameters".into()).into());
        }
        Ok(ClientsContract {
            state: ContractState {
                generic,
                count: 0,
                clients: BTreeMap::new(),
                global_w: None,
                valid_count: 0,
                cost_list: Vec::new(),
                balance: 0,
                deployer,
                incentives: None,
                payouts: BTreeMap::new(),
            },
            weight_params,
            cost_params,
            weight_cs,
            cost_cs,
        })
    }

    pub fn state(&self) -> &ContractState {
        &self.state
    }

    pub fn weight_circuit(&self) -> &Arc<ConstraintSystem> {
        &self.weight_cs
    }

    pub fn cost_circuit(&self) -> &Arc<ConstraintSystem> {
        &self.cost_cs
    }

    fn record(&self, address: &str) -> Result<&ClientRecord, ContractError> {
        self.state
            .clients
            .get(address)
            .ok_or_else(|| ContractError::Unregistered(address.to_string()))
    }

    /// Registers or re-registers `address`; a new record discards earlier uploads.
    pub fn register(
        &mut self,
        address: &str,
        rt_train: FieldElement,
        fee: u128,
        block_hash: FieldElement,
    ) -> Result<u64, ContractError> {
        let required = self.state.generic.admission_fee;
        if fee < required {
            return Err(ContractError::Fee { paid: fee, required });
        }
        let s = &mut self.state;
        s.count += 1;
        s.balance += fee;
        let previous = s.clients.insert(
            address.to_string(),
            ClientRecord {
                address: address.to_string(),
                client_id: s.count,
                rt_train,
                hash_bc: block_hash,
                w_noisy: None,
                betaproof_valid: false,
                cost: None,
            },
        );
        if previous.is_some() {
            s.cost_list.retain(|(a, _)| a != address);
            self.refresh_global();
        }
        Ok(self.state.count)
    }

    pub fn weight_statement(&self, address: &str, w_noisy: &ScaledMatrix) -> Result<WeightStatement, ContractError> {
        let g = &self.state.generic;
        if w_noisy.cols() != 1 || w_noisy.rows() != g.k + 1 || w_noisy.scale() != g.d {
            return Err(ContractError::WeightShape {
                expected: g.k + 1,
                scale: g.d,
            });
        }
        let rec = self.record(address)?;
        Ok(WeightStatement {
            root: rec.rt_train,
            table: g.table.clone(),
            block_hash: rec.hash_bc,
            w_noisy: w_noisy.entries().to_vec(),
            bounds: g.bounds,
        })
    }

    /// Stores `w_noisy` and re-aggregates only if the proof verifies.
    pub fn upload_beta(&mut self, address: &str, w_noisy: &ScaledMatrix, witness: &Witness) -> Result<Verdict, ContractError> {
        let st = self.weight_statement(address, w_noisy)?;
        let publics = st.to_public_inputs(&self.weight_params)?;
        let verdict = cs_verify(&self.weight_cs, witness, &publics).map_err(|e| ContractError::Malformed(e.to_string()))?;
        if verdict.is_pass() {
            let rec = self.state.clients.get_mut(address).expect("checked above");
            rec.w_noisy = Some(w_noisy.clone());
            rec.betaproof_valid = true;
            self.refresh_global();
        }
        Ok(verdict)
    }

    pub fn cost_statement(&self, address: &str, cost: u128) -> Result<CostStatement, ContractError> {
        let rec = self.record(address)?;
        Ok(CostStatement {
            cost,
            root_train: rec.rt_train,
            root_test: self.state.generic.root_test,
            eps_w: self.state.generic.bounds.eps_w,
        })
    }

    pub fn upload_cost(&mut self, address: &str, cost: u128, witness: &Witness) -> Result<Verdict, ContractError> {
        let rec = self.record(address)?;
        if !rec.betaproof_valid {
            return Err(ContractError::NoBeta);
        }
        if rec.cost.is_some() {
            return Err(ContractError::DuplicateCost);
        }
        let publics = self.cost_statement(address, cost)?.to_public_inputs(&self.cost_params);
        let verdict = cs_verify(&self.cost_cs, witness, &publics).map_err(|e| ContractError::Malformed(e.to_string()))?;
        if verdict.is_pass() {
            self.state.clients.get_mut(address).expect("checked above").cost = Some(cost);
            self.state.cost_list.push((address.to_string(), cost));
        }
        Ok(verdict)
    }

    /// Pays every client on the cost list from the pooled fees.
    pub fn incentivize(&mut self, caller: &str) -> Result<Vec<(Address, u128)>, ContractError> {
        let s = &self.state;
        if caller != s.deployer {
            return Err(ContractError::OnlyInitClient);
        }
        if s.incentives.is_some() {
            return Err(ContractError::AlreadyPaid);
        }
        let costs: Vec<u128> = s.cost_list.iter().map(|(_, c)| *c).collect();
        let v = compute_incentives(&costs, s.generic.admission_fee, costs.len())?;
        let required: u128 = v.iter().sum();
        if s.balance < required {
            return Err(ContractError::LowBalance {
                balance: s.balance,
                required,
            });
        }
        let paid: Vec<(Address, u128)> = s.cost_list.iter().map(|(a, _)| a.clone()).zip(v).collect();
        let s = &mut self.state;
        s.balance -= required;
        for (a, amount) in &paid {
            *s.payouts.entry(a.clone()).or_default() += amount;
        }
        s.incentives = Some(paid.clone());
        Ok(paid)
    }

    pub fn withdraw(&mut self, caller: &str, amount: u128) -> Result<(), ContractError> {
        let s = &mut self.state;
        if caller != s.deployer {
            return Err(ContractError::OnlyInitClient);
        }
        if s.balance < amount {
            return Err(ContractError::LowBalance {
                balance: s.balance,
                required: amount,
            });
        }
        s.balance -= amount;
        Ok(())
    }

    fn refresh_global(&mut self) {
        let valid: Vec<&ScaledMatrix> = self
            .state
            .clients
            .values()
            .filter(|r| r.betaproof_valid)
            .filter_map(|r| r.w_noisy.as_ref())
            .collect();
        self.state.valid_count = valid.len();
        self.state.global_w = aggregate(&valid);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tx", rename_all = "snake_case")]
pub enum TxKind {
    Register { rt_train: FieldElement, fee: u128 },
    UploadBeta { w_noisy: Vec<SignMag> },
    UploadCost { cost: u128 },
    Incentivize,
    Withdraw { amount: u128 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TxStatus {
    Applied,
    ProofRejected { check: String, label: String },
    Reverted { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub height: u64,
    pub sender: Address,
    #[serde(flatten)]
    pub kind: TxKind,
    pub outcome: TxStatus,
    /// Constraints evaluated while verifying, the stand-in for gas.
    pub evaluated: usize,
}

/// Chain plus contract; every transaction, accepted or not, gets a block.
#[derive(Clone, Debug)]
pub struct Ledger {
    chain: Chain,
    contract: ClientsContract,
    log: Vec<TxRecord>,
}

impl Ledger {
    pub fn new(seed: u64, contract: ClientsContract) -> Self {
        let alg = contract.state().generic.hash_alg;
        Ledger {
            chain: Chain::new(seed, alg),
            contract,
            log: Vec::new(),
        }
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn contract(&self) -> &ClientsContract {
        &self.contract
    }

    pub fn state(&self) -> &ContractState {
        self.contract.state()
    }

    pub fn log(&self) -> &[TxRecord] {
        &self.log
    }

    pub fn block_hash(&self) -> FieldElement {
        self.chain.head().hash
    }

    fn commit(&mut self, sender: &str, kind: TxKind, witness: Option<&Witness>, result: Result<Verdict, ContractError>) -> TxRecord {
        let mut hasher = Sha256::new();
        hasher.update(sender.as_bytes());
        hasher.update(serde_json::to_vec(&kind).expect("serializable"));
        if let Some(w) = witness {
            for v in &w.assignment {
                hasher.update(v.to_biguint().to_bytes_le());
            }
        }
        let digest = tx_digest(&hasher.finalize());
        let height = self.chain.advance(digest).height;
        let (outcome, evaluated) = match result {
            Ok(Verdict::Pass { evaluated }) => (TxStatus::Applied, evaluated),
            Ok(Verdict::Fail { label, evaluated, .. }) => (
                TxStatus::ProofRejected {
                    check: crate::circuits::r1cs::check_of(&label).to_string(),
                    label,
                },
                evaluated,
            ),
            Err(e) => (TxStatus::Reverted { reason: e.to_string() }, 0),
        };
        let record = TxRecord {
            height,
            sender: sender.to_string(),
            kind,
            outcome,
            evaluated,
        };
        self.log.push(record.clone());
        record
    }

    pub fn register(&mut self, sender: &str, rt_train: FieldElement, fee: u128) -> TxRecord {
        let bh = self.block_hash();
        let result = self.contract.register(sender, rt_train, fee, bh).map(|_| Verdict::Pass { evaluated: 0 });
        self.commit(sender, TxKind::Register { rt_train, fee }, None, result)
    }

    pub fn upload_beta(&mut self, sender: &str, w_noisy: &ScaledMatrix, witness: &Witness) -> TxRecord {
        let result = self.contract.upload_beta(sender, w_noisy, witness);
        let kind = TxKind::UploadBeta {
            w_noisy: w_noisy.entries().to_vec(),
        };
        self.commit(sender, kind, Some(witness), result)
    }

    pub fn upload_cost(&mut self, sender: &str, cost: u128, witness: &Witness) -> TxRecord {
        let result = self.contract.upload_cost(sender, cost, witness);
        self.commit(sender, TxKind::UploadCost { cost }, Some(witness), result)
    }

    pub fn incentivize(&mut self, sender: &str) -> TxRecord {
        let result = self.contract.incentivize(sender).map(|_| Verdict::Pass { evaluated: 0 });
        self.commit(sender, TxKind::Incentivize, None, result)
    }

    pub fn withdraw(&mut self, sender: &str, amount: u128) -> TxRecord {
        let result = self.contract.withdraw(sender, amount).map(|_| Verdict::Pass { evaluated: 0 });
        self.commit(sender, TxKind::Withdraw { amount }, None, result)
    }
}
