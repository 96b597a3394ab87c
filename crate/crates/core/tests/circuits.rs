use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use vfl_core::bounds::BoundSet;
use vfl_core::circuits::{
    build_cost_circuit, build_weight_circuit, count_cost_constraints, count_weight_constraints, cs_verify,
    gen_cost_witness, gen_weight_witness, synthesize_cost_witness, synthesize_weight_witness, CircuitError,
    CostCircuitParams, Verdict, WeightCircuitParams,
};
use vfl_core::client::{encode_normalized, LocalModel};
use vfl_core::dp::{build_noise_table, NoiseTable, PrivacyParams};
use vfl_core::field::{FieldElement, ScaledMatrix, SignMag};
use vfl_core::hash::HashAlg;
use vfl_core::linreg::Dataset;
use vfl_core::merkle::commit_dataset;

const D: u32 = 5;
const D_L: usize = 1000;

fn raw_dataset(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Dataset {
    let beta: Vec<f64> = (0..=k).map(|_| rng.random_range(-2.0..2.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
            let noise: f64 = StandardNormal.sample(rng);
            let y = beta[0] + x.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>() + 0.5 * noise;
            x.into_iter().chain([y]).collect()
        })
        .collect();
    Dataset::from_rows(k, &rows).unwrap()
}

fn table() -> NoiseTable {
    build_noise_table(&PrivacyParams::new(1.0, D_L, D)).unwrap()
}

struct WeightCase {
    params: WeightCircuitParams,
    local: LocalModel,
    root: FieldElement,
    block_hash: FieldElement,
    table: NoiseTable,
    bounds: BoundSet,
}

impl WeightCase {
    fn new(seed: u64, k: usize, n: usize, alg: HashAlg) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let local = LocalModel::from_raw(&raw_dataset(&mut rng, k, n), D).unwrap();
        let root = local.commit(alg).unwrap().root;
        WeightCase {
            params: local.weight_params(D_L, alg).unwrap(),
            root,
            block_hash: FieldElement::from_u64(rng.random()),
            table: table(),
            bounds: BoundSet::defaults(k, n, D),
            local,
        }
    }

    fn honest(&self) -> (vfl_core::circuits::WeightStatement, vfl_core::circuits::WeightPrivate) {
        let (w_noisy, draws) = self.local.perturb(self.block_hash, &self.table, self.params.hash_alg).unwrap();
        self.local.weight_inputs(self.root, &self.table, self.block_hash, &w_noisy, draws, self.bounds)
    }
}

fn failing_check(v: &Verdict) -> String {
    v.check().expect("verdict should fail").to_string()
}

#[test]
fn honest_weight_proof_verifies() {
    for (seed, k, n) in [(1, 2, 30), (2, 1, 20), (3, 4, 50)] {
        let case = WeightCase::new(seed, k, n, HashAlg::PoseidonLite);
        let (st, pv) = case.honest();
        let cs = build_weight_circuit(&case.params).unwrap();
        let w = gen_weight_witness(&case.params, &st, &pv).unwrap();
        let publics = st.to_public_inputs(&case.params).unwrap();
        assert_eq!(publics.len(), case.params.num_public());
        assert_eq!(cs.num_public(), publics.len());
        let v = cs_verify(&cs, &w, &publics).unwrap();
        assert!(v.is_pass(), "k={k} n={n}: {v:?}");
        assert_eq!(v.evaluated(), cs.num_constraints());
    }
}

#[test]
fn weight_public_input_count() {
    for (k, d_l) in [(1, 2), (2, 10), (4, 1000)] {
        let p = WeightCircuitParams::new(k, 20, D, d_l, HashAlg::PoseidonLite).unwrap();
        let cs = build_weight_circuit(&p).unwrap();
        assert_eq!(cs.num_public(), 12 + (d_l - 1) + (k + 1));
    }
}

#[test]
fn mutated_assignment_is_rejected() {
    let case = WeightCase::new(5, 2, 30, HashAlg::PoseidonLite);
    let (st, pv) = case.honest();
    let cs = build_weight_circuit(&case.params).unwrap();
    let w = gen_weight_witness(&case.params, &st, &pv).unwrap();
    let publics = st.to_public_inputs(&case.params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let mut bad = w.clone();
        let i = rng.random_range(publics.len() + 1..bad.len());
        bad.assignment[i] = bad.assignment[i] + FieldElement::ONE;
        assert!(!cs_verify(&cs, &bad, &publics).unwrap().is_pass(), "mutating wire {i} went unnoticed");
    }
}

#[test]
fn altered_public_input_is_rejected() {
    let case = WeightCase::new(6, 2, 30, HashAlg::PoseidonLite);
    let (st, pv) = case.honest();
    let cs = build_weight_circuit(&case.params).unwrap();
    let w = gen_weight_witness(&case.params, &st, &pv).unwrap();
    let publics = st.to_public_inputs(&case.params).unwrap();
    // Table entries only matter where a draw selects them.
    let table = 4..4 + D_L - 1;
    let selected: Vec<usize> = pv.draws.iter().map(|d| 3 + d.p).collect();
    for i in (0..publics.len()).filter(|i| !table.contains(i) || selected.contains(i)) {
        let mut p = publics.clone();
        p[i] = p[i] + FieldElement::ONE;
        assert!(!cs_verify(&cs, &w, &p).unwrap().is_pass(), "public {i}");
    }
    assert!(cs_verify(&cs, &w, &publics[1..]).is_err());
}

#[test]
fn zero_bounds_name_the_mean_check() {
    let case = WeightCase::new(7, 2, 30, HashAlg::PoseidonLite);
    let (mut st, pv) = case.honest();
    st.bounds = BoundSet::zero();
    match gen_weight_witness(&case.params, &st, &pv) {
        Err(CircuitError::Unsatisfied { check, label }) => {
            assert_eq!(check, "normalization");
            assert!(label.contains("mean["), "{label}");
        }
        other => panic!("expected a diagnostic, got {other:?}"),
    }
}

#[test]
fn weight_tampering_names_the_check() {
    let case = WeightCase::new(8, 2, 30, HashAlg::PoseidonLite);
    let cs = build_weight_circuit(&case.params).unwrap();
    let alg = case.params.hash_alg;
    let verdict = |st: &vfl_core::circuits::WeightStatement, pv: &vfl_core::circuits::WeightPrivate| {
        let (w, _) = synthesize_weight_witness(&case.params, st, pv).unwrap();
        cs_verify(&cs, &w, &st.to_public_inputs(&case.params).unwrap()).unwrap()
    };

    // Data swapped after commitment keeps the normalization sums.
    let (st, mut pv) = case.honest();
    let (a, b) = (pv.data.get(0, 0), pv.data.get(1, 0));
    assert_ne!(a, b);
    pv.data.set(0, 0, b);
    pv.data.set(1, 0, a);
    assert_eq!(failing_check(&verdict(&st, &pv)), "merkle_root");

    // Weight shifted by half a unit.
    let (mut st, pv) = case.honest();
    st.w_noisy[0] = st.w_noisy[0].checked_add(&SignMag::from_i128(50_000)).unwrap();
    assert_eq!(failing_check(&verdict(&st, &pv)), "noisy_weight");

    // Noise index picked instead of derived.
    let (w_noisy, mut draws) = case.local.perturb(case.block_hash, &case.table, alg).unwrap();
    let mut w_forged = w_noisy.clone();
    draws[0].p = draws[0].p % (D_L - 1) + 1;
    draws[0].q = case.table.entry(draws[0].p);
    let honest_w = case.local.w.get(0, 0);
    w_forged.set(0, 0, honest_w.checked_add(&draws[0].q).unwrap());
    let (st, pv) = case.local.weight_inputs(case.root, &case.table, case.block_hash, &w_forged, draws, case.bounds);
    assert_eq!(failing_check(&verdict(&st, &pv)), "noise_derivation");

    // Noise left out.
    let (_, draws) = case.local.perturb(case.block_hash, &case.table, alg).unwrap();
    let (st, pv) = case.local.weight_inputs(case.root, &case.table, case.block_hash, &case.local.w, draws, case.bounds);
    assert_eq!(failing_check(&verdict(&st, &pv)), "noisy_weight");

    // Inverse scaled by 5%.
    let (st, mut pv) = case.honest();
    let scaled: Vec<f64> = pv.z.decode().iter().map(|v| v * 1.05).collect();
    pv.z = ScaledMatrix::encode(3, 3, &scaled, D).unwrap();
    assert_eq!(failing_check(&verdict(&st, &pv)), "inverse_residual");
}

#[test]
fn singular_design_fails_inverse_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let raw = raw_dataset(&mut rng, 2, 30);
    let mut data = encode_normalized(&raw, D).unwrap();
    for i in 0..data.rows() {
        let v = data.get(i, 0);
        data.set(i, 1, v);
    }
    let alg = HashAlg::PoseidonLite;
    let root = commit_dataset(&data, alg).unwrap().root;
    let n = data.rows();
    let z = ScaledMatrix::encode(3, 3, &[1.0 / n as f64, 0.0, 0.0, 0.0, 1.0 / n as f64, 0.0, 0.0, 0.0, 1.0 / n as f64], D)
        .unwrap();
    let t = table();
    let params = WeightCircuitParams::new(2, n, D, D_L, alg).unwrap();
    let y: Vec<FieldElement> = data.column(2).into_iter().map(vfl_core::field::field_embed).collect();
    let w = ScaledMatrix::zeros(3, 1, D);
    let bh = FieldElement::from_u64(77);
    let (w_noisy, draws) = vfl_core::dp::perturb_weights(&w, bh, &y, &t, alg).unwrap();
    let st = vfl_core::circuits::WeightStatement {
        root,
        table: t.entries.clone(),
        block_hash: bh,
        w_noisy: w_noisy.entries().to_vec(),
        bounds: BoundSet::defaults(2, n, D),
    };
    let pv = vfl_core::circuits::WeightPrivate { data, z, draws };
    match gen_weight_witness(&params, &st, &pv) {
        Err(CircuitError::Unsatisfied { check, .. }) => assert_eq!(check, "inverse_residual"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn weight_constraint_growth_is_linear() {
    let counts: Vec<i64> = [100, 200, 300]
        .iter()
        .map(|&n| {
            let p = WeightCircuitParams::new(4, n, D, D_L, HashAlg::PoseidonLite).unwrap();
            count_weight_constraints(&p).unwrap() as i64
        })
        .collect();
    let (d1, d2) = (counts[1] - counts[0], counts[2] - counts[1]);
    assert!(((d1 - d2) as f64).abs() <= 0.01 * d1 as f64, "{counts:?}");
}

#[test]
fn count_mode_matches_shape_mode() {
    let p = WeightCircuitParams::new(2, 30, D, 50, HashAlg::Mimc7).unwrap();
    assert_eq!(count_weight_constraints(&p).unwrap(), build_weight_circuit(&p).unwrap().num_constraints());
    let c = CostCircuitParams::new(2, 30, 3, D, HashAlg::Mimc7).unwrap();
    assert_eq!(count_cost_constraints(&c).unwrap(), build_cost_circuit(&c).unwrap().num_constraints());
}

#[test]
fn mimc_costs_more_than_poseidon() {
    for (k, n) in [(1, 20), (2, 50), (4, 100)] {
        let w = |alg| count_weight_constraints(&WeightCircuitParams::new(k, n, D, D_L, alg).unwrap()).unwrap();
        let c = |alg| count_cost_constraints(&CostCircuitParams::new(k, n, n / 10, D, alg).unwrap()).unwrap();
        assert!(w(HashAlg::Mimc7) > w(HashAlg::PoseidonLite));
        assert!(c(HashAlg::Mimc7) > c(HashAlg::PoseidonLite));
    }
}

#[test]
fn weight_params_are_validated() {
    assert!(WeightCircuitParams::new(2, 3, D, D_L, HashAlg::Mimc7).is_err());
    assert!(WeightCircuitParams::new(2, 30, 13, D_L, HashAlg::Mimc7).is_err());
    assert!(WeightCircuitParams::new(2, 30, D, 1, HashAlg::Mimc7).is_err());
}

struct CostCase {
    params: CostCircuitParams,
    local: LocalModel,
    root: FieldElement,
    test: ScaledMatrix,
    root_test: FieldElement,
    eps_w: u128,
}

impl CostCase {
    fn new(seed: u64, k: usize, n: usize, n_test: usize) -> Self {
        let alg = HashAlg::PoseidonLite;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let local = LocalModel::from_raw(&raw_dataset(&mut rng, k, n), D).unwrap();
        let test = encode_normalized(&raw_dataset(&mut rng, k, n_test), D).unwrap();
        CostCase {
            params: local.cost_params(n_test, alg).unwrap(),
            root: local.commit(alg).unwrap().root,
            root_test: commit_dataset(&test, alg).unwrap().root,
            eps_w: BoundSet::defaults(k, n, D).eps_w,
            local,
            test,
        }
    }
}

#[test]
fn honest_cost_proof_verifies_and_forgeries_fail() {
    let case = CostCase::new(21, 2, 30, 5);
    let cs = build_cost_circuit(&case.params).unwrap();
    assert_eq!(cs.num_public(), 8);
    let (st, pv) = case.local.cost_inputs(case.root, &case.test, case.root_test, case.eps_w).unwrap();
    assert!(st.cost > 0);
    let w = gen_cost_witness(&case.params, &st, &pv).unwrap();
    assert!(cs_verify(&cs, &w, &st.to_public_inputs(&case.params)).unwrap().is_pass());

    let mut forged = st.clone();
    forged.cost -= 1;
    let (w, _) = synthesize_cost_witness(&case.params, &forged, &pv).unwrap();
    let v = cs_verify(&cs, &w, &forged.to_public_inputs(&case.params)).unwrap();
    assert_eq!(failing_check(&v), "cost");

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let other = encode_normalized(&raw_dataset(&mut rng, 2, 5), D).unwrap();
    let (st2, pv2) = case.local.cost_inputs(case.root, &other, case.root_test, case.eps_w).unwrap();
    let (w, _) = synthesize_cost_witness(&case.params, &st2, &pv2).unwrap();
    let v = cs_verify(&cs, &w, &st2.to_public_inputs(&case.params)).unwrap();
    assert_eq!(failing_check(&v), "merkle_root_test");
}

#[test]
fn weights_from_another_dataset_are_rejected() {
    let a = CostCase::new(31, 2, 30, 5);
    let b = CostCase::new(32, 2, 30, 5);
    let (st, mut pv) = a.local.cost_inputs(a.root, &a.test, a.root_test, a.eps_w).unwrap();
    pv.w = b.local.w.clone();
    pv.z = b.local.z.clone();
    let mut st = st;
    st.cost = vfl_core::circuits::compute_cost(&a.test, &pv.w).unwrap();
    match gen_cost_witness(&a.params, &st, &pv) {
        Err(CircuitError::Unsatisfied { check, .. }) => {
            assert!(check == "inverse_residual" || check == "weight_consistency", "{check}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn exact_fit_has_zero_cost() {
    let case = CostCase::new(41, 1, 20, 4);
    let w = case.local.w.to_i128();
    // Targets on the encoded model's own prediction line.
    let mut test = case.test.clone();
    for i in 0..test.rows() {
        let x = test.get(i, 0).to_i128().unwrap();
        let pred = vfl_core::field::div_round_half_away_i128(w[0] * 100_000 + x * w[1], 100_000);
        test.set(i, 1, SignMag::from_i128(pred));
    }
    let root_test = commit_dataset(&test, HashAlg::PoseidonLite).unwrap().root;
    let (st, pv) = case.local.cost_inputs(case.root, &test, root_test, case.eps_w).unwrap();
    assert_eq!(st.cost, 0);
    let cs = build_cost_circuit(&case.params).unwrap();
    let wit = gen_cost_witness(&case.params, &st, &pv).unwrap();
    assert!(cs_verify(&cs, &wit, &st.to_public_inputs(&case.params)).unwrap().is_pass());
}

#[test]
fn circuit_json_is_deterministic() {
    let p = WeightCircuitParams::new(1, 12, 3, 8, HashAlg::PoseidonLite).unwrap();
    assert_eq!(build_weight_circuit(&p).unwrap().to_json(), build_weight_circuit(&p).unwrap().to_json());
}
