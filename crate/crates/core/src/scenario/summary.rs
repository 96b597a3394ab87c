//! Cross-run comparison of constraint counts and timings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::run::{RunReport, Timings};
use crate::hash::HashAlg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunPoint {
    pub hash_alg: HashAlg,
    pub k: usize,
    pub n: usize,
    pub n_test: usize,
    pub clients: usize,
    /// `(k+1) n`.
    pub weight_size: usize,
    /// `(k+1)(n + n_test)`.
    pub cost_size: usize,
    pub weight_constraints: usize,
    pub cost_constraints: usize,
    pub timings: Timings,
}

impl RunPoint {
    pub fn from_report(r: &RunReport) -> Self {
        let s = &r.scenario;
        let m = s.k + 1;
        RunPoint {
            hash_alg: s.hash_alg,
            k: s.k,
            n: s.n,
            n_test: r.n_test,
            clients: s.clients,
            weight_size: m * s.n,
            cost_size: m * (s.n + r.n_test),
            weight_constraints: r.constraints.weight,
            cost_constraints: r.constraints.cost,
            timings: r.timings.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub hash_alg: HashAlg,
    pub circuit: String,
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HashRatio {
    pub k: usize,
    pub n: usize,
    /// MiMC over Poseidon-lite constraint counts.
    pub weight: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: Vec<RunPoint>,
    pub fits: Vec<Fit>,
    pub hash_ratios: Vec<HashRatio>,
}

/// Least-squares line through `(x, y)`: slope, intercept and R^2. Needs at
/// least two distinct `x`.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if points.len() < 2 || sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, intercept, r2))
}

pub fn summarize(reports: &[RunReport]) -> Summary {
    let runs: Vec<RunPoint> = reports.iter().map(RunPoint::from_report).collect();
    let mut fits = Vec::new();
    for alg in HashAlg::ALL {
        let mine: Vec<&RunPoint> = runs.iter().filter(|r| r.hash_alg == alg).collect();
        let series: [(&str, Vec<(f64, f64)>); 2] = [
            ("weight", mine.iter().map(|r| (r.weight_size as f64, r.weight_constraints as f64)).collect()),
            ("cost", mine.iter().map(|r| (r.cost_size as f64, r.cost_constraints as f64)).collect()),
        ];
        for (circuit, pts) in series {
            if let Some((slope, intercept, r_squared)) = linear_fit(&pts) {
                fits.push(Fit {
                    hash_alg: alg,
                    circuit: circuit.to_string(),
                    points: pts.len(),
                    slope,
                    intercept,
                    r_squared,
                });
            }
        }
    }
    let mut by_shape: BTreeMap<(usize, usize, usize), BTreeMap<u8, &RunPoint>> = BTreeMap::new();
    for r in &runs {
        by_shape.entry((r.k, r.n, r.n_test)).or_default().insert(r.hash_alg.tag(), r);
    }
    let hash_ratios = by_shape
        .iter()
        .filter_map(|(&(k, n, _), algs)| {
            let mimc = algs.get(&HashAlg::Mimc7.tag())?;
            let pos = algs.get(&HashAlg::PoseidonLite.tag())?;
            Some(HashRatio {
                k,
                n,
                weight: mimc.weight_constraints as f64 / pos.weight_constraints as f64,
                cost: mimc.cost_constraints as f64 / pos.cost_constraints as f64,
            })
        })
        .collect();
    Summary {
        runs,
        fits,
        hash_ratios,
    }
}
