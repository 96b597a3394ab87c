//! Synthetic client data and the CSV layout `x1,..,xk,y`.

use std::fs::File;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::linreg::{column_name, Dataset};

/// Standard deviation of the target noise.
pub const NOISE_STD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedData {
    /// Planted `beta_0 .. beta_k` in raw units.
    pub beta: Vec<f64>,
    pub clients: Vec<Dataset>,
    pub test: Dataset,
}

fn sample(rng: &mut ChaCha8Rng, beta: &[f64], k: usize, n: usize) -> Dataset {
    let noise = Normal::new(0.0, NOISE_STD).expect("valid std");
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
            let y = beta[0] + x.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>() + noise.sample(rng);
            x.into_iter().chain([y]).collect()
        })
        .collect();
    Dataset::from_rows(k, &rows).expect("rows have k + 1 values")
}

/// Gaussian features and a shared planted linear model.
pub fn gen_data(k: usize, n: usize, n_test: usize, clients: usize, seed: u64) -> Result<GeneratedData, ScenarioError> {
    if k < 1 || n < k + 2 {
        return Err(ScenarioError::Config(format!("need k >= 1 and n >= k + 2, got k = {k}, n = {n}")));
    }
    if clients < 1 || n_test < 1 {
        return Err(ScenarioError::Config("need at least one client and one test row".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..=k).map(|_| rng.random_range(-2.0..2.0)).collect();
    let client_data = (0..clients).map(|_| sample(&mut rng, &beta, k, n)).collect();
    let test = sample(&mut rng, &beta, k, n_test);
    Ok(GeneratedData {
        beta,
        clients: client_data,
        test,
    })
}

pub fn client_file(i: usize) -> String {
    format!("client_{i}.csv")
}

pub const TEST_FILE: &str = "test.csv";

pub fn write_csv(path: &Path, ds: &Dataset) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    let header: Vec<String> = (0..=ds.k()).map(|j| column_name(j, ds.k())).collect();
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let row = ds.row(i).iter().chain([&ds.targets()[i]]);
        w.write_record(row.map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Dataset, ScenarioError> {
    let mut r = csv::Reader::from_path(path)?;
    let k = r.headers()?.len().checked_sub(1).filter(|&k| k >= 1).ok_or_else(|| {
        ScenarioError::Config(format!("{}: need columns x1..xk,y", path.display()))
    })?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    Dataset::from_rows(k, &rows).map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))
}

/// Writes `client_1.csv .. client_C.csv` and `test.csv` into `dir`.
pub fn write_dataset_dir(dir: &Path, data: &GeneratedData) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(dir)?;
    for (i, ds) in data.clients.iter().enumerate() {
        write_csv(&dir.join(client_file(i + 1)), ds)?;
    }
    write_csv(&dir.join(TEST_FILE), &data.test)
}

pub fn read_dataset_dir(dir: &Path, clients: usize) -> Result<(Vec<Dataset>, Dataset), ScenarioError> {
    let client_data = (1..=clients)
        .map(|i| read_csv(&dir.join(client_file(i))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((client_data, read_csv(&dir.join(TEST_FILE))?))
}
