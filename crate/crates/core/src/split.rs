//! Stratified train / pool / test partitioning.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub pool: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.01, pool: 0.79, test: 0.20 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.pool, self.test];
        if all.iter().any(|f| !(*f >= 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("split fractions must be non-negative and sum to 1".into()));
        }
        Ok(())
    }
}

/// Document indices of each partition, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub pool: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class: shuffle, take `ceil(n · train)` for training, `round(n · test)`
/// for testing and leave the rest in the pool.
pub fn stratified_split(labels: &[usize], num_classes: usize, fractions: &SplitFractions, seed: u64) -> Result<Split> {
    fractions.validate()?;
    let mut by_class: Vec<Vec<usize>> = (0..num_classes).map(|_| Vec::new()).collect();
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::InvalidConfig(alloc::format!("label {l} outside {num_classes} classes")));
        }
        by_class[l].push(i);
    }
    let mut split = Split { train: Vec::new(), pool: Vec::new(), test: Vec::new() };
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 3 {
            return Err(Error::ClassTooSmall { class });
        }
        let n = members.len();
        members.shuffle(&mut rng_from(crate::rng::derive(seed, &[class as u64])));
        let n_train = (libm::ceil(n as f64 * fractions.train - 1e-9) as usize).min(n);
        let n_test = (libm::round(n as f64 * fractions.test) as usize).min(n - n_train);
        split.train.extend_from_slice(&members[..n_train]);
        split.test.extend_from_slice(&members[n_train..n_train + n_test]);
        split.pool.extend_from_slice(&members[n_train + n_test..]);
    }
    split.train.sort_unstable();
    split.pool.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
