use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::window::Dataset;
use crate::error::{Error, Result};

/// Random partition of `0..n`; returns sorted `(train, test)` index lists.
/// The train side gets `floor(n · train_fraction)` indices.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0,1), got {train_fraction}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    // small epsilon so e.g. 0.65 · 100 lands on 65 despite binary rounding
    let n_train = ((n as f64) * train_fraction + 1e-9).floor() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx.split_off(n_train);
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}

pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), train_fraction, seed)?;
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}
