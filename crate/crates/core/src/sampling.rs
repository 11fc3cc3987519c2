//! SMOTE oversampling of the minority class.
//!
//! Each synthetic sample sits on the segment between a minority seed point
//! and one of its `k` nearest minority neighbours:
//! `s = x + λ·(x_nn − x)`, `λ ~ U(0,1)`. Seeds are visited round-robin
//! until the requested minority count is reached.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::FeatureDataset;
use crate::error::{Error, Result};
use crate::numerics::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority:majority size ratio after oversampling.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 49,
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` points nearest to `points[query]` (Euclidean),
/// excluding the query itself; ties go to the lower index.
pub fn knn_indices(points: &[Vector], query: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k >= points.len() {
        return Err(Error::invalid(format!(
            "k = {k} needs more than {} points",
            points.len()
        )));
    }
    let q = points
        .get(query)
        .ok_or_else(|| Error::invalid(format!("query index {query} out of range")))?;
    let mut cand: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != query)
        .map(|(i, p)| (squared_distance(q, p), i))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(cand.into_iter().take(k).map(|(_, i)| i).collect())
}

/// Source of the random choices SMOTE makes.
pub trait InterpolationDraws {
    /// Which of the `k` neighbours to interpolate towards.
    fn neighbor(&mut self, k: usize) -> usize;
    /// Interpolation factor in `[0, 1)`.
    fn gap(&mut self) -> f64;
}

impl<R: Rng> InterpolationDraws for R {
    fn neighbor(&mut self, k: usize) -> usize {
        self.random_range(0..k)
    }

    fn gap(&mut self) -> f64 {
        self.random_range(0.0..1.0)
    }
}

/// Provenance of one synthetic sample; indices refer to the input dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub seed: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SmoteOutput {
    /// Input samples unchanged, followed by the synthetic ones.
    pub dataset: FeatureDataset,
    /// One entry per synthetic sample, in order.
    pub origins: Vec<SyntheticOrigin>,
    pub minority_label: u8,
}

pub fn smote_oversample(ds: &FeatureDataset, cfg: &SmoteConfig) -> Result<FeatureDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    smote_with_draws(ds, cfg, &mut rng).map(|out| out.dataset)
}

pub fn smote_with_draws(
    ds: &FeatureDataset,
    cfg: &SmoteConfig,
    draws: &mut impl InterpolationDraws,
) -> Result<SmoteOutput> {
    if ds.features.len() != ds.labels.len() {
        return Err(Error::shape(
            "smote",
            format!("{} feature rows", ds.features.len()),
            format!("{} labels", ds.labels.len()),
        ));
    }
    if let Some(i) = ds.labels.iter().position(|&l| l > 1) {
        return Err(Error::invalid(format!(
            "label {} at {i} is not binary",
            ds.labels[i]
        )));
    }
    if let Some(first) = ds.features.first() {
        if ds.features.iter().any(|f| f.len() != first.len()) {
            return Err(Error::invalid("smote: feature rows have differing lengths"));
        }
    }
    let (pos, neg) = ds.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("smote needs both classes present"));
    }
    let minority_label = u8::from(pos <= neg);
    let (minority_count, majority_count) = (pos.min(neg), pos.max(neg));
    if !(cfg.target_ratio.is_finite() && cfg.target_ratio > 0.0) {
        return Err(Error::invalid(format!(
            "target_ratio must be positive, got {}",
            cfg.target_ratio
        )));
    }
    let target = (cfg.target_ratio * majority_count as f64).round() as usize;
    if target < minority_count {
        return Err(Error::invalid(format!(
            "target_ratio {} is below the current ratio {minority_count}:{majority_count}",
            cfg.target_ratio
        )));
    }
    if cfg.k_neighbors == 0 || minority_count <= cfg.k_neighbors {
        return Err(Error::invalid(format!(
            "smote needs more than k = {} minority samples, have {minority_count}",
            cfg.k_neighbors
        )));
    }

    let minority: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.labels[i] == minority_label)
        .collect();
    let points: Vec<Vector> = minority.iter().map(|&i| ds.features[i].clone()).collect();
    let neighbors = (0..points.len())
        .map(|q| knn_indices(&points, q, cfg.k_neighbors))
        .collect::<Result<Vec<_>>>()?;

    let mut out = ds.clone();
    let mut origins = Vec::with_capacity(target - minority_count);
    for j in 0..target - minority_count {
        let s = j % points.len();
        let nn = neighbors[s][draws.neighbor(cfg.k_neighbors)];
        let lambda = draws.gap();
        let (x, y) = (&points[s], &points[nn]);
        let synth: Vector = x.iter().zip(y).map(|(a, b)| a + lambda * (b - a)).collect();
        out.push(synth, minority_label);
        origins.push(SyntheticOrigin {
            seed: minority[s],
            neighbor: minority[nn],
            lambda,
        });
    }
    Ok(SmoteOutput {
        dataset: out,
        origins,
        minority_label,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    struct Fixed(f64);

    impl InterpolationDraws for Fixed {
        fn neighbor(&mut self, _k: usize) -> usize {
            0
        }
        fn gap(&mut self) -> f64 {
            self.0
        }
    }

    fn ds(rows: &[(&[f64], u8)]) -> FeatureDataset {
        let mut d = FeatureDataset::default();
        for (f, l) in rows {
            d.push(f.to_vec(), *l);
        }
        d
    }

    #[test]
    fn knn_forced_geometry() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0]];
        assert_eq!(knn_indices(&pts, 0, 1).unwrap(), vec![1]);
        assert_eq!(knn_indices(&pts, 2, 2).unwrap(), vec![1, 0]);
        assert!(knn_indices(&pts, 0, 3).is_err());
        assert!(knn_indices(&pts, 5, 1).is_err());
    }

    #[test]
    fn knn_duplicates_and_ties() {
        let pts = vec![vec![3.0], vec![5.0], vec![3.0], vec![1.0]];
        assert_eq!(knn_indices(&pts, 0, 1).unwrap(), vec![2]);
        // 5.0 and 1.0 are equidistant from 3.0; lower index first
        assert_eq!(knn_indices(&pts, 0, 3).unwrap(), vec![2, 1, 3]);
    }

    #[test]
    fn knn_matches_brute_force_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vector> = (0..20).map(|_| vec![rng.random(), rng.random()]).collect();
        for q in 0..20 {
            let mut all: Vec<(f64, usize)> = (0..20)
                .filter(|&i| i != q)
                .map(|i| {
                    (
                        ((pts[i][0] - pts[q][0]).powi(2) + (pts[i][1] - pts[q][1]).powi(2)).sqrt(),
                        i,
                    )
                })
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let want: Vec<usize> = all[..3].iter().map(|p| p.1).collect();
            assert_eq!(knn_indices(&pts, q, 3).unwrap(), want);
        }
    }

    #[test]
    fn identical_minority_points() {
        let d = ds(&[
            (&[2.0, 3.0], 1),
            (&[2.0, 3.0], 1),
            (&[0.0, 0.0], 0),
            (&[1.0, 0.0], 0),
            (&[0.0, 1.0], 0),
            (&[5.0, 5.0], 0),
        ]);
        let cfg = SmoteConfig {
            k_neighbors: 1,
            ..Default::default()
        };
        let out = smote_oversample(&d, &cfg).unwrap();
        assert_eq!(out.class_counts(), (4, 4));
        for f in &out.features[6..] {
            assert_eq!(f, &vec![2.0, 3.0]);
        }
    }

    #[test]
    fn midpoint_with_stubbed_draws() {
        let d = ds(&[
            (&[0.0, 0.0], 1),
            (&[1.0, 1.0], 1),
            (&[9.0, 9.0], 0),
            (&[8.0, 9.0], 0),
            (&[9.0, 8.0], 0),
        ]);
        let cfg = SmoteConfig {
            k_neighbors: 1,
            ..Default::default()
        };
        let out = smote_with_draws(&d, &cfg, &mut Fixed(0.5)).unwrap();
        assert_eq!(out.dataset.features[5], vec![0.5, 0.5]);
        assert_eq!(
            out.origins[0],
            SyntheticOrigin {
                seed: 0,
                neighbor: 1,
                lambda: 0.5
            }
        );
    }

    #[test]
    fn table_scale_counts() {
        let mut d = FeatureDataset::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..(241 + 3840) {
            d.push(
                vec![rng.random(), rng.random(), rng.random()],
                u8::from(i < 241),
            );
        }
        let out = smote_oversample(&d, &SmoteConfig::default()).unwrap();
        assert_eq!(out.class_counts(), (3840, 3840));
    }

    #[test]
    fn error_cases() {
        let single = ds(&[(&[0.0], 1), (&[1.0], 1)]);
        assert!(smote_oversample(&single, &SmoteConfig::default()).is_err());
        let few = ds(&[
            (&[0.0], 1),
            (&[1.0], 1),
            (&[2.0], 0),
            (&[3.0], 0),
            (&[4.0], 0),
        ]);
        assert!(smote_oversample(
            &few,
            &SmoteConfig {
                k_neighbors: 2,
                ..Default::default()
            }
        )
        .is_err());
        let low = SmoteConfig {
            k_neighbors: 1,
            target_ratio: 0.5,
            seed: 0,
        };
        let d = ds(&[
            (&[0.0], 1),
            (&[1.0], 1),
            (&[5.0], 1),
            (&[2.0], 0),
            (&[3.0], 0),
            (&[4.0], 0),
            (&[6.0], 0),
        ]);
        assert!(smote_oversample(&d, &low).is_err());
    }

    #[test]
    fn minority_can_be_label_zero() {
        let d = ds(&[
            (&[0.0], 0),
            (&[1.0], 0),
            (&[5.0], 1),
            (&[6.0], 1),
            (&[7.0], 1),
        ]);
        let out = smote_oversample(
            &d,
            &SmoteConfig {
                k_neighbors: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.class_counts(), (3, 3));
        assert_eq!(out.labels[5], 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn synthetic_points_lie_on_segments(
            seed in any::<u64>(),
            n_min in 3usize..15,
            n_maj in 15usize..40,
            ratio in 0.5..1.5f64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut d = FeatureDataset::default();
            for i in 0..n_min + n_maj {
                let f: Vector = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
                d.push(f, u8::from(i < n_min));
            }
            let target = (ratio * n_maj as f64).round() as usize;
            prop_assume!(target >= n_min);
            let cfg = SmoteConfig { k_neighbors: 2, target_ratio: ratio, seed };
            let out = smote_with_draws(&d, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(out.dataset.class_counts(), (target, n_maj));
            prop_assert_eq!(&out.dataset.features[..d.len()], &d.features[..]);
            for (k, o) in out.origins.iter().enumerate() {
                let s = &out.dataset.features[d.len() + k];
                prop_assert_eq!(out.dataset.labels[d.len() + k], 1);
                prop_assert_eq!(d.labels[o.neighbor], 1);
                let knn = knn_indices(
                    &d.features[..n_min], o.seed, 2).unwrap();
                prop_assert!(knn.contains(&o.neighbor));
                for c in 0..4 {
                    let (a, b) = (d.features[o.seed][c], d.features[o.neighbor][c]);
                    prop_assert!(s[c] >= a.min(b) && s[c] <= a.max(b));
                }
            }
            let again = smote_oversample(&d, &cfg).unwrap();
            prop_assert_eq!(again, smote_oversample(&d, &cfg).unwrap());
        }
    }
}
