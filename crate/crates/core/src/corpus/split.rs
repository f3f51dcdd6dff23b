//! Deterministic stratified train/validation splitting.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{CorpusError, Dataset, Label, Language};

/// Splits a labeled dataset into (train, validation).
///
/// The validation set holds `round(fraction * len)` samples, allocated across
/// (language, label) strata by largest remainder so each stratum is split as
/// close to `fraction` as integer counts allow. Within a stratum the picks
/// are shuffled by an RNG derived from `(seed, language, label)`, so the
/// partition depends only on `(dataset, fraction, seed)` and not on map
/// iteration order. Both halves preserve the input sample order.
pub fn split(
    ds: &Dataset,
    validation_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), CorpusError> {
    if !ds.labeled {
        return Err(CorpusError::NotLabeled {
            name: ds.name.clone(),
        });
    }
    if ds.is_empty() {
        return Err(CorpusError::EmptyDataset {
            name: ds.name.clone(),
        });
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(CorpusError::BadFraction {
            fraction: validation_fraction,
        });
    }

    let mut strata: BTreeMap<(Language, Label), Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.samples().iter().enumerate() {
        let label = s.label.expect("labeled dataset invariant");
        strata.entry((s.language, label)).or_default().push(i);
    }
    for (&(language, label), members) in &strata {
        if members.len() < 2 {
            return Err(CorpusError::SmallStratum {
                language,
                label,
                count: members.len(),
            });
        }
    }

    let target_total = (validation_fraction * ds.len() as f64).round() as usize;

    // Largest-remainder allocation of the validation quota across strata.
    let mut base: BTreeMap<(Language, Label), usize> = BTreeMap::new();
    let mut remainders: Vec<((Language, Label), f64)> = Vec::new();
    let mut allocated = 0usize;
    for (&key, members) in &strata {
        let quota = validation_fraction * members.len() as f64;
        let floor = quota.floor() as usize;
        base.insert(key, floor);
        allocated += floor;
        remainders.push((key, quota - floor as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut leftover = target_total.saturating_sub(allocated);
    for (key, _) in remainders {
        if leftover == 0 {
            break;
        }
        if base[&key] < strata[&key].len() {
            *base.get_mut(&key).expect("key present") += 1;
            leftover -= 1;
        }
    }

    let mut validation_indices: BTreeSet<usize> = BTreeSet::new();
    for (&(language, label), members) in &strata {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut stratum_rng(seed, language, label));
        for &idx in shuffled.iter().take(base[&(language, label)]) {
            validation_indices.insert(idx);
        }
    }

    let mut train = Vec::with_capacity(ds.len() - validation_indices.len());
    let mut validation = Vec::with_capacity(validation_indices.len());
    for (i, s) in ds.samples().iter().enumerate() {
        if validation_indices.contains(&i) {
            validation.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }

    let train_ds = Dataset::new(format!("{}-train", ds.name), train, true)?;
    let val_ds = Dataset::new(format!("{}-val", ds.name), validation, true)?;
    Ok((train_ds, val_ds))
}

fn stratum_rng(seed: u64, language: Language, label: Label) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(language.as_str().as_bytes());
    hasher.update([label.as_u8()]);
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sample;
    use std::collections::BTreeSet;

    fn balanced(n_per_cell: usize) -> Dataset {
        let mut samples = Vec::new();
        let mut k = 0;
        for language in [Language::En, Language::Es] {
            for label in [Label::NonSexist, Label::Sexist] {
                for _ in 0..n_per_cell {
                    samples.push(Sample {
                        id: format!("s{k:04}"),
                        source: None,
                        language,
                        text: "word".to_owned(),
                        label: Some(label),
                    });
                    k += 1;
                }
            }
        }
        Dataset::new("balanced", samples, true).expect("dataset")
    }

    fn cell_count(ds: &Dataset, language: Language, label: Label) -> usize {
        ds.samples()
            .iter()
            .filter(|s| s.language == language && s.label == Some(label))
            .count()
    }

    #[test]
    fn hundred_balanced_samples_split_80_20_per_cell() {
        let ds = balanced(25); // 100 total, 4 cells of 25
        let (train, val) = split(&ds, 0.2, 7).expect("split");
        assert_eq!(train.len(), 80);
        assert_eq!(val.len(), 20);
        for language in [Language::En, Language::Es] {
            for label in [Label::NonSexist, Label::Sexist] {
                assert_eq!(cell_count(&train, language, label), 20);
                assert_eq!(cell_count(&val, language, label), 5);
            }
        }
    }

    #[test]
    fn same_call_twice_reproduces_member_ids() {
        let ds = balanced(13);
        let (t1, v1) = split(&ds, 0.3, 42).expect("split");
        let (t2, v2) = split(&ds, 0.3, 42).expect("split");
        let ids = |d: &Dataset| -> Vec<String> {
            d.samples().iter().map(|s| s.id.clone()).collect()
        };
        assert_eq!(ids(&t1), ids(&t2));
        assert_eq!(ids(&v1), ids(&v2));
    }

    #[test]
    fn different_seeds_usually_differ() {
        let ds = balanced(25);
        let (_, v1) = split(&ds, 0.2, 1).expect("split");
        let (_, v2) = split(&ds, 0.2, 2).expect("split");
        let ids = |d: &Dataset| -> BTreeSet<String> {
            d.samples().iter().map(|s| s.id.clone()).collect()
        };
        assert_ne!(ids(&v1), ids(&v2));
    }

    #[test]
    fn disjoint_partition_covers_input() {
        let ds = balanced(11);
        let (train, val) = split(&ds, 0.25, 3).expect("split");
        let train_ids: BTreeSet<_> = train.samples().iter().map(|s| s.id.clone()).collect();
        let val_ids: BTreeSet<_> = val.samples().iter().map(|s| s.id.clone()).collect();
        assert!(train_ids.is_disjoint(&val_ids));
        let all_ids: BTreeSet<_> = ds.samples().iter().map(|s| s.id.clone()).collect();
        let union: BTreeSet<_> = train_ids.union(&val_ids).cloned().collect();
        assert_eq!(union, all_ids);
    }

    #[test]
    fn validation_size_matches_rounded_fraction() {
        // 4 cells of 7 = 28 samples; round(0.3 * 28) = 8.
        let ds = balanced(7);
        let (_, val) = split(&ds, 0.3, 5).expect("split");
        assert_eq!(val.len(), 8);
    }

    #[test]
    fn fraction_one_is_rejected() {
        let ds = balanced(5);
        assert!(matches!(
            split(&ds, 1.0, 0),
            Err(CorpusError::BadFraction { .. })
        ));
        assert!(matches!(
            split(&ds, 0.0, 0),
            Err(CorpusError::BadFraction { .. })
        ));
    }

    #[test]
    fn tiny_stratum_is_rejected() {
        let mut samples = vec![
            Sample {
                id: "a".into(),
                source: None,
                language: Language::En,
                text: "x".into(),
                label: Some(Label::Sexist),
            },
            Sample {
                id: "b".into(),
                source: None,
                language: Language::En,
                text: "x".into(),
                label: Some(Label::NonSexist),
            },
        ];
        samples.push(Sample {
            id: "c".into(),
            source: None,
            language: Language::En,
            text: "x".into(),
            label: Some(Label::NonSexist),
        });
        let ds = Dataset::new("skewed", samples, true).expect("dataset");
        let err = split(&ds, 0.5, 0).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::SmallStratum {
                label: Label::Sexist,
                count: 1,
                ..
            }
        ));
    }
}
