use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::LearnError;

/// Independent seed for sub-task `index` of kind `tag` within a run.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Positions grouped by class, classes in sorted order.
fn by_class(labels: &[String]) -> BTreeMap<&str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.as_str()).or_default().push(i);
    }
    groups
}

/// Stratified train/test partition.
///
/// The test set holds `floor(test_fraction * n)` ids. Each class first gets
/// `floor(test_fraction * class_size)`; the remaining slots go to the classes
/// with the largest fractional remainders (ties in class order). Both outputs
/// keep the input order.
pub fn stratified_split(
    ids: &[String],
    labels: &[String],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), LearnError> {
    if ids.len() != labels.len() {
        return Err(LearnError::DimensionMismatch(format!(
            "{} ids but {} labels",
            ids.len(),
            labels.len()
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(LearnError::BadFraction(test_fraction));
    }
    let groups = by_class(labels);
    for (label, members) in &groups {
        if members.len() < 2 {
            return Err(LearnError::ClassTooSmall {
                label: label.to_string(),
                count: members.len(),
                needed: 2,
            });
        }
    }

    let target = (test_fraction * ids.len() as f64).floor() as usize;
    let mut quotas: Vec<(usize, f64, usize)> = groups
        .values()
        .map(|m| {
            let exact = test_fraction * m.len() as f64;
            (exact.floor() as usize, exact - exact.floor(), m.len())
        })
        .collect();
    let mut remaining = target.saturating_sub(quotas.iter().map(|q| q.0).sum());
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.total_cmp(&quotas[a].1).then(a.cmp(&b)));
    for &c in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if quotas[c].0 + 1 < quotas[c].2 {
            quotas[c].0 += 1;
            remaining -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; ids.len()];
    for (members, quota) in groups.values().zip(&quotas) {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for &i in shuffled.iter().take(quota.0) {
            is_test[i] = true;
        }
    }
    let train = ids.iter().zip(&is_test).filter(|(_, &t)| !t).map(|(id, _)| id.clone()).collect();
    let test = ids.iter().zip(&is_test).filter(|(_, &t)| t).map(|(id, _)| id.clone()).collect();
    Ok((train, test))
}

/// Fold index (`0..k`) for each position; each class is shuffled and dealt
/// round-robin so fold class counts differ by at most one.
pub fn stratified_folds(labels: &[String], k: usize, seed: u64) -> Result<Vec<usize>, LearnError> {
    if k < 2 {
        return Err(LearnError::DimensionMismatch(format!("need at least 2 folds, got {k}")));
    }
    let groups = by_class(labels);
    for (label, members) in &groups {
        if members.len() < k {
            return Err(LearnError::ClassTooSmall {
                label: label.to_string(),
                count: members.len(),
                needed: k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for members in groups.values() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for i in shuffled {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}
