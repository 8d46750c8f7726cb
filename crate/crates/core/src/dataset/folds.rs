use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{DatasetError, DatasetManifest, Split};
use crate::rng::{self, tags};

/// Stratified `k`-fold assignment of the train entries.
///
/// Each class is shuffled and dealt round-robin, and the dealing position
/// carries over from one class to the next, so fold sizes and per-fold
/// class counts both differ by at most one. Unlabeled entries form one
/// class. Test entries never get a fold.
pub fn assign_folds(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<DatasetManifest, DatasetError> {
    if k < 2 {
        return Err(DatasetError::Folds(format!("need at least 2 folds, got {k}")));
    }
    let mut classes: BTreeMap<Option<&str>, Vec<usize>> = BTreeMap::new();
    for (pos, e) in manifest.entries.iter().enumerate() {
        if e.split == Split::Train {
            classes.entry(e.region.as_deref()).or_default().push(pos);
        }
    }
    let total: usize = classes.values().map(Vec::len).sum();
    if total < k {
        return Err(DatasetError::Folds(format!("{total} train samples cannot fill {k} folds")));
    }
    if let Some((name, members)) = classes.iter().find(|(_, m)| m.len() < k) {
        return Err(DatasetError::Folds(format!(
            "class `{}` has {} samples, fewer than {k} folds",
            name.unwrap_or("<unlabeled>"),
            members.len()
        )));
    }

    let base = rng::derive_seed(seed, tags::FOLDS);
    let mut out = manifest.clone();
    for e in &mut out.entries {
        e.fold = None;
    }
    let mut offset = 0;
    for (c, members) in classes.values().enumerate() {
        let mut members = members.clone();
        members.sort_by_key(|&p| manifest.entries[p].index);
        members.shuffle(&mut rng::stream(base, c as u64));
        for (i, &p) in members.iter().enumerate() {
            out.entries[p].fold = Some((offset + i) % k);
        }
        offset = (offset + members.len()) % k;
    }
    out.folds = Some(k);
    Ok(out)
}
