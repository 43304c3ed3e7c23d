use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint train/validation/test index sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class seeded split. For a class with `n` samples the test set gets
/// `floor(test_fraction·n)`, validation `floor(val_fraction·n)` and training
/// the remainder, so 80 samples per class split 52/12/16.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    val_fraction: f64,
    test_fraction: f64,
    seed: u64,
) -> Result<Split> {
    if val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "split fractions val={val_fraction} test={test_fraction}"
        )));
    }
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= n_classes {
            return Err(Error::InvalidParameter(format!("label {y} out of range")));
        }
        by_class[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        let n_test = (test_fraction * n).floor() as usize;
        let n_val = (val_fraction * n).floor() as usize;
        split.test.extend_from_slice(&members[..n_test]);
        split.val.extend_from_slice(&members[n_test..n_test + n_val]);
        split.train.extend_from_slice(&members[n_test + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_session_sizes() {
        let labels: Vec<usize> = (0..800).map(|i| i % 10).collect();
        let s = stratified_split(&labels, 10, 0.16, 0.20, 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (520, 120, 160));
        for c in 0..10 {
            assert_eq!(s.test.iter().filter(|&&i| labels[i] == c).count(), 16);
            assert_eq!(s.val.iter().filter(|&&i| labels[i] == c).count(), 12);
        }
    }

    #[test]
    fn seed_determinism() {
        let labels: Vec<usize> = (0..200).map(|i| (i * 7) % 10).collect();
        let a = stratified_split(&labels, 10, 0.16, 0.2, 4).unwrap();
        assert_eq!(a, stratified_split(&labels, 10, 0.16, 0.2, 4).unwrap());
        assert_ne!(a, stratified_split(&labels, 10, 0.16, 0.2, 5).unwrap());
    }

    proptest! {
        #[test]
        fn disjoint_cover(labels in proptest::collection::vec(0usize..10, 1..300), seed: u64) {
            let s = stratified_split(&labels, 10, 0.16, 0.2, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for c in 0..10 {
                let n = labels.iter().filter(|&&y| y == c).count();
                let t = s.test.iter().filter(|&&i| labels[i] == c).count();
                let v = s.val.iter().filter(|&&i| labels[i] == c).count();
                prop_assert_eq!(t, (0.2 * n as f64).floor() as usize);
                prop_assert_eq!(v, (0.16 * n as f64).floor() as usize);
            }
        }
    }
}
