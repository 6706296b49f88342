use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

/// Scene-level train/val/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn assignment(&self, scene_id: &str) -> Option<SplitName> {
        let has = |v: &[String]| v.iter().any(|s| s == scene_id);
        if has(&self.train) {
            Some(SplitName::Train)
        } else if has(&self.val) {
            Some(SplitName::Val)
        } else if has(&self.test) {
            Some(SplitName::Test)
        } else {
            None
        }
    }
}

/// Shuffles whole scenes and assigns `round(0.8·N)` to train,
/// `round(0.1·N)` to test and the remainder to val.
///
/// Input order does not matter: ids are sorted before the seeded shuffle.
pub fn split_scenes<S: AsRef<str>>(scene_ids: &[S], seed: u64) -> Result<Split> {
    let mut ids: Vec<String> = scene_ids.iter().map(|s| s.as_ref().to_string()).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateScene(w[0].clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let n = ids.len();
    // round-half-up of 0.8·N and 0.1·N in integer arithmetic
    let n_train = (8 * n + 5) / 10;
    let n_test = ((n + 5) / 10).min(n - n_train);
    let test = ids.split_off(n - n_test);
    let val = ids.split_off(n_train);
    Ok(Split {
        train: ids,
        val,
        test,
    })
}
