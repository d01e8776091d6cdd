//! Timestamp-instanced batching: every batch holds the samples of exactly one
//! instant, so its members are distinct animals without needing labels.

use std::collections::{BTreeMap, HashSet};

use chrono::NaiveDate;
use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{augment, AugmentConfig, EmbedError};
use crate::ingest::RgbMaskSample;

/// Instants with at least two samples, in a seeded shuffled order.
#[derive(Clone, Debug)]
pub struct TimestampSchedule {
    groups: Vec<((NaiveDate, u64), Vec<usize>)>,
}

impl TimestampSchedule {
    pub fn new(samples: &[&RgbMaskSample], seed: u64) -> Result<Self, EmbedError> {
        let mut by_instant: BTreeMap<(NaiveDate, u64), Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            by_instant.entry(s.instant()).or_default().push(i);
        }
        let mut groups: Vec<_> = by_instant.into_iter().filter(|(_, v)| v.len() >= 2).collect();
        if groups.is_empty() {
            return Err(EmbedError::NoTimestampBatch);
        }
        for (_, members) in &groups {
            let mut seen = HashSet::new();
            for &i in members {
                if let Some(id) = &samples[i].identity {
                    if !seen.insert(id) {
                        return Err(EmbedError::DuplicateIdentityInBatch { identity: id.clone() });
                    }
                }
            }
        }
        groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self { groups })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Round-robin over the shuffled instants.
    pub fn for_epoch(&self, epoch: usize) -> ((NaiveDate, u64), &[usize]) {
        let (key, members) = &self.groups[epoch % self.groups.len()];
        (*key, members)
    }
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub day: NaiveDate,
    pub timestamp: f64,
    /// Indices into the sample slice the schedule was built from.
    pub members: Vec<usize>,
    /// Two independently augmented views per member.
    pub views: Vec<[RgbImage; 2]>,
}

/// Builds the batch for `epoch`. View randomness is a function of
/// `(seed, epoch)` only.
pub fn timestamp_batch(
    samples: &[&RgbMaskSample],
    schedule: &TimestampSchedule,
    epoch: usize,
    aug: &AugmentConfig,
    seed: u64,
) -> Batch {
    let ((day, ts_bits), members) = schedule.for_epoch(epoch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let views = members
        .iter()
        .map(|&i| {
            let s = samples[i];
            [augment(&s.pixels, aug, s.dc, &mut rng), augment(&s.pixels, aug, s.dc, &mut rng)]
        })
        .collect();
    Batch { day, timestamp: f64::from_bits(ts_bits), members: members.to_vec(), views }
}
