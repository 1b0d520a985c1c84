use rand::Rng;
use rayon::prelude::*;

use super::cluster::{max_cluster_size, Connectivity};
use super::detector::SpmParams;
use super::pvalue::ReferenceStack;
use crate::error::{Error, Result};
use crate::rng::stream;

/// Leave-one-out p-value maps of every stack member.
///
/// A permutation of the null draws one member as pseudo-test and compares
/// it against the rest, so its p-map is one of these `n` maps. Caching them
/// lets several parameter candidates share one pass over the stack.
#[derive(Clone, Debug)]
pub struct LeaveOneOutMaps {
    rows: usize,
    cols: usize,
    maps: Vec<Vec<f64>>,
}

impl LeaveOneOutMaps {
    pub fn new(stack: &ReferenceStack) -> Result<Self> {
        if stack.len() < 3 {
            return Err(Error::Precondition(format!(
                "permutation null needs at least 3 stack members, got {}",
                stack.len()
            )));
        }
        let maps = (0..stack.len())
            .into_par_iter()
            .map(|k| stack.leave_one_out_pvalue_map(k))
            .collect();
        Ok(LeaveOneOutMaps { rows: stack.rows(), cols: stack.cols(), maps })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn map(&self, k: usize) -> &[f64] {
        &self.maps[k]
    }

    /// Maximum surviving cluster size of each member's leave-one-out map.
    pub fn member_max_clusters(&self, alpha_forming: f64, min_cluster: usize, conn: Connectivity) -> Vec<usize> {
        self.maps
            .par_iter()
            .map(|m| max_cluster_size(m, self.rows, self.cols, alpha_forming, min_cluster, conn))
            .collect()
    }

    /// Member index used by permutation `i` of stream `stream_index`.
    pub fn draw(&self, seed: u64, stream_index: u64, i: usize) -> usize {
        stream(seed, "spm-null", &[stream_index, i as u64]).gen_range(0..self.maps.len())
    }

    /// Sorted null distribution of maximum cluster sizes.
    pub fn null_distribution(&self, params: &SpmParams, seed: u64, stream_index: u64) -> Vec<usize> {
        let per_member = self.member_max_clusters(params.alpha_forming, params.min_cluster, params.connectivity);
        let mut null: Vec<usize> = (0..params.n_permutations)
            .map(|i| per_member[self.draw(seed, stream_index, i)])
            .collect();
        null.sort_unstable();
        null
    }
}

/// Null distribution of the maximum cluster size for a normative stack.
///
/// Permutation `i` draws a member uniformly (stream `(seed, i)`), treats it
/// as a pseudo-test against the remaining members and records the largest
/// cluster that survives `min_cluster` (0 if none). Returned sorted.
pub fn null_max_cluster_distribution(stack: &ReferenceStack, params: &SpmParams, seed: u64) -> Result<Vec<usize>> {
    params.validate()?;
    Ok(LeaveOneOutMaps::new(stack)?.null_distribution(params, seed, 0))
}

/// Nearest-rank `(1 - alpha_fwe)` quantile of a sorted null distribution.
pub fn fwe_threshold(sorted_null: &[usize], alpha_fwe: f64) -> usize {
    assert!(!sorted_null.is_empty(), "empty null distribution");
    let n = sorted_null.len();
    // the tolerance absorbs products such as 0.95 * 1000 = 949.9999999999999
    let rank = (((1.0 - alpha_fwe) * n as f64) - 1e-9).ceil() as usize;
    sorted_null[rank.clamp(1, n) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let null: Vec<usize> = (1..=1000).collect();
        assert_eq!(fwe_threshold(&null, 0.05), 950);
        assert_eq!(fwe_threshold(&[3, 5, 9], 0.05), 9);
        assert_eq!(fwe_threshold(&[0; 20], 0.05), 0);
        let twenty: Vec<usize> = (0..20).collect();
        // ceil(0.95 * 20) = 19th value
        assert_eq!(fwe_threshold(&twenty, 0.05), 18);
    }
}
