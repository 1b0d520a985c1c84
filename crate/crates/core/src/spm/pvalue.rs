use rayon::prelude::*;

use crate::error::{Error, Result};

/// Two-tailed rank p-value from `le = #{v <= x}` and `ge = #{v >= x}` over `n`
/// reference values, with add-one smoothing.
#[inline]
pub fn two_tailed_p(le: usize, ge: usize, n: usize) -> f64 {
    let denom = (n + 1) as f64;
    let low = (1 + le) as f64 / denom;
    let high = (1 + ge) as f64 / denom;
    (2.0 * low.min(high)).min(1.0)
}

/// Normative values per pixel, sorted for rank queries.
///
/// Works on any `rows × cols` field so small fixtures can be checked
/// exhaustively; the detector always uses 64×64.
#[derive(Clone, Debug)]
pub struct ReferenceStack {
    rows: usize,
    cols: usize,
    members: Vec<Vec<f32>>,
    /// Pixel-major: values of pixel `p` at `sorted[p * n..(p + 1) * n]`.
    sorted: Vec<f32>,
}

impl ReferenceStack {
    pub fn new(members: Vec<Vec<f32>>, rows: usize, cols: usize) -> Result<Self> {
        let n = members.len();
        if n < 2 {
            return Err(Error::Precondition(format!(
                "reference stack needs at least 2 members, got {n}"
            )));
        }
        let pixels = rows * cols;
        if let Some(m) = members.iter().find(|m| m.len() != pixels) {
            return Err(Error::DataFormat(format!(
                "stack member has {} values, expected {pixels}",
                m.len()
            )));
        }
        if members.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DataFormat("non-finite value in reference stack".into()));
        }
        let mut sorted = vec![0.0f32; pixels * n];
        sorted.par_chunks_mut(n).enumerate().for_each(|(p, col)| {
            for (dst, m) in col.iter_mut().zip(&members) {
                *dst = m[p];
            }
            col.sort_by(f32::total_cmp);
        });
        Ok(ReferenceStack { rows, cols, members, sorted })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn members(&self) -> &[Vec<f32>] {
        &self.members
    }

    #[inline]
    fn counts(&self, pixel: usize, x: f32) -> (usize, usize) {
        let n = self.members.len();
        let col = &self.sorted[pixel * n..(pixel + 1) * n];
        let le = col.partition_point(|&v| v <= x);
        let lt = col.partition_point(|&v| v < x);
        (le, n - lt)
    }

    /// p-value map of `test` against all members.
    pub fn pvalue_map(&self, test: &[f32]) -> Vec<f64> {
        assert_eq!(test.len(), self.rows * self.cols, "test field shape");
        let n = self.len();
        test.iter()
            .enumerate()
            .map(|(p, &x)| {
                let (le, ge) = self.counts(p, x);
                two_tailed_p(le, ge, n)
            })
            .collect()
    }

    /// p-value map of member `k` against the other `n - 1` members.
    pub fn leave_one_out_pvalue_map(&self, k: usize) -> Vec<f64> {
        let n = self.len();
        self.members[k]
            .iter()
            .enumerate()
            .map(|(p, &x)| {
                let (le, ge) = self.counts(p, x);
                // member k counts itself once on each side
                two_tailed_p(le - 1, ge - 1, n - 1)
            })
            .collect()
    }
}

/// Convenience wrapper: p-value map of `test` against `stack` (same shape).
pub fn pvalue_map(test: &[f32], stack: &[Vec<f32>], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let reference = ReferenceStack::new(stack.to_vec(), rows, cols)?;
    if test.len() != rows * cols {
        return Err(Error::DataFormat(format!("test field has {} values", test.len())));
    }
    Ok(reference.pvalue_map(test))
}
