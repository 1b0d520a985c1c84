use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Pixel adjacency used for clusters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self, Error> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::Validation(format!("connectivity must be 4 or 8, got {other}"))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

/// Connected set of suprathreshold pixels, as ascending linear indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub pixels: Vec<usize>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.pixels.len()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
    }
}

/// Single raster pass linking each set pixel to its already visited neighbours.
fn link(mask: &[bool], rows: usize, cols: usize, conn: Connectivity) -> DisjointSet {
    assert_eq!(mask.len(), rows * cols);
    let mut ds = DisjointSet::new(mask.len());
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if !mask[i] {
                continue;
            }
            if c > 0 && mask[i - 1] {
                ds.union(i as u32, (i - 1) as u32);
            }
            if r > 0 {
                let up = i - cols;
                if mask[up] {
                    ds.union(i as u32, up as u32);
                }
                if conn == Connectivity::Eight {
                    if c > 0 && mask[up - 1] {
                        ds.union(i as u32, (up - 1) as u32);
                    }
                    if c + 1 < cols && mask[up + 1] {
                        ds.union(i as u32, (up + 1) as u32);
                    }
                }
            }
        }
    }
    ds
}

/// Connected components of `mask`, ordered by their first pixel in raster order.
pub fn label_components(mask: &[bool], rows: usize, cols: usize, conn: Connectivity) -> Vec<Vec<usize>> {
    let mut ds = link(mask, rows, cols, conn);
    let mut slot = vec![u32::MAX; mask.len()];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let root = ds.find(i as u32) as usize;
        if slot[root] == u32::MAX {
            slot[root] = out.len() as u32;
            out.push(Vec::new());
        }
        out[slot[root] as usize].push(i);
    }
    out
}

fn suprathreshold(pmap: &[f64], alpha_forming: f64) -> Vec<bool> {
    pmap.iter().map(|&p| p < alpha_forming).collect()
}

/// Clusters of pixels with `p < alpha_forming`, dropping those smaller than `min_cluster`.
pub fn form_clusters(
    pmap: &[f64],
    rows: usize,
    cols: usize,
    alpha_forming: f64,
    min_cluster: usize,
    conn: Connectivity,
) -> Vec<Cluster> {
    label_components(&suprathreshold(pmap, alpha_forming), rows, cols, conn)
        .into_iter()
        .filter(|c| c.len() >= min_cluster)
        .map(|pixels| Cluster { pixels })
        .collect()
}

/// Size of the largest cluster surviving `min_cluster`, 0 if none.
pub fn max_cluster_size(
    pmap: &[f64],
    rows: usize,
    cols: usize,
    alpha_forming: f64,
    min_cluster: usize,
    conn: Connectivity,
) -> usize {
    let mask = suprathreshold(pmap, alpha_forming);
    if !mask.iter().any(|&m| m) {
        return 0;
    }
    let mut ds = link(&mask, rows, cols, conn);
    let largest = (0..mask.len())
        .filter(|&i| mask[i])
        .map(|i| {
            let root = ds.find(i as u32);
            ds.size[root as usize] as usize
        })
        .max()
        .unwrap_or(0);
    if largest >= min_cluster {
        largest
    } else {
        0
    }
}
