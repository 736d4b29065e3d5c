use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::distance::{dtw, sq_euclidean};
use super::{Distance, ShapeBasis, ShapeVector};
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;

/// Pairwise DTW distances are cached up to this many shapes.
const DTW_CACHE_LIMIT: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub features: Vec<f64>,
    /// Event serving as the centroid under DTW.
    pub medoid: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub event: u32,
    /// Cluster id in `1..=k`.
    pub cluster: usize,
}

/// A fitted k-means model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub distance: Distance,
    pub basis: Option<ShapeBasis>,
    pub seed: u64,
    pub centroids: Vec<Centroid>,
    pub assignments: Vec<Assignment>,
    /// Sum of squared distances to the assigned centroid (Euclidean and
    /// slopes) or sum of DTW distances to the assigned medoid.
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusterModel {
    pub fn cluster_of(&self, event: u32) -> Option<usize> {
        self.assignments
            .iter()
            .find(|a| a.event == event)
            .map(|a| a.cluster)
    }

    /// Zero-based labels in the order the shapes were given.
    pub fn labels(&self) -> Vec<usize> {
        self.assignments.iter().map(|a| a.cluster - 1).collect()
    }

    /// Cluster id (`1..=k`) of the centroid nearest to `shape`.
    pub fn predict(&self, shape: &ShapeVector) -> Result<usize> {
        let mut best = (f64::INFINITY, 0);
        for (c, centroid) in self.centroids.iter().enumerate() {
            let d = point_cost(self.distance, &shape.features, &centroid.features)?;
            if d < best.0 {
                best = (d, c);
            }
        }
        Ok(best.1 + 1)
    }
}

/// Cost of a point against a centroid: squared distance for the mean-based
/// modes, plain DTW distance for medoids.
fn point_cost(distance: Distance, a: &[f64], b: &[f64]) -> Result<f64> {
    match distance {
        Distance::Euclidean | Distance::Slopes => {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch {
                    left: a.len(),
                    right: b.len(),
                });
            }
            Ok(sq_euclidean(a, b))
        }
        Distance::Dtw => dtw(a, b),
    }
}

struct Dtw<'a> {
    shapes: &'a [ShapeVector],
    cache: Option<Vec<f64>>,
}

impl<'a> Dtw<'a> {
    fn new(shapes: &'a [ShapeVector]) -> Result<Self> {
        let n = shapes.len();
        let cache = if n <= DTW_CACHE_LIMIT {
            let mut m = alloc::vec![0.0; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    let d = dtw(&shapes[i].features, &shapes[j].features)?;
                    m[i * n + j] = d;
                    m[j * n + i] = d;
                }
            }
            Some(m)
        } else {
            None
        };
        Ok(Self { shapes, cache })
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        match &self.cache {
            Some(m) => m[i * self.shapes.len() + j],
            // shapes were validated non-empty
            None => dtw(&self.shapes[i].features, &self.shapes[j].features).unwrap_or(f64::INFINITY),
        }
    }
}

/// Lloyd's algorithm with greedy farthest-point seeding.
///
/// Seeding starts from shape `seed % n` and repeatedly adds the shape
/// farthest from all chosen seeds (lowest index on ties). Under DTW the
/// centroids are medoids: the member with the smallest summed distance to
/// the rest of its cluster. An empty cluster is refilled with the shape
/// farthest from its current centroid. Iteration stops when assignments stop
/// changing or after [`MAX_ITERATIONS`].
pub fn kmeans(shapes: &[ShapeVector], k: usize, distance: Distance, seed: u64) -> Result<ClusterModel> {
    let n = shapes.len();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if n < k {
        return Err(Error::TooFewShapes { shapes: n, k });
    }
    for s in shapes {
        if s.features.is_empty() {
            return Err(Error::EmptyFeatures);
        }
        if let Some(i) = s.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    if distance != Distance::Dtw {
        let len = shapes[0].len();
        if let Some(s) = shapes.iter().find(|s| s.len() != len) {
            return Err(Error::LengthMismatch {
                left: len,
                right: s.len(),
            });
        }
    }
    let dtw_table = match distance {
        Distance::Dtw => Some(Dtw::new(shapes)?),
        _ => None,
    };
    let cost = |i: usize, c: &CentroidRef<'_>| -> f64 {
        match (&dtw_table, c.medoid_index) {
            (Some(t), Some(m)) => t.get(i, m),
            _ => sq_euclidean(&shapes[i].features, c.features),
        }
    };

    let mut centroids: Vec<Working> = seed_centroids(n, k, seed, |i, j| match &dtw_table {
        Some(t) => t.get(i, j),
        None => sq_euclidean(&shapes[i].features, &shapes[j].features),
    })
    .into_iter()
    .map(|i| Working::from_shape(shapes, i, dtw_table.is_some()))
    .collect();

    // ties go to the shape's current cluster, then to the lowest index
    let assign_all = |centroids: &[Working], current: Option<&[usize]>| -> (Vec<usize>, f64) {
        let mut labels = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            let mut best = (f64::INFINITY, 0);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = cost(i, &centroid.as_centroid());
                if d < best.0 {
                    best = (d, c);
                }
            }
            if let Some(cur) = current.map(|l| l[i]) {
                if cost(i, &centroids[cur].as_centroid()) == best.0 {
                    best.1 = cur;
                }
            }
            labels.push(best.1);
            total += best.0;
        }
        (labels, total)
    };

    let (mut labels, first) = assign_all(&centroids, None);
    let mut history = alloc::vec![first];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        update(shapes, &mut centroids, &mut labels, dtw_table.as_ref(), &cost);
        let (next, inertia) = assign_all(&centroids, Some(&labels));
        history.push(inertia);
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }

    Ok(ClusterModel {
        k,
        distance,
        basis: None,
        seed,
        centroids: centroids
            .iter()
            .map(|c| Centroid {
                features: c.features.clone(),
                medoid: c.medoid_index.map(|i| shapes[i].event_ref),
            })
            .collect(),
        assignments: shapes
            .iter()
            .zip(&labels)
            .map(|(s, &l)| Assignment {
                event: s.event_ref,
                cluster: l + 1,
            })
            .collect(),
        inertia: *history.last().unwrap(),
        inertia_history: history,
        iterations,
        converged,
    })
}

struct Working {
    features: Vec<f64>,
    medoid_index: Option<usize>,
}

/// Borrowed view used by the cost closure.
struct CentroidRef<'a> {
    features: &'a [f64],
    medoid_index: Option<usize>,
}

impl Working {
    fn from_shape(shapes: &[ShapeVector], i: usize, medoid: bool) -> Self {
        Self {
            features: shapes[i].features.clone(),
            medoid_index: medoid.then_some(i),
        }
    }

    fn as_centroid(&self) -> CentroidRef<'_> {
        CentroidRef {
            features: &self.features,
            medoid_index: self.medoid_index,
        }
    }
}

fn seed_centroids(n: usize, k: usize, seed: u64, d: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let first = (seed % n as u64) as usize;
    let mut chosen = alloc::vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|i| d(i, first)).collect();
    let mut taken = alloc::vec![false; n];
    taken[first] = true;
    while chosen.len() < k {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|b| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let next = best.expect("n >= k leaves an unchosen shape");
        taken[next] = true;
        chosen.push(next);
        for i in 0..n {
            nearest[i] = nearest[i].min(d(i, next));
        }
    }
    chosen
}

fn update(
    shapes: &[ShapeVector],
    centroids: &mut [Working],
    labels: &mut [usize],
    dtw_table: Option<&Dtw<'_>>,
    cost: &impl Fn(usize, &CentroidRef<'_>) -> f64,
) {
    let k = centroids.len();
    let mut members: Vec<Vec<usize>> = alloc::vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    for (c, group) in members.iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        match dtw_table {
            Some(t) => {
                let mut best = (f64::INFINITY, group[0]);
                for &cand in group {
                    let total: f64 = group.iter().map(|&o| t.get(cand, o)).sum();
                    if total < best.0 {
                        best = (total, cand);
                    }
                }
                centroids[c] = Working::from_shape(shapes, best.1, true);
            }
            None => {
                let dim = shapes[group[0]].len();
                let mut mean = alloc::vec![0.0; dim];
                for &i in group {
                    for (m, x) in mean.iter_mut().zip(&shapes[i].features) {
                        *m += x;
                    }
                }
                let count = group.len() as f64;
                for m in &mut mean {
                    *m /= count;
                }
                centroids[c].features = mean;
            }
        }
    }
    // refill empty clusters from the worst-served shapes of clusters that can spare one
    for c in 0..k {
        if !members[c].is_empty() {
            continue;
        }
        let mut worst: Option<(f64, usize)> = None;
        for i in 0..labels.len() {
            if members[labels[i]].len() < 2 {
                continue;
            }
            let d = cost(i, &centroids[labels[i]].as_centroid());
            if worst.is_none_or(|(w, _)| d > w) {
                worst = Some((d, i));
            }
        }
        if let Some((_, i)) = worst {
            let old = labels[i];
            members[old].retain(|&m| m != i);
            members[c].push(i);
            labels[i] = c;
            centroids[c] = Working::from_shape(shapes, i, dtw_table.is_some());
        }
    }
}
