//! Lloyd's algorithm with k-means++ seeding.

use rand::Rng;

use crate::error::{LatticeError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
    /// Independent restarts; the lowest final inertia wins.
    pub n_init: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            max_iters: 300,
            tol: 1e-6,
            n_init: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid; ties go to the lowest index.
pub(crate) fn nearest_sq(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

pub fn fit_kmeans(points: &[Vec<f64>], cfg: &KMeansConfig) -> Result<KMeansFit> {
    if cfg.k == 0 {
        return Err(LatticeError::InvalidConfig("k must be >= 1".into()));
    }
    if points.len() < cfg.k {
        return Err(LatticeError::NotEnoughPoints {
            needed: cfg.k,
            got: points.len(),
        });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(LatticeError::DimensionMismatch { expected: dim, got: p.len() });
    }
    let mut best: Option<KMeansFit> = None;
    for run in 0..cfg.n_init.max(1) {
        let fit = lloyd(points, cfg, run as u64);
        if best.as_ref().map_or(true, |b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick].clone());
        let c = centroids.last().expect("just pushed");
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], out: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (a, p) in out.iter_mut().zip(points) {
        let (k, d) = nearest_sq(p, centroids);
        *a = k;
        inertia += d;
    }
    inertia
}

fn lloyd(points: &[Vec<f64>], cfg: &KMeansConfig, run: u64) -> KMeansFit {
    let dim = points[0].len();
    let mut rng = rng::rng_for(cfg.seed, rng::STREAM_KMEANS, run);
    let mut centroids = plus_plus(points, cfg.k, &mut rng);
    let mut assignments = vec![0; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        trace.push(assign(points, &centroids, &mut assignments));
        if iterations == cfg.max_iters {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; cfg.k];
        let mut counts = vec![0usize; cfg.k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        let mut updated: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &n), old)| if n == 0 { old.clone() } else { s.into_iter().map(|v| v / n as f64).collect() })
            .collect();
        // Empty clusters move to the point farthest from its nearest centroid.
        for k in (0..cfg.k).filter(|&k| counts[k] == 0) {
            let far = (0..points.len())
                .map(|i| (i, nearest_sq(&points[i], &updated).1))
                .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            updated[k] = points[far.0].clone();
        }
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < cfg.tol {
            trace.push(assign(points, &centroids, &mut assignments));
            break;
        }
    }
    if hartigan(points, &mut centroids, &mut assignments) {
        trace.push(assign(points, &centroids, &mut assignments));
    }
    KMeansFit {
        inertia: *trace.last().expect("at least one assignment"),
        centroids,
        assignments,
        inertia_trace: trace,
        iterations,
    }
}

fn means(points: &[Vec<f64>], assignments: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; points[0].len()]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    (sums, counts)
}

/// Single-point transfers after Lloyd converges: move a point whenever doing so
/// lowers the total inertia once both centroids are updated. The result is still
/// a Lloyd fixed point. Returns whether anything moved.
fn hartigan(points: &[Vec<f64>], centroids: &mut Vec<Vec<f64>>, assignments: &mut [usize]) -> bool {
    let k = centroids.len();
    if k < 2 {
        return false;
    }
    let (mut cs, mut counts) = means(points, assignments, k);
    let mut moved_any = false;
    let mut moved = true;
    while moved {
        moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let removal = na / (na - 1.0) * sq_dist(p, &cs[a]);
            let best = (0..k)
                .filter(|&b| b != a)
                .map(|b| {
                    let nb = counts[b] as f64;
                    (b, nb / (nb + 1.0) * sq_dist(p, &cs[b]))
                })
                .fold((a, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            // relative margin so round-off cannot cycle a point back and forth
            if best.1 < removal * (1.0 - 1e-12) {
                assignments[i] = best.0;
                (cs, counts) = means(points, assignments, k);
                moved = true;
                moved_any = true;
            }
        }
    }
    if moved_any {
        for ((c, new), &n) in centroids.iter_mut().zip(cs).zip(&counts) {
            if n > 0 {
                *c = new;
            }
        }
    }
    moved_any
}
