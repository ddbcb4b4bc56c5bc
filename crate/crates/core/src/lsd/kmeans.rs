use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            seed: 0,
            restarts: 10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Cluster index per row, renumbered in order of first appearance.
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: each new centroid is drawn with probability
/// proportional to its squared distance to the closest chosen one.
fn seed_centroids(data: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let mut centroids = Array2::zeros((k, data.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&data.row(first));
    let mut closest: Vec<f64> = data
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, centroids.row(0)))
        .collect();

    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&data.row(pick));
        for (i, r) in data.rows().into_iter().enumerate() {
            closest[i] = closest[i].min(sq_dist(r, centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(data: ArrayView2<f64>, mut centroids: Array2<f64>, max_iter: usize) -> (Vec<usize>, f64) {
    let n = data.nrows();
    let k = centroids.nrows();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, r) in data.rows().into_iter().enumerate() {
            let (c, _) = nearest(r, &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for (i, r) in data.rows().into_iter().enumerate() {
            let mut s = sums.row_mut(labels[i]);
            s += &r;
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            // Empty clusters keep their previous centroid.
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).assign(&mean);
            }
        }
    }
    let inertia = data
        .rows()
        .into_iter()
        .zip(&labels)
        .map(|(r, &c)| sq_dist(r, centroids.row(c)))
        .sum();
    (labels, inertia)
}

fn renumber(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            if map.len() <= l {
                map.resize(l + 1, None);
            }
            *map[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Seeded k-means with restarts; the restart with the lowest inertia wins
/// (earliest on ties).
pub fn kmeans(data: ArrayView2<f64>, config: &KMeansConfig) -> KMeansFit {
    let n = data.nrows();
    let k = config.k.clamp(1, n.max(1));
    if n == 0 {
        return KMeansFit {
            labels: Vec::new(),
            inertia: 0.0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..config.restarts.max(1) {
        let centroids = seed_centroids(data, k, &mut rng);
        let (labels, inertia) = lloyd(data, centroids, config.max_iter.max(1));
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    let (labels, inertia) = best.expect("at least one restart");
    KMeansFit {
        labels: renumber(&labels),
        inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separates_two_distinct_points() {
        let data = array![[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0], [0.0, 0.0]];
        let fit = kmeans(data.view(), &KMeansConfig::new(2));
        assert_eq!(fit.labels, vec![0, 0, 1, 1, 0]);
        assert_eq!(fit.inertia, 0.0);
    }

    #[test]
    fn identical_rows_form_one_effective_cluster() {
        let data = Array2::from_elem((6, 3), 1.5);
        let fit = kmeans(data.view(), &KMeansConfig::new(4));
        assert!(fit.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn single_cluster() {
        let data = array![[0.0], [1.0], [2.0]];
        let fit = kmeans(data.view(), &KMeansConfig::new(1));
        assert_eq!(fit.labels, vec![0, 0, 0]);
        assert!((fit.inertia - 2.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let data = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 13) % 11) as f64);
        let a = kmeans(data.view(), &KMeansConfig::new(3));
        let b = kmeans(data.view(), &KMeansConfig::new(3));
        assert_eq!(a, b);
    }

    #[test]
    fn renumbering_by_first_appearance() {
        assert_eq!(renumber(&[2, 2, 0, 1, 0]), vec![0, 0, 1, 2, 1]);
    }
}
