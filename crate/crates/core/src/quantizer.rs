//! k-means++ codebook and nearest-centroid quantization.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::audio::FrameSequence;
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::rng::{seeded, stream, sub_seed};

pub const DEFAULT_K: usize = 8;
pub const DEFAULT_N_INIT: usize = 10;
pub const DEFAULT_SAMPLE: usize = 10_000;
pub const MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: Matrix,
    inertia: f64,
    seed: u64,
}

impl Codebook {
    /// Rebuild a codebook from stored centroids (e.g. read back from disk).
    pub fn from_centroids(centroids: Matrix, inertia: f64, seed: u64) -> Result<Self> {
        if centroids.rows() == 0 || centroids.cols() == 0 {
            return Err(Error::InvalidModel("codebook needs at least one centroid".into()));
        }
        if !centroids.is_finite() || !(inertia >= 0.0) {
            return Err(Error::InvalidModel("non-finite centroid or negative inertia".into()));
        }
        Ok(Self { centroids, inertia, seed })
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    pub fn centroids(&self) -> &Matrix {
        &self.centroids
    }

    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }

    /// Sum of squared distances from each row of `sample` to its nearest centroid.
    pub fn assignment_cost(&self, sample: &Matrix) -> f64 {
        sample.iter_rows().map(|x| nearest(&self.centroids, x).1).sum()
    }
}

fn nearest(centroids: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter_rows().enumerate() {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Per-frame cluster indices for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalSequence {
    symbols: Vec<usize>,
    n_symbols: usize,
    hop_ms: f64,
    utterance_id: String,
}

impl CategoricalSequence {
    pub fn new(
        utterance_id: impl Into<String>,
        symbols: Vec<usize>,
        n_symbols: usize,
        hop_ms: f64,
    ) -> Result<Self> {
        if let Some(&s) = symbols.iter().find(|&&s| s >= n_symbols) {
            return Err(Error::SymbolOutOfRange { symbol: s, n_symbols });
        }
        Ok(Self { symbols, n_symbols, hop_ms, utterance_id: utterance_id.into() })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn hop_ms(&self) -> f64 {
        self.hop_ms
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn one_hot(&self, t: usize) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.n_symbols];
        v[self.symbols[t]] = 1.0;
        v
    }

    /// `T x n_symbols` indicator matrix.
    pub fn one_hot_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.len(), self.n_symbols);
        for (t, &s) in self.symbols.iter().enumerate() {
            m.row_mut(t)[s] = 1.0;
        }
        m
    }
}

/// Draw `n` frames uniformly without replacement across the corpus (all of
/// them when the corpus is smaller). Rows keep corpus order.
pub fn sample_frames(corpus: &[FrameSequence], n: usize, seed: u64) -> Result<Matrix> {
    let total: usize = corpus.iter().map(FrameSequence::len).sum();
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let dim = corpus.iter().find(|f| !f.is_empty()).map(FrameSequence::dim).unwrap_or(0);
    if let Some(f) = corpus.iter().find(|f| !f.is_empty() && f.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: f.dim() });
    }
    let all_rows = || corpus.iter().flat_map(|f| f.frames().iter_rows());
    if total <= n {
        return Matrix::from_rows(dim, all_rows());
    }
    let mut rng = seeded(sub_seed(seed, stream::SAMPLE));
    let mut picked = rand::seq::index::sample(&mut rng, total, n).into_vec();
    picked.sort_unstable();
    let mut out = Vec::with_capacity(n * dim);
    let mut next = picked.iter().peekable();
    for (i, row) in all_rows().enumerate() {
        match next.peek() {
            Some(&&p) if p == i => {
                out.extend_from_slice(row);
                next.next();
            }
            Some(_) => {}
            None => break,
        }
    }
    Matrix::from_vec(n, dim, out)
}

/// Outcome of one seeded k-means run.
#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia after every assignment step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn count_distinct(sample: &Matrix) -> usize {
    let mut rows: Vec<Vec<u64>> = sample
        .iter_rows()
        .map(|r| r.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

/// k-means++ seeding: first centroid uniform, the rest drawn with
/// probability proportional to squared distance to the nearest chosen one.
pub fn kmeans_plus_plus<R: Rng + ?Sized>(sample: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = sample.rows();
    let mut centroids = Matrix::zeros(k, sample.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(sample.row(first));
    let mut d2: Vec<f64> = sample.iter_rows().map(|x| squared_distance(x, sample.row(first))).collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave `acc` a hair below `target`
            chosen.unwrap_or_else(|| d2.iter().rposition(|d| *d > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(j).copy_from_slice(sample.row(pick));
        for (i, x) in sample.iter_rows().enumerate() {
            let d = squared_distance(x, centroids.row(j));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

/// Lloyd iterations from the given centroids until the assignment is a
/// fixed point or `max_iter` assignment steps have run. Empty clusters are
/// re-seeded at the point farthest from its current centroid.
pub fn lloyd(sample: &Matrix, mut centroids: Matrix, max_iter: usize) -> KMeansRun {
    let k = centroids.rows();
    let dim = sample.cols();
    let mut assign: Vec<usize> = alloc::vec![usize::MAX; sample.rows()];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut inertia;
    loop {
        let mut changed = false;
        inertia = 0.0;
        for (i, x) in sample.iter_rows().enumerate() {
            let (j, d) = nearest(&centroids, x);
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
            inertia += d;
        }
        history.push(inertia);
        iterations += 1;
        if !changed || iterations >= max_iter {
            break;
        }

        let mut sums = Matrix::zeros(k, dim);
        let mut counts = alloc::vec![0usize; k];
        for (i, x) in sample.iter_rows().enumerate() {
            counts[assign[i]] += 1;
            for (s, v) in sums.row_mut(assign[i]).iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let c = counts[j] as f64;
                for (dst, s) in centroids.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *dst = s / c;
                }
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let (far, cost) = sample
                .iter_rows()
                .enumerate()
                .map(|(i, x)| (i, squared_distance(x, centroids.row(assign[i]))))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if cost <= 0.0 {
                break;
            }
            // move the point, then refresh the mean it left behind
            let old = assign[far];
            assign[far] = j;
            counts[old] -= 1;
            counts[j] = 1;
            centroids.row_mut(j).copy_from_slice(sample.row(far));
            for (s, v) in sums.row_mut(old).iter_mut().zip(sample.row(far)) {
                *s -= v;
            }
            let c = counts[old] as f64;
            for (dst, s) in centroids.row_mut(old).iter_mut().zip(sums.row(old)) {
                *dst = s / c;
            }
        }
    }
    KMeansRun { centroids, inertia, history, iterations }
}

/// Best of `n_init` k-means++ / Lloyd runs by inertia. Run `r` draws from
/// its own stream derived from `(seed, r)`.
pub fn fit_codebook(sample: &Matrix, k: usize, n_init: usize, seed: u64) -> Result<Codebook> {
    let runs = fit_codebook_runs(sample, k, n_init, seed)?;
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("n_init >= 1");
    Codebook::from_centroids(best.centroids, best.inertia, seed)
}

/// Every individual run of [`fit_codebook`], in run order.
pub fn fit_codebook_runs(sample: &Matrix, k: usize, n_init: usize, seed: u64) -> Result<Vec<KMeansRun>> {
    if k == 0 || n_init == 0 {
        return Err(Error::InvalidConfig("k and n_init must be positive".into()));
    }
    if sample.rows() < k {
        return Err(Error::TooFewPoints { n: sample.rows(), k });
    }
    if !sample.is_finite() {
        return Err(Error::InvalidConfig("sample contains non-finite values".into()));
    }
    let distinct = count_distinct(sample);
    if distinct < k {
        return Err(Error::InsufficientDistinctPoints { distinct, k });
    }
    let base = sub_seed(seed, stream::KMEANS);
    Ok((0..n_init as u64)
        .map(|run| {
            let mut rng = seeded(sub_seed(base, run));
            let init = kmeans_plus_plus(sample, k, &mut rng);
            lloyd(sample, init, MAX_ITER)
        })
        .collect())
}

pub fn quantize(codebook: &Codebook, frames: &FrameSequence) -> Result<CategoricalSequence> {
    if frames.dim() != codebook.dim() && !frames.is_empty() {
        return Err(Error::DimensionMismatch { expected: codebook.dim(), got: frames.dim() });
    }
    let symbols = frames.frames().iter_rows().map(|x| codebook.nearest(x)).collect();
    CategoricalSequence::new(frames.utterance_id(), symbols, codebook.k(), frames.hop_ms())
}
