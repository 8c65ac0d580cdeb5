//! AUC risk minimisation over linear scores, reparametrised on the sphere.
//!
//! Scores are `s(z) = v . z` with `v` on the unit sphere `S_p`, reached from
//! `R^{p-1}` through the inverse stereographic projection from the pole
//! `e_p = (0, ..., 0, 1)`. The pole itself is never reached, so a risk
//! minimiser located exactly at `e_p` cannot be represented.
//!
//! The mini-batch loss keeps the normalising factor
//! `2 n_+ n_- / (n (n - 1) n_batch)`. Its expectation over uniform batches is
//! `2 E(v)`, twice the empirical risk; the constant does not move minimisers.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::convergence::RegularityProfile;
use crate::error::{Error, Result};
use crate::objectives::{Noise, NoisyObjective};
use crate::point::{dot, norm};

/// Labelled data with every positive row stored before every negative row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<i8>,
    p: usize,
    n_plus: usize,
}

impl Dataset {
    /// Build from rows; positives are moved to the front, preserving relative order.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        let p = rows.first().map_or(0, Vec::len);
        if p < 2 {
            return Err(Error::domain(format!(
                "feature dimension must be >= 2, got {p}"
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: bad.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::domain(format!("labels must be +1 or -1, got {bad}")));
        }
        let n_data = rows.len();
        let n_plus = labels.iter().filter(|&&l| l == 1).count();
        if n_plus == 0 || n_plus == n_data {
            return Err(Error::SingleClass { n_plus, n_data });
        }
        let mut order: Vec<usize> = (0..n_data).collect();
        order.sort_by_key(|&i| if labels[i] == 1 { 0 } else { 1 });
        let mut features = Vec::with_capacity(n_data * p);
        for &i in &order {
            features.extend_from_slice(&rows[i]);
        }
        Ok(Dataset {
            features,
            labels: order.iter().map(|&i| labels[i]).collect(),
            p,
            n_plus,
        })
    }

    pub fn n_data(&self) -> usize {
        self.labels.len()
    }

    pub fn n_plus(&self) -> usize {
        self.n_plus
    }

    pub fn n_minus(&self) -> usize {
        self.n_data() - self.n_plus
    }

    /// Feature dimension `p`.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn scores(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_data()).map(|i| dot(v, self.row(i))).collect()
    }

    /// Number of positive/negative pairs `|I|`.
    pub fn n_pairs(&self) -> usize {
        self.n_plus * self.n_minus()
    }
}

/// Index pairs `(i, j)` with `i` a positive row and `j` a negative row (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBatch {
    pub pairs: Vec<(usize, usize)>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::domain("pair batch is empty"));
        }
        for &(i, j) in &self.pairs {
            if i >= data.n_plus() || j < data.n_plus() || j >= data.n_data() {
                return Err(Error::domain(format!(
                    "pair ({i}, {j}) outside class ranges"
                )));
            }
        }
        Ok(())
    }

    /// Every pair of `I` exactly once.
    pub fn exhaustive(data: &Dataset) -> Self {
        let pairs = (0..data.n_plus())
            .flat_map(|i| (data.n_plus()..data.n_data()).map(move |j| (i, j)))
            .collect();
        PairBatch { pairs }
    }
}

/// Stereographic projection `S_p \ {e_p} -> R^{p-1}` from the pole `e_p`.
pub fn stereographic(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::domain("stereographic projection needs p >= 2"));
    }
    let r = norm(v);
    if (r - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "vector is not on the unit sphere (norm {r})"
        )));
    }
    let (last, head) = v.split_last().expect("non-empty");
    let denom = 1.0 - last;
    if denom.abs() < 1e-12 {
        return Err(Error::Pole(denom.abs()));
    }
    Ok(head.iter().map(|x| x / denom).collect())
}

/// Inverse stereographic projection `R^{p-1} -> S_p`.
pub fn stereographic_inverse(theta: &[f64]) -> Vec<f64> {
    let sq: f64 = theta.iter().map(|t| t * t).sum();
    let denom = sq + 1.0;
    let mut v: Vec<f64> = theta.iter().map(|t| 2.0 * t / denom).collect();
    v.push((sq - 1.0) / denom);
    v
}

/// Empirical AUC risk: the number of positive/negative pairs with
/// `v . z_i < v . z_j`, divided by `n (n - 1)`. Ties are not violations.
pub fn empirical_auc_risk(v: &[f64], data: &Dataset) -> Result<f64> {
    if v.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            actual: v.len(),
        });
    }
    let scores = data.scores(v);
    let (pos, neg) = scores.split_at(data.n_plus());
    let mut neg = neg.to_vec();
    neg.sort_by(f64::total_cmp);
    let violations: usize = pos
        .iter()
        .map(|&s| neg.len() - neg.partition_point(|&t| t <= s))
        .sum();
    let n = data.n_data() as f64;
    Ok(violations as f64 / (n * (n - 1.0)))
}

/// Normalising factor `2 n_+ n_- / (n (n - 1) n_batch)` of the mini-batch loss.
pub fn minibatch_factor(data: &Dataset, n_batch: usize) -> f64 {
    let n = data.n_data() as f64;
    2.0 * data.n_plus() as f64 * data.n_minus() as f64 / (n * (n - 1.0) * n_batch as f64)
}

fn minibatch_loss_on_sphere(v: &[f64], batch: &PairBatch, data: &Dataset) -> f64 {
    let violations = batch
        .pairs
        .iter()
        .filter(|&&(i, j)| dot(v, data.row(i)) < dot(v, data.row(j)))
        .count();
    minibatch_factor(data, batch.len()) * violations as f64
}

/// Mini-batch AUC loss at `theta in R^{p-1}`.
pub fn minibatch_auc_loss(theta: &[f64], batch: &PairBatch, data: &Dataset) -> Result<f64> {
    if theta.len() + 1 != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p() - 1,
            actual: theta.len(),
        });
    }
    batch.validate(data)?;
    Ok(minibatch_loss_on_sphere(
        &stereographic_inverse(theta),
        batch,
        data,
    ))
}

/// `n_batch` independent uniform draws from the positive/negative pairs.
pub fn sample_batch<R: Rng + ?Sized>(data: &Dataset, n_batch: usize, rng: &mut R) -> PairBatch {
    assert!(n_batch >= 1, "n_batch must be positive");
    let pairs = (0..n_batch)
        .map(|_| {
            let i = rng.gen_range(0..data.n_plus());
            let j = rng.gen_range(data.n_plus()..data.n_data());
            (i, j)
        })
        .collect();
    PairBatch { pairs }
}

/// The mini-batch AUC loss as a noisy objective over `R^{p-1}`.
#[derive(Debug, Clone)]
pub struct AucObjective {
    data: Arc<Dataset>,
    n_batch: usize,
}

impl AucObjective {
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn n_batch(&self) -> usize {
        self.n_batch
    }

    /// Upper bound `2 n_+ n_- / (n (n - 1))` of the loss.
    pub fn max_loss(&self) -> f64 {
        minibatch_factor(&self.data, 1)
    }
}

pub fn auc_objective(data: Arc<Dataset>, n_batch: usize) -> Result<AucObjective> {
    if n_batch == 0 {
        return Err(Error::domain("n_batch must be positive"));
    }
    Ok(AucObjective { data, n_batch })
}

impl NoisyObjective for AucObjective {
    fn name(&self) -> String {
        format!("auc(n_batch={})", self.n_batch)
    }

    fn dim(&self) -> usize {
        self.data.p() - 1
    }

    fn evaluate(&self, theta: &[f64], u: &Noise) -> f64 {
        let v = stereographic_inverse(theta);
        match u {
            Noise::Pairs(batch) => minibatch_loss_on_sphere(&v, batch, &self.data),
            _ => minibatch_loss_on_sphere(&v, &PairBatch::exhaustive(&self.data), &self.data),
        }
    }

    fn sample_noise(&self, rng: &mut dyn RngCore) -> Noise {
        Noise::Pairs(sample_batch(&self.data, self.n_batch, rng))
    }

    fn profile(&self) -> RegularityProfile {
        RegularityProfile {
            alpha: 0.0,
            beta_upper: 0.0,
            eta: f64::INFINITY,
            deterministic: false,
        }
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }

    fn holder_constant(&self, _u: &Noise) -> f64 {
        self.max_loss() / 2.0
    }
}

/// Two Gaussian blobs with unit covariance, linearly separable with a margin.
///
/// Positives are centred at `+separation/2 * w`, negatives at `-separation/2 * w`,
/// with `w = (1, ..., 1, 0) / sqrt(p - 1)`; draws whose projection on `w` falls
/// within `margin` of the wrong side are redrawn. Half the rows (rounded down)
/// are positive.
pub fn synthetic_blobs<R: Rng + ?Sized>(
    p: usize,
    n_data: usize,
    separation: f64,
    margin: f64,
    rng: &mut R,
) -> Result<Dataset> {
    use rand_distr::{Distribution, StandardNormal};
    if p < 2 || n_data < 2 {
        return Err(Error::domain("synthetic data needs p >= 2 and n_data >= 2"));
    }
    if !(separation > 2.0 * margin && margin >= 0.0) {
        return Err(Error::domain("separation must exceed twice the margin"));
    }
    let scale = 1.0 / ((p - 1) as f64).sqrt();
    let mut w = vec![scale; p];
    w[p - 1] = 0.0;
    let n_plus = n_data / 2;
    let mut rows = Vec::with_capacity(n_data);
    let mut labels = Vec::with_capacity(n_data);
    for i in 0..n_data {
        let sign = if i < n_plus { 1.0 } else { -1.0 };
        let row = loop {
            let z: Vec<f64> = w
                .iter()
                .map(|wi| {
                    let g: f64 = StandardNormal.sample(rng);
                    sign * 0.5 * separation * wi + g
                })
                .collect();
            if sign * dot(&z, &w) > margin {
                break z;
            }
        };
        rows.push(row);
        labels.push(if sign > 0.0 { 1 } else { -1 });
    }
    Dataset::new(rows, labels)
}

/// Read `label,feat_1,...,feat_p` rows. A leading header row is detected and skipped.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => parse_err(0, format!("{other:?}")),
        })?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(idx as u64 + 1, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let label_field = record.get(0).unwrap_or_default();
        let label = match label_field.parse::<f64>() {
            Ok(1.0) => 1,
            Ok(-1.0) => -1,
            Ok(l) => return Err(parse_err(line, format!("label must be 1 or -1, got {l}"))),
            Err(_) if idx == 0 => continue,
            Err(_) => {
                return Err(parse_err(
                    line,
                    format!("cannot parse label '{label_field}'"),
                ))
            }
        };
        let feats = record
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("cannot parse feature '{f}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if feats.len() != first {
                return Err(parse_err(
                    line,
                    format!("expected {first} features, found {}", feats.len()),
                ));
            }
        }
        rows.push(feats);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no data rows".into()));
    }
    Dataset::new(rows, labels)
}

/// Write `data` in the format read by [`load_csv`], with a header row.
/// Values use 17 significant digits so the round trip is exact.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref()).map_err(csv_io)?;
    let mut header = vec!["label".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x_{j}")));
    writer.write_record(&header).map_err(csv_io)?;
    for i in 0..data.n_data() {
        let mut rec = vec![data.label(i).to_string()];
        rec.extend(data.row(i).iter().map(|x| format!("{x:.16e}")));
        writer.write_record(&rec).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
