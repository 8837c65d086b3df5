//! Empirical restricted isometry of column products, greedy sparse
//! recovery, and the closed-form weighting-benefit construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFamily {
    Rademacher,
    Gaussian,
}

/// Random embedding matrix: entries `+-1/sqrt(r)` (Rademacher) or
/// `N(0, 1/r)` (Gaussian), so columns have unit norm in expectation.
pub fn sample_embedding_matrix<T: Scalar>(
    r: usize,
    k: usize,
    family: EmbeddingFamily,
    seed: u64,
) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (r as f64).sqrt();
    let mut w = Matrix::zeros(r, k);
    for e in 0..w.len() {
        let x = match family {
            EmbeddingFamily::Rademacher => {
                if rng.gen_bool(0.5) {
                    scale
                } else {
                    -scale
                }
            }
            EmbeddingFamily::Gaussian => standard_normal(&mut rng) * scale,
        };
        w.data_mut()[e] = sc(x);
    }
    w
}

/// Box-Muller draw; two uniforms per call keeps the stream deterministic.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// An n-way product of `1/sqrt(r)`-scaled columns has norm `r^((1-n)/2)`;
/// rescaling by `r^((n-1)/2)` restores unit columns so the isometry target
/// is 1.
pub fn rescale_column_product<T: Scalar>(m: &Matrix<T>, r: usize, n: usize) -> Matrix<T> {
    m.scale(sc((r as f64).powf((n as f64 - 1.0) / 2.0)))
}

#[derive(Debug, Clone, Serialize)]
pub struct RipReport {
    pub r: usize,
    pub k: usize,
    pub n: usize,
    pub sparsity: usize,
    pub trials: usize,
    /// Max over trials of `| ||Mx||_2 / ||x||_2 - 1 |`.
    pub measured_epsilon: f64,
    pub seed: u64,
}

/// Sample `trials` random s-sparse unit vectors (uniform support, Gaussian
/// values, normalized) and record the worst norm distortion of `M`.
pub fn estimate_rip_constant<T: Scalar>(
    m: &Matrix<T>,
    sparsity: usize,
    trials: usize,
    seed: u64,
) -> Result<RipReport> {
    let cols = m.cols();
    if sparsity == 0 || sparsity > cols {
        return Err(Error::Contract(format!(
            "sparsity {} out of range for {} columns",
            sparsity, cols
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = random_sparse_unit(cols, sparsity, &mut rng);
        let mut y = Matrix::<T>::zeros(m.rows(), 1);
        for &(j, v) in &x {
            for row in 0..m.rows() {
                y.set(row, 0, y.get(row, 0) + m.get(row, j) * sc(v));
            }
        }
        let distortion = (y.norm2().to_f64_lossy() - 1.0).abs();
        if distortion > worst {
            worst = distortion;
        }
    }
    Ok(RipReport {
        r: m.rows(),
        k: 0,
        n: 1,
        sparsity,
        trials,
        measured_epsilon: worst,
        seed,
    })
}

fn random_sparse_unit(cols: usize, sparsity: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, f64)> {
    let mut support: Vec<usize> = (0..cols).collect();
    for i in 0..sparsity {
        let j = rng.gen_range(i..cols);
        support.swap(i, j);
    }
    let mut entries: Vec<(usize, f64)> = support[..sparsity]
        .iter()
        .map(|&j| (j, standard_normal(rng)))
        .collect();
    entries.sort_unstable_by_key(|&(j, _)| j);
    let norm = entries
        .iter()
        .map(|&(_, v)| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for e in entries.iter_mut() {
        e.1 /= norm;
    }
    entries
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryResult {
    pub support_correct: bool,
    pub relative_l2_error: f64,
    pub iterations: usize,
    /// Recovered coefficient vector (dense).
    #[serde(skip)]
    pub solution: Vec<f64>,
}

/// Orthogonal matching pursuit: `s` rounds of max-correlation atom
/// selection followed by a least-squares refit on the selected support.
/// `true_support` (sorted) is only used to report `support_correct`.
pub fn omp_recover<T: Scalar>(
    m: &Matrix<T>,
    y: &Matrix<T>,
    sparsity: usize,
    true_support: &[usize],
    true_x: Option<&[f64]>,
) -> Result<RecoveryResult> {
    if sparsity == 0 {
        return Err(Error::Contract("omp_recover needs sparsity >= 1".into()));
    }
    if y.rows() != m.rows() || y.cols() != 1 {
        return Err(Error::shape(
            "omp_recover",
            format!("{}x1 measurement", m.rows()),
            y.shape_str(),
        ));
    }
    let md = m.to_f64();
    let yd = y.to_f64();
    let cols = md.cols();
    let rows = md.rows();

    // Zero measurements recover the zero vector immediately.
    if yd.norm2() == 0.0 {
        return Ok(RecoveryResult {
            support_correct: true_support.is_empty(),
            relative_l2_error: 0.0,
            iterations: 0,
            solution: vec![0.0; cols],
        });
    }

    let mut selected: Vec<usize> = Vec::new();
    let mut residual = yd.clone();
    let mut coeffs: Vec<f64> = Vec::new();
    for _round in 0..sparsity.min(cols) {
        let mut best = usize::MAX;
        let mut best_corr = -1.0f64;
        for j in 0..cols {
            if selected.contains(&j) {
                continue;
            }
            let mut dot = 0.0;
            let mut norm = 0.0;
            for row in 0..rows {
                let a = md.get(row, j);
                dot += a * residual.get(row, 0);
                norm += a * a;
            }
            if norm == 0.0 {
                continue;
            }
            let corr = dot.abs() / norm.sqrt();
            if corr > best_corr {
                best_corr = corr;
                best = j;
            }
        }
        if best == usize::MAX {
            break;
        }
        selected.push(best);
        coeffs = least_squares_on_support(&md, &yd, &selected)?;
        // Refresh the residual with the refit coefficients.
        residual = yd.clone();
        for (idx, &j) in selected.iter().enumerate() {
            for row in 0..rows {
                residual.set(row, 0, residual.get(row, 0) - md.get(row, j) * coeffs[idx]);
            }
        }
    }

    let mut solution = vec![0.0; cols];
    for (idx, &j) in selected.iter().enumerate() {
        solution[j] = coeffs[idx];
    }
    let mut sorted = selected.clone();
    sorted.sort_unstable();
    let support_correct = sorted == true_support;
    let relative_l2_error = match true_x {
        Some(x) => {
            let num: f64 = solution
                .iter()
                .zip(x.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            num / den
        }
        None => residual.norm2() / yd.norm2(),
    };
    Ok(RecoveryResult {
        support_correct,
        relative_l2_error,
        iterations: selected.len(),
        solution,
    })
}

/// Solve `min ||A_S c - y||` by the normal equations with Gaussian
/// elimination and partial pivoting; the supports are tiny.
fn least_squares_on_support(
    m: &Matrix<f64>,
    y: &Matrix<f64>,
    support: &[usize],
) -> Result<Vec<f64>> {
    let s = support.len();
    let rows = m.rows();
    let mut gram = vec![vec![0.0f64; s + 1]; s];
    for a in 0..s {
        for b in 0..s {
            let mut dot = 0.0;
            for row in 0..rows {
                dot += m.get(row, support[a]) * m.get(row, support[b]);
            }
            gram[a][b] = dot;
        }
        let mut rhs = 0.0;
        for row in 0..rows {
            rhs += m.get(row, support[a]) * y.get(row, 0);
        }
        gram[a][s] = rhs;
    }
    for col in 0..s {
        let pivot = (col..s)
            .max_by(|&a, &b| {
                gram[a][col]
                    .abs()
                    .partial_cmp(&gram[b][col].abs())
                    .expect("finite pivots")
            })
            .expect("non-empty");
        if gram[pivot][col].abs() < 1e-12 {
            return Err(Error::Numerical(
                "rank-deficient support submatrix in least squares".into(),
            ));
        }
        gram.swap(col, pivot);
        for row in 0..s {
            if row == col {
                continue;
            }
            let factor = gram[row][col] / gram[col][col];
            let pivot_row = gram[col].clone();
            for (k, g) in gram[row].iter_mut().enumerate().take(s + 1).skip(col) {
                *g -= factor * pivot_row[k];
            }
        }
    }
    Ok((0..s).map(|i| gram[i][s] / gram[i][i]).collect())
}

/// One row of the embedding-dimension sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RipSweepRow {
    pub family: EmbeddingFamily,
    pub r: usize,
    pub k: usize,
    pub n: usize,
    pub sparsity: usize,
    pub trials: usize,
    /// Median over trials of the per-trial max distortion.
    pub median_epsilon: f64,
    /// Fraction of trials with exact support recovery and small error.
    pub recovery_rate: f64,
}

fn sweep_seed(seed: u64, r: usize, trial: usize, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((r as u64) << 20)
        .wrapping_add((trial as u64) << 4)
        .wrapping_add(stream)
}

/// Identifiable columns of the n-way column product. Two collapses make
/// the full `K^n` indexing unrecoverable: the element-wise product depends
/// only on the multiset of selected columns (order duplicates), and for
/// sign matrices any repeated factor squares away (every `W(a) . W(a)` is
/// the constant `1/r` column). The dictionary the sparse-recovery story
/// operates over is therefore indexed by strictly increasing index
/// sequences: products of distinct values.
pub fn distinct_value_product_columns<T: Scalar>(w: &Matrix<T>, n: usize) -> Matrix<T> {
    let k = w.cols();
    let mut sequences: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for seq in &sequences {
            let start = seq.last().map_or(0, |&j| j + 1);
            for j in start..k {
                let mut s = seq.clone();
                s.push(j);
                next.push(s);
            }
        }
        sequences = next;
    }
    let mut out = Matrix::zeros(w.rows(), sequences.len());
    for (c, seq) in sequences.iter().enumerate() {
        for row in 0..w.rows() {
            let mut prod = T::one();
            for &j in seq {
                prod = prod * w.get(row, j);
            }
            out.set(row, c, prod);
        }
    }
    out
}

/// For each embedding dimension: sample `trials` fresh matrices, measure
/// the distortion of the rescaled n-way column product on random sparse
/// vectors (median over trials), and run greedy recovery of sparse
/// weighted count vectors through the same products. Both run over the
/// identifiable dictionary (see [`distinct_value_product_columns`]).
#[allow(clippy::too_many_arguments)]
pub fn rip_sweep(
    family: EmbeddingFamily,
    k: usize,
    n: usize,
    sparsity: usize,
    r_values: &[usize],
    trials: usize,
    vectors_per_trial: usize,
    recovery_trials: usize,
    seed: u64,
) -> Result<Vec<RipSweepRow>> {
    let mut rows = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let mut epsilons = Vec::with_capacity(trials);
        for trial in 0..trials {
            let w: Matrix<f64> =
                sample_embedding_matrix(r, k, family, sweep_seed(seed, r, trial, 1));
            let product = distinct_value_product_columns(&w, n);
            let m = rescale_column_product(&product, r, n);
            let report =
                estimate_rip_constant(&m, sparsity, vectors_per_trial, sweep_seed(seed, r, trial, 2))?;
            epsilons.push(report.measured_epsilon);
        }
        epsilons.sort_by(|a, b| a.partial_cmp(b).expect("finite epsilons"));
        let median_epsilon = epsilons[epsilons.len() / 2];

        let mut successes = 0usize;
        for trial in 0..recovery_trials {
            let w: Matrix<f64> =
                sample_embedding_matrix(r, k, family, sweep_seed(seed, r, trial, 3));
            let product = distinct_value_product_columns(&w, n);
            let m = rescale_column_product(&product, r, n);
            let mut rng = ChaCha8Rng::seed_from_u64(sweep_seed(seed, r, trial, 4));
            let cols = m.cols();
            // Sparse weighted count vector: integer counts scaled by
            // per-type weights in (0, 1].
            let mut support: Vec<usize> = (0..cols).collect();
            for i in 0..sparsity {
                let j = rng.gen_range(i..cols);
                support.swap(i, j);
            }
            let mut support: Vec<usize> = support[..sparsity].to_vec();
            support.sort_unstable();
            let mut x = vec![0.0f64; cols];
            for &j in &support {
                let count = rng.gen_range(1..=5) as f64;
                let weight = rng.gen_range(0.2..=1.0);
                x[j] = count * weight;
            }
            let mut y = Matrix::<f64>::zeros(m.rows(), 1);
            for &j in &support {
                for row in 0..m.rows() {
                    y.set(row, 0, y.get(row, 0) + m.get(row, j) * x[j]);
                }
            }
            let recovered = omp_recover(&m, &y, sparsity, &support, Some(&x))?;
            if recovered.support_correct && recovered.relative_l2_error <= 1e-6 {
                successes += 1;
            }
        }
        rows.push(RipSweepRow {
            family,
            r,
            k,
            n,
            sparsity,
            trials,
            median_epsilon,
            recovery_rate: successes as f64 / recovery_trials.max(1) as f64,
        });
    }
    Ok(rows)
}

/// CSV export matching the sweep row layout.
pub fn sweep_to_csv(rows: &[RipSweepRow]) -> String {
    let mut out = String::from("family,r,k,n,s,trials,measured_epsilon,recovery_rate\n");
    for row in rows {
        let family = match row.family {
            EmbeddingFamily::Rademacher => "rademacher",
            EmbeddingFamily::Gaussian => "gaussian",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            family,
            row.r,
            row.k,
            row.n,
            row.sparsity,
            row.trials,
            row.median_epsilon,
            row.recovery_rate
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct BRatioResult {
    pub b0: f64,
    pub bmin_upper: f64,
    pub ratio: f64,
    pub bound: f64,
}

/// The synthetic sparse scenario quantifying how much weighting can shrink
/// the error factor: `s`-sparse features with constant entries `c`, a
/// `rho`-sparse predictor with entries `b`, weight `big_upsilon` on the
/// important features and `upsilon` elsewhere.
///
/// Returns the unweighted factor `B0 = b c sqrt(rho s)`, the upper bound
/// on the best weighted factor, and the bound
/// `sqrt(rho/s + (1 - rho/s) (upsilon/big_upsilon)^2)` their ratio must
/// stay below.
pub fn b_ratio_experiment(
    rho: f64,
    s: f64,
    big_upsilon: f64,
    upsilon: f64,
    b: f64,
    c: f64,
) -> Result<BRatioResult> {
    if !(1.0 <= rho && rho <= s) {
        return Err(Error::Contract(format!(
            "need 1 <= rho <= s, got rho = {rho}, s = {s}"
        )));
    }
    if big_upsilon <= 0.0 || upsilon <= 0.0 || b <= 0.0 || c <= 0.0 {
        return Err(Error::Contract(
            "weights and entry magnitudes must be positive".into(),
        ));
    }
    let b0 = b * c * (rho * s).sqrt();
    let bmin_upper = (rho * (big_upsilon * c).powi(2) + (s - rho) * (c * upsilon).powi(2)).sqrt()
        * (rho * (b / big_upsilon).powi(2)).sqrt();
    let ratio = bmin_upper / b0;
    let bound = (rho / s + (1.0 - rho / s) * (upsilon / big_upsilon).powi(2)).sqrt();
    if ratio > bound + 1e-12 {
        return Err(Error::Numerical(format!(
            "weighting-benefit inequality violated: ratio {ratio} > bound {bound}"
        )));
    }
    Ok(BRatioResult {
        b0,
        bmin_upper,
        ratio,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rademacher_entries_and_column_norms() {
        let w: Matrix<f64> = sample_embedding_matrix(16, 5, EmbeddingFamily::Rademacher, 3);
        let scale = 0.25;
        for &x in w.data() {
            assert!((x.abs() - scale).abs() < 1e-15);
        }
        for c in 0..5 {
            let norm: f64 = w.col(c).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a: Matrix<f64> = sample_embedding_matrix(8, 4, EmbeddingFamily::Gaussian, 7);
        let b: Matrix<f64> = sample_embedding_matrix(8, 4, EmbeddingFamily::Gaussian, 7);
        assert_eq!(a, b);
        let c: Matrix<f64> = sample_embedding_matrix(8, 4, EmbeddingFamily::Gaussian, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn identity_matrix_has_zero_distortion() {
        let m = Matrix::<f64>::identity(12);
        for s in [1, 3, 6] {
            let report = estimate_rip_constant(&m, s, 50, 1).unwrap();
            assert!(report.measured_epsilon < 1e-12, "s = {s}");
        }
    }

    #[test]
    fn sparsity_beyond_columns_is_an_error() {
        let m = Matrix::<f64>::identity(4);
        assert!(estimate_rip_constant(&m, 5, 10, 0).is_err());
    }

    #[test]
    fn omp_on_identity_recovers_exactly() {
        let m = Matrix::<f64>::identity(10);
        let mut y = Matrix::<f64>::zeros(10, 1);
        y.set(2, 0, 1.5);
        y.set(7, 0, -0.5);
        let result = omp_recover(&m, &y, 2, &[2, 7], Some(&{
            let mut x = vec![0.0; 10];
            x[2] = 1.5;
            x[7] = -0.5;
            x
        }))
        .unwrap();
        assert!(result.support_correct);
        assert!(result.relative_l2_error <= 1e-12);
    }

    #[test]
    fn omp_zero_measurement_returns_zero() {
        let m = Matrix::<f64>::identity(5);
        let y = Matrix::<f64>::zeros(5, 1);
        let result = omp_recover(&m, &y, 2, &[], None).unwrap();
        assert!(result.support_correct);
        assert_eq!(result.iterations, 0);
        assert!(result.solution.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn b_ratio_reference_point() {
        let r = b_ratio_experiment(2.0, 50.0, 10.0, 0.1, 1.0, 1.0).unwrap();
        assert!((r.b0 - 10.0).abs() < 1e-12);
        assert!((r.bmin_upper - 2.0024).abs() < 1e-3);
        assert!((r.ratio - r.bound).abs() < 1e-12);
        assert!((r.bound - 0.200240).abs() < 1e-6);
    }

    #[test]
    fn b_ratio_degenerate_cases() {
        // Uniform weighting: ratio = bound = 1.
        let r = b_ratio_experiment(3.0, 20.0, 2.0, 2.0, 0.5, 1.5).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12);
        assert!((r.bound - 1.0).abs() < 1e-12);
        // All features important: bound = 1 regardless of the weights.
        let r = b_ratio_experiment(20.0, 20.0, 10.0, 0.1, 1.0, 1.0).unwrap();
        assert!((r.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_value_dictionary_size() {
        let w: Matrix<f64> = sample_embedding_matrix(8, 6, EmbeddingFamily::Rademacher, 0);
        let d2 = distinct_value_product_columns(&w, 2);
        assert_eq!(d2.cols(), 15); // C(6, 2)
        let d1 = distinct_value_product_columns(&w, 1);
        assert_eq!(d1, w);
    }

    #[test]
    fn sweep_rows_and_csv_layout() {
        let rows = rip_sweep(
            EmbeddingFamily::Rademacher,
            5,
            2,
            2,
            &[32, 128],
            5,
            10,
            10,
            42,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.median_epsilon >= 0.0));
        let csv = sweep_to_csv(&rows);
        assert!(csv.starts_with("family,r,k,n,s,trials,measured_epsilon,recovery_rate\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn b_ratio_rejects_bad_domain() {
        assert!(b_ratio_experiment(0.5, 50.0, 10.0, 0.1, 1.0, 1.0).is_err());
        assert!(b_ratio_experiment(2.0, 1.0, 10.0, 0.1, 1.0, 1.0).is_err());
        assert!(b_ratio_experiment(2.0, 50.0, -1.0, 0.1, 1.0, 1.0).is_err());
    }
}
