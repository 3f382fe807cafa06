//! Soft-margin kernel SVM trained with SMO (second-order working set
//! selection).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-gamma * |x - x'|^2)`
    Rbf { gamma: f64 },
    /// `x . x'`
    Linear,
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

pub fn rbf_kernel(x: &[f64], x2: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            x2.len()
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    Ok(Kernel::Rbf { gamma }.eval(x, x2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Rbf,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub kernel: KernelKind,
    pub c: f64,
    /// RBF width; `None` picks `1 / (2 sigma^2)` with sigma the median
    /// pairwise distance of the training rows.
    pub gamma: Option<f64>,
    /// Stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Rbf,
            c: 1.0,
            gamma: None,
            tolerance: 1e-3,
            max_iterations: 100_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param(format!("C must be positive, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::param(format!("gamma must be positive, got {g}")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    /// Label for a positive decision value, then for a negative one.
    pub class_labels: [String; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    pub decision: f64,
}

/// `1 / (2 sigma^2)`, sigma the median pairwise Euclidean distance.
pub fn median_heuristic_gamma(x: &[Vec<f64>]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            d.push(
                x[i].iter()
                    .zip(&x[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
            );
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let sigma = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if sigma > 0.0 {
        1.0 / (2.0 * sigma * sigma)
    } else {
        1.0
    }
}

fn check_rows(x: &[Vec<f64>]) -> Result<usize> {
    let dim = x.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::InvalidTrainingSet("no training rows".into()));
    }
    for (i, r) in x.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::input(format!(
                "row {i} has {} columns, expected {dim}",
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("row {i} contains non-finite values")));
        }
    }
    Ok(dim)
}

/// Trains a binary classifier. The first label in sorted order maps to a
/// positive decision value.
pub fn svm_fit(x: &[Vec<f64>], labels: &[String], params: &SvmParams) -> Result<SvmModel> {
    params.validate()?;
    if x.len() != labels.len() {
        return Err(Error::input("row and label counts differ"));
    }
    check_rows(x)?;
    let mut classes: Vec<&String> = labels.iter().collect();
    classes.sort();
    classes.dedup();
    if classes.len() != 2 {
        return Err(Error::InvalidTrainingSet(format!(
            "binary SVM needs exactly two classes, got {}",
            classes.len()
        )));
    }
    let class_labels = [classes[0].clone(), classes[1].clone()];
    let y: Vec<f64> = labels
        .iter()
        .map(|l| if *l == class_labels[0] { 1.0 } else { -1.0 })
        .collect();
    let kernel = match params.kernel {
        KernelKind::Rbf => Kernel::Rbf {
            gamma: params.gamma.unwrap_or_else(|| median_heuristic_gamma(x)),
        },
        KernelKind::Linear => Kernel::Linear,
    };
    let (alpha, rho) = smo(x, &y, kernel, params)?;
    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for i in 0..x.len() {
        if alpha[i] > 0.0 {
            support_vectors.push(x[i].clone());
            dual_coefficients.push(alpha[i] * y[i]);
        }
    }
    Ok(SvmModel {
        kernel,
        c: params.c,
        support_vectors,
        dual_coefficients,
        bias: -rho,
        class_labels,
    })
}

/// Dual solver. Returns the multipliers and the offset rho, with the
/// decision function `sum_i alpha_i y_i K(x_i, x) - rho`.
fn smo(x: &[Vec<f64>], y: &[f64], kernel: Kernel, params: &SvmParams) -> Result<(Vec<f64>, f64)> {
    const TAU: f64 = 1e-12;
    let n = x.len();
    let c = params.c;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    // Gradient of 0.5 a'Qa - e'a.
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    loop {
        // Maximal violating index from the "up" set.
        let (mut gmax, mut i) = (f64::NEG_INFINITY, usize::MAX);
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        // Partner by second-order gain; also track the violation bound.
        let (mut gmin, mut j, mut best) = (f64::INFINITY, usize::MAX, f64::INFINITY);
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let a = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                let gain = -(b * b) / if a > 0.0 { a } else { TAU };
                if gain < best {
                    best = gain;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < params.tolerance {
            break;
        }
        if iterations >= params.max_iterations {
            return Err(Error::Convergence {
                iterations,
                max_violation: gmax - gmin,
            });
        }
        iterations += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (k[i * n + i] + k[j * n + j] + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k[i * n + i] + k[j * n + j] - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // rho from free multipliers, else the middle of the feasible interval.
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if (alpha[t] >= c) == (y[t] > 0.0) {
            // At C with y = +1, or at 0 with y = -1.
            lb = lb.max(yg);
        } else {
            ub = ub.min(yg);
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else {
        0.5 * (ub + lb)
    };
    Ok((alpha, rho))
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.kernel {
            Kernel::Rbf { gamma } => Some(gamma),
            Kernel::Linear => None,
        }
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if !self.support_vectors.is_empty() && x.len() != self.dim() {
            return Err(Error::input(format!(
                "dimension mismatch: model has {}, input has {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .map(|(sv, a)| a * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(f)?)
    }
}

pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<Prediction> {
    let decision = model.decision(x)?;
    let label = model.class_labels[usize::from(decision <= 0.0)].clone();
    Ok(Prediction { label, decision })
}

/// Fraction of rows predicted correctly.
pub fn accuracy(model: &SvmModel, x: &[Vec<f64>], labels: &[String]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::input("cannot score an empty set"));
    }
    let mut correct = 0;
    for (row, label) in x.iter().zip(labels) {
        correct += usize::from(svm_predict(model, row)?.label == *label);
    }
    Ok(correct as f64 / x.len() as f64)
}
