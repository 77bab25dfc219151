//! Validated domain types: frozen embeddings, learnable class prototypes,
//! logits and tempered probabilities, and the affine probe head.
//!
//! Every constructor enforces the type's invariants; downstream code can
//! rely on them without re-checking.

use crate::error::CoreError;
use crate::matrix::Matrix;

fn check_finite(m: &Matrix) -> Result<(), CoreError> {
    for r in 0..m.rows() {
        for (c, v) in m.row(r).iter().enumerate() {
            if !v.is_finite() {
                return Err(CoreError::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

/// Frozen feature vectors, one sample per row. The encoder that
/// produced them is external; this matrix is the only view of the
/// inputs the library ever sees.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Matrix,
}

impl EmbeddingMatrix {
    /// Validates finiteness and that the matrix is non-empty.
    pub fn new(data: Matrix) -> Result<Self, CoreError> {
        if data.rows() < 1 || data.cols() < 1 {
            return Err(CoreError::EmptyMatrix {
                rows: data.rows(),
                cols: data.cols(),
            });
        }
        check_finite(&data)?;
        Ok(Self { data })
    }

    /// Sample count.
    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    /// New embedding matrix holding the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<EmbeddingMatrix, CoreError> {
        EmbeddingMatrix::new(self.data.select_rows(indices)?)
    }
}

/// Learnable class prototypes, one row per class. Rows must keep a
/// strictly positive norm so cosine similarity stays defined.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMatrix {
    data: Matrix,
}

impl PrototypeMatrix {
    pub fn new(data: Matrix) -> Result<Self, CoreError> {
        if data.rows() < 2 {
            return Err(CoreError::TooFewClasses {
                min: 2,
                found: data.rows(),
            });
        }
        check_finite(&data)?;
        check_positive_row_norms(&data)?;
        Ok(Self { data })
    }

    /// Class count.
    pub fn k(&self) -> usize {
        self.data.rows()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }
}

/// Errors if any row of `m` has zero Euclidean norm. Used both at
/// construction and after every optimizer step on prototypes.
pub fn check_positive_row_norms(m: &Matrix) -> Result<(), CoreError> {
    for r in 0..m.rows() {
        if m.row_norm(r) <= 0.0 {
            return Err(CoreError::ZeroNormPrototype { row: r });
        }
    }
    Ok(())
}

/// Which model produced a logit matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogitSource {
    Weak,
    Strong,
}

/// Per-sample class scores (n samples x k classes).
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    data: Matrix,
    source: LogitSource,
}

impl LogitMatrix {
    pub fn new(data: Matrix, source: LogitSource) -> Result<Self, CoreError> {
        check_finite(&data)?;
        Ok(Self { data, source })
    }

    /// Strong logits produced by cosine similarity; additionally checks
    /// every entry lies in `[-1, 1]`.
    pub fn strong_cosine(data: Matrix) -> Result<Self, CoreError> {
        check_finite(&data)?;
        for r in 0..data.rows() {
            for (c, v) in data.row(r).iter().enumerate() {
                if !(-1.0..=1.0).contains(v) {
                    return Err(CoreError::ProbabilityOutOfRange {
                        row: r,
                        col: c,
                        value: *v,
                    });
                }
            }
        }
        Ok(Self {
            data,
            source: LogitSource::Strong,
        })
    }

    pub fn source(&self) -> LogitSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    pub fn k(&self) -> usize {
        self.data.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<LogitMatrix, CoreError> {
        Ok(Self {
            data: self.data.select_rows(indices)?,
            source: self.source,
        })
    }
}

/// Softmax temperature; strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl TryFrom<f64> for Temperature {
    type Error = CoreError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Temperature::new(value)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

impl Temperature {
    pub fn new(value: f64) -> Result<Self, CoreError> {
        if !(value.is_finite() && value > 0.0) {
            return Err(CoreError::InvalidTemperature { value });
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    /// The library-wide distillation default, tau = 2.
    fn default() -> Self {
        Temperature(2.0)
    }
}

/// Tempered probabilities (n samples x k classes); each row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    data: Matrix,
    temperature: Temperature,
}

impl ProbMatrix {
    /// Tempered softmax of every logit row.
    pub fn from_logits(logits: &LogitMatrix, temperature: Temperature) -> Result<Self, CoreError> {
        let mut data = Matrix::zeros(logits.len(), logits.k());
        for i in 0..logits.len() {
            let p = crate::loss::soften(logits.row(i), temperature);
            data.row_mut(i).copy_from_slice(&p);
        }
        ProbMatrix::new(data, temperature)
    }

    pub fn new(data: Matrix, temperature: Temperature) -> Result<Self, CoreError> {
        for r in 0..data.rows() {
            let mut sum = 0.0;
            for (c, v) in data.row(r).iter().enumerate() {
                if !(*v > 0.0 && *v < 1.0) {
                    return Err(CoreError::ProbabilityOutOfRange {
                        row: r,
                        col: c,
                        value: *v,
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(CoreError::RowNotNormalized { row: r, sum });
            }
        }
        Ok(Self { data, temperature })
    }

    pub fn temperature(&self) -> Temperature {
        self.temperature
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.data
    }
}

/// Affine classification head: `softmax(W r + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    weights: Matrix, // k x d
    bias: Vec<f64>,  // k
}

impl LinearProbe {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self, CoreError> {
        if bias.len() != weights.rows() {
            return Err(CoreError::ShapeMismatch {
                expected: format!("bias of length {}", weights.rows()),
                found: format!("length {}", bias.len()),
            });
        }
        check_finite(&weights)?;
        if let Some(pos) = bias.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite { row: 0, col: pos });
        }
        Ok(Self { weights, bias })
    }

    /// Zero-initialized probe with `k` classes over `d`-dimensional features.
    pub fn zeros(k: usize, d: usize) -> Self {
        Self {
            weights: Matrix::zeros(k, d),
            bias: vec![0.0; k],
        }
    }

    pub fn k(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Pre-softmax scores `W r + b`.
    pub fn logits(&self, r: &[f64]) -> Result<Vec<f64>, CoreError> {
        if r.len() != self.dim() {
            return Err(CoreError::ShapeMismatch {
                expected: format!("embedding of dim {}", self.dim()),
                found: format!("dim {}", r.len()),
            });
        }
        Ok(self
            .weights
            .as_slice()
            .chunks_exact(self.dim())
            .zip(&self.bias)
            .map(|(w, b)| crate::matrix::dot(w, r) + b)
            .collect())
    }
}
