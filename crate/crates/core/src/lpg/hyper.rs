use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{encode_features, Object, N_FEATURES};
use crate::error::{Error, Result};

/// Size of the pairwise-interaction feature basis: base features,
/// self-interactions, then cross terms `i < j` in lexicographic order.
pub const QUADRATIC_FEATURES: usize = 2 * N_FEATURES + N_FEATURES * (N_FEATURES - 1) / 2;

/// Default latent dimension.
pub const DEFAULT_LATENT_DIM: usize = N_FEATURES;

/// Sparsity structure of the saliency matrix and the feature basis it acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    /// Upper-triangular (trapezoidal when non-square) over the base features.
    Full,
    /// Diagonal over the base features.
    Diagonal,
    /// Diagonal over the expanded pairwise-interaction basis.
    Quadratic,
}

impl Structure {
    pub fn n_features(self) -> usize {
        match self {
            Structure::Full | Structure::Diagonal => N_FEATURES,
            Structure::Quadratic => QUADRATIC_FEATURES,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Structure::Full => "full",
            Structure::Diagonal => "diagonal",
            Structure::Quadratic => "quadratic",
        }
    }

    /// Whether `S[i][j]` is a free parameter for an `n × d` saliency matrix.
    ///
    /// For the full structure the zero band sits below the diagonal that ends
    /// in the bottom-right corner when `d < n`, so that every feature row keeps
    /// at least one free entry; for `d >= n` this is the usual upper triangle.
    pub fn is_free(self, i: usize, j: usize, n: usize, d: usize) -> bool {
        match self {
            Structure::Full => i <= j + n.saturating_sub(d),
            Structure::Diagonal | Structure::Quadratic => i == j,
        }
    }

    /// Feature embedding of an object (or the null outcome) in this basis.
    pub fn embed(self, object: Option<Object>) -> DVector<f64> {
        let phi = encode_features(object);
        match self {
            Structure::Full | Structure::Diagonal => DVector::from_row_slice(phi.as_slice()),
            Structure::Quadratic => DVector::from_vec(expand_quadratic(phi.as_slice())),
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Expand a base feature vector into `[φ, φ_i², φ_iφ_j (i<j)]`.
pub fn expand_quadratic(phi: &[f64]) -> Vec<f64> {
    let n = phi.len();
    let mut out = Vec::with_capacity(2 * n + n * (n - 1) / 2);
    out.extend_from_slice(phi);
    out.extend(phi.iter().map(|x| x * x));
    for i in 0..n {
        for j in i + 1..n {
            out.push(phi[i] * phi[j]);
        }
    }
    out
}

/// Saliency matrix, temperature and initial latent value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HyperparametersFile", into = "HyperparametersFile")]
pub struct LpgHyperparameters {
    structure: Structure,
    saliency: DMatrix<f64>,
    log_tau: f64,
    w0: f64,
}

impl LpgHyperparameters {
    /// Identity saliency (on the free pattern), `τ = 1`, `w0 = 0`.
    pub fn initial(structure: Structure, latent_dim: usize) -> Self {
        let n = structure.n_features();
        let d = match structure {
            Structure::Full => latent_dim,
            _ => n,
        };
        let saliency = DMatrix::from_fn(n, d, |i, j| if i == j { 1.0 } else { 0.0 });
        LpgHyperparameters {
            structure,
            saliency,
            log_tau: 0.0,
            w0: 0.0,
        }
    }

    pub fn new(structure: Structure, saliency: DMatrix<f64>, log_tau: f64, w0: f64) -> Result<Self> {
        let n = structure.n_features();
        let (rows, d) = saliency.shape();
        if rows != n || d == 0 {
            return Err(Error::Invalid(format!(
                "{structure} saliency must have {n} rows and at least one column, got {rows}x{d}"
            )));
        }
        if structure != Structure::Full && d != n {
            return Err(Error::Invalid(format!("{structure} saliency must be square")));
        }
        for i in 0..n {
            for j in 0..d {
                let v = saliency[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Invalid(format!("non-finite saliency entry ({i}, {j})")));
                }
                if !structure.is_free(i, j, n, d) && v != 0.0 {
                    return Err(Error::Invalid(format!(
                        "saliency entry ({i}, {j}) = {v} violates the {structure} zero pattern"
                    )));
                }
            }
        }
        if !log_tau.is_finite() || !w0.is_finite() {
            return Err(Error::Invalid("non-finite log_tau or w0".into()));
        }
        Ok(LpgHyperparameters {
            structure,
            saliency,
            log_tau,
            w0,
        })
    }

    /// Full-structure hyperparameters from a square table in canonical row order.
    pub fn from_square_table(table: &[[f64; N_FEATURES]; N_FEATURES], tau: f64, w0: f64) -> Result<Self> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::Invalid(format!("temperature must be positive, got {tau}")));
        }
        let s = DMatrix::from_fn(N_FEATURES, N_FEATURES, |i, j| table[i][j]);
        Self::new(Structure::Full, s, tau.ln(), w0)
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn saliency(&self) -> &DMatrix<f64> {
        &self.saliency
    }

    pub fn log_tau(&self) -> f64 {
        self.log_tau
    }

    pub fn tau(&self) -> f64 {
        self.log_tau.exp()
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn n_features(&self) -> usize {
        self.saliency.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.saliency.ncols()
    }

    pub fn embed(&self, object: Option<Object>) -> DVector<f64> {
        self.structure.embed(object)
    }

    /// `w0 · 1`.
    pub fn initial_latent(&self) -> DVector<f64> {
        DVector::from_element(self.latent_dim(), self.w0)
    }

    /// Free saliency positions in row-major order.
    pub fn free_entries(&self) -> Vec<(usize, usize)> {
        let (n, d) = self.saliency.shape();
        (0..n)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .filter(|&(i, j)| self.structure.is_free(i, j, n, d))
            .collect()
    }

    /// Number of fitted scalars: free saliency entries, `log τ` and `w0`.
    pub fn n_params(&self) -> usize {
        self.free_entries().len() + 2
    }

    /// Flatten to `[free S entries..., log τ, w0]`.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .free_entries()
            .into_iter()
            .map(|ij| self.saliency[ij])
            .collect();
        p.push(self.log_tau);
        p.push(self.w0);
        p
    }

    /// Inverse of [`to_params`](Self::to_params); constrained entries stay zero.
    pub fn with_params(&self, params: &[f64]) -> Self {
        let free = self.free_entries();
        assert_eq!(params.len(), free.len() + 2, "parameter vector length");
        let mut out = self.clone();
        out.saliency.fill(0.0);
        for (k, ij) in free.into_iter().enumerate() {
            out.saliency[ij] = params[k];
        }
        out.log_tau = params[params.len() - 2];
        out.w0 = params[params.len() - 1];
        out
    }

    pub fn with_log_tau(mut self, log_tau: f64) -> Self {
        self.log_tau = log_tau;
        self
    }

    pub fn with_w0(mut self, w0: f64) -> Self {
        self.w0 = w0;
        self
    }
}

/// On-disk layout: `{"variant", "d", "saliency": [[row]...], "log_tau", "w0"}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HyperparametersFile {
    variant: Structure,
    d: usize,
    saliency: Vec<Vec<f64>>,
    log_tau: f64,
    w0: f64,
}

impl From<LpgHyperparameters> for HyperparametersFile {
    fn from(hp: LpgHyperparameters) -> Self {
        let saliency = hp
            .saliency
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        HyperparametersFile {
            variant: hp.structure,
            d: hp.latent_dim(),
            saliency,
            log_tau: hp.log_tau,
            w0: hp.w0,
        }
    }
}

impl TryFrom<HyperparametersFile> for LpgHyperparameters {
    type Error = Error;

    fn try_from(f: HyperparametersFile) -> Result<Self> {
        let n = f.saliency.len();
        if f.saliency.iter().any(|r| r.len() != f.d) {
            return Err(Error::Invalid(format!("saliency rows must all have length d = {}", f.d)));
        }
        let s = DMatrix::from_fn(n, f.d, |i, j| f.saliency[i][j]);
        LpgHyperparameters::new(f.variant, s, f.log_tau, f.w0)
    }
}
