//! Elementary symmetric functions of a principal-curvature vector and the
//! positivity cones Gamma_m^+ = { kappa : sigma_1(kappa) > 0, ..., sigma_m(kappa) > 0 }.
//!
//! sigma_m is evaluated with the prefix recurrence
//!   e[j] <- e[j] + kappa_i * e[j-1]   (j descending),
//! which is exact in the algebraic sense and numerically stable at the
//! magnitudes the flow produces. Derivatives are reduced to deleted
//! symmetric functions: d sigma_m / d kappa_i = sigma_{m-1}(kappa | i).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SymfunError {
    #[error("curvature vector must be non-empty")]
    Empty,
    #[error("curvature entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("excluded index {index} out of range for dimension {n}")]
    ExcludedOutOfRange { index: usize, n: usize },
    #[error("excluded index {index} listed more than once")]
    ExcludedDuplicate { index: usize },
    #[error("matrix dimension {matrix} does not match curvature dimension {n}")]
    DimensionMismatch { matrix: usize, n: usize },
}

/// Principal-curvature vector. Entries are finite; the vector is non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaVector {
    values: Vec<f64>,
}

impl KappaVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SymfunError> {
        if values.is_empty() {
            return Err(SymfunError::Empty);
        }
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(SymfunError::NonFinite { index });
            }
        }
        Ok(KappaVector { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, SymfunError> {
        Self::new(values.to_vec())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_sorted_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }

    /// Copy with entries rearranged into non-increasing order.
    pub fn sorted_non_increasing(&self) -> KappaVector {
        let mut values = self.values.clone();
        values.sort_by(|a, b| b.partial_cmp(a).expect("entries are finite"));
        KappaVector { values }
    }
}

/// Binomial coefficient as a float; 0 when k > n. Exact for every (n, k)
/// this crate meets (values stay far below 2^53).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

fn sigma_of_slice(m: usize, values: &[f64]) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m > values.len() {
        return 0.0;
    }
    let mut e = vec![0.0f64; m + 1];
    e[0] = 1.0;
    for (i, &v) in values.iter().enumerate() {
        let top = m.min(i + 1);
        for j in (1..=top).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[m]
}

/// sigma_m(kappa), with sigma_0 = 1 and sigma_m = 0 for m > dim.
pub fn sigma(m: usize, kappa: &KappaVector) -> f64 {
    sigma_of_slice(m, &kappa.values)
}

/// All of sigma_1 .. sigma_n in a single recurrence pass.
pub fn sigma_all(kappa: &KappaVector) -> Vec<f64> {
    let n = kappa.dim();
    let mut e = vec![0.0f64; n + 1];
    e[0] = 1.0;
    for (i, &v) in kappa.values.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e.remove(0);
    e
}

/// sigma_m of the sub-vector with the listed positions removed,
/// sigma_m(kappa | excluded). Indices are 0-based, must be in range and
/// pairwise distinct. Removing every entry leaves sigma_0 = 1, sigma_{m>0} = 0.
pub fn sigma_deleted(m: usize, kappa: &KappaVector, excluded: &[usize]) -> Result<f64, SymfunError> {
    let n = kappa.dim();
    let mut drop = vec![false; n];
    for &index in excluded {
        if index >= n {
            return Err(SymfunError::ExcludedOutOfRange { index, n });
        }
        if drop[index] {
            return Err(SymfunError::ExcludedDuplicate { index });
        }
        drop[index] = true;
    }
    let remaining: Vec<f64> = kappa
        .values
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(&v, _)| v)
        .collect();
    Ok(sigma_of_slice(m, &remaining))
}

/// Gradient of sigma_m: component i equals sigma_{m-1}(kappa | i).
pub fn sigma_gradient(m: usize, kappa: &KappaVector) -> Vec<f64> {
    let n = kappa.dim();
    if m == 0 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| sigma_deleted(m - 1, kappa, &[i]).expect("index in range"))
        .collect()
}

/// Dense symmetric matrix; set() writes both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    a: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        SymmetricMatrix { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }
}

/// Quadratic form of the second derivative of sigma_k, viewed as a function
/// of a symmetric matrix and evaluated where that matrix is diag(kappa):
///
///   Q(eta) = sum_{p != q} sigma_{k-2}(kappa | p,q) * (eta_pp eta_qq - eta_pq^2).
///
/// The pure second derivative in two distinct diagonal directions is
/// sigma_{k-2}(kappa | p,q); repeated-direction diagonal entries vanish; the
/// mixed eta_pq eta_qp block carries the opposite sign. Zero for k < 2
/// (sigma_1 is linear).
pub fn sigma_hessian_form(
    k: usize,
    kappa: &KappaVector,
    eta: &SymmetricMatrix,
) -> Result<f64, SymfunError> {
    let n = kappa.dim();
    if eta.dim() != n {
        return Err(SymfunError::DimensionMismatch { matrix: eta.dim(), n });
    }
    if k < 2 {
        return Ok(0.0);
    }
    let mut q = 0.0;
    for p in 0..n {
        for r in (p + 1)..n {
            let w = sigma_deleted(k - 2, kappa, &[p, r])?;
            let d = eta.get(p, p) * eta.get(r, r) - eta.get(p, r) * eta.get(p, r);
            q += 2.0 * w * d;
        }
    }
    Ok(q)
}

/// Default relative floor used when classifying cone membership.
pub const DEFAULT_CONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConeMembership {
    /// Largest m with sigma_j above the scaled floor for every j <= m.
    pub max_k: usize,
    /// sigma_1 .. sigma_n.
    pub per_j: Vec<f64>,
}

/// Classifies the deepest cone Gamma_m^+ containing kappa. The floor for
/// sigma_j scales as tol * (1 + |kappa|_inf)^j so that the test is invariant
/// under the magnitudes sigma_j itself picks up.
pub fn cone_membership(kappa: &KappaVector, tol: f64) -> ConeMembership {
    let per_j = sigma_all(kappa);
    let scale = 1.0 + kappa.max_abs();
    let mut max_k = 0;
    let mut floor = tol;
    for (j, &s) in per_j.iter().enumerate() {
        floor *= scale;
        if s > floor {
            max_k = j + 1;
        } else {
            break;
        }
    }
    ConeMembership { max_k, per_j }
}
