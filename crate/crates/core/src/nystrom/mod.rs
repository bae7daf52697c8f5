//! Nyström discretization of the channel operator and its singular spectrum.
//!
//! The integral operator `(H f)(r) = ∫ h(r, t) f(t) dt` over the transmit
//! aperture is sampled on tensor Gauss-Legendre grids and symmetrically
//! weighted, `A = W_r^{1/2} K W_t^{1/2}`, so that the singular values of `A`
//! approximate those of `H` directly and the columns of `U`, `V` divided by
//! the square-root weights sample the singular functions.
//!
//! All factorizations run with sequential parallelism so that results do not
//! depend on the size of the thread pool. Matrix assembly is parallel across
//! columns; each entry depends only on its own indices.

mod quadrature;

pub use quadrature::{gauss_legendre_grid, gauss_legendre_rule, QuadratureGrid};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::matmul::matmul;
use faer::linalg::svd::{self, ComputeSvdVectors};
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{LinkGeometry, PlanePoint};
use crate::kernels::{kernel_value, KernelKind, Medium};

/// Default nodes per aperture side.
pub const DEFAULT_N_PER_DIM: usize = 32;
/// Default relative tolerance for grid refinement.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Largest grid refinement will try.
pub const DEFAULT_N_CAP: usize = 128;

/// Weighted kernel matrix on a pair of quadrature grids.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    matrix: Mat<Complex64>,
    rx_grid: QuadratureGrid,
    tx_grid: QuadratureGrid,
    kind: Option<KernelKind>,
}

impl DiscretizedOperator {
    /// `M_r x M_t` matrix with entries `sqrt(w_i) h(r_i, t_j) sqrt(w_j)`.
    pub fn matrix(&self) -> MatRef<'_, Complex64> {
        self.matrix.as_ref()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn rx_grid(&self) -> &QuadratureGrid {
        &self.rx_grid
    }

    pub fn tx_grid(&self) -> &QuadratureGrid {
        &self.tx_grid
    }

    /// Kernel model, or `None` for operators built from a custom kernel.
    pub fn kind(&self) -> Option<KernelKind> {
        self.kind
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        let (m, n) = self.shape();
        (0..n)
            .map(|j| (0..m).map(|i| self.matrix[(i, j)].norm_sqr()).sum::<f64>())
            .sum()
    }

    pub fn into_matrix(self) -> Mat<Complex64> {
        self.matrix
    }
}

/// Samples one of the channel kernels on the given grids.
pub fn build_operator(
    kind: KernelKind,
    med: &Medium,
    geom: &LinkGeometry,
    rx_grid: &QuadratureGrid,
    tx_grid: &QuadratureGrid,
) -> Result<DiscretizedOperator> {
    let mut op = try_build_operator_with(rx_grid, tx_grid, |r, t| kernel_value(kind, med, geom, r, t))?;
    op.kind = Some(kind);
    Ok(op)
}

/// Samples an arbitrary kernel `h(r, t)` on the given grids.
pub fn build_operator_with<F>(rx_grid: &QuadratureGrid, tx_grid: &QuadratureGrid, kernel: F) -> DiscretizedOperator
where
    F: Fn(PlanePoint, PlanePoint) -> Complex64 + Sync,
{
    match try_build_operator_with(rx_grid, tx_grid, |r, t| Ok(kernel(r, t))) {
        Ok(op) => op,
        Err(_) => unreachable!("infallible kernel"),
    }
}

/// Fallible variant of [`build_operator_with`].
pub fn try_build_operator_with<F>(
    rx_grid: &QuadratureGrid,
    tx_grid: &QuadratureGrid,
    kernel: F,
) -> Result<DiscretizedOperator>
where
    F: Fn(PlanePoint, PlanePoint) -> Result<Complex64> + Sync,
{
    let (m, n) = (rx_grid.len(), tx_grid.len());
    if m == 0 || n == 0 {
        return Err(Error::domain("quadrature grids must be nonempty"));
    }
    let rx_sqrt_w: Vec<f64> = rx_grid.weights().iter().map(|w| w.sqrt()).collect();
    let rx_points = rx_grid.points();
    let tx_points = tx_grid.points();
    let tx_weights = tx_grid.weights();

    // column-major, one column per transmit node
    let mut data = vec![Complex64::new(0.0, 0.0); m * n];
    data.par_chunks_mut(m)
        .enumerate()
        .try_for_each(|(j, col)| -> Result<()> {
            let t = tx_points[j];
            let sw_t = tx_weights[j].sqrt();
            for (i, out) in col.iter_mut().enumerate() {
                let value = kernel(rx_points[i], t)? * (rx_sqrt_w[i] * sw_t);
                if !(value.re.is_finite() && value.im.is_finite()) {
                    return Err(Error::domain(format!(
                        "kernel produced a non-finite value at r={:?}, t={t:?}",
                        rx_points[i]
                    )));
                }
                *out = value;
            }
            Ok(())
        })?;
    let matrix = Mat::from_fn(m, n, |i, j| data[j * m + i]);
    Ok(DiscretizedOperator {
        matrix,
        rx_grid: rx_grid.clone(),
        tx_grid: tx_grid.clone(),
        kind: None,
    })
}

/// Singular functions sampled at the quadrature nodes.
///
/// Column `i` of `left` samples `phi_i` on the receive grid and column `i` of
/// `right` samples `psi_i` on the transmit grid, so that
/// `h(r, t) ≈ Σ_i phi_i(r) conj(psi_i(t)) sigma_i`.
#[derive(Debug, Clone)]
pub struct SingularVectors {
    pub left: Mat<Complex64>,
    pub right: Mat<Complex64>,
}

/// Descending singular values of a discretized operator.
#[derive(Debug, Clone)]
pub struct SingularSpectrum {
    values: Vec<f64>,
    vectors: Option<SingularVectors>,
    rx_grid: QuadratureGrid,
    tx_grid: QuadratureGrid,
    kind: Option<KernelKind>,
    converged: bool,
}

impl SingularSpectrum {
    /// Spectrum from externally supplied values (e.g. read back from disk).
    /// Values are sorted into descending order.
    pub fn from_values(mut values: Vec<f64>, kind: Option<KernelKind>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain("singular values must be finite and nonnegative"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let empty = QuadratureGrid::empty();
        Ok(SingularSpectrum {
            values,
            vectors: None,
            rx_grid: empty.clone(),
            tx_grid: empty,
            kind,
            converged: true,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vectors(&self) -> Option<&SingularVectors> {
        self.vectors.as_ref()
    }

    pub fn rx_grid(&self) -> &QuadratureGrid {
        &self.rx_grid
    }

    pub fn tx_grid(&self) -> &QuadratureGrid {
        &self.tx_grid
    }

    pub fn kind(&self) -> Option<KernelKind> {
        self.kind
    }

    /// Nodes per side of the grids the spectrum was computed on.
    pub fn n_per_dim(&self) -> usize {
        self.rx_grid.n_per_dim()
    }

    /// `false` only when grid refinement hit its cap before meeting the
    /// tolerance.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

fn svd_error(op: &DiscretizedOperator) -> Error {
    let (rows, cols) = op.shape();
    Error::Numerical {
        what: "singular value decomposition",
        rows,
        cols,
    }
}

/// Full thin SVD of the weighted matrix, with node-sampled singular functions.
pub fn singular_spectrum(op: &DiscretizedOperator) -> Result<SingularSpectrum> {
    let a = op.matrix();
    let (m, n) = a.shape();
    let k = m.min(n);
    let par = Par::Seq;
    let mut s = faer::diag::Diag::<Complex64>::zeros(k);
    let mut u = Mat::<Complex64>::zeros(m, k);
    let mut v = Mat::<Complex64>::zeros(n, k);
    let mut buf = MemBuffer::new(svd::svd_scratch::<Complex64>(
        m,
        n,
        ComputeSvdVectors::Thin,
        ComputeSvdVectors::Thin,
        par,
        Default::default(),
    ));
    svd::svd(
        a,
        s.as_mut(),
        Some(u.as_mut()),
        Some(v.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|_| svd_error(op))?;

    let values: Vec<f64> = s.column_vector().iter().map(|z| z.re).collect();
    let rx_w = op.rx_grid.weights();
    let tx_w = op.tx_grid.weights();
    let left = Mat::from_fn(m, k, |i, c| u[(i, c)] / rx_w[i].sqrt());
    let right = Mat::from_fn(n, k, |i, c| v[(i, c)] / tx_w[i].sqrt());
    Ok(SingularSpectrum {
        values,
        vectors: Some(SingularVectors { left, right }),
        rx_grid: op.rx_grid.clone(),
        tx_grid: op.tx_grid.clone(),
        kind: op.kind,
        converged: true,
    })
}

/// Singular values only; cheaper than [`singular_spectrum`].
pub fn singular_values(op: &DiscretizedOperator) -> Result<SingularSpectrum> {
    let values = raw_singular_values(op.matrix()).map_err(|_| svd_error(op))?;
    Ok(SingularSpectrum {
        values,
        vectors: None,
        rx_grid: op.rx_grid.clone(),
        tx_grid: op.tx_grid.clone(),
        kind: op.kind,
        converged: true,
    })
}

fn raw_singular_values(a: MatRef<'_, Complex64>) -> std::result::Result<Vec<f64>, svd::SvdError> {
    let (m, n) = a.shape();
    let par = Par::Seq;
    let mut s = faer::diag::Diag::<Complex64>::zeros(m.min(n));
    let mut buf = MemBuffer::new(svd::svd_scratch::<Complex64>(
        m,
        n,
        ComputeSvdVectors::No,
        ComputeSvdVectors::No,
        par,
        Default::default(),
    ));
    svd::svd(a, s.as_mut(), None, None, par, MemStack::new(&mut buf), Default::default())?;
    Ok(s.column_vector().iter().map(|z| z.re).collect())
}

/// Eigenvalues of the Gram matrix `A A^H` (or `A^H A`, whichever is smaller),
/// in descending order.
pub fn gram_eigenvalues(op: &DiscretizedOperator) -> Result<Vec<f64>> {
    let a = op.matrix();
    let (m, n) = a.shape();
    let par = Par::Seq;
    let dim = m.min(n);
    let mut gram = Mat::<Complex64>::zeros(dim, dim);
    if m <= n {
        matmul(gram.as_mut(), Accum::Replace, a, a.adjoint(), Complex64::new(1.0, 0.0), par);
    } else {
        matmul(gram.as_mut(), Accum::Replace, a.adjoint(), a, Complex64::new(1.0, 0.0), par);
    }
    let mut s = faer::diag::Diag::<Complex64>::zeros(dim);
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<Complex64>(
        dim,
        ComputeEigenvectors::No,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        gram.as_ref(),
        s.as_mut(),
        None,
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|_| Error::Numerical {
        what: "self-adjoint eigendecomposition",
        rows: dim,
        cols: dim,
    })?;
    let mut eig: Vec<f64> = s.column_vector().iter().map(|z| z.re).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig)
}

/// Grid-refinement settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub n_start: usize,
    pub tol: f64,
    pub k_track: usize,
    pub n_cap: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            n_start: 8,
            tol: DEFAULT_TOL,
            k_track: 10,
            n_cap: DEFAULT_N_CAP,
        }
    }
}

/// Largest change between the leading `k` values of two spectra.
///
/// Each change is relative to the newer value, with values below
/// `sqrt(eps) * sigma_1` measured against that floor instead so that
/// numerically-zero tails do not block convergence.
pub fn max_relative_change(old: &[f64], new: &[f64], k: usize) -> f64 {
    let lead = new.first().copied().unwrap_or(0.0);
    let floor = f64::EPSILON.sqrt() * lead;
    let k = k.min(old.len()).min(new.len());
    (0..k)
        .map(|i| {
            let denom = new[i].abs().max(floor);
            if denom > 0.0 {
                (new[i] - old[i]).abs() / denom
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Doubles the grid resolution until the leading `k_track` singular values
/// change by less than `tol`, or the next grid would exceed `n_cap`.
///
/// `build` returns the operator for a given number of nodes per side. The
/// returned spectrum carries values only.
pub fn refine_with<B>(opts: &RefineOptions, mut build: B) -> Result<SingularSpectrum>
where
    B: FnMut(usize) -> Result<DiscretizedOperator>,
{
    if opts.n_start < 1 {
        return Err(Error::domain("n_start must be at least 1"));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::domain(format!("tolerance must be nonnegative, got {}", opts.tol)));
    }
    let mut n = opts.n_start;
    let mut current = singular_values(&build(n)?)?;
    loop {
        let next_n = n * 2;
        if next_n > opts.n_cap {
            log::warn!(
                "refinement stopped at n = {n} (cap {}) without reaching tol = {:e}",
                opts.n_cap,
                opts.tol
            );
            current.converged = false;
            return Ok(current);
        }
        let next = singular_values(&build(next_n)?)?;
        let change = max_relative_change(&current.values, &next.values, opts.k_track);
        log::debug!("refinement n = {n} -> {next_n}: max relative change {change:e}");
        current = next;
        n = next_n;
        if change < opts.tol {
            current.converged = true;
            return Ok(current);
        }
    }
}

/// Grid refinement for one of the channel kernels, with equal node counts on
/// both apertures.
pub fn refine_until_converged(
    kind: KernelKind,
    med: &Medium,
    geom: &LinkGeometry,
    opts: &RefineOptions,
) -> Result<SingularSpectrum> {
    if opts.n_start < 4 {
        return Err(Error::domain(format!("n_start must be at least 4, got {}", opts.n_start)));
    }
    refine_with(opts, |n| {
        let rx = gauss_legendre_grid(geom.rx(), n)?;
        let tx = gauss_legendre_grid(geom.tx(), n)?;
        build_operator(kind, med, geom, &rx, &tx)
    })
}

/// Spectrum of one of the channel kernels on `n_per_dim x n_per_dim` grids
/// over both apertures.
pub fn compute_spectrum(
    kind: KernelKind,
    med: &Medium,
    geom: &LinkGeometry,
    n_per_dim: usize,
    with_vectors: bool,
) -> Result<SingularSpectrum> {
    let rx = gauss_legendre_grid(geom.rx(), n_per_dim)?;
    let tx = gauss_legendre_grid(geom.tx(), n_per_dim)?;
    let op = build_operator(kind, med, geom, &rx, &tx)?;
    if with_vectors {
        singular_spectrum(&op)
    } else {
        singular_values(&op)
    }
}
