//! Singular spectra and spatial degrees of freedom of line-of-sight channels
//! between two planar continuous-aperture arrays.
//!
//! The pipeline is: describe the link ([`geometry`]), pick a kernel model
//! ([`kernels`]), discretize the channel operator by Nyström quadrature and
//! take its SVD ([`nystrom`]), then compare the spectrum against the
//! closed-form degrees of freedom ([`landau`]). [`capacity`] allocates power
//! over the resulting parallel channels.

pub mod capacity;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod landau;
pub mod nystrom;

pub use capacity::{water_fill, WaterfillResult};
pub use error::{Error, Result};
pub use geometry::{
    projected_submatrix_det, rotation_from_euler, ApertureSpec, EulerAngles, LinkGeometry,
    PlanePoint, Point3, RotationMatrix,
};
pub use kernels::{KernelKind, Medium};
pub use landau::{analyze_polarization, count_edof, dof_closed_form, DofReport};
pub use nystrom::{
    build_operator, compute_spectrum, gauss_legendre_grid, refine_until_converged,
    singular_spectrum, singular_values, DiscretizedOperator, QuadratureGrid, RefineOptions,
    SingularSpectrum,
};

pub use num_complex::Complex64;
