use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::error::Error;
use crate::Result;

use super::system::Level;

/// Dimension of the NV-N14 product space.
pub const DIM: usize = 9;

pub(crate) type Matrix9 = SMatrix<Complex64, 9, 9>;

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGENVALUE_FLOOR: f64 = -1e-10;
const POPULATION_SUM_TOL: f64 = 1e-9;

/// Density matrix of the nine-level pair.
///
/// Construction and every pulse/channel operation preserve the physicality
/// invariants; [`DensityMatrix::validate`] re-checks them explicitly
/// (hermiticity and unit trace to 1e-12, eigenvalues above -1e-10).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    m: Matrix9,
}

impl DensityMatrix {
    /// Result of ideal optical pumping: electron in mS = 0, nuclear spin
    /// fully mixed over the three mI states.
    pub fn optically_initialized() -> Self {
        let mut p = [0.0; DIM];
        for m_i in [-1i8, 0, 1] {
            p[Level::new(0, m_i).unwrap().index()] = 1.0 / 3.0;
        }
        DensityMatrix::from_populations_unchecked(&p)
    }

    /// Maximally mixed state over all nine levels.
    pub fn fully_mixed() -> Self {
        DensityMatrix::from_populations_unchecked(&[1.0 / DIM as f64; DIM])
    }

    /// Diagonal state from explicit populations (basis order of
    /// [`Level::index`]). Populations must be nonnegative and sum to one
    /// within 1e-9; they are renormalized to an exact unit trace.
    pub fn from_populations(populations: &[f64; DIM]) -> Result<Self> {
        let mut sum = 0.0;
        for (i, &p) in populations.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::domain(format!(
                    "population {i} must be finite and nonnegative, got {p}"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > POPULATION_SUM_TOL {
            return Err(Error::domain(format!(
                "populations must sum to 1 within {POPULATION_SUM_TOL:e}, got {sum}"
            )));
        }
        let mut scaled = *populations;
        for p in &mut scaled {
            *p /= sum;
        }
        Ok(DensityMatrix::from_populations_unchecked(&scaled))
    }

    pub(crate) fn from_populations_unchecked(populations: &[f64; DIM]) -> Self {
        let mut m = Matrix9::zeros();
        for (i, &p) in populations.iter().enumerate() {
            m[(i, i)] = Complex64::new(p, 0.0);
        }
        DensityMatrix { m }
    }

    /// Conjugation by a unitary: rho -> U rho U^dagger.
    pub(crate) fn conjugated(&self, u: &Matrix9) -> Self {
        DensityMatrix {
            m: u * self.m * u.adjoint(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }

    /// Diagonal populations in basis order.
    pub fn populations(&self) -> [f64; DIM] {
        let mut p = [0.0; DIM];
        for i in 0..DIM {
            p[i] = self.m[(i, i)].re;
        }
        p
    }

    /// Nuclear-spin fractions (P+1, P0, P-1), traced over the electron.
    pub fn nuclear_fractions(&self) -> [f64; 3] {
        let p = self.populations();
        let mut f = [0.0; 3];
        for i in 0..DIM {
            f[i % 3] += p[i];
        }
        f
    }

    /// |tr(rho) - 1|.
    pub fn trace_drift(&self) -> f64 {
        let tr: Complex64 = (0..DIM).map(|i| self.m[(i, i)]).sum();
        (tr - Complex64::new(1.0, 0.0)).norm()
    }

    /// Re-check the physicality invariants.
    pub fn validate(&self) -> Result<()> {
        for i in 0..DIM {
            for j in 0..DIM {
                let asym = (self.m[(i, j)] - self.m[(j, i)].conj()).norm();
                if asym > HERMITICITY_TOL {
                    return Err(Error::Numerics(format!(
                        "hermiticity violated at ({i},{j}) by {asym:e}"
                    )));
                }
            }
        }
        let drift = self.trace_drift();
        if drift > TRACE_TOL {
            return Err(Error::Numerics(format!("trace drifted by {drift:e}")));
        }
        let eigenvalues = self.m.symmetric_eigenvalues();
        let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < EIGENVALUE_FLOOR {
            return Err(Error::Numerics(format!(
                "negative eigenvalue {min:e} below floor {EIGENVALUE_FLOOR:e}"
            )));
        }
        Ok(())
    }
}

/// Named starting states for experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Electron pumped to mS = 0, nuclear spin fully mixed.
    OpticallyInitialized,
    /// Maximally mixed over all nine levels.
    FullyMixed,
    /// Explicit diagonal populations in basis order.
    Custom([f64; DIM]),
}

/// Build the requested starting density matrix.
pub fn initial_state(kind: &InitialState) -> Result<DensityMatrix> {
    match kind {
        InitialState::OpticallyInitialized => Ok(DensityMatrix::optically_initialized()),
        InitialState::FullyMixed => Ok(DensityMatrix::fully_mixed()),
        InitialState::Custom(populations) => DensityMatrix::from_populations(populations),
    }
}
