//! Families R(t) of symmetric endomorphisms on V = R^m over a closed
//! interval, the coefficient data of the Jacobi equation Y'' + R(t)Y = 0.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::linalg::sym_op_norm;
use nalgebra::DMatrix;

/// Finite trigonometric series c0 + sum_q (a_q cos(q w0 t) + b_q sin(q w0 t)).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSeries {
    pub constant: f64,
    pub omega0: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl ScalarSeries {
    pub fn constant(c: f64) -> Self {
        ScalarSeries {
            constant: c,
            omega0: 0.0,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let mut v = self.constant;
        for (q, &a) in self.cos.iter().enumerate() {
            v += a * ((q as f64 + 1.0) * self.omega0 * t).cos();
        }
        for (q, &b) in self.sin.iter().enumerate() {
            v += b * ((q as f64 + 1.0) * self.omega0 * t).sin();
        }
        v
    }

    fn scaled(&self, c: f64) -> Self {
        ScalarSeries {
            constant: c * self.constant,
            omega0: self.omega0,
            cos: self.cos.iter().map(|a| c * a).collect(),
            sin: self.sin.iter().map(|b| c * b).collect(),
        }
    }

    fn average(&self, other: &ScalarSeries) -> ScalarSeries {
        let n_cos = self.cos.len().max(other.cos.len());
        let n_sin = self.sin.len().max(other.sin.len());
        let get = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(0.0);
        ScalarSeries {
            constant: 0.5 * (self.constant + other.constant),
            omega0: self.omega0,
            cos: (0..n_cos)
                .map(|i| 0.5 * (get(&self.cos, i) + get(&other.cos, i)))
                .collect(),
            sin: (0..n_sin)
                .map(|i| 0.5 * (get(&self.sin, i) + get(&other.sin, i)))
                .collect(),
        }
    }
}

/// Natural cubic spline on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct CubicSpline {
    t0: f64,
    dt: f64,
    y: Vec<f64>,
    d2: Vec<f64>,
}

impl CubicSpline {
    pub fn new(t0: f64, dt: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        let mut d2 = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the natural spline system
            // d2[i-1] + 4 d2[i] + d2[i+1] = 6 (y[i-1] - 2y[i] + y[i+1]) / dt^2.
            let inner = n - 2;
            let mut diag = vec![4.0; inner];
            let mut rhs: Vec<f64> = (1..n - 1)
                .map(|i| 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (dt * dt))
                .collect();
            for i in 1..inner {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                rhs[i] -= w * rhs[i - 1];
            }
            d2[n - 2] = rhs[inner - 1] / diag[inner - 1];
            for i in (1..n - 2).rev() {
                d2[i] = (rhs[i - 1] - d2[i + 1]) / diag[i - 1];
            }
        }
        CubicSpline { t0, dt, y, d2 }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let n = self.y.len();
        if n == 1 {
            return self.y[0];
        }
        let pos = (t - self.t0) / self.dt;
        let i = (pos.floor() as isize).clamp(0, n as isize - 2) as usize;
        let tau = pos - i as f64;
        let a = 1.0 - tau;
        self.y[i] * a
            + self.y[i + 1] * tau
            + self.dt * self.dt / 6.0
                * ((a * a * a - a) * self.d2[i] + (tau * tau * tau - tau) * self.d2[i + 1])
    }
}

#[derive(Clone, Debug)]
pub(crate) enum CurvatureKind {
    Constant {
        matrix: DMatrix<f64>,
    },
    Diagonal {
        entries: Vec<ScalarSeries>,
    },
    Fourier {
        /// m*m entries, row-major, symmetrized coefficient-wise.
        entries: Vec<ScalarSeries>,
    },
    Sampled {
        t0: f64,
        dt: f64,
        matrices: Vec<DMatrix<f64>>,
        splines: Vec<CubicSpline>,
    },
    Sum {
        terms: Vec<CurvatureFamily>,
    },
}

/// A family of symmetric m x m matrices R(t) over a closed domain, together
/// with an upper bound C^2 >= sup_t |R(t)|_op.
#[derive(Clone, Debug)]
pub struct CurvatureFamily {
    dim: usize,
    domain: Interval,
    pub(crate) kind: CurvatureKind,
    norm_bound: f64,
}

/// Number of samples used by the norm-bound heuristic before refinement.
const NORM_SCOUT_SAMPLES: usize = 1000;
const NORM_MAX_SAMPLES: usize = 400_000;
const NORM_MARGIN: f64 = 1.1;

impl CurvatureFamily {
    pub fn constant(dim: usize, matrix: DMatrix<f64>, domain: Interval) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidScenario("dimension must be positive".into()));
        }
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: matrix.nrows(),
            });
        }
        let sym = 0.5 * (&matrix + matrix.transpose());
        let bound = sym_op_norm(&sym);
        Ok(CurvatureFamily {
            dim,
            domain,
            kind: CurvatureKind::Constant { matrix: sym },
            norm_bound: bound,
        })
    }

    /// Scalar curvature kappa * I.
    pub fn constant_scalar(dim: usize, kappa: f64, domain: Interval) -> Result<Self> {
        Self::constant(dim, DMatrix::identity(dim, dim) * kappa, domain)
    }

    pub fn diagonal(entries: Vec<ScalarSeries>, domain: Interval) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidScenario("dimension must be positive".into()));
        }
        let dim = entries.len();
        let mut fam = CurvatureFamily {
            dim,
            domain,
            kind: CurvatureKind::Diagonal { entries },
            norm_bound: 0.0,
        };
        fam.norm_bound = fam.sampled_norm_bound();
        Ok(fam)
    }

    /// Full matrix of trigonometric series, given row-major; the coefficient
    /// matrices are symmetrized at construction so R(t) is symmetric exactly.
    pub fn fourier(dim: usize, entries: Vec<ScalarSeries>, domain: Interval) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidScenario("dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        let mut sym = entries.clone();
        for i in 0..dim {
            for j in 0..dim {
                sym[i * dim + j] = entries[i * dim + j].average(&entries[j * dim + i]);
            }
        }
        let mut fam = CurvatureFamily {
            dim,
            domain,
            kind: CurvatureKind::Fourier { entries: sym },
            norm_bound: 0.0,
        };
        fam.norm_bound = fam.sampled_norm_bound();
        Ok(fam)
    }

    /// Uniformly sampled matrices interpolated by natural cubic splines per
    /// entry; (R + R^T)/2 is taken at evaluation time.
    pub fn sampled(t0: f64, dt: f64, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if matrices.len() < 2 {
            return Err(Error::InvalidScenario(
                "sampled family needs at least two grid matrices".into(),
            ));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidScenario("grid spacing must be positive".into()));
        }
        let dim = matrices[0].nrows();
        for m in &matrices {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m.nrows(),
                });
            }
        }
        let domain = Interval::new(t0, t0 + dt * (matrices.len() - 1) as f64)?;
        let mut splines = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let vals: Vec<f64> = matrices.iter().map(|m| m[(i, j)]).collect();
                splines.push(CubicSpline::new(t0, dt, vals));
            }
        }
        let bound = matrices
            .iter()
            .map(|m| sym_op_norm(&(0.5 * (m + m.transpose()))))
            .fold(0.0_f64, f64::max)
            * NORM_MARGIN;
        Ok(CurvatureFamily {
            dim,
            domain,
            kind: CurvatureKind::Sampled {
                t0,
                dt,
                matrices,
                splines,
            },
            norm_bound: bound,
        })
    }

    /// Pointwise sum of families of equal dimension; the domain is the
    /// intersection of the term domains.
    pub fn sum(terms: Vec<CurvatureFamily>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidScenario("sum of zero families".into()))?;
        let dim = first.dim;
        let mut domain = first.domain;
        for t in &terms {
            if t.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: t.dim,
                });
            }
            domain = domain.intersect(&t.domain)?;
        }
        let bound = terms.iter().map(|t| t.norm_bound).sum();
        Ok(CurvatureFamily {
            dim,
            domain,
            kind: CurvatureKind::Sum { terms },
            norm_bound: bound,
        })
    }

    /// Deep copy with all coefficients multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let kind = match &self.kind {
            CurvatureKind::Constant { matrix } => CurvatureKind::Constant {
                matrix: matrix * c,
            },
            CurvatureKind::Diagonal { entries } => CurvatureKind::Diagonal {
                entries: entries.iter().map(|s| s.scaled(c)).collect(),
            },
            CurvatureKind::Fourier { entries } => CurvatureKind::Fourier {
                entries: entries.iter().map(|s| s.scaled(c)).collect(),
            },
            CurvatureKind::Sampled {
                t0, dt, matrices, ..
            } => {
                let scaled: Vec<DMatrix<f64>> = matrices.iter().map(|m| m * c).collect();
                return CurvatureFamily::sampled(*t0, *dt, scaled)
                    .expect("scaling preserves validity")
                    .with_norm_bound(self.norm_bound * c.abs());
            }
            CurvatureKind::Sum { terms } => CurvatureKind::Sum {
                terms: terms.iter().map(|t| t.scaled(c)).collect(),
            },
        };
        CurvatureFamily {
            dim: self.dim,
            domain: self.domain,
            kind,
            norm_bound: self.norm_bound * c.abs(),
        }
    }

    /// Replace the stored norm bound (callers supplying sharper analytic bounds).
    pub fn with_norm_bound(mut self, bound: f64) -> Self {
        self.norm_bound = bound;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// C^2 >= sup_t |R(t)|_op. Exact for constant families, max over knots
    /// with a 10% margin for sampled ones, a sum of bounds for sums and a
    /// dense-sampling heuristic (documented, not a certificate) otherwise.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// sqrt of the norm bound, the constant C controlling focal gaps.
    pub fn curvature_scale(&self) -> f64 {
        self.norm_bound.max(0.0).sqrt()
    }

    pub fn check_domain(&self, t: f64) -> Result<()> {
        if self.domain.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                t,
                lo: self.domain.lo,
                hi: self.domain.hi,
            })
        }
    }

    /// R(t), symmetric by construction.
    pub fn evaluate(&self, t: f64) -> Result<DMatrix<f64>> {
        self.check_domain(t)?;
        Ok(self.evaluate_unchecked(t))
    }

    fn evaluate_unchecked(&self, t: f64) -> DMatrix<f64> {
        match &self.kind {
            CurvatureKind::Constant { matrix } => matrix.clone(),
            CurvatureKind::Diagonal { entries } => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for (i, s) in entries.iter().enumerate() {
                    m[(i, i)] = s.evaluate(t);
                }
                m
            }
            CurvatureKind::Fourier { entries } => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        m[(i, j)] = entries[i * self.dim + j].evaluate(t);
                    }
                }
                m
            }
            CurvatureKind::Sampled { splines, .. } => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        m[(i, j)] = splines[i * self.dim + j].evaluate(t);
                    }
                }
                0.5 * (&m + m.transpose())
            }
            CurvatureKind::Sum { terms } => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for term in terms {
                    m += term.evaluate_unchecked(t);
                }
                m
            }
        }
    }

    /// Dense-sampling estimate of sup |R(t)|_op with a 10% safety margin.
    /// A scouting pass picks the sample count 1000 * len * max(1, C_est),
    /// capped to keep construction bounded; this is a heuristic, not a proof.
    fn sampled_norm_bound(&self) -> f64 {
        let len = self.domain.len().max(1e-12);
        let scout = self.max_op_norm_on_grid(NORM_SCOUT_SAMPLES);
        let n = ((NORM_SCOUT_SAMPLES as f64 * len * scout.max(1.0)) as usize)
            .clamp(NORM_SCOUT_SAMPLES, NORM_MAX_SAMPLES);
        self.max_op_norm_on_grid(n) * NORM_MARGIN
    }

    fn max_op_norm_on_grid(&self, n: usize) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..=n {
            let t = self.domain.lo + self.domain.len() * i as f64 / n as f64;
            worst = worst.max(sym_op_norm(&self.evaluate_unchecked(t)));
        }
        worst
    }
}
