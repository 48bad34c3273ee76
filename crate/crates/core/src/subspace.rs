//! Isotropic and Lagrangian subspaces of the space of Jacobi fields,
//! represented by frames of initial conditions at an anchor time, and the
//! detection of focal points and interval indices.

use crate::error::{Error, Result};
use crate::flow::FundamentalSolution;
use crate::interval::Interval;
use crate::linalg::{
    null_space, omega_columns, omega_gram, orthonormal_columns, sigma_max,
};
use crate::tol::Tolerances;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceClass {
    General,
    Isotropic,
    Lagrangian,
}

impl SubspaceClass {
    pub fn is_isotropic(&self) -> bool {
        matches!(self, SubspaceClass::Isotropic | SubspaceClass::Lagrangian)
    }
}

impl std::fmt::Display for SubspaceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubspaceClass::General => write!(f, "general"),
            SubspaceClass::Isotropic => write!(f, "isotropic"),
            SubspaceClass::Lagrangian => write!(f, "lagrangian"),
        }
    }
}

/// A k-dimensional subspace W of Jac, identified with a subspace of
/// T = V x V through the evaluation J -> (J(t0), J'(t0)) at the anchor t0.
/// The frame columns are stacked phase coordinates (value; derivative).
#[derive(Clone, Debug)]
pub struct JacobiSubspace {
    anchor: f64,
    frame: DMatrix<f64>,
    class: SubspaceClass,
}

/// Relative omega-Gram size of a frame (max entry over sigma_max^2).
pub fn omega_gram_relative(frame: &DMatrix<f64>) -> f64 {
    if frame.ncols() == 0 {
        return 0.0;
    }
    let g = omega_gram(frame);
    let scale = sigma_max(frame).powi(2).max(1e-300);
    g.iter().fold(0.0_f64, |a, &x| a.max(x.abs())) / scale
}

/// One sweep of Euclidean orthonormalization followed by omega-corrections
/// c_i <- c_i + omega(c_j, c_i) J c_j / |c_j|^2, iterated until the relative
/// omega-Gram drops below `target`. Perturbs the span toward a nearby
/// isotropic subspace.
pub fn omega_gram_schmidt(frame: &DMatrix<f64>, target: f64, max_sweeps: usize) -> Result<DMatrix<f64>> {
    let m = frame.nrows() / 2;
    let mut f = frame.clone();
    for _ in 0..max_sweeps {
        if omega_gram_relative(&f) <= target {
            return Ok(f);
        }
        f = orthonormal_columns(&f);
        let k = f.ncols();
        for i in 0..k {
            for j in 0..i {
                let ci = f.column(i).into_owned();
                let cj = f.column(j).into_owned();
                let w = omega_columns(&cj, &ci);
                let nj = cj.norm_squared();
                if nj > 0.0 {
                    // J c_j in stacked coordinates: (w-part, -v-part).
                    let mut jc = DVector::zeros(2 * m);
                    for r in 0..m {
                        jc[r] = cj[m + r];
                        jc[m + r] = -cj[r];
                    }
                    let newcol = ci + (w / nj) * jc;
                    f.set_column(i, &newcol);
                }
            }
        }
    }
    if omega_gram_relative(&f) <= target {
        Ok(f)
    } else {
        Err(Error::NotIsotropic {
            class: "isotropic",
            gram: omega_gram_relative(&f),
        })
    }
}

impl JacobiSubspace {
    /// Validates the frame rank and the declared class. Frames whose
    /// omega-Gram is within 10x of the isotropy tolerance are corrected by
    /// omega-Gram-Schmidt; larger violations are rejected.
    pub fn new(
        anchor: f64,
        frame: DMatrix<f64>,
        class: SubspaceClass,
        tol: &Tolerances,
    ) -> Result<Self> {
        let rows = frame.nrows();
        if rows == 0 || rows % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: rows,
            });
        }
        let m = rows / 2;
        let k = frame.ncols();
        let mut frame = frame;
        if k > 0 {
            let svd = frame.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if !(smin > tol.rank * smax.max(1e-300)) {
                return Err(Error::RankDeficientFrame {
                    sigma: smin / smax.max(1e-300),
                });
            }
        }
        match class {
            SubspaceClass::General => {}
            SubspaceClass::Isotropic | SubspaceClass::Lagrangian => {
                if class == SubspaceClass::Lagrangian && k != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        actual: k,
                    });
                }
                if k > m {
                    return Err(Error::NotIsotropic {
                        class: "isotropic",
                        gram: f64::NAN,
                    });
                }
                let rel = omega_gram_relative(&frame);
                if rel > tol.iso {
                    if rel <= 10.0 * tol.iso {
                        frame = omega_gram_schmidt(&frame, 0.1 * tol.iso, 50)?;
                    } else {
                        return Err(Error::NotIsotropic {
                            class: if class == SubspaceClass::Lagrangian {
                                "lagrangian"
                            } else {
                                "isotropic"
                            },
                            gram: rel,
                        });
                    }
                }
            }
        }
        Ok(JacobiSubspace {
            anchor,
            frame,
            class,
        })
    }

    /// Lambda^a: all Jacobi fields vanishing at the anchor; frame [[0],[I]].
    pub fn lambda_at(m: usize, anchor: f64) -> Self {
        let mut frame = DMatrix::zeros(2 * m, m);
        for i in 0..m {
            frame[(m + i, i)] = 1.0;
        }
        JacobiSubspace {
            anchor,
            frame,
            class: SubspaceClass::Lagrangian,
        }
    }

    /// The parallel-type Lagrangian V x {0}: frame [[I],[0]] (J'(t0) = 0).
    pub fn parallel_at(m: usize, anchor: f64) -> Self {
        let mut frame = DMatrix::zeros(2 * m, m);
        for i in 0..m {
            frame[(i, i)] = 1.0;
        }
        JacobiSubspace {
            anchor,
            frame,
            class: SubspaceClass::Lagrangian,
        }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn class(&self) -> SubspaceClass {
        self.class
    }

    /// Subspace dimension k.
    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    /// Ambient dimension m of V.
    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows() / 2
    }

    pub(crate) fn check_anchor(&self, sol: &FundamentalSolution) -> Result<()> {
        let slack = 1e-9 * (1.0 + self.anchor.abs());
        if (self.anchor - sol.anchor()).abs() > slack {
            return Err(Error::AnchorMismatch {
                subspace: self.anchor,
                solution: sol.anchor(),
            });
        }
        if self.ambient_dim() != sol.dim() {
            return Err(Error::DimensionMismatch {
                expected: sol.dim(),
                actual: self.ambient_dim(),
            });
        }
        Ok(())
    }

    /// Move the frame to a new anchor along the flow: frame' = Phi(t0->t1) frame.
    pub fn re_anchor(&self, sol: &FundamentalSolution, new_anchor: f64) -> Result<Self> {
        self.check_anchor(sol)?;
        let phi = sol.transfer(new_anchor)?;
        Ok(JacobiSubspace {
            anchor: new_anchor,
            frame: phi * &self.frame,
            class: self.class,
        })
    }

    /// Orthogonal complement with respect to omega; dimension 2m - k. The
    /// class of the result is detected from its omega-Gram.
    pub fn omega_complement(&self, tol: &Tolerances) -> Result<JacobiSubspace> {
        let m = self.ambient_dim();
        if self.dim() == 0 {
            return Ok(JacobiSubspace {
                anchor: self.anchor,
                frame: DMatrix::identity(2 * m, 2 * m),
                class: SubspaceClass::General,
            });
        }
        let j = crate::linalg::symplectic_form_matrix(m);
        let g = self.frame.transpose() * j; // k x 2m
        let comp = null_space(&g, 1e-12);
        let k = comp.ncols();
        debug_assert_eq!(k, 2 * m - self.dim());
        let rel = omega_gram_relative(&comp);
        let class = if k <= m && rel <= tol.iso {
            if k == m {
                SubspaceClass::Lagrangian
            } else {
                SubspaceClass::Isotropic
            }
        } else {
            SubspaceClass::General
        };
        // For isotropic W the complement must contain W.
        if self.class.is_isotropic() {
            let proj = &comp * (comp.transpose() * &self.frame);
            let residual = (&proj - &self.frame).norm() / self.frame.norm().max(1e-300);
            if residual > 10.0 * tol.iso {
                return Err(Error::NotContained { residual });
            }
        }
        Ok(JacobiSubspace {
            anchor: self.anchor,
            frame: comp,
            class,
        })
    }

    /// Full phase evaluation Phi(t0->t) * frame (2m x k).
    pub fn phase_evaluation(&self, sol: &FundamentalSolution, t: f64) -> Result<DMatrix<f64>> {
        self.check_anchor(sol)?;
        Ok(sol.transfer(t)? * &self.frame)
    }

    /// W(t): the m x k matrix of evaluated field values (top block of the
    /// phase evaluation).
    pub fn evaluation_matrix(&self, sol: &FundamentalSolution, t: f64) -> Result<DMatrix<f64>> {
        let p = self.phase_evaluation(sol, t)?;
        let m = self.ambient_dim();
        Ok(p.rows(0, m).into_owned())
    }

    /// f^W(t) = dim W - dim W(t) = k - rank of the evaluation matrix, with
    /// the rank threshold taken relative to the full phase-space scale.
    pub fn focal_index(&self, sol: &FundamentalSolution, t: f64, tol: &Tolerances) -> Result<usize> {
        let p = self.phase_evaluation(sol, t)?;
        let m = self.ambient_dim();
        let values = p.rows(0, m).into_owned();
        let scale = sigma_max(&p);
        let rank = crate::linalg::rank_with_scale(&values, scale, tol.rank);
        Ok(self.dim() - rank)
    }

    /// s_t(J_i, J_j) = <J_i(t), J_j(t)> + <J_i'(t), J_j'(t)> on frame fields.
    pub fn s_product(
        &self,
        sol: &FundamentalSolution,
        t: f64,
        i: usize,
        j: usize,
    ) -> Result<f64> {
        let p = self.phase_evaluation(sol, t)?;
        if i >= self.dim() || j >= self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: i.max(j) + 1,
            });
        }
        Ok(p.column(i).dot(&p.column(j)))
    }
}

/// dim(span A /\ span B) for frames in the same anchored chart:
/// k_A + k_B - rank([Q_A | Q_B]) with an SVD rank threshold.
pub fn intersection_dimension(a: &JacobiSubspace, b: &JacobiSubspace, rel_tol: f64) -> usize {
    let ka = a.dim();
    let kb = b.dim();
    if ka == 0 || kb == 0 {
        return 0;
    }
    let qa = orthonormal_columns(a.frame());
    let qb = orthonormal_columns(b.frame());
    let mut joint = DMatrix::zeros(qa.nrows(), ka + kb);
    for c in 0..ka {
        joint.set_column(c, &qa.column(c).into_owned());
    }
    for c in 0..kb {
        joint.set_column(ka + c, &qb.column(c).into_owned());
    }
    let rank = crate::linalg::rank_with_scale(&joint, sigma_max(&joint), rel_tol);
    ka + kb - rank
}

/// Minimal gap between successive vanishing times of a single Jacobi field,
/// in terms of the curvature bound C (with |R| <= C^2): 1 / (2C).
pub fn min_focal_gap(c: f64) -> Result<f64> {
    if c < 0.0 {
        return Err(Error::NegativeBound(c));
    }
    if c == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (2.0 * c))
}

/// A located focal time with its multiplicity and the kernel of the
/// evaluation map in frame coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FocalEvent {
    pub time: f64,
    pub multiplicity: usize,
    /// Columns are coefficient vectors c in R^k with W(t*) c = 0.
    pub kernel_basis: Vec<Vec<f64>>,
    pub localization_radius: f64,
}

/// Focal data of a closed interval: events (including focal endpoints),
/// their total, and the endpoint focal indices reported separately so
/// callers can form half-open variants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexReport {
    pub interval: Interval,
    pub events: Vec<FocalEvent>,
    pub total: usize,
    pub endpoint_lo: usize,
    pub endpoint_hi: usize,
}

impl IndexReport {
    /// Index of the open interior (a, b).
    pub fn interior_total(&self) -> usize {
        self.total - self.endpoint_lo - self.endpoint_hi
    }

    /// Index of the half-open interval (a, b].
    pub fn total_without_lo(&self) -> usize {
        self.total - self.endpoint_lo
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }
}

/// Relative strength of the smallest value-singular value: the focal
/// indicator scanned for dips.
struct Indicator<'a> {
    w: &'a JacobiSubspace,
    sol: &'a FundamentalSolution,
}

struct Probe {
    /// sigma_k(values) / sigma_max(phase): 0 exactly at focal times.
    dip: f64,
    /// All value singular values, relative to the phase scale, descending.
    sigmas: Vec<f64>,
    kernel: DMatrix<f64>,
}

impl<'a> Indicator<'a> {
    fn probe(&self, t: f64, rank_tol: f64) -> Result<Probe> {
        let p = self.w.phase_evaluation(self.sol, t)?;
        let m = self.w.ambient_dim();
        let k = self.w.dim();
        let values = p.rows(0, m).into_owned();
        let scale = sigma_max(&p).max(1e-300);
        let svd = values.clone().svd(false, false);
        let mut sigmas: Vec<f64> = svd.singular_values.iter().map(|s| s / scale).collect();
        sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // A thin SVD of an m x k matrix with m < k reports only m values;
        // the remaining k - m directions are exact zeros of the evaluation.
        while sigmas.len() < k {
            sigmas.push(0.0);
        }
        let dip = *sigmas.last().unwrap_or(&0.0);
        // Kernel: directions with sigma <= rank_tol * phase scale, expressed
        // as a threshold relative to the value-matrix scale for null_space.
        let vmax = sigma_max(&values);
        let kernel = if vmax <= rank_tol * scale {
            DMatrix::identity(k, k)
        } else {
            null_space(&values, rank_tol * scale / vmax)
        };
        Ok(Probe { dip, sigmas, kernel })
    }

    fn dip(&self, t: f64) -> f64 {
        self.probe(t, 0.0).map(|p| p.dip).unwrap_or(f64::INFINITY)
    }
}

/// Relative dip threshold under which a grid region is suspected to hold a
/// focal time; events are confirmed only by the rank test after refinement.
const DIP_THRESHOLD: f64 = 0.3;
/// Probes per sub-bracket when re-scanning around a confirmed event.
const SUBSCAN_PROBES: usize = 64;

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while (b - a) > width && iter < 200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Locate every focal point of an isotropic subspace in a closed interval.
///
/// Scans the smallest relative singular value of the evaluation matrix on a
/// grid finer than a quarter of the minimal focal gap, refines every
/// sub-threshold region by golden-section search to the localization radius
/// and re-scans the flanks of each confirmed event so that nearby distinct
/// events in the same grid cell are still separated.
pub fn locate_focal_points(
    w: &JacobiSubspace,
    sol: &FundamentalSolution,
    interval: Interval,
    tol: &Tolerances,
) -> Result<IndexReport> {
    if !w.class().is_isotropic() {
        return Err(Error::NotIsotropicInput);
    }
    w.check_anchor(sol)?;
    let range = sol.range();
    if !range.contains_interval(&interval) {
        return Err(Error::OutOfRange {
            t: if range.contains(interval.lo) {
                interval.hi
            } else {
                interval.lo
            },
            lo: range.lo,
            hi: range.hi,
        });
    }

    let mut events: Vec<FocalEvent> = Vec::new();
    let ind = Indicator { w, sol };

    // Closed-interval semantics: endpoint focal indices are decided by the
    // rank test directly and contribute events of radius zero.
    let endpoint_lo = w.focal_index(sol, interval.lo, tol)?;
    let endpoint_hi = if interval.len() > 0.0 {
        w.focal_index(sol, interval.hi, tol)?
    } else {
        0
    };
    if endpoint_lo > 0 {
        let probe = ind.probe(interval.lo, tol.rank)?;
        events.push(event_from_probe(interval.lo, &probe, 0.0));
    }
    if endpoint_hi > 0 {
        let probe = ind.probe(interval.hi, tol.rank)?;
        events.push(event_from_probe(interval.hi, &probe, 0.0));
    }

    if w.dim() == 0 || interval.len() == 0.0 {
        let total = events.iter().map(|e| e.multiplicity).sum();
        return Ok(IndexReport {
            interval,
            events,
            total,
            endpoint_lo,
            endpoint_hi,
        });
    }

    // Scan grid: step bounded by min_focal_gap / 4 and by a fixed fraction
    // of the interval.
    let c = sol.family().curvature_scale();
    let gap = min_focal_gap(c)?;
    let len = interval.len();
    let step = (gap / 4.0).min(len / 128.0);
    let n = (len / step).ceil() as usize;
    let n = n.clamp(8, 4_000_000);
    let ts: Vec<f64> = (0..=n)
        .map(|i| interval.lo + len * i as f64 / n as f64)
        .collect();
    let dips: Vec<f64> = ts.iter().map(|&t| ind.dip(t)).collect();

    // Brackets: maximal runs of sub-threshold samples, extended by one node.
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..=n {
        if dips[i] < DIP_THRESHOLD {
            if run_start.is_none() {
                run_start = Some(i);
            }
        } else if let Some(s) = run_start.take() {
            brackets.push((ts[s.saturating_sub(1)], ts[(i).min(n)]));
        }
    }
    if let Some(s) = run_start {
        brackets.push((ts[s.saturating_sub(1)], ts[n]));
    }

    let exclusion = 20.0 * tol.loc;
    let dedupe_radius = 100.0 * tol.loc;
    let dip_only = |t: f64| ind.dip(t);

    while let Some((l, r)) = brackets.pop() {
        if r - l <= 4.0 * exclusion {
            continue;
        }
        let (t_star, _) = golden_min(&dip_only, l, r, tol.loc);
        let probe = ind.probe(t_star, tol.rank)?;
        let mult = probe.sigmas.iter().filter(|&&s| s <= tol.rank).count();
        if mult > 0 {
            let duplicate = events
                .iter()
                .any(|e| (e.time - t_star).abs() <= dedupe_radius.max(e.localization_radius));
            if !duplicate {
                // Refuse to guess when the next singular value sits in the
                // band where a second, unresolvably close event could hide.
                let slope_est = {
                    let dl = (ind.dip(l) - probe.dip) / (t_star - l).abs().max(tol.loc);
                    let dr = (ind.dip(r) - probe.dip) / (r - t_star).abs().max(tol.loc);
                    dl.max(dr).max(0.0)
                };
                let band_hi = (3.0 * tol.rank).max(10.0 * dedupe_radius * slope_est);
                if probe
                    .sigmas
                    .iter()
                    .any(|&s| s > tol.rank && s < band_hi)
                {
                    return Err(Error::UnresolvableCluster { t: t_star });
                }
                events.push(event_from_probe(t_star, &probe, tol.loc));
            }
            // Re-scan the flanks for further events in the same cell.
            for (sl, sr) in [(l, t_star - exclusion), (t_star + exclusion, r)] {
                if sr - sl <= 4.0 * exclusion {
                    continue;
                }
                let mut best = f64::INFINITY;
                let mut best_i = 0;
                for i in 0..=SUBSCAN_PROBES {
                    let t = sl + (sr - sl) * i as f64 / SUBSCAN_PROBES as f64;
                    let d = ind.dip(t);
                    if d < best {
                        best = d;
                        best_i = i;
                    }
                }
                if best < DIP_THRESHOLD {
                    let h = (sr - sl) / SUBSCAN_PROBES as f64;
                    let nl = (sl + (best_i as f64 - 1.0) * h).max(sl);
                    let nr = (sl + (best_i as f64 + 1.0) * h).min(sr);
                    brackets.push((nl, nr));
                }
            }
        }
    }

    events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    let total = events.iter().map(|e| e.multiplicity).sum();
    Ok(IndexReport {
        interval,
        events,
        total,
        endpoint_lo,
        endpoint_hi,
    })
}

fn event_from_probe(t: f64, probe: &Probe, radius: f64) -> FocalEvent {
    let kernel: Vec<Vec<f64>> = (0..probe.kernel.ncols())
        .map(|j| probe.kernel.column(j).iter().copied().collect())
        .collect();
    FocalEvent {
        time: t,
        multiplicity: kernel.len(),
        kernel_basis: kernel,
        localization_radius: radius,
    }
}

/// ind_W of a closed interval: sum of focal indices over all t in [a, b].
pub fn index(
    w: &JacobiSubspace,
    sol: &FundamentalSolution,
    interval: Interval,
    tol: &Tolerances,
) -> Result<usize> {
    Ok(locate_focal_points(w, sol, interval, tol)?.total)
}

/// For a window no longer than the minimal focal gap, the index is bounded
/// by dim W.
pub fn cluster_index_bound_check(
    w: &JacobiSubspace,
    sol: &FundamentalSolution,
    interval: Interval,
    tol: &Tolerances,
) -> Result<bool> {
    let c = sol.family().curvature_scale();
    let gap = min_focal_gap(c)?;
    if interval.len() > gap {
        return Err(Error::Precondition(format!(
            "window length {} exceeds the minimal focal gap {}",
            interval.len(),
            gap
        )));
    }
    Ok(index(w, sol, interval, tol)? <= w.dim())
}
