//! Built-in curvature families and subspaces with closed-form oracles,
//! seeded random generators, and the index-explosion experiment.

use crate::error::{Error, Result};
use crate::family::{CurvatureFamily, ScalarSeries};
use crate::flow::{integrate, FundamentalSolution, IntegrationOptions};
use crate::interval::Interval;
use crate::subspace::{index, JacobiSubspace, SubspaceClass};
use crate::tol::Tolerances;
use crate::transversal::{
    transversal_curvature_pointwise, TransversalOptions, TransversalSystem,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Closed-form expectations attached to a scenario, validated against the
/// detection stack in tests.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleData {
    /// Name of the subspace the focal oracle refers to.
    pub subspace: String,
    /// Expected focal times and multiplicities inside the domain.
    pub focal_times: Vec<(f64, usize)>,
    /// Expected constant value of the reduced curvature, when 1x1.
    pub reduced_constant: Option<f64>,
    /// Expected focal times of the reduced Lambda^0 system.
    pub reduced_focal_times: Vec<f64>,
}

impl OracleData {
    /// Oracle self-consistency: times inside the domain, multiplicities
    /// bounded by the subspace dimensions.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let domain = scenario.family.domain();
        let dim = scenario
            .subspace(&self.subspace)
            .map(|s| s.dim())
            .unwrap_or(scenario.family.dim());
        for &(t, mult) in &self.focal_times {
            if !domain.contains(t) {
                return Err(Error::InvalidScenario(format!(
                    "oracle focal time {t} outside domain"
                )));
            }
            if mult == 0 || mult > dim {
                return Err(Error::InvalidScenario(format!(
                    "oracle multiplicity {mult} out of range"
                )));
            }
        }
        Ok(())
    }
}

/// A named family with named subspaces and optional closed-form oracle.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub family: CurvatureFamily,
    pub subspaces: Vec<(String, JacobiSubspace)>,
    pub oracle: Option<OracleData>,
}

impl Scenario {
    pub fn subspace(&self, name: &str) -> Option<&JacobiSubspace> {
        self.subspaces
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }
}

/// R = kappa I on the given domain, with Lambda^0 anchored at 0 and the
/// parallel Lagrangian V x {0}. Oracle: for kappa > 0 the Lambda^0 focal
/// times are j pi / sqrt(kappa) with multiplicity m; none after the anchor
/// for kappa <= 0.
pub fn constant_curvature(m: usize, kappa: f64, domain: Interval) -> Result<Scenario> {
    if m == 0 {
        return Err(Error::InvalidScenario("dimension must be positive".into()));
    }
    let family = CurvatureFamily::constant_scalar(m, kappa, domain)?;
    let anchor = if domain.contains(0.0) { 0.0 } else { domain.lo };
    let lambda0 = JacobiSubspace::lambda_at(m, anchor);
    let parallel = JacobiSubspace::parallel_at(m, anchor);
    let mut focal_times = Vec::new();
    if kappa > 0.0 {
        let period = std::f64::consts::PI / kappa.sqrt();
        let mut j = if domain.lo <= anchor { 0 } else { 1 };
        loop {
            let t = anchor + j as f64 * period;
            if t > domain.hi {
                break;
            }
            if domain.contains(t) {
                focal_times.push((t, m));
            }
            j += 1;
        }
    } else if domain.contains(anchor) {
        focal_times.push((anchor, m));
    }
    Ok(Scenario {
        name: format!("constant-m{m}-kappa{kappa}"),
        family,
        subspaces: vec![
            ("lambda0".into(), lambda0),
            ("parallel".into(), parallel),
        ],
        oracle: Some(OracleData {
            subspace: "lambda0".into(),
            focal_times,
            reduced_constant: None,
            reduced_focal_times: Vec::new(),
        }),
    })
}

/// Normal Jacobi system of a horizontal great-circle geodesic of the round
/// 3-sphere: m = 2, R = I, with the constant-norm vertical field
/// J_v(t) = (cos t) e1 + (sin t) e2. The reduction has R^H = 4 and
/// transversal Lambda^0-focal times on the pi/2 grid, the curvature of the
/// base 2-sphere of radius 1/2.
pub fn hopf_scenario(domain: Interval) -> Result<Scenario> {
    let family = CurvatureFamily::constant_scalar(2, 1.0, domain)?;
    let tol = Tolerances::default();
    let mut vertical_frame = DMatrix::zeros(4, 1);
    vertical_frame[(0, 0)] = 1.0;
    vertical_frame[(3, 0)] = 1.0;
    let vertical =
        JacobiSubspace::new(0.0, vertical_frame, SubspaceClass::Isotropic, &tol)?;
    // Lambda = span{J_v, J_h} with J_h the horizontal lift vanishing at 0:
    // phase coordinates (0, 0, 0, 1).
    let mut lf = DMatrix::zeros(4, 2);
    lf[(0, 0)] = 1.0;
    lf[(3, 0)] = 1.0;
    lf[(3, 1)] = 1.0;
    let lambda = JacobiSubspace::new(0.0, lf, SubspaceClass::Lagrangian, &tol)?;
    let lambda0 = JacobiSubspace::lambda_at(2, 0.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut reduced_focal = Vec::new();
    let mut j = (domain.lo / half_pi).ceil() as i64;
    while j as f64 * half_pi <= domain.hi {
        reduced_focal.push(j as f64 * half_pi);
        j += 1;
    }
    Ok(Scenario {
        name: "hopf".into(),
        family,
        subspaces: vec![
            ("vertical".into(), vertical),
            ("lambda".into(), lambda),
            ("lambda0".into(), lambda0),
        ],
        oracle: Some(OracleData {
            subspace: "vertical".into(),
            focal_times: Vec::new(),
            reduced_constant: Some(4.0),
            reduced_focal_times: reduced_focal,
        }),
    })
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 round.
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random symmetric family with per-entry finite Fourier series whose
/// coefficients decay with the mode number (the smoothness budget is the
/// number of modes). Deterministic in the seed; the amplitude scales the
/// whole family linearly.
pub fn random_family(
    m: usize,
    modes: usize,
    amplitude: f64,
    seed: u64,
    domain: Interval,
) -> Result<CurvatureFamily> {
    if m == 0 {
        return Err(Error::InvalidScenario("dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x7a_f001));
    let omega0 = 2.0 * std::f64::consts::PI / domain.len().max(1e-9);
    let mut entries = Vec::with_capacity(m * m);
    for _ in 0..m * m {
        let mut cos = Vec::with_capacity(modes);
        let mut sin = Vec::with_capacity(modes);
        for q in 0..modes {
            let decay = 1.0 / ((1 + q) * (1 + q)) as f64;
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            cos.push(a * decay);
            sin.push(b * decay);
        }
        let c: f64 = rng.sample(StandardNormal);
        entries.push(ScalarSeries {
            constant: 0.5 * c,
            omega0,
            cos,
            sin,
        });
    }
    let unit = CurvatureFamily::fourier(m, entries, domain)?;
    Ok(unit.scaled(amplitude))
}

fn random_frame(m: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(2 * m, k, |_, _| rng.sample(StandardNormal))
}

/// Random isotropic subspace of dimension k, built by omega-Gram-Schmidt
/// sweeps from a Gaussian frame; retries on degenerate draws.
pub fn random_isotropic(
    m: usize,
    k: usize,
    seed: u64,
    anchor: f64,
    tol: &Tolerances,
) -> Result<JacobiSubspace> {
    if k == 0 || k > m {
        return Err(Error::InvalidScenario(format!(
            "isotropic dimension {k} out of range 1..={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x150_7e11));
    let attempts = 20;
    for _ in 0..attempts {
        let frame = random_frame(m, k, &mut rng);
        if let Ok(corrected) = crate::subspace::omega_gram_schmidt(&frame, 1e-12, 80) {
            if let Ok(sub) =
                JacobiSubspace::new(anchor, corrected, SubspaceClass::Isotropic, tol)
            {
                return Ok(sub);
            }
        }
    }
    Err(Error::DegenerateDraw { attempts })
}

/// Random Lagrangian subspace (k = m).
pub fn random_lagrangian(
    m: usize,
    seed: u64,
    anchor: f64,
    tol: &Tolerances,
) -> Result<JacobiSubspace> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x1ab_5eed));
    let attempts = 20;
    for _ in 0..attempts {
        let frame = random_frame(m, m, &mut rng);
        if let Ok(corrected) = crate::subspace::omega_gram_schmidt(&frame, 1e-12, 80) {
            if let Ok(sub) =
                JacobiSubspace::new(anchor, corrected, SubspaceClass::Lagrangian, tol)
            {
                return Ok(sub);
            }
        }
    }
    Err(Error::DegenerateDraw { attempts })
}

/// Random Lagrangian containing the given isotropic subspace: completes the
/// frame with draws from the omega-complement, polished back to isotropy.
pub fn random_lagrangian_containing(
    w: &JacobiSubspace,
    seed: u64,
    tol: &Tolerances,
) -> Result<JacobiSubspace> {
    let m = w.ambient_dim();
    let k = w.dim();
    if k == m {
        return Ok(JacobiSubspace::new(
            w.anchor(),
            w.frame().clone(),
            SubspaceClass::Lagrangian,
            tol,
        )?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xc0_47a1_41));
    let attempts = 40;
    'outer: for _ in 0..attempts {
        let mut cols: Vec<nalgebra::DVector<f64>> = (0..k)
            .map(|i| w.frame().column(i).into_owned())
            .collect();
        while cols.len() < m {
            let mut current = DMatrix::zeros(2 * m, cols.len());
            for (i, c) in cols.iter().enumerate() {
                current.set_column(i, c);
            }
            let cur_sub =
                JacobiSubspace::new(w.anchor(), current.clone(), SubspaceClass::General, tol)?;
            let comp = cur_sub.omega_complement(tol)?;
            // Random direction in the omega-complement, made independent of
            // the current span.
            let coeff: nalgebra::DVector<f64> = nalgebra::DVector::from_fn(
                comp.dim(),
                |_, _| rng.sample(StandardNormal),
            );
            let mut v = comp.frame() * coeff;
            let qcur = crate::linalg::orthonormal_columns(&current);
            v -= &qcur * (qcur.transpose() * &v);
            if v.norm() < 1e-6 {
                continue 'outer;
            }
            v /= v.norm();
            cols.push(v);
        }
        let mut frame = DMatrix::zeros(2 * m, m);
        for (i, c) in cols.iter().enumerate() {
            frame.set_column(i, c);
        }
        if let Ok(polished) = crate::subspace::omega_gram_schmidt(&frame, 1e-12, 80) {
            // The polish must not destroy containment of W.
            let q = crate::linalg::orthonormal_columns(&polished);
            let res = (&q * (q.transpose() * w.frame()) - w.frame()).norm()
                / w.frame().norm().max(1e-300);
            if res < 1e-9 {
                if let Ok(sub) =
                    JacobiSubspace::new(w.anchor(), polished, SubspaceClass::Lagrangian, tol)
                {
                    return Ok(sub);
                }
            }
        }
    }
    Err(Error::DegenerateDraw { attempts })
}

/// One row of the index-explosion experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExplosionRow {
    pub n: usize,
    pub ind_w: usize,
    pub ind_wn: usize,
    pub sup_reduced_norm: f64,
}

/// Report of the index-explosion experiment in constant curvature.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExplosionReport {
    pub interval: Interval,
    pub rows: Vec<ExplosionRow>,
    /// sup norms strictly increasing along the requested n list.
    pub sup_norms_increasing: bool,
    /// Pointwise deviation |R^{H_n}(t) - R^H(t)| away from the W-focal time,
    /// for a large n.
    pub limit_deviation: f64,
    pub limit_n: usize,
}

/// Index explosion in quotients: in m = 2, R = I, the isotropic lines
/// W_n = span{(1/n) e1, e2} converge to W = span{(0, e2)} (the sine field)
/// while their indices on [0, delta] drop from 1 to 0, and the reduced
/// curvatures R^{H_n} develop a bump of height 1 + 3 n^2 near the W-focal
/// time 0. Away from 0 they converge pointwise back to R^H = 1.
pub fn index_explosion_experiment(
    n_list: &[usize],
    delta: f64,
    tol: &Tolerances,
) -> Result<ExplosionReport> {
    let domain = Interval::new(0.0, delta)?;
    let family = CurvatureFamily::constant_scalar(2, 1.0, domain)?;
    let opts = IntegrationOptions::with_tolerances(*tol);
    let sol = integrate(&family, 0.0, domain, &opts)?;

    let mut w_frame = DMatrix::zeros(4, 1);
    w_frame[(3, 0)] = 1.0;
    let w = JacobiSubspace::new(0.0, w_frame, SubspaceClass::Isotropic, tol)?;
    let ind_w = index(&w, &sol, domain, tol)?;

    let wn = |n: usize| -> Result<JacobiSubspace> {
        let mut frame = DMatrix::zeros(4, 1);
        frame[(0, 0)] = 1.0 / n as f64;
        frame[(3, 0)] = 1.0;
        JacobiSubspace::new(0.0, frame, SubspaceClass::Isotropic, tol)
    };

    let mut rows = Vec::new();
    for &n in n_list {
        let sub = wn(n)?;
        let ind_wn = index(&sub, &sol, domain, tol)?;
        // Resolve the bump of width ~1/n when sampling the reduced family.
        let base_step = (delta / 512.0).min(1.0 / (8.0 * n as f64));
        let topts = TransversalOptions {
            base_step: Some(base_step),
            ..Default::default()
        };
        let system = TransversalSystem::build(&sub, &sol, domain, tol, &topts)?;
        let sup = system
            .times()
            .iter()
            .map(|&t| {
                system
                    .reduced_family()
                    .evaluate(t)
                    .map(|r| crate::linalg::sym_op_norm(&r))
                    .unwrap_or(0.0)
            })
            .fold(0.0_f64, f64::max);
        rows.push(ExplosionRow {
            n,
            ind_w,
            ind_wn,
            sup_reduced_norm: sup,
        });
    }
    let sup_norms_increasing = rows
        .windows(2)
        .all(|p| p[1].sup_reduced_norm > p[0].sup_reduced_norm);

    // Pointwise limit away from the focal time, at a large n.
    let limit_n = 4000;
    let sub = wn(limit_n)?;
    let mut limit_deviation = 0.0_f64;
    for i in 0..=16 {
        let t = 0.75 * delta + 0.25 * delta * i as f64 / 16.0;
        let rn = transversal_curvature_pointwise(&sub, &sol, t, tol)?;
        let r = transversal_curvature_pointwise(&w, &sol, t, tol)?;
        limit_deviation = limit_deviation.max((rn[(0, 0)] - r[(0, 0)]).abs());
    }

    Ok(ExplosionReport {
        interval: domain,
        rows,
        sup_norms_increasing,
        limit_deviation,
        limit_n,
    })
}

/// The built-in scenario set exercised by the acceptance suite.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let mk = |lo: f64, hi: f64| Interval::new(lo, hi).unwrap();
    vec![
        constant_curvature(2, 1.0, mk(0.0, 10.3)).unwrap(),
        constant_curvature(2, 0.0, mk(0.0, 30.0)).unwrap(),
        constant_curvature(2, -1.0, mk(0.0, 6.0)).unwrap(),
        constant_curvature(1, 4.0, mk(0.0, 4.0)).unwrap(),
        hopf_scenario(mk(-0.2, std::f64::consts::PI + 0.2)).unwrap(),
    ]
}

/// Fetch a built-in scenario by name.
pub fn builtin(name: &str) -> Result<Scenario> {
    match name {
        "sphere" => constant_curvature(2, 1.0, Interval::new(0.0, 10.3)?),
        "flat" => constant_curvature(2, 0.0, Interval::new(0.0, 30.0)?),
        "hyperbolic" => constant_curvature(2, -1.0, Interval::new(0.0, 6.0)?),
        "quarter" => constant_curvature(1, 4.0, Interval::new(0.0, 4.0)?),
        "hopf" => hopf_scenario(Interval::new(-0.2, std::f64::consts::PI + 0.2)?),
        other => Err(Error::InvalidScenario(format!(
            "unknown built-in scenario '{other}' (try sphere, flat, hyperbolic, quarter, hopf)"
        ))),
    }
}

/// Deterministic per-trial solution helper shared by the verification
/// harness: family and anchored integration over a default interval.
pub fn trial_setup(
    seed: u64,
    trial: u64,
    max_dim: usize,
    interval: Option<Interval>,
) -> Result<(CurvatureFamily, FundamentalSolution, Interval, usize)> {
    let s = mix_seed(seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    let m = 1 + (rng.gen::<u64>() % max_dim.max(1) as u64) as usize;
    let len = 2.0 + rng.gen::<f64>() * 1.5;
    let domain = interval.unwrap_or(Interval { lo: 0.0, hi: len });
    let amplitude = 0.3 + 0.7 * rng.gen::<f64>();
    let modes = 2 + (rng.gen::<u64>() % 2) as usize;
    let family = random_family(m, modes, amplitude, s, domain)?;
    let opts = IntegrationOptions::default();
    let sol = integrate(&family, domain.lo, domain, &opts)?;
    Ok((family, sol, domain, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::{locate_focal_points, min_focal_gap};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn constant_curvature_oracle_matches_detection() {
        let sc = constant_curvature(2, 1.0, Interval::new(0.0, 10.0).unwrap()).unwrap();
        let oracle = sc.oracle.clone().unwrap();
        oracle.validate(&sc).unwrap();
        assert_eq!(
            oracle.focal_times,
            vec![(0.0, 2), (PI, 2), (2.0 * PI, 2), (3.0 * PI, 2)]
        );
        let sol = integrate(&sc.family, 0.0, sc.family.domain(), &Default::default()).unwrap();
        let lam = sc.subspace("lambda0").unwrap();
        let report =
            locate_focal_points(lam, &sol, Interval::new(0.0, 10.0).unwrap(), &tols()).unwrap();
        assert_eq!(report.events.len(), oracle.focal_times.len());
        for (ev, (t, mult)) in report.events.iter().zip(&oracle.focal_times) {
            assert!((ev.time - t).abs() < 1e-6);
            assert_eq!(ev.multiplicity, *mult);
        }
    }

    #[test]
    fn flat_oracle_has_anchor_only() {
        let sc = constant_curvature(3, 0.0, Interval::new(0.0, 10.0).unwrap()).unwrap();
        assert_eq!(sc.oracle.unwrap().focal_times, vec![(0.0, 3)]);
    }

    #[test]
    fn quarter_oracle_respects_gap() {
        let sc = constant_curvature(1, 4.0, Interval::new(0.0, 4.0).unwrap()).unwrap();
        let oracle = sc.oracle.unwrap();
        let gap = min_focal_gap(2.0).unwrap();
        assert_relative_eq!(gap, 0.25);
        for pair in oracle.focal_times.windows(2) {
            assert!(pair[1].0 - pair[0].0 >= gap);
        }
        assert_relative_eq!(oracle.focal_times[1].0, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn hopf_vertical_field_never_vanishes() {
        let sc = hopf_scenario(Interval::new(-0.2, PI + 0.2).unwrap()).unwrap();
        let sol = integrate(&sc.family, 0.0, sc.family.domain(), &Default::default()).unwrap();
        let v = sc.subspace("vertical").unwrap();
        let report = locate_focal_points(
            v,
            &sol,
            Interval::new(-0.2, PI + 0.2).unwrap(),
            &tols(),
        )
        .unwrap();
        assert_eq!(report.total, 0);
        // |J_v| = 1 along the curve.
        for i in 0..=20 {
            let t = -0.2 + (PI + 0.4) * i as f64 / 20.0;
            let e = v.evaluation_matrix(&sol, t).unwrap();
            assert_relative_eq!(e.norm(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn random_family_is_deterministic_and_linear_in_amplitude() {
        let d = Interval::new(0.0, 3.0).unwrap();
        let a = random_family(2, 3, 0.8, 42, d).unwrap();
        let b = random_family(2, 3, 0.8, 42, d).unwrap();
        for i in 0..=10 {
            let t = 3.0 * i as f64 / 10.0;
            assert_relative_eq!(
                a.evaluate(t).unwrap(),
                b.evaluate(t).unwrap(),
                epsilon = 0.0
            );
        }
        let zero = random_family(2, 3, 0.0, 42, d).unwrap();
        assert!(zero.evaluate(1.0).unwrap().norm() == 0.0);
        let double = random_family(2, 3, 1.6, 42, d).unwrap();
        assert_relative_eq!(
            double.evaluate(1.0).unwrap(),
            a.evaluate(1.0).unwrap() * 2.0,
            epsilon = 1e-12
        );
        // Norm bound scales linearly up to the sampling margin.
        assert_relative_eq!(
            double.norm_bound(),
            2.0 * a.norm_bound(),
            max_relative = 0.05
        );
    }

    #[test]
    fn random_subspaces_are_isotropic_and_reproducible() {
        let tol = tols();
        let w1 = random_isotropic(3, 2, 7, 0.0, &tol).unwrap();
        let w2 = random_isotropic(3, 2, 7, 0.0, &tol).unwrap();
        assert_relative_eq!(w1.frame().clone(), w2.frame().clone(), epsilon = 0.0);
        assert!(crate::subspace::omega_gram_relative(w1.frame()) <= 1e-10);

        let l = random_lagrangian(3, 11, 0.0, &tol).unwrap();
        assert!(crate::subspace::omega_gram_relative(l.frame()) <= 1e-10);
        // Lagrangian self-duality.
        let c = l.omega_complement(&tol).unwrap();
        assert!(crate::linalg::grassmann_distance(l.frame(), c.frame()) < 1e-8);
    }

    #[test]
    fn random_lagrangian_contains_its_seed_isotropic() {
        let tol = tols();
        for seed in [3u64, 9, 21] {
            let w = random_isotropic(4, 2, seed, 0.0, &tol).unwrap();
            let l = random_lagrangian_containing(&w, seed ^ 0xff, &tol).unwrap();
            assert_eq!(l.dim(), 4);
            let q = crate::linalg::orthonormal_columns(l.frame());
            let res = (&q * (q.transpose() * w.frame()) - w.frame()).norm();
            assert!(res < 1e-8, "containment residual {res}");
        }
    }

    #[test]
    fn explosion_indices_drop_and_bump_grows() {
        let report = index_explosion_experiment(&[5, 10, 20, 40], 0.4, &tols()).unwrap();
        for row in &report.rows {
            assert_eq!(row.ind_w, 1, "ind_W([0, 0.4]) counts the anchor zero");
            assert_eq!(row.ind_wn, 0, "W_n has no zero in [0, 0.4] for n = {}", row.n);
            // The bump height is 1 + 3 n^2 at t = 0.
            let expected = 1.0 + 3.0 * (row.n * row.n) as f64;
            assert_relative_eq!(row.sup_reduced_norm, expected, max_relative = 0.05);
        }
        assert!(report.sup_norms_increasing);
        assert!(
            report.limit_deviation <= 1e-4,
            "pointwise limit deviation {}",
            report.limit_deviation
        );
    }

    #[test]
    fn builtin_scenarios_have_consistent_oracles() {
        for sc in builtin_scenarios() {
            if let Some(oracle) = &sc.oracle {
                oracle.validate(&sc).unwrap();
            }
        }
        assert!(builtin("nope").is_err());
    }
}
