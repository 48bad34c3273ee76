//! On-disk scenario schema: a single JSON document describing a curvature
//! family, optional subspace frames and optional tolerance overrides.
//! Numbers are IEEE doubles printed in decimal; loading the saved form
//! reproduces evaluations exactly for sampled families and to full double
//! precision for analytic kinds.

use crate::error::{Error, Result};
use crate::family::{CurvatureFamily, CurvatureKind, ScalarSeries};
use crate::interval::Interval;
use crate::subspace::{JacobiSubspace, SubspaceClass};
use crate::tol::Tolerances;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SeriesSpec {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub omega0: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl From<&ScalarSeries> for SeriesSpec {
    fn from(s: &ScalarSeries) -> Self {
        SeriesSpec {
            constant: s.constant,
            omega0: s.omega0,
            cos: s.cos.clone(),
            sin: s.sin.clone(),
        }
    }
}

impl From<&SeriesSpec> for ScalarSeries {
    fn from(s: &SeriesSpec) -> Self {
        ScalarSeries {
            constant: s.constant,
            omega0: s.omega0,
            cos: s.cos.clone(),
            sin: s.sin.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CurvatureSpec {
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    Diagonal {
        entries: Vec<SeriesSpec>,
    },
    Fourier {
        /// m x m entries, row-major.
        entries: Vec<Vec<SeriesSpec>>,
    },
    Sampled {
        t0: f64,
        dt: f64,
        matrices: Vec<Vec<Vec<f64>>>,
    },
    Sum {
        terms: Vec<CurvatureSpec>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubspaceSpec {
    pub name: String,
    pub anchor_t: f64,
    pub class: SubspaceClass,
    /// 2m rows of k entries each.
    pub frame: Vec<Vec<f64>>,
}

/// The on-disk scenario document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: u32,
    pub dim: usize,
    pub domain: [f64; 2],
    pub curvature: CurvatureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subspaces: Vec<SubspaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::InvalidScenario(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::InvalidScenario(format!(
                "{what}: row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn curvature_spec(kind: &CurvatureKind) -> CurvatureSpec {
    match kind {
        CurvatureKind::Constant { matrix } => CurvatureSpec::Constant {
            matrix: matrix_to_rows(matrix),
        },
        CurvatureKind::Diagonal { entries } => CurvatureSpec::Diagonal {
            entries: entries.iter().map(SeriesSpec::from).collect(),
        },
        CurvatureKind::Fourier { entries } => {
            let m = (entries.len() as f64).sqrt() as usize;
            CurvatureSpec::Fourier {
                entries: (0..m)
                    .map(|i| (0..m).map(|j| SeriesSpec::from(&entries[i * m + j])).collect())
                    .collect(),
            }
        }
        CurvatureKind::Sampled {
            t0, dt, matrices, ..
        } => CurvatureSpec::Sampled {
            t0: *t0,
            dt: *dt,
            matrices: matrices.iter().map(matrix_to_rows).collect(),
        },
        CurvatureKind::Sum { terms } => CurvatureSpec::Sum {
            terms: terms.iter().map(|t| curvature_spec(&t.kind)).collect(),
        },
    }
}

fn build_family(
    spec: &CurvatureSpec,
    dim: usize,
    domain: Interval,
) -> Result<CurvatureFamily> {
    match spec {
        CurvatureSpec::Constant { matrix } => {
            let m = rows_to_matrix(matrix, "curvature.matrix")?;
            if m.nrows() != dim {
                return Err(Error::InvalidScenario(format!(
                    "curvature.matrix: {} rows, dim = {dim}",
                    m.nrows()
                )));
            }
            CurvatureFamily::constant(dim, m, domain)
        }
        CurvatureSpec::Diagonal { entries } => {
            if entries.len() != dim {
                return Err(Error::InvalidScenario(format!(
                    "curvature.entries: {} series, dim = {dim}",
                    entries.len()
                )));
            }
            CurvatureFamily::diagonal(entries.iter().map(ScalarSeries::from).collect(), domain)
        }
        CurvatureSpec::Fourier { entries } => {
            if entries.len() != dim || entries.iter().any(|r| r.len() != dim) {
                return Err(Error::InvalidScenario(
                    "curvature.entries: expected dim x dim series".into(),
                ));
            }
            let flat: Vec<ScalarSeries> = entries
                .iter()
                .flat_map(|row| row.iter().map(ScalarSeries::from))
                .collect();
            CurvatureFamily::fourier(dim, flat, domain)
        }
        CurvatureSpec::Sampled { t0, dt, matrices } => {
            let mats: Result<Vec<DMatrix<f64>>> = matrices
                .iter()
                .enumerate()
                .map(|(i, rows)| {
                    let m = rows_to_matrix(rows, &format!("curvature.matrices[{i}]"))?;
                    if m.nrows() != dim || m.ncols() != dim {
                        return Err(Error::InvalidScenario(format!(
                            "curvature.matrices[{i}]: expected {dim} x {dim}"
                        )));
                    }
                    Ok(m)
                })
                .collect();
            let fam = CurvatureFamily::sampled(*t0, *dt, mats?)?;
            let d = fam.domain();
            if (d.lo - domain.lo).abs() > 1e-9 || (d.hi - domain.hi).abs() > 1e-9 {
                return Err(Error::InvalidScenario(format!(
                    "sampled grid spans [{}, {}] but the declared domain is [{}, {}]",
                    d.lo, d.hi, domain.lo, domain.hi
                )));
            }
            Ok(fam)
        }
        CurvatureSpec::Sum { terms } => {
            let fams: Result<Vec<CurvatureFamily>> = terms
                .iter()
                .map(|t| build_family(t, dim, domain))
                .collect();
            CurvatureFamily::sum(fams?)
        }
    }
}

impl ScenarioFile {
    /// Serialize a family plus named subspaces.
    pub fn from_parts(
        family: &CurvatureFamily,
        subspaces: &[(String, JacobiSubspace)],
        tolerances: Option<Tolerances>,
    ) -> Self {
        ScenarioFile {
            version: SCHEMA_VERSION,
            dim: family.dim(),
            domain: [family.domain().lo, family.domain().hi],
            curvature: curvature_spec(&family.kind),
            norm_bound: Some(family.norm_bound()),
            subspaces: subspaces
                .iter()
                .map(|(name, s)| SubspaceSpec {
                    name: name.clone(),
                    anchor_t: s.anchor(),
                    class: s.class(),
                    frame: matrix_to_rows(s.frame()),
                })
                .collect(),
            tolerances,
        }
    }

    pub fn from_scenario(sc: &crate::scenario::Scenario) -> Self {
        Self::from_parts(&sc.family, &sc.subspaces, None)
    }

    /// Reconstruct the family; the declared class of every subspace is
    /// re-verified on load.
    pub fn family(&self) -> Result<CurvatureFamily> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::InvalidScenario(format!(
                "unsupported schema version {}",
                self.version
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidScenario("dim must be positive".into()));
        }
        let domain = Interval::new(self.domain[0], self.domain[1])?;
        let fam = build_family(&self.curvature, self.dim, domain)?;
        Ok(match self.norm_bound {
            Some(b) => {
                if b < 0.0 {
                    return Err(Error::InvalidScenario("norm_bound must be >= 0".into()));
                }
                // Never weaken the computed bound below actual samples.
                let floor = fam.norm_bound() / 1.1;
                fam.with_norm_bound(b.max(floor))
            }
            None => fam,
        })
    }

    pub fn subspace(&self, name: &str, tol: &Tolerances) -> Result<JacobiSubspace> {
        let spec = self
            .subspaces
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| {
                Error::InvalidScenario(format!(
                    "no subspace named '{name}' (available: {})",
                    self.subspaces
                        .iter()
                        .map(|s| s.name.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })?;
        self.build_subspace(spec, tol)
    }

    pub fn all_subspaces(&self, tol: &Tolerances) -> Result<Vec<(String, JacobiSubspace)>> {
        self.subspaces
            .iter()
            .map(|s| Ok((s.name.clone(), self.build_subspace(s, tol)?)))
            .collect()
    }

    fn build_subspace(&self, spec: &SubspaceSpec, tol: &Tolerances) -> Result<JacobiSubspace> {
        let frame = rows_to_matrix(&spec.frame, &format!("subspaces['{}'].frame", spec.name))?;
        if frame.nrows() != 2 * self.dim {
            return Err(Error::InvalidScenario(format!(
                "subspaces['{}'].frame: {} rows, expected {}",
                spec.name,
                frame.nrows(),
                2 * self.dim
            )));
        }
        JacobiSubspace::new(spec.anchor_t, frame, spec.class, tol)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Stable short hash of a family's serialized form, embedded in reports.
pub fn family_hash(family: &CurvatureFamily) -> String {
    let file = ScenarioFile::from_parts(family, &[], None);
    let json = serde_json::to_string(&file).unwrap_or_default();
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin, hopf_scenario, random_family};

    #[test]
    fn round_trip_reproduces_analytic_evaluations() {
        let fam = random_family(3, 3, 0.8, 11, Interval::new(0.0, 4.0).unwrap()).unwrap();
        let file = ScenarioFile::from_parts(&fam, &[], None);
        let text = file.to_json().unwrap();
        let loaded = ScenarioFile::from_json(&text).unwrap().family().unwrap();
        for i in 0..=50 {
            let t = 4.0 * i as f64 / 50.0;
            let a = fam.evaluate(t).unwrap();
            let b = loaded.evaluate(t).unwrap();
            assert!((&a - &b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn round_trip_is_exact_for_sampled_kind() {
        let mats: Vec<DMatrix<f64>> = (0..16)
            .map(|i| {
                let t = i as f64 / 5.0;
                DMatrix::from_row_slice(2, 2, &[t.sin(), 0.3 * t, 0.3 * t, t.cos()])
            })
            .collect();
        let fam = CurvatureFamily::sampled(0.0, 0.2, mats).unwrap();
        let text = ScenarioFile::from_parts(&fam, &[], None).to_json().unwrap();
        let loaded = ScenarioFile::from_json(&text).unwrap().family().unwrap();
        for i in 0..=300 {
            let t = 3.0 * i as f64 / 300.0;
            let a = fam.evaluate(t).unwrap();
            let b = loaded.evaluate(t).unwrap();
            assert_eq!((&a - &b).norm(), 0.0, "sampled round trip must be exact");
        }
    }

    #[test]
    fn subspace_classes_are_verified_on_load() {
        let sc = builtin("sphere").unwrap();
        let file = ScenarioFile::from_scenario(&sc);
        let text = file.to_json().unwrap();
        let loaded = ScenarioFile::from_json(&text).unwrap();
        let tol = Tolerances::default();
        let lam = loaded.subspace("lambda0", &tol).unwrap();
        assert_eq!(lam.class(), SubspaceClass::Lagrangian);
        assert!(loaded.subspace("nope", &tol).is_err());

        // Corrupt the frame: a declared-Lagrangian plane that is not.
        let mut bad = loaded.clone();
        bad.subspaces[0].frame[0][0] = 1.0; // (e1,0) and column still (0,e1)
        bad.subspaces[0].frame[2][0] = 1.0;
        assert!(bad.subspace("lambda0", &tol).is_err());
    }

    #[test]
    fn hopf_file_round_trips_subspaces() {
        let sc = hopf_scenario(Interval::new(-0.2, 3.4).unwrap()).unwrap();
        let file = ScenarioFile::from_scenario(&sc);
        let loaded = ScenarioFile::from_json(&file.to_json().unwrap()).unwrap();
        let tol = Tolerances::default();
        let subs = loaded.all_subspaces(&tol).unwrap();
        assert_eq!(subs.len(), 3);
        let vertical = loaded.subspace("vertical", &tol).unwrap();
        assert_eq!(vertical.dim(), 1);
    }

    #[test]
    fn malformed_documents_are_rejected_with_context() {
        assert!(ScenarioFile::from_json("{").is_err());
        let text = r#"{"version": 1, "dim": 2, "domain": [0.0, 1.0],
                       "curvature": {"kind": "constant", "matrix": [[1.0]]}}"#;
        let file = ScenarioFile::from_json(text).unwrap();
        match file.family() {
            Err(Error::InvalidScenario(msg)) => assert!(msg.contains("matrix")),
            other => panic!("expected invalid scenario, got {other:?}"),
        }
    }

    #[test]
    fn family_hash_is_stable_and_discriminating() {
        let d = Interval::new(0.0, 2.0).unwrap();
        let a = CurvatureFamily::constant_scalar(2, 1.0, d).unwrap();
        let b = CurvatureFamily::constant_scalar(2, 1.0, d).unwrap();
        let c = CurvatureFamily::constant_scalar(2, 2.0, d).unwrap();
        assert_eq!(family_hash(&a), family_hash(&b));
        assert_ne!(family_hash(&a), family_hash(&c));
    }
}
