//! JSON model files. Every number is a `[re, im]` pair; matrices are lists of rows.

use std::path::Path;

use num_complex::Complex64 as C64;
use qdmono_core::frobenius::{qh_projective_space, Calibration, FrobeniusModel, ModelDescriptor};
use qdmono_core::numerics::CMat;
use serde::{Deserialize, Serialize};

use crate::Error;

pub type Cx = [f64; 2];

/// On-disk layout of a Frobenius model at a single point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Present when the model is the quantum cohomology of `P^n`; enables the K-theory checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projective_space: Option<ProjectiveSpace>,
    pub dim: usize,
    pub conformal_dim: f64,
    pub pairing: Vec<Vec<Cx>>,
    pub theta_eigenvalues: Vec<Cx>,
    pub rho: Vec<Vec<Cx>>,
    /// `structure_constants[i][j][k] = c_ij^k`.
    pub structure_constants: Vec<Vec<Vec<Cx>>>,
    pub euler_multiplication: Vec<Vec<Cx>>,
    /// Stored `S_0, S_1, …`; absent means the homogeneity recursion generates all terms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Vec<Vec<Vec<Cx>>>>,
    /// Continue a stored calibration by the recursion when more terms are needed.
    #[serde(default)]
    pub extend_calibration: bool,
    pub base_point: Vec<Cx>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectiveSpace {
    pub n: usize,
    pub q: Cx,
}

pub fn cx(z: C64) -> Cx {
    [z.re, z.im]
}

pub fn from_cx(p: Cx) -> C64 {
    C64::new(p[0], p[1])
}

pub fn matrix_rows(a: &CMat) -> Vec<Vec<Cx>> {
    (0..a.rows()).map(|i| a.row(i).into_iter().map(cx).collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<Cx>], n: usize, what: &str) -> Result<CMat, Error> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Schema(format!("{what} must be {n}x{n}")));
    }
    Ok(CMat::from_fn(n, n, |i, j| from_cx(rows[i][j])))
}

impl ModelFile {
    pub fn from_model(model: &FrobeniusModel) -> Self {
        let n = model.dim;
        let (name, projective_space) = match &model.descriptor {
            ModelDescriptor::ProjectiveSpace { n, q } => (None, Some(ProjectiveSpace { n: *n, q: cx(*q) })),
            ModelDescriptor::Custom { name } => (Some(name.clone()), None),
        };
        let (calibration, extend_calibration) = match &model.calibration {
            Calibration::Homogeneous => (None, false),
            Calibration::Table { terms, extend } => (Some(terms.iter().map(matrix_rows).collect()), *extend),
        };
        ModelFile {
            name,
            projective_space,
            dim: n,
            conformal_dim: model.conformal_dim,
            pairing: matrix_rows(&model.pairing),
            theta_eigenvalues: model.theta.iter().map(|z| cx(*z)).collect(),
            rho: matrix_rows(&model.rho),
            structure_constants: (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|k| cx(model.structure[i][(k, j)])).collect()).collect())
                .collect(),
            euler_multiplication: matrix_rows(&model.euler),
            calibration,
            extend_calibration,
            base_point: model.base_point.iter().map(|z| cx(*z)).collect(),
        }
    }

    /// Builds the model and checks every axiom.
    pub fn to_model(&self) -> Result<FrobeniusModel, Error> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::Schema("dim must be positive".into()));
        }
        let vec_of = |v: &[Cx], what: &str| -> Result<Vec<C64>, Error> {
            if v.len() != n {
                return Err(Error::Schema(format!("{what} must have length {n}")));
            }
            Ok(v.iter().map(|p| from_cx(*p)).collect())
        };
        let sc = &self.structure_constants;
        if sc.len() != n || sc.iter().any(|a| a.len() != n || a.iter().any(|b| b.len() != n)) {
            return Err(Error::Schema(format!("structure_constants must be {n}x{n}x{n}")));
        }
        let structure = (0..n).map(|i| CMat::from_fn(n, n, |k, j| from_cx(sc[i][j][k]))).collect();
        let calibration = match &self.calibration {
            None => Calibration::Homogeneous,
            Some(terms) => Calibration::Table {
                terms: terms.iter().map(|t| matrix_from_rows(t, n, "calibration term")).collect::<Result<_, _>>()?,
                extend: self.extend_calibration,
            },
        };
        let descriptor = match (&self.projective_space, &self.name) {
            (Some(p), _) => ModelDescriptor::ProjectiveSpace { n: p.n, q: from_cx(p.q) },
            (None, name) => ModelDescriptor::Custom { name: name.clone().unwrap_or_else(|| "custom".into()) },
        };
        let model = FrobeniusModel {
            dim: n,
            conformal_dim: self.conformal_dim,
            pairing: matrix_from_rows(&self.pairing, n, "pairing")?,
            theta: vec_of(&self.theta_eigenvalues, "theta_eigenvalues")?,
            rho: matrix_from_rows(&self.rho, n, "rho")?,
            structure,
            euler: matrix_from_rows(&self.euler_multiplication, n, "euler_multiplication")?,
            calibration,
            base_point: vec_of(&self.base_point, "base_point")?,
            descriptor,
        };
        if let ModelDescriptor::ProjectiveSpace { n: pn, q } = model.descriptor {
            if pn + 1 != n {
                return Err(Error::Schema(format!("projective_space.n = {pn} needs dim {}", pn + 1)));
            }
            if q.norm() == 0.0 {
                return Err(Error::Schema("projective_space.q must be nonzero".into()));
            }
        }
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }
}

pub fn load_model(path: &Path) -> Result<FrobeniusModel, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(path.display().to_string(), e))?;
    ModelFile::from_json(&text)?.to_model()
}

pub fn save_model(model: &FrobeniusModel, path: &Path) -> Result<(), Error> {
    std::fs::write(path, ModelFile::from_model(model).to_json()).map_err(|e| Error::Io(path.display().to_string(), e))
}

/// `P<n>` or `P<n>@re,im` for built-in models, anything else is a model file path.
pub fn resolve_model(spec: &str) -> Result<FrobeniusModel, Error> {
    if let Some(rest) = spec.strip_prefix('P').or_else(|| spec.strip_prefix('p')) {
        let (n, q) = match rest.split_once('@') {
            Some((n, q)) => (n, Some(q)),
            None => (rest, None),
        };
        if let Ok(n) = n.parse::<usize>() {
            if n == 0 {
                return Err(Error::Usage("P<n> needs n >= 1".into()));
            }
            let q = match q {
                None => qdmono_core::frobenius::default_q(n),
                Some(q) => {
                    let (re, im) = q.split_once(',').ok_or_else(|| Error::Usage(format!("expected q as re,im in {spec}")))?;
                    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Usage(format!("bad number {s:?} in {spec}")));
                    C64::new(parse(re)?, parse(im)?)
                }
            };
            if q.norm() == 0.0 {
                return Err(Error::Usage("q must be nonzero".into()));
            }
            return Ok(qh_projective_space(n, q));
        }
    }
    load_model(Path::new(spec))
}
