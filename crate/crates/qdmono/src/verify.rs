//! End-to-end verification: reflection vectors, both derivations of the monodromy data, and the
//! match of the reflection vectors with integral K-theory classes on `P^n`.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64 as C64;
use qdmono_core::frobenius::{FrobeniusModel, ModelDescriptor};
use qdmono_core::ktheory::{
    apply_word, braid_to_beilinson, gram, lattice_coordinates, match_integer_class, ExceptionalCollection, KClass,
};
use qdmono_core::numerics::linalg::dot;
use qdmono_core::paths::{braid_move, lexicographic_order, reference_system, Direction, DistinguishedSystem, Side};
use qdmono_core::periods::{EngineOptions, PeriodEngine, ReflectionVector};
use qdmono_core::stokes::{compare_monodromy, consistency_report, monodromy_data_analytic, monodromy_data_from_reflections};

use crate::model_file::cx;
use crate::report::{cmat_json, vec_json, BraidedMatch, KTheorySection, MonodromyJson, ResidualRow, VerificationReport, SCHEMA_VERSION};
use crate::{Error, VERSION};

/// Bound on lattice coordinates accepted by the integer match.
pub const LATTICE_BOUND: i64 = 50;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Analytic against reflection-side Stokes matrices.
    pub two_way: f64,
    /// Analytic against reflection-side central connection matrix.
    pub central: f64,
    /// Identities among the monodromy data.
    pub relations: f64,
    /// Distance to the nearest integer in Gram matrices and lattice coordinates.
    pub integer: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { two_way: 1e-5, central: 1e-4, relations: 1e-4, integer: 1e-4 }
    }
}

impl Tolerances {
    pub fn uniform(t: f64) -> Self {
        Tolerances { two_way: t, central: t, relations: t, integer: t }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub eta_angle: f64,
    pub m: C64,
    pub tol: Tolerances,
    pub engine: EngineOptions,
    /// Longest mutation word tried when looking for a Beilinson collection.
    pub braid_search: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            eta_angle: std::f64::consts::FRAC_PI_2,
            m: C64::new(0.0, 0.0),
            tol: Tolerances::default(),
            engine: EngineOptions::default(),
            braid_search: 4,
        }
    }
}

pub fn format_word(word: &[(usize, Side)]) -> Vec<String> {
    word.iter().map(|(i, s)| format!("{}{i}", if *s == Side::L { 'L' } else { 'R' })).collect()
}

/// Parses words like `L1 R2` or `L1,R2`.
pub fn parse_word(text: &str) -> Result<Vec<(usize, Side)>, Error> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (side, idx) = t.split_at(1);
            let side = match side {
                "L" | "l" => Side::L,
                "R" | "r" => Side::R,
                _ => return Err(Error::Usage(format!("braid generator {t:?} must start with L or R"))),
            };
            let i = idx.parse::<usize>().map_err(|_| Error::Usage(format!("bad braid index in {t:?}")))?;
            Ok((i, side))
        })
        .collect()
}

pub fn braided_system(engine: &PeriodEngine, sys: &DistinguishedSystem, word: &[(usize, Side)]) -> Result<DistinguishedSystem, Error> {
    let mut s = sys.clone();
    for &(i, side) in word {
        s = braid_move(&s, engine.u(), i, side)?;
    }
    Ok(s)
}

/// Euler Gram `⟨β_i, β_j⟩`.
pub fn euler_gram(engine: &PeriodEngine, betas: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let e = engine.euler_matrix();
    betas.iter().map(|a| betas.iter().map(|b| dot(a, &e.mul_vec(b))).collect()).collect()
}

/// Largest distance of a Gram matrix from the nearest integers, and from upper unitriangularity.
pub fn gram_defects(g: &[Vec<C64>]) -> (f64, f64) {
    let mut int: f64 = 0.0;
    let mut tri: f64 = 0.0;
    for (i, row) in g.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            int = int.max((z - C64::new(z.re.round(), 0.0)).norm());
            let want = if i == j { 1.0 } else { 0.0 };
            if j <= i {
                tri = tri.max((z - want).norm());
            }
        }
    }
    (int, tri)
}

/// Integer classes for a list of reflection vectors, or the index of the first that has none.
pub fn match_classes(n: usize, q: C64, betas: &[Vec<C64>], tol: f64) -> Result<(Vec<KClass>, Vec<f64>), usize> {
    let mut classes = Vec::new();
    let mut rounding = Vec::new();
    for (k, b) in betas.iter().enumerate() {
        match match_integer_class(n, q, b, tol, LATTICE_BOUND) {
            Some((c, e)) => {
                classes.push(c);
                rounding.push(e);
            }
            None => return Err(k),
        }
    }
    Ok((classes, rounding))
}

/// Largest coordinate distance between re-extracted vectors and predicted lattice classes.
pub fn lattice_distance(n: usize, q: C64, betas: &[Vec<C64>], want: &[KClass]) -> f64 {
    let mut d: f64 = 0.0;
    for (b, w) in betas.iter().zip(want) {
        match lattice_coordinates(n, q, b) {
            Some(x) => {
                for (z, &k) in x.iter().zip(&w.coeffs) {
                    d = d.max((z - C64::new(k as f64, 0.0)).norm());
                }
            }
            None => return f64::INFINITY,
        }
    }
    d
}

fn betas_of(r: &[ReflectionVector]) -> Vec<Vec<C64>> {
    r.iter().map(|x| x.beta.clone()).collect()
}

struct Clock(BTreeMap<String, f64>);

impl Clock {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.0.insert(stage.to_string(), t.elapsed().as_secs_f64());
        out
    }
}

pub fn verify_dubrovin(model: FrobeniusModel, opts: &VerifyOptions) -> VerificationReport {
    let tol = opts.tol;
    let mut clock = Clock(BTreeMap::new());
    let mut errors = Vec::new();
    let mut residuals = Vec::new();
    let descriptor = match &model.descriptor {
        ModelDescriptor::ProjectiveSpace { n, q } => format!("P{n}@{},{}", q.re, q.im),
        ModelDescriptor::Custom { name } => name.clone(),
    };
    let mut report = VerificationReport {
        schema_version: SCHEMA_VERSION,
        engine_version: VERSION.to_string(),
        model: descriptor,
        dim: model.dim,
        eta_angle: opts.eta_angle,
        m: cx(opts.m),
        canonical_coordinates: Vec::new(),
        lex_order: Vec::new(),
        betas: Vec::new(),
        euler_gram: Vec::new(),
        analytic: None,
        reflection: None,
        residuals: Vec::new(),
        ktheory: KTheorySection::NotApplicable,
        errors: Vec::new(),
        timings: BTreeMap::new(),
    };
    let pn = match model.descriptor {
        ModelDescriptor::ProjectiveSpace { n, q } => Some((n, q)),
        ModelDescriptor::Custom { .. } => None,
    };
    let engine = match clock.time("canonical data", || PeriodEngine::new(model, opts.engine.clone())) {
        Ok(e) => e,
        Err(e) => {
            report.errors.push(format!("canonical data: {e}"));
            report.timings = clock.0;
            return report;
        }
    };
    report.canonical_coordinates = vec_json(engine.u());
    let eta = Direction::from_angle(opts.eta_angle);
    let sys = match reference_system(engine.u(), &eta, engine.lambda0) {
        Ok(s) => s,
        Err(e) => {
            report.errors.push(format!("reference system: {e}"));
            report.timings = clock.0;
            return report;
        }
    };
    report.lex_order = lexicographic_order(engine.u(), &eta).unwrap_or_default();

    let refl = clock.time("reflection side", || monodromy_data_from_reflections(&engine, &eta, opts.m));
    let analytic = clock.time("analytic side", || monodromy_data_analytic(&engine, &eta));
    let mut betas = Vec::new();
    match &refl {
        Ok(d) => {
            betas = betas_of(&d.betas);
            report.betas = betas.iter().map(|b| vec_json(b)).collect();
            report.reflection = Some(MonodromyJson::from(d));
            let misfit = d.betas.iter().chain(&d.betas_minus).map(|b| b.fit_misfit).fold(0.0, f64::max);
            residuals.push(ResidualRow::new("local expansion misfit of reflection vectors", misfit, 1e-5));
            let g = euler_gram(&engine, &betas);
            let (int, tri) = gram_defects(&g);
            residuals.push(ResidualRow::new("Euler Gram of β integral", int, tol.integer));
            residuals.push(ResidualRow::new("Euler Gram of β upper unitriangular", tri, tol.integer));
            report.euler_gram = g.iter().map(|r| vec_json(r)).collect();
            match consistency_report(&engine, d, tol.relations) {
                Ok(rows) => residuals.extend(rows.iter().map(|r| ResidualRow::from_core("reflection side: ", r))),
                Err(e) => errors.push(format!("reflection-side identities: {e}")),
            }
        }
        Err(e) => errors.push(format!("reflection side: {e}")),
    }
    match &analytic {
        Ok(d) => {
            report.analytic = Some(MonodromyJson::from(d));
            match consistency_report(&engine, d, tol.relations) {
                Ok(rows) => residuals.extend(rows.iter().map(|r| ResidualRow::from_core("analytic side: ", r))),
                Err(e) => errors.push(format!("analytic-side identities: {e}")),
            }
        }
        Err(e) => errors.push(format!("analytic side: {e}")),
    }
    if let (Ok(a), Ok(b)) = (&analytic, &refl) {
        let cmp = compare_monodromy(a, b);
        residuals.push(ResidualRow::new("two-way V_+", cmp.v_plus, tol.two_way));
        residuals.push(ResidualRow::new("two-way V_-", cmp.v_minus, tol.two_way));
        residuals.push(ResidualRow::new("two-way C (row signs normalised)", cmp.c_matrix, tol.central));
    }

    if let (Some((n, q)), false) = (pn, betas.is_empty()) {
        report.ktheory = clock.time("k-theory", || {
            ktheory_section(&engine, &sys, n, q, opts, &betas, &mut residuals, &mut errors)
        });
    }
    report.residuals = residuals;
    report.errors = errors;
    report.timings = clock.0;
    report
}

#[allow(clippy::too_many_arguments)]
fn ktheory_section(
    engine: &PeriodEngine,
    sys: &DistinguishedSystem,
    n: usize,
    q: C64,
    opts: &VerifyOptions,
    betas: &[Vec<C64>],
    residuals: &mut Vec<ResidualRow>,
    errors: &mut Vec<String>,
) -> KTheorySection {
    let tol = opts.tol;
    let (classes, rounding) = match match_classes(n, q, betas, tol.integer) {
        Ok(x) => x,
        Err(k) => {
            residuals.push(ResidualRow::new("integer match β_i = Ψ_Q(F_i)", f64::INFINITY, tol.integer));
            return KTheorySection::NoMatch {
                reason: format!("β_{} has no lattice point within {} with |coeff| <= {LATTICE_BOUND}", k + 1, tol.integer),
            };
        }
    };
    residuals.push(ResidualRow::new("integer match β_i = Ψ_Q(F_i)", rounding.iter().copied().fold(0.0, f64::max), tol.integer));
    let chi = gram(&classes);
    let g = euler_gram(engine, betas);
    let mut d: f64 = 0.0;
    for (gr, cr) in g.iter().zip(&chi) {
        for (z, &k) in gr.iter().zip(cr) {
            d = d.max((z - C64::new(k as f64, 0.0)).norm());
        }
    }
    residuals.push(ResidualRow::new("Euler Gram of β = χ(F_i, F_j)", d, tol.integer));
    let coll = ExceptionalCollection { classes: classes.clone() };
    let exceptional = coll.check();
    if let Err(e) = &exceptional {
        errors.push(format!("matched classes: {e}"));
    }
    let beilinson = match exceptional.ok().and_then(|_| braid_to_beilinson(&coll, opts.braid_search)) {
        None => {
            errors.push(format!("no mutation word of length <= {} reaches a Beilinson collection", opts.braid_search));
            None
        }
        Some((word, twist, signs)) => match braided_match(engine, sys, n, q, &coll, &word, twist, &signs, opts, residuals) {
            Ok(b) => Some(b),
            Err(e) => {
                errors.push(format!("braided re-extraction: {e}"));
                None
            }
        },
    };
    KTheorySection::Matched {
        classes: classes.iter().map(|c| c.coeffs.clone()).collect(),
        rounding,
        chi_gram: chi,
        beilinson,
    }
}

#[allow(clippy::too_many_arguments)]
fn braided_match(
    engine: &PeriodEngine,
    sys: &DistinguishedSystem,
    n: usize,
    q: C64,
    coll: &ExceptionalCollection,
    word: &[(usize, Side)],
    twist: i64,
    signs: &[i64],
    opts: &VerifyOptions,
    residuals: &mut Vec<ResidualRow>,
) -> Result<BraidedMatch, Error> {
    let tol = opts.tol;
    let s = braided_system(engine, sys, word)?;
    let betas = betas_of(&engine.reflection_vectors(opts.m, &s)?);
    let predicted = apply_word(coll, word)?;
    residuals.push(ResidualRow::new(
        "braided re-extraction = K-lattice mutation of F",
        lattice_distance(n, q, &betas, &predicted.classes),
        tol.integer,
    ));
    let (classes, rounding) = match_classes(n, q, &betas, tol.integer).map_err(|k| Error::Usage(format!("braided β_{} not integral", k + 1)))?;
    let normalised: Vec<Vec<C64>> = betas.iter().zip(signs).map(|(b, &s)| b.iter().map(|z| z * s as f64).collect()).collect();
    let g = euler_gram(engine, &normalised);
    let want = ExceptionalCollection::beilinson(n, twist).gram();
    let mut d: f64 = 0.0;
    for (gr, wr) in g.iter().zip(&want) {
        for (z, &k) in gr.iter().zip(wr) {
            d = d.max((z - C64::new(k as f64, 0.0)).norm());
        }
    }
    residuals.push(ResidualRow::new("Euler Gram after braid = Beilinson Gram", d, tol.integer));
    Ok(BraidedMatch {
        word: format_word(word),
        classes: classes.iter().map(|c| c.coeffs.clone()).collect(),
        rounding,
        twist,
        signs: signs.to_vec(),
        euler_gram: g.iter().map(|r| vec_json(r)).collect(),
    })
}

pub fn matrix_json(a: &qdmono_core::numerics::CMat) -> Vec<Vec<crate::model_file::Cx>> {
    cmat_json(a)
}
