//! Command-line surface. Every subcommand produces a JSON document and a pass flag.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use qdmono_core::frobenius::{canonical_data, ModelDescriptor};
use qdmono_core::ktheory::{apply_word, braid_to_beilinson, ExceptionalCollection};
use qdmono_core::paths::{lexicographic_order, reference_system, Direction};
use qdmono_core::periods::{EngineOptions, PeriodEngine};
use qdmono_core::stokes::{
    compare_monodromy, consistency_report, critical_angles, half_turn, monodromy_data_analytic, monodromy_data_from_reflections,
};
use serde_json::{json, Value};

use crate::model_file::{cx, resolve_model, ModelFile};
use crate::report::{cmat_json, vec_json, residual_table, MonodromyJson, ResidualRow};
use crate::svg::render_svg;
use crate::verify::{
    braided_system, euler_gram, format_word, lattice_distance, match_classes, parse_word, verify_dubrovin, Tolerances, VerifyOptions,
};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "qdmono", version = crate::VERSION, about = "Monodromy data of semisimple Frobenius manifolds")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// `P<n>`, `P<n>@re,im` or a model file.
    #[arg(long, global = true, default_value = "P1")]
    pub model: String,
    /// Override every tolerance of the residual checks.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Order of the local expansion used to normalise reflection vectors.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Twist parameter, `re` or `re,im`.
    #[arg(long, global = true, default_value = "0", allow_hyphen_values = true)]
    pub m: String,
    /// Argument of the admissible direction η.
    #[arg(long = "eta-angle", global = true, default_value_t = std::f64::consts::FRAC_PI_2, allow_hyphen_values = true)]
    pub eta_angle: f64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model file operations.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Reflection vectors along the reference system, optionally braided.
    Reflect {
        /// Braid word such as `L1 R2`.
        #[arg(long)]
        word: Option<String>,
    },
    /// Stokes and central connection matrices from both derivations.
    Monodromy,
    /// Analytic Stokes data, its identities, and the wall-crossing over a half turn of η.
    Stokes,
    /// Full verification report.
    VerifyDubrovin {
        /// Longest mutation word tried when looking for a Beilinson collection.
        #[arg(long, default_value_t = 4)]
        search: usize,
    },
    /// Braid moves on the reference system compared with mutations of the matched classes.
    Braid {
        /// Braid word such as `L1 R2`; with `--beilinson` the word is searched for.
        word: Vec<String>,
        #[arg(long)]
        beilinson: bool,
    },
    /// SVG of the reference system, canonical coordinates and Stokes rays.
    Render {
        #[arg(long)]
        word: Option<String>,
        /// Leave out the Stokes rays.
        #[arg(long)]
        no_rays: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ModelAction {
    /// Check the axioms and print the canonical data.
    Validate,
    /// Write the model in the file format.
    Export,
}

/// Output of a subcommand.
pub struct Outcome {
    pub text: String,
    pub pass: bool,
}

fn parse_m(s: &str) -> Result<C64, Error> {
    let bad = || Error::Usage(format!("--m expects re or re,im, got {s:?}"));
    match s.split_once(',') {
        Some((a, b)) => Ok(C64::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)),
        None => Ok(C64::new(s.trim().parse().map_err(|_| bad())?, 0.0)),
    }
}

fn engine_options(g: &Global) -> EngineOptions {
    let mut o = EngineOptions::default();
    if let Some(k) = g.order {
        o.local_order = k;
    }
    o
}

fn tolerances(g: &Global) -> Tolerances {
    g.tol.map_or_else(Tolerances::default, Tolerances::uniform)
}

fn doc(value: Value, residuals: &[ResidualRow], errors: &[String]) -> Outcome {
    let pass = errors.is_empty() && residuals.iter().all(|r| r.pass);
    let mut v = value;
    v["residuals"] = serde_json::to_value(residuals).expect("residuals serialize");
    v["errors"] = json!(errors);
    v["pass"] = json!(pass);
    v["engine_version"] = json!(crate::VERSION);
    Outcome { text: serde_json::to_string_pretty(&v).expect("json"), pass }
}

fn pn_of(engine: &PeriodEngine) -> Option<(usize, C64)> {
    match engine.model.descriptor {
        ModelDescriptor::ProjectiveSpace { n, q } => Some((n, q)),
        ModelDescriptor::Custom { .. } => None,
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, Error> {
    let g = &cli.global;
    let model = resolve_model(&g.model)?;
    let m = parse_m(&g.m)?;
    let tol = tolerances(g);
    let eta = Direction::from_angle(g.eta_angle);
    match &cli.command {
        Command::Model { action: ModelAction::Export } => {
            Ok(Outcome { text: ModelFile::from_model(&model).to_json(), pass: true })
        }
        Command::Model { action: ModelAction::Validate } => {
            let sd = canonical_data(&model)?;
            let v = json!({
                "dim": model.dim,
                "canonical_coordinates": vec_json(&sd.u),
                "min_gap": sd.min_gap(),
                "psi": cmat_json(&sd.psi),
                "valid": true,
            });
            Ok(doc(v, &[], &[]))
        }
        Command::VerifyDubrovin { search } => {
            let opts = VerifyOptions { eta_angle: g.eta_angle, m, tol, engine: engine_options(g), braid_search: *search };
            let report = verify_dubrovin(model, &opts);
            eprint!("{}", residual_table(&report.residuals));
            for e in &report.errors {
                eprintln!("error: {e}");
            }
            Ok(Outcome { text: report.to_json(), pass: report.all_pass() })
        }
        Command::Render { word, no_rays } => {
            let engine = PeriodEngine::new(model, engine_options(g))?;
            let mut sys = reference_system(engine.u(), &eta, engine.lambda0)?;
            if let Some(w) = word {
                sys = braided_system(&engine, &sys, &parse_word(w)?)?;
            }
            let rays = if *no_rays { Vec::new() } else { critical_angles(engine.u()) };
            Ok(Outcome { text: render_svg(&sys, engine.u(), &rays), pass: true })
        }
        Command::Reflect { word } => {
            let engine = PeriodEngine::new(model, engine_options(g))?;
            let mut sys = reference_system(engine.u(), &eta, engine.lambda0)?;
            let w = word.as_deref().map(parse_word).transpose()?.unwrap_or_default();
            sys = braided_system(&engine, &sys, &w)?;
            let refl = engine.reflection_vectors(m, &sys)?;
            let betas: Vec<Vec<C64>> = refl.iter().map(|r| r.beta.clone()).collect();
            let mut residuals = vec![ResidualRow::new(
                "local expansion misfit",
                refl.iter().map(|r| r.fit_misfit).fold(0.0, f64::max),
                1e-5,
            )];
            let mut v = json!({
                "eta_angle": g.eta_angle,
                "m": cx(m),
                "word": format_word(&w),
                "targets": refl.iter().map(|r| r.target).collect::<Vec<_>>(),
                "betas": betas.iter().map(|b| vec_json(b)).collect::<Vec<_>>(),
                "eigen_separation": refl.iter().map(|r| r.eigen_separation).collect::<Vec<_>>(),
                "euler_gram": euler_gram(&engine, &betas).iter().map(|r| vec_json(r)).collect::<Vec<_>>(),
            });
            if let Some((n, q)) = pn_of(&engine) {
                match match_classes(n, q, &betas, tol.integer) {
                    Ok((classes, rounding)) => {
                        v["classes"] = json!(classes.iter().map(|c| c.coeffs.clone()).collect::<Vec<_>>());
                        residuals.push(ResidualRow::new("integer match", rounding.iter().copied().fold(0.0, f64::max), tol.integer));
                    }
                    Err(k) => residuals.push(ResidualRow::new(format!("integer match of β_{}", k + 1), f64::INFINITY, tol.integer)),
                }
            }
            Ok(doc(v, &residuals, &[]))
        }
        Command::Monodromy => {
            let engine = PeriodEngine::new(model, engine_options(g))?;
            let refl = monodromy_data_from_reflections(&engine, &eta, m)?;
            let mut errors = Vec::new();
            let mut residuals: Vec<ResidualRow> =
                consistency_report(&engine, &refl, tol.relations)?.iter().map(|r| ResidualRow::from_core("reflection side: ", r)).collect();
            let mut v = json!({
                "eta_angle": g.eta_angle,
                "m": cx(m),
                "lex_order": refl.order,
                "reflection": MonodromyJson::from(&refl),
            });
            match monodromy_data_analytic(&engine, &eta) {
                Ok(a) => {
                    let cmp = compare_monodromy(&a, &refl);
                    residuals.push(ResidualRow::new("two-way V_+", cmp.v_plus, tol.two_way));
                    residuals.push(ResidualRow::new("two-way V_-", cmp.v_minus, tol.two_way));
                    residuals.push(ResidualRow::new("two-way C (row signs normalised)", cmp.c_matrix, tol.central));
                    v["analytic"] = serde_json::to_value(MonodromyJson::from(&a)).expect("json");
                    v["row_signs"] = json!(cmp.signs);
                }
                Err(e) => errors.push(format!("analytic side: {e}")),
            }
            Ok(doc(v, &residuals, &errors))
        }
        Command::Stokes => {
            let engine = PeriodEngine::new(model, engine_options(g))?;
            let a = monodromy_data_analytic(&engine, &eta)?;
            let mut residuals: Vec<ResidualRow> =
                consistency_report(&engine, &a, tol.relations)?.iter().map(|r| ResidualRow::from_core("analytic side: ", r)).collect();
            let mut errors = Vec::new();
            let mut v = json!({
                "eta_angle": g.eta_angle,
                "lex_order": a.order,
                "critical_angles": critical_angles(engine.u()),
                "analytic": MonodromyJson::from(&a),
                "fit": a.diagnostics.iter().map(|(k, x)| json!({"label": k, "value": x})).collect::<Vec<_>>(),
            });
            match half_turn(&engine, &eta, m) {
                Ok(ht) => {
                    residuals.push(ResidualRow::new("wall-crossing prediction of β", ht.prediction_error, tol.relations));
                    residuals.push(ResidualRow::new("V_- = (W_1^t W_2^t ⋯)^-1", ht.v_minus.dist(&a.v_minus), tol.relations));
                    v["walls"] = json!(ht.crossings.iter().map(|c| json!({
                        "angle": c.eta_nu.angle(),
                        "sequences": c.sequences,
                        "w": cmat_json(&c.w),
                    })).collect::<Vec<_>>());
                }
                Err(e) => errors.push(format!("wall-crossing: {e}")),
            }
            Ok(doc(v, &residuals, &errors))
        }
        Command::Braid { word, beilinson } => {
            let engine = PeriodEngine::new(model, engine_options(g))?;
            let (n, q) = pn_of(&engine).ok_or_else(|| Error::Usage("braid needs a P^n model for the lattice comparison".into()))?;
            let sys = reference_system(engine.u(), &eta, engine.lambda0)?;
            let betas: Vec<Vec<C64>> = engine.reflection_vectors(m, &sys)?.into_iter().map(|r| r.beta).collect();
            let (classes, _) = match_classes(n, q, &betas, tol.integer)
                .map_err(|k| Error::Usage(format!("β_{} has no integer match; nothing to compare against", k + 1)))?;
            let coll = ExceptionalCollection::new(classes)?;
            let w = if *beilinson {
                braid_to_beilinson(&coll, 4).map(|x| x.0).ok_or_else(|| Error::Usage("no Beilinson collection within 4 moves".into()))?
            } else {
                parse_word(&word.join(" "))?
            };
            let predicted = apply_word(&coll, &w)?;
            let s = braided_system(&engine, &sys, &w)?;
            let braided: Vec<Vec<C64>> = engine.reflection_vectors(m, &s)?.into_iter().map(|r| r.beta).collect();
            let d = lattice_distance(n, q, &braided, &predicted.classes);
            let residuals = vec![ResidualRow::new("braided re-extraction = K-lattice mutation", d, tol.integer)];
            let v = json!({
                "word": format_word(&w),
                "lex_order": lexicographic_order(engine.u(), &eta)?,
                "classes_before": coll.classes.iter().map(|c| c.coeffs.clone()).collect::<Vec<_>>(),
                "classes_after": predicted.classes.iter().map(|c| c.coeffs.clone()).collect::<Vec<_>>(),
                "chi_gram_after": predicted.gram(),
                "betas_after": braided.iter().map(|b| vec_json(b)).collect::<Vec<_>>(),
            });
            Ok(doc(v, &residuals, &[]))
        }
    }
}
