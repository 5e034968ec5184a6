//! JSON model documents.
//!
//! Every document carries `schema_version` and a `kind` tag selecting one of
//! the shapes below; unknown fields are rejected.
//!
//! ```json
//! {"schema_version": 1, "kind": "mixture", "family": "normal",
//!  "atoms": [{"weight": 0.3, "mu": 2.0, "sigma": 1.0}, ...]}
//! ```

use finmix::model::Family;
use finmix::{
    Atom, BetaBinomial, Component, ConjugatePrior, DirichletMultinomial, HmmSpec, MixingMeasure, NegativeBinomial,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Mixture(MixingMeasure),
    Hmm(HmmSpec),
    Prior(ConjugatePrior),
    BetaBinomial(BetaBinomial),
    NegativeBinomial(NegativeBinomial),
    DirichletMultinomial(DirichletMultinomial),
}

/// A document that failed to parse or validate, with a location.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentError(pub String);

impl std::fmt::Display for DocumentError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Deserialize)]
struct Header {
    schema_version: Option<Value>,
    kind: Option<Value>,
}

#[derive(Debug, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct AtomDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cov: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct MixtureDoc {
    schema_version: u32,
    kind: String,
    family: Family,
    atoms: Vec<AtomDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct HmmDoc {
    schema_version: u32,
    kind: String,
    family: Family,
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
    emissions: Vec<AtomDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PriorDoc {
    schema_version: u32,
    kind: String,
    dirichlet: Vec<f64>,
    mean_loc: f64,
    mean_scale: f64,
    ig_shape: f64,
    ig_scale: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct BetaBinomialDoc {
    schema_version: u32,
    kind: String,
    trials: u64,
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct NegativeBinomialDoc {
    schema_version: u32,
    kind: String,
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct DirichletMultinomialDoc {
    schema_version: u32,
    kind: String,
    trials: u64,
    concentration: Vec<f64>,
}

fn err(msg: impl Into<String>) -> DocumentError {
    DocumentError(msg.into())
}

fn from_json<'a, D: Deserialize<'a>>(text: &'a str) -> Result<D, DocumentError> {
    // serde_json messages already end with "at line L column C".
    serde_json::from_str(text).map_err(|e| err(e.to_string()))
}

fn lib<T>(r: finmix::Result<T>, at: &str) -> Result<T, DocumentError> {
    r.map_err(|e| err(format!("{at}: {e}")))
}

fn component(family: Family, a: &AtomDoc, at: &str) -> Result<Component, DocumentError> {
    let stray = |name: &str, present: bool| {
        if present {
            Err(err(format!("{at}.{name}: not a parameter of the {} family", family.name())))
        } else {
            Ok(())
        }
    };
    match family {
        Family::Normal => {
            stray("mean", a.mean.is_some())?;
            stray("cov", a.cov.is_some())?;
            stray("lambda", a.lambda.is_some())?;
            let mu = a.mu.ok_or_else(|| err(format!("{at}: missing field `mu`")))?;
            let sigma = a.sigma.ok_or_else(|| err(format!("{at}: missing field `sigma`")))?;
            lib(Component::normal(mu, sigma), at)
        }
        Family::BivariateNormal => {
            stray("mu", a.mu.is_some())?;
            stray("sigma", a.sigma.is_some())?;
            stray("lambda", a.lambda.is_some())?;
            let mean = a.mean.ok_or_else(|| err(format!("{at}: missing field `mean`")))?;
            let cov = a.cov.ok_or_else(|| err(format!("{at}: missing field `cov`")))?;
            lib(Component::bivariate_normal(mean, cov), at)
        }
        Family::Poisson => {
            stray("mu", a.mu.is_some())?;
            stray("sigma", a.sigma.is_some())?;
            stray("mean", a.mean.is_some())?;
            stray("cov", a.cov.is_some())?;
            let lambda = a.lambda.ok_or_else(|| err(format!("{at}: missing field `lambda`")))?;
            lib(Component::poisson(lambda), at)
        }
    }
}

/// Parses and validates a document.
pub fn parse(text: &str) -> Result<Document, DocumentError> {
    let header: Header = from_json(text)?;
    match header.schema_version {
        None => return Err(err("missing field `schema_version`")),
        Some(Value::Number(v)) if v.as_u64() == Some(SCHEMA_VERSION as u64) => {}
        Some(v) => return Err(err(format!("schema_version: unsupported value {v}, expected {SCHEMA_VERSION}"))),
    }
    let kind = match header.kind {
        Some(Value::String(k)) => k,
        Some(v) => return Err(err(format!("kind: expected a string, found {v}"))),
        None => return Err(err("missing field `kind`")),
    };
    match kind.as_str() {
        "mixture" => {
            let d: MixtureDoc = from_json(text)?;
            if d.atoms.is_empty() {
                return Err(err("atoms: at least one atom is required"));
            }
            let atoms = d
                .atoms
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let at = format!("atoms[{i}]");
                    let w = a.weight.ok_or_else(|| err(format!("{at}: missing field `weight`")))?;
                    Ok(Atom::new(w, component(d.family, a, &at)?))
                })
                .collect::<Result<Vec<_>, DocumentError>>()?;
            Ok(Document::Mixture(lib(MixingMeasure::new(atoms), "atoms")?))
        }
        "hmm" => {
            let d: HmmDoc = from_json(text)?;
            let emissions = d
                .emissions
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let at = format!("emissions[{i}]");
                    if a.weight.is_some() {
                        return Err(err(format!("{at}.weight: emissions carry no weight")));
                    }
                    component(d.family, a, &at)
                })
                .collect::<Result<Vec<_>, DocumentError>>()?;
            Ok(Document::Hmm(lib(HmmSpec::new(d.initial, d.transition, emissions), "hmm")?))
        }
        "prior" => {
            let d: PriorDoc = from_json(text)?;
            Ok(Document::Prior(lib(
                ConjugatePrior::new(d.dirichlet, d.mean_loc, d.mean_scale, d.ig_shape, d.ig_scale),
                "prior",
            )?))
        }
        "beta_binomial" => {
            let d: BetaBinomialDoc = from_json(text)?;
            Ok(Document::BetaBinomial(lib(BetaBinomial::new(d.trials, d.alpha, d.beta), "beta_binomial")?))
        }
        "negative_binomial" => {
            let d: NegativeBinomialDoc = from_json(text)?;
            Ok(Document::NegativeBinomial(lib(NegativeBinomial::new(d.alpha, d.beta), "negative_binomial")?))
        }
        "dirichlet_multinomial" => {
            let d: DirichletMultinomialDoc = from_json(text)?;
            Ok(Document::DirichletMultinomial(lib(
                DirichletMultinomial::new(d.trials, d.concentration),
                "dirichlet_multinomial",
            )?))
        }
        other => Err(err(format!(
            "kind: unknown kind `{other}`, expected one of mixture, hmm, prior, beta_binomial, \
             negative_binomial, dirichlet_multinomial"
        ))),
    }
}

fn atom_doc(c: &Component, weight: Option<f64>) -> AtomDoc {
    let mut a = AtomDoc {
        weight,
        ..AtomDoc::default()
    };
    match *c {
        Component::Normal { mu, sigma } => {
            a.mu = Some(mu);
            a.sigma = Some(sigma);
        }
        Component::BivariateNormal { mean, cov } => {
            a.mean = Some(mean);
            a.cov = Some(cov);
        }
        Component::Poisson { lambda } => a.lambda = Some(lambda),
    }
    a
}

/// Mixture document for `measure`.
pub fn mixture_json(measure: &MixingMeasure) -> Value {
    let atoms: Vec<AtomDoc> = measure.atoms().iter().map(|a| atom_doc(&a.component, Some(a.weight))).collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "mixture",
        "family": measure.family(),
        "atoms": atoms,
    })
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Mixture(_) => "mixture",
            Document::Hmm(_) => "hmm",
            Document::Prior(_) => "prior",
            Document::BetaBinomial(_) => "beta_binomial",
            Document::NegativeBinomial(_) => "negative_binomial",
            Document::DirichletMultinomial(_) => "dirichlet_multinomial",
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = match self {
            Document::Mixture(m) => return mixture_json(m),
            Document::Hmm(h) => {
                let emissions: Vec<AtomDoc> = h.emissions().iter().map(|c| atom_doc(c, None)).collect();
                json!({
                    "family": h.emissions()[0].family(),
                    "initial": h.initial(),
                    "transition": h.transition(),
                    "emissions": emissions,
                })
            }
            Document::Prior(p) => json!({
                "dirichlet": p.dirichlet_weights,
                "mean_loc": p.mean_loc,
                "mean_scale": p.mean_scale,
                "ig_shape": p.ig_shape,
                "ig_scale": p.ig_scale,
            }),
            Document::BetaBinomial(d) => json!({"trials": d.trials, "alpha": d.alpha, "beta": d.beta}),
            Document::NegativeBinomial(d) => json!({"alpha": d.alpha, "beta": d.beta}),
            Document::DirichletMultinomial(d) => json!({"trials": d.trials, "concentration": d.concentration}),
        };
        v["schema_version"] = json!(SCHEMA_VERSION);
        v["kind"] = json!(self.kind());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"{
        "schema_version": 1,
        "kind": "mixture",
        "family": "normal",
        "atoms": [
            {"weight": 0.3, "mu": 2.0, "sigma": 1.0},
            {"weight": 0.5, "mu": 3.0, "sigma": 0.5},
            {"weight": 0.2, "mu": 3.4, "sigma": 1.3}
        ]
    }"#;

    #[test]
    fn parses_and_round_trips_every_kind() {
        let docs = [
            FIG1.to_string(),
            r#"{"schema_version":1,"kind":"mixture","family":"bivariate_normal","atoms":[
                {"weight":0.7,"mean":[-1,1],"cov":[[1,0.7],[0.7,1]]},
                {"weight":0.3,"mean":[2.5,0.5],"cov":[[1,-0.7],[-0.7,1]]}]}"#
                .to_string(),
            r#"{"schema_version":1,"kind":"mixture","family":"poisson","atoms":[
                {"weight":0.7,"lambda":4},{"weight":0.3,"lambda":6}]}"#
                .to_string(),
            r#"{"schema_version":1,"kind":"hmm","family":"normal","initial":[1,0],
                "transition":[[0.9,0.1],[0.2,0.8]],"emissions":[{"mu":0,"sigma":1},{"mu":3,"sigma":1}]}"#
                .to_string(),
            r#"{"schema_version":1,"kind":"prior","dirichlet":[1,1],"mean_loc":0,"mean_scale":5,
                "ig_shape":2,"ig_scale":1}"#
                .to_string(),
            r#"{"schema_version":1,"kind":"beta_binomial","trials":10,"alpha":6,"beta":14}"#.to_string(),
            r#"{"schema_version":1,"kind":"negative_binomial","alpha":3,"beta":2}"#.to_string(),
            r#"{"schema_version":1,"kind":"dirichlet_multinomial","trials":5,"concentration":[1,2,3]}"#.to_string(),
        ];
        for text in docs {
            let d = parse(&text).unwrap();
            let again = parse(&d.to_json().to_string()).unwrap();
            assert_eq!(d, again);
        }
    }

    #[test]
    fn rejects_unknown_fields_with_a_location() {
        let text = FIG1.replace("\"sigma\": 0.5", "\"sigma\": 0.5, \"tau\": 1");
        let e = parse(&text).unwrap_err();
        assert!(e.0.contains("line 7") && e.0.contains("tau"), "{e}");
        let e = parse(r#"{"schema_version":1,"kind":"mixture","family":"normal","atoms":[],"x":1}"#).unwrap_err();
        assert!(e.0.contains("unknown field `x`"), "{e}");
    }

    #[test]
    fn rejects_bad_values_with_a_field_path() {
        let e = parse(&FIG1.replace("\"sigma\": 1.3", "\"sigma\": -1.3")).unwrap_err();
        assert!(e.0.starts_with("atoms[2]"), "{e}");
        let e = parse(&FIG1.replace("\"mu\": 3.0, ", "")).unwrap_err();
        assert!(e.0.contains("atoms[1]: missing field `mu`"), "{e}");
        let e = parse(&FIG1.replace("0.2", "0.25")).unwrap_err();
        assert!(e.0.starts_with("atoms:"), "{e}");
        let e = parse(&FIG1.replace("\"mu\": 2.0", "\"lambda\": 2.0")).unwrap_err();
        assert!(e.0.contains("atoms[0].lambda"), "{e}");
        assert!(parse(&FIG1.replace("\"schema_version\": 1", "\"schema_version\": 2")).is_err());
        assert!(parse(&FIG1.replace("\"mixture\"", "\"mixtures\"")).is_err());
        assert!(parse("{\"kind\": \"mixture\"}").is_err());
        assert!(parse("[1, 2").is_err());
    }
}
