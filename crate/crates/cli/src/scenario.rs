//! Scenario files and their resolution into a concrete system.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use serde::Deserialize;

use poisfam::catalog;
use poisfam::{AxisSpec, CasimirSet, Expr, IntervalBox, PoissonFamilySpec, PoissonSystem};

/// Invalid scenario input (exit status 2).
#[derive(Debug)]
pub struct SchemaError(pub String);

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid scenario: {}", self.0)
    }
}

impl std::error::Error for SchemaError {}

fn schema<T>(msg: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Verify,
    Reduce,
    Integrate,
    All,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Verify => "verify",
            Action::Reduce => "reduce",
            Action::Integrate => "integrate",
            Action::All => "all",
        }
    }

    pub fn verifies(self) -> bool {
        matches!(self, Action::Verify | Action::All)
    }

    pub fn reduces(self) -> bool {
        matches!(self, Action::Reduce | Action::All)
    }

    pub fn integrates(self) -> bool {
        matches!(self, Action::Integrate | Action::All)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisDef {
    pub phi: Option<String>,
    pub a: Option<f64>,
    pub psi: Option<String>,
}

/// Either a catalog name with parameters or an inline family member.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDef {
    pub catalog: Option<String>,
    pub n: Option<usize>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub c: Option<Vec<f64>>,
    pub k: Option<f64>,
    pub domain: Option<Vec<[f64; 2]>>,
    pub hamiltonian: Option<String>,
    pub name: Option<String>,
    pub eta: Option<String>,
    pub axes: Option<Vec<AxisDef>>,
    /// One-based.
    pub pair: Option<[usize; 2]>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceDef {
    pub x: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateDef {
    pub x0: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub action: Option<Action>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemDef,
    #[serde(default)]
    pub reduce: ReduceDef,
    #[serde(default)]
    pub integrate: IntegrateDef,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SchemaError(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| SchemaError(format!("{}: {e}", path.display())))
    }
}

pub const DEFAULT_POINTS: usize = 1000;
pub const DEFAULT_T_END: f64 = 1.0;

/// A scenario with every default filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub action: Action,
    pub points: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub system: SystemDef,
    pub x: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Resolved {
    pub fn new(s: Scenario) -> Result<Self, SchemaError> {
        let action = match s.action {
            Some(a) => a,
            None => return schema("no action given (verify, reduce, integrate or all)"),
        };
        let points = s.points.unwrap_or(DEFAULT_POINTS);
        if points == 0 {
            return schema("points must be positive");
        }
        let t_end = s.integrate.t_end.unwrap_or(DEFAULT_T_END);
        let rtol = s.integrate.rtol.unwrap_or(1e-9);
        let atol = s.integrate.atol.unwrap_or(1e-12);
        if !(rtol > 0.0 && atol > 0.0) {
            return schema("tolerances must be positive");
        }
        Ok(Resolved {
            action,
            points,
            seed: s.seed.unwrap_or(0),
            out: s.out.unwrap_or_else(|| PathBuf::from(".")),
            system: s.system,
            x: s.reduce.x,
            x0: s.integrate.x0,
            t_end,
            rtol,
            atol,
        })
    }
}

/// A resolved system ready for the runner.
pub struct Built {
    pub name: String,
    pub spec: Arc<PoissonFamilySpec>,
    pub system: Option<PoissonSystem>,
    /// Casimir sets to verify; circle maps carries all three forms.
    pub casimir_sets: Vec<CasimirSet>,
    pub hamiltonian: Option<String>,
}

fn parse_expr(text: &str, what: &str) -> Result<Expr, SchemaError> {
    text.parse().map_err(|e| SchemaError(format!("{what}: {e}")))
}

fn domain(def: &SystemDef, n: Option<usize>) -> Result<Option<IntervalBox>, SchemaError> {
    let Some(d) = &def.domain else { return Ok(None) };
    if let Some(n) = n {
        if d.len() != n {
            return schema(format!("domain has {} axes, expected {n}", d.len()));
        }
    }
    let pairs: Vec<(f64, f64)> = d.iter().map(|[lo, hi]| (*lo, *hi)).collect();
    IntervalBox::from_bounds(&pairs)
        .map(Some)
        .map_err(|e| SchemaError(e.to_string()))
}

fn exact_len(v: &[f64], n: usize, what: &str) -> Result<(), SchemaError> {
    if v.len() == n {
        Ok(())
    } else {
        schema(format!("{what} has {} entries, expected {n}", v.len()))
    }
}

fn reject(name: &str, fields: &[(&str, bool)]) -> Result<(), SchemaError> {
    for (field, present) in fields {
        if *present {
            return schema(format!("parameter `{field}` does not apply to {name}"));
        }
    }
    Ok(())
}

fn with_hamiltonian(sys: PoissonSystem, h: &Option<String>) -> Result<(PoissonSystem, String), SchemaError> {
    match h {
        Some(text) => {
            let e = parse_expr(text, "hamiltonian")?;
            let sys = PoissonSystem::new(sys.spec().clone(), e).map_err(|e| SchemaError(e.to_string()))?;
            Ok((sys, text.clone()))
        }
        None => {
            let text = sys.hamiltonian().to_string();
            Ok((sys, text))
        }
    }
}

fn finish(name: String, sys: PoissonSystem, h: &Option<String>) -> Result<Built, SchemaError> {
    let (sys, text) = with_hamiltonian(sys, h)?;
    Ok(Built {
        name,
        spec: sys.spec().clone(),
        casimir_sets: vec![sys.casimirs().clone()],
        system: Some(sys),
        hamiltonian: Some(text),
    })
}

fn construction(e: poisfam::Error) -> SchemaError {
    SchemaError(e.to_string())
}

pub fn build(def: &SystemDef) -> Result<Built, SchemaError> {
    let inline = def.eta.is_some() || def.axes.is_some() || def.pair.is_some();
    match (def.catalog.as_deref(), inline) {
        (Some(_), true) => schema("give either a catalog name or an inline spec, not both"),
        (None, true) => build_inline(def),
        (None, false) => schema(format!("no system given; catalog names: {}", catalog::NAMES.join(", "))),
        (Some(name), false) => build_catalog(name, def),
    }
}

fn build_catalog(name: &str, def: &SystemDef) -> Result<Built, SchemaError> {
    match name {
        "lv3" => {
            reject(
                name,
                &[
                    ("a", def.a.is_some()),
                    ("b", def.b.is_some()),
                    ("c", def.c.is_some()),
                    ("n", def.n.is_some()),
                ],
            )?;
            let sys = catalog::make_lv3(def.k.unwrap_or(catalog::DEFAULT_LV3_K), domain(def, Some(3))?)
                .map_err(construction)?;
            finish(name.into(), sys, &def.hamiltonian)
        }
        "qp-lv3" => {
            reject(
                name,
                &[("a", def.a.is_some()), ("b", def.b.is_some()), ("n", def.n.is_some())],
            )?;
            let c = def.c.clone().unwrap_or_else(|| vec![1.0; 3]);
            exact_len(&c, 3, "c")?;
            let sys = catalog::make_qp_lv(
                [c[0], c[1], c[2]],
                def.k.unwrap_or(catalog::DEFAULT_LV3_K),
                domain(def, Some(3))?,
            )
            .map_err(construction)?;
            finish(name.into(), sys, &def.hamiltonian)
        }
        "nlv" => {
            reject(name, &[("c", def.c.is_some()), ("k", def.k.is_some())])?;
            let n = def
                .n
                .or(def.a.as_ref().map(Vec::len))
                .or(def.b.as_ref().map(Vec::len))
                .unwrap_or(3);
            let a = def.a.clone().unwrap_or_else(|| vec![1.0; n]);
            let b = def.b.clone().unwrap_or_else(|| vec![1.0; n]);
            exact_len(&a, n, "a")?;
            exact_len(&b, n, "b")?;
            let sys = catalog::make_nlv(&a, &b, domain(def, Some(n))?).map_err(construction)?;
            finish(name.into(), sys, &def.hamiltonian)
        }
        "circle-maps" => {
            reject(
                name,
                &[
                    ("a", def.a.is_some()),
                    ("b", def.b.is_some()),
                    ("c", def.c.is_some()),
                    ("k", def.k.is_some()),
                    ("n", def.n.is_some()),
                ],
            )?;
            let spec = Arc::new(catalog::make_circle_maps(domain(def, Some(3))?).map_err(construction)?);
            let casimir_sets = catalog::circle_maps_casimirs(spec.clone())
                .map_err(construction)?
                .to_vec();
            let system = match &def.hamiltonian {
                Some(text) => {
                    Some(PoissonSystem::new(spec.clone(), parse_expr(text, "hamiltonian")?).map_err(construction)?)
                }
                None => None,
            };
            Ok(Built {
                name: name.into(),
                spec,
                system,
                casimir_sets,
                hamiltonian: def.hamiltonian.clone(),
            })
        }
        other => schema(format!(
            "unknown catalog system `{other}`; expected one of {}",
            catalog::NAMES.join(", ")
        )),
    }
}

fn build_inline(def: &SystemDef) -> Result<Built, SchemaError> {
    reject(
        "an inline spec",
        &[
            ("a", def.a.is_some()),
            ("b", def.b.is_some()),
            ("c", def.c.is_some()),
            ("k", def.k.is_some()),
        ],
    )?;
    let eta = parse_expr(def.eta.as_deref().unwrap_or("1"), "eta")?;
    let Some(axes_def) = &def.axes else {
        return schema("inline spec needs `axes`");
    };
    let n = axes_def.len();
    if def.n.is_some_and(|m| m != n) {
        return schema(format!("n = {} but {n} axes given", def.n.unwrap_or_default()));
    }
    let mut axes = Vec::with_capacity(n);
    for (k, ax) in axes_def.iter().enumerate() {
        let spec = match (&ax.phi, &ax.psi) {
            (Some(phi), None) => AxisSpec::phi(parse_expr(phi, &format!("phi{}", k + 1))?, ax.a.unwrap_or(1.0)),
            (None, Some(psi)) if ax.a.is_none() => AxisSpec::psi(parse_expr(psi, &format!("psi{}", k + 1))?),
            _ => {
                return schema(format!(
                    "axis {} needs exactly one of `phi` (with optional `a`) or `psi`",
                    k + 1
                ))
            }
        };
        axes.push(spec);
    }
    let Some(dom) = domain(def, Some(n))? else {
        return schema("inline spec needs `domain`");
    };
    let [i, j] = def.pair.unwrap_or([1, 2]);
    if i == 0 || j == 0 {
        return schema("pair indices are one-based");
    }
    let spec = PoissonFamilySpec::builder(eta, axes, dom)
        .pair(i - 1, j - 1)
        .build()
        .map_err(construction)?;
    let spec = Arc::new(spec);
    let name = def.name.clone().unwrap_or_else(|| "inline".into());
    match &def.hamiltonian {
        Some(text) => {
            let sys = PoissonSystem::new(spec, parse_expr(text, "hamiltonian")?).map_err(construction)?;
            finish(name, sys, &None)
        }
        None => Ok(Built {
            name,
            casimir_sets: vec![CasimirSet::new(spec.clone())],
            spec,
            system: None,
            hamiltonian: None,
        }),
    }
}
