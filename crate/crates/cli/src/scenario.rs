//! Scenario files: JSON, complex numbers as `[re, im]`, operators either as
//! explicit row lists or built from named pieces.

use std::fmt;

use nalgebra::DMatrix;
use qsme_core::linalg::{
    c, check_density, diagonal, ensure_hermitian, identity, lowering_operator, number_operator, outer, pauli_x,
    pauli_y, pauli_z, zeros, Ket, Operator, C64, DEFAULT_POS_TOL,
};
use qsme_core::master::PositivityPolicy;
use qsme_core::meanfield::{InteractionMap, MeanFieldMode};
use qsme_core::Picture;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// JSON pointer into the scenario document.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "/" } else { &self.path };
        write!(f, "{path}: {}", self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    PureLinear,
    PureNonlinear,
    SmeLinear,
    SmeNonlinear,
    Ensemble,
    MeanField,
}

impl Engine {
    pub const NAMES: [&'static str; 6] =
        ["pure_linear", "pure_nonlinear", "sme_linear", "sme_nonlinear", "ensemble", "meanfield"];

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pure_linear" => Engine::PureLinear,
            "pure_nonlinear" => Engine::PureNonlinear,
            "sme_linear" => Engine::SmeLinear,
            "sme_nonlinear" => Engine::SmeNonlinear,
            "ensemble" => Engine::Ensemble,
            "meanfield" => Engine::MeanField,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        Engine::NAMES[self as usize]
    }
}

#[derive(Debug, Clone)]
pub struct Output {
    pub name: String,
    pub observable: Operator,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct MeanFieldBlock {
    pub interaction: InteractionMap,
    pub picard_max_iter: usize,
    pub picard_tol: f64,
    pub mode: MeanFieldMode,
    pub conjugate: bool,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    pub hamiltonian: Operator,
    pub couplings: Vec<Operator>,
    pub rho0: Operator,
    pub horizon: f64,
    pub dt: f64,
    pub trajectories: usize,
    pub seed: u64,
    pub engine: Engine,
    pub picture: Picture,
    pub positivity: PositivityPolicy,
    pub rank_tol: f64,
    pub per_trajectory: bool,
    pub meanfield: Option<MeanFieldBlock>,
    pub outputs: Vec<Output>,
    /// The document after overrides; hashed for provenance.
    pub document: Value,
}

impl Scenario {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn config_hash(&self) -> String {
        hash_value(&self.document)
    }
}

/// SHA-256 of the compact rendering; object keys are sorted, so equal
/// documents hash equally regardless of key order in the file.
pub fn hash_value(v: &Value) -> String {
    Sha256::digest(v.to_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Applies `key=value` overrides. Keys are dotted paths into the document
/// (`dt`, `meanfield.picard_tol`, `outputs.0.stride`); values are parsed as
/// JSON and fall back to a plain string.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<(), ConfigError> {
    for item in overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| ConfigError {
            path: String::new(),
            message: format!("override '{item}' is not of the form key=value"),
        })?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let pointer = format!("/{}", key.replace('.', "/"));
        let mut target = &mut *doc;
        for part in key.split('.') {
            target = match target {
                Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
                Value::Array(items) => {
                    let idx: usize = part.parse().map_err(|_| ConfigError {
                        path: pointer.clone(),
                        message: format!("'{part}' is not an array index"),
                    })?;
                    items.get_mut(idx).ok_or_else(|| ConfigError {
                        path: pointer.clone(),
                        message: format!("index {idx} out of range"),
                    })?
                }
                Value::Null => {
                    *target = Value::Object(Default::default());
                    target.as_object_mut().unwrap().entry(part.to_string()).or_insert(Value::Null)
                }
                _ => {
                    return Err(ConfigError { path: pointer.clone(), message: "cannot descend into a scalar".into() })
                }
            };
        }
        *target = value;
    }
    Ok(())
}

struct Ctx {
    errors: Vec<ConfigError>,
}

impl Ctx {
    fn err(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(ConfigError { path: path.into(), message: message.into() });
    }
}

fn join(path: &str, key: &str) -> String {
    format!("{path}/{}", key.replace('~', "~0").replace('/', "~1"))
}

fn complex(v: &Value) -> Option<C64> {
    match v {
        Value::Number(n) => n.as_f64().map(C64::from),
        Value::Array(p) if p.len() == 2 => Some(c(p[0].as_f64()?, p[1].as_f64()?)),
        _ => None,
    }
}

/// Operator from a spec; `dim` is the scenario dimension.
pub fn build_operator(spec: &Value, dim: usize, path: &str) -> Result<Operator, ConfigError> {
    let fail = |m: String| ConfigError { path: path.into(), message: m };
    match spec {
        Value::String(s) => parse_expression(s.trim(), dim).map_err(fail),
        Value::Array(rows) => {
            if rows.len() != dim {
                return Err(fail(format!("expected {dim} rows, got {}", rows.len())));
            }
            let mut m = zeros(dim);
            for (i, row) in rows.iter().enumerate() {
                let row = row.as_array().filter(|r| r.len() == dim).ok_or_else(|| ConfigError {
                    path: format!("{path}/{i}"),
                    message: format!("expected a row of {dim} entries"),
                })?;
                for (j, x) in row.iter().enumerate() {
                    m[(i, j)] = complex(x).ok_or_else(|| ConfigError {
                        path: format!("{path}/{i}/{j}"),
                        message: "expected a number or [re, im]".into(),
                    })?;
                }
            }
            Ok(m)
        }
        Value::Object(map) if map.len() == 1 => {
            let (key, arg) = map.iter().next().unwrap();
            let sub = join(path, key);
            match key.as_str() {
                "scaled" => {
                    let parts = arg.as_array().filter(|a| a.len() == 2).ok_or_else(|| ConfigError {
                        path: sub.clone(),
                        message: "expected [operator, factor]".into(),
                    })?;
                    let op = build_operator(&parts[0], dim, &format!("{sub}/0"))?;
                    let f = complex(&parts[1]).ok_or_else(|| ConfigError {
                        path: format!("{sub}/1"),
                        message: "expected a number or [re, im]".into(),
                    })?;
                    Ok(op * f)
                }
                "sum" => {
                    let terms = arg.as_array().filter(|a| !a.is_empty()).ok_or_else(|| ConfigError {
                        path: sub.clone(),
                        message: "expected a nonempty list of operators".into(),
                    })?;
                    let mut acc = zeros(dim);
                    for (i, t) in terms.iter().enumerate() {
                        acc += build_operator(t, dim, &format!("{sub}/{i}"))?;
                    }
                    Ok(acc)
                }
                "diag" => {
                    let d = real_list(arg, &sub)?;
                    if d.len() != dim {
                        return Err(ConfigError { path: sub, message: format!("expected {dim} entries") });
                    }
                    Ok(diagonal(&d))
                }
                "adjoint" => Ok(build_operator(arg, dim, &sub)?.adjoint()),
                other => Err(ConfigError { path: sub, message: format!("unknown operator builder '{other}'") }),
            }
        }
        _ => Err(fail("expected an operator name, expression, row list or builder object".into())),
    }
}

fn real_list(v: &Value, path: &str) -> Result<Vec<f64>, ConfigError> {
    v.as_array()
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
        .ok_or_else(|| ConfigError { path: path.into(), message: "expected a list of numbers".into() })
}

fn named(name: &str, dim: usize) -> Result<Operator, String> {
    let pauli = |m: Operator| if dim == 2 { Ok(m) } else { Err(format!("{name} needs dim 2, scenario has {dim}")) };
    match name {
        "pauli_x" => pauli(pauli_x()),
        "pauli_y" => pauli(pauli_y()),
        "pauli_z" => pauli(pauli_z()),
        "number" => Ok(number_operator(dim)),
        "lowering" => Ok(lowering_operator(dim)),
        "raising" => Ok(lowering_operator(dim).adjoint()),
        "identity" => Ok(identity(dim)),
        "zero" => Ok(zeros(dim)),
        other => Err(format!("unknown operator '{other}'")),
    }
}

/// `name | scaled(expr, number) | sum(expr, …)`.
fn parse_expression(s: &str, dim: usize) -> Result<Operator, String> {
    let Some(open) = s.find('(') else {
        return named(s, dim);
    };
    if !s.ends_with(')') {
        return Err(format!("unbalanced parentheses in '{s}'"));
    }
    let head = s[..open].trim();
    let args = split_args(&s[open + 1..s.len() - 1])?;
    match head {
        "scaled" => {
            if args.len() != 2 {
                return Err("scaled(op, c) takes two arguments".into());
            }
            let f: f64 = args[1].trim().parse().map_err(|_| format!("bad factor '{}'", args[1].trim()))?;
            Ok(parse_expression(args[0].trim(), dim)? * C64::from(f))
        }
        "sum" => {
            let mut acc = zeros(dim);
            for a in args {
                acc += parse_expression(a.trim(), dim)?;
            }
            Ok(acc)
        }
        other => Err(format!("unknown builder '{other}'")),
    }
}

fn split_args(s: &str) -> Result<Vec<&str>, String> {
    let mut depth = 0i32;
    let mut start = 0;
    let mut out = Vec::new();
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err("unbalanced parentheses".into());
        }
    }
    if depth != 0 {
        return Err("unbalanced parentheses".into());
    }
    out.push(&s[start..]);
    Ok(out)
}

fn build_ket(spec: &Value, dim: usize, path: &str) -> Result<Ket, ConfigError> {
    let v = match spec {
        Value::Object(m) if m.contains_key("basis") => {
            let k = m["basis"].as_u64().map(|k| k as usize).filter(|k| *k < dim).ok_or_else(|| ConfigError {
                path: join(path, "basis"),
                message: format!("expected a basis index below {dim}"),
            })?;
            qsme_core::linalg::basis_ket(dim, k)
        }
        Value::Array(xs) if xs.len() == dim => {
            let mut v = Ket::zeros(dim);
            for (i, x) in xs.iter().enumerate() {
                v[i] = complex(x).ok_or_else(|| ConfigError {
                    path: format!("{path}/{i}"),
                    message: "expected a number or [re, im]".into(),
                })?;
            }
            v
        }
        _ => {
            return Err(ConfigError {
                path: path.into(),
                message: format!("expected {dim} amplitudes or {{\"basis\": k}}"),
            })
        }
    };
    let n = v.norm();
    if n == 0.0 {
        return Err(ConfigError { path: path.into(), message: "pure state vector is zero".into() });
    }
    Ok(v.unscale(n))
}

fn build_rho0(spec: &Value, dim: usize, path: &str) -> Result<Operator, ConfigError> {
    let rho = match spec.as_object() {
        Some(m) if m.len() == 1 && m.contains_key("pure") => outer(&build_ket(&m["pure"], dim, &join(path, "pure"))?),
        _ => build_operator(spec, dim, path)?,
    };
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(ConfigError { path: path.into(), message: format!("rho0 trace != 1 (got {:.12})", tr.re) });
    }
    if ensure_hermitian(&rho).is_err() {
        return Err(ConfigError { path: path.into(), message: "rho0 not Hermitian".into() });
    }
    check_density(&rho, DEFAULT_POS_TOL)
        .map_err(|e| ConfigError { path: path.into(), message: format!("rho0 is not a density operator: {e}") })?;
    Ok(rho)
}

fn build_interaction(spec: &Value, dim: usize, path: &str) -> Result<InteractionMap, ConfigError> {
    let kind = spec.get("kind").and_then(Value::as_str).unwrap_or("zero");
    let wrap = |r: qsme_core::Result<InteractionMap>, key: &str| {
        r.map_err(|e| ConfigError { path: join(path, key), message: e.to_string() })
    };
    match kind {
        "zero" => Ok(InteractionMap::Zero),
        "potential" => {
            let p = join(path, "table");
            let rows = spec.get("table").and_then(Value::as_array).ok_or_else(|| ConfigError {
                path: p.clone(),
                message: "expected a d×d real table".into(),
            })?;
            let mut t = DMatrix::<f64>::zeros(dim, dim);
            if rows.len() != dim {
                return Err(ConfigError { path: p, message: format!("expected {dim} rows") });
            }
            for (i, r) in rows.iter().enumerate() {
                let r = real_list(r, &format!("{p}/{i}"))?;
                if r.len() != dim {
                    return Err(ConfigError { path: format!("{p}/{i}"), message: format!("expected {dim} entries") });
                }
                for (j, x) in r.into_iter().enumerate() {
                    t[(i, j)] = x;
                }
            }
            wrap(InteractionMap::potential(t), "table")
        }
        "hs_kernel" => {
            let k = spec.get("kernel").ok_or_else(|| ConfigError {
                path: join(path, "kernel"),
                message: "missing d²×d² kernel".into(),
            })?;
            let kernel = build_operator(k, dim * dim, &join(path, "kernel"))?;
            wrap(InteractionMap::hs_kernel(kernel), "kernel")
        }
        other => Err(ConfigError { path: join(path, "kind"), message: format!("unknown interaction kind '{other}'") }),
    }
}

fn observable_name(spec: &Value, fallback: usize) -> String {
    match spec {
        Value::String(s) => {
            let clean: String =
                s.chars().map(|ch| if ch.is_ascii_alphanumeric() || ch == '_' { ch } else { '_' }).collect();
            format!("ev_{}", clean.trim_matches('_'))
        }
        _ => format!("ev_{fallback}"),
    }
}

const KNOWN_KEYS: [&str; 18] = [
    "name",
    "dim",
    "H",
    "Ls",
    "rho0",
    "n",
    "T",
    "dt",
    "trajectories",
    "seed",
    "engine",
    "picture",
    "positivity",
    "rank_tol",
    "per_trajectory",
    "meanfield",
    "outputs",
    "description",
];

/// Full schema validation; every problem is reported, not just the first.
pub fn parse_scenario(doc: Value) -> Result<Scenario, Vec<ConfigError>> {
    let mut cx = Ctx { errors: Vec::new() };
    let Some(obj) = doc.as_object() else {
        return Err(vec![ConfigError { path: String::new(), message: "scenario must be a JSON object".into() }]);
    };
    for key in obj.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            cx.err(&join("", key), format!("unknown key '{key}'"));
        }
    }
    let name = obj.get("name").and_then(Value::as_str).unwrap_or("scenario").to_string();
    if name.is_empty() || name.contains(['/', '\\']) {
        cx.err("/name", "name must be nonempty and contain no path separators");
    }
    let dim = match obj.get("dim").and_then(Value::as_u64) {
        Some(d) if (1..=64).contains(&d) => d as usize,
        _ => {
            cx.err("/dim", "dim must be an integer in 1..=64");
            return Err(cx.errors);
        }
    };
    let positive = |cx: &mut Ctx, key: &str| -> f64 {
        match obj.get(key).and_then(Value::as_f64) {
            Some(x) if x > 0.0 && x.is_finite() => x,
            _ => {
                cx.err(&join("", key), format!("{key} must be a positive number"));
                f64::NAN
            }
        }
    };
    let horizon = positive(&mut cx, "T");
    let dt = positive(&mut cx, "dt");
    if horizon.is_finite() && dt.is_finite() && (horizon / dt - (horizon / dt).round()).abs() > 1e-6 {
        cx.err("/dt", "T must be an integer multiple of dt");
    }
    let trajectories = match obj.get("trajectories").and_then(Value::as_u64) {
        Some(m) if m >= 1 => m as usize,
        _ => {
            cx.err("/trajectories", "trajectories must be a positive integer");
            0
        }
    };
    let seed = match obj.get("seed") {
        None => 0,
        Some(v) => v.as_u64().unwrap_or_else(|| {
            cx.err("/seed", "seed must be a nonnegative integer");
            0
        }),
    };
    let engine = match obj.get("engine").and_then(Value::as_str).and_then(Engine::parse) {
        Some(e) => e,
        None => {
            cx.err("/engine", format!("engine must be one of {}", Engine::NAMES.join(", ")));
            Engine::SmeNonlinear
        }
    };

    let hamiltonian = match obj.get("H") {
        None => zeros(dim),
        Some(spec) => match build_operator(spec, dim, "/H") {
            Ok(h) => {
                if ensure_hermitian(&h).is_err() {
                    cx.err("/H", "H not Hermitian");
                }
                h
            }
            Err(e) => {
                cx.errors.push(e);
                zeros(dim)
            }
        },
    };
    let mut couplings = Vec::new();
    match obj.get("Ls").and_then(Value::as_array) {
        Some(ls) if !ls.is_empty() => {
            for (j, spec) in ls.iter().enumerate() {
                match build_operator(spec, dim, &format!("/Ls/{j}")) {
                    Ok(l) => couplings.push(l),
                    Err(e) => cx.errors.push(e),
                }
            }
        }
        _ => cx.err("/Ls", "Ls must be a nonempty list of operators"),
    }
    if let Some(n) = obj.get("n") {
        if n.as_u64() != Some(couplings.len() as u64) {
            cx.err("/n", format!("n must equal the number of Ls ({})", couplings.len()));
        }
    }
    let rho0 = match obj.get("rho0") {
        None => {
            cx.err("/rho0", "rho0 is required");
            identity(dim) / C64::from(dim as f64)
        }
        Some(Value::Object(m)) if m.len() == 1 && m.contains_key("diag") => {
            match real_list(&m["diag"], "/rho0/diag") {
                Ok(w) if w.len() == dim => {
                    let rho = diagonal(&w);
                    let tr: f64 = w.iter().sum();
                    if (tr - 1.0).abs() > 1e-10 {
                        cx.err("/rho0", format!("rho0 trace != 1 (got {tr:.12})"));
                    } else if w.iter().any(|x| *x < 0.0) {
                        cx.err("/rho0/diag", "rho0 weights must be nonnegative");
                    }
                    rho
                }
                Ok(_) => {
                    cx.err("/rho0/diag", format!("expected {dim} weights"));
                    zeros(dim)
                }
                Err(e) => {
                    cx.errors.push(e);
                    zeros(dim)
                }
            }
        }
        Some(spec) => build_rho0(spec, dim, "/rho0").unwrap_or_else(|e| {
            cx.errors.push(e);
            zeros(dim)
        }),
    };
    let picture = match obj.get("picture").and_then(Value::as_str).unwrap_or("auto") {
        "auto" => Picture::auto(&hamiltonian, if dt.is_finite() { dt } else { 0.0 }),
        "schroedinger" => Picture::Schroedinger,
        "interaction" => Picture::Interaction,
        _ => {
            cx.err("/picture", "picture must be auto, schroedinger or interaction");
            Picture::Schroedinger
        }
    };
    let positivity = match obj.get("positivity").and_then(Value::as_str).unwrap_or("monitor") {
        "monitor" => PositivityPolicy::Monitor,
        "ignore" => PositivityPolicy::Ignore,
        "project" => PositivityPolicy::Project,
        _ => {
            cx.err("/positivity", "positivity must be monitor, ignore or project");
            PositivityPolicy::Monitor
        }
    };
    let rank_tol = match obj.get("rank_tol") {
        None => qsme_core::ensemble::DEFAULT_RANK_TOL,
        Some(v) => match v.as_f64() {
            Some(x) if x >= 0.0 => x,
            _ => {
                cx.err("/rank_tol", "rank_tol must be a nonnegative number");
                0.0
            }
        },
    };
    let per_trajectory = match obj.get("per_trajectory") {
        None => true,
        Some(v) => v.as_bool().unwrap_or_else(|| {
            cx.err("/per_trajectory", "per_trajectory must be a boolean");
            true
        }),
    };

    let meanfield = match (engine, obj.get("meanfield")) {
        (Engine::MeanField, spec) => {
            let empty = Value::Object(Default::default());
            let spec = spec.unwrap_or(&empty);
            let interaction = build_interaction(spec.get("interaction").unwrap_or(&Value::Null), dim, "/meanfield/interaction")
                .unwrap_or_else(|e| {
                    cx.errors.push(e);
                    InteractionMap::Zero
                });
            let picard_max_iter = spec.get("picard_max_iter").map_or(Some(50), Value::as_u64).filter(|n| *n >= 1);
            if picard_max_iter.is_none() {
                cx.err("/meanfield/picard_max_iter", "picard_max_iter must be a positive integer");
            }
            let picard_tol = spec.get("picard_tol").map_or(Some(1e-8), Value::as_f64).filter(|x| *x > 0.0);
            if picard_tol.is_none() {
                cx.err("/meanfield/picard_tol", "picard_tol must be positive");
            }
            let mode = match spec.get("mode").and_then(Value::as_str).unwrap_or("normalized") {
                "normalized" => MeanFieldMode::Normalized,
                "linear" => MeanFieldMode::Linear,
                _ => {
                    cx.err("/meanfield/mode", "mode must be normalized or linear");
                    MeanFieldMode::Normalized
                }
            };
            let conjugate = spec.get("conjugate").map_or(Some(false), Value::as_bool);
            if conjugate.is_none() {
                cx.err("/meanfield/conjugate", "conjugate must be a boolean");
            }
            Some(MeanFieldBlock {
                interaction,
                picard_max_iter: picard_max_iter.unwrap_or(1) as usize,
                picard_tol: picard_tol.unwrap_or(1.0),
                mode,
                conjugate: conjugate.unwrap_or(false),
            })
        }
        (_, Some(_)) => {
            cx.err("/meanfield", "meanfield block is only valid with engine=meanfield");
            None
        }
        (_, None) => None,
    };

    let mut outputs = Vec::new();
    match obj.get("outputs") {
        None => outputs.push(Output { name: "trace".into(), observable: identity(dim), stride: 1 }),
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let p = format!("/outputs/{i}");
                let Some(spec) = item.get("observable") else {
                    cx.err(&p, "output needs an observable");
                    continue;
                };
                let stride = match item.get("stride") {
                    None => Some(1),
                    Some(v) => v.as_u64().filter(|s| *s >= 1),
                };
                if stride.is_none() {
                    cx.err(&join(&p, "stride"), "stride must be a positive integer");
                }
                let name = item
                    .get("name")
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .unwrap_or_else(|| observable_name(spec, i));
                match build_operator(spec, dim, &join(&p, "observable")) {
                    Ok(o) => outputs.push(Output { name, observable: o, stride: stride.unwrap_or(1) as usize }),
                    Err(e) => cx.errors.push(e),
                }
            }
            if outputs.iter().enumerate().any(|(i, o)| outputs[..i].iter().any(|p| p.name == o.name)) {
                cx.err("/outputs", "output names must be unique");
            }
        }
        Some(_) => cx.err("/outputs", "outputs must be a list"),
    }

    if matches!(engine, Engine::PureLinear | Engine::PureNonlinear) && cx.errors.is_empty() {
        let purity = (&rho0 * &rho0).trace().re;
        if (purity - 1.0).abs() > 1e-9 {
            cx.err("/rho0", "pure-state engines need a rank-one rho0");
        }
    }

    if !cx.errors.is_empty() {
        return Err(cx.errors);
    }
    Ok(Scenario {
        name,
        dim,
        hamiltonian,
        couplings,
        rho0,
        horizon,
        dt,
        trajectories,
        seed,
        engine,
        picture,
        positivity,
        rank_tol,
        per_trajectory,
        meanfield,
        outputs,
        document: doc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "name": "qubit", "dim": 2, "H": "pauli_z", "Ls": ["pauli_z"],
            "rho0": {"diag": [0.5, 0.5]}, "T": 0.1, "dt": 0.01, "trajectories": 4,
            "engine": "sme_nonlinear"
        })
    }

    #[test]
    fn minimal_scenario_is_valid() {
        let s = parse_scenario(minimal()).unwrap();
        assert_eq!(s.steps(), 10);
        assert_eq!(s.outputs[0].name, "trace");
    }

    #[test]
    fn expressions_and_builders() {
        let a = build_operator(&json!("sum(scaled(pauli_x, 0.5), pauli_z)"), 2, "").unwrap();
        let b = build_operator(&json!({"sum": [{"scaled": ["pauli_x", 0.5]}, [[1, 0], [0, -1]]]}), 2, "").unwrap();
        assert_eq!(a, b);
        let y = build_operator(&json!([[0, [0, -1]], [[0, 1], 0]]), 2, "").unwrap();
        assert_eq!(y, pauli_y());
        assert!(build_operator(&json!("pauli_x"), 3, "").is_err());
        assert!(build_operator(&json!("scaled(pauli_x"), 2, "").is_err());
    }

    #[test]
    fn errors_carry_pointers() {
        let mut doc = minimal();
        doc["rho0"] = json!({"diag": [0.5, 0.4]});
        doc["H"] = json!([[0, 1], [0, 0]]);
        doc["Ls"] = json!(["pauli_z", "bogus"]);
        let errs = parse_scenario(doc).unwrap_err();
        let text: Vec<String> = errs.iter().map(ToString::to_string).collect();
        assert!(text.iter().any(|e| e == "/H: H not Hermitian"), "{text:?}");
        assert!(text.iter().any(|e| e.starts_with("/rho0: rho0 trace != 1")), "{text:?}");
        assert!(text.iter().any(|e| e.starts_with("/Ls/1: unknown operator")), "{text:?}");
    }

    #[test]
    fn overrides_edit_nested_paths() {
        let mut doc = minimal();
        apply_overrides(&mut doc, &["dt=0.005".into(), "outputs=[{\"observable\":\"pauli_x\"}]".into()]).unwrap();
        apply_overrides(&mut doc, &["outputs.0.stride=2".into(), "name=other".into()]).unwrap();
        assert_eq!(doc["dt"], json!(0.005));
        assert_eq!(doc["outputs"][0]["stride"], json!(2));
        assert_eq!(doc["name"], json!("other"));
        assert!(apply_overrides(&mut doc, &["novalue".into()]).is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"a":1,"b":2}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"b":2,"a":1}"#).unwrap();
        assert_eq!(hash_value(&a), hash_value(&b));
    }
}
