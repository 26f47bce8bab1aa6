//! Flat `key = value` scenario files.
//!
//! ```text
//! preset = linear_meanfield      # optional base scenario
//! particles = 2000
//! generator = affine
//! generator.a_mu = 1
//! losses.upper = 5
//! ```
//!
//! Blank lines and `#` comments are ignored. Every key may appear once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use meanrefl_core::catalog::{preset, GeneratorKind, Levels, LossKind, ScenarioSpec, TerminalKind, PRESET_NAMES};
use meanrefl_core::mfbsde::DEFAULT_BASIS_DEGREE;
use meanrefl_core::reflected::{DEFAULT_MAX_PICARD_ITERS, DEFAULT_PICARD_TOL};
use meanrefl_core::skorokhod::DEFAULT_ROOT_TOL;

use crate::error::{CliError, Result};

type Params = BTreeMap<String, f64>;

fn generator_parts(g: &GeneratorKind) -> (&'static str, Params) {
    let p = |kv: &[(&str, f64)]| kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    match *g {
        GeneratorKind::Zero => ("zero", Params::new()),
        GeneratorKind::Constant { value } => ("constant", p(&[("value", value)])),
        GeneratorKind::Affine { c0, a_y, a_mu, a_z, a_nu } => {
            ("affine", p(&[("c0", c0), ("a_y", a_y), ("a_mu", a_mu), ("a_z", a_z), ("a_nu", a_nu)]))
        }
        GeneratorKind::MaoLog { kappa, eta } => ("mao_log", p(&[("kappa", kappa), ("eta", eta)])),
    }
}

fn generator_from(kind: &str, p: &Params) -> Option<GeneratorKind> {
    let g = |k: &str, d: f64| p.get(k).copied().unwrap_or(d);
    Some(match kind {
        "zero" => GeneratorKind::Zero,
        "constant" => GeneratorKind::Constant { value: g("value", 0.0) },
        "affine" => GeneratorKind::Affine {
            c0: g("c0", 0.0),
            a_y: g("a_y", 0.0),
            a_mu: g("a_mu", 0.0),
            a_z: g("a_z", 0.0),
            a_nu: g("a_nu", 0.0),
        },
        "mao_log" => GeneratorKind::MaoLog { kappa: g("kappa", 0.5), eta: g("eta", 0.1) },
        _ => return None,
    })
}

fn terminal_parts(t: &TerminalKind) -> (&'static str, Params) {
    let p = |kv: &[(&str, f64)]| kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    match *t {
        TerminalKind::BrownianAffine { shift, scale } => ("brownian_affine", p(&[("shift", shift), ("scale", scale)])),
        TerminalKind::BrownianSquare { scale } => ("brownian_square", p(&[("scale", scale)])),
        TerminalKind::Sine { amp, freq } => ("sine", p(&[("amp", amp), ("freq", freq)])),
    }
}

fn terminal_from(kind: &str, p: &Params) -> Option<TerminalKind> {
    let g = |k: &str, d: f64| p.get(k).copied().unwrap_or(d);
    Some(match kind {
        "brownian_affine" => TerminalKind::BrownianAffine { shift: g("shift", 0.0), scale: g("scale", 1.0) },
        "brownian_square" => TerminalKind::BrownianSquare { scale: g("scale", 1.0) },
        "sine" => TerminalKind::Sine { amp: g("amp", 1.0), freq: g("freq", 1.0) },
        _ => return None,
    })
}

fn level_params(lv: &Levels, extra: (&str, f64)) -> Params {
    [
        (extra.0, extra.1),
        ("upper", lv.upper),
        ("upper_drift", lv.upper_drift),
        ("lower", lv.lower),
        ("lower_drift", lv.lower_drift),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), *v))
    .collect()
}

fn loss_parts(l: &LossKind) -> (&'static str, Params) {
    match l {
        LossKind::Affine { slope, levels } => ("affine", level_params(levels, ("slope", *slope))),
        LossKind::Arctan { amp, levels } => ("arctan", level_params(levels, ("amp", *amp))),
    }
}

fn loss_from(kind: &str, p: &Params) -> Option<LossKind> {
    let g = |k: &str, d: f64| p.get(k).copied().unwrap_or(d);
    let levels = Levels {
        upper: g("upper", 1.0),
        upper_drift: g("upper_drift", 0.0),
        lower: g("lower", -1.0),
        lower_drift: g("lower_drift", 0.0),
    };
    Some(match kind {
        "affine" => LossKind::Affine { slope: g("slope", 1.0), levels },
        "arctan" => LossKind::Arctan { amp: g("amp", 0.2), levels },
        _ => return None,
    })
}

fn allowed_params(section: &str, kind: &str) -> &'static [&'static str] {
    match (section, kind) {
        ("generator", "zero") => &[],
        ("generator", "constant") => &["value"],
        ("generator", "affine") => &["c0", "a_y", "a_mu", "a_z", "a_nu"],
        ("generator", "mao_log") => &["kappa", "eta"],
        ("terminal", "brownian_affine") => &["shift", "scale"],
        ("terminal", "brownian_square") => &["scale"],
        ("terminal", "sine") => &["amp", "freq"],
        ("losses", "affine") => &["slope", "upper", "upper_drift", "lower", "lower_drift"],
        ("losses", "arctan") => &["amp", "upper", "upper_drift", "lower", "lower_drift"],
        _ => &[],
    }
}

struct Entry {
    value: String,
    line: usize,
}

fn parse_num<T: std::str::FromStr>(src: &str, key: &str, e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| CliError::parse(src, e.line, format!("{key}: cannot parse '{}'", e.value)))
}

/// Parse a scenario file's contents; `source_name` labels errors.
pub fn parse_config(text: &str, source_name: &str) -> Result<ScenarioSpec> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| CliError::parse(source_name, line, format!("expected 'key = value', got '{body}'")))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() || v.is_empty() {
            return Err(CliError::parse(source_name, line, "empty key or value"));
        }
        if entries.contains_key(&k) {
            return Err(CliError::parse(source_name, line, format!("duplicate key '{k}'")));
        }
        entries.insert(k, Entry { value: v, line });
    }

    let mut spec = match entries.get("preset") {
        Some(e) => preset(&e.value).ok_or_else(|| {
            CliError::parse(source_name, e.line, format!("unknown preset '{}' (known: {})", e.value, PRESET_NAMES.join(", ")))
        })?,
        None => {
            for key in ["generator", "terminal", "losses"] {
                if !entries.contains_key(key) {
                    return Err(CliError::Config(format!("{source_name}: '{key}' is required without a preset")));
                }
            }
            ScenarioSpec {
                name: "custom".into(),
                horizon: 1.0,
                n_steps: 100,
                dim: 1,
                n_particles: 10_000,
                seed: 0,
                generator: GeneratorKind::Zero,
                terminal: TerminalKind::BrownianAffine { shift: 0.0, scale: 1.0 },
                losses: LossKind::Affine { slope: 1.0, levels: Levels::constant(-1.0, 1.0) },
                picard_tol: DEFAULT_PICARD_TOL,
                max_picard_iters: DEFAULT_MAX_PICARD_ITERS,
                basis_degree: DEFAULT_BASIS_DEGREE,
                root_tol: DEFAULT_ROOT_TOL,
            }
        }
    };

    let mut sections: BTreeMap<&str, (String, Params)> = BTreeMap::new();
    let (gk, gp) = generator_parts(&spec.generator);
    sections.insert("generator", (gk.into(), gp));
    let (tk, tp) = terminal_parts(&spec.terminal);
    sections.insert("terminal", (tk.into(), tp));
    let (lk, lp) = loss_parts(&spec.losses);
    sections.insert("losses", (lk.into(), lp));

    for section in ["generator", "terminal", "losses"] {
        if let Some(e) = entries.get(section) {
            let slot = sections.get_mut(section).unwrap();
            if slot.0 != e.value {
                *slot = (e.value.clone(), Params::new());
            }
        }
    }

    for (key, e) in &entries {
        let src = source_name;
        match key.as_str() {
            "preset" | "generator" | "terminal" | "losses" => {}
            "name" => spec.name = e.value.clone(),
            "horizon" => spec.horizon = parse_num(src, key, e)?,
            "n_steps" => spec.n_steps = parse_num(src, key, e)?,
            "dim" => spec.dim = parse_num(src, key, e)?,
            "particles" => spec.n_particles = parse_num(src, key, e)?,
            "seed" => spec.seed = parse_num(src, key, e)?,
            "picard_tol" => spec.picard_tol = parse_num(src, key, e)?,
            "max_picard_iters" => spec.max_picard_iters = parse_num(src, key, e)?,
            "basis_degree" => spec.basis_degree = parse_num(src, key, e)?,
            "root_tol" => spec.root_tol = parse_num(src, key, e)?,
            _ => {
                let (section, param) = key
                    .split_once('.')
                    .filter(|(s, _)| sections.contains_key(s))
                    .ok_or_else(|| CliError::parse(src, e.line, format!("unknown key '{key}'")))?;
                let slot = sections.get_mut(section).unwrap();
                if !allowed_params(section, &slot.0).contains(&param) {
                    return Err(CliError::parse(src, e.line, format!("'{param}' is not a parameter of {section} '{}'", slot.0)));
                }
                slot.1.insert(param.to_string(), parse_num(src, key, e)?);
            }
        }
    }

    let unknown = |section: &str, kind: &str| {
        let line = entries.get(section).map_or(0, |e| e.line);
        CliError::parse(source_name, line, format!("unknown {section} '{kind}'"))
    };
    let (gk, gp) = &sections["generator"];
    spec.generator = generator_from(gk, gp).ok_or_else(|| unknown("generator", gk))?;
    let (tk, tp) = &sections["terminal"];
    spec.terminal = terminal_from(tk, tp).ok_or_else(|| unknown("terminal", tk))?;
    let (lk, lp) = &sections["losses"];
    spec.losses = loss_from(lk, lp).ok_or_else(|| unknown("losses", lk))?;

    validate(&spec)?;
    Ok(spec)
}

/// Range checks on top of what the solver itself validates.
pub fn validate(spec: &ScenarioSpec) -> Result<()> {
    let bad = |msg: String| Err(CliError::Config(msg));
    if spec.n_particles < 2 {
        return bad(format!("particles must be >= 2, got {}", spec.n_particles));
    }
    if spec.n_steps < 2 {
        return bad(format!("n_steps must be >= 2, got {}", spec.n_steps));
    }
    if spec.dim == 0 {
        return bad("dim must be >= 1".into());
    }
    if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
        return bad(format!("horizon must be positive, got {}", spec.horizon));
    }
    if !(spec.picard_tol > 0.0) || !(spec.root_tol > 0.0) || spec.max_picard_iters == 0 {
        return bad("tolerances and max_picard_iters must be positive".into());
    }
    spec.build().map(|_| ()).map_err(|e| CliError::Config(e.to_string()))
}

/// Canonical text form; `parse_config` of the result gives `spec` back.
pub fn to_config_text(spec: &ScenarioSpec) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
    line("name", spec.name.clone());
    line("horizon", spec.horizon.to_string());
    line("n_steps", spec.n_steps.to_string());
    line("dim", spec.dim.to_string());
    line("particles", spec.n_particles.to_string());
    line("seed", spec.seed.to_string());
    line("picard_tol", spec.picard_tol.to_string());
    line("max_picard_iters", spec.max_picard_iters.to_string());
    line("basis_degree", spec.basis_degree.to_string());
    line("root_tol", spec.root_tol.to_string());
    for (section, (kind, params)) in [
        ("generator", generator_parts(&spec.generator)),
        ("terminal", terminal_parts(&spec.terminal)),
        ("losses", loss_parts(&spec.losses)),
    ] {
        line(section, kind.to_string());
        for (p, v) in params {
            line(&format!("{section}.{p}"), v.to_string());
        }
    }
    out
}

/// `arg` names a scenario file, or a catalog preset when no such file exists.
pub fn load_scenario(arg: &str) -> Result<ScenarioSpec> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        return parse_config(&text, arg);
    }
    preset(arg).ok_or_else(|| {
        CliError::Config(format!("'{arg}' is neither a file nor a catalog scenario ({})", PRESET_NAMES.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips_every_preset() {
        for name in PRESET_NAMES {
            let spec = preset(name).unwrap();
            assert_eq!(parse_config(&to_config_text(&spec), name).unwrap(), spec);
        }
    }

    #[test]
    fn preset_with_overrides() {
        let text = "preset = linear_meanfield\nparticles = 300  # small\n\ngenerator.a_mu = 0.5\nlosses.upper = 9\n";
        let spec = parse_config(text, "t").unwrap();
        assert_eq!(spec.n_particles, 300);
        assert_eq!(spec.generator, GeneratorKind::Affine { c0: 0.0, a_y: 0.0, a_mu: 0.5, a_z: 0.0, a_nu: 0.0 });
        match spec.losses {
            LossKind::Affine { levels, .. } => assert_eq!((levels.lower, levels.upper), (-50.0, 9.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn switching_kind_drops_preset_parameters() {
        let spec = parse_config("preset = mao_log_driver\ngenerator = constant\ngenerator.value = 2", "t").unwrap();
        assert_eq!(spec.generator, GeneratorKind::Constant { value: 2.0 });
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("preset = linear_meanfield\nbogus = 1", 2),
            ("preset = linear_meanfield\n\nparticles = many", 3),
            ("preset = linear_meanfield\ngenerator.kappa = 1", 2),
            ("preset = nope", 1),
            ("preset = linear_meanfield\nseed = 1\nseed = 2", 3),
            ("just words", 1),
            ("preset = linear_meanfield\ngenerator = quadratic", 2),
        ];
        for (text, want) in cases {
            match parse_config(text, "cfg") {
                Err(CliError::Parse { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn range_violations_are_config_errors() {
        for text in [
            "preset = linear_meanfield\nparticles = 1",
            "preset = linear_meanfield\nn_steps = 1",
            "preset = linear_meanfield\npicard_tol = 0",
            "preset = linear_meanfield\nlosses.lower = 60",
            "preset = mao_log_driver\ngenerator.kappa = 3",
            "generator = zero\nterminal = sine",
        ] {
            assert!(matches!(parse_config(text, "cfg"), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn standalone_config_without_preset() {
        let text = "generator = zero\nterminal = brownian_square\nlosses = arctan\nlosses.upper = 3\nlosses.lower = -1";
        let spec = parse_config(text, "cfg").unwrap();
        assert_eq!(spec.terminal, TerminalKind::BrownianSquare { scale: 1.0 });
        assert_eq!(spec.losses, LossKind::Arctan { amp: 0.2, levels: Levels::constant(-1.0, 3.0) });
    }
}
