//! Flat key=value run configuration: a line-oriented format with `[case]`,
//! `[stabilization]`, `[convergence]`, and `[output]` sections, parsed with
//! per-line error reporting and serialized canonically so that
//! `parse(to_string(config))` reproduces the config exactly.

use std::fmt;

use crate::cases::{builtin_case, CaseDefinition, IcPolicy, Regularization, StabConstants};
use crate::error::SolverError;
use crate::norms::Norm;

/// Which reference solution a convergence study measures against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Closed-form / semi-analytic solution for the case.
    Exact,
    /// First-order finite-volume oracle on a fine grid.
    FiniteVolume,
}

impl ReferenceKind {
    pub fn label(&self) -> &'static str {
        match self {
            ReferenceKind::Exact => "exact",
            ReferenceKind::FiniteVolume => "fv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub meshes: Vec<usize>,
    pub degrees: Vec<usize>,
    pub norms: Vec<Norm>,
    pub reference: ReferenceKind,
    pub ref_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    /// Field-dump cadence in steps; 0 disables mid-run dumps (the final
    /// state is still written by the solve command).
    pub dump_every: usize,
    /// Points per direction of the uniform sampling grid in field dumps.
    pub dump_resolution: usize,
    /// Diagnostics-log cadence in steps; 0 logs only the first and last.
    pub diagnostics_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".to_string(),
            dump_every: 0,
            dump_resolution: 201,
            diagnostics_every: 100,
        }
    }
}

/// A fully resolved run description: the named case plus every override,
/// with defaults already filled in from the case definition.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: String,
    pub n: usize,
    pub k: usize,
    pub dt: f64,
    pub t_f: f64,
    pub ic: IcPolicy,
    /// Only meaningful (and only serialized) for Euler cases.
    pub regularization: Regularization,
    pub nonlinear: bool,
    pub linear: bool,
    pub constants: StabConstants,
    pub convergence: Option<ConvergenceConfig>,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Baseline configuration for a built-in case, before file overrides.
    pub fn for_case(name: &str) -> Result<RunConfig, SolverError> {
        let case = builtin_case(name)?;
        Ok(RunConfig {
            case: name.to_string(),
            n: case.default_elements,
            k: case.default_degree,
            dt: case.dt,
            t_f: case.t_f,
            ic: case.ic_policy,
            regularization: case.regularization,
            nonlinear: true,
            linear: true,
            constants: case.constants(),
            convergence: None,
            output: OutputConfig::default(),
        })
    }

    /// Materializes the case definition with every override applied.
    pub fn resolve_case(&self) -> Result<CaseDefinition, SolverError> {
        let mut case = builtin_case(&self.case)?;
        case.dt = self.dt;
        case.t_f = self.t_f;
        case.ic_policy = self.ic;
        if case.is_euler() {
            case.set_regularization(self.regularization);
        }
        case.set_constants(self.constants);
        Ok(case)
    }

    pub fn is_euler(&self) -> bool {
        builtin_case(&self.case).map(|c| c.is_euler()).unwrap_or(false)
    }
}

fn err(line: usize, msg: impl Into<String>) -> SolverError {
    SolverError::Config { line, msg: msg.into() }
}

struct Entry {
    line: usize,
    section: Section,
    key: String,
    value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Case,
    Stabilization,
    Convergence,
    Output,
}

impl Section {
    fn parse(name: &str, line: usize) -> Result<Section, SolverError> {
        match name {
            "case" => Ok(Section::Case),
            "stabilization" => Ok(Section::Stabilization),
            "convergence" => Ok(Section::Convergence),
            "output" => Ok(Section::Output),
            other => Err(err(
                line,
                format!(
                    "unknown section [{other}]; expected [case], [stabilization], \
                     [convergence], or [output]"
                ),
            )),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Entry>, SolverError> {
    let mut entries = Vec::new();
    // keys before any section header belong to [case]
    let mut section = Section::Case;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| err(line, "section header is missing the closing ']'"))?;
            section = Section::parse(name.trim(), line)?;
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| err(line, "expected 'key = value' or a [section] header"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(err(line, "empty key before '='"));
        }
        if let Some(prev) = entries
            .iter()
            .find(|e: &&Entry| e.section == section && e.key == key)
        {
            return Err(err(
                line,
                format!("duplicate key '{key}' (first given on line {})", prev.line),
            ));
        }
        entries.push(Entry { line, section, key, value });
    }
    Ok(entries)
}

fn parse_usize(e: &Entry) -> Result<usize, SolverError> {
    e.value
        .parse::<usize>()
        .map_err(|_| err(e.line, format!("'{}' expects a nonnegative integer, got '{}'", e.key, e.value)))
}

fn parse_f64(e: &Entry) -> Result<f64, SolverError> {
    e.value
        .parse::<f64>()
        .map_err(|_| err(e.line, format!("'{}' expects a number, got '{}'", e.key, e.value)))
}

fn parse_bool(e: &Entry) -> Result<bool, SolverError> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(err(e.line, format!("'{}' expects true or false, got '{other}'", e.key))),
    }
}

fn parse_usize_list(e: &Entry) -> Result<Vec<usize>, SolverError> {
    let vals: Result<Vec<usize>, _> =
        e.value.split(',').map(|s| s.trim().parse::<usize>()).collect();
    let vals = vals.map_err(|_| {
        err(e.line, format!("'{}' expects comma-separated integers, got '{}'", e.key, e.value))
    })?;
    if vals.is_empty() {
        return Err(err(e.line, format!("'{}' must not be empty", e.key)));
    }
    Ok(vals)
}

/// Parses and validates a configuration file, filling unset keys with the
/// case's defaults. Every error carries the 1-based line it was found on.
pub fn parse_config(text: &str) -> Result<RunConfig, SolverError> {
    let entries = lex(text)?;

    let case_entry = entries
        .iter()
        .find(|e| e.section == Section::Case && e.key == "case")
        .ok_or_else(|| {
            err(
                0,
                "missing required key 'case' in the [case] section; every other key \
                 is optional (n, k, dt, t_f, ic, regularization, and the \
                 [stabilization]/[convergence]/[output] sections)",
            )
        })?;
    let case_def = builtin_case(&case_entry.value)
        .map_err(|e| err(case_entry.line, e.to_string()))?;
    let mut cfg = RunConfig::for_case(&case_entry.value).expect("case resolved above");

    let mut convergence: Option<ConvergenceConfig> = None;
    let mut stab_line = 0usize;
    let mut k_line = 0usize;

    for e in &entries {
        match (e.section, e.key.as_str()) {
            (Section::Case, "case") => {}
            (Section::Case, "n") => {
                cfg.n = parse_usize(e)?;
                if cfg.n == 0 {
                    return Err(err(e.line, "'n' must be at least 1"));
                }
            }
            (Section::Case, "k") => {
                cfg.k = parse_usize(e)?;
                k_line = e.line;
                if cfg.k == 0 {
                    return Err(err(e.line, "'k' must be at least 1"));
                }
            }
            (Section::Case, "dt") => {
                cfg.dt = parse_f64(e)?;
                if !(cfg.dt > 0.0) {
                    return Err(err(e.line, "'dt' must be positive"));
                }
            }
            (Section::Case, "t_f") => {
                cfg.t_f = parse_f64(e)?;
                if !(cfg.t_f >= 0.0) {
                    return Err(err(e.line, "'t_f' must be nonnegative"));
                }
            }
            (Section::Case, "ic") => {
                cfg.ic = match e.value.as_str() {
                    "inject" => IcPolicy::Inject,
                    "interpolate" => IcPolicy::Interpolate,
                    other => {
                        return Err(err(
                            e.line,
                            format!("'ic' expects inject or interpolate, got '{other}'"),
                        ))
                    }
                };
            }
            (Section::Case, "regularization") => {
                if !case_def.is_euler() {
                    return Err(err(
                        e.line,
                        format!(
                            "'regularization' applies only to Euler cases; '{}' is scalar",
                            cfg.case
                        ),
                    ));
                }
                cfg.regularization = match e.value.as_str() {
                    "laplacian" => Regularization::Laplacian,
                    "guermond-popov" => Regularization::GuermondPopov,
                    other => {
                        return Err(err(
                            e.line,
                            format!(
                                "'regularization' expects laplacian or guermond-popov, \
                                 got '{other}'"
                            ),
                        ))
                    }
                };
            }
            (Section::Stabilization, "nonlinear") => {
                cfg.nonlinear = parse_bool(e)?;
                stab_line = e.line;
            }
            (Section::Stabilization, "linear") => {
                cfg.linear = parse_bool(e)?;
                stab_line = e.line;
            }
            (Section::Stabilization, "C_RB") => cfg.constants.c_rb = parse_f64(e)?,
            (Section::Stabilization, "C_max") => cfg.constants.c_max = parse_f64(e)?,
            (Section::Stabilization, "C_lin") => cfg.constants.c_lin = parse_f64(e)?,
            (Section::Stabilization, "prandtl") => {
                if !case_def.is_euler() {
                    return Err(err(
                        e.line,
                        format!("'prandtl' applies only to Euler cases; '{}' is scalar", cfg.case),
                    ));
                }
                cfg.constants.prandtl = parse_f64(e)?;
            }
            (Section::Convergence, key) => {
                let conv = convergence.get_or_insert_with(|| default_convergence(&cfg));
                match key {
                    "meshes" => conv.meshes = parse_usize_list(e)?,
                    "degrees" => conv.degrees = parse_usize_list(e)?,
                    "norms" => {
                        let parsed: Option<Vec<Norm>> =
                            e.value.split(',').map(|s| Norm::parse(s)).collect();
                        conv.norms = parsed.ok_or_else(|| {
                            err(
                                e.line,
                                format!(
                                    "'norms' expects a comma-separated subset of l1,l2,linf; \
                                     got '{}'",
                                    e.value
                                ),
                            )
                        })?;
                    }
                    "reference" => {
                        conv.reference = match e.value.as_str() {
                            "exact" => ReferenceKind::Exact,
                            "fv" => ReferenceKind::FiniteVolume,
                            other => {
                                return Err(err(
                                    e.line,
                                    format!("'reference' expects exact or fv, got '{other}'"),
                                ))
                            }
                        };
                    }
                    "ref_cells" => {
                        conv.ref_cells = parse_usize(e)?;
                        if conv.ref_cells < 2 {
                            return Err(err(e.line, "'ref_cells' must be at least 2"));
                        }
                    }
                    other => {
                        return Err(err(
                            e.line,
                            format!(
                                "unknown key '{other}' in [convergence]; expected meshes, \
                                 degrees, norms, reference, or ref_cells"
                            ),
                        ))
                    }
                }
            }
            (Section::Output, "dir") => cfg.output.dir = e.value.clone(),
            (Section::Output, "dump_every") => cfg.output.dump_every = parse_usize(e)?,
            (Section::Output, "dump_resolution") => {
                cfg.output.dump_resolution = parse_usize(e)?;
                if cfg.output.dump_resolution < 2 {
                    return Err(err(e.line, "'dump_resolution' must be at least 2"));
                }
            }
            (Section::Output, "diagnostics_every") => {
                cfg.output.diagnostics_every = parse_usize(e)?
            }
            (Section::Case, other) => {
                return Err(err(
                    e.line,
                    format!(
                        "unknown key '{other}' in [case]; expected case, n, k, dt, t_f, \
                         ic, or regularization"
                    ),
                ))
            }
            (Section::Stabilization, other) => {
                return Err(err(
                    e.line,
                    format!(
                        "unknown key '{other}' in [stabilization]; expected nonlinear, \
                         linear, C_RB, C_max, C_lin, or prandtl"
                    ),
                ))
            }
            (Section::Output, other) => {
                return Err(err(
                    e.line,
                    format!(
                        "unknown key '{other}' in [output]; expected dir, dump_every, \
                         dump_resolution, or diagnostics_every"
                    ),
                ))
            }
        }
    }
    cfg.convergence = convergence;

    if (cfg.nonlinear || cfg.linear) && cfg.k < 2 {
        let line = if k_line != 0 { k_line } else { stab_line };
        return Err(err(
            line,
            format!(
                "stabilization requires degree k >= 2 (got k = {}); disable it with \
                 nonlinear = false and linear = false to run unstabilized",
                cfg.k
            ),
        ));
    }
    Ok(cfg)
}

/// Study defaults when a `[convergence]` section appears (or the converge
/// command runs) without every key: three meshes doubling up to the case's
/// elements, the configured degree, both integral norms, and the exact
/// solution when one exists.
pub fn default_convergence(cfg: &RunConfig) -> ConvergenceConfig {
    let finest = cfg.n.max(16);
    let meshes = vec![(finest / 4).max(4), (finest / 2).max(8), finest];
    let reference = if crate::exact::case_exact_solution(&cfg.case).is_ok() {
        ReferenceKind::Exact
    } else {
        ReferenceKind::FiniteVolume
    };
    ConvergenceConfig {
        meshes,
        degrees: vec![cfg.k],
        norms: vec![Norm::L1, Norm::L2],
        reference,
        ref_cells: 1024,
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[case]")?;
        writeln!(f, "case = {}", self.case)?;
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "dt = {:.16e}", self.dt)?;
        writeln!(f, "t_f = {:.16e}", self.t_f)?;
        let ic = match self.ic {
            IcPolicy::Inject => "inject",
            IcPolicy::Interpolate => "interpolate",
        };
        writeln!(f, "ic = {ic}")?;
        let euler = self.is_euler();
        if euler {
            let reg = match self.regularization {
                Regularization::Laplacian => "laplacian",
                Regularization::GuermondPopov => "guermond-popov",
            };
            writeln!(f, "regularization = {reg}")?;
        }
        writeln!(f)?;
        writeln!(f, "[stabilization]")?;
        writeln!(f, "nonlinear = {}", self.nonlinear)?;
        writeln!(f, "linear = {}", self.linear)?;
        writeln!(f, "C_RB = {:.16e}", self.constants.c_rb)?;
        writeln!(f, "C_max = {:.16e}", self.constants.c_max)?;
        writeln!(f, "C_lin = {:.16e}", self.constants.c_lin)?;
        if euler {
            writeln!(f, "prandtl = {:.16e}", self.constants.prandtl)?;
        }
        if let Some(conv) = &self.convergence {
            writeln!(f)?;
            writeln!(f, "[convergence]")?;
            let meshes: Vec<String> = conv.meshes.iter().map(|m| m.to_string()).collect();
            writeln!(f, "meshes = {}", meshes.join(","))?;
            let degrees: Vec<String> = conv.degrees.iter().map(|d| d.to_string()).collect();
            writeln!(f, "degrees = {}", degrees.join(","))?;
            let norms: Vec<&str> = conv.norms.iter().map(|n| n.label()).collect();
            writeln!(f, "norms = {}", norms.join(","))?;
            writeln!(f, "reference = {}", conv.reference.label())?;
            writeln!(f, "ref_cells = {}", conv.ref_cells)?;
        }
        writeln!(f)?;
        writeln!(f, "[output]")?;
        writeln!(f, "dir = {}", self.output.dir)?;
        writeln!(f, "dump_every = {}", self.output.dump_every)?;
        writeln!(f, "dump_resolution = {}", self.output.dump_resolution)?;
        writeln!(f, "diagnostics_every = {}", self.output.diagnostics_every)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults_from_the_case() {
        let cfg = parse_config("case = adv_smooth\nk = 3\nn = 32\n").unwrap();
        assert_eq!(cfg.case, "adv_smooth");
        assert_eq!(cfg.n, 32);
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.dt, 1e-4);
        assert_eq!(cfg.t_f, 1.0);
        assert!(cfg.nonlinear && cfg.linear);
        assert_eq!(cfg.constants.c_rb, 4.0);
        assert_eq!(cfg.constants.c_max, 0.5);
        assert_eq!(cfg.constants.c_lin, 0.25);
        assert!(cfg.convergence.is_none());
        assert_eq!(cfg.output.dir, "out");
    }

    #[test]
    fn empty_file_reports_the_required_key() {
        let e = parse_config("").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("'case'"), "unhelpful message: {msg}");
    }

    #[test]
    fn unknown_keys_and_sections_carry_line_numbers() {
        let text = "case = adv_smooth\n\n[case]\nbogus = 1\n";
        match parse_config(text).unwrap_err() {
            SolverError::Config { line, msg } => {
                assert_eq!(line, 4);
                assert!(msg.contains("bogus"));
            }
            other => panic!("wrong error {other}"),
        }
        match parse_config("case = adv_smooth\n[nope]\n").unwrap_err() {
            SolverError::Config { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("nope"));
            }
            other => panic!("wrong error {other}"),
        }
    }

    #[test]
    fn type_mismatches_carry_line_numbers() {
        let text = "case = adv_smooth\nn = not_a_number\n";
        match parse_config(text).unwrap_err() {
            SolverError::Config { line, .. } => assert_eq!(line, 2),
            other => panic!("wrong error {other}"),
        }
    }

    #[test]
    fn regularization_is_rejected_for_scalar_cases() {
        let text = "case = burgers_smooth\nregularization = laplacian\n";
        let msg = parse_config(text).unwrap_err().to_string();
        assert!(msg.contains("Euler"), "message was: {msg}");
        // and accepted for Euler cases
        let text = "case = euler_sod\nregularization = laplacian\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.regularization, Regularization::Laplacian);
        // constants follow the selected regularization
        assert_eq!(cfg.constants.c_max, 0.1);
    }

    #[test]
    fn stabilization_needs_quadratic_splines() {
        let text = "case = adv_smooth\nk = 1\n";
        let msg = parse_config(text).unwrap_err().to_string();
        assert!(msg.contains("k >= 2"), "message was: {msg}");
        // unstabilized linear splines are allowed
        let text = "case = adv_smooth\nk = 1\n[stabilization]\nnonlinear = false\nlinear = false\n";
        assert!(parse_config(text).is_ok());
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let text = "case = adv_smooth\nn = 8\nn = 16\n";
        match parse_config(text).unwrap_err() {
            SolverError::Config { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("line 2"));
            }
            other => panic!("wrong error {other}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a demo\n\ncase = adv_smooth\n# trailing section\n[output]\ndir = results\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.output.dir, "results");
    }

    #[test]
    fn full_round_trip_is_exact() {
        let text = "\
case = euler_sod
n = 100
k = 4
dt = 2.5e-5
t_f = 0.2
ic = interpolate
regularization = guermond-popov

[stabilization]
nonlinear = true
linear = false
C_RB = 3.5
C_max = 0.15
C_lin = 0.2
prandtl = 0.66

[convergence]
meshes = 50,100,200
degrees = 3,4
norms = l1,l2,linf
reference = exact
ref_cells = 4096

[output]
dir = sod_out
dump_every = 500
dump_resolution = 1000
diagnostics_every = 50
";
        let cfg = parse_config(text).unwrap();
        let round = parse_config(&cfg.to_string()).unwrap();
        assert_eq!(cfg, round);
        // serialization is itself stable
        assert_eq!(cfg.to_string(), round.to_string());
    }

    #[test]
    fn scalar_round_trip_is_exact() {
        let cfg = parse_config("case = bl_riemann_1d\nn = 256\nk = 5\n").unwrap();
        let round = parse_config(&cfg.to_string()).unwrap();
        assert_eq!(cfg, round);
    }

    #[test]
    fn resolved_case_reflects_overrides() {
        let text = "case = euler_sod\ndt = 5e-5\nt_f = 0.125\nic = interpolate\n\
                    regularization = laplacian\n[stabilization]\nC_max = 0.9\n";
        let cfg = parse_config(text).unwrap();
        let case = cfg.resolve_case().unwrap();
        assert_eq!(case.dt, 5e-5);
        assert_eq!(case.t_f, 0.125);
        assert_eq!(case.ic_policy, IcPolicy::Interpolate);
        assert_eq!(case.regularization, Regularization::Laplacian);
        assert_eq!(case.constants().c_max, 0.9);
        // untouched constants keep the case defaults
        assert_eq!(case.constants().c_rb, 4.0);
    }
}
