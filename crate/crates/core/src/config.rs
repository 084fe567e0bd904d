//! Run configuration: INI-style key/value sections parsed from a versioned
//! text file. Unknown sections or keys are rejected so that typos surface
//! as config errors.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid};
use crate::model::{F2Exponents, ProblemParams};
use crate::subsup::Constants;

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        build_grid(self.dim, &self.extents, &self.nodes)
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub linear_tol: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub newton_polish: bool,
    /// Iteration cap for the dense Newton solves of the nodal pipeline.
    pub nodal_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            linear_tol: 1e-10,
            tol: 1e-8,
            max_iter: 10_000,
            newton_polish: true,
            nodal_max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationConfig {
    pub epsilons: Vec<f64>,
    pub step_tol: f64,
    pub mu_chi: f64,
    pub mu_list: Vec<f64>,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            epsilons: (1..=6).map(|k| 0.5f64.powi(k)).collect(),
            step_tol: 1e-8,
            mu_chi: 0.1,
            mu_list: vec![0.1, 0.01, 0.001],
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultistartConfig {
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for MultistartConfig {
    fn default() -> Self {
        MultistartConfig {
            n_starts: 16,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DegreeConfig {
    pub n_starts: usize,
    pub t_grid: Vec<f64>,
    pub f2_exponents: F2Exponents,
}

impl Default for DegreeConfig {
    fn default() -> Self {
        DegreeConfig {
            n_starts: 48,
            t_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            f2_exponents: F2Exponents::SystemConsistent,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub params: ProblemParams,
    pub forced_constants: Option<Constants>,
    pub solver: SolverConfig,
    pub continuation: ContinuationConfig,
    pub multistart: MultistartConfig,
    pub degree: DegreeConfig,
    pub output_dir: String,
}

/// The commands the batch interface exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Eigen,
    Certify,
    SolveSign,
    SolveNodal,
    Degree,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Eigen => "eigen",
            CommandKind::Certify => "certify",
            CommandKind::SolveSign => "solve-sign",
            CommandKind::SolveNodal => "solve-nodal",
            CommandKind::Degree => "degree",
        }
    }
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_ini(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_lowercase();
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let Some(section) = &current else {
            return Err(Error::Config(format!(
                "line {}: key `{}` outside any [section]",
                lineno + 1,
                key.trim()
            )));
        };
        sections
            .get_mut(section)
            .unwrap()
            .insert(key.trim().to_lowercase(), value.trim().to_string());
    }
    Ok(sections)
}

struct Section<'a> {
    name: &'a str,
    map: BTreeMap<String, String>,
    seen: std::cell::RefCell<Vec<String>>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<String> {
        self.seen.borrow_mut().push(key.to_string());
        self.map.get(key).cloned()
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    Error::Config(format!("[{}] {key}: not a number: `{v}`", self.name))
                })
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    Error::Config(format!("[{}] {key}: not an integer: `{v}`", self.name))
                })
            })
            .transpose()
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>().map_err(|_| {
                    Error::Config(format!("[{}] {key}: not an integer: `{v}`", self.name))
                })
            })
            .transpose()
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!(
                    "[{}] {key}: not a boolean: `{v}`",
                    self.name
                ))),
            })
            .transpose()
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|_| {
                            Error::Config(format!("[{}] {key}: bad list entry `{s}`", self.name))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim().parse::<usize>().map_err(|_| {
                            Error::Config(format!("[{}] {key}: bad list entry `{s}`", self.name))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    fn finish(&self) -> Result<()> {
        let seen = self.seen.borrow();
        for key in self.map.keys() {
            if !seen.iter().any(|s| s == key) {
                return Err(Error::Config(format!(
                    "[{}] unknown key `{key}`",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let sections = parse_ini(text)?;
        for name in sections.keys() {
            if !matches!(
                name.as_str(),
                "grid" | "params" | "constants" | "solver" | "continuation" | "multistart"
                    | "degree" | "output"
            ) {
                return Err(Error::Config(format!("unknown section [{name}]")));
            }
        }
        let section = |name: &'static str| -> Section<'_> {
            Section {
                name,
                map: sections.get(name).cloned().unwrap_or_default(),
                seen: std::cell::RefCell::new(Vec::new()),
            }
        };

        let g = section("grid");
        if g.map.is_empty() {
            return Err(Error::Config("missing [grid] section".into()));
        }
        let dim = g
            .usize("dim")?
            .ok_or_else(|| Error::Config("[grid] dim is required".into()))?;
        let extents = g
            .f64_list("extents")?
            .ok_or_else(|| Error::Config("[grid] extents is required".into()))?;
        let nodes = g
            .usize_list("nodes")?
            .ok_or_else(|| Error::Config("[grid] nodes is required".into()))?;
        g.finish()?;
        let grid = GridConfig {
            dim,
            extents,
            nodes,
        };
        grid.build()
            .map_err(|e| Error::Config(format!("invalid [grid]: {e}")))?;

        let p = section("params");
        if p.map.is_empty() {
            return Err(Error::Config("missing [params] section".into()));
        }
        let req = |s: &Section, key: &'static str| -> Result<f64> {
            s.f64(key)?
                .ok_or_else(|| Error::Config(format!("[params] {key} is required")))
        };
        let mut params = ProblemParams::new(
            req(&p, "alpha1")?,
            req(&p, "alpha2")?,
            req(&p, "beta1")?,
            req(&p, "beta2")?,
            req(&p, "rho")?,
        )
        .map_err(|e| Error::Config(format!("invalid [params]: {e}")))?;
        if let (Some(s1), Some(s2)) = (
            p.f64("f1_scale")?.or(Some(params.f1_scale)),
            p.f64("f2_scale")?.or(Some(params.f2_scale)),
        ) {
            params = params
                .with_scales(s1, s2)
                .map_err(|e| Error::Config(format!("invalid [params]: {e}")))?;
        }
        p.finish()?;

        let c = section("constants");
        let forced_constants = match (c.f64("c")?, c.f64("c0")?) {
            (None, None) => None,
            (cv, c0v) => {
                let forced = Constants::forced(cv.unwrap_or(2.0), c0v.unwrap_or(2.0))
                    .map_err(|e| Error::Config(format!("invalid [constants]: {e}")))?;
                Some(forced)
            }
        };
        c.finish()?;

        let s = section("solver");
        let defaults = SolverConfig::default();
        let solver = SolverConfig {
            linear_tol: s.f64("linear_tol")?.unwrap_or(defaults.linear_tol),
            tol: s.f64("tol")?.unwrap_or(defaults.tol),
            max_iter: s.usize("max_iter")?.unwrap_or(defaults.max_iter),
            newton_polish: s.bool("newton_polish")?.unwrap_or(defaults.newton_polish),
            nodal_max_iter: s.usize("nodal_max_iter")?.unwrap_or(defaults.nodal_max_iter),
        };
        if !(solver.tol > 0.0 && solver.linear_tol > 0.0) {
            return Err(Error::Config("[solver] tolerances must be positive".into()));
        }
        s.finish()?;

        let k = section("continuation");
        let defaults = ContinuationConfig::default();
        let continuation = ContinuationConfig {
            epsilons: k.f64_list("epsilons")?.unwrap_or(defaults.epsilons),
            step_tol: k.f64("step_tol")?.unwrap_or(defaults.step_tol),
            mu_chi: k.f64("mu_chi")?.unwrap_or(defaults.mu_chi),
            mu_list: k.f64_list("mu_list")?.unwrap_or(defaults.mu_list),
        };
        k.finish()?;

        let m = section("multistart");
        let defaults = MultistartConfig::default();
        let multistart = MultistartConfig {
            n_starts: m.usize("n_starts")?.unwrap_or(defaults.n_starts),
            seed: m.u64("seed")?.unwrap_or(defaults.seed),
        };
        m.finish()?;

        let d = section("degree");
        let defaults = DegreeConfig::default();
        let f2_exponents = match d.get("f2_exponents").as_deref() {
            None => defaults.f2_exponents,
            Some("consistent") => F2Exponents::SystemConsistent,
            Some("literal") => F2Exponents::PaperLiteral,
            Some(v) => {
                return Err(Error::Config(format!(
                    "[degree] f2_exponents must be `consistent` or `literal`, got `{v}`"
                )))
            }
        };
        let degree = DegreeConfig {
            n_starts: d.usize("n_starts")?.unwrap_or(defaults.n_starts),
            t_grid: d.f64_list("t_grid")?.unwrap_or(defaults.t_grid),
            f2_exponents,
        };
        d.finish()?;

        let o = section("output");
        let output_dir = o.get("dir").unwrap_or_else(|| "out".to_string());
        o.finish()?;

        Ok(RunConfig {
            grid,
            params,
            forced_constants,
            solver,
            continuation,
            multistart,
            degree,
            output_dir,
        })
    }

    /// Command-specific validation: the nodal and degree pipelines need
    /// `beta1 = 0`, and degree runs are restricted to coarse grids so dense
    /// Jacobians and exhaustive multistart stay feasible.
    pub fn validate_for(&self, cmd: CommandKind) -> Result<()> {
        match cmd {
            CommandKind::SolveNodal | CommandKind::Degree => {
                self.params
                    .require_beta1_zero()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            _ => {}
        }
        if cmd == CommandKind::Degree {
            let unknowns: usize = 2 * self.grid.nodes.iter().product::<usize>();
            if unknowns > 16 {
                return Err(Error::Config(format!(
                    "degree runs need <= 16 total unknowns, grid has {unknowns}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[grid]
dim = 1
extents = 1.0
nodes = 101

[params]
alpha1 = 0.5
alpha2 = 0.5
beta1 = 0.0
beta2 = 0.0
rho = 2.0
";

    #[test]
    fn parses_minimal_config() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.grid.dim, 1);
        assert_eq!(cfg.grid.nodes, vec![101]);
        assert!((cfg.params.rho - 2.0).abs() < 1e-15);
        assert!(cfg.forced_constants.is_none());
        assert_eq!(cfg.multistart.seed, 42);
        assert_eq!(cfg.output_dir, "out");
    }

    #[test]
    fn parses_overrides_and_comments() {
        let text = format!(
            "{MINIMAL}\n# comment\n[constants]\nc = 4.0\nc0 = 2.0\n\n[solver]\ntol = 1e-9\n\
             [continuation]\nepsilons = 0.5, 0.25\n[multistart]\nseed = 7\n[output]\ndir = results\n"
        );
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.forced_constants.unwrap().c, 4.0);
        assert_eq!(cfg.solver.tol, 1e-9);
        assert_eq!(cfg.continuation.epsilons, vec![0.5, 0.25]);
        assert_eq!(cfg.multistart.seed, 7);
        assert_eq!(cfg.output_dir, "results");
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        assert!(RunConfig::parse(&format!("{MINIMAL}\n[grid2]\nx = 1\n")).is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}\n[solver]\ntolx = 1\n")).is_err());
        assert!(RunConfig::parse("[grid]\ndim = one\n").is_err());
        assert!(RunConfig::parse("").is_err());
    }

    #[test]
    fn rejects_invalid_params() {
        let bad = MINIMAL.replace("alpha1 = 0.5", "alpha1 = 1.5");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn command_validation() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert!(cfg.validate_for(CommandKind::Eigen).is_ok());
        // 202 unknowns is far past the degree cap.
        assert!(cfg.validate_for(CommandKind::Degree).is_err());

        let coarse = MINIMAL.replace("nodes = 101", "nodes = 5");
        let cfg = RunConfig::parse(&coarse).unwrap();
        assert!(cfg.validate_for(CommandKind::Degree).is_ok());

        let beta1 = MINIMAL.replace("beta1 = 0.0", "beta1 = 0.1");
        let cfg = RunConfig::parse(&beta1).unwrap();
        assert!(cfg.validate_for(CommandKind::Certify).is_ok());
        assert!(cfg.validate_for(CommandKind::SolveNodal).is_err());
    }
}
