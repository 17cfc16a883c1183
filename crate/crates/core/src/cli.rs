//! Command-line interface.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::asymptotics::{composite_grid, composite_layers, AsymptoticSolution};
use crate::droplet::{droplet_pressures, mobility, reconstruct_layers, solve_droplet, GridSpec};
use crate::io::{write_csv, write_json, Table};
use crate::minimizer::{gamma_convergence_study, minimize, DiscreteState, MinimizeOptions};
use crate::potential::PotentialSpec;
use crate::sharp_interface::{gamma_minimizer, neumann_triangle, sharp_droplet};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "twolayer", version, about = "Stationary droplets of a two-layer thin-film model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Droplet by quadrature, its layers and pressures.
    Solve,
    /// Matched-asymptotic composite droplet.
    Expand,
    /// Quadrature vs composite vs sharp-interface profiles.
    Compare,
    /// Discrete constrained minimization in a box with no-flux walls.
    Minimize,
    /// Minimization over a list of epsilon against the sharp-interface limit.
    Study,
    /// Closed-form sharp-interface minimizer.
    Sharp,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Expand => "expand",
            Command::Compare => "compare",
            Command::Minimize => "minimize",
            Command::Study => "study",
            Command::Sharp => "sharp",
        }
    }
}

/// Flags shared by all subcommands; unset values come from `--config`, then defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    /// Viscosity ratio.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub m1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub m2: Option<f64>,
    /// Box length L (the radius of the sharp-interface domain is L/2).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub length: Option<f64>,
    /// Far-field depth of the lower layer.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub depth: Option<f64>,
    /// Number of grid nodes.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid: Option<i64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated epsilon values for `compare` and `study`.
    #[arg(long, global = true)]
    pub eps_list: Option<String>,
    /// Spatial dimension of the sharp-interface minimizer (1 or 2).
    #[arg(long, global = true)]
    pub dimension: Option<u8>,
    /// Plain `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Fully resolved parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub eps: f64,
    pub sigma: f64,
    pub mu: f64,
    pub m1: f64,
    pub m2: f64,
    pub length: f64,
    pub depth: f64,
    pub grid: usize,
    pub tol: f64,
    /// Not serialized, so reports do not depend on where they are written.
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
    pub eps_list: Vec<f64>,
    pub dimension: u8,
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("cannot parse {t:?} in epsilon list")))
        })
        .collect()
}

/// Reads a `key = value` file; blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("config line {} is not key = value", i + 1)))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

impl RunConfig {
    /// Merges flags over the config file over the defaults of `command`, then validates.
    pub fn resolve(command: Command, params: &Params) -> Result<Self> {
        let file = match &params.config {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        let known = [
            "eps", "sigma", "mu", "m1", "m2", "length", "depth", "grid", "tol", "out", "seed", "eps_list",
            "dimension",
        ];
        if let Some(k) = file.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Validation(format!("unknown config key {k:?}")));
        }
        let num = |flag: Option<f64>, key: &str, default: f64| -> Result<f64> {
            match (flag, file.get(key)) {
                (Some(v), _) => Ok(v),
                (None, Some(t)) => t
                    .parse()
                    .map_err(|_| Error::Validation(format!("config value {key} = {t:?} is not a number"))),
                (None, None) => Ok(default),
            }
        };
        let (eps_default, sigma_default, list_default) = match command {
            Command::Solve | Command::Expand => (0.2, 1.2, "0.2"),
            Command::Compare => (0.2, 1.2, "0.05,0.2"),
            _ => (0.1, 1.0, "0.2,0.1,0.05"),
        };
        let grid = num(params.grid.map(|g| g as f64), "grid", 1024.0)?;
        let seed = num(params.seed.map(|s| s as f64), "seed", 0.0)?;
        let dimension = num(params.dimension.map(f64::from), "dimension", 1.0)?;
        let list = match (&params.eps_list, file.get("eps_list")) {
            (Some(t), _) => parse_list(t)?,
            (None, Some(t)) => parse_list(t)?,
            (None, None) => parse_list(list_default)?,
        };
        let out = params
            .out
            .clone()
            .or_else(|| file.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let cfg = RunConfig {
            eps: num(params.eps, "eps", eps_default)?,
            sigma: num(params.sigma, "sigma", sigma_default)?,
            mu: num(params.mu, "mu", 1.0)?,
            m1: num(params.m1, "m1", 4.0)?,
            m2: num(params.m2, "m2", 2.0)?,
            length: num(params.length, "length", 4.0)?,
            depth: num(params.depth, "depth", 1.0)?,
            grid: if grid >= 16.0 && grid.fract() == 0.0 { grid as usize } else { 0 },
            tol: num(params.tol, "tol", 1e-9)?,
            out,
            seed: if seed >= 0.0 && seed.fract() == 0.0 { seed as u64 } else { u64::MAX },
            eps_list: list,
            dimension: if dimension == 1.0 || dimension == 2.0 { dimension as u8 } else { 0 },
        };
        cfg.validate(grid, seed, dimension)?;
        Ok(cfg)
    }

    fn validate(&self, grid: f64, seed: f64, dimension: f64) -> Result<()> {
        for (name, v) in [
            ("eps", self.eps),
            ("sigma", self.sigma),
            ("mu", self.mu),
            ("m1", self.m1),
            ("m2", self.m2),
            ("length", self.length),
            ("depth", self.depth),
            ("tol", self.tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.grid == 0 {
            return Err(Error::Validation(format!("grid must be an integer >= 16, got {grid}")));
        }
        if self.seed == u64::MAX {
            return Err(Error::Validation(format!("seed must be a nonnegative integer, got {seed}")));
        }
        if self.dimension == 0 {
            return Err(Error::Validation(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Validation(format!("epsilon list entries must be positive, got {e}")));
        }
        Ok(())
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code: 0 on success, 1 on numerical failure, 2 on invalid input.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cfg = match RunConfig::resolve(cli.command, &cli.params) {
        Ok(cfg) => cfg,
        Err(e) => return report_error(cli.command, cli.params.out.as_deref(), &e),
    };
    match execute(cli.command, &cfg) {
        Ok(code) => code,
        Err(e) => report_error(cli.command, Some(&cfg.out), &e),
    }
}

fn report_error(command: Command, out: Option<&Path>, err: &Error) -> i32 {
    eprintln!("twolayer {}: {err}", command.name());
    if let Some(dir) = out {
        let body = json!({ "error": { "kind": err.kind(), "message": err.to_string() } });
        let _ = write_json(&dir.join("error.json"), command.name(), 0, body);
    }
    err.exit_code()
}

/// Runs one command with resolved parameters and returns its exit code.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<i32> {
    std::fs::create_dir_all(&cfg.out)?;
    match command {
        Command::Solve => cmd_solve(cfg),
        Command::Expand => cmd_expand(cfg),
        Command::Compare => cmd_compare(cfg),
        Command::Minimize => cmd_minimize(cfg),
        Command::Study => cmd_study(cfg),
        Command::Sharp => cmd_sharp(cfg),
    }
}

fn json_out(cfg: &RunConfig, name: &str, command: Command, body: serde_json::Value) -> Result<()> {
    let body = json!({ "config": cfg, "result": body });
    write_json(&cfg.out.join(name), command.name(), cfg.seed, body)
}

fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let pot = PotentialSpec::standard(cfg.eps)?;
    let profile = solve_droplet(&pot, cfg.sigma, &GridSpec::default())?;
    let layers = reconstruct_layers(&profile, cfg.depth)?;
    let field = droplet_pressures(&profile, cfg.depth, &pot)?;

    let mut droplet = Table::new(&["x", "h", "slope"]);
    for ((x, h), s) in profile.x().iter().zip(profile.h()).zip(profile.slope()) {
        droplet.push(vec![*x, *h, *s]);
    }
    write_csv(&cfg.out.join("droplet.csv"), &droplet)?;

    let mut two = Table::new(&["x", "h1", "h2", "p1", "p2"]);
    let mut min_det = f64::INFINITY;
    for i in 0..layers.x.len() {
        two.push(vec![layers.x[i], layers.h1[i], layers.h2[i], field.p1[i], field.p2[i]]);
        min_det = min_det.min(mobility(layers.h1[i], layers.h2[i], cfg.mu)?.det);
    }
    write_csv(&cfg.out.join("layers.csv"), &two)?;

    let scale = field.p1.iter().chain(&field.p2).fold(1.0f64, |a, p| a.max(p.abs()));
    json_out(
        cfg,
        "solve.json",
        Command::Solve,
        json!({
            "h_infinity": profile.h_infinity,
            "apex_height": profile.apex_height,
            "contact_estimate": profile.contact_estimate,
            "x_far": profile.x_far(),
            "lambda1": field.lambda1,
            "lambda2": field.lambda2,
            "max_pressure_gradient": field.max_interior_gradient(2),
            "pressure_scale": scale,
            "min_mobility_det": min_det,
        }),
    )?;
    Ok(0)
}

fn cmd_expand(cfg: &RunConfig) -> Result<i32> {
    let sol = AsymptoticSolution::new(cfg.eps, cfg.sigma)?;
    let grid = composite_grid(cfg.eps, sol.s, sol.s + 5.0 * cfg.eps, cfg.grid);
    let layers = composite_layers(&sol, cfg.depth, &grid)?;
    let mut table = Table::new(&["x", "h", "h1", "h2", "interpolated"]);
    for (i, &x) in grid.iter().enumerate() {
        let p = sol.evaluate(x);
        table.push(vec![x, p.h, layers.h1[i], layers.h2[i], if p.interpolated { 1.0 } else { 0.0 }]);
    }
    write_csv(&cfg.out.join("composite.csv"), &table)?;
    json_out(
        cfg,
        "expand.json",
        Command::Expand,
        json!({
            "s": sol.s,
            "theta": sol.theta,
            "h_infinity_coefficients": sol.h_inf_coeffs,
            "far_field": sol.far_field(),
            "a1": sol.a1,
            "switchback": sol.switchback,
            "v1_shift": sol.v1_shift,
            "outer_homogeneous": sol.outer.homogeneous,
            "outer_fit_residual": sol.outer.fit_residual,
            "inner_fit_residual": sol.inner.fit_residual,
        }),
    )?;
    Ok(0)
}

fn cmd_compare(cfg: &RunConfig) -> Result<i32> {
    let abs_phi1 = PotentialSpec::standard(1.0)?.abs_phi1();
    let sharp = sharp_droplet(cfg.sigma, abs_phi1, None)?;
    let mut summary = Vec::new();
    for &eps in &cfg.eps_list {
        let pot = PotentialSpec::standard(eps)?;
        let profile = solve_droplet(&pot, cfg.sigma, &GridSpec::default())?;
        let sol = AsymptoticSolution::new(eps, cfg.sigma)?;
        let x_max = sol.s + 5.0 * eps;
        let grid = composite_grid(eps, sol.s, x_max, cfg.grid);
        let numeric: Vec<f64> = grid.iter().map(|&x| profile.eval(x)).collect();
        let layers = crate::droplet::reconstruct_layers_from(
            grid.clone(),
            &numeric,
            profile.h_infinity,
            profile.apex_height,
            cfg.depth,
            cfg.sigma,
        )?;
        let mut table = Table::new(&["x", "numeric", "composite", "h1", "h2", "sharp"]);
        let mut sup: f64 = 0.0;
        for (i, &x) in grid.iter().enumerate() {
            let c = sol.composite(x);
            sup = sup.max((c - numeric[i]).abs());
            table.push(vec![x, numeric[i], c, layers.h1[i], layers.h2[i], sharp.eval(x)]);
        }
        if !sup.is_finite() {
            return Err(Error::numerical("composite comparison produced a non-finite error", sup));
        }
        write_csv(&cfg.out.join(format!("compare_eps_{eps}.csv")), &table)?;
        summary.push(json!({ "eps": eps, "sup_error": sup, "x_max": x_max, "s": sol.s }));
    }
    json_out(cfg, "compare.json", Command::Compare, json!({ "rows": summary, "sharp_s": sharp.s }))?;
    Ok(0)
}

fn cmd_minimize(cfg: &RunConfig) -> Result<i32> {
    let pot = PotentialSpec::standard(cfg.eps)?;
    let init = DiscreteState::initial(cfg.m1, cfg.m2, cfg.length, cfg.grid, pot, cfg.sigma)?;
    let options = MinimizeOptions { tol: cfg.tol, ..Default::default() };
    let (state, report) = minimize(&init, &options)?;
    let mut table = Table::new(&["x", "h1", "h2"]);
    for (i, x) in state.x().into_iter().enumerate() {
        table.push(vec![x, state.h1[i], state.h2[i]]);
    }
    write_csv(&cfg.out.join("minimizer.csv"), &table)?;
    json_out(cfg, "minimize.json", Command::Minimize, serde_json::to_value(&report)?)?;
    Ok(if report.converged { 0 } else { 1 })
}

fn cmd_study(cfg: &RunConfig) -> Result<i32> {
    let options = MinimizeOptions { tol: cfg.tol, ..Default::default() };
    let table = gamma_convergence_study(&cfg.eps_list, cfg.m1, cfg.m2, cfg.sigma, cfg.length, cfg.grid, &options)?;
    let mut csv = Table::new(&["eps", "energy_eps", "energy_gap", "sup_dist", "contact_slope"]);
    for r in &table.rows {
        csv.push(vec![r.eps, r.energy_eps, r.energy_gap, r.sup_dist, r.contact_slope]);
    }
    write_csv(&cfg.out.join("study.csv"), &csv)?;
    let all_converged = table.rows.iter().all(|r| r.converged);
    json_out(
        cfg,
        "study.json",
        Command::Study,
        json!({
            "contact_slope_target": table.contact_slope_target,
            "energy_infinity": table.energy_infinity,
            "energy_gap_decreasing": table.energy_gap_decreasing(),
            "contact_slope_error_decreasing": table.slope_error_decreasing(),
            "all_converged": all_converged,
            "rows": table.rows,
        }),
    )?;
    Ok(if all_converged { 0 } else { 1 })
}

fn cmd_sharp(cfg: &RunConfig) -> Result<i32> {
    let abs_phi1 = PotentialSpec::standard(1.0)?.abs_phi1();
    let g = gamma_minimizer(cfg.m1, cfg.m2, cfg.sigma, abs_phi1, cfg.dimension, 0.5 * cfg.length)?;
    let mut table = Table::new(&[if cfg.dimension == 1 { "x" } else { "r" }, "h1", "h2", "zeta"]);
    for (x, h1, h2, z) in g.sample(cfg.grid) {
        table.push(vec![x, h1, h2, z]);
    }
    write_csv(&cfg.out.join("sharp.csv"), &table)?;
    let (s1, s2, sh) = neumann_triangle(cfg.sigma, g.c)?;
    json_out(
        cfg,
        "sharp.json",
        Command::Sharp,
        json!({
            "minimizer": g,
            "energy": g.energy(),
            "contact_slope": g.contact_slope(),
            "contact_slope_target": (2.0 * g.c).sqrt(),
            "neumann_slopes": { "h1": s1, "h2": s2, "thickness": sh },
        }),
    )?;
    Ok(0)
}
