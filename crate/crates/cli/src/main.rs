use std::path::PathBuf;
use std::process::ExitCode;

use chsurf_cli::commands::{self, EXIT_USAGE};
use chsurf_cli::config::{self, ConfigError, RawConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chsurf", version, about = "Minimal surfaces in complex hyperbolic space: solvers and checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Default)]
struct Common {
    /// Write the artifact here instead of stdout.
    #[arg(long, short)]
    output: Option<String>,
    /// csv, json or markdown (supported formats depend on the command).
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Default)]
struct Field {
    /// Constant ‖Q₀‖_μ; the solver uses its square.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    /// Constant ‖Q₀‖²_μ.
    #[arg(long, allow_hyphen_values = true)]
    qsq: Option<String>,
    /// JSON array with one ‖Q₀‖²_μ value per mesh vertex.
    #[arg(long)]
    q_file: Option<String>,
    /// Refinement level of the Bolza mesh.
    #[arg(long, allow_hyphen_values = true)]
    refine: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<String>,
}

#[derive(Args, Default)]
struct Chart {
    /// Chart data JSON (`grid`, `u1`, `u2`, `Q_re`, `Q_im`).
    #[arg(long)]
    data: Option<String>,
    /// r-fuchsian, mobius or lagrangian-strip.
    #[arg(long)]
    example: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid_n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid_half: Option<String>,
    /// Möbius parameter `re[,im]`.
    #[arg(long, allow_hyphen_values = true)]
    mobius_a: Option<String>,
    /// Constant cubic differential of the strip, `re[,im]`.
    #[arg(long, allow_hyphen_values = true)]
    strip_q: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    strip_phi0: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit the Bolza mesh as JSON.
    Mesh {
        #[arg(long, allow_hyphen_values = true)]
        refine: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Solve the Gauss equation at one t by continuation from t = 0.
    Solve {
        #[command(flatten)]
        field: Field,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Continue along the ray t ↦ tQ₀ and locate the fold.
    Ray {
        #[command(flatten)]
        field: Field,
        #[arg(long, allow_hyphen_values = true)]
        t_max: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        step: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Toda residuals, flatness and curvature identities on chart data.
    TodaCheck {
        #[command(flatten)]
        chart: Chart,
        /// Relative amplitude of random multiplicative noise on u₁, u₂.
        #[arg(long, allow_hyphen_values = true)]
        perturb: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        seed: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Holonomy of the flat connection around a circle.
    Holonomy {
        #[command(flatten)]
        chart: Chart,
        /// Loop centre `re[,im]`.
        #[arg(long, allow_hyphen_values = true)]
        center: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        radius: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        vertices: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        steps: Option<String>,
        /// Use the closed-form ℝ-Fuchsian connection.
        #[arg(long)]
        analytic: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Normal exponential map: lower bounds and area density.
    Expmap {
        #[arg(long = "Q0", alias = "q0", allow_hyphen_values = true)]
        q0: Option<String>,
        /// Sweep the polar grid in (r, α).
        #[arg(long)]
        sweep: bool,
        #[arg(long, allow_hyphen_values = true)]
        nr: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        nalpha: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        r: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Table of components of the maximal-τ moduli space for a genus.
    Moduli {
        #[arg(long, allow_hyphen_values = true)]
        genus: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Validate a config file and report every violation.
    Validate { config: PathBuf },
    /// Run a config file, with optional `key=value` overrides.
    Run { config: PathBuf, overrides: Vec<String> },
}

fn put(raw: &mut RawConfig, key: &str, value: &Option<String>) {
    if let Some(v) = value {
        raw.set(key, v.clone());
    }
}

fn put_common(raw: &mut RawConfig, c: &Common) {
    put(raw, "output", &c.output);
    put(raw, "format", &c.format);
}

fn put_field(raw: &mut RawConfig, f: &Field) {
    put(raw, "q", &f.q);
    put(raw, "qsq", &f.qsq);
    put(raw, "q_file", &f.q_file);
    put(raw, "refine", &f.refine);
    put(raw, "tol", &f.tol);
}

fn put_chart(raw: &mut RawConfig, c: &Chart) {
    put(raw, "data", &c.data);
    put(raw, "example", &c.example);
    put(raw, "grid_n", &c.grid_n);
    put(raw, "grid_half", &c.grid_half);
    put(raw, "mobius_a", &c.mobius_a);
    put(raw, "strip_q", &c.strip_q);
    put(raw, "strip_phi0", &c.strip_phi0);
}

fn put_flag(raw: &mut RawConfig, key: &str, on: bool) {
    if on {
        raw.set(key, "true");
    }
}

fn report(errors: &[ConfigError]) -> ExitCode {
    for e in errors {
        eprintln!("config error: {e}");
    }
    ExitCode::from(EXIT_USAGE as u8)
}

fn read_config(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_USAGE as u8)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut raw = RawConfig::default();
    match &cli.command {
        Cmd::Validate { config } => {
            let text = match read_config(config) {
                Ok(t) => t,
                Err(code) => return code,
            };
            return match config::validate(&text) {
                Ok(cfg) => {
                    eprintln!("config OK: {}", cfg.command.name());
                    ExitCode::SUCCESS
                }
                Err(errors) => report(&errors),
            };
        }
        Cmd::Run { config, overrides } => {
            let text = match read_config(config) {
                Ok(t) => t,
                Err(code) => return code,
            };
            raw = match RawConfig::parse(&text) {
                Ok(r) => r,
                Err(errors) => return report(&errors),
            };
            if let Err(errors) = raw.apply_overrides(overrides) {
                return report(&errors);
            }
        }
        Cmd::Mesh { refine, common } => {
            raw.set("command", "mesh");
            put(&mut raw, "refine", refine);
            put_common(&mut raw, common);
        }
        Cmd::Solve { field, t, common } => {
            raw.set("command", "solve");
            put_field(&mut raw, field);
            put(&mut raw, "t", t);
            put_common(&mut raw, common);
        }
        Cmd::Ray {
            field,
            t_max,
            step,
            common,
        } => {
            raw.set("command", "ray");
            put_field(&mut raw, field);
            put(&mut raw, "t_max", t_max);
            put(&mut raw, "step", step);
            put_common(&mut raw, common);
        }
        Cmd::TodaCheck {
            chart,
            perturb,
            seed,
            common,
        } => {
            raw.set("command", "toda-check");
            put_chart(&mut raw, chart);
            put(&mut raw, "perturb", perturb);
            put(&mut raw, "seed", seed);
            put_common(&mut raw, common);
        }
        Cmd::Holonomy {
            chart,
            center,
            radius,
            vertices,
            steps,
            analytic,
            common,
        } => {
            raw.set("command", "holonomy");
            put_chart(&mut raw, chart);
            put(&mut raw, "center", center);
            put(&mut raw, "radius", radius);
            put(&mut raw, "vertices", vertices);
            put(&mut raw, "steps", steps);
            put_flag(&mut raw, "analytic", *analytic);
            put_common(&mut raw, common);
        }
        Cmd::Expmap {
            q0,
            sweep,
            nr,
            nalpha,
            r,
            alpha,
            common,
        } => {
            raw.set("command", "expmap");
            put(&mut raw, "Q0", q0);
            put_flag(&mut raw, "sweep", *sweep);
            put(&mut raw, "nr", nr);
            put(&mut raw, "nalpha", nalpha);
            put(&mut raw, "r", r);
            put(&mut raw, "alpha", alpha);
            put_common(&mut raw, common);
        }
        Cmd::Moduli { genus, common } => {
            raw.set("command", "moduli");
            put(&mut raw, "genus", genus);
            put_common(&mut raw, common);
        }
    }
    let cfg = match config::validate_raw(&raw) {
        Ok(c) => c,
        Err(errors) => return report(&errors),
    };
    match commands::run(&cfg) {
        Ok(outcome) => {
            if cfg.output.is_none() {
                print!("{}", outcome.artifact);
            }
            eprintln!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
