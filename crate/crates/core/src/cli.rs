//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 search budget exhausted,
//! 3 inconclusive dichotomy verdict, 4 domain error (a request the
//! mathematics rules out, such as acting on too small a radius), 5 a
//! verification check found a counterexample.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cantor::{dichotomy_report, DichotomyConfig, Verdict, DEFAULT_ITERATIONS, DEFAULT_WINDOW};
use crate::dynamics::{lift_depth, orbits_at_level, DynamicsError};
use crate::groups::{GroupCtx, GroupElement};
use crate::orderspace::{
    build_tree, oracle_enumerate, SearchConfig, SearchError, DEFAULT_NODE_LIMIT, DEFAULT_ORACLE_CAP,
};
use crate::properties::{run_properties, PropertyError};
use crate::subgroups::{restrict_order, subgroup_ball, SubgroupError, SubgroupSpec};
use crate::SCHEMA_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  1  usage error (bad flags, unknown group, unparsable element)
  2  search budget or oracle cap exhausted
  3  dichotomy verdict INCONCLUSIVE
  4  domain error (radius too small for the requested operation, ...)
  5  a verification found a counterexample";

#[derive(Debug, Parser)]
#[command(
    name = "leftorders",
    version,
    about = "Enumerate and analyse finite-radius approximations of spaces of left orders",
    after_help = EXIT_HELP
)]
pub struct Cli {
    #[command(flatten)]
    pub budgets: BudgetArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Worker threads; output does not depend on it
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
    /// Maximum search decisions per enumeration
    #[arg(long, global = true, default_value_t = DEFAULT_NODE_LIMIT, value_parser = clap::value_parser!(u64).range(1..))]
    pub node_limit: u64,
    /// Maximum number of candidate sign vectors the brute-force oracle may scan
    #[arg(long, global = true, default_value_t = DEFAULT_ORACLE_CAP, value_parser = clap::value_parser!(u64).range(1..))]
    pub oracle_cap: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Dot,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count admissible cones on each ball up to a radius
    Enumerate {
        /// Group: 1, C<n>, S3, Z, Z^<d>, F<k>, KB or H3
        #[arg(long)]
        group: String,
        #[arg(long)]
        radius: u32,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// List every cone in table output
        #[arg(long)]
        cones: bool,
        /// Cross-check the last level against the brute-force oracle
        #[arg(long)]
        oracle: bool,
    },
    /// Finite-horizon evidence for a finite or a perfect order space
    Dichotomy {
        #[arg(long)]
        group: String,
        /// Depth of the explicitly built tree
        #[arg(long)]
        radius: u32,
        /// Radius at which extensions are counted
        #[arg(long)]
        horizon: u32,
        /// Levels of constant count required for finite evidence
        #[arg(long, default_value_t = DEFAULT_WINDOW, value_parser = clap::value_parser!(u32).range(1..))]
        window: u32,
        /// Derivative iterations reported
        #[arg(long, default_value_t = DEFAULT_ITERATIONS, value_parser = clap::value_parser!(u32).range(1..))]
        iterations: u32,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Orbits of the conjugation action on the nodes of one level
    Orbits {
        #[arg(long)]
        group: String,
        #[arg(long)]
        level: u32,
        /// Comma-separated acting elements [default: the group generators]
        #[arg(long)]
        generators: Option<String>,
        /// Depth of the tree used to lift the action [default: smallest exact depth]
        #[arg(long)]
        tree_radius: Option<u32>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Restrict every cone of a level to a subgroup ball
    Restrict {
        #[arg(long)]
        group: String,
        /// Comma-separated subgroup generators, e.g. "e1" or "a*b"
        #[arg(long)]
        subgroup: String,
        #[arg(long)]
        radius: u32,
        #[arg(long)]
        subradius: u32,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Write the prefix tree as JSON or DOT
    Export {
        #[arg(long)]
        group: String,
        #[arg(long)]
        radius: u32,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Seeded randomized property checks on sampled cones
    Verify {
        #[arg(long)]
        group: String,
        #[arg(long)]
        radius: u32,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

/// Everything a command needs besides its own positional knobs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub group: GroupCtx,
    pub radius: u32,
    pub horizon: Option<u32>,
    pub search: SearchConfig,
    pub format: Format,
    pub seed: Option<u64>,
}

impl RunConfig {
    fn new(
        budgets: &BudgetArgs,
        group: &str,
        radius: u32,
        horizon: Option<u32>,
        format: Format,
        allowed: &[Format],
    ) -> Result<Self, CliError> {
        let group = group
            .parse::<GroupCtx>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(h) = horizon {
            if h < radius {
                return Err(CliError::Usage(format!(
                    "horizon {h} must be at least the radius {radius}"
                )));
            }
        }
        if !allowed.contains(&format) {
            let name = format.to_possible_value().expect("no skipped variants");
            return Err(CliError::Usage(format!(
                "format `{}` is not available for this command",
                name.get_name()
            )));
        }
        Ok(RunConfig {
            group,
            radius,
            horizon,
            search: SearchConfig {
                node_limit: budgets.node_limit,
                oracle_cap: budgets.oracle_cap,
                jobs: budgets.jobs as usize,
            },
            format,
            seed: None,
        })
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Budget(String),
    Domain(String),
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Budget(_) => EXIT_BUDGET,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Budget(m) | CliError::Domain(m) | CliError::CheckFailed(m) => m,
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::BudgetExceeded { .. } | SearchError::OracleCapExceeded { .. } => {
                CliError::Budget(e.to_string())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Search(s) => s.into(),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<SubgroupError> for CliError {
    fn from(e: SubgroupError) -> Self {
        match e {
            SubgroupError::Search(s) => s.into(),
            SubgroupError::Group(g) => CliError::Usage(g.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("write failed: {e}"))
    }
}

fn json_line(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

fn parse_elements(ctx: &GroupCtx, text: &str) -> Result<Vec<GroupElement>, CliError> {
    text.split(',')
        .map(|w| ctx.parse_element(w.trim()).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

/// Runs one command, returning the text for standard output and the exit code.
fn execute(cli: &Cli) -> Result<(String, i32), CliError> {
    let b = &cli.budgets;
    match &cli.command {
        Command::Enumerate {
            group,
            radius,
            format,
            cones,
            oracle,
        } => {
            let cfg = RunConfig::new(b, group, *radius, None, *format, &[Format::Table, Format::Json])?;
            let tree = build_tree(&cfg.group, cfg.radius, &cfg.search)?;
            let last = tree.level_cones(cfg.radius)?;
            let mut out = String::new();
            if cfg.format == Format::Json {
                let docs: Vec<serde_json::Value> = last.iter().map(|c| c.to_json()).collect();
                out = json_line(&serde_json::Value::Array(docs));
            } else {
                for (r, level) in tree.levels().iter().enumerate() {
                    out += &format!("radius {r}: {} cones\n", level.len());
                }
                if *cones {
                    for node in tree.level(cfg.radius)? {
                        out += &format!("  {} {}\n", node.id, node.cone.signs_string());
                    }
                }
            }
            if *oracle {
                let reference = oracle_enumerate(&cfg.group, cfg.radius, cfg.search.oracle_cap)?;
                if reference != last {
                    return Err(CliError::CheckFailed(format!(
                        "oracle found {} cones at radius {}, search found {}",
                        reference.len(),
                        cfg.radius,
                        last.len()
                    )));
                }
                if cfg.format == Format::Table {
                    out += &format!("oracle: agrees at radius {}\n", cfg.radius);
                }
            }
            Ok((out, EXIT_OK))
        }
        Command::Dichotomy {
            group,
            radius,
            horizon,
            window,
            iterations,
            format,
        } => {
            let cfg = RunConfig::new(b, group, *radius, Some(*horizon), *format, &[Format::Table, Format::Json])?;
            let config = DichotomyConfig {
                radius: cfg.radius,
                horizon: *horizon,
                window: *window,
                iterations: *iterations,
                search: cfg.search,
            };
            let report = dichotomy_report(&cfg.group, &config).map_err(|e| CliError::Domain(e.to_string()))?;
            let out = match cfg.format {
                Format::Json => json_line(&report.to_json()),
                _ => report.to_table(),
            };
            let code = if report.verdict == Verdict::Inconclusive {
                EXIT_INCONCLUSIVE
            } else {
                EXIT_OK
            };
            Ok((out, code))
        }
        Command::Orbits {
            group,
            level,
            generators,
            tree_radius,
            format,
        } => {
            let cfg = RunConfig::new(b, group, *level, None, *format, &[Format::Table, Format::Json])?;
            let ctx = &cfg.group;
            let gens = match generators {
                Some(text) => parse_elements(ctx, text)?,
                None => ctx.generators().to_vec(),
            };
            let depth = match tree_radius {
                Some(d) if *d < *level => {
                    return Err(CliError::Usage(format!(
                        "tree radius {d} is below the level {level}"
                    )))
                }
                Some(d) => *d,
                None => {
                    let limit = level.saturating_mul(4).saturating_add(16);
                    lift_depth(ctx, *level, &gens, limit)
                        .map_err(|e| CliError::Usage(e.to_string()))?
                        .unwrap_or(*level)
                }
            };
            let tree = build_tree(ctx, depth, &cfg.search)?;
            let partition = orbits_at_level(&tree, *level, &gens)?;
            let out = if cfg.format == Format::Json {
                json_line(&partition.to_json(&tree))
            } else {
                let nodes = tree.level(*level)?;
                let mut s = format!("level {level}: {} orbits (tree radius {depth})\n", partition.orbits.len());
                for (i, orbit) in partition.orbits.iter().enumerate() {
                    let ids: Vec<&str> = orbit.iter().map(|&n| nodes[n].id.as_str()).collect();
                    s += &format!("orbit {i}: {}\n", ids.join(" "));
                }
                s += &format!("caveats: {}\n", partition.caveats.len());
                s
            };
            Ok((out, EXIT_OK))
        }
        Command::Restrict {
            group,
            subgroup,
            radius,
            subradius,
            format,
        } => {
            let cfg = RunConfig::new(b, group, *radius, None, *format, &[Format::Table, Format::Json])?;
            let ctx = &cfg.group;
            let spec = SubgroupSpec::new(ctx, parse_elements(ctx, subgroup)?)?;
            let tree = build_tree(ctx, cfg.radius, &cfg.search)?;
            let mut restricted = Vec::new();
            for node in tree.level(cfg.radius)? {
                restricted.push((node.id.clone(), restrict_order(&node.cone, &spec, *subradius)?));
            }
            let out = if cfg.format == Format::Json {
                let mut words = serde_json::Map::new();
                for e in subgroup_ball(&spec, *subradius) {
                    if !e.element.is_identity() {
                        words.insert(ctx.format_element(&e.element), e.word.to_string().into());
                    }
                }
                let nodes: Vec<serde_json::Value> = restricted
                    .iter()
                    .map(|(id, r)| serde_json::json!({"id": id, "signs": r.to_json()["signs"]}))
                    .collect();
                let gens: Vec<String> = spec.generators().iter().map(|g| ctx.format_element(g)).collect();
                json_line(&serde_json::json!({
                    "schema_version": SCHEMA_VERSION,
                    "group": ctx.to_string(),
                    "subgroup": gens,
                    "radius": cfg.radius,
                    "subradius": subradius,
                    "words": words,
                    "nodes": nodes,
                }))
            } else {
                let mut s = String::new();
                for (id, r) in &restricted {
                    let entries: Vec<String> = r
                        .elements()
                        .iter()
                        .zip(r.signs())
                        .map(|(g, sign)| format!("{}:{}", ctx.format_element(g), sign))
                        .collect();
                    s += &format!("{id} {}\n", entries.join(" "));
                }
                s
            };
            Ok((out, EXIT_OK))
        }
        Command::Export { group, radius, format } => {
            let cfg = RunConfig::new(b, group, *radius, None, *format, &[Format::Json, Format::Dot])?;
            let tree = build_tree(&cfg.group, cfg.radius, &cfg.search)?;
            let out = match cfg.format {
                Format::Dot => tree.to_dot(),
                _ => json_line(&tree.to_json()),
            };
            Ok((out, EXIT_OK))
        }
        Command::Verify {
            group,
            radius,
            cases,
            seed,
            format,
        } => {
            let mut cfg = RunConfig::new(b, group, *radius, None, *format, &[Format::Table, Format::Json])?;
            cfg.seed = Some(*seed);
            let outcomes = run_properties(&cfg.group, cfg.radius, *cases, *seed, cfg.search.node_limit)
                .map_err(|e| match e {
                    PropertyError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
                    _ => CliError::Domain(e.to_string()),
                })?;
            let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.name).collect();
            let out = if cfg.format == Format::Json {
                json_line(&serde_json::json!({
                    "schema_version": SCHEMA_VERSION,
                    "group": cfg.group.to_string(),
                    "radius": cfg.radius,
                    "seed": seed,
                    "properties": outcomes,
                }))
            } else {
                let mut s = String::new();
                for o in &outcomes {
                    let status = if o.passed() { "ok" } else { "FAILED" };
                    s += &format!("{:<32} {:>6} cases  {status}\n", o.name, o.cases);
                    if let Some(f) = &o.first_failure {
                        s += &format!("  first counterexample: {f}\n");
                    }
                }
                s
            };
            if failed.is_empty() {
                Ok((out, EXIT_OK))
            } else {
                Err(CliError::CheckFailed(format!("{out}failed: {}", failed.join(", "))))
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(&cli) {
        Ok((text, code)) => match out.write_all(text.as_bytes()) {
            Ok(()) => code,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_DOMAIN
            }
        },
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}
