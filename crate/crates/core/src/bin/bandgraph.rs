//! Command-line front end: graph I/O, the builtin catalog, spectra,
//! perturbations, limit graphs, isospectrality checks and band-edge
//! asymptotics.
//!
//! Exit codes: 0 on success, 1 on domain/validation failures (bad graph
//! files, dimension mismatches, refused assumptions), 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bandgraph::analysis::{self, EdgeComparison};
use bandgraph::bands::{self, EdgeKind, GridSpec};
use bandgraph::graph::{self, FundamentalGraph, PerturbationSpec};

#[derive(Parser)]
#[command(name = "bandgraph", version, about = "Band spectra of periodic graphs")]
struct Cli {
    /// Worker threads for grid sweeps (default: available parallelism).
    /// Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GraphSource {
    /// Graph file in the JSON format.
    graph: Option<PathBuf>,

    /// Builtin graph: lattice:<d>, line2, hexagonal, hex-limit, line2-limit.
    #[arg(long, conflicts_with = "graph")]
    builtin: Option<String>,

    /// Potential parameter q for the builtins that take one.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
}

#[derive(Args)]
struct GridArgs {
    /// Grid points per torus dimension (minimum 8; default depends on the
    /// graph dimension).
    #[arg(long)]
    grid: Option<usize>,

    /// Function-value tolerance of the local refinement.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,

    /// Iteration cap per refinement run.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

#[derive(Args)]
struct PerturbArgs {
    /// Start vertex of the added edge (default: first vertex).
    #[arg(long)]
    from: Option<String>,

    /// End vertex of the added edge (default: first vertex).
    #[arg(long)]
    to: Option<String>,

    /// Index vector of the added edge, comma-separated integers.
    #[arg(long, allow_hyphen_values = true)]
    index: String,
}

#[derive(Subcommand)]
enum Command {
    /// Band edges, flat-band flags and the merged spectrum.
    Spectrum {
        #[command(flatten)]
        source: GraphSource,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Add one edge to the fundamental graph and write the result.
    Perturb {
        #[command(flatten)]
        source: GraphSource,
        #[command(flatten)]
        perturbation: PerturbArgs,
        /// Output graph file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build the (d+1)-dimensional limit graph of a perturbed graph.
    Limit {
        #[command(flatten)]
        source: GraphSource,
        /// Ordinal of the added edge (default: the last edge).
        #[arg(long)]
        edge: Option<usize>,
        /// Output graph file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Tabulate all band functions over a regular grid as CSV.
    Dispersion {
        #[command(flatten)]
        source: GraphSource,
        /// Grid points per torus dimension.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Output CSV file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact-isospectrality criterion for a perturbation against its limit graph.
    Isospectral {
        #[command(flatten)]
        source: GraphSource,
        #[command(flatten)]
        perturbation: PerturbArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Direct vs predicted band edges along a sequence of added-edge indices.
    Asymptotics {
        #[command(flatten)]
        source: GraphSource,
        /// Start vertex of the added edge (default: first vertex).
        #[arg(long)]
        from: Option<String>,
        /// End vertex of the added edge (default: first vertex).
        #[arg(long)]
        to: Option<String>,
        /// Index sequence: `20,40,80` for 1-dimensional graphs, or
        /// `(6,8),(12,16),(24,32)` in general.
        #[arg(long = "t-sequence", allow_hyphen_values = true)]
        t_sequence: String,
        /// 1-based band index.
        #[arg(long, default_value_t = 1)]
        band: usize,
        /// Which band edge to track: min or max.
        #[arg(long, default_value = "max")]
        kind: String,
        #[command(flatten)]
        grid: GridArgs,
        /// Output CSV file for the convergence table.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

enum CliError {
    /// Flag-level problems: exit code 2.
    Usage(String),
    /// Domain/validation problems: exit code 1.
    Domain(String),
}

impl From<bandgraph::Error> for CliError {
    fn from(e: bandgraph::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        // Ignore failures: the global pool may already exist under tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Spectrum { source, grid } => cmd_spectrum(source, grid),
        Command::Perturb {
            source,
            perturbation,
            output,
        } => cmd_perturb(source, perturbation, &output),
        Command::Limit {
            source,
            edge,
            output,
        } => cmd_limit(source, edge, &output),
        Command::Dispersion { source, grid, out } => cmd_dispersion(source, grid, out.as_deref()),
        Command::Isospectral {
            source,
            perturbation,
            grid,
        } => cmd_isospectral(source, perturbation, grid),
        Command::Asymptotics {
            source,
            from,
            to,
            t_sequence,
            band,
            kind,
            grid,
            output,
        } => cmd_asymptotics(
            source,
            from,
            to,
            &t_sequence,
            band,
            &kind,
            grid,
            output.as_deref(),
        ),
    }
}

fn load_graph(source: &GraphSource) -> CliResult<FundamentalGraph> {
    match (&source.graph, &source.builtin) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Domain(format!("cannot read graph file {}: {e}", path.display()))
            })?;
            FundamentalGraph::from_json(&text).map_err(|e| {
                CliError::Domain(format!("invalid graph file {}: {e}", path.display()))
            })
        }
        (None, Some(name)) => Ok(graph::builtin(name, source.q)?),
        (None, None) => Err(CliError::Usage(
            "provide a graph file or --builtin <name>".into(),
        )),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn grid_spec(args: &GridArgs, dimension: usize) -> CliResult<GridSpec> {
    let default = GridSpec::default_for(dimension);
    let n = args.grid.unwrap_or(default.points_per_dim);
    if n < 8 {
        return Err(CliError::Usage(format!(
            "--grid must be at least 8, got {n}"
        )));
    }
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    if args.max_iter == 0 {
        return Err(CliError::Usage("--max-iter must be positive".into()));
    }
    Ok(GridSpec::new(n, args.tol, args.max_iter)?)
}

fn parse_index(text: &str) -> CliResult<Vec<i64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<i64>()
                .map_err(|_| CliError::Usage(format!("bad index component `{s}`")))
        })
        .collect()
}

fn parse_t_sequence(text: &str) -> CliResult<Vec<Vec<i64>>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(CliError::Usage("empty --t-sequence".into()));
    }
    if text.contains('(') {
        let mut out = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find('(') {
            let close = rest[open..]
                .find(')')
                .ok_or_else(|| CliError::Usage("unbalanced parenthesis in --t-sequence".into()))?
                + open;
            out.push(parse_index(&rest[open + 1..close])?);
            rest = &rest[close + 1..];
        }
        if out.is_empty() {
            return Err(CliError::Usage("no tuples in --t-sequence".into()));
        }
        Ok(out)
    } else {
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<i64>()
                    .map(|t| vec![t])
                    .map_err(|_| CliError::Usage(format!("bad t value `{s}`")))
            })
            .collect()
    }
}

fn perturbation_spec(
    g: &FundamentalGraph,
    from: Option<String>,
    to: Option<String>,
    index: &str,
) -> CliResult<PerturbationSpec> {
    let first = g.vertices()[0].id.clone();
    Ok(PerturbationSpec {
        v1: from.unwrap_or_else(|| first.clone()),
        v2: to.unwrap_or(first),
        index: parse_index(index)?,
    })
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_k(k: &[f64]) -> String {
    let parts: Vec<String> = k.iter().map(|&x| format!("{x:.8}")).collect();
    format!("({})", parts.join(", "))
}

fn cmd_spectrum(source: GraphSource, grid: GridArgs) -> CliResult<()> {
    let g = load_graph(&source)?;
    let spec = grid_spec(&grid, g.dimension())?;
    let st = bands::spectrum(&g, &spec)?;
    println!("# {}", g.summary());
    println!("band,min,max,flat");
    for b in &st.bands {
        println!(
            "{},{},{},{}",
            b.band,
            fmt(b.min),
            fmt(b.max),
            if b.flat { "yes" } else { "no" }
        );
        if b.grid_coarse {
            eprintln!(
                "warning: band {} refinement moved beyond one grid cell; consider a finer --grid",
                b.band
            );
        }
    }
    let intervals: Vec<String> = st
        .spectrum
        .iter()
        .map(|(a, b)| format!("[{}, {}]", fmt(*a), fmt(*b)))
        .collect();
    println!("spectrum: {}", intervals.join(" U "));
    Ok(())
}

fn cmd_perturb(source: GraphSource, args: PerturbArgs, output: &Path) -> CliResult<()> {
    let g = load_graph(&source)?;
    let p = perturbation_spec(&g, args.from, args.to, &args.index)?;
    let gt = g.perturb(&p)?;
    gt.write_file(output)
        .map_err(|e| CliError::Domain(format!("cannot write {}: {e}", output.display())))?;
    println!(
        "wrote {} ({}; added edge {} -> {} with index {:?})",
        output.display(),
        gt.summary(),
        p.v1,
        p.v2,
        p.index
    );
    Ok(())
}

fn cmd_limit(source: GraphSource, edge: Option<usize>, output: &Path) -> CliResult<()> {
    let g = load_graph(&source)?;
    if g.edges().is_empty() {
        return Err(CliError::Domain("graph has no edges to lift".into()));
    }
    let ordinal = edge.unwrap_or(g.edges().len() - 1);
    let lim = g.lift_to_limit(ordinal)?;
    lim.write_file(output)
        .map_err(|e| CliError::Domain(format!("cannot write {}: {e}", output.display())))?;
    println!("wrote {} ({})", output.display(), lim.summary());
    Ok(())
}

fn cmd_dispersion(source: GraphSource, grid: usize, out: Option<&Path>) -> CliResult<()> {
    if grid == 0 {
        return Err(CliError::Usage("--grid must be at least 1".into()));
    }
    let g = load_graph(&source)?;
    let table = bands::dispersion_table(&g, grid)?;
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Domain(format!("cannot write {}: {e}", path.display())))?;
            table
                .write_csv(std::io::BufWriter::new(file))
                .map_err(|e| CliError::Domain(format!("cannot write {}: {e}", path.display())))?;
            println!("wrote {} ({} rows)", path.display(), table.rows.len());
        }
        None => {
            let stdout = std::io::stdout();
            table
                .write_csv(stdout.lock())
                .map_err(|e| CliError::Domain(format!("cannot write CSV: {e}")))?;
        }
    }
    Ok(())
}

fn edge_label(e: &EdgeComparison) -> String {
    format!("band {} {}", e.band, e.kind)
}

fn cmd_isospectral(source: GraphSource, args: PerturbArgs, grid: GridArgs) -> CliResult<()> {
    let g = load_graph(&source)?;
    let p = perturbation_spec(&g, args.from, args.to, &args.index)?;
    let added = g.edges().len();
    let g_t = g.perturb(&p)?;
    let g_lim = g_t.lift_to_limit(added)?;
    let spec = grid_spec(&grid, g_lim.dimension())?;
    let report = analysis::check_isospectral(&g_t, &g_lim, &p.index, &spec)?;
    println!("# perturbed: {}", g_t.summary());
    println!("# limit:     {}", g_lim.summary());
    for e in &report.edges {
        let witness = match (&e.check.witness, e.check.coincides) {
            (Some(w), true) => format!(
                "witness {} residual {:.2e}",
                fmt_k(w.components()),
                e.check.residual
            ),
            _ => format!("no witness (best residual {:.2e})", e.check.residual),
        };
        println!(
            "{}: limit {} direct {} |diff| {:.2e} {} => {}",
            edge_label(e),
            fmt(e.limit_edge),
            fmt(e.direct_edge),
            e.deviation,
            witness,
            if e.coincident { "coincides" } else { "differs" }
        );
        if e.level_set_degenerate {
            println!(
                "{}: level set is degenerate (extended extremum set)",
                edge_label(e)
            );
        }
    }
    println!(
        "{}",
        if report.isospectral {
            "ISOSPECTRAL"
        } else {
            "NOT ISOSPECTRAL"
        }
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_asymptotics(
    source: GraphSource,
    from: Option<String>,
    to: Option<String>,
    t_sequence: &str,
    band: usize,
    kind: &str,
    grid: GridArgs,
    output: Option<&Path>,
) -> CliResult<()> {
    let ts = parse_t_sequence(t_sequence)?;
    let kind = match kind {
        "min" => EdgeKind::Min,
        "max" => EdgeKind::Max,
        other => {
            return Err(CliError::Usage(format!(
                "--kind must be min or max, got `{other}`"
            )))
        }
    };
    let g = load_graph(&source)?;
    let spec = grid_spec(&grid, g.dimension())?;
    let first = g.vertices()[0].id.clone();
    let v1 = from.unwrap_or_else(|| first.clone());
    let v2 = to.unwrap_or(first);
    let study = analysis::convergence_study(&g, &v1, &v2, band, kind, &ts, &spec)?;
    println!(
        "# band {} {} ; limit edge {}",
        study.band,
        study.kind,
        fmt(study.limit_edge)
    );
    println!("t_norm,direct,predicted,residual");
    for r in &study.rows {
        println!(
            "{},{},{},{}",
            fmt(r.t_norm),
            fmt(r.direct),
            fmt(r.predicted),
            fmt(r.residual)
        );
    }
    match study.slope {
        Some(s) => println!("# log-log residual slope: {s:.3}"),
        None => println!("# log-log residual slope: n/a (fewer than two rows above noise floor)"),
    }
    if let Some(path) = output {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Domain(format!("cannot write {}: {e}", path.display())))?;
        study
            .write_csv(std::io::BufWriter::new(file))
            .map_err(|e| CliError::Domain(format!("cannot write {}: {e}", path.display())))?;
        println!("# wrote {}", path.display());
    }
    Ok(())
}
