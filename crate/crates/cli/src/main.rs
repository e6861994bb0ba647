use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use dpplocal::dpp::{self, DeterminantalSampler};
use dpplocal::experiments::{self, ExperimentConfig, FamilySpec};
use dpplocal::incidence::{Family, SignedBipartiteIncidence};
use dpplocal::limit;
use dpplocal::rootedtrees::{self, canonical_string};
use dpplocal::{rng, spectral};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Serialize)]
#[command(
    name = "dpplocal",
    version,
    about = "Local statistics of determinantal samples on bipartite incidence structures"
)]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Output file, written atomically; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Build a generator family and write its graph document or matrix.
    Generate {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Check simplicity, bi-regularity and C4-freeness.
    Validate {
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Eigenvalues of L⁻ (or L⁺) as CSV, plus a JSON summary.
    Spectral {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_enum, default_value_t = Operator::Lower)]
        operator: Operator,
        /// Defaults to d^(-1/2).
        #[arg(long)]
        eps: Option<f64>,
        /// Defaults to d^(-5/4).
        #[arg(long)]
        delta: Option<f64>,
        /// Where to write the JSON summary.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Draw samples of the determinantal measure on the row space.
    Sample {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Sample from the near-one eigenspace instead of the full row space.
        #[arg(long)]
        near_one: bool,
        /// Near-one threshold; defaults to d^(-1/2).
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_enum, default_value_t = Method::Kernel)]
        method: Method,
    },
    /// Exact radius-r ball law of the limit tree.
    TkDist {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        radius: usize,
        #[arg(long)]
        max_vertices: usize,
    },
    /// Sample balls of the limit tree.
    TkSample {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        radius: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Sample balls of the finite-d 1-out process.
    OneoutSample {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        radius: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// List valid trees with their limit masses.
    EnumerateTrees {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        radius: usize,
        #[arg(long)]
        max_vertices: usize,
    },
    /// Convergence table of empirical ball laws against the limit.
    Experiment {
        #[arg(long)]
        family: Family,
        /// Fixed parameters, e.g. `k=2` or `q=2,l=1`.
        #[arg(long, value_parser = parse_params, default_value = "")]
        params: BTreeMap<String, u64>,
        /// Values of the size parameter (`size` for colorful, `n` otherwise).
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        radius: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Uniform roots per sample; 0 scans every root.
        #[arg(long, default_value_t = 32)]
        roots: usize,
        #[arg(long, default_value_t = 41)]
        max_vertices: usize,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Summary CSV (size, tv, non_tree_fraction, structured_fraction).
        #[arg(long)]
        table: Option<PathBuf>,
        /// Directory for one distribution CSV per size.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
    },
    /// Every basis with positive mass, by brute force.
    Oracle {
        #[command(flatten)]
        graph: GraphArgs,
    },
}

#[derive(Args, Serialize)]
struct GraphArgs {
    /// Graph document produced by `generate`.
    #[arg(long, conflicts_with = "family")]
    graph: Option<PathBuf>,
    #[arg(long, required_unless_present = "graph")]
    family: Option<Family>,
    /// Generator parameters, e.g. `n=5,k=2`.
    #[arg(long, value_parser = parse_params, default_value = "")]
    params: BTreeMap<String, u64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Operator {
    Lower,
    Upper,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    /// Chain-rule sampler on |V| × |V| data.
    Kernel,
    /// Index-order sampler on an explicit basis of the subspace.
    Subspace,
}

fn parse_params(s: &str) -> std::result::Result<BTreeMap<String, u64>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) =
            part.split_once('=').ok_or_else(|| format!("expected key=value, got {part:?}"))?;
        let v: u64 =
            v.trim().parse().map_err(|_| format!("parameter {k} needs an integer value"))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

impl GraphArgs {
    fn load(&self) -> Result<SignedBipartiteIncidence> {
        match (&self.graph, self.family) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cli: cannot read {}", path.display()))?;
                Ok(SignedBipartiteIncidence::from_json(&text)?)
            }
            (None, Some(family)) => Ok(experiments::build_family(family, &self.params)?),
            (None, None) => bail!("cli: give --graph or --family"),
        }
    }
}

/// Destination for one output stream.
struct Output {
    meta: Value,
    body: String,
}

impl Output {
    fn new(meta: &Value) -> Self {
        Self { meta: meta.clone(), body: String::new() }
    }

    /// CSV: the metadata goes on a leading `#` comment line.
    fn csv(meta: &Value) -> Self {
        let mut o = Self::new(meta);
        writeln!(o.body, "# {}", o.meta).unwrap();
        o
    }

    /// Newline-delimited JSON: the first record is `{"meta": ...}`.
    fn ndjson(meta: &Value) -> Self {
        let mut o = Self::new(meta);
        writeln!(o.body, "{}", json!({ "meta": o.meta })).unwrap();
        o
    }

    /// A single JSON object with an added `meta` member.
    fn json_object(meta: &Value, mut doc: Value) -> Result<Self> {
        let obj = doc.as_object_mut().ok_or_else(|| anyhow!("cli: expected a JSON object"))?;
        obj.insert("meta".into(), meta.clone());
        let mut o = Self::new(meta);
        o.body = serde_json::to_string_pretty(&doc)?;
        o.body.push('\n');
        Ok(o)
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.body.push_str(s.as_ref());
        self.body.push('\n');
    }

    fn write_to(&self, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => write_atomic(p, &self.body),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(self.body.as_bytes())?;
                out.flush()?;
                Ok(())
            }
        }
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("cli: cannot create a file in {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| anyhow!("cli: cannot write {}: {}", path.display(), e.error))?;
    Ok(())
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

fn run(cli: &Cli) -> Result<()> {
    let meta = json!({
        "seed": cli.seed,
        "config": serde_json::to_value(&cli.command)?,
        "tool_version": TOOL_VERSION,
    });
    let out = cli.out.as_deref();
    let seed = cli.seed;
    match &cli.command {
        Command::Generate { graph, format } => {
            let g = graph.load()?;
            let o = match format {
                Format::Json => Output::json_object(&meta, serde_json::to_value(g.to_document())?)?,
                Format::Csv => {
                    let mut o = Output::csv(&meta);
                    o.body.push_str(&g.matrix_csv());
                    o
                }
            };
            o.write_to(out)
        }
        Command::Validate { graph } => {
            let g = graph.load()?;
            let report = g.validate();
            let doc = json!({
                "n": g.n(), "m": g.m(), "d": g.d(), "k": g.k(),
                "all_ok": report.all_ok(),
                "report": report,
            });
            Output::json_object(&meta, doc)?.write_to(out)
        }
        Command::Spectral { graph, operator, eps, delta, summary } => {
            let g = graph.load()?;
            let (e0, d0) = spectral::default_eps_delta(g.d());
            let (eps, delta) = (eps.unwrap_or(e0), delta.unwrap_or(d0));
            let (values, rank, structured) = match operator {
                Operator::Lower => {
                    let s = spectral::decompose(&g)?;
                    let st = spectral::structured_vertices(&s, eps, delta);
                    (s.eigenvalues().to_vec(), s.rank(), st)
                }
                Operator::Upper => {
                    let s = spectral::decompose_dual(&g)?;
                    let st = s.structured_vertices(&g, eps, delta);
                    (s.eigenvalues().to_vec(), s.rank(), st)
                }
            };
            let mut o = Output::csv(&meta);
            o.line("index,eigenvalue");
            for (i, l) in values.iter().enumerate() {
                o.line(format!("{i},{}", fmt_f64(*l)));
            }
            o.write_to(out)?;
            let doc = json!({
                "rank": rank,
                "trace_gap": spectral::trace_identity_gap(&g),
                "structured_count": structured.len(),
                "eps": eps,
                "delta": delta,
            });
            let s = Output::json_object(&meta, doc)?;
            match summary {
                Some(p) => s.write_to(Some(p)),
                None => {
                    eprint!("{}", s.body);
                    Ok(())
                }
            }
        }
        Command::Sample { graph, count, near_one, eps, method } => {
            let g = graph.load()?;
            let eps = eps.unwrap_or(spectral::default_eps_delta(g.d()).0);
            let mut o = Output::ndjson(&meta);
            let mut rng = rng::master(seed);
            let mut emit = |s: dpp::SampleSet| o.line(json!({ "members": s.members }).to_string());
            match method {
                Method::Kernel => {
                    let spec = spectral::decompose_dual(&g)?;
                    let kern =
                        if *near_one { spec.near_one_kernel(&g, eps) } else { spec.kernel(&g) };
                    for _ in 0..*count {
                        emit(kern.sample(&mut rng)?);
                    }
                }
                Method::Subspace => {
                    let s = spectral::decompose(&g)?;
                    let h = if *near_one {
                        spectral::near_one_subspace(&s, eps)
                    } else {
                        spectral::projection_subspace(&s)
                    };
                    for _ in 0..*count {
                        emit(dpp::sample(&h, &mut rng)?);
                    }
                }
            }
            o.write_to(out)
        }
        Command::TkDist { k, radius, max_vertices } => {
            let dist = limit::tk_distribution(*k, *radius, *max_vertices)?;
            let mut o = Output::csv(&meta);
            o.line("code,probability");
            for (code, p) in &dist.entries {
                o.line(format!("{code},{}", fmt_f64(*p)));
            }
            o.line(format!("residual,{}", fmt_f64(dist.residual)));
            o.write_to(out)
        }
        Command::TkSample { k, radius, count } => {
            let mut o = Output::csv(&meta);
            let mut rng = rng::master(seed);
            for _ in 0..*count {
                o.line(canonical_string(&limit::sample_tk_ball(*k, *radius, &mut rng)?));
            }
            o.write_to(out)
        }
        Command::OneoutSample { k, d, radius, count } => {
            let mut o = Output::csv(&meta);
            let mut rng = rng::master(seed);
            for _ in 0..*count {
                o.line(canonical_string(&limit::sample_one_out_ball(*k, *d, *radius, &mut rng)?));
            }
            o.write_to(out)
        }
        Command::EnumerateTrees { k, radius, max_vertices } => {
            let trees = rootedtrees::enumerate_valid_trees(*k, *radius, *max_vertices)?;
            let mut o = Output::csv(&meta);
            o.line("code,vertices,aut_size,matching_count,mass");
            for t in &trees {
                let (_, _, inner) = rootedtrees::parts(t);
                o.line(format!(
                    "{},{},{},{},{}",
                    canonical_string(t),
                    t.len(),
                    rootedtrees::aut_size(t)?,
                    rootedtrees::matching_count(t, &inner)?,
                    fmt_f64(limit::tk_ball_mass(t, *k)?)
                ));
            }
            o.write_to(out)
        }
        Command::Experiment {
            family,
            params,
            sizes,
            k,
            radius,
            samples,
            roots,
            max_vertices,
            eps,
            delta,
            table,
            dump_dir,
        } => {
            let eps_delta = match (eps, delta) {
                (Some(e), Some(d)) => Some((*e, *d)),
                (None, None) => None,
                _ => bail!("cli: give both --eps and --delta or neither"),
            };
            let spec = FamilySpec::new(*family, params.clone());
            let cfg = ExperimentConfig {
                k: *k,
                radius: *radius,
                samples: *samples,
                roots_per_sample: *roots,
                max_vertices: *max_vertices,
                seed,
                eps_delta,
            };
            let report = experiments::convergence_experiment(&spec, sizes, &cfg)?;
            if let Some(dir) = dump_dir {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("cli: cannot create {}", dir.display()))?;
                for row in &report.rows {
                    let mut o = Output::csv(&meta);
                    o.line("code,probability");
                    for (code, p) in &row.distribution.entries {
                        o.line(format!("{code},{}", fmt_f64(*p)));
                    }
                    o.line(format!("residual,{}", fmt_f64(row.distribution.residual)));
                    o.write_to(Some(&dir.join(format!("distribution_{}.csv", row.size))))?;
                }
            }
            if let Some(path) = table {
                let mut o = Output::csv(&meta);
                o.line("size,tv,non_tree_fraction,structured_fraction");
                for row in &report.rows {
                    o.line(format!(
                        "{},{},{},{}",
                        row.size,
                        fmt_f64(row.tv_to_limit),
                        fmt_f64(row.non_tree_fraction),
                        fmt_f64(row.structured_hit_fraction)
                    ));
                }
                o.write_to(Some(path))?;
            }
            Output::json_object(&meta, serde_json::to_value(&report)?)?.write_to(out)
        }
        Command::Oracle { graph } => {
            let g = graph.load()?;
            let h = spectral::projection_subspace(&spectral::decompose(&g)?);
            let mut o = Output::ndjson(&meta);
            for (s, p) in dpp::enumerate_all(&h)? {
                o.line(json!({ "members": s.members, "probability": p }).to_string());
            }
            o.write_to(out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global() {
        log::warn!("thread pool: {e}");
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
