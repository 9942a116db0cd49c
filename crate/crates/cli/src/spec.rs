use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use perishgood::equilibrium::{Initialization, Schedule, SolverConfig};
use perishgood::graph::{make_family, parse_edge_list, Graph, GraphFamily};
use perishgood::metrics::DEFAULT_Q_GRID;
use perishgood::numerics::ModelParams;

/// Flags shared by every subcommand. Each may also be given as `key=value`
/// in a `--spec` file, keyed by the flag name without dashes; flags win.
#[derive(Args, Debug, Clone, Default)]
pub struct SpecArgs {
    /// Flat `key=value` experiment file
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// empty, complete, cycle, star, complete_bipartite, circulant, d_regular_random, erdos_renyi
    #[arg(long)]
    pub graph_family: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Edge probability for erdos_renyi
    #[arg(long)]
    pub p: Option<f64>,
    /// Degree for circulant and d_regular_random
    #[arg(long)]
    pub degree: Option<usize>,
    /// Left part size for complete_bipartite (default n/2)
    #[arg(long)]
    pub left: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Edge-list file, one `source target` pair per line
    #[arg(long)]
    pub edge_list: Option<PathBuf>,
    /// Treat the edge list as directed (u v means u follows v)
    #[arg(long)]
    pub directed: bool,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Comma-separated shelf-lives
    #[arg(long)]
    pub tau_list: Option<String>,
    /// in_place or simultaneous
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Random restarts used to count distinct equilibria (0 disables)
    #[arg(long)]
    pub starts: Option<usize>,
    /// Comma-separated volume quantiles
    #[arg(long)]
    pub q: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json or csv
    #[arg(long)]
    pub format: Option<String>,
    /// Observation window in minutes
    #[arg(long)]
    pub window: Option<f64>,
    /// Post log, `timestamp<TAB>user<TAB>item` per line
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Comma-separated cost exponents for the threshold table
    #[arg(long)]
    pub alpha_list: Option<String>,
    /// Volumes file (one number per line) or equilibrium JSON
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Audience size, padding the volumes with zero contributors
    #[arg(long)]
    pub audience: Option<usize>,
}

const KEYS: [&str; 24] = [
    "graph-family",
    "n",
    "p",
    "degree",
    "left",
    "seed",
    "edge-list",
    "directed",
    "alpha",
    "theta",
    "tau",
    "tau-list",
    "schedule",
    "tol",
    "max-iter",
    "starts",
    "q",
    "out",
    "format",
    "window",
    "log",
    "alpha-list",
    "input",
    "audience",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Family { family: GraphFamily, seed: u64 },
    EdgeList { path: PathBuf, directed: bool },
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub graph: Option<GraphSource>,
    pub alpha: f64,
    pub theta: f64,
    pub taus: Vec<f64>,
    pub alpha_list: Vec<f64>,
    pub schedule: Schedule,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub starts: usize,
    pub seed: u64,
    pub qs: Vec<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub window: f64,
    pub log: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub audience: Option<usize>,
    /// The resolved values, as they would appear in a spec file.
    pub entries: BTreeMap<String, String>,
}

fn parse_spec_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading spec {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), k + 1);
        };
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            bail!("{}:{}: unknown key {key:?}", path.display(), k + 1);
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn overlay(args: &SpecArgs, map: &mut BTreeMap<String, String>) {
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    set("graph-family", args.graph_family.clone());
    set("n", args.n.map(|v| v.to_string()));
    set("p", args.p.map(|v| v.to_string()));
    set("degree", args.degree.map(|v| v.to_string()));
    set("left", args.left.map(|v| v.to_string()));
    set("seed", args.seed.map(|v| v.to_string()));
    set("edge-list", path(&args.edge_list));
    set("directed", args.directed.then(|| "true".to_string()));
    set("alpha", args.alpha.map(|v| v.to_string()));
    set("theta", args.theta.map(|v| v.to_string()));
    set("tau", args.tau.map(|v| v.to_string()));
    set("tau-list", args.tau_list.clone());
    set("schedule", args.schedule.clone());
    set("tol", args.tol.map(|v| v.to_string()));
    set("max-iter", args.max_iter.map(|v| v.to_string()));
    set("starts", args.starts.map(|v| v.to_string()));
    set("q", args.q.clone());
    set("out", path(&args.out));
    set("format", args.format.clone());
    set("window", args.window.map(|v| v.to_string()));
    set("log", path(&args.log));
    set("alpha-list", args.alpha_list.clone());
    set("input", path(&args.input));
    set("audience", args.audience.map(|v| v.to_string()));
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| anyhow::anyhow!("invalid value for {key}: {v:?}"))
        })
        .transpose()
}

fn list(map: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<f64>>> {
    map.get(key)
        .map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| anyhow::anyhow!("invalid number {s:?} in {key}"))
                })
                .collect()
        })
        .transpose()
}

fn render_list(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn family_from(map: &BTreeMap<String, String>, name: &str) -> Result<GraphFamily> {
    let n = get::<usize>(map, "n")?;
    let need_n = || n.ok_or_else(|| anyhow::anyhow!("graph family {name} needs --n"));
    let need_degree = || {
        get::<usize>(map, "degree")?
            .ok_or_else(|| anyhow::anyhow!("graph family {name} needs --degree"))
    };
    let family = match name.replace('-', "_").as_str() {
        "empty" => GraphFamily::Empty { n: need_n()? },
        "complete" => GraphFamily::Complete { n: need_n()? },
        "cycle" => GraphFamily::Cycle { n: need_n()? },
        "star" => GraphFamily::Star { n: need_n()? },
        "complete_bipartite" | "bipartite" => {
            let n = need_n()?;
            let left = get::<usize>(map, "left")?.unwrap_or(n / 2);
            if left > n {
                bail!("--left {left} exceeds --n {n}");
            }
            GraphFamily::CompleteBipartite {
                left,
                right: n - left,
            }
        }
        "circulant" => GraphFamily::Circulant {
            n: need_n()?,
            degree: need_degree()?,
        },
        "d_regular_random" | "regular_random" | "regular" => GraphFamily::RegularRandom {
            n: need_n()?,
            degree: need_degree()?,
        },
        "erdos_renyi" | "er" | "gnp" => GraphFamily::ErdosRenyi {
            n: need_n()?,
            p: get::<f64>(map, "p")?.ok_or_else(|| anyhow::anyhow!("erdos_renyi needs --p"))?,
        },
        other => bail!("unknown graph family {other:?}"),
    };
    Ok(family)
}

impl ExperimentSpec {
    pub fn resolve(args: &SpecArgs) -> Result<Self> {
        let mut map = match &args.spec {
            Some(path) => parse_spec_file(path)?,
            None => BTreeMap::new(),
        };
        overlay(args, &mut map);

        let mut entries = BTreeMap::new();
        let mut record = |k: &str, v: String| {
            entries.insert(k.to_string(), v);
        };
        let seed = get::<u64>(&map, "seed")?.unwrap_or(0);

        let graph = match (map.get("graph-family"), map.get("edge-list")) {
            (Some(_), Some(_)) => bail!("give either --graph-family or --edge-list, not both"),
            (Some(name), None) => {
                let family = family_from(&map, name)?;
                record("graph-family", family.name().to_string());
                match family {
                    GraphFamily::Empty { n }
                    | GraphFamily::Complete { n }
                    | GraphFamily::Cycle { n }
                    | GraphFamily::Star { n } => record("n", n.to_string()),
                    GraphFamily::CompleteBipartite { left, right } => {
                        record("n", (left + right).to_string());
                        record("left", left.to_string());
                    }
                    GraphFamily::Circulant { n, degree }
                    | GraphFamily::RegularRandom { n, degree } => {
                        record("n", n.to_string());
                        record("degree", degree.to_string());
                    }
                    GraphFamily::ErdosRenyi { n, p } => {
                        record("n", n.to_string());
                        record("p", p.to_string());
                    }
                }
                Some(GraphSource::Family { family, seed })
            }
            (None, Some(path)) => {
                let path = PathBuf::from(path);
                if !path.is_file() {
                    bail!("edge list {} not found", path.display());
                }
                let directed = get::<bool>(&map, "directed")?.unwrap_or(false);
                record("edge-list", path.display().to_string());
                record("directed", directed.to_string());
                Some(GraphSource::EdgeList { path, directed })
            }
            (None, None) => None,
        };

        let alpha = get::<f64>(&map, "alpha")?.unwrap_or(1.0);
        let theta = get::<f64>(&map, "theta")?.unwrap_or(1.0);
        ModelParams::new(alpha, theta, 1.0)?;
        record("alpha", alpha.to_string());
        record("theta", theta.to_string());

        let taus = match (get::<f64>(&map, "tau")?, list(&map, "tau-list")?) {
            (Some(_), Some(_)) => bail!("give either --tau or --tau-list, not both"),
            (Some(t), None) => vec![t],
            (None, Some(ts)) => ts,
            (None, None) => Vec::new(),
        };
        if let Some(t) = taus.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            bail!("shelf-life values must be > 0, got {t}");
        }
        if !taus.is_empty() {
            record("tau-list", render_list(&taus));
        }

        let alpha_list = list(&map, "alpha-list")?.unwrap_or_else(|| vec![alpha]);
        if alpha_list.is_empty() {
            bail!("--alpha-list is empty");
        }
        for &a in &alpha_list {
            ModelParams::new(a, 1.0, 1.0)?;
        }
        if map.contains_key("alpha-list") {
            record("alpha-list", render_list(&alpha_list));
        }

        let schedule = match map.get("schedule").map(|s| s.replace('-', "_")).as_deref() {
            None | Some("in_place") | Some("inplace") | Some("gauss_seidel") => Schedule::InPlace,
            Some("simultaneous") | Some("jacobi") => Schedule::Simultaneous,
            Some(other) => bail!("unknown schedule {other:?}"),
        };
        record(
            "schedule",
            match schedule {
                Schedule::InPlace => "in_place",
                Schedule::Simultaneous => "simultaneous",
            }
            .to_string(),
        );
        let defaults = SolverConfig::default();
        let tolerance = get::<f64>(&map, "tol")?.unwrap_or(defaults.tolerance);
        let max_iterations = get::<usize>(&map, "max-iter")?.unwrap_or(defaults.max_iterations);
        let starts = get::<usize>(&map, "starts")?.unwrap_or(0);
        record("tol", tolerance.to_string());
        record("max-iter", max_iterations.to_string());
        record("starts", starts.to_string());
        record("seed", seed.to_string());

        let qs = list(&map, "q")?.unwrap_or_else(|| DEFAULT_Q_GRID.to_vec());
        if qs.is_empty() {
            bail!("--q is empty");
        }
        if let Some(q) = qs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            bail!("quantiles must lie in (0, 1), got {q}");
        }
        record("q", render_list(&qs));

        let format = match map.get("format").map(String::as_str) {
            None | Some("json") => Format::Json,
            Some("csv") => Format::Csv,
            Some(other) => bail!("unknown format {other:?}"),
        };
        record(
            "format",
            match format {
                Format::Json => "json",
                Format::Csv => "csv",
            }
            .to_string(),
        );

        let window =
            get::<f64>(&map, "window")?.unwrap_or(perishgood::empirics::DEFAULT_WINDOW_MINUTES);
        if !(window.is_finite() && window > 0.0) {
            bail!("--window must be > 0, got {window}");
        }
        let log = map.get("log").map(PathBuf::from);
        if let Some(path) = &log {
            if !path.is_file() {
                bail!("post log {} not found", path.display());
            }
            record("log", path.display().to_string());
            record("window", window.to_string());
        }
        let input = map.get("input").map(PathBuf::from);
        if let Some(path) = &input {
            if !path.is_file() {
                bail!("input {} not found", path.display());
            }
            record("input", path.display().to_string());
        }
        let audience = get::<usize>(&map, "audience")?;
        if let Some(a) = audience {
            record("audience", a.to_string());
        }

        Ok(Self {
            graph,
            alpha,
            theta,
            taus,
            alpha_list,
            schedule,
            tolerance,
            max_iterations,
            starts,
            seed,
            qs,
            out: map.get("out").map(PathBuf::from),
            format,
            window,
            log,
            input,
            audience,
            entries,
        })
    }

    pub fn load_graph(&self) -> Result<Option<Graph>> {
        match &self.graph {
            None => Ok(None),
            Some(GraphSource::Family { family, seed }) => Ok(Some(make_family(family, *seed)?)),
            Some(GraphSource::EdgeList { path, directed }) => {
                let file =
                    fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                let override_ = directed.then_some(true);
                let loaded = parse_edge_list(std::io::BufReader::new(file), override_)
                    .with_context(|| format!("reading edge list {}", path.display()))?;
                Ok(Some(loaded.graph))
            }
        }
    }

    pub fn require_graph(&self) -> Result<Graph> {
        self.load_graph()?
            .ok_or_else(|| anyhow::anyhow!("no graph given: use --graph-family or --edge-list"))
    }

    pub fn params(&self, tau: f64) -> Result<ModelParams> {
        Ok(ModelParams::new(self.alpha, self.theta, tau)?)
    }

    pub fn single_tau(&self) -> Result<f64> {
        match self.taus.as_slice() {
            [t] => Ok(*t),
            [] => bail!("no shelf-life given: use --tau"),
            _ => bail!("this command takes a single --tau"),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            schedule: self.schedule,
            initialization: Initialization::Zeros,
            ..SolverConfig::default()
        }
    }

    /// The spec as a flat `key=value` document.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}
