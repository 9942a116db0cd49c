use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;

use anyhow::{bail, Context, Result};
use perishgood::empirics::{
    article_concentration, classify_first_posts, domain_of, originator_concentration_labeled,
    parse_post_log, shelf_life, write_labels_csv, ConcentrationMode, FirstPostLabel, PostEvent,
};
use perishgood::equilibrium::{
    certify_uniqueness, multi_start, solve, tau_hat, EquilibriumResult, MultiStartReport,
};
use perishgood::graph::{closed_form_lambda_min, min_eigenvalue, DegreeKind, Graph};
use perishgood::metrics::{
    concentration_summary, degree_effort_correlation, lorenz, ConcentrationSummary,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::output::{
    csv_document, json_document, json_number, number, print, write_file, write_spec,
};
use crate::spec::{ExperimentSpec, Format};

/// How a command finished when it did not hit an input error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    NotConverged,
}

fn node_ids(graph: &Graph) -> Vec<String> {
    (0..graph.node_count()).map(|i| graph.node_id(i)).collect()
}

fn multi_start_json(report: &MultiStartReport) -> Value {
    json!({
        "seed": report.seed,
        "distinct_equilibria": report.distinct_equilibria(),
        "cluster_sizes": report.clusters.iter().map(|c| c.size()).collect::<Vec<_>>(),
        "non_converged_starts": report.non_converged,
        "representatives": report.clusters.iter().map(|c| c.representative.profile.as_slice()).collect::<Vec<_>>(),
    })
}

fn summary_json(summary: &ConcentrationSummary) -> Value {
    serde_json::to_value(summary).unwrap_or(Value::Null)
}

fn originators_rows(summary: &ConcentrationSummary) -> Vec<String> {
    summary
        .q_volume_originators
        .iter()
        .map(|o| format!("{},{}", o.q, o.fraction))
        .collect()
}

fn lorenz_rows(volumes: &[f64], audience: usize) -> Result<Vec<String>> {
    Ok(lorenz(volumes, audience)?
        .points
        .iter()
        .map(|(x, s)| format!("{x},{s}"))
        .collect())
}

fn run_multi_start(
    graph: &Graph,
    spec: &ExperimentSpec,
    tau: f64,
) -> Result<Option<MultiStartReport>> {
    if spec.starts == 0 {
        return Ok(None);
    }
    let report = multi_start(
        graph,
        &spec.params(tau)?,
        spec.starts,
        spec.seed,
        &spec.solver_config(),
    )?;
    Ok(Some(report))
}

pub fn cmd_solve(spec: &ExperimentSpec) -> Result<Status> {
    let graph = spec.require_graph()?;
    let tau = spec.single_tau()?;
    let params = spec.params(tau)?;
    let result = solve(&graph, &params, &spec.solver_config())?;
    let certificate = certify_uniqueness(&graph, &params)?;
    let starts = run_multi_start(&graph, spec, tau)?;
    let efforts = result.profile.as_slice();
    let summary = concentration_summary(efforts, efforts.len(), &spec.qs)?;

    let payload = json!({
        "node_ids": node_ids(&graph),
        "equilibrium": result,
        "certificate": certificate,
        "concentration": summary_json(&summary),
        "multi_start": starts.as_ref().map(multi_start_json),
    });
    let effort_rows: Vec<String> = efforts
        .iter()
        .enumerate()
        .map(|(i, y)| format!("{i},{},{y}", graph.node_id(i)))
        .collect();

    match &spec.out {
        Some(dir) => {
            write_file(
                dir,
                "equilibrium.json",
                &json_document("solve", spec, payload)?,
            )?;
            let cert = json!({ "certificate": certificate });
            write_file(
                dir,
                "certificate.json",
                &json_document("solve", spec, cert)?,
            )?;
            let header = "population_fraction,cumulative_share";
            let rows = lorenz_rows(efforts, efforts.len())?;
            write_file(
                dir,
                "lorenz.csv",
                &csv_document("solve", spec, header, &rows),
            )?;
            let rows = originators_rows(&summary);
            write_file(
                dir,
                "originators.csv",
                &csv_document("solve", spec, "q,fraction", &rows),
            )?;
            write_file(
                dir,
                "efforts.csv",
                &csv_document("solve", spec, "node,id,effort", &effort_rows),
            )?;
            write_spec(dir, spec)?;
        }
        None => match spec.format {
            Format::Json => print(&json_document("solve", spec, payload)?)?,
            Format::Csv => print(&csv_document("solve", spec, "node,id,effort", &effort_rows))?,
        },
    }
    if !result.converged {
        eprintln!(
            "warning: no convergence after {} sweeps (residual {:e})",
            result.iterations, result.residual
        );
    }
    Ok(if result.converged {
        Status::Converged
    } else {
        Status::NotConverged
    })
}

struct SweepPoint {
    tau: f64,
    result: EquilibriumResult,
    summary: ConcentrationSummary,
    equilibria: Option<usize>,
}

pub fn cmd_sweep(spec: &ExperimentSpec) -> Result<Status> {
    let graph = spec.require_graph()?;
    if spec.taus.is_empty() {
        bail!("sweep needs at least one shelf-life: use --tau-list");
    }
    let points: Vec<SweepPoint> = spec
        .taus
        .par_iter()
        .map(|&tau| -> Result<SweepPoint> {
            let result = solve(&graph, &spec.params(tau)?, &spec.solver_config())?;
            let efforts = result.profile.as_slice();
            let summary = concentration_summary(efforts, efforts.len(), &spec.qs)?;
            let equilibria = run_multi_start(&graph, spec, tau)?.map(|r| r.distinct_equilibria());
            Ok(SweepPoint {
                tau,
                result,
                summary,
                equilibria,
            })
        })
        .collect::<Result<_>>()?;

    let mut effort_rows = Vec::new();
    let mut summary_rows = Vec::new();
    for point in &points {
        let efforts = point.result.profile.as_slice();
        for (i, y) in efforts.iter().enumerate() {
            effort_rows.push(format!("{},{},{y}", point.tau, graph.node_id(i)));
        }
        let mean = efforts.iter().sum::<f64>() / efforts.len() as f64;
        let status = if point.result.converged {
            "converged"
        } else {
            "not_converged"
        };
        let equilibria = point.equilibria.map(|e| e.to_string()).unwrap_or_default();
        for o in &point.summary.q_volume_originators {
            summary_rows.push(format!(
                "{},{},{},{mean},{status},{},{},{equilibria}",
                point.tau, o.q, o.fraction, point.result.iterations, point.result.residual
            ));
        }
    }
    let summary_header =
        "tau,q,originator_fraction,mean_effort,status,iterations,residual,equilibria";

    match &spec.out {
        Some(dir) => {
            write_file(
                dir,
                "sweep_efforts.csv",
                &csv_document("sweep", spec, "tau,node,effort", &effort_rows),
            )?;
            write_file(
                dir,
                "sweep_summary.csv",
                &csv_document("sweep", spec, summary_header, &summary_rows),
            )?;
            write_spec(dir, spec)?;
        }
        None => match spec.format {
            Format::Csv => print(&csv_document("sweep", spec, summary_header, &summary_rows))?,
            Format::Json => {
                let sweep: Vec<Value> = points
                    .iter()
                    .map(|p| {
                        json!({
                            "tau": p.tau,
                            "equilibrium": p.result,
                            "concentration": summary_json(&p.summary),
                            "distinct_equilibria": p.equilibria,
                        })
                    })
                    .collect();
                print(&json_document(
                    "sweep",
                    spec,
                    json!({ "node_ids": node_ids(&graph), "sweep": sweep }),
                )?)?
            }
        },
    }
    let failed: Vec<String> = points
        .iter()
        .filter(|p| !p.result.converged)
        .map(|p| p.tau.to_string())
        .collect();
    if failed.is_empty() {
        Ok(Status::Converged)
    } else {
        eprintln!("warning: no convergence at tau = {}", failed.join(", "));
        Ok(Status::NotConverged)
    }
}

pub fn cmd_spectral(spec: &ExperimentSpec) -> Result<Status> {
    let graph = spec.require_graph()?;
    let eig = min_eigenvalue(&graph)?;
    let closed = graph.family().and_then(closed_form_lambda_min);
    let rows: Vec<(f64, f64, Option<f64>)> = spec
        .alpha_list
        .iter()
        .map(|&a| (a, tau_hat(eig.value, a), closed.map(|l| tau_hat(l, a))))
        .collect();

    match spec.format {
        Format::Json => {
            let table: Vec<Value> = rows
                .iter()
                .map(|(a, t, c)| json!({ "alpha": a, "tau_hat": json_number(*t), "closed_form_tau_hat": c.map(json_number) }))
                .collect();
            let payload = json!({
                "nodes": graph.node_count(),
                "edges": graph.edge_count(),
                "lambda_min": eig.value,
                "method": eig.method,
                "symmetrized": eig.symmetrized,
                "closed_form_lambda_min": closed,
                "thresholds": table,
            });
            let text = json_document("spectral", spec, payload)?;
            match &spec.out {
                Some(dir) => {
                    write_file(dir, "spectral.json", &text)?;
                    write_spec(dir, spec)?;
                }
                None => print(&text)?,
            }
        }
        Format::Csv => {
            let header = "alpha,lambda_min,tau_hat,closed_form_lambda_min,closed_form_tau_hat,method,symmetrized";
            let method = serde_json::to_value(eig.method)?
                .as_str()
                .unwrap_or_default()
                .to_string();
            let lines: Vec<String> = rows
                .iter()
                .map(|(a, t, c)| {
                    format!(
                        "{a},{},{},{},{},{method},{}",
                        eig.value,
                        number(*t),
                        closed.map(|l| l.to_string()).unwrap_or_default(),
                        c.map(number).unwrap_or_default(),
                        eig.symmetrized
                    )
                })
                .collect();
            let text = csv_document("spectral", spec, header, &lines);
            match &spec.out {
                Some(dir) => {
                    write_file(dir, "spectral.csv", &text)?;
                    write_spec(dir, spec)?;
                }
                None => print(&text)?,
            }
        }
    }
    Ok(Status::Converged)
}

fn read_log(spec: &ExperimentSpec) -> Result<Vec<PostEvent>> {
    let path = spec
        .log
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("ingest needs --log"))?;
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let events = parse_post_log(BufReader::new(file))
        .with_context(|| format!("reading post log {}", path.display()))?;
    if events.is_empty() {
        bail!("post log {} has no events", path.display());
    }
    Ok(events)
}

/// The follow graph, or one isolated node per poster when none is given.
fn follow_graph(spec: &ExperimentSpec, events: &[PostEvent]) -> Result<Graph> {
    if let Some(g) = spec.load_graph()? {
        return Ok(g);
    }
    let mut users: Vec<String> = events.iter().map(|e| e.user.clone()).collect();
    users.sort();
    users.dedup();
    Ok(Graph::from_edges(users.len(), [], true)?.with_node_ids(users)?)
}

pub fn cmd_ingest(spec: &ExperimentSpec) -> Result<Status> {
    let events = read_log(spec)?;
    let graph = follow_graph(spec, &events)?;
    let labels = classify_first_posts(&events, &graph);

    let mut by_domain: BTreeMap<String, (Vec<PostEvent>, Vec<FirstPostLabel>)> = BTreeMap::new();
    for (e, l) in events.iter().zip(&labels) {
        let entry = by_domain.entry(domain_of(&e.item)).or_default();
        entry.0.push(e.clone());
        entry.1.push(*l);
    }

    let mut rows = Vec::new();
    let mut domains = Vec::new();
    for (domain, (posts, posts_labels)) in &by_domain {
        let mut items: Vec<&str> = posts.iter().map(|e| e.item.as_str()).collect();
        items.sort_unstable();
        items.dedup();
        let minutes = shelf_life(items.len(), spec.window)?;
        let local =
            posts_labels.iter().filter(|l| l.is_local_first()).count() as f64 / posts.len() as f64;
        let mut fractions = Vec::new();
        for mode in ConcentrationMode::ALL {
            for &q in &spec.qs {
                let fraction =
                    match originator_concentration_labeled(posts, posts_labels, &graph, mode, q) {
                        Ok(f) => Some(f),
                        Err(perishgood::Error::NoVolume) => None,
                        Err(e) => return Err(e.into()),
                    };
                rows.push(format!(
                    "{domain},{},{},{minutes},{},{local},{},{q},{}",
                    items.len(),
                    spec.window,
                    posts.len(),
                    mode.as_str(),
                    fraction.map(|f| f.to_string()).unwrap_or_default()
                ));
                fractions.push(
                    json!({ "mode": mode.as_str(), "q": q, "originator_fraction": fraction }),
                );
            }
        }
        domains.push(json!({
            "domain": domain,
            "unique_items": items.len(),
            "window_minutes": spec.window,
            "shelf_life_minutes": minutes,
            "posts": posts.len(),
            "local_first_share": local,
            "concentration": fractions,
        }));
    }
    let header = "domain,unique_items,window_minutes,shelf_life_minutes,posts,local_first_share,mode,q,originator_fraction";

    match &spec.out {
        Some(dir) => {
            write_file(
                dir,
                "ingest.csv",
                &csv_document("ingest", spec, header, &rows),
            )?;
            let mut labels_csv = Vec::new();
            write_labels_csv(&events, &labels, &mut labels_csv)?;
            write_file(dir, "labels.csv", &String::from_utf8(labels_csv)?)?;
            let article_rows: Vec<String> = article_concentration(&events, &graph)
                .iter()
                .map(|a| {
                    format!(
                        "{},{},{},{},{},{}",
                        a.item,
                        a.posts,
                        a.local_first_posts,
                        a.receivers,
                        a.by_receivers,
                        a.by_posts
                    )
                })
                .collect();
            let article_header = "item,posts,local_first_posts,receivers,by_receivers,by_posts";
            write_file(
                dir,
                "articles.csv",
                &csv_document("ingest", spec, article_header, &article_rows),
            )?;
            write_spec(dir, spec)?;
        }
        None => match spec.format {
            Format::Csv => print(&csv_document("ingest", spec, header, &rows))?,
            Format::Json => print(&json_document(
                "ingest",
                spec,
                json!({ "domains": domains }),
            )?)?,
        },
    }
    Ok(Status::Converged)
}

fn read_volumes(path: &std::path::Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let doc: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let efforts = doc
            .get("efforts")
            .or_else(|| doc.get("equilibrium").and_then(|e| e.get("efforts")))
            .and_then(Value::as_array)
            .ok_or_else(|| anyhow::anyhow!("{}: no \"efforts\" array", path.display()))?;
        return efforts
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| anyhow::anyhow!("{}: non-numeric effort", path.display()))
            })
            .collect();
    }
    let mut volumes = Vec::new();
    let mut header_skipped = false;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => volumes.push(v),
            // one header row is allowed before the data
            Err(_) if volumes.is_empty() && !header_skipped => header_skipped = true,
            Err(_) => bail!("{}:{}: invalid volume {field:?}", path.display(), k + 1),
        }
    }
    Ok(volumes)
}

pub fn cmd_metrics(spec: &ExperimentSpec) -> Result<Status> {
    let mut status = Status::Converged;
    let mut correlation = None;
    let volumes = match &spec.input {
        Some(path) => read_volumes(path)?,
        None => {
            let graph = spec.require_graph()?;
            let result = solve(
                &graph,
                &spec.params(spec.single_tau()?)?,
                &spec.solver_config(),
            )?;
            if !result.converged {
                status = Status::NotConverged;
            }
            correlation = degree_effort_correlation(&graph, &result.profile, DegreeKind::Out).ok();
            result.profile.into_vec()
        }
    };
    let audience = spec.audience.unwrap_or(volumes.len());
    let summary = concentration_summary(&volumes, audience, &spec.qs)?;
    let payload = json!({
        "concentration": summary_json(&summary),
        "degree_effort_spearman": correlation,
    });
    match &spec.out {
        Some(dir) => {
            write_file(
                dir,
                "metrics.json",
                &json_document("metrics", spec, payload)?,
            )?;
            let rows = lorenz_rows(&volumes, audience)?;
            write_file(
                dir,
                "lorenz.csv",
                &csv_document(
                    "metrics",
                    spec,
                    "population_fraction,cumulative_share",
                    &rows,
                ),
            )?;
            write_file(
                dir,
                "originators.csv",
                &csv_document("metrics", spec, "q,fraction", &originators_rows(&summary)),
            )?;
            write_spec(dir, spec)?;
        }
        None => match spec.format {
            Format::Json => print(&json_document("metrics", spec, payload)?)?,
            Format::Csv => print(&csv_document(
                "metrics",
                spec,
                "q,fraction",
                &originators_rows(&summary),
            ))?,
        },
    }
    Ok(status)
}
