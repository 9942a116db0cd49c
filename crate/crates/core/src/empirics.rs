//! Post logs and the temporal measurements taken from them: shelf-life,
//! diffusion-life and first-post classification.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{self, BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::volume_originators;

/// Thirty days in minutes.
pub const DEFAULT_WINDOW_MINUTES: f64 = 43_200.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostEvent {
    /// Minutes since an arbitrary epoch.
    pub timestamp: f64,
    pub user: String,
    pub item: String,
}

impl PostEvent {
    pub fn new(timestamp: f64, user: impl Into<String>, item: impl Into<String>) -> Result<Self> {
        let (user, item) = (user.into(), item.into());
        if !timestamp.is_finite() {
            return Err(Error::Domain(format!(
                "timestamp must be finite, got {timestamp}"
            )));
        }
        if user.is_empty() || item.is_empty() {
            return Err(Error::Domain("user and item ids must be nonempty".into()));
        }
        Ok(Self {
            timestamp,
            user,
            item,
        })
    }
}

/// Parses `timestamp<TAB>user<TAB>item` lines. Blank lines and lines whose
/// first non-blank character is `#` are skipped.
pub fn parse_post_log<R: BufRead>(reader: R) -> Result<Vec<PostEvent>> {
    let mut events = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let fail = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let line = line.map_err(|e| fail(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(fail(format!(
                "expected timestamp, user and item separated by tabs, found {} field(s)",
                fields.len()
            )));
        }
        let timestamp: f64 = fields[0]
            .parse()
            .map_err(|_| fail(format!("invalid timestamp {:?}", fields[0])))?;
        let event =
            PostEvent::new(timestamp, fields[1], fields[2]).map_err(|e| fail(e.to_string()))?;
        events.push(event);
    }
    Ok(events)
}

/// Host of a URL-like item: scheme, `www.` prefix and everything from the
/// first `/`, `?` or `#` removed, lowercased.
pub fn domain_of(item: &str) -> String {
    let rest = item.split_once("://").map_or(item, |(_, r)| r);
    let host = rest
        .split(['/', '?', '#'])
        .next()
        .unwrap_or(rest)
        .to_ascii_lowercase();
    match host.strip_prefix("www.") {
        Some(h) => h.to_string(),
        None => host,
    }
}

/// `window_minutes / unique_items`.
pub fn shelf_life(unique_items: usize, window_minutes: f64) -> Result<f64> {
    if unique_items == 0 {
        return Err(Error::InvalidParameter(
            "shelf-life needs at least one item".into(),
        ));
    }
    if !(window_minutes.is_finite() && window_minutes > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window must be > 0, got {window_minutes}"
        )));
    }
    Ok(window_minutes / unique_items as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShelfLifeEstimate {
    pub domain: String,
    pub unique_items: usize,
    pub window_minutes: f64,
    pub shelf_life_minutes: f64,
}

impl ShelfLifeEstimate {
    pub fn new(
        domain: impl Into<String>,
        unique_items: usize,
        window_minutes: f64,
    ) -> Result<Self> {
        Ok(Self {
            domain: domain.into(),
            unique_items,
            window_minutes,
            shelf_life_minutes: shelf_life(unique_items, window_minutes)?,
        })
    }
}

/// One estimate per domain, ordered by domain.
pub fn shelf_life_by_domain(
    events: &[PostEvent],
    window_minutes: f64,
) -> Result<Vec<ShelfLifeEstimate>> {
    let mut items: BTreeMap<String, HashSet<&str>> = BTreeMap::new();
    for e in events {
        items.entry(domain_of(&e.item)).or_default().insert(&e.item);
    }
    items
        .into_iter()
        .map(|(domain, set)| ShelfLifeEstimate::new(domain, set.len(), window_minutes))
        .collect()
}

/// Time between the first and last post of an item.
pub fn diffusion_life(events: &[PostEvent]) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::EmptyInput(
            "diffusion-life needs at least one post".into(),
        ));
    }
    let (lo, hi) = events
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.timestamp), hi.max(e.timestamp))
        });
    Ok(hi - lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstPostLabel {
    /// Among the earliest posts of the item anywhere.
    GlobalFirst,
    /// No followee posted the item strictly earlier.
    LocalFirst,
    Repost,
}

impl FirstPostLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FirstPostLabel::GlobalFirst => "global_first",
            FirstPostLabel::LocalFirst => "local_first",
            FirstPostLabel::Repost => "repost",
        }
    }

    /// Global-first posts are also local-first.
    pub fn is_local_first(&self) -> bool {
        !matches!(self, FirstPostLabel::Repost)
    }
}

/// Node of `user`, trying the canonical form of numeric ids as well.
fn node_of(graph: &Graph, user: &str) -> Option<usize> {
    graph.index_of(user).or_else(|| {
        user.parse::<u64>()
            .ok()
            .and_then(|v| graph.index_of(&v.to_string()))
    })
}

/// Labels each event. Users absent from the graph follow nobody.
pub fn classify_first_posts(events: &[PostEvent], graph: &Graph) -> Vec<FirstPostLabel> {
    let mut first_seen: HashMap<&str, f64> = HashMap::new();
    let mut earliest_by_node: HashMap<(&str, usize), f64> = HashMap::new();
    let nodes: Vec<Option<usize>> = events.iter().map(|e| node_of(graph, &e.user)).collect();
    for (e, node) in events.iter().zip(&nodes) {
        let t = first_seen.entry(&e.item).or_insert(e.timestamp);
        *t = t.min(e.timestamp);
        if let Some(v) = node {
            let t = earliest_by_node.entry((&e.item, *v)).or_insert(e.timestamp);
            *t = t.min(e.timestamp);
        }
    }
    events
        .iter()
        .zip(&nodes)
        .map(|(e, node)| {
            if e.timestamp <= first_seen[e.item.as_str()] {
                return FirstPostLabel::GlobalFirst;
            }
            let received_earlier = node.is_some_and(|u| {
                graph.neighbors(u).iter().any(|&f| {
                    earliest_by_node
                        .get(&(e.item.as_str(), f))
                        .is_some_and(|&t| t < e.timestamp)
                })
            });
            if received_earlier {
                FirstPostLabel::Repost
            } else {
                FirstPostLabel::LocalFirst
            }
        })
        .collect()
}

pub fn write_labels_csv<W: Write>(
    events: &[PostEvent],
    labels: &[FirstPostLabel],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "item,user,timestamp,label")?;
    for (e, l) in events.iter().zip(labels) {
        writeln!(
            out,
            "{},{},{},{}",
            csv_field(&e.item),
            csv_field(&e.user),
            e.timestamp,
            l.as_str()
        )?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationMode {
    AllPosts,
    GlobalFirst,
    LocalFirst,
}

impl ConcentrationMode {
    pub const ALL: [ConcentrationMode; 3] = [
        ConcentrationMode::AllPosts,
        ConcentrationMode::GlobalFirst,
        ConcentrationMode::LocalFirst,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConcentrationMode::AllPosts => "all_posts",
            ConcentrationMode::GlobalFirst => "global_first",
            ConcentrationMode::LocalFirst => "local_first",
        }
    }

    fn counts(&self, label: FirstPostLabel) -> bool {
        match self {
            ConcentrationMode::AllPosts => true,
            ConcentrationMode::GlobalFirst => label == FirstPostLabel::GlobalFirst,
            ConcentrationMode::LocalFirst => label.is_local_first(),
        }
    }
}

/// Posters together with every follower of a poster.
fn audience(events: &[PostEvent], graph: &Graph) -> HashSet<String> {
    let mut members: HashSet<String> = HashSet::new();
    for e in events {
        if members.contains(&e.user) {
            continue;
        }
        members.insert(e.user.clone());
        if let Some(v) = node_of(graph, &e.user) {
            for &f in graph.followers(v) {
                members.insert(graph.node_id(f));
            }
        }
    }
    members
}

/// Fraction of the audience producing share `q` of the posts counted by `mode`.
pub fn originator_concentration(
    events: &[PostEvent],
    graph: &Graph,
    mode: ConcentrationMode,
    q: f64,
) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::EmptyInput("post log is empty".into()));
    }
    let labels = classify_first_posts(events, graph);
    originator_concentration_labeled(events, &labels, graph, mode, q)
}

/// As [`originator_concentration`], reusing labels from [`classify_first_posts`].
pub fn originator_concentration_labeled(
    events: &[PostEvent],
    labels: &[FirstPostLabel],
    graph: &Graph,
    mode: ConcentrationMode,
    q: f64,
) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::EmptyInput("post log is empty".into()));
    }
    if labels.len() != events.len() {
        return Err(Error::LengthMismatch {
            expected: events.len(),
            actual: labels.len(),
        });
    }
    let mut volume: BTreeMap<&str, f64> = BTreeMap::new();
    for (e, l) in events.iter().zip(labels) {
        let v = volume.entry(&e.user).or_insert(0.0);
        if mode.counts(*l) {
            *v += 1.0;
        }
    }
    let volumes: Vec<f64> = volume.into_values().collect();
    volume_originators(&volumes, audience(events, graph).len(), q)
}

/// Local-first share of one article's posts under both normalisations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArticleConcentration {
    pub item: String,
    pub posts: usize,
    pub local_first_posts: usize,
    /// Posters of the item plus their followers.
    pub receivers: usize,
    pub by_receivers: f64,
    pub by_posts: f64,
}

/// Per-item concentration, ordered by item id.
pub fn article_concentration(events: &[PostEvent], graph: &Graph) -> Vec<ArticleConcentration> {
    let labels = classify_first_posts(events, graph);
    let mut by_item: BTreeMap<&str, (Vec<PostEvent>, usize)> = BTreeMap::new();
    for (e, l) in events.iter().zip(&labels) {
        let entry = by_item.entry(&e.item).or_default();
        entry.0.push(e.clone());
        entry.1 += usize::from(l.is_local_first());
    }
    by_item
        .into_iter()
        .map(|(item, (posts, local))| {
            let receivers = audience(&posts, graph).len();
            ArticleConcentration {
                item: item.to_string(),
                posts: posts.len(),
                local_first_posts: local,
                receivers,
                by_receivers: local as f64 / receivers as f64,
                by_posts: local as f64 / posts.len() as f64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::from_edge_list;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ev(t: f64, user: &str, item: &str) -> PostEvent {
        PostEvent::new(t, user, item).unwrap()
    }

    fn follows(pairs: &[(&str, &str)]) -> Graph {
        from_edge_list(pairs, true).unwrap().graph
    }

    /// Compares every post with every other post of the same item.
    fn brute_force(events: &[PostEvent], graph: &Graph) -> Vec<FirstPostLabel> {
        events
            .iter()
            .map(|e| {
                let same: Vec<&PostEvent> = events.iter().filter(|o| o.item == e.item).collect();
                if same.iter().all(|o| o.timestamp >= e.timestamp) {
                    return FirstPostLabel::GlobalFirst;
                }
                let received = same.iter().any(|o| {
                    o.timestamp < e.timestamp
                        && match (node_of(graph, &e.user), node_of(graph, &o.user)) {
                            (Some(u), Some(v)) => graph.has_edge(u, v),
                            _ => false,
                        }
                });
                if received {
                    FirstPostLabel::Repost
                } else {
                    FirstPostLabel::LocalFirst
                }
            })
            .collect()
    }

    fn random_log(
        rng: &mut ChaCha8Rng,
        users: usize,
        items: usize,
        posts: usize,
    ) -> (Vec<PostEvent>, Graph) {
        let mut edges = Vec::new();
        for u in 0..users {
            for v in 0..users {
                if u != v && rng.gen_bool(0.1) {
                    edges.push((u.to_string(), v.to_string()));
                }
            }
        }
        edges.push(("0".to_string(), "1".to_string()));
        let graph = from_edge_list(&edges, true).unwrap().graph;
        let events = (0..posts)
            .map(|_| {
                // coarse timestamps so ties occur
                let t = rng.gen_range(0..50) as f64;
                let user = rng.gen_range(0..users + 3).to_string();
                let item = format!(
                    "http://site{}.com/a{}",
                    rng.gen_range(0..3),
                    rng.gen_range(0..items)
                );
                ev(t, &user, &item)
            })
            .collect();
        (events, graph)
    }

    #[test]
    fn shelf_life_examples() {
        assert!((shelf_life(19_600, DEFAULT_WINDOW_MINUTES).unwrap() - 2.20).abs() < 0.01);
        assert!((shelf_life(5_917, DEFAULT_WINDOW_MINUTES).unwrap() - 7.30).abs() < 0.01);
        assert!((shelf_life(16_634, DEFAULT_WINDOW_MINUTES).unwrap() - 2.60).abs() < 0.01);
        assert!(shelf_life(0, DEFAULT_WINDOW_MINUTES).is_err());
        assert!(shelf_life(3, 0.0).is_err());
    }

    #[test]
    fn diffusion_life_examples() {
        assert_eq!(diffusion_life(&[ev(5.0, "a", "x")]).unwrap(), 0.0);
        let posts = [ev(25.0, "a", "x"), ev(40.0, "b", "x"), ev(10.0, "c", "x")];
        assert_eq!(diffusion_life(&posts).unwrap(), 30.0);
        assert!(diffusion_life(&[]).is_err());
    }

    #[test]
    fn domains() {
        assert_eq!(domain_of("http://www.BBC.co.uk/news/1"), "bbc.co.uk");
        assert_eq!(domain_of("https://news.yahoo.com?x=1"), "news.yahoo.com");
        assert_eq!(domain_of("nytimes.com/a"), "nytimes.com");
        let log = [
            ev(0.0, "a", "http://a.com/1"),
            ev(1.0, "b", "http://a.com/1"),
            ev(2.0, "b", "http://b.org/2"),
        ];
        let rows = shelf_life_by_domain(&log, 100.0).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(
            (rows[0].domain.as_str(), rows[0].unique_items),
            ("a.com", 1)
        );
    }

    #[test]
    fn parse_log() {
        let text = "# header\n1.5\talice\thttp://x.com/a#frag\n\n2\tbob\thttp://x.com/a\n";
        let events = parse_post_log(text.as_bytes()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].item, "http://x.com/a#frag");
        let bad = "1\ta\tx\nnope\tb\ty\n";
        assert!(matches!(
            parse_post_log(bad.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let short = "1\ta\n";
        assert!(matches!(
            parse_post_log(short.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let inf = "inf\ta\tx\n";
        assert!(matches!(
            parse_post_log(inf.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn classification_examples() {
        let g = follows(&[("u", "v")]);
        assert_eq!(
            classify_first_posts(&[ev(1.0, "u", "x")], &g),
            vec![FirstPostLabel::GlobalFirst]
        );
        let labels = classify_first_posts(&[ev(1.0, "v", "x"), ev(2.0, "u", "x")], &g);
        assert_eq!(
            labels,
            vec![FirstPostLabel::GlobalFirst, FirstPostLabel::Repost]
        );
        let apart = follows(&[("u", "w"), ("v", "w")]);
        let labels = classify_first_posts(&[ev(1.0, "v", "x"), ev(2.0, "u", "x")], &apart);
        assert_eq!(
            labels,
            vec![FirstPostLabel::GlobalFirst, FirstPostLabel::LocalFirst]
        );
        // ties at the earliest time are all global-first
        let labels = classify_first_posts(&[ev(1.0, "v", "x"), ev(1.0, "u", "x")], &g);
        assert_eq!(labels, vec![FirstPostLabel::GlobalFirst; 2]);
        // unknown users follow nobody
        let labels = classify_first_posts(&[ev(1.0, "v", "x"), ev(2.0, "zed", "x")], &g);
        assert_eq!(labels[1], FirstPostLabel::LocalFirst);
    }

    #[test]
    fn numeric_ids_match_canonical_graph_ids() {
        let g = from_edge_list(&[("007", "8")], true).unwrap().graph;
        let labels = classify_first_posts(&[ev(1.0, "8", "x"), ev(2.0, "007", "x")], &g);
        assert_eq!(labels[1], FirstPostLabel::Repost);
    }

    #[test]
    fn concentration_examples() {
        let mut edges = Vec::new();
        let mut log = vec![ev(0.0, "hub", "x")];
        for k in 0..99 {
            let u = format!("r{k}");
            edges.push((u.clone(), "hub".to_string()));
            log.push(ev(1.0 + k as f64, &u, "x"));
        }
        let g = from_edge_list(&edges, true).unwrap().graph;
        let f = originator_concentration(&log, &g, ConcentrationMode::LocalFirst, 0.9).unwrap();
        assert!((f - 1.0 / 100.0).abs() < 1e-15);

        let flat: Vec<PostEvent> = (0..10)
            .map(|k| ev(k as f64, &format!("p{k}"), &format!("i{k}")))
            .collect();
        let watchers: Vec<(String, String)> = (0..10)
            .map(|k| (format!("w{k}"), format!("p{k}")))
            .collect();
        let g = from_edge_list(&watchers, true).unwrap().graph;
        let f = originator_concentration(&flat, &g, ConcentrationMode::AllPosts, 0.9).unwrap();
        assert!((f - 0.9 * 10.0 / 20.0).abs() < 1e-15);

        // one user in a hundred writes ninety percent of the posts
        let mut two_tier = Vec::new();
        for k in 0..891 {
            two_tier.push(ev(k as f64, "heavy", &format!("h{k}")));
        }
        for k in 0..99 {
            two_tier.push(ev(k as f64, &format!("light{k}"), &format!("l{k}")));
        }
        let g = follows(&[("a", "b")]);
        let f = originator_concentration(&two_tier, &g, ConcentrationMode::AllPosts, 0.9).unwrap();
        assert!((f - 0.01).abs() < 1e-15);
        assert!(originator_concentration(&[], &g, ConcentrationMode::AllPosts, 0.9).is_err());
    }

    #[test]
    fn articles_expose_both_normalisations() {
        let g = follows(&[("u", "v"), ("w", "v")]);
        let log = [ev(1.0, "v", "x"), ev(2.0, "u", "x"), ev(3.0, "z", "x")];
        let rows = article_concentration(&log, &g);
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.posts, r.local_first_posts, r.receivers), (3, 2, 4));
        assert!((r.by_posts - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.by_receivers - 0.5).abs() < 1e-15);
    }

    #[test]
    fn labels_csv() {
        let log = [ev(1.0, "a", "x,y")];
        let mut buf = Vec::new();
        write_labels_csv(&log, &[FirstPostLabel::GlobalFirst], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "item,user,timestamp,label\n\"x,y\",a,1,global_first\n"
        );
    }

    #[test]
    fn matches_brute_force_on_random_logs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let (events, graph) = random_log(&mut rng, 30, 8, 300);
            assert_eq!(
                classify_first_posts(&events, &graph),
                brute_force(&events, &graph)
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn labels_follow_events_under_permutation(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (events, graph) = random_log(&mut rng, 15, 5, 80);
            let labels = classify_first_posts(&events, &graph);
            let mut order: Vec<usize> = (0..events.len()).collect();
            order.shuffle(&mut rng);
            let shuffled: Vec<PostEvent> = order.iter().map(|&i| events[i].clone()).collect();
            let relabeled = classify_first_posts(&shuffled, &graph);
            for (k, &i) in order.iter().enumerate() {
                prop_assert_eq!(relabeled[k], labels[i]);
            }
        }

        #[test]
        fn global_first_counts_minimum_posts(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (events, graph) = random_log(&mut rng, 15, 5, 80);
            let labels = classify_first_posts(&events, &graph);
            let items: HashSet<&str> = events.iter().map(|e| e.item.as_str()).collect();
            for item in items {
                let min = events.iter().filter(|e| e.item == item).map(|e| e.timestamp).fold(f64::INFINITY, f64::min);
                let at_min = events.iter().filter(|e| e.item == item && e.timestamp == min).count();
                let global = events.iter().zip(&labels)
                    .filter(|(e, l)| e.item == item && **l == FirstPostLabel::GlobalFirst)
                    .count();
                prop_assert!(global >= 1);
                prop_assert_eq!(global, at_min);
            }
        }

        #[test]
        fn no_follows_means_all_local_first(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (events, _) = random_log(&mut rng, 15, 5, 80);
            let lonely = follows(&[("nobody", "else")]);
            prop_assert!(classify_first_posts(&events, &lonely).iter().all(FirstPostLabel::is_local_first));
        }
    }
}
