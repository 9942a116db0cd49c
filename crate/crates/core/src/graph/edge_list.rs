use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};

use super::Graph;
use crate::error::{Error, Result};

/// A graph read from external ids, with the rows that had to be dropped.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub self_loops_skipped: usize,
    pub duplicate_rows: usize,
}

/// Builds a graph from `(source, target)` id pairs.
///
/// Ids are remapped to dense indices: numerically when every id is a
/// nonnegative integer, otherwise in order of first appearance. Self-loop
/// rows are skipped and counted.
pub fn from_edge_list<S: AsRef<str>>(rows: &[(S, S)], directed: bool) -> Result<LoadedGraph> {
    if rows.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let all_numeric = rows
        .iter()
        .all(|(a, b)| a.as_ref().parse::<u64>().is_ok() && b.as_ref().parse::<u64>().is_ok());

    let canonical = |s: &str| -> String {
        if all_numeric {
            s.parse::<u64>().map(|v| v.to_string()).unwrap_or_default()
        } else {
            s.to_string()
        }
    };

    let names: Vec<String> = if all_numeric {
        let mut values: Vec<u64> = rows
            .iter()
            .flat_map(|(a, b)| {
                [
                    a.as_ref().parse::<u64>().unwrap_or(0),
                    b.as_ref().parse().unwrap_or(0),
                ]
            })
            .collect();
        values.sort_unstable();
        values.dedup();
        values.into_iter().map(|v| v.to_string()).collect()
    } else {
        let mut seen = HashSet::new();
        let mut names = Vec::new();
        for (a, b) in rows {
            for id in [a.as_ref(), b.as_ref()] {
                if seen.insert(id.to_string()) {
                    names.push(id.to_string());
                }
            }
        }
        names
    };
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    let mut self_loops = 0;
    let mut pairs = Vec::with_capacity(rows.len());
    let mut distinct = HashSet::with_capacity(rows.len());
    for (a, b) in rows {
        let (ca, cb) = (canonical(a.as_ref()), canonical(b.as_ref()));
        let (u, v) = (index[ca.as_str()], index[cb.as_str()]);
        if u == v {
            self_loops += 1;
            continue;
        }
        let key = if directed {
            (u, v)
        } else {
            (u.min(v), u.max(v))
        };
        distinct.insert(key);
        pairs.push((u, v));
    }
    let duplicate_rows = pairs.len() - distinct.len();
    let graph = Graph::from_edges(names.len(), pairs, directed)?.with_ids(names);
    Ok(LoadedGraph {
        graph,
        self_loops_skipped: self_loops,
        duplicate_rows,
    })
}

/// Parses the edge-list text format: one edge per line, ids separated by
/// whitespace or a comma, `#` starting a comment. An optional first line
/// `directed` or `undirected` sets the orientation; `directed_override`
/// takes precedence over it. Without either the graph is undirected.
pub fn parse_edge_list<R: BufRead>(
    reader: R,
    directed_override: Option<bool>,
) -> Result<LoadedGraph> {
    let mut header: Option<bool> = None;
    let mut rows: Vec<(String, String)> = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if rows.is_empty() && header.is_none() && fields.len() == 1 {
            match fields[0].to_ascii_lowercase().as_str() {
                "directed" => {
                    header = Some(true);
                    continue;
                }
                "undirected" => {
                    header = Some(false);
                    continue;
                }
                _ => {}
            }
        }
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected two node ids, found {} field(s): {content:?}",
                    fields.len()
                ),
            });
        }
        rows.push((fields[0].to_string(), fields[1].to_string()));
    }
    let directed = directed_override.or(header).unwrap_or(false);
    from_edge_list(&rows, directed)
}

/// Writes the `index,id` remapping table.
pub fn write_id_map<W: Write>(graph: &Graph, mut out: W) -> io::Result<()> {
    writeln!(out, "index,id")?;
    for i in 0..graph.node_count() {
        writeln!(out, "{i},{}", graph.node_id(i))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deduplicates_undirected_rows() {
        let loaded = from_edge_list(&[("0", "1"), ("1", "0")], false).unwrap();
        assert_eq!(loaded.graph.edge_count(), 1);
        assert_eq!(loaded.duplicate_rows, 1);
    }

    #[test]
    fn directed_degrees() {
        let loaded = from_edge_list(&[("0", "1"), ("1", "2")], true).unwrap();
        let g = &loaded.graph;
        let one = g.index_of("1").unwrap();
        assert_eq!(g.out_degree(one), 1);
        assert_eq!(g.in_degree(one), 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        let rows: [(&str, &str); 0] = [];
        assert_eq!(
            from_edge_list(&rows, false).unwrap_err().to_string(),
            "empty graph"
        );
        let text = "# nothing here\n\n";
        assert!(matches!(
            parse_edge_list(text.as_bytes(), None),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn numeric_ids_sort_numerically() {
        let loaded = from_edge_list(&[("10", "2"), ("2", "007")], false).unwrap();
        let g = &loaded.graph;
        assert_eq!(g.node_id(0), "2");
        assert_eq!(g.node_id(1), "7");
        assert_eq!(g.node_id(2), "10");
    }

    #[test]
    fn string_ids_keep_first_appearance() {
        let loaded = from_edge_list(&[("bob", "alice"), ("alice", "carol")], true).unwrap();
        let g = &loaded.graph;
        assert_eq!(g.index_of("bob"), Some(0));
        assert_eq!(g.index_of("carol"), Some(2));
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn parses_text_with_header_comments_and_self_loops() {
        let text = "directed\n# follows\na b\nb,c # trailing\n\nc c\n";
        let loaded = parse_edge_list(text.as_bytes(), None).unwrap();
        assert!(loaded.graph.is_directed());
        assert_eq!(loaded.graph.edge_count(), 2);
        assert_eq!(loaded.self_loops_skipped, 1);

        let forced = parse_edge_list(text.as_bytes(), Some(false)).unwrap();
        assert!(!forced.graph.is_directed());
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let text = "0 1\n1 2 3\n";
        match parse_edge_list(text.as_bytes(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let lone = "undirected\n0 1\n5\n";
        assert!(matches!(
            parse_edge_list(lone.as_bytes(), None),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn id_map_lists_every_node() {
        let loaded = from_edge_list(&[("x", "y")], false).unwrap();
        let mut buf = Vec::new();
        write_id_map(&loaded.graph, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,id\n0,x\n1,y\n");
    }
}
