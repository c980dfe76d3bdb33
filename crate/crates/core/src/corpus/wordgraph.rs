use std::collections::VecDeque;
use std::fmt::Write;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct WordArc {
    pub from: usize,
    pub to: usize,
    pub word: String,
    /// Natural-log acoustic score, when the recognizer supplied one.
    pub acoustic: Option<f64>,
}

/// A word lattice: a DAG of word hypotheses between a start and an end node.
#[derive(Clone, Debug, PartialEq)]
pub struct WordGraph {
    node_count: usize,
    start: usize,
    end: usize,
    arcs: Vec<WordArc>,
    topo: Vec<usize>,
}

impl WordGraph {
    pub fn new(node_count: usize, start: usize, end: usize, arcs: Vec<WordArc>) -> Result<Self> {
        let bad = |msg: String| Error::Lattice { line: 0, msg };
        if node_count == 0 {
            return Err(bad("node count must be positive".into()));
        }
        if start >= node_count || end >= node_count {
            return Err(bad(format!("start/end outside 0..{node_count}")));
        }
        for a in &arcs {
            if a.from >= node_count || a.to >= node_count {
                return Err(bad(format!("arc {}->{} outside 0..{node_count}", a.from, a.to)));
            }
            if a.word.is_empty() {
                return Err(bad("empty word".into()));
            }
        }
        let topo = topological_order(node_count, &arcs)?;
        let g = WordGraph {
            node_count,
            start,
            end,
            arcs,
            topo,
        };
        if !g.reachable_from_start()[end] || start == end {
            return Err(Error::LatticeUnreachable { start, end });
        }
        Ok(g)
    }

    /// A linear lattice spelling `words`, without acoustic scores.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let arcs = words
            .iter()
            .enumerate()
            .map(|(i, w)| WordArc {
                from: i,
                to: i + 1,
                word: w.as_ref().to_string(),
                acoustic: None,
            })
            .collect();
        WordGraph::new(words.len() + 1, 0, words.len(), arcs)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn arcs(&self) -> &[WordArc] {
        &self.arcs
    }

    /// All nodes in a topological order.
    pub fn topological(&self) -> &[usize] {
        &self.topo
    }

    pub fn has_acoustics(&self) -> bool {
        self.arcs.iter().any(|a| a.acoustic.is_some())
    }

    pub fn reachable_from_start(&self) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        seen[self.start] = true;
        for &n in &self.topo {
            if seen[n] {
                for a in self.arcs.iter().filter(|a| a.from == n) {
                    seen[a.to] = true;
                }
            }
        }
        seen
    }

    pub fn reaches_end(&self) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        seen[self.end] = true;
        for &n in self.topo.iter().rev() {
            if self.arcs.iter().any(|a| a.from == n && seen[a.to]) {
                seen[n] = true;
            }
        }
        seen
    }

    /// Arc indices lying on some start-to-end path.
    pub fn useful_arcs(&self) -> Vec<usize> {
        let fwd = self.reachable_from_start();
        let bwd = self.reaches_end();
        (0..self.arcs.len())
            .filter(|&i| fwd[self.arcs[i].from] && bwd[self.arcs[i].to])
            .collect()
    }

    /// Every start-to-end path as a list of arc indices, or `None` once more
    /// than `limit` paths exist.
    pub fn paths(&self, limit: usize) -> Option<Vec<Vec<usize>>> {
        let useful = self.useful_arcs();
        let mut out = Vec::new();
        let mut stack = vec![(self.start, Vec::new())];
        while let Some((n, path)) = stack.pop() {
            if n == self.end {
                out.push(path);
                if out.len() > limit {
                    return None;
                }
                continue;
            }
            for &i in useful.iter().rev() {
                if self.arcs[i].from == n {
                    let mut p = path.clone();
                    p.push(i);
                    stack.push((self.arcs[i].to, p));
                }
            }
        }
        Some(out)
    }

    pub fn path_words(&self, path: &[usize]) -> Vec<String> {
        path.iter().map(|&i| self.arcs[i].word.clone()).collect()
    }

    pub fn path_acoustic(&self, path: &[usize]) -> f64 {
        path.iter().map(|&i| self.arcs[i].acoustic.unwrap_or(0.0)).sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("LATTICE {} {} {}\n", self.node_count, self.start, self.end);
        for a in &self.arcs {
            let _ = write!(s, "ARC {} {} {}", a.from, a.to, a.word);
            if let Some(ac) = a.acoustic {
                let _ = write!(s, " {ac}");
            }
            s.push('\n');
        }
        s
    }
}

fn topological_order(n: usize, arcs: &[WordArc]) -> Result<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in arcs {
        indeg[a.to] += 1;
        out[a.from].push(a.to);
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in &out[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    if order.len() < n {
        let on_cycle = (0..n).find(|&i| indeg[i] > 0).expect("some node left");
        return Err(Error::LatticeCycle(on_cycle));
    }
    Ok(order)
}

/// Read the line-oriented lattice format:
/// `LATTICE <nodes> <start> <end> [<id>]` followed by
/// `ARC <from> <to> <word> [<logp>]` lines.
pub fn load_wordgraph(text: &str) -> Result<WordGraph> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    parse_block(&lines).map(|(_, g)| g)
}

/// Several lattices in the [`load_wordgraph`] format, each starting at its
/// `LATTICE` line. Lattices without an id are numbered from 1 by position.
pub fn load_wordgraphs(text: &str) -> Result<Vec<(String, WordGraph)>> {
    let mut blocks: Vec<Vec<(usize, &str)>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("LATTICE") || blocks.is_empty() {
            blocks.push(Vec::new());
        }
        blocks.last_mut().expect("pushed").push((i + 1, raw));
    }
    blocks
        .iter()
        .enumerate()
        .map(|(k, b)| parse_block(b).map(|(id, g)| (id.unwrap_or_else(|| (k + 1).to_string()), g)))
        .collect()
}

/// Concatenated lattice records with ids, readable by [`load_wordgraphs`].
pub fn write_wordgraphs<'a>(graphs: impl IntoIterator<Item = (&'a str, &'a WordGraph)>) -> String {
    let mut out = String::new();
    for (id, g) in graphs {
        let text = g.to_text();
        let (head, rest) = text.split_once('\n').expect("header line");
        let _ = writeln!(out, "{head} {id}");
        out.push_str(rest);
    }
    out
}

fn parse_block(lines: &[(usize, &str)]) -> Result<(Option<String>, WordGraph)> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut id = None;
    let mut arcs = Vec::new();
    for &(lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Lattice {
            line: lineno,
            msg: format!("{msg}: `{line}`"),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad node id"));
        match fields[0] {
            "LATTICE" => {
                if header.is_some() || !(fields.len() == 4 || fields.len() == 5) {
                    return Err(bad("malformed header"));
                }
                header = Some((num(fields[1])?, num(fields[2])?, num(fields[3])?));
                id = fields.get(4).map(|s| s.to_string());
            }
            "ARC" => {
                let Some((n, _, _)) = header else {
                    return Err(bad("arc before header"));
                };
                if fields.len() != 4 && fields.len() != 5 {
                    return Err(bad("malformed arc line"));
                }
                let (from, to) = (num(fields[1])?, num(fields[2])?);
                if from >= n || to >= n {
                    return Err(bad("node id out of range"));
                }
                let acoustic = match fields.get(4) {
                    Some(s) => Some(
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| !v.is_nan())
                            .ok_or_else(|| bad("bad acoustic score"))?,
                    ),
                    None => None,
                };
                arcs.push(WordArc {
                    from,
                    to,
                    word: fields[3].to_string(),
                    acoustic,
                });
            }
            _ => return Err(bad("unknown record")),
        }
    }
    let (n, start, end) = header.ok_or(Error::Lattice {
        line: lines.first().map_or(0, |l| l.0),
        msg: "missing LATTICE header".into(),
    })?;
    WordGraph::new(n, start, end, arcs).map(|g| (id, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arc() {
        let g = load_wordgraph("LATTICE 2 0 1\nARC 0 1 hello\n").unwrap();
        let paths = g.paths(10).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(g.path_words(&paths[0]), vec!["hello"]);
        assert!(!g.has_acoustics());
    }

    #[test]
    fn diamond_has_two_paths() {
        let g = load_wordgraph("LATTICE 2 0 1\nARC 0 1 a -1.5\nARC 0 1 b -0.5\n").unwrap();
        assert_eq!(g.paths(10).unwrap().len(), 2);
        assert!(g.has_acoustics());
        assert_eq!(g.arcs()[0].acoustic, Some(-1.5));
    }

    #[test]
    fn rejects_cycles() {
        let err = load_wordgraph("LATTICE 3 0 2\nARC 0 1 a\nARC 1 0 b\nARC 1 2 c\n").unwrap_err();
        assert!(matches!(err, Error::LatticeCycle(_)));
    }

    #[test]
    fn rejects_unreachable_end_and_bad_lines() {
        assert!(matches!(
            load_wordgraph("LATTICE 3 0 2\nARC 0 1 a\n"),
            Err(Error::LatticeUnreachable { .. })
        ));
        assert!(load_wordgraph("LATTICE 2 0 1\nARC 0 x a\n").is_err());
        assert!(load_wordgraph("LATTICE 2 0 1\nARC 0 1\n").is_err());
        assert!(load_wordgraph("LATTICE 2 0 1\nARC 0 1 a notanumber\n").is_err());
        assert!(load_wordgraph("ARC 0 1 a\n").is_err());
        assert!(load_wordgraph("LATTICE 2 0 1\nARC 0 5 a\n").is_err());
    }

    #[test]
    fn text_round_trip() {
        let g = load_wordgraph("LATTICE 3 0 2\nARC 0 1 a -0.25\nARC 1 2 b\nARC 0 2 c -3\n").unwrap();
        assert_eq!(load_wordgraph(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn linear_lattice() {
        let g = WordGraph::from_words(&["Mary", "likes", "Susan"]).unwrap();
        assert_eq!(g.node_count(), 4);
        let p = g.paths(5).unwrap();
        assert_eq!(g.path_words(&p[0]), vec!["Mary", "likes", "Susan"]);
    }

    #[test]
    fn multi_lattice_files() {
        let a = WordGraph::from_words(&["a", "b"]).unwrap();
        let b = load_wordgraph("LATTICE 2 0 1\nARC 0 1 c -0.5\n").unwrap();
        let text = write_wordgraphs([("u1", &a), ("u2", &b)]);
        let back = load_wordgraphs(&text).unwrap();
        assert_eq!(back, vec![("u1".to_string(), a), ("u2".to_string(), b)]);
        let numbered = load_wordgraphs("LATTICE 2 0 1\nARC 0 1 x\n\nLATTICE 2 0 1\nARC 0 1 y\n").unwrap();
        assert_eq!(numbered[1].0, "2");
        match load_wordgraphs("LATTICE 2 0 1\nARC 0 1 x\nLATTICE 2 0 1\nARC 0 3 y\n") {
            Err(Error::Lattice { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }
}
