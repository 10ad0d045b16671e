use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Network;

/// Structural problems of the undamaged network. Empty iff the network is
/// a forest in which every tree contains a substation or a generator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RadialityReport {
    /// Line ids forming each detected cycle.
    pub cycles: Vec<Vec<String>>,
    /// Bus ids of each connected island without any source.
    pub sourceless_islands: Vec<Vec<String>>,
}

impl RadialityReport {
    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty() && self.sourceless_islands.is_empty()
    }
}

impl fmt::Display for RadialityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for c in &self.cycles {
            parts.push(format!("cycle through lines [{}]", c.join(", ")));
        }
        for i in &self.sourceless_islands {
            parts.push(format!("island without source [{}]", i.join(", ")));
        }
        if parts.is_empty() {
            f.write_str("ok")
        } else {
            f.write_str(&parts.join("; "))
        }
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
}

/// Checks that the undamaged line graph is a rooted forest with a source in
/// every tree.
pub fn validate_radiality(net: &Network) -> RadialityReport {
    let n = net.buses.len();
    let mut dsu = Dsu((0..n).collect());
    // forest adjacency built so far: bus -> (neighbour, line)
    let mut forest: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut report = RadialityReport::default();

    for (l, _) in net.lines.iter().enumerate() {
        let (a, b) = net.line_ends(l);
        let (ra, rb) = (dsu.find(a), dsu.find(b));
        if ra == rb {
            let mut cycle = forest_path(&forest, a, b)
                .into_iter()
                .map(|k| net.lines[k].id.clone())
                .collect::<Vec<_>>();
            cycle.push(net.lines[l].id.clone());
            report.cycles.push(cycle);
        } else {
            dsu.0[ra] = rb;
            forest[a].push((b, l));
            forest[b].push((a, l));
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for bus in 0..n {
        let r = dsu.find(bus);
        members[r].push(bus);
    }
    for group in members.into_iter().filter(|g| !g.is_empty()) {
        if !group.iter().any(|&b| net.is_source_bus(b)) {
            report
                .sourceless_islands
                .push(group.iter().map(|&b| net.buses[b].id.clone()).collect());
        }
    }
    report
}

/// Line indices on the unique forest path between `from` and `to`.
fn forest_path(forest: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; forest.len()];
    let mut seen = vec![false; forest.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &(v, l) in &forest[u] {
            if !seen[v] {
                seen[v] = true;
                prev[v] = Some((u, l));
                queue.push_back(v);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while let Some((p, l)) = prev[cur] {
        path.push(l);
        cur = p;
    }
    path.reverse();
    path
}
