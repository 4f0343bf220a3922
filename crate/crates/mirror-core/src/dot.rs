//! Hasse diagrams and their DOT rendering.

use std::fmt::Write;

/// A finite graded poset given by node labels and covering relations
/// `(lower, upper)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hasse {
    pub labels: Vec<String>,
    pub dims: Vec<usize>,
    pub covers: Vec<(usize, usize)>,
}

impl Hasse {
    /// Builds the diagram from a list of elements and a partial order. Covers
    /// are the pairs `a < b` with nothing strictly in between.
    pub fn from_order<T>(
        items: &[T],
        label: impl Fn(&T) -> String,
        dim: impl Fn(&T) -> usize,
        le: impl Fn(&T, &T) -> bool,
    ) -> Hasse {
        let n = items.len();
        let lt = |a: usize, b: usize| a != b && le(&items[a], &items[b]);
        let mut covers = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if lt(a, b) && !(0..n).any(|c| lt(a, c) && lt(c, b)) {
                    covers.push((a, b));
                }
            }
        }
        Hasse {
            labels: items.iter().map(&label).collect(),
            dims: items.iter().map(&dim).collect(),
            covers,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// True when every covering relation raises the dimension by one.
    pub fn is_graded(&self) -> bool {
        self.covers.iter().all(|&(a, b)| self.dims[b] == self.dims[a] + 1)
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{}\" {{", escape(name));
        let _ = writeln!(s, "  rankdir=BT;");
        for (k, l) in self.labels.iter().enumerate() {
            let _ = writeln!(s, "  n{} [label=\"{} [{}]\"];", k, escape(l), self.dims[k]);
        }
        let mut covers = self.covers.clone();
        covers.sort_unstable();
        for (a, b) in covers {
            let _ = writeln!(s, "  n{a} -> n{b};");
        }
        s.push_str("}\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
