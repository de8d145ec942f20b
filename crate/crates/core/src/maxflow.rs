//! Augmenting-path max-flow with search-tree reuse (Boykov–Kolmogorov).
//!
//! Two search trees grow from the terminals and are kept between
//! augmentations; saturated tree edges create orphans that are re-adopted or
//! freed. Capacities are `f64`; a residual capacity is usable iff `> 0.0`.

use std::collections::VecDeque;

const NIL: usize = usize::MAX;
/// Parent marker: node hangs directly off its terminal.
const TERMINAL: usize = usize::MAX - 1;
/// Parent marker: node lost its tree edge and awaits adoption.
const ORPHAN: usize = usize::MAX - 2;
const INFINITE_D: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Arc {
    head: usize,
    next: usize,
    sister: usize,
    r_cap: f64,
}

#[derive(Debug, Clone)]
struct Node {
    first: usize,
    /// Arc toward the parent, `TERMINAL`, `ORPHAN`, or `NIL` for free nodes.
    parent: usize,
    is_sink: bool,
    /// Residual terminal capacity: `> 0` to the source, `< 0` to the sink.
    tr_cap: f64,
    ts: u64,
    dist: u32,
    queued: bool,
}

/// Side of the minimum cut a node ends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Source,
    Sink,
}

#[derive(Debug, Clone)]
pub struct MaxFlowGraph {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    flow: f64,
    active: VecDeque<usize>,
    orphans: VecDeque<usize>,
    time: u64,
    solved: bool,
}

impl MaxFlowGraph {
    pub fn new(n: usize) -> Self {
        let node = Node {
            first: NIL,
            parent: NIL,
            is_sink: false,
            tr_cap: 0.0,
            ts: 0,
            dist: 0,
            queued: false,
        };
        MaxFlowGraph {
            nodes: vec![node; n],
            arcs: Vec::new(),
            flow: 0.0,
            active: VecDeque::new(),
            orphans: VecDeque::new(),
            time: 0,
            solved: false,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Adds `source → i` with `to_source` and `i → sink` with `to_sink`.
    pub fn add_tweights(&mut self, i: usize, to_source: f64, to_sink: f64) {
        let (mut src, mut snk) = (to_source, to_sink);
        let delta = self.nodes[i].tr_cap;
        if delta > 0.0 {
            src += delta;
        } else {
            snk -= delta;
        }
        self.flow += src.min(snk);
        self.nodes[i].tr_cap = src - snk;
    }

    /// Adds `i → j` with capacity `cap` and `j → i` with `rev_cap`.
    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev_cap: f64) {
        let a = self.arcs.len();
        self.arcs.push(Arc {
            head: j,
            next: self.nodes[i].first,
            sister: a + 1,
            r_cap: cap,
        });
        self.nodes[i].first = a;
        self.arcs.push(Arc {
            head: i,
            next: self.nodes[j].first,
            sister: a,
            r_cap: rev_cap,
        });
        self.nodes[j].first = a + 1;
    }

    fn set_active(&mut self, i: usize) {
        if !self.nodes[i].queued {
            self.nodes[i].queued = true;
            self.active.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.active.pop_front() {
            self.nodes[i].queued = false;
            if self.nodes[i].parent != NIL {
                return Some(i);
            }
        }
        None
    }

    fn out_arcs(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let first = Some(self.nodes[i].first).filter(|&a| a != NIL);
        std::iter::successors(first, move |&a| Some(self.arcs[a].next).filter(|&n| n != NIL))
    }

    fn tail(&self, a: usize) -> usize {
        self.arcs[self.arcs[a].sister].head
    }

    fn set_orphan_front(&mut self, i: usize) {
        self.nodes[i].parent = ORPHAN;
        self.orphans.push_front(i);
    }

    fn set_orphan_rear(&mut self, i: usize) {
        self.nodes[i].parent = ORPHAN;
        self.orphans.push_back(i);
    }

    /// Runs max-flow and returns the flow value, i.e. the minimum cut cost.
    pub fn maxflow(&mut self) -> f64 {
        if self.solved {
            return self.flow;
        }
        for i in 0..self.nodes.len() {
            let tr = self.nodes[i].tr_cap;
            let node = &mut self.nodes[i];
            if tr != 0.0 {
                node.is_sink = tr < 0.0;
                node.parent = TERMINAL;
                node.ts = 0;
                node.dist = 1;
                self.set_active(i);
            } else {
                node.parent = NIL;
            }
        }

        let mut current: Option<usize> = None;
        loop {
            let i = match current.filter(|&i| self.nodes[i].parent != NIL) {
                Some(i) => i,
                None => match self.next_active() {
                    Some(i) => i,
                    None => break,
                },
            };
            current = None;

            let bridge = self.grow(i);
            self.time += 1;
            if let Some(a) = bridge {
                // keep expanding from `i` once the trees are repaired
                current = Some(i);
                self.augment(a);
                while let Some(o) = self.orphans.pop_front() {
                    if self.nodes[o].is_sink {
                        self.adopt_sink(o);
                    } else {
                        self.adopt_source(o);
                    }
                }
            }
        }
        self.solved = true;
        self.flow
    }

    /// Expands the tree containing `i`; returns a source→sink bridging arc.
    fn grow(&mut self, i: usize) -> Option<usize> {
        let sink_tree = self.nodes[i].is_sink;
        let mut a = self.nodes[i].first;
        while a != NIL {
            let sister = self.arcs[a].sister;
            let usable = if sink_tree {
                self.arcs[sister].r_cap > 0.0
            } else {
                self.arcs[a].r_cap > 0.0
            };
            if usable {
                let j = self.arcs[a].head;
                let (ts, dist) = (self.nodes[i].ts, self.nodes[i].dist);
                if self.nodes[j].parent == NIL {
                    let nj = &mut self.nodes[j];
                    nj.is_sink = sink_tree;
                    nj.parent = sister;
                    nj.ts = ts;
                    nj.dist = dist + 1;
                    self.set_active(j);
                } else if self.nodes[j].is_sink != sink_tree {
                    return Some(if sink_tree { sister } else { a });
                } else if self.nodes[j].ts <= ts && self.nodes[j].dist > dist {
                    let nj = &mut self.nodes[j];
                    nj.parent = sister;
                    nj.ts = ts;
                    nj.dist = dist + 1;
                }
            }
            a = self.arcs[a].next;
        }
        None
    }

    /// Pushes the bottleneck along source root → `bridge` → sink root.
    fn augment(&mut self, bridge: usize) {
        let mut bottleneck = self.arcs[bridge].r_cap;

        let mut i = self.tail(bridge);
        loop {
            let a = self.nodes[i].parent;
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[self.arcs[a].sister].r_cap);
            i = self.arcs[a].head;
        }
        bottleneck = bottleneck.min(self.nodes[i].tr_cap);

        let mut i = self.arcs[bridge].head;
        loop {
            let a = self.nodes[i].parent;
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[a].r_cap);
            i = self.arcs[a].head;
        }
        bottleneck = bottleneck.min(-self.nodes[i].tr_cap);

        let sister = self.arcs[bridge].sister;
        self.arcs[sister].r_cap += bottleneck;
        self.arcs[bridge].r_cap -= bottleneck;

        let mut i = self.tail(bridge);
        loop {
            let a = self.nodes[i].parent;
            if a == TERMINAL {
                break;
            }
            let s = self.arcs[a].sister;
            self.arcs[a].r_cap += bottleneck;
            self.arcs[s].r_cap -= bottleneck;
            let next = self.arcs[a].head;
            if self.arcs[s].r_cap <= 0.0 {
                self.set_orphan_front(i);
            }
            i = next;
        }
        self.nodes[i].tr_cap -= bottleneck;
        if self.nodes[i].tr_cap <= 0.0 {
            self.set_orphan_front(i);
        }

        let mut i = self.arcs[bridge].head;
        loop {
            let a = self.nodes[i].parent;
            if a == TERMINAL {
                break;
            }
            let s = self.arcs[a].sister;
            self.arcs[s].r_cap += bottleneck;
            self.arcs[a].r_cap -= bottleneck;
            let next = self.arcs[a].head;
            if self.arcs[a].r_cap <= 0.0 {
                self.set_orphan_front(i);
            }
            i = next;
        }
        self.nodes[i].tr_cap += bottleneck;
        if self.nodes[i].tr_cap >= 0.0 {
            self.set_orphan_front(i);
        }

        self.flow += bottleneck;
    }

    /// Distance from `j` to its terminal via valid parents, or `INFINITE_D`
    /// if the path runs into an orphan. Caches results with the current time.
    fn origin_distance(&mut self, j: usize) -> u32 {
        let mut d: u32 = 0;
        let mut k = j;
        loop {
            if self.nodes[k].ts == self.time {
                return d + self.nodes[k].dist;
            }
            let a = self.nodes[k].parent;
            d += 1;
            if a == TERMINAL {
                self.nodes[k].ts = self.time;
                self.nodes[k].dist = 1;
                return d;
            }
            if a == ORPHAN {
                return INFINITE_D;
            }
            k = self.arcs[a].head;
        }
    }

    fn mark_path(&mut self, j: usize, mut d: u32) {
        let mut k = j;
        while self.nodes[k].ts != self.time {
            self.nodes[k].ts = self.time;
            self.nodes[k].dist = d;
            d -= 1;
            k = self.arcs[self.nodes[k].parent].head;
        }
    }

    fn adopt_source(&mut self, i: usize) {
        self.adopt(i, false);
    }

    fn adopt_sink(&mut self, i: usize) {
        self.adopt(i, true);
    }

    fn adopt(&mut self, i: usize, sink_tree: bool) {
        let mut best: Option<(usize, u32)> = None;
        let arcs: Vec<usize> = self.out_arcs(i).collect();
        for &a0 in &arcs {
            let cap = if sink_tree {
                self.arcs[a0].r_cap
            } else {
                self.arcs[self.arcs[a0].sister].r_cap
            };
            if cap <= 0.0 {
                continue;
            }
            let j = self.arcs[a0].head;
            if self.nodes[j].is_sink != sink_tree || self.nodes[j].parent == NIL {
                continue;
            }
            let d = self.origin_distance(j);
            if d < INFINITE_D {
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((a0, d));
                }
                self.mark_path(j, d);
            }
        }

        if let Some((a0, d)) = best {
            let node = &mut self.nodes[i];
            node.parent = a0;
            node.ts = self.time;
            node.dist = d + 1;
            return;
        }

        self.nodes[i].parent = NIL;
        for &a0 in &arcs {
            let j = self.arcs[a0].head;
            let a = self.nodes[j].parent;
            if self.nodes[j].is_sink != sink_tree || a == NIL {
                continue;
            }
            let cap = if sink_tree {
                self.arcs[a0].r_cap
            } else {
                self.arcs[self.arcs[a0].sister].r_cap
            };
            if cap > 0.0 {
                self.set_active(j);
            }
            if a != TERMINAL && a != ORPHAN && self.arcs[a].head == i {
                self.set_orphan_rear(j);
            }
        }
    }

    /// Cut side of `i` after [`maxflow`](Self::maxflow). Nodes in neither
    /// search tree are reported on the sink side.
    pub fn segment(&self, i: usize) -> Segment {
        let node = &self.nodes[i];
        if node.parent != NIL && !node.is_sink {
            Segment::Source
        } else {
            Segment::Sink
        }
    }
}
