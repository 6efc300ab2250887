use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use super::{cylinder_astar, goal_radius, CylinderConstraint, PlanError, PlannerParams};
use crate::geometry::Vec3;
use crate::knowledge::KnowledgeGrid;
use crate::topomap::{NodeId, TopoGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPlan {
    pub nodes: Vec<NodeId>,
    /// Concatenated edge and shortcut waypoints from the start node's anchor.
    pub waypoints: Vec<Vec3>,
    /// Search cost, with shortcut legs weighted by gamma.
    pub cost: f64,
    /// Hypothesized legs used by the plan, as (from, to).
    pub shortcuts: Vec<(NodeId, NodeId)>,
    /// Index in `waypoints` where each of `nodes` is passed.
    pub node_at: Vec<usize>,
}

/// A planned leg's waypoints and cost; `None` when A* found no path.
type Leg = Option<(Vec<Vec3>, f64)>;

/// On-demand shortcut paths, valid for one planning tick.
#[derive(Debug, Default, Clone)]
pub struct ShortcutCache {
    paths: HashMap<(NodeId, NodeId), Leg>,
}

impl ShortcutCache {
    pub fn clear(&mut self) {
        self.paths.clear();
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    fn get(&mut self, graph: &TopoGraph, grid: &KnowledgeGrid, from: NodeId, to: NodeId, p: &PlannerParams) -> Leg {
        let k = (from.min(to), from.max(to));
        let entry = self.paths.entry(k).or_insert_with(|| {
            let a = graph.node(k.0)?.anchor;
            let b = graph.node(k.1)?.anchor;
            let cyl = CylinderConstraint::between(a, b, p);
            cylinder_astar(grid, a, b, Some(&cyl), &p.astar_options()).ok().map(|r| (r.waypoints, r.cost))
        });
        entry.clone().map(|(mut w, c)| {
            if from != k.0 {
                w.reverse();
            }
            (w, c)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Via {
    Start,
    Edge,
    /// Unevaluated shortcut; `key` holds a lower bound.
    Lazy(f64),
    Shortcut,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    key: f64,
    seq: u64,
    from: NodeId,
    to: NodeId,
    via: Via,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.key.total_cmp(&self.key).then(o.seq.cmp(&self.seq))
    }
}

/// Best-first search over graph nodes where, besides existing traversable
/// edges, every node within `sigma` of an expanded node is a candidate next
/// state. Candidates without an edge cost `gamma` times their cylinder-A*
/// path cost, computed only when the search reaches their lower bound.
pub fn global_plan_through_uncertainty(
    graph: &TopoGraph,
    grid: &KnowledgeGrid,
    start: NodeId,
    goal: NodeId,
    params: &PlannerParams,
    cache: &mut ShortcutCache,
) -> Result<GlobalPlan, PlanError> {
    if graph.node(start).is_none() || graph.node(goal).is_none() {
        return Err(PlanError::NoPath);
    }
    let goal_r = goal_radius(grid, params.goal_tol);
    // node -> (cost, parent, via)
    let mut settled: BTreeMap<NodeId, (f64, NodeId, Via)> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<Entry>, key: f64, from: NodeId, to: NodeId, via: Via| {
        heap.push(Entry { key, seq, from, to, via });
        seq += 1;
    };
    push(&mut heap, 0.0, start, start, Via::Start);

    while let Some(e) = heap.pop() {
        if settled.contains_key(&e.to) {
            continue;
        }
        if let Via::Lazy(base) = e.via {
            if let Some((_, c)) = cache.get(graph, grid, e.from, e.to, params) {
                push(&mut heap, base + params.gamma * c, e.from, e.to, Via::Shortcut);
            }
            continue;
        }
        settled.insert(e.to, (e.key, e.from, e.via));
        if e.to == goal {
            return Ok(assemble(graph, &settled, start, goal, params, cache, grid));
        }
        let u = graph.node(e.to).expect("settled node exists");
        let mut linked = Vec::new();
        for v in graph.neighbors(u.id) {
            let edge = graph.edge(u.id, v).expect("adjacency mirrors edges");
            if edge.is_traversable() {
                linked.push(v);
                if !settled.contains_key(&v) {
                    push(&mut heap, e.key + edge.cost, u.id, v, Via::Edge);
                }
            }
        }
        for w in graph.nodes() {
            if w.id == u.id
                || settled.contains_key(&w.id)
                || linked.contains(&w.id)
                || w.centroid.distance(u.centroid) > params.sigma
            {
                continue;
            }
            let lb = (w.anchor.distance(u.anchor) - goal_r).max(0.0);
            push(&mut heap, e.key + params.gamma * lb, u.id, w.id, Via::Lazy(e.key));
        }
    }
    Err(PlanError::NoPath)
}

fn assemble(
    graph: &TopoGraph,
    settled: &BTreeMap<NodeId, (f64, NodeId, Via)>,
    start: NodeId,
    goal: NodeId,
    params: &PlannerParams,
    cache: &mut ShortcutCache,
    grid: &KnowledgeGrid,
) -> GlobalPlan {
    let mut nodes = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = settled[&cur].1;
        nodes.push(cur);
    }
    nodes.reverse();
    let mut waypoints = vec![graph.node(start).expect("start exists").anchor];
    let mut shortcuts = Vec::new();
    let mut node_at = Vec::with_capacity(nodes.len());
    for w in nodes.windows(2) {
        node_at.push(waypoints.len() - 1);
        let leg = match settled[&w[1]].2 {
            Via::Shortcut => {
                shortcuts.push((w[0], w[1]));
                cache.get(graph, grid, w[0], w[1], params).map(|(p, _)| p)
            }
            _ => graph.oriented_path(w[0], w[1]),
        }
        .expect("settled legs have paths");
        let skip = usize::from(leg.first() == waypoints.last());
        waypoints.extend(leg.into_iter().skip(skip));
    }
    node_at.push(waypoints.len() - 1);
    GlobalPlan { nodes, waypoints, cost: settled[&goal].0, shortcuts, node_at }
}
