//! Capacitated MAPF instances: graphs, vertex capacities, agents, and the
//! movingai `.map` / `.scen` benchmark formats.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Dense vertex id.
pub type Vertex = usize;

/// Grid layout retained when a graph is built from a map file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMeta {
    pub map_type: String,
    pub width: usize,
    pub height: usize,
    /// Raw cell characters, row-major.
    cells: Vec<u8>,
    vertex_of_cell: Vec<Option<Vertex>>,
    cell_of_vertex: Vec<usize>,
}

impl GridMeta {
    pub fn is_passable(&self, x: usize, y: usize) -> bool {
        self.vertex_at(x, y).is_some()
    }

    /// Vertex occupying cell `(x, y)`, `None` when blocked or out of bounds.
    pub fn vertex_at(&self, x: usize, y: usize) -> Option<Vertex> {
        if x >= self.width || y >= self.height {
            return None;
        }
        self.vertex_of_cell[y * self.width + x]
    }

    /// `(x, y)` of a vertex.
    pub fn coords(&self, v: Vertex) -> (usize, usize) {
        let cell = self.cell_of_vertex[v];
        (cell % self.width, cell / self.width)
    }

    pub fn passable_mask(&self) -> Vec<bool> {
        self.vertex_of_cell.iter().map(Option::is_some).collect()
    }
}

/// Undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<Vertex>>,
    grid: Option<GridMeta>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a vertex outside 0..{2}")]
    VertexOutOfRange(Vertex, Vertex, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(Vertex),
}

impl Graph {
    /// Builds a graph from an undirected edge list. Duplicate edges collapse.
    pub fn from_edges(vertex_count: usize, edges: &[(Vertex, Vertex)]) -> Result<Graph, GraphError> {
        let mut adjacency = vec![Vec::new(); vertex_count];
        for &(u, v) in edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(GraphError::VertexOutOfRange(u, v, vertex_count));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph { adjacency, grid: None })
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        Graph::from_edges(n, &edges).expect("path edges are valid")
    }

    /// Cycle on `n >= 3` vertices.
    pub fn cycle(n: usize) -> Graph {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        Graph::from_edges(n, &edges).expect("cycle edges are valid")
    }

    /// Star with center 0 and leaves `1..=leaves`.
    pub fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
        Graph::from_edges(leaves + 1, &edges).expect("star edges are valid")
    }

    /// Open 4-connected grid with grid metadata.
    pub fn open_grid(width: usize, height: usize) -> Graph {
        let cells = vec![b'.'; width * height];
        Graph::from_cells("octile", width, height, cells)
    }

    fn from_cells(map_type: &str, width: usize, height: usize, cells: Vec<u8>) -> Graph {
        let mut vertex_of_cell = vec![None; width * height];
        let mut cell_of_vertex = Vec::new();
        for (cell, &ch) in cells.iter().enumerate() {
            if is_passable_char(ch) {
                vertex_of_cell[cell] = Some(cell_of_vertex.len());
                cell_of_vertex.push(cell);
            }
        }
        let mut adjacency = vec![Vec::new(); cell_of_vertex.len()];
        for (v, &cell) in cell_of_vertex.iter().enumerate() {
            let (x, y) = (cell % width, cell / width);
            let mut push = |nx: usize, ny: usize| {
                if let Some(u) = vertex_of_cell[ny * width + nx] {
                    adjacency[v].push(u);
                }
            };
            if y > 0 {
                push(x, y - 1);
            }
            if x > 0 {
                push(x - 1, y);
            }
            if x + 1 < width {
                push(x + 1, y);
            }
            if y + 1 < height {
                push(x, y + 1);
            }
            adjacency[v].sort_unstable();
        }
        Graph {
            adjacency,
            grid: Some(GridMeta {
                map_type: map_type.to_string(),
                width,
                height,
                cells,
                vertex_of_cell,
                cell_of_vertex,
            }),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        u < self.adjacency.len() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// All undirected edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| u < v).map(|&v| (u, v)));
        }
        out
    }

    pub fn grid(&self) -> Option<&GridMeta> {
        self.grid.as_ref()
    }

    /// Connected component label per vertex.
    pub fn components(&self) -> Vec<usize> {
        let n = self.vertex_count();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for root in 0..n {
            if label[root] != usize::MAX {
                continue;
            }
            label[root] = next;
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adjacency[u] {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

fn is_passable_char(ch: u8) -> bool {
    matches!(ch, b'.' | b'G')
}

fn is_blocked_char(ch: u8) -> bool {
    matches!(ch, b'@' | b'O' | b'T' | b'W')
}

/// Parse failure with a 1-based line number.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> ParseError {
        ParseError { line, message: message.into() }
    }
}

fn header_value<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
    last_line: usize,
) -> Result<(usize, &'a str), ParseError> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| ParseError::new(last_line + 1, format!("missing `{key}` header")))?;
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(value), None) if k == key => Ok((no, value)),
        _ => Err(ParseError::new(no, format!("expected `{key} <value>`, found `{line}`"))),
    }
}

/// Parses a movingai `.map` file into a 4-connected graph over passable cells.
pub fn parse_map(text: &str) -> Result<Graph, ParseError> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).enumerate().map(|(i, l)| (i + 1, l));

    let (_, map_type) = header_value(&mut lines, "type", 0)?;
    let (no, h) = header_value(&mut lines, "height", 1)?;
    let height: usize = h.parse().map_err(|_| ParseError::new(no, format!("invalid height `{h}`")))?;
    let (no, w) = header_value(&mut lines, "width", 2)?;
    let width: usize = w.parse().map_err(|_| ParseError::new(no, format!("invalid width `{w}`")))?;
    match lines.next() {
        Some((_, "map")) => {}
        Some((no, other)) => return Err(ParseError::new(no, format!("expected `map`, found `{other}`"))),
        None => return Err(ParseError::new(4, "missing `map` line")),
    }

    let mut cells = Vec::with_capacity(width * height);
    let mut rows = 0;
    let mut last = 4;
    for (no, row) in lines {
        last = no;
        if rows == height {
            if row.trim().is_empty() {
                continue;
            }
            return Err(ParseError::new(no, format!("more than {height} map rows")));
        }
        let bytes = row.as_bytes();
        if bytes.len() != width {
            return Err(ParseError::new(no, format!("row has {} cells, expected {width}", bytes.len())));
        }
        if let Some(pos) = bytes.iter().position(|&c| !is_passable_char(c) && !is_blocked_char(c)) {
            return Err(ParseError::new(no, format!("unknown cell character `{}`", bytes[pos] as char)));
        }
        cells.extend_from_slice(bytes);
        rows += 1;
    }
    if rows != height {
        return Err(ParseError::new(last + 1, format!("found {rows} map rows, expected {height}")));
    }
    Ok(Graph::from_cells(map_type, width, height, cells))
}

/// Writes a graph with grid metadata back in movingai `.map` format.
pub fn serialize_map(graph: &Graph) -> Option<String> {
    let grid = graph.grid()?;
    let mut out = String::new();
    let _ = writeln!(out, "type {}", grid.map_type);
    let _ = writeln!(out, "height {}", grid.height);
    let _ = writeln!(out, "width {}", grid.width);
    out.push_str("map\n");
    for row in grid.cells.chunks(grid.width.max(1)) {
        out.push_str(std::str::from_utf8(row).expect("map cells are ASCII"));
        out.push('\n');
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Agent {
    pub id: usize,
    pub start: Vertex,
    pub goal: Vertex,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario needs a graph built from a grid map")]
    Unsupported,
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Parses a movingai `.scen` file. Bucket, map name, map size and optimal
/// length columns are read but not used.
pub fn parse_scenario(text: &str, graph: &Graph) -> Result<Vec<Agent>, ScenarioError> {
    let grid = graph.grid().ok_or(ScenarioError::Unsupported)?;
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).enumerate().map(|(i, l)| (i + 1, l));

    match lines.next() {
        Some((_, header)) if header.split_whitespace().next() == Some("version") => {}
        Some((no, _)) => return Err(ParseError::new(no, "expected `version` header").into()),
        None => return Err(ParseError::new(1, "missing `version` header").into()),
    }

    let mut agents = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 8 {
            return Err(ParseError::new(no, format!("expected at least 8 tab-separated fields, found {}", fields.len())).into());
        }
        let num = |i: usize| -> Result<usize, ParseError> {
            fields[i].trim().parse().map_err(|_| ParseError::new(no, format!("field {} is not a coordinate: `{}`", i + 1, fields[i])))
        };
        let (sx, sy, gx, gy) = (num(4)?, num(5)?, num(6)?, num(7)?);
        let lookup = |x: usize, y: usize| -> Result<Vertex, ParseError> {
            if x >= grid.width || y >= grid.height {
                return Err(ParseError::new(no, format!("cell ({x}, {y}) is out of bounds")));
            }
            grid.vertex_at(x, y).ok_or_else(|| ParseError::new(no, format!("cell ({x}, {y}) is blocked")))
        };
        let start = lookup(sx, sy)?;
        let goal = lookup(gx, gy)?;
        agents.push(Agent { id: agents.len(), start, goal });
    }
    Ok(agents)
}

/// Writes agents as a movingai `.scen` file (bucket 0, optimal length 0).
pub fn write_scenario(graph: &Graph, agents: &[Agent], map_name: &str) -> Option<String> {
    let grid = graph.grid()?;
    let mut out = String::from("version 1\n");
    for a in agents {
        let (sx, sy) = grid.coords(a.start);
        let (gx, gy) = grid.coords(a.goal);
        let _ = writeln!(out, "0\t{map_name}\t{}\t{}\t{sx}\t{sy}\t{gx}\t{gy}\t0", grid.width, grid.height);
    }
    Some(out)
}

/// Per-vertex capacity; every entry is at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapacityMap(Vec<u32>);

impl CapacityMap {
    pub fn uniform(vertex_count: usize, capacity: u32) -> CapacityMap {
        assert!(capacity >= 1, "capacity must be positive");
        CapacityMap(vec![capacity; vertex_count])
    }

    pub fn get(&self, v: Vertex) -> u32 {
        self.0[v]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Returns a copy with vertex `v` set to `capacity` (>= 1).
    pub fn with(&self, v: Vertex, capacity: u32) -> CapacityMap {
        assert!(capacity >= 1, "capacity must be positive");
        let mut values = self.0.clone();
        values[v] = capacity;
        CapacityMap(values)
    }
}

/// How capacities are specified on the command line or in a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CapacitySpec {
    Uniform(i64),
    /// `(vertex, capacity)` pairs; unlisted vertices get capacity 1.
    PerVertex(Vec<(usize, i64)>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CapacityError {
    #[error("capacity must be at least 1, got {0}")]
    NonPositive(i64),
    #[error("vertex {vertex} has capacity {capacity}; capacities must be at least 1")]
    NonPositiveAt { vertex: usize, capacity: i64 },
    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),
    #[error("vertex {0} listed more than once")]
    Duplicate(usize),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Parses a capacity file: one `vertex_id capacity` pair per line, `#` starts a comment.
pub fn parse_capacity_file(text: &str) -> Result<CapacitySpec, CapacityError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let bad = || ParseError::new(i + 1, format!("expected `vertex_id capacity`, found `{}`", raw.trim()));
        let (Some(v), Some(c), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad().into());
        };
        let v: usize = v.parse().map_err(|_| bad())?;
        let c: i64 = c.parse().map_err(|_| bad())?;
        entries.push((v, c));
    }
    Ok(CapacitySpec::PerVertex(entries))
}

pub fn load_capacities(spec: &CapacitySpec, graph: &Graph) -> Result<CapacityMap, CapacityError> {
    let n = graph.vertex_count();
    match spec {
        CapacitySpec::Uniform(c) => {
            let c = u32::try_from(*c).ok().filter(|&c| c >= 1).ok_or(CapacityError::NonPositive(*c))?;
            Ok(CapacityMap(vec![c; n]))
        }
        CapacitySpec::PerVertex(entries) => {
            let mut values = vec![1u32; n];
            let mut seen = HashSet::new();
            for &(vertex, capacity) in entries {
                if vertex >= n {
                    return Err(CapacityError::UnknownVertex(vertex));
                }
                if !seen.insert(vertex) {
                    return Err(CapacityError::Duplicate(vertex));
                }
                values[vertex] = u32::try_from(capacity)
                    .ok()
                    .filter(|&c| c >= 1)
                    .ok_or(CapacityError::NonPositiveAt { vertex, capacity })?;
            }
            Ok(CapacityMap(values))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub graph: Graph,
    pub capacities: CapacityMap,
    pub agents: Vec<Agent>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("capacity map covers {got} vertices, graph has {expected}")]
    CapacityLength { expected: usize, got: usize },
    #[error("capacity of vertex {0} is zero")]
    ZeroCapacity(Vertex),
    #[error("agent {index} has id {id}; ids must be 0..k-1 in order")]
    AgentId { index: usize, id: usize },
    #[error("agent {agent} references vertex {vertex} outside the graph")]
    VertexOutOfRange { agent: usize, vertex: Vertex },
    #[error("{agents} agents exceed {vertices} vertices")]
    TooManyAgents { agents: usize, vertices: usize },
    #[error("initial configuration puts {count} agents on vertex {vertex} (capacity {capacity})")]
    StartOverCapacity { vertex: Vertex, count: usize, capacity: u32 },
    #[error("goal configuration puts {count} agents on vertex {vertex} (capacity {capacity})")]
    GoalOverCapacity { vertex: Vertex, count: usize, capacity: u32 },
    #[error("cannot place {agents} agents: {reason}")]
    Infeasible { agents: usize, reason: String },
}

impl Instance {
    pub fn new(graph: Graph, capacities: CapacityMap, agents: Vec<Agent>) -> Result<Instance, InstanceError> {
        let instance = Instance { graph, capacities, agents };
        validate_instance(&instance)?;
        Ok(instance)
    }

    /// Convenience for tests and fixtures: agents from `(start, goal)` pairs.
    pub fn from_pairs(graph: Graph, capacities: CapacityMap, pairs: &[(Vertex, Vertex)]) -> Result<Instance, InstanceError> {
        let agents = pairs.iter().enumerate().map(|(id, &(start, goal))| Agent { id, start, goal }).collect();
        Instance::new(graph, capacities, agents)
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn capacity(&self, v: Vertex) -> u32 {
        self.capacities.get(v)
    }

    /// Same graph and agents under different capacities.
    pub fn with_capacities(&self, capacities: CapacityMap) -> Result<Instance, InstanceError> {
        Instance::new(self.graph.clone(), capacities, self.agents.clone())
    }

    /// Keeps only the first `k` agents.
    pub fn truncated(&self, k: usize) -> Instance {
        let mut out = self.clone();
        out.agents.truncate(k);
        out
    }
}

/// Checks every structural invariant of an instance.
pub fn validate_instance(instance: &Instance) -> Result<(), InstanceError> {
    let n = instance.graph.vertex_count();
    if instance.capacities.len() != n {
        return Err(InstanceError::CapacityLength { expected: n, got: instance.capacities.len() });
    }
    if let Some(v) = instance.capacities.as_slice().iter().position(|&c| c == 0) {
        return Err(InstanceError::ZeroCapacity(v));
    }
    if instance.agents.len() > n {
        return Err(InstanceError::TooManyAgents { agents: instance.agents.len(), vertices: n });
    }
    let mut starts = vec![0usize; n];
    let mut goals = vec![0usize; n];
    for (index, a) in instance.agents.iter().enumerate() {
        if a.id != index {
            return Err(InstanceError::AgentId { index, id: a.id });
        }
        for vertex in [a.start, a.goal] {
            if vertex >= n {
                return Err(InstanceError::VertexOutOfRange { agent: a.id, vertex });
            }
        }
        starts[a.start] += 1;
        goals[a.goal] += 1;
    }
    for v in 0..n {
        let capacity = instance.capacity(v);
        if starts[v] > capacity as usize {
            return Err(InstanceError::StartOverCapacity { vertex: v, count: starts[v], capacity });
        }
        if goals[v] > capacity as usize {
            return Err(InstanceError::GoalOverCapacity { vertex: v, count: goals[v], capacity });
        }
    }
    Ok(())
}

/// Random capacity-respecting start and goal placements on `graph`. Each
/// goal lies in the same connected component as its start.
pub fn random_agents(graph: &Graph, capacities: &CapacityMap, k: usize, seed: u64) -> Result<Vec<Agent>, InstanceError> {
    let n = graph.vertex_count();
    let slots: usize = capacities.as_slice().iter().map(|&c| c as usize).sum();
    if k > n || k > slots {
        return Err(InstanceError::Infeasible {
            agents: k,
            reason: format!("graph has {n} vertices and {slots} capacity slots"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<Vertex> = (0..n).flat_map(|v| std::iter::repeat_n(v, capacities.get(v) as usize)).collect();

    pool.shuffle(&mut rng);
    let starts: Vec<Vertex> = pool[..k].to_vec();

    pool.shuffle(&mut rng);
    let component = graph.components();
    let mut used = vec![false; pool.len()];
    let mut agents = Vec::with_capacity(k);
    for (id, &start) in starts.iter().enumerate() {
        let slot = (0..pool.len())
            .find(|&i| !used[i] && component[pool[i]] == component[start])
            .ok_or_else(|| InstanceError::Infeasible {
                agents: k,
                reason: format!("no free goal slot in the component of vertex {start}"),
            })?;
        used[slot] = true;
        agents.push(Agent { id, start, goal: pool[slot] });
    }
    Ok(agents)
}

/// Random instance on an open `width x height` grid with uniform capacity.
/// Pure function of its arguments.
pub fn generate_random(width: usize, height: usize, k: usize, capacity: u32, seed: u64) -> Result<Instance, InstanceError> {
    if capacity == 0 {
        return Err(InstanceError::ZeroCapacity(0));
    }
    let graph = Graph::open_grid(width, height);
    let capacities = CapacityMap::uniform(graph.vertex_count(), capacity);
    let agents = random_agents(&graph, &capacities, k, seed)?;
    Instance::new(graph, capacities, agents)
}
