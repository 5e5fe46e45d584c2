//! Graph construction from positive decision weights plus the statistics
//! reported for the emergent networks and budget distributions: degrees,
//! path lengths, clustering (raw and one-mode projected), random baselines,
//! rank-size ordering, power-law tail fits, and histogram distances.

use std::fmt;

use crate::model::WeightMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    EmptyInput,
    NonFinite { what: &'static str },
    NonPositiveValue,
    OutOfRange { what: &'static str },
    InsufficientTailPoints { available: usize },
    BinMismatch,
    EdgeOutOfRange { investor: usize, initiator: usize },
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::EmptyInput => write!(f, "input is empty"),
            AnalysisError::NonFinite { what } => write!(f, "{what} must be finite"),
            AnalysisError::NonPositiveValue => write!(f, "values must be strictly positive"),
            AnalysisError::OutOfRange { what } => write!(f, "{what} is out of range"),
            AnalysisError::InsufficientTailPoints { available } => {
                write!(f, "tail fit needs at least 2 points, got {available}")
            }
            AnalysisError::BinMismatch => write!(f, "histograms use different bin edges"),
            AnalysisError::EdgeOutOfRange { investor, initiator } => {
                write!(f, "edge ({investor}, {initiator}) outside the declared node counts")
            }
        }
    }
}

impl std::error::Error for AnalysisError {}

/// Investor-initiator graph: an edge is a strictly positive decision weight.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    investor_count: usize,
    initiator_count: usize,
    edges: Vec<(usize, usize)>,
}

impl BipartiteGraph {
    /// Build from an explicit edge list. Edges are validated against the node
    /// counts and deduplicated.
    pub fn from_edges(
        investor_count: usize,
        initiator_count: usize,
        mut edges: Vec<(usize, usize)>,
    ) -> Result<Self, AnalysisError> {
        for &(k, j) in &edges {
            if k >= investor_count || j >= initiator_count {
                return Err(AnalysisError::EdgeOutOfRange { investor: k, initiator: j });
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(BipartiteGraph { investor_count, initiator_count, edges })
    }

    pub fn investor_count(&self) -> usize {
        self.investor_count
    }

    pub fn initiator_count(&self) -> usize {
        self.initiator_count
    }

    pub fn node_count(&self) -> usize {
        self.investor_count + self.initiator_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Degree of every investor and every initiator.
    pub fn degrees(&self) -> (Vec<usize>, Vec<usize>) {
        let mut investors = vec![0usize; self.investor_count];
        let mut initiators = vec![0usize; self.initiator_count];
        for &(k, j) in &self.edges {
            investors[k] += 1;
            initiators[j] += 1;
        }
        (investors, initiators)
    }

    /// View as a plain undirected graph: investors are nodes `0..N`,
    /// initiators `N..N+J`.
    pub fn to_undirected(&self) -> UndirectedGraph {
        let mut graph = UndirectedGraph::new(self.node_count());
        for &(k, j) in &self.edges {
            graph.add_edge(k, self.investor_count + j);
        }
        graph
    }
}

/// Threshold the weight matrix at zero: edge (k, j) iff `w_kj > 0`.
pub fn build_graph(weights: &WeightMatrix) -> BipartiteGraph {
    BipartiteGraph {
        investor_count: weights.investor_count(),
        initiator_count: weights.initiator_count(),
        edges: weights.positive_entries().map(|(k, j, _)| (k, j)).collect(),
    }
}

pub fn count_links(graph: &BipartiteGraph) -> usize {
    graph.edges.len()
}

pub fn max_degree(graph: &BipartiteGraph) -> usize {
    let (investors, initiators) = graph.degrees();
    investors.into_iter().chain(initiators).max().unwrap_or(0)
}

/// Mean degree over all nodes, isolated ones included: `2V / (N + J)`.
pub fn average_degree(graph: &BipartiteGraph) -> f64 {
    if graph.node_count() == 0 {
        return 0.0;
    }
    2.0 * graph.edges.len() as f64 / graph.node_count() as f64
}

/// Undirected simple graph with bitset adjacency rows; scales to the dense
/// one-mode projections the analysis produces.
#[derive(Debug, Clone)]
pub struct UndirectedGraph {
    nodes: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl UndirectedGraph {
    pub fn new(nodes: usize) -> Self {
        let words_per_row = nodes.div_ceil(64);
        UndirectedGraph { nodes, words_per_row, bits: vec![0; nodes * words_per_row] }
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    fn row(&self, v: usize) -> &[u64] {
        let start = v * self.words_per_row;
        &self.bits[start..start + self.words_per_row]
    }

    /// Insert an undirected edge; self-loops are ignored.
    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u < self.nodes && v < self.nodes, "node out of range");
        if u == v {
            return;
        }
        self.bits[u * self.words_per_row + v / 64] |= 1u64 << (v % 64);
        self.bits[v * self.words_per_row + u / 64] |= 1u64 << (u % 64);
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.nodes && v < self.nodes && self.row(u)[v / 64] >> (v % 64) & 1 == 1
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row(v).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.nodes).map(|v| self.degree(v)).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(v).iter().enumerate().flat_map(|(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }

    /// Mean shortest-path distance over all connected node pairs, from a
    /// breadth-first search out of every node. Pairs with no path are left
    /// out of the mean; `None` when no pair is connected at all.
    pub fn average_path_length(&self) -> Option<f64> {
        let mut total: u64 = 0;
        let mut pairs: u64 = 0;
        let mut dist = vec![u32::MAX; self.nodes];
        let mut queue = Vec::with_capacity(self.nodes);
        for source in 0..self.nodes {
            dist.fill(u32::MAX);
            dist[source] = 0;
            queue.clear();
            queue.push(source);
            let mut head = 0;
            while head < queue.len() {
                let v = queue[head];
                head += 1;
                let next = dist[v] + 1;
                for u in self.neighbors(v) {
                    if dist[u] == u32::MAX {
                        dist[u] = next;
                        queue.push(u);
                    }
                }
            }
            for &d in &dist {
                if d != u32::MAX && d > 0 {
                    total += d as u64;
                    pairs += 1;
                }
            }
        }
        // Ordered pairs counted twice; the ratio is unchanged.
        (pairs > 0).then(|| total as f64 / pairs as f64)
    }

    /// Mean local clustering over all nodes; nodes with degree < 2 count 0.
    pub fn clustering_coefficient(&self) -> f64 {
        if self.nodes == 0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for v in 0..self.nodes {
            let degree = self.degree(v);
            if degree < 2 {
                continue;
            }
            let row_v = self.row(v);
            let mut among: u64 = 0;
            for u in self.neighbors(v) {
                let row_u = self.row(u);
                among += row_u
                    .iter()
                    .zip(row_v)
                    .map(|(&a, &b)| (a & b).count_ones() as u64)
                    .sum::<u64>();
            }
            // Every edge among neighbors shows up twice in the intersection sum.
            let links_among = among / 2;
            let possible = (degree * (degree - 1) / 2) as u64;
            acc += links_among as f64 / possible as f64;
        }
        acc / self.nodes as f64
    }
}

/// Clustering of the raw investor-initiator graph. Structurally zero (the
/// graph has no triangles); kept as a computed check rather than a constant.
pub fn clustering_coefficient(graph: &BipartiteGraph) -> f64 {
    graph.to_undirected().clustering_coefficient()
}

/// One-mode projection: investors become the nodes, adjacent iff they share
/// at least one initiator.
pub fn project_onto_investors(graph: &BipartiteGraph) -> UndirectedGraph {
    let mut projection = UndirectedGraph::new(graph.investor_count);
    let mut per_initiator: Vec<Vec<usize>> = vec![Vec::new(); graph.initiator_count];
    for &(k, j) in &graph.edges {
        per_initiator[j].push(k);
    }
    let words = projection.words_per_row;
    let mut mask = vec![0u64; words];
    for investors in &per_initiator {
        if investors.len() < 2 {
            continue;
        }
        mask.fill(0);
        for &k in investors {
            mask[k / 64] |= 1u64 << (k % 64);
        }
        for &k in investors {
            let start = k * words;
            for (w, &m) in mask.iter().enumerate() {
                projection.bits[start + w] |= m;
            }
            // strip the self bit
            projection.bits[start + k / 64] &= !(1u64 << (k % 64));
        }
    }
    projection
}

/// Headline clustering number: mean local clustering of the projection.
pub fn clustering_projected(projection: &UndirectedGraph) -> f64 {
    projection.clustering_coefficient()
}

/// Path length and clustering a random graph with the same node count and
/// mean degree would show: `(ln n / ln <k>, <k> / n)`. The path-length
/// baseline is undefined (absent) for mean degree at or below 1.
pub fn random_baselines(node_count: usize, avg_degree: f64) -> (Option<f64>, f64) {
    let c_rand = avg_degree / node_count as f64;
    let l_rand = (avg_degree > 1.0 && node_count > 0)
        .then(|| (node_count as f64).ln() / avg_degree.ln());
    (l_rand, c_rand)
}

/// Everything the network tables report for one graph.
#[derive(Debug, Clone)]
pub struct NetworkMetrics {
    pub links: usize,
    pub max_degree: usize,
    pub average_degree: f64,
    pub avg_path_length: Option<f64>,
    pub clustering_bipartite: f64,
    pub clustering_projected: f64,
    pub l_rand: Option<f64>,
    pub c_rand: f64,
}

/// Compute the full metrics row for one snapshot graph.
pub fn network_metrics(graph: &BipartiteGraph) -> NetworkMetrics {
    let links = count_links(graph);
    let avg_degree = average_degree(graph);
    let (l_rand, c_rand) = random_baselines(graph.node_count(), avg_degree);
    NetworkMetrics {
        links,
        max_degree: max_degree(graph),
        average_degree: avg_degree,
        avg_path_length: graph.to_undirected().average_path_length(),
        clustering_bipartite: clustering_coefficient(graph),
        clustering_projected: clustering_projected(&project_onto_investors(graph)),
        l_rand,
        c_rand,
    }
}

/// Values sorted descending and paired with 1-based ranks. Ties keep their
/// input order.
pub fn rank_size(values: &[f64]) -> Vec<(usize, f64)> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("rank_size requires comparable values"));
    sorted.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect()
}

/// Least-squares fit of `log value` against `log rank` over the largest
/// values of a rank-size sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub tail_fraction: f64,
    pub points_used: usize,
    pub r_squared: f64,
}

/// Fit the top `tail_fraction` of the rank-size sequence on log-log axes.
/// All values must be strictly positive. Natural logarithms throughout.
pub fn powerlaw_tail_slope(values: &[f64], tail_fraction: f64) -> Result<TailFit, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    if !tail_fraction.is_finite() || tail_fraction <= 0.0 || tail_fraction > 1.0 {
        return Err(AnalysisError::OutOfRange { what: "tail_fraction" });
    }
    for &v in values {
        if !v.is_finite() {
            return Err(AnalysisError::NonFinite { what: "value" });
        }
        if v <= 0.0 {
            return Err(AnalysisError::NonPositiveValue);
        }
    }
    let ranked = rank_size(values);
    let points_used = ((tail_fraction * ranked.len() as f64).ceil() as usize).min(ranked.len());
    if points_used < 2 {
        return Err(AnalysisError::InsufficientTailPoints { available: points_used });
    }

    // Constant data is an exact flat line; skip the regression so rounding in
    // the mean cannot fabricate a tiny slope.
    if ranked[..points_used].iter().all(|&(_, v)| v == ranked[0].1) {
        return Ok(TailFit {
            slope: 0.0,
            intercept: ranked[0].1.ln(),
            tail_fraction,
            points_used,
            r_squared: 1.0,
        });
    }

    let n = points_used as f64;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    for &(rank, value) in &ranked[..points_used] {
        sum_x += (rank as f64).ln();
        sum_y += value.ln();
    }
    let mean_x = sum_x / n;
    let mean_y = sum_y / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(rank, value) in &ranked[..points_used] {
        let dx = (rank as f64).ln() - mean_x;
        let dy = value.ln() - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = mean_y - slope * mean_x;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(TailFit { slope, intercept, tail_fraction, points_used, r_squared })
}

/// Default bin count for budget histograms; distributions span decades, so
/// bins are log-spaced.
pub const DEFAULT_HISTOGRAM_BINS: usize = 50;

/// Normalized histogram over explicit bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

/// `bins` logarithmically spaced bin edges spanning `[min, max]`; a
/// degenerate span is widened around the single value.
pub fn log_spaced_edges(min: f64, max: f64, bins: usize) -> Result<Vec<f64>, AnalysisError> {
    if !(min.is_finite() && max.is_finite()) {
        return Err(AnalysisError::NonFinite { what: "edge bound" });
    }
    if min <= 0.0 || max < min {
        return Err(AnalysisError::OutOfRange { what: "edge bound" });
    }
    if bins == 0 {
        return Err(AnalysisError::OutOfRange { what: "bins" });
    }
    let (lo, hi) = if min == max { (min * 0.5, max * 2.0) } else { (min, max) };
    let log_lo = lo.ln();
    let log_hi = hi.ln();
    let mut edges = Vec::with_capacity(bins + 1);
    for i in 0..=bins {
        let t = i as f64 / bins as f64;
        edges.push((log_lo + t * (log_hi - log_lo)).exp());
    }
    edges[0] = lo;
    edges[bins] = hi;
    Ok(edges)
}

/// Bin the values and normalize to total mass 1 over the values that fall
/// inside the edges. The last bin includes its upper edge.
pub fn histogram(values: &[f64], edges: &[f64]) -> Result<Histogram, AnalysisError> {
    if edges.len() < 2 {
        return Err(AnalysisError::OutOfRange { what: "edges" });
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(AnalysisError::OutOfRange { what: "edges" });
    }
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for &v in values {
        if !v.is_finite() {
            return Err(AnalysisError::NonFinite { what: "value" });
        }
        if v < edges[0] || v > edges[bins] {
            continue;
        }
        // partition_point gives the first edge greater than v.
        let idx = edges.partition_point(|&e| e <= v).min(bins).max(1) - 1;
        counts[idx] += 1;
        total += 1;
    }
    let mass = if total == 0 {
        vec![0.0; bins]
    } else {
        counts.into_iter().map(|c| c as f64 / total as f64).collect()
    };
    Ok(Histogram { edges: edges.to_vec(), mass })
}

/// L1 distance between two histograms on identical bin edges; ranges over
/// [0, 2] for normalized histograms.
pub fn stationarity_distance(a: &Histogram, b: &Histogram) -> Result<f64, AnalysisError> {
    if a.edges.len() != b.edges.len()
        || a.edges.iter().zip(&b.edges).any(|(x, y)| x.to_bits() != y.to_bits())
    {
        return Err(AnalysisError::BinMismatch);
    }
    Ok(a.mass.iter().zip(&b.mass).map(|(x, y)| (x - y).abs()).sum())
}
