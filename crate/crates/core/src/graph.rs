//! Graph-structured MDPs under the uniform random walk, and the reward
//! protocols used with them.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::mdp::TabularMdp;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    Star,
    Chain,
    Torus1d,
    Disconnected,
    FullyConnected,
    OpenRoom,
    Torus2d,
    FourRoom,
}

impl GraphKind {
    pub const ALL: [GraphKind; 8] = [
        GraphKind::Star,
        GraphKind::Chain,
        GraphKind::Torus1d,
        GraphKind::Disconnected,
        GraphKind::FullyConnected,
        GraphKind::OpenRoom,
        GraphKind::Torus2d,
        GraphKind::FourRoom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Star => "star",
            GraphKind::Chain => "chain",
            GraphKind::Torus1d => "torus1d",
            GraphKind::Disconnected => "disconnected",
            GraphKind::FullyConnected => "fully-connected",
            GraphKind::OpenRoom => "open-room",
            GraphKind::Torus2d => "torus2d",
            GraphKind::FourRoom => "four-room",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GraphKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown graph kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub num_states: usize,
    pub discount: f64,
}

impl GraphSpec {
    pub fn new(kind: GraphKind, num_states: usize, discount: f64) -> Self {
        Self {
            kind,
            num_states,
            discount,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.num_states;
        if s < 2 {
            return Err(Error::Config(format!("{}: need at least 2 states, got {s}", self.kind)));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config(format!(
                "discount must lie in [0, 1), got {}",
                self.discount
            )));
        }
        match self.kind {
            GraphKind::OpenRoom | GraphKind::Torus2d if perfect_square_side(s).is_none() => {
                Err(Error::Config(format!(
                    "{} needs a perfect-square number of states, got {s}",
                    self.kind
                )))
            }
            GraphKind::FourRoom if s != FOUR_ROOM_CELLS => Err(Error::Config(format!(
                "four-room layout has {FOUR_ROOM_CELLS} cells, got num_states = {s}"
            ))),
            _ => Ok(()),
        }
    }
}

fn perfect_square_side(s: usize) -> Option<usize> {
    let side = (s as f64).sqrt().round() as usize;
    (side * side == s).then_some(side)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RewardKind {
    AllOnes,
    OneHot { index: usize },
    /// iid standard normal entries rescaled to `||r||_inf = r_max`.
    GaussianNormalized { seed: u64 },
}

impl RewardKind {
    pub fn label(&self) -> String {
        match self {
            RewardKind::AllOnes => "all-ones".into(),
            RewardKind::OneHot { index } => format!("one-hot-{index}"),
            RewardKind::GaussianNormalized { seed } => format!("gaussian-{seed}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub r_max: f64,
}

impl RewardSpec {
    pub fn new(kind: RewardKind, r_max: f64) -> Self {
        Self { kind, r_max }
    }

    pub fn all_ones() -> Self {
        Self::new(RewardKind::AllOnes, 1.0)
    }

    pub fn one_hot(index: usize) -> Self {
        Self::new(RewardKind::OneHot { index }, 1.0)
    }

    pub fn gaussian(seed: u64) -> Self {
        Self::new(RewardKind::GaussianNormalized { seed }, 1.0)
    }
}

pub fn generate_reward(spec: &RewardSpec, num_states: usize) -> Result<Vector> {
    if !(spec.r_max > 0.0 && spec.r_max.is_finite()) {
        return Err(Error::Config(format!("r_max must be positive, got {}", spec.r_max)));
    }
    match spec.kind {
        RewardKind::AllOnes => Ok(Vector::from_element(num_states, spec.r_max)),
        RewardKind::OneHot { index } => {
            if index >= num_states {
                return Err(Error::Config(format!(
                    "one-hot index {index} out of range for {num_states} states"
                )));
            }
            let mut r = Vector::zeros(num_states);
            r[index] = spec.r_max;
            Ok(r)
        }
        RewardKind::GaussianNormalized { seed } => {
            let mut rng = rng::stream(seed);
            let draws: Vec<f64> = (0..num_states).map(|_| StandardNormal.sample(&mut rng)).collect();
            let peak = draws.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if peak == 0.0 {
                return Err(Error::Numerical("gaussian reward draw was identically zero".into()));
            }
            // x / |x| is exact in IEEE arithmetic, so the peak entry lands on
            // exactly +-r_max.
            Ok(Vector::from_iterator(
                num_states,
                draws.into_iter().map(|x| x / peak * spec.r_max),
            ))
        }
    }
}

/// Compass directions used by grid layouts: up, down, left, right.
pub const COMPASS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Undirected graph as neighbor multisets. A self-loop lists the state as its
/// own neighbor. Grid layouts also record per-state compass successors (the
/// state itself when a move is blocked).
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
    compass: Option<Vec<[usize; 4]>>,
}

impl Graph {
    /// Generic adjacency ingestion. Edges are undirected; `(s, s)` adds a
    /// self-loop. States with no edges become absorbing.
    pub fn from_edges(num_states: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); num_states];
        for &(a, b) in edges {
            if a >= num_states || b >= num_states {
                return Err(Error::Config(format!(
                    "edge ({a}, {b}) out of range for {num_states} states"
                )));
            }
            neighbors[a].push(b);
            if a != b {
                neighbors[b].push(a);
            }
        }
        for (s, list) in neighbors.iter_mut().enumerate() {
            if list.is_empty() {
                list.push(s);
            }
        }
        Ok(Self {
            neighbors,
            compass: None,
        })
    }

    pub fn num_states(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, s: usize) -> &[usize] {
        &self.neighbors[s]
    }

    pub fn degree(&self, s: usize) -> usize {
        self.neighbors[s].len()
    }

    pub fn compass(&self) -> Option<&[[usize; 4]]> {
        self.compass.as_deref()
    }

    /// Uniform random walk: row `s` spreads mass `1/deg(s)` over the neighbor
    /// multiset of `s`.
    pub fn random_walk(&self) -> Matrix {
        let s = self.num_states();
        let mut p = Matrix::zeros(s, s);
        for (i, list) in self.neighbors.iter().enumerate() {
            let w = 1.0 / list.len() as f64;
            for &j in list {
                p[(i, j)] += w;
            }
        }
        p
    }
}

pub fn build_graph(spec: &GraphSpec) -> Result<Graph> {
    spec.validate()?;
    let s = spec.num_states;
    let graph = match spec.kind {
        GraphKind::Star => {
            let center = s - 1;
            let mut neighbors: Vec<Vec<usize>> = (0..center).map(|_| vec![center]).collect();
            neighbors.push((0..center).collect());
            Graph {
                neighbors,
                compass: None,
            }
        }
        GraphKind::Chain => {
            let edges: Vec<_> = (0..s - 1).map(|i| (i, i + 1)).collect();
            Graph::from_edges(s, &edges)?
        }
        GraphKind::Torus1d => Graph {
            neighbors: (0..s).map(|i| vec![(i + 1) % s, (i + s - 1) % s]).collect(),
            compass: None,
        },
        GraphKind::Disconnected => Graph {
            neighbors: (0..s).map(|i| vec![i]).collect(),
            compass: None,
        },
        GraphKind::FullyConnected => Graph {
            neighbors: (0..s).map(|i| (0..s).filter(|&j| j != i).collect()).collect(),
            compass: None,
        },
        GraphKind::OpenRoom | GraphKind::Torus2d => {
            let side = perfect_square_side(s).expect("validated");
            let cells: Vec<(i64, i64)> = (0..side as i64)
                .flat_map(|r| (0..side as i64).map(move |c| (r, c)))
                .collect();
            grid_graph(&cells, side as i64, spec.kind == GraphKind::Torus2d)
        }
        GraphKind::FourRoom => {
            let layout = four_room_layout();
            grid_graph(&layout.cells, layout.side as i64, false)
        }
    };
    Ok(graph)
}

/// Graph on a set of grid cells with 4-neighborhood adjacency, optionally
/// wrapping around the `side x side` board.
fn grid_graph(cells: &[(i64, i64)], side: i64, wrap: bool) -> Graph {
    let index: HashMap<(i64, i64), usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut neighbors = Vec::with_capacity(cells.len());
    let mut compass = Vec::with_capacity(cells.len());
    for (i, &(r, c)) in cells.iter().enumerate() {
        let mut list = Vec::with_capacity(4);
        let mut moves = [i; 4];
        for (slot, (dr, dc)) in COMPASS.iter().enumerate() {
            let (mut nr, mut nc) = (r + dr, c + dc);
            if wrap {
                nr = nr.rem_euclid(side);
                nc = nc.rem_euclid(side);
            }
            if let Some(&j) = index.get(&(nr, nc)) {
                list.push(j);
                moves[slot] = j;
            }
        }
        neighbors.push(list);
        compass.push(moves);
    }
    Graph {
        neighbors,
        compass: Some(compass),
    }
}

pub fn build_graph_mdp(spec: &GraphSpec, reward: &RewardSpec) -> Result<TabularMdp> {
    let graph = build_graph(spec)?;
    let r = generate_reward(reward, spec.num_states)?;
    TabularMdp::new(graph.random_walk(), r, spec.discount, reward.r_max)
}

pub const FOUR_ROOM_SIDE: usize = 11;
pub const FOUR_ROOM_CELLS: usize = 104;

/// Open cells and undirected edges of the 11x11 four-room gridworld.
#[derive(Debug, Clone, PartialEq)]
pub struct FourRoomLayout {
    pub side: usize,
    /// (row, column) of each open cell, in row-major order.
    pub cells: Vec<(i64, i64)>,
    pub edges: Vec<(usize, usize)>,
    /// Indices (into `cells`) of the four doorway cells.
    pub doorways: Vec<usize>,
}

/// Four 5x5 rooms separated by a cross-shaped wall along row 5 and column 5,
/// with one doorway in the middle of each wall segment.
pub fn four_room_layout() -> FourRoomLayout {
    let wall = 5i64;
    let doors = [(2, wall), (8, wall), (wall, 2), (wall, 8)];
    let side = FOUR_ROOM_SIDE as i64;
    let mut cells = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if (r != wall && c != wall) || doors.contains(&(r, c)) {
                cells.push((r, c));
            }
        }
    }
    let index: HashMap<(i64, i64), usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut edges = Vec::new();
    for (i, &(r, c)) in cells.iter().enumerate() {
        for (dr, dc) in [(1, 0), (0, 1)] {
            if let Some(&j) = index.get(&(r + dr, c + dc)) {
                edges.push((i, j));
            }
        }
    }
    let doorways = doors.iter().map(|d| index[d]).collect();
    FourRoomLayout {
        side: FOUR_ROOM_SIDE,
        cells,
        edges,
        doorways,
    }
}
