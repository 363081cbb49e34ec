//! Stag-Hare gridworld.
//!
//! Hunters move on a rectangular grid with row-major cell indices. Left
//! alone, a hunter stays put with probability `stay_prob` and otherwise
//! drifts to one of its `b` von Neumann neighbours with probability
//! `(1 - stay_prob) / b`. Standing on a hare costs `hare_cost` per hunter;
//! two or more hunters on a stag cell together cost `stag_cost` once.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::model::{JointSpace, Model};
use crate::policy::JointPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub hare_cells: BTreeSet<usize>,
    pub stag_cells: BTreeSet<usize>,
    pub stay_prob: f64,
    pub hare_cost: f64,
    pub stag_cost: f64,
    pub n_hunters: usize,
}

impl Default for GridSpec {
    /// Two hunters on 5x5, hares in the corners and the stag in the centre.
    fn default() -> Self {
        Self::square(5)
    }
}

impl GridSpec {
    /// An `n x n` grid with hares in the four corners and the stag in the
    /// centre cell (rounded down for even `n`).
    pub fn square(n: usize) -> Self {
        let last = n.saturating_sub(1);
        Self {
            width: n,
            height: n,
            hare_cells: [0, last, last * n, last * n + last].into_iter().collect(),
            stag_cells: [(n / 2) * n + n / 2].into_iter().collect(),
            stay_prob: 0.9,
            hare_cost: -2.0,
            stag_cost: -10.0,
            n_hunters: 2,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.width == 0 || self.height == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if self.n_hunters == 0 {
            return bad("at least one hunter is required".into());
        }
        if !(self.stay_prob > 0.0 && self.stay_prob < 1.0) {
            return bad(format!("stay_prob {} not in (0, 1)", self.stay_prob));
        }
        if !self.hare_cost.is_finite() || !self.stag_cost.is_finite() {
            return bad("costs must be finite".into());
        }
        if let Some(c) = self.hare_cells.intersection(&self.stag_cells).next() {
            return bad(format!("cell {c} is both a hare and a stag cell"));
        }
        if let Some(&c) = self
            .hare_cells
            .iter()
            .chain(&self.stag_cells)
            .find(|&&c| c >= self.n_cells())
        {
            return bad(format!("cell {c} outside the {}x{} grid", self.width, self.height));
        }
        if self.n_cells() == 1 {
            return bad("a single-cell grid has no moves".into());
        }
        Ok(())
    }

    /// 4-connected neighbours of `cell`, in increasing index order.
    pub fn neighbors(&self, cell: usize) -> Vec<usize> {
        let (row, col) = (cell / self.width, cell % self.width);
        let mut out = Vec::with_capacity(4);
        if row > 0 {
            out.push(cell - self.width);
        }
        if col > 0 {
            out.push(cell - 1);
        }
        if col + 1 < self.width {
            out.push(cell + 1);
        }
        if row + 1 < self.height {
            out.push(cell + self.width);
        }
        out
    }

    /// Uncontrolled row of a single hunter standing on `cell`.
    pub fn cell_row(&self, cell: usize) -> Result<Distribution> {
        let neighbors = self.neighbors(cell);
        let move_prob = (1.0 - self.stay_prob) / neighbors.len() as f64;
        let pairs = std::iter::once((cell, self.stay_prob))
            .chain(neighbors.into_iter().map(|n| (n, move_prob)))
            .collect();
        Distribution::new(pairs)
    }

    /// Intrinsic cost of the joint position `cells`.
    pub fn cost(&self, cells: &[usize]) -> f64 {
        let hares = cells.iter().filter(|c| self.hare_cells.contains(c)).count();
        let on_stag = cells.iter().filter(|c| self.stag_cells.contains(c)).count();
        let stag = if on_stag > 1 { self.stag_cost } else { 0.0 };
        self.hare_cost * hares as f64 + stag
    }

    pub fn space(&self) -> Result<JointSpace> {
        JointSpace::new(vec![self.n_cells(); self.n_hunters])
    }

    /// Shortest-path distance from every cell to the nearest stag cell.
    fn stag_distances(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_cells()];
        let mut queue = VecDeque::new();
        for &c in &self.stag_cells {
            dist[c] = Some(0);
            queue.push_back(c);
        }
        while let Some(c) = queue.pop_front() {
            let d = dist[c].unwrap();
            for n in self.neighbors(c) {
                if dist[n].is_none() {
                    dist[n] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Next cell on a shortest path to the stag, ties broken toward the
    /// lowest cell index. Hunters already on a stag cell stay.
    pub fn step_toward_stag(&self, cell: usize) -> Result<usize> {
        let dist = self.stag_distances();
        next_cell(self, &dist, cell)
    }
}

fn next_cell(spec: &GridSpec, dist: &[Option<usize>], cell: usize) -> Result<usize> {
    match dist[cell] {
        None => Err(Error::Unreachable { cell }),
        Some(0) => Ok(cell),
        Some(d) => Ok(spec
            .neighbors(cell)
            .into_iter()
            .find(|&n| dist[n] == Some(d - 1))
            .expect("a BFS parent always exists")),
    }
}

/// Builds the factored model. Each hunter's uncontrolled row depends only
/// on its own cell.
pub fn build_model(spec: &GridSpec, gamma: f64) -> Result<Model> {
    spec.validate()?;
    let space = spec.space()?;
    let cell_rows = (0..spec.n_cells())
        .map(|c| spec.cell_row(c))
        .collect::<Result<Vec<_>>>()?;
    let kernels = (0..spec.n_hunters)
        .map(|agent| {
            (0..space.len())
                .map(|s| cell_rows[space.substate(s, agent)].clone())
                .collect()
        })
        .collect();
    let cost = (0..space.len())
        .map(|s| spec.cost(&space.decode_unchecked(s)))
        .collect();
    Model::new(space.sizes().to_vec(), kernels, cost, gamma)
}

/// Deterministic joint policy that walks every hunter along a shortest
/// path to the stag.
pub fn deterministic_baseline(spec: &GridSpec, model: &Model) -> Result<JointPolicy> {
    spec.validate()?;
    let space = model.space();
    if space.sizes() != spec.space()?.sizes() {
        return Err(Error::InvalidModel("model does not match the grid spec".into()));
    }
    if spec.stag_cells.is_empty() {
        return Err(Error::Unreachable { cell: 0 });
    }
    let dist = spec.stag_distances();
    let moves = (0..spec.n_cells())
        .map(|c| next_cell(spec, &dist, c))
        .collect::<Result<Vec<_>>>()?;
    let rows = (0..space.len())
        .map(|s| {
            let next: Vec<usize> = space
                .decode_unchecked(s)
                .into_iter()
                .map(|c| moves[c])
                .collect();
            Ok(Distribution::point_mass(space.encode(&next)?))
        })
        .collect::<Result<Vec<_>>>()?;
    JointPolicy::new(model, rows)
}

/// Manhattan distance between two cells.
pub fn manhattan(spec: &GridSpec, a: usize, b: usize) -> usize {
    let (ra, ca) = (a / spec.width, a % spec.width);
    let (rb, cb) = (b / spec.width, b % spec.width);
    ra.abs_diff(rb) + ca.abs_diff(cb)
}
