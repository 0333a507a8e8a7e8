//! Grid navigation experiment: cells as states, compass moves with slip,
//! noisy wall sensing in four directions, and quadrant-corner goals.
//!
//! Cells are addressed by one-based `(row, col)`; states are zero-based and
//! enumerated top-to-bottom within a column, columns left-to-right:
//! `state = (row − 1) + rows·(col − 1)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::costs::{InitialStateCost, StateControlCost};
use crate::error::{Error, Result};
use crate::model::TabularModel;
use crate::scalar::Scalar;

pub const N_CONTROLS: usize = 5;
pub const STAY: usize = 4;
pub const FIG1_APPROX: &str = "fig1-approx";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    E,
    S,
    W,
}

impl Direction {
    /// Order shared by controls `0..4` and observation bits `0..4`.
    pub const ALL: [Direction; 4] = [Direction::N, Direction::E, Direction::S, Direction::W];

    pub fn bit(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::N => Direction::S,
            Direction::E => Direction::W,
            Direction::S => Direction::N,
            Direction::W => Direction::E,
        }
    }

    fn offset(self) -> (isize, isize) {
        match self {
            Direction::N => (-1, 0),
            Direction::E => (0, 1),
            Direction::S => (1, 0),
            Direction::W => (0, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WallSegment {
    pub row: usize,
    pub col: usize,
    pub dir: Direction,
}

/// On-disk grid description. Boundary walls may be omitted; interior walls
/// must be listed from both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub layout: String,
    pub rows: usize,
    pub cols: usize,
    pub slip_prob: f64,
    pub detect_given_wall: f64,
    pub detect_given_no_wall: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
    pub walls: Vec<WallSegment>,
}

fn default_discount() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub layout: String,
    pub rows: usize,
    pub cols: usize,
    pub slip_prob: f64,
    pub detect_given_wall: f64,
    pub detect_given_no_wall: f64,
    pub discount: f64,
    walls: BTreeSet<WallSegment>,
}

impl GridSpec {
    /// Grid with only its outer boundary walls.
    pub fn open(
        rows: usize,
        cols: usize,
        slip_prob: f64,
        detect_given_wall: f64,
        detect_given_no_wall: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidSpec("grid needs at least one cell".into()));
        }
        let mut spec = Self {
            layout: "open".into(),
            rows,
            cols,
            slip_prob,
            detect_given_wall,
            detect_given_no_wall,
            discount: default_discount(),
            walls: BTreeSet::new(),
        };
        spec.add_boundary();
        spec.validate()?;
        Ok(spec)
    }

    /// The default 4×4 experiment layout: boundary walls plus a short
    /// interior wall set. Wall readings alone leave several cells in
    /// different quadrants indistinguishable.
    pub fn fig1_approx() -> Self {
        let mut spec = Self::open(4, 4, 0.2, 0.8, 0.2).expect("static layout");
        spec.layout = FIG1_APPROX.into();
        for (row, col, dir) in [
            (2, 1, Direction::E),
            (1, 3, Direction::S),
            (3, 2, Direction::S),
            (3, 4, Direction::W),
        ] {
            spec.add_wall(row, col, dir).expect("static layout");
        }
        spec
    }

    pub fn from_config(config: &GridConfig) -> Result<Self> {
        let mut spec = Self::open(
            config.rows,
            config.cols,
            config.slip_prob,
            config.detect_given_wall,
            config.detect_given_no_wall,
        )?;
        spec.layout = config.layout.clone();
        spec.discount = config.discount;
        for w in &config.walls {
            spec.check_cell(w.row, w.col)?;
            spec.walls.insert(*w);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_config(&self) -> GridConfig {
        GridConfig {
            layout: self.layout.clone(),
            rows: self.rows,
            cols: self.cols,
            slip_prob: self.slip_prob,
            detect_given_wall: self.detect_given_wall,
            detect_given_no_wall: self.detect_given_no_wall,
            discount: self.discount,
            walls: self.walls.iter().copied().collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.rows * self.cols
    }

    pub fn walls(&self) -> impl Iterator<Item = &WallSegment> {
        self.walls.iter()
    }

    /// Adds a wall on `dir` of `(row, col)` and its mirror on the neighbour.
    pub fn add_wall(&mut self, row: usize, col: usize, dir: Direction) -> Result<()> {
        self.check_cell(row, col)?;
        self.walls.insert(WallSegment { row, col, dir });
        if let Some((r, c)) = self.neighbour(row, col, dir) {
            self.walls.insert(WallSegment {
                row: r,
                col: c,
                dir: dir.opposite(),
            });
        }
        Ok(())
    }

    pub fn has_wall(&self, row: usize, col: usize, dir: Direction) -> bool {
        self.walls.contains(&WallSegment { row, col, dir })
    }

    pub fn state(&self, row: usize, col: usize) -> usize {
        (row - 1) + self.rows * (col - 1)
    }

    pub fn cell(&self, state: usize) -> (usize, usize) {
        (state % self.rows + 1, state / self.rows + 1)
    }

    fn check_cell(&self, row: usize, col: usize) -> Result<()> {
        if row == 0 || col == 0 || row > self.rows || col > self.cols {
            return Err(Error::InvalidSpec(format!(
                "cell ({row}, {col}) outside {}x{} grid",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    fn neighbour(&self, row: usize, col: usize, dir: Direction) -> Option<(usize, usize)> {
        let (dr, dc) = dir.offset();
        let r = row as isize + dr;
        let c = col as isize + dc;
        if r < 1 || c < 1 || r > self.rows as isize || c > self.cols as isize {
            None
        } else {
            Some((r as usize, c as usize))
        }
    }

    fn add_boundary(&mut self) {
        for row in 1..=self.rows {
            for col in 1..=self.cols {
                for dir in Direction::ALL {
                    if self.neighbour(row, col, dir).is_none() {
                        self.walls.insert(WallSegment { row, col, dir });
                    }
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.slip_prob) {
            return Err(Error::InvalidSpec(format!(
                "slip_prob {} not in [0, 1)",
                self.slip_prob
            )));
        }
        for (name, p) in [
            ("detect_given_wall", self.detect_given_wall),
            ("detect_given_no_wall", self.detect_given_no_wall),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidSpec(format!("{name} {p} not in [0, 1]")));
            }
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidSpec(format!("discount {} not in (0, 1)", self.discount)));
        }
        for w in &self.walls {
            self.check_cell(w.row, w.col)?;
            if let Some((r, c)) = self.neighbour(w.row, w.col, w.dir) {
                if !self.has_wall(r, c, w.dir.opposite()) {
                    return Err(Error::InvalidSpec(format!(
                        "wall {:?} of ({}, {}) has no mirror on ({r}, {c})",
                        w.dir, w.row, w.col
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Observation index for per-direction detections, `Σ_d bit_d·2^d` over (N, E, S, W).
pub fn encode_observation(detected: [bool; 4]) -> usize {
    detected
        .iter()
        .enumerate()
        .filter(|(_, &d)| d)
        .map(|(i, _)| 1 << i)
        .sum()
}

pub fn decode_observation(y: usize) -> [bool; 4] {
    [y & 1 != 0, y & 2 != 0, y & 4 != 0, y & 8 != 0]
}

pub fn build_grid_model<T: Scalar>(spec: &GridSpec) -> Result<TabularModel<T>> {
    spec.validate()?;
    let n = spec.n_states();
    let ny = 16;
    let slip = T::lit(spec.slip_prob);
    let mut transition = vec![T::zero(); N_CONTROLS * n * n];
    for u in 0..N_CONTROLS {
        for from in 0..n {
            let (row, col) = spec.cell(from);
            let row_start = (u * n + from) * n;
            let target = if u == STAY {
                None
            } else {
                let dir = Direction::ALL[u];
                if spec.has_wall(row, col, dir) {
                    None
                } else {
                    spec.neighbour(row, col, dir).map(|(r, c)| spec.state(r, c))
                }
            };
            match target {
                Some(to) => {
                    transition[row_start + to] = T::one() - slip;
                    transition[row_start + from] = slip;
                }
                None => transition[row_start + from] = T::one(),
            }
        }
    }
    let mut sensor = vec![T::zero(); n * ny];
    let on_wall = T::lit(spec.detect_given_wall);
    let off_wall = T::lit(spec.detect_given_no_wall);
    for x in 0..n {
        let (row, col) = spec.cell(x);
        for y in 0..ny {
            let bits = decode_observation(y);
            let mut p = T::one();
            for (d, dir) in Direction::ALL.iter().enumerate() {
                let detect = if spec.has_wall(row, col, *dir) {
                    on_wall
                } else {
                    off_wall
                };
                p = p * if bits[d] { detect } else { T::one() - detect };
            }
            sensor[x * ny + y] = p;
        }
    }
    let observation: Vec<T> = (0..N_CONTROLS).flat_map(|_| sensor.iter().copied()).collect();
    let uniform = vec![T::one() / T::from_usize(n).unwrap(); n];
    TabularModel::new(
        n,
        N_CONTROLS,
        ny,
        transition,
        observation,
        uniform,
        T::lit(spec.discount),
    )
}

/// Corner goal of the quadrant containing `x0`. Needs even grid dimensions;
/// on 4×4 this is {1,2,5,6}→1, {3,4,7,8}→4, {9,10,13,14}→13, {11,12,15,16}→16
/// in one-based labels.
pub fn quadrant_goal(spec: &GridSpec, x0: usize) -> Result<usize> {
    if !spec.rows.is_multiple_of(2) || !spec.cols.is_multiple_of(2) {
        return Err(Error::UnsupportedGrid {
            rows: spec.rows,
            cols: spec.cols,
        });
    }
    if x0 >= spec.n_states() {
        return Err(Error::OutOfRange {
            value: x0 + 1,
            max: spec.n_states(),
        });
    }
    let (row, col) = spec.cell(x0);
    let goal_row = if row <= spec.rows / 2 { 1 } else { spec.rows };
    let goal_col = if col <= spec.cols / 2 { 1 } else { spec.cols };
    Ok(spec.state(goal_row, goal_col))
}

pub fn goal_map(spec: &GridSpec) -> Result<Vec<usize>> {
    (0..spec.n_states()).map(|x0| quadrant_goal(spec, x0)).collect()
}

/// `c(x0, x, u) = 1(x ≠ quadrant_goal(x0))`.
pub fn build_isc_cost<T: Scalar>(spec: &GridSpec) -> Result<InitialStateCost<T>> {
    let goals = goal_map(spec)?;
    Ok(InitialStateCost::from_fn(spec.n_states(), N_CONTROLS, |x0, x, _| {
        if x == goals[x0] {
            T::zero()
        } else {
            T::one()
        }
    }))
}

/// `κ(x, u) = 1(x is not a grid corner)`.
pub fn build_baseline_cost<T: Scalar>(spec: &GridSpec) -> Result<StateControlCost<T>> {
    let goals = goal_map(spec)?;
    Ok(StateControlCost::from_fn(spec.n_states(), N_CONTROLS, |x, _| {
        if goals.contains(&x) {
            T::zero()
        } else {
            T::one()
        }
    }))
}

#[derive(Debug, Clone)]
pub struct GridExperiment {
    pub spec: GridSpec,
    pub model: TabularModel<f64>,
    pub isc_cost: InitialStateCost<f64>,
    pub baseline_cost: StateControlCost<f64>,
    pub goal_map: Vec<usize>,
}

impl GridExperiment {
    pub fn build(spec: GridSpec) -> Result<Self> {
        Ok(Self {
            model: build_grid_model(&spec)?,
            isc_cost: build_isc_cost(&spec)?,
            baseline_cost: build_baseline_cost(&spec)?,
            goal_map: goal_map(&spec)?,
            spec,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    fn grid() -> GridSpec {
        GridSpec::open(4, 4, 0.2, 0.8, 0.2).unwrap()
    }

    /// One-based label helpers to mirror the state numbering used in the experiment write-up.
    fn q(spec: &GridSpec, label: usize) -> usize {
        quadrant_goal(spec, label - 1).unwrap() + 1
    }

    #[test]
    fn enumeration_order() {
        let g = grid();
        assert_eq!(g.state(2, 1) + 1, 2);
        assert_eq!(g.state(1, 2) + 1, 5);
        assert_eq!(g.cell(4), (1, 2));
    }

    #[test]
    fn stay_is_deterministic() {
        let m: TabularModel<f64> = build_grid_model(&grid()).unwrap();
        let row = m.transition_row(STAY, 0);
        assert_eq!(row[0], 1.0);
        assert_eq!(row.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn corner_sensor_likelihood() {
        let m: TabularModel<f64> = build_grid_model(&grid()).unwrap();
        let y = encode_observation([true, false, false, true]);
        assert!((m.observation(0, 0, y) - 0.4096).abs() < 1e-15);
        let total: f64 = (0..16).map(|y| m.observation(0, 0, y)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // replicated across controls
        for u in 0..N_CONTROLS {
            assert_eq!(m.observation_row(u, 0), m.observation_row(0, 0));
        }
    }

    #[test]
    fn moves_slip_or_block() {
        let g = grid();
        let m: TabularModel<f64> = build_grid_model(&g).unwrap();
        let s = g.state(2, 2);
        let e = g.state(2, 3);
        assert!((m.transition(1, s, e) - 0.8).abs() < 1e-15);
        assert!((m.transition(1, s, s) - 0.2).abs() < 1e-15);
        // moving north from the top row hits the boundary
        assert_eq!(
            m.transition_row(0, g.state(1, 3)),
            m.transition_row(STAY, g.state(1, 3))
        );
    }

    #[test]
    fn quadrant_goals() {
        let g = grid();
        assert_eq!(q(&g, 6), 1);
        assert_eq!(q(&g, 12), 16);
        assert_eq!(q(&g, 13), 13);
        for (labels, goal) in [
            ([1, 2, 5, 6], 1),
            ([3, 4, 7, 8], 4),
            ([9, 10, 13, 14], 13),
            ([11, 12, 15, 16], 16),
        ] {
            for l in labels {
                assert_eq!(q(&g, l), goal);
            }
        }
        let odd = GridSpec::open(3, 4, 0.0, 0.8, 0.2).unwrap();
        assert!(matches!(quadrant_goal(&odd, 0), Err(Error::UnsupportedGrid { .. })));
    }

    #[test]
    fn isc_and_baseline_costs() {
        let g = grid();
        let c: InitialStateCost<f64> = build_isc_cost(&g).unwrap();
        for u in 0..N_CONTROLS {
            assert_eq!(c.get(5, 0, u), 0.0);
            assert_eq!(c.get(5, 1, u), 1.0);
            for x0 in 0..16 {
                assert_eq!((0..16).map(|x| c.get(x0, x, u)).sum::<f64>(), 15.0);
            }
        }
        let k: StateControlCost<f64> = build_baseline_cost(&g).unwrap();
        assert_eq!(k.get(3, 0), 0.0);
        assert_eq!(k.get(4, 2), 1.0);
        assert_eq!((0..16).map(|x| k.get(x, 1)).sum::<f64>(), 12.0);
    }

    #[test]
    fn asymmetric_walls_rejected() {
        let mut cfg = grid().to_config();
        cfg.walls.push(WallSegment {
            row: 2,
            col: 2,
            dir: Direction::E,
        });
        assert!(matches!(GridSpec::from_config(&cfg), Err(Error::InvalidSpec(_))));
        cfg.walls.push(WallSegment {
            row: 2,
            col: 3,
            dir: Direction::W,
        });
        assert!(GridSpec::from_config(&cfg).is_ok());
    }

    #[test]
    fn bad_probabilities_rejected() {
        assert!(GridSpec::open(4, 4, 1.0, 0.8, 0.2).is_err());
        assert!(GridSpec::open(4, 4, 0.2, 1.2, 0.2).is_err());
    }

    #[test]
    fn fig1_layout_is_valid_and_ambiguous() {
        let g = GridSpec::fig1_approx();
        g.validate().unwrap();
        let m: TabularModel<f64> = build_grid_model(&g).unwrap();
        assert!(validate_model(&m).passed());
        let goals = goal_map(&g).unwrap();
        // some pair of cells in different quadrants share a wall signature
        let signature = |x: usize| {
            let (r, c) = g.cell(x);
            Direction::ALL.map(|d| g.has_wall(r, c, d))
        };
        let ambiguous = (0..16).any(|a| (0..16).any(|b| goals[a] != goals[b] && signature(a) == signature(b)));
        assert!(ambiguous);
    }

    #[test]
    fn config_round_trip() {
        let g = GridSpec::fig1_approx();
        assert_eq!(GridSpec::from_config(&g.to_config()).unwrap(), g);
    }
}
