//! Grid-navigation scenario generator.
//!
//! States are the nodes of a `rows × cols` grid in row-major order
//! (`node = r·cols + c`); admissible moves from a node are stay, east
//! (`c + 1`), and north (`r + 1`), with out-of-bounds moves folded into stay.
//! The target follows the east-first staircase route from start to goal;
//! each source follows its own staircase route through a list of waypoints.
//! Kernels are stage-dependent: at stage `k` the row at state `x` puts mass
//! `1 - noise` on the first staircase move from `x` toward the route's
//! nominal time-`k` position (toward the goal when that position is no
//! longer reachable), and spreads `noise` uniformly over the remaining
//! admissible moves.
//!
//! The `penalty` reward preset penalizes the node the target route visits
//! two moves before the goal and favors a node off the target route (the
//! north-first staircase's midpoint) by the same magnitude `rho`, at every
//! stage — on the 5×5 grid with start 0, goal 24 these are nodes 18 and 11.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    BehaviorSequence, Pmf, RewardSchedule, Scenario, SourceSpec, StateSpace, TransitionKernel,
};

/// Route bias of one source: visit `waypoints` (in order, row-major node
/// indices) on the way to the goal, with off-route mass `noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub waypoints: Vec<usize>,
    pub noise: f64,
}

/// Agent reward shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RewardPreset {
    /// All rewards zero: the agent only tracks the target.
    Zero,
    /// `-rho` on the penalized node, `+rho` on the favored node, every stage.
    Penalty { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub horizon: usize,
    /// Row-major node indices.
    pub start: usize,
    pub goal: usize,
    /// Off-route mass of the target kernels, in `[0, 1)`.
    pub noise: f64,
    pub source_profiles: Vec<SourceProfile>,
    pub preset: RewardPreset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cell {
    r: usize,
    c: usize,
}

impl Cell {
    fn of(node: usize, cols: usize) -> Self {
        Cell {
            r: node / cols,
            c: node % cols,
        }
    }

    fn node(self, cols: usize) -> usize {
        self.r * cols + self.c
    }

    /// `other` reachable from `self` with east/north moves only.
    fn cone_contains(self, other: Cell) -> bool {
        other.r >= self.r && other.c >= self.c
    }

    fn manhattan(self, other: Cell) -> usize {
        (other.r - self.r) + (other.c - self.c)
    }
}

/// One staircase move from `from` toward `to` (requires `to` in the cone):
/// east while the column deficit is at least the row deficit, north otherwise.
fn staircase_step(from: Cell, to: Cell) -> Cell {
    debug_assert!(from.cone_contains(to));
    let rd = to.r - from.r;
    let cd = to.c - from.c;
    if cd > 0 && cd >= rd {
        Cell {
            r: from.r,
            c: from.c + 1,
        }
    } else if rd > 0 {
        Cell {
            r: from.r + 1,
            c: from.c,
        }
    } else {
        from
    }
}

/// Mirror staircase (north-first); used only to place the favored node.
fn north_first_step(from: Cell, to: Cell) -> Cell {
    let rd = to.r - from.r;
    let cd = to.c - from.c;
    if rd > 0 && rd >= cd {
        Cell {
            r: from.r + 1,
            c: from.c,
        }
    } else if cd > 0 {
        Cell {
            r: from.r,
            c: from.c + 1,
        }
    } else {
        from
    }
}

fn walk(from: Cell, to: Cell, step: fn(Cell, Cell) -> Cell) -> Vec<Cell> {
    let mut path = Vec::with_capacity(from.manhattan(to));
    let mut cur = from;
    while cur != to {
        cur = step(cur, to);
        path.push(cur);
    }
    path
}

impl GridSpec {
    fn num_nodes(&self) -> usize {
        self.rows * self.cols
    }

    fn check(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InfeasibleRoute {
                reason: "empty grid".into(),
            });
        }
        if self.start >= self.num_nodes() || self.goal >= self.num_nodes() {
            return Err(Error::InfeasibleRoute {
                reason: format!(
                    "start {} or goal {} outside the {}x{} grid",
                    self.start, self.goal, self.rows, self.cols
                ),
            });
        }
        if !(0.0..1.0).contains(&self.noise)
            || self
                .source_profiles
                .iter()
                .any(|p| !(0.0..1.0).contains(&p.noise))
        {
            return Err(Error::InfeasibleRoute {
                reason: "noise must lie in [0, 1)".into(),
            });
        }
        let start = Cell::of(self.start, self.cols);
        let goal = Cell::of(self.goal, self.cols);
        if !start.cone_contains(goal) {
            return Err(Error::InfeasibleRoute {
                reason: format!(
                    "goal {} is not reachable from start {} with east/north moves",
                    self.goal, self.start
                ),
            });
        }
        if self.horizon < start.manhattan(goal) {
            return Err(Error::InfeasibleRoute {
                reason: format!(
                    "horizon {} is shorter than the start-goal distance {}",
                    self.horizon,
                    start.manhattan(goal)
                ),
            });
        }
        Ok(())
    }

    /// Nominal positions at times `0..=horizon` for a route through
    /// `waypoints` and then the goal, parked at the goal afterwards.
    fn nominal_route(&self, waypoints: &[usize]) -> Result<Vec<Cell>> {
        let cols = self.cols;
        let mut route = vec![Cell::of(self.start, cols)];
        for (&w, name) in waypoints
            .iter()
            .zip(1..)
            .map(|(w, i)| (w, format!("waypoint {i}")))
            .chain(std::iter::once((&self.goal, "goal".to_string())))
        {
            if w >= self.num_nodes() {
                return Err(Error::InfeasibleRoute {
                    reason: format!("{name} ({w}) outside the grid"),
                });
            }
            let cur = *route.last().unwrap();
            let next = Cell::of(w, cols);
            if !cur.cone_contains(next) {
                return Err(Error::InfeasibleRoute {
                    reason: format!(
                        "{name} ({w}) is not reachable from node {} with east/north moves",
                        cur.node(cols)
                    ),
                });
            }
            route.extend(walk(cur, next, staircase_step));
        }
        if route.len() > self.horizon + 1 {
            return Err(Error::InfeasibleRoute {
                reason: format!(
                    "route needs {} moves but the horizon is {}",
                    route.len() - 1,
                    self.horizon
                ),
            });
        }
        route.resize(self.horizon + 1, Cell::of(self.goal, cols));
        Ok(route)
    }

    fn admissible(&self, x: Cell) -> Vec<Cell> {
        let mut moves = vec![x];
        if x.c + 1 < self.cols {
            moves.push(Cell { r: x.r, c: x.c + 1 });
        }
        if x.r + 1 < self.rows {
            moves.push(Cell { r: x.r + 1, c: x.c });
        }
        moves
    }

    /// The move preferred at stage `k` from `x`: steer toward the route's
    /// nominal time-`k` position, falling back to the goal and then to stay.
    fn preferred(&self, x: Cell, objective: Cell) -> Cell {
        let goal = Cell::of(self.goal, self.cols);
        if x.cone_contains(objective) {
            staircase_step(x, objective)
        } else if x.cone_contains(goal) {
            staircase_step(x, goal)
        } else {
            x
        }
    }

    fn kernels_for_route(&self, route: &[Cell], noise: f64) -> BehaviorSequence {
        let size = self.num_nodes();
        let kernels = (1..=self.horizon)
            .map(|k| {
                let rows = (0..size)
                    .map(|node| {
                        let x = Cell::of(node, self.cols);
                        let moves = self.admissible(x);
                        let preferred = self.preferred(x, route[k]).node(self.cols);
                        let mut row = vec![0.0; size];
                        if moves.len() == 1 || noise == 0.0 {
                            row[preferred] = 1.0;
                        } else {
                            let spread = noise / (moves.len() - 1) as f64;
                            let mut rest = 0.0;
                            for m in &moves {
                                let m = m.node(self.cols);
                                if m != preferred {
                                    row[m] = spread;
                                    rest += spread;
                                }
                            }
                            row[preferred] = 1.0 - rest;
                        }
                        row
                    })
                    .collect();
                TransitionKernel::new(rows)
            })
            .collect();
        BehaviorSequence::new(kernels)
    }

    /// Target-route position two moves before reaching the goal.
    fn penalized_node(&self, target_route: &[Cell]) -> usize {
        let dist = Cell::of(self.start, self.cols).manhattan(Cell::of(self.goal, self.cols));
        target_route[dist - 2].node(self.cols)
    }

    /// Midpoint of the north-first staircase, off the target route.
    fn favored_node(&self) -> usize {
        let start = Cell::of(self.start, self.cols);
        let goal = Cell::of(self.goal, self.cols);
        let mut path = vec![start];
        path.extend(walk(start, goal, north_first_step));
        path[start.manhattan(goal) / 2 - 1].node(self.cols)
    }
}

/// Default source profiles: source 1 follows the target route exactly,
/// source 2 runs east-heavy and reaches the goal's column early (skirting the
/// penalized node), source 3 hugs the start's column; further sources take a
/// seeded random monotone waypoint. All use the target's noise.
pub fn default_profiles(g: &GridSpec, count: usize, seed: u64) -> Result<Vec<SourceProfile>> {
    g.check()?;
    if count == 0 {
        return Err(Error::DimensionMismatch(
            "a scenario needs at least one source".into(),
        ));
    }
    let cols = g.cols;
    let start = Cell::of(g.start, cols);
    let goal = Cell::of(g.goal, cols);
    let mut profiles = vec![SourceProfile {
        waypoints: vec![],
        noise: g.noise,
    }];
    if count >= 2 {
        let east_exit = Cell {
            r: start.r + (goal.r - start.r) / 2,
            c: goal.c,
        };
        profiles.push(SourceProfile {
            waypoints: vec![east_exit.node(cols)],
            noise: g.noise,
        });
    }
    if count >= 3 {
        let corner = Cell {
            r: goal.r,
            c: start.c,
        };
        profiles.push(SourceProfile {
            waypoints: vec![corner.node(cols)],
            noise: g.noise,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while profiles.len() < count {
        let r = start.r + (rng.next_u64() as usize) % (goal.r - start.r + 1);
        let c = start.c + (rng.next_u64() as usize) % (goal.c - start.c + 1);
        profiles.push(SourceProfile {
            waypoints: vec![Cell { r, c }.node(cols)],
            noise: g.noise,
        });
    }
    profiles.truncate(count);
    Ok(profiles)
}

/// Builds the full scenario for a grid spec. `seed` is only consulted when
/// `source_profiles` is empty, to synthesize three default profiles.
pub fn generate_grid_scenario(g: &GridSpec, seed: u64) -> Result<Scenario> {
    g.check()?;
    let profiles = if g.source_profiles.is_empty() {
        default_profiles(g, 3, seed)?
    } else {
        g.source_profiles.clone()
    };

    let size = g.num_nodes();
    let target_route = g.nominal_route(&[])?;
    let target = g.kernels_for_route(&target_route, g.noise);

    let mut sources = Vec::with_capacity(profiles.len());
    for profile in &profiles {
        let route = g.nominal_route(&profile.waypoints)?;
        let mut kernels = g.kernels_for_route(&route, profile.noise);
        project_support(&mut kernels, &target);
        sources.push(SourceSpec::from_kernels(kernels));
    }

    let reward = match g.preset {
        RewardPreset::Zero => RewardSchedule::zero(g.horizon, size),
        RewardPreset::Penalty { rho } => {
            let dist = Cell::of(g.start, g.cols).manhattan(Cell::of(g.goal, g.cols));
            if dist < 3 {
                return Err(Error::InfeasibleRoute {
                    reason: "penalty preset needs a start-goal distance of at least 3".into(),
                });
            }
            let mut row = vec![0.0; size];
            row[g.penalized_node(&target_route)] = -rho;
            row[g.favored_node()] = rho;
            RewardSchedule::new(vec![row; g.horizon])
        }
    };

    Ok(Scenario {
        space: StateSpace::new(size),
        horizon: g.horizon,
        initial: Pmf::point(size, g.start),
        target,
        reward,
        sources,
    })
}

/// Drops source mass outside the target row's support and renormalizes, so
/// generated sources always satisfy absolute continuity — with zero target
/// noise this collapses a differing source row onto the target's point mass.
fn project_support(kernels: &mut BehaviorSequence, target: &BehaviorSequence) {
    for (kernel, tgt) in kernels.kernels.iter_mut().zip(&target.kernels) {
        for (row, tgt_row) in kernel.rows.iter_mut().zip(&tgt.rows) {
            let mut lost = 0.0;
            for (m, &t) in row.iter_mut().zip(tgt_row) {
                if t == 0.0 && *m > 0.0 {
                    lost += *m;
                    *m = 0.0;
                }
            }
            if lost == 0.0 {
                continue;
            }
            let kept: f64 = row.iter().sum();
            if kept > 0.0 {
                for m in row.iter_mut() {
                    *m /= kept;
                }
            } else {
                row.copy_from_slice(tgt_row);
            }
        }
    }
}
