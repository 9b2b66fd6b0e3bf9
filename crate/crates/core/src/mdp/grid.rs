use super::TabularMdp;
use crate::error::{Error, Result};

/// Layouts shipped with the crate, by name.
pub const BUNDLED_LAYOUTS: &[(&str, &str)] = &[
    ("corridor24", include_str!("../../data/corridor24.txt")),
    ("fourroom43", include_str!("../../data/fourroom43.txt")),
];

pub fn bundled_layout(name: &str) -> Option<&'static str> {
    BUNDLED_LAYOUTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Wall,
    Free,
    Start,
    Terminal,
    Trap,
}

/// Parsed gridworld layout.
///
/// Characters: `#` wall, `.` free, `S` start, `T` terminal (every action
/// teleports back to the start), `X` trap (state cost `trap_cost`).
/// Non-wall cells are numbered row-major. Actions are Right, Down, Left, Up;
/// a move succeeds with probability `1 - fail_prob` and otherwise slips
/// uniformly to one of the other three directions. Bumping into a wall or the
/// border leaves the agent in place.
#[derive(Debug, Clone)]
pub struct GridSpec {
    cells: Vec<Vec<Cell>>,
    pub fail_prob: f64,
    pub trap_cost: f64,
}

const MOVES: [(isize, isize); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cells = Vec::new();
        let mut starts = 0;
        for (r, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let row = line
                .chars()
                .enumerate()
                .map(|(c, ch)| match ch {
                    '#' => Ok(Cell::Wall),
                    '.' => Ok(Cell::Free),
                    'S' => {
                        starts += 1;
                        Ok(Cell::Start)
                    }
                    'T' => Ok(Cell::Terminal),
                    'X' => Ok(Cell::Trap),
                    other => Err(Error::Validation(format!(
                        "unknown layout character `{other}` at row {r}, column {c}"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            cells.push(row);
        }
        if starts != 1 {
            return Err(Error::Validation(format!(
                "layout needs exactly one `S`, found {starts}"
            )));
        }
        Ok(Self {
            cells,
            fail_prob: 0.1,
            trap_cost: 10.0,
        })
    }

    fn at(&self, r: isize, c: isize) -> Cell {
        if r < 0 || c < 0 {
            return Cell::Wall;
        }
        self.cells
            .get(r as usize)
            .and_then(|row| row.get(c as usize))
            .copied()
            .unwrap_or(Cell::Wall)
    }

    pub fn to_mdp(&self) -> Result<TabularMdp> {
        if !(0.0..=1.0).contains(&self.fail_prob) {
            return Err(Error::param(
                "fail_prob",
                format!("{} not in [0,1]", self.fail_prob),
            ));
        }
        if !(self.trap_cost.is_finite() && self.trap_cost >= 1.0) {
            return Err(Error::param(
                "trap_cost",
                format!("{} must be finite and >= 1", self.trap_cost),
            ));
        }
        let mut coords = Vec::new();
        let mut index = vec![vec![usize::MAX; 0]; self.cells.len()];
        for (r, row) in self.cells.iter().enumerate() {
            index[r] = vec![usize::MAX; row.len()];
            for (c, &cell) in row.iter().enumerate() {
                if cell != Cell::Wall {
                    index[r][c] = coords.len();
                    coords.push((r as isize, c as isize));
                }
            }
        }
        let n = coords.len();
        let start = coords
            .iter()
            .position(|&(r, c)| self.at(r, c) == Cell::Start)
            .expect("parse guarantees a start cell");
        let mut kernel = vec![0.0; n * 4 * n];
        for (s, &(r, c)) in coords.iter().enumerate() {
            let cell = self.at(r, c);
            for a in 0..4 {
                let row = &mut kernel[(s * 4 + a) * n..(s * 4 + a + 1) * n];
                if cell == Cell::Terminal {
                    row[start] = 1.0;
                    continue;
                }
                for (d, &(dr, dc)) in MOVES.iter().enumerate() {
                    let p = if d == a {
                        1.0 - self.fail_prob
                    } else {
                        self.fail_prob / 3.0
                    };
                    if p == 0.0 {
                        continue;
                    }
                    let (nr, nc) = (r + dr, c + dc);
                    let next = if self.at(nr, nc) == Cell::Wall {
                        s
                    } else {
                        index[nr as usize][nc as usize]
                    };
                    row[next] += p;
                }
            }
        }
        let labels = coords.iter().map(|(r, c)| format!("({r},{c})")).collect();
        let mut mdp = TabularMdp::new(n, 4, kernel, start)?.with_labels(labels)?;
        if coords.iter().any(|&(r, c)| self.at(r, c) == Cell::Trap) {
            let costs = coords
                .iter()
                .map(|&(r, c)| {
                    if self.at(r, c) == Cell::Trap {
                        self.trap_cost
                    } else {
                        1.0
                    }
                })
                .collect();
            mdp = mdp.with_state_costs(costs)?;
        }
        Ok(mdp)
    }
}
