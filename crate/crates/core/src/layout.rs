//! Rotated surface code geometry.
//!
//! Qubits live on an integer lattice. Data qubits sit at odd coordinates
//! `(2i + 1, 2j + 1)` for column `i` and row `j` in `0..d`; measurement
//! ancillas sit at even coordinates `(x, y)` with `x, y` in `0..=2d`. The
//! `y` axis grows downwards, so row 0 is the top of the patch.
//!
//! Plaquettes alternate between X and Z type in a checkerboard. The top and
//! bottom boundaries carry weight-2 Z checks and the left and right
//! boundaries carry weight-2 X checks. With that orientation the logical
//! `X_L` is a horizontal string (the top row of data qubits) and the logical
//! `Z_L` is a vertical string (the left column).
//!
//! Every plaquette touches its data qubits in four parallel CNOT layers. Z
//! checks walk their corners in a "Z" pattern (top-left, top-right,
//! bottom-left, bottom-right) and X checks in an "N" pattern (top-left,
//! bottom-left, top-right, bottom-right). The last two corners of a check
//! are where a mid-schedule ancilla fault spreads, so Z hooks run
//! horizontally and X hooks vertically: neither is parallel to the logical
//! string it could shorten.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};

/// Pauli type of a stabilizer or logical operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckKind {
    X,
    Z,
}

impl CheckKind {
    pub fn other(self) -> Self {
        match self {
            CheckKind::X => CheckKind::Z,
            CheckKind::Z => CheckKind::X,
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckKind::X => "X",
            CheckKind::Z => "Z",
        })
    }
}

/// Lattice position of a qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub x: i32,
    pub y: i32,
}

impl Coord {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }
}

/// Corner offsets visited in CNOT layers 0..4.
const Z_ORDER: [(i32, i32); 4] = [(-1, -1), (1, -1), (-1, 1), (1, 1)];
const X_ORDER: [(i32, i32); 4] = [(-1, -1), (-1, 1), (1, -1), (1, 1)];

/// One measured stabilizer.
///
/// `check` is the row index of this stabilizer in every syndrome vector;
/// `schedule[k]` is the data qubit touched in CNOT layer `k`, or `None` when
/// a boundary check idles in that layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stabilizer {
    pub check: usize,
    pub kind: CheckKind,
    pub coord: Coord,
    pub schedule: [Option<usize>; 4],
}

impl Stabilizer {
    /// Data-qubit support in schedule order.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.schedule.iter().flatten().copied()
    }

    pub fn weight(&self) -> usize {
        self.schedule.iter().flatten().count()
    }
}

/// Qubit and stabilizer geometry of a distance-`d` rotated surface code.
///
/// Physical qubit indices put the `d²` data qubits first (row-major,
/// `id = row * d + column`) followed by one ancilla per check, so the
/// ancilla of check `c` is physical qubit `d² + c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeLayout {
    pub distance: usize,
    pub data_qubits: Vec<Coord>,
    /// All checks ordered by `(y, x)` of their ancilla.
    pub checks: Vec<Stabilizer>,
    pub logical_x_support: Vec<usize>,
    pub logical_z_support: Vec<usize>,
}

impl CodeLayout {
    /// Builds the layout for an odd distance `d ≥ 3`.
    pub fn build(distance: usize) -> Result<Self> {
        if distance < 3 || distance % 2 == 0 {
            return Err(Error::InvalidDistance(distance));
        }
        let d = distance as i32;
        let data_qubits: Vec<Coord> = (0..d)
            .flat_map(|j| (0..d).map(move |i| Coord::new(2 * i + 1, 2 * j + 1)))
            .collect();
        let data_id = |c: Coord| -> Option<usize> {
            if c.x < 1 || c.y < 1 || c.x > 2 * d - 1 || c.y > 2 * d - 1 {
                return None;
            }
            Some(((c.y - 1) / 2 * d + (c.x - 1) / 2) as usize)
        };

        let mut checks = Vec::with_capacity((distance * distance) - 1);
        for y in (0..=2 * d).step_by(2) {
            for x in (0..=2 * d).step_by(2) {
                let kind = if (x / 2 + y / 2) % 2 == 0 {
                    CheckKind::X
                } else {
                    CheckKind::Z
                };
                let on_top_bottom = y == 0 || y == 2 * d;
                let on_left_right = x == 0 || x == 2 * d;
                if on_top_bottom && on_left_right {
                    continue;
                }
                if on_top_bottom && kind != CheckKind::Z {
                    continue;
                }
                if on_left_right && kind != CheckKind::X {
                    continue;
                }
                let order = match kind {
                    CheckKind::X => X_ORDER,
                    CheckKind::Z => Z_ORDER,
                };
                let coord = Coord::new(x, y);
                let schedule = order.map(|(dx, dy)| data_id(Coord::new(x + dx, y + dy)));
                checks.push(Stabilizer {
                    check: checks.len(),
                    kind,
                    coord,
                    schedule,
                });
            }
        }

        let logical_x_support = (0..distance).collect();
        let logical_z_support = (0..distance).map(|j| j * distance).collect();
        Ok(Self {
            distance,
            data_qubits,
            checks,
            logical_x_support,
            logical_z_support,
        })
    }

    pub fn n_data(&self) -> usize {
        self.data_qubits.len()
    }

    pub fn n_checks(&self) -> usize {
        self.checks.len()
    }

    pub fn n_physical(&self) -> usize {
        self.n_data() + self.n_checks()
    }

    /// Physical qubit index of the ancilla measuring `check`.
    pub fn ancilla_qubit(&self, check: usize) -> usize {
        self.n_data() + check
    }

    pub fn x_stabilizers(&self) -> impl Iterator<Item = &Stabilizer> {
        self.checks.iter().filter(|s| s.kind == CheckKind::X)
    }

    pub fn z_stabilizers(&self) -> impl Iterator<Item = &Stabilizer> {
        self.checks.iter().filter(|s| s.kind == CheckKind::Z)
    }

    pub fn logical_support(&self, kind: CheckKind) -> &[usize] {
        match kind {
            CheckKind::X => &self.logical_x_support,
            CheckKind::Z => &self.logical_z_support,
        }
    }

    /// Plain-text dump, one entity per line.
    ///
    /// ```text
    /// layout <distance>
    /// data <id> <x> <y>
    /// check <id> <X|Z> <x> <y> <slot0> <slot1> <slot2> <slot3>
    /// logical <X|Z> <data ids...>
    /// ```
    ///
    /// Idle schedule slots print as `-`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "layout {}", self.distance).unwrap();
        for (id, c) in self.data_qubits.iter().enumerate() {
            writeln!(out, "data {id} {} {}", c.x, c.y).unwrap();
        }
        for s in &self.checks {
            write!(out, "check {} {} {} {}", s.check, s.kind, s.coord.x, s.coord.y).unwrap();
            for slot in s.schedule {
                match slot {
                    Some(q) => write!(out, " {q}").unwrap(),
                    None => out.push_str(" -"),
                }
            }
            out.push('\n');
        }
        for kind in [CheckKind::X, CheckKind::Z] {
            write!(out, "logical {kind}").unwrap();
            for q in self.logical_support(kind) {
                write!(out, " {q}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the distance-`d` layout.
pub fn build_layout(distance: usize) -> Result<CodeLayout> {
    CodeLayout::build(distance)
}

fn overlap(a: impl Iterator<Item = usize>, b: &[usize]) -> usize {
    a.filter(|q| b.contains(q)).count()
}

/// True iff every X/Z stabilizer pair overlaps evenly, each logical operator
/// commutes with every stabilizer of the opposite type, and the two logical
/// operators overlap oddly.
pub fn check_commutation(layout: &CodeLayout) -> bool {
    let z_supports: Vec<Vec<usize>> = layout.z_stabilizers().map(|s| s.support().collect()).collect();
    for x in layout.x_stabilizers() {
        for z in &z_supports {
            if overlap(x.support(), z) % 2 != 0 {
                return false;
            }
        }
    }
    for s in &layout.checks {
        let logical = layout.logical_support(s.kind.other());
        if overlap(s.support(), logical) % 2 != 0 {
            return false;
        }
    }
    overlap(
        layout.logical_x_support.iter().copied(),
        &layout.logical_z_support,
    ) % 2
        == 1
}
