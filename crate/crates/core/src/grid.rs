//! Rectangular staggered (MAC) grid, boundary geometry, time grid and the
//! control-region mask.
//!
//! Velocity storage layout. The x-velocity lives on vertical faces at
//! `x = i*hx`, rows `r = 1..=ny` at `y = (r - 1/2)*hy`. Two extra rows
//! `r = 0` and `r = ny + 1` hold the tangential trace on the bottom and top
//! walls, located *on* the wall at the face abscissa. The y-velocity is laid
//! out the same way with the roles of the axes swapped: columns `c = 1..=nx`
//! at `x = (c - 1/2)*hx`, and columns `c = 0`, `c = nx + 1` carrying the trace
//! on the left and right walls. On a channel grid (periodic in x) the left
//! and right walls and their slots do not exist.
//!
//! All velocity slots of a grid are numbered in a single flat index space:
//! every x-slot first (column-major over `i`, then `r`), then every y-slot.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Wall {
    Bottom,
    Right,
    Top,
    Left,
}

impl Wall {
    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Wall::Bottom => [0.0, -1.0],
            Wall::Right => [1.0, 0.0],
            Wall::Top => [0.0, 1.0],
            Wall::Left => [-1.0, 0.0],
        }
    }

    /// Unit tangent: the normal rotated by +90 degrees.
    pub fn tangent(self) -> [f64; 2] {
        let [a, b] = self.normal();
        [-b, a]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    X,
    Y,
}

/// Role of a velocity slot with respect to the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    /// Face inside the domain; carries a momentum equation.
    Interior,
    /// Face lying on a wall; carries the normal velocity `u . nu`.
    Normal(Wall),
    /// Wall-trace slot carrying the tangential velocity.
    Tangential(Wall),
    /// Domain corner; both components vanish there.
    Corner,
}

/// One boundary record: a wall node with its dual boundary segment.
///
/// Corner nodes belong to the wall that starts at them when the boundary
/// is walked counter-clockwise from the origin; their segment collects both
/// adjacent half edges and they carry no tangential degree of freedom.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFace {
    pub wall: Wall,
    pub position: [f64; 2],
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    pub length: f64,
    /// Flat velocity slot holding the tangential trace, `None` at corners.
    pub slot: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Grid {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    periodic_x: bool,
    ux_shape: (usize, usize),
    uy_shape: (usize, usize),
    kinds: Vec<SlotKind>,
    positions: Vec<[f64; 2]>,
    weights: Vec<f64>,
    boundary_faces: Vec<BoundaryFace>,
}

impl Grid {
    /// Closed box `[0, lx] x [0, ly]` with walls on all four sides.
    pub fn build(extent: (f64, f64), resolution: (usize, usize)) -> Result<Self> {
        Self::new(extent, resolution, false)
    }

    /// Channel periodic in x with walls at `y = 0` and `y = ly`.
    pub fn build_channel(extent: (f64, f64), resolution: (usize, usize)) -> Result<Self> {
        Self::new(extent, resolution, true)
    }

    pub fn new(extent: (f64, f64), resolution: (usize, usize), periodic_x: bool) -> Result<Self> {
        let (lx, ly) = extent;
        let (nx, ny) = resolution;
        if !(lx > 0.0 && lx.is_finite()) {
            return Err(Error::config("grid.extent", "Lx must be positive and finite"));
        }
        if !(ly > 0.0 && ly.is_finite()) {
            return Err(Error::config("grid.extent", "Ly must be positive and finite"));
        }
        if nx < 4 || ny < 4 {
            return Err(Error::config(
                "grid.resolution",
                "nx and ny must both be at least 4",
            ));
        }
        let ux_shape = if periodic_x { (nx, ny + 2) } else { (nx + 1, ny + 2) };
        let uy_shape = if periodic_x { (nx, ny + 1) } else { (nx + 2, ny + 1) };
        let mut grid = Grid {
            lx,
            ly,
            nx,
            ny,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
            periodic_x,
            ux_shape,
            uy_shape,
            kinds: Vec::new(),
            positions: Vec::new(),
            weights: Vec::new(),
            boundary_faces: Vec::new(),
        };
        grid.classify_slots();
        grid.boundary_faces = grid.collect_boundary_faces();
        Ok(grid)
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }
    pub fn is_periodic_x(&self) -> bool {
        self.periodic_x
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn ux_shape(&self) -> (usize, usize) {
        self.ux_shape
    }
    pub fn uy_shape(&self) -> (usize, usize) {
        self.uy_shape
    }
    pub fn n_ux(&self) -> usize {
        self.ux_shape.0 * self.ux_shape.1
    }
    pub fn n_velocity(&self) -> usize {
        self.n_ux() + self.uy_shape.0 * self.uy_shape.1
    }
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn cell_index(&self, ci: usize, cj: usize) -> usize {
        ci * self.ny + cj
    }
    pub fn cell_center(&self, ci: usize, cj: usize) -> [f64; 2] {
        [(ci as f64 + 0.5) * self.hx, (cj as f64 + 0.5) * self.hy]
    }

    /// Flat index of x-velocity slot at logical column `i`, row `r`.
    /// Columns wrap on a channel grid.
    pub fn ux_slot(&self, i: isize, r: usize) -> Option<usize> {
        if r > self.ny + 1 {
            return None;
        }
        let ii = if self.periodic_x {
            i.rem_euclid(self.nx as isize) as usize
        } else if i < 0 || i as usize > self.nx {
            return None;
        } else {
            i as usize
        };
        Some(ii * self.ux_shape.1 + r)
    }

    /// Flat index of y-velocity slot at logical column `c`, row `j`.
    pub fn uy_slot(&self, c: isize, j: usize) -> Option<usize> {
        if j > self.ny {
            return None;
        }
        let cc = if self.periodic_x {
            (c - 1).rem_euclid(self.nx as isize) as usize
        } else if c < 0 || c as usize > self.nx + 1 {
            return None;
        } else {
            c as usize
        };
        Some(self.n_ux() + cc * self.uy_shape.1 + j)
    }

    /// Abscissa of x-slot column `i`.
    pub fn ux_x(&self, i: isize) -> f64 {
        i as f64 * self.hx
    }
    /// Ordinate of x-slot row `r`; rows `0` and `ny+1` sit on the walls.
    pub fn ux_y(&self, r: usize) -> f64 {
        if r == 0 {
            0.0
        } else if r == self.ny + 1 {
            self.ly
        } else {
            (r as f64 - 0.5) * self.hy
        }
    }
    /// Abscissa of y-slot column `c`; on a closed box columns `0` and `nx+1`
    /// sit on the walls.
    pub fn uy_x(&self, c: isize) -> f64 {
        if !self.periodic_x && c == 0 {
            0.0
        } else if !self.periodic_x && c == self.nx as isize + 1 {
            self.lx
        } else {
            (c as f64 - 0.5) * self.hx
        }
    }
    pub fn uy_y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    pub fn slot_kind(&self, slot: usize) -> SlotKind {
        self.kinds[slot]
    }
    pub fn slot_kinds(&self) -> &[SlotKind] {
        &self.kinds
    }
    pub fn slot_position(&self, slot: usize) -> [f64; 2] {
        self.positions[slot]
    }
    pub fn slot_component(&self, slot: usize) -> Component {
        if slot < self.n_ux() {
            Component::X
        } else {
            Component::Y
        }
    }

    /// Midpoint/trapezoid quadrature weight of every velocity slot: the area
    /// of its dual cell inside the domain. Wall-trace and corner slots carry
    /// no area.
    pub fn velocity_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn perimeter(&self) -> f64 {
        self.boundary_faces.iter().map(|f| f.length).sum()
    }

    /// Dual cell of a slot clipped to the domain, as `[x0, x1, y0, y1]`.
    /// Wall-trace and corner slots have a degenerate dual cell.
    pub fn dual_cell(&self, slot: usize) -> [f64; 4] {
        let [x, y] = self.positions[slot];
        let (hx, hy) = (self.hx, self.hy);
        match self.kinds[slot] {
            SlotKind::Tangential(_) | SlotKind::Corner => [x, x, y, y],
            _ => match self.slot_component(slot) {
                Component::X => {
                    let (x0, x1) = if self.periodic_x {
                        (x - 0.5 * hx, x + 0.5 * hx)
                    } else {
                        ((x - 0.5 * hx).max(0.0), (x + 0.5 * hx).min(self.lx))
                    };
                    [x0, x1, y - 0.5 * hy, y + 0.5 * hy]
                }
                Component::Y => [
                    x - 0.5 * hx,
                    x + 0.5 * hx,
                    (y - 0.5 * hy).max(0.0),
                    (y + 0.5 * hy).min(self.ly),
                ],
            },
        }
    }

    fn classify_slots(&mut self) {
        let n = self.n_velocity();
        self.kinds = vec![SlotKind::Interior; n];
        self.positions = vec![[0.0; 2]; n];
        self.weights = vec![0.0; n];
        let (nx, ny) = (self.nx, self.ny);
        let area = self.cell_area();
        let x_columns: Vec<isize> = if self.periodic_x {
            (0..nx as isize).collect()
        } else {
            (0..=nx as isize).collect()
        };
        for &i in &x_columns {
            let side = !self.periodic_x && (i == 0 || i == nx as isize);
            let side_wall = if i == 0 { Wall::Left } else { Wall::Right };
            for r in 0..=ny + 1 {
                let s = self.ux_slot(i, r).unwrap();
                let on_wall = r == 0 || r == ny + 1;
                let wall = if r == 0 { Wall::Bottom } else { Wall::Top };
                let kind = match (side, on_wall) {
                    (true, true) => SlotKind::Corner,
                    (true, false) => SlotKind::Normal(side_wall),
                    (false, true) => SlotKind::Tangential(wall),
                    (false, false) => SlotKind::Interior,
                };
                self.kinds[s] = kind;
                self.positions[s] = [self.ux_x(i), self.ux_y(r)];
                self.weights[s] = match kind {
                    SlotKind::Interior => area,
                    SlotKind::Normal(_) => 0.5 * area,
                    _ => 0.0,
                };
            }
        }
        let y_columns: Vec<isize> = if self.periodic_x {
            (1..=nx as isize).collect()
        } else {
            (0..=nx as isize + 1).collect()
        };
        for &c in &y_columns {
            let side = !self.periodic_x && (c == 0 || c == nx as isize + 1);
            let side_wall = if c == 0 { Wall::Left } else { Wall::Right };
            for j in 0..=ny {
                let s = self.uy_slot(c, j).unwrap();
                let on_wall = j == 0 || j == ny;
                let wall = if j == 0 { Wall::Bottom } else { Wall::Top };
                let kind = match (side, on_wall) {
                    (true, true) => SlotKind::Corner,
                    (true, false) => SlotKind::Tangential(side_wall),
                    (false, true) => SlotKind::Normal(wall),
                    (false, false) => SlotKind::Interior,
                };
                self.kinds[s] = kind;
                self.positions[s] = [self.uy_x(c), self.uy_y(j)];
                self.weights[s] = match kind {
                    SlotKind::Interior => area,
                    SlotKind::Normal(_) => 0.5 * area,
                    _ => 0.0,
                };
            }
        }
    }

    fn collect_boundary_faces(&self) -> Vec<BoundaryFace> {
        let (nx, ny, hx, hy) = (self.nx, self.ny, self.hx, self.hy);
        let mut faces = Vec::with_capacity(2 * nx + 2 * ny);
        let corner_len = 0.5 * (hx + hy);
        let face = |wall: Wall, position: [f64; 2], length: f64, slot: Option<usize>| BoundaryFace {
            wall,
            position,
            normal: wall.normal(),
            tangent: wall.tangent(),
            length,
            slot,
        };
        if self.periodic_x {
            for i in 0..nx as isize {
                faces.push(face(Wall::Bottom, [self.ux_x(i), 0.0], hx, self.ux_slot(i, 0)));
            }
            for i in 0..nx as isize {
                faces.push(face(Wall::Top, [self.ux_x(i), self.ly], hx, self.ux_slot(i, ny + 1)));
            }
            return faces;
        }
        // counter-clockwise walk starting at the origin
        for i in 0..nx as isize {
            let pos = [self.ux_x(i), 0.0];
            if i == 0 {
                faces.push(face(Wall::Bottom, pos, corner_len, None));
            } else {
                faces.push(face(Wall::Bottom, pos, hx, self.ux_slot(i, 0)));
            }
        }
        for j in 0..ny {
            let pos = [self.lx, self.uy_y(j)];
            if j == 0 {
                faces.push(face(Wall::Right, pos, corner_len, None));
            } else {
                faces.push(face(Wall::Right, pos, hy, self.uy_slot(nx as isize + 1, j)));
            }
        }
        for i in (1..=nx as isize).rev() {
            let pos = [self.ux_x(i), self.ly];
            if i == nx as isize {
                faces.push(face(Wall::Top, pos, corner_len, None));
            } else {
                faces.push(face(Wall::Top, pos, hx, self.ux_slot(i, ny + 1)));
            }
        }
        for j in (1..=ny).rev() {
            let pos = [0.0, self.uy_y(j)];
            if j == ny {
                faces.push(face(Wall::Left, pos, corner_len, None));
            } else {
                faces.push(face(Wall::Left, pos, hy, self.uy_slot(0, j)));
            }
        }
        faces
    }
}

/// Uniform time grid on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::config("time.final_time", "T must be positive and finite"));
        }
        if steps == 0 {
            return Err(Error::config("time.steps", "nt must be at least 1"));
        }
        Ok(TimeGrid {
            final_time,
            steps,
            dt: final_time / steps as f64,
        })
    }

    /// Builds the grid from a requested step size; `T/dt` must be an integer
    /// up to rounding.
    pub fn from_step(final_time: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::config("time.dt", "dt must be positive"));
        }
        let steps = (final_time / dt).round();
        if steps < 1.0 || (steps * dt - final_time).abs() > 1e-9 * final_time {
            return Err(Error::config("time.dt", "T/dt must be a positive integer"));
        }
        Self::new(final_time, steps as usize)
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn time(&self, level: usize) -> f64 {
        if level == self.steps {
            self.final_time
        } else {
            level as f64 * self.dt
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Fractional indicator of the control region on the velocity slots.
#[derive(Clone, Debug)]
pub struct ControlMask {
    region: Rect,
    /// Fraction of each slot's dual cell covered by the region.
    weights: Vec<f64>,
    /// `weights * velocity_weights`: quadrature weights of the L2(omega)
    /// inner product.
    quadrature: Vec<f64>,
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

impl ControlMask {
    pub fn build(grid: &Grid, region: Rect) -> Result<Self> {
        let Rect { x0, x1, y0, y1 } = region;
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::config("control.region", "region must be non-empty (x0 < x1, y0 < y1)"));
        }
        if !(x0 > 0.0 && x1 < grid.lx() && y0 > 0.0 && y1 < grid.ly()) {
            return Err(Error::config(
                "control.region",
                "region must be compactly contained in the domain (positive distance to every wall)",
            ));
        }
        let w = grid.velocity_weights();
        let mut weights = vec![0.0; grid.n_velocity()];
        let mut quadrature = vec![0.0; grid.n_velocity()];
        for s in 0..grid.n_velocity() {
            if w[s] == 0.0 {
                continue;
            }
            let [cx0, cx1, cy0, cy1] = grid.dual_cell(s);
            let mut ox = overlap(cx0, cx1, x0, x1);
            if grid.is_periodic_x() {
                ox += overlap(cx0, cx1, x0 - grid.lx(), x1 - grid.lx());
                ox += overlap(cx0, cx1, x0 + grid.lx(), x1 + grid.lx());
            }
            let covered = ox * overlap(cy0, cy1, y0, y1);
            if covered > 0.0 {
                let frac = (covered / w[s]).min(1.0);
                weights[s] = frac;
                quadrature[s] = covered;
            }
        }
        Ok(ControlMask {
            region,
            weights,
            quadrature,
        })
    }

    pub fn region(&self) -> Rect {
        self.region
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn quadrature(&self) -> &[f64] {
        &self.quadrature
    }
    pub fn contains(&self, slot: usize) -> bool {
        self.weights[slot] > 0.0
    }

    /// Weighted area of the region seen by one velocity component.
    pub fn area(&self, grid: &Grid, component: Component) -> f64 {
        (0..grid.n_velocity())
            .filter(|&s| grid.slot_component(s) == component)
            .map(|s| self.quadrature[s])
            .sum()
    }
}
