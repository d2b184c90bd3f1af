use serde::{Deserialize, Serialize};

use super::DomainError;

/// Which part of the boundary a node lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryClass {
    Interior,
    /// The plane `x_n = 0` (slip boundary).
    Plane,
    /// Every other face; edges and corners shared with the plane land here.
    Outer,
}

/// Essential boundary conditions used to define admissible velocity fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Admissibility {
    /// Zero normal component on every face, tangential components free.
    #[default]
    Impermeable,
    /// No-slip on the outer faces, zero normal component on the plane.
    SlipNoSlip,
    /// Zero normal component on the plane only; outer faces are open.
    SlipPlane,
}

/// Uniform node grid on `[−R,R]^{n−1}×[0,R]` (half space) or `[−R,R]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    radius: f64,
    cells: usize,
    half_space: bool,
    h: f64,
    shape: [usize; 3],
    strides: [usize; 3],
}

/// Serialized grid description: `cells` is the number of cells per radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub radius: f64,
    pub cells: usize,
    #[serde(default = "yes")]
    pub half_space: bool,
}

fn yes() -> bool {
    true
}

impl TryFrom<GridSpec> for Grid {
    type Error = DomainError;
    fn try_from(s: GridSpec) -> Result<Self, Self::Error> {
        Grid::new(s.dim, s.radius, s.cells, s.half_space)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        g.spec()
    }
}

impl Grid {
    pub fn new(dim: usize, radius: f64, cells: usize, half_space: bool) -> Result<Self, DomainError> {
        if !(2..=3).contains(&dim) {
            return Err(DomainError::InvalidGrid(format!("dimension {dim} not in {{2,3}}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(DomainError::InvalidGrid(format!("radius {radius} must be positive")));
        }
        if cells < 2 {
            return Err(DomainError::InvalidGrid(format!("need at least 2 cells per radius, got {cells}")));
        }
        let mut shape = [1usize; 3];
        for (a, s) in shape.iter_mut().enumerate().take(dim) {
            *s = if a + 1 == dim && half_space { cells + 1 } else { 2 * cells + 1 };
        }
        let mut strides = [0usize; 3];
        let mut acc = 1;
        for a in (0..dim).rev() {
            strides[a] = acc;
            acc *= shape[a];
        }
        Ok(Grid { dim, radius, cells, half_space, h: radius / cells as f64, shape, strides })
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { dim: self.dim, radius: self.radius, cells: self.cells, half_space: self.half_space }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    /// Cells per radius, `R/h`.
    pub fn cells(&self) -> usize {
        self.cells
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn half_space(&self) -> bool {
        self.half_space
    }
    pub fn normal_axis(&self) -> usize {
        self.dim - 1
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }
    pub fn num_nodes(&self) -> usize {
        self.shape[..self.dim].iter().product()
    }
    pub fn num_dofs(&self) -> usize {
        self.dim * self.num_nodes()
    }
    pub fn cell_shape(&self) -> [usize; 3] {
        let mut s = [1; 3];
        for (a, v) in s.iter_mut().enumerate().take(self.dim) {
            *v = self.shape[a] - 1;
        }
        s
    }
    pub fn num_cells(&self) -> usize {
        self.cell_shape()[..self.dim].iter().product()
    }

    /// Same resolution, reflected across the plane.
    pub fn full(&self) -> Grid {
        Grid::new(self.dim, self.radius, self.cells, false).expect("valid grid")
    }
    pub fn half(&self) -> Grid {
        Grid::new(self.dim, self.radius, self.cells, true).expect("valid grid")
    }
    pub fn refined(&self) -> Grid {
        Grid::new(self.dim, self.radius, 2 * self.cells, self.half_space).expect("valid grid")
    }

    pub fn lower(&self, axis: usize) -> f64 {
        if axis + 1 == self.dim && self.half_space {
            0.0
        } else {
            -self.radius
        }
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    #[inline]
    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    #[inline]
    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut r = node;
        for (a, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = r / self.strides[a];
            r %= self.strides[a];
        }
        out
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower(axis) + i as f64 * self.h
    }

    pub fn coords(&self, node: usize) -> [f64; 3] {
        let idx = self.multi_index(node);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coord(a, idx[a]);
        }
        x
    }

    /// Nearest node index along `axis` for coordinate `x` (clamped).
    pub fn locate(&self, axis: usize, x: f64) -> usize {
        let i = ((x - self.lower(axis)) / self.h).round();
        i.clamp(0.0, (self.shape[axis] - 1) as f64) as usize
    }

    pub fn on_face(&self, node: usize, axis: usize) -> bool {
        let i = self.multi_index(node)[axis];
        i == 0 || i + 1 == self.shape[axis]
    }

    pub fn boundary_class(&self, node: usize) -> BoundaryClass {
        let idx = self.multi_index(node);
        let n = self.normal_axis();
        let mut plane = false;
        for a in 0..self.dim {
            let last = self.shape[a] - 1;
            if a == n && self.half_space && idx[a] == 0 {
                plane = true;
            } else if idx[a] == 0 || idx[a] == last {
                return BoundaryClass::Outer;
            }
        }
        if plane {
            BoundaryClass::Plane
        } else {
            BoundaryClass::Interior
        }
    }

    /// Trapezoid-rule weight of a node.
    pub fn weight(&self, node: usize) -> f64 {
        let idx = self.multi_index(node);
        let mut w = 1.0;
        for a in 0..self.dim {
            let edge = idx[a] == 0 || idx[a] + 1 == self.shape[a];
            w *= if edge { 0.5 * self.h } else { self.h };
        }
        w
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|i| self.weight(i)).collect()
    }

    /// Degrees of freedom (component-major) fixed to zero by `adm`.
    pub fn constrained_dofs(&self, adm: Admissibility) -> Vec<bool> {
        let nn = self.num_nodes();
        let n = self.normal_axis();
        let mut fixed = vec![false; self.num_dofs()];
        for node in 0..nn {
            match adm {
                Admissibility::Impermeable => {
                    for a in 0..self.dim {
                        if self.on_face(node, a) {
                            fixed[a * nn + node] = true;
                        }
                    }
                }
                Admissibility::SlipNoSlip => match self.boundary_class(node) {
                    BoundaryClass::Interior => {}
                    BoundaryClass::Plane => fixed[n * nn + node] = true,
                    BoundaryClass::Outer => {
                        for c in 0..self.dim {
                            fixed[c * nn + node] = true;
                        }
                    }
                },
                Admissibility::SlipPlane => {
                    if self.half_space && self.multi_index(node)[n] == 0 {
                        fixed[n * nn + node] = true;
                    }
                }
            }
        }
        fixed
    }

    /// Free degrees of freedom under `adm`, ascending.
    pub fn free_dofs(&self, adm: Admissibility) -> Vec<usize> {
        self.constrained_dofs(adm).iter().enumerate().filter_map(|(i, &f)| (!f).then_some(i)).collect()
    }

    /// Node indices of the `2^dim` corners of a cell; bit `a` of the corner
    /// number selects the upper node along axis `a`.
    pub fn cell_corners(&self, cell: usize) -> [usize; 8] {
        let cs = self.cell_shape();
        let mut idx = [0; 3];
        let mut r = cell;
        for a in (0..self.dim).rev() {
            idx[a] = r % cs[a];
            r /= cs[a];
        }
        let base = self.index(&idx[..self.dim]);
        let mut out = [0; 8];
        for (c, o) in out.iter_mut().enumerate().take(1 << self.dim) {
            *o = base + (0..self.dim).filter(|a| c >> a & 1 == 1).map(|a| self.strides[a]).sum::<usize>();
        }
        out
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 3] {
        let x = self.coords(self.cell_corners(cell)[0]);
        let mut c = [0.0; 3];
        for a in 0..self.dim {
            c[a] = x[a] + 0.5 * self.h;
        }
        c
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_coordinates() {
        let g = Grid::new(3, 2.0, 4, true).unwrap();
        assert_eq!(g.shape(), &[9, 9, 5]);
        assert_eq!(g.h(), 0.5);
        let n = g.index(&[8, 0, 4]);
        assert_eq!(g.multi_index(n), [8, 0, 4]);
        assert_eq!(g.coords(n), [2.0, -2.0, 2.0]);
        assert_eq!(g.num_cells(), 8 * 8 * 4);
        let f = g.full();
        assert_eq!(f.shape(), &[9, 9, 9]);
        assert_eq!(f.coords(0), [-2.0, -2.0, -2.0]);
    }

    #[test]
    fn boundary_partition() {
        let g = Grid::new(2, 1.0, 4, true).unwrap();
        let mut counts = [0; 3];
        for node in 0..g.num_nodes() {
            counts[match g.boundary_class(node) {
                BoundaryClass::Interior => 0,
                BoundaryClass::Plane => 1,
                BoundaryClass::Outer => 2,
            }] += 1;
        }
        // 9×5 nodes: plane excludes its two corners
        assert_eq!(counts, [7 * 3, 7, 9 + 2 * 4]);
        assert!(g.full().free_dofs(Admissibility::SlipNoSlip).len() == 2 * 7 * 7);
    }

    #[test]
    fn weights_integrate_volume() {
        for half in [true, false] {
            let g = Grid::new(3, 1.5, 3, half).unwrap();
            let vol: f64 = g.weights().iter().sum();
            let expect = if half { 3.0 * 3.0 * 1.5 } else { 27.0 };
            assert!((vol - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_corners_span_cell() {
        let g = Grid::new(2, 1.0, 2, true).unwrap();
        let c = g.cell_corners(5);
        let xs: Vec<_> = (0..4).map(|k| g.coords(c[k])).collect();
        assert_eq!(xs[1][0] - xs[0][0], 0.5);
        assert_eq!(xs[1][1] - xs[0][1], 0.0);
        assert_eq!(xs[2][1] - xs[0][1], 0.5);
        assert_eq!(g.cell_center(5), [xs[0][0] + 0.25, xs[0][1] + 0.25, 0.0]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(4, 1.0, 4, true).is_err());
        assert!(Grid::new(2, 0.0, 4, true).is_err());
        assert!(Grid::new(2, 1.0, 1, true).is_err());
        let s: Grid = serde_json::from_str(r#"{"dim":2,"radius":1.0,"cells":4}"#).unwrap();
        assert!(s.half_space());
    }
}
