//! Discrete Neumann boxes: uniform tensor grids, nodal fields and the
//! operator `A = -laplacian + I` with mirror (zero-flux) boundary rows.
//!
//! The Laplacian is assembled with the symmetric half-weight boundary
//! convention, so `A` is symmetric positive definite, every row sums to
//! exactly 1 and constant fields are fixed points of `A`.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// One grid axis: physical extent, node count and spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub extent: f64,
    pub nodes: usize,
    pub spacing: f64,
}

/// Uniform tensor grid over a 1D interval or a 2D rectangle.
///
/// Node ordering is x-fastest: in 2D the node `(ix, iy)` has index
/// `iy * nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

/// Build a grid with uniform spacing `extent / (nodes - 1)` per axis.
pub fn build_grid(dim: usize, extents: &[f64], nodes_per_axis: &[usize]) -> Result<Grid> {
    if dim == 0 || dim > 2 {
        return Err(Error::InvalidGrid(format!(
            "dim must be 1 or 2, got {dim}"
        )));
    }
    if extents.len() != dim || nodes_per_axis.len() != dim {
        return Err(Error::InvalidGrid(format!(
            "expected {dim} extents and node counts, got {} and {}",
            extents.len(),
            nodes_per_axis.len()
        )));
    }
    let mut axes = Vec::with_capacity(dim);
    for (&extent, &nodes) in extents.iter().zip(nodes_per_axis) {
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "extents must be positive, got {extent}"
            )));
        }
        if nodes < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {nodes}"
            )));
        }
        axes.push(Axis {
            extent,
            nodes,
            spacing: extent / (nodes - 1) as f64,
        });
    }
    Ok(Grid { axes })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    /// Product of the axis spacings.
    pub fn cell_measure(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    /// Measure of the whole box.
    pub fn domain_measure(&self) -> f64 {
        self.axes.iter().map(|a| a.extent).product()
    }

    /// Coordinates of node `idx`, length = `dim()`.
    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        match self.axes.len() {
            1 => vec![idx as f64 * self.axes[0].spacing],
            2 => {
                let nx = self.axes[0].nodes;
                let ix = idx % nx;
                let iy = idx / nx;
                vec![
                    ix as f64 * self.axes[0].spacing,
                    iy as f64 * self.axes[1].spacing,
                ]
            }
            _ => unreachable!(),
        }
    }

    /// Trapezoid quadrature weight per node: the cell measure, halved once
    /// per axis on which the node sits on the boundary.
    pub fn quad_weights(&self) -> Vec<f64> {
        let axis_weight = |a: &Axis, i: usize| -> f64 {
            if i == 0 || i + 1 == a.nodes {
                0.5 * a.spacing
            } else {
                a.spacing
            }
        };
        match self.axes.len() {
            1 => (0..self.axes[0].nodes)
                .map(|i| axis_weight(&self.axes[0], i))
                .collect(),
            2 => {
                let (ax, ay) = (&self.axes[0], &self.axes[1]);
                let mut w = Vec::with_capacity(self.node_count());
                for iy in 0..ay.nodes {
                    for ix in 0..ax.nodes {
                        w.push(axis_weight(ax, ix) * axis_weight(ay, iy));
                    }
                }
                w
            }
            _ => unreachable!(),
        }
    }
}

/// One real value per grid node.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn constant(grid: &Arc<Grid>, value: f64) -> Field {
        Field {
            grid: grid.clone(),
            values: vec![value; grid.node_count()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at node {i}")));
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    /// Evaluate `f` at every node's coordinates.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Field {
        let values = (0..grid.node_count())
            .map(|i| f(&grid.node_coords(i)))
            .collect();
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Nodewise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Nodewise combination with another field on the same grid.
    pub fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    pub fn negated(&self) -> Field {
        self.map(|v| -v)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a + b)
    }

    /// `max |self - other|` over nodes.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn le(&self, other: &Field) -> bool {
        self.values.iter().zip(&other.values).all(|(&a, &b)| a <= b)
    }

    /// CSV serialization: one row per node, coordinate columns then the value.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.grid.dim() {
            1 => out.push_str("x,value\n"),
            _ => out.push_str("x,y,value\n"),
        }
        for (i, v) in self.values.iter().enumerate() {
            let coords = self.grid.node_coords(i);
            for c in &coords {
                let _ = write!(out, "{c},");
            }
            let _ = writeln!(out, "{v}");
        }
        out
    }
}

/// Discrete integral: sum of node values times trapezoid weights.
///
/// Exact on fields that are linear along each axis; in particular
/// `integrate(constant c) = c * |domain|`.
pub fn integrate(field: &Field) -> f64 {
    field
        .grid()
        .quad_weights()
        .iter()
        .zip(field.values())
        .map(|(w, v)| w * v)
        .sum()
}

/// Sparse symmetric matrix in CSR form.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn apply_slice(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            out[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.vals[k];
                }
            }
        }
        d
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    /// Exact structural symmetry check: `a_ij == a_ji` for every stored entry.
    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let v = self.vals[k];
                let mut found = false;
                for k2 in self.row_ptr[j]..self.row_ptr[j + 1] {
                    if self.col_idx[k2] == i {
                        if self.vals[k2] != v {
                            return false;
                        }
                        found = true;
                    }
                }
                if !found {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] = self.vals[k];
            }
        }
        m
    }
}

/// The operator `A = -laplacian_h + I` with mirror boundary conditions.
#[derive(Debug, Clone)]
pub struct NeumannOperator {
    grid: Arc<Grid>,
    matrix: CsrMatrix,
}

/// Assemble `A` on `grid` with second-order central stencils, mirror ghost
/// nodes and half-weight boundary rows of the Laplacian part, then add the
/// identity. Boundary rows of `-laplacian_h` carry `(1, -1)/h^2` instead of
/// the one-sided `(2, -2)/h^2`, which keeps the matrix symmetric while the
/// row sums of the Laplacian stay exactly zero.
pub fn assemble_neumann_operator(grid: &Arc<Grid>) -> NeumannOperator {
    let n = grid.node_count();
    // Per-node triples (col, val) accumulated per row.
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(5); n];

    let mut add = |rows: &mut Vec<Vec<(usize, f64)>>, i: usize, j: usize, v: f64| {
        if let Some(entry) = rows[i].iter_mut().find(|(c, _)| *c == j) {
            entry.1 += v;
        } else {
            rows[i].push((j, v));
        }
    };

    // Identity part.
    for i in 0..n {
        add(&mut rows, i, i, 1.0);
    }

    // Laplacian contribution along one axis: for the 1D chain of length m
    // with spacing h, edge (p, p+1) contributes k to both diagonals and -k
    // to both off-diagonals (graph-Laplacian assembly). This is exactly the
    // half-weight mirrored stencil: interior rows (-1, 2, -1)/h^2, boundary
    // rows (1, -1)/h^2.
    match grid.dim() {
        1 => {
            let a = &grid.axes()[0];
            let k = 1.0 / (a.spacing * a.spacing);
            for p in 0..a.nodes - 1 {
                add(&mut rows, p, p, k);
                add(&mut rows, p + 1, p + 1, k);
                add(&mut rows, p, p + 1, -k);
                add(&mut rows, p + 1, p, -k);
            }
        }
        2 => {
            let ax = &grid.axes()[0];
            let ay = &grid.axes()[1];
            let nx = ax.nodes;
            let kx = 1.0 / (ax.spacing * ax.spacing);
            let ky = 1.0 / (ay.spacing * ay.spacing);
            for iy in 0..ay.nodes {
                for ix in 0..nx - 1 {
                    let p = iy * nx + ix;
                    let q = p + 1;
                    add(&mut rows, p, p, kx);
                    add(&mut rows, q, q, kx);
                    add(&mut rows, p, q, -kx);
                    add(&mut rows, q, p, -kx);
                }
            }
            for iy in 0..ay.nodes - 1 {
                for ix in 0..nx {
                    let p = iy * nx + ix;
                    let q = p + nx;
                    add(&mut rows, p, p, ky);
                    add(&mut rows, q, q, ky);
                    add(&mut rows, p, q, -ky);
                    add(&mut rows, q, p, -ky);
                }
            }
        }
        _ => unreachable!(),
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for mut row in rows {
        row.sort_by_key(|(c, _)| *c);
        for (c, v) in row {
            col_idx.push(c);
            vals.push(v);
        }
        row_ptr.push(col_idx.len());
    }

    NeumannOperator {
        grid: grid.clone(),
        matrix: CsrMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
        },
    }
}

impl NeumannOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.n
    }

    pub fn apply(&self, x: &Field) -> Field {
        let mut out = vec![0.0; self.matrix.n];
        self.matrix.apply_slice(x.values(), &mut out);
        Field {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// `A + diag(d)`: used for experiments with perturbed potentials.
    pub fn with_added_diagonal(&self, d: &Field) -> NeumannOperator {
        let mut m = self.matrix.clone();
        for i in 0..m.n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                if m.col_idx[k] == i {
                    m.vals[k] += d.values()[i];
                }
            }
        }
        NeumannOperator {
            grid: self.grid.clone(),
            matrix: m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1d(nodes: usize) -> Arc<Grid> {
        Arc::new(build_grid(1, &[1.0], &[nodes]).unwrap())
    }

    #[test]
    fn build_grid_examples() {
        let g = build_grid(1, &[1.0], &[11]).unwrap();
        assert_eq!(g.node_count(), 11);
        assert!((g.axes()[0].spacing - 0.1).abs() < 1e-15);

        let g = build_grid(2, &[1.0, 2.0], &[5, 9]).unwrap();
        assert_eq!(g.node_count(), 45);
        assert!((g.axes()[0].spacing - 0.25).abs() < 1e-15);
        assert!((g.axes()[1].spacing - 0.25).abs() < 1e-15);
    }

    #[test]
    fn build_grid_rejects_bad_input() {
        assert!(build_grid(3, &[1.0, 1.0, 1.0], &[5, 5, 5]).is_err());
        assert!(build_grid(1, &[1.0], &[2]).is_err());
        assert!(build_grid(1, &[0.0], &[5]).is_err());
        assert!(build_grid(1, &[-1.0], &[5]).is_err());
        assert!(build_grid(2, &[1.0], &[5, 5]).is_err());
    }

    #[test]
    fn three_node_operator_matches_hand_assembly() {
        // h = 1: the mirrored one-sided Laplacian row (2, -2) becomes (1, -1)
        // after half-weight symmetrization; adding I gives the matrix below.
        let g = Arc::new(build_grid(1, &[2.0], &[3]).unwrap());
        assert!((g.axes()[0].spacing - 1.0).abs() < 1e-15);
        let op = assemble_neumann_operator(&g);
        let dense = op.matrix().to_dense();
        let expected = nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[2.0, -1.0, 0.0, -1.0, 3.0, -1.0, 0.0, -1.0, 2.0],
        );
        assert_eq!(dense, expected);
        assert!(op.matrix().is_symmetric());
    }

    #[test]
    fn row_sums_are_exactly_one() {
        for op in [
            assemble_neumann_operator(&grid_1d(11)),
            assemble_neumann_operator(&Arc::new(build_grid(2, &[1.0, 2.0], &[5, 9]).unwrap())),
        ] {
            for s in op.matrix().row_sums() {
                assert!((s - 1.0).abs() <= 1e-14);
            }
            assert!(op.matrix().is_symmetric());
        }
    }

    #[test]
    fn constants_are_fixed_points() {
        let g = Arc::new(build_grid(2, &[1.0, 1.0], &[7, 7]).unwrap());
        let op = assemble_neumann_operator(&g);
        let c = Field::constant(&g, 3.25);
        let ac = op.apply(&c);
        assert!(ac.sup_distance(&c) <= 1e-12);
    }

    #[test]
    fn integrate_examples() {
        let g = grid_1d(11);
        assert!((integrate(&Field::constant(&g, 1.0)) - 1.0).abs() <= 1e-14);

        let g2 = Arc::new(build_grid(2, &[1.0, 2.0], &[5, 9]).unwrap());
        let c = 0.7;
        assert!((integrate(&Field::constant(&g2, c)) - c * 2.0).abs() <= 1e-13);

        // Trapezoid rule is exact on linear integrands.
        let g = grid_1d(101);
        let f = Field::from_fn(&g, |x| x[0]);
        assert!((integrate(&f) - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn csv_layout() {
        let g = grid_1d(3);
        let f = Field::from_values(&g, vec![1.0, 2.0, 3.0]).unwrap();
        let csv = f.to_csv();
        assert_eq!(csv, "x,value\n0,1\n0.5,2\n1,3\n");
    }

    #[test]
    fn field_validation() {
        let g = grid_1d(5);
        assert!(Field::from_values(&g, vec![0.0; 4]).is_err());
        assert!(Field::from_values(&g, vec![0.0, f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn integrate_is_monotone(values1 in proptest::collection::vec(-10.0..10.0f64, 11),
                                     bumps in proptest::collection::vec(0.0..5.0f64, 11)) {
                let g = grid_1d(11);
                let f1 = Field::from_values(&g, values1.clone()).unwrap();
                let v2: Vec<f64> = values1.iter().zip(&bumps).map(|(a, b)| a + b).collect();
                let f2 = Field::from_values(&g, v2).unwrap();
                prop_assert!(integrate(&f1) <= integrate(&f2) + 1e-12);
            }

            #[test]
            fn integrate_is_linear(values in proptest::collection::vec(-10.0..10.0f64, 11),
                                   a in -3.0..3.0f64, b in -3.0..3.0f64) {
                let g = grid_1d(11);
                let f = Field::from_values(&g, values).unwrap();
                let lhs = integrate(&f.map(|v| a * v + b));
                let rhs = a * integrate(&f) + b * g.domain_measure();
                prop_assert!((lhs - rhs).abs() <= 1e-10);
            }

            #[test]
            fn operator_is_symmetric_bilinear(x in proptest::collection::vec(-5.0..5.0f64, 15),
                                              y in proptest::collection::vec(-5.0..5.0f64, 15)) {
                let g = Arc::new(build_grid(1, &[1.5], &[15]).unwrap());
                let op = assemble_neumann_operator(&g);
                let fx = Field::from_values(&g, x).unwrap();
                let fy = Field::from_values(&g, y).unwrap();
                let ax = op.apply(&fx);
                let ay = op.apply(&fy);
                let dot = |a: &Field, b: &Field| -> f64 {
                    a.values().iter().zip(b.values()).map(|(u, v)| u * v).sum()
                };
                prop_assert!((dot(&ax, &fy) - dot(&ay, &fx)).abs() <= 1e-8);
            }
        }
    }
}
