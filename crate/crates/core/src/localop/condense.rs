use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::MaterialField;
use crate::mesh::{BoundarySpec, Geometry, MeshTriplet, Quadrature};
use crate::{Error, Point, Result};

use super::Variant;

/// Largest 1-norm condition estimate accepted for a local system.
pub const LOCAL_CONDITION_LIMIT: f64 = 1e8;

/// Shared inputs of the per-vertex problems.
pub struct LocalContext<'a> {
    pub mesh: &'a MeshTriplet,
    pub geometry: &'a Geometry,
    pub materials: &'a MaterialField,
    pub variant: Variant,
    pub quadrature: Quadrature,
    /// Per face: Dirichlet displacement boundary.
    pub mech_dirichlet: Vec<bool>,
    /// Per face: Dirichlet pressure boundary.
    pub flow_dirichlet: Vec<bool>,
}

impl<'a> LocalContext<'a> {
    pub fn new(
        mesh: &'a MeshTriplet,
        geometry: &'a Geometry,
        materials: &'a MaterialField,
        boundary: &BoundarySpec,
        variant: Variant,
    ) -> Self {
        Self {
            mesh,
            geometry,
            materials,
            variant,
            quadrature: Quadrature::new(geometry, variant.quadrature_rule()),
            mech_dirichlet: boundary.mechanics_dirichlet(mesh),
            flow_dirichlet: boundary.flow_dirichlet(mesh),
        }
    }
}

/// Condensed local maps of one vertex.
///
/// Gradients are stacked per participating subcell: two rows (∂/∂x, ∂/∂y) for
/// pressure, four rows (row-major `∂u_i/∂x_j`) for displacement. Columns are
/// local cell values (ordered as `cells`) or local boundary slots (ordered as
/// `boundary_slots`, two columns per slot for displacement data).
#[derive(Clone, Debug)]
pub struct VertexCondensation {
    pub vertex: usize,
    /// Participating cells, ascending.
    pub cells: Vec<usize>,
    /// Subcell of each participating cell at this vertex.
    pub subcells: Vec<usize>,
    /// Subfaces meeting at the vertex.
    pub subfaces: Vec<usize>,
    /// Global boundary slots of the boundary subfaces at the vertex.
    pub boundary_slots: Vec<usize>,
    /// Pressure gradients from cell pressures, `2nc × nc`.
    pub g_p: DMatrix<f64>,
    /// Pressure gradients from boundary data, `2nc × nb`.
    pub g_pb: DMatrix<f64>,
    /// Displacement gradients from cell displacements, `4nc × 2nc`.
    pub g_uu: DMatrix<f64>,
    /// Displacement gradients from cell pressures, `4nc × nc`.
    pub g_up: DMatrix<f64>,
    /// Displacement gradients from boundary data, `4nc × 2nb`.
    pub g_ub: DMatrix<f64>,
    /// Largest condition estimate of the two local solves.
    pub condition: f64,
}

impl VertexCondensation {
    pub fn local_index(&self, cell: usize) -> Option<usize> {
        self.cells.binary_search(&cell).ok()
    }

    /// Pressure value map at point `x` of subcell `i`: coefficients over `[cells | slots]`.
    pub fn flow_value_map(&self, geometry: &Geometry, i: usize, x: Point) -> DVector<f64> {
        let nc = self.cells.len();
        let dx = x - geometry.cell_center[self.cells[i]];
        let mut row = DVector::zeros(nc + self.boundary_slots.len());
        row[i] = 1.0;
        for c in 0..nc {
            row[c] += dx.x * self.g_p[(2 * i, c)] + dx.y * self.g_p[(2 * i + 1, c)];
        }
        for b in 0..self.boundary_slots.len() {
            row[nc + b] = dx.x * self.g_pb[(2 * i, b)] + dx.y * self.g_pb[(2 * i + 1, b)];
        }
        row
    }

    /// Displacement component `a` at point `x` of subcell `i`: coefficients over
    /// `[cell displacements | cell pressures | slot data]`.
    pub fn mechanics_value_map(&self, geometry: &Geometry, i: usize, a: usize, x: Point) -> DVector<f64> {
        let nc = self.cells.len();
        let nb = self.boundary_slots.len();
        let dx = x - geometry.cell_center[self.cells[i]];
        let (r0, r1) = (4 * i + 2 * a, 4 * i + 2 * a + 1);
        let mut row = DVector::zeros(3 * nc + 2 * nb);
        row[2 * i + a] = 1.0;
        for c in 0..2 * nc {
            row[c] += dx.x * self.g_uu[(r0, c)] + dx.y * self.g_uu[(r1, c)];
        }
        for c in 0..nc {
            row[2 * nc + c] = dx.x * self.g_up[(r0, c)] + dx.y * self.g_up[(r1, c)];
        }
        for c in 0..2 * nb {
            row[3 * nc + c] = dx.x * self.g_ub[(r0, c)] + dx.y * self.g_ub[(r1, c)];
        }
        row
    }
}

/// Local linear system: constraints `C y = R_C d` and, optionally, the
/// weighted least-squares objective `min Σ w (J y − R_J d)²`.
struct LocalSystem {
    n: usize,
    ncols: usize,
    c_rows: Vec<(DVector<f64>, DVector<f64>)>,
    j_rows: Vec<(DVector<f64>, DVector<f64>, f64)>,
}

impl LocalSystem {
    fn new(n: usize, ncols: usize) -> Self {
        Self { n, ncols, c_rows: vec![], j_rows: vec![] }
    }

    fn row(&self) -> (DVector<f64>, DVector<f64>) {
        (DVector::zeros(self.n), DVector::zeros(self.ncols))
    }

    fn constrain(&mut self, (mut a, mut r): (DVector<f64>, DVector<f64>)) {
        let s = a.amax();
        if s == 0.0 {
            // vacuous (e.g. zero permeability on both sides)
            return;
        }
        a /= s;
        r /= s;
        self.c_rows.push((a, r));
    }

    fn penalize(&mut self, (a, r): (DVector<f64>, DVector<f64>), w: f64) {
        self.j_rows.push((a, r, w));
    }

    /// Returns `y = X d` as the matrix `X` and a condition estimate.
    fn solve(self) -> std::result::Result<(DMatrix<f64>, f64), f64> {
        let (n, ncols) = (self.n, self.ncols);
        let m = self.c_rows.len();
        let (k, rhs) = if self.j_rows.is_empty() {
            if m != n {
                return Err(f64::INFINITY);
            }
            let (rows, r) = independent_rows(self.c_rows, n, ncols)?;
            let mut k = DMatrix::zeros(r, n);
            let mut rhs = DMatrix::zeros(r, ncols);
            for (i, (a, b)) in rows.iter().enumerate() {
                k.set_row(i, &a.transpose());
                rhs.set_row(i, &b.transpose());
            }
            if r < n {
                // dependent rows were reduced to orthonormal ones: minimum-norm solution
                return Ok((k.transpose() * rhs, 1.0));
            }
            (k, rhs)
        } else {
            let (c_rows, m) = independent_rows(self.c_rows, n, ncols)?;
            let wmax = self.j_rows.iter().fold(0.0f64, |s, r| s.max(r.2));
            let mut k = DMatrix::zeros(n + m, n + m);
            let mut rhs = DMatrix::zeros(n + m, ncols);
            for (a, r, w) in &self.j_rows {
                let w = if wmax > 0.0 { w / wmax } else { 1.0 };
                let mut kk = k.view_mut((0, 0), (n, n));
                kk.ger(w, a, a, 1.0);
                let mut rr = rhs.view_mut((0, 0), (n, ncols));
                rr.ger(w, a, r, 1.0);
            }
            for (i, (a, r)) in c_rows.iter().enumerate() {
                k.view_mut((n + i, 0), (1, n)).copy_from(&a.transpose());
                k.view_mut((0, n + i), (n, 1)).copy_from(a);
                rhs.set_row(n + i, &r.transpose());
            }
            (k, rhs)
        };
        let norm1 = |a: &DMatrix<f64>| a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max);
        let inv = match k.clone().lu().try_inverse() {
            Some(inv) => inv,
            None => return Err(f64::INFINITY),
        };
        let cond = norm1(&k) * norm1(&inv);
        if !cond.is_finite() || cond > LOCAL_CONDITION_LIMIT {
            return Err(cond);
        }
        let y = inv.rows(0, n) * rhs;
        Ok((y, cond))
    }
}

/// Replaces linearly dependent constraint rows by an orthonormal basis of their span.
///
/// Dependent rows occur on symmetric configurations (e.g. the shear tractions
/// around an unperturbed Cartesian vertex). The data combination along the
/// dropped directions normally vanishes; otherwise the constraints hold in the
/// least-squares sense.
#[allow(clippy::type_complexity)]
fn independent_rows(
    rows: Vec<(DVector<f64>, DVector<f64>)>,
    n: usize,
    ncols: usize,
) -> std::result::Result<(Vec<(DVector<f64>, DVector<f64>)>, usize), f64> {
    let m = rows.len();
    if m == 0 {
        return Ok((rows, 0));
    }
    let c = DMatrix::from_fn(m, n, |i, j| rows[i].0[j]);
    let svd = c.svd(true, true);
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-10 * smax).collect();
    if keep.len() == m {
        return Ok((rows, m));
    }
    let r = DMatrix::from_fn(m, ncols, |i, j| rows[i].1[j]);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let ut_r = u.transpose() * &r;
    let incompatible = (0..ut_r.nrows()).filter(|i| !keep.contains(i)).map(|i| ut_r.row(i).amax()).fold(0.0, f64::max);
    if incompatible > 1e-10 * r.amax().max(1.0) {
        // e.g. differing tangential Neumann data on both sides of a straight boundary vertex
        log::debug!("dependent local constraints with incompatible data; satisfied in least squares");
    }
    let reduced = keep
        .iter()
        .map(|&i| {
            let s = svd.singular_values[i];
            (vt.row(i).transpose(), ut_r.row(i).transpose() / s)
        })
        .collect();
    Ok((reduced, keep.len()))
}

fn harmonic(vals: &[f64]) -> f64 {
    if vals.len() == 1 {
        return vals[0];
    }
    if vals.iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    vals.len() as f64 / vals.iter().map(|v| 1.0 / v).sum::<f64>()
}

/// Condenses the flow and mechanics local problems around vertex `s`.
pub fn condense_vertex(ctx: &LocalContext, s: usize) -> Result<VertexCondensation> {
    let g = ctx.geometry;
    let mut subcells = g.vertex_subcells[s].clone();
    subcells.sort_by_key(|&sc| g.subcells[sc].cell);
    let cells: Vec<usize> = subcells.iter().map(|&sc| g.subcells[sc].cell).collect();
    if cells.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Mesh(format!("a cell touches vertex {s} more than once")));
    }
    let subfaces = g.vertex_subfaces[s].clone();
    let boundary_slots: Vec<usize> = subfaces.iter().filter_map(|&sf| g.subface_slot[sf]).collect();
    let scale = cells.iter().map(|&k| g.cell_diameter[k]).fold(0.0, f64::max);

    let (g_p, g_pb, c1) = condense_flow(ctx, s, &cells, &subfaces, scale)?;
    let (g_m, c2) = condense_mechanics(ctx, s, &cells, &subfaces, scale)?;
    let nc = cells.len();
    let nb = boundary_slots.len();
    Ok(VertexCondensation {
        vertex: s,
        g_uu: g_m.columns(0, 2 * nc).into_owned(),
        g_up: g_m.columns(2 * nc, nc).into_owned(),
        g_ub: g_m.columns(3 * nc, 2 * nb).into_owned(),
        cells,
        subcells,
        subfaces,
        boundary_slots,
        g_p,
        g_pb,
        condition: c1.max(c2),
    })
}

/// Condenses every vertex (in parallel); the result is indexed by vertex.
pub fn condense_all(ctx: &LocalContext) -> Result<Vec<VertexCondensation>> {
    (0..ctx.mesh.num_vertices()).into_par_iter().map(|s| condense_vertex(ctx, s)).collect()
}

/// Per local subface: the halves as (local cell index, face), sorted by cell.
fn sides(ctx: &LocalContext, cells: &[usize], sf: usize) -> Vec<(usize, usize)> {
    let g = ctx.geometry;
    g.subface_halves[sf]
        .iter()
        .map(|&hf| {
            let k = g.half_cell(hf);
            (cells.binary_search(&k).unwrap(), g.subfaces[sf].face)
        })
        .collect()
}

fn condense_flow(
    ctx: &LocalContext,
    s: usize,
    cells: &[usize],
    subfaces: &[usize],
    scale: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let g = ctx.geometry;
    let q = &ctx.quadrature;
    let nc = cells.len();
    let slots: Vec<usize> = subfaces.iter().filter_map(|&sf| g.subface_slot[sf]).collect();
    let nb = slots.len();
    let mut sys = LocalSystem::new(2 * nc, nc + nb);
    let offset = |i: usize, x: Point| (x - g.cell_center[cells[i]]) / scale;
    let mut bidx = 0;
    for &sf in subfaces {
        let sd = sides(ctx, cells, sf);
        let face = g.subfaces[sf].face;
        if sd.len() == 2 {
            let mut row = sys.row();
            for &(i, f) in &sd {
                let k = &ctx.materials.cells[cells[i]].permeability;
                let kn = k * g.normal(cells[i], f);
                row.0[2 * i] = kn.x;
                row.0[2 * i + 1] = kn.y;
            }
            sys.constrain(row);
            let (i, j) = (sd[0].0, sd[1].0);
            let n = g.face_normal[face];
            let nu = harmonic(&[i, j].map(|l| ctx.materials.cells[cells[l]].normal_permeability(&n)));
            let m = g.subfaces[sf].length;
            for (x, w) in q.points(sf).iter().zip(q.weights(sf)) {
                let mut row = sys.row();
                let (di, dj) = (offset(i, *x), offset(j, *x));
                row.0[2 * i] = di.x;
                row.0[2 * i + 1] = di.y;
                row.0[2 * j] = -dj.x;
                row.0[2 * j + 1] = -dj.y;
                row.1[j] = 1.0;
                row.1[i] = -1.0;
                if ctx.variant.strong_continuity() {
                    sys.constrain(row);
                } else {
                    sys.penalize(row, nu * w / m);
                }
            }
        } else {
            let (i, f) = sd[0];
            let b = nc + bidx;
            bidx += 1;
            let mut row = sys.row();
            if ctx.flow_dirichlet[face] {
                let d = offset(i, q.mean_point(sf));
                row.0[2 * i] = d.x;
                row.0[2 * i + 1] = d.y;
                row.1[b] = 1.0;
                row.1[i] = -1.0;
            } else {
                let kn = ctx.materials.cells[cells[i]].permeability * g.normal(cells[i], f);
                row.0[2 * i] = -kn.x;
                row.0[2 * i + 1] = -kn.y;
                row.1[b] = scale;
            }
            sys.constrain(row);
        }
    }
    let (y, cond) = sys.solve().map_err(|condition| Error::LocalSolve { vertex: s, condition })?;
    let y = y / scale;
    Ok((y.columns(0, nc).into_owned(), y.columns(nc, nb).into_owned(), cond))
}

fn condense_mechanics(
    ctx: &LocalContext,
    s: usize,
    cells: &[usize],
    subfaces: &[usize],
    scale: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let g = ctx.geometry;
    let q = &ctx.quadrature;
    let nc = cells.len();
    let nb = subfaces.iter().filter(|&&sf| g.subface_slot[sf].is_some()).count();
    // columns: [u (2nc) | p (nc) | boundary data (2nb)]
    let (pcol, bcol) = (2 * nc, 3 * nc);
    let mut sys = LocalSystem::new(4 * nc, 3 * nc + 2 * nb);
    let offset = |i: usize, x: Point| (x - g.cell_center[cells[i]]) / scale;
    let mut bidx = 0;
    for &sf in subfaces {
        let sd = sides(ctx, cells, sf);
        let face = g.subfaces[sf].face;
        if sd.len() == 2 {
            let mut rows = [sys.row(), sys.row()];
            for &(i, f) in &sd {
                let mat = &ctx.materials.cells[cells[i]];
                let n = g.normal(cells[i], f);
                let t = mat.traction_map(&n);
                for a in 0..2 {
                    for c in 0..4 {
                        rows[a].0[4 * i + c] = t[(a, c)];
                    }
                    rows[a].1[pcol + i] = scale * mat.alpha * n[a];
                }
            }
            for r in rows {
                sys.constrain(r);
            }
            let (i, j) = (sd[0].0, sd[1].0);
            let n = g.face_normal[face];
            let nu = harmonic(&[i, j].map(|l| ctx.materials.cells[cells[l]].normal_stiffness(&n)));
            let m = g.subfaces[sf].length;
            for (x, w) in q.points(sf).iter().zip(q.weights(sf)) {
                let (di, dj) = (offset(i, *x), offset(j, *x));
                for a in 0..2 {
                    let mut row = sys.row();
                    row.0[4 * i + 2 * a] = di.x;
                    row.0[4 * i + 2 * a + 1] = di.y;
                    row.0[4 * j + 2 * a] = -dj.x;
                    row.0[4 * j + 2 * a + 1] = -dj.y;
                    row.1[2 * j + a] = 1.0;
                    row.1[2 * i + a] = -1.0;
                    if ctx.variant.strong_continuity() {
                        sys.constrain(row);
                    } else {
                        sys.penalize(row, nu * w / m);
                    }
                }
            }
        } else {
            let (i, f) = sd[0];
            let b = bcol + 2 * bidx;
            bidx += 1;
            let mat = &ctx.materials.cells[cells[i]];
            if ctx.mech_dirichlet[face] {
                let d = offset(i, q.mean_point(sf));
                for a in 0..2 {
                    let mut row = sys.row();
                    row.0[4 * i + 2 * a] = d.x;
                    row.0[4 * i + 2 * a + 1] = d.y;
                    row.1[b + a] = 1.0;
                    row.1[2 * i + a] = -1.0;
                    sys.constrain(row);
                }
            } else {
                let n = g.normal(cells[i], f);
                let t = mat.traction_map(&n);
                for a in 0..2 {
                    let mut row = sys.row();
                    for c in 0..4 {
                        row.0[4 * i + c] = t[(a, c)];
                    }
                    row.1[b + a] = scale;
                    row.1[pcol + i] = scale * mat.alpha * n[a];
                    sys.constrain(row);
                }
            }
        }
    }
    let (y, cond) = sys.solve().map_err(|condition| Error::LocalSolve { vertex: s, condition })?;
    Ok((y / scale, cond))
}
