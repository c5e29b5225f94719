//! Conforming triangulations of the unit square with oriented facets.
//!
//! Cells are stored counterclockwise. Local edge `i` of a cell is the edge opposite local
//! vertex `i`, traversed from local vertex `i+1` to `i+2`. Every facet carries a fixed unit
//! normal pointing from its plus cell (the lower cell id) to its minus cell, or outward on
//! the boundary. Jumps are `plus - minus`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fe_space::quadrature::SegmentRule;
use crate::scalar::{Mat2, Real, Vec2};

static NEXT_MESH_ID: AtomicUsize = AtomicUsize::new(0);

const MAX_PERTURB_RETRIES: usize = 5;

/// Affine map from the reference triangle `(0,0), (1,0), (0,1)` onto a cell.
#[derive(Clone, Debug)]
pub struct CellGeometry<T> {
    pub origin: Vec2<T>,
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jacobian: Mat2<T>,
    pub det: T,
    pub inverse: Mat2<T>,
    /// Longest edge.
    pub diameter: T,
}

impl<T: Real> CellGeometry<T> {
    pub fn from_vertices(v: [Vec2<T>; 3]) -> Self {
        let jacobian = [
            [v[1][0] - v[0][0], v[2][0] - v[0][0]],
            [v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        let inverse = [
            [jacobian[1][1] / det, -jacobian[0][1] / det],
            [-jacobian[1][0] / det, jacobian[0][0] / det],
        ];
        let mut diameter = T::zero();
        for i in 0..3 {
            let a = v[i];
            let b = v[(i + 1) % 3];
            diameter = diameter.max(((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt());
        }
        Self {
            origin: v[0],
            jacobian,
            det,
            inverse,
            diameter,
        }
    }

    pub fn area(&self) -> T {
        self.det * T::lit(0.5)
    }

    #[inline]
    pub fn map(&self, xi: Vec2<T>) -> Vec2<T> {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    #[inline]
    pub fn inverse_map(&self, x: Vec2<T>) -> Vec2<T> {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let m = &self.inverse;
        [m[0][0] * d[0] + m[0][1] * d[1], m[1][0] * d[0] + m[1][1] * d[1]]
    }
}

#[derive(Clone, Debug)]
pub struct Facet<T> {
    /// Global vertex ids, sorted ascending. The facet parameter `s` runs from the first to
    /// the second.
    pub vertices: [usize; 2],
    pub normal: Vec2<T>,
    /// Facet diameter `h_F` (its length).
    pub length: T,
    pub plus_cell: usize,
    pub minus_cell: Option<usize>,
}

impl<T> Facet<T> {
    pub fn is_boundary(&self) -> bool {
        self.minus_cell.is_none()
    }
}

/// Reference to a facet from one of its cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellFacet {
    pub facet: usize,
    /// `+1` when the facet normal is this cell's outward normal (the cell is the plus side).
    pub orientation: i8,
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    id: usize,
    vertices: Vec<Vec2<T>>,
    cells: Vec<[usize; 3]>,
    facets: Vec<Facet<T>>,
    cell_facets: Vec<[CellFacet; 3]>,
    geometry: Vec<CellGeometry<T>>,
    h_max: T,
    h_min: T,
}

/// Quadrature points of a facet as seen from both adjacent cells.
#[derive(Clone, Debug)]
pub struct FacetTrace<T> {
    /// Facet parameter in `[0, 1]` of each point.
    pub params: Vec<T>,
    /// Physical weights; they sum to the facet length.
    pub weights: Vec<T>,
    pub plus_points: Vec<Vec2<T>>,
    pub minus_points: Option<Vec<Vec2<T>>>,
}

const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

pub(crate) fn reference_vertex<T: Real>(i: usize) -> Vec2<T> {
    [T::lit(REFERENCE_VERTICES[i][0]), T::lit(REFERENCE_VERTICES[i][1])]
}

impl<T: Real> Mesh<T> {
    /// Builds the topology of a triangulation from raw vertex and cell lists.
    pub fn from_parts(vertices: Vec<Vec2<T>>, cells: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (c, cell) in cells.iter().enumerate() {
            for &index in cell {
                if index >= nv {
                    return Err(Error::VertexIndexOutOfRange { cell: c, index, nv });
                }
            }
        }
        let geometry: Vec<_> = cells
            .iter()
            .map(|cell| CellGeometry::from_vertices(cell.map(|i| vertices[i])))
            .collect();
        for (c, g) in geometry.iter().enumerate() {
            if !(g.det > T::zero()) {
                return Err(Error::NonPositiveArea {
                    cell: c,
                    area: g.area().as_f64(),
                });
            }
        }

        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut facets: Vec<Facet<T>> = Vec::new();
        let mut cell_facets = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut local = [CellFacet {
                facet: 0,
                orientation: 1,
            }; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = cell[(i + 1) % 3];
                let b = cell[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                match edge_map.get(&key) {
                    None => {
                        let id = facets.len();
                        edge_map.insert(key, id);
                        let pa = vertices[key.0];
                        let pb = vertices[key.1];
                        let t = [pb[0] - pa[0], pb[1] - pa[1]];
                        let length = (t[0] * t[0] + t[1] * t[1]).sqrt();
                        let mut normal = [t[1] / length, -t[0] / length];
                        // orient away from the opposite vertex of the creating (plus) cell
                        let opp = vertices[cell[i]];
                        let to_opp = [opp[0] - pa[0], opp[1] - pa[1]];
                        if normal[0] * to_opp[0] + normal[1] * to_opp[1] > T::zero() {
                            normal = [-normal[0], -normal[1]];
                        }
                        facets.push(Facet {
                            vertices: [key.0, key.1],
                            normal,
                            length,
                            plus_cell: c,
                            minus_cell: None,
                        });
                        *slot = CellFacet {
                            facet: id,
                            orientation: 1,
                        };
                    }
                    Some(&id) => {
                        let f = &mut facets[id];
                        if f.minus_cell.is_some() {
                            return Err(Error::NonConforming(key.0, key.1));
                        }
                        f.minus_cell = Some(c);
                        *slot = CellFacet {
                            facet: id,
                            orientation: -1,
                        };
                    }
                }
            }
            cell_facets.push(local);
        }

        let h_max = geometry
            .iter()
            .map(|g| g.diameter)
            .fold(T::zero(), |a, b| a.max(b));
        let h_min = geometry
            .iter()
            .map(|g| g.diameter)
            .fold(T::infinity(), |a, b| a.min(b));

        Ok(Self {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            vertices,
            cells,
            facets,
            cell_facets,
            geometry,
            h_max,
            h_min,
        })
    }

    /// Structured `n x n` grid of the unit square, each square split along its
    /// `(0,0)-(1,1)` diagonal, with interior vertices randomly displaced by at most
    /// `perturb / n`.
    pub fn build_structured(n: usize, perturb: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "structured mesh needs n >= 2, got {n}"
            )));
        }
        if !(0.0..=0.3).contains(&perturb) {
            return Err(Error::InvalidArgument(format!(
                "perturbation {perturb} outside [0, 0.3]"
            )));
        }
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = idx(i, j);
                let v10 = idx(i + 1, j);
                let v01 = idx(i, j + 1);
                let v11 = idx(i + 1, j + 1);
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }
        let nf = n as f64;
        let mut amplitude = perturb;
        for _ in 0..=MAX_PERTURB_RETRIES {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
            for j in 0..=n {
                for i in 0..=n {
                    let mut x = i as f64 / nf;
                    let mut y = j as f64 / nf;
                    if amplitude > 0.0 && i > 0 && i < n && j > 0 && j < n {
                        let r: f64 = rng.random_range(0.0..=1.0) * amplitude / nf;
                        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                        x += r * theta.cos();
                        y += r * theta.sin();
                    }
                    vertices.push([T::lit(x), T::lit(y)]);
                }
            }
            match Self::from_parts(vertices, cells.clone()) {
                Ok(mesh) => return Ok(mesh),
                Err(Error::NonPositiveArea { .. }) => amplitude *= 0.5,
                Err(e) => return Err(e),
            }
        }
        Err(Error::PerturbationFailed(MAX_PERTURB_RETRIES))
    }

    /// Parses the plain-text mesh format: `nv nc`, then `nv` lines `x y`, then `nc` lines
    /// `i j k` with 0-based vertex indices.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let parse_err = |line: usize, msg: String| Error::MeshParse { line, msg };

        let (hl, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty mesh file".into()))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(hl, format!("bad header counts: {e}")))?;
        let [nv, nc] = counts[..] else {
            return Err(parse_err(hl, "header must be \"nv nc\"".into()));
        };

        let mut vertices = Vec::with_capacity(nv);
        for k in 0..nv {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| parse_err(hl, format!("expected {nv} vertices, found {k}")))?;
            let xy: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(ln, format!("bad vertex coordinate: {e}")))?;
            let [x, y] = xy[..] else {
                return Err(parse_err(ln, "vertex line must be \"x y\"".into()));
            };
            vertices.push([T::lit(x), T::lit(y)]);
        }
        let mut cells = Vec::with_capacity(nc);
        for k in 0..nc {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| parse_err(hl, format!("expected {nc} cells, found {k}")))?;
            let ijk: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(ln, format!("bad cell index: {e}")))?;
            let [i, j, kk] = ijk[..] else {
                return Err(parse_err(ln, "cell line must be \"i j k\"".into()));
            };
            cells.push([i, j, kk]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(parse_err(ln, "trailing content after cell list".into()));
        }
        Self::from_parts(vertices, cells)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serializes to the text format with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.vertices.len(), self.cells.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{:.16e} {:.16e}", v[0].as_f64(), v[1].as_f64());
        }
        for c in &self.cells {
            let _ = writeln!(out, "{} {} {}", c[0], c[1], c[2]);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }
    pub fn vertices(&self) -> &[Vec2<T>] {
        &self.vertices
    }
    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }
    pub fn facets(&self) -> &[Facet<T>] {
        &self.facets
    }
    pub fn cell_facets(&self, cell: usize) -> &[CellFacet; 3] {
        &self.cell_facets[cell]
    }
    pub fn geometry(&self, cell: usize) -> &CellGeometry<T> {
        &self.geometry[cell]
    }
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }
    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }
    pub fn h_max(&self) -> T {
        self.h_max
    }
    pub fn h_min(&self) -> T {
        self.h_min
    }

    pub fn total_area(&self) -> T {
        self.geometry.iter().map(|g| g.area()).sum()
    }

    /// Local index (0..3) of global vertex `v` in `cell`.
    pub(crate) fn local_vertex(&self, cell: usize, v: usize) -> usize {
        self.cells[cell]
            .iter()
            .position(|&x| x == v)
            .expect("vertex belongs to cell")
    }

    /// Reference coordinates on `cell` of the point with parameter `s` on `facet`.
    pub(crate) fn facet_reference_point(&self, facet: usize, cell: usize, s: T) -> Vec2<T> {
        let f = &self.facets[facet];
        let a = reference_vertex::<T>(self.local_vertex(cell, f.vertices[0]));
        let b = reference_vertex::<T>(self.local_vertex(cell, f.vertices[1]));
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
    }

    /// Physical quadrature points on a facet, mapped independently through each adjacent cell.
    pub fn facet_trace_points(&self, facet: usize, rule: &SegmentRule<T>) -> FacetTrace<T> {
        let f = &self.facets[facet];
        let side = |cell: usize| -> Vec<Vec2<T>> {
            let g = &self.geometry[cell];
            rule.points
                .iter()
                .map(|&s| g.map(self.facet_reference_point(facet, cell, s)))
                .collect()
        };
        FacetTrace {
            params: rule.points.clone(),
            weights: rule.weights.iter().map(|&w| w * f.length).collect(),
            plus_points: side(f.plus_cell),
            minus_points: f.minus_cell.map(side),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_counts() {
        let m = Mesh::<f64>::build_structured(2, 0.0, 0).unwrap();
        assert_eq!(m.n_cells(), 8);
        assert_eq!(m.n_facets(), 16);
        assert_eq!(m.n_vertices(), 9);
        assert!((m.h_max() - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn normals_point_plus_to_minus() {
        let m = Mesh::<f64>::build_structured(4, 0.2, 3).unwrap();
        for f in m.facets() {
            let nrm = (f.normal[0].powi(2) + f.normal[1].powi(2)).sqrt();
            assert!((nrm - 1.0).abs() < 1e-14);
            let centroid = |c: usize| {
                let v = m.cells()[c].map(|i| m.vertices()[i]);
                [
                    (v[0][0] + v[1][0] + v[2][0]) / 3.0,
                    (v[0][1] + v[1][1] + v[2][1]) / 3.0,
                ]
            };
            let pm = centroid(f.plus_cell);
            let mid = m.vertices()[f.vertices[0]];
            let d = [mid[0] - pm[0], mid[1] - pm[1]];
            assert!(f.normal[0] * d[0] + f.normal[1] * d[1] > 0.0);
            if let Some(mc) = f.minus_cell {
                assert!(f.plus_cell < mc);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(Mesh::<f64>::build_structured(1, 0.0, 0).is_err());
        assert!(Mesh::<f64>::build_structured(4, 0.5, 0).is_err());
    }

    #[test]
    fn clockwise_cell_rejected() {
        let err = Mesh::<f64>::parse("3 1\n0 0\n1 0\n0 1\n0 2 1\n").unwrap_err();
        assert!(matches!(err, Error::NonPositiveArea { cell: 0, .. }));
    }

    #[test]
    fn malformed_header() {
        let err = Mesh::<f64>::parse("3\n0 0\n").unwrap_err();
        assert!(err.to_string().contains("header"));
        let err = Mesh::<f64>::parse("3 1\n0 0\n1 0\n").unwrap_err();
        assert!(err.to_string().contains("expected 3 vertices"));
    }

    #[test]
    fn midpoint_trace() {
        let m = Mesh::<f64>::build_structured(3, 0.1, 1).unwrap();
        let rule = SegmentRule::<f64>::gauss(1);
        for (i, f) in m.facets().iter().enumerate() {
            let tr = m.facet_trace_points(i, &rule);
            let a = m.vertices()[f.vertices[0]];
            let b = m.vertices()[f.vertices[1]];
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            assert!((tr.plus_points[0][0] - mid[0]).abs() < 1e-14);
            assert!((tr.plus_points[0][1] - mid[1]).abs() < 1e-14);
        }
    }
}
