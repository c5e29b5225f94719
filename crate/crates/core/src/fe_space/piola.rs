//! Contravariant Piola transform of reference vector basis functions.

use crate::error::{Error, Result};
use crate::fe_space::reference::VectorEval;
use crate::mesh::CellGeometry;
use crate::scalar::{mat_mul, mat_vec, Real};

/// Maps a reference evaluation onto a cell: `v = J v̂ / det J`, `div v = div v̂ / det J`,
/// `∇v = J ∇̂v̂ J⁻¹ / det J`.
pub fn piola_map<T: Real>(geom: &CellGeometry<T>, reference: &VectorEval<T>) -> Result<VectorEval<T>> {
    if !(geom.det > T::zero()) {
        return Err(Error::NonPositiveArea {
            cell: usize::MAX,
            area: geom.area().as_f64(),
        });
    }
    Ok(piola_unchecked(geom, reference))
}

#[inline]
pub(crate) fn piola_unchecked<T: Real>(geom: &CellGeometry<T>, r: &VectorEval<T>) -> VectorEval<T> {
    let inv_det = T::one() / geom.det;
    let value = mat_vec(&geom.jacobian, r.value).map(|x| x * inv_det);
    let grad = mat_mul(&mat_mul(&geom.jacobian, &r.grad), &geom.inverse).map(|row| row.map(|x| x * inv_det));
    VectorEval {
        value,
        grad,
        div: r.div * inv_det,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::reference::RtReference;

    #[test]
    fn identity_and_translation() {
        let rt = RtReference::<f64>::new(1).unwrap();
        let p = [0.2, 0.3];
        for origin in [[0.0, 0.0], [2.5, -1.0]] {
            let g = CellGeometry::from_vertices([
                origin,
                [origin[0] + 1.0, origin[1]],
                [origin[0], origin[1] + 1.0],
            ]);
            for e in rt.eval(p) {
                let m = piola_map(&g, &e).unwrap();
                assert_eq!(m, e);
            }
        }
    }

    #[test]
    fn degenerate_cell_rejected() {
        let g = CellGeometry::from_vertices([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        let e = VectorEval::<f64>::zero();
        assert!(piola_map(&g, &e).is_err());
    }
}
