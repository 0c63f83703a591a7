use crate::materials::MaterialField;
use crate::mesh::{FluxBc, Mesh, SolidBc};
use crate::polybasis::dim_p;

/// Offsets of the volume unknowns of a single element.
///
/// Order: u (x then y), p (x then y), sigma_E (three frame components),
/// sigma_V (three frame components, viscous elements only), psi. Each
/// component block holds the coefficients of one scalar polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LocalLayout {
    pub k: usize,
    /// Basis size of P_{k+1}.
    pub n1: usize,
    /// Basis size of P_k.
    pub n0: usize,
    /// Basis size of P_{k+1} on a face.
    pub nf: usize,
    pub viscous: bool,
}

impl LocalLayout {
    pub fn new(k: usize, viscous: bool) -> Self {
        Self {
            k,
            n1: dim_p(k + 1),
            n0: dim_p(k),
            nf: k + 2,
            viscous,
        }
    }

    pub fn u(&self, d: usize, i: usize) -> usize {
        d * self.n1 + i
    }

    pub fn p(&self, d: usize, i: usize) -> usize {
        (2 + d) * self.n1 + i
    }

    /// Size of the (u, p) group.
    pub fn n_w1(&self) -> usize {
        4 * self.n1
    }

    pub fn sigma_e(&self, c: usize, j: usize) -> usize {
        self.n_w1() + c * self.n0 + j
    }

    pub fn sigma_v(&self, c: usize, j: usize) -> usize {
        debug_assert!(self.viscous);
        self.n_w1() + (3 + c) * self.n0 + j
    }

    pub fn psi(&self, j: usize) -> usize {
        self.n_w1() + self.n_stress() + j
    }

    fn n_stress(&self) -> usize {
        if self.viscous {
            6 * self.n0
        } else {
            3 * self.n0
        }
    }

    /// Size of the (sigma_E, sigma_V, psi) group.
    pub fn n_w2(&self) -> usize {
        self.n_stress() + self.n0
    }

    pub fn n_volume(&self) -> usize {
        self.n_w1() + self.n_w2()
    }

    /// Local trace index: local face `f`, component `c` (0, 1 for u-hat;
    /// 2, 3 for p-hat), face basis function `a`.
    pub fn trace(&self, f: usize, c: usize, a: usize) -> usize {
        (4 * f + c) * self.nf + a
    }

    pub fn n_trace(&self) -> usize {
        12 * self.nf
    }
}

/// Global numbering of volume and skeleton unknowns.
///
/// Skeleton unknowns are stored face-major: face `F` owns the full block
/// `[u-hat_x, u-hat_y, p-hat_x, p-hat_y]` starting at `4 nf F`. Blocks on
/// strongly constrained faces (u-hat on `dirichlet_u` faces, p-hat on
/// `neumann_p` faces) are excluded from the free numbering.
#[derive(Clone, Debug)]
pub struct DofLayout {
    pub k: usize,
    locals: [LocalLayout; 2],
    viscous: Vec<bool>,
    volume_offsets: Vec<usize>,
    /// Free skeleton index for each full trace index.
    free_index: Vec<Option<usize>>,
    n_free: usize,
    solid_constrained: Vec<bool>,
    flux_constrained: Vec<bool>,
}

impl DofLayout {
    pub fn new(mesh: &Mesh, materials: &MaterialField, k: usize) -> Self {
        let locals = [LocalLayout::new(k, false), LocalLayout::new(k, true)];
        let viscous: Vec<bool> = (0..mesh.num_elements()).map(|e| materials.get(e).viscous()).collect();
        let mut volume_offsets = Vec::with_capacity(viscous.len() + 1);
        let mut off = 0;
        for &v in &viscous {
            volume_offsets.push(off);
            off += locals[v as usize].n_volume();
        }
        volume_offsets.push(off);
        let nf = k + 2;
        let mut solid_constrained = Vec::with_capacity(mesh.num_faces());
        let mut flux_constrained = Vec::with_capacity(mesh.num_faces());
        let mut free_index = Vec::with_capacity(4 * nf * mesh.num_faces());
        let mut n_free = 0;
        for face in mesh.faces() {
            let sc = matches!(face.tags, Some(t) if t.solid == SolidBc::DirichletU);
            let fc = matches!(face.tags, Some(t) if t.flux == FluxBc::NeumannP);
            solid_constrained.push(sc);
            flux_constrained.push(fc);
            for c in 0..4 {
                let constrained = if c < 2 { sc } else { fc };
                for _ in 0..nf {
                    if constrained {
                        free_index.push(None);
                    } else {
                        free_index.push(Some(n_free));
                        n_free += 1;
                    }
                }
            }
        }
        Self {
            k,
            locals,
            viscous,
            volume_offsets,
            free_index,
            n_free,
            solid_constrained,
            flux_constrained,
        }
    }

    pub fn local(&self, e: usize) -> &LocalLayout {
        &self.locals[self.viscous[e] as usize]
    }

    pub fn num_elements(&self) -> usize {
        self.viscous.len()
    }

    pub fn volume_range(&self, e: usize) -> std::ops::Range<usize> {
        self.volume_offsets[e]..self.volume_offsets[e + 1]
    }

    pub fn n_volume(&self) -> usize {
        *self.volume_offsets.last().unwrap_or(&0)
    }

    pub fn nf(&self) -> usize {
        self.k + 2
    }

    /// Full trace index of component `c`, function `a` on global face `face`.
    pub fn trace_index(&self, face: usize, c: usize, a: usize) -> usize {
        (4 * face + c) * self.nf() + a
    }

    pub fn n_trace_full(&self) -> usize {
        self.free_index.len()
    }

    pub fn free_index(&self, full: usize) -> Option<usize> {
        self.free_index[full]
    }

    /// Skeleton system dimension.
    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn solid_constrained(&self, face: usize) -> bool {
        self.solid_constrained[face]
    }

    pub fn flux_constrained(&self, face: usize) -> bool {
        self.flux_constrained[face]
    }

    /// Whether full trace index `full` is strongly prescribed.
    pub fn is_constrained(&self, full: usize) -> bool {
        self.free_index[full].is_none()
    }

    /// Full trace indices of the local trace block of element `e`, in local
    /// order.
    pub fn element_trace_indices(&self, mesh: &Mesh, e: usize) -> Vec<usize> {
        let nf = self.nf();
        let mut out = Vec::with_capacity(12 * nf);
        for face in mesh.element_faces(e) {
            for c in 0..4 {
                for a in 0..nf {
                    out.push(self.trace_index(face, c, a));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::preset;
    use crate::mesh::{BoundaryTags, Diagonal, Rect};

    #[test]
    fn block_sizes() {
        let l = LocalLayout::new(1, true);
        assert_eq!(l.n1, 6);
        assert_eq!(l.n0, 3);
        assert_eq!(l.n_w1(), 24);
        assert_eq!(l.n_w2(), 21);
        assert_eq!(l.psi(2), 44);
        assert_eq!(LocalLayout::new(1, false).n_w2(), 12);
        assert_eq!(l.n_trace(), 36);
    }

    #[test]
    fn skeleton_dimension_with_dirichlet_u() {
        let mesh = Mesh::structured(Rect::unit(), 1, Diagonal::default(), |_, _| BoundaryTags::all_dirichlet()).unwrap();
        let mat = MaterialField::uniform(preset("l1").unwrap(), mesh.num_elements()).unwrap();
        let layout = DofLayout::new(&mesh, &mat, 1);
        // u-hat on the single interior face plus p-hat on all five faces
        assert_eq!(layout.n_free(), 6 + 5 * 6);
        let free: Vec<usize> = (0..layout.n_trace_full()).filter_map(|i| layout.free_index(i)).collect();
        assert_eq!(free, (0..36).collect::<Vec<_>>());
        assert_eq!(layout.n_volume(), 2 * 45);
    }
}
