//! Measurable operator-valued coefficients M(x) on the exterior algebra,
//! with the strict ellipticity gate M = ess-sup ||M(x)|| < 1.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::algebra::Blade;
use crate::error::{Error, Result};
use crate::grid::{BoxRegion, GridSpec, MultivectorField, SubdomainSpec};

/// Structural tag recording how the pointwise blocks act on grades.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CoefficientStructure {
    General,
    GradePreserving,
    GradeOneOnly,
}

/// A pointwise linear map M(x) on the exterior algebra, one dense
/// 2^n x 2^n block per node, with certified sup norm M < 1.
#[derive(Clone)]
pub struct CoefficientField {
    spec: GridSpec,
    blocks: Vec<f64>,
    norm_bound: f64,
    structure: CoefficientStructure,
    support: Vec<bool>,
}

impl CoefficientField {
    /// Identically zero coefficient (M = 0).
    pub fn zero(spec: GridSpec) -> Self {
        let nb = spec.n_blades();
        CoefficientField {
            spec,
            blocks: vec![0.0; spec.node_count() * nb * nb],
            norm_bound: 0.0,
            structure: CoefficientStructure::GradeOneOnly,
            support: vec![false; spec.node_count()],
        }
    }

    /// Build from a per-node block function; fails unless sup ||M(x)|| < 1.
    pub fn from_fn(
        spec: GridSpec,
        structure: CoefficientStructure,
        mut f: impl FnMut(&[f64]) -> DMatrix<f64>,
    ) -> Result<Self> {
        let nb = spec.n_blades();
        let mut blocks = vec![0.0; spec.node_count() * nb * nb];
        for node in 0..spec.node_count() {
            let x = spec.node_position(node);
            let block = f(&x);
            assert_eq!(block.nrows(), nb);
            assert_eq!(block.ncols(), nb);
            for r in 0..nb {
                for c in 0..nb {
                    blocks[(node * nb + r) * nb + c] = block[(r, c)];
                }
            }
        }
        Self::from_blocks(spec, blocks, structure)
    }

    pub fn from_blocks(
        spec: GridSpec,
        blocks: Vec<f64>,
        structure: CoefficientStructure,
    ) -> Result<Self> {
        let nb = spec.n_blades();
        assert_eq!(blocks.len(), spec.node_count() * nb * nb);
        let norms: Vec<f64> = (0..spec.node_count())
            .into_par_iter()
            .map(|node| node_norm(&blocks, node, nb))
            .collect();
        let norm_bound = norms.iter().cloned().fold(0.0, f64::max);
        if !(norm_bound < 1.0) {
            return Err(Error::CoefficientNormTooLarge { m: norm_bound });
        }
        let support = norms.iter().map(|&n| n > 0.0).collect();
        Ok(CoefficientField {
            spec,
            blocks,
            norm_bound,
            structure,
            support,
        })
    }

    /// Constant coefficient block at every node.
    pub fn constant(spec: GridSpec, block: &DMatrix<f64>) -> Result<Self> {
        Self::from_fn(spec, structure_of_block(block, spec.dim), |_| block.clone())
    }

    /// Embed a per-node n x n matrix as the grade-1 action, zero elsewhere.
    pub fn grade1_from_fn(
        spec: GridSpec,
        mut f: impl FnMut(&[f64]) -> DMatrix<f64>,
    ) -> Result<Self> {
        let dim = spec.dim;
        Self::from_fn(spec, CoefficientStructure::GradeOneOnly, |x| {
            let small = f(x);
            assert_eq!(small.nrows(), dim);
            assert_eq!(small.ncols(), dim);
            embed_grade1(&small, dim)
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// Certified sup over nodes of the pointwise operator norm.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn structure(&self) -> CoefficientStructure {
        self.structure
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    pub fn block_at(&self, node: usize) -> DMatrix<f64> {
        let nb = self.spec.n_blades();
        DMatrix::from_fn(nb, nb, |r, c| self.blocks[(node * nb + r) * nb + c])
    }

    /// Smallest distance (per axis, in physical units) from the support to
    /// the box boundary; the full box length when the support is empty.
    pub fn support_margin(&self) -> f64 {
        let h = self.spec.spacing();
        let n = self.spec.points;
        let mut margin = self.spec.box_len;
        let mut coords = vec![0usize; self.spec.dim];
        for node in 0..self.spec.node_count() {
            if !self.support[node] {
                continue;
            }
            self.spec.node_coords(node, &mut coords);
            for &c in &coords {
                let d_lo = c as f64 * h;
                let d_hi = (n - 1 - c) as f64 * h;
                margin = margin.min(d_lo).min(d_hi);
            }
        }
        margin
    }

    pub fn support_is_empty(&self) -> bool {
        !self.support.iter().any(|&s| s)
    }

    /// Pointwise application y(x) = M(x) f(x); the polynomial part of the
    /// input is evaluated at nodes first (the product is a grid field).
    pub fn apply(&self, f: &MultivectorField) -> MultivectorField {
        assert_eq!(f.spec(), self.spec);
        let nb = self.spec.n_blades();
        let flat = f.flatten_poly();
        let input = flat.values();
        let mut out = vec![0.0; input.len()];
        out.par_chunks_mut(nb)
            .enumerate()
            .for_each(|(node, chunk)| {
                if !self.support[node] {
                    return;
                }
                let base = node * nb;
                for (r, o) in chunk.iter_mut().enumerate() {
                    let row = &self.blocks[(base + r) * nb..(base + r + 1) * nb];
                    let mut acc = 0.0;
                    for (c, w) in row.iter().enumerate() {
                        acc += w * input[base + c];
                    }
                    *o = acc;
                }
            });
        MultivectorField::from_values(self.spec, out, None)
    }
}

fn node_norm(blocks: &[f64], node: usize, nb: usize) -> f64 {
    let block = DMatrix::from_fn(nb, nb, |r, c| blocks[(node * nb + r) * nb + c]);
    if block.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    // largest singular value
    block.svd(false, false).singular_values[0]
}

/// Embed an n x n grade-1 action into the full 2^n x 2^n block.
pub fn embed_grade1(small: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let nb = crate::algebra::blade_count(dim);
    let mut big = DMatrix::zeros(nb, nb);
    for r in 0..dim {
        for c in 0..dim {
            big[(1 << r, 1 << c)] = small[(r, c)];
        }
    }
    big
}

fn structure_of_block(block: &DMatrix<f64>, dim: usize) -> CoefficientStructure {
    let nb = crate::algebra::blade_count(dim);
    let mut grade_preserving = true;
    let mut grade1_only = true;
    for r in 0..nb {
        for c in 0..nb {
            if block[(r, c)] == 0.0 {
                continue;
            }
            let gr = Blade(r as u32).grade();
            let gc = Blade(c as u32).grade();
            if gr != gc {
                grade_preserving = false;
            }
            if gr != 1 || gc != 1 {
                grade1_only = false;
            }
        }
    }
    if grade1_only {
        CoefficientStructure::GradeOneOnly
    } else if grade_preserving {
        CoefficientStructure::GradePreserving
    } else {
        CoefficientStructure::General
    }
}

/// Random smooth coefficient with prescribed sup norm, built from band-limited
/// entry fields and localized by a raised-cosine bump over `support`.
pub fn random_smooth_coefficient<R: Rng>(
    spec: GridSpec,
    structure: CoefficientStructure,
    target_norm: f64,
    kmax: usize,
    support: Option<BoxRegion>,
    rng: &mut R,
) -> Result<CoefficientField> {
    if !(0.0..1.0).contains(&target_norm) {
        return Err(Error::CoefficientNormTooLarge { m: target_norm });
    }
    let nb = spec.n_blades();
    let dim = spec.dim;
    // which entries may be nonzero
    let mut mask = vec![false; nb * nb];
    for r in 0..nb {
        for c in 0..nb {
            let (gr, gc) = (Blade(r as u32).grade(), Blade(c as u32).grade());
            mask[r * nb + c] = match structure {
                CoefficientStructure::General => true,
                CoefficientStructure::GradePreserving => gr == gc,
                CoefficientStructure::GradeOneOnly => gr == 1 && gc == 1,
            };
        }
    }
    // band-limited random scalar field per active entry
    let mut entry_fields: Vec<Option<MultivectorField>> = Vec::with_capacity(nb * nb);
    for e in 0..nb * nb {
        if mask[e] {
            entry_fields.push(Some(crate::grid::random_band_limited(spec, kmax, rng)));
        } else {
            entry_fields.push(None);
        }
    }
    let bump = support.map(|region| SubdomainSpec {
        u: region.shrink(0.5),
        v: region,
    });
    let mut blocks = vec![0.0; spec.node_count() * nb * nb];
    for node in 0..spec.node_count() {
        let x = spec.node_position(node);
        let chi = match &bump {
            Some(sub) => sub.cutoff(&x, spec.box_len),
            None => 1.0,
        };
        if chi == 0.0 {
            continue;
        }
        for r in 0..nb {
            for c in 0..nb {
                if let Some(fld) = &entry_fields[r * nb + c] {
                    // first blade channel of the random field serves as the scalar
                    blocks[(node * nb + r) * nb + c] = chi * fld.values()[node * nb];
                }
            }
        }
    }
    let _ = dim;
    // rescale so the max node norm hits the target exactly
    let norms: Vec<f64> = (0..spec.node_count())
        .into_par_iter()
        .map(|node| node_norm(&blocks, node, nb))
        .collect();
    let peak = norms.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        let s = target_norm / peak;
        for b in blocks.iter_mut() {
            *b *= s;
        }
    }
    CoefficientField::from_blocks(spec, blocks, structure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Multivector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn construction_rejects_norm_at_least_one() {
        let spec = GridSpec::two_pi(2, 8).unwrap();
        let block = DMatrix::identity(4, 4);
        assert!(matches!(
            CoefficientField::constant(spec, &block),
            Err(Error::CoefficientNormTooLarge { .. })
        ));
    }

    #[test]
    fn apply_matches_manual_matvec() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let spec = GridSpec::two_pi(2, 8).unwrap();
        let m = random_smooth_coefficient(
            spec,
            CoefficientStructure::General,
            0.7,
            2,
            None,
            &mut rng,
        )
        .unwrap();
        assert!((m.norm_bound() - 0.7).abs() < 1e-12);
        let f = crate::grid::random_band_limited(spec, 3, &mut rng);
        let out = m.apply(&f);
        for node in [0usize, 5, 17, 63] {
            let block = m.block_at(node);
            let x = nalgebra::DVector::from_row_slice(f.node_slice(node));
            let want = &block * &x;
            for b in 0..4 {
                assert!((out.node_slice(node)[b] - want[b]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn pointwise_contraction_bound() {
        // ||M f||_{L2} <= M ||f||_{L2} follows from the pointwise norms
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let spec = GridSpec::two_pi(2, 16).unwrap();
        let m = random_smooth_coefficient(
            spec,
            CoefficientStructure::GradePreserving,
            0.5,
            3,
            Some(BoxRegion::new(0.25, 0.75).unwrap()),
            &mut rng,
        )
        .unwrap();
        for _ in 0..5 {
            let f = crate::grid::random_band_limited(spec, 5, &mut rng);
            assert!(m.apply(&f).l2_norm(None) <= 0.5 * f.l2_norm(None) + 1e-12);
        }
    }

    #[test]
    fn grade1_embedding_acts_only_on_grade_one() {
        let spec = GridSpec::two_pi(2, 8).unwrap();
        let small = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, -0.1, 0.3]);
        let m = CoefficientField::grade1_from_fn(spec, |_| small.clone()).unwrap();
        assert_eq!(m.structure(), CoefficientStructure::GradeOneOnly);
        let f = MultivectorField::from_fn(spec, |_| {
            Multivector::from_coeffs(2, vec![1.0, 2.0, 3.0, 4.0])
        });
        let out = m.apply(&f);
        let v = out.node_slice(0);
        assert_eq!(v[0], 0.0);
        assert!((v[1] - (0.3 * 2.0 + 0.1 * 3.0)).abs() < 1e-14);
        assert!((v[2] - (-0.1 * 2.0 + 0.3 * 3.0)).abs() < 1e-14);
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn support_margin_of_bump() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let spec = GridSpec::two_pi(2, 32).unwrap();
        let m = random_smooth_coefficient(
            spec,
            CoefficientStructure::General,
            0.4,
            2,
            Some(BoxRegion::new(0.25, 0.75).unwrap()),
            &mut rng,
        )
        .unwrap();
        let margin = m.support_margin();
        // bump vanishes outside [L/4, 3L/4], so margin is about L/4
        assert!(margin >= 0.2 * spec.box_len && margin <= 0.3 * spec.box_len);
    }
}
