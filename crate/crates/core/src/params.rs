//! Uniform access to parameter blocks, shared by optimizers, L2
//! regularization and model serialization.

use alloc::borrow::Cow;
use alloc::vec::Vec;

/// One named, contiguous block of parameters.
pub struct Block<'a> {
    pub name: Cow<'static, str>,
    pub values: &'a [f64],
    /// Biases are excluded from L2 regularization.
    pub is_bias: bool,
}

pub struct BlockMut<'a> {
    pub name: Cow<'static, str>,
    pub values: &'a mut [f64],
    pub is_bias: bool,
}

/// A set of parameter blocks in a fixed, declared order. Gradients use the
/// same type as the parameters they belong to.
pub trait ParamBlocks {
    fn blocks(&self) -> Vec<Block<'_>>;
    fn blocks_mut(&mut self) -> Vec<BlockMut<'_>>;

    /// Sum of squares of all non-bias parameters.
    fn weight_sq_norm(&self) -> f64 {
        self.blocks()
            .iter()
            .filter(|b| !b.is_bias)
            .map(|b| b.values.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.values.len()).sum()
    }

    /// `self += scale · other`, block by block.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.values.iter_mut().zip(src.values) {
                *d += scale * s;
            }
        }
    }

    /// Adds the gradient of `coeff · ‖weights‖²` evaluated at `params`.
    fn add_l2_grad(&mut self, params: &Self, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        for (g, p) in self.blocks_mut().into_iter().zip(params.blocks()) {
            if p.is_bias {
                continue;
            }
            for (gv, pv) in g.values.iter_mut().zip(p.values) {
                *gv += 2.0 * coeff * pv;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|b| b.values.iter().all(|v| v.is_finite()))
    }
}
