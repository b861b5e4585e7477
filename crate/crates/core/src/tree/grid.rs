use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default grid resolution for a continuous covariate.
pub const DEFAULT_CUTPOINTS: usize = 100;

/// Per-variable discrete cutpoint lattice `{0, 1/(n_v-1), ..., 1}` on the unit interval.
///
/// Cutpoints are addressed by their integer index on the lattice, so every
/// comparison between cutpoints of the same variable is exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutpointGrid {
    sizes: Vec<usize>,
}

impl CutpointGrid {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Grid("at least one variable is required".into()));
        }
        if let Some((v, &n)) = sizes.iter().enumerate().find(|(_, &n)| n < 2) {
            return Err(Error::Grid(format!("variable {v} has {n} grid points, need >= 2")));
        }
        if let Some((v, &n)) = sizes.iter().enumerate().find(|(_, &n)| n > u16::MAX as usize) {
            return Err(Error::Grid(format!("variable {v} has {n} grid points, max is {}", u16::MAX)));
        }
        Ok(Self { sizes })
    }

    /// Same resolution `n_v` for each of `d` variables.
    pub fn uniform(d: usize, n_v: usize) -> Result<Self> {
        Self::new(vec![n_v; d])
    }

    pub fn n_vars(&self) -> usize {
        self.sizes.len()
    }

    /// Number of lattice points `n_v` for `var`.
    pub fn size(&self, var: usize) -> usize {
        self.sizes[var]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Index of the largest lattice point (the value 1).
    pub fn top(&self, var: usize) -> usize {
        self.sizes[var] - 1
    }

    /// Cutpoint value at `idx`.
    pub fn value<F: Real>(&self, var: usize, idx: usize) -> F {
        F::of_usize(idx) / F::of_usize(self.sizes[var] - 1)
    }

    /// Number of lattice points `<= x`, capped at the top index.
    ///
    /// For interior `idx`, `x < value(var, idx)` holds exactly when
    /// `bin(var, x) <= idx`, which lets data be routed on pre-binned
    /// integers. The cap puts `x = 1` in the same cell as the points just
    /// below it, so bins always lie in `1..=top` and a region bounded by
    /// lattice indices `(lo, hi)` holds bins `lo + 1..=hi`.
    pub fn bin<F: Real>(&self, var: usize, x: F) -> u16 {
        let n = self.sizes[var];
        // Binary search on the same float values used by `value`.
        let (mut lo, mut hi) = (0usize, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.value::<F>(var, mid) <= x {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo.min(n - 1) as u16
    }
}

/// Split rule `x_var < value(var, cut)`; `cut` is a lattice index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplitRule {
    pub var: usize,
    pub cut: usize,
}

impl SplitRule {
    pub fn new(var: usize, cut: usize) -> Self {
        Self { var, cut }
    }

    pub fn goes_left(&self, bins: &[u16]) -> bool {
        (bins[self.var] as usize) <= self.cut
    }
}

impl fmt::Display for SplitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{} < #{}", self.var, self.cut)
    }
}

/// Open interval `(lower, upper)` of lattice indices.
///
/// `lower == 0` stands for the value 0 and `upper == n_v - 1` for the value 1.
/// The interval is empty when no lattice point lies strictly inside.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutInterval {
    pub lower: usize,
    pub upper: usize,
}

impl CutInterval {
    pub fn new(lower: usize, upper: usize) -> Self {
        Self { lower, upper }
    }

    /// Lattice indices strictly inside.
    pub fn candidates(&self) -> Range<usize> {
        if self.upper > self.lower {
            self.lower + 1..self.upper
        } else {
            0..0
        }
    }

    pub fn len(&self) -> usize {
        self.candidates().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, idx: usize) -> bool {
        idx > self.lower && idx < self.upper
    }

    /// Endpoints as values on the unit interval.
    pub fn bounds<F: Real>(&self, grid: &CutpointGrid, var: usize) -> (F, F) {
        (grid.value(var, self.lower), grid.value(var, self.upper))
    }
}
