//! Uniform tensor grids on intervals and rectangles with homogeneous
//! Dirichlet boundaries. Only interior nodes carry unknowns; ordering is
//! lexicographic with the x index fastest.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n_interior: usize,
    pub h: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, n_interior: usize) -> Result<Axis> {
        if !(hi > lo) {
            return Err(Error::InvalidArgument(format!(
                "axis bounds [{lo}, {hi}] must be increasing"
            )));
        }
        if n_interior < 1 {
            return Err(Error::InvalidArgument(
                "at least one interior node per axis".into(),
            ));
        }
        let h = (hi - lo) / (n_interior + 1) as f64;
        Ok(Axis { lo, hi, n_interior, h })
    }

    /// Coordinate of the i-th interior node (0-based).
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.lo + (i + 1) as f64 * self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn interval(lo: f64, hi: f64, n_interior: usize) -> Result<Grid> {
        Ok(Grid { axes: vec![Axis::new(lo, hi, n_interior)?] })
    }

    pub fn rectangle(
        x: (f64, f64, usize),
        y: (f64, f64, usize),
    ) -> Result<Grid> {
        Ok(Grid {
            axes: vec![Axis::new(x.0, x.1, x.2)?, Axis::new(y.0, y.1, y.2)?],
        })
    }

    pub fn unit_interval(n_interior: usize) -> Result<Grid> {
        Grid::interval(0.0, 1.0, n_interior)
    }

    pub fn unit_square(n_interior: usize) -> Result<Grid> {
        Grid::rectangle((0.0, 1.0, n_interior), (0.0, 1.0, n_interior))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Total number of interior nodes.
    pub fn n_total(&self) -> usize {
        self.axes.iter().map(|a| a.n_interior).product()
    }

    /// Product of the spacings, the weight of the discrete L² inner product.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.h).product()
    }

    /// Multi-index of a flat node index (x fastest).
    #[inline]
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.axes.len() {
            1 => [flat, 0],
            _ => {
                let nx = self.axes[0].n_interior;
                [flat % nx, flat / nx]
            }
        }
    }

    /// Flat index from a multi-index.
    #[inline]
    pub fn flat_index(&self, ix: usize, iy: usize) -> usize {
        match self.axes.len() {
            1 => ix,
            _ => iy * self.axes[0].n_interior + ix,
        }
    }

    /// Coordinates of a flat node index; only the first `dim()` entries are
    /// meaningful.
    #[inline]
    pub fn coords(&self, flat: usize) -> [f64; 2] {
        let mi = self.multi_index(flat);
        match self.axes.len() {
            1 => [self.axes[0].coord(mi[0]), 0.0],
            _ => [self.axes[0].coord(mi[0]), self.axes[1].coord(mi[1])],
        }
    }

    /// The neighbor of `flat` in the +direction of `axis`, if interior.
    #[inline]
    pub fn neighbor_up(&self, flat: usize, axis: usize) -> Option<usize> {
        let mi = self.multi_index(flat);
        let n = self.axes[axis].n_interior;
        if mi[axis] + 1 < n {
            let mut mj = mi;
            mj[axis] += 1;
            Some(self.flat_index(mj[0], mj[1]))
        } else {
            None
        }
    }

    /// True when the node touches the lower wall along `axis`.
    #[inline]
    pub fn at_lower_wall(&self, flat: usize, axis: usize) -> bool {
        self.multi_index(flat)[axis] == 0
    }

    /// True when the node touches the upper wall along `axis`.
    #[inline]
    pub fn at_upper_wall(&self, flat: usize, axis: usize) -> bool {
        self.multi_index(flat)[axis] + 1 == self.axes[axis].n_interior
    }
}
