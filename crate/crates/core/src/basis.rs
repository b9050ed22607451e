//! Recursive (cyclic) B-spline bases on equally spaced knots.
//!
//! The construction follows the classic difference-of-truncated-powers
//! recursion on a uniform knot grid: a degree-0 bin indicator is raised one
//! degree at a time by mixing each column with its right neighbour. A cyclic
//! basis then folds the last `degree` columns onto the first ones.

use crate::{Error, Result};

/// Slack allowed when checking that inputs lie inside `[xl, xr]`.
const DOMAIN_SLACK: f64 = 1e-9;

/// Knot grid a basis was evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KnotGrid {
    pub xl: f64,
    pub xr: f64,
    /// Number of knots `K`.
    pub knots: usize,
    pub degree: usize,
    pub cyclic: bool,
}

impl KnotGrid {
    pub fn new(xl: f64, xr: f64, knots: usize, degree: usize, cyclic: bool) -> Result<Self> {
        if knots <= degree {
            return Err(Error::DegenerateBasis { knots, degree });
        }
        if !(xr > xl) || !xl.is_finite() || !xr.is_finite() {
            return Err(Error::InvalidSpec(format!("basis domain [{xl}, {xr}] is empty")));
        }
        Ok(Self {
            xl,
            xr,
            knots,
            degree,
            cyclic,
        })
    }

    /// Number of basis columns: `K - degree` when cyclic, `K` otherwise.
    pub fn columns(&self) -> usize {
        if self.cyclic {
            self.knots - self.degree
        } else {
            self.knots
        }
    }

    /// Spacing between knots.
    pub fn step(&self) -> f64 {
        (self.xr - self.xl) / (self.knots - self.degree) as f64
    }

    /// Knot positions `xl + dx·(-degree ..= K)`.
    pub fn knot_positions(&self) -> Vec<f64> {
        let ndx = self.knots - self.degree;
        let dx = self.step();
        (-(self.degree as isize)..=(ndx + self.degree) as isize)
            .map(|k| self.xl + dx * k as f64)
            .collect()
    }

    /// One row of the basis evaluated at `x`.
    fn eval_row(&self, x: f64, knots: &[f64]) -> Vec<f64> {
        let dx = self.step();
        let nt = knots.len();
        let p: Vec<f64> = knots.iter().map(|t| (x - t) / dx).collect();
        let mut b: Vec<f64> = knots
            .iter()
            .map(|&t| if t <= x && x < t + dx { 1.0 } else { 0.0 })
            .collect();
        for k in 1..=self.degree {
            let kf = k as f64;
            b = (0..nt)
                .map(|j| {
                    // right neighbour with wrap-around at the last column
                    let right = b[(j + 1) % nt];
                    (p[j] * b[j] + (kf + 1.0 - p[j]) * right) / kf
                })
                .collect();
        }
        b.truncate(self.knots);
        if self.cyclic {
            let ncol = self.knots - self.degree;
            for i in 0..self.degree {
                b[i] += b[ncol + i];
            }
            b.truncate(ncol);
        }
        b
    }
}

/// Dense `n × p` basis matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    grid: KnotGrid,
    centered: bool,
}

impl BasisMatrix {
    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn knot_grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= self.rows as f64);
        means
    }
}

/// Evaluates the B-spline basis on `x`.
///
/// `knots` is the number of knots `K`; a cyclic basis has `K - degree`
/// columns and a non-cyclic one `K`.
pub fn bspline_basis(x: &[f64], knots: usize, degree: usize, cyclic: bool, xl: f64, xr: f64) -> Result<BasisMatrix> {
    let grid = KnotGrid::new(xl, xr, knots, degree, cyclic)?;
    evaluate(&grid, x)
}

/// Evaluates the basis described by `grid` at `x`.
pub fn evaluate(grid: &KnotGrid, x: &[f64]) -> Result<BasisMatrix> {
    let slack = DOMAIN_SLACK * (grid.xr - grid.xl);
    if let Some(&bad) = x.iter().find(|&&v| !(v >= grid.xl - slack && v <= grid.xr + slack)) {
        return Err(Error::DomainError(bad));
    }
    let knots = grid.knot_positions();
    let cols = grid.columns();
    let mut values = Vec::with_capacity(x.len() * cols);
    for &xi in x {
        values.extend(grid.eval_row(xi, &knots));
    }
    Ok(BasisMatrix {
        rows: x.len(),
        cols,
        values,
        grid: *grid,
        centered: false,
    })
}

/// Subtracts from each column its mean over the basis evaluated on
/// `reference_grid`.
pub fn center_basis(b: &BasisMatrix, reference_grid: &[f64]) -> Result<BasisMatrix> {
    if b.centered {
        return Err(Error::AlreadyCentered);
    }
    let means = column_offsets(&b.grid, reference_grid)?;
    let mut out = b.clone();
    for i in 0..out.rows {
        for (j, m) in means.iter().enumerate() {
            out.values[i * out.cols + j] -= m;
        }
    }
    out.centered = true;
    Ok(out)
}

/// Column means of the basis over `reference_grid` (the centering offsets).
pub fn column_offsets(grid: &KnotGrid, reference_grid: &[f64]) -> Result<Vec<f64>> {
    if reference_grid.is_empty() {
        return Err(Error::InvalidSpec("empty reference grid".into()));
    }
    Ok(evaluate(grid, reference_grid)?.column_means())
}
