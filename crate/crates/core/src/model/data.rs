use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Observed sample of a selection model.
///
/// `v1[i]` is present exactly when unit `i` was selected (`c[i]`). Both
/// design matrices are stored row-major; rows are `x_iᵀ` and `w_iᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionData {
    v1: Vec<Option<f64>>,
    c: Vec<bool>,
    x: Vec<f64>,
    w: Vec<f64>,
    p: usize,
    q: usize,
}

impl SelectionData {
    /// Builds a dataset from row-major designs, checking every invariant.
    pub fn new(
        v1: Vec<Option<f64>>,
        c: Vec<bool>,
        x: Vec<f64>,
        p: usize,
        w: Vec<f64>,
        q: usize,
    ) -> Result<Self> {
        Self::build(v1, c, x, p, w, q, true)
    }

    /// Like [`SelectionData::new`] but without the `n >= p + q + 2` floor or
    /// the requirement that both branches occur. Such data can be evaluated
    /// by the likelihood but not fitted.
    pub fn new_unsized(
        v1: Vec<Option<f64>>,
        c: Vec<bool>,
        x: Vec<f64>,
        p: usize,
        w: Vec<f64>,
        q: usize,
    ) -> Result<Self> {
        Self::build(v1, c, x, p, w, q, false)
    }

    /// `n >= p + q + 2` with both selected and unselected units, required
    /// before fitting.
    pub fn is_fittable(&self) -> bool {
        let selected = self.n_selected();
        self.n() >= self.p + self.q + 2 && selected > 0 && selected < self.n()
    }

    fn build(
        v1: Vec<Option<f64>>,
        c: Vec<bool>,
        x: Vec<f64>,
        p: usize,
        w: Vec<f64>,
        q: usize,
        fit_checks: bool,
    ) -> Result<Self> {
        let n = v1.len();
        if c.len() != n {
            return Err(Error::Dimension(format!("{} outcomes but {} indicators", n, c.len())));
        }
        if p == 0 || q == 0 {
            return Err(Error::Dimension("designs need at least one column".into()));
        }
        if x.len() != n * p {
            return Err(Error::Dimension(format!("x has {} cells, expected {}x{}", x.len(), n, p)));
        }
        if w.len() != n * q {
            return Err(Error::Dimension(format!("w has {} cells, expected {}x{}", w.len(), n, q)));
        }
        if n == 0 {
            return Err(Error::Data("no units".into()));
        }
        if fit_checks && n < p + q + 2 {
            return Err(Error::Data(format!("n = {n} is below p + q + 2 = {}", p + q + 2)));
        }
        for (i, (v, &sel)) in v1.iter().zip(&c).enumerate() {
            match (v, sel) {
                (Some(val), true) if !val.is_finite() => {
                    return Err(Error::Data(format!("outcome of unit {i} is not finite")))
                }
                (Some(_), true) | (None, false) => {}
                (None, true) => {
                    return Err(Error::Data(format!("unit {i} is selected but its outcome is missing")))
                }
                (Some(_), false) => {
                    return Err(Error::Data(format!("unit {i} is not selected but has an outcome")))
                }
            }
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite outcome covariate at row {}, column {}", k / p, k % p)));
        }
        if let Some(k) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite selection covariate at row {}, column {}", k / q, k % q)));
        }
        let selected = c.iter().filter(|&&s| s).count();
        if fit_checks && (selected == 0 || selected == n) {
            return Err(Error::Data(
                "need at least one selected and one unselected unit".into(),
            ));
        }
        let data = Self { v1, c, x, w, p, q };
        if data.designs_share_all_columns() {
            log::warn!("outcome and selection equations use identical covariates; no exclusion restriction");
        }
        Ok(data)
    }

    /// Builds a dataset whose selection indicator is the outcome's missingness mask.
    pub fn from_outcome(v1: Vec<Option<f64>>, x: Vec<f64>, p: usize, w: Vec<f64>, q: usize) -> Result<Self> {
        let c = v1.iter().map(Option::is_some).collect();
        Self::new(v1, c, x, p, w, q)
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn v1(&self) -> &[Option<f64>] {
        &self.v1
    }

    pub fn selected(&self) -> &[bool] {
        &self.c
    }

    pub fn n_selected(&self) -> usize {
        self.c.iter().filter(|&&s| s).count()
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn w_row(&self, i: usize) -> &[f64] {
        &self.w[i * self.q..(i + 1) * self.q]
    }

    pub fn x_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n(), self.p, &self.x)
    }

    pub fn w_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n(), self.q, &self.w)
    }

    /// Returns a copy with every observed outcome shifted by `d`.
    pub fn shifted_outcome(&self, d: f64) -> Self {
        let mut out = self.clone();
        for v in out.v1.iter_mut().flatten() {
            *v += d;
        }
        out
    }

    fn column<'a>(data: &'a [f64], cols: usize, j: usize) -> impl Iterator<Item = f64> + 'a {
        data.iter().skip(j).step_by(cols).copied()
    }

    fn designs_share_all_columns(&self) -> bool {
        if self.p != self.q {
            return false;
        }
        let same = |a: &[f64], ca: usize, ja: usize, b: &[f64], cb: usize, jb: usize| {
            Self::column(a, ca, ja).eq(Self::column(b, cb, jb))
        };
        (0..self.q).all(|k| (0..self.p).any(|j| same(&self.w, self.q, k, &self.x, self.p, j)))
            && (0..self.p).all(|j| (0..self.q).any(|k| same(&self.x, self.p, j, &self.w, self.q, k)))
    }
}
