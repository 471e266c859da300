use crate::data::{Dataset, Pattern, SupportColumn};

/// One nonzero (or tracked) coefficient and the column it multiplies.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub column: SupportColumn,
    pub coef: f64,
}

/// Sparse linear model over pattern indicators plus an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseModel {
    pub terms: Vec<Term>,
    pub intercept: f64,
}

impl SparseModel {
    pub fn null(intercept: f64) -> Self {
        SparseModel {
            terms: Vec::new(),
            intercept,
        }
    }

    /// Margins `X beta + 1 beta0` over `n` rows, built from support columns.
    pub fn margins(&self, n: usize) -> Vec<f64> {
        let mut z = vec![self.intercept; n];
        for t in &self.terms {
            for &i in &t.column.rows {
                z[i as usize] += t.coef;
            }
        }
        z
    }

    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coef.abs()).sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.terms.iter().map(|t| t.coef * t.coef).sum()
    }

    pub fn nonzeros(&self) -> usize {
        self.terms.iter().filter(|t| t.coef != 0.0).count()
    }

    pub fn coef(&self, pattern: &Pattern) -> f64 {
        self.terms
            .iter()
            .find(|t| &t.column.pattern == pattern)
            .map_or(0.0, |t| t.coef)
    }

    /// Drops zero coefficients and sorts terms by pattern.
    pub fn canonicalize(&mut self) {
        self.terms.retain(|t| t.coef != 0.0);
        self.terms.sort_by(|a, b| a.column.pattern.cmp(&b.column.pattern));
    }

    /// Model expressed over a row subset; `map[old] = Some(new)` for kept rows.
    /// Terms whose support vanishes are dropped.
    pub fn remap_rows(&self, map: &[Option<u32>]) -> SparseModel {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                column: t.column.remap(map),
                coef: t.coef,
            })
            .filter(|t| !t.column.rows.is_empty())
            .collect();
        SparseModel {
            terms,
            intercept: self.intercept,
        }
    }

    /// Margin for an unseen instance via the naive matcher.
    pub fn predict_items(&self, items: &[u32]) -> f64 {
        self.intercept
            + self
                .terms
                .iter()
                .filter(|t| t.column.pattern.occurs_in(items))
                .map(|t| t.coef)
                .sum::<f64>()
    }
}

/// A primal-dual feasible triple with cached objective values at `(lambda, kappa)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub model: SparseModel,
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub kappa: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl ReferenceSolution {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Expresses this solution on `subset` of the rows of `full`. The dual
    /// vector is left empty; callers must dual-scale before use.
    pub fn restrict_to(&self, full: &Dataset, subset: &[usize]) -> ReferenceSolution {
        let mut map = vec![None; full.n()];
        for (new, &old) in subset.iter().enumerate() {
            map[old] = Some(new as u32);
        }
        ReferenceSolution {
            model: self.model.remap_rows(&map),
            alpha: Vec::new(),
            lambda: self.lambda,
            kappa: self.kappa,
            primal: f64::NAN,
            dual: f64::NAN,
            gap: f64::INFINITY,
        }
    }
}
