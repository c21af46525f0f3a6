use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

use super::FitError;

/// Basis expansion applied to the raw predictor columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// The predictors themselves.
    MainTerms,
    /// Main terms plus every pairwise product of distinct predictors.
    Interactions,
    /// Every monomial of total degree between 1 and the given degree.
    Polynomial(u32),
}

impl std::str::FromStr for Basis {
    type Err = String;
    /// `main_terms`, `interactions` or `polynomial:<degree>`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "main_terms" => Ok(Basis::MainTerms),
            "interactions" => Ok(Basis::Interactions),
            other => other
                .strip_prefix("polynomial:")
                .and_then(|d| d.parse::<u32>().ok())
                .filter(|&d| d >= 1)
                .map(Basis::Polynomial)
                .ok_or_else(|| format!("unknown basis `{other}` (expected main_terms, interactions or polynomial:<d>)")),
        }
    }
}

impl Basis {
    /// Number of design columns produced from `k` raw predictor columns.
    ///
    /// `main_terms`: k; `interactions`: k + k(k-1)/2; `polynomial(d)`:
    /// C(k+d, d) - 1. One more column when an intercept is requested.
    pub fn width(self, k: usize, intercept: bool) -> usize {
        let body = match self {
            Basis::MainTerms => k,
            Basis::Interactions => k + k * k.saturating_sub(1) / 2,
            Basis::Polynomial(d) => binomial(k + d as usize, d as usize) - 1,
        };
        body + usize::from(intercept)
    }

    /// Expands raw columns (n x k) into design columns.
    pub fn expand(self, raw: &DMatrix<f64>, intercept: bool) -> DMatrix<f64> {
        let n = raw.nrows();
        let k = raw.ncols();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(self.width(k, intercept));
        if intercept {
            cols.push(vec![1.0; n]);
        }
        match self {
            Basis::MainTerms => {
                for j in 0..k {
                    cols.push(raw.column(j).iter().copied().collect());
                }
            }
            Basis::Interactions => {
                for j in 0..k {
                    cols.push(raw.column(j).iter().copied().collect());
                }
                for i in 0..k {
                    for j in (i + 1)..k {
                        cols.push((0..n).map(|r| raw[(r, i)] * raw[(r, j)]).collect());
                    }
                }
            }
            Basis::Polynomial(d) => {
                for exps in monomials(k, d as usize) {
                    cols.push(
                        (0..n)
                            .map(|r| {
                                exps.iter()
                                    .enumerate()
                                    .map(|(j, &e)| raw[(r, j)].powi(e as i32))
                                    .product()
                            })
                            .collect(),
                    );
                }
            }
        }
        let width = cols.len();
        DMatrix::from_fn(n, width, |r, c| cols[c][r])
    }

    pub fn validate(self) -> Result<(), FitError> {
        match self {
            Basis::Polynomial(0) => Err(FitError::Config("polynomial degree must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Exponent vectors of all monomials in `k` variables with total degree in 1..=d,
/// ordered by degree, then lexicographically.
fn monomials(k: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(k, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 1..=d {
        rec(k, deg, &mut Vec::new(), &mut out);
    }
    out
}

/// Predictor vertices, basis and intercept of a regression design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub predictors: Vec<String>,
    pub basis: Basis,
    pub intercept: bool,
}

/// Raw predictor matrix for `predictors` (multivariate vertices expand to
/// their columns). `set` replaces the column of one scalar vertex with a
/// constant, which is how regressions are evaluated at a fixed treatment level.
pub fn raw_matrix(
    data: &Dataset,
    predictors: &[String],
    set: Option<(&str, f64)>,
) -> Result<DMatrix<f64>, FitError> {
    let mut cols: Vec<&[f64]> = Vec::new();
    let mut overridden: Vec<Option<f64>> = Vec::new();
    for p in predictors {
        for c in data.vertex_columns(p)? {
            cols.push(data.column(c)?);
            overridden.push(match set {
                Some((v, value)) if v == p => Some(value),
                _ => None,
            });
        }
    }
    let n = data.n();
    Ok(DMatrix::from_fn(n, cols.len(), |r, c| overridden[c].unwrap_or(cols[c][r])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_match_expansion() {
        let raw = DMatrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64 + 0.5);
        for basis in [Basis::MainTerms, Basis::Interactions, Basis::Polynomial(1), Basis::Polynomial(3)] {
            for intercept in [false, true] {
                assert_eq!(basis.expand(&raw, intercept).ncols(), basis.width(3, intercept));
            }
        }
        assert_eq!(Basis::Polynomial(2).width(3, false), 9);
        assert_eq!(Basis::Interactions.width(4, true), 11);
    }

    #[test]
    fn interaction_columns_are_products() {
        let raw = DMatrix::from_row_slice(1, 3, &[2.0, 3.0, 5.0]);
        let x = Basis::Interactions.expand(&raw, true);
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 5.0, 6.0, 10.0, 15.0]);
    }
}
