//! Maximum-weight bipartite matching and the optimal UE assignment for a
//! fixed beam vector.
//!
//! The matcher is the Hungarian method with potentials on a rectangular
//! matrix (rows <= cols after an optional transpose), O(rows² · cols).

use crate::instance::{Instance, Link, Selection};
use crate::{Error, Result};

/// Dense non-negative weights, `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("weight matrix must be non-empty".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                what: "weight matrix",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// A set of `(row, col)` pairs, sorted by row, with no repeated row or col.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn weight(&self, w: &WeightMatrix) -> f64 {
        self.pairs.iter().map(|&(r, c)| w.get(r, c)).sum()
    }
}

/// Maximum-weight matching. Zero-weight pairs are omitted from the result.
pub fn max_weight_matching(w: &WeightMatrix) -> Matching {
    let transpose = w.rows > w.cols;
    let (n, m) = if transpose { (w.cols, w.rows) } else { (w.rows, w.cols) };
    let weight = |i: usize, j: usize| if transpose { w.get(j, i) } else { w.get(i, j) };

    // Minimize cost = -weight over assignments of all n rows; with
    // non-negative weights this is also a maximum-weight matching.
    // 1-based arrays; index 0 is the virtual root column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = -weight(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| {
            let (i, j) = (p[j] - 1, j - 1);
            if transpose {
                (j, i)
            } else {
                (i, j)
            }
        })
        .filter(|&(r, c)| w.get(r, c) > 0.0)
        .collect();
    pairs.sort_unstable();
    Matching { pairs }
}

/// Result of matching UEs to APs for a fixed beam vector.
#[derive(Debug, Clone, PartialEq)]
pub struct UeAssignment {
    /// UE served by each AP, `None` if unmatched or silent.
    pub ues: Vec<Option<usize>>,
    /// Weighted sum rate of the matched edges.
    pub rate: f64,
}

impl UeAssignment {
    pub fn selection(&self, beams: &[Option<usize>]) -> Selection {
        Selection::from_entries(
            beams
                .iter()
                .zip(&self.ues)
                .map(|(b, u)| match (b, u) {
                    (Some(beam), Some(ue)) => Some(Link { beam: *beam, ue: *ue }),
                    _ => None,
                })
                .collect(),
        )
    }
}

/// Edge weights for a beam vector: the weighted rate of UE `u` at AP `a`
/// with interference from every other non-silent AP. Rows of silent APs and
/// links below the RSS threshold are zero.
pub fn edge_weights(instance: &Instance, beams: &[Option<usize>]) -> WeightMatrix {
    let rss = instance.rss();
    let (na, nu) = (instance.n_aps(), instance.n_ues());
    let mut data = vec![0.0; na * nu];
    for u in 0..nu {
        let total: f64 = beams
            .iter()
            .enumerate()
            .filter_map(|(a, b)| b.map(|b| rss.get(b, u, a)))
            .sum();
        for (a, b) in beams.iter().enumerate() {
            let Some(b) = *b else { continue };
            let s = rss.get(b, u, a);
            if s < instance.rss_threshold() {
                continue;
            }
            // Recomputed rather than `total - s` to stay exact.
            let interference: f64 = beams
                .iter()
                .enumerate()
                .filter(|&(a2, _)| a2 != a)
                .filter_map(|(a2, b2)| b2.map(|b2| rss.get(b2, u, a2)))
                .sum();
            debug_assert!(interference <= total);
            data[a * nu + u] = instance.weighted_link_rate(u, s, interference);
        }
    }
    WeightMatrix::new(na, nu, data).expect("rates are finite and non-negative")
}

/// Best UE for every AP given its beam (`None` = AP silent).
///
/// Panics if `beams.len() != n_aps` or a beam is out of range.
pub fn optimal_ue_assignment(instance: &Instance, beams: &[Option<usize>]) -> UeAssignment {
    assert_eq!(beams.len(), instance.n_aps(), "beam vector length");
    assert!(
        beams.iter().flatten().all(|&b| b < instance.n_beams()),
        "beam index out of range"
    );
    let w = edge_weights(instance, beams);
    let m = max_weight_matching(&w);
    let mut ues = vec![None; instance.n_aps()];
    for &(a, u) in &m.pairs {
        ues[a] = Some(u);
    }
    UeAssignment {
        rate: m.weight(&w),
        ues,
    }
}
