//! Affine root lattices spanned by the components of the anticanonical divisor.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("unknown root type `{0}`")]
    UnknownLabel(String),
    #[error("malformed matrix: {0}")]
    Malformed(String),
    #[error("invalid matrix JSON: {0}")]
    Json(String),
}

/// Symmetric matrix of intersection numbers `Y_i · Y_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionMatrix {
    pub n: usize,
    pub entries: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RootType {
    /// ASCII label accepted by [`builtin_matrix`], e.g. `E7`, `D8`, `A3`, `A0*`.
    pub label: String,
    /// Typeset label, e.g. `Ẽ7`.
    pub display: String,
    pub kodaira: String,
    pub r: usize,
    pub marks: Vec<i64>,
    pub painleve: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub root_type: RootType,
    /// Other catalog labels with the same matrix up to permutation.
    pub aliases: Vec<String>,
}

impl IntersectionMatrix {
    pub fn new(entries: Vec<Vec<i64>>) -> Result<Self, LatticeError> {
        let m = IntersectionMatrix {
            n: entries.len(),
            entries,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), LatticeError> {
        if self.entries.len() != self.n {
            return Err(LatticeError::Malformed(format!(
                "n = {} but {} rows",
                self.n,
                self.entries.len()
            )));
        }
        for (i, row) in self.entries.iter().enumerate() {
            if row.len() != self.n {
                return Err(LatticeError::Malformed(format!("row {i} has {} entries", row.len())));
            }
        }
        for i in 0..self.n {
            for j in 0..i {
                if self.entries[i][j] != self.entries[j][i] {
                    return Err(LatticeError::Malformed(format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, LatticeError> {
        let m: IntersectionMatrix =
            serde_json::from_str(text).map_err(|e| LatticeError::Json(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix serializes")
    }

    /// `P M Pᵀ` where node `i` moves to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut entries = vec![vec![0; self.n]; self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                entries[perm[i]][perm[j]] = self.entries[i][j];
            }
        }
        IntersectionMatrix { n: self.n, entries }
    }

    pub fn apply(&self, v: &[i64]) -> Vec<i64> {
        self.entries
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn to_rational(&self) -> Vec<Vec<BigRational>> {
        self.entries
            .iter()
            .map(|r| r.iter().map(|&e| BigRational::from_integer(e.into())).collect())
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.n - kernel(self).len()
    }

    /// Negative semidefinite of corank one: rank `n − 1` and the principal
    /// submatrix without the last node negative definite (Sylvester minors).
    pub fn is_affine_negative_semidefinite(&self) -> bool {
        if self.rank() + 1 != self.n {
            return false;
        }
        let k = self.n - 1;
        (1..=k).all(|size| {
            let minor: Vec<Vec<BigRational>> = self.to_rational()[..size]
                .iter()
                .map(|r| r[..size].iter().map(|e| -e).collect())
                .collect();
            determinant(minor).is_positive()
        })
    }
}

fn determinant(mut a: Vec<Vec<BigRational>>) -> BigRational {
    let n = a.len();
    let mut det = BigRational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return BigRational::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c].clone();
        for r in c + 1..n {
            let f = &a[r][c] / &a[c][c];
            for k in c..n {
                let v = &f * &a[c][k];
                a[r][k] -= v;
            }
        }
    }
    det
}

/// Basis of the rational null space, each vector scaled to a primitive
/// integer vector whose first nonzero entry is positive.
pub fn kernel(m: &IntersectionMatrix) -> Vec<Vec<i64>> {
    let n = m.n;
    let mut a = m.to_rational();
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..n).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = a[row][col].recip();
        for k in 0..n {
            a[row][k] = &a[row][k] * &inv;
        }
        for r in 0..n {
            if r != row && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in 0..n {
                    let v = &f * &a[row][k];
                    a[r][k] -= v;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); n];
            v[f] = BigRational::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[r][f].clone();
            }
            primitive(&v)
        })
        .collect()
}

fn primitive(v: &[BigRational]) -> Vec<i64> {
    let lcm = v
        .iter()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let ints: Vec<BigInt> = v.iter().map(|q| q.numer() * (&lcm / q.denom())).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    let sign = match ints.iter().find(|x| !x.is_zero()) {
        Some(x) if x.is_negative() => -BigInt::one(),
        _ => BigInt::one(),
    };
    ints.iter()
        .map(|x| {
            let y = if g.is_zero() { x.clone() } else { x / &g * &sign };
            i64::try_from(y).expect("kernel entries fit in i64")
        })
        .collect()
}

/// Every label of the catalog, in table order.
pub fn builtin_labels() -> Vec<String> {
    let mut v: Vec<String> = ["E8", "D8", "E7", "D7", "D6", "E6", "D5", "D4"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    v.extend((1..=8).map(|k| format!("A{k}")));
    v.push("A0".into());
    v.push("A0*".into());
    v
}

fn graph(n: usize, edges: &[(usize, usize)], diag: i64) -> IntersectionMatrix {
    let mut e = vec![vec![0; n]; n];
    for (i, row) in e.iter_mut().enumerate() {
        row[i] = diag;
    }
    for &(a, b) in edges {
        e[a][b] += 1;
        e[b][a] += 1;
    }
    IntersectionMatrix { n, entries: e }
}

fn chain(from: usize, to: usize) -> Vec<(usize, usize)> {
    (from..to).map(|i| (i, i + 1)).collect()
}

/// Intersection matrix and root data of a catalog type. Nodes are ordered
/// along the longest chain first, then the remaining branch nodes.
pub fn builtin_matrix(label: &str) -> Result<(IntersectionMatrix, RootType), LatticeError> {
    let unknown = || LatticeError::UnknownLabel(label.to_string());
    let tag = |s: &str| Some(s.to_string());
    let (m, display, kodaira, marks, painleve): (IntersectionMatrix, String, String, Vec<i64>, Option<String>) =
        match label {
            "E8" => {
                let mut e = chain(0, 7);
                e.push((5, 8));
                (graph(9, &e, -2), "Ẽ8".into(), "II*".into(), vec![1, 2, 3, 4, 5, 6, 4, 2, 3], tag("P_I"))
            }
            "E7" => {
                let mut e = chain(0, 6);
                e.push((3, 7));
                (graph(8, &e, -2), "Ẽ7".into(), "III*".into(), vec![1, 2, 3, 4, 3, 2, 1, 2], tag("P_II"))
            }
            "E6" => {
                let mut e = chain(0, 4);
                e.push((2, 5));
                e.push((5, 6));
                (graph(7, &e, -2), "Ẽ6".into(), "IV*".into(), vec![1, 2, 3, 2, 1, 2, 1], tag("P_IV"))
            }
            "D4" | "D5" | "D6" | "D7" | "D8" => {
                let n: usize = label[1..].parse().map_err(|_| unknown())?;
                let r = n + 1;
                // Leaves 0, 1 on the first inner node, leaves r-2, r-1 on the last one.
                let (first, last) = (2, r - 3);
                let mut e = vec![(0, first), (1, first), (last, r - 2), (last, r - 1)];
                e.extend(chain(first, last));
                let mut marks = vec![2; r];
                for k in [0, 1, r - 2, r - 1] {
                    marks[k] = 1;
                }
                let (kod, p) = match n {
                    4 => ("I0*", "P_VI"),
                    5 => ("I1*", "P_V"),
                    6 => ("I2*", "P_III^D6"),
                    7 => ("I3*", "P_III^D7"),
                    _ => ("I4*", "P_III^D8"),
                };
                (graph(r, &e, -2), format!("D̃{n}"), kod.into(), marks, tag(p))
            }
            "A0" | "A0*" => {
                let kod = if label == "A0" { "I0" } else { "I1" };
                let display = if label == "A0" { "Ã0" } else { "Ã0*" };
                (graph(1, &[], 0), display.into(), kod.into(), vec![1], None)
            }
            _ => {
                let k: usize = label
                    .strip_prefix('A')
                    .and_then(|s| s.parse().ok())
                    .filter(|k| (1..=8).contains(k))
                    .ok_or_else(unknown)?;
                let r = k + 1;
                let mut e = chain(0, r - 1);
                e.push((r - 1, 0));
                (graph(r, &e, -2), format!("Ã{k}"), format!("I{r}"), vec![1; r], None)
            }
        };
    let r = m.n;
    Ok((
        m,
        RootType {
            label: label.to_string(),
            display,
            kodaira,
            r,
            marks,
            painleve,
        },
    ))
}

/// `10 − r`, the dimension of the deformation space of the pair.
pub fn deformation_dim(t: &RootType) -> i64 {
    10 - t.r as i64
}

fn signature(m: &IntersectionMatrix) -> Vec<(i64, Vec<i64>)> {
    let mut s: Vec<(i64, Vec<i64>)> = (0..m.n)
        .map(|i| {
            let mut row = m.entries[i].clone();
            let d = row.remove(i);
            row.sort_unstable();
            (d, row)
        })
        .collect();
    s.sort();
    s
}

/// Finds `perm` with `a.permuted(perm) == b`, by backtracking over rows
/// with matching sorted entries.
fn isomorphic(a: &IntersectionMatrix, b: &IntersectionMatrix) -> bool {
    if a.n != b.n || signature(a) != signature(b) {
        return false;
    }
    let n = a.n;
    let row_sig = |m: &IntersectionMatrix, i: usize| {
        let mut row = m.entries[i].clone();
        let d = row.remove(i);
        row.sort_unstable();
        (d, row)
    };
    let sa: Vec<_> = (0..n).map(|i| row_sig(a, i)).collect();
    let sb: Vec<_> = (0..n).map(|i| row_sig(b, i)).collect();
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn go(
        i: usize,
        a: &IntersectionMatrix,
        b: &IntersectionMatrix,
        sa: &[(i64, Vec<i64>)],
        sb: &[(i64, Vec<i64>)],
        perm: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if i == a.n {
            return true;
        }
        for cand in 0..a.n {
            if used[cand] || sa[i] != sb[cand] {
                continue;
            }
            let consistent = (0..i).all(|j| a.entries[i][j] == b.entries[cand][perm[j]]);
            if !consistent {
                continue;
            }
            perm[i] = cand;
            used[cand] = true;
            if go(i + 1, a, b, sa, sb, perm, used) {
                return true;
            }
            used[cand] = false;
        }
        false
    }
    go(0, a, b, &sa, &sb, &mut perm, &mut used)
}

/// Recognizes a matrix up to vertex permutation against the catalog.
/// Returns `None` for anything outside it.
pub fn classify(m: &IntersectionMatrix) -> Option<Classification> {
    if m.validate().is_err() {
        return None;
    }
    let mut hits: Vec<RootType> = Vec::new();
    for label in builtin_labels() {
        let (bm, rt) = builtin_matrix(&label).expect("catalog label");
        if isomorphic(m, &bm) {
            hits.push(rt);
        }
    }
    let mut it = hits.into_iter();
    let root_type = it.next()?;
    Some(Classification {
        root_type,
        aliases: it.map(|t| t.label).collect(),
    })
}
