use std::collections::VecDeque;

use super::csr::CsrMatrix;
use super::SolveError;

/// LU factorization with partial pivoting of a banded matrix.
///
/// Storage follows the LAPACK general-band layout: column-major with leading
/// dimension `2 kl + ku + 1`, element `A[i][j]` at row `kl + ku + i - j` of column
/// `j`; the top `kl` rows absorb fill-in from row interchanges.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    /// `perm[new] = old` when the matrix was reordered before factoring.
    perm: Option<Vec<usize>>,
}

impl BandedLu {
    /// Factors `a` in its given ordering.
    pub fn factor(a: &CsrMatrix) -> Result<Self, SolveError> {
        if a.nrows() != a.ncols() {
            return Err(SolveError::Dimension(format!(
                "banded LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        let ldab = 2 * kl + ku + 1;
        let kv = kl + ku;
        let mut ab = vec![0.0; ldab * n.max(1)];
        for i in 0..n {
            for (j, v) in a.row(i) {
                ab[kv + i - j + j * ldab] = v;
            }
        }
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv: vec![0; n],
            perm: None,
        };
        lu.factor_in_place()?;
        Ok(lu)
    }

    /// Factors `a` after a reverse Cuthill–McKee reordering when that reduces the
    /// bandwidth. The returned factorization solves in the original ordering.
    pub fn factor_reordered(a: &CsrMatrix) -> Result<Self, SolveError> {
        let (kl, ku) = a.bandwidths();
        let perm = reverse_cuthill_mckee(a);
        let permuted = a.permute_symmetric(&perm);
        let (pkl, pku) = permuted.bandwidths();
        if pkl + pku < kl + ku {
            let mut lu = Self::factor(&permuted)?;
            lu.perm = Some(perm);
            Ok(lu)
        } else {
            Self::factor(a)
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ldab
    }

    fn factor_in_place(&mut self) -> Result<(), SolveError> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let ldab = self.ldab;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut jp = 0;
            let mut best = self.ab[col].abs();
            for p in 1..=km {
                let v = self.ab[col + p].abs();
                if v > best {
                    best = v;
                    jp = p;
                }
            }
            self.ipiv[j] = j + jp;
            if !(best > 0.0) || !best.is_finite() {
                return Err(SolveError::Singular { index: j });
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[col];
            let inv = 1.0 / pivot;
            for p in 1..=km {
                self.ab[col + p] *= inv;
            }
            for c in j + 1..=ju {
                let ujc = self.ab[self.idx(j, c)];
                if ujc != 0.0 {
                    let base = self.idx(j + 1, c);
                    for p in 1..=km {
                        self.ab[base + p - 1] -= self.ab[col + p] * ujc;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n, "banded solve: dimension mismatch");
        match &self.perm {
            None => self.solve_native(x),
            Some(perm) => {
                let mut y: Vec<f64> = perm.iter().map(|&old| x[old]).collect();
                self.solve_native(&mut y);
                for (new, &old) in perm.iter().enumerate() {
                    x[old] = y[new];
                }
            }
        }
    }

    fn solve_native(&self, b: &mut [f64]) {
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n.saturating_sub(1) {
            let lm = self.kl.min(n - 1 - j);
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                let col = j * self.ldab + kv;
                for p in 1..=lm {
                    b[j + p] -= self.ab[col + p] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * self.ldab;
            let xj = b[j] / self.ab[col + kv];
            b[j] = xj;
            if xj != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    b[i] -= self.ab[col + kv + i - j] * xj;
                }
            }
        }
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized sparsity pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // start each component from its minimum-degree node, refined to a
        // pseudo-peripheral node by repeated BFS
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .expect("unvisited node exists");
        let start = pseudo_peripheral(seed, &adj, &degree, &visited);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_unstable_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize], blocked: &[bool]) -> usize {
    let mut start = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let (far, depth) = farthest(start, adj, degree, blocked);
        if depth <= ecc {
            break;
        }
        ecc = depth;
        start = far;
    }
    start
}

fn farthest(start: usize, adj: &[Vec<usize>], degree: &[usize], blocked: &[bool]) -> (usize, usize) {
    let mut level = vec![usize::MAX; adj.len()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut best = (start, 0usize);
    while let Some(u) = queue.pop_front() {
        let lu = level[u];
        if lu > best.1 || (lu == best.1 && degree[u] < degree[best.0]) {
            best = (u, lu);
        }
        for &w in &adj[u] {
            if !blocked[w] && level[w] == usize::MAX {
                level[w] = lu + 1;
                queue.push_back(w);
            }
        }
    }
    best
}
