use super::csr::{axpy, dot, norm2, CsrMatrix};
use super::SolveError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
    IncompleteCholesky,
}

impl std::str::FromStr for Preconditioner {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Preconditioner::None),
            "jacobi" => Ok(Preconditioner::Jacobi),
            "ic0" | "incomplete-cholesky" => Ok(Preconditioner::IncompleteCholesky),
            other => Err(format!("unknown preconditioner '{other}'")),
        }
    }
}

impl std::fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preconditioner::None => "none",
            Preconditioner::Jacobi => "jacobi",
            Preconditioner::IncompleteCholesky => "incomplete-cholesky",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrylovConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Defaults to `10 n` when `None`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_iter: None,
            preconditioner: Preconditioner::IncompleteCholesky,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err("krylov tolerances must be positive".into());
        }
        Ok(())
    }

    fn limit(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

/// A certified solution: `residual` is recomputed from the returned `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Preconditioned conjugate gradients on an abstract operator.
///
/// `project`, when given, is applied to the residual and search directions; it
/// restricts the iteration to a subspace (e.g. mean-free vectors).
pub fn pcg(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    project: Option<&dyn Fn(&mut [f64])>,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Solution, SolveError> {
    let n = b.len();
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if let Some(p) = project {
        p(&mut r);
    }
    let mut history = vec![norm2(&r)];
    if history[0] <= tol {
        return Ok(Solution {
            x,
            iterations: 0,
            residual: history[0],
            history,
        });
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    if let Some(p) = project {
        p(&mut z);
    }
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut ad = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&d, &mut ad);
        let dad = dot(&d, &ad);
        if !(dad > 0.0) {
            return Err(SolveError::Breakdown {
                iterations: it,
                history,
            });
        }
        let alpha = rz / dad;
        axpy(alpha, &d, &mut x);
        axpy(-alpha, &ad, &mut r);
        if let Some(p) = project {
            p(&mut r);
        }
        let rn = norm2(&r);
        history.push(rn);
        if rn <= tol {
            return Ok(Solution {
                x,
                iterations: it,
                residual: rn,
                history,
            });
        }
        precond(&r, &mut z);
        if let Some(p) = project {
            p(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
    }
    Err(SolveError::MaxIterations {
        iterations: max_iter,
        history,
    })
}

/// Incomplete Cholesky factor with zero fill (lower triangle, CSR).
#[derive(Clone, Debug)]
pub struct Ic0 {
    l: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ic0 {
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        let n = a.nrows();
        let mut indptr = vec![0usize];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        let mut diag_pos = vec![0; n];
        for i in 0..n {
            let (s, e) = (indptr[i], indptr[i + 1]);
            if e == s || indices[e - 1] != i {
                return None;
            }
            diag_pos[i] = e - 1;
            for kk in s..e - 1 {
                let k = indices[kk];
                // sum over common columns m < k of L[i,m] L[k,m]
                let (mut a_i, mut a_k) = (s, indptr[k]);
                let ek = diag_pos[k];
                let mut acc = 0.0;
                while a_i < kk && a_k < ek {
                    match indices[a_i].cmp(&indices[a_k]) {
                        std::cmp::Ordering::Equal => {
                            acc += data[a_i] * data[a_k];
                            a_i += 1;
                            a_k += 1;
                        }
                        std::cmp::Ordering::Less => a_i += 1,
                        std::cmp::Ordering::Greater => a_k += 1,
                    }
                }
                data[kk] = (data[kk] - acc) / data[ek];
            }
            let sq: f64 = data[s..e - 1].iter().map(|v| v * v).sum();
            let dd = data[e - 1] - sq;
            if !(dd > 0.0) {
                return None;
            }
            data[e - 1] = dd.sqrt();
        }
        let l = CsrMatrix::from_raw(n, n, indptr, indices, data);
        Some(Ic0 { l, diag_pos })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        let ip = self.l.indptr();
        let idx = self.l.indices();
        let val = self.l.values();
        for i in 0..n {
            let mut s = r[i];
            for k in ip[i]..self.diag_pos[i] {
                s -= val[k] * z[idx[k]];
            }
            z[i] = s / val[self.diag_pos[i]];
        }
        for i in (0..n).rev() {
            let zi = z[i] / val[self.diag_pos[i]];
            z[i] = zi;
            for k in ip[i]..self.diag_pos[i] {
                z[idx[k]] -= val[k] * zi;
            }
        }
    }
}

/// Conjugate gradients for a symmetric positive definite sparse matrix.
///
/// Converges when `‖Ax - b‖ ≤ rel_tol ‖b‖ + abs_tol`; the reported residual is
/// recomputed from the returned iterate.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], cfg: &KrylovConfig) -> Result<Solution, SolveError> {
    cfg.validate().map_err(SolveError::Dimension)?;
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(SolveError::Dimension(format!(
            "solve_spd: matrix {}x{} with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let tol = cfg.rel_tol * norm2(b) + cfg.abs_tol;
    let limit = cfg.limit(b.len());
    let apply = |x: &[f64], y: &mut [f64]| a.matvec_into(x, y);
    let mut sol = match cfg.preconditioner {
        Preconditioner::None => pcg(apply, |r, z| z.copy_from_slice(r), None, b, None, tol, limit)?,
        Preconditioner::Jacobi => {
            let inv = jacobi_inverse(a);
            pcg(apply, |r, z| jacobi(&inv, r, z), None, b, None, tol, limit)?
        }
        Preconditioner::IncompleteCholesky => match Ic0::new(a) {
            Some(ic) => pcg(apply, |r, z| ic.apply(r, z), None, b, None, tol, limit)?,
            None => {
                let inv = jacobi_inverse(a);
                pcg(apply, |r, z| jacobi(&inv, r, z), None, b, None, tol, limit)?
            }
        },
    };
    let mut res = a.matvec(&sol.x);
    for (ri, bi) in res.iter_mut().zip(b) {
        *ri -= bi;
    }
    sol.residual = norm2(&res);
    if sol.residual > tol * 10.0 {
        return Err(SolveError::NotCertified {
            residual: sol.residual,
            tolerance: tol,
        });
    }
    Ok(sol)
}

fn jacobi_inverse(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

fn jacobi(inv: &[f64], r: &[f64], z: &mut [f64]) {
    for i in 0..r.len() {
        z[i] = inv[i] * r[i];
    }
}
