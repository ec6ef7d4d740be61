//! The restricted-cone constant
//! `c(A, tau) = inf { a'(A'A)a / (n sum_{j in S} a_j^2) : sum_{S^c}|a_j| <= tau sum_S |a_j| }`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram, pseudo_inverse, symmetric_eigen, GaussianRng, Matrix};

/// Support `S` of `beta*` and the cone aperture `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub support: Vec<usize>,
    pub tau: f64,
}

impl ConeSpec {
    pub fn new(support: Vec<usize>, tau: f64) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Assumption("the cone needs a non-empty support".into()));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        let mut support = support;
        support.sort_unstable();
        support.dedup();
        Ok(Self { support, tau })
    }

    /// Support of a coefficient vector.
    pub fn from_beta(beta: &[f64], tau: f64) -> Result<Self> {
        Self::new((0..beta.len()).filter(|&j| beta[j] != 0.0).collect(), tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeBudget {
    pub directions: usize,
    pub steps: usize,
    pub seed: u64,
    /// Largest `p` handled by exhaustive face enumeration.
    pub exact_max_p: usize,
}

impl Default for ConeBudget {
    fn default() -> Self {
        Self { directions: 10_000, steps: 100, seed: 0, exact_max_p: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeMethod {
    /// Minimum over the stationary points of every face of the cone.
    FaceEnumeration,
    /// Best point found by random starts and projected gradient. Always an
    /// upper estimate.
    RandomSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeEstimate {
    pub value: f64,
    pub method: ConeMethod,
}

/// Estimates `c(A, tau)` for a design scaled by `n`.
pub fn cone_constant(a: &Matrix, n: usize, cone: &ConeSpec, budget: &ConeBudget) -> Result<ConeEstimate> {
    let p = a.cols();
    if cone.support.is_empty() {
        return Err(Error::Assumption("the cone needs a non-empty support".into()));
    }
    if let Some(&j) = cone.support.iter().find(|&&j| j >= p) {
        return Err(Error::Dimension(format!("support index {} outside 1..{}", j + 1, p)));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let g = gram(a);
    let problem = Problem::new(&g, n as f64, cone);
    if p <= budget.exact_max_p {
        let value = problem.enumerate_faces()?;
        return Ok(ConeEstimate { value: value.max(0.0), method: ConeMethod::FaceEnumeration });
    }
    let value = problem.random_search(budget);
    Ok(ConeEstimate { value: value.max(0.0), method: ConeMethod::RandomSearch })
}

struct Problem<'a> {
    g: &'a Matrix,
    n: f64,
    tau: f64,
    in_s: Vec<bool>,
}

impl<'a> Problem<'a> {
    fn new(g: &'a Matrix, n: f64, cone: &ConeSpec) -> Self {
        let mut in_s = vec![false; g.rows()];
        for &j in &cone.support {
            in_s[j] = true;
        }
        Self { g, n, tau: cone.tau, in_s }
    }

    fn p(&self) -> usize {
        self.g.rows()
    }

    fn s_mass(&self, alpha: &[f64]) -> (f64, f64, f64) {
        let (mut l1_s, mut l1_c, mut l2_s) = (0.0, 0.0, 0.0);
        for (j, &v) in alpha.iter().enumerate() {
            if self.in_s[j] {
                l1_s += v.abs();
                l2_s += v * v;
            } else {
                l1_c += v.abs();
            }
        }
        (l1_s, l1_c, l2_s)
    }

    fn in_cone(&self, alpha: &[f64]) -> bool {
        let (l1_s, l1_c, l2_s) = self.s_mass(alpha);
        l2_s > 0.0 && l1_c <= self.tau * l1_s * (1.0 + 1e-9) + 1e-12 * (l1_s + l1_c)
    }

    fn ratio(&self, alpha: &[f64]) -> f64 {
        let (_, _, l2_s) = self.s_mass(alpha);
        let ga = self.g.matvec(alpha).expect("square gram");
        let q: f64 = ga.iter().zip(alpha).map(|(a, b)| a * b).sum();
        q / (self.n * l2_s)
    }

    /// Every minimizer of a ratio of quadratic forms over a polyhedral cone
    /// is a stationary point on the linear span of some face. Faces here are
    /// fixed by a support `F` and, optionally, the cone inequality holding
    /// with equality inside one sign orthant.
    fn enumerate_faces(&self) -> Result<f64> {
        let p = self.p();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1u32 << p) {
            let f: Vec<usize> = (0..p).filter(|&j| mask & (1 << j) != 0).collect();
            let fs: Vec<usize> = f.iter().copied().filter(|&j| self.in_s[j]).collect();
            if fs.is_empty() {
                continue;
            }
            let basis: Vec<Vec<f64>> = f.iter().map(|&j| unit(p, j)).collect();
            best = best.min(self.face_minimum(&basis)?);

            if fs.len() == f.len() {
                continue;
            }
            // Sign patterns with the first support coordinate positive.
            let k = f.len();
            let anchor = f.iter().position(|&j| self.in_s[j]).expect("non-empty");
            for signs in 0u32..(1u32 << (k - 1)) {
                let mut normal = vec![0.0; p];
                let mut bit = 0;
                for (pos, &j) in f.iter().enumerate() {
                    let s = if pos == anchor {
                        1.0
                    } else {
                        let v = if signs & (1 << bit) != 0 { -1.0 } else { 1.0 };
                        bit += 1;
                        v
                    };
                    normal[j] = if self.in_s[j] { -self.tau * s } else { s };
                }
                let basis = orthonormal_complement(&f, &normal);
                best = best.min(self.face_minimum(&basis)?);
            }
        }
        Ok(best)
    }

    /// Smallest ratio among generalized eigenvectors of the pencil
    /// `(B'GB, B'DB)` that lie in the cone.
    fn face_minimum(&self, basis: &[Vec<f64>]) -> Result<f64> {
        let k = basis.len();
        let p = self.p();
        let gb: Vec<Vec<f64>> = basis.iter().map(|b| self.g.matvec(b).expect("square gram")).collect();
        let mut gm = Matrix::zeros(k, k);
        let mut dm = Matrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let gv: f64 = (0..p).map(|t| basis[i][t] * gb[j][t]).sum();
                let dv: f64 = (0..p).filter(|&t| self.in_s[t]).map(|t| basis[i][t] * basis[j][t]).sum();
                gm.set(i, j, gv);
                gm.set(j, i, gv);
                dm.set(i, j, dv);
                dm.set(j, i, dv);
            }
        }

        let deig = symmetric_eigen(&dm)?;
        let dmax = deig.values.iter().fold(0.0f64, |m, v| m.max(*v));
        let range: Vec<usize> = (0..k).filter(|&i| deig.values[i] > 1e-12 * dmax.max(1.0)).collect();
        let null: Vec<usize> = (0..k).filter(|i| !range.contains(i)).collect();
        if range.is_empty() {
            return Ok(f64::INFINITY);
        }
        let u = &deig.vectors;
        let gu = u.transpose().matmul(&gm)?.matmul(u)?;
        let block = |rows: &[usize], cols: &[usize]| -> Matrix {
            let mut m = Matrix::zeros(rows.len(), cols.len());
            for (a, &i) in rows.iter().enumerate() {
                for (b, &j) in cols.iter().enumerate() {
                    m.set(a, b, gu.get(i, j));
                }
            }
            m
        };
        let g_rr = block(&range, &range);
        // Minimizing over the directions without support mass gives
        // v = -G_NN^+ G_NR u and the Schur complement on the rest.
        let (schur, elim) = if null.is_empty() {
            (g_rr, None)
        } else {
            let g_nn = {
                let mut m = block(&null, &null);
                m.symmetrize_upper();
                m
            };
            let g_nr = block(&null, &range);
            let elim = pseudo_inverse(&g_nn, 1e-12)?.matmul(&g_nr)?.scale(-1.0);
            let mut schur = g_rr.add(&g_nr.transpose().matmul(&elim)?)?;
            schur.symmetrize_upper();
            (schur, Some(elim))
        };
        let inv_sqrt: Vec<f64> = range.iter().map(|&i| 1.0 / deig.values[i].sqrt()).collect();
        let r = range.len();
        let mut scaled = Matrix::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                scaled.set(i, j, inv_sqrt[i] * schur.get(i, j) * inv_sqrt[j]);
            }
        }
        scaled.symmetrize_upper();
        let eig = symmetric_eigen(&scaled)?;

        let mut best = f64::INFINITY;
        for e in 0..r {
            let w = eig.vector(e);
            let ur: Vec<f64> = w.iter().zip(&inv_sqrt).map(|(a, b)| a * b).collect();
            let mut coords = vec![0.0; k];
            for (a, &i) in range.iter().enumerate() {
                coords[i] = ur[a];
            }
            if let Some(elim) = &elim {
                let v = elim.matvec(&ur)?;
                for (a, &i) in null.iter().enumerate() {
                    coords[i] = v[a];
                }
            }
            let z = u.matvec(&coords)?;
            let mut alpha = vec![0.0; p];
            for (zi, b) in z.iter().zip(basis) {
                for t in 0..p {
                    alpha[t] += zi * b[t];
                }
            }
            for cand in [alpha.clone(), alpha.iter().map(|v| -v).collect()] {
                if self.in_cone(&cand) {
                    best = best.min(self.ratio(&cand));
                }
            }
        }
        Ok(best)
    }

    fn random_search(&self, budget: &ConeBudget) -> f64 {
        (0..budget.directions)
            .into_par_iter()
            .map(|d| {
                let mut rng = GaussianRng::seed_from_u64(budget.seed.wrapping_add(d as u64));
                let start = self.random_direction(&mut rng);
                self.refine(start, budget.steps)
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Dirichlet magnitudes on `S` with random signs; the complement gets
    /// total mass `tau * u`, `u` uniform, spread the same way.
    fn random_direction(&self, rng: &mut GaussianRng) -> Vec<f64> {
        let p = self.p();
        let mut alpha = vec![0.0; p];
        let draw = |members: &[usize], mass: f64, alpha: &mut [f64], rng: &mut GaussianRng| {
            if members.is_empty() {
                return;
            }
            let w: Vec<f64> = members.iter().map(|_| -rng.uniform().ln()).collect();
            let total: f64 = w.iter().sum();
            for (&j, wj) in members.iter().zip(&w) {
                let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                alpha[j] = sign * mass * wj / total;
            }
        };
        let s: Vec<usize> = (0..p).filter(|&j| self.in_s[j]).collect();
        let c: Vec<usize> = (0..p).filter(|&j| !self.in_s[j]).collect();
        draw(&s, 1.0, &mut alpha, rng);
        let mass = self.tau * rng.uniform();
        draw(&c, mass, &mut alpha, rng);
        alpha
    }

    /// Normalizes the support block to unit length, then projects the rest
    /// onto the l1 ball allowed by the cone.
    fn project(&self, alpha: &mut [f64]) {
        let (_, _, l2_s) = self.s_mass(alpha);
        if l2_s == 0.0 {
            return;
        }
        let inv = 1.0 / l2_s.sqrt();
        alpha.iter_mut().for_each(|v| *v *= inv);
        let (l1_s, _, _) = self.s_mass(alpha);
        let idx: Vec<usize> = (0..alpha.len()).filter(|&j| !self.in_s[j]).collect();
        let mut y: Vec<f64> = idx.iter().map(|&j| alpha[j]).collect();
        project_l1_ball(&mut y, self.tau * l1_s);
        for (&j, v) in idx.iter().zip(y) {
            alpha[j] = v;
        }
    }

    fn refine(&self, mut alpha: Vec<f64>, steps: usize) -> f64 {
        self.project(&mut alpha);
        let mut f = self.ratio(&alpha);
        let gnorm = self.g.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())) * self.p() as f64;
        let mut t = if gnorm > 0.0 { self.n / gnorm } else { 1.0 };
        let mut taken = 0;
        let mut shrinks = 0;
        while taken < steps && shrinks < 40 {
            let ga = self.g.matvec(&alpha).expect("square gram");
            let grad: Vec<f64> = (0..alpha.len())
                .map(|j| {
                    let d = if self.in_s[j] { alpha[j] } else { 0.0 };
                    2.0 * (ga[j] / self.n - f * d)
                })
                .collect();
            let mut next: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - t * g).collect();
            self.project(&mut next);
            let fn_ = if self.in_cone(&next) { self.ratio(&next) } else { f64::INFINITY };
            if fn_ < f {
                alpha = next;
                f = fn_;
                t *= 2.0;
                taken += 1;
                shrinks = 0;
            } else {
                t *= 0.5;
                shrinks += 1;
            }
        }
        f
    }
}

fn unit(p: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; p];
    e[j] = 1.0;
    e
}

/// Orthonormal basis of `{x supported on f : normal'x = 0}` by Gram-Schmidt.
fn orthonormal_complement(f: &[usize], normal: &[f64]) -> Vec<Vec<f64>> {
    let p = normal.len();
    let nn: f64 = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<f64>> = vec![normal.iter().map(|v| v / nn).collect()];
    for &j in f {
        let mut v = unit(p, j);
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                v.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
            }
        }
        let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if len > 1e-10 {
            basis.push(v.iter().map(|a| a / len).collect());
        }
    }
    basis.remove(0);
    basis
}

/// Euclidean projection onto `{y : ||y||_1 <= radius}`.
pub(crate) fn project_l1_ball(y: &mut [f64], radius: f64) {
    let l1: f64 = y.iter().map(|v| v.abs()).sum();
    if l1 <= radius {
        return;
    }
    if radius <= 0.0 {
        y.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let mut mags: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - radius) / (i + 1) as f64;
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    for v in y.iter_mut() {
        *v = v.signum() * (v.abs() - theta).max(0.0);
    }
}
