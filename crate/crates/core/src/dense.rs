//! Brute-force linear algebra on small graphs (at most 1024 vertices):
//! exact transition kernels of the trap model, hitting-time Laplace
//! transforms and Green functions of the embedded walk.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{Topology, VertexId};
use crate::landscape::Environment;

pub const DENSE_LIMIT: u64 = 1024;

/// Walk matrix and depth field of a small graph.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    p: DMatrix<f64>,
    tau: Vec<f64>,
    eigen: Option<SymmetricEigen<f64, nalgebra::Dyn>>,
}

impl DenseOracle {
    pub fn new<E: Environment + ?Sized>(topology: &Topology, env: &E) -> Result<Self> {
        let n = topology.vertex_count();
        if n > DENSE_LIMIT {
            return Err(Error::Dimension {
                got: n,
                limit: DENSE_LIMIT,
            });
        }
        let n = n as usize;
        let mut p = DMatrix::zeros(n, n);
        for x in 0..n {
            let nbrs = topology.neighbors(VertexId(x as u64));
            let w = 1.0 / nbrs.len() as f64;
            for y in nbrs {
                p[(x, y.0 as usize)] += w;
            }
        }
        let tau = (0..n).map(|x| env.tau(VertexId(x as u64))).collect();
        Ok(Self {
            p,
            tau,
            eigen: None,
        })
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Transition matrix of the embedded walk.
    pub fn walk_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    fn eigen(&mut self) -> &SymmetricEigen<f64, nalgebra::Dyn> {
        if self.eigen.is_none() {
            // regular graphs have symmetric P, so D^{-1/2}(P - I)D^{-1/2} is
            // symmetric and similar to the generator D^{-1}(P - I)
            let n = self.len();
            let mut s = self.p.clone();
            for x in 0..n {
                s[(x, x)] -= 1.0;
            }
            for x in 0..n {
                for y in 0..n {
                    s[(x, y)] /= (self.tau[x] * self.tau[y]).sqrt();
                }
            }
            self.eigen = Some(SymmetricEigen::new(s));
        }
        self.eigen.as_ref().unwrap()
    }

    /// `P[X(t) = y | X(0) = x]` for all `x, y`.
    pub fn kernel(&mut self, t: f64) -> DMatrix<f64> {
        let sq: Vec<f64> = self.tau.iter().map(|t| t.sqrt()).collect();
        let eig = self.eigen();
        let n = sq.len();
        let mut v = eig.eigenvectors.clone();
        let mut vt = eig.eigenvectors.transpose();
        for (j, &lam) in eig.eigenvalues.iter().enumerate() {
            let e = (lam * t).exp();
            for i in 0..n {
                vt[(j, i)] *= e;
            }
        }
        for i in 0..n {
            for j in 0..n {
                v[(i, j)] /= sq[i];
            }
        }
        let mut k = v * vt;
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] *= sq[j];
            }
        }
        k
    }

    /// `P[X(t_w + t) = X(t_w)]` started from `start`.
    pub fn two_time(&mut self, start: VertexId, t_w: f64, t: f64) -> f64 {
        let a = self.kernel(t_w);
        let b = self.kernel(t);
        let x = start.0 as usize;
        (0..self.len()).map(|y| a[(x, y)] * b[(y, y)]).sum()
    }

    fn complement(&self, set: &[VertexId]) -> (Vec<bool>, Vec<usize>) {
        let mut inside = vec![false; self.len()];
        for v in set {
            inside[v.0 as usize] = true;
        }
        let rest = (0..self.len()).filter(|&x| !inside[x]).collect();
        (inside, rest)
    }

    /// `E_x[exp(-λ H(A))]` for every start `x`, `H` counted in walk steps.
    pub fn hitting_lt(&self, set: &[VertexId], lambda: f64) -> Result<Vec<f64>> {
        if set.is_empty() {
            return Err(Error::Parameter(
                "hitting transform needs a nonempty set".into(),
            ));
        }
        let (inside, rest) = self.complement(set);
        let z = (-lambda).exp();
        let m = rest.len();
        let mut a = DMatrix::identity(m, m);
        let mut rhs = DVector::zeros(m);
        for (i, &x) in rest.iter().enumerate() {
            for (j, &y) in rest.iter().enumerate() {
                a[(i, j)] -= z * self.p[(x, y)];
            }
            rhs[i] = z
                * (0..self.len())
                    .filter(|&y| inside[y])
                    .map(|y| self.p[(x, y)])
                    .sum::<f64>();
        }
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Precision("singular hitting system".into()))?;
        let mut out = vec![1.0; self.len()];
        for (i, &x) in rest.iter().enumerate() {
            out[x] = sol[i];
        }
        Ok(out)
    }

    /// Green function of the embedded walk killed on entering `set`:
    /// `G_T(x, y)` = expected visits to `y` (time 0 included) before `H(T)`.
    /// Rows and columns are indexed by vertex label; entries in `T` are 0.
    pub fn green_killed(&self, set: &[VertexId]) -> Result<DMatrix<f64>> {
        let (_, rest) = self.complement(set);
        let m = rest.len();
        let mut a = DMatrix::identity(m, m);
        for (i, &x) in rest.iter().enumerate() {
            for (j, &y) in rest.iter().enumerate() {
                a[(i, j)] -= self.p[(x, y)];
            }
        }
        let inv = a
            .try_inverse()
            .ok_or_else(|| Error::Precision("singular Green system".into()))?;
        let n = self.len();
        let mut g = DMatrix::zeros(n, n);
        for (i, &x) in rest.iter().enumerate() {
            for (j, &y) in rest.iter().enumerate() {
                g[(x, y)] = inv[(i, j)];
            }
        }
        Ok(g)
    }

    /// `E_x[H(T)]` in walk steps.
    pub fn mean_hitting_steps(&self, set: &[VertexId]) -> Result<Vec<f64>> {
        let g = self.green_killed(set)?;
        Ok((0..self.len()).map(|x| g.row(x).sum()).collect())
    }

    /// Smoothed resolvent `Σ_k z^k (P^k + P^{k+1})/2 = (I + P)/2 (I - zP)^{-1}`.
    pub fn smoothed_resolvent(&self, z: f64) -> Result<DMatrix<f64>> {
        let n = self.len();
        let a = DMatrix::identity(n, n) - &self.p * z;
        let inv = a
            .try_inverse()
            .ok_or_else(|| Error::Precision("singular resolvent".into()))?;
        Ok((DMatrix::identity(n, n) + &self.p) * inv * 0.5)
    }
}
