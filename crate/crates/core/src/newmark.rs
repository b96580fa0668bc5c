//! Average-acceleration Newmark integration (beta = 1/4, gamma = 1/2).
//!
//! ```text
//! K_eff x1 = f1 + M (a0 x0 + a2 v0 + acc0) + C (a1 x0 + v0)
//! v1   = a1 (x1 - x0) - v0
//! acc1 = a0 (x1 - x0) - a2 v0 - acc0
//! a0 = 4/dt^2, a1 = 2/dt, a2 = 4/dt, K_eff = K + a1 C + a0 M
//! ```

use nalgebra::DMatrix;

use crate::bridge::ModalMatrices;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub dt: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Coefficients {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            a0: 4.0 / (dt * dt),
            a1: 2.0 / dt,
            a2: 4.0 / dt,
        }
    }

    /// Velocity and acceleration at the end of a step.
    #[inline]
    pub fn finish(&self, x0: f64, v0: f64, acc0: f64, x1: f64) -> (f64, f64) {
        let dx = x1 - x0;
        (self.a1 * dx - v0, self.a0 * dx - self.a2 * v0 - acc0)
    }
}

/// Diagonal (modal) system.
#[derive(Debug, Clone)]
pub struct ModalIntegrator {
    pub k: Coefficients,
    mass: Vec<f64>,
    damping: Vec<f64>,
    stiffness: Vec<f64>,
    inv_eff: Vec<f64>,
}

impl ModalIntegrator {
    pub fn new(m: &ModalMatrices, dt: f64) -> Self {
        let k = Coefficients::new(dt);
        let inv_eff = (0..m.mass.len())
            .map(|j| 1.0 / (m.stiffness[j] + k.a1 * m.damping[j] + k.a0 * m.mass[j]))
            .collect();
        Self {
            k,
            mass: m.mass.clone(),
            damping: m.damping.clone(),
            stiffness: m.stiffness.clone(),
            inv_eff,
        }
    }

    pub fn dofs(&self) -> usize {
        self.mass.len()
    }

    /// Acceleration consistent with the equation of motion.
    pub fn acceleration(&self, q: &[f64], v: &[f64], f: &[f64], out: &mut [f64]) {
        for j in 0..self.mass.len() {
            out[j] = (f[j] - self.damping[j] * v[j] - self.stiffness[j] * q[j]) / self.mass[j];
        }
    }

    /// Displacement at the end of a step under end-of-step force `f1`.
    #[inline]
    pub fn displacement(&self, j: usize, q0: f64, v0: f64, acc0: f64, f1: f64) -> f64 {
        let k = &self.k;
        let rhs =
            f1 + self.mass[j] * (k.a0 * q0 + k.a2 * v0 + acc0) + self.damping[j] * (k.a1 * q0 + v0);
        rhs * self.inv_eff[j]
    }

    /// Advances `(q, v, acc)` in place.
    pub fn step(&self, q: &mut [f64], v: &mut [f64], acc: &mut [f64], f1: &[f64]) {
        for j in 0..self.mass.len() {
            let x1 = self.displacement(j, q[j], v[j], acc[j], f1[j]);
            let (v1, a1) = self.k.finish(q[j], v[j], acc[j], x1);
            q[j] = x1;
            v[j] = v1;
            acc[j] = a1;
        }
    }

    /// `sum 1/2 (M v^2 + K q^2)`.
    pub fn energy(&self, q: &[f64], v: &[f64]) -> f64 {
        (0..self.mass.len())
            .map(|j| 0.5 * (self.mass[j] * v[j] * v[j] + self.stiffness[j] * q[j] * q[j]))
            .sum()
    }
}

/// Small dense system with a precomputed inverse effective stiffness.
#[derive(Debug, Clone)]
pub struct DenseIntegrator {
    pub k: Coefficients,
    n: usize,
    mass: Vec<f64>,
    damping: Vec<f64>,
    stiffness: Vec<f64>,
    inv_eff: Vec<f64>,
}

impl DenseIntegrator {
    pub fn new(m: &DMatrix<f64>, c: &DMatrix<f64>, kmat: &DMatrix<f64>, dt: f64) -> Result<Self> {
        let k = Coefficients::new(dt);
        let eff = kmat + c * k.a1 + m * k.a0;
        let inv = eff
            .cholesky()
            .ok_or_else(|| Error::Invariant("effective stiffness is not positive definite".into()))?
            .inverse();
        let flat = |a: &DMatrix<f64>| a.transpose().as_slice().to_vec();
        Ok(Self {
            k,
            n: m.nrows(),
            mass: flat(m),
            damping: flat(c),
            stiffness: flat(kmat),
            inv_eff: flat(&inv),
        })
    }

    pub fn dofs(&self) -> usize {
        self.n
    }

    /// Row-major entry of the inverse effective stiffness.
    #[inline]
    pub fn flexibility(&self, i: usize, j: usize) -> f64 {
        self.inv_eff[i * self.n + j]
    }

    /// End-of-step displacement under zero end-of-step force.
    pub fn free_displacement(&self, x0: &[f64], v0: &[f64], acc0: &[f64], out: &mut [f64]) {
        let n = self.n;
        let k = &self.k;
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let mut r = 0.0;
            for j in 0..n {
                let mij = self.mass[i * n + j];
                let cij = self.damping[i * n + j];
                r += mij * (k.a0 * x0[j] + k.a2 * v0[j] + acc0[j]) + cij * (k.a1 * x0[j] + v0[j]);
            }
            rhs[i] = r;
        }
        for i in 0..n {
            out[i] = (0..n).map(|j| self.inv_eff[i * n + j] * rhs[j]).sum();
        }
    }

    pub fn acceleration(&self, x: &[f64], v: &[f64], f: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        let m = DMatrix::from_row_slice(n, n, &self.mass);
        let rhs = nalgebra::DVector::from_iterator(
            n,
            (0..n).map(|i| {
                f[i] - (0..n)
                    .map(|j| self.damping[i * n + j] * v[j] + self.stiffness[i * n + j] * x[j])
                    .sum::<f64>()
            }),
        );
        let a = m
            .cholesky()
            .ok_or_else(|| Error::Invariant("mass matrix is not positive definite".into()))?
            .solve(&rhs);
        out.copy_from_slice(a.as_slice());
        Ok(())
    }

    /// Full step: end-of-step force `f1` on every DOF.
    pub fn step(&self, x: &mut [f64], v: &mut [f64], acc: &mut [f64], f1: &[f64]) {
        let n = self.n;
        let mut x1 = vec![0.0; n];
        self.free_displacement(x, v, acc, &mut x1);
        for i in 0..n {
            x1[i] += (0..n).map(|j| self.inv_eff[i * n + j] * f1[j]).sum::<f64>();
        }
        for i in 0..n {
            let (v1, a1) = self.k.finish(x[i], v[i], acc[i], x1[i]);
            x[i] = x1[i];
            v[i] = v1;
            acc[i] = a1;
        }
    }

    pub fn energy(&self, x: &[f64], v: &[f64]) -> f64 {
        let n = self.n;
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                e += 0.5 * (self.mass[i * n + j] * v[i] * v[j] + self.stiffness[i * n + j] * x[i] * x[j]);
            }
        }
        e
    }
}
