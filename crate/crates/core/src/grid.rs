//! Knowledge-space mesh, trapezoidal quadrature and the time axis.
//!
//! Every solver works on nodal values `v_i` carried by a [`Mesh`]. Integrals
//! are composite trapezoid sums `sum_i w_i v_i`, and the running integrals
//! below and above a node split that node's own contribution `w_i v_i` in
//! half between the two sides. That split makes the discrete gain and loss
//! operators of the collision term exact adjoints of each other.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Logarithmic,
    Linear,
}

/// Ordered nodes `z_0 < ... < z_{N-1}` with composite trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    spacing: Spacing,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Running integrals below and above each node.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialIntegrals {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn build_mesh(spacing: Spacing, z_min: f64, z_max: f64, n: usize) -> Result<Mesh> {
    Mesh::new(spacing, z_min, z_max, n)
}

impl Mesh {
    pub fn new(spacing: Spacing, z_min: f64, z_max: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidMesh(format!("need at least 3 nodes, got {n}")));
        }
        if !(z_min.is_finite() && z_max.is_finite()) || z_min >= z_max {
            return Err(Error::InvalidMesh(format!(
                "need z_min < z_max, got [{z_min}, {z_max}]"
            )));
        }
        let last = (n - 1) as f64;
        let mut nodes: Vec<f64> = match spacing {
            Spacing::Logarithmic => {
                if z_min <= 0.0 {
                    return Err(Error::InvalidMesh(format!(
                        "logarithmic spacing needs z_min > 0, got {z_min}"
                    )));
                }
                let (lo, hi) = (z_min.ln(), z_max.ln());
                (0..n)
                    .map(|i| (lo + (hi - lo) * (i as f64 / last)).exp())
                    .collect()
            }
            Spacing::Linear => {
                if z_min < 0.0 {
                    return Err(Error::InvalidMesh(format!(
                        "knowledge levels are non-negative, got z_min = {z_min}"
                    )));
                }
                (0..n)
                    .map(|i| z_min + (z_max - z_min) * (i as f64 / last))
                    .collect()
            }
        };
        nodes[0] = z_min;
        nodes[n - 1] = z_max;
        Ok(Self::from_sorted_nodes(spacing, nodes))
    }

    fn from_sorted_nodes(spacing: Spacing, nodes: Vec<f64>) -> Self {
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let half = 0.5 * (nodes[i + 1] - nodes[i]);
            weights[i] += half;
            weights[i + 1] += half;
        }
        Mesh {
            spacing,
            nodes,
            weights,
        }
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn z_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn z_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Width of the cell `[z_i, z_{i+1}]`.
    pub fn cell_width(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    /// Per-node quadrature masses `w_i v_i`.
    pub fn nodal_masses(&self, values: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), values.len())?;
        check_finite(values)?;
        Ok(self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .collect())
    }

    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        Ok(self.nodal_masses(values)?.iter().sum())
    }

    /// `lower_i ~ int_{z_0}^{z_i}` and `upper_i ~ int_{z_i}^{z_max}`, with half
    /// of node i's own mass on each side.
    pub fn partial_integrals(&self, values: &[f64]) -> Result<PartialIntegrals> {
        let masses = self.nodal_masses(values)?;
        let below = exclusive_prefix(&masses);
        let above = exclusive_suffix(&masses);
        let lower = below
            .iter()
            .zip(&masses)
            .map(|(b, m)| b + 0.5 * m)
            .collect();
        let upper = above
            .iter()
            .zip(&masses)
            .map(|(a, m)| a + 0.5 * m)
            .collect();
        Ok(PartialIntegrals { lower, upper })
    }

    /// Index of the node closest to `z` (ties go to the lower node).
    pub fn nearest_node(&self, z: f64) -> usize {
        let idx = self.nodes.partition_point(|&x| x < z);
        if idx == 0 {
            return 0;
        }
        if idx >= self.len() {
            return self.len() - 1;
        }
        if z - self.nodes[idx - 1] <= self.nodes[idx] - z {
            idx - 1
        } else {
            idx
        }
    }

    /// Piecewise-linear interpolation; `None` outside `[z_min, z_max]`.
    pub fn interpolate(&self, values: &[f64], z: f64) -> Option<f64> {
        if !(z >= self.z_min() && z <= self.z_max()) {
            return None;
        }
        let idx = self.nodes.partition_point(|&x| x < z);
        if idx == 0 {
            return Some(values[0]);
        }
        let (z0, z1) = (self.nodes[idx - 1], self.nodes[idx]);
        let t = (z - z0) / (z1 - z0);
        Some(values[idx - 1] + t * (values[idx] - values[idx - 1]))
    }
}

/// `out_i = sum_{j<i} m_j`.
pub(crate) fn exclusive_prefix(masses: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(masses.len());
    let mut acc = 0.0;
    for m in masses {
        out.push(acc);
        acc += m;
    }
    out
}

/// `out_i = sum_{j>i} m_j`.
pub(crate) fn exclusive_suffix(masses: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; masses.len()];
    let mut acc = 0.0;
    for i in (0..masses.len()).rev() {
        out[i] = acc;
        acc += masses[i];
    }
    out
}

/// Uniform time axis on `[0, t_final]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    t_final: f64,
    n_steps: usize,
}

impl TimeAxis {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) || n_steps == 0 {
            return Err(Error::InvalidParam(format!(
                "time axis needs t_final > 0 and n_steps >= 1, got ({t_final}, {n_steps})"
            )));
        }
        Ok(TimeAxis { t_final, n_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_final
        } else {
            k as f64 * self.dt()
        }
    }

    /// All `n_steps + 1` snapshot times.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}
