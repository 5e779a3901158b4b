//! P1 finite-element operators: stiffness, lumped mass, element gradients.

use crate::error::{FieldError, MeshError};
use crate::mesh::{Mesh, AREA_TOL};
use crate::sparse::CsrMatrix;

/// Element gradient map: `grad = Σ_j b[j] · v_j` for nodal values `v`.
pub type GradMap = [[f64; 2]; 3];

#[derive(Debug, Clone)]
pub struct FeOperators {
    mesh: Mesh,
    stiffness: CsrMatrix,
    lumped_mass: Vec<f64>,
    elem_grad: Vec<GradMap>,
    /// Local 3×3 stiffness per element.
    elem_stiffness: Vec<[[f64; 3]; 3]>,
    /// CSR slots of the local entries, row-major.
    elem_slots: Vec<[usize; 9]>,
}

pub fn build_fe_operators(mesh: Mesh) -> Result<FeOperators, MeshError> {
    FeOperators::new(mesh)
}

impl FeOperators {
    pub fn new(mesh: Mesh) -> Result<Self, MeshError> {
        let n = mesh.node_count();
        let ne = mesh.element_count();
        let mut elem_grad = Vec::with_capacity(ne);
        let mut elem_stiffness = Vec::with_capacity(ne);
        let mut lumped_mass = vec![0.0; n];
        let mut triplets = Vec::with_capacity(9 * ne);

        for (e, (tri, &area)) in mesh.triangles().iter().zip(mesh.areas()).enumerate() {
            if area <= AREA_TOL {
                return Err(MeshError::DegenerateTriangle { element: e, area });
            }
            let p = tri.map(|i| mesh.nodes()[i]);
            // ∇φ_j = (y_{j+1} - y_{j+2}, x_{j+2} - x_{j+1}) / 2|T|
            let mut b = [[0.0; 2]; 3];
            for j in 0..3 {
                let (q, r) = (p[(j + 1) % 3], p[(j + 2) % 3]);
                b[j] = [(q[1] - r[1]) / (2.0 * area), (r[0] - q[0]) / (2.0 * area)];
            }
            let mut ke = [[0.0; 3]; 3];
            for a in 0..3 {
                for c in 0..3 {
                    ke[a][c] = area * (b[a][0] * b[c][0] + b[a][1] * b[c][1]);
                    triplets.push((tri[a], tri[c], ke[a][c]));
                }
                lumped_mass[tri[a]] += area / 3.0;
            }
            elem_grad.push(b);
            elem_stiffness.push(ke);
        }

        let stiffness = CsrMatrix::from_triplets(n, triplets);
        let elem_slots = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut s = [0usize; 9];
                for a in 0..3 {
                    for c in 0..3 {
                        s[3 * a + c] = stiffness.slot(tri[a], tri[c]).expect("assembled slot");
                    }
                }
                s
            })
            .collect();

        Ok(Self {
            mesh,
            stiffness,
            lumped_mass,
            elem_grad,
            elem_stiffness,
            elem_slots,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn elem_grad(&self) -> &[GradMap] {
        &self.elem_grad
    }

    pub fn node_count(&self) -> usize {
        self.mesh.node_count()
    }

    pub fn element_count(&self) -> usize {
        self.mesh.element_count()
    }

    pub fn check_nodal(&self, field: &[f64]) -> Result<(), FieldError> {
        if field.len() != self.node_count() {
            return Err(FieldError::Length {
                expected: self.node_count(),
                actual: field.len(),
            });
        }
        Ok(())
    }

    pub fn check_elemental<T>(&self, field: &[T]) -> Result<(), FieldError> {
        if field.len() != self.element_count() {
            return Err(FieldError::Length {
                expected: self.element_count(),
                actual: field.len(),
            });
        }
        Ok(())
    }

    /// Constant gradient of the P1 interpolant of `field` on every element.
    pub fn element_gradients(&self, field: &[f64]) -> Result<Vec<[f64; 2]>, FieldError> {
        self.check_nodal(field)?;
        Ok(self
            .mesh
            .triangles()
            .iter()
            .zip(&self.elem_grad)
            .map(|(tri, b)| {
                let mut g = [0.0; 2];
                for j in 0..3 {
                    g[0] += b[j][0] * field[tri[j]];
                    g[1] += b[j][1] * field[tri[j]];
                }
                g
            })
            .collect())
    }

    /// Nodal average of `field` on every element.
    pub fn element_averages(&self, field: &[f64]) -> Vec<f64> {
        self.mesh
            .triangles()
            .iter()
            .map(|t| (field[t[0]] + field[t[1]] + field[t[2]]) / 3.0)
            .collect()
    }

    /// `Σ_e w_e K_e`, on the pattern of the stiffness matrix.
    pub fn weighted_stiffness(&self, weights: &[f64]) -> CsrMatrix {
        assert_eq!(weights.len(), self.element_count());
        let mut values = vec![0.0; self.stiffness.nnz()];
        for ((ke, slots), &w) in self.elem_stiffness.iter().zip(&self.elem_slots).zip(weights) {
            for a in 0..3 {
                for c in 0..3 {
                    values[slots[3 * a + c]] += w * ke[a][c];
                }
            }
        }
        self.stiffness.with_values(values)
    }

    /// `Σ_i m_i a_i b_i`.
    pub fn lumped_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.lumped_mass
            .iter()
            .zip(a.iter().zip(b))
            .map(|(m, (x, y))| m * x * y)
            .sum()
    }

    pub fn lumped_norm(&self, a: &[f64]) -> f64 {
        self.lumped_inner(a, a).sqrt()
    }

    /// Discrete H¹ norm: lumped L² plus stiffness seminorm.
    pub fn h1_norm(&self, a: &[f64]) -> f64 {
        (self.lumped_inner(a, a) + self.stiffness.quad_form(a)).sqrt()
    }

    /// Discrete W^{1,p} norm: lumped p-norm of nodal values plus
    /// element p-norm of the gradients.
    pub fn w1p_norm(&self, a: &[f64], p: f64) -> f64 {
        let nodal: f64 = self.lumped_mass.iter().zip(a).map(|(m, x)| m * x.abs().powf(p)).sum();
        let grads = self.element_gradients(a).expect("nodal field");
        let elem: f64 = grads
            .iter()
            .zip(self.mesh.areas())
            .map(|(g, area)| area * (g[0] * g[0] + g[1] * g[1]).sqrt().powf(p))
            .sum();
        (nodal + elem).powf(1.0 / p)
    }
}
