//! Second-order finite-difference assembly of `kappa_i * d/dx(a_i(x,t) d/dx)`.
//!
//! Dirichlet operators act on the interior nodes `1..=n_x`. Neumann and
//! Robin operators act on all nodes `0..=n_x+1`, with the boundary rows
//! obtained by eliminating a ghost node from the centered boundary condition
//! `a du/dnu + b u = 0` (`b = 0` for Neumann).

use crate::error::Result;
use crate::model::{BoundaryKind, ModelSpec};

/// Tridiagonal operator, row `r` is `lower[r] u[r-1] + diag[r] u[r] + upper[r] u[r+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedOperator {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub bc_kind: BoundaryKind,
    pub component: usize,
    pub time_index: usize,
}

impl BandedOperator {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Grid node of unknown 0.
    pub fn first_node(&self) -> usize {
        match self.bc_kind {
            BoundaryKind::Dirichlet => 1,
            _ => 0,
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.size();
        assert_eq!(u.len(), n);
        (0..n)
            .map(|r| {
                let mut s = self.diag[r] * u[r];
                if r > 0 {
                    s += self.lower[r] * u[r - 1];
                }
                if r + 1 < n {
                    s += self.upper[r] * u[r + 1];
                }
                s
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.apply(&vec![1.0; self.size()])
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.size();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for r in 0..n {
            m[(r, r)] = self.diag[r];
            if r > 0 {
                m[(r, r - 1)] = self.lower[r];
            }
            if r + 1 < n {
                m[(r, r + 1)] = self.upper[r];
            }
        }
        m
    }
}

/// Assemble `kappa_i L_i(t_k)` with the model's boundary condition folded in.
pub fn assemble_diffusion(model: &ModelSpec, component: usize, time_index: usize) -> Result<BandedOperator> {
    assert!(component < model.n(), "component out of range");
    assert!(time_index < model.tgrid.n_t, "time index out of range");
    let dom = &model.domain;
    let h = dom.h();
    let h2 = h * h;
    let kappa = model.diffusion.kappa[component];
    let a = |j: usize| model.diffusion.a.get(time_index, j, component, 0);
    let face = |j: usize| 0.5 * (a(j) + a(j + 1)); // a at x_{j+1/2}
    let kind = model.boundary.kind;
    let last = dom.n_x + 1;

    let (first, end) = match kind {
        BoundaryKind::Dirichlet => (1, dom.n_x),
        _ => (0, last),
    };
    let size = end - first + 1;
    let mut lower = vec![0.0; size];
    let mut diag = vec![0.0; size];
    let mut upper = vec![0.0; size];

    for r in 0..size {
        let j = first + r;
        if j == 0 || j == last {
            let inward = if j == 0 { face(0) } else { face(last - 1) };
            let b = match (kind, &model.boundary.robin_b) {
                (BoundaryKind::Robin, Some(rb)) => {
                    if j == 0 {
                        rb.left[component][time_index]
                    } else {
                        rb.right[component][time_index]
                    }
                }
                _ => 0.0,
            };
            // ghost u_g = u_in - (2 h b / a_j) u_j, and a_{ghost face} = inward face
            let off = 2.0 * inward / h2;
            let robin = 2.0 * inward * b / (a(j) * h);
            diag[r] = kappa * (-off - robin);
            if j == 0 {
                upper[r] = kappa * off;
            } else {
                lower[r] = kappa * off;
            }
        } else {
            let (wl, wr) = (face(j - 1), face(j));
            lower[r] = kappa * wl / h2;
            upper[r] = kappa * wr / h2;
            diag[r] = -kappa * (wl + wr) / h2;
        }
    }
    if kind == BoundaryKind::Dirichlet {
        // boundary values are zero; rows reference interior unknowns only
        lower[0] = 0.0;
        upper[size - 1] = 0.0;
    }

    Ok(BandedOperator {
        lower,
        diag,
        upper,
        bc_kind: kind,
        component,
        time_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::model::*;

    fn model(n_x: usize, boundary: BoundarySpec, a_expr: &str) -> ModelSpec {
        let d = Domain::new(0.0, 1.0, n_x).unwrap();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let a = CoefficientField::sample("a", &[vec![Expr::parse(a_expr).unwrap()]], &d, tg).unwrap();
        ModelSpec::new(
            d,
            tg,
            DiffusionSpec::new(vec![1.0], a).unwrap(),
            boundary,
            Reaction::Combined {
                m: CoefficientField::constant(1, 1, d.n_nodes(), tg, &[0.0]),
            },
        )
        .unwrap()
    }

    #[test]
    fn dirichlet_quarter_stencil() {
        let op = assemble_diffusion(&model(3, BoundarySpec::dirichlet(), "1"), 0, 0).unwrap();
        assert_eq!(op.size(), 3);
        assert_eq!(op.diag, vec![-32.0; 3]);
        assert_eq!(&op.upper[..2], &[16.0, 16.0]);
        assert_eq!(&op.lower[1..], &[16.0, 16.0]);
        assert_eq!(op.lower[0], 0.0);
        assert_eq!(op.upper[2], 0.0);
    }

    #[test]
    fn neumann_conserves() {
        let m = model(9, BoundarySpec::neumann(), "1");
        let op = assemble_diffusion(&m, 0, 3).unwrap();
        let h2 = m.domain.h().powi(2);
        assert_eq!(op.size(), 11);
        for r in 1..10 {
            assert!((op.lower[r] * h2 - 1.0).abs() < 1e-12);
            assert!((op.diag[r] * h2 + 2.0).abs() < 1e-12);
        }
        assert!(op.row_sums().iter().all(|s| s.abs() < 1e-9));
        // variable coefficient still annihilates constants
        let op = assemble_diffusion(&model(9, BoundarySpec::neumann(), "1 + x*x + 0.5*sin(t)"), 0, 2).unwrap();
        assert!(op.row_sums().iter().all(|s| s.abs() < 1e-9));
    }

    #[test]
    fn robin_matches_ghost_point_algebra() {
        // Boundary row from eliminating u_{-1} in -(u_1 - u_{-1})/(2h) + b u_0 = 0
        // and substituting into (u_1 - 2u_0 + u_{-1})/h^2, with a = 1, b = 1.
        let n_x = 7;
        let neu = assemble_diffusion(&model(n_x, BoundarySpec::neumann(), "1"), 0, 0).unwrap();
        let rob = assemble_diffusion(
            &model(n_x, BoundarySpec::robin(RobinCoefficients::constant(1, 8, 1.0)), "1"),
            0,
            0,
        )
        .unwrap();
        let h = 1.0 / (n_x as f64 + 1.0);
        let b = 1.0;
        // u_{-1} = u_1 - 2 h b u_0  =>  row = (2 u_1 - 2 u_0 - 2 h b u_0) / h^2
        let ghost_diag = (-2.0 - 2.0 * h * b) / (h * h);
        let ghost_off = 2.0 / (h * h);
        assert!((rob.diag[0] - ghost_diag).abs() < 1e-9);
        assert!((rob.upper[0] - ghost_off).abs() < 1e-9);
        assert!((rob.diag[0] - (neu.diag[0] - 2.0 * b / h)).abs() < 1e-9);
        let last = n_x + 1;
        assert!((rob.diag[last] - ghost_diag).abs() < 1e-9);
        assert!((rob.lower[last] - ghost_off).abs() < 1e-9);
        for r in 1..last {
            assert_eq!(rob.diag[r], neu.diag[r]);
        }
    }

    #[test]
    fn off_diagonals_nonnegative() {
        for bc in [
            BoundarySpec::dirichlet(),
            BoundarySpec::neumann(),
            BoundarySpec::robin(RobinCoefficients::constant(1, 8, 2.5)),
        ] {
            let op = assemble_diffusion(&model(12, bc, "2 + cos(3*x)"), 0, 5).unwrap();
            assert!(op.lower.iter().chain(&op.upper).all(|&v| v >= 0.0));
            assert!(op.row_sums().iter().all(|&s| s <= 1e-9));
        }
    }

    #[test]
    fn dirichlet_first_eigenvalue_converges_to_pi_squared() {
        let pi2 = std::f64::consts::PI.powi(2);
        let mut errs = Vec::new();
        for n_x in [15, 31, 63] {
            let op = assemble_diffusion(&model(n_x, BoundarySpec::dirichlet(), "1"), 0, 0).unwrap();
            let eig = (-op.to_dense()).symmetric_eigenvalues();
            let smallest = eig.iter().copied().fold(f64::INFINITY, f64::min);
            errs.push((smallest - pi2).abs());
        }
        // O(h^2): halving h divides the error by ~4
        assert!(errs[0] / errs[1] > 3.8 && errs[1] / errs[2] > 3.8, "{errs:?}");
        assert!(errs[2] < 2e-3);
    }
}
