use super::{ConicProgram, Relation};

/// Constraint residuals of a point, computed directly from the program data.
#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    /// Largest violation of any linear row.
    pub linear: f64,
    /// Largest violation of any variable bound.
    pub bounds: f64,
    /// Smallest cone gap (negative means violated). `+inf` without cones.
    pub cone_min: f64,
    /// Largest distance of a binary from {0, 1}.
    pub integrality: f64,
    pub cone_gaps: Vec<f64>,
}

impl Residuals {
    pub fn feasible(&self, linear_tol: f64, cone_tol: f64) -> bool {
        self.linear <= linear_tol && self.bounds <= linear_tol && self.cone_min >= -cone_tol
    }
}

pub fn evaluate(prog: &ConicProgram, x: &[f64]) -> Residuals {
    assert_eq!(x.len(), prog.num_vars(), "point has wrong dimension");
    let linear = prog
        .rows()
        .iter()
        .map(|row| {
            let lhs = row.activity(x);
            match row.relation {
                Relation::Le => (lhs - row.rhs).max(0.0),
                Relation::Ge => (row.rhs - lhs).max(0.0),
                Relation::Eq => (lhs - row.rhs).abs(),
            }
        })
        .fold(0.0, f64::max);
    let bounds = prog
        .variables()
        .iter()
        .zip(x)
        .map(|(v, &xi)| (v.lb - xi).max(xi - v.ub).max(0.0))
        .fold(0.0, f64::max);
    let integrality = prog
        .binaries()
        .iter()
        .map(|v| (x[v.0] - x[v.0].round()).abs())
        .fold(0.0, f64::max);
    let cone_gaps: Vec<f64> = prog
        .cones()
        .iter()
        .map(|c| {
            let gap = c.cone.gap(x);
            match &c.cone {
                super::Cone::Rotated { u, w, .. } => gap.min(x[u.0]).min(x[w.0]),
                super::Cone::Standard { .. } => gap,
            }
        })
        .collect();
    let cone_min = cone_gaps.iter().copied().fold(f64::INFINITY, f64::min);
    Residuals {
        linear,
        bounds,
        cone_min,
        integrality,
        cone_gaps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residuals_of_simple_program() {
        let mut p = ConicProgram::new();
        let u = p.continuous("u", 0.0, 10.0).unwrap();
        let w = p.continuous("w", 0.0, 10.0).unwrap();
        let y = p.continuous("y", -10.0, 10.0).unwrap();
        p.add_rotated_cone("c", u, w, &[y]).unwrap();
        p.add_linear("r", &[(u, 1.0), (w, 1.0)], Relation::Eq, 3.0)
            .unwrap();
        let r = evaluate(&p, &[1.0, 2.0, 1.0]);
        assert_eq!(r.linear, 0.0);
        assert_eq!(r.cone_gaps, vec![1.0]);
        let r = evaluate(&p, &[1.0, 1.0, 2.0]);
        assert_eq!(r.linear, 1.0);
        assert_eq!(r.cone_min, -3.0);
        assert!(!r.feasible(1e-7, 1e-7));
    }
}
