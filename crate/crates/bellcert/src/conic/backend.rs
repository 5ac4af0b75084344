//! Clarabel adapter: lowers a [`ConicProblem`](super::ConicProblem) to the
//! solver's `min q'x  s.t.  Ax + s = b, s in K` form.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, ExponentialConeT, IPSolver, NonnegativeConeT,
    PSDTriangleConeT, SolverStatus, SupportedConeT, ZeroConeT,
};

use crate::hypothesis::AffExpr;

use super::{ConicBackend, ConicProblem, ConicSolution, SolveStatus};

/// The default conic backend (interior point, native exponential and PSD
/// cone support).
#[derive(Debug, Clone, Default)]
pub struct ClarabelBackend {
    /// Tightens convergence tolerances (more iterations) for bound
    /// computations that are compared against analytic values.
    pub high_accuracy: bool,
}

impl ClarabelBackend {
    pub fn high_accuracy() -> Self {
        Self { high_accuracy: true }
    }
}

struct RowBuf {
    rows: usize,
    b: Vec<f64>,
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
}

impl RowBuf {
    fn new() -> Self {
        Self {
            rows: 0,
            b: Vec::new(),
            i: Vec::new(),
            j: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Emits one row `s = b - Ax` holding the expression, scaled.
    fn push(&mut self, e: &AffExpr, scale: f64) {
        let mut e = e.clone();
        e.compress();
        self.b.push(scale * e.constant);
        for &(col, c) in &e.terms {
            self.i.push(self.rows);
            self.j.push(col);
            self.v.push(-scale * c);
        }
        self.rows += 1;
    }
}

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, p: &ConicProblem) -> ConicSolution {
        let mut buf = RowBuf::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

        if !p.zero.is_empty() {
            for e in &p.zero {
                buf.push(e, 1.0);
            }
            cones.push(ZeroConeT(p.zero.len()));
        }
        if !p.nonneg.is_empty() {
            for e in &p.nonneg {
                buf.push(e, 1.0);
            }
            cones.push(NonnegativeConeT(p.nonneg.len()));
        }
        for triple in &p.exp {
            for e in triple {
                buf.push(e, 1.0);
            }
            cones.push(ExponentialConeT());
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        for blk in &p.psd {
            // Scaled upper triangle, column-major.
            for c in 0..blk.dim {
                for r in 0..=c {
                    let scale = if r == c { 1.0 } else { sqrt2 };
                    buf.push(&blk.entries[r * blk.dim + c], scale);
                }
            }
            cones.push(PSDTriangleConeT(blk.dim));
        }

        let a = CscMatrix::new_from_triplets(buf.rows, p.n_vars, buf.i, buf.j, buf.v);
        let p_mat = CscMatrix::zeros((p.n_vars, p.n_vars));
        let verbose = std::env::var_os("BELLCERT_SOLVER_VERBOSE").is_some();
        let mut builder = DefaultSettingsBuilder::default();
        builder.verbose(verbose).max_iter(200);
        if self.high_accuracy {
            builder
                .max_iter(500)
                .tol_gap_abs(1e-10)
                .tol_gap_rel(1e-10)
                .tol_feas(1e-10);
        }
        let settings = builder.build().expect("static settings are valid");

        let mut solver = match DefaultSolver::new(&p_mat, &p.objective, &a, &buf.b, &cones, settings)
        {
            Ok(s) => s,
            Err(e) => {
                return ConicSolution {
                    status: SolveStatus::Failed(format!("problem assembly: {e:?}")),
                    objective: f64::NAN,
                    x: vec![f64::NAN; p.n_vars],
                }
            }
        };
        solver.solve();

        let status = match solver.solution.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::AlmostOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            other => SolveStatus::Failed(format!("{other:?}")),
        };
        ConicSolution {
            status,
            objective: solver.solution.obj_val,
            x: solver.solution.x.clone(),
        }
    }
}
