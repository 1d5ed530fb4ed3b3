from mhessian.solvers.dirichlet import (
    DivergenceError,
    SolveInfo,
    dirichlet_solve,
    dirichlet_solve_grid,
    dirichlet_solve_radial,
)
from mhessian.solvers.eigen import (
    EigenResult,
    eigen_inverse_iteration,
    eigen_rayleigh_descent,
    eigen_residual,
)
from mhessian.solvers.runlog import RunLog
from mhessian.solvers.exponents import ExponentRecord, compute_exponents, holder_condition, p_star
from mhessian.solvers.semilinear import (
    HReport,
    HypothesisError,
    SemilinearResult,
    check_H_hypotheses,
    solve_semilinear,
)
