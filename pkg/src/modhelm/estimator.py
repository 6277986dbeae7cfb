"""scikit-learn style wrapper around :func:`modhelm.solver.solve`."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .postprocess import eval_field
from .solver import ProblemSpec, solve


class ModifiedHelmholtzSolver(BaseEstimator):
    """Boundary-integral solver for ``u - alpha^2 Lap u = 0``.

    ``fit(domain, boundary_data)`` solves for the layer density; the domain
    plays the role of ``X`` and the boundary data that of ``y``.
    ``predict(points)`` evaluates the field, NaN outside the domain.
    """

    def __init__(self, alpha=1.0, kind="dirichlet", quad_order=8, gmres_tol=1e-11,
                 backend="dense", fmm_tol=1e-12, threads=1, max_iter=500, restart=None):
        self.alpha = alpha
        self.kind = kind
        self.quad_order = quad_order
        self.gmres_tol = gmres_tol
        self.backend = backend
        self.fmm_tol = fmm_tol
        self.threads = threads
        self.max_iter = max_iter
        self.restart = restart

    def fit(self, domain, boundary_data):
        spec = ProblemSpec(domain, self.alpha, self.kind, boundary_data,
                           quad_order=self.quad_order, gmres_tol=self.gmres_tol,
                           backend=self.backend, fmm_tol=self.fmm_tol, threads=self.threads,
                           max_iter=self.max_iter, restart=self.restart)
        self.solution_ = solve(spec)
        self.density_ = self.solution_.density
        self.n_iter_ = self.solution_.iterations
        return self

    def predict(self, points):
        check_is_fitted(self, "solution_")
        return self.evaluate(points).values

    def evaluate(self, points):
        """Full :class:`~modhelm.postprocess.FieldGrid` including the masks."""
        check_is_fitted(self, "solution_")
        return eval_field(self.solution_, np.asarray(points, dtype=float))
