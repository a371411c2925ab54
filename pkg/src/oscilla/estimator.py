"""scikit-learn style front end.

:class:`HomogenizedCorrector` fits the eps-independent cell problems and the
homogenized solution once; ``predict`` then evaluates the truncation W1 or W2
at thin-domain points, which composes with pipelines and model-selection
utilities that only expect ``fit``/``predict``/``get_params``.
"""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .cell import solve_cell
from .correctors import TruncationField, corrector_terms, eval_truncation, grad_truncation
from .fem2d import solve_neumann
from .geometry import PeriodicProfile, SourceFunction
from .homogenized1d import solve_w0
from .mesh import build_thin_mesh, period_count


def _check_points(X):
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != 2:
        raise ValueError(f"expected points with 2 columns (x1, x2), got {X.shape[1]}")
    return X


class HomogenizedCorrector(RegressorMixin, BaseEstimator):
    """Asymptotic approximation of the thin-domain solution.

    Parameters
    ----------
    profile : PeriodicProfile, default 2 + cos(2 pi y)
    source : SourceFunction, default cos(pi x)
    eps : float
        Scale of the thin domain; 1 / (eps * L) must be an integer.
    order : {0, 1, 2}
        0 predicts w0, 1 and 2 the first- and second-order truncations.
    m, n : int
        Cell mesh resolution (columns per period, layers).
    tol : float
        Relative CG tolerance of the cell solves.
    """

    def __init__(self, profile=None, source=None, eps=1 / 16, order=2, m=32, n=8, tol=1e-10):
        self.profile = profile
        self.source = source
        self.eps = eps
        self.order = order
        self.m = m
        self.n = n
        self.tol = tol

    def _profile(self):
        return PeriodicProfile(2.0, (1.0,), 1.0) if self.profile is None else self.profile

    def _source(self):
        return SourceFunction((0.0, 1.0)) if self.source is None else self.source

    def fit(self, X=None, y=None):
        """Solve the cell problems and the homogenized equation.

        ``X`` and ``y`` are ignored; they are accepted for API compatibility.
        """
        if self.order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {self.order!r}")
        profile = self._profile()
        period_count(self.eps, profile.period)
        self.cell_ = solve_cell(profile, self.m, self.n, tol=self.tol)
        self.r_ = self.cell_.r
        self.w0_ = solve_w0(self._source(), self.r_)
        self.diagnostics_ = dict(self.cell_.diagnostics)
        return self

    def _field(self, order):
        return TruncationField(order, self.cell_, self.w0_, self._profile(), float(self.eps))

    def predict(self, X):
        """W_order at the rows ``(x1, x2)`` of ``X``."""
        check_is_fitted(self, "cell_")
        X = _check_points(X)
        if self.order == 0:
            return self.w0_(X[:, 0])
        return eval_truncation(self._field(self.order), X[:, 0], X[:, 1])

    def predict_gradient(self, X):
        check_is_fitted(self, "cell_")
        X = _check_points(X)
        if self.order == 0:
            d1 = self.w0_.derivatives(X[:, 0])[1]
            return np.column_stack([d1, np.zeros_like(d1)])
        return grad_truncation(self._field(self.order), X[:, 0], X[:, 1])

    def transform(self, X):
        """Columns ``[w0, kappa, mu]`` at the given points."""
        check_is_fitted(self, "cell_")
        X = _check_points(X)
        kappa, mu = corrector_terms(self._field(2), X[:, 0], X[:, 1])
        return np.column_stack([self.w0_(X[:, 0]), kappa, mu])

    def reference_solution(self, tol=1e-8):
        """Solve the full thin-domain problem on the matching mesh.

        Returns the mesh nodes and nodal values, convenient as ``(X, y)`` for
        :meth:`score`.
        """
        check_is_fitted(self, "cell_")
        mesh = build_thin_mesh(self._profile(), float(self.eps), self.m, self.n)
        sol = solve_neumann(mesh, float(self.eps), self._source(), tol=tol)
        return mesh.nodes.copy(), sol.values
