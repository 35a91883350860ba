"""Classical inference for zero-noise extrapolation.

A factory records ``(scale factor, expectation value)`` pairs, decides which
scale factor to evaluate next and extrapolates the data to scale factor 0.
Factories only ever see numbers; nothing here knows about circuits.
"""

from __future__ import annotations

import copy
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np


class FactoryError(Exception):
    """Base class for inference failures."""


class Exhausted(FactoryError):
    pass


class ScaleMismatch(FactoryError):
    pass


class InsufficientData(FactoryError):
    pass


class DegenerateFit(FactoryError):
    pass


class SingularSystem(DegenerateFit):
    pass


class NonConvergence(FactoryError):
    pass


@dataclass
class FitDiagnostics:
    """Summary of the fit behind a zero-noise estimate.

    ``reduced_chi2`` is ``residual_norm**2 / (n - k)`` for ``n`` points and
    ``k`` model parameters and ``stderr`` the matching standard error of the
    intercept; both are None when the model interpolates (``n == k``).
    """

    params: list[float]
    residual_norm: float
    reduced_chi2: float | None
    stderr: float | None
    extrapolation_only: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


class Extrapolation(NamedTuple):
    value: float
    diagnostics: FitDiagnostics


# ---------------------------------------------------------------------------
# fitters
# ---------------------------------------------------------------------------


def fit_polynomial(xs: Sequence[float], ys: Sequence[float], order: int) -> np.ndarray:
    """Least-squares polynomial coefficients, lowest degree first.

    Raises:
        SingularSystem: fewer than ``order + 1`` distinct abscissae.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if order < 0:
        raise ValueError(f"order must be non-negative, got {order}")
    if x.shape != y.shape:
        raise ValueError("xs and ys must have equal length")
    if len(np.unique(x)) < order + 1:
        raise SingularSystem(
            f"degree-{order} fit needs {order + 1} distinct points, got {len(np.unique(x))}"
        )
    vander = np.vander(x, order + 1, increasing=True)
    # column scaling keeps the normal matrix well conditioned for larger x
    norms = np.linalg.norm(vander, axis=0)
    coeffs, _, rank, _ = np.linalg.lstsq(vander / norms, y, rcond=None)
    if rank < order + 1:
        raise SingularSystem(f"rank-deficient Vandermonde system (rank {rank})")
    return coeffs / norms


def richardson_weights(xs: Sequence[float], at: float = 0.0) -> np.ndarray:
    """Weights ``w`` with ``p(at) = w @ ys`` for the interpolant through ``xs``.

    Uses the barycentric form; ``at`` must not coincide with a node.
    """
    x = np.asarray(xs, dtype=float)
    if len(np.unique(x)) != len(x):
        raise DegenerateFit("Richardson extrapolation needs distinct scale factors")
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    terms = bary / (at - x)
    return terms / np.sum(terms)


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    p0: Sequence[float],
    max_iter: int = 200,
    xtol: float = 1e-10,
) -> tuple[np.ndarray, bool]:
    """Minimizes ``|residual(p)|^2``; returns ``(params, converged)``.

    Converged means the last accepted step was shorter than
    ``xtol * (|p| + xtol)``, the residual vanished, or no damping level
    produces a decrease any more.
    """
    p = np.asarray(p0, dtype=float)
    r = residual(p)
    cost = float(r @ r)
    mu = 1e-3
    for _ in range(max_iter):
        if cost == 0.0:
            return p, True
        J = jacobian(p)
        grad = J.T @ r
        A = J.T @ J
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1e-12 * max(float(np.max(diag)), 1.0)
        while True:
            step = np.linalg.lstsq(A + mu * np.diag(diag), -grad, rcond=None)[0]
            p_new = p + step
            r_new = residual(p_new)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                mu = max(mu / 3.0, 1e-15)
                break
            mu *= 4.0
            if mu > 1e16:
                return p, True
        small = np.linalg.norm(step) <= xtol * (np.linalg.norm(p) + xtol)
        p, r, cost = p_new, r_new, cost_new
        if small:
            return p, True
    return p, False


def _exp_model(x: np.ndarray, a: float, b: float, c: float) -> np.ndarray:
    return a + b * np.exp(-c * x)


def _exp_jacobian(x: np.ndarray, b: float, c: float) -> np.ndarray:
    e = np.exp(-c * x)
    return np.column_stack([np.ones_like(x), e, -b * x * e])


def _shared_sign(values: np.ndarray) -> float | None:
    if np.all(values > 0):
        return 1.0
    if np.all(values < 0):
        return -1.0
    return None


def _fit_exp_known(x: np.ndarray, y: np.ndarray, a: float) -> tuple[float, float]:
    shifted = y - a
    sign = _shared_sign(shifted)
    if sign is not None:
        intercept, slope = fit_polynomial(x, np.log(sign * shifted), 1)
        return sign * math.exp(intercept), -slope
    # mixed signs: nonlinear fit of (b, c) with the asymptote pinned
    start = [float(shifted[np.argmax(np.abs(shifted))]), 1.0]
    params, ok = levenberg_marquardt(
        lambda p: _exp_model(x, a, p[0], p[1]) - y,
        lambda p: _exp_jacobian(x, p[0], p[1])[:, 1:],
        start,
    )
    if not ok or not np.all(np.isfinite(params)):
        raise DegenerateFit(
            "shifted values change sign and the nonlinear fallback did not converge"
        )
    return float(params[0]), float(params[1])


def _linear_ab(x: np.ndarray, y: np.ndarray, c: float) -> tuple[np.ndarray, float]:
    design = np.column_stack([np.ones_like(x), np.exp(-c * x)])
    ab = np.linalg.lstsq(design, y, rcond=None)[0]
    res = design @ ab - y
    return ab, float(res @ res)


def _fit_exp_free(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    def residual(p):
        return _exp_model(x, *p) - y

    def jacobian(p):
        return _exp_jacobian(x, p[1], p[2])

    first = y[np.argmin(x)]
    decreasing = first >= y[np.argmax(x)]
    a0 = float(np.min(y) if decreasing else np.max(y))
    starts = [np.array([a0, first - a0, 1.0])]
    grid = np.round(np.arange(1, 31) * 0.1, 10)
    best_c = min(grid, key=lambda c: _linear_ab(x, y, c)[1])
    starts.append(np.append(_linear_ab(x, y, best_c)[0], best_c))

    best, best_cost = None, np.inf
    for start in starts:
        params, ok = levenberg_marquardt(residual, jacobian, start)
        res = residual(params)
        cost = float(res @ res)
        if ok and np.all(np.isfinite(params)) and cost < best_cost:
            best, best_cost = params, cost
    if best is None:
        raise NonConvergence("exponential fit exceeded its iteration budget")
    return float(best[0]), float(best[1]), float(best[2])


def fit_exponential(
    xs: Sequence[float], ys: Sequence[float], asymptote: float | None = None
) -> tuple[float, float, float]:
    """Fits ``y = a + b * exp(-c * x)`` and returns ``(a, b, c)``.

    With a known ``asymptote`` (``a``) the fit is linear in ``log|y - a|``;
    otherwise all three parameters are found by Levenberg-Marquardt, started
    from a data-driven guess and from the best point of a grid over ``c``.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    n_params = 2 if asymptote is not None else 3
    if len(np.unique(x)) < 2 or len(x) < n_params:
        raise InsufficientData(f"exponential fit needs {n_params} points, 2 distinct")
    if asymptote is not None:
        b, c = _fit_exp_known(x, y, float(asymptote))
        return float(asymptote), b, c
    return _fit_exp_free(x, y)


def _stderr(jac: np.ndarray, grad: np.ndarray, chi2: float | None) -> float | None:
    if chi2 is None:
        return None
    cov = np.linalg.pinv(jac.T @ jac) * chi2
    return float(math.sqrt(max(float(grad @ cov @ grad), 0.0)))


def _diagnostics(
    y: np.ndarray, fitted: np.ndarray, params, jac: np.ndarray | None, grad
) -> FitDiagnostics:
    res = fitted - y
    n, k = len(y), len(params)
    chi2 = float(res @ res) / (n - k) if n > k else None
    stderr = _stderr(jac, np.asarray(grad, dtype=float), chi2) if jac is not None else None
    return FitDiagnostics(
        params=[float(p) for p in params],
        residual_norm=float(np.linalg.norm(res)),
        reduced_chi2=chi2,
        stderr=stderr,
    )


# ---------------------------------------------------------------------------
# factories
# ---------------------------------------------------------------------------


class Factory(ABC):
    """Stateful inference: schedule -> push -> reduce.

    Subclasses implement :meth:`_schedule` (the next scale factor, or None
    when done) and :meth:`extrapolate`.
    """

    #: number of free model parameters; reduce needs at least this many points
    num_params: int = 1

    def __init__(self) -> None:
        self._scales: list[float] = []
        self._values: list[float] = []
        self._pending: float | None = None

    @abstractmethod
    def _schedule(self) -> float | None:
        ...

    @abstractmethod
    def extrapolate(self, xs: np.ndarray, ys: np.ndarray) -> Extrapolation:
        """Fits the model to the data and evaluates it at scale factor 0."""

    def get_scale_factors(self) -> list[float]:
        return list(self._scales)

    def get_expectation_values(self) -> list[float]:
        return list(self._values)

    @property
    def history(self) -> tuple[list[float], list[float]]:
        return self.get_scale_factors(), self.get_expectation_values()

    def is_done(self) -> bool:
        return self._schedule() is None

    def next_scale(self) -> float:
        if self._pending is None:
            nxt = self._schedule()
            if nxt is None:
                raise Exhausted(f"{type(self).__name__} has no more scale factors")
            self._pending = float(nxt)
        return self._pending

    def push(self, scale: float, value: float) -> None:
        if self._pending is None or scale != self._pending:
            raise ScaleMismatch(f"pushed scale {scale}, expected {self._pending}")
        self._scales.append(float(scale))
        self._values.append(float(value))
        self._pending = None

    def fresh(self) -> "Factory":
        """Returns a copy with the same settings and an empty history."""
        new = copy.deepcopy(self)
        new._scales, new._values, new._pending = [], [], None
        if hasattr(new, "_cache"):
            new._cache = None
        return new

    def _data(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self._scales), np.array(self._values)

    def reduce(self) -> Extrapolation:
        """Returns the zero-noise estimate and its fit diagnostics."""
        if not self.is_done():
            raise InsufficientData(f"{type(self).__name__} has not collected all its data")
        xs, ys = self._data()
        if len(np.unique(xs)) < 2:
            raise InsufficientData("need at least two distinct scale factors")
        if len(xs) < self.num_params:
            raise InsufficientData(
                f"{type(self).__name__} needs {self.num_params} points, got {len(xs)}"
            )
        if np.all(ys == ys[0]):
            v = float(ys[0])
            return Extrapolation(v, FitDiagnostics([v], 0.0, 0.0, 0.0))
        value, diag = self.extrapolate(xs, ys)
        if not np.isfinite(value):
            raise DegenerateFit(f"non-finite zero-noise estimate {value}")
        return Extrapolation(float(value), diag)


class BatchedFactory(Factory):
    """A factory evaluated at a fixed list of scale factors."""

    def __init__(self, scale_factors: Sequence[float]) -> None:
        super().__init__()
        scales = [float(s) for s in scale_factors]
        if not scales:
            raise ValueError("at least one scale factor is required")
        if any(not np.isfinite(s) or s < 1 for s in scales):
            raise ValueError(f"scale factors must be >= 1, got {scales}")
        self.scale_factors = scales

    def _schedule(self) -> float | None:
        n = len(self._scales)
        return self.scale_factors[n] if n < len(self.scale_factors) else None


class PolyFactory(BatchedFactory):
    """Least-squares polynomial of the given order."""

    def __init__(self, scale_factors: Sequence[float], order: int) -> None:
        super().__init__(scale_factors)
        if order < 0:
            raise ValueError(f"order must be non-negative, got {order}")
        if order >= len(self.scale_factors):
            raise InsufficientData(
                f"order {order} needs more than {len(self.scale_factors)} scale factors"
            )
        self.order = order
        self.num_params = order + 1

    def extrapolate(self, xs, ys):
        coeffs = fit_polynomial(xs, ys, self.order)
        vander = np.vander(xs, self.order + 1, increasing=True)
        grad = np.zeros(self.order + 1)
        grad[0] = 1.0
        return Extrapolation(float(coeffs[0]), _diagnostics(ys, vander @ coeffs, coeffs, vander, grad))


class LinearFactory(PolyFactory):
    def __init__(self, scale_factors: Sequence[float]) -> None:
        super().__init__(scale_factors, order=1)


class RichardsonFactory(BatchedFactory):
    """Exact interpolation through all points (or the chosen ``points``).

    ``points`` lists indices into ``scale_factors``; ``"ends"`` picks the
    first, middle and last one.
    """

    def __init__(self, scale_factors: Sequence[float], points: Sequence[int] | str | None = None):
        super().__init__(scale_factors)
        n = len(self.scale_factors)
        if points == "ends":
            points = sorted({0, n // 2, n - 1})
        self.points = None if points is None else [int(i) for i in points]
        if self.points is not None and any(not 0 <= i < n for i in self.points):
            raise ValueError(f"point indices {self.points} out of range for {n} scale factors")
        self.num_params = len(self.points) if self.points is not None else n

    def _data(self):
        xs, ys = super()._data()
        if self.points is None:
            return xs, ys
        return xs[self.points], ys[self.points]

    def extrapolate(self, xs, ys):
        weights = richardson_weights(xs)
        return Extrapolation(float(weights @ ys), _diagnostics(ys, ys, weights, None, None))


class ExpFactory(BatchedFactory):
    """``a + b * exp(-c * lam)``; ``asymptote`` pins ``a`` when known."""

    def __init__(self, scale_factors: Sequence[float], asymptote: float | None = None):
        super().__init__(scale_factors)
        self.asymptote = asymptote
        self.num_params = 2 if asymptote is not None else 3

    def extrapolate(self, xs, ys):
        return _exp_extrapolation(xs, ys, self.asymptote)


def _exp_extrapolation(xs, ys, asymptote) -> Extrapolation:
    a, b, c = fit_exponential(xs, ys, asymptote)
    jac = _exp_jacobian(xs, b, c)
    fitted = _exp_model(xs, a, b, c)
    if asymptote is None:
        return Extrapolation(a + b, _diagnostics(ys, fitted, [a, b, c], jac, [1.0, 1.0, 0.0]))
    return Extrapolation(a + b, _diagnostics(ys, fitted, [b, c], jac[:, 1:], [1.0, 0.0]))


class PolyExpFactory(BatchedFactory):
    """``a + s * exp(z(lam))`` with ``z`` a polynomial of the given order.

    ``s`` is +1 or -1. With a known asymptote ``z`` is a polynomial fit of
    ``log|y - a|``; otherwise ``a`` and ``z`` are fit jointly.
    """

    def __init__(self, scale_factors: Sequence[float], order: int, asymptote: float | None = None):
        super().__init__(scale_factors)
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if order > len(self.scale_factors) - 2:
            raise InsufficientData(
                f"order {order} needs at least {order + 2} scale factors, "
                f"got {len(self.scale_factors)}"
            )
        self.order = order
        self.asymptote = asymptote
        self.num_params = order + 1 + (asymptote is None)

    def _model(self, xs, a, sign, z):
        return a + sign * np.exp(np.vander(xs, self.order + 1, increasing=True) @ z)

    def extrapolate(self, xs, ys):
        vander = np.vander(xs, self.order + 1, increasing=True)
        if self.asymptote is not None:
            a = float(self.asymptote)
            sign = _shared_sign(ys - a)
            if sign is not None:
                z = fit_polynomial(xs, np.log(sign * (ys - a)), self.order)
            else:
                sign = 1.0 if np.mean(ys - a) >= 0 else -1.0
                z0 = np.zeros(self.order + 1)
                z0[0] = math.log(max(float(np.max(np.abs(ys - a))), 1e-12))
                z, ok = levenberg_marquardt(
                    lambda p: a + sign * np.exp(vander @ p) - ys,
                    lambda p: sign * np.exp(vander @ p)[:, None] * vander,
                    z0,
                )
                if not ok:
                    raise DegenerateFit("shifted values change sign and the fallback failed")
            e = np.exp(vander @ z)
            jac = sign * e[:, None] * vander
            grad = np.zeros(self.order + 1)
            grad[0] = sign * math.exp(z[0])
            value = a + sign * math.exp(z[0])
            return Extrapolation(value, _diagnostics(ys, a + sign * e, z, jac, grad))

        a0, b0, c0 = fit_exponential(xs, ys)
        sign = 1.0 if b0 >= 0 else -1.0
        p0 = np.zeros(self.order + 2)
        p0[0] = a0
        p0[1] = math.log(max(abs(b0), 1e-12))
        p0[2] = -c0

        def residual(p):
            return p[0] + sign * np.exp(vander @ p[1:]) - ys

        def jacobian(p):
            e = sign * np.exp(vander @ p[1:])
            return np.column_stack([np.ones_like(xs), e[:, None] * vander])

        params, ok = levenberg_marquardt(residual, jacobian, p0)
        if not ok or not np.all(np.isfinite(params)):
            raise NonConvergence("poly-exponential fit exceeded its iteration budget")
        value = params[0] + sign * math.exp(params[1])
        grad = np.zeros(self.order + 2)
        grad[0] = 1.0
        grad[1] = sign * math.exp(params[1])
        fitted = residual(params) + ys
        return Extrapolation(value, _diagnostics(ys, fitted, params, jacobian(params), grad))


class AdaExpFactory(Factory):
    """Exponential extrapolation with adaptively chosen scale factors.

    Evaluates scale factor 1, then ``scale_factor``, then for each further
    step the point of the grid ``1.0, 1.1, ..., 2 * scale_factor + 1`` that
    minimizes the predicted variance of the fitted intercept (unit noise,
    current fit's Jacobian). Until the model can be fit, the grid's last
    point is used.
    """

    def __init__(self, scale_factor: float = 2.0, steps: int = 5, asymptote: float | None = None):
        super().__init__()
        if not scale_factor > 1:
            raise ValueError(f"scale_factor must be > 1, got {scale_factor}")
        if steps < 3:
            raise ValueError(f"steps must be >= 3, got {steps}")
        self.scale_factor = float(scale_factor)
        self.steps = int(steps)
        self.asymptote = asymptote
        self.num_params = 2 if asymptote is not None else 3
        self.max_scale = 2 * self.scale_factor + 1
        n_grid = int(math.floor((self.max_scale - 1.0) / 0.1 + 1e-9))
        self.grid = [round(1.0 + 0.1 * k, 10) for k in range(n_grid + 1)]
        self._cache: tuple[int, float | None] | None = None

    def _schedule(self) -> float | None:
        n = len(self._scales)
        if self._cache is None or self._cache[0] != n:
            self._cache = (n, self._choose(n))
        return self._cache[1]

    def _choose(self, n: int) -> float | None:
        if n >= self.steps:
            return None
        if n == 0:
            return 1.0
        if n == 1:
            return self.scale_factor
        xs, ys = self._data()
        if n < self.num_params or np.all(ys == ys[0]):
            return self.max_scale
        try:
            a, b, c = fit_exponential(xs, ys, self.asymptote)
        except FactoryError:
            return self.max_scale
        return self._best_next(xs, b, c)

    def _best_next(self, xs: np.ndarray, b: float, c: float) -> float:
        grad = np.array([1.0, 1.0, 0.0]) if self.asymptote is None else np.array([1.0, 0.0])
        best, best_var = self.max_scale, np.inf
        for lam in self.grid:
            x = np.append(xs, lam)
            jac = _exp_jacobian(x, b, c)
            if self.asymptote is not None:
                jac = jac[:, 1:]
            var = float(grad @ np.linalg.pinv(jac.T @ jac) @ grad)
            if var < best_var * (1 - 1e-12):
                best, best_var = lam, var
        return best

    def extrapolate(self, xs, ys):
        return _exp_extrapolation(xs, ys, self.asymptote)


def parse_factory(text: str, scale_factors: Sequence[float]) -> Factory:
    """Builds a factory from its command-line form.

    Accepted: ``linear``, ``richardson``, ``richardson:ends``, ``poly:<d>``,
    ``exp``, ``exp:<asymptote>``, ``polyexp:<d>[:<asymptote>]`` and
    ``adaexp:<scale>,<steps>[:<asymptote>]``.
    """
    name, _, rest = text.strip().partition(":")
    args = rest.split(":") if rest else []
    try:
        if name == "linear" and not args:
            return LinearFactory(scale_factors)
        if name == "richardson" and args in ([], ["ends"]):
            return RichardsonFactory(scale_factors, "ends" if args else None)
        if name == "poly" and len(args) == 1:
            return PolyFactory(scale_factors, int(args[0]))
        if name == "exp" and len(args) <= 1:
            return ExpFactory(scale_factors, float(args[0]) if args else None)
        if name == "polyexp" and len(args) in (1, 2):
            asym = float(args[1]) if len(args) == 2 else None
            return PolyExpFactory(scale_factors, int(args[0]), asym)
        if name == "adaexp" and len(args) in (1, 2):
            scale, steps = args[0].split(",")
            asym = float(args[1]) if len(args) == 2 else None
            return AdaExpFactory(float(scale), int(steps), asym)
    except ValueError as exc:
        raise ValueError(f"factory {text!r}: {exc}") from None
    raise ValueError(f"unrecognized factory {text!r}")
