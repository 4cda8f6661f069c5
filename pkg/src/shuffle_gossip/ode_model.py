"""Round-based replication and coverage under full connectivity.

Replication follows a logistic law,

    dx/dt = alpha * x * (1 - (n/c) x),      alpha = 2 (s/c) (c-s)/(n-s),

and coverage grows with the fraction of unseen nodes meeting a holder who
keep the copy until the round ends,

    dy/dt = 2 (s/c) (1 - (s/c)(n-c)/(n-s)) (1 - y) x(t).

Both start at 1/N. Closed forms are evaluated in a rearranged form that never
exponentiates a positive argument, so large t is safe.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from shuffle_gossip.analytic import optimal_s
from shuffle_gossip.params import ParameterError, ProtocolParams


def _check_domain(params: ProtocolParams) -> None:
    if not params.n > params.c:
        raise ParameterError(
            f"round-based model needs n > c ≥ s (n={params.n}, c={params.c}, s={params.s})")


def alpha(params: ProtocolParams) -> float:
    """Growth rate P(11|10) + P(11|01) with the simplified drop probability."""
    n, c, s = params.n, params.c, params.s
    return 2 * (s / c) * (c - s) / (n - s)


def coverage_rate(params: ProtocolParams) -> float:
    """2 (s/c)(1 - (s/c)(n-c)/(n-s)): unseen-node discovery rate per holder."""
    n, c, s = params.n, params.c, params.s
    return 2 * (s / c) * (1 - (s / c) * (n - c) / (n - s))


def beta(params: ProtocolParams) -> float:
    """Exponent of the coverage closed form.

    Fixed by requiring the closed form to solve the coverage equation:
    beta = rate / (alpha * n/c) = (c/n) (1 - (s/c)(n-c)/(n-s)) / ((c-s)/(n-s)).
    """
    _check_domain(params)
    n, c, s = params.n, params.c, params.s
    if s == c:
        return math.inf
    return (c / n) * (1 - (s / c) * (n - c) / (n - s)) / ((c - s) / (n - s))


def _degenerate(params: ProtocolParams) -> bool:
    _check_domain(params)
    if params.s == params.c:
        warnings.warn("s == c gives alpha = 0: the tracked item never replicates",
                      RuntimeWarning, stacklevel=3)
        return True
    return False


def replication_closed_form(params: ProtocolParams, t):
    """x(t) = 1 / ((N - n/c) e^{-alpha t} + n/c); accepts scalars or arrays."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("t must be non-negative")
    N = params.N
    if _degenerate(params):
        return _like(t, 1.0 / N)
    ratio = params.n / params.c
    out = 1.0 / ((N - ratio) * np.exp(-alpha(params) * t) + ratio)
    return out if out.ndim else float(out)


def coverage_closed_form(params: ProtocolParams, t):
    """y(t) = 1 - (N-1) N^(beta-1) ((N - n/c) + (n/c) e^{alpha t})^(-beta)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("t must be non-negative")
    N = params.N
    if _degenerate(params):
        return _like(t, 1.0 / N)
    a, b = alpha(params), beta(params)
    ratio = params.n / params.c
    # log of (N - n/c) + (n/c) e^{a t}, written as a t + log((N - n/c) e^{-a t} + n/c)
    log_base = a * t + np.log((N - ratio) * np.exp(-a * t) + ratio)
    log_tail = math.log(N - 1) + (b - 1) * math.log(N) - b * log_base
    out = 1.0 - np.exp(log_tail)
    return out if out.ndim else float(out)


def _like(t: np.ndarray, value: float):
    return np.full(t.shape, value) if t.ndim else value


def replication_rhs(params: ProtocolParams, x: float) -> float:
    return alpha(params) * x * (1 - params.n / params.c * x)


def replication_rhs_from_matrix(params: ProtocolParams, x: float) -> float:
    """The replication equation before substituting the simplified table.

    Duplication of a lone copy minus loss of one of two copies, using
    P(11|10) = P(11|01) = (s/c)(c-s)/(n-s) and
    P(10|11) = P(01|11) = (s/c)((n-c)/(n-s))((c-s)/c).
    """
    n, c, s = params.n, params.c, params.s
    dup = (s / c) * (c - s) / (n - s)
    loss = (s / c) * ((n - c) / (n - s)) * ((c - s) / c)
    return 2 * dup * (1 - x) * x - 2 * loss * x * x


def coverage_rhs(params: ProtocolParams, t: float, y: float) -> float:
    return coverage_rate(params) * (1 - y) * replication_closed_form(params, t)


def integrate_rk4(f: Callable[[float, np.ndarray], np.ndarray], y0, t_end: float,
                  step: float) -> tuple[np.ndarray, np.ndarray]:
    """Classic fixed-step fourth-order Runge-Kutta on [0, t_end]."""
    n_steps = int(round(t_end / step))
    if n_steps < 1 or not math.isclose(n_steps * step, t_end, rel_tol=1e-9):
        raise ValueError("t_end must be a positive multiple of step")
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    ts = np.linspace(0.0, t_end, n_steps + 1)
    ys = np.empty((n_steps + 1, y.size))
    ys[0] = y
    h = step
    for i in range(n_steps):
        t = ts[i]
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[i + 1] = y
    return ts, ys


def integrate_model(params: ProtocolParams, t_end: float,
                    step: float = 0.01) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate (x, y) jointly from (1/N, 1/N); returns t, x, y."""
    _check_domain(params)
    a = alpha(params)
    ratio = params.n / params.c
    rate = coverage_rate(params)

    def rhs(_t, state):
        x, y = state
        return np.array([a * x * (1 - ratio * x), rate * (1 - y) * x])

    ts, ys = integrate_rk4(rhs, [1 / params.N, 1 / params.N], t_end, step)
    return ts, ys[:, 0], ys[:, 1]


def fastest_convergence_s(n: int, c: int) -> float:
    """Root n - sqrt(n(n-c)) of c n = s (2n - s), where dx/ds vanishes."""
    if not n >= c >= 1:
        raise ParameterError(f"need 1 ≤ c ≤ n (c={c}, n={n})")
    return optimal_s(n, c)[0]


def replication_s_derivative(params: ProtocolParams, t: float) -> float:
    """Partial derivative of x(t) with respect to s, in closed form."""
    n, c, s, N = params.n, params.c, params.s, params.N
    k = alpha(params)
    e = math.exp(k * t)
    return (2 * e * (c * N - n) * (c * n + s * (s - 2 * n)) * t
            / ((c * N + (e - 1) * n) ** 2 * (n - s) ** 2))


def best_integer_s(n: int, c: int, N: int, t: float) -> int:
    """Integer s in [1, c] maximising x(t); ties go to the smaller s."""
    best, best_x = 1, -1.0
    for s in range(1, c + 1):
        params = ProtocolParams(n=n, c=c, s=s, N=N)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            x = replication_closed_form(params, t)
        if x > best_x:
            best, best_x = s, x
    return best


@dataclass(frozen=True)
class OdeSolution:
    params: ProtocolParams

    def __post_init__(self) -> None:
        _check_domain(self.params)

    @property
    def alpha(self) -> float:
        return alpha(self.params)

    @property
    def beta(self) -> float:
        return beta(self.params)

    def x(self, t):
        return replication_closed_form(self.params, t)

    def y(self, t):
        return coverage_closed_form(self.params, t)

    def trajectory(self, rounds: int) -> tuple[np.ndarray, np.ndarray]:
        t = np.arange(rounds + 1, dtype=float)
        return np.asarray(self.x(t), dtype=float), np.asarray(self.y(t), dtype=float)
