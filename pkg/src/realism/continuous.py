"""Continuous counterpart: diagonal Gaussian mixtures and gradient flows.

Densities are sub-normalized mixtures ``sum_n w_n N(mu_n, diag(var_n))``
with ``sum w_n <= 1``. Rescaling the weights shifts the continuous critic
``log S(x) - log P(x)`` by a constant and leaves its gradient unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import logsumexp

__all__ = [
    "GaussianMixtureDensity",
    "FlowState",
    "Trajectory",
    "log_density",
    "posterior_weighted_grad",
    "langevin_step",
    "langevin_chain",
    "deterministic_flow_step",
    "typicality_gradient",
    "realism_descent",
    "DIVERGENCE_NORM",
]

DIVERGENCE_NORM = 1e6
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class GaussianMixtureDensity:
    log_weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        lw = np.atleast_1d(np.asarray(self.log_weights, dtype=np.float64))
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        var = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if var.shape != mu.shape:
            var = np.broadcast_to(var, mu.shape).copy()
        if mu.shape[0] != lw.shape[0]:
            raise ValueError("one mean vector per component is required")
        if np.any(var <= 0) or not np.all(np.isfinite(var)):
            raise ValueError("variances must be positive and finite")
        if logsumexp(lw) > 1e-12:
            raise ValueError("mixture weights must sum to at most 1")
        for a in (lw, mu, var):
            a.setflags(write=False)
        object.__setattr__(self, "log_weights", lw)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @classmethod
    def from_components(cls, weights, means, variances) -> "GaussianMixtureDensity":
        with np.errstate(divide="ignore"):
            return cls(np.log(np.asarray(weights, dtype=np.float64)), means, variances)

    @classmethod
    def gaussian(cls, mean, variance) -> "GaussianMixtureDensity":
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        var = np.broadcast_to(np.asarray(variance, dtype=np.float64), mean.shape)
        return cls(np.zeros(1), mean[None, :], var[None, :])

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def _x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {x.shape[-1]}")
        return x

    def component_log_densities(self, x) -> np.ndarray:
        """``log N(x; mu_n, var_n)`` for each component (last axis)."""
        x = self._x(x)
        diff = x[..., None, :] - self.means
        with np.errstate(over="ignore"):
            return -0.5 * (np.sum(diff * diff / self.variances + np.log(self.variances), axis=-1) + self.dim * _LOG_2PI)

    def log_density(self, x) -> np.ndarray | float:
        out = logsumexp(self.log_weights + self.component_log_densities(x), axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def component_posterior(self, x) -> np.ndarray:
        """``P(n | x)`` proportional to ``w_n q_n(x)``."""
        joint = self.log_weights + self.component_log_densities(x)
        norm = logsumexp(joint, axis=-1, keepdims=True)
        if np.any(norm == -np.inf):
            raise ValueError("mixture density is numerically zero at x")
        return np.exp(joint - norm)

    def grad_log_density(self, x) -> np.ndarray:
        """Mixture score as the posterior-weighted sum of component scores."""
        x = self._x(x)
        post = self.component_posterior(x)
        scores = -(x[..., None, :] - self.means) / self.variances
        return np.sum(post[..., None] * scores, axis=-2)


@dataclass(frozen=True)
class FlowState:
    position: np.ndarray
    step: float
    t: int = 0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "position", pos)
        if self.step <= 0:
            raise ValueError("step size must be positive")


def log_density(q: GaussianMixtureDensity, x) -> float:
    return q.log_density(x)


def posterior_weighted_grad(q: GaussianMixtureDensity, x) -> np.ndarray:
    """``sum_n P(n|x) grad log q_n(x)``, which equals ``grad log sum_n w_n q_n(x)``."""
    return q.grad_log_density(x)


def _mala_log_q(to, frm, grad_frm, eps):
    # log density (up to a constant) of proposing `to` from `frm`
    d = to - frm - eps * grad_frm
    return -np.sum(d * d, axis=-1) / (4.0 * eps)


def langevin_step(
    p: GaussianMixtureDensity,
    state: FlowState,
    seed,
    *,
    metropolis: bool = False,
) -> tuple[FlowState, bool]:
    """One Langevin update ``x + eps * grad log p(x) + sqrt(2 eps) * eta``.

    With ``metropolis=True`` the proposal is accepted or rejected so that
    ``p`` is exactly stationary. Returns the new state and whether the move
    was accepted (always True without the correction).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = state.position
    eps = state.step
    g = p.grad_log_density(x)
    y = x + eps * g + math.sqrt(2.0 * eps) * rng.standard_normal(x.shape)
    accepted = True
    if metropolis:
        gy = p.grad_log_density(y)
        log_a = p.log_density(y) - p.log_density(x) + _mala_log_q(x, y, gy, eps) - _mala_log_q(y, x, g, eps)
        accepted = bool(math.log(rng.random()) < log_a)
        if not accepted:
            y = x
    return FlowState(y, eps, state.t + 1), accepted


def langevin_chain(
    p: GaussianMixtureDensity,
    x0,
    eps: float,
    n_steps: int,
    seed: int,
    *,
    metropolis: bool = True,
) -> tuple[np.ndarray, float]:
    """Run ``n_steps`` Langevin updates; returns the visited states and acceptance rate.

    All Gaussian noise is drawn up front, then all acceptance uniforms, from
    one generator seeded with ``seed``.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x0, dtype=np.float64).copy()
    d = x.shape[0]
    noise = rng.standard_normal((n_steps, d)) * math.sqrt(2.0 * eps)
    log_u = np.log(rng.random(n_steps))
    out = np.empty((n_steps, d))
    const = -0.5 * (np.sum(np.log(p.variances), axis=1) + d * _LOG_2PI) + p.log_weights
    out, accepted = _chain_kernel(
        x, eps, noise, log_u, const, np.ascontiguousarray(p.means), np.ascontiguousarray(p.variances), metropolis
    )
    return out, accepted / n_steps


@njit(cache=True)
def _logp_grad(z, const, mu, var, grad):
    k, d = mu.shape
    comp = np.empty(k)
    for n in range(k):
        acc = const[n]
        for j in range(d):
            diff = z[j] - mu[n, j]
            acc -= 0.5 * diff * diff / var[n, j]
        comp[n] = acc
    m = comp.max()
    s = 0.0
    for j in range(d):
        grad[j] = 0.0
    for n in range(k):
        w = math.exp(comp[n] - m)
        s += w
        for j in range(d):
            grad[j] -= w * (z[j] - mu[n, j]) / var[n, j]
    for j in range(d):
        grad[j] /= s
    return m + math.log(s)


@njit(cache=True)
def _chain_kernel(x0, eps, noise, log_u, const, mu, var, metropolis):
    n_steps, d = noise.shape
    out = np.empty((n_steps, d))
    x = x0.copy()
    gx = np.empty(d)
    gy = np.empty(d)
    y = np.empty(d)
    lx = _logp_grad(x, const, mu, var, gx)
    accepted = 0
    for i in range(n_steps):
        for j in range(d):
            y[j] = x[j] + eps * gx[j] + noise[i, j]
        ly = _logp_grad(y, const, mu, var, gy)
        if metropolis:
            fwd = 0.0
            bwd = 0.0
            for j in range(d):
                f = y[j] - x[j] - eps * gx[j]
                b = x[j] - y[j] - eps * gy[j]
                fwd += f * f
                bwd += b * b
            take = log_u[i] < ly - lx + (fwd - bwd) / (4.0 * eps)
        else:
            take = True
        if take:
            x[:] = y
            gx[:] = gy
            lx = ly
            accepted += 1
        out[i] = x
    return out, accepted


def deterministic_flow_step(
    p: GaussianMixtureDensity, q_t: GaussianMixtureDensity, state: FlowState
) -> FlowState:
    """``x + eps * (grad log p(x) - grad log q_t(x))``; works on particle arrays too."""
    x = state.position
    v = p.grad_log_density(x) - q_t.grad_log_density(x)
    return FlowState(x + state.step * v, state.step, state.t + 1)


def typicality_gradient(x) -> np.ndarray:
    """Gradient of ``(-log p(x) - H)^2`` for ``p(x)`` proportional to ``exp(-||x||^2)``.

    In ``d`` dimensions ``-log p(x) - H = ||x||^2 - d/2``, so the gradient is
    ``4 (||x||^2 - d/2) x``: always parallel to ``x``. Returns zeros at
    ``x = 0``.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    gap = np.sum(x * x, axis=-1, keepdims=True) - 0.5 * d
    return 4.0 * gap * x


@dataclass
class Trajectory:
    positions: np.ndarray
    u: np.ndarray
    log_p: np.ndarray
    log_s: np.ndarray
    diverged: bool = False
    steps: int = field(init=False)

    def __post_init__(self):
        self.steps = len(self.positions) - 1


def realism_descent(
    P: GaussianMixtureDensity,
    S: GaussianMixtureDensity,
    x0,
    eps: float = 1e-3,
    steps: int = 1000,
) -> Trajectory:
    """Gradient descent on ``U(x) = log S(x) - log P(x)``.

    Stops early with ``diverged=True`` once ``||x||`` exceeds 1e6 or the
    iterate leaves the region where both densities are representable.
    """
    if P.dim != S.dim:
        raise ValueError("P and S must have the same dimension")
    x = np.asarray(x0, dtype=np.float64).copy()
    positions = [x.copy()]
    lp = [P.log_density(x)]
    ls = [S.log_density(x)]
    diverged = False
    for _ in range(steps):
        try:
            g = S.grad_log_density(x) - P.grad_log_density(x)
        except ValueError:
            diverged = True
            break
        x = x - eps * g
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            diverged = True
            break
        positions.append(x.copy())
        lp.append(P.log_density(x))
        ls.append(S.log_density(x))
    lp_a = np.asarray(lp)
    ls_a = np.asarray(ls)
    return Trajectory(np.asarray(positions), ls_a - lp_a, lp_a, ls_a, diverged)
