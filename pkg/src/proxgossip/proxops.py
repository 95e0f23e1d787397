"""Nonsmooth regularizers with exact proximal maps, and the Moreau oracle.

The regularizers here are the closed convex functions the simulator
supports: zero, weighted l1, a box indicator, and elastic net.  Each has a
closed-form prox.  On top of them sits a deterministic solver for the
envelope subproblem

    min_y  f(y) + r(y) + (1/(2*lam)) ||y - x||^2,

which is strongly convex whenever lam * L < 1.  Its minimizer x_hat gives
the envelope gradient (x - x_hat) / lam used as the stationarity measure
for the composite objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOX_FEAS_TOL = 1e-12


class ProxSolverError(RuntimeError):
    """Envelope subproblem solver hit the iteration cap."""

    def __init__(self, residual: float, iters: int):
        self.residual = residual
        self.iters = iters
        super().__init__(
            f"proximal subproblem did not reach tolerance in {iters} iterations "
            f"(last gradient-mapping norm {residual:.3e})"
        )


@dataclass(frozen=True, eq=False)
class Regularizer:
    """Closed convex regularizer with an exact prox.

    kind is one of "zero", "l1" (weight mu), "box" (per-coordinate lo/hi),
    "elastic" (mu * ||.||_1 + mu2/2 * ||.||^2).
    """

    kind: str
    mu: float = 0.0
    mu2: float = 0.0
    lo: np.ndarray | float = -np.inf
    hi: np.ndarray | float = np.inf

    def value(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        if self.kind == "zero":
            return 0.0
        if self.kind == "l1":
            return float(self.mu * np.abs(v).sum())
        if self.kind == "box":
            inside = np.all(v >= self.lo - BOX_FEAS_TOL) and np.all(v <= self.hi + BOX_FEAS_TOL)
            return 0.0 if inside else float("inf")
        if self.kind == "elastic":
            return float(self.mu * np.abs(v).sum() + 0.5 * self.mu2 * (v * v).sum())
        raise ValueError(f"unknown regularizer kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind == "l1":
            return f"l1(mu={self.mu:.17g})"
        if self.kind == "box":
            lo = np.asarray(self.lo, dtype=float).ravel()
            hi = np.asarray(self.hi, dtype=float).ravel()
            return f"box(lo={lo.tolist()},hi={hi.tolist()})"
        if self.kind == "elastic":
            return f"elastic(mu={self.mu:.17g},mu2={self.mu2:.17g})"
        raise ValueError(f"unknown regularizer kind {self.kind!r}")


def zero() -> Regularizer:
    return Regularizer(kind="zero")


def l1(mu: float) -> Regularizer:
    if mu < 0:
        raise ValueError(f"l1 weight must be >= 0, got {mu}")
    return Regularizer(kind="l1", mu=float(mu))


def box(lo, hi) -> Regularizer:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box needs lo <= hi per coordinate")
    return Regularizer(kind="box", lo=lo, hi=hi)


def elastic(mu: float, mu2: float) -> Regularizer:
    if mu < 0 or mu2 < 0:
        raise ValueError("elastic weights must be >= 0")
    return Regularizer(kind="elastic", mu=float(mu), mu2=float(mu2))


def prox(reg: Regularizer, step: float, v: np.ndarray) -> np.ndarray:
    """argmin_y r(y) + (1/(2*step)) ||y - v||^2, elementwise closed form.

    step = 0 returns v exactly (degenerate-step convention).
    """
    v = np.asarray(v, dtype=float)
    if step < 0:
        raise ValueError(f"prox step must be >= 0, got {step}")
    if step == 0.0 or reg.kind == "zero":
        return v.copy()
    if reg.kind == "l1":
        thr = step * reg.mu
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)
    if reg.kind == "box":
        lo = np.asarray(reg.lo, dtype=float)
        hi = np.asarray(reg.hi, dtype=float)
        if v.ndim == 2 and lo.ndim == 1:
            lo, hi = lo[:, None], hi[:, None]
        return np.clip(v, lo, hi)
    if reg.kind == "elastic":
        thr = step * reg.mu
        soft = np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)
        return soft / (1.0 + step * reg.mu2)
    raise ValueError(f"unknown regularizer kind {reg.kind!r}")


@dataclass(frozen=True)
class MoreauOracleConfig:
    """Settings for the envelope subproblem solver.

    lam is the envelope parameter, required to satisfy lam * L < 1.
    inner_step defaults to 1/(L + 1/lam); inner_tol defaults to
    1e-9 * max(1, ||x||); inner_max_iters caps the solver.
    """

    lam: float
    inner_step: float | None = None
    inner_tol: float | None = None
    inner_max_iters: int = 100_000


def _check_envelope_params(problem, cfg: MoreauOracleConfig) -> None:
    if cfg.lam <= 0:
        raise ValueError(f"envelope parameter must be > 0, got {cfg.lam}")
    if cfg.lam * problem.L >= 1.0:
        raise ValueError(
            f"need lam * L < 1 for a strongly convex subproblem, got "
            f"lam={cfg.lam:.6g}, L={problem.L:.6g}"
        )


def prox_moreau(problem, cfg: MoreauOracleConfig, x: np.ndarray) -> np.ndarray:
    """Minimizer x_hat of f(y) + r(y) + (1/(2*lam)) ||y - x||^2.

    Solved by deterministic full-gradient proximal descent; terminates when
    the gradient-mapping norm drops below inner_tol.
    """
    _check_envelope_params(problem, cfg)
    x = np.asarray(x, dtype=float)
    lam = cfg.lam
    s = cfg.inner_step if cfg.inner_step is not None else 1.0 / (problem.L + 1.0 / lam)
    tol = cfg.inner_tol
    if tol is None:
        tol = 1e-9 * max(1.0, float(np.linalg.norm(x)))
    y = x.copy()
    resid = np.inf
    for _ in range(cfg.inner_max_iters):
        g = problem.mean_grad(y) + (y - x) / lam
        y_next = prox(problem.reg, s, y - s * g)
        resid = float(np.linalg.norm(y - y_next)) / s
        y = y_next
        if resid <= tol:
            return y
    raise ProxSolverError(resid, cfg.inner_max_iters)


def moreau_grad(problem, cfg: MoreauOracleConfig, x: np.ndarray) -> np.ndarray:
    """Envelope gradient (x - x_hat) / lam."""
    x = np.asarray(x, dtype=float)
    x_hat = prox_moreau(problem, cfg, x)
    return (x - x_hat) / cfg.lam


def moreau_value(problem, cfg: MoreauOracleConfig, x: np.ndarray) -> float:
    """Envelope value phi(x_hat) + (1/(2*lam)) ||x_hat - x||^2."""
    x = np.asarray(x, dtype=float)
    x_hat = prox_moreau(problem, cfg, x)
    d = x_hat - x
    return float(problem.objective(x_hat) + (d @ d) / (2.0 * cfg.lam))
