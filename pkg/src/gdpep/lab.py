"""Gradient descent on concrete functions, for probing the bounds empirically.

All families have analytic gradients and a known minimum value (or none,
for non-convex pieces).  The worst case for this criterion is essentially
one-dimensional, so the adversarial families are 1D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scalar import ProblemInstance, rate_bound

FAMILIES = ("quadratic", "huber", "piecewise")


class FunctionSpec:
    """A function with value, gradient, curvature range [mu, L] and optimal value."""

    mu: float
    L: float
    dim: int
    f_star: float | None

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class Quadratic(FunctionSpec):
    """f(x) = 1/2 sum_i lambda_i x_i^2."""

    eigenvalues: tuple

    @property
    def dim(self):
        return len(self.eigenvalues)

    @property
    def mu(self):
        return min(self.eigenvalues)

    @property
    def L(self):
        return max(self.eigenvalues)

    @property
    def f_star(self):
        return 0.0 if self.mu >= 0 else None

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(np.dot(np.asarray(self.eigenvalues) * x, x))

    def grad(self, x):
        return np.asarray(self.eigenvalues) * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Huber(FunctionSpec):
    """c/2 |x|^2 inside radius r, c (r |x| - r^2/2) outside; in F_{0,c}."""

    c: float
    r: float
    dim: int = 1

    def __post_init__(self):
        if not (self.c > 0 and self.r > 0):
            raise ValueError("Huber needs c > 0 and r > 0")

    mu = 0.0
    f_star = 0.0

    @property
    def L(self):
        return self.c

    def value(self, x):
        n = float(np.linalg.norm(x))
        if n <= self.r:
            return 0.5 * self.c * n * n
        return self.c * (self.r * n - 0.5 * self.r * self.r)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        n = float(np.linalg.norm(x))
        if n <= self.r:
            return self.c * x
        return self.c * self.r * x / n


@dataclass(frozen=True)
class PiecewiseQuadratic(FunctionSpec):
    """1D function with piecewise-constant curvature, f(0) = f'(0) = 0.

    ``curvatures[i]`` applies between ``breakpoints[i-1]`` and
    ``breakpoints[i]`` (unbounded at both ends).  Value and derivative are
    continuous by construction.
    """

    breakpoints: tuple
    curvatures: tuple

    dim = 1

    def __post_init__(self):
        b = list(self.breakpoints)
        if b != sorted(b) or len(set(b)) != len(b):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.curvatures) != len(b) + 1:
            raise ValueError("need one curvature per piece (len(breakpoints) + 1)")
        # knots include 0, where value and slope are anchored
        knots = sorted(set(b) | {0.0})
        curv = [self._curvature_at((lo + hi) / 2) for lo, hi in zip(knots[:-1], knots[1:])]
        object.__setattr__(self, "_knots", knots)
        object.__setattr__(self, "_knot_curv", curv)
        i0 = knots.index(0.0)
        slope = [0.0] * len(knots)
        val = [0.0] * len(knots)
        for i in range(i0 + 1, len(knots)):
            h, dx = curv[i - 1], knots[i] - knots[i - 1]
            slope[i] = slope[i - 1] + h * dx
            val[i] = val[i - 1] + slope[i - 1] * dx + 0.5 * h * dx * dx
        for i in range(i0 - 1, -1, -1):
            h, dx = curv[i], knots[i] - knots[i + 1]
            slope[i] = slope[i + 1] + h * dx
            val[i] = val[i + 1] + slope[i + 1] * dx + 0.5 * h * dx * dx
        object.__setattr__(self, "_slope", slope)
        object.__setattr__(self, "_val", val)

    def _curvature_at(self, x):
        return self.curvatures[int(np.searchsorted(self.breakpoints, x, side="right"))]

    @property
    def mu(self):
        return min(self.curvatures)

    @property
    def L(self):
        return max(self.curvatures)

    @property
    def f_star(self):
        # f' is non-decreasing and vanishes at 0 when every curvature is >= 0
        return 0.0 if self.mu >= 0 else None

    def _piece(self, x):
        x = float(np.ravel(x)[0])
        knots = self._knots
        i = int(np.searchsorted(knots, x, side="right")) - 1
        if i < 0:
            # left of the first knot: expand from it with the outermost curvature
            return x, knots[0], self._slope[0], self._val[0], self.curvatures[0]
        h = self._knot_curv[i] if i < len(self._knot_curv) else self.curvatures[-1]
        return x, knots[i], self._slope[i], self._val[i], h

    def value(self, x):
        x, k, s, v, h = self._piece(x)
        return v + s * (x - k) + 0.5 * h * (x - k) ** 2

    def grad(self, x):
        x, k, s, _, h = self._piece(x)
        return np.array([s + h * (x - k)])


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    L: float

    @property
    def plus_points(self):
        return self.points - self.gradients / self.L

    @property
    def plus_values(self):
        return self.values - np.sum(self.gradients**2, axis=1) / (2 * self.L)


def run_gd(spec: FunctionSpec, x0, gamma, N, L=None) -> Trajectory:
    """N steps of x <- x - gamma * grad f(x).  ``L`` (default: the spec's) defines x^+ and f^+."""
    L = spec.L if L is None else L
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.shape != (spec.dim,):
        raise ValueError(f"x0 has shape {x.shape}, function has dimension {spec.dim}")
    if not (gamma > 0 and gamma * spec.L < 2):
        raise ValueError(f"gamma={gamma} outside (0, 2/L) for L={spec.L}")
    pts, vals, grads = [], [], []
    for k in range(N + 1):
        g = spec.grad(x)
        pts.append(x)
        vals.append(spec.value(x))
        grads.append(g)
        if k < N:
            x = x - gamma * g
    return Trajectory(np.array(pts), np.array(vals), np.array(grads), L)


def performance_ratio(traj: Trajectory, f_star):
    """|g_N|^2 / (f_0 - f_*)."""
    gap = traj.values[0] - f_star
    if not gap > 0:
        raise ValueError("degenerate start: f_0 equals f_*")
    return float(np.dot(traj.gradients[-1], traj.gradients[-1]) / gap)


@dataclass(frozen=True)
class ProbeResult:
    family: str
    criterion: str
    trials: int
    max_ratio: float
    bound_ratio: float
    quotient: float


def _observed(traj, f_star, gamma, criterion):
    gN = float(np.dot(traj.gradients[-1], traj.gradients[-1]))
    if criterion == "max_form":
        gap = traj.values[0] - f_star
    else:
        gap = traj.values[0] - traj.values[-1]
    if gap <= 0:
        return None
    return gN / gap


def _sample(family, inst, rng, scale=None):
    """One random (function, x0) pair from the family."""
    mu, L, N, gamma = float(inst.mu), float(inst.L), inst.N, float(inst.gamma)
    if family == "quadratic":
        d = int(rng.integers(1, 6))
        eig = rng.uniform(mu, L, size=d)
        pick = rng.integers(0, 3)
        if pick == 0:
            eig[0] = L
        elif pick == 1:
            eig[0] = mu
        return Quadratic(tuple(eig)), rng.standard_normal(d)
    if family == "huber":
        # linear region for a stretch, then the quadratic cap; |x0|/r = 1 + N*gamma*L
        # ends the linear phase exactly at the kink
        s = scale if scale is not None else rng.uniform(0.0, 2.0 * (1 + N * gamma * L) + 1.0)
        return Huber(c=L, r=1.0), np.array([max(s, 1e-6)])
    if family == "piecewise":
        m = int(rng.integers(1, 4))
        bps = np.sort(rng.uniform(-3, 3, size=m))
        bps = tuple(float(b) for b in bps if abs(b) > 1e-9)
        curv = []
        for _ in range(len(bps) + 1):
            u = rng.random()
            curv.append(mu if u < 0.4 else (L if u < 0.8 else float(rng.uniform(mu, L))))
        return PiecewiseQuadratic(bps, tuple(curv)), np.array([float(rng.uniform(-6, 6))])
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def empirical_probe(inst: ProblemInstance, family="quadratic", trials=1000, seed=0) -> ProbeResult:
    """Largest observed criterion over random members of ``family``, against the certified bound.

    For mu >= 0 the criterion is |g_N|^2/(f_0 - f_*) against 2L * max_value;
    for mu < 0 it is |g_N|^2/(f_0 - f_N) against 2/(gamma * min_form).
    The huber family additionally refines its search around the best start.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if family == "huber" and inst.mu > 0:
        raise ValueError("huber functions are not strongly convex; need mu <= 0")
    rb = rate_bound(inst)
    gamma, L, N = float(inst.gamma), float(inst.L), inst.N
    if inst.mu >= 0:
        criterion, bound = "max_form", 2 * L * float(rb.max_value)
    else:
        criterion, bound = "min_form", 2 / (gamma * float(rb.min_form))

    rng = np.random.default_rng(seed)
    best, best_scale = 0.0, None
    explore = trials if family != "huber" else (trials + 1) // 2
    for _ in range(explore):
        spec, x0 = _sample(family, inst, rng)
        f_star = spec.f_star if criterion == "max_form" else None
        r = _observed(run_gd(spec, x0, gamma, N, L=L), f_star, gamma, criterion)
        if r is not None and r > best:
            best, best_scale = r, float(np.linalg.norm(x0))
    if family == "huber" and best_scale is not None:
        width = best_scale / 4
        for _ in range(trials - explore):
            s = best_scale + width * rng.uniform(-1, 1)
            spec, x0 = _sample(family, inst, rng, scale=s)
            r = _observed(run_gd(spec, x0, gamma, N, L=L), spec.f_star if criterion == "max_form" else None,
                          gamma, criterion)
            if r is not None and r > best:
                best, best_scale = r, s
            width *= 0.97
    quotient = best / bound if bound > 0 else math.inf
    return ProbeResult(family, criterion, trials, float(best), float(bound), float(quotient))
