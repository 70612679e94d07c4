"""Discrete loop space on the cylinder over the fiber geodesic.

A loop is ``n`` samples ``(x_i, theta_i)`` where ``theta`` is the lifted
arc-length coordinate along the fiber geodesic; the loop closes with
``theta_n = theta_0 + w * length``.  The discrete Dirichlet energy

    E = (n/2) * sum_i [ dx_i^2 + f(xbar_i)^2 dtheta_i^2 ]

(``xbar_i`` the segment midpoint) has constant-speed closed geodesics as its
critical points.  Vectors over the loop are laid out as ``[xs, thetas]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from .geometry import WarpedMetric
from .profile import ProfileDomainError


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class HomotopyClass:
    """Free homotopy class ``w`` times the fiber geodesic."""

    winding: int = 1

    def __post_init__(self):
        if int(self.winding) != self.winding or self.winding == 0:
            raise ValueError("winding must be a nonzero integer")


@dataclass(frozen=True, eq=False)
class DiscreteLoop:
    xs: np.ndarray
    thetas: np.ndarray
    cls: HomotopyClass
    offset: float  # theta closure offset w * fiber length, stored

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        th = np.array(self.thetas, dtype=float)
        if xs.ndim != 1 or xs.shape != th.shape:
            raise ValueError("xs and thetas must be 1-d of equal length")
        if xs.size < 8:
            raise ValueError("a loop needs at least 8 samples")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(th))):
            raise ValueError("loop coordinates must be finite")
        xs.flags.writeable = False
        th.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "thetas", th)

    @classmethod
    def circle(cls, x0: float, n: int, fiber_length: float,
               hclass: HomotopyClass = HomotopyClass(1), phase: float = 0.0):
        w = hclass.winding
        offset = w * fiber_length
        thetas = phase + offset * np.arange(n) / n
        return cls(np.full(n, float(x0)), thetas, hclass, offset)

    @property
    def n(self) -> int:
        return self.xs.size

    @property
    def winding(self) -> int:
        return self.cls.winding

    @property
    def fiber_length(self) -> float:
        return self.offset / self.winding

    def vector(self) -> np.ndarray:
        return np.concatenate([self.xs, self.thetas])

    def with_vector(self, v: np.ndarray) -> "DiscreteLoop":
        n = self.n
        return DiscreteLoop(v[:n], v[n:], self.cls, self.offset)

    def shifted(self, k: int) -> "DiscreteLoop":
        """Same loop with the sample index started at ``k`` (re-lifted)."""
        k %= self.n
        th = np.concatenate([self.thetas[k:], self.thetas[:k] + self.offset])
        return DiscreteLoop(np.roll(self.xs, -k), th, self.cls, self.offset)


def _segments(loop: DiscreteLoop):
    xs, th = loop.xs, loop.thetas
    dx = np.roll(xs, -1) - xs
    dth = np.roll(th, -1) - th
    dth[-1] += loop.offset
    mid = 0.5 * (xs + np.roll(xs, -1))
    return dx, dth, mid


def _warp(g: WarpedMetric, mid: np.ndarray, order: int):
    """F = f^2 and its derivatives up to ``order`` at segment midpoints."""
    with np.errstate(over="raise", invalid="raise"):
        try:
            f = np.asarray(g.f(mid))
            out = [f * f]
            if order >= 1:
                df = np.asarray(g.df(mid))
                out.append(2.0 * f * df)
            if order >= 2:
                d2f = np.asarray(g.d2f(mid))
                out.append(2.0 * (df * df + f * d2f))
        except FloatingPointError as exc:
            raise ProfileDomainError(f"warp evaluation overflow: {exc}") from exc
    if not all(np.all(np.isfinite(a)) for a in out) or np.any(out[0] <= 0):
        raise ProfileDomainError("warp profile not positive and finite along loop")
    return out


def energy(g: WarpedMetric, loop: DiscreteLoop) -> float:
    dx, dth, mid = _segments(loop)
    (F,) = _warp(g, mid, 0)
    return float(0.5 * loop.n * np.sum(dx * dx + F * dth * dth))


def length(g: WarpedMetric, loop: DiscreteLoop) -> float:
    dx, dth, mid = _segments(loop)
    (F,) = _warp(g, mid, 0)
    return float(np.sum(np.sqrt(dx * dx + F * dth * dth)))


def gradient(g: WarpedMetric, loop: DiscreteLoop) -> np.ndarray:
    n = loop.n
    dx, dth, mid = _segments(loop)
    F, dF = _warp(g, mid, 1)
    q = dF * dth * dth
    gx = n * (np.roll(dx, 1) - dx) + 0.25 * n * (np.roll(q, 1) + q)
    p = F * dth
    gth = n * (np.roll(p, 1) - p)
    return np.concatenate([gx, gth])


def hessian(g: WarpedMetric, loop: DiscreteLoop) -> np.ndarray:
    n = loop.n
    dx, dth, mid = _segments(loop)
    F, dF, d2F = _warp(g, mid, 2)
    i = np.arange(n)
    j = (i + 1) % n
    xi, xj, ti, tj = i, j, n + i, n + j

    e_mm = 0.5 * n * d2F * dth * dth
    e_bb = n * F
    e_mb = n * dF * dth

    H = np.zeros((2 * n, 2 * n))
    # (row, col, value) for the upper triangle of each segment block
    entries = [
        (xi, xi, n + 0.25 * e_mm), (xj, xj, n + 0.25 * e_mm),
        (ti, ti, e_bb), (tj, tj, e_bb),
    ]
    offdiag = [
        (xi, xj, -n + 0.25 * e_mm),
        (ti, tj, -e_bb),
        (xi, ti, -0.5 * e_mb), (xi, tj, 0.5 * e_mb),
        (xj, ti, -0.5 * e_mb), (xj, tj, 0.5 * e_mb),
    ]
    for r, c, v in entries:
        np.add.at(H, (r, c), v)
    for r, c, v in offdiag:
        np.add.at(H, (r, c), v)
        np.add.at(H, (c, r), v)
    return H


def rotation_mode(n: int) -> np.ndarray:
    """Unit vector shifting every theta equally (reparametrisation of circles)."""
    r = np.zeros(2 * n)
    r[n:] = 1.0 / math.sqrt(n)
    return r


def inertia(H: np.ndarray, tol: float) -> Tuple[int, int, int]:
    """(negative, zero, positive) eigenvalue counts with a +-tol zero band.

    Uses Bunch-Kaufman LDL^T of H -+ tol*I and Sylvester's law of inertia;
    falls back to eigvalsh if a factorization has a near-zero pivot.
    """
    n = H.shape[0]
    try:
        neg = _ldl_counts(H + tol * np.eye(n))[0]
        pos = _ldl_counts(H - tol * np.eye(n))[2]
    except np.linalg.LinAlgError:
        ev = np.linalg.eigvalsh(H)
        neg = int(np.sum(ev < -tol))
        pos = int(np.sum(ev > tol))
    return neg, n - neg - pos, pos


def _ldl_counts(A: np.ndarray) -> Tuple[int, int, int]:
    _, D, _ = scipy.linalg.ldl(A, lower=True, hermitian=True)
    ev = []
    k = 0
    n = D.shape[0]
    while k < n:
        if k + 1 < n and D[k + 1, k] != 0.0:
            ev.extend(np.linalg.eigvalsh(D[k:k + 2, k:k + 2]))
            k += 2
        else:
            ev.append(D[k, k])
            k += 1
    ev = np.asarray(ev)
    scale = max(1.0, float(np.abs(np.diag(A)).max()))
    if np.any(np.abs(ev) <= 1e-13 * scale):
        raise np.linalg.LinAlgError("near-singular pivot in LDL^T")
    return int(np.sum(ev < 0)), 0, int(np.sum(ev > 0))


# ---------------------------------------------------------------------------
# solver


@dataclass(frozen=True)
class SolverOptions:
    n_points: int = 256
    tol_grad: Optional[float] = None  # default 1e-12 * n
    tol_zero: Optional[float] = None  # default 1e-8 * n
    switch_tol: float = 1e-3
    continuation_tol: float = 1.0
    max_iter: int = 5000
    newton_max: int = 60
    eps_len_abs: Optional[float] = None  # default 1e-4 * fiber length * |w|
    max_step: float = 1.0
    starts: int = 17
    dedup_tol_abs: Optional[float] = None  # default 1e-5 * fiber length
    seed_grid: int = 2001

    def __post_init__(self):
        if self.n_points < 8:
            raise ValueError("n_points must be >= 8")
        for name in ("tol_grad", "tol_zero", "eps_len_abs", "dedup_tol_abs"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if not (self.switch_tol > 0 and self.continuation_tol > 0 and self.max_step > 0):
            raise ValueError("solver thresholds must be positive")
        if self.max_iter < 1 or self.starts < 1:
            raise ValueError("max_iter and starts must be >= 1")

    def grad_tol(self, n: int) -> float:
        return self.tol_grad if self.tol_grad is not None else 1e-12 * n

    def zero_tol(self, n: int) -> float:
        return self.tol_zero if self.tol_zero is not None else 1e-8 * n

    def eps_len(self, fiber_length: float, winding: int) -> float:
        if self.eps_len_abs is not None:
            return self.eps_len_abs
        return 1e-4 * fiber_length * abs(winding)

    def dedup_tol(self, fiber_length: float) -> float:
        if self.dedup_tol_abs is not None:
            return self.dedup_tol_abs
        return 1e-5 * fiber_length


@dataclass
class SolveOutcome:
    status: str  # converged | escaped | degenerate | max_iter
    loop: DiscreteLoop
    length: float
    grad_norm: float
    trace: List[Tuple[float, float, float]] = field(default_factory=list)
    iterations: int = 0
    newton_steps: int = 0
    note: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"


class _EscapeWatch:
    """Escape signature: the loop shortens while leaving the window."""

    def __init__(self, g: WarpedMetric, eps_len: float):
        self.A = g.half_width
        self.eps_len = eps_len
        self.outside = 0
        self.last_len = math.inf

    def update(self, loop: DiscreteLoop, L: float) -> bool:
        xs = loop.xs
        out_now = abs(float(np.mean(xs))) > self.A
        shrinking = L < self.last_len
        self.outside = self.outside + 1 if (out_now and shrinking) else 0
        self.last_len = L
        if L < self.eps_len and (xs.min() < -self.A or xs.max() > self.A):
            return True
        return self.outside >= 3


def _precondition(grad: np.ndarray, n: int, theta_scale: float,
                  mu: float) -> np.ndarray:
    """Inverse of a circulant H^1 operator per block, FFT-diagonalised.

    ``mu`` is the per-sample potential curvature of the x-block; it sets the
    weight of the rigid-shift mode, which can sit many orders of magnitude
    away from the Laplacian part.
    """
    k = np.arange(n)
    lap = n * (2.0 - 2.0 * np.cos(2.0 * np.pi * k / n))
    lam_x = lap + mu
    lam_t = theta_scale * lap + 1.0
    gx = np.fft.ifft(np.fft.fft(grad[:n]) / lam_x).real
    gt = np.fft.ifft(np.fft.fft(grad[n:]) / lam_t).real
    return np.concatenate([gx, gt])


def _shift_curvature(g: WarpedMetric, loop: DiscreteLoop) -> float:
    """Energy curvature along a rigid x-shift, per sample."""
    _, dth, mid = _segments(loop)
    _, _, d2F = _warp(g, mid, 2)
    return float(0.5 * np.sum(d2F * dth * dth))


def _safe_energy(g, loop) -> float:
    try:
        return energy(g, loop)
    except (ProfileDomainError, FloatingPointError, ValueError):
        return math.inf


def _cap(step: np.ndarray, n: int, max_step: float) -> np.ndarray:
    big = np.abs(step[:n]).max()
    return step * (max_step / big) if big > max_step else step


def _newton_step(H: np.ndarray, grad: np.ndarray, r: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.abs(np.diag(H)).mean()))
    A = H + scale * np.outer(r, r)
    rhs = -(grad - r * (r @ grad))
    try:
        step = np.linalg.solve(A, rhs)
        if not np.all(np.isfinite(step)) or \
                np.linalg.norm(A @ step - rhs) > 1e-6 * (1 + np.linalg.norm(rhs)):
            raise np.linalg.LinAlgError("inaccurate solve")
    except np.linalg.LinAlgError:
        step = np.linalg.lstsq(A, rhs, rcond=1e-12)[0]
    return step - r * (r @ step)


def _newton(g, loop, opts, watch, trace, require_descent: bool,
            iterations: int = 0) -> SolveOutcome:
    """Newton iterations on the complement of the rotation mode."""
    n = loop.n
    r = rotation_mode(n)
    tol = opts.grad_tol(n)
    steps: List[float] = []
    E = energy(g, loop)
    for it in range(opts.newton_max + 1):
        grad = gradient(g, loop)
        gn = float(np.linalg.norm(grad))
        L = length(g, loop)
        trace.append((L, float(loop.xs.min()), float(loop.xs.max())))
        if watch.update(loop, L):
            return SolveOutcome("escaped", loop, L, gn, trace, iterations + it, it)
        H = hessian(g, loop)
        step = _cap(_newton_step(H, grad, r), n, opts.max_step)
        snorm = float(np.linalg.norm(step))
        steps.append(snorm)
        contracting = (snorm <= 1e-9 * math.sqrt(2 * n)) or \
            (len(steps) >= 2 and snorm <= 0.5 * steps[-2])
        if gn <= tol and contracting:
            return SolveOutcome("converged", loop, L, gn, trace, iterations + it, it)
        if it == opts.newton_max:
            break
        new = loop.with_vector(loop.vector() + step)
        if require_descent:
            E_new = _safe_energy(g, new)
            if not E_new <= E + 1e-12 * abs(E):
                return SolveOutcome("max_iter", loop, L, gn, trace, iterations + it, it,
                                    note="newton step rejected")
            E = E_new
        loop = new
    return SolveOutcome("max_iter", loop, L, gn, trace, iterations + opts.newton_max,
                        opts.newton_max, note="newton did not converge")


def minimize(g: WarpedMetric, init: DiscreteLoop,
             opts: SolverOptions = SolverOptions()) -> SolveOutcome:
    """Discrete curve shortening (H^1 gradient descent) then Newton polish."""
    n = init.n
    watch = _EscapeWatch(g, opts.eps_len(init.fiber_length, init.winding))
    trace: List[Tuple[float, float, float]] = []
    loop = init
    switch = opts.switch_tol
    E = energy(g, loop)
    tau = 1.0
    it = 0
    while it < opts.max_iter:
        grad = gradient(g, loop)
        gn = float(np.linalg.norm(grad))
        L = length(g, loop)
        trace.append((L, float(loop.xs.min()), float(loop.xs.max())))
        if watch.update(loop, L):
            return SolveOutcome("escaped", loop, L, gn, trace, it)
        if gn <= switch:
            trial = _newton(g, loop, opts, watch, list(trace), True, it)
            if trial.status in ("converged", "escaped"):
                return trial
            # Newton left the descent region: keep descending, switch later
            switch *= 1e-2
            if switch < opts.grad_tol(n):
                return trial
        theta_scale = max(float(np.mean(g.f(loop.xs) ** 2)), 1e-300)
        mu = max(abs(_shift_curvature(g, loop)), 1e-8)
        d = -_precondition(grad, n, theta_scale, mu)
        if float(grad @ d) >= 0:
            d = -grad
        accepted = False
        while tau > 1e-300:
            step = _cap(tau * d, n, opts.max_step)
            new = loop.with_vector(loop.vector() + step)
            E_new = _safe_energy(g, new)
            if E_new <= E + 1e-4 * float(grad @ step):
                accepted = True
                break
            tau *= 0.5
        it += 1
        if not accepted:
            return SolveOutcome("max_iter", loop, L, gn, trace, it, note="line search failed")
        loop, E = new, E_new
        tau = min(2.0 * tau, 1.0)
    gn = float(np.linalg.norm(gradient(g, loop)))
    return SolveOutcome("max_iter", loop, length(g, loop), gn, trace, it)


def refine_newton(g: WarpedMetric, loop: DiscreteLoop,
                  opts: SolverOptions = SolverOptions(),
                  switch_tol: Optional[float] = None) -> SolveOutcome:
    """Newton refinement to a critical loop of any index.

    Raises PreconditionError when the starting gradient exceeds the switch
    threshold.  A converged loop whose Hessian has more than the rotation
    zero mode is reported as ``degenerate``.
    """
    threshold = opts.switch_tol if switch_tol is None else switch_tol
    gn = float(np.linalg.norm(gradient(g, loop)))
    if gn > threshold:
        raise PreconditionError(
            f"gradient norm {gn:.3e} above switch threshold {threshold:.3e}")
    watch = _EscapeWatch(g, opts.eps_len(loop.fiber_length, loop.winding))
    out = _newton(g, loop, opts, watch, [], False)
    if out.status == "converged":
        neg, zero, pos = inertia(hessian(g, out.loop), opts.zero_tol(loop.n))
        if zero > 1:
            out = replace(out, status="degenerate", note=f"nullity {zero}")
    return out
