"""Windowed joint sparse recovery of the delay-Doppler channel.

Solves ``min_h sum_t ||y_t - R_t F h G[t]||^2 + lam * sum |h|`` by FISTA with
objective-based restarts, then optionally masks Doppler bins far from the
energy centroid and re-fits the surviving support by least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ObservationWindow


@dataclass(frozen=True)
class RecoveryConfig:
    iterations: int = 500
    lambda_override: float | None = None
    doppler_truncation: int | None = None
    debias_on_support: bool = True
    support_threshold: float = 0.05
    power_iterations: int = 50
    power_tol: float = 1e-6
    lstsq_rcond: float = 1e-6

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not 0 < self.support_threshold < 1:
            raise ValueError(f"support_threshold must lie in (0, 1), got {self.support_threshold}")
        if not 0 < self.lstsq_rcond < 1:
            raise ValueError(f"lstsq_rcond must lie in (0, 1), got {self.lstsq_rcond}")
        if self.doppler_truncation is not None and self.doppler_truncation < 0:
            raise ValueError("doppler_truncation must be non-negative")


@dataclass(frozen=True)
class RecoveryResult:
    h_est: np.ndarray
    latest_channel: np.ndarray | None
    objective_trace: np.ndarray
    lambda_used: float
    restarts: int = 0
    rank_deficient: bool = False
    support: tuple = field(default=())


class WindowOperator:
    """Forward map ``h -> [R_t F h G[t]]_t`` of one observation window and its adjoint."""

    def __init__(self, F, G, subbands, times, M):
        N, self.N_tau = F.shape
        self.N_nu = G.shape[1]
        k = N // M
        self.M = M
        self.Fsel = np.ascontiguousarray(F.reshape(k, M, self.N_tau)[np.asarray(subbands)])
        self.FselH = np.ascontiguousarray(self.Fsel.conj().transpose(0, 2, 1))
        self.Gw = np.ascontiguousarray(G[np.asarray(times)])
        self.GwT = np.ascontiguousarray(self.Gw.T)
        self.GwC = np.ascontiguousarray(self.Gw.conj())

    @classmethod
    def for_window(cls, window: ObservationWindow, F, G):
        return cls(F, G, window.subbands, window.times, window.M)

    @property
    def shape(self):
        return (self.N_tau, self.N_nu)

    def forward(self, h):
        Z = h @ self.GwT  # (N_tau, T)
        return np.matmul(self.Fsel, Z.T[:, :, None])[:, :, 0]

    def adjoint(self, y):
        U = np.matmul(self.FselH, y[:, :, None])[:, :, 0]  # (T, N_tau)
        return U.T @ self.GwC

    def norm_sq(self, iterations=50, tol=1e-6, seed=0):
        """Largest eigenvalue of ``A^H A`` by power iteration."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(self.shape) + 1j * rng.standard_normal(self.shape)
        x /= np.linalg.norm(x)
        est = 0.0
        for _ in range(iterations):
            z = self.adjoint(self.forward(x))
            new = float(np.linalg.norm(z))
            if new == 0.0:
                return 0.0
            x = z / new
            if abs(new - est) <= tol * new:
                est = new
                break
            est = new
        return est


def lambda_rule(sigma_bar_sq: float, N_tau: int, N_nu: int, M: int, T: int) -> float:
    """``sqrt(2 sigma^2 N_tau N_nu log(N_tau N_nu) / (M T))`` with natural log."""
    if sigma_bar_sq < 0:
        raise ValueError(f"noise variance must be non-negative, got {sigma_bar_sq}")
    for name, v in (("N_tau", N_tau), ("N_nu", N_nu), ("M", M), ("T", T)):
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")
    n = N_tau * N_nu
    return math.sqrt(2.0 * sigma_bar_sq * n * math.log(n) / (M * T))


def soft_threshold(x, tau):
    """Shrink complex moduli by ``tau`` keeping the phase."""
    mag = np.abs(x)
    scale = np.maximum(mag - tau, 0.0) / np.where(mag > 0, mag, 1.0)
    return x * scale


def lambda_max(op: WindowOperator, y) -> float:
    """Smallest ``lam`` for which the zero matrix is optimal."""
    return 2.0 * float(np.abs(op.adjoint(y)).max())


def _objective(op, y, h, lam):
    r = op.forward(h) - y
    return float(np.vdot(r, r).real) + lam * float(np.abs(h).sum())


def fista(window: ObservationWindow, F, G, lam: float, config: RecoveryConfig = RecoveryConfig(),
          op: WindowOperator | None = None, h0=None) -> RecoveryResult:
    """FISTA with restart-on-increase; the recorded objective never rises."""
    op = op or WindowOperator.for_window(window, F, G)
    y = window.y
    L = 2.0 * op.norm_sq(config.power_iterations, config.power_tol)
    x = np.zeros(op.shape, dtype=np.complex128) if h0 is None else np.array(h0, dtype=np.complex128)
    if L == 0.0:
        trace = np.full(config.iterations, _objective(op, y, x, lam))
        return RecoveryResult(x, None, trace, lam)

    Ax = op.forward(x)
    fx = float(np.vdot(Ax - y, Ax - y).real)
    Fx = fx + lam * float(np.abs(x).sum())
    z_mom, Az_mom, theta = x, Ax, 1.0
    trace = np.empty(config.iterations)
    restarts = 0
    for it in range(config.iterations):
        step = _prox_step(op, y, z_mom, Az_mom, lam, L)
        if step is None:
            raise FloatingPointError("FISTA produced a non-finite iterate; check the step size")
        xn, Axn, fn, L = step
        Fn = fn + lam * float(np.abs(xn).sum())
        if not math.isfinite(Fn):
            raise FloatingPointError("FISTA objective became non-finite; check the step size")
        if Fn > Fx:
            # restart: drop momentum and take a plain proximal step from x
            restarts += 1
            theta = 1.0
            step = _prox_step(op, y, x, Ax, lam, L)
            xn, Axn, fn, L = step
            Fn = fn + lam * float(np.abs(xn).sum())
            if Fn > Fx:
                xn, Axn, Fn = x, Ax, Fx
            z_mom, Az_mom = xn, Axn
        else:
            theta_n = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
            beta = (theta - 1.0) / theta_n
            z_mom = xn + beta * (xn - x)
            Az_mom = Axn + beta * (Axn - Ax)
            theta = theta_n
        x, Ax, Fx = xn, Axn, Fn
        trace[it] = Fx
    return RecoveryResult(x, None, trace, lam, restarts=restarts)


def _prox_step(op, y, z, Az, lam, L):
    """One backtracked proximal-gradient step from ``z``."""
    rz = Az - y
    fz = float(np.vdot(rz, rz).real)
    grad = 2.0 * op.adjoint(rz)
    for _ in range(60):
        # shrink before dividing by L so lam >= lambda_max zeroes the start exactly
        xn = soft_threshold(L * z - grad, lam) / L
        if not np.all(np.isfinite(xn)):
            return None
        Axn = op.forward(xn)
        rn = Axn - y
        fn = float(np.vdot(rn, rn).real)
        d = xn - z
        quad = fz + float(np.vdot(grad, d).real) + 0.5 * L * float(np.vdot(d, d).real)
        if fn <= quad + 1e-12 * max(1.0, abs(quad)):
            return xn, Axn, fn, L
        L *= 2.0
    return xn, Axn, fn, L


def doppler_mask(h, half_width):
    """Zero Doppler bins farther than ``half_width`` from the energy centroid.

    The centroid is rounded to the nearest bin, so ``half_width=0`` keeps one bin.
    """
    energy = (np.abs(h) ** 2).sum(axis=0)
    total = energy.sum()
    if total == 0:
        return h
    bins = np.arange(h.shape[1])
    centre = int(round(float((bins * energy).sum() / total)))
    keep = np.abs(bins - centre) <= half_width
    return h * keep[None, :]


def refine(result: RecoveryResult, window: ObservationWindow, F, G,
           config: RecoveryConfig = RecoveryConfig(), op: WindowOperator | None = None) -> RecoveryResult:
    """Doppler truncation and least-squares debiasing on the detected support."""
    h = result.h_est
    if config.doppler_truncation is not None:
        h = doppler_mask(h, config.doppler_truncation)
    if not config.debias_on_support:
        return replace(result, h_est=h)
    mag = np.abs(h)
    peak = mag.max()
    if peak == 0:
        return replace(result, h_est=h, support=())
    ls, ms = np.nonzero(mag >= config.support_threshold * peak)
    op = op or WindowOperator.for_window(window, F, G)
    # column (l, m) of the restricted system: R_t F[:, l] G[t, m], stacked over t
    cols = op.Fsel[:, :, ls] * op.Gw[:, None, ms]  # (T, M, S)
    A = cols.reshape(-1, len(ls))
    # singular values below rcond * max are treated as zero: aliased atoms
    # (equal columns over the observed slots) get the minimum-norm split
    coef, _, rank, _ = np.linalg.lstsq(A, window.y.reshape(-1), rcond=config.lstsq_rcond)
    out = np.zeros_like(h)
    out[ls, ms] = coef
    support = tuple(zip(ls.tolist(), ms.tolist()))
    return replace(result, h_est=out, rank_deficient=bool(rank < len(ls)), support=support)


def reconstruct_latest(h_est, F, G, t0) -> np.ndarray:
    return F @ (np.asarray(h_est) @ G[t0])


def nmse(est, truth) -> float:
    est = np.asarray(est)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    denom = float(np.vdot(truth, truth).real)
    if denom == 0:
        raise ValueError("NMSE is undefined for an all-zero reference")
    diff = est - truth
    return float(np.vdot(diff, diff).real) / denom


def recover(window: ObservationWindow, F, G, config: RecoveryConfig = RecoveryConfig()) -> RecoveryResult:
    """FISTA, refinement and latest-slot reconstruction for one window."""
    op = WindowOperator.for_window(window, F, G)
    if config.lambda_override is not None:
        lam = float(config.lambda_override)
    else:
        lam = lambda_rule(float(np.mean(window.sigma_sq)), op.N_tau, op.N_nu, window.M, window.T)
    res = fista(window, F, G, lam, config, op=op)
    res = refine(res, window, F, G, config, op=op)
    return replace(res, latest_channel=reconstruct_latest(res.h_est, F, G, window.t0))
