"""Synthetic sparse delay-Doppler channels and windowed pilot observations.

The full-band channel at slot ``t`` is ``H_t = F @ h @ G[t]`` with ``h`` an
``(N_tau, N_nu)`` sparse coefficient matrix. Each slot observes only the
``M`` subcarriers of the subband the pattern activates, plus white noise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .patterns import GridDims, PilotPattern, cyclic_shift
from .rng import make_rng


@dataclass(frozen=True)
class SimConfig:
    """Grid sizes and channel statistics for one simulated window.

    ``max_doppler`` is in cycles per slot at ``pilot_interval == 1``; the
    interval only rescales slot times inside the Doppler dictionary.
    ``window`` is the number of slots ``T`` observed, ending at ``t0 = T-1``.
    """

    k: int = 17
    M: int = 24
    N_tau: int = 64
    N_nu: int = 16
    num_paths: int = 6
    max_doppler: float = 0.02
    pilot_interval: float = 1.0
    pdp_decay: float = 0.1
    snr_db: float = 30.0
    window: int = 10
    seed: int = 0

    def __post_init__(self):
        dims = GridDims(self.k, self.M)
        if self.N_tau < 1 or self.N_nu < 1:
            raise ValueError("N_tau and N_nu must be positive")
        if self.N_tau > dims.N:
            raise ValueError(f"N_tau={self.N_tau} exceeds the {dims.N} subcarriers")
        if not 1 <= self.num_paths <= self.N_tau * self.N_nu:
            raise ValueError(f"num_paths={self.num_paths} must lie in 1..{self.N_tau * self.N_nu}")
        if self.window < 1:
            raise ValueError(f"window must be positive, got {self.window}")
        if self.N_nu < self.window:
            raise ValueError(f"N_nu={self.N_nu} must be at least the window length {self.window}")
        if self.pilot_interval <= 0:
            raise ValueError("pilot_interval must be positive")

    @property
    def dims(self) -> GridDims:
        return GridDims(self.k, self.M)

    @property
    def N(self) -> int:
        return self.k * self.M

    @property
    def t0(self) -> int:
        return self.window - 1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DDChannel:
    h: np.ndarray
    support: tuple = field(default=())

    @classmethod
    def from_matrix(cls, h) -> "DDChannel":
        h = np.asarray(h, dtype=np.complex128)
        ls, ms = np.nonzero(h)
        return cls(h, tuple((int(l), int(m), complex(h[l, m])) for l, m in zip(ls, ms)))


@dataclass(frozen=True)
class ObservationWindow:
    """Pilot measurements of one user over ``T`` consecutive slots.

    Row ``i`` of ``y`` is the length-``M`` observation at slot ``times[i]``
    on subband ``subbands[i]`` with noise variance ``sigma_sq[i]``.
    """

    times: np.ndarray
    subbands: np.ndarray
    y: np.ndarray
    sigma_sq: np.ndarray
    M: int

    @property
    def T(self) -> int:
        return len(self.times)

    @property
    def t0(self) -> int:
        return int(self.times[-1])

    @property
    def slots(self) -> list[dict]:
        return [
            {"t": int(t), "subband": int(f), "y": self.y[i], "sigma_sq": float(self.sigma_sq[i])}
            for i, (t, f) in enumerate(zip(self.times, self.subbands))
        ]


def doppler_grid(config: SimConfig) -> np.ndarray:
    """Centred Doppler frequency of each bin, spanning ``[-max_doppler, max_doppler)``."""
    m = np.arange(config.N_nu) - config.N_nu // 2
    return 2.0 * config.max_doppler * m / config.N_nu


def build_dictionaries(config: SimConfig):
    """Frequency-delay matrix ``F`` (N x N_tau) and time-Doppler matrix ``G``.

    ``G`` has one row per absolute slot in the window. Bin ``N_nu // 2`` is
    zero Doppler, so that column of ``G`` is all ones.
    """
    n = np.arange(config.N)[:, None]
    ell = np.arange(config.N_tau)[None, :]
    F = np.exp(-2j * np.pi * n * ell / config.N) / math.sqrt(config.N_tau)
    t = np.arange(config.window)[:, None] * config.pilot_interval
    G = np.exp(2j * np.pi * t * doppler_grid(config)[None, :])
    return F, G


def sample_channel(config: SimConfig, rng=None) -> DDChannel:
    """Draw ``num_paths`` distinct on-grid paths.

    Delays follow an exponential power-delay profile, Doppler bins are
    uniform, and path gains are circular Gaussian with powers summing to one
    so that ``E ||h||_F^2 = 1``.
    """
    rng = make_rng(config.seed) if rng is None else make_rng(rng)
    S = config.num_paths
    delay_w = np.exp(-config.pdp_decay * np.arange(config.N_tau))
    cell_w = np.repeat(delay_w, config.N_nu)
    cells = rng.choice(config.N_tau * config.N_nu, size=S, replace=False, p=cell_w / cell_w.sum())
    ls, ms = np.divmod(cells, config.N_nu)
    power = np.exp(-config.pdp_decay * ls)
    power = power / power.sum()
    gains = np.sqrt(power / 2) * (rng.standard_normal(S) + 1j * rng.standard_normal(S))
    h = np.zeros((config.N_tau, config.N_nu), dtype=np.complex128)
    h[ls, ms] = gains
    support = tuple(sorted((int(l), int(m), complex(g)) for l, m, g in zip(ls, ms, gains)))
    return DDChannel(h, support)


def channel_at(h, F, G, t) -> np.ndarray:
    """Full-band frequency response ``F @ h @ G[t]`` at slot ``t``."""
    return F @ (np.asarray(h) @ G[t])


def noise_variance(h_t, snr_db) -> float:
    """Per-subcarrier noise variance for the average full-band power of ``h_t``."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return float(np.mean(np.abs(h_t) ** 2) * 10.0 ** (-snr_db / 10.0))


def observe(pattern: PilotPattern, shift: int, channel: DDChannel, config: SimConfig,
            rng=None, F=None, G=None) -> ObservationWindow:
    """Noisy subband observations over the window for one cyclic shift."""
    if pattern.k != config.k:
        raise ValueError(f"pattern k={pattern.k} differs from config k={config.k}")
    if F is None or G is None:
        F, G = build_dictionaries(config)
    rng = make_rng(config.seed) if rng is None else make_rng(rng)
    sched = cyclic_shift(pattern, shift).schedule
    T, M = config.window, config.M
    times = np.arange(T)
    subbands = np.array([sched[t % config.k] for t in times], dtype=np.int64)
    full = F @ (channel.h @ G.T)  # (N, T)
    y = np.empty((T, M), dtype=np.complex128)
    sigma_sq = np.empty(T)
    for i, t in enumerate(times):
        h_t = full[:, t]
        sigma_sq[i] = noise_variance(h_t, config.snr_db)
        rows = slice(subbands[i] * M, (subbands[i] + 1) * M)
        w = math.sqrt(sigma_sq[i] / 2) * (rng.standard_normal(M) + 1j * rng.standard_normal(M))
        y[i] = h_t[rows] + w
    return ObservationWindow(times, subbands, y, sigma_sq, M)
