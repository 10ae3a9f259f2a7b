"""Sector-bounded channel nonlinearities on the exchanged relative states.

A channel is a static scalar map ``phi`` with ``phi(0) = 0``.  It is
certified against a sector ``[s1, s2]`` when
``(phi(z) - s1 z)(phi(z) - s2 z) <= 0`` on the range of interest.

A :class:`ChannelBank` holds one channel per scalar relative state, ordered
edge-major (channel ``j * n + k`` acts on component ``k`` of edge ``j``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ChannelCountMismatch, InvalidSector

KIND_IDENTITY = 0
KIND_SATURATION = 1
KIND_GAIN = 2
KIND_TABLE = 3

KIND_CODES = {"identity": KIND_IDENTITY, "saturation": KIND_SATURATION,
              "static_gain": KIND_GAIN, "table": KIND_TABLE}

CERT_TOL = 1e-12


@dataclass(frozen=True)
class SectorBounds:
    sigma1: tuple[float, ...]
    sigma2: tuple[float, ...]

    def __post_init__(self):
        s1 = tuple(float(v) for v in np.atleast_1d(self.sigma1))
        s2 = tuple(float(v) for v in np.atleast_1d(self.sigma2))
        if len(s1) != len(s2) or not s1:
            raise InvalidSector("sigma1 and sigma2 must be non-empty and of equal length")
        for k, (a, b) in enumerate(zip(s1, s2)):
            if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
                raise InvalidSector(f"component {k}: need sigma1 < sigma2, got [{a}, {b}]")
        object.__setattr__(self, "sigma1", s1)
        object.__setattr__(self, "sigma2", s2)

    @classmethod
    def uniform(cls, sigma1: float, sigma2: float, n: int) -> "SectorBounds":
        return cls((sigma1,) * n, (sigma2,) * n)

    @property
    def n(self) -> int:
        return len(self.sigma1)

    @property
    def Sigma1(self) -> np.ndarray:
        return np.diag(self.sigma1)

    @property
    def Sigma2(self) -> np.ndarray:
        return np.diag(self.sigma2)

    @property
    def scalar(self) -> bool:
        return len(set(self.sigma1)) == 1 and len(set(self.sigma2)) == 1


@dataclass(frozen=True)
class SectorChannel:
    """One scalar channel.

    ``operating_bound`` is the largest ``|z|`` on which the declared sector is
    claimed; saturation at ``limit`` only lies in ``[limit/beta, 1]`` for
    ``|z| <= beta``.
    """

    kind: str
    gain: float = 1.0
    limit: float = math.inf
    table_x: tuple[float, ...] = ()
    table_y: tuple[float, ...] = ()
    operating_bound: float = math.inf

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind == "saturation" and not self.limit > 0:
            raise ValueError("saturation limit must be positive")
        if self.kind == "table":
            tx = np.asarray(self.table_x, float)
            ty = np.asarray(self.table_y, float)
            if tx.ndim != 1 or tx.shape != ty.shape or len(tx) < 2:
                raise ValueError("table needs matching breakpoint and value lists (>= 2 points)")
            if np.any(np.diff(tx) <= 0):
                raise ValueError("table breakpoints must be strictly increasing")
            if abs(float(_table_eval(tx, ty, np.zeros(1))[0])) > 1e-12:
                raise ValueError("table map must satisfy phi(0) = 0")

    @classmethod
    def identity(cls) -> "SectorChannel":
        return cls("identity")

    @classmethod
    def saturation(cls, limit: float, operating_bound: float = math.inf) -> "SectorChannel":
        return cls("saturation", limit=float(limit), operating_bound=float(operating_bound))

    @classmethod
    def static_gain(cls, gain: float) -> "SectorChannel":
        return cls("static_gain", gain=float(gain))

    @classmethod
    def table(cls, xs: Sequence[float], ys: Sequence[float]) -> "SectorChannel":
        return cls("table", table_x=tuple(map(float, xs)), table_y=tuple(map(float, ys)))

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "identity":
            return z.copy()
        if self.kind == "saturation":
            return np.clip(z, -self.limit, self.limit)
        if self.kind == "static_gain":
            return self.gain * z
        return _table_eval(np.asarray(self.table_x), np.asarray(self.table_y), z)


def _table_eval(tx: np.ndarray, ty: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation with linear extrapolation past both ends."""
    z = np.asarray(z, dtype=float)
    shape = z.shape
    z = z.reshape(-1)
    y = np.interp(z, tx, ty)
    lo, hi = z < tx[0], z > tx[-1]
    if np.any(lo):
        slope = (ty[1] - ty[0]) / (tx[1] - tx[0])
        y[lo] = ty[0] + slope * (z[lo] - tx[0])
    if np.any(hi):
        slope = (ty[-1] - ty[-2]) / (tx[-1] - tx[-2])
        y[hi] = ty[-1] + slope * (z[hi] - tx[-1])
    return y.reshape(shape)


@dataclass(frozen=True)
class PackedBank:
    """Flat array form of a bank, consumed by the simulation kernels."""

    kinds: np.ndarray        # int32, one code per channel
    params: np.ndarray       # gain for static_gain, limit for saturation
    tab_start: np.ndarray    # int32 offsets into tab_x / tab_y
    tab_len: np.ndarray      # int32
    tab_x: np.ndarray
    tab_y: np.ndarray


class ChannelBank:
    """The full map ``Phi`` over all ``M * n`` scalar relative states."""

    def __init__(self, channels: Sequence[SectorChannel], n: int, bounds: SectorBounds | None = None):
        channels = tuple(channels)
        if n <= 0 or len(channels) % n:
            raise ChannelCountMismatch(f"{len(channels)} channels is not a multiple of n={n}")
        if bounds is not None and bounds.n != n:
            raise ChannelCountMismatch(f"bounds cover {bounds.n} components, expected {n}")
        self.channels = channels
        self.n = n
        self.bounds = bounds
        self._packed = self._pack()

    def __len__(self) -> int:
        return len(self.channels)

    def __repr__(self) -> str:
        kinds = sorted({c.kind for c in self.channels})
        return f"ChannelBank({len(self)} channels, n={self.n}, kinds={kinds})"

    @property
    def edge_count(self) -> int:
        return len(self.channels) // self.n

    @classmethod
    def identity(cls, M: int, n: int, bounds: SectorBounds | None = None) -> "ChannelBank":
        return cls([SectorChannel.identity()] * (M * n), n, bounds)

    @classmethod
    def saturation(cls, M: int, limits: Sequence[float], operating_bounds: Sequence[float] | None = None,
                   bounds: SectorBounds | None = None) -> "ChannelBank":
        limits = [float(a) for a in limits]
        n = len(limits)
        betas = [math.inf] * n if operating_bounds is None else [float(b) for b in operating_bounds]
        per_edge = [SectorChannel.saturation(limits[k], betas[k]) for k in range(n)]
        return cls(per_edge * M, n, bounds)

    @classmethod
    def static_gains(cls, M: int, gains: Sequence[float], n: int | None = None,
                     bounds: SectorBounds | None = None) -> "ChannelBank":
        """Gains per component (length ``n``, reused on every edge) or per channel (``M * n``)."""
        gains = [float(g) for g in gains]
        if n is None:
            n = bounds.n if bounds is not None else len(gains)
        if len(gains) == n:
            gains = gains * M
        if len(gains) != M * n:
            raise ChannelCountMismatch(f"{len(gains)} gains for {M} edges x {n} components")
        return cls([SectorChannel.static_gain(g) for g in gains], n, bounds)

    @classmethod
    def random_gains(cls, M: int, bounds: SectorBounds, seed: int) -> "ChannelBank":
        """One uniform gain per channel in that component's sector, fixed for the run."""
        rng = np.random.default_rng(seed)
        lo = np.tile(bounds.sigma1, M)
        hi = np.tile(bounds.sigma2, M)
        gains = lo + (hi - lo) * rng.random(M * bounds.n)
        return cls([SectorChannel.static_gain(g) for g in gains], bounds.n, bounds)

    def with_bounds(self, bounds: SectorBounds) -> "ChannelBank":
        return ChannelBank(self.channels, self.n, bounds)

    def _pack(self) -> PackedBank:
        kinds = np.array([KIND_CODES[c.kind] for c in self.channels], dtype=np.int32)
        params = np.array([c.limit if c.kind == "saturation" else c.gain for c in self.channels])
        starts, lens, xs, ys = [], [], [], []
        offset = 0
        for c in self.channels:
            starts.append(offset)
            lens.append(len(c.table_x))
            xs.extend(c.table_x)
            ys.extend(c.table_y)
            offset += len(c.table_x)
        return PackedBank(kinds, params, np.array(starts, dtype=np.int32),
                          np.array(lens, dtype=np.int32), np.array(xs, float), np.array(ys, float))

    @property
    def packed(self) -> PackedBank:
        return self._packed

    def apply(self, z) -> np.ndarray:
        return apply(self, z)


def apply(bank: ChannelBank, z) -> np.ndarray:
    """Componentwise ``y = Phi(z)``; ``z`` may be a vector or a (samples, M*n) array."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != len(bank):
        raise ChannelCountMismatch(f"bank has {len(bank)} channels, z has {z.shape[-1]} entries")
    return apply_packed(bank.packed, z)


def apply_packed(pb: PackedBank, z: np.ndarray) -> np.ndarray:
    y = np.array(z, dtype=float, copy=True)
    kinds = pb.kinds
    sat = kinds == KIND_SATURATION
    if sat.any():
        lim = pb.params[sat]
        y[..., sat] = np.clip(z[..., sat], -lim, lim)
    gain = kinds == KIND_GAIN
    if gain.any():
        y[..., gain] = pb.params[gain] * z[..., gain]
    for c in np.flatnonzero(kinds == KIND_TABLE):
        s, ln = pb.tab_start[c], pb.tab_len[c]
        y[..., c] = _table_eval(pb.tab_x[s:s + ln], pb.tab_y[s:s + ln], z[..., c])
    return y


@dataclass(frozen=True)
class CertificateResult:
    passed: bool
    worst_product: float
    worst_z: float


def probe_grid(z_max: float, points: int = 2001) -> np.ndarray:
    half = np.linspace(0.0, z_max, max(points, 1000) // 2 + 1)
    return np.unique(np.r_[-half, half])


def sector_certificate(channel: SectorChannel, sigma1: float, sigma2: float,
                       z_max: float = 1e6, points: int = 2001) -> CertificateResult:
    """Evaluate the sector product on a symmetric probe grid that includes 0.

    The grid is clipped to the channel's operating bound.  Besides the uniform
    grid, a log-spaced grid covers small ``|z|`` where kinks usually sit.
    """
    if not sigma1 < sigma2:
        raise InvalidSector(f"need sigma1 < sigma2, got [{sigma1}, {sigma2}]")
    reach = min(z_max, channel.operating_bound)
    grid = probe_grid(reach, points)
    if reach > 0:
        logs = np.geomspace(min(1e-6, reach), reach, points // 2)
        grid = np.unique(np.r_[grid, logs, -logs])
    phi = channel(grid)
    product = (phi - sigma1 * grid) * (phi - sigma2 * grid)
    k = int(np.argmax(product))
    worst = float(product[k])
    return CertificateResult(worst <= CERT_TOL, worst, float(grid[k]))


def bank_certificate(bank: ChannelBank, z_max: float = 1e6, points: int = 2001) -> CertificateResult:
    if bank.bounds is None:
        raise InvalidSector("bank has no declared sector bounds")
    worst = CertificateResult(True, -math.inf, 0.0)
    cache: dict = {}
    for idx, ch in enumerate(bank.channels):
        k = idx % bank.n
        key = (ch, k)
        if key not in cache:
            cache[key] = sector_certificate(ch, bank.bounds.sigma1[k], bank.bounds.sigma2[k], z_max, points)
        res = cache[key]
        if res.worst_product > worst.worst_product:
            worst = res
    return CertificateResult(worst.worst_product <= CERT_TOL, worst.worst_product, worst.worst_z)


def saturation_sector(limit: float, operating_bound: float = math.inf) -> tuple[float, float]:
    """Sector ``[limit / beta, 1]`` of a symmetric saturation on ``|z| <= beta``."""
    if math.isinf(operating_bound):
        return 0.0, 1.0
    if operating_bound < limit:
        raise InvalidSector("operating bound below the saturation limit")
    return limit / operating_bound, 1.0
