"""End-to-end effective channel, per-user CINR, mutual information and rate aggregation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.stats import norm, qmc

from .precoding import PrecoderSolution

__all__ = [
    "EffectiveChannel",
    "ConstellationAlphabet",
    "MiResult",
    "MiTable",
    "RateReport",
    "psk",
    "apsk",
    "DEFAULT_ALPHABETS",
    "effective_channel",
    "per_user_cinr",
    "spectral_efficiency",
    "mutual_information_mc",
    "mutual_information_gh",
    "mi_table",
    "carrier_count",
    "sum_rate",
    "build_report",
]


@dataclass(frozen=True)
class EffectiveChannel:
    """``C = a_SL H_d H_ul B`` and the per-user total disturbance variance ``2 sigma_k^2``."""

    c_matrix: np.ndarray
    interference_plus_noise_var: np.ndarray
    interference_var: np.ndarray
    relayed_noise_var: np.ndarray
    downlink_noise_var: float


def effective_channel(h_dl, h_ul, precoder: PrecoderSolution, sigma_ul_sq: float, sigma_dl_sq: float) -> EffectiveChannel:
    h_dl = np.atleast_2d(np.asarray(h_dl, dtype=complex))
    c = precoder.a_sl * (h_dl @ np.asarray(h_ul) @ precoder.b_matrix)
    off = np.abs(c) ** 2
    np.fill_diagonal(off, 0.0)
    interference = off.sum(axis=1)
    relayed = precoder.a_sl**2 * np.sum(np.abs(h_dl) ** 2, axis=1) * 2.0 * sigma_ul_sq
    var = interference + relayed + 2.0 * sigma_dl_sq
    return EffectiveChannel(c, var, interference, relayed, 2.0 * sigma_dl_sq)


def per_user_cinr(eff: EffectiveChannel, k: int | None = None):
    """Signal power over total disturbance variance, ``|c_kk|^2 / (2 sigma_k^2)``."""
    sig = np.abs(np.diag(eff.c_matrix)) ** 2
    cinr = sig / eff.interference_plus_noise_var
    return cinr if k is None else float(cinr[k])


def spectral_efficiency(cinr):
    out = np.log2(1.0 + np.asarray(cinr, dtype=float))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConstellationAlphabet:
    name: str
    symbols: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=complex)
        s = s / np.sqrt(np.mean(np.abs(s) ** 2))
        object.__setattr__(self, "symbols", s)

    @property
    def order(self) -> int:
        return len(self.symbols)

    @property
    def bits(self) -> float:
        return math.log2(self.order)


def psk(m: int, name: str | None = None) -> ConstellationAlphabet:
    pts = np.exp(1j * (2 * np.pi * np.arange(m) / m + np.pi / m))
    return ConstellationAlphabet(name or f"{m}PSK", pts)


def apsk(rings: Sequence[int], radii: Sequence[float], name: str) -> ConstellationAlphabet:
    pts = []
    for n, r in zip(rings, radii):
        offset = np.pi / n
        pts.append(r * np.exp(1j * (2 * np.pi * np.arange(n) / n + offset)))
    return ConstellationAlphabet(name, np.concatenate(pts))


# DVB-S2 ring ratios for rate-2/3 style 16APSK and 32APSK
DEFAULT_ALPHABETS = (
    psk(4, "QPSK"),
    psk(8, "8PSK"),
    apsk((4, 12), (1.0, 2.75), "16APSK"),
    apsk((4, 12, 16), (1.0, 2.72, 4.87), "32APSK"),
)


@dataclass(frozen=True)
class MiResult:
    mi: float
    stderr: float


def _loss(alphabet: ConstellationAlphabet, gain: complex, noise: np.ndarray, sigma_sq: float, sent: int) -> np.ndarray:
    """Per-draw ``log2 sum_s' exp(-(|y - c s'|^2 - |y - c s|^2) / (2 sigma^2))`` for one sent symbol."""
    s = alphabet.symbols
    d = gain * (s[sent] - s)
    # |n + d|^2 - |n|^2 = |d|^2 + 2 Re(conj(n) d)
    expo = -(np.abs(d)[:, None] ** 2 + 2.0 * np.real(noise.conj()[None, :] * d[:, None])) / (2.0 * sigma_sq)
    mx = expo.max(axis=0)
    return (mx + np.log(np.exp(expo - mx).sum(axis=0))) / np.log(2.0)


def mutual_information_mc(
    alphabet: ConstellationAlphabet,
    c_kk: complex,
    var_per_real: float,
    n_samples: int = 20000,
    seed: int = 0,
    replicates: int = 8,
) -> MiResult:
    """Randomized quasi-Monte-Carlo mutual information for uniform inputs.

    The disturbance is circularly-symmetric Gaussian with ``var_per_real``
    per real dimension. Noise draws come from independently scrambled Sobol
    sequences (one per replicate), mapped through the normal quantile, and
    the standard error is taken across replicates. Every alphabet point gets
    the same number of draws, rounded up to a power of two.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    if not var_per_real > 0:
        raise ValueError("noise variance must be positive")
    m = alphabet.order
    if c_kk == 0:
        return MiResult(0.0, 0.0)
    per = max(2, int(math.ceil(n_samples / (m * replicates))))
    log2_per = int(math.ceil(math.log2(per)))
    seeds = np.random.SeedSequence(seed).spawn(replicates)
    estimates = np.empty(replicates)
    for r, ss in enumerate(seeds):
        sobol = qmc.Sobol(d=2, scramble=True, seed=np.random.default_rng(ss))
        u = sobol.random_base2(log2_per)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        z = norm.ppf(u)
        noise = np.sqrt(var_per_real) * (z[:, 0] + 1j * z[:, 1])
        estimates[r] = np.mean([_loss(alphabet, c_kk, noise, var_per_real, i).mean() for i in range(m)])
    mi = alphabet.bits - float(estimates.mean())
    stderr = float(estimates.std(ddof=1) / np.sqrt(replicates))
    return MiResult(min(max(mi, 0.0), alphabet.bits), stderr)


def mutual_information_gh(alphabet: ConstellationAlphabet, es_n0_linear: float, nodes: int = 48) -> float:
    """Gauss-Hermite tensor quadrature of the same mutual information (deterministic)."""
    if es_n0_linear <= 0:
        return 0.0
    x, w = np.polynomial.hermite.hermgauss(nodes)
    sigma_sq = 1.0 / (2.0 * es_n0_linear)
    nr, ni = np.meshgrid(x, x, indexing="ij")
    noise = np.sqrt(2.0 * sigma_sq) * (nr + 1j * ni).ravel()
    weight = (w[:, None] * w[None, :]).ravel() / np.pi
    loss = [_loss(alphabet, 1.0, noise, sigma_sq, i) @ weight for i in range(alphabet.order)]
    return float(alphabet.bits - np.mean(loss))


@dataclass(frozen=True)
class MiTable:
    """Interpolation table of the best-alphabet mutual information versus Es/N0 in dB."""

    snr_db: np.ndarray
    mi: np.ndarray
    per_alphabet: np.ndarray
    names: tuple

    def __call__(self, snr_linear):
        snr = np.maximum(np.asarray(snr_linear, dtype=float), 1e-30)
        out = np.interp(10 * np.log10(snr), self.snr_db, self.mi, left=0.0, right=self.mi[-1])
        return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=8)
def mi_table(
    alphabets: tuple = DEFAULT_ALPHABETS,
    lo_db: float = -20.0,
    hi_db: float = 30.0,
    step_db: float = 0.25,
    n_samples: int = 20000,
    seed: int = 7,
) -> MiTable:
    """Monte-Carlo MI on an Es/N0 grid, maximised over alphabets and made monotone."""
    grid = np.arange(lo_db, hi_db + step_db / 2, step_db)
    table = np.empty((len(alphabets), grid.size))
    for a, alph in enumerate(alphabets):
        for i, snr_db in enumerate(grid):
            var = 1.0 / (2.0 * 10 ** (snr_db / 10))
            table[a, i] = mutual_information_mc(alph, 1.0, var, n_samples, seed + 1000 * a + i).mi
        table[a] = np.maximum.accumulate(table[a])
    return MiTable(grid, table.max(axis=0), table, tuple(a.name for a in alphabets))


def carrier_count(bandwidth_hz: float, symbol_period_s: float, rolloff_guard: float = 1.05) -> int:
    """Number of FDMA carriers ``floor(B T_s / 1.05)``."""
    return int(math.floor(bandwidth_hz * symbol_period_s / rolloff_guard + 1e-9))


def sum_rate(group_rates: Sequence, symbol_period_s: float, z_t: int, n_carriers: int = 1):
    """Time-shared sum rate ``R`` and rate per beam ``R/Z_t``.

    ``group_rates`` holds per-user metrics in bit per channel use, one array
    per group. Groups share the frame uniformly.
    """
    if len(group_rates) < 1:
        raise ValueError("at least one group is required")
    total = sum(float(np.sum(g)) for g in group_rates) / len(group_rates)
    r = total * n_carriers / symbol_period_s
    return r, r / z_t


@dataclass(frozen=True)
class RateReport:
    cinr_linear: np.ndarray
    spectral_eff_bshz: np.ndarray
    mi_bits_per_cu: np.ndarray
    rate_bps: np.ndarray
    group_index: np.ndarray
    group_sum_bps: np.ndarray
    sum_rate_bps: float
    rate_per_beam_bps: float
    sum_rate_gaussian_bps: float
    symbol_rate_hz: float
    carriers: int


def build_report(
    group_cinr: Sequence, table: MiTable, symbol_period_s: float, n_carriers: int, z_t: int
) -> RateReport:
    """Aggregate per-group CINR arrays into a rate report."""
    cinr = np.concatenate([np.asarray(g, dtype=float) for g in group_cinr]) if group_cinr else np.zeros(0)
    gidx = np.concatenate([np.full(len(g), i) for i, g in enumerate(group_cinr)]) if group_cinr else np.zeros(0, int)
    se = spectral_efficiency(cinr)
    mi = table(cinr)
    scale = n_carriers / symbol_period_s
    sums = np.array([np.sum(mi[gidx == g]) * scale for g in range(len(group_cinr))])
    r, rb = sum_rate([mi[gidx == g] for g in range(len(group_cinr))], symbol_period_s, z_t, n_carriers)
    rg, _ = sum_rate([se[gidx == g] for g in range(len(group_cinr))], symbol_period_s, z_t, n_carriers)
    return RateReport(cinr, np.atleast_1d(se), np.atleast_1d(mi), np.atleast_1d(mi) * scale, gidx, sums, r, rb, rg,
                      1.0 / symbol_period_s, n_carriers)
