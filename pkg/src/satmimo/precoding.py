"""Zero-forcing max-min precoding over the cascaded feeder uplink and user downlink.

The precoder is ``B = mu * (B0 + P_perp W)`` where ``B0`` inverts the cascade
``H_d H_ul`` and ``W`` spends the null-space freedom on flattening the
per-feed power ``[H_ul B B^H H_ul^H]_zz``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "PowerBudget",
    "SelectorMatrices",
    "PrecoderSolution",
    "FeedPowerSolution",
    "ZeroForcingInfeasible",
    "DegenerateChannelError",
    "selector_matrices",
    "pinv",
    "zf_base",
    "feed_powers",
    "minimize_max_feed_power",
    "scale_factors",
    "joint_precoder",
    "cascaded_precoder",
    "with_downlink_power",
]

PINV_CUTOFF = 1e-12
RANK_TOL = 1e-9


class ZeroForcingInfeasible(ValueError):
    """The cascaded channel is rank deficient, so no zero-forcing precoder exists."""


class DegenerateChannelError(ValueError):
    """A scale factor would divide by zero."""


@dataclass(frozen=True)
class PowerBudget:
    """Power limits and noise levels (linear units).

    ``sigma_ul_sq`` and ``sigma_dl_sq`` are per real dimension; the complex
    noise variance is twice that.
    """

    p_ul_w: float
    p_dl_w: float
    sigma_ul_sq: float = 0.0
    sigma_dl_sq: float = 0.0

    def __post_init__(self):
        for name in ("p_ul_w", "p_dl_w", "sigma_ul_sq", "sigma_dl_sq"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class SelectorMatrices:
    """0/1 masks mapping precoder rows to gateway antennas (one mask per antenna)."""

    masks: np.ndarray

    @property
    def matrices(self) -> list:
        return [np.diag(m) for m in self.masks]

    def antenna_powers(self, b: np.ndarray) -> np.ndarray:
        row_power = np.sum(np.abs(b) ** 2, axis=1)
        return self.masks @ row_power


def selector_matrices(z_t: int, antenna_of_entry=None, n_antennas: int = 2) -> SelectorMatrices:
    """Alternating odd/even selectors by default, or masks from an explicit antenna map."""
    if antenna_of_entry is None:
        antenna_of_entry = np.arange(z_t) % n_antennas
    a = np.asarray(antenna_of_entry, dtype=int)
    if a.shape != (z_t,):
        raise ValueError("antenna map must have one entry per precoder row")
    n = int(a.max()) + 1
    masks = np.zeros((n, z_t))
    masks[a, np.arange(z_t)] = 1.0
    return SelectorMatrices(masks)


@dataclass(frozen=True)
class FeedPowerSolution:
    w_matrix: np.ndarray
    t: float
    feed_power: np.ndarray
    baseline_t: float


@dataclass(frozen=True)
class PrecoderSolution:
    b_matrix: np.ndarray
    mu: float
    a_sl: float
    w_matrix: np.ndarray
    diag_target: np.ndarray
    b_bar: np.ndarray
    feed_power: np.ndarray
    antenna_power: np.ndarray
    beam_power: np.ndarray
    variant: str = "joint"

    @property
    def user_gain(self) -> float:
        """Common end-to-end amplitude ``a_SL * mu`` seen by every user."""
        return self.a_sl * self.mu


def pinv(a: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(a, rcond=PINV_CUTOFF)


def _check_rank(a: np.ndarray, what: str):
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[0] == 0 or sv[-1] < RANK_TOL * sv[0]:
        raise ZeroForcingInfeasible(f"{what} is rank deficient; no zero forcing is possible")


def zf_base(h_dl, h_ul):
    """Right inverse ``H_ul^+ H_d^+`` of the cascade and the projector onto its null space."""
    h_dl = np.atleast_2d(np.asarray(h_dl, dtype=complex))
    h_ul = np.atleast_2d(np.asarray(h_ul, dtype=complex))
    k, z = h_dl.shape
    if h_ul.shape != (z, z):
        raise ValueError(f"uplink must be {z}x{z}, got {h_ul.shape}")
    if k > z:
        raise ZeroForcingInfeasible(f"{k} users exceed {z} feeds")
    _check_rank(h_ul, "uplink channel")
    cascade = h_dl @ h_ul
    _check_rank(cascade, "cascaded channel")
    b0 = pinv(h_ul) @ pinv(h_dl)
    p_perp = np.eye(z) - pinv(cascade) @ cascade
    return b0, p_perp


def feed_powers(h_ul, b_bar) -> np.ndarray:
    """Per-feed power ``[H_ul B B^H H_ul^H]_zz``."""
    return np.sum(np.abs(np.asarray(h_ul) @ np.asarray(b_bar)) ** 2, axis=1)


def _null_basis(p_perp: np.ndarray) -> np.ndarray:
    p = 0.5 * (p_perp + p_perp.conj().T)
    vals, vecs = np.linalg.eigh(p)
    return vecs[:, vals > 0.5]


def _pack(y: np.ndarray) -> np.ndarray:
    return np.concatenate([y.real.ravel(), y.imag.ravel()])


def _unpack(x: np.ndarray, r: int, k: int) -> np.ndarray:
    n = r * k
    return (x[:n] + 1j * x[n:2 * n]).reshape(r, k)


def _solve_feed_problem(c: np.ndarray, m: np.ndarray, tol: float, tie_break: bool):
    """Minimize ``max_z |c_z + m_z Y|^2`` over complex ``Y`` (r x K).

    Returns ``Y``. With ``tie_break`` a second pass picks the minimum-norm
    ``m Y`` among (near-)minimizers, so the answer depends only on the
    subspace spanned by ``m`` and not on its basis.
    """
    z, k = c.shape
    r = m.shape[1]
    scale = float(np.max(np.sum(np.abs(c) ** 2, axis=1)))
    c = c / np.sqrt(scale)
    m = m / np.sqrt(scale)
    n = r * k

    def resid(y):
        return c + m @ y

    def f_and_grad(x):
        y = _unpack(x, r, k)
        v = resid(y)
        f = np.sum(np.abs(v) ** 2, axis=1)
        # d f_z / d Y_ik = 2 conj(v_zk) m_zi  (Wirtinger form, split into Re/Im parts)
        g = 2.0 * np.einsum("zi,zk->zik", m, v.conj())
        return f, np.concatenate([g.real.reshape(z, n), -g.imag.reshape(z, n)], axis=1)

    y0 = -np.linalg.lstsq(m, c, rcond=None)[0]
    f0, _ = f_and_grad(_pack(y0))

    def cons1(x):
        f, _ = f_and_grad(x[:-1])
        return x[-1] - f

    def cons1_jac(x):
        _, g = f_and_grad(x[:-1])
        return np.hstack([-g, np.ones((z, 1))])

    x0 = np.concatenate([_pack(y0), [f0.max()]])
    res = minimize(
        lambda x: x[-1],
        x0,
        jac=lambda x: np.concatenate([np.zeros(2 * n), [1.0]]),
        constraints=[{"type": "ineq", "fun": cons1, "jac": cons1_jac}],
        method="SLSQP",
        options={"ftol": tol, "maxiter": 500},
    )
    y = _unpack(res.x[:-1], r, k)
    t_star = float(np.max(f_and_grad(res.x[:-1])[0]))
    if not tie_break:
        return y
    bound = t_star * (1.0 + 1e-9)
    mm = m.conj().T @ m

    def obj2(x):
        y = _unpack(x, r, k)
        my = m @ y
        g = 2.0 * (mm @ y)
        return float(np.sum(np.abs(my) ** 2)), np.concatenate([g.real.ravel(), g.imag.ravel()])

    res2 = minimize(
        obj2,
        _pack(y),
        jac=True,
        constraints=[{
            "type": "ineq",
            "fun": lambda x: bound - f_and_grad(x)[0],
            "jac": lambda x: -f_and_grad(x)[1],
        }],
        method="SLSQP",
        options={"ftol": tol, "maxiter": 500},
    )
    y2 = _unpack(res2.x, r, k)
    if np.max(f_and_grad(res2.x)[0]) <= bound * (1 + 1e-9):
        return y2
    return y


def minimize_max_feed_power(h_ul, b_bar_0, p_perp, tol: float = 1e-14, tie_break: bool = True) -> FeedPowerSolution:
    """Null-space coefficients ``W`` minimizing the largest per-feed power.

    Solved as the epigraph program ``min t s.t. f_z(W) <= t`` with SLSQP on a
    basis of the null space.
    """
    h_ul = np.asarray(h_ul, dtype=complex)
    b0 = np.asarray(b_bar_0, dtype=complex)
    z, k = b0.shape
    base = feed_powers(h_ul, b0)
    basis = _null_basis(np.asarray(p_perp, dtype=complex))
    if basis.shape[1] == 0:
        return FeedPowerSolution(np.zeros((z, k), dtype=complex), float(base.max()), base, float(base.max()))
    y = _solve_feed_problem(h_ul @ b0, h_ul @ basis, tol, tie_break)
    w = basis @ y
    f = feed_powers(h_ul, b0 + w)
    if f.max() > base.max():
        w = np.zeros_like(w)
        f = base
    return FeedPowerSolution(w, float(f.max()), f, float(base.max()))


def scale_factors(b_bar, h_ul, budget: PowerBudget, selectors: SelectorMatrices | None = None, relaxed: bool = True):
    """Closed-form ``mu`` and ``a_SL``.

    ``mu`` meets the tightest gateway-antenna limit. ``a_SL`` meets the beam
    limit; with ``relaxed=False`` the relayed uplink noise is included.
    """
    b_bar = np.asarray(b_bar, dtype=complex)
    selectors = selectors or selector_matrices(b_bar.shape[0])
    ant = selectors.antenna_powers(b_bar)
    if ant.max() <= 0:
        raise DegenerateChannelError("precoder carries no power")
    mu = float(np.sqrt(budget.p_ul_w / ant.max()))
    f = feed_powers(h_ul, b_bar)
    denom = mu**2 * f.max() + (0.0 if relaxed else 2.0 * budget.sigma_ul_sq)
    if denom <= 0:
        raise DegenerateChannelError("zero per-beam power")
    return mu, float(np.sqrt(budget.p_dl_w / denom))


def _assemble(b_bar, w, h_ul, budget, selectors, k, variant) -> PrecoderSolution:
    mu, a_sl = scale_factors(b_bar, h_ul, budget, selectors, relaxed=False)
    b = mu * b_bar
    f = feed_powers(h_ul, b)
    beam = a_sl**2 * (f + 2.0 * budget.sigma_ul_sq)
    return PrecoderSolution(
        b_matrix=b,
        mu=mu,
        a_sl=a_sl,
        w_matrix=w,
        diag_target=np.full(k, mu),
        b_bar=b_bar,
        feed_power=f,
        antenna_power=selectors.antenna_powers(b),
        beam_power=beam,
        variant=variant,
    )


def joint_precoder(h_dl, h_ul, budget: PowerBudget, selectors: SelectorMatrices | None = None) -> PrecoderSolution:
    h_dl = np.atleast_2d(np.asarray(h_dl, dtype=complex))
    h_ul = np.asarray(h_ul, dtype=complex)
    selectors = selectors or selector_matrices(h_ul.shape[0])
    b0, p_perp = zf_base(h_dl, h_ul)
    sol = minimize_max_feed_power(h_ul, b0, p_perp)
    b_bar = b0 + p_perp @ sol.w_matrix
    return _assemble(b_bar, sol.w_matrix, h_ul, budget, selectors, h_dl.shape[0], "joint")


def cascaded_precoder(h_dl, h_ul, budget: PowerBudget, selectors: SelectorMatrices | None = None) -> PrecoderSolution:
    """Uplink inverse followed by a downlink-only max-min ZF precoder."""
    h_dl = np.atleast_2d(np.asarray(h_dl, dtype=complex))
    h_ul = np.asarray(h_ul, dtype=complex)
    z = h_ul.shape[0]
    selectors = selectors or selector_matrices(z)
    _check_rank(h_ul, "uplink channel")
    b_ul = pinv(h_ul)
    b0_dl, p_dl = zf_base(h_dl, np.eye(z))
    sol = minimize_max_feed_power(np.eye(z), b0_dl, p_dl)
    b_dl = b0_dl + p_dl @ sol.w_matrix
    return _assemble(b_ul @ b_dl, sol.w_matrix, h_ul, budget, selectors, h_dl.shape[0], "cascaded")


def with_downlink_power(sol: PrecoderSolution, p_dl_w: float, budget: PowerBudget) -> PrecoderSolution:
    """Re-scale a solution to a new beam power limit (``a_SL`` grows as the square root)."""
    ratio = np.sqrt(p_dl_w / budget.p_dl_w)
    return replace(sol, a_sl=sol.a_sl * ratio, beam_power=sol.beam_power * ratio**2)
