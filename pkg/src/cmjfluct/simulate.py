"""Exact cohort-aggregated simulation of the lattice branching process.

Individuals born at the same time are exchangeable, so a path is fully
described by how many newborns of each cohort realized each litter atom.  One
time step costs O(#atoms) regardless of population size: the B_n newborns are
split across atoms by an exact multinomial draw (sequential binomial
splitting), and future births accumulate as integer counts.  All counts are
Python integers, so every pathwise identity below holds exactly until the
configured cap truncates the run.

The module also extracts every path functional the limit theorems refer to:
prediction errors X_{n,k} = Z_{n-k} - m^-k Z_n, reproduction innovations
W_{n,k} and W_n, scored characteristic totals, oscillation-coefficient
estimates, and the conditional quadratic variation of the count martingale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .offspring import OffspringLaw, char_moments, law_fingerprint, moments, validate_law
from .spectral import (
    SpectralReport,
    _apply_T_mu,
    _growth_from_mu,
    _poly_deriv,
    _poly_eval,
    malthusian,
    vector_v,
)

__all__ = [
    "Trace",
    "UEstimate",
    "run",
    "fluctuations",
    "innovations",
    "char_total",
    "char_decomposition_residual",
    "estimate_U",
    "martingale_qv",
    "verify_recursion",
    "expected_counts",
    "trace_csv",
]

_DEFAULT_CAP = 1 << 62


@dataclass(frozen=True, eq=False)
class Trace:
    """One exact population path, aggregated by birth cohort.

    ``B[n]`` newborns arrive at time ``n`` (``B[0] = 1``), ``Z[n]`` is the
    running total, ``cohort_atoms[n]`` counts how many of the ``B[n]``
    newborns realized each atom, and ``Bnk[n][k]`` is the number of children
    cohort ``n`` bears at time ``n + k`` (index 0 unused).  ``char_sum[n][a]``
    is the summed characteristic score of cohort ``n`` at age ``a`` when the
    law carries one, else ``None``.  If the population would have exceeded
    ``cap``, the trace ends at the last safe time and ``capped`` is set.
    """

    horizon: int
    B: tuple[int, ...]
    Z: tuple[int, ...]
    cohort_atoms: tuple[tuple[int, ...], ...]
    Bnk: tuple[tuple[int, ...], ...]
    char_sum: tuple[tuple[float, ...], ...] | None
    seed: object
    cap: int
    capped: bool


def _split_counts(rng: np.random.Generator, total: int, probs) -> list[int]:
    """Assign ``total`` newborns to atoms: exact multinomial via binomial splitting."""
    if len(probs) == 1:
        return [total]
    if len(probs) == 2:
        first = int(rng.binomial(total, probs[0]))
        return [first, total - first]
    counts: list[int] = []
    remaining = total
    mass_left = 1.0
    for p in probs[:-1]:
        ratio = 1.0 if mass_left <= p else p / mass_left
        drawn = int(rng.binomial(remaining, ratio))
        counts.append(drawn)
        remaining -= drawn
        mass_left -= p
    counts.append(remaining)
    return counts


def run(law: OffspringLaw, horizon: int, seed, cap: int = _DEFAULT_CAP) -> Trace:
    """Simulate one path started from a single individual born at time 0.

    Deterministic given ``(law, seed)``: the same seed always yields the same
    trace bit for bit.  ``cap`` bounds the population; a run that would exceed
    it is truncated at the last safe time with ``capped = True`` rather than
    faulting.
    """
    problems = validate_law(law)
    if problems:
        raise ValueError("law fails standing assumptions: " + "; ".join(problems))
    if horizon < 0:
        raise ValueError(f"horizon = {horizon} must be >= 0")
    if cap < 1:
        raise ValueError(f"cap = {cap} must be >= 1")
    rng = np.random.default_rng(seed)
    k_max = law.max_age
    probs = [atom.prob for atom in law.atoms]
    litters = [atom.births for atom in law.atoms]
    chars = [atom.char_values for atom in law.atoms] if law.has_char else None
    n_ages_phi = law.char_max_age + 1 if law.has_char else 0

    schedule = [0] * (horizon + k_max + 2)
    schedule[0] = 1
    b_list: list[int] = []
    z_list: list[int] = []
    cohort_rows: list[tuple[int, ...]] = []
    bnk_rows: list[tuple[int, ...]] = []
    char_rows: list[tuple[float, ...]] = []
    z_run = 0
    capped = False
    for n in range(horizon + 1):
        b_n = schedule[n]
        if z_run + b_n > cap:
            capped = True
            break
        z_run += b_n
        counts = _split_counts(rng, b_n, probs) if b_n > 0 else [0] * len(probs)
        row = [0] * (k_max + 1)
        for idx, c in enumerate(counts):
            if c:
                births = litters[idx]
                for k in range(1, k_max + 1):
                    row[k] += c * births[k]
        for k in range(1, k_max + 1):
            if row[k]:
                schedule[n + k] += row[k]
        b_list.append(b_n)
        z_list.append(z_run)
        cohort_rows.append(tuple(counts))
        bnk_rows.append(tuple(row))
        if chars is not None:
            char_rows.append(
                tuple(
                    float(sum(counts[idx] * chars[idx][age] for idx in range(len(counts))))
                    for age in range(n_ages_phi)
                )
            )
    return Trace(
        horizon=len(b_list) - 1,
        B=tuple(b_list),
        Z=tuple(z_list),
        cohort_atoms=tuple(cohort_rows),
        Bnk=tuple(bnk_rows),
        char_sum=tuple(char_rows) if chars is not None else None,
        seed=tuple(seed) if isinstance(seed, (list, tuple)) else seed,
        cap=cap,
        capped=capped,
    )


def fluctuations(trace: Trace, m: float, k_min: int, k_max: int) -> np.ndarray:
    """Matrix of prediction errors ``X[n, k - k_min] = Z_{n-k} - m^-k Z_n``.

    Counts before time 0 are zero.  Negative lags look ahead, so rows stop at
    ``horizon + k_min`` when ``k_min < 0``; faults if no row remains.
    """
    k_min, k_max = int(k_min), int(k_max)
    if k_max < k_min:
        raise ValueError(f"empty lag range [{k_min}, {k_max}]")
    n_last = trace.horizon + min(0, k_min)
    if n_last < 0:
        raise ValueError(f"lag {k_min} reaches beyond the trace horizon {trace.horizon}")
    Z = trace.Z
    ks = range(k_min, k_max + 1)
    X = np.empty((n_last + 1, k_max - k_min + 1))
    for j, k in enumerate(ks):
        inv_pow = float(m) ** (-k)
        for n in range(n_last + 1):
            past = float(Z[n - k]) if n - k >= 0 else 0.0
            X[n, j] = past - inv_pow * float(Z[n])
    return X


def innovations(trace: Trace, moments) -> tuple[np.ndarray, np.ndarray]:
    """Reproduction innovations ``W_n`` and ``W_{n,k} = B_{n,k} - mu_k B_n``.

    ``W_0 = B_0 = 1`` seeds the recursion; for ``n >= 1``,
    ``W_n = B_n - sum_k mu_k B_{n-k}``.  The pathwise identity
    ``W_n = sum_k W_{n-k,k}`` is re-derived from the stored cohort matrix and
    a violation beyond 1e-9 relative faults (it would mean the trace is
    internally inconsistent).
    """
    mu = moments.mu
    k_top = len(mu) - 1
    B = trace.B
    n_max = trace.horizon
    W = np.empty(n_max + 1)
    W[0] = float(B[0])
    for n in range(1, n_max + 1):
        acc = float(B[n])
        for k in range(1, min(n, k_top) + 1):
            acc -= mu[k] * float(B[n - k])
        W[n] = acc
    Wnk = np.zeros((n_max + 1, k_top + 1))
    for n in range(n_max + 1):
        b_n = float(B[n])
        row = trace.Bnk[n]
        for k in range(1, k_top + 1):
            Wnk[n, k] = float(row[k]) - mu[k] * b_n
    for n in range(1, n_max + 1):
        total = float(sum(Wnk[n - k, k] for k in range(1, min(n, k_top) + 1)))
        if abs(W[n] - total) > 1e-9 * max(1.0, abs(W[n]), abs(total)):
            raise RuntimeError(f"innovation identity violated at n = {n}: {W[n]!r} vs {total!r}")
    return W, Wnk


def _char_totals(trace: Trace, law: OffspringLaw) -> np.ndarray:
    k_phi = law.char_max_age
    cs = trace.char_sum
    totals = np.empty(trace.horizon + 1)
    frozen_tail = 0.0
    for n in range(trace.horizon + 1):
        acc = 0.0
        for age in range(0, min(n, k_phi) + 1):
            acc += cs[n - age][age]
        if law.char_extends and n - k_phi - 1 >= 0:
            frozen_tail += cs[n - k_phi - 1][k_phi]
            acc += frozen_tail
        totals[n] = acc
    return totals


def char_total(trace: Trace, law: OffspringLaw) -> np.ndarray:
    """Total characteristic score ``Z^phi_n`` of the population at each time.

    Cohort ``c`` contributes its recorded score at age ``n - c``; beyond the
    table the score is frozen (extending characteristic) or zero.  Before
    returning, the exact decomposition of the total into its mean part, the
    centered scores, and the lag-weighted prediction errors is re-checked to
    1e-9 relative and a violation faults.
    """
    if not law.has_char or trace.char_sum is None:
        raise ValueError("law carries no characteristic")
    totals = _char_totals(trace, law)
    worst = char_decomposition_residual(trace, law)
    if worst > 1e-9:
        raise RuntimeError(f"characteristic decomposition violated: max relative residual {worst!r}")
    return totals


def char_decomposition_residual(trace: Trace, law: OffspringLaw, m: float | None = None) -> float:
    """Max relative residual of ``Z^phi_n - lambda^phi Z_n = Zbar^phi_n + <X_n, dlambda>``.

    An exact pathwise identity (the increment vector telescopes the mean
    scores onto past counts), so the residual only measures float rounding.
    """
    if not law.has_char or trace.char_sum is None:
        raise ValueError("law carries no characteristic")
    if m is None:
        m = malthusian(law)
    tab = moments(law)
    cm = char_moments(law, m)
    lam = tab.lambda_phi
    delta = cm.delta_lambda
    totals = _char_totals(trace, law)
    cs = trace.char_sum
    k_phi = law.char_max_age
    B, Z = trace.B, trace.Z
    worst = 0.0
    centered_tail = 0.0
    for n in range(trace.horizon + 1):
        zbar = 0.0
        for age in range(0, min(n, k_phi) + 1):
            zbar += cs[n - age][age] - lam[age] * float(B[n - age])
        if law.char_extends and n - k_phi - 1 >= 0:
            centered_tail += cs[n - k_phi - 1][k_phi] - lam[k_phi] * float(B[n - k_phi - 1])
            zbar += centered_tail
        lag_dot = 0.0
        z_n = float(Z[n])
        for k in range(len(delta)):
            past = float(Z[n - k]) if n - k >= 0 else 0.0
            lag_dot += delta[k] * (past - float(m) ** (-k) * z_n)
        lhs = totals[n] - cm.lambda_scalar * z_n
        resid = abs(lhs - (zbar + lag_dot)) / max(1.0, abs(lhs))
        worst = max(worst, resid)
    return worst


@dataclass(frozen=True, eq=False)
class UEstimate:
    """Partial-sum estimate of one oscillation coefficient.

    ``value`` is the profile coefficient ``-(gamma (gamma - 1) mu_hat'(gamma))^-1
    sum_{k=0}^{n0} gamma^k W_k``; it includes the deterministic seed ``W_0 = 1``
    and is what the oscillation profile tracks.  ``centered`` drops that seed
    term and has exact mean zero across replicates (the remaining innovations
    are martingale differences), so unbiasedness checks must use it.
    ``tail_scale = (gamma_* sqrt(m))^n0`` indicates the size of the neglected
    tail relative to the (already convergent) partial sum.
    """

    value: complex
    centered: complex
    tail_scale: float
    root: complex
    n0: int


def estimate_U(trace: Trace, moments, report: SpectralReport, gamma_i: complex, n0: int) -> UEstimate:
    """Estimate the oscillation coefficient attached to critical root ``gamma_i``.

    Faults outside regime III, on a root not among the critical ones, on a
    non-simple critical root, and when ``n0`` exceeds the trace horizon.
    """
    if report.regime != "III":
        raise ValueError(f"regime {report.regime}: oscillation coefficients exist only in regime III")
    if report.non_simple:
        raise ValueError("non-simple critical root: the oscillation expansion does not apply")
    g = complex(gamma_i)
    match = min(report.gamma_crit, key=lambda r: abs(r - g))
    if abs(match - g) > 1e-8 * max(1.0, abs(g)):
        raise ValueError(f"gamma_i = {g!r} is not a critical root of this law")
    g = complex(match)
    if not 0 <= n0 <= trace.horizon:
        raise ValueError(f"n0 = {n0} outside trace horizon {trace.horizon}")
    W, _ = innovations(trace, moments)
    powers = g ** np.arange(n0 + 1)
    partial = complex(np.sum(powers * W[: n0 + 1]))
    deriv = _poly_eval(_poly_deriv(moments.mu).astype(complex), g)
    scale = -1.0 / (g * (g - 1.0) * deriv)
    return UEstimate(
        value=scale * partial,
        centered=scale * (partial - complex(W[0])),
        tail_scale=(report.gamma_star * math.sqrt(report.m)) ** n0,
        root=g,
        n0=int(n0),
    )


def martingale_qv(trace: Trace, moments, a: dict[int, float], n: int) -> float:
    """Conditional quadratic variation ``V_n`` of the count martingale for ``a``.

    ``V_n = sum_{l=0}^n B_{n-l} sum_{i,j=1}^l sigma_ij alpha_{l-i} alpha_{l-j}``
    with ``alpha_k`` the pairing of the k-th operator iterate against ``a``.
    ``V_n / Z_n`` converges to the epoch-series variance along a.s. every path.
    """
    if not 0 <= n <= trace.horizon:
        raise ValueError(f"n = {n} outside trace horizon {trace.horizon}")
    a = {int(k): float(c) for k, c in a.items() if c != 0.0}
    if any(k < 0 for k in a):
        raise ValueError("negative lags have no window components; see fluctuations()")
    if not a:
        return 0.0
    mu = moments.mu
    k_top = len(mu) - 1
    sig = moments.sigma[1:, 1:]
    m = _growth_from_mu(mu)
    y = vector_v(m, max(k_top, max(a)))
    alphas = np.empty(n + 1)
    for ell in range(n + 1):
        alphas[ell] = float(sum(c * y[k] for k, c in a.items()))
        if ell < n:
            y = _apply_T_mu(mu, m, y)
    total = 0.0
    for ell in range(1, n + 1):
        window = np.array([alphas[ell - i] if ell - i >= 0 else 0.0 for i in range(1, k_top + 1)])
        total += float(trace.B[n - ell]) * float(window @ sig @ window)
    return total


def verify_recursion(trace: Trace, moments, m: float, n_small: int, trunc: int) -> float:
    """Max relative residual of ``X_n = -sum_{k<=n} W_{n-k} T^k(v)`` for ``n <= n_small``.

    The identity is exact pathwise; the returned residual measures float
    rounding only and is the statistic a verification harness thresholds.
    Compared over window components ``k <= trunc - n_small``.
    """
    k_top = len(moments.mu) - 1
    if n_small > 20:
        raise ValueError("n_small capped at 20 (cost control)")
    if n_small > trace.horizon:
        raise ValueError(f"n_small = {n_small} exceeds trace horizon {trace.horizon}")
    if trunc < k_top + n_small:
        raise ValueError(f"trunc = {trunc} too small: need at least K + n_small = {k_top + n_small}")
    W, _ = innovations(trace, moments)
    iterates = [vector_v(m, trunc)]
    for _ in range(n_small):
        iterates.append(_apply_T_mu(moments.mu, m, iterates[-1]))
    X = fluctuations(trace, m, 0, trunc)
    k_cmp = trunc - n_small
    worst = 0.0
    for n in range(n_small + 1):
        rhs = np.zeros(trunc + 1)
        for k in range(n + 1):
            rhs -= W[n - k] * iterates[k]
        diff = np.abs(X[n, : k_cmp + 1] - rhs[: k_cmp + 1])
        scale = np.maximum(1.0, np.abs(X[n, : k_cmp + 1]))
        worst = max(worst, float(np.max(diff / scale)))
    return worst


def expected_counts(law: OffspringLaw, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact mean birth counts ``E B_n`` and totals ``E Z_n`` up to ``horizon``."""
    mu = moments(law).mu
    k_top = len(mu) - 1
    b = np.zeros(horizon + 1)
    b[0] = 1.0
    for n in range(1, horizon + 1):
        b[n] = float(sum(mu[k] * b[n - k] for k in range(1, min(n, k_top) + 1)))
    return b, np.cumsum(b)


def trace_csv(trace: Trace, law: OffspringLaw) -> str:
    """Serialize a trace to CSV with the law hash, seed, and cap in the header."""
    k_top = law.max_age
    lines = [
        f"# law = {law_fingerprint(law)}",
        f"# seed = {trace.seed!r}",
        f"# cap = {trace.cap}",
        f"# capped = {str(trace.capped).lower()}",
    ]
    cols = ["n", "B", "Z"] + [f"B_k{k}" for k in range(1, k_top + 1)]
    totals = None
    if law.has_char and trace.char_sum is not None:
        totals = char_total(trace, law)
        cols.append("Zphi")
    lines.append(",".join(cols))
    for n in range(trace.horizon + 1):
        cells = [str(n), str(trace.B[n]), str(trace.Z[n])]
        cells.extend(str(trace.Bnk[n][k]) for k in range(1, k_top + 1))
        if totals is not None:
            cells.append(format(totals[n], ".17g"))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
