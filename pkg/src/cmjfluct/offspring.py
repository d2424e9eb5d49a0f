"""Offspring laws for age-structured branching populations on the integer lattice.

Every individual reproduces according to one of finitely many litter patterns
("atoms"): atom ``a`` is chosen with probability ``p_a`` and then deposits
``births[k]`` children at integer age ``k`` for ``k = 1..K``.  An optional
bounded characteristic attaches a deterministic score ``phi(age)`` to each
atom, evaluated at ages ``0..K_phi`` (and either zero or frozen at its last
value beyond that, depending on ``char_extends``).

This module owns the law container, structural construction checks, the
first/second moment tables, and the transforms

    mu_hat(z)  = sum_k  E[N_k] z^k
    Sigma(z)   = sum_a p_a |Xi_a(z) - mu_hat(z)|^2,   Xi_a(z) = sum_k births_a[k] z^k

used by the spectral and limit modules.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LitterAtom",
    "OffspringLaw",
    "MomentTable",
    "CharMoments",
    "make_law",
    "validate_law",
    "moments",
    "mu_hat",
    "mu_hat_prime",
    "sigma_hat",
    "xi_hat_sample",
    "char_moments",
    "law_fingerprint",
]

#: Negative values of Sigma(z) below this threshold are treated as a fault
#: rather than roundoff.
_SIGMA_CLAMP = -1e-12


@dataclass(frozen=True)
class LitterAtom:
    """One litter pattern: probability, births by age, optional characteristic.

    ``births[k]`` is the number of children borne at age ``k``; index 0 is
    unused and always 0.  ``char_values[j]`` is the characteristic score at
    age ``j`` for ``j = 0..K_phi``; ``None`` when the law carries no
    characteristic.
    """

    prob: float
    births: tuple[int, ...]
    char_values: tuple[float, ...] | None = None

    @property
    def total(self) -> int:
        """Total number of children produced by this atom."""
        return sum(self.births)


@dataclass(frozen=True)
class OffspringLaw:
    """A finite-support offspring law, plus optional characteristic.

    ``max_age`` is the largest age at which any atom bears a child.  All
    atoms store births over the common index range ``0..max_age`` and, when a
    characteristic is present, scores over ``0..char_max_age``.
    ``char_extends`` selects the tail convention for the characteristic:
    ``False`` means ``phi(age) = 0`` for ``age > char_max_age``; ``True``
    means the last tabulated value repeats forever.
    """

    atoms: tuple[LitterAtom, ...]
    max_age: int
    char_max_age: int | None = None
    char_extends: bool = False

    @property
    def has_char(self) -> bool:
        return self.char_max_age is not None

    @property
    def mean_total(self) -> float:
        """Expected total number of children per individual."""
        return float(sum(a.prob * a.total for a in self.atoms))


@dataclass(frozen=True, eq=False)
class MomentTable:
    """First and second moments of an offspring law.

    mu : (K+1,) array, ``mu[k] = E N_k`` (children borne at age k); ``mu[0] = 0``.
    sigma : (K+1, K+1) array, ``sigma[i, j] = Cov(N_i, N_j)``.
    mean_total : ``E[N] = sum_k mu[k]``.
    lambda_phi / var_phi : (K_phi+1,) arrays of ``E phi(k)`` and ``Var phi(k)``,
        or ``None`` when the law has no characteristic.
    gamma_phi : (K_phi+1, K+1) array, ``gamma_phi[k, j] = Cov(phi(k), N_j)``.
    """

    mu: np.ndarray
    sigma: np.ndarray
    mean_total: float
    lambda_phi: np.ndarray | None = None
    var_phi: np.ndarray | None = None
    gamma_phi: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class CharMoments:
    """Characteristic moment summary relative to a given growth rate m.

    ``delta_lambda`` holds the increments ``lambda_phi[k] - lambda_phi[k-1]``
    over ``k = 0..K_phi+1`` (one slot past the table: zero when the
    characteristic extends, ``-lambda_phi[K_phi]`` when it drops to zero), so
    that ``(1 - z) * Lambda_hat(z) = sum_k delta_lambda[k] z^k`` exactly.
    ``lambda_scalar`` is the asymptotic mean score per individual,
    ``(1 - 1/m) * Lambda_hat(1/m) = sum_k delta_lambda[k] m^-k``.
    """

    lambda_phi: np.ndarray
    var_phi: np.ndarray
    gamma_phi: np.ndarray
    delta_lambda: np.ndarray
    lambda_scalar: float
    extends: bool


def make_law(
    entries: Iterable[tuple],
    char_extends: bool = False,
) -> OffspringLaw:
    """Build an :class:`OffspringLaw` from ``(prob, births[, char])`` entries.

    ``births`` is either a mapping ``{age: count}`` with ages >= 1 or a
    sequence ``(n_1, ..., n_K)`` listing counts from age 1 upward.  ``char``
    is an optional sequence ``(phi(0), ..., phi(K_phi))``; either all entries
    carry one (of a common length) or none do.

    Raises ValueError on structural problems (bad probabilities, non-integer
    or negative counts, ragged characteristics).  Distributional assumptions
    are *not* checked here; see :func:`validate_law`.
    """
    raw: list[tuple[float, dict[int, int], tuple[float, ...] | None]] = []
    for idx, entry in enumerate(entries):
        if len(entry) == 2:
            prob, births = entry
            char: Sequence[float] | None = None
        elif len(entry) == 3:
            prob, births, char = entry
        else:
            raise ValueError(f"atom {idx}: expected (prob, births[, char]), got {len(entry)} fields")
        prob = float(prob)
        if not math.isfinite(prob) or prob <= 0.0:
            raise ValueError(f"atom {idx}: probability {prob} is not a finite positive number")
        if isinstance(births, dict):
            pairs = list(births.items())
        else:
            pairs = [(k + 1, c) for k, c in enumerate(births)]
        by_age: dict[int, int] = {}
        for age, count in pairs:
            age = int(age)
            if age < 1:
                raise ValueError(f"atom {idx}: birth age {age} must be >= 1")
            if not float(count).is_integer() or count < 0:
                raise ValueError(f"atom {idx}: birth count {count} at age {age} must be a non-negative integer")
            by_age[age] = by_age.get(age, 0) + int(count)
        char_tuple = None
        if char is not None:
            char_tuple = tuple(float(v) for v in char)
            if not all(math.isfinite(v) for v in char_tuple):
                raise ValueError(f"atom {idx}: characteristic values must be finite")
        raw.append((prob, by_age, char_tuple))

    if not raw:
        raise ValueError("law needs at least one atom")
    total_prob = sum(p for p, _, _ in raw)
    if abs(total_prob - 1.0) > 1e-12:
        raise ValueError(f"atom probabilities sum to {total_prob!r}, expected 1 within 1e-12")

    max_age = max((age for _, by_age, _ in raw for age, c in by_age.items() if c > 0), default=0)
    if max_age == 0:
        raise ValueError("law has no births at all (every count is zero)")

    chars = [c for _, _, c in raw]
    has_char = any(c is not None for c in chars)
    if has_char:
        if any(c is None for c in chars):
            raise ValueError("characteristic present on some atoms but not all")
        lengths = {len(c) for c in chars if c is not None}
        if len(lengths) != 1:
            raise ValueError(f"characteristic length differs across atoms: {sorted(lengths)}")
        char_max_age = lengths.pop() - 1
    else:
        char_max_age = None

    atoms = tuple(
        LitterAtom(
            prob=p,
            births=tuple(by_age.get(age, 0) for age in range(max_age + 1)),
            char_values=c,
        )
        for p, by_age, c in raw
    )
    return OffspringLaw(
        atoms=atoms,
        max_age=max_age,
        char_max_age=char_max_age,
        char_extends=bool(char_extends) if has_char else False,
    )


def validate_law(law: OffspringLaw) -> list[str]:
    """Check the distributional assumptions; return a list of violations.

    An empty list means the law is admissible for the fluctuation theory:
    supercritical mean, at least one child in every litter, and birth ages
    not confined to a sublattice.  Each violation is a human-readable string
    naming the assumption and the offending quantity.
    """
    problems: list[str] = []
    mean_total = law.mean_total
    if not mean_total > 1.0:
        problems.append(f"supercriticality: E[total children] = {mean_total!r} must exceed 1")
    for idx, atom in enumerate(law.atoms):
        if atom.total < 1:
            problems.append(f"survival: atom {idx} (prob {atom.prob!r}) produces no children")
    tab = moments(law)
    support_ages = [k for k in range(1, law.max_age + 1) if tab.mu[k] > 0.0]
    span = 0
    for age in support_ages:
        span = math.gcd(span, age)
    if span > 1:
        problems.append(f"lattice span: birth ages {support_ages} share common divisor {span}, expected span 1")
    return problems


def moments(law: OffspringLaw) -> MomentTable:
    """Exact first/second moment tables of the litter vector and characteristic."""
    k_max = law.max_age
    probs = np.array([a.prob for a in law.atoms], dtype=float)
    births = np.array([a.births for a in law.atoms], dtype=float)  # (n_atoms, K+1)
    mu = probs @ births
    mu[0] = 0.0
    second = (births * probs[:, None]).T @ births
    sigma = second - np.outer(mu, mu)
    sigma[0, :] = 0.0
    sigma[:, 0] = 0.0
    mean_total = float(mu.sum())

    lambda_phi = var_phi = gamma_phi = None
    if law.has_char:
        phi = np.array([a.char_values for a in law.atoms], dtype=float)  # (n_atoms, K_phi+1)
        lambda_phi = probs @ phi
        var_phi = probs @ (phi**2) - lambda_phi**2
        np.maximum(var_phi, 0.0, out=var_phi)
        gamma_phi = (phi * probs[:, None]).T @ births - np.outer(lambda_phi, mu)
    return MomentTable(
        mu=mu,
        sigma=sigma,
        mean_total=mean_total,
        lambda_phi=lambda_phi,
        var_phi=var_phi,
        gamma_phi=gamma_phi,
    )


def _horner(coeffs: np.ndarray, z):
    """Evaluate ``sum_k coeffs[k] z^k`` by Horner's rule; z scalar or array."""
    acc = np.zeros_like(np.asarray(z), dtype=np.result_type(coeffs, z)) + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def mu_hat(law: OffspringLaw, z):
    """Mean-litter transform ``mu_hat(z) = sum_k E[N_k] z^k`` (scalar or array z)."""
    return _horner(moments(law).mu, z)


def mu_hat_prime(law: OffspringLaw, z):
    """Derivative ``mu_hat'(z) = sum_k k E[N_k] z^(k-1)``."""
    mu = moments(law).mu
    dcoef = mu[1:] * np.arange(1, len(mu))
    return _horner(dcoef, z)


def xi_hat_sample(atom: LitterAtom, z):
    """Litter transform of a single atom, ``Xi_a(z) = sum_k births_a[k] z^k``."""
    return _horner(np.asarray(atom.births, dtype=float), z)


def sigma_hat(law: OffspringLaw, z):
    """Litter variability transform ``Sigma(z) = sum_a p_a |Xi_a(z) - mu_hat(z)|^2``.

    Equals the conjugate-bilinear form ``sum_{i,j} Cov(N_i, N_j) z^i conj(z)^j``
    and is real and non-negative.  Tiny negative roundoff (>= -1e-12) is
    clamped to zero; anything below that indicates corrupted input and raises.
    """
    z_arr = np.asarray(z, dtype=complex)
    mean = mu_hat(law, z_arr)
    out = np.zeros(z_arr.shape, dtype=float)
    for atom in law.atoms:
        out += atom.prob * np.abs(xi_hat_sample(atom, z_arr) - mean) ** 2
    if np.any(out < _SIGMA_CLAMP):
        raise ValueError(f"Sigma(z) evaluated below {_SIGMA_CLAMP}: min {out.min()!r}")
    np.maximum(out, 0.0, out=out)
    return out if out.shape else float(out)


def char_moments(law: OffspringLaw, m: float) -> CharMoments:
    """Characteristic moment summary relative to growth factor ``m``.

    Computes the mean-score table, its increment vector ``delta_lambda`` (one
    slot past the table so the drop-to-zero tail is represented exactly), and
    the asymptotic mean score per individual
    ``lambda_scalar = sum_k delta_lambda[k] m^-k``.

    Raises ValueError if the law carries no characteristic or ``m <= 1``.
    """
    if not law.has_char:
        raise ValueError("law has no characteristic")
    if not m > 1.0:
        raise ValueError(f"growth factor m = {m!r} must exceed 1")
    tab = moments(law)
    assert tab.lambda_phi is not None and tab.var_phi is not None and tab.gamma_phi is not None
    lam = tab.lambda_phi
    delta = np.zeros(len(lam) + 1)
    delta[: len(lam)] = lam
    delta[1 : len(lam)] -= lam[:-1]
    if law.char_extends:
        delta[len(lam)] = 0.0
    else:
        delta[len(lam)] = -lam[-1]
    weights = (1.0 / m) ** np.arange(len(delta))
    lambda_scalar = float(delta @ weights)
    return CharMoments(
        lambda_phi=lam,
        var_phi=tab.var_phi,
        gamma_phi=tab.gamma_phi,
        delta_lambda=delta,
        lambda_scalar=lambda_scalar,
        extends=law.char_extends,
    )


def law_fingerprint(law: OffspringLaw) -> str:
    """Stable hex digest identifying the law (atoms, characteristic, tail flag)."""
    payload = {
        "atoms": [
            {
                "prob": repr(a.prob),
                "births": list(a.births),
                "char": None if a.char_values is None else [repr(v) for v in a.char_values],
            }
            for a in law.atoms
        ],
        "char_extends": law.char_extends,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
