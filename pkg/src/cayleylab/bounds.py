"""Numerical evaluation of the return-probability and occupation bounds.

The bound formulas take a volume function V (tabulated from BFS or
analytic), a spectral constant c in (0,1), prefactors, and a moment
parameter k. Unspecified constants are treated as fit parameters: fitted
at the smallest scale of an experiment, then tested for dominance at
larger scales.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import InputError, NumericError, ParameterError
from .metric import DistanceOracle
from .walk import StepDistribution, sample_hits_target

# ---------------------------------------------------------------------------
# volume functions


class VolumeFunction(ABC):
    """Positive nondecreasing V with V(0) >= 1, evaluated at real radii."""

    @abstractmethod
    def log_value(self, x: float) -> float:
        """log V(x); kept in log space so huge volumes cannot overflow."""

    def __call__(self, x: float) -> float:
        return math.exp(min(self.log_value(x), 700.0))


class PolynomialVolume(VolumeFunction):
    """V(x) = max(1, coeff * x**degree)."""

    def __init__(self, degree: float, coeff: float = 1.0):
        if degree < 0 or coeff <= 0:
            raise InputError("need degree >= 0 and coeff > 0")
        self.degree = degree
        self.coeff = coeff

    def log_value(self, x):
        if x <= 0:
            return 0.0
        if math.isinf(x):
            return math.inf if self.degree > 0 else max(0.0, math.log(self.coeff))
        return max(0.0, math.log(self.coeff) + self.degree * math.log(x))


class ExponentialVolume(VolumeFunction):
    """V(x) = max(1, coeff * base**x)."""

    def __init__(self, base: float, coeff: float = 1.0):
        if base <= 1 or coeff <= 0:
            raise InputError("need base > 1 and coeff > 0")
        self.base = base
        self.coeff = coeff

    def log_value(self, x):
        if x <= 0:
            return 0.0
        return max(0.0, math.log(self.coeff) + x * math.log(self.base))


class FreeGroupVolume(VolumeFunction):
    """Exact ball volume of the free group F_k: V(r) = 1 + 2k((2k-1)^r - 1)/(2k-2)."""

    def __init__(self, k: int):
        if k < 2:
            raise InputError("free-group volume needs k >= 2")
        self.k = k

    def log_value(self, x):
        if x <= 0:
            return 0.0
        k = self.k
        q = 2 * k - 1
        if x * math.log(q) > 680.0:
            # asymptotic regime: V ~ 2k/(2k-2) * q**x
            return math.log(2 * k / (2 * k - 2)) + x * math.log(q)
        return math.log(1 + 2 * k * (q ** x - 1) / (2 * k - 2))


class TabulatedVolume(VolumeFunction):
    """Volume tabulated from a distance oracle.

    log V is interpolated linearly between integer radii; beyond the build
    radius it is extrapolated with the last observed local exponent (the
    instance records this in :attr:`extrapolates_beyond` so callers can
    flag extrapolated output).
    """

    def __init__(self, oracle: DistanceOracle):
        if oracle.r_max < 2:
            raise InputError("tabulated volume needs r_max >= 2")
        self.extrapolates_beyond = oracle.r_max
        self._logv = [math.log(oracle.volume(r)) for r in range(oracle.r_max + 1)]
        r = oracle.r_max
        self._tail_exponent = ((self._logv[r] - self._logv[r - 1])
                               / (math.log(r) - math.log(r - 1)))

    def log_value(self, x):
        if x <= 0:
            return 0.0
        logv = self._logv
        r_max = len(logv) - 1
        if x >= r_max:
            if math.isinf(x):
                return math.inf if self._tail_exponent > 0 else logv[r_max]
            return logv[r_max] + self._tail_exponent * (math.log(x) - math.log(r_max))
        lo = int(x)
        frac = x - lo
        return logv[lo] + frac * (logv[lo + 1] - logv[lo])


# ---------------------------------------------------------------------------
# bound parameters


@dataclass
class BoundParams:
    """Constants of the bound formulas.

    ``c`` is the spectral constant appearing both inside V(c/sqrt(lambda))
    and in the exponential kill term (the same constant by construction;
    ``alpha`` overrides the split point, which otherwise defaults to c^-2
    for the occupation split and 2 c^-2 for the forest split). ``c_diff``
    is the prefactor of the diffusive partial-sum bound c r sqrt(n).
    """

    c: float = 0.5
    c_prime: float = 1.0
    c_dprime: float = 1.0
    k: int = 3
    alpha: Optional[float] = None
    c_diff: float = 1.0

    def validate(self) -> None:
        if not 0 < self.c < 1:
            raise ParameterError("c must lie in (0, 1)")
        if self.c_prime <= 0 or self.c_dprime <= 0 or self.c_diff <= 0:
            raise ParameterError("prefactors must be positive")
        if self.k < 1:
            raise ParameterError("k must be >= 1")

    def alpha_occupation(self) -> float:
        return self.alpha if self.alpha is not None else self.c ** -2

    def alpha_wsf(self) -> float:
        return self.alpha if self.alpha is not None else 2 * self.c ** -2


# ---------------------------------------------------------------------------
# return-probability bound (integral form)


def return_bound(V: VolumeFunction, m: int, params: BoundParams,
                 rel_tol: float = 1e-6) -> float:
    """Evaluate c' m * integral_0^1 exp(-lambda m) / V(c/sqrt(lambda)) dlambda.

    Uses the substitution u = lambda m, integrating
    c' * int_0^m exp(-u) / V(c sqrt(m/u)) du by adaptive quadrature.
    """
    if m < 1:
        raise InputError("return_bound needs m >= 1")
    params.validate()
    c = params.c

    def integrand(u):
        if u <= 0:
            return 0.0
        return math.exp(-u - V.log_value(c * math.sqrt(m / u)))

    upper = min(float(m), 745.0)  # exp(-u) underflows past this point
    out = integrate.quad(integrand, 0.0, upper, epsabs=0.0,
                         epsrel=rel_tol, limit=200, full_output=1)
    if len(out) > 3:
        raise NumericError(f"return_bound quadrature failed: {out[3]}")
    value, abserr = out[0], out[1]
    if value > 0 and abserr > 50 * rel_tol * value:
        raise NumericError(
            f"return_bound quadrature error {abserr} too large for value {value}")
    return params.c_prime * value


# ---------------------------------------------------------------------------
# heat-kernel style bound and split sums


def heat_kernel_bound(r: int, m: int, V: VolumeFunction,
                      params: BoundParams) -> float:
    """phi(m) = c'' (m^{-k/2} r^k / V(r) + exp(-c^2 m / r^2))."""
    if r < 1 or m < 1:
        raise InputError("heat_kernel_bound needs r, m >= 1")
    params.validate()
    k = params.k
    poly = math.exp(-0.5 * k * math.log(m) + k * math.log(r) - V.log_value(float(r)))
    kill = math.exp(-params.c ** 2 * m / r ** 2)
    return params.c_dprime * (poly + kill)


@dataclass
class SplitResult:
    """One split sum: the diffusive prefix bound plus the summed tail."""

    prefix_bound: float
    tail_value: float
    split_point: int

    @property
    def total(self) -> float:
        return self.prefix_bound + self.tail_value


_BLOCK = 1 << 20
_TAIL_REL = 1e-9


def _summed_tail(start: int, term_block, remainder) -> float:
    """Sum term_block(m) for m >= start by blocks, to 1e-9 relative accuracy.

    ``remainder(m0)`` returns (estimate, error bound) for the sum from m0 on;
    blocks are added until the remainder's error bound is below 1e-9 of the
    total, then the estimate is added. Slowly decaying power tails would need
    ~1e18 raw terms for that accuracy, so a certified integral remainder is
    required; geometric tails pass a zero-error closed form.
    """
    acc = 0.0
    m0 = start
    while True:
        est, err = remainder(float(m0))
        if acc + est > 0 and err <= _TAIL_REL * (acc + est):
            return acc + est
        if m0 - start > 1 << 31:
            raise NumericError("tail sum did not converge")
        ms = np.arange(m0, m0 + _BLOCK, dtype=np.float64)
        acc += float(term_block(ms).sum())
        m0 += _BLOCK


def _power_tail(start: int, s: float, coeff: float) -> float:
    """coeff * sum_{m >= start} m^{-s} for s > 1."""

    def term_block(ms):
        return coeff * ms ** -s

    def remainder(m0):
        # integral midpoint bracket: int_{m0-1/2} sits between the Riemann
        # brackets int_{m0} <= tail <= int_{m0-1}; error below half a term
        est = coeff * (m0 - 0.5) ** (1 - s) / (s - 1)
        return est, coeff * 0.5 * m0 ** -s + abs(est) * 1e-12

    return _summed_tail(start, term_block, remainder)


def _weighted_power_tail(start: int, s: float, coeff: float) -> float:
    """coeff * sum_{m >= start} (m+1) m^{-s} for s > 2."""

    def term_block(ms):
        return coeff * (ms + 1.0) * ms ** -s

    def remainder(m0):
        a = m0 - 0.5
        est = coeff * (a ** (2 - s) / (s - 2) + a ** (1 - s) / (s - 1))
        return est, coeff * 0.5 * (m0 + 1.0) * m0 ** -s + abs(est) * 1e-12

    return _summed_tail(start, term_block, remainder)


def _exp_tail(start: int, log_coeff: float, beta: float) -> float:
    """sum_{m >= start} exp(log_coeff - beta m); geometric closed-form stop."""

    def term_block(ms):
        return np.exp(log_coeff - beta * ms)

    def remainder(m0):
        tail = math.exp(log_coeff - beta * m0) / -math.expm1(-beta)
        return 0.0, tail  # certified one-sided: simply stop once negligible

    return _summed_tail(start, term_block, remainder)


def _weighted_exp_tail(start: int, log_coeff: float, beta: float) -> float:
    """sum_{m >= start} (m+1) exp(log_coeff - beta m)."""
    q = math.exp(-beta)

    def term_block(ms):
        return (ms + 1.0) * np.exp(log_coeff - beta * ms)

    def remainder(m0):
        # sum_{m >= a} (m+1) q^m = q^a (a + 1 - a q) / (1-q)^2
        tail = math.exp(log_coeff - beta * m0) \
            * (m0 + 1 - m0 * q) / (1 - q) ** 2
        return 0.0, tail

    return _summed_tail(start, term_block, remainder)


def _split_point(r: int, V: VolumeFunction, alpha: float,
                 split_at_log: bool) -> int:
    if split_at_log:
        return int(math.floor(alpha * r * r * V.log_value(float(r))))
    return int(math.floor(alpha * r * r))


def occupation_split(r: int, V: VolumeFunction, params: BoundParams,
                     split_at_log: bool = True) -> SplitResult:
    """Occupation-time split at m = alpha r^2 log V(r).

    prefix_bound is the diffusive bound c_diff * r * sqrt(split point) for
    the prefix sum of P[S_m in B(o,r)]; tail_value sums phi(m) V(r) past the
    split by direct summation (certified relative tail below 1e-9).

    ``split_at_log=False`` is the polynomial-growth variant: the split moves
    to alpha r^2 and the tail keeps only the m^{-k/2} r^k power term (the
    exponential kill term belongs to the superpolynomial route; with the
    plain split it would not be o(r^2)).
    """
    if r < 1:
        raise InputError("occupation_split needs r >= 1")
    params.validate()
    if params.k <= 2:
        raise ParameterError("occupation split needs k > 2")
    big_m = _split_point(r, V, params.alpha_occupation(), split_at_log)
    prefix = params.c_diff * r * math.sqrt(big_m)
    cdd = params.c_dprime
    tail = _power_tail(big_m + 1, 0.5 * params.k, cdd * float(r) ** params.k)
    if split_at_log:
        beta = params.c ** 2 / r ** 2
        tail += _exp_tail(big_m + 1, math.log(cdd) + V.log_value(float(r)),
                          beta)
    return SplitResult(prefix, tail, big_m)


def wsf_split(r: int, V: VolumeFunction, params: BoundParams,
              split_at_log: bool = True) -> SplitResult:
    """Forest-volume split with weight (m+1) and alpha = 2 c^-2.

    prefix_bound is (split+1) * c_diff * r * sqrt(split), term-wise
    domination of the weighted prefix by the occupation prefix.
    """
    if r < 1:
        raise InputError("wsf_split needs r >= 1")
    params.validate()
    if params.k <= 4:
        raise ParameterError("forest split needs k > 4")
    big_m = _split_point(r, V, params.alpha_wsf(), split_at_log)
    prefix = (big_m + 1) * params.c_diff * r * math.sqrt(big_m)
    cdd = params.c_dprime
    tail = _weighted_power_tail(big_m + 1, 0.5 * params.k,
                                cdd * float(r) ** params.k)
    if split_at_log:
        beta = params.c ** 2 / r ** 2
        tail += _weighted_exp_tail(big_m + 1,
                                   math.log(cdd) + V.log_value(float(r)), beta)
    return SplitResult(prefix, tail, big_m)


# ---------------------------------------------------------------------------
# volume doubling table


@dataclass
class DoublingRow:
    a: int
    r: int
    ratio: float  # V(ar) / (V(r) a^k)


def volume_doubling_table(oracle: DistanceOracle, k: int) -> list[DoublingRow]:
    """Tabulate V(ar)/(V(r) a^k) for all integer pairs within the oracle."""
    rows = []
    for r in range(1, oracle.r_max + 1):
        for a in range(1, oracle.r_max // r + 1):
            ratio = oracle.volume(a * r) / (oracle.volume(r) * float(a) ** k)
            rows.append(DoublingRow(a, r, ratio))
    return rows


# ---------------------------------------------------------------------------
# hitting-probability bound check


@dataclass
class HittingRow:
    distance: int
    p_hat: float
    sem: float
    bound: float
    dominated: bool


@dataclass
class HittingReport:
    degree: int
    c_fit: float
    fit_distance: int
    rows: list[HittingRow]

    @property
    def dominance_holds(self) -> bool:
        return all(row.dominated for row in self.rows
                   if row.distance != self.fit_distance)


def hitting_bound_check(oracle: DistanceOracle, dist: StepDistribution,
                        degree: int, trials: int, rng: np.random.Generator, *,
                        distances: tuple[int, ...] = (2, 4, 8),
                        escape_factor: float = 8.0,
                        horizon: int = 10_000_000) -> HittingReport:
    """Monte Carlo hit probabilities against the fitted c_D / |x|^D bound.

    Targets are the BFS-first elements at the requested distances. The
    constant is fitted at the smallest positive distance, and the report
    records whether the fitted bound dominates at the larger ones.
    """
    model = dist.model
    if model.growth_degree() is not None:
        raise InputError("hitting bound check needs superpolynomial growth")
    if escape_factor < 2:
        raise InputError("escape_factor must be >= 2")
    rows = []
    for n in sorted(distances):
        if n == 0:
            rows.append(HittingRow(0, 1.0, 0.0, math.inf, True))
            continue
        target = oracle.first_at_distance(n)
        escape_radius = int(math.ceil(escape_factor * n))
        hits = sum(sample_hits_target(dist, target, escape_radius, rng,
                                      horizon=horizon)
                   for _ in range(trials))
        p = hits / trials
        sem = math.sqrt(p * (1 - p) / trials)
        rows.append(HittingRow(n, p, sem, 0.0, True))
    fit_row = next(row for row in rows if row.distance > 0)
    c_fit = fit_row.p_hat * fit_row.distance ** degree
    for row in rows:
        if row.distance > 0:
            row.bound = c_fit / row.distance ** degree
            row.dominated = row.p_hat <= row.bound
    return HittingReport(degree, c_fit, fit_row.distance, rows)
