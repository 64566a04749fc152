"""Phase analysis on the d-regular tree: Potts, Ising and hard-core."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .bethe import phi_regular
from .bp import bp_fixed_point_regular, hardcore_symmetric_fixed_point
from .errors import CavityError, InvalidParameter
from .factor_spec import make_hardcore, make_ising, make_potts, spec_from_config

MAX_ITER = 100_000
FP_TOL = 1e-13
EDGE_TOL = 1e-10  # distance to a boundary curve that counts as "on" it

UNIQUE = "UNIQUE"
BOUNDARY_F = "BOUNDARY_F"
BOUNDARY_PLUS = "BOUNDARY_PLUS"
NONUNIQUE = "NONUNIQUE"


class OutsideUniqueness(UserWarning):
    pass


def _lae(a: float, b: float) -> float:
    """Scalar log(e^a + e^b)."""
    if a < b:
        a, b = b, a
    if b == -math.inf:
        return a
    return a + math.log1p(math.exp(b - a))


@dataclass(frozen=True)
class PottsRecursion:
    """The scalar log-likelihood-ratio map r -> f(r; beta, B) on the d-regular tree.

    r = log h(1) - log h(s) for any s != 1, with h symmetric among spins != 1.
    """

    q: int
    d: int
    beta: float
    B: float = 0.0

    def __post_init__(self):
        if self.q < 2 or self.d < 2:
            raise InvalidParameter("need q >= 2 and d >= 2")

    @property
    def alpha(self) -> float:
        return (self.q - 1) * (1 + (self.q - 2) * math.exp(-self.beta))

    @property
    def gamma(self) -> float:
        q, d, b = self.q, self.d, self.beta
        return math.exp(b) + q - 2 - 0.5 * d * (-math.expm1(-b)) * (math.exp(b) + q - 1)

    def _den(self, r):
        # log(e^r + e^beta + q - 2)
        out = _lae(r, self.beta)
        return _lae(out, math.log(self.q - 2)) if self.q > 2 else out

    def f(self, r: float) -> float:
        # numerator minus denominator is (e^beta - 1)(e^r - 1), so f(0) = B exactly
        c = math.exp(self.beta) + self.q - 2
        if r > 0:
            x = -math.expm1(-r) / (1.0 + c * math.exp(-r))
        else:
            x = math.expm1(r) / (math.exp(r) + c)
        return self.B + (self.d - 1) * math.log1p(math.expm1(self.beta) * x)

    def fprime(self, r: float) -> float:
        if self.beta == 0:
            return 0.0
        q, b = self.q, self.beta
        lg = (
            math.log(self.d - 1)
            + r
            + math.log(math.expm1(b))
            + math.log(q + math.exp(b) - 1)
            - self._den(r)
            - _lae(r + b, math.log(q - 1))
        )
        return math.exp(lg)

    def message(self, r: float) -> np.ndarray:
        """Potts message with log-likelihood ratio ``r`` (index 0 is spin 1)."""
        h = np.empty(self.q)
        # h(1) = e^r / (e^r + q - 1)
        h[0] = 1.0 / (1.0 + (self.q - 1) * math.exp(-r)) if r > -700 else 0.0
        h[1:] = (1.0 - h[0]) / (self.q - 1)
        return h


def potts_llr_map(rec: PottsRecursion, r: float):
    """``(f(r), f'(r))``."""
    return rec.f(r), rec.fprime(r)


def monotone_iterate(f, r0: float, max_iter: int = MAX_ITER, tol: float = FP_TOL, trace=None):
    """Iterate ``f`` from ``r0``; for increasing ``f`` the orbit is monotone."""
    r = r0
    for _ in range(max_iter):
        nxt = f(r)
        if trace is not None:
            trace.append(nxt)
        if abs(nxt - r) <= tol * max(1.0, abs(r)):
            return nxt
        r = nxt
    return r


def _polish(rec: PottsRecursion, r: float) -> float:
    """Guarded Newton steps on f(r) - r that never move far or increase |g|."""
    g = rec.f(r) - r
    for _ in range(50):
        if g == 0:
            break
        slope = rec.fprime(r) - 1
        if slope == 0:
            break
        nxt = r - g / slope
        gn = rec.f(nxt) - nxt
        if abs(nxt - r) > 1e-3 or abs(gn) >= abs(g):
            break
        r, g = nxt, gn
    return r


def potts_fixed_points(rec: PottsRecursion):
    """``(r_free, r_ordered, r_middle)``; ``r_middle`` is None unless three roots exist."""
    if rec.beta < 0 or rec.B < 0:
        raise InvalidParameter("fixed-point analysis assumes beta, B >= 0")
    top = rec.B + (rec.d - 1) * rec.beta
    r_free = _polish(rec, monotone_iterate(rec.f, 0.0))
    r_ord = _polish(rec, monotone_iterate(rec.f, top))
    r_mid = None
    if r_ord - r_free > 1e-8:
        grid = np.linspace(r_free, r_ord, 402)[1:-1]
        g = np.array([rec.f(x) - x for x in grid])
        sign = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)
        if sign.size:
            i = sign[0]
            r_mid = brentq(lambda x: rec.f(x) - x, grid[i], grid[i + 1], xtol=1e-15)
    return r_free, r_ord, r_mid


@dataclass(frozen=True)
class Thresholds:
    beta_minus: float
    beta_f: float
    beta_plus: float
    descriptors: dict = field(default_factory=dict, compare=False)

    def __iter__(self):
        return iter((self.beta_minus, self.beta_f, self.beta_plus))


def beta_minus(q: int, d: int) -> float:
    """log of the positive root of (d-2)^2 b^2 + (d-2)^2 (q-2) b - d^2 (q-1) = 0."""
    if d < 2 or q < 2:
        raise InvalidParameter("need q >= 2 and d >= 2")
    if d == 2:
        return math.inf
    if q == 2:
        return math.log(d / (d - 2))
    a = (d - 2) ** 2
    bb = a * (q - 2)
    c = d * d * (q - 1)
    # cancellation-free form of the positive root
    return math.log(2 * c / (bb + math.sqrt(bb * bb + 4 * a * c)))


def beta_plus(q: int, d: int) -> float:
    if d < 2 or q < 2:
        raise InvalidParameter("need q >= 2 and d >= 2")
    return math.inf if d == 2 else math.log1p(q / (d - 2))


def _rho(q, d, beta):
    """(rho_minus, rho_plus): the solutions of f'(r) = 1, or None below beta_minus."""
    rec = PottsRecursion(q, d, beta)
    a, g = rec.alpha, rec.gamma
    disc = g * g - a
    if disc < 0 or g > 0:
        if disc > -1e-12 * a and g < 0:
            disc = 0.0
        else:
            return None
    t_plus = -g + math.sqrt(disc)
    t_minus = a / t_plus  # product of the roots is alpha
    return math.log(t_minus), math.log(t_plus)


def curve_B_minus(q: int, d: int, beta: float) -> float:
    """B_-(beta) = rho_+ - f(rho_+; beta, 0)."""
    rho = _rho(q, d, beta)
    if rho is None:
        raise InvalidParameter("B_- is defined only for beta >= beta_minus")
    r = rho[1]
    return r - PottsRecursion(q, d, beta).f(r)


def curve_B_plus(q: int, d: int, beta: float) -> float:
    """B_+(beta) = rho_- - f(rho_-; beta, 0)."""
    rho = _rho(q, d, beta)
    if rho is None:
        raise InvalidParameter("B_+ is defined only for beta >= beta_minus")
    r = rho[0]
    return r - PottsRecursion(q, d, beta).f(r)


def _beta_m_safe(q, d):
    """beta_minus nudged up until the square root is real in floating point."""
    b = beta_minus(q, d)
    for k in range(60):
        x = b * (1 + 2.0**-52 * 2**k)
        if _rho(q, d, x) is not None:
            return x
    return b


def has_positive_fixed_point(q: int, d: int, beta: float, B: float = 0.0, points: int = 400) -> bool:
    """Sign-change scan of f(r) - r on a log-spaced grid in (0, B + (d-1) beta],
    refined by a local maximization; independent of the closed-form curves."""
    rec = PottsRecursion(q, d, beta, B)
    top = B + (d - 1) * beta
    if top <= 0:
        return False
    grid = np.geomspace(top * 1e-6, top, points)
    g = np.array([rec.f(x) - x for x in grid])
    if (g >= 0).any():
        return True
    # refine every interior local max; the one near 0 alone can win on the grid
    peaks = [i for i in range(1, points - 1) if g[i] >= g[i - 1] and g[i] >= g[i + 1]]
    for i in peaks:
        lo, hi = grid[i - 1], grid[i + 1]
        for _ in range(200):  # golden-section search
            m1 = lo + 0.382 * (hi - lo)
            m2 = lo + 0.618 * (hi - lo)
            if rec.f(m1) - m1 < rec.f(m2) - m2:
                lo = m1
            else:
                hi = m2
        x = 0.5 * (lo + hi)
        if rec.f(x) - x >= 0:
            return True
    return False


@lru_cache(maxsize=256)
def potts_thresholds(q: int, d: int) -> Thresholds:
    """beta_minus < beta_f < beta_plus (equal for q = 2; infinite for d = 2)."""
    bm, bp = beta_minus(q, d), beta_plus(q, d)
    desc = {
        "beta_minus": "log of the positive root of (d-2)^2 b^2 + (d-2)^2 (q-2) b - d^2 (q-1)",
        "beta_plus": "log(1 + q/(d-2))",
        "beta_f": "root of B_-(beta) = 0 on [beta_minus, beta_plus]",
    }
    if q == 2:
        desc["beta_minus"] = "log(d/(d-2))"
    if d == 2 or q == 2:
        return Thresholds(bm, bp if d == 2 else bm, bp, desc)
    lo = _beta_m_safe(q, d)
    bf = brentq(lambda b: curve_B_minus(q, d, b), lo, bp, xtol=1e-14, rtol=1e-15)
    return Thresholds(bm, bf, bp, desc)


@dataclass(frozen=True)
class RegionCurves:
    q: int
    d: int
    B: float
    B_plus: float
    beta_f_of_B: float | None
    beta_plus_of_B: float | None

    def in_R_ne(self, beta: float) -> bool:
        if self.d == 2:
            return False
        if self.q == 2:
            return self.B == 0 and beta > self.beta_f_of_B
        if self.beta_f_of_B is None:
            return False
        if self.B == 0:
            return beta >= self.beta_f_of_B
        return self.beta_f_of_B <= beta <= self.beta_plus_of_B


@lru_cache(maxsize=4096)
def potts_region(q: int, d: int, B: float) -> RegionCurves:
    """Boundary curves of the non-uniqueness region at field ``B``.

    For q > 2, d > 2 the curves B_-(beta), B_+(beta) are inverted on
    [beta_minus, beta_plus]; above their meeting value B_plus there is no
    non-uniqueness and both curve values are None.
    """
    if B < 0:
        raise InvalidParameter("region analysis assumes B >= 0")
    if d == 2:
        return RegionCurves(q, d, B, 0.0, None, None)
    if q == 2:
        bm = beta_minus(q, d)
        return RegionCurves(q, d, B, 0.0, bm if B == 0 else None, bm if B == 0 else None)
    lo = _beta_m_safe(q, d)
    hi = beta_plus(q, d)
    b_meet = curve_B_minus(q, d, lo)
    if B > b_meet:
        return RegionCurves(q, d, B, b_meet, None, None)
    if B == b_meet:
        return RegionCurves(q, d, B, b_meet, lo, lo)

    def invert(curve):
        return brentq(lambda b: curve(q, d, b) - B, lo, hi, xtol=1e-14, rtol=1e-15)

    bf = invert(curve_B_minus)
    bplus = hi if B == 0 else invert(curve_B_plus)
    return RegionCurves(q, d, B, b_meet, bf, bplus)


@dataclass
class PhaseReport:
    q: int
    d: int
    beta: float
    B: float
    beta_minus: float
    beta_f: float
    beta_plus: float
    B_plus: float
    beta_f_of_B: float | None
    beta_plus_of_B: float | None
    r_free: float
    r_ordered: float
    r_middle: float | None
    phi_f: float
    phi_1: float
    region: str
    lower: float
    upper: float
    phi: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _phi_branch(q, d, beta, B, r):
    rec = PottsRecursion(q, d, beta, B)
    return phi_regular(d, make_potts(q, beta, B), rec.message(r)).phi_total


@lru_cache(maxsize=4096)
def _branch_values(q, d, beta, B):
    rf, r1, _ = potts_fixed_points(PottsRecursion(q, d, beta, B))
    return _phi_branch(q, d, beta, B, rf), _phi_branch(q, d, beta, B, r1)


def potts_free_energy_bounds(q: int, d: int, beta: float, B: float) -> PhaseReport:
    """Branch values, region and interpolation bounds at ``(beta, B)``.

    ``lower``/``upper`` are the interpolation bounds wherever the point lies in
    the closed non-uniqueness region (and coincide with the common branch value
    outside it); ``phi`` is the Bethe value where it is determined.
    """
    if beta < 0 or B < 0:
        raise InvalidParameter("bounds assume beta, B >= 0")
    th = potts_thresholds(q, d)
    reg = potts_region(q, d, B)
    rf, r1, rm = potts_fixed_points(PottsRecursion(q, d, beta, B))
    pf = _phi_branch(q, d, beta, B, rf)
    p1 = _phi_branch(q, d, beta, B, r1)
    inside = reg.in_R_ne(beta)
    if not inside:
        region, phi, lower, upper = UNIQUE, pf, pf, pf
    elif q == 2:
        # Ising: only the B = 0 ray; the plus branch is the limit from B > 0
        region, phi, lower, upper = BOUNDARY_PLUS, p1, p1, p1
    else:
        bf, bplus = reg.beta_f_of_B, reg.beta_plus_of_B
        if abs(beta - bf) <= EDGE_TOL:
            region, phi = BOUNDARY_F, pf
        elif (B > 0 and abs(beta - bplus) <= EDGE_TOL) or (B == 0 and beta >= bplus - EDGE_TOL):
            region, phi = BOUNDARY_PLUS, p1
        else:
            region, phi = NONUNIQUE, None
        lower = max(pf, p1)
        pf_at_bf, p1_at_bf = _branch_values(q, d, bf, B)
        tilde_1 = pf_at_bf + (p1 - p1_at_bf)
        upper = tilde_1
        if beta <= bplus:
            # interpolating down from beta_+(B) along h^f only reaches beta <= beta_+(B)
            pf_at_bp, p1_at_bp = _branch_values(q, d, bplus, B)
            upper = min(upper, p1_at_bp - (pf_at_bp - pf))
    return PhaseReport(
        q, d, beta, B, th.beta_minus, th.beta_f, th.beta_plus, reg.B_plus,
        reg.beta_f_of_B, reg.beta_plus_of_B, rf, r1, rm, pf, p1, region, lower, upper, phi,
    )


# --- Ising ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsingPhase:
    r_free: float
    r_plus: float
    unique: bool
    phi: float
    phi_free: float
    phi_plus: float
    beta_minus: float


def ising_beta_minus(d: int) -> float:
    """Uniqueness threshold in the units of ``make_ising``: (1/2) log(d/(d-2))."""
    if d < 2:
        raise InvalidParameter("need d >= 2")
    return math.inf if d == 2 else 0.5 * math.log(d / (d - 2))


def ising_phase(d: int, beta: float, B: float) -> IsingPhase:
    """Free and plus branches on the d-regular tree.

    Ising(beta, B) is the two-state Potts model at (2 beta, 2 B), so the
    log-likelihood ratio recursion and its threshold carry over with a factor 2.
    ``phi`` is the plus-branch value (the common value when unique).
    """
    if beta < 0 or B < 0:
        raise InvalidParameter("ising_phase assumes beta, B >= 0")
    rec = PottsRecursion(2, d, 2 * beta, 2 * B)
    rf, rp, _ = potts_fixed_points(rec)
    spec = make_ising(beta, B)
    pf = phi_regular(d, spec, rec.message(rf)).phi_total
    pp = phi_regular(d, spec, rec.message(rp)).phi_total
    bm = ising_beta_minus(d)
    unique = B > 0 or beta <= bm
    return IsingPhase(rf, rp, unique, pp, pf, pp, bm)


# --- hard-core -----------------------------------------------------------------------


def hardcore_lambda_c(d: int) -> float:
    """(d-1)^(d-1) / (d-2)^d."""
    if int(d) != d or d < 3:
        raise InvalidParameter("lambda_c is finite only for integer d >= 3")
    d = int(d)
    return float(Fraction((d - 1) ** (d - 1), (d - 2) ** d))


def hardcore_phi(d: int, lam: float) -> float:
    """Bethe value at the symmetric fixed point u = 1/(1 + lam u^(d-1)).

    Above lambda_c the value is still returned, with an ``OutsideUniqueness`` warning.
    """
    if d < 2:
        raise InvalidParameter("need d >= 2")
    if not lam > 0:
        raise InvalidParameter("fugacity must be positive")
    if d >= 3 and lam > hardcore_lambda_c(d):
        warnings.warn(f"lambda={lam} exceeds lambda_c({d})", OutsideUniqueness, stacklevel=2)
    h = hardcore_symmetric_fixed_point(d, lam)
    return phi_regular(d, make_hardcore(lam), h).phi_total


# --- total variation along a parameter path -----------------------------------------


@dataclass(frozen=True)
class TVReport:
    total: float
    max_step: float
    jump: bool
    jump_at: tuple | None


JUMP = 0.1


def tv_diagnostic(family: dict, path) -> TVReport:
    """Total variation of a branch fixed point along a monotone parameter grid.

    ``family`` is a spec config (see ``spec_from_config``) plus ``d``,
    ``branch`` and ``param`` (the key varied along ``path``).
    """
    path = [float(x) for x in path]
    if any(b < a for a, b in zip(path, path[1:])) and any(b > a for a, b in zip(path, path[1:])):
        raise InvalidParameter("parameter grid must be monotone")
    cfg = {k: v for k, v in family.items() if k not in ("d", "branch", "param")}
    d, branch, param = int(family["d"]), family.get("branch", "free"), family["param"]
    msgs = []
    for x in path:
        spec = spec_from_config({**cfg, param: x})
        fp = bp_fixed_point_regular(d, spec, branch, max_iter=MAX_ITER)
        if not fp.converged:
            raise CavityError(f"branch {branch} did not converge at {param}={x}")
        msgs.append(fp.h)
    steps = [float(np.abs(b - a).sum()) for a, b in zip(msgs, msgs[1:])]
    if not steps:
        return TVReport(0.0, 0.0, False, None)
    i = int(np.argmax(steps))
    jump = steps[i] > JUMP
    return TVReport(float(sum(steps)), steps[i], jump, (path[i], path[i + 1]) if jump else None)
