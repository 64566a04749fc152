"""Bethe free energy in message form, local-polytope form, and by population dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .bp import _log, bp_fixed_point_regular, psi_dot
from .errors import InvalidDirection, InvalidParameter, InvalidPolytopePoint
from .factor_spec import FactorSpec, validate_permissive
from .graphs import OffspringLaw

FD_STEP = 1e-5
FD2_STEP = 1e-4
POPDYN_BATCHES = 16


@dataclass(frozen=True)
class BetheBreakdown:
    phi_vx: float
    phi_edge: float
    phi_total: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "phi_vx": self.phi_vx,
            "phi_edge": self.phi_edge,
            "phi_total": self.phi_total,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class PairBelief:
    joint: np.ndarray
    marginal: np.ndarray

    @classmethod
    def from_joint(cls, joint) -> "PairBelief":
        joint = np.asarray(joint, dtype=float)
        return cls(joint, joint.sum(axis=1))


def _check_message(h, q):
    h = np.asarray(h, dtype=float)
    if h.shape != (q,) or (h < 0).any() or abs(h.sum() - 1) > 1e-10:
        raise InvalidParameter("message must be a probability vector of length q")
    return h


def phi_regular(d: int, spec: FactorSpec, h) -> BetheBreakdown:
    """Bethe functional on the d-regular tree with every message equal to ``h``."""
    h = _check_message(h, spec.q)
    m = psi_dot(spec.log_psi, h[None, :])[0]
    vx = float(logsumexp(spec.log_psibar + d * m))
    edge = 0.5 * d * float(logsumexp(spec.log_psi + _log(h)[:, None] + _log(h)[None, :]))
    if vx == -np.inf or edge == -np.inf:
        return BetheBreakdown(vx, edge, float("nan"), True)
    return BetheBreakdown(vx, edge, vx - edge)


def embed(spec: FactorSpec, h) -> PairBelief:
    """Pair belief proportional to psi(s, s') h(s) h(s')."""
    h = _check_message(h, spec.q)
    lj = spec.log_psi + _log(h)[:, None] + _log(h)[None, :]
    joint = np.exp(lj - logsumexp(lj))
    return PairBelief.from_joint(joint)


def _as_joint(b) -> np.ndarray:
    return b.joint if isinstance(b, PairBelief) else np.asarray(b, dtype=float)


def _polytope_value(d: int, spec: FactorSpec, b: np.ndarray) -> float:
    if (b[~spec.support] > 0).any():
        return -np.inf
    hb = b.sum(axis=1)
    pos = hb > 0
    d_vx = float(np.sum(hb[pos] * (np.log(hb[pos]) - spec.log_psibar[pos])))
    mask = b > 0
    lh = _log(hb)
    ref = (lh[:, None] + spec.log_psi + lh[None, :])[mask]
    d_e = float(np.sum(b[mask] * (np.log(b[mask]) - ref)))
    return -(d_vx + 0.5 * d * d_e)


def phi_local_polytope(d: int, spec: FactorSpec, b) -> float:
    """Bethe functional at a point of the d-regular local polytope.

    -Phi = D(hbar || psibar) + (d/2) D(b || hbar x_psi hbar) with unnormalized
    reference measures; -inf when ``b`` charges a pair with psi = 0.
    """
    b = _as_joint(b)
    q = spec.q
    if b.shape != (q, q) or (b < -1e-15).any():
        raise InvalidPolytopePoint("pair belief must be a nonnegative q x q matrix")
    if abs(b.sum() - 1) > 1e-8:
        raise InvalidPolytopePoint("pair belief must sum to one")
    if np.abs(b.sum(axis=1) - b.sum(axis=0)).max() > 1e-8:
        raise InvalidPolytopePoint("row and column marginals differ")
    return _polytope_value(d, spec, np.clip(b, 0.0, None))


def polytope_gradient(d: int, spec: FactorSpec, b: np.ndarray) -> np.ndarray:
    """Symmetrized gradient of the polytope functional in the entries of ``b``."""
    hb = b.sum(axis=1)
    g_row = spec.log_psibar + (d - 1) * (_log(hb) + 1)
    with np.errstate(invalid="ignore"):
        g = g_row[:, None] + 0.5 * d * (spec.log_psi - _log(b) - 1)
    g = 0.5 * (g + g.T)
    g[~spec.support] = 0.0
    return g


class _SymmetricSoftmax:
    """Interior of the polytope as a softmax over upper-triangular support entries."""

    def __init__(self, spec: FactorSpec):
        q = spec.q
        iu = [(i, j) for i in range(q) for j in range(i, q) if spec.support[i, j]]
        self.q = q
        self.pairs = iu
        self.mult = np.array([1.0 if i == j else 2.0 for i, j in iu])

    def joint(self, theta):
        w = np.log(self.mult) + theta
        p = np.exp(w - logsumexp(w))
        b = np.zeros((self.q, self.q))
        for (i, j), pk, mk in zip(self.pairs, p, self.mult):
            b[i, j] = b[j, i] = pk / mk
        return b

    def theta(self, b):
        vals = np.array([b[i, j] for i, j in self.pairs])
        return np.log(np.maximum(vals, 1e-300))

    def pull_back(self, b, g):
        """Chain rule from d/d b (symmetric) to d/d theta."""
        gk = np.array([g[i, j] for i, j in self.pairs])
        wk = np.array([b[i, j] for i, j in self.pairs]) * self.mult
        return wk * (gk - np.dot(wk, gk))


def optimize_local_polytope(d: int, spec: FactorSpec, n_starts: int = 8, seed: int = 0, tol: float = 1e-12):
    """Multi-start maximization of the polytope functional.

    Returns ``(best, value)``.  Starts include the embeddings of the BP branch
    fixed points, so the result is never below them.
    """
    if not validate_permissive(spec).permissive:
        raise InvalidParameter("optimizer needs a permissive specification")
    par = _SymmetricSoftmax(spec)
    rng = np.random.Generator(np.random.PCG64(seed))
    starts = []
    for branch in ("free", "ordered"):
        fp = bp_fixed_point_regular(d, spec, branch)
        starts.append(par.theta(embed(spec, fp.h).joint))
    starts.append(np.zeros(len(par.pairs)))
    for _ in range(n_starts):
        starts.append(rng.normal(scale=2.0, size=len(par.pairs)))

    def fun(theta):
        b = par.joint(theta)
        v = _polytope_value(d, spec, b)
        return -v, -par.pull_back(b, polytope_gradient(d, spec, b))

    best_b, best_v = None, -np.inf
    for th0 in starts:
        v0 = -fun(th0)[0]
        if v0 > best_v:
            best_b, best_v = par.joint(th0), v0
        res = minimize(fun, th0, jac=True, method="L-BFGS-B", options={"gtol": tol, "ftol": 1e-16, "maxiter": 5000})
        if -res.fun > best_v:
            best_b, best_v = par.joint(res.x), float(-res.fun)
    return PairBelief.from_joint(best_b), best_v


def _tangent_direction(spec: FactorSpec, b: np.ndarray, rng) -> np.ndarray:
    """Random symmetric zero-sum direction with |delta| <= b entrywise."""
    q = spec.q
    r = rng.uniform(-1, 1, size=(q, q))
    r = 0.5 * (r + r.T)
    c = float(np.sum(b * r))
    return 0.5 * b * (r - c)


def stationarity_check(d: int, spec: FactorSpec, h, directions: int = 32, seed: int = 0) -> float:
    """Largest central-difference directional derivative at the embedding of ``h``."""
    b = embed(spec, h).joint
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = 0.0
    for _ in range(directions):
        delta = _tangent_direction(spec, b, rng)
        up = _polytope_value(d, spec, b + FD_STEP * delta)
        dn = _polytope_value(d, spec, b - FD_STEP * delta)
        worst = max(worst, abs(up - dn) / (2 * FD_STEP))
    return worst


def second_order_check(d: int, spec: FactorSpec, h, delta):
    """Analytic and finite-difference second derivative along ``delta``.

    analytic = (d-1) <(dbar/hbar)^2>_hbar - (d/2) <(delta/b)^2>_b at b = embed(h).
    """
    b = embed(spec, h).joint
    delta = np.asarray(delta, dtype=float)
    if delta.shape != b.shape:
        raise InvalidDirection("direction must be q x q")
    if np.abs(delta - delta.T).max() > 1e-14 or abs(delta.sum()) > 1e-12:
        raise InvalidDirection("direction must be symmetric with zero total mass")
    if (np.abs(delta) > b * (1 + 1e-12) + 1e-300).any():
        raise InvalidDirection("direction must satisfy |delta| <= b entrywise")
    hb = b.sum(axis=1)
    db = delta.sum(axis=1)
    mb = hb > 0
    m = b > 0
    analytic = (d - 1) * float(np.sum(db[mb] ** 2 / hb[mb])) - 0.5 * d * float(np.sum(delta[m] ** 2 / b[m]))
    f0 = _polytope_value(d, spec, b)
    fp = _polytope_value(d, spec, b + FD2_STEP * delta)
    fm = _polytope_value(d, spec, b - FD2_STEP * delta)
    numeric = (fp - 2 * f0 + fm) / FD2_STEP**2
    return analytic, numeric


def interpolation_functionals(d: int, spec: FactorSpec, h):
    """``(a_edge, a_vertex)``: parameter derivatives of the log weights averaged
    under the embedded pair belief and its marginal."""
    if spec.dlog_psi_dbeta is None or spec.dlog_psibar_dB is None:
        raise InvalidParameter("interpolation functionals need a parametrized family")
    b = embed(spec, h)
    dxi = np.where(spec.support, spec.dlog_psi_dbeta, 0.0)
    a_e = 0.5 * d * float(np.sum(b.joint * dxi))
    a_v = float(np.dot(b.marginal, spec.dlog_psibar_dB))
    return a_e, a_v


# --- population dynamics ---------------------------------------------------------


@dataclass(frozen=True)
class PopDynEstimate:
    mean: float
    stderr: float
    pool_size: int
    sweeps: int
    seed: int
    rejected: int = 0
    unreliable: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _segment_sum(vals: np.ndarray, owner: np.ndarray, n: int):
    """Per-owner sums of log-domain rows; -inf entries tracked by count."""
    neg = np.isneginf(vals)
    fin = np.where(neg, 0.0, vals)
    q = vals.shape[1]
    tot = np.stack([np.bincount(owner, weights=fin[:, s], minlength=n) for s in range(q)], axis=1)
    cnt = np.stack([np.bincount(owner, weights=neg[:, s], minlength=n) for s in range(q)], axis=1)
    return tot.reshape(n, q), cnt.reshape(n, q), fin, neg


def _popdyn_sweep(spec, pool, law, rng):
    n = pool.shape[0]
    k = np.asarray(law.sample(rng, size=n), dtype=np.int64)
    owner = np.repeat(np.arange(n), k)
    idx = rng.integers(0, n, size=owner.size)
    m = psi_dot(spec.log_psi, pool[idx]) if owner.size else np.zeros((0, spec.q))
    tot, cnt, _, _ = _segment_sum(m, owner, n)
    lv = spec.log_psibar[None, :] + np.where(cnt > 0, -np.inf, tot)
    top = lv.max(axis=1, keepdims=True)
    ok = np.isfinite(top[:, 0])
    new = pool.copy()
    p = np.exp(lv[ok] - top[ok])
    new[ok] = p / p.sum(axis=1, keepdims=True)
    return new


def phi_popdyn(
    root_law: OffspringLaw,
    offspring_law: OffspringLaw,
    spec: FactorSpec,
    pool: int = 10_000,
    sweeps: int = 100,
    seed: int = 0,
    init: str = "uniform",
    samples: int | None = None,
) -> PopDynEstimate:
    """Population-dynamics estimate of the Bethe functional on a Galton-Watson limit.

    The pool evolves under ``offspring_law``; the root has degree ``root_law``.
    """
    if pool < 1000:
        raise InvalidParameter("pool must be at least 1000")
    if sweeps < 0:
        raise InvalidParameter("sweeps must be nonnegative")
    rng = np.random.Generator(np.random.Philox(seed))
    q = spec.q
    if init == "uniform":
        h = np.full((pool, q), 1.0 / q)
    elif init == "random":
        x = rng.standard_exponential((pool, q))
        h = x / x.sum(axis=1, keepdims=True)
    else:
        raise InvalidParameter(f"unknown init {init!r}")
    for _ in range(sweeps):
        h = _popdyn_sweep(spec, h, offspring_law, rng)

    ns = samples or pool
    deg = np.asarray(root_law.sample(rng, size=ns), dtype=np.int64)
    owner = np.repeat(np.arange(ns), deg)
    idx = rng.integers(0, pool, size=owner.size)
    m = psi_dot(spec.log_psi, h[idx]) if owner.size else np.zeros((0, q))
    tot, cnt, fin, neg = _segment_sum(m, owner, ns)
    s_all = spec.log_psibar[None, :] + np.where(cnt > 0, -np.inf, tot)
    phi_vx = logsumexp(s_all, axis=1)
    # cavity field at o without child j, then the edge term through it
    cav_cnt = cnt[owner] - neg
    cav = spec.log_psibar[None, :] + np.where(cav_cnt > 0, -np.inf, tot[owner] - fin)
    with np.errstate(invalid="ignore"):
        phi_oj = phi_vx[owner] - logsumexp(cav, axis=1)
    edge = np.bincount(owner, weights=0.5 * phi_oj, minlength=ns)
    vals = phi_vx - edge
    good = np.isfinite(vals)
    rejected = int(ns - good.sum())
    vals = vals[good]
    mean = float(vals.mean())
    batches = np.array_split(vals, POPDYN_BATCHES)
    bm = np.array([b.mean() for b in batches])
    stderr = float(bm.std(ddof=1) / math.sqrt(POPDYN_BATCHES))
    return PopDynEstimate(mean, stderr, pool, sweeps, seed, rejected, rejected > 0.01 * ns)
