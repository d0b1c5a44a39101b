"""Univariate ARIMA engine: exact Gaussian likelihood, stepwise order search.

The ARMA part of a model is put in state-space form and filtered with a
Kalman recursion started from the stationary covariance, which yields the
exact innovations of the d-times differenced series.  The innovation
variance and the constant (mean for d=0, drift for d=1) are profiled out by
generalised least squares on the whitened innovations, so the numerical
optimiser only sees the ARMA coefficients.  Those are searched in an
unconstrained space mapped through partial autocorrelations, which keeps
every candidate stationary and invertible.

MA polynomials use the ``1 + theta_1 B + ...`` sign convention, so an
over-differenced white noise shows ``theta_1`` near -1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .errors import NonInvertible, SeriesTooShort

MAX_D = 2
MAX_ORDER = 5
MIN_LENGTH = 10
AICC_TIE = 1e-6
# order search skips fits with an AR/MA root this close to the unit circle
ROOT_MARGIN = 1.01
STEADY_TOL = 1e-14
# |raw| cap before tanh keeps partial autocorrelations off the unit circle
RAW_BOUND = 8.0
RECORD_VERSION = 1


@dataclass(frozen=True)
class ArimaSpec:
    p: int = 0
    d: int = 1
    q: int = 1
    drift: bool = True

    def __post_init__(self):
        if self.p < 0 or self.q < 0 or self.p + self.q > MAX_ORDER:
            raise ValueError(f"need p, q >= 0 and p + q <= {MAX_ORDER}: {self}")
        if self.d not in (0, 1, 2):
            raise ValueError(f"d must be 0, 1 or 2: {self}")
        if self.drift and self.d > 1:
            raise ValueError("a constant term is only allowed with d <= 1")

    @property
    def n_params(self):
        """Estimated parameters including the innovation variance."""
        return self.p + self.q + int(self.drift) + 1

    def __str__(self):
        return f"ARIMA({self.p},{self.d},{self.q})" + (" with drift" if self.drift else "")


DEFAULT_SPEC = ArimaSpec(0, 1, 1, True)


@dataclass(frozen=True)
class ArimaFit:
    """A fitted model.

    ``loglik`` is the exact log-likelihood of the differenced series.
    ``aicc`` is computed on a sample common to every order (observations
    ``3..n`` conditioned on the first two), so values are comparable across
    different ``d``.
    """

    spec: ArimaSpec
    ar: tuple
    ma: tuple
    drift_coef: float
    sigma2: float
    loglik: float
    aicc: float
    n: int
    tail: tuple = field(default=(), repr=False)
    state: tuple = field(default=(), repr=False)

    def forecast(self, h):
        return forecast(self, h)

    def to_record(self):
        return {
            "version": RECORD_VERSION,
            "spec": {"p": self.spec.p, "d": self.spec.d, "q": self.spec.q, "drift": self.spec.drift},
            "ar": list(self.ar),
            "ma": list(self.ma),
            "drift_coef": self.drift_coef,
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "aicc": self.aicc,
            "n": self.n,
            "tail": list(self.tail),
            "state": list(self.state),
        }

    @classmethod
    def from_record(cls, rec):
        if rec.get("version") != RECORD_VERSION:
            raise ValueError(f"unsupported ARIMA record version {rec.get('version')!r}")
        return cls(
            spec=ArimaSpec(**rec["spec"]),
            ar=tuple(rec["ar"]),
            ma=tuple(rec["ma"]),
            drift_coef=float(rec["drift_coef"]),
            sigma2=float(rec["sigma2"]),
            loglik=float(rec["loglik"]),
            aicc=float(rec["aicc"]),
            n=int(rec["n"]),
            tail=tuple(rec["tail"]),
            state=tuple(rec["state"]),
        )


# state-space kernels

@njit(cache=True)
def _system(phi, theta):
    p, q = phi.size, theta.size
    r = max(p, q + 1)
    T = np.zeros((r, r))
    for i in range(p):
        T[i, 0] = phi[i]
    for i in range(r - 1):
        T[i, i + 1] = 1.0
    R = np.zeros(r)
    R[0] = 1.0
    for i in range(q):
        R[i + 1] = theta[i]
    # stationary covariance: vec(P) = (I - T kron T)^-1 vec(R R')
    rr = r * r
    A = np.eye(rr)
    b = np.empty(rr)
    for i in range(r):
        for j in range(r):
            b[i * r + j] = R[i] * R[j]
            for k in range(r):
                for l in range(r):
                    A[i * r + j, k * r + l] -= T[i, k] * T[j, l]
    P0 = np.linalg.solve(A, b).reshape((r, r))
    return T, R, P0


@njit(cache=True)
def _kalman(T, R, P0, Y):
    """Innovations V, their variances F and the final predicted state.

    Once the state covariance stops changing (to ``STEADY_TOL``) the gain is
    frozen and only the state is propagated.
    """
    n, m = Y.shape
    r = T.shape[0]
    a = np.zeros((r, m))
    P = P0.copy()
    V = np.empty((n, m))
    F = np.empty(n)
    TP = np.empty((r, r))
    K = np.empty(r)
    na = np.empty((r, m))
    steady = False
    f = P[0, 0]
    for t in range(n):
        if not steady:
            f = P[0, 0]
        F[t] = f
        for j in range(m):
            V[t, j] = Y[t, j] - a[0, j]
        if not steady:
            for i in range(r):
                for k in range(r):
                    s = 0.0
                    for l in range(r):
                        s += T[i, l] * P[l, k]
                    TP[i, k] = s
            for i in range(r):
                K[i] = TP[i, 0] / f
        for i in range(r):
            for j in range(m):
                s = 0.0
                for l in range(r):
                    s += T[i, l] * a[l, j]
                na[i, j] = s + K[i] * V[t, j]
        for i in range(r):
            for j in range(m):
                a[i, j] = na[i, j]
        if not steady:
            delta = 0.0
            for i in range(r):
                for k in range(r):
                    s = 0.0
                    for l in range(r):
                        s += TP[i, l] * T[k, l]
                    new = s + R[i] * R[k] - f * K[i] * K[k]
                    delta = max(delta, abs(new - P[i, k]))
                    P[i, k] = new
            steady = delta < STEADY_TOL
    return V, F, a


@njit(cache=True)
def _profile(V, F, with_const):
    """GLS constant, residual sum of squares and whitened residuals."""
    n = F.size
    e = np.empty(n)
    beta = 0.0
    if with_const:
        sxy = 0.0
        sxx = 0.0
        for t in range(n):
            sxy += V[t, 0] * V[t, 1] / F[t]
            sxx += V[t, 1] * V[t, 1] / F[t]
        beta = sxy / sxx
    ssr = 0.0
    for t in range(n):
        e[t] = V[t, 0] - beta * V[t, 1] if with_const else V[t, 0]
        ssr += e[t] * e[t] / F[t]
    return beta, ssr, e


@njit(cache=True)
def _pacf_to_coef(u):
    """Map partial autocorrelations in (-1, 1) to stationary AR coefficients."""
    k = u.size
    phi = np.zeros(k)
    tmp = np.zeros(k)
    for j in range(k):
        for i in range(j):
            tmp[i] = phi[i] - u[j] * phi[j - 1 - i]
        for i in range(j):
            phi[i] = tmp[i]
        phi[j] = u[j]
    return phi


@njit(cache=True)
def _unpack(x, p, q):
    u = np.tanh(np.minimum(np.maximum(x, -RAW_BOUND), RAW_BOUND))
    return _pacf_to_coef(u[:p]), -_pacf_to_coef(u[p:])


@njit(cache=True)
def _objective(x, p, q, Y, with_const):
    """Negative profile log-likelihood (up to a constant) in the raw space."""
    phi, theta = _unpack(x, p, q)
    T, R, P0 = _system(phi, theta)
    V, F, _ = _kalman(T, R, P0, Y)
    for t in range(F.size):
        if not (F[t] > 0.0 and F[t] < 1e300):
            return 1e300
    _, ssr, _ = _profile(V, F, with_const)
    n = F.size
    if not ssr > 0.0:
        return -1e300
    val = 0.5 * (n * math.log(ssr / n) + np.log(F).sum())
    return val if math.isfinite(val) else 1e300


@njit(cache=True)
def _objective_grad(x, p, q, Y, with_const):
    """Objective with a central-difference gradient, in one compiled call."""
    f0 = _objective(x, p, q, Y, with_const)
    g = np.zeros(x.size)
    xx = x.copy()
    for i in range(x.size):
        h = 1e-6 * max(1.0, abs(x[i]))
        xx[i] = x[i] + h
        fp = _objective(xx, p, q, Y, with_const)
        xx[i] = x[i] - h
        fm = _objective(xx, p, q, Y, with_const)
        xx[i] = x[i]
        g[i] = (fp - fm) / (2 * h)
    return f0, g


def _roots_ok(poly_tail, sign, margin=1.0):
    if len(poly_tail) == 0 or not np.any(poly_tail):
        return True
    coefs = np.r_[1.0, sign * np.asarray(poly_tail)]
    roots = np.roots(coefs[::-1])
    return bool(np.all(np.abs(roots) > margin))


def _difference(y, d):
    w = np.asarray(y, dtype=float)
    for _ in range(d):
        w = np.diff(w)
    return w


def fit(series, spec=DEFAULT_SPEC):
    """Exact maximum-likelihood fit of one ARIMA specification."""
    y = np.asarray(series, dtype=float).ravel()
    n = y.size
    p, d, q = spec.p, spec.d, spec.q
    if n < MIN_LENGTH or n <= p + q + d + 2:
        raise SeriesTooShort(f"{n} observations are too few for {spec}")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")

    w = _difference(y, d)
    tail = _tail(y, d)
    scale = max(np.abs(y).max(), np.finfo(float).tiny)
    resid = w - w.mean() if spec.drift else w
    if np.abs(resid).max() <= 1e-10 * scale:
        # zero innovation variance: deterministic constant/trend
        mu = float(w.mean()) if spec.drift else 0.0
        r = max(p, q + 1)
        return ArimaFit(spec, (0.0,) * p, (0.0,) * q, mu, 0.0, math.inf, -math.inf, n,
                        tail, (0.0,) * r)

    Y = np.column_stack([w, np.ones_like(w)]) if spec.drift else w[:, None].copy()
    Y = np.ascontiguousarray(Y)
    k = p + q
    if k:
        res = minimize(_objective_grad, np.zeros(k), args=(p, q, Y, spec.drift), jac=True, method="BFGS",
                       options={"gtol": 1e-8, "maxiter": 400})
        x = res.x if np.all(np.isfinite(res.x)) else np.zeros(k)
        phi, theta = _unpack(x, p, q)
    else:
        phi, theta = np.zeros(0), np.zeros(0)
    if not (_roots_ok(phi, -1.0) and _roots_ok(theta, 1.0)):
        raise NonInvertible(f"{spec} converged outside the stationary/invertible region")
    return _finish(spec, y, w, Y, phi, theta, tail)


def _tail(y, d):
    # last value of each differencing level 0..d-1, needed to integrate forecasts
    out, v = [], np.asarray(y, dtype=float)
    for _ in range(d):
        out.append(float(v[-1]))
        v = np.diff(v)
    return tuple(out)


def _finish(spec, y, w, Y, phi, theta, tail):
    T, R, P0 = _system(phi, theta)
    V, F, a = _kalman(T, R, P0, Y)
    beta, ssr, e = _profile(V, F, spec.drift)
    m = w.size
    sigma2 = ssr / m
    loglik = -0.5 * (m * math.log(2 * math.pi * sigma2) + np.log(F).sum() + m)
    # common sample: drop the first (MAX_D - d) innovations
    s = MAX_D - spec.d
    nc = m - s
    ll_c = -0.5 * (nc * math.log(2 * math.pi * sigma2) + np.log(F[s:]).sum()
                   + (e[s:] ** 2 / F[s:]).sum() / sigma2)
    kpar = spec.n_params
    if nc - kpar - 1 > 0:
        aicc = -2 * ll_c + 2 * kpar + 2 * kpar * (kpar + 1) / (nc - kpar - 1)
    else:
        aicc = math.inf
    state = a[:, 0] - beta * a[:, 1] if spec.drift else a[:, 0]
    return ArimaFit(
        spec=spec,
        ar=tuple(float(v) for v in phi),
        ma=tuple(float(v) for v in theta),
        drift_coef=float(beta),
        sigma2=float(sigma2),
        loglik=float(loglik),
        aicc=float(aicc),
        n=y.size,
        tail=tail,
        state=tuple(float(v) for v in state),
    )


def forecast(fit_, h):
    """Conditional-mean forecasts ``h`` steps beyond the end of the series."""
    h = int(h)
    if h < 1:
        raise ValueError("horizon must be >= 1")
    phi = np.asarray(fit_.ar, dtype=float)
    theta = np.asarray(fit_.ma, dtype=float)
    T, _, _ = _system(phi, theta)
    a = np.asarray(fit_.state, dtype=float)
    wf = np.empty(h)
    for i in range(h):
        wf[i] = a[0]
        a = T @ a
    wf += fit_.drift_coef if fit_.spec.drift else 0.0
    # integrate back through each differencing level
    for last in reversed(fit_.tail):
        wf = last + np.cumsum(wf)
    return wf


# order selection

def choose_d(series):
    """Difference while it lowers the sample variance, at most twice."""
    y = np.asarray(series, dtype=float)
    d = 0
    while d < MAX_D and np.var(np.diff(y, n=d + 1)) < np.var(np.diff(y, n=d) if d else y):
        d += 1
    return d


def _better(f, g):
    """True when fit ``f`` beats ``g``: AICc, then fewer params, lower d, lower p."""
    tie = f.aicc == g.aicc or abs(f.aicc - g.aicc) <= AICC_TIE
    if not tie:
        return f.aicc < g.aicc
    kf = (f.spec.n_params, f.spec.d, f.spec.p, f.spec.q)
    kg = (g.spec.n_params, g.spec.d, g.spec.p, g.spec.q)
    return kf < kg


def _admissible(f):
    # near-cancelling roots on the unit circle fit spectral spikes, not structure
    return _roots_ok(f.ar, -1.0, ROOT_MARGIN) and _roots_ok(f.ma, 1.0, ROOT_MARGIN)


def _try_fit(y, spec, cache):
    """Cached fit for the order search; None when it fails or is inadmissible."""
    if spec not in cache:
        try:
            cache[spec] = fit(y, spec)
        except (SeriesTooShort, NonInvertible, np.linalg.LinAlgError):
            cache[spec] = None
    f = cache[spec]
    return f if f is not None and _admissible(f) else None


def _valid(p, d, q, drift, max_p, max_q):
    return 0 <= p <= max_p and 0 <= q <= max_q and p + q <= MAX_ORDER and not (drift and d > 1)


def _stepwise(y, d, max_p, max_q, cache):
    with_c = d <= 1
    starts = [(2, 2, with_c), (0, 0, with_c), (1, 0, with_c), (0, 1, with_c), (0, 0, False)]
    # pure AR / MA seeds guard against stepwise stalling on a mixed model
    starts += [(k, 0, with_c) for k in (2, 3)] + [(0, k, with_c) for k in (2, 3)]
    best = None
    for p, q, c in starts:
        if not _valid(p, d, q, c, max_p, max_q):
            continue
        f = _try_fit(y, ArimaSpec(p, d, q, c), cache)
        if f is not None and (best is None or _better(f, best)):
            best = f
    # neighbourhood moves of +-1 until stuck, then one wider +-2 ring
    radius = 1
    while best is not None:
        s = best.spec
        steps = range(-radius, radius + 1)
        cands = [(s.p + dp, s.q + dq, s.drift) for dp in steps for dq in steps
                 if max(abs(dp), abs(dq)) == radius]
        if d <= 1 and radius == 1:
            cands.append((s.p, s.q, not s.drift))
        moved = False
        for p, q, c in cands:
            if not _valid(p, d, q, c, max_p, max_q):
                continue
            f = _try_fit(y, ArimaSpec(p, d, q, c), cache)
            if f is not None and _better(f, best):
                best = f
                moved = True
                break
        if moved:
            radius = 1
        elif radius == 1:
            radius = 2
        else:
            break
    return best


def auto_fit(series, max_p=MAX_ORDER, max_q=MAX_ORDER, d=None, cache=None):
    """Stepwise AICc search over (p, q) and the constant term.

    With ``d=None`` a stepwise search is run for every d in 0..2 and the
    best result kept; this is possible because AICc is measured on a sample
    shared by all d.  ``d="variance"`` fixes d with :func:`choose_d`; an
    integer fixes it directly.  ``cache`` (a dict keyed by ArimaSpec) may be
    shared with :func:`exhaustive_fit` on the same series to reuse fits.
    """
    y = np.asarray(series, dtype=float).ravel()
    if d is None:
        ds = range(MAX_D + 1)
    elif d == "variance":
        ds = [choose_d(y)]
    else:
        ds = [int(d)]
    cache = {} if cache is None else cache
    best = None
    for dd in ds:
        f = _stepwise(y, dd, max_p, max_q, cache)
        if f is not None and (best is None or _better(f, best)):
            best = f
    if best is None:
        raise SeriesTooShort(f"no ARIMA model could be fitted to {y.size} observations")
    return best


def exhaustive_fit(series, max_p=3, max_d=2, max_q=3, cache=None):
    """Best AICc over every (p, d, q, constant) up to the given orders."""
    y = np.asarray(series, dtype=float).ravel()
    best = None
    cache = {} if cache is None else cache
    for d in range(max_d + 1):
        for p in range(max_p + 1):
            for q in range(max_q + 1):
                for c in ((True, False) if d <= 1 else (False,)):
                    if not _valid(p, d, q, c, max_p, max_q):
                        continue
                    f = _try_fit(y, ArimaSpec(p, d, q, c), cache)
                    if f is not None and (best is None or _better(f, best)):
                        best = f
    return best
