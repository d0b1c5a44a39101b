"""Compositional Lee-Carter style forecasting of life-table death distributions.

A year x age matrix of d_x compositions is centred by the closed column
geometric means, mapped to real space (CLR, ILR or an alpha-transformation),
factorised by a truncated SVD, and the time scores are extrapolated with
ARIMA.  Forecasts are mapped back to the simplex, the centre is added back,
and everything is shifted so the model reproduces the last observed year.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import arima
from . import simplex as sx
from .errors import (
    DimensionMismatch,
    GapInYears,
    RankTooLarge,
    RowNotComposition,
    SeriesTooShort,
)

MIN_YEARS = 10
DEFAULT_K = {"female": 7, "male": 4}
SCALE = 100_000  # display radix for d_x tables


# transforms

@dataclass(frozen=True)
class Transform:
    kind: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("clr", "ilr", "alpha"):
            raise ValueError(f"unknown transform {self.kind!r}")
        if self.kind == "alpha" and not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @classmethod
    def parse(cls, tag):
        """``clr``, ``ilr`` or ``alpha:<value>`` (case-insensitive)."""
        if isinstance(tag, Transform):
            return tag
        tag = str(tag).strip().lower()
        if tag in ("clr", "ilr"):
            return cls(tag)
        m = re.fullmatch(r"alpha[:(]\s*([0-9.eE+-]+)\s*\)?", tag)
        if m:
            return cls("alpha", float(m.group(1)))
        raise ValueError(f"cannot parse transform tag {tag!r}")

    def __str__(self):
        return f"alpha:{self.alpha!r}" if self.kind == "alpha" else self.kind

    def width(self, D):
        return D if self.kind == "clr" else D - 1

    def forward(self, X):
        if self.kind == "clr":
            return sx.clr(X)
        if self.kind == "ilr":
            return sx.ilr(X)
        return sx.alpha_transform(X, self.alpha)

    def inverse(self, Z, D, clamp=False):
        """Back to the simplex.  With ``clamp`` returns ``(X, n_clamped)``."""
        if self.kind == "clr":
            X = sx.clr_inv(Z)
            return (X, 0) if clamp else X
        a = 0.0 if self.kind == "ilr" else self.alpha
        return sx.alpha_inverse(Z, a, D, clamp=clamp)


# data containers

@dataclass(frozen=True)
class DeathMatrix:
    values: np.ndarray
    years: np.ndarray
    ages: np.ndarray = None

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        years = np.asarray(self.years, dtype=int).ravel()
        ages = np.arange(v.shape[1]) if self.ages is None else np.asarray(self.ages, dtype=int)
        if years.size != v.shape[0] or ages.size != v.shape[1]:
            raise DimensionMismatch(f"values {v.shape} vs {years.size} years x {ages.size} ages")
        if years.size > 1 and np.any(np.diff(years) != 1):
            raise GapInYears(f"years must be consecutive: {years.tolist()}")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise RowNotComposition("d_x rows must be strictly positive and finite")
        if np.any(np.abs(v.sum(axis=1) - 1.0) > 1e-10):
            raise RowNotComposition("d_x rows must sum to 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "ages", ages)

    @property
    def shape(self):
        return self.values.shape

    def select(self, first, last):
        keep = (self.years >= first) & (self.years <= last)
        return DeathMatrix(self.values[keep], self.years[keep], self.ages)

    def head(self, n):
        return DeathMatrix(self.values[:n], self.years[:n], self.ages)

    def to_frame(self, column="dx"):
        T, X = self.shape
        return pd.DataFrame({
            "year": np.repeat(self.years, X),
            "age": np.tile(self.ages, T),
            column: self.values.ravel(),
        })


def assemble(tables):
    """Stack per-year life tables into a DeathMatrix (rows re-closed)."""
    if not tables:
        raise ValueError("no life tables given")
    X = tables[0].dx.size
    if any(t.dx.size != X for t in tables):
        raise DimensionMismatch("life tables have different age grids")
    dx = np.vstack([t.dx for t in tables])
    if np.any(dx <= 0):
        raise RowNotComposition("a life table has a non-positive d_x")
    return DeathMatrix(sx.closure(dx), [t.year for t in tables])


@dataclass(frozen=True)
class CenteredMatrix:
    values: np.ndarray
    center: np.ndarray


def center(D):
    """Perturbation-subtract the closed column geometric means."""
    V = D.values if isinstance(D, DeathMatrix) else np.asarray(D, dtype=float)
    c = sx.closure(np.exp(np.log(V).mean(axis=0)))
    return CenteredMatrix(sx.perturb_sub(V, c), c)


def uncenter(F, c):
    return sx.perturb(F, c)


def transform_matrix(F, tag):
    tr = Transform.parse(tag)
    V = F.values if isinstance(F, CenteredMatrix) else F
    return tr.forward(V)


def inverse_matrix(Hs, c, tag, clamp=False):
    """Rowwise inverse transform followed by adding back the centre."""
    tr = Transform.parse(tag)
    c = np.asarray(c, dtype=float)
    out = tr.inverse(Hs, c.size, clamp=clamp)
    if clamp:
        X, n = out
        return uncenter(X, c), n
    return uncenter(out, c)


# SVD and extrapolation

@dataclass(frozen=True)
class SvdFactorization:
    K: int
    singular_values: np.ndarray
    kappa: np.ndarray  # T x K, singular values folded in
    beta: np.ndarray  # M x K, orthonormal columns
    explained_variance: np.ndarray  # cumulative, length K

    def reconstruct(self):
        return self.kappa @ self.beta.T


def svd_rank_k(H, K):
    H = np.asarray(H, dtype=float)
    T, M = H.shape
    if not 1 <= K <= min(T, M):
        raise RankTooLarge(f"K={K} must lie in 1..{min(T, M)} for a {T}x{M} matrix")
    U, s, Vt = np.linalg.svd(H, full_matrices=False)
    energy = np.sum(s**2)
    ev = np.cumsum(s[:K] ** 2) / energy if energy > 0 else np.ones(K)
    return SvdFactorization(K, s[:K].copy(), U[:, :K] * s[:K], Vt[:K].T.copy(), np.minimum(ev, 1.0))


def fit_kappa(fac, model="default"):
    if model == "default":
        return [arima.fit(fac.kappa[:, k]) for k in range(fac.K)]
    if model == "auto":
        return [arima.auto_fit(fac.kappa[:, k]) for k in range(fac.K)]
    raise ValueError(f"model must be 'default' or 'auto', got {model!r}")


def forecast_matrix(fac, model="default", h=8, fits=None):
    """Extrapolate each kappa series ``h`` steps and rebuild H*."""
    if h < 1:
        raise ValueError("horizon must be >= 1")
    fits = fit_kappa(fac, model) if fits is None else fits
    kap = np.column_stack([f.forecast(h) for f in fits])
    return kap @ fac.beta.T, fits


def jumpoff_adjust(Hs, H_last, h_fit_last):
    Hs = np.atleast_2d(Hs)
    H_last = np.asarray(H_last, dtype=float)
    h_fit_last = np.asarray(h_fit_last, dtype=float)
    if H_last.shape != h_fit_last.shape or Hs.shape[1] != H_last.size:
        raise DimensionMismatch(f"forecast width {Hs.shape[1]} vs jump-off rows {H_last.shape}, {h_fit_last.shape}")
    return Hs + (H_last - h_fit_last)


# the forecaster

@dataclass
class FitArtifacts:
    transform: str
    K: int
    model: str
    center: np.ndarray
    singular_values: np.ndarray
    explained_variance: np.ndarray
    arima: list
    jumpoff_shift: np.ndarray
    years: np.ndarray

    def to_dict(self):
        return {
            "transform": self.transform,
            "K": self.K,
            "model": self.model,
            "years": [int(self.years[0]), int(self.years[-1])],
            "singular_values": self.singular_values.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "center": self.center.tolist(),
            "jumpoff_shift_norm": float(np.linalg.norm(self.jumpoff_shift)),
            "arima": [f.to_record() for f in self.arima],
        }


@dataclass
class Forecast:
    values: np.ndarray
    years: np.ndarray
    ages: np.ndarray
    n_clamped: int = 0

    def to_matrix(self):
        return DeathMatrix(self.values, self.years, self.ages)

    def to_frame(self):
        T, X = self.values.shape
        return pd.DataFrame({
            "year": np.repeat(self.years, X),
            "age": np.tile(self.ages, T),
            "dx": self.values.ravel(),
            "dx_100k": self.values.ravel() * SCALE,
        })


@dataclass
class CodaLeeCarter:
    """Centre, transform, factorise and extrapolate a DeathMatrix.

    ``clamp=False`` lets NegativeDetectionLimit propagate (used while
    tuning); ``clamp=True`` floors offending parts and counts them.
    """

    transform: object = "clr"
    K: int = 7
    model: str = "default"
    clamp: bool = True
    artifacts: FitArtifacts = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.transform = Transform.parse(self.transform)
        if self.model not in ("default", "auto"):
            raise ValueError(f"model must be 'default' or 'auto', got {self.model!r}")

    def fit(self, D):
        if not isinstance(D, DeathMatrix):
            raise TypeError("fit expects a DeathMatrix")
        if D.shape[0] < MIN_YEARS:
            raise SeriesTooShort(f"need at least {MIN_YEARS} years, got {D.shape[0]}")
        self._D = D
        cm = center(D)
        H = self.transform.forward(cm.values)
        fac = svd_rank_k(H, self.K)
        fits = fit_kappa(fac, self.model)
        H_hat = fac.reconstruct()
        shift = H[-1] - H_hat[-1]
        self._cm, self._H, self._fac, self._fits, self._H_hat = cm, H, fac, fits, H_hat
        self.artifacts = FitArtifacts(str(self.transform), self.K, self.model, cm.center,
                                      fac.singular_values, fac.explained_variance, fits, shift, D.years)
        return self

    def _back(self, Z):
        out = inverse_matrix(Z, self._cm.center, self.transform, clamp=self.clamp)
        return out if self.clamp else (out, 0)

    def fitted(self):
        """In-sample rank-K reconstruction; the jump-off year is adjusted."""
        Z = self._H_hat.copy()
        Z[-1] = self._H[-1]
        X, n = self._back(Z)
        return Forecast(X, self._D.years.copy(), self._D.ages.copy(), n)

    def forecast(self, h=8):
        Hs, _ = forecast_matrix(self._fac, self.model, h, fits=self._fits)
        Hs = jumpoff_adjust(Hs, self._H[-1], self._H_hat[-1])
        X, n = self._back(Hs)
        years = self._D.years[-1] + np.arange(1, h + 1)
        return Forecast(X, years, self._D.ages.copy(), n)
