"""Synthetic revenue-style series, preprocessing and lag-window datasets.

Each series is modelled as a Gaussian process (rational-quadratic + Matern-3/2
+ periodic kernel, constant mean) plus a two-state Gaussian HMM on the
residuals. Fitted models produce synthetic continuations that are mapped back
to the raw scale.
"""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

JITTER = 1e-6
# lengthscales below the monthly sampling interval are indistinguishable from noise
LOG2PI = math.log(2.0 * math.pi)


class DataError(ValueError):
    """Raised for malformed or degenerate input data."""


class GpFitError(RuntimeError):
    """Raised when the kernel matrix cannot be factorized."""


# ---------------------------------------------------------------------------
# raw / standardized series


@dataclass
class SeriesRaw:
    values: np.ndarray
    months: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.months is None:
            self.months = np.arange(self.values.shape[0])
        self.months = np.asarray(self.months, dtype=int).reshape(-1)
        if self.months.shape != self.values.shape:
            raise DataError("months and values differ in length")


@dataclass
class SeriesStd:
    """Standardized log series with the statistics needed to invert it."""

    x: np.ndarray
    mean: float
    scale: float
    tau: np.ndarray
    months: np.ndarray
    fit_window: tuple
    name: str = ""

    def invert(self, x=None) -> np.ndarray:
        """Map standardized values back to the (clipped) raw scale."""
        x = self.x if x is None else np.asarray(x, dtype=float)
        return np.maximum(np.exp(self.scale * x + self.mean) - 1.0, 0.0)


def _window(fit_window, n):
    if fit_window is None:
        return 0, n
    if isinstance(fit_window, slice):
        start, stop, _ = fit_window.indices(n)
        return start, stop
    if isinstance(fit_window, int):
        return 0, min(fit_window, n)
    start, stop = fit_window
    return int(start), int(stop)


def standardize(raw: SeriesRaw, fit_window=None) -> SeriesStd:
    """Clip at zero, take ``log1p`` and z-score with fit-window statistics."""
    start, stop = _window(fit_window, raw.values.shape[0])
    if not 0 <= start < stop <= raw.values.shape[0]:
        raise DataError(f"fit window [{start}, {stop}) is empty or outside the series")
    u = np.log1p(np.maximum(raw.values, 0.0))
    fit = u[start:stop]
    mean = float(fit.mean())
    scale = float(fit.std())
    if not np.isfinite(scale) or scale <= 1e-12 * max(1.0, abs(mean)):
        raise DataError(f"series {raw.name!r} is constant on the fit window; cannot standardize")
    months = raw.months
    tau = (months - months.min()) / 12.0
    return SeriesStd((u - mean) / scale, mean, scale, tau, months.copy(), (start, stop), raw.name)


# ---------------------------------------------------------------------------
# Gaussian process

HYPER_NAMES = (
    "rq_var", "rq_len", "rq_alpha",
    "matern_var", "matern_len",
    "per_var", "per_len", "period",
    "noise_var",
)
_LOG_BOUNDS = {
    "rq_var": (1e-6, 1e2), "rq_len": (1.0 / 12.0, 50.0), "rq_alpha": (1e-2, 1e2),
    "matern_var": (1e-6, 1e2), "matern_len": (1.0 / 12.0, 50.0),
    "per_var": (1e-6, 1e2), "per_len": (0.1, 50.0), "period": (0.25, 4.0),
    "noise_var": (1e-6, 1e2),
}
DEFAULT_HYPER = {
    "rq_var": 0.3, "rq_len": 1.0, "rq_alpha": 1.0,
    "matern_var": 0.3, "matern_len": 0.25,
    "per_var": 0.3, "per_len": 1.0, "period": 1.0,
    "noise_var": 0.1,
}
_LO = np.log([_LOG_BOUNDS[k][0] for k in HYPER_NAMES])
_HI = np.log([_LOG_BOUNDS[k][1] for k in HYPER_NAMES])


def kernel(hyper: dict, t1, t2, grad=False):
    """Additive RQ + Matern-3/2 + periodic kernel (no noise term).

    With ``grad=True`` also returns derivatives with respect to the log of
    every hyperparameter except ``noise_var`` (a dict of matrices).
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    d = t1[:, None] - t2[None, :]
    r2 = d * d
    r = np.abs(d)

    s, ell, alpha = hyper["rq_var"], hyper["rq_len"], hyper["rq_alpha"]
    base = 1.0 + r2 / (2.0 * alpha * ell * ell)
    k_rq = s * base ** (-alpha)

    sm, lm = hyper["matern_var"], hyper["matern_len"]
    a = math.sqrt(3.0) * r / lm
    ea = np.exp(-a)
    k_m = sm * (1.0 + a) * ea

    sp, lp, p = hyper["per_var"], hyper["per_len"], hyper["period"]
    sn = np.sin(math.pi * r / p)
    k_p = sp * np.exp(-2.0 * sn * sn / (lp * lp))

    k = k_rq + k_m + k_p
    if not grad:
        return k
    g = {
        "rq_var": k_rq,
        "rq_len": s * base ** (-alpha - 1.0) * r2 / (ell * ell),
        "rq_alpha": k_rq * alpha * (-np.log(base) + (base - 1.0) / base),
        "matern_var": k_m,
        "matern_len": sm * a * a * ea,
        "per_var": k_p,
        "per_len": k_p * 4.0 * sn * sn / (lp * lp),
        "period": k_p * (2.0 * math.pi * r / (p * lp * lp)) * np.sin(2.0 * math.pi * r / p),
    }
    return k, g


def _unpack(theta):
    return dict(zip(HYPER_NAMES, np.exp(theta[:-1]))), float(theta[-1])


def log_marginal_likelihood(theta, tau, x, grad=True):
    """MLL and its gradient for packed parameters ``[log hypers..., mean]``."""
    hyper, mu = _unpack(theta)
    n = tau.shape[0]
    kmat, dk = kernel(hyper, tau, tau, grad=True)
    ky = kmat + (hyper["noise_var"] + JITTER) * np.eye(n)
    try:
        chol = sla.cho_factor(ky, lower=True)
    except sla.LinAlgError:
        return -np.inf, None
    resid = x - mu
    alpha = sla.cho_solve(chol, resid)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    mll = -0.5 * resid @ alpha - 0.5 * logdet - 0.5 * n * LOG2PI
    if not grad:
        return float(mll), None
    kinv = sla.cho_solve(chol, np.eye(n))
    inner = np.outer(alpha, alpha) - kinv
    g = np.empty_like(theta)
    for i, name in enumerate(HYPER_NAMES[:-1]):
        g[i] = 0.5 * np.sum(inner * dk[name])
    g[len(HYPER_NAMES) - 1] = 0.5 * hyper["noise_var"] * np.trace(inner)
    g[-1] = alpha.sum()
    return float(mll), g


def _ascend(theta, tau, x, iterations):
    mll, g = log_marginal_likelihood(theta, tau, x)
    if not np.isfinite(mll):
        return theta, mll, [mll]
    trace = [mll]
    step = 0.01
    for _ in range(iterations):
        accepted = False
        for _ in range(30):
            cand = theta + step * g
            cand[:-1] = np.clip(cand[:-1], _LO, _HI)
            cand_mll, cand_g = log_marginal_likelihood(cand, tau, x)
            if np.isfinite(cand_mll) and cand_mll >= mll:
                theta, mll, g = cand, cand_mll, cand_g
                step *= 1.3
                accepted = True
                break
            step *= 0.5
        trace.append(mll)
        if not accepted:
            break
    return theta, mll, trace


@dataclass
class GpModel:
    """Fitted GP: hyperparameters plus the data the posterior conditions on."""

    mean: float
    hyper: dict
    tau_train: np.ndarray
    x_train: np.ndarray
    std_mean: float = 0.0
    std_scale: float = 1.0
    last_month: int = 0
    first_month: int = 0
    mll: float = float("nan")
    mll_trace: list = field(default_factory=list)

    def _ky_chol(self):
        n = self.tau_train.shape[0]
        ky = kernel(self.hyper, self.tau_train, self.tau_train) + (self.hyper["noise_var"] + JITTER) * np.eye(n)
        try:
            return sla.cho_factor(ky, lower=True)
        except sla.LinAlgError as exc:
            raise GpFitError(f"kernel matrix not positive definite; hyperparameters={self.hyper}") from exc

    def predict(self, tau_new):
        """Posterior mean and covariance of the latent function at ``tau_new``."""
        tau_new = np.asarray(tau_new, dtype=float)
        prior = kernel(self.hyper, tau_new, tau_new)
        if self.tau_train.shape[0] == 0:
            return np.full(tau_new.shape[0], self.mean), prior
        chol = self._ky_chol()
        kstar = kernel(self.hyper, self.tau_train, tau_new)
        mu = self.mean + kstar.T @ sla.cho_solve(chol, self.x_train - self.mean)
        cov = prior - kstar.T @ sla.cho_solve(chol, kstar)
        return mu, 0.5 * (cov + cov.T)

    def residuals(self):
        mu, _ = self.predict(self.tau_train)
        return self.x_train - mu

    def to_dict(self):
        return {"mean": self.mean, "hyper": dict(self.hyper), "mll": self.mll}


def fit_gp(series: SeriesStd, iterations=200, restarts=3, seed=0, condition_on="all") -> GpModel:
    """Fit kernel hyperparameters by gradient ascent on the log marginal likelihood.

    Hyperparameters are fitted on the series' fit window; the returned model
    conditions on every observed point (``condition_on="all"``) or only the
    fit window (``"fit"``). Restart 0 starts from :data:`DEFAULT_HYPER`, the
    others from seeded log-normal perturbations of it; the best MLL is kept.
    """
    start, stop = series.fit_window
    tau = np.asarray(series.tau[start:stop], dtype=float)
    x = np.asarray(series.x[start:stop], dtype=float)
    if tau.shape[0] < 24:
        raise DataError(f"GP fitting needs >= 24 points, got {tau.shape[0]}")
    rng = np.random.default_rng(seed)
    theta0 = np.append(np.log([DEFAULT_HYPER[k] for k in HYPER_NAMES]), x.mean())
    best = None
    for r in range(restarts):
        theta = theta0.copy()
        if r > 0:
            theta[:-1] = np.clip(theta[:-1] + rng.normal(0.0, 0.5, theta.shape[0] - 1), _LO, _HI)
            theta[HYPER_NAMES.index("period")] = theta0[HYPER_NAMES.index("period")]
        theta, mll, trace = _ascend(theta, tau, x, iterations)
        if best is None or mll > best[1]:
            best = (theta, mll, trace)
    theta, mll, trace = best
    if not np.isfinite(mll):
        hyper, _ = _unpack(theta)
        raise GpFitError(f"kernel matrix not positive definite after jitter; hyperparameters={hyper}")
    hyper, mu = _unpack(theta)
    if condition_on == "all":
        tau_c, x_c = np.asarray(series.tau, dtype=float), np.asarray(series.x, dtype=float)
    else:
        tau_c, x_c = tau, x
    return GpModel(
        mean=mu, hyper={k: float(v) for k, v in hyper.items()}, tau_train=tau_c, x_train=x_c,
        std_mean=series.mean, std_scale=series.scale,
        last_month=int(series.months.max()), first_month=int(series.months.min()),
        mll=mll, mll_trace=[float(v) for v in trace],
    )


# ---------------------------------------------------------------------------
# two-state HMM


@dataclass
class Hmm2:
    """Two-state HMM with Gaussian emissions sharing one variance."""

    trans: np.ndarray
    offsets: np.ndarray
    sigma: float
    init: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))
    final: np.ndarray = None
    loglik_trace: list = field(default_factory=list)
    degenerate: bool = False

    def __post_init__(self):
        self.trans = np.asarray(self.trans, dtype=float)
        self.offsets = np.asarray(self.offsets, dtype=float)
        self.init = np.asarray(self.init, dtype=float)
        if self.final is None:
            self.final = self.init.copy()
        self.final = np.asarray(self.final, dtype=float)
        if self.trans.shape != (2, 2) or np.any(np.abs(self.trans.sum(axis=1) - 1.0) > 1e-12):
            raise DataError("transition matrix must be 2x2 and row-stochastic")
        if not np.all(np.isfinite(self.offsets)):
            raise DataError("HMM offsets must be finite")

    def expected_offsets(self, horizon):
        """Mean offset at each of the next ``horizon`` steps after the data."""
        dist = self.final @ self.trans
        out = np.empty(horizon)
        for t in range(horizon):
            out[t] = dist @ self.offsets
            dist = dist @ self.trans
        return out

    def to_dict(self):
        return {
            "trans": self.trans.tolist(), "offsets": self.offsets.tolist(), "sigma": self.sigma,
            "init": self.init.tolist(), "degenerate": self.degenerate,
        }


def _log_emissions(hmm, obs):
    var = hmm.sigma**2
    return -0.5 * ((obs[:, None] - hmm.offsets[None, :]) ** 2 / var + math.log(2.0 * math.pi * var))


def forward_backward(hmm: Hmm2, obs):
    """Scaled forward-backward pass.

    Returns ``(gamma, xi_sum, loglik)`` where ``gamma[t, s]`` is the posterior
    state probability and ``xi_sum`` the expected transition counts.
    """
    obs = np.asarray(obs, dtype=float)
    n = obs.shape[0]
    logb = _log_emissions(hmm, obs)
    shift = logb.max(axis=1, keepdims=True)
    b = np.exp(logb - shift)
    alpha = np.empty((n, 2))
    c = np.empty(n)
    a = hmm.init * b[0]
    c[0] = a.sum()
    alpha[0] = a / c[0]
    for t in range(1, n):
        a = (alpha[t - 1] @ hmm.trans) * b[t]
        c[t] = a.sum()
        alpha[t] = a / c[t]
    beta = np.empty((n, 2))
    beta[-1] = 1.0
    for t in range(n - 2, -1, -1):
        beta[t] = hmm.trans @ (b[t + 1] * beta[t + 1]) / c[t + 1]
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    xi_sum = np.zeros((2, 2))
    for t in range(n - 1):
        xi_sum += alpha[t][:, None] * hmm.trans * (b[t + 1] * beta[t + 1])[None, :] / c[t + 1]
    loglik = float(np.sum(np.log(c)) + np.sum(shift))
    return gamma, xi_sum, loglik, alpha


def posterior(hmm: Hmm2, obs):
    return forward_backward(hmm, obs)[0]


def fit_hmm(residuals, max_iter=200, tol=1e-8) -> Hmm2:
    """Baum-Welch EM for a two-state Gaussian HMM with shared variance.

    If a state's expected occupancy drops below one observation the fit is
    reported as degenerate and a single-offset model is returned.
    """
    y = np.asarray(residuals, dtype=float).reshape(-1)
    if y.shape[0] < 10:
        raise DataError(f"HMM fitting needs >= 10 residuals, got {y.shape[0]}")
    var_floor = 1e-6 * max(float(y.var()), 1e-12)
    sigma0 = math.sqrt(max(float(y.var()), var_floor))
    lo, hi = np.quantile(y, [0.25, 0.75])
    hmm = Hmm2(np.array([[0.9, 0.1], [0.1, 0.9]]), np.array([lo, hi]), sigma0)
    trace = []
    for _ in range(max_iter):
        gamma, xi_sum, loglik, alpha = forward_backward(hmm, y)
        trace.append(loglik)
        occ = gamma.sum(axis=0)
        if np.any(occ < 1.0):
            return Hmm2(
                np.array([[0.5, 0.5], [0.5, 0.5]]), np.full(2, y.mean()), math.sqrt(max(y.var(), var_floor)),
                loglik_trace=trace, degenerate=True,
            )
        trans = xi_sum / xi_sum.sum(axis=1, keepdims=True)
        offsets = (gamma * y[:, None]).sum(axis=0) / occ
        var = float(np.sum(gamma * (y[:, None] - offsets[None, :]) ** 2) / y.shape[0])
        hmm = Hmm2(trans, offsets, math.sqrt(max(var, var_floor)), init=gamma[0], final=alpha[-1])
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol * max(1.0, abs(trace[-1])):
            break
    gamma, _, loglik, alpha = forward_backward(hmm, y)
    trace.append(loglik)
    hmm.final = alpha[-1]
    hmm.loglik_trace = trace
    return hmm


# ---------------------------------------------------------------------------
# synthesis


def _mvn(rng, mean, cov):
    w, v = np.linalg.eigh(cov)
    return mean + v @ (np.sqrt(np.clip(w, 0.0, None)) * rng.standard_normal(mean.shape[0]))


def synthesize_std(gp: GpModel, hmm: Hmm2, horizon: int, seed) -> np.ndarray:
    """Sample a standardized continuation ``f + o + eps`` for ``horizon`` months."""
    if horizon <= 0:
        raise DataError(f"horizon must be positive, got {horizon}")
    rng = np.random.default_rng(seed)
    months = gp.last_month + 1 + np.arange(horizon)
    tau = (months - gp.first_month) / 12.0
    mu, cov = gp.predict(tau)
    f = _mvn(rng, mu, cov)
    state_dist = hmm.final @ hmm.trans
    states = np.empty(horizon, dtype=int)
    for t in range(horizon):
        states[t] = int(rng.random() < state_dist[1])
        state_dist = hmm.trans[states[t]]
    eps = hmm.sigma * rng.standard_normal(horizon)
    return f + hmm.offsets[states] + eps


def synthesize(gp: GpModel, hmm: Hmm2, horizon: int, seed) -> SeriesRaw:
    """Synthetic continuation on the raw scale, clipped at zero."""
    x = synthesize_std(gp, hmm, horizon, seed)
    y = np.maximum(np.exp(gp.std_scale * x + gp.std_mean) - 1.0, 0.0)
    return SeriesRaw(y, gp.last_month + 1 + np.arange(horizon))


# ---------------------------------------------------------------------------
# lag windows


@dataclass
class LagDataset:
    """Supervised view of one or more aligned series.

    Row ``j`` holds the window ``x[j:j+k]`` of every channel (channel-major
    blocks) and targets ``x[j+k+horizon-1]`` for every channel.
    """

    X: np.ndarray
    Y: np.ndarray
    k: int
    n_channels: int
    horizon: int
    split_index: int
    target_index: np.ndarray

    @property
    def n_rows(self):
        return self.X.shape[0]

    def sequences(self, rows=None):
        """Windows as ``(rows, k, channels)`` sequences for the recurrent models."""
        X = self.X if rows is None else self.X[rows]
        return X.reshape(X.shape[0], self.n_channels, self.k).transpose(0, 2, 1)

    def persistence(self, rows=None):
        """Naive forecast: last observed value of every channel."""
        return self.sequences(rows)[:, -1, :]

    @property
    def train(self):
        return slice(0, self.split_index)

    @property
    def test(self):
        return slice(self.split_index, self.n_rows)


def _as_matrix(series):
    if isinstance(series, SeriesStd):
        return series.x[:, None]
    if isinstance(series, (list, tuple)):
        cols = [s.x if isinstance(s, SeriesStd) else np.asarray(s, dtype=float).reshape(-1) for s in series]
        if len({c.shape[0] for c in cols}) != 1:
            raise DataError("channels differ in length")
        return np.column_stack(cols)
    arr = np.asarray(series, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def build_lags(series, k: int, mode="univariate", horizon=1, train_frac=0.8) -> LagDataset:
    data = _as_matrix(series)
    n, c = data.shape
    if mode == "univariate" and c != 1:
        raise DataError(f"univariate mode needs one channel, got {c}")
    if mode not in ("univariate", "multivariate"):
        raise DataError(f"unknown lag mode {mode!r}")
    if k < 1 or horizon < 1:
        raise DataError("lag length and horizon must be >= 1")
    rows = n - k - horizon + 1
    if rows < 1:
        raise DataError(f"series of length {n} is too short for lag {k} and horizon {horizon}")
    idx = np.arange(rows)[:, None] + np.arange(k)[None, :]
    X = np.concatenate([data[idx, ch] for ch in range(c)], axis=1)
    target_index = np.arange(rows) + k + horizon - 1
    Y = data[target_index, :]
    return LagDataset(X, Y, k, c, horizon, int(math.floor(train_frac * rows)), target_index)


# ---------------------------------------------------------------------------
# CSV


def ingest_csv(path, columns=None, month_column="month"):
    """Read one series per column from a header-first CSV.

    A column named ``month_column`` (if present) supplies integer month stamps.
    Missing or non-finite cells are rejected.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows) if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: no data rows")
    header_line, header = rows[0]
    header = [h.strip() for h in header]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    wanted = columns if columns is not None else [h for h in header if h != month_column]
    missing = [w for w in wanted if w not in header]
    if missing:
        raise DataError(f"{path}: columns not found: {missing}")
    values = {h: [] for h in header}
    for line, row in body:
        if len(row) != len(header):
            raise DataError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
        for h, cell in zip(header, row):
            cell = cell.strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {line}, column {h!r}: non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: line {line}, column {h!r}: missing or non-finite value {cell!r}")
            values[h].append(v)
    months = np.asarray(values[month_column], dtype=int) if month_column in values else None
    return [SeriesRaw(np.asarray(values[w]), months, w) for w in wanted]


def atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, series, months=None, month_column="month"):
    """Write equal-length series as columns (``repr`` floats, exact round trip)."""
    cols = [s.values if isinstance(s, SeriesRaw) else np.asarray(s, dtype=float) for s in series]
    names = [s.name if isinstance(s, SeriesRaw) and s.name else f"series_{i}" for i, s in enumerate(series)]
    if months is None and isinstance(series[0], SeriesRaw):
        months = series[0].months
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(([month_column] if months is not None else []) + names)
    for t in range(cols[0].shape[0]):
        w.writerow(([int(months[t])] if months is not None else []) + [repr(float(c[t])) for c in cols])
    atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# corpus


def sample_observed_corpus(n_series=20, months=96, seed=0, common_weight=0.6):
    """Stand-in for observed product revenue histories.

    Each series is ``exp(s * z + u) - 1`` with ``z`` a mix of a shared smooth
    factor, an idiosyncratic GP draw, two-level regime shifts and noise, so
    channels are correlated and carry seasonality and level shifts.
    """
    rng = np.random.default_rng(seed)
    tau = np.arange(months) / 12.0
    hyper = dict(DEFAULT_HYPER)
    hyper.update(rq_var=0.5, rq_len=2.0, matern_var=0.2, matern_len=0.4, per_var=0.4, per_len=1.0)
    kmat = kernel(hyper, tau, tau) + JITTER * np.eye(months)
    chol = np.linalg.cholesky(kmat)
    common = chol @ rng.standard_normal(months)
    out = []
    for d in range(n_series):
        own = chol @ rng.standard_normal(months)
        states = np.empty(months, dtype=int)
        states[0] = rng.integers(2)
        for t in range(1, months):
            states[t] = states[t - 1] if rng.random() < 0.95 else 1 - states[t - 1]
        shift = np.where(states == 1, 0.5, -0.5)
        z = common_weight * common + (1.0 - common_weight) * own + shift + 0.25 * rng.standard_normal(months)
        level = rng.uniform(6.0, 10.0)
        scale = rng.uniform(0.2, 0.5)
        values = np.maximum(np.exp(scale * z + level) - 1.0, 0.0)
        out.append(SeriesRaw(values, np.arange(months), f"series_{d}"))
    return out


def generate_corpus(n_series=20, months=96, horizon=36, fit_months=60, seed=0,
                    gp_iterations=200, gp_restarts=3):
    """Observed histories plus GP+HMM synthetic continuations.

    Returns ``(series, metadata)`` where each series has ``months + horizon``
    points.
    """
    if horizon <= 0:
        raise DataError(f"horizon must be positive, got {horizon}")
    if fit_months > months:
        raise DataError("fit window longer than the observed history")
    observed = sample_observed_corpus(n_series, months, seed)
    series, meta = [], []
    for d, raw in enumerate(observed):
        std = standardize(raw, (0, fit_months))
        gp = fit_gp(std, iterations=gp_iterations, restarts=gp_restarts, seed=seed * 1000 + d)
        hmm = fit_hmm(gp.residuals())
        cont = synthesize(gp, hmm, horizon, seed=seed * 1000 + d)
        series.append(SeriesRaw(
            np.concatenate([raw.values, cont.values]), np.concatenate([raw.months, cont.months]), raw.name,
        ))
        meta.append({
            "name": raw.name, "std_mean": std.mean, "std_scale": std.scale,
            "gp": gp.to_dict(), "hmm": hmm.to_dict(), "synth_seed": seed * 1000 + d,
        })
    return series, meta
