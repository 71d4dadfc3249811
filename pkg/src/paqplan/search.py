"""Model-search strategies that propose configurations given history.

All strategies share one surface: ``propose(free_slots, space, history)``
returns up to ``free_slots`` new configurations, or an empty list when the
strategy has nothing to offer (a consumed grid, a converged simplex, or a
sequential method waiting for its last proposal to be evaluated). Every
strategy is a deterministic function of its seed, the space, and the
history it has observed.

Nelder-Mead and Powell run over the continuous parameters on their declared
scales and expect evaluations one at a time; they are driven as suspended
generators that receive each proposal's validation error through the
history. Points that would leave the search box are clamped and scored as
error 1.0 without being trained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .space import (
    Configuration,
    SearchSpace,
    clip,
    grid_points,
    sample_uniform,
)

STATUSES = ("running", "killed", "finished")

NM_ALPHA = 1.0      # reflection
NM_GAMMA = 2.0      # expansion
NM_RHO = 0.5        # contraction
NM_SIGMA = 0.5      # shrink
SIMPLEX_OFFSET_FRACTION = 0.05
POWELL_LINE_TOL_FRACTION = 1e-4


class UnsupportedStrategyError(ValueError):
    pass


@dataclass
class HistoryRecord:
    config: Configuration
    iterations_used: int
    val_error: float | None
    status: str
    model_id: int = -1

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if (self.val_error is None) != (self.iterations_used == 0):
            raise ValueError("val_error must be present exactly when iterations_used > 0")


class History:
    """Latest training snapshot per model, in first-seen order.

    Each allocation round refreshes a model's record in place (keyed by
    model id), so summing ``iterations_used`` over the records gives the
    total training budget consumed.
    """

    def __init__(self) -> None:
        self._records: list[HistoryRecord] = []
        self._slot: dict[int, int] = {}

    def update(self, record: HistoryRecord) -> None:
        slot = self._slot.get(record.model_id)
        if record.model_id >= 0 and slot is not None:
            self._records[slot] = record
        else:
            if record.model_id >= 0:
                self._slot[record.model_id] = len(self._records)
            self._records.append(record)

    def records(self) -> list[HistoryRecord]:
        return list(self._records)

    def __iter__(self):
        return iter(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def best(self) -> HistoryRecord | None:
        best = None
        for rec in self._records:
            if rec.val_error is None:
                continue
            if best is None or rec.val_error < best.val_error:
                best = rec
        return best

    def best_error(self) -> float | None:
        rec = self.best()
        return None if rec is None else rec.val_error


def _latest_error(history, config: Configuration) -> float | None:
    key = config.key()
    for rec in reversed(list(history)):
        if rec.val_error is not None and rec.config.key() == key:
            return rec.val_error
    return None


class GridStrategy:
    """Enumerates a fixed grid once, in deterministic row-major order."""

    kind = "grid"

    def __init__(self, space: SearchSpace, budget_models: int):
        self._points = grid_points(space, budget_models)
        self._cursor = 0

    @property
    def exhausted(self) -> bool:
        return self._cursor >= len(self._points)

    def propose(self, free_slots: int, space: SearchSpace, history) -> list[Configuration]:
        if free_slots < 1:
            raise ValueError("free_slots must be at least 1")
        take = self._points[self._cursor:self._cursor + free_slots]
        self._cursor += len(take)
        return list(take)


class RandomStrategy:
    """Seeded uniform sampling, optionally capped at a proposal budget."""

    kind = "random"

    def __init__(self, space: SearchSpace, seed: int = 0, max_proposals: int | None = None):
        self._rng = np.random.default_rng(seed)
        self._max = max_proposals
        self._proposed = 0

    @property
    def exhausted(self) -> bool:
        return self._max is not None and self._proposed >= self._max

    def propose(self, free_slots: int, space: SearchSpace, history) -> list[Configuration]:
        if free_slots < 1:
            raise ValueError("free_slots must be at least 1")
        count = free_slots
        if self._max is not None:
            count = min(count, self._max - self._proposed)
        out = [sample_uniform(space, self._rng) for _ in range(max(0, count))]
        self._proposed += len(out)
        return out


def _nelder_mead_steps(lo: np.ndarray, hi: np.ndarray,
                       xatol: float = 1e-10, fatol: float = 1e-12):
    """Simplex search generator: yields points, receives objective values."""
    n = len(lo)
    center = (lo + hi) / 2.0
    offset = SIMPLEX_OFFSET_FRACTION * (hi - lo)
    simplex = [center.copy()]
    for i in range(n):
        v = center.copy()
        v[i] += offset[i]
        simplex.append(v)
    values = []
    for v in simplex:
        values.append((yield v))
    sx = np.array(simplex)
    fv = np.array(values, dtype=float)

    while True:
        order = np.argsort(fv, kind="stable")
        sx, fv = sx[order], fv[order]
        if np.max(np.abs(sx[1:] - sx[0])) <= xatol and np.max(np.abs(fv[1:] - fv[0])) <= fatol:
            return
        centroid = sx[:-1].mean(axis=0)
        xr = centroid + NM_ALPHA * (centroid - sx[-1])
        fr = yield xr
        if fr < fv[0]:
            xe = centroid + NM_GAMMA * (xr - centroid)
            fe = yield xe
            if fe < fr:
                sx[-1], fv[-1] = xe, fe
            else:
                sx[-1], fv[-1] = xr, fr
            continue
        if fr < fv[-2]:
            sx[-1], fv[-1] = xr, fr
            continue
        if fr < fv[-1]:
            xc = centroid + NM_RHO * (xr - centroid)
            fc = yield xc
            if fc <= fr:
                sx[-1], fv[-1] = xc, fc
                continue
        else:
            xc = centroid + NM_RHO * (sx[-1] - centroid)
            fc = yield xc
            if fc < fv[-1]:
                sx[-1], fv[-1] = xc, fc
                continue
        for i in range(1, n + 1):
            sx[i] = sx[0] + NM_SIGMA * (sx[i] - sx[0])
            fv[i] = yield sx[i]


def _golden_section(x: np.ndarray, fx: float, direction: np.ndarray,
                    half_width: float, tol: float):
    """Golden-section line search along ``direction`` from ``x``.

    Returns (best point, best value, decrease achieved). Probes outside the
    search box are fed back as error 1.0 by the caller, which steers the
    bracket back inside.
    """
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = -half_width, half_width
    best_t, best_f = 0.0, fx
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = yield x + c * direction
    if fc < best_f:
        best_t, best_f = c, fc
    fd = yield x + d * direction
    if fd < best_f:
        best_t, best_f = d, fd
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = yield x + c * direction
            if fc < best_f:
                best_t, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = yield x + d * direction
            if fd < best_f:
                best_t, best_f = d, fd
    return x + best_t * direction, best_f, fx - best_f


def _powell_steps(lo: np.ndarray, hi: np.ndarray,
                  tol_fraction: float = POWELL_LINE_TOL_FRACTION):
    """Powell direction-set search generator (golden-section line searches)."""
    n = len(lo)
    spans = hi - lo
    half_width = float(np.max(spans))
    tol = tol_fraction * half_width
    x = (lo + hi) / 2.0
    fx = yield x
    directions = [np.eye(n)[i] for i in range(n)]

    while True:
        x_start, f_start = x.copy(), fx
        decreases = []
        for u in directions:
            x, fx, dec = yield from _golden_section(x, fx, u, half_width, tol)
            decreases.append(dec)
        new_dir = x - x_start
        norm = float(np.linalg.norm(new_dir))
        if norm <= 1e-12 or (f_start - fx) <= 1e-12 * (abs(f_start) + abs(fx)) + 1e-15:
            return
        directions[int(np.argmax(decreases))] = new_dir / norm
        x, fx, _ = yield from _golden_section(x, fx, new_dir / norm, half_width, tol)


class _SequentialScaleStrategy:
    """Drives a scale-space generator one evaluation at a time.

    The generator's pending point is matched against history by
    configuration identity; its validation error is fed back before the
    next point is requested. Out-of-bounds points are scored 1.0 internally
    and never surface as proposals.
    """

    kind = "sequential"
    _max_penalized_run = 10_000

    def __init__(self, space: SearchSpace, family: str | None = None):
        if space.family_param is not None:
            raise UnsupportedStrategyError(
                f"{self.kind} cannot search over model families (categorical)")
        if space.categorical_params(family):
            raise UnsupportedStrategyError(
                f"{self.kind} does not support categorical hyperparameters")
        self._family = family
        params = space.continuous_params(family)
        self._lo = np.array([p.scale_bounds()[0] for p in params])
        self._hi = np.array([p.scale_bounds()[1] for p in params])
        self._gen = self._make_generator(self._lo, self._hi)
        self._started = False
        self._pending: Configuration | None = None
        self._done = False

    def _make_generator(self, lo: np.ndarray, hi: np.ndarray):
        raise NotImplementedError

    @property
    def exhausted(self) -> bool:
        return self._done

    def propose(self, free_slots: int, space: SearchSpace, history) -> list[Configuration]:
        if free_slots < 1:
            raise ValueError("free_slots must be at least 1")
        if self._done:
            return []
        value: float | None = None
        if self._pending is not None:
            value = _latest_error(history, self._pending)
            if value is None:
                return []  # still waiting on the pending evaluation
            self._pending = None
        for _ in range(self._max_penalized_run):
            try:
                if self._started:
                    z = self._gen.send(value)
                else:
                    z = next(self._gen)
                    self._started = True
            except StopIteration:
                self._done = True
                return []
            cfg, penalized = clip(space, z, self._family)
            if penalized:
                value = 1.0
                continue
            self._pending = cfg
            return [cfg]
        self._done = True
        return []


class NelderMeadStrategy(_SequentialScaleStrategy):
    kind = "nelder_mead"

    def _make_generator(self, lo, hi):
        return _nelder_mead_steps(lo, hi)


class PowellStrategy(_SequentialScaleStrategy):
    kind = "powell"

    def _make_generator(self, lo, hi):
        return _powell_steps(lo, hi)


def _silverman_bandwidth(points: np.ndarray, span: float) -> float:
    n = len(points)
    if n < 2:
        return max(span / 4.0, 1e-12)
    std = float(np.std(points, ddof=1))
    q75, q25 = np.percentile(points, [75, 25])
    iqr = float(q75 - q25)
    width = min(std, iqr / 1.34) if iqr > 0 else std
    if width <= 0:
        width = 0.01 * span if span > 0 else 1e-6
    # Floor keeps the estimator from collapsing onto repeated observations.
    return max(0.9 * width * n ** -0.2, 0.01 * span, 1e-12)


def _mixture_density(z: float, points: np.ndarray, bandwidth: float, span: float) -> float:
    """Parzen mixture of a uniform prior and one Gaussian per observation."""
    total = 1.0 / span if span > 0 else 1.0
    if len(points):
        u = (z - points) / bandwidth
        total += float(np.sum(np.exp(-0.5 * u * u) / (bandwidth * math.sqrt(2.0 * math.pi))))
    return total / (len(points) + 1)


def _smoothed_pmf(labels: list[str], choices: tuple[str, ...]) -> np.ndarray:
    counts = np.array([1.0 + sum(1 for v in labels if v == c) for c in choices])
    return counts / counts.sum()


class TpeStrategy:
    """Density-ratio sampler over the better tail of observed results.

    History is split at the gamma-quantile of validation error; candidates
    are drawn from per-parameter Parzen mixtures fit to the good set (one
    Gaussian per observation on the parameter's declared scale, Silverman
    bandwidths, plus a uniform prior component that keeps exploration
    alive) and ranked by the good/bad density ratio. Until ``n_startup``
    observations exist the strategy is byte-for-byte a seeded random
    search.
    """

    kind = "tpe"

    def __init__(self, space: SearchSpace, seed: int = 0, gamma: float = 0.25,
                 n_startup: int = 20, n_candidates: int = 24,
                 max_proposals: int | None = None):
        if not 0.0 < gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        self._rng = np.random.default_rng(seed)
        self._gamma = gamma
        self._n_startup = max(2, n_startup)
        self._n_candidates = max(1, n_candidates)
        self._max = max_proposals
        self._proposed = 0

    @property
    def exhausted(self) -> bool:
        return self._max is not None and self._proposed >= self._max

    def propose(self, free_slots: int, space: SearchSpace, history) -> list[Configuration]:
        if free_slots < 1:
            raise ValueError("free_slots must be at least 1")
        count = free_slots
        if self._max is not None:
            count = min(count, self._max - self._proposed)
        observed = [r for r in history if r.val_error is not None]
        out = []
        for _ in range(max(0, count)):
            if len(observed) < self._n_startup:
                out.append(sample_uniform(space, self._rng))
            else:
                out.append(self._suggest(space, observed))
        self._proposed += len(out)
        return out

    def _suggest(self, space: SearchSpace, observed: list[HistoryRecord]) -> Configuration:
        ranked = sorted(observed, key=lambda r: r.val_error)
        n_good = max(1, math.ceil(self._gamma * len(ranked)))
        good, bad = ranked[:n_good], ranked[n_good:]
        if not bad:
            return sample_uniform(space, self._rng)

        fam_choices = space.family_param.choices if space.family_param is not None else None
        fam_pmf_good = fam_pmf_bad = None
        if fam_choices:
            fam_pmf_good = _smoothed_pmf([r.config.family for r in good], fam_choices)
            fam_pmf_bad = _smoothed_pmf([r.config.family for r in bad], fam_choices)

        best_cfg = None
        best_score = -math.inf
        for _ in range(self._n_candidates):
            family = None
            score = 0.0
            if fam_choices:
                idx = int(self._rng.choice(len(fam_choices), p=fam_pmf_good))
                family = fam_choices[idx]
                score += math.log(fam_pmf_good[idx]) - math.log(fam_pmf_bad[idx])
            values: dict[str, float | str] = {}
            for p in space.active_params(family):
                if p.kind == "continuous":
                    lo_s, hi_s = p.scale_bounds()
                    span = hi_s - lo_s
                    pts_g = np.array([p.to_scale(float(r.config.values[p.name]))
                                      for r in good if p.name in r.config.values])
                    pts_b = np.array([p.to_scale(float(r.config.values[p.name]))
                                      for r in bad if p.name in r.config.values])
                    bw_g = _silverman_bandwidth(pts_g, span)
                    bw_b = _silverman_bandwidth(pts_b, span)
                    # Draw from the good mixture: the prior component is the
                    # extra index and keeps exploration alive.
                    idx = int(self._rng.integers(len(pts_g) + 1))
                    if idx == len(pts_g):
                        z = float(self._rng.uniform(lo_s, hi_s))
                    else:
                        z = float(np.clip(self._rng.normal(pts_g[idx], bw_g), lo_s, hi_s))
                    dg = _mixture_density(z, pts_g, bw_g, span)
                    db = _mixture_density(z, pts_b, bw_b, span)
                    score += math.log(max(dg, 1e-300)) - math.log(max(db, 1e-300))
                    values[p.name] = p.from_scale(z)
                else:
                    choices = p.choices or ()
                    pmf_g = _smoothed_pmf(
                        [str(r.config.values[p.name]) for r in good if p.name in r.config.values],
                        choices)
                    pmf_b = _smoothed_pmf(
                        [str(r.config.values[p.name]) for r in bad if p.name in r.config.values],
                        choices)
                    idx = int(self._rng.choice(len(choices), p=pmf_g))
                    values[p.name] = choices[idx]
                    score += math.log(pmf_g[idx]) - math.log(pmf_b[idx])
            if score > best_score:
                best_score = score
                best_cfg = Configuration(family=family, values=values)
        return best_cfg  # type: ignore[return-value]


STRATEGY_KINDS = ("grid", "random", "nelder_mead", "powell", "tpe")


def make_strategy(kind: str, space: SearchSpace, seed: int = 0,
                  budget_models: int | None = None, family: str | None = None,
                  **tpe_options):
    """Construct a strategy by name.

    ``budget_models`` sizes the grid and caps random/TPE proposal counts;
    sequential methods stop on their own convergence tests.
    """
    kind = kind.replace("-", "_")
    if kind == "grid":
        if budget_models is None:
            raise ValueError("grid strategy requires budget_models")
        return GridStrategy(space, budget_models)
    if kind == "random":
        return RandomStrategy(space, seed, max_proposals=budget_models)
    if kind == "nelder_mead":
        return NelderMeadStrategy(space, family)
    if kind == "powell":
        return PowellStrategy(space, family)
    if kind == "tpe":
        return TpeStrategy(space, seed, max_proposals=budget_models, **tpe_options)
    raise UnsupportedStrategyError(f"unknown strategy {kind!r}")
