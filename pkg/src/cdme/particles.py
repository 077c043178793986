"""Particle-level simulation of diffusion with position-dependent death and creation.

Each particle performs Brownian motion with generator ``d^2/dx^2`` (increments
of variance ``2 dt``) reflected at 0 and 1. In every step a particle at ``x``
dies with probability ``1 - exp(-lambda_d(x) dt)`` and ``Poisson(gamma dt)``
new particles appear at positions drawn from ``lambda_c / gamma``.

Ensembles are simulated in blocks of runs; block ``b`` owns its own random
stream, so histograms do not depend on how blocks are spread over threads.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalAbort
from .rates import RateFunction, RateFunctions
from .streams import block_generator, map_blocks

__all__ = [
    "ParticleSystemState",
    "EnsembleStats",
    "sample_from_density",
    "rejection_sample",
    "reflect",
    "step",
    "simulate_ensemble",
    "bootstrap_l2_band",
    "MAX_DT",
]

log = logging.getLogger(__name__)

MAX_DT = 1e-2
RUN_BLOCK = 4096


def reflect(x: np.ndarray) -> np.ndarray:
    """Fold the real line onto [0, 1] by mirror reflection at both ends."""
    y = np.mod(x, 2.0)
    return np.where(y > 1.0, 2.0 - y, y)


def rejection_sample(f, sup: float, rng: np.random.Generator, size: int, batch: int | None = None):
    """Draw ``size`` samples from ``f / int f`` on [0, 1].

    Returns ``(samples, proposals)``; ``proposals`` is the number of uniform
    candidates consumed, so ``size / proposals`` estimates ``int f / sup``.
    """
    if sup <= 0:
        raise ValueError("sup must be positive")
    out = np.empty(size)
    filled, proposals = 0, 0
    while filled < size:
        m = batch or max(64, 2 * (size - filled))
        x = rng.random(m)
        fx = np.asarray(f(x), dtype=float)
        if np.any(fx > sup * (1 + 1e-12)):
            raise NumericalAbort(f"density exceeds its stated bound {sup:.6g} (found {fx.max():.6g})")
        acc = rng.random(m) * sup < fx
        # consume candidates in order until the request is filled
        idx = np.flatnonzero(acc)[: size - filled]
        out[filled:filled + idx.size] = x[idx]
        filled += idx.size
        proposals += int(idx[-1]) + 1 if filled >= size and idx.size else m
    return out, proposals


def sample_from_density(f, sup: float, rng: np.random.Generator, size: int | None = None):
    """Exact draw(s) from ``f / int f`` by rejection against the constant ``sup``."""
    samples, _ = rejection_sample(f, sup, rng, 1 if size is None else int(size))
    return float(samples[0]) if size is None else samples


@dataclass
class ParticleSystemState:
    """One system: current time and particle positions in [0, 1]."""

    t: float
    positions: np.ndarray
    rng: np.random.Generator

    @property
    def count(self) -> int:
        return int(self.positions.size)


def _check_dt(dt: float, rates: RateFunctions, sup_d: float, gamma: float):
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > MAX_DT or dt * sup_d > 0.1 or dt * gamma > 0.1:
        raise ValueError(f"dt = {dt:g} too large for first-order event splitting")


def _advance(pos, run, n_runs, dt, rates: RateFunctions, gamma, sup_c, rng):
    """One splitting step for a flat ensemble (positions tagged by run id)."""
    pos = reflect(pos + math.sqrt(2.0 * dt) * rng.standard_normal(pos.size))
    if not rates.lambda_d.is_constant or rates.lambda_d.value > 0:
        p_die = -np.expm1(-rates.lambda_d(pos) * dt)
        keep = rng.random(pos.size) >= p_die
        pos, run = pos[keep], run[keep]
    if gamma > 0:
        births = rng.poisson(gamma * dt, n_runs)
        total = int(births.sum())
        if total:
            new_pos, _ = rejection_sample(rates.lambda_c, sup_c, rng, total)
            new_run = np.repeat(np.arange(n_runs), births)
            pos = np.concatenate([pos, new_pos])
            run = np.concatenate([run, new_run])
    return pos, run


def step(state: ParticleSystemState, dt: float, rates: RateFunctions, bounds: dict | None = None) -> ParticleSystemState:
    """Advance a single system by ``dt``.

    ``bounds`` may carry ``sup_lambda_c`` (used by the creation sampler) and
    ``gamma``; both default to the values stored on ``rates``.
    """
    bounds = bounds or {}
    gamma = float(bounds.get("gamma", rates.gamma))
    sup_c = float(bounds.get("sup_lambda_c", rates.lambda_c.sup))
    _check_dt(dt, rates, rates.lambda_d.sup, gamma)
    pos, _ = _advance(
        np.asarray(state.positions, dtype=float), np.zeros(state.count, dtype=np.intp), 1, dt, rates, gamma, sup_c, state.rng
    )
    return ParticleSystemState(state.t + dt, pos, state.rng)


@dataclass(frozen=True)
class EnsembleStats:
    """Count and position histograms at each checkpoint.

    Attributes
    ----------
    times : (T,) array
    counts : (T, n_cap + 1) int array
        ``counts[i, n]`` is the number of runs holding exactly ``n`` particles.
    positions : (T, n_track + 1, bins) int array
        Pooled particle positions of runs with exactly ``n`` particles.
    edges : (bins + 1,) array
    runs : int
    """

    times: np.ndarray
    counts: np.ndarray
    positions: np.ndarray
    edges: np.ndarray
    runs: int

    def probabilities(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Estimated ``P(N(t_i) = n)`` and binomial standard errors."""
        p = self.counts[i] / self.runs
        return p, np.sqrt(p * (1 - p) / self.runs)

    def conditional_density(self, i: int, n: int) -> np.ndarray:
        """Histogram density of one particle's position given ``N(t_i) = n``."""
        h = self.positions[i, n].astype(float)
        tot = h.sum()
        if tot == 0:
            return np.zeros_like(h)
        return h / (tot * np.diff(self.edges))

    def write_counts_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "n", "count", "runs"])
            for t, row in zip(self.times, self.counts):
                for n, c in enumerate(row):
                    w.writerow([repr(float(t)), n, int(c), self.runs])
        return path

    def write_positions_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "n", "bin_left", "bin_right", "count"])
            for t, per_n in zip(self.times, self.positions):
                for n, hist in enumerate(per_n):
                    for b, c in enumerate(hist):
                        w.writerow([repr(float(t)), n, repr(float(self.edges[b])), repr(float(self.edges[b + 1])), int(c)])
        return path


def simulate_ensemble(
    rates: RateFunctions,
    zeta: RateFunction | None,
    t_checkpoints,
    runs: int,
    dt: float = 1e-3,
    seed: int = 0,
    bins: int = 20,
    n_track: int = 4,
    threads: int = 1,
) -> EnsembleStats:
    """Simulate ``runs`` independent systems, each started from one particle drawn from ``zeta``.

    Parameters
    ----------
    zeta : RateFunction, optional
        Initial density; defaults to ``rates.zeta``.
    n_track : int
        Position histograms are kept for counts ``0..n_track``.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    zeta = rates.zeta if zeta is None else zeta
    gamma = rates.gamma
    sup_c = rates.lambda_c.sup
    _check_dt(dt, rates, rates.lambda_d.sup, gamma)
    cps = sorted(float(t) for t in t_checkpoints)
    if not cps or cps[0] < 0:
        raise ValueError("need at least one nonnegative checkpoint")
    edges = np.linspace(0.0, 1.0, bins + 1)

    def block(b, size):
        rng = block_generator(seed, "particles", b)
        pos, _ = rejection_sample(zeta, zeta.sup, rng, size)
        run = np.arange(size)
        t = 0.0
        counts, hists = [], []
        for tc in cps:
            span = tc - t
            steps = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
            h = span / steps if steps else 0.0
            for _ in range(steps):
                pos, run = _advance(pos, run, size, h, rates, gamma, sup_c, rng)
            t = tc
            per_run = np.bincount(run, minlength=size)
            counts.append(np.bincount(per_run))
            hn = np.zeros((n_track + 1, bins), dtype=np.int64)
            owner = per_run[run]
            sel = owner <= n_track
            np.add.at(hn, (owner[sel], np.clip(np.searchsorted(edges, pos[sel], side="right") - 1, 0, bins - 1)), 1)
            hists.append(hn)
        return counts, hists

    parts = map_blocks(block, runs, threads, RUN_BLOCK)
    width = max(len(c) for counts, _ in parts for c in counts)
    total = np.zeros((len(cps), width), dtype=np.int64)
    pos_hist = np.zeros((len(cps), n_track + 1, bins), dtype=np.int64)
    for counts, hists in parts:
        for i, c in enumerate(counts):
            total[i, : c.size] += c
            pos_hist[i] += hists[i]
    return EnsembleStats(np.array(cps), total, pos_hist, edges, int(runs))


def bootstrap_l2_band(hist, edges, reference, n_boot: int = 400, seed: int = 0, sigmas: float = 3.0) -> dict:
    """Compare a position histogram with a reference density in L^2.

    The histogram is resampled multinomially (equivalent to resampling the
    pooled positions); the band is ``mean + sigmas * sd`` of the bootstrap
    L^2 distances to the observed histogram.

    Parameters
    ----------
    hist : (bins,) int array
    edges : (bins + 1,) array
    reference : callable
        Density on [0, 1]; compared through its bin averages.
    """
    hist = np.asarray(hist, dtype=np.int64)
    widths = np.diff(edges)
    total = int(hist.sum())
    if total == 0:
        raise ValueError("empty histogram")
    dens = hist / (total * widths)
    fine = np.linspace(0.0, 1.0, 64 * len(widths) + 1)
    mids = 0.5 * (fine[1:] + fine[:-1])
    ref = np.asarray(reference(mids), dtype=float).reshape(len(widths), -1).mean(axis=1)
    observed = math.sqrt(float(np.sum((dens - ref) ** 2 * widths)))
    rng = block_generator(seed, "bootstrap", 0)
    boot = rng.multinomial(total, hist / total, size=n_boot) / (total * widths)
    dist = np.sqrt(np.sum((boot - dens) ** 2 * widths, axis=1))
    band = float(dist.mean() + sigmas * dist.std(ddof=1))
    return {"l2": observed, "band": band, "pass": bool(observed <= band), "samples": total}
