"""Coincidence-count channel model: forward prediction, sampling and inversion.

Per delay bin of width dtau and for ``receptions`` triggers,

    N_C = rec p_s eta_as R_C dtau                       (biphotons)
        + rec p_s R_noise_as dtau                       (anti-Stokes leakage)
        + rec (1 - p_s) (R_noise_as + R_B eta_as) dtau  (false triggers)

with the Stokes purity p_s = eta_s R_s / (eta_s R_s + R_noise_s).  Dividing by
rec p_s eta_as dtau gives R_C + R_env.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import DetectionParams


class ChannelError(ValueError):
    """The channel model cannot be inverted (p_s or eta_as is zero)."""


@dataclass(frozen=True)
class ChannelModel:
    det: DetectionParams
    r_s: float   # Stokes generation rate, counts/s
    r_b: float   # biphoton generation rate R_B (taken as R_as), counts/s

    @property
    def purity(self) -> float:
        num = self.det.eta_s * self.r_s
        den = num + self.det.noise_rate_s
        return num / den if den > 0 else 0.0

    @property
    def normalization(self) -> float:
        """Counts per bin produced by a unit coincidence rate: rec p_s eta_as dtau."""
        d = self.det
        return d.receptions * self.purity * d.eta_as * d.time_bin_s

    @property
    def r_env(self) -> float:
        """Environmental background in R_C units (counts/s)."""
        d = self.det
        p = self.purity
        if p == 0 or d.eta_as == 0:
            raise ChannelError("p_s and eta_as must be nonzero to express R_env in R_C units")
        extra = p * d.noise_rate_as + (1 - p) * (d.noise_rate_as + self.r_b * d.eta_as)
        return extra / (p * d.eta_as)


def expected_counts(r_c, ch: ChannelModel, r_b: float | None = None) -> np.ndarray:
    """Mean counts per bin for binned coincidence rates ``r_c`` (counts/s)."""
    d = ch.det
    p = ch.purity
    rb = ch.r_b if r_b is None else r_b
    r_c = np.asarray(r_c, dtype=float)
    scale = d.receptions * d.time_bin_s
    return scale * (p * r_c * d.eta_as + p * d.noise_rate_as
                    + (1 - p) * (d.noise_rate_as + rb * d.eta_as))


@dataclass(frozen=True)
class CoincidenceHistogram:
    bin_start_s: np.ndarray
    counts: np.ndarray
    receptions: int
    delta_tau_s: float
    seed: int | None = None
    params_hash: str | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.size and (counts.min() < 0 or not np.all(counts == np.round(counts))):
            raise ValueError("counts must be nonnegative integers")
        starts = np.asarray(self.bin_start_s, dtype=float)
        if starts.shape != counts.shape:
            raise ValueError("bin_start_s and counts must have the same length")
        if starts.size > 1 and not np.allclose(np.diff(starts), self.delta_tau_s,
                                               rtol=1e-9, atol=1e-15):
            raise ValueError("bin starts must be spaced by delta_tau_s")

    @property
    def bin_edges_s(self) -> np.ndarray:
        starts = np.asarray(self.bin_start_s, dtype=float)
        return np.append(starts, starts[-1] + self.delta_tau_s) if starts.size else starts

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# receptions,{self.receptions}\n")
            fh.write(f"# delta_tau_s,{self.delta_tau_s!r}\n")
            fh.write(f"# seed,{'' if self.seed is None else self.seed}\n")
            if self.params_hash:
                fh.write(f"# params_hash,{self.params_hash}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_start_s", "counts"])
            for t, c in zip(np.asarray(self.bin_start_s, dtype=float), np.asarray(self.counts)):
                w.writerow([repr(float(t)), int(c)])

    @classmethod
    def read_csv(cls, path: str | Path) -> "CoincidenceHistogram":
        meta: dict[str, str] = {}
        rows = []
        with Path(path).open(newline="", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition(",")
                    meta[key.strip()] = value.strip()
                    continue
                rows.append(line)
        reader = csv.reader(rows)
        header = next(reader, None)
        if header != ["bin_start_s", "counts"]:
            raise ValueError(f"unexpected histogram header {header!r}")
        data = [(float(a), int(b)) for a, b in reader]
        for key in ("receptions", "delta_tau_s"):
            if key not in meta:
                raise ValueError(f"histogram file lacks '# {key}' metadata")
        starts = np.array([a for a, _ in data], dtype=float)
        counts = np.array([b for _, b in data], dtype=np.int64)
        seed = int(meta["seed"]) if meta.get("seed") else None
        return cls(starts, counts, int(meta["receptions"]), float(meta["delta_tau_s"]),
                   seed, meta.get("params_hash") or None)


def params_hash(doc: dict) -> str:
    """Short stable digest of a parameter mapping, for histogram metadata."""
    blob = json.dumps(doc, sort_keys=True, default=float).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def synthesize_histogram(expected, seed: int, bin_start_s=None, receptions: int = 2**18,
                         delta_tau_s: float = 6.4e-9, params_hash: str | None = None
                         ) -> CoincidenceHistogram:
    """Independent Poisson draw per bin; deterministic for a fixed seed."""
    expected = np.asarray(expected, dtype=float)
    if expected.size and expected.min() < 0:
        raise ValueError("expected counts must be >= 0")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(expected)
    if bin_start_s is None:
        bin_start_s = np.arange(expected.size) * delta_tau_s
    return CoincidenceHistogram(np.asarray(bin_start_s, dtype=float), counts, receptions,
                                delta_tau_s, seed, params_hash)


@dataclass(frozen=True)
class HistogramAnalysis:
    bin_start_s: np.ndarray
    r_c_exp: np.ndarray   # counts/s, environmental background removed
    r_env: float
    sigma: np.ndarray     # Poisson standard error of r_c_exp


def rates_from_counts(counts, ch: ChannelModel, r_env: float | None = None,
                      receptions: int | None = None, delta_tau_s: float | None = None
                      ) -> HistogramAnalysis:
    """Invert the channel model on raw (possibly non-integer) counts per bin."""
    p = ch.purity
    if p == 0 or ch.det.eta_as == 0:
        raise ChannelError("cannot invert the channel model with p_s = 0 or eta_as = 0")
    rec = ch.det.receptions if receptions is None else receptions
    dtau = ch.det.time_bin_s if delta_tau_s is None else delta_tau_s
    norm = rec * p * ch.det.eta_as * dtau
    env = ch.r_env if r_env is None else float(r_env)
    counts = np.asarray(counts, dtype=float)
    starts = np.arange(counts.size) * dtau
    return HistogramAnalysis(starts, counts / norm - env, env, np.sqrt(counts) / norm)


def analyze_histogram(h: CoincidenceHistogram, ch: ChannelModel,
                      r_env: float | None = None) -> HistogramAnalysis:
    """R_C_exp = N_C / (rec p_s eta_as dtau) - R_env, bin by bin.

    ``r_env`` overrides the channel-model estimate (e.g. a measured value).
    The histogram's own receptions and bin width are used.
    """
    out = rates_from_counts(h.counts, ch, r_env, h.receptions, h.delta_tau_s)
    return HistogramAnalysis(np.asarray(h.bin_start_s, dtype=float), out.r_c_exp, out.r_env, out.sigma)


def poisson_band_fraction(analysis: HistogramAnalysis, r_c_true, normalization: float,
                          k: float = 4.0) -> float:
    """Fraction of bins whose recovered rate is within k Poisson sigmas of the truth.

    The band uses the expected count mean = (R_C + R_env) * normalization, so
    empty bins are judged fairly.
    """
    r_true = np.asarray(r_c_true, dtype=float)
    mean = np.clip((r_true + analysis.r_env) * normalization, 0.0, None)
    band = k * np.sqrt(mean) / normalization
    ok = np.abs(analysis.r_c_exp - r_true) <= band + 1e-12 * (np.abs(r_true) + analysis.r_env)
    return float(np.mean(ok)) if ok.size else 1.0


def duty_cycle_average(rate_per_s: float, on_s: float = 10e-6, period_s: float = 2.5e-3) -> float:
    """Time-averaged rate for a source that is on for ``on_s`` every ``period_s``."""
    if not (0 < on_s <= period_s):
        raise ValueError("need 0 < on_s <= period_s")
    return rate_per_s * on_s / period_s

