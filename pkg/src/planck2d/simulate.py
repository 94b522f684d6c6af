"""Synthetic sweep datasets for two-dimensional Planck spectroscopy.

Models the steady-state thermal coupling between the heatable attenuator and
the mixing chamber, plans temperature sweeps under that constraint, and
generates detected-power curves with radiometer noise. A bias-dependent
attenuation curve stands in for a flux-tunable metamaterial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .physics import CalibrationParams, PhysicsDomainError, ReceiverConfig, detected_power

__all__ = [
    "ThermalLoadModel",
    "SweepEntry",
    "SweepPlan",
    "NoiseConfig",
    "SnailModel",
    "PlanckCurve",
    "SweepDataset",
    "FluxSweepRecord",
    "steady_state_tmc",
    "plan_sweep",
    "simulate_dataset",
    "snail_excess_loss",
    "simulate_vna_trace",
    "simulate_flux_datasets",
    "DEFAULT_TMC_LIST",
]

DEFAULT_TMC_LIST = (0.100, 0.150, 0.200, 0.250, 0.300, 0.350)

# Synthetic convex map, not digitized data. Pinned so that an attenuator held
# at 600 mK drives the mixing chamber to 100 mK.
_DEFAULT_TABLE_T_ATT = (0.05, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.80, 1.00, 1.20, 1.40, 1.60)
_DEFAULT_TABLE_T_MC = (0.015, 0.017, 0.024, 0.036, 0.052, 0.073, 0.100, 0.165, 0.245, 0.340, 0.450, 0.575)


class InfeasiblePlanError(ValueError):
    """No entry of a sweep plan is feasible."""


@dataclass(frozen=True)
class ThermalLoadModel:
    """Steady-state mixing-chamber temperature as a function of attenuator temperature.

    ``kind="table"`` interpolates linearly between ``(table_T_att, table_T_mc)``
    rows; below the first row the chamber sits at ``base_T_mc``.
    ``kind="power_law"`` uses ``base_T_mc + gain * (T_att - T_unloaded)**exponent``
    above ``T_unloaded``.
    """

    base_T_mc: float = _DEFAULT_TABLE_T_MC[0]
    kind: str = "table"
    table_T_att: tuple = _DEFAULT_TABLE_T_ATT
    table_T_mc: tuple = _DEFAULT_TABLE_T_MC
    T_unloaded: float = 0.05
    gain: float = 0.085 / 0.55**2
    exponent: float = 2.0
    T_att_limit: float = 1.6

    def __post_init__(self):
        if self.kind not in ("table", "power_law"):
            raise ValueError(f"unknown thermal model kind {self.kind!r}")
        if self.kind == "table":
            x = np.asarray(self.table_T_att, dtype=float)
            y = np.asarray(self.table_T_mc, dtype=float)
            if x.ndim != 1 or x.shape != y.shape or x.size < 2:
                raise ValueError("thermal table needs >= 2 matching (T_att, T_mc) rows")
            if np.any(np.diff(x) <= 0):
                raise ValueError("thermal table T_att must be strictly increasing")
            if np.any(np.diff(y) < 0):
                raise ValueError("thermal table T_mc must be nondecreasing in T_att")
            if y[0] != self.base_T_mc:
                raise ValueError("first table row must sit at base_T_mc (the unloaded point)")
        elif self.gain < 0 or self.exponent <= 0:
            raise ValueError("power-law thermal model needs gain >= 0 and exponent > 0")

    @property
    def unloaded_point(self) -> float:
        return float(self.table_T_att[0]) if self.kind == "table" else self.T_unloaded

    @property
    def domain_max(self) -> float:
        return float(self.table_T_att[-1]) if self.kind == "table" else self.T_att_limit

    @property
    def max_T_mc(self) -> float:
        return self.steady_state(self.domain_max)

    def steady_state(self, T_att):
        T = np.asarray(T_att, dtype=float)
        if np.any(~np.isfinite(T)) or np.any(T < 0) or np.any(T > self.domain_max * (1 + 1e-12)):
            raise PhysicsDomainError(
                f"T_att outside thermal model domain [0, {self.domain_max}] K"
            )
        if self.kind == "table":
            out = np.interp(T, self.table_T_att, self.table_T_mc)
        else:
            out = self.base_T_mc + self.gain * np.maximum(T - self.T_unloaded, 0.0) ** self.exponent
        return float(out) if out.ndim == 0 else out

    def T_att_max(self, T_mc: float) -> float:
        """Largest attenuator temperature whose heat load keeps the chamber at or below ``T_mc``."""
        if T_mc >= self.max_T_mc:
            return self.domain_max
        if T_mc < self.base_T_mc:
            return 0.0
        lo, hi = 0.0, self.domain_max
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if self.steady_state(mid) <= T_mc:
                lo = mid
            else:
                hi = mid
        return lo

    @classmethod
    def from_dict(cls, d: dict) -> "ThermalLoadModel":
        d = dict(d)
        for key in ("table_T_att", "table_T_mc"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        if "table_T_mc" in d and "base_T_mc" not in d:
            d["base_T_mc"] = d["table_T_mc"][0]
        return cls(**d)


def steady_state_tmc(model: ThermalLoadModel, T_att):
    return model.steady_state(T_att)


@dataclass
class SweepEntry:
    T_mc: float
    T_att: np.ndarray
    error: Optional[str] = None

    @property
    def feasible(self) -> bool:
        return self.error is None


@dataclass
class SweepPlan:
    entries: list
    stabilization_tolerance: float = 1e-4
    margin: float = 0.025

    @property
    def feasible_entries(self) -> list:
        return [e for e in self.entries if e.feasible]

    @property
    def errors(self) -> list:
        return [(e.T_mc, e.error) for e in self.entries if not e.feasible]


def plan_sweep(
    T_mc_list: Sequence[float] = DEFAULT_TMC_LIST,
    points_per_curve: int = 20,
    margin: float = 0.025,
    model: Optional[ThermalLoadModel] = None,
    spacing: str = "log",
    stabilization_tolerance: float = 1e-4,
) -> SweepPlan:
    """Schedule attenuator sweeps for each mixing-chamber temperature.

    Each curve starts ``margin`` above its chamber temperature and ends at the
    hottest attenuator setting the thermal model allows for that chamber
    temperature. Infeasible chamber temperatures become entries carrying an
    ``error`` message instead of raising.
    """
    model = model or ThermalLoadModel()
    T_mc_list = [float(t) for t in T_mc_list]
    if not T_mc_list:
        raise ValueError("T_mc_list is empty")
    if any(b <= a for a, b in zip(T_mc_list, T_mc_list[1:])):
        raise ValueError("T_mc_list must be strictly increasing")
    if margin <= 0:
        raise ValueError("margin must be positive")
    if points_per_curve < 3:
        raise ValueError("need at least 3 points per curve")
    if spacing not in ("log", "linear"):
        raise ValueError("spacing must be 'log' or 'linear'")

    entries = []
    for T_mc in T_mc_list:
        start = T_mc + margin
        if T_mc > model.max_T_mc:
            entries.append(SweepEntry(T_mc, np.empty(0), f"T_mc = {T_mc * 1e3:g} mK lies beyond the "
                                      f"thermal map (max {model.max_T_mc * 1e3:g} mK)"))
            continue
        if T_mc < model.base_T_mc:
            entries.append(SweepEntry(T_mc, np.empty(0), f"T_mc = {T_mc * 1e3:g} mK is below the "
                                      f"unloaded base temperature {model.base_T_mc * 1e3:g} mK"))
            continue
        stop = model.T_att_max(T_mc)
        if stop <= start:
            entries.append(SweepEntry(T_mc, np.empty(0), f"no admissible T_att range for T_mc = "
                                      f"{T_mc * 1e3:g} mK (ceiling {stop * 1e3:.1f} mK)"))
            continue
        grid = np.geomspace(start, stop, points_per_curve) if spacing == "log" else np.linspace(
            start, stop, points_per_curve)
        grid[0], grid[-1] = start, stop
        entries.append(SweepEntry(T_mc, grid))
    return SweepPlan(entries, stabilization_tolerance, margin)


@dataclass(frozen=True)
class NoiseConfig:
    mode: str = "radiometer"
    t_int: Optional[float] = None
    rng_seed: int = 0
    temperature_jitter_sigma: float = 1e-4

    def __post_init__(self):
        if self.mode not in ("noiseless", "radiometer"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if self.t_int is not None and not self.t_int > 0:
            raise ValueError("t_int must be positive")
        if self.temperature_jitter_sigma < 0:
            raise ValueError("temperature jitter must be >= 0")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be unsigned")


@dataclass
class PlanckCurve:
    """Detected power versus attenuator temperature at one chamber temperature (kelvin)."""

    T_mc: float
    T_att: np.ndarray
    P: np.ndarray
    sigma_P: np.ndarray

    def __post_init__(self):
        self.T_mc = float(self.T_mc)
        self.T_att = np.asarray(self.T_att, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        self.sigma_P = np.asarray(self.sigma_P, dtype=float)
        if not (self.T_att.shape == self.P.shape == self.sigma_P.shape) or self.T_att.ndim != 1:
            raise ValueError("T_att, P and sigma_P must be 1-D arrays of equal length")
        if self.T_att.size and np.any(np.diff(self.T_att) <= 0):
            raise ValueError(f"curve at T_mc = {self.T_mc} K: T_att must be strictly increasing")
        if np.any(self.sigma_P <= 0):
            raise ValueError(f"curve at T_mc = {self.T_mc} K: sigma_P must be > 0")

    def __len__(self):
        return self.T_att.size

    def scaled(self, c: float) -> "PlanckCurve":
        return PlanckCurve(self.T_mc, self.T_att.copy(), self.P * c, self.sigma_P * c)


@dataclass
class SweepDataset:
    curves: list
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.curves = sorted(self.curves, key=lambda c: c.T_mc)
        tmc = [c.T_mc for c in self.curves]
        if any(b <= a for a, b in zip(tmc, tmc[1:])):
            raise ValueError("curve T_mc values must be distinct")

    @property
    def T_mc_values(self) -> np.ndarray:
        return np.array([c.T_mc for c in self.curves])

    @property
    def n_points(self) -> int:
        return sum(len(c) for c in self.curves)

    def stacked(self):
        """Flattened ``(T_att, T_mc, P, sigma_P, curve_index)`` arrays."""
        T_att = np.concatenate([c.T_att for c in self.curves])
        T_mc = np.concatenate([np.full(len(c), c.T_mc) for c in self.curves])
        P = np.concatenate([c.P for c in self.curves])
        sigma = np.concatenate([c.sigma_P for c in self.curves])
        index = np.concatenate([np.full(len(c), i) for i, c in enumerate(self.curves)])
        return T_att, T_mc, P, sigma, index

    def scaled(self, c: float) -> "SweepDataset":
        return SweepDataset([cv.scaled(c) for cv in self.curves], self.receiver, dict(self.provenance))

    def subset(self, indices) -> "SweepDataset":
        return SweepDataset([self.curves[i] for i in indices], self.receiver, dict(self.provenance))


def simulate_dataset(
    truth: CalibrationParams,
    plan: SweepPlan,
    cfg: Optional[ReceiverConfig] = None,
    noise: Optional[NoiseConfig] = None,
    eta_of_tmc: Optional[Callable[[float], float]] = None,
) -> SweepDataset:
    """Forward-simulate detected power for every feasible entry of ``plan``.

    In radiometer mode each point gets temperature jitter on both stages and
    additive Gaussian power noise with ``sigma_P = P / sqrt(B * t_int)``.
    ``eta_of_tmc`` optionally makes the transmissivity depend on the nominal
    chamber temperature of each curve.
    """
    cfg = cfg or ReceiverConfig()
    noise = noise or NoiseConfig(mode="noiseless")
    entries = plan.feasible_entries
    if not entries:
        raise InfeasiblePlanError("sweep plan has no feasible entries: " + "; ".join(
            e for _, e in plan.errors))

    t_int = noise.t_int if noise.t_int is not None else cfg.t_int
    rel_sigma = 1.0 / math.sqrt(cfg.B * t_int)
    rng = np.random.default_rng(noise.rng_seed)
    curves = []
    for entry in entries:
        params = truth
        if eta_of_tmc is not None:
            params = CalibrationParams(truth.kappa, truth.n_H, float(eta_of_tmc(entry.T_mc)))
        T_att = entry.T_att
        T_mc = np.full(T_att.shape, entry.T_mc)
        if noise.mode == "noiseless":
            P = detected_power(params, T_att, T_mc, cfg)
            curves.append(PlanckCurve(entry.T_mc, T_att.copy(), P, np.ones_like(P)))
            continue
        jitter = noise.temperature_jitter_sigma
        T_att_true = np.abs(T_att + jitter * rng.standard_normal(T_att.shape))
        T_mc_true = np.abs(T_mc + jitter * rng.standard_normal(T_att.shape))
        P_true = detected_power(params, T_att_true, T_mc_true, cfg)
        sigma = P_true * rel_sigma
        P = P_true + sigma * rng.standard_normal(P_true.shape)
        curves.append(PlanckCurve(entry.T_mc, T_att.copy(), P, sigma))

    provenance = {
        "synthetic": True,
        "truth": truth.to_dict(),
        "noise_mode": noise.mode,
        "rng_seed": noise.rng_seed,
        "t_int": t_int,
        "temperature_jitter_sigma": noise.temperature_jitter_sigma if noise.mode != "noiseless" else 0.0,
        "points_per_curve": [len(e.T_att) for e in entries],
        "assumptions": "point count, T_att grid and per-point integration time are simulator defaults",
    }
    if eta_of_tmc is not None:
        provenance["eta_by_T_mc"] = {f"{e.T_mc:.6g}": float(eta_of_tmc(e.T_mc)) for e in entries}
    return SweepDataset(curves, cfg, provenance)


@dataclass(frozen=True)
class SnailModel:
    """Excess loss (dB, relative to zero bias) of the flux-tunable attenuator versus bias in uA.

    ``kind="table"`` interpolates ``(table_I, table_loss)`` with a monotone
    cubic (PCHIP). A table covering only ``I >= 0`` is mirrored to negative
    bias. ``kind="even_poly"`` evaluates ``sum_k coeffs[k] * I**(2k+2)`` on
    ``|I| <= I_max``.
    """

    kind: str = "table"
    table_I: tuple = ()
    table_loss: tuple = ()
    coeffs: tuple = ()
    I_max: float = 200.0

    def __post_init__(self):
        if self.kind == "table":
            x = np.asarray(self.table_I, dtype=float)
            y = np.asarray(self.table_loss, dtype=float)
            if x.size < 2 or x.shape != y.shape:
                raise ValueError("SNAIL table needs >= 2 matching (I, loss) rows")
            if np.any(np.diff(x) <= 0):
                raise ValueError("SNAIL table bias values must be strictly increasing")
            zero = np.flatnonzero(x == 0.0)
            if zero.size != 1 or y[zero[0]] != 0.0:
                raise ValueError("SNAIL table must contain the zero-bias reference with 0 dB")
        elif self.kind == "even_poly":
            if not self.coeffs:
                raise ValueError("even polynomial needs at least one coefficient")
        else:
            raise ValueError(f"unknown SNAIL model kind {self.kind!r}")

    def _table_xy(self):
        x = np.asarray(self.table_I, dtype=float)
        y = np.asarray(self.table_loss, dtype=float)
        if x[0] == 0.0:
            x = np.concatenate([-x[:0:-1], x])
            y = np.concatenate([y[:0:-1], y])
        return x, y

    @property
    def domain(self) -> tuple:
        if self.kind == "table":
            x, _ = self._table_xy()
            return float(x[0]), float(x[-1])
        return -self.I_max, self.I_max

    def excess_loss(self, I_dc):
        I = np.asarray(I_dc, dtype=float)
        lo, hi = self.domain
        if np.any(~np.isfinite(I)) or np.any(I < lo) or np.any(I > hi):
            raise PhysicsDomainError(f"bias current outside model domain [{lo}, {hi}] uA")
        if self.kind == "table":
            x, y = self._table_xy()
            out = PchipInterpolator(x, y)(I)
        else:
            out = sum(c * I ** (2 * k + 2) for k, c in enumerate(self.coeffs)) * np.ones_like(I)
        out = np.where(I == 0.0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    @classmethod
    def from_dict(cls, d: dict) -> "SnailModel":
        d = dict(d)
        for key in ("table_I", "table_loss", "coeffs"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)


def synthetic_snail_model() -> SnailModel:
    """Synthetic fixture loosely shaped like a flux-tunable loss curve; not measured data."""
    return SnailModel(
        kind="table",
        table_I=(0.0, 40.0, 80.0, 100.0, 120.0, 140.0, 160.0),
        table_loss=(0.0, 0.02, 0.10, 0.18, 0.32, 0.55, 0.90),
    )


def snail_excess_loss(model: SnailModel, I_dc):
    return model.excess_loss(I_dc)


@dataclass
class FluxSweepRecord:
    """Loss change at one bias point relative to the zero-bias reference.

    ``delta_L`` is a loss in dB (positive means more attenuation). For VNA
    traces the measured transmission change is ``delta_tau = -delta_L``.
    """

    I_dc: float
    delta_L: float
    sigma: float
    source: str

    def __post_init__(self):
        if self.source not in ("planck2d", "vna"):
            raise ValueError(f"unknown flux record source {self.source!r}")

    @property
    def delta_tau(self) -> float:
        return -self.delta_L

    def to_dict(self) -> dict:
        return {"I_dc": self.I_dc, "delta_L": self.delta_L, "sigma": self.sigma, "source": self.source}


def simulate_vna_trace(model: SnailModel, I_grid, noise_sigma: float = 0.0, seed: int = 0) -> list:
    """Relative transmission ``delta_tau(I) = -excess_loss(I) + noise``.

    The zero-bias entry is the reference and is exactly 0 dB after
    re-referencing; every other point carries independent noise of
    ``noise_sigma`` dB.
    """
    I = np.asarray(I_grid, dtype=float)
    if I.ndim != 1 or I.size == 0:
        raise ValueError("I_grid must be a non-empty 1-D sequence")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    tau = -np.asarray(model.excess_loss(I)) + noise_sigma * rng.standard_normal(I.shape)
    ref = I == 0.0
    tau = np.where(ref, 0.0, tau)
    return [
        FluxSweepRecord(float(i), float(-t) + 0.0, 0.0 if r else float(noise_sigma), "vna")
        for i, t, r in zip(I, tau, ref)
    ]


def simulate_flux_datasets(
    base: CalibrationParams,
    model: SnailModel,
    I_grid,
    plan: SweepPlan,
    cfg: Optional[ReceiverConfig] = None,
    noise: Optional[NoiseConfig] = None,
) -> dict:
    """One sweep dataset per bias point; truth loss is ``base.loss_db + excess_loss(I)``.

    Per-bias seeds are spawned from ``noise.rng_seed`` so the whole set is
    reproducible.
    """
    noise = noise or NoiseConfig(mode="noiseless")
    I = [float(i) for i in I_grid]
    seeds = np.random.SeedSequence(noise.rng_seed).generate_state(len(I))
    out = {}
    for i, seed in zip(I, seeds):
        truth = CalibrationParams.from_loss_db(base.kappa, base.n_H, base.loss_db + model.excess_loss(i))
        nc = NoiseConfig(noise.mode, noise.t_int, int(seed), noise.temperature_jitter_sigma)
        ds = simulate_dataset(truth, plan, cfg, nc)
        ds.provenance["I_dc"] = i
        out[i] = ds
    return out
