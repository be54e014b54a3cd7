"""Discrete state encodings: map (hour, battery charge, optional load/PV/wind
bins) onto flat table indices for the three state-space designs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Values this close to the next bin edge are snapped up, so energies that
# sit mathematically on an edge are not pushed down a bin by float error.
_EDGE_SNAP = 1e-9


class EncodingKind(Enum):
    HOUR_SOC = "hour-soc"
    HOUR_SOC_LOAD_PV = "hour-soc-load-pv"
    HOUR_SOC_LOAD_PV_WIND = "hour-soc-load-pv-wind"


@dataclass(frozen=True)
class BinSpec:
    """Uniform binning of a non-negative quantity; values >= max_value clamp
    into the top bin."""

    bin_count: int
    max_value: float

    def __post_init__(self) -> None:
        if self.bin_count < 1:
            raise ValueError(f"bin_count must be >= 1, got {self.bin_count}")
        if not self.max_value > 0:
            raise ValueError(f"max_value must be > 0, got {self.max_value}")


def _floor_bin(x: float) -> int:
    b = math.floor(x)
    if x - b > 1.0 - _EDGE_SNAP:
        b += 1
    return b


def soc_bin(spec, energy_kwh: float) -> int:
    """Battery charge level 0..soc_levels-1 for a stored energy.

    floor(energy / capacity * (soc_levels - 1)), with a full battery mapping
    to the top level; `spec` is any object with capacity_kwh and soc_levels.
    """
    if not 0 <= energy_kwh <= spec.capacity_kwh:
        raise ValueError(
            f"energy {energy_kwh} outside [0, {spec.capacity_kwh}]"
        )
    top = spec.soc_levels - 1
    return min(_floor_bin(energy_kwh / spec.capacity_kwh * top), top)


def soc_level_energy(spec, level: int) -> float:
    """Stored energy assigned to a discrete charge level (the inverse lattice
    of soc_bin): level 0 is empty, the top level is full capacity."""
    top = spec.soc_levels - 1
    if not 0 <= level <= top:
        raise ValueError(f"soc level must be in 0..{top}, got {level}")
    if level == 0:
        return 0.0
    if level == top:
        return spec.capacity_kwh
    return level * spec.capacity_kwh / top


def value_bin(spec: BinSpec, value: float) -> int:
    """min(floor(value / max_value * bin_count), bin_count - 1) for value >= 0."""
    return min(_floor_bin(value / spec.max_value * spec.bin_count), spec.bin_count - 1)


@dataclass(frozen=True)
class StateIndex:
    """A flat table index plus the named dimensions it was composed from."""

    flat_index: int
    dims: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class StateEncoder:
    """Row-major composition of observation coordinates into a flat index."""

    kind: EncodingKind
    soc_levels: int = 11
    load_bins: BinSpec | None = None
    pv_bins: BinSpec | None = None
    wind_bins: BinSpec | None = None

    def __post_init__(self) -> None:
        needs = self.kind is not EncodingKind.HOUR_SOC
        if needs and (self.load_bins is None or self.pv_bins is None):
            raise ValueError(f"{self.kind.value} encoding requires load and pv bin specs")
        if self.kind is EncodingKind.HOUR_SOC_LOAD_PV_WIND and self.wind_bins is None:
            raise ValueError("hour-soc-load-pv-wind encoding requires a wind bin spec")

    def dims(self) -> tuple[tuple[str, int], ...]:
        dims = [("hour", 24), ("soc", self.soc_levels)]
        if self.kind is not EncodingKind.HOUR_SOC:
            dims.append(("load", self.load_bins.bin_count))
            dims.append(("pv", self.pv_bins.bin_count))
        if self.kind is EncodingKind.HOUR_SOC_LOAD_PV_WIND:
            dims.append(("wind", self.wind_bins.bin_count))
        return tuple(dims)

    def size(self) -> int:
        return state_space_size(self)

    def flat(
        self,
        hour_of_day: int,
        soc_level: int,
        load_bin: int = 0,
        pv_bin: int = 0,
        wind_bin: int = 0,
    ) -> int:
        """Flat index from pre-binned coordinates (hot path, unchecked)."""
        index = hour_of_day * self.soc_levels + soc_level
        if self.kind is EncodingKind.HOUR_SOC:
            return index
        index = (index * self.load_bins.bin_count + load_bin) * self.pv_bins.bin_count + pv_bin
        if self.kind is EncodingKind.HOUR_SOC_LOAD_PV:
            return index
        return index * self.wind_bins.bin_count + wind_bin

    def encode(self, observation) -> StateIndex:
        """Encode an environment observation (hour_of_day, soc_level and the
        load/pv/wind fields the kind requires) into a StateIndex."""
        if not 0 <= observation.hour_of_day <= 23:
            raise ValueError(f"hour_of_day out of range: {observation.hour_of_day}")
        if not 0 <= observation.soc_level < self.soc_levels:
            raise ValueError(f"soc_level out of range: {observation.soc_level}")
        if self.kind is EncodingKind.HOUR_SOC:
            flat = self.flat(observation.hour_of_day, observation.soc_level)
            return StateIndex(flat_index=flat, dims=self.dims())
        load_bin = value_bin(self.load_bins, observation.load_kwh)
        pv_bin = value_bin(self.pv_bins, observation.pv_kwh)
        wind_bin = 0
        if self.kind is EncodingKind.HOUR_SOC_LOAD_PV_WIND:
            if observation.wind_kwh is None:
                raise ValueError(
                    "observation has no wind value but the encoding requires one"
                )
            wind_bin = value_bin(self.wind_bins, observation.wind_kwh)
        flat = self.flat(
            observation.hour_of_day, observation.soc_level, load_bin, pv_bin, wind_bin
        )
        return StateIndex(flat_index=flat, dims=self.dims())

    def decode(self, flat_index: int) -> tuple[int, ...]:
        """Coordinates (hour, soc[, load, pv[, wind]]) for a flat index."""
        if not 0 <= flat_index < self.size():
            raise ValueError(f"flat index {flat_index} outside [0, {self.size()})")
        coords = []
        for _, cardinality in reversed(self.dims()):
            coords.append(flat_index % cardinality)
            flat_index //= cardinality
        return tuple(reversed(coords))

    @classmethod
    def for_series(
        cls,
        kind: EncodingKind,
        series,
        battery_spec,
        bin_counts: tuple[int, int, int] = (5, 5, 5),
        bin_maxes: tuple[float | None, float | None, float | None] = (None, None, None),
        percentile: float = 99.0,
    ) -> "StateEncoder":
        """Build an encoder with bin ranges taken from the series.

        Each unset max defaults to the series' given percentile of the field
        (1.0 when the field is identically zero).
        """
        if kind is EncodingKind.HOUR_SOC:
            return cls(kind=kind, soc_levels=battery_spec.soc_levels)

        def resolve(values: np.ndarray, explicit: float | None) -> float:
            if explicit is not None:
                return explicit
            p = float(np.percentile(values, percentile))
            return p if p > 0 else 1.0

        load_bins = BinSpec(bin_counts[0], resolve(series.loads(), bin_maxes[0]))
        pv_bins = BinSpec(bin_counts[1], resolve(series.pvs(), bin_maxes[1]))
        wind_bins = None
        if kind is EncodingKind.HOUR_SOC_LOAD_PV_WIND:
            if not series.has_wind:
                raise ValueError(
                    "hour-soc-load-pv-wind encoding requires a series with a wind_kwh column"
                )
            wind_bins = BinSpec(bin_counts[2], resolve(series.winds(), bin_maxes[2]))
        return cls(
            kind=kind,
            soc_levels=battery_spec.soc_levels,
            load_bins=load_bins,
            pv_bins=pv_bins,
            wind_bins=wind_bins,
        )


def state_space_size(encoder: StateEncoder) -> int:
    """Product of the encoder's dimension cardinalities."""
    size = 1
    for _, cardinality in encoder.dims():
        size *= cardinality
    return size
