"""Hourly farm datasets: CSV ingest and validation, time-of-use tariffs,
and a synthetic profile generator standing in for real farm data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .ioutil import atomic_write_text

REQUIRED_COLUMNS = ("hour", "load_kwh", "pv_kwh")
OPTIONAL_COLUMNS = ("wind_kwh", "price_per_kwh")

MONTH_LENGTHS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)

# month (1..12) for each day of a non-leap year
_MONTH_OF_DAY = tuple(
    m + 1 for m, length in enumerate(MONTH_LENGTHS) for _ in range(length)
)


class DataValidationError(ValueError):
    """Raised when a dataset violates the hourly-series schema."""


class Tier(Enum):
    OFF_PEAK = "off-peak"
    STANDARD = "standard"
    PEAK = "peak"


def month_of_hour(hour_index: int) -> int:
    """Calendar month (1..12) for an hour index, on a cyclic 365-day year.

    Series longer than a year wrap around; the single extra day of a
    366-day dataset lands back in January.
    """
    return _MONTH_OF_DAY[(hour_index // 24) % 365]


@dataclass(frozen=True)
class HourlyRecord:
    """One hour of farm data: demand, renewable generation, and price."""

    hour_index: int
    hour_of_day: int
    month: int
    load_kwh: float
    pv_kwh: float
    wind_kwh: float | None
    price_per_kwh: float

    def __post_init__(self) -> None:
        if self.hour_index < 0:
            raise DataValidationError(f"hour_index must be >= 0, got {self.hour_index}")
        if self.hour_of_day != self.hour_index % 24:
            raise DataValidationError(
                f"hour_of_day {self.hour_of_day} inconsistent with hour_index {self.hour_index}"
            )
        if not 1 <= self.month <= 12:
            raise DataValidationError(f"month must be in 1..12, got {self.month}")
        for name in ("load_kwh", "pv_kwh", "price_per_kwh"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DataValidationError(f"{name} must be finite and >= 0, got {value}")
        if self.wind_kwh is not None and (
            not math.isfinite(self.wind_kwh) or self.wind_kwh < 0
        ):
            raise DataValidationError(
                f"wind_kwh must be finite and >= 0, got {self.wind_kwh}"
            )

    @property
    def renewables_kwh(self) -> float:
        """Total renewable supply for the hour (PV plus wind when present)."""
        return self.pv_kwh + (self.wind_kwh or 0.0)


@dataclass(frozen=True)
class TariffSchedule:
    """Three-tier time-of-use tariff over the 24 hours of a day.

    The three hour sets must partition {0..23} and the rates must satisfy
    off_peak_rate <= standard_rate <= peak_rate.
    """

    off_peak_hours: frozenset[int]
    standard_hours: frozenset[int]
    peak_hours: frozenset[int]
    off_peak_rate: float
    standard_rate: float
    peak_rate: float

    def __post_init__(self) -> None:
        sets = (self.off_peak_hours, self.standard_hours, self.peak_hours)
        union = set().union(*sets)
        total = sum(len(s) for s in sets)
        if union != set(range(24)) or total != 24:
            raise DataValidationError(
                "tariff hour sets must partition the 24 hours of a day"
            )
        if not 0 < self.off_peak_rate <= self.standard_rate <= self.peak_rate:
            raise DataValidationError(
                "tariff rates must satisfy 0 < off_peak <= standard <= peak"
            )

    def tier_of(self, hour_of_day: int) -> Tier:
        return tier_of(self, hour_of_day)

    def price_at(self, hour_of_day: int) -> float:
        return price_at(self, hour_of_day)


def tier_of(tariff: TariffSchedule, hour_of_day: int) -> Tier:
    """Tariff tier containing the given hour of day (0..23)."""
    if not 0 <= hour_of_day <= 23:
        raise ValueError(f"hour_of_day must be in 0..23, got {hour_of_day}")
    if hour_of_day in tariff.peak_hours:
        return Tier.PEAK
    if hour_of_day in tariff.off_peak_hours:
        return Tier.OFF_PEAK
    return Tier.STANDARD


def price_at(tariff: TariffSchedule, hour_of_day: int) -> float:
    """Rate of the tier containing the given hour of day."""
    tier = tier_of(tariff, hour_of_day)
    if tier is Tier.PEAK:
        return tariff.peak_rate
    if tier is Tier.OFF_PEAK:
        return tariff.off_peak_rate
    return tariff.standard_rate


# Night window runs 23:00-07:00 and the evening peak 17:00-19:00, both
# taken as [start, end) on whole hours so the three sets partition the day.
DEFAULT_OFF_PEAK_HOURS = frozenset({23, 0, 1, 2, 3, 4, 5, 6})
DEFAULT_PEAK_HOURS = frozenset({17, 18})
DEFAULT_STANDARD_HOURS = frozenset(range(24)) - DEFAULT_OFF_PEAK_HOURS - DEFAULT_PEAK_HOURS


def default_tariff(
    off_peak_rate: float = 0.05,
    standard_rate: float = 0.10,
    peak_rate: float = 0.20,
) -> TariffSchedule:
    """Night/day/evening tariff with configurable rates.

    The rates are arbitrary defaults (currency/kWh); only their ordering
    matters to the controllers and reward shaping.
    """
    return TariffSchedule(
        off_peak_hours=DEFAULT_OFF_PEAK_HOURS,
        standard_hours=DEFAULT_STANDARD_HOURS,
        peak_hours=DEFAULT_PEAK_HOURS,
        off_peak_rate=off_peak_rate,
        standard_rate=standard_rate,
        peak_rate=peak_rate,
    )


@dataclass(frozen=True)
class HourlySeries:
    """Contiguous hourly records covering a whole number of days."""

    records: tuple[HourlyRecord, ...]
    has_wind: bool

    def __post_init__(self) -> None:
        n = len(self.records)
        if n == 0 or n % 24 != 0:
            raise DataValidationError(
                f"series length must be a positive multiple of 24, got {n}"
            )
        for i, record in enumerate(self.records):
            if record.hour_index != i:
                raise DataValidationError(
                    f"records must be contiguous from hour 0; index {i} holds hour {record.hour_index}"
                )
        wind_present = all(r.wind_kwh is not None for r in self.records)
        if self.has_wind != wind_present:
            raise DataValidationError(
                "has_wind must be true exactly when every record carries a wind value"
            )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index: int) -> HourlyRecord:
        return self.records[index]

    @property
    def n_days(self) -> int:
        return len(self.records) // 24

    def day(self, day_index: int) -> tuple[HourlyRecord, ...]:
        """The 24 records of one day."""
        if not 0 <= day_index < self.n_days:
            raise ValueError(f"day_index must be in 0..{self.n_days - 1}, got {day_index}")
        return self.records[day_index * 24 : (day_index + 1) * 24]

    def loads(self) -> np.ndarray:
        return np.array([r.load_kwh for r in self.records])

    def pvs(self) -> np.ndarray:
        return np.array([r.pv_kwh for r in self.records])

    def winds(self) -> np.ndarray:
        if not self.has_wind:
            raise DataValidationError("series has no wind data")
        return np.array([r.wind_kwh for r in self.records])

    def prices(self) -> np.ndarray:
        return np.array([r.price_per_kwh for r in self.records])

    def without_wind(self) -> "HourlySeries":
        """Copy of the series with the wind column dropped."""
        if not self.has_wind:
            return self
        records = tuple(
            HourlyRecord(
                hour_index=r.hour_index,
                hour_of_day=r.hour_of_day,
                month=r.month,
                load_kwh=r.load_kwh,
                pv_kwh=r.pv_kwh,
                wind_kwh=None,
                price_per_kwh=r.price_per_kwh,
            )
            for r in self.records
        )
        return HourlySeries(records=records, has_wind=False)


@dataclass(frozen=True)
class SyntheticProfileConfig:
    """Parameters of the synthetic farm-year generator."""

    days: int = 365
    base_load_kwh: float = 8.0
    load_amplitude_kwh: float = 12.0
    pv_peak_kwh: float = 15.0
    wind_mean_kwh: float = 4.0
    noise_fraction: float = 0.05
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.days <= 0:
            raise DataValidationError(f"days must be > 0, got {self.days}")
        for name in ("base_load_kwh", "load_amplitude_kwh", "pv_peak_kwh", "wind_mean_kwh"):
            if getattr(self, name) < 0:
                raise DataValidationError(f"{name} must be >= 0")
        if not 0 <= self.noise_fraction < 1:
            raise DataValidationError(
                f"noise_fraction must be in [0, 1), got {self.noise_fraction}"
            )


# Diurnal shape constants: load humps centred on the two milking blocks,
# PV nonzero between sunrise and sunset.
_MILKING_HOURS = (6.0, 17.5)
_MILKING_WIDTH = 1.5
_SUNRISE = 6.0
_SUNSET = 20.0


def diurnal_load_kwh(config: SyntheticProfileConfig, hour_of_day: int) -> float:
    """Noise-free load: base plus two Gaussian milking-time humps."""
    humps = sum(
        math.exp(-((hour_of_day - peak) ** 2) / (2 * _MILKING_WIDTH**2))
        for peak in _MILKING_HOURS
    )
    return config.base_load_kwh + config.load_amplitude_kwh * humps


def diurnal_pv_kwh(config: SyntheticProfileConfig, hour_of_day: int) -> float:
    """Noise-free PV: zero outside daylight, sin^2 bell across it."""
    if hour_of_day <= _SUNRISE or hour_of_day >= _SUNSET:
        return 0.0
    phase = math.pi * (hour_of_day - _SUNRISE) / (_SUNSET - _SUNRISE)
    return config.pv_peak_kwh * math.sin(phase) ** 2


def generate_synthetic(
    config: SyntheticProfileConfig, tariff: TariffSchedule
) -> HourlySeries:
    """Deterministic synthetic series for a fixed (config, tariff) pair.

    Each hour's load/PV/wind is the closed-form diurnal value scaled by an
    independent multiplicative factor 1 + noise_fraction * u with
    u ~ Uniform[-1, 1), then clipped at zero. Wind is flat noise around
    wind_mean_kwh. Prices come from the tariff.
    """
    n_hours = config.days * 24
    rng = np.random.default_rng(config.rng_seed)
    noise = 1.0 + config.noise_fraction * rng.uniform(-1.0, 1.0, size=(n_hours, 3))
    records = []
    for i in range(n_hours):
        hod = i % 24
        load = max(0.0, diurnal_load_kwh(config, hod) * float(noise[i, 0]))
        pv = max(0.0, diurnal_pv_kwh(config, hod) * float(noise[i, 1]))
        wind = max(0.0, config.wind_mean_kwh * float(noise[i, 2]))
        records.append(
            HourlyRecord(
                hour_index=i,
                hour_of_day=hod,
                month=month_of_hour(i),
                load_kwh=load,
                pv_kwh=pv,
                wind_kwh=wind,
                price_per_kwh=tariff.price_at(hod),
            )
        )
    return HourlySeries(records=tuple(records), has_wind=True)


def _parse_value(raw: str, column: str, row: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DataValidationError(
            f"malformed value {raw!r} in column {column} at row {row}"
        ) from None
    if not math.isfinite(value):
        raise DataValidationError(f"non-finite value in column {column} at row {row}")
    if value < 0:
        raise DataValidationError(f"negative value at row {row} (column {column})")
    return value


def load_csv(path: str | Path, tariff: TariffSchedule | None = None) -> HourlySeries:
    """Load and validate an hourly series from CSV.

    The header must name `hour,load_kwh,pv_kwh` with optional `wind_kwh`
    and `price_per_kwh` columns; anything else is rejected. When the price
    column is absent a tariff must be supplied to fill prices per hour of
    day. Row numbers in errors are 1-based over data rows.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        known = set(REQUIRED_COLUMNS) | set(OPTIONAL_COLUMNS)
        unknown = [h for h in header if h not in known]
        if unknown:
            raise DataValidationError(f"unexpected column(s): {', '.join(unknown)}")
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise DataValidationError(f"missing required column(s): {', '.join(missing)}")
        if len(set(header)) != len(header):
            raise DataValidationError("duplicate column names in header")
        col = {name: header.index(name) for name in header}
        has_wind = "wind_kwh" in col
        has_price = "price_per_kwh" in col
        if not has_price and tariff is None:
            raise DataValidationError(
                "dataset has no price_per_kwh column and no tariff was provided"
            )

        records = []
        for row_number, raw in enumerate(reader, start=1):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise DataValidationError(
                    f"row {row_number} has {len(raw)} fields, expected {len(header)}"
                )
            hour_raw = raw[col["hour"]].strip()
            try:
                hour_index = int(hour_raw)
            except ValueError:
                raise DataValidationError(
                    f"malformed hour {hour_raw!r} at row {row_number}"
                ) from None
            if hour_index != row_number - 1:
                raise DataValidationError(
                    f"non-contiguous hour at row {row_number}: expected {row_number - 1}, got {hour_index}"
                )
            hod = hour_index % 24
            load = _parse_value(raw[col["load_kwh"]], "load_kwh", row_number)
            pv = _parse_value(raw[col["pv_kwh"]], "pv_kwh", row_number)
            wind = (
                _parse_value(raw[col["wind_kwh"]], "wind_kwh", row_number)
                if has_wind
                else None
            )
            if has_price:
                price = _parse_value(raw[col["price_per_kwh"]], "price_per_kwh", row_number)
            else:
                price = tariff.price_at(hod)
            records.append(
                HourlyRecord(
                    hour_index=hour_index,
                    hour_of_day=hod,
                    month=month_of_hour(hour_index),
                    load_kwh=load,
                    pv_kwh=pv,
                    wind_kwh=wind,
                    price_per_kwh=price,
                )
            )

    if len(records) % 24 != 0 or not records:
        raise DataValidationError(
            f"series length must be a positive multiple of 24, got {len(records)}"
        )
    return HourlySeries(records=tuple(records), has_wind=has_wind)


def write_csv(series: HourlySeries, path: str | Path, include_price: bool = True) -> None:
    """Write a series in the schema `load_csv` reads, with lossless floats."""
    header = ["hour", "load_kwh", "pv_kwh"]
    if series.has_wind:
        header.append("wind_kwh")
    if include_price:
        header.append("price_per_kwh")
    lines = [",".join(header)]
    for r in series.records:
        fields = [str(r.hour_index), repr(r.load_kwh), repr(r.pv_kwh)]
        if series.has_wind:
            fields.append(repr(r.wind_kwh))
        if include_price:
            fields.append(repr(r.price_per_kwh))
        lines.append(",".join(fields))
    atomic_write_text(path, "\n".join(lines) + "\n")
