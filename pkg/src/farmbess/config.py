"""Run configuration: a single YAML file with nested sections, validated
strictly (unknown keys are errors) before any run starts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .agent import Hyperparams
from .battery import BatterySpec, PenaltyTable
from .encoding import EncodingKind, StateEncoder
from .timeseries import (
    HourlySeries,
    SyntheticProfileConfig,
    TariffSchedule,
    default_tariff,
    generate_synthetic,
    load_csv,
)


class ConfigError(ValueError):
    """Raised for malformed or inconsistent run configuration."""


_SECTIONS = ("dataset", "tariff", "battery", "hyperparams", "encoding", "penalties", "run")

_DATASET_KEYS = ("path", "synthetic", "include_wind")
_SYNTHETIC_KEYS = (
    "days",
    "base_load_kwh",
    "load_amplitude_kwh",
    "pv_peak_kwh",
    "wind_mean_kwh",
    "noise_fraction",
    "rng_seed",
)
_TARIFF_KEYS = (
    "off_peak_rate",
    "standard_rate",
    "peak_rate",
    "off_peak_hours",
    "standard_hours",
    "peak_hours",
)
_BATTERY_KEYS = (
    "capacity_kwh",
    "charge_rate_kw",
    "discharge_rate_kw",
    "reserve_fraction",
    "soc_levels",
)
_HYPERPARAM_KEYS = (
    "learning_rate_init",
    "epsilon_init",
    "discount_factor",
    "decay",
    "floor",
    "total_episodes",
    "steps_per_episode",
    "soc_reset_low",
)
_ENCODING_KEYS = (
    "kind",
    "load_bins",
    "pv_bins",
    "wind_bins",
    "load_bin_max",
    "pv_bin_max",
    "wind_bin_max",
    "percentile",
)
_PENALTY_KEYS = (
    "charge_full_peak",
    "charge_full",
    "charge_peak",
    "charge_off_peak_bonus",
    "discharge_empty",
    "discharge_off_peak",
    "discharge_peak_bonus",
    "idle_peak_with_charge",
)
_RUN_KEYS = ("output_dir", "seeds", "initial_soc_level", "penalty_mode")


def _require_mapping(value, where: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a mapping")
    return value

def _check_keys(section: dict, allowed: tuple[str, ...], where: str) -> None:
    unknown = [k for k in section if k not in allowed]
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration for one experiment batch."""

    dataset_path: str | None
    synthetic: SyntheticProfileConfig | None
    include_wind: bool
    tariff: TariffSchedule
    battery: BatterySpec
    hyperparams: Hyperparams
    encoding_kind: EncodingKind
    bin_counts: tuple[int, int, int]
    bin_maxes: tuple[float | None, float | None, float | None]
    percentile: float
    penalties: PenaltyTable
    output_dir: str
    seeds: tuple[int, ...]
    initial_soc_level: int
    penalty_mode: str
    resolved: dict = field(compare=False, repr=False, default_factory=dict)

    def load_series(self) -> HourlySeries:
        if self.dataset_path is not None:
            series = load_csv(self.dataset_path, tariff=self.tariff)
        else:
            series = generate_synthetic(self.synthetic, self.tariff)
        if not self.include_wind and series.has_wind:
            series = series.without_wind()
        return series

    def encoder_for(self, series: HourlySeries) -> StateEncoder:
        return StateEncoder.for_series(
            self.encoding_kind,
            series,
            self.battery,
            bin_counts=self.bin_counts,
            bin_maxes=self.bin_maxes,
            percentile=self.percentile,
        )

    def hyperparams_for_seed(self, seed: int) -> Hyperparams:
        return Hyperparams(
            learning_rate_init=self.hyperparams.learning_rate_init,
            epsilon_init=self.hyperparams.epsilon_init,
            discount_factor=self.hyperparams.discount_factor,
            decay=self.hyperparams.decay,
            floor=self.hyperparams.floor,
            total_episodes=self.hyperparams.total_episodes,
            steps_per_episode=self.hyperparams.steps_per_episode,
            rng_seed=seed,
            soc_reset_low=self.hyperparams.soc_reset_low,
        )

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.resolved, sort_keys=True).encode("utf-8")
        ).hexdigest()


def _build_tariff(section: dict) -> TariffSchedule:
    _check_keys(section, _TARIFF_KEYS, "tariff")
    rates = {
        "off_peak_rate": section.get("off_peak_rate", 0.05),
        "standard_rate": section.get("standard_rate", 0.10),
        "peak_rate": section.get("peak_rate", 0.20),
    }
    base = default_tariff(**rates)
    if "off_peak_hours" in section or "peak_hours" in section:
        off_peak = frozenset(section.get("off_peak_hours", sorted(base.off_peak_hours)))
        peak = frozenset(section.get("peak_hours", sorted(base.peak_hours)))
        if "standard_hours" in section:
            standard = frozenset(section["standard_hours"])
        else:
            standard = frozenset(range(24)) - off_peak - peak
        return TariffSchedule(
            off_peak_hours=off_peak,
            standard_hours=standard,
            peak_hours=peak,
            **rates,
        )
    if "standard_hours" in section:
        raise ConfigError("standard_hours given without off_peak_hours/peak_hours")
    return base


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a YAML run config.

    `overrides` maps "section.key" strings to values that take precedence
    over the file (used for command-line flags).
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    raw = _require_mapping(raw, str(path))
    _check_keys(raw, _SECTIONS, str(path))
    for key, value in (overrides or {}).items():
        section_name, _, field_name = key.partition(".")
        raw.setdefault(section_name, {})
        raw[section_name] = dict(_require_mapping(raw[section_name], section_name))
        raw[section_name][field_name] = value
    return _validate(raw)


def config_from_dict(raw: dict) -> RunConfig:
    """Validate an already-parsed config mapping."""
    _check_keys(raw, _SECTIONS, "config")
    return _validate(raw)


def _validate(raw: dict) -> RunConfig:
    dataset = _require_mapping(raw.get("dataset"), "dataset")
    _check_keys(dataset, _DATASET_KEYS, "dataset")
    dataset_path = dataset.get("path")
    synthetic_section = dataset.get("synthetic")
    if dataset_path is not None and synthetic_section is not None:
        raise ConfigError("dataset.path and dataset.synthetic are mutually exclusive")
    synthetic = None
    if dataset_path is None:
        synthetic_section = _require_mapping(synthetic_section, "dataset.synthetic")
        _check_keys(synthetic_section, _SYNTHETIC_KEYS, "dataset.synthetic")
        try:
            synthetic = SyntheticProfileConfig(**synthetic_section)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"dataset.synthetic: {exc}") from None
    include_wind = dataset.get("include_wind", True)
    if not isinstance(include_wind, bool):
        raise ConfigError("dataset.include_wind must be a boolean")

    tariff = _build_tariff(_require_mapping(raw.get("tariff"), "tariff"))

    battery_section = _require_mapping(raw.get("battery"), "battery")
    _check_keys(battery_section, _BATTERY_KEYS, "battery")
    try:
        battery = BatterySpec(**battery_section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"battery: {exc}") from None

    hp_section = _require_mapping(raw.get("hyperparams"), "hyperparams")
    _check_keys(hp_section, _HYPERPARAM_KEYS, "hyperparams")
    try:
        hyperparams = Hyperparams(**hp_section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"hyperparams: {exc}") from None

    enc_section = _require_mapping(raw.get("encoding"), "encoding")
    _check_keys(enc_section, _ENCODING_KEYS, "encoding")
    kind_name = enc_section.get("kind", EncodingKind.HOUR_SOC.value)
    try:
        kind = EncodingKind(kind_name)
    except ValueError:
        valid = ", ".join(k.value for k in EncodingKind)
        raise ConfigError(f"encoding.kind must be one of: {valid}") from None
    bin_counts = (
        int(enc_section.get("load_bins", 5)),
        int(enc_section.get("pv_bins", 5)),
        int(enc_section.get("wind_bins", 5)),
    )
    bin_maxes = (
        enc_section.get("load_bin_max"),
        enc_section.get("pv_bin_max"),
        enc_section.get("wind_bin_max"),
    )
    percentile = float(enc_section.get("percentile", 99.0))

    pen_section = _require_mapping(raw.get("penalties"), "penalties")
    _check_keys(pen_section, _PENALTY_KEYS, "penalties")
    penalties = PenaltyTable(**{k: float(v) for k, v in pen_section.items()})

    run_section = _require_mapping(raw.get("run"), "run")
    _check_keys(run_section, _RUN_KEYS, "run")
    output_dir = run_section.get("output_dir", "out")
    seeds = run_section.get("seeds", [0])
    if not isinstance(seeds, (list, tuple)) or not seeds:
        raise ConfigError("run.seeds must be a non-empty list of integers")
    if not all(isinstance(s, int) for s in seeds):
        raise ConfigError("run.seeds must contain integers only")
    initial_soc_level = run_section.get("initial_soc_level", 1)
    if not 0 <= initial_soc_level < battery.soc_levels:
        raise ConfigError(
            f"run.initial_soc_level must be in 0..{battery.soc_levels - 1}"
        )
    penalty_mode = run_section.get("penalty_mode", "cost-only")
    if penalty_mode not in ("shaped", "cost-only"):
        raise ConfigError("run.penalty_mode must be 'shaped' or 'cost-only'")

    resolved = _resolved_dict(
        dataset_path,
        synthetic,
        include_wind,
        tariff,
        battery,
        hyperparams,
        kind,
        bin_counts,
        bin_maxes,
        percentile,
        penalties,
        output_dir,
        seeds,
        initial_soc_level,
        penalty_mode,
    )
    return RunConfig(
        dataset_path=dataset_path,
        synthetic=synthetic,
        include_wind=include_wind,
        tariff=tariff,
        battery=battery,
        hyperparams=hyperparams,
        encoding_kind=kind,
        bin_counts=bin_counts,
        bin_maxes=bin_maxes,
        percentile=percentile,
        penalties=penalties,
        output_dir=str(output_dir),
        seeds=tuple(seeds),
        initial_soc_level=int(initial_soc_level),
        penalty_mode=penalty_mode,
        resolved=resolved,
    )


def _resolved_dict(
    dataset_path,
    synthetic,
    include_wind,
    tariff,
    battery,
    hyperparams,
    kind,
    bin_counts,
    bin_maxes,
    percentile,
    penalties,
    output_dir,
    seeds,
    initial_soc_level,
    penalty_mode,
) -> dict:
    from dataclasses import asdict

    return {
        "dataset": {
            "path": dataset_path,
            "synthetic": asdict(synthetic) if synthetic else None,
            "include_wind": include_wind,
        },
        "tariff": {
            "off_peak_hours": sorted(tariff.off_peak_hours),
            "standard_hours": sorted(tariff.standard_hours),
            "peak_hours": sorted(tariff.peak_hours),
            "off_peak_rate": tariff.off_peak_rate,
            "standard_rate": tariff.standard_rate,
            "peak_rate": tariff.peak_rate,
        },
        "battery": asdict(battery),
        "hyperparams": asdict(hyperparams),
        "encoding": {
            "kind": kind.value,
            "bin_counts": list(bin_counts),
            "bin_maxes": list(bin_maxes),
            "percentile": percentile,
        },
        "penalties": asdict(penalties),
        "run": {
            "output_dir": str(output_dir),
            "seeds": list(seeds),
            "initial_soc_level": initial_soc_level,
            "penalty_mode": penalty_mode,
        },
    }
