"""Battery dispatch physics and the penalty-shaped reward: the hourly MDP a
controller interacts with."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from .encoding import soc_bin, soc_level_energy
from .timeseries import HourlyRecord, HourlySeries, TariffSchedule, Tier, default_tariff


class Action(IntEnum):
    CHARGE = 0
    DISCHARGE = 1
    IDLE = 2


class EpisodeHorizonError(RuntimeError):
    """Raised by step() after the configured episode horizon is exhausted."""


@dataclass(frozen=True)
class BatterySpec:
    """Physical battery limits plus the charge-level discretization."""

    capacity_kwh: float = 13.5
    charge_rate_kw: float = 5.0
    discharge_rate_kw: float = 5.0
    reserve_fraction: float = 0.1
    soc_levels: int = 11

    def __post_init__(self) -> None:
        if self.capacity_kwh <= 0:
            raise ValueError(f"capacity_kwh must be > 0, got {self.capacity_kwh}")
        if self.charge_rate_kw <= 0 or self.discharge_rate_kw <= 0:
            raise ValueError("charge and discharge rates must be > 0")
        if not 0 <= self.reserve_fraction < 1:
            raise ValueError(
                f"reserve_fraction must be in [0, 1), got {self.reserve_fraction}"
            )
        if self.soc_levels < 2:
            raise ValueError(f"soc_levels must be >= 2, got {self.soc_levels}")

    @property
    def soc_min_kwh(self) -> float:
        """Discharge floor: the reserve the battery never discharges below."""
        return self.reserve_fraction * self.capacity_kwh


@dataclass(frozen=True)
class BatteryState:
    """Current stored energy."""

    energy_kwh: float


@dataclass(frozen=True)
class PenaltyTable:
    """Signed shaping terms added to the cost-based reward.

    Each action has a first-match cascade of rows keyed on the tariff tier
    and the battery charge before the action; the defaults are punitive for
    futile or expensive actions and rewarding for tariff-aligned ones.
    """

    charge_full_peak: float = -15.0
    charge_full: float = -10.0
    charge_peak: float = -10.0
    charge_off_peak_bonus: float = 5.0
    discharge_empty: float = -10.0
    discharge_off_peak: float = -5.0
    discharge_peak_bonus: float = 5.0
    idle_peak_with_charge: float = -10.0

    @classmethod
    def zero(cls) -> "PenaltyTable":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class EnergyFlows:
    """Per-hour energy accounting for one applied action.

    Satisfies load + battery_charge_in == renewables_used +
    battery_discharge_out + grid_import (all in kWh over the hour).
    """

    renewables_used_kwh: float
    battery_charge_in_kwh: float
    battery_discharge_out_kwh: float
    grid_import_kwh: float
    curtailed_kwh: float
    next_battery: BatteryState


@dataclass(frozen=True)
class StepOutcome:
    """Result of one environment step."""

    reward: float
    grid_import_kwh: float
    cost: float
    battery_delta_kwh: float
    curtailed_kwh: float
    next_battery: BatteryState
    penalty_applied: float


@dataclass(frozen=True)
class EnvObservation:
    """What a controller sees before acting: the hour, the discrete charge
    level, and the hour's (not yet consumed) series values."""

    hour_of_day: int
    soc_level: int
    load_kwh: float
    pv_kwh: float
    wind_kwh: float | None


_TIER_CODE = {Tier.OFF_PEAK: 0, Tier.STANDARD: 1, Tier.PEAK: 2}


def _flow_tuple(
    capacity: float,
    soc_min: float,
    charge_rate: float,
    discharge_rate: float,
    energy: float,
    load: float,
    renewables: float,
    action: int,
    charge_cap: float | None,
) -> tuple[float, float, float, float, float, float]:
    """Scalar core of the dispatch physics, shared by the public wrappers and
    the training hot loop.

    Returns (renewables_used, charge_in, discharge_out, grid_import,
    curtailed, next_energy). Renewables serve load first; charging draws the
    renewable surplus before the grid; discharging covers only the residual
    deficit and never breaches the reserve. Boundary-binding transitions snap
    next_energy exactly onto capacity or the reserve.
    """
    surplus = renewables - load if renewables > load else 0.0
    deficit = load - renewables if load > renewables else 0.0
    if action == 0:  # charge
        headroom = capacity - energy
        accepted = charge_rate if charge_rate < headroom else headroom
        if charge_cap is not None and charge_cap < accepted:
            accepted = charge_cap
        if accepted < 0.0:
            accepted = 0.0
        renew_to_battery = surplus if surplus < accepted else accepted
        grid_import = deficit + (accepted - renew_to_battery)
        next_energy = capacity if accepted == headroom else energy + accepted
        curtailed = surplus - renew_to_battery
        return (
            renewables - curtailed,
            accepted,
            0.0,
            grid_import,
            curtailed,
            next_energy,
        )
    if action == 1:  # discharge
        available = energy - soc_min if energy > soc_min else 0.0
        delivered = discharge_rate if discharge_rate < available else available
        if deficit < delivered:
            delivered = deficit
        grid_import = deficit - delivered
        if delivered == available and available > 0.0:
            next_energy = soc_min
        else:
            next_energy = energy - delivered
        return (
            renewables - surplus,
            0.0,
            delivered,
            grid_import,
            surplus,
            next_energy,
        )
    # idle
    return (renewables - surplus, 0.0, 0.0, deficit, surplus, energy)


def _penalty_value(
    action: int,
    tier_code: int,
    energy: float,
    capacity: float,
    soc_min: float,
    p: PenaltyTable,
) -> float:
    """First matching shaping row for (action, tier, charge-before)."""
    if action == 0:
        full = energy >= capacity
        if full and tier_code == 2:
            return p.charge_full_peak
        if full:
            return p.charge_full
        if tier_code == 2:
            return p.charge_peak
        if tier_code == 0:
            return p.charge_off_peak_bonus
        return 0.0
    if action == 1:
        if energy <= soc_min:
            return p.discharge_empty
        if tier_code == 0:
            return p.discharge_off_peak
        if tier_code == 2:
            return p.discharge_peak_bonus
        return 0.0
    if tier_code == 2 and energy >= soc_min:
        return p.idle_peak_with_charge
    return 0.0


def apply_action(
    spec: BatterySpec,
    battery: BatteryState,
    record: HourlyRecord,
    action: Action,
    charge_cap_kwh: float | None = None,
) -> EnergyFlows:
    """Energy flows for one hour under the given action.

    All actions are legal; futile ones (charging a full battery, discharging
    into no deficit) move no energy. `charge_cap_kwh` limits how much the
    battery may accept this hour, used by controllers that charge from
    renewable surplus only.
    """
    used, charged, discharged, grid_import, curtailed, next_energy = _flow_tuple(
        spec.capacity_kwh,
        spec.soc_min_kwh,
        spec.charge_rate_kw * 1.0,
        spec.discharge_rate_kw * 1.0,
        battery.energy_kwh,
        record.load_kwh,
        record.renewables_kwh,
        int(action),
        charge_cap_kwh,
    )
    return EnergyFlows(
        renewables_used_kwh=used,
        battery_charge_in_kwh=charged,
        battery_discharge_out_kwh=discharged,
        grid_import_kwh=grid_import,
        curtailed_kwh=curtailed,
        next_battery=BatteryState(energy_kwh=next_energy),
    )


def compute_reward(
    action: Action,
    tier: Tier,
    price: float,
    load_kwh: float,
    renewables_kwh: float,
    battery: BatteryState,
    spec: BatterySpec,
    penalties: PenaltyTable,
    charge_cap_kwh: float | None = None,
) -> tuple[float, float]:
    """Reward and applied shaping term for one step.

    reward = -(grid_import * price) + penalty, where grid import is the
    energy actually bought given the realized flows (a full battery buys
    nothing extra) and penalty is the first matching shaping row for the
    action, tier, and charge level before the action.
    """
    flows = _flow_tuple(
        spec.capacity_kwh,
        spec.soc_min_kwh,
        spec.charge_rate_kw * 1.0,
        spec.discharge_rate_kw * 1.0,
        battery.energy_kwh,
        load_kwh,
        renewables_kwh,
        int(action),
        charge_cap_kwh,
    )
    penalty = _penalty_value(
        int(action),
        _TIER_CODE[tier],
        battery.energy_kwh,
        spec.capacity_kwh,
        spec.soc_min_kwh,
        penalties,
    )
    reward = -(flows[3] * price) + penalty
    return reward, penalty


class BatteryEnv:
    """Mutable episode cursor over a series: reset to a day, step hour by hour.

    The observation returned after the final hour of the series wraps to the
    series start, so bootstrap targets are always defined. A single instance
    is not thread-safe; independent instances are.
    """

    def __init__(
        self,
        series: HourlySeries,
        spec: BatterySpec | None = None,
        tariff: TariffSchedule | None = None,
        penalties: PenaltyTable | None = None,
        steps_per_episode: int = 24,
    ) -> None:
        if steps_per_episode <= 0:
            raise ValueError("steps_per_episode must be > 0")
        self.series = series
        self.spec = spec if spec is not None else BatterySpec()
        self.tariff = tariff if tariff is not None else default_tariff()
        self.penalties = penalties if penalties is not None else PenaltyTable()
        self.steps_per_episode = steps_per_episode
        self._cursor = 0
        self._steps_taken = 0
        self._battery = BatteryState(energy_kwh=0.0)

    @property
    def battery(self) -> BatteryState:
        return self._battery

    def _observation_at(self, position: int) -> EnvObservation:
        record = self.series[position % len(self.series)]
        return EnvObservation(
            hour_of_day=record.hour_of_day,
            soc_level=soc_bin(self.spec, self._battery.energy_kwh),
            load_kwh=record.load_kwh,
            pv_kwh=record.pv_kwh,
            wind_kwh=record.wind_kwh,
        )

    def reset(self, day_index: int, initial_soc_level: int) -> EnvObservation:
        """Position the cursor at hour 0 of a day with a discrete charge level."""
        if not 0 <= day_index < self.series.n_days:
            raise ValueError(
                f"day_index must be in 0..{self.series.n_days - 1}, got {day_index}"
            )
        self._battery = BatteryState(
            energy_kwh=soc_level_energy(self.spec, initial_soc_level)
        )
        self._cursor = day_index * 24
        self._steps_taken = 0
        return self._observation_at(self._cursor)

    def step(
        self, action: Action, charge_cap_kwh: float | None = None
    ) -> tuple[StepOutcome, EnvObservation]:
        """Apply an action to the current hour and advance the cursor."""
        if self._steps_taken >= self.steps_per_episode:
            raise EpisodeHorizonError(
                f"episode horizon of {self.steps_per_episode} steps exhausted"
            )
        record = self.series[self._cursor % len(self.series)]
        before = self._battery
        flows = apply_action(self.spec, before, record, action, charge_cap_kwh)
        tier = self.tariff.tier_of(record.hour_of_day)
        penalty = _penalty_value(
            int(action),
            _TIER_CODE[tier],
            before.energy_kwh,
            self.spec.capacity_kwh,
            self.spec.soc_min_kwh,
            self.penalties,
        )
        cost = flows.grid_import_kwh * record.price_per_kwh
        outcome = StepOutcome(
            reward=-cost + penalty,
            grid_import_kwh=flows.grid_import_kwh,
            cost=cost,
            battery_delta_kwh=flows.next_battery.energy_kwh - before.energy_kwh,
            curtailed_kwh=flows.curtailed_kwh,
            next_battery=flows.next_battery,
            penalty_applied=penalty,
        )
        self._battery = flows.next_battery
        self._cursor += 1
        self._steps_taken += 1
        return outcome, self._observation_at(self._cursor)
