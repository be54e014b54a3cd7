"""Controller evaluation: full-series rollouts, the import/cost/peak metrics,
controller comparisons, the exact finite-horizon oracle, and the state-space
ablation harness."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .agent import Hyperparams, QTable, greedy_action, train
from .baselines import BaselineKind, baseline_decision
from .battery import (
    Action,
    BatteryEnv,
    BatterySpec,
    BatteryState,
    EnvObservation,
    PenaltyTable,
    _TIER_CODE,
    _flow_tuple,
    _penalty_value,
    apply_action,
)
from .encoding import EncodingKind, StateEncoder, soc_bin, soc_level_energy
from .ioutil import atomic_write_text
from .timeseries import HourlyRecord, HourlySeries, TariffSchedule

# A controller maps (record, battery state) to (action, optional charge cap).
Controller = Callable[[HourlyRecord, BatteryState], "tuple[Action, float | None]"]

PENALTY_MODES = ("shaped", "cost-only")


@dataclass(frozen=True)
class TraceRow:
    hour_index: int
    action: Action
    grid_import_kwh: float
    cost: float
    soc_after: float


@dataclass(frozen=True)
class MonthlyAggregate:
    month: int
    import_kwh: float
    cost: float
    peak_import_kwh: float


@dataclass(frozen=True)
class EvalReport:
    """Per-hour trace plus aggregates for one controller on one series."""

    label: str
    trace: tuple[TraceRow, ...]
    total_import_kwh: float
    total_cost: float
    monthly: tuple[MonthlyAggregate, ...]

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "total_import_kwh": self.total_import_kwh,
            "total_cost": self.total_cost,
            "monthly": [
                {
                    "month": m.month,
                    "import_kwh": m.import_kwh,
                    "cost": m.cost,
                    "peak_import_kwh": m.peak_import_kwh,
                }
                for m in self.monthly
            ],
        }

    def write_json(self, path: str | Path) -> None:
        atomic_write_text(
            path, json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"
        )

    def write_csv(self, path: str | Path) -> None:
        lines = ["hour_index,action,grid_import_kwh,cost,soc_after"]
        for row in self.trace:
            lines.append(
                f"{row.hour_index},{row.action.name.lower()},"
                f"{row.grid_import_kwh!r},{row.cost!r},{row.soc_after!r}"
            )
        atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class ComparisonReport:
    """Relative reductions of a candidate controller against a base one.

    A reduction is None (null in JSON) when the base total is zero and the
    percentage is undefined.
    """

    base_label: str
    candidate_label: str
    import_reduction_pct: float | None
    cost_reduction_pct: float | None
    peak_reduction_pct: float | None

    def to_json_dict(self) -> dict:
        return {
            "base": self.base_label,
            "candidate": self.candidate_label,
            "import_reduction_pct": self.import_reduction_pct,
            "cost_reduction_pct": self.cost_reduction_pct,
            "peak_reduction_pct": self.peak_reduction_pct,
        }


def no_battery_controller() -> Controller:
    return lambda record, battery: (Action.IDLE, None)


def baseline_controller(
    kind: BaselineKind, spec: BatterySpec, tariff: TariffSchedule
) -> Controller:
    """Wrap a rule-based policy as a rollout controller."""

    def decide(record: HourlyRecord, battery: BatteryState):
        return baseline_decision(kind, record, battery, spec, tariff)

    return decide


def qtable_controller(q: QTable, spec: BatterySpec) -> Controller:
    """Greedy policy of a trained table as a rollout controller."""
    if q.encoder.soc_levels != spec.soc_levels:
        raise ValueError(
            "q-table charge levels do not match the battery spec "
            f"({q.encoder.soc_levels} vs {spec.soc_levels})"
        )
    encoder = q.encoder

    def decide(record: HourlyRecord, battery: BatteryState):
        observation = EnvObservation(
            hour_of_day=record.hour_of_day,
            soc_level=soc_bin(spec, battery.energy_kwh),
            load_kwh=record.load_kwh,
            pv_kwh=record.pv_kwh,
            wind_kwh=record.wind_kwh,
        )
        return greedy_action(q, encoder.encode(observation)), None

    return decide


def _resolve_penalties(penalty_mode: str, penalties: PenaltyTable | None) -> PenaltyTable:
    if penalty_mode not in PENALTY_MODES:
        raise ValueError(f"penalty_mode must be one of {PENALTY_MODES}, got {penalty_mode!r}")
    if penalty_mode == "cost-only":
        return PenaltyTable.zero()
    return penalties if penalties is not None else PenaltyTable()


def rollout(
    controller: Controller,
    series: HourlySeries | Sequence[HourlyRecord],
    spec: BatterySpec,
    tariff: TariffSchedule,
    initial_soc_level: int = 1,
    penalty_mode: str = "cost-only",
    penalties: PenaltyTable | None = None,
    label: str = "controller",
) -> EvalReport:
    """Deterministic sequential pass over every hour of the series.

    Battery state carries across day boundaries. Totals and monthly
    aggregates are exact sums/maxima over the trace.
    """
    records: Iterable[HourlyRecord] = (
        series.records if isinstance(series, HourlySeries) else series
    )
    _resolve_penalties(penalty_mode, penalties)  # validates the mode
    battery = BatteryState(energy_kwh=soc_level_energy(spec, initial_soc_level))
    trace: list[TraceRow] = []
    total_import = 0.0
    total_cost = 0.0
    monthly_import: dict[int, float] = {}
    monthly_cost: dict[int, float] = {}
    monthly_peak: dict[int, float] = {}
    for record in records:
        action, cap = controller(record, battery)
        flows = apply_action(spec, battery, record, action, cap)
        cost = flows.grid_import_kwh * record.price_per_kwh
        battery = flows.next_battery
        trace.append(
            TraceRow(
                hour_index=record.hour_index,
                action=action,
                grid_import_kwh=flows.grid_import_kwh,
                cost=cost,
                soc_after=battery.energy_kwh,
            )
        )
        total_import += flows.grid_import_kwh
        total_cost += cost
        m = record.month
        monthly_import[m] = monthly_import.get(m, 0.0) + flows.grid_import_kwh
        monthly_cost[m] = monthly_cost.get(m, 0.0) + cost
        if flows.grid_import_kwh > monthly_peak.get(m, 0.0):
            monthly_peak[m] = flows.grid_import_kwh
        else:
            monthly_peak.setdefault(m, 0.0)
    monthly = tuple(
        MonthlyAggregate(
            month=m,
            import_kwh=monthly_import[m],
            cost=monthly_cost[m],
            peak_import_kwh=monthly_peak[m],
        )
        for m in sorted(monthly_import)
    )
    return EvalReport(
        label=label,
        trace=tuple(trace),
        total_import_kwh=total_import,
        total_cost=total_cost,
        monthly=monthly,
    )


def day_return(
    controller: Controller,
    day: Sequence[HourlyRecord],
    spec: BatterySpec,
    tariff: TariffSchedule,
    initial_soc_level: int,
    penalty_mode: str = "shaped",
    penalties: PenaltyTable | None = None,
    discount: float | None = None,
) -> float:
    """Episode return of a controller over one day, under the same reward the
    oracle scores (shaped or cost-only, optionally discounted)."""
    table = _resolve_penalties(penalty_mode, penalties)
    battery = BatteryState(energy_kwh=soc_level_energy(spec, initial_soc_level))
    total = 0.0
    weight = 1.0
    for record in day:
        action, cap = controller(record, battery)
        flows = apply_action(spec, battery, record, action, cap)
        penalty = _penalty_value(
            int(action),
            _TIER_CODE[tariff.tier_of(record.hour_of_day)],
            battery.energy_kwh,
            spec.capacity_kwh,
            spec.soc_min_kwh,
            table,
        )
        reward = -(flows.grid_import_kwh * record.price_per_kwh) + penalty
        total += weight * reward
        if discount is not None:
            weight *= discount
        battery = flows.next_battery
    return total


def compare(base: EvalReport, candidate: EvalReport) -> ComparisonReport:
    """Relative import/cost/peak reductions of candidate vs base.

    Peak reduction is the mean over months of the relative reduction in the
    month's maximum hourly import, taken over months whose base peak is
    nonzero.
    """

    def reduction(base_total: float, cand_total: float) -> float | None:
        if base_total == 0:
            return None
        return (base_total - cand_total) / base_total * 100.0

    base_peaks = {m.month: m.peak_import_kwh for m in base.monthly}
    cand_peaks = {m.month: m.peak_import_kwh for m in candidate.monthly}
    shared = sorted(set(base_peaks) & set(cand_peaks))
    ratios = [
        (base_peaks[m] - cand_peaks[m]) / base_peaks[m]
        for m in shared
        if base_peaks[m] != 0
    ]
    peak = sum(ratios) / len(ratios) * 100.0 if ratios else None
    return ComparisonReport(
        base_label=base.label,
        candidate_label=candidate.label,
        import_reduction_pct=reduction(base.total_import_kwh, candidate.total_import_kwh),
        cost_reduction_pct=reduction(base.total_cost, candidate.total_cost),
        peak_reduction_pct=peak,
    )


def dp_oracle(
    day: Sequence[HourlyRecord],
    spec: BatterySpec,
    tariff: TariffSchedule,
    initial_soc_level: int,
    penalty_mode: str = "shaped",
    penalties: PenaltyTable | None = None,
    discount: float | None = None,
) -> tuple[float, list[Action]]:
    """Exact backward induction over the day's (hour, charge level) lattice.

    States take the discrete levels' energies (the same lattice env resets
    to); transitions and rewards use the exact dispatch physics, with the
    continuous next energy re-binned to a level. Returns the maximal episode
    return (undiscounted unless a discount is given) and one optimal action
    sequence, ties broken by action order.
    """
    table = _resolve_penalties(penalty_mode, penalties)
    levels = spec.soc_levels
    horizon = len(day)
    if horizon == 0:
        raise ValueError("day must contain at least one record")
    cap = spec.capacity_kwh
    soc_min = spec.soc_min_kwh
    crate = spec.charge_rate_kw * 1.0
    drate = spec.discharge_rate_kw * 1.0
    gamma = 1.0 if discount is None else discount

    energies = [soc_level_energy(spec, level) for level in range(levels)]
    # value[level] holds V_{h+1}; reward/transition tables are rebuilt per hour
    value = [0.0] * levels
    best_action: list[list[int]] = []
    for h in range(horizon - 1, -1, -1):
        record = day[h]
        tier = _TIER_CODE[tariff.tier_of(record.hour_of_day)]
        load = record.load_kwh
        renewables = record.renewables_kwh
        price = record.price_per_kwh
        new_value = [0.0] * levels
        actions_here = [0] * levels
        for level in range(levels):
            energy = energies[level]
            best_value = None
            best = 0
            for action in range(3):
                flows = _flow_tuple(
                    cap, soc_min, crate, drate, energy, load, renewables, action, None
                )
                penalty = _penalty_value(action, tier, energy, cap, soc_min, table)
                reward = -(flows[3] * price) + penalty
                next_level = soc_bin(spec, flows[5])
                candidate = reward + gamma * value[next_level]
                if best_value is None or candidate > best_value:
                    best_value = candidate
                    best = action
            new_value[level] = best_value
            actions_here[level] = best
        value = new_value
        best_action.append(actions_here)
    best_action.reverse()

    optimal_return = value[initial_soc_level]
    actions: list[Action] = []
    level = initial_soc_level
    for h in range(horizon):
        record = day[h]
        action = best_action[h][level]
        actions.append(Action(action))
        flows = _flow_tuple(
            cap,
            soc_min,
            crate,
            drate,
            energies[level],
            record.load_kwh,
            record.renewables_kwh,
            action,
            None,
        )
        level = soc_bin(spec, flows[5])
    return optimal_return, actions


def ablation_run(
    series: HourlySeries,
    spec: BatterySpec,
    tariff: TariffSchedule,
    encodings: Sequence[EncodingKind],
    hyperparams: Hyperparams,
    penalties: PenaltyTable | None = None,
    encoder_factory: Callable[[EncodingKind], StateEncoder] | None = None,
    initial_soc_level: int = 1,
) -> list[ComparisonReport]:
    """Train one agent per state-space design with identical seeds and report
    each one's import/cost/peak reductions against the no-battery rollout."""
    if encoder_factory is None:
        encoder_factory = lambda kind: StateEncoder.for_series(kind, series, spec)
    base = rollout(
        no_battery_controller(),
        series,
        spec,
        tariff,
        initial_soc_level=initial_soc_level,
        label="baseline:no-battery",
    )
    rows = []
    for kind in encodings:
        encoder = encoder_factory(kind)
        env = BatteryEnv(series, spec, tariff, penalties)
        table, _ = train(env, hyperparams, encoder)
        report = rollout(
            qtable_controller(table, spec),
            series,
            spec,
            tariff,
            initial_soc_level=initial_soc_level,
            label=f"qlearning:{kind.value}",
        )
        rows.append(compare(base, report))
    return rows
