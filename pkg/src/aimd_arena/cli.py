"""``aimd-arena``: run experiments described by a JSON config file.

Usage::

    aimd-arena <command> --config experiment.json [--out result.csv]
    aimd-arena sweep --config experiment.json [--out sweep.csv]

Exit codes: 0 success, 1 invalid config or input, 2 model inconsistency.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import export
from .dynamics import StrategyProfile, average_throughput, fixed_point, simulate
from .errors import ModelInconsistencyError, ValidationError
from .game import (
    GameConfig,
    Strategy,
    classify_equilibrium,
    dominance_threshold,
    lambda_bounds,
    payoff_matrix,
)
from .network import (
    NetworkTopology,
    build_topology,
    check_stability,
    compute_load_matrix,
    klimov,
    reentrant,
    single_server,
)
from .replicator import ReplicatorConfig, integrate

COMMANDS = ("simulate", "fixed-point", "stability", "payoff-matrix", "equilibrium", "dominance", "replicator")

_REQUIRED = {
    "simulate": {"topology", "strategies", "simulation"},
    "fixed-point": {"topology", "strategies"},
    "stability": {"topology", "rates"},
    "payoff-matrix": {"strategies", "capacity", "lambda"},
    "equilibrium": {"strategies", "capacity", "lambda"},
    "dominance": {"strategies", "capacity"},
    "replicator": {"strategies", "capacity", "lambda", "replicator"},
}
_OPTIONAL = {"command", "output_path", "seed"}
_EXTRA = {"dominance": {"opponents"}, "equilibrium": {"sweep"}, "replicator": {"sweep"}}
_SWEEPABLE = {"equilibrium": ("lambda",), "replicator": ("lambda", "tau")}

_TOPOLOGY_KEYS = {
    "single_server": ({"kind", "capacity", "users"}, set()),
    "klimov": ({"kind", "capacities"}, set()),
    "reentrant": ({"kind", "capacities", "users"}, set()),
    "explicit": (
        {"kind", "num_nodes", "num_links", "num_users", "constituency", "capacities", "routing", "input"},
        set(),
    ),
}


class ConfigError(ValidationError):
    pass


def _keys(obj, where: str, required: set, optional: set = frozenset()) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object", where or "config")
    prefix = f"{where}." if where else ""
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"unknown field '{prefix}{key}'", prefix + key)
    for key in sorted(required):
        if key not in obj:
            raise ConfigError(f"missing field '{prefix}{key}'", prefix + key)
    return obj


def _number(obj: dict, key: str, where: str, integer: bool = False):
    value = obj[key]
    name = f"{where}.{key}" if where else key
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"'{name}' must be a finite number", name)
    if integer and int(value) != value:
        raise ConfigError(f"'{name}' must be an integer", name)
    return int(value) if integer else float(value)


def _vector(obj: dict, key: str, where: str) -> list[float]:
    value = obj[key]
    name = f"{where}.{key}" if where else key
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"'{name}' must be a list of numbers", name)
    return [float(v) for v in value]


def _relabel(exc: ValidationError, where: str) -> ConfigError:
    field = f"{where}.{exc.field}" if exc.field else where
    return ConfigError(f"'{field}': {exc}", field)


def parse_topology(block) -> NetworkTopology:
    """Build a topology from its config block."""
    if not isinstance(block, dict) or block.get("kind") not in _TOPOLOGY_KEYS:
        raise ConfigError(
            f"'topology.kind' must be one of {sorted(_TOPOLOGY_KEYS)}", "topology.kind"
        )
    kind = block["kind"]
    required, optional = _TOPOLOGY_KEYS[kind]
    _keys(block, "topology", required, optional)
    try:
        if kind == "single_server":
            return single_server(
                _number(block, "capacity", "topology"), _number(block, "users", "topology", integer=True)
            )
        if kind == "klimov":
            return klimov(_vector(block, "capacities", "topology"))
        if kind == "reentrant":
            caps = _vector(block, "capacities", "topology")
            if len(caps) != 3:
                raise ConfigError("'topology.capacities' needs exactly 3 entries", "topology.capacities")
            return reentrant(*caps, _number(block, "users", "topology", integer=True))
        return build_topology(
            _number(block, "num_nodes", "topology", integer=True),
            _number(block, "num_links", "topology", integer=True),
            _number(block, "num_users", "topology", integer=True),
            block["constituency"],
            block["capacities"],
            block["routing"],
            block["input"],
        )
    except ConfigError:
        raise
    except (ValidationError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise _relabel(exc, "topology") from exc
        raise ConfigError(f"'topology': {exc}", "topology") from exc


def topology_to_config(topology: NetworkTopology) -> dict:
    """Explicit-matrix config block describing ``topology``."""
    return {
        "kind": "explicit",
        "num_nodes": topology.num_nodes,
        "num_links": topology.num_links,
        "num_users": topology.num_users,
        "constituency": topology.constituency.tolist(),
        "capacities": topology.capacities.tolist(),
        "routing": topology.routing.tolist(),
        "input": topology.input.tolist(),
    }


def parse_strategies(items) -> tuple[Strategy, ...]:
    if not isinstance(items, list) or not items:
        raise ConfigError("'strategies' must be a non-empty list", "strategies")
    out = []
    for k, item in enumerate(items):
        where = f"strategies[{k}]"
        _keys(item, where, {"alpha", "beta"}, {"label"})
        label = item.get("label", f"s{k + 1}")
        if not isinstance(label, str):
            raise ConfigError(f"'{where}.label' must be a string", f"{where}.label")
        try:
            out.append(Strategy(_number(item, "alpha", where), _number(item, "beta", where), label))
        except ConfigError:
            raise
        except ValidationError as exc:
            raise _relabel(exc, where) from exc
    return tuple(out)


def _capacity_lambda(cfg: dict) -> tuple[float, float]:
    capacity = _number(cfg, "capacity", "")
    if capacity <= 0:
        raise ConfigError("'capacity' must be positive", "capacity")
    lam = _number(cfg, "lambda", "") if "lambda" in cfg else 0.0
    if lam < 0:
        raise ConfigError("'lambda' must be nonnegative", "lambda")
    return capacity, lam


def _profile(strategies) -> StrategyProfile:
    return StrategyProfile([s.alpha for s in strategies], [s.beta for s in strategies])


def _two(strategies):
    if len(strategies) != 2:
        raise ConfigError("this command needs exactly 2 strategies", "strategies")
    return strategies


def _game(strategies, capacity, lam) -> GameConfig:
    try:
        return GameConfig(strategies, capacity, lam)
    except ValidationError as exc:
        raise ConfigError(str(exc), exc.field or "strategies") from exc


def _replicator_config(cfg: dict, strategies, capacity, lam, delay=None) -> ReplicatorConfig:
    block = _keys(cfg["replicator"], "replicator", {"gain", "delay", "mode", "horizon"}, {"initial_shares", "step"})
    n = len(strategies)
    shares = _vector(block, "initial_shares", "replicator") if "initial_shares" in block else [1.0 / n] * n
    if "initial_shares" not in block:
        shares[-1] = 1.0 - sum(shares[:-1])
    step = _number(block, "step", "replicator") if "step" in block else None
    try:
        return ReplicatorConfig(
            strategies=strategies,
            capacity=capacity,
            lam=lam,
            gain=_number(block, "gain", "replicator"),
            delay=_number(block, "delay", "replicator") if delay is None else delay,
            mode=block["mode"],
            initial_shares=tuple(shares),
            horizon=_number(block, "horizon", "replicator"),
            step=step,
        )
    except ConfigError:
        raise
    except ValidationError as exc:
        where = "replicator" if exc.field not in ("strategies", "capacity", "lambda") else ""
        raise (_relabel(exc, where) if where else ConfigError(str(exc), exc.field)) from exc


# -- commands ----------------------------------------------------------------


def _cmd_simulate(cfg):
    topology = parse_topology(cfg["topology"])
    strategies = parse_strategies(cfg["strategies"])
    block = _keys(cfg["simulation"], "simulation", set(), {"initial_rates", "max_drops", "max_time"})
    if "max_drops" not in block and "max_time" not in block:
        raise ConfigError("'simulation' needs max_drops or max_time", "simulation.max_drops")
    x0 = _vector(block, "initial_rates", "simulation") if "initial_rates" in block else [0.0] * len(strategies)
    max_drops = _number(block, "max_drops", "simulation", integer=True) if "max_drops" in block else None
    max_time = _number(block, "max_time", "simulation") if "max_time" in block else None
    trajectory = simulate(topology, _profile(strategies), x0, max_time=max_time, max_drops=max_drops)
    lines = [f"drops={len(trajectory.events)} horizon={_num(trajectory.horizon)}"]
    if trajectory.events:
        last = trajectory.events[-1]
        lines.append(f"last drop t={_num(last.time)} peak={_vec(last.pre_rates)}")
    if len(trajectory.events) >= 2:
        lines.append(f"last interval={_num(trajectory.intervals[-1])}")
    return "\n".join(lines), export.trajectory_csv(trajectory)


def _cmd_fixed_point(cfg):
    topology = parse_topology(cfg["topology"])
    strategies = parse_strategies(cfg["strategies"])
    profile = _profile(strategies)
    fp = fixed_point(topology, profile)
    thp = average_throughput(fp, profile)
    summary = f"T={_num(fp.period)}\nx*={_vec(fp.peak_rates)}\nthroughput={_vec(thp)}\nbinding_rows={sorted(fp.binding_rows)}"
    rows = zip(range(profile.size), profile.gamma, fp.peak_rates, thp)
    return summary, export.to_csv(("user_index", "gamma", "peak_rate", "throughput"), rows)


def _cmd_stability(cfg):
    topology = parse_topology(cfg["topology"])
    rates = _vector(cfg, "rates", "")
    try:
        report = check_stability(compute_load_matrix(topology), rates)
    except ValidationError as exc:
        raise ConfigError(str(exc), "rates") from exc
    summary = f"stable={str(report.stable).lower()}\nutilizations={_vec(report.utilizations)}\nbinding_rows={sorted(report.binding_rows)}"
    rows = ((j, u, j in report.binding_rows) for j, u in enumerate(report.utilizations))
    return summary, export.to_csv(("row", "utilization", "binding"), rows)


def _cmd_payoff_matrix(cfg):
    strategies = parse_strategies(cfg["strategies"])
    capacity, lam = _capacity_lambda(cfg)
    matrix = payoff_matrix(_game(strategies, capacity, lam))
    summary = "\n".join(" ".join(f"{v: .6f}" for v in row) for row in matrix)
    return summary, export.payoff_matrix_csv(matrix)


def _cmd_equilibrium(cfg):
    s1, s2 = _two(parse_strategies(cfg["strategies"]))
    capacity, lam = _capacity_lambda(cfg)
    _game((s1, s2), capacity, lam)
    bounds = lambda_bounds(s1, s2, capacity)
    result = classify_equilibrium(s1, s2, capacity, lam)
    lines = [f"regime={result.regime}"]
    if result.mixing_probability is not None:
        lines.append(f"p={_num(result.mixing_probability)}")
    lines.append(f"lambda_interval=({_num(bounds.lo)}, {_num(bounds.hi)}) mixed_regime={bounds.regime or 'none'}")
    lines.append(f"ess={','.join(str(e).lower() for e in result.ess)}")
    return "\n".join(lines), export.lambda_bounds_csv(bounds, s1, s2, capacity)


def _cmd_dominance(cfg):
    strategies = parse_strategies(cfg["strategies"])
    capacity, _ = _capacity_lambda(cfg)
    opponents = None
    if "opponents" in cfg:
        if not isinstance(cfg["opponents"], list):
            raise ConfigError("'opponents' must be a list of strategy lists", "opponents")
        opponents = [parse_strategies(p) for p in cfg["opponents"]]
    try:
        threshold = dominance_threshold(_game(strategies, capacity, 0.0), opponents)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(str(exc), exc.field or "strategies") from exc
    return f"lambda_star={_num(threshold)}", export.to_csv(("lambda_star",), [(threshold,)])


def _cmd_replicator(cfg):
    strategies = parse_strategies(cfg["strategies"])
    capacity, lam = _capacity_lambda(cfg)
    trajectory = integrate(_replicator_config(cfg, strategies, capacity, lam))
    summary = f"outcome={trajectory.outcome}\nfinal_shares={_vec(trajectory.final)}\nt={_num(trajectory.times[-1])}"
    return summary, export.shares_csv(trajectory)


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fixed-point": _cmd_fixed_point,
    "stability": _cmd_stability,
    "payoff-matrix": _cmd_payoff_matrix,
    "equilibrium": _cmd_equilibrium,
    "dominance": _cmd_dominance,
    "replicator": _cmd_replicator,
}


def _num(value) -> str:
    return repr(float(value))


def _vec(values) -> str:
    return "(" + ", ".join(_num(v) for v in values) + ")"


def _load(config_path) -> dict:
    try:
        text = Path(config_path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "config") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}", "config") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", "config")
    return cfg


def _validate(cfg: dict, command: str, sweeping: bool = False) -> None:
    if command not in _REQUIRED:
        raise ConfigError(f"'command' must be one of {list(COMMANDS)}", "command")
    optional = _OPTIONAL | _EXTRA.get(command, set())
    if not sweeping:
        optional = optional - {"sweep"}
    _keys(cfg, "", _REQUIRED[command], optional)
    if "seed" in cfg and (isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int)):
        raise ConfigError("'seed' must be an integer", "seed")
    if "output_path" in cfg and not isinstance(cfg["output_path"], str):
        raise ConfigError("'output_path' must be a string", "output_path")


def _write(text: str, path) -> None:
    if path:
        Path(path).write_text(text)


def _execute(fn, out=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        summary, csv_text, path = fn()
    except ValidationError as exc:
        field = f" [{exc.field}]" if exc.field else ""
        print(f"error{field}: {exc}", file=sys.stderr)
        return 1
    except ModelInconsistencyError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 2
    _write(csv_text, out or path)
    print(summary, file=stdout)
    return 0


def run(config_path, command: str | None = None, out=None, stdout=None) -> int:
    """Execute one config; ``command`` overrides nothing but must agree with the file."""

    def job():
        cfg = _load(config_path)
        name = cfg.get("command", command)
        if command is not None and name != command:
            raise ConfigError(f"'command' in config is {name!r} but {command!r} was requested", "command")
        _validate(cfg, name)
        summary, csv_text = _HANDLERS[name](cfg)
        return summary, csv_text, cfg.get("output_path")

    return _execute(job, out, stdout)


def _sweep_grid(block) -> tuple[str, np.ndarray]:
    _keys(block, "sweep", {"parameter", "from", "to", "count"})
    start = _number(block, "from", "sweep")
    stop = _number(block, "to", "sweep")
    count = _number(block, "count", "sweep", integer=True)
    if count < 1 or stop < start:
        raise ConfigError("sweep range is empty", "sweep")
    if count == 1 and stop != start:
        raise ConfigError("a single-point sweep needs from == to", "sweep.count")
    return block["parameter"], np.linspace(start, stop, count)


def sweep(config_path, out=None, stdout=None) -> int:
    """Run the config's base command once per grid point of its ``sweep`` block."""

    def job():
        cfg = _load(config_path)
        name = cfg.get("command")
        if name not in _REQUIRED:
            raise ConfigError(f"'command' must be one of {list(COMMANDS)}", "command")
        if "sweep" not in cfg:
            raise ConfigError("missing field 'sweep'", "sweep")
        if name not in _SWEEPABLE:
            raise ConfigError(f"command {name!r} cannot be swept", "sweep")
        _validate(cfg, name, sweeping=True)
        parameter, grid = _sweep_grid(cfg["sweep"])
        if parameter not in _SWEEPABLE[name]:
            raise ConfigError(
                f"parameter {parameter!r} is not sweepable for {name!r}; choose from {_SWEEPABLE[name]}",
                "sweep.parameter",
            )
        strategies = parse_strategies(cfg["strategies"])
        capacity, lam = _capacity_lambda(cfg)
        if parameter == "lambda" and grid[0] < 0:
            raise ConfigError("'lambda' must be nonnegative", "sweep.from")
        if name == "equilibrium":
            s1, s2 = _two(strategies)
            _game((s1, s2), capacity, 0.0)
            rows = []
            for value in grid:
                result = classify_equilibrium(s1, s2, capacity, float(value))
                rows.append((float(value), result.regime, result.mixing_probability))
            summary = _regime_summary(rows)
            return summary, export.to_csv(("lambda", "regime", "p"), rows), cfg.get("output_path")

        rows = []
        for value in grid:
            value = float(value)
            if parameter == "lambda":
                rc = _replicator_config(cfg, strategies, capacity, value)
            else:
                rc = _replicator_config(cfg, strategies, capacity, lam, delay=value)
            trajectory = integrate(rc)
            rows.append((value, trajectory.outcome, *trajectory.final))
        header = [parameter, "outcome"] + [f"share_{i + 1}" for i in range(len(strategies))]
        summary = f"{len(rows)} runs; outcomes: " + ", ".join(sorted({r[1] for r in rows}))
        return summary, export.to_csv(header, rows), cfg.get("output_path")

    return _execute(job, out, stdout)


def _regime_summary(rows) -> str:
    segments = []
    for value, regime, _ in rows:
        if not segments or segments[-1][0] != regime:
            segments.append([regime, value, value])
        else:
            segments[-1][2] = value
    return "\n".join(f"{r}: lambda in [{_num(a)}, {_num(b)}]" for r, a, b in segments)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="aimd-arena", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS + ("sweep",))
    parser.add_argument("--config", required=True, help="JSON experiment file")
    parser.add_argument("--out", help="CSV output path (overrides output_path)")
    args = parser.parse_args(argv)
    if args.command == "sweep":
        return sweep(args.config, args.out)
    return run(args.config, args.command, args.out)


if __name__ == "__main__":
    sys.exit(main())
