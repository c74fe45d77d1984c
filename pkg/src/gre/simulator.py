"""Black-box simulator client and the three-step extrapolation workflow.

A simulator is either a command template with ``{x1}..{xd}`` placeholders,
run as a child process that reports its result on standard output, or an
in-process callable.  Every completed run is appended to a JSON-lines
ledger, which makes the workflow resumable.
"""

from __future__ import annotations

import ast
import json
import math
import operator
import os
import re
import subprocess
import threading
import time
import uuid
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import Dataset, GreModel, credible_interval, fit
from .design import DesignProblem, optimize_design
from .order import OrderGrid, estimate_axiswise

__all__ = [
    "JsonValue",
    "LastLineFloat",
    "Measured",
    "Reported",
    "Predicted",
    "SimulatorSpec",
    "SimulatorError",
    "SimulatorTimeout",
    "SimResult",
    "run_simulator",
    "RunLedger",
    "WorkflowConfig",
    "WorkflowOutcome",
    "run_workflow",
    "evaluate_expression",
]

_PLACEHOLDER = re.compile(r"\{x(\d+)\}")


class SimulatorError(RuntimeError):
    def __init__(self, message: str, output: str = "", returncode: int | None = None):
        super().__init__(message)
        self.output = output
        self.returncode = returncode


class SimulatorTimeout(SimulatorError):
    pass


@dataclass(frozen=True)
class JsonValue:
    """Parse the last JSON object on stdout and take the value at a dotted path."""

    path: str = "value"


@dataclass(frozen=True)
class LastLineFloat:
    pass


@dataclass(frozen=True)
class Measured:
    pass


@dataclass(frozen=True)
class Reported:
    path: str = "cost"


@dataclass(frozen=True)
class Predicted:
    """Cost given by an arithmetic expression in ``x1..xd``."""

    expression: str


@dataclass(frozen=True)
class SimulatorSpec:
    command: str | tuple[str, ...]
    parse: JsonValue | LastLineFloat = JsonValue()
    timeout: float = 60.0
    cost_source: Measured | Reported | Predicted = Measured()

    def __post_init__(self):
        if not isinstance(self.command, str):
            object.__setattr__(self, "command", tuple(self.command))
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        names = self.placeholders()
        if not names:
            raise ValueError("command template has no {x1}..{xd} placeholders")
        found = sorted(set(names))
        if found != list(range(1, len(found) + 1)):
            raise ValueError("placeholders must be {x1}..{xd} with no gaps")
        if len(names) != len(found):
            raise ValueError("each placeholder must appear exactly once")
        if isinstance(self.parse, LastLineFloat) and isinstance(self.cost_source, Reported):
            raise ValueError("a reported cost needs JSON output")

    def placeholders(self) -> list[int]:
        parts = [self.command] if isinstance(self.command, str) else list(self.command)
        return [int(m) for p in parts for m in _PLACEHOLDER.findall(p)]

    @property
    def dim(self) -> int:
        return max(self.placeholders())

    def render(self, x) -> str | list[str]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if len(x) != self.dim:
            raise ValueError(f"simulator takes {self.dim} fidelity values, got {len(x)}")

        def sub(text):
            return _PLACEHOLDER.sub(lambda m: repr(float(x[int(m.group(1)) - 1])), text)

        if isinstance(self.command, str):
            return sub(self.command)
        return [sub(p) for p in self.command]

    @classmethod
    def from_json(cls, obj: dict) -> "SimulatorSpec":
        parse = obj.get("parse", {"kind": "json", "path": "value"})
        if isinstance(parse, str):
            parse = {"kind": parse}
        parse = LastLineFloat() if parse["kind"] in ("last-line", "last_line") else JsonValue(parse.get("path", "value"))
        cost = obj.get("cost", {"kind": "measured"})
        if isinstance(cost, str):
            cost = {"kind": cost}
        kind = cost["kind"]
        if kind == "measured":
            source = Measured()
        elif kind == "reported":
            source = Reported(cost.get("path", "cost"))
        elif kind == "predicted":
            source = Predicted(cost["expression"])
        else:
            raise ValueError(f"unknown cost source {kind!r}")
        command = obj["command"]
        return cls(command if isinstance(command, str) else tuple(command), parse,
                   float(obj.get("timeout", 60.0)), source)


@dataclass(frozen=True)
class SimResult:
    value: float
    cost: float
    wall_time: float
    output: str = ""
    attempts: int = 1


# --------------------------------------------------------------------------
# Cost expressions

_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {name: getattr(math, name) for name in ("sqrt", "exp", "log", "log2", "log10", "ceil", "floor")}
_FUNCS.update(abs=abs, min=min, max=max)
_CONSTS = {"pi": math.pi, "e": math.e}


def evaluate_expression(expression: str, x) -> float:
    """Evaluate an arithmetic expression in ``x1..xd`` without ``eval``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    names = {f"x{i + 1}": float(v) for i, v in enumerate(x)}
    names.update(_CONSTS)

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ValueError(f"unknown name {node.id!r} in cost expression")
            return names[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](walk(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and not node.keywords):
            return float(_FUNCS[node.func.id](*[walk(a) for a in node.args]))
        raise ValueError(f"unsupported syntax in cost expression: {ast.dump(node)}")

    return float(walk(ast.parse(expression, mode="eval")))


# --------------------------------------------------------------------------
# Running one simulation


def _lookup(obj, path: str):
    for key in path.split("."):
        if isinstance(obj, list):
            obj = obj[int(key)]
        else:
            obj = obj[key]
    return obj


def _last_json(text: str):
    for line in reversed(text.strip().splitlines()):
        line = line.strip()
        if line.startswith("{"):
            return json.loads(line)
    return json.loads(text)


def _parse(spec: SimulatorSpec, stdout: str):
    try:
        if isinstance(spec.parse, LastLineFloat):
            lines = stdout.strip().splitlines()
            return float(lines[-1].strip()), None
        obj = _last_json(stdout)
        value = float(_lookup(obj, spec.parse.path))
        reported = None
        if isinstance(spec.cost_source, Reported):
            reported = float(_lookup(obj, spec.cost_source.path))
        return value, reported
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise SimulatorError(f"could not parse simulator output: {exc}", stdout) from exc


def run_simulator(spec: SimulatorSpec, x, run_id: str | None = None) -> SimResult:
    """Run the simulator once at ``x``, retrying once after a nonzero exit."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise ValueError("fidelity values must be positive")
    cmd = spec.render(x)
    env = dict(os.environ)
    env["GRE_RUN_ID"] = run_id or uuid.uuid4().hex
    last = None
    for attempt in (1, 2):
        start = time.perf_counter()
        try:
            proc = subprocess.run(cmd, shell=isinstance(cmd, str), capture_output=True, text=True,
                                  timeout=spec.timeout, env=env)
        except subprocess.TimeoutExpired as exc:
            out = (exc.stdout or b"")
            out = out.decode() if isinstance(out, bytes) else out
            raise SimulatorTimeout(f"simulator exceeded {spec.timeout:g} s at x={x.tolist()}", out) from None
        wall = time.perf_counter() - start
        if proc.returncode == 0:
            value, reported = _parse(spec, proc.stdout)
            if isinstance(spec.cost_source, Predicted):
                cost = evaluate_expression(spec.cost_source.expression, x)
            elif isinstance(spec.cost_source, Reported):
                cost = reported
            else:
                cost = wall
            return SimResult(value, cost, wall, proc.stdout, attempt)
        last = proc
    raise SimulatorError(
        f"simulator exited with status {last.returncode} twice at x={x.tolist()}",
        last.stdout + last.stderr, last.returncode,
    )


def _run_callable(func: Callable, x) -> SimResult:
    start = time.perf_counter()
    out = func(np.array(x, dtype=float))
    wall = time.perf_counter() - start
    if isinstance(out, tuple):
        value, cost = out
    else:
        value, cost = out, wall
    return SimResult(float(value), float(cost), wall)


# --------------------------------------------------------------------------
# Ledger


class RunLedger:
    """Append-only JSON-lines record of completed runs.

    Each append is flushed and fsynced; a torn final line (from a crash
    mid-write) is ignored on load.
    """

    def __init__(self, path: str | os.PathLike | None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._records: list[dict] = []
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        self._records.append(json.loads(line))
                    except json.JSONDecodeError:
                        continue

    @property
    def records(self) -> list[dict]:
        with self._lock:
            return list(self._records)

    def append(self, record: dict) -> None:
        with self._lock:
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            self._records.append(record)

    def lookup(self, x) -> dict | None:
        key = tuple(float(v) for v in np.atleast_1d(x))
        with self._lock:
            for rec in self._records:
                if rec.get("exit_status", 0) == 0 and tuple(rec["x"]) == key:
                    return rec
        return None

    def summary(self) -> dict:
        out: dict = {}
        for rec in self.records:
            s = out.setdefault(rec["stage"], {"runs": 0, "cost": 0.0})
            s["runs"] += 1
            s["cost"] += rec["cost_seconds"]
        return out


# --------------------------------------------------------------------------
# Workflow


@dataclass(frozen=True)
class WorkflowConfig:
    lofi_point: tuple[float, ...]
    sweeps: tuple[tuple[float, ...], ...]
    candidates: np.ndarray
    budget: float
    grid: OrderGrid = OrderGrid()
    alpha: float = 0.05
    ledger_path: str | None = None
    candidate_costs: tuple[float, ...] | None = None
    cost_expression: str | None = None
    workers: int = 1

    def __post_init__(self):
        lofi = tuple(float(v) for v in self.lofi_point)
        object.__setattr__(self, "lofi_point", lofi)
        object.__setattr__(self, "sweeps", tuple(tuple(float(v) for v in s) for s in self.sweeps))
        C = np.asarray(self.candidates, dtype=float)
        if C.ndim == 1:
            C = C.reshape(-1, len(lofi))
        object.__setattr__(self, "candidates", C)
        if any(v <= 0 for v in lofi) or any(v <= 0 for s in self.sweeps for v in s):
            raise ValueError("lo-fi point and sweep values must be positive")
        if len(self.sweeps) != len(lofi):
            raise ValueError("one sweep per fidelity axis is required")
        if C.shape[1] != len(lofi):
            raise ValueError("candidates must have one column per fidelity axis")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if self.candidate_costs is not None and len(self.candidate_costs) != len(C):
            raise ValueError("one cost per candidate is required")

    @classmethod
    def from_json(cls, obj: dict, base: Path | None = None) -> "WorkflowConfig":
        ledger = obj.get("ledger")
        if ledger is not None and base is not None and not os.path.isabs(ledger):
            ledger = str(base / ledger)
        return cls(
            tuple(obj["lofi"]),
            tuple(tuple(s) for s in obj["sweeps"]),
            np.asarray(obj["candidates"], dtype=float),
            float(obj["budget"]),
            OrderGrid.from_json(obj.get("grid", {})),
            float(obj.get("alpha", 0.05)),
            ledger,
            tuple(obj["candidate_costs"]) if obj.get("candidate_costs") is not None else None,
            obj.get("cost_expression"),
            int(obj.get("workers", 1)),
        )


@dataclass(frozen=True)
class WorkflowOutcome:
    report: dict
    simulator_calls: int
    ledger: RunLedger = field(repr=False)


class _Runner:
    def __init__(self, simulator, ledger: RunLedger, workers: int):
        self.simulator = simulator
        self.ledger = ledger
        self.workers = max(1, workers)
        self.calls = 0
        self._lock = threading.Lock()

    def _one(self, x, stage):
        with self._lock:
            self.calls += 1
        run_id = uuid.uuid4().hex
        if callable(self.simulator) and not isinstance(self.simulator, SimulatorSpec):
            res = _run_callable(self.simulator, x)
        else:
            res = run_simulator(self.simulator, x, run_id)
        self.ledger.append({
            "x": [float(v) for v in x], "value": res.value, "cost_seconds": res.cost,
            "wall_time": res.wall_time, "stage": stage, "exit_status": 0, "run_id": run_id,
        })

    def ensure(self, points, stage):
        """Run every point not already in the ledger; return ledger records in input order."""
        todo, seen = [], set()
        for x in points:
            key = tuple(float(v) for v in x)
            if self.ledger.lookup(key) is None and key not in seen:
                todo.append(key)
                seen.add(key)
        if self.workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                for fut in [pool.submit(self._one, x, stage) for x in todo]:
                    fut.result()
        else:
            for x in todo:
                self._one(x, stage)
        return [self.ledger.lookup(x) for x in points]


def _sweep_points(lofi, sweeps):
    out = []
    for i, values in enumerate(sweeps):
        pts = []
        for v in values:
            p = list(lofi)
            p[i] = v
            pts.append(tuple(p))
        out.append(pts)
    return out


def _candidate_costs(config: WorkflowConfig, simulator, runner: _Runner):
    if config.candidate_costs is not None:
        return np.asarray(config.candidate_costs, dtype=float), "given"
    expr = config.cost_expression
    if expr is None and isinstance(simulator, SimulatorSpec) and isinstance(simulator.cost_source, Predicted):
        expr = simulator.cost_source.expression
    if expr is not None:
        return np.array([evaluate_expression(expr, x) for x in config.candidates]), "predicted"
    recs = runner.ensure([tuple(x) for x in config.candidates], "extra")
    return np.array([r["cost_seconds"] for r in recs]), "measured"


def run_workflow(simulator: SimulatorSpec | Callable, config: WorkflowConfig) -> WorkflowOutcome:
    """Pilot sweeps and order estimation, budgeted design, then extrapolation.

    Points already present in the ledger are never re-run.  Pilot cost is
    recorded but not charged against the budget.
    """
    ledger = RunLedger(config.ledger_path)
    runner = _Runner(simulator, ledger, config.workers)
    notes: list[str] = []

    # step 1: one-at-a-time sweeps from the lo-fi point
    axis_points = _sweep_points(config.lofi_point, config.sweeps)
    axis_data = []
    for pts in axis_points:
        recs = runner.ensure(pts, "pilot")
        axis_data.append(Dataset(np.array(pts), np.array([r["value"] for r in recs])))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        axes = estimate_axiswise(axis_data, config.grid, workers=config.workers)
    notes.extend(str(w.message) for w in caught)

    # step 2: design under the fitted additive bound and tensor kernel
    costs, cost_mode = _candidate_costs(config, simulator, runner)
    if cost_mode == "measured":
        notes.append("candidate costs obtained by running every candidate first (expensive)")
    problem = DesignProblem(config.candidates, costs, config.budget, axes.bound, axes.kernel)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        solution = optimize_design(problem, workers=1)

    # step 3: run the design and extrapolate
    design_pts = [tuple(float(v) for v in config.candidates[i]) for i in solution.selected]
    model = GreModel(axes.bound, axes.kernel)
    if design_pts:
        recs = runner.ensure(design_pts, "design")
        data = Dataset(np.array(design_pts), np.array([r["value"] for r in recs]))
        basis = "design"
    else:
        notes.append("WARNING: budget admits no candidate; extrapolating from pilot runs only")
        pilot = sorted({p for pts in axis_points for p in pts})
        recs = [ledger.lookup(p) for p in pilot]
        data = Dataset(np.array(pilot), np.array([r["value"] for r in recs]))
        basis = "pilot"
    post = fit(data, model)
    ci = credible_interval(post, config.alpha)

    pilot_keys = {p for pts in axis_points for p in pts}
    pilot_cost = sum(ledger.lookup(p)["cost_seconds"] for p in pilot_keys)
    design_cost = sum(ledger.lookup(p)["cost_seconds"] for p in design_pts)
    report = {
        "mean_at_zero": post.mean_at_zero,
        "sd_at_zero": post.sd_at_zero,
        "sigma2": post.sigma2,
        "interval": {"alpha": config.alpha, "lo": ci.lo, "hi": ci.hi, "degenerate": ci.degenerate},
        "extrapolated_from": basis,
        "axes": axes.to_json()["axes"],
        "bound": axes.bound.to_json(),
        "kernel": axes.kernel.to_json(),
        "design": {
            "selected": list(solution.selected),
            "points": [list(p) for p in design_pts],
            "objective": solution.objective,
            "method": solution.method.value,
            "optimal": solution.optimality_flag,
            "cost_mode": cost_mode,
            "predicted_cost": solution.total_cost,
            "budget": config.budget,
        },
        "costs": {
            "pilot": pilot_cost,
            "design_recorded": design_cost,
            "pilot_to_budget": pilot_cost / config.budget,
            "note": "pilot cost is excluded from the budget",
        },
        "ledger": ledger.summary(),
        "warnings": notes + list(solution.warnings) + list(post.flags),
    }
    return WorkflowOutcome(report, runner.calls, ledger)
