"""Scenario files: YAML parsing with positions, canonical export and presets.

A scenario has four sections:

    cluster:  servers: [{id, family, params}]
    files:    [{id, arrival_rate, n, k, placement, segments, segment_length}]
    policy:   {kind, pi, t, v, n0, l0, abort_running}   (or policies: [...] for compare)
    run:      {jobs, warmup, seed, thresholds, sigma, x, d_s, theta, ...}

Unknown keys are rejected; errors carry the line and column of the
offending node.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .core import (
    Cluster,
    CodeSpec,
    Exponential,
    FileSpec,
    Server,
    ShiftedExponential,
    Workload,
    make_service,
    uniform_access,
    validate_workload,
)
from .errors import ValidationError
from .sim import POLICY_KINDS, PolicyConfig

TWELVE_SERVER_RATES = (18.23, 24.06, 11.88, 17.06, 20.19, 23.91, 27.01, 21.39, 9.92, 24.96, 26.53, 21.80)
TWELVE_SERVER_SHIFT = 0.01


class ScenarioError(ValidationError):
    """Parse or schema error; line and column are 1-based (None when unknown)."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__([where + message])


@dataclass
class RunConfig:
    jobs: int = 10000
    warmup: int = None
    seed: int = 0
    thresholds: tuple = ()
    sigma: float = 1.0
    x: float = 1.0
    d_s: float = 0.0
    theta: float = 1.0
    margin: float = 0.05
    max_outer: int = 50
    lambda_scale: tuple = (1.0,)
    theta_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    bounds: tuple = ()
    ceiling: float = math.inf
    samples: int = 100000
    mode: str = "file"


@dataclass
class Scenario:
    workload: Workload
    policies: list
    run: RunConfig
    digest: str = ""
    pi_spec: list = field(default_factory=list)

    @property
    def policy(self) -> PolicyConfig:
        if not self.policies:
            raise ValidationError(["scenario has no policy section"])
        return self.policies[0]


RUN_KEYS = {
    "jobs": int, "warmup": int, "seed": int, "thresholds": list, "sigma": float, "x": float,
    "d_s": float, "theta": float, "margin": float, "max_outer": int, "lambda_scale": list,
    "theta_grid": list, "bounds": list, "ceiling": float, "samples": int, "mode": str,
}
FILE_KEYS = {"id", "arrival_rate", "n", "k", "placement", "segments", "segment_length"}
SERVER_KEYS = {"id", "family", "params"}
POLICY_KEYS = {"kind", "pi", "t", "v", "n0", "l0", "abort_running"}
TOP_KEYS = {"cluster", "files", "policy", "policies", "run"}


# ---------------------------------------------------------------- node helpers


def _err(node, message):
    mark = node.start_mark if node is not None else None
    if mark is None:
        return ScenarioError(message)
    return ScenarioError(message, mark.line + 1, mark.column + 1)


def _mapping(node, allowed, required, what):
    if not isinstance(node, yaml.MappingNode):
        raise _err(node, f"{what} must be a mapping")
    out = {}
    for key_node, value_node in node.value:
        key = key_node.value
        if key not in allowed:
            raise _err(key_node, f"unknown key {key!r} in {what}; allowed: {sorted(allowed)}")
        if key in out:
            raise _err(key_node, f"duplicate key {key!r} in {what}")
        out[key] = value_node
    for key in required:
        if key not in out:
            raise _err(node, f"missing key {key!r} in {what}")
    return out


def _sequence(node, what):
    if not isinstance(node, yaml.SequenceNode):
        raise _err(node, f"{what} must be a list")
    return node.value


def _scalar(node, kind, what):
    if not isinstance(node, yaml.ScalarNode):
        raise _err(node, f"{what} must be a scalar")
    text = node.value
    try:
        if kind is int:
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            if text.lower() in (".inf", "inf"):
                return math.inf
            return float(text)
        if kind is str:
            return str(text)
        if kind is bool:
            if text.lower() in ("true", "yes", "on"):
                return True
            if text.lower() in ("false", "no", "off"):
                return False
            raise ValueError
    except ValueError:
        raise _err(node, f"{what} must be {kind.__name__}, got {text!r}") from None
    raise TypeError(kind)


def _null(node) -> bool:
    return isinstance(node, yaml.ScalarNode) and node.tag.endswith(":null")


# ---------------------------------------------------------------- parsing


def _parse_cluster(node):
    top = _mapping(node, {"servers"}, ["servers"], "cluster")
    servers = []
    for item in _sequence(top["servers"], "cluster.servers"):
        s = _mapping(item, SERVER_KEYS, ["id", "family"], "server")
        sid = _scalar(s["id"], str, "server id")
        family = _scalar(s["family"], str, "server family")
        params = {}
        if "params" in s:
            pm = s["params"]
            if not isinstance(pm, yaml.MappingNode):
                raise _err(pm, "server params must be a mapping")
            for k_node, v_node in pm.value:
                params[k_node.value] = _scalar(v_node, float, f"parameter {k_node.value}")
        try:
            servers.append(Server(sid, make_service(family, params)))
        except ValidationError as exc:
            raise _err(item, "; ".join(exc.violations)) from None
    return Cluster(tuple(servers))


def _parse_files(node):
    files = []
    for item in _sequence(node, "files"):
        f = _mapping(item, FILE_KEYS, ["id", "arrival_rate", "n", "k", "placement"], "file")
        place = tuple(_scalar(p, str, "placement entry") for p in _sequence(f["placement"], "placement"))
        try:
            code = CodeSpec(_scalar(f["n"], int, "n"), _scalar(f["k"], int, "k"))
        except ValidationError as exc:
            raise _err(item, "; ".join(exc.violations)) from None
        files.append(FileSpec(
            _scalar(f["id"], str, "file id"),
            _scalar(f["arrival_rate"], float, "arrival_rate"),
            code,
            place,
            _scalar(f["segments"], int, "segments") if "segments" in f else 1,
            _scalar(f["segment_length"], float, "segment_length") if "segment_length" in f else 0.0,
        ))
    return files, node


def _parse_pi(node, workload):
    """'uniform', 'pea', 'psp' or an explicit r x m matrix."""
    if isinstance(node, yaml.ScalarNode):
        name = _scalar(node, str, "pi")
        if name not in ("uniform", "pea", "psp"):
            raise _err(node, f"pi must be 'uniform', 'pea', 'psp' or a matrix, got {name!r}")
        return name
    rows = [[_scalar(v, float, "pi entry") for v in _sequence(r, "pi row")] for r in _sequence(node, "pi")]
    arr = np.array(rows, dtype=float)
    if arr.shape != (workload.r, workload.m):
        raise _err(node, f"pi has shape {arr.shape}, expected ({workload.r}, {workload.m})")
    return arr.tolist()


def resolve_pi(spec, workload: Workload, run: RunConfig):
    if spec is None or spec == "uniform":
        return uniform_access(workload)
    if spec in ("pea", "psp"):
        from .optimizer import OptProblem, baseline_pea, baseline_psp

        problem = OptProblem(workload, theta=run.theta, margin=run.margin, mode=run.mode, d_s=run.d_s)
        return baseline_pea(problem) if spec == "pea" else baseline_psp(problem)
    return np.array(spec, dtype=float)


def _parse_policy(node, workload, run):
    p = _mapping(node, POLICY_KEYS, ["kind"], "policy")
    kind = _scalar(p["kind"], str, "policy kind")
    if kind not in POLICY_KINDS:
        raise _err(p["kind"], f"unknown policy kind {kind!r}; expected one of {list(POLICY_KINDS)}")
    spec = _parse_pi(p["pi"], workload) if "pi" in p else None
    args = {}
    for key in ("t", "v", "n0", "l0"):
        if key in p and not _null(p[key]):
            args[key] = _scalar(p[key], int, key)
    if "abort_running" in p:
        args["abort_running"] = _scalar(p["abort_running"], bool, "abort_running")
    pi = resolve_pi(spec, workload, run) if kind in ("probabilistic", "video_probabilistic") else None
    try:
        return PolicyConfig(kind, pi=pi, d_s=run.d_s, **args), spec
    except ValidationError as exc:
        raise _err(node, "; ".join(exc.violations)) from None


def _parse_run(node):
    if node is None:
        return RunConfig()
    r = _mapping(node, set(RUN_KEYS), [], "run")
    values = {}
    for key, kind in RUN_KEYS.items():
        if key not in r or _null(r[key]):
            continue
        if kind is list:
            inner = int if key == "bounds" else float
            if key == "bounds":
                values[key] = tuple(_scalar(v, str, key) for v in _sequence(r[key], key))
            else:
                values[key] = tuple(_scalar(v, inner, key) for v in _sequence(r[key], key))
        else:
            values[key] = _scalar(r[key], kind, key)
    if values.get("mode", "file") not in ("file", "video"):
        raise _err(r["mode"], "run.mode must be 'file' or 'video'")
    return RunConfig(**values)


def parse_scenario(text: str) -> Scenario:
    """Parse YAML text into a validated Scenario; raise ScenarioError with positions."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ScenarioError(f"YAML syntax: {exc.problem}", mark.line + 1, mark.column + 1) from None
        raise ScenarioError(f"YAML syntax: {exc}") from None
    if root is None:
        raise ScenarioError("empty scenario")
    top = _mapping(root, TOP_KEYS, ["cluster", "files"], "scenario")
    if "policy" in top and "policies" in top:
        raise _err(top["policies"], "give either policy or policies, not both")
    cluster = _parse_cluster(top["cluster"])
    files, files_node = _parse_files(top["files"])
    try:
        workload = validate_workload(files, cluster)
    except ValidationError as exc:
        raise _err(files_node, "; ".join(exc.violations)) from None
    run = _parse_run(top.get("run"))
    policies, specs = [], []
    nodes = []
    if "policy" in top:
        nodes = [top["policy"]]
    elif "policies" in top:
        nodes = _sequence(top["policies"], "policies")
    for pn in nodes:
        pol, spec = _parse_policy(pn, workload, run)
        policies.append(pol)
        specs.append(spec)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
    return Scenario(workload, policies, run, digest, specs)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# ---------------------------------------------------------------- export


def _num(x):
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isinf(x):
        return x
    return float(format(x, ".17g"))


def scenario_dict(sc: Scenario) -> dict:
    wl = sc.workload
    out = {
        "cluster": {"servers": [
            {"id": s.id, "family": s.service.family, "params": {k: _num(v) for k, v in s.service.params().items()}}
            for s in wl.cluster.servers
        ]},
        "files": [
            {"id": f.id, "arrival_rate": _num(f.arrival_rate), "n": int(f.code.n), "k": int(f.code.k),
             "placement": list(f.placement), "segments": int(f.segments), "segment_length": _num(f.segment_length)}
            for f in wl.files
        ],
    }
    pols = []
    for pol, spec in zip(sc.policies, sc.pi_spec):
        d = {"kind": pol.kind}
        if pol.pi is not None:
            d["pi"] = spec if isinstance(spec, str) else [[_num(v) for v in row] for row in np.asarray(pol.pi)]
        for key in ("t", "v", "n0", "l0"):
            val = getattr(pol, key)
            if val is not None:
                d[key] = int(val)
        if not pol.abort_running:
            d["abort_running"] = False
        pols.append(d)
    if len(pols) == 1:
        out["policy"] = pols[0]
    elif pols:
        out["policies"] = pols
    run = {}
    default = RunConfig()
    for key in RUN_KEYS:
        val = getattr(sc.run, key)
        if val == getattr(default, key):
            continue
        if isinstance(val, tuple):
            run[key] = [v if isinstance(v, str) else _num(v) for v in val]
        elif isinstance(val, float):
            run[key] = _num(val)
        else:
            run[key] = val
    if run:
        out["run"] = run
    return out


def export_scenario(sc: Scenario) -> str:
    """Canonical YAML that parses back to the same validated model."""
    return yaml.safe_dump(scenario_dict(sc), sort_keys=False, default_flow_style=None, width=100)


# ---------------------------------------------------------------- presets


def twelve_server_cluster(time_scale: float = 1.0) -> Cluster:
    """Twelve shifted-exponential servers with shift 10 ms and the rates in TWELVE_SERVER_RATES (1/s).

    time_scale stretches every service time by that factor.
    """
    return Cluster(tuple(
        Server(f"n{j + 1}", ShiftedExponential(TWELVE_SERVER_SHIFT * time_scale, rate / time_scale))
        for j, rate in enumerate(TWELVE_SERVER_RATES)
    ))


def homogeneous_files(cluster: Cluster, count: int, n: int, k: int, rate: float) -> Workload:
    """count files with the same (n, k) code, each on the first n servers."""
    ids = tuple(cluster.ids[:n])
    files = [FileSpec(f"f{i}", rate, CodeSpec(n, k), ids) for i in range(count)]
    return validate_workload(files, cluster)


def mds_workload(n: int, k: int, lam: float, mu: float) -> Workload:
    """One (n, k) file on n exponential servers of rate mu."""
    cluster = Cluster(tuple(Server(f"s{j}", Exponential(mu)) for j in range(n)))
    return validate_workload([FileSpec("f", lam, CodeSpec(n, k), tuple(cluster.ids))], cluster)


def twelve_server_workload(files: int = 1000, n: int = 7, k: int = 4, scale: float = 1.0, seed: int = 2017, time_scale: float = 1.0) -> Workload:
    """Twelve-server cluster, half the files at 0.002/s and half at 0.003/s (times scale), random placement.

    time_scale stretches service times and divides arrival rates by the same
    factor, so utilizations are unchanged and latencies scale linearly.
    """
    from .optimizer import random_placement_workload

    rng = np.random.default_rng(seed)
    rates = np.where(np.arange(files) < files // 2, 0.002, 0.003) * scale / time_scale
    return random_placement_workload(twelve_server_cluster(time_scale), files, CodeSpec(n, k), rates, rng)


def video_workload(files: int = 100, n: int = 10, k: int = 4, tau: float = 4.0, seed: int = 2017) -> Workload:
    """Video files with Pareto(shape 2, scale 300 s) durations rounded up to whole tau-second segments."""
    from .optimizer import random_placement_workload

    rng = np.random.default_rng(seed)
    sizes = 300.0 * (1.0 + rng.pareto(2.0, files))
    segments = np.ceil(sizes / tau).astype(int)
    rates = np.where(np.arange(files) < files // 2, 0.002, 0.003)
    return random_placement_workload(twelve_server_cluster(), files, CodeSpec(n, k), rates, rng, segments, tau)


def preset(name: str) -> Scenario:
    """Built-in scenarios: 'mm1', 'fork_join', 'twelve_server', 'video'."""
    if name == "mm1":
        wl = mds_workload(1, 1, 0.5, 1.0)
        pols = [PolicyConfig("probabilistic", pi=uniform_access(wl))]
        return Scenario(wl, pols, RunConfig(jobs=100000), "", ["uniform"])
    if name == "fork_join":
        wl = mds_workload(4, 2, 0.3, 0.5)
        return Scenario(wl, [PolicyConfig("fork_join")], RunConfig(jobs=100000), "", [None])
    if name == "twelve_server":
        wl = homogeneous_files(twelve_server_cluster(), 1, 12, 7, 5.0)
        pols = [PolicyConfig("probabilistic", pi=uniform_access(wl)), PolicyConfig("fork_join"), PolicyConfig("mds_reservation", t=1000)]
        run = RunConfig(jobs=20000, lambda_scale=(0.5, 1.0, 1.5, 2.0), thresholds=(0.5, 1.0))
        return Scenario(wl, pols, run, "", ["uniform", None, None])
    if name == "video":
        wl = video_workload()
        run = RunConfig(jobs=20000, d_s=4.0, x=10.0, mode="video")
        pol = PolicyConfig("video_probabilistic", pi=resolve_pi("pea", wl, run), d_s=4.0)
        return Scenario(wl, [pol], run, "", ["pea"])
    raise ValidationError([f"unknown preset {name!r}; expected mm1, fork_join, twelve_server or video"])
