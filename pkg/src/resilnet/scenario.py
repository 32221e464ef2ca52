"""Scenario files: loading (TOML or JSON), defaults, validation and generators."""

from __future__ import annotations

import copy
import fnmatch
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path as FsPath
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .actuation import ShieldLimits
from .attacks import AttackSpec, CoordinatedAttack, validate_targets
from .decision import ControllerEnsemble, ControllerSpec, DETECTOR_KINDS
from .errors import ConfigError, ResilnetError
from .network import TRAFFIC_CLASSES, Flow, Topology, build_topology
from .reliability import FailureModel, ThresholdParams

STREAM_ROLES = {"iot_device": "iot", "gnb": "gnb", "mec_server": "mec"}

DEFAULTS: dict[str, Any] = {
    "run": {"duration": 5000.0, "tick": 0.1, "warm_up": 100.0, "runs": 20, "seed": 1},
    "slices": {"urllc": 0.01, "telemetry": 0.0, "video": 0.0},
    "traffic": {"video_on_min": 5.0, "video_on_max": 20.0, "video_off_min": 5.0, "video_off_max": 20.0},
    "telemetry": {
        "replicas": 3,
        "noise": 0.02,
        "ranges": {"iot": [0.0, 5e6], "gnb": [0.0, 60e6], "mec": [0.0, 20e6]},
    },
    "perception": {"window": 100, "refresh": 10},
    "detectors": [
        {"id": "ewma_zscore", "kind": "ewma_zscore", "z0": 8.0},
        {"id": "rate_change", "kind": "rate_change", "z0": 12.0},
    ],
    "static_detector": {"id": "static_threshold", "z": 6.0, "poll_interval": 60.0},
    "retrain_interval": 60.0,
    "ensemble": {
        "members": [
            {"id": "ctrl_0", "kind": "shortest_path"},
            {"id": "ctrl_1", "kind": "shortest_path"},
            {"id": "ctrl_2", "kind": "max_disjoint"},
            {"id": "ctrl_3", "kind": "slice_protection"},
            {"id": "ctrl_4", "kind": "conservative"},
        ],
        "headroom": {"urllc": 2.0, "telemetry": 1.25, "video": 1.25},
        "urllc_paths": 2,
        "suspect_hold": 30.0,
    },
    "thresholds": {"r_min": 0.9999, "r_req": 0.85, "alpha": 0.1, "delta": 0.0005,
                   "alpha_sign": -1, "resilience_window": 200},
    "failure": {"lambda_hw": 0.0, "lambda_ai": 1e-5, "lambda_phy": 2e-5},
    "shields": {"u_max": 0.9, "min_disjoint_paths": 2, "delta_max": 0.3},
    "rate_limiter": {"lambda_max": 5, "window": 60.0},
    "slo": {"latency_ms": 100.0, "plr": 0.05, "consecutive": 30, "probation_ticks": 50},
    "metrics": {
        "ri_weights": [1 / 3, 1 / 3, 1 / 3],
        "ri_window": 300,
        "ri_recovery_window": 3000,
        "recovered_level": 0.98,
        "recovered_ticks": 100,
        "failure_level": 0.2,
        "failure_ticks": 50,
    },
    "attacks": [],
}


def _merge(base: Any, over: Any) -> Any:
    if isinstance(base, dict) and isinstance(over, dict):
        out = dict(base)
        for k, v in over.items():
            out[k] = _merge(base[k], v) if k in base else copy.deepcopy(v)
        return out
    return copy.deepcopy(over)


def reference_topology(params: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Nodes and links for the reference edge deployment.

    IoT devices attach to two neighbouring gNBs; each gNB feeds one MEC server
    and one core router; every MEC and edge controller attaches to both cores.
    """
    p = {"n_iot": 50, "n_gnb": 5, "n_mec": 5, "n_core": 2, "n_edge": 3,
         "radio_capacity": 10e6, "access_capacity": 20e6, "core_capacity": 100e6,
         "buffer": 200, "radio_delay": 0.002, "wired_delay": 0.001}
    p.update(params or {})
    n_iot, n_gnb, n_mec, n_core, n_edge = (int(p[k]) for k in ("n_iot", "n_gnb", "n_mec", "n_core", "n_edge"))
    per_gnb = max(1, n_iot // n_gnb)
    nodes = []
    for i in range(n_iot):
        nodes.append({"id": f"iot_{i}", "role": "iot_device", "buffer_capacity": p["buffer"]})
    for g in range(n_gnb):
        nodes.append({"id": f"gnb_{g}", "role": "gnb", "hosted_subsystems": [f"ran_{g}"],
                      "buffer_capacity": p["buffer"]})
    for m in range(n_mec):
        nodes.append({"id": f"mec_{m}", "role": "mec_server", "hosted_subsystems": [f"det_{m}"],
                      "buffer_capacity": p["buffer"]})
    for c in range(n_core):
        nodes.append({"id": f"core_{c}", "role": "core_router", "buffer_capacity": p["buffer"]})
    for e in range(n_edge):
        nodes.append({"id": f"ec_{e}", "role": "edge_controller", "hosted_subsystems": [f"ctl_{e}"],
                      "buffer_capacity": p["buffer"]})
    links = []

    def add(a: str, b: str, cap: float, delay: float) -> None:
        links.append({"id": f"{a}--{b}", "endpoints": [a, b], "capacity": cap, "propagation_delay": delay})

    for i in range(n_iot):
        g = min(i // per_gnb, n_gnb - 1)
        add(f"iot_{i}", f"gnb_{g}", p["radio_capacity"], p["radio_delay"])
        if n_gnb > 1:
            add(f"iot_{i}", f"gnb_{(g + 1) % n_gnb}", p["radio_capacity"], p["radio_delay"])
    for g in range(n_gnb):
        add(f"gnb_{g}", f"mec_{g % n_mec}", p["access_capacity"], p["wired_delay"])
        add(f"gnb_{g}", f"core_{g % n_core}", p["access_capacity"], p["wired_delay"])
    for m in range(n_mec):
        for c in range(n_core):
            add(f"mec_{m}", f"core_{c}", p["access_capacity"], p["wired_delay"])
    for c in range(n_core):
        for d in range(c + 1, n_core):
            add(f"core_{c}", f"core_{d}", p["core_capacity"], p["wired_delay"])
    for e in range(n_edge):
        for c in range(n_core):
            add(f"ec_{e}", f"core_{c}", p["core_capacity"], p["wired_delay"])
    return {"nodes": nodes, "links": links}


def reference_flows(params: Mapping[str, Any] | None = None) -> list[dict[str, Any]]:
    """Telemetry from every device; every fifth device adds URLLC or video."""
    p = {"n_iot": 50, "n_gnb": 5, "n_mec": 5,
         "telemetry_rate": 160e3, "telemetry_packet": 8000.0,
         "urllc_rate": 400e3, "urllc_packet": 2000.0,
         "video_rate": 4e6, "video_packet": 12000.0}
    p.update(params or {})
    per_gnb = max(1, int(p["n_iot"]) // int(p["n_gnb"]))
    flows = []
    for i in range(int(p["n_iot"])):
        dst = f"mec_{min(i // per_gnb, int(p['n_gnb']) - 1) % int(p['n_mec'])}"
        flows.append({"id": f"tel_{i}", "source": f"iot_{i}", "destination": dst,
                      "traffic_class": "telemetry", "offered_rate": p["telemetry_rate"],
                      "packet_size": p["telemetry_packet"]})
        if i % 5 == 0:
            flows.append({"id": f"url_{i}", "source": f"iot_{i}", "destination": dst,
                          "traffic_class": "urllc", "offered_rate": p["urllc_rate"],
                          "packet_size": p["urllc_packet"]})
        elif i % 5 == 2:
            flows.append({"id": f"vid_{i}", "source": f"iot_{i}", "destination": dst,
                          "traffic_class": "video", "offered_rate": p["video_rate"],
                          "packet_size": p["video_packet"]})
    return flows


def _attack_spec(d: Mapping[str, Any]) -> AttackSpec:
    try:
        return AttackSpec(
            id=str(d["id"]), kind=str(d["kind"]), targets=tuple(d["targets"]),
            start=float(d["start"]), duration=float(d["duration"]),
            intensity=float(d.get("intensity", 0.0)), probability=float(d.get("probability", 1.0)),
            ramp=float(d.get("ramp", 0.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"attack {d.get('id', '?')!r}: missing field {exc.args[0]!r}") from exc


_TARGET_UNIVERSE = {
    "data_injection": "streams", "ddos_flood": "nodes", "station_outage": "nodes",
    "fiber_cut": "links", "ai_poisoning": "detectors",
}


def _expand(kind: str, targets: Any, universe: Mapping[str, list[str]]) -> Any:
    """Replace glob patterns such as ``ingress:iot_*`` with the matching ids, in order."""
    if not isinstance(targets, (list, tuple)):
        return targets
    pool = universe.get(_TARGET_UNIVERSE.get(kind, ""), [])
    out: list[str] = []
    for tgt in targets:
        tgt = str(tgt)
        if any(ch in tgt for ch in "*?["):
            hits = [x for x in pool if fnmatch.fnmatchcase(x, tgt)]
            if not hits:
                raise ConfigError(f"target pattern {tgt!r} matches nothing")
            out.extend(h for h in hits if h not in out)
        elif tgt not in out:
            out.append(tgt)
    return out


def _expand_targets(d: Mapping[str, Any], universe: Mapping[str, list[str]]) -> dict[str, Any]:
    d = dict(d)
    if d.get("kind") == "coordinated":
        for part in ("cyber", "physical"):
            if isinstance(d.get(part), Mapping):
                sub = dict(d[part])
                sub["targets"] = _expand(str(sub.get("kind")), sub.get("targets", []), universe)
                d[part] = sub
    elif "targets" in d:
        d["targets"] = _expand(str(d.get("kind")), d["targets"], universe)
    return d


def _attack(d: Mapping[str, Any]) -> AttackSpec | CoordinatedAttack:
    if d.get("kind") == "coordinated":
        cyber = dict(d["cyber"])
        physical = dict(d["physical"])
        cyber.setdefault("id", f"{d['id']}.cyber")
        physical.setdefault("id", f"{d['id']}.physical")
        cyber.setdefault("probability", d.get("probability", 1.0))
        cyber.setdefault("start", d.get("start"))
        physical.setdefault("start", cyber["start"])
        cyber.setdefault("duration", d.get("duration"))
        physical.setdefault("duration", cyber["duration"])
        return CoordinatedAttack(str(d["id"]), _attack_spec(cyber), _attack_spec(physical),
                                 float(d.get("alignment", 0.0)))
    return _attack_spec(d)


@dataclass
class Scenario:
    """A validated scenario. ``raw`` keeps the merged document for re-emission."""

    name: str
    raw: dict[str, Any]
    topology_config: dict[str, Any]
    flows: list[Flow]
    attacks: list[AttackSpec | CoordinatedAttack]
    stream_ids: list[str]
    stream_nodes: list[str]
    ranges: dict[str, tuple[float, float]]
    thresholds: ThresholdParams
    failure: FailureModel
    shields: ShieldLimits
    detector_ids: list[str] = field(default_factory=list)

    def section(self, key: str) -> Any:
        return self.raw[key]

    @property
    def run(self) -> dict[str, Any]:
        return self.raw["run"]

    def topology(self) -> Topology:
        """A fresh topology; every run needs its own mutable copy."""
        return build_topology(self.topology_config)

    def ensemble(self) -> ControllerEnsemble:
        members = [ControllerSpec(str(m["id"]), str(m["kind"]), float(m.get("trust", 1.0)))
                   for m in self.raw["ensemble"]["members"]]
        return ControllerEnsemble(members)


def scenario_from_dict(doc: Mapping[str, Any], name: str = "scenario") -> Scenario:
    """Merge ``doc`` over the defaults (and any ``extends`` parent) and validate."""
    doc = dict(doc)
    parent = doc.pop("extends", None)
    base = DEFAULTS
    if parent is not None:
        base = builtin_document(str(parent))
    raw = _merge(base, doc)
    raw.pop("extends", None)
    raw["name"] = str(doc.get("name", name))
    try:
        return _validate(raw)
    except ConfigError:
        raise
    except ResilnetError as exc:
        raise ConfigError(str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scenario: {exc!r}") from exc


def _validate(raw: dict[str, Any]) -> Scenario:
    topo_cfg = raw.get("topology", {"generator": "reference"})
    if "generator" in topo_cfg:
        if topo_cfg["generator"] != "reference":
            raise ConfigError(f"unknown topology generator {topo_cfg['generator']!r}")
        topo_cfg = reference_topology(topo_cfg.get("params"))
    topo = build_topology(topo_cfg)

    flow_cfg = raw.get("flows", {"generator": "reference"})
    if isinstance(flow_cfg, dict):
        if flow_cfg.get("generator") != "reference":
            raise ConfigError("flows must be a list or a reference generator block")
        flow_cfg = reference_flows(flow_cfg.get("params"))
    flows = [Flow(str(f["id"]), str(f["source"]), str(f["destination"]), str(f["traffic_class"]),
                  float(f["offered_rate"]), float(f.get("packet_size", 8000.0))) for f in flow_cfg]
    ids = [f.id for f in flows]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate flow ids")
    for f in flows:
        for end in (f.source, f.destination):
            if end not in topo.nodes:
                raise ConfigError(f"flow {f.id!r} references unknown node {end!r}")

    run = raw["run"]
    if not run["tick"] > 0:
        raise ConfigError("run.tick must be > 0")
    if not run["duration"] > run["warm_up"] >= 0:
        raise ConfigError("need run.duration > run.warm_up >= 0")
    if int(run["runs"]) < 1:
        raise ConfigError("run.runs must be >= 1")

    for c in raw["slices"]:
        if c not in TRAFFIC_CLASSES:
            raise ConfigError(f"slices: unknown traffic class {c!r}")
    if sum(raw["slices"].values()) > 1.0:
        raise ConfigError("slices: default fractions exceed 1")

    ranges_cfg = raw["telemetry"]["ranges"]
    stream_ids, stream_nodes, ranges = [], [], {}
    for nid in sorted(topo.nodes):
        role = STREAM_ROLES.get(topo.nodes[nid].role)
        if role is None:
            continue
        if role not in ranges_cfg:
            raise ConfigError(f"telemetry: no range for role {role!r}")
        lo, hi = (float(v) for v in ranges_cfg[role])
        if not hi > lo:
            raise ConfigError(f"telemetry: empty range for role {role!r}")
        sid = f"ingress:{nid}"
        stream_ids.append(sid)
        stream_nodes.append(nid)
        ranges[sid] = (lo, hi)
    if int(raw["telemetry"]["replicas"]) < 1:
        raise ConfigError("telemetry.replicas must be >= 1")

    det_ids = []
    for d in raw["detectors"]:
        if d["kind"] not in DETECTOR_KINDS:
            raise ConfigError(f"detector {d.get('id')!r}: unknown kind {d['kind']!r}")
        det_ids.append(str(d["id"]))
    det_ids.append(str(raw["static_detector"]["id"]))
    if len(set(det_ids)) != len(det_ids):
        raise ConfigError("duplicate detector ids")

    th = raw["thresholds"]
    thresholds = ThresholdParams(float(th["r_min"]), float(th["r_req"]), float(th["alpha"]),
                                 float(th["delta"]), int(th["alpha_sign"]))
    fm = raw["failure"]
    failure = FailureModel(float(fm["lambda_hw"]), float(fm["lambda_ai"]), float(fm["lambda_phy"]))
    sh = raw["shields"]
    shields = ShieldLimits(float(sh["u_max"]), int(sh["min_disjoint_paths"]), float(sh["delta_max"]))

    weights = [float(w) for w in raw["metrics"]["ri_weights"]]
    if len(weights) != 3 or min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-9:
        raise ConfigError("metrics.ri_weights must be three non-negative weights summing to 1")

    universe = {
        "streams": stream_ids, "nodes": sorted(topo.nodes), "links": sorted(topo.links),
        "detectors": det_ids,
    }
    attacks = [_attack(_expand_targets(a, universe)) for a in raw["attacks"]]
    aids = [a.id for a in attacks]
    if len(set(aids)) != len(aids):
        raise ConfigError("duplicate attack ids")
    validate_targets(attacks, topo.nodes, topo.links, stream_ids, det_ids)

    scenario = Scenario(raw["name"], raw, topo_cfg, flows, attacks, stream_ids, stream_nodes,
                        ranges, thresholds, failure, shields, det_ids)
    scenario.ensemble()  # validates controller entries
    return scenario


def _read(path: FsPath) -> dict[str, Any]:
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def builtin_names() -> list[str]:
    pkg = resources.files("resilnet") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".toml"))


def builtin_document(name: str) -> dict[str, Any]:
    """The merged document of a shipped scenario, with its parents resolved."""
    res = resources.files("resilnet") / "scenarios" / f"{name}.toml"
    if not res.is_file():
        raise ConfigError(f"unknown built-in scenario {name!r}")
    doc = tomllib.loads(res.read_text())
    parent = doc.pop("extends", None)
    base = DEFAULTS if parent is None else builtin_document(str(parent))
    merged = _merge(base, doc)
    merged.setdefault("name", name)
    return merged


def load_scenario(ref: str | FsPath) -> Scenario:
    """Load a scenario from a .toml/.json path or a built-in name.

    Raises ConfigError on validation failure and OSError when the file is unreadable.
    """
    path = FsPath(ref)
    if path.suffix.lower() in (".toml", ".json") or path.exists():
        try:
            doc = _read(path)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return scenario_from_dict(doc, path.stem)
    return scenario_from_dict({"extends": str(ref), "name": str(ref)}, str(ref))
