"""Scenario files: Φ₁, Φ₂, the measure space, the operator and run options, as JSON."""
import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources

from .analysis import AlphaGrid
from .errors import ConfigError
from .measure import space_from_config
from .operators import operator_from_config
from .young import young_from_config

__all__ = ["Scenario", "Options", "load_scenario", "parse_scenario", "demo_scenarios",
           "resolve_path"]

_TOP_KEYS = {"name", "commentary", "phi1", "phi2", "space", "operator", "options", "functions"}


@dataclass(frozen=True)
class Options:
    seed: int = 0
    trunc: int = 128
    samples: int = 200
    keep: tuple = (50, 100, 200)
    window: int = 128
    witness_region: object = None
    witness_count: int = 10
    alpha_grid: AlphaGrid = field(default_factory=AlphaGrid)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    phi1: object
    phi2: object
    space: object
    operator: object
    options: Options
    commentary: str = ""
    functions: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)


def _options_from_config(cfg, context="options"):
    if cfg is None:
        return Options()
    if not isinstance(cfg, dict):
        raise ConfigError("options must be an object", context)
    kw = {}
    try:
        for key in ("seed", "trunc", "samples", "window", "witness_count"):
            if key in cfg:
                kw[key] = int(cfg[key])
        if "keep" in cfg:
            keep = cfg["keep"]
            kw["keep"] = tuple(int(k) for k in (keep if isinstance(keep, list) else [keep]))
        if "witness_region" in cfg:
            region = cfg["witness_region"]
            if isinstance(region, dict):
                region = ("interval", float(region["lo"]), float(region["hi"]))
            else:
                region = tuple(int(j) for j in region)
            kw["witness_region"] = region
        if "alpha_grid" in cfg:
            g = cfg["alpha_grid"]
            kw["alpha_grid"] = AlphaGrid(**{k: (int(v) if k in ("per_octave", "refine_iters")
                                                else float(v)) for k, v in g.items()})
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad option value: {exc}", context) from None
    return Options(**kw)


def parse_scenario(cfg, name="scenario"):
    """Build a :class:`Scenario` from a decoded JSON mapping."""
    if not isinstance(cfg, dict):
        raise ConfigError("scenario must be a JSON object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level field(s) {sorted(unknown)}")
    for key in ("phi1", "phi2", "space", "operator"):
        if key not in cfg:
            raise ConfigError(f"missing field {key!r}")
    phi1 = young_from_config(cfg["phi1"], "phi1")
    phi2 = young_from_config(cfg["phi2"], "phi2")
    mu = space_from_config(cfg["space"], "space")
    op = operator_from_config(cfg["operator"], mu, "operator")
    functions = cfg.get("functions") or {}
    if not isinstance(functions, dict):
        raise ConfigError("functions must map names to expressions", "functions")
    return Scenario(str(cfg.get("name", name)), phi1, phi2, mu, op,
                    _options_from_config(cfg.get("options")), str(cfg.get("commentary", "")),
                    dict(functions), cfg)


def demo_scenarios():
    """Names of the scenario files shipped with the package."""
    root = resources.files("orliczkit") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_path(path):
    """A file path, or the name of a shipped demo scenario."""
    if os.path.exists(path):
        return path
    stem = path[:-5] if path.endswith(".json") else path
    candidate = resources.files("orliczkit") / "scenarios" / f"{stem}.json"
    if candidate.is_file():
        return str(candidate)
    raise ConfigError(f"scenario file not found: {path}")


def load_scenario(path):
    """Read and parse a scenario; JSON syntax errors carry line and column."""
    path = resolve_path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc.strerror}", path) from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"{os.path.basename(path)}: line {exc.lineno} col {exc.colno}") \
            from None
    stem = os.path.splitext(os.path.basename(path))[0]
    try:
        return parse_scenario(cfg, stem)
    except ConfigError as exc:
        line = _locate(text, exc.context)
        if line is None:
            raise
        raise ConfigError(str(exc), f"{os.path.basename(path)}: line {line}") from None


def _locate(text, context):
    """Best-effort line of a dotted field path such as ``space.atoms[2].w``."""
    if not context:
        return None
    head = context.split(":")[0].strip().split(" ")[0]
    pos, found = 0, False
    for part in head.split("."):
        m = re.match(r"(\w+)(?:\[(\d+)\])?$", part)
        if not m:
            break
        hit = text.find(f'"{m.group(1)}"', pos)
        if hit < 0:
            break
        pos, found = hit, True
        if m.group(2) is not None:
            # skip to the n-th element opening brace of the list
            for _ in range(int(m.group(2)) + 1):
                nxt = text.find("{", pos + 1)
                if nxt < 0:
                    break
                pos = nxt
    return text.count("\n", 0, pos) + 1 if found else None
