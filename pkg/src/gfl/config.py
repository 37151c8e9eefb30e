"""Run configuration: TOML documents with ``spec``, ``experiment`` and ``output`` tables."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import tomli_w

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python 3.10
    import tomli

from .errors import SpecError
from .kernels import FieldSpec

DEFAULT_SPECS: dict[str, dict[str, Any]] = {
    "fbm_sheet": {"family": "fbm_sheet", "k": 2, "d": 1, "hurst": [0.5, 0.5]},
    "heat": {"family": "heat", "k": 1, "d": 1, "beta": 1.0},
    "wave": {"family": "wave", "k": 1, "d": 1, "beta": 1.0},
}

EXPERIMENT_DEFAULTS: dict[str, dict[str, Any]] = {
    "spec": {"m": [2, 3], "d": [1, 2, 4, 8, 12]},
    "sample": {"grid": 8, "replicates": 10},
    "verify": {"checks": ["a2", "increment", "nondegeneracy"], "rho": 0.1, "pairs": 1000},
    "bands": {"a_max": 64, "b_max": 4096.0, "pairs_per_band": 50},
    "multipoint": {
        "grid": 16,
        "m": 2,
        "separation": 4.0,
        "eps": [0.01, 0.0141, 0.02, 0.0283, 0.04],
        "replicates": 2000,
        "max_tuples": 0,
    },
    "smallball": {"center": [], "r": [1.0], "u_over_r": [0.4, 0.5, 0.6, 0.7, 0.8], "replicates": 20000, "per_axis": 0},
    "dyadic": {"q_max": 3},
}


@dataclass
class RunConfig:
    spec: dict[str, Any]
    experiment: dict[str, Any] = field(default_factory=dict)
    output: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    threads: int = 1

    def field_spec(self) -> FieldSpec:
        return FieldSpec.from_dict(self.spec)

    def materialize(self, subcommand: str) -> "RunConfig":
        """Copy with every experiment default filled in and validated."""
        base = copy.deepcopy(EXPERIMENT_DEFAULTS.get(subcommand, {}))
        unknown = set(self.experiment) - set(base) - {"family", "check"}
        if unknown:
            raise SpecError(f"unknown {subcommand} settings: {sorted(unknown)}")
        base.update(copy.deepcopy(self.experiment))
        spec = self.field_spec().to_dict()
        return RunConfig(spec, base, dict(self.output), int(self.seed), int(self.threads))

    def to_toml(self, run: Optional[dict[str, Any]] = None) -> str:
        doc: dict[str, Any] = {}
        if run is not None:
            doc["run"] = run
        doc["seed"] = int(self.seed)
        doc["threads"] = int(self.threads)
        doc["spec"] = _nest(self.spec)
        doc["experiment"] = self.experiment
        if self.output:
            doc["output"] = self.output
        return tomli_w.dumps(doc)


def _nest(flat: dict[str, Any]) -> dict[str, Any]:
    """Dotted keys to nested tables, so the document reads as ``domain.lower = [...]``."""
    out: dict[str, Any] = {}
    for key, val in flat.items():
        parts = key.split(".")
        cur = out
        for p in parts[:-1]:
            cur = cur.setdefault(p, {})
        cur[parts[-1]] = val
    return out


def parse_config(text: str) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise SpecError(f"config is not valid TOML: {exc}") from None
    known = {"spec", "experiment", "output", "seed", "threads", "run"}
    unknown = set(doc) - known
    if unknown:
        raise SpecError(f"unknown config sections: {sorted(unknown)}")
    if "spec" not in doc:
        raise SpecError("config needs a [spec] table")
    spec = dict(doc["spec"])
    for tab in ("experiment", "output"):
        if tab in doc and not isinstance(doc[tab], dict):
            raise SpecError(f"[{tab}] must be a table")
    seed = doc.get("seed", 0)
    threads = doc.get("threads", 1)
    if not isinstance(seed, int) or seed < 0:
        raise SpecError("seed must be a non-negative integer")
    if not isinstance(threads, int) or threads < 1:
        raise SpecError("threads must be a positive integer")
    cfg = RunConfig(spec, dict(doc.get("experiment", {})), dict(doc.get("output", {})), seed, threads)
    cfg.field_spec()
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise SpecError(f"config file {path} not found")
    return parse_config(p.read_text(encoding="utf-8"))
