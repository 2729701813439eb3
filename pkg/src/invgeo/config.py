"""Scenario configuration: loading, schema validation and flag overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import List, Optional

import jsonschema

from .errors import ArgumentError
from .isometry import Isometry, isometry_from_config
from .manifold import Manifold, manifold_from_config
from .optimizer import SearchConfig


def load_schema(name: str) -> dict:
    text = resources.files("invgeo").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def builtin_scenarios() -> List[str]:
    folder = resources.files("invgeo").joinpath("scenarios")
    return sorted(p.name[: -len(".json")] for p in folder.iterdir() if p.name.endswith(".json"))


def builtin_scenario_data(name: str) -> dict:
    path = resources.files("invgeo").joinpath("scenarios", f"{name}.json")
    if not path.is_file():
        raise ArgumentError(f"unknown scenario {name!r}; try list-scenarios")
    return json.loads(path.read_text())


@dataclass
class Scenario:
    name: str
    manifold: Manifold
    isometry: Isometry
    N: int
    seeds: List[dict]
    search: SearchConfig
    analysis: List[str]
    raw: dict
    description: str = ""
    average_index: Optional[dict] = None
    bangert: Optional[dict] = None
    expect: dict = field(default_factory=dict)
    output: Optional[str] = None


def validate(data: dict) -> None:
    try:
        jsonschema.validate(data, load_schema("scenario"))
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ArgumentError(f"invalid scenario config at {loc}: {exc.message}") from None


def apply_overrides(data: dict, theta=None, seeds=None, N=None, out=None) -> dict:
    """Return a copy with scalar CLI overrides applied.

    ``theta`` sets the rotation angle of a sphere rotation twist (for a product
    twist, the last sphere-rotation factor); ``seeds`` sets the count of random
    seeds or the number per winding class.
    """
    data = copy.deepcopy(data)
    if theta is not None:
        iso = data["isometry"]
        targets = [iso] if iso.get("kind") == "sphere_rotation" else [
            f for f in iso.get("factors", []) if f.get("kind") == "sphere_rotation"
        ][-1:]
        if not targets:
            raise ArgumentError("--theta needs a sphere rotation in the twist")
        targets[0]["angle"] = float(theta)
    if seeds is not None:
        if seeds < 1:
            raise ArgumentError("--seeds must be positive")
        for spec in data.get("seeds", []):
            if spec["strategy"] == "random":
                spec["n"] = int(seeds)
            elif spec["strategy"] == "equator":
                spec["per_winding"] = int(seeds)
    if N is not None:
        data["N"] = int(N)
    if out is not None:
        data["output"] = out
    return data


def scenario_from_data(data: dict) -> Scenario:
    validate(data)
    manifold = manifold_from_config(data["manifold"])
    isometry = isometry_from_config(data["isometry"], manifold)
    try:
        search = SearchConfig(**data.get("search", {}))
    except TypeError as exc:
        raise ArgumentError(str(exc)) from None
    return Scenario(
        name=data["name"],
        manifold=manifold,
        isometry=isometry,
        N=data["N"],
        seeds=data.get("seeds", []),
        search=search,
        analysis=list(data["analysis"]),
        raw=data,
        description=data.get("description", ""),
        average_index=data.get("average_index"),
        bangert=data.get("bangert"),
        expect=data.get("expect", {}),
        output=data.get("output"),
    )


def load_scenario(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArgumentError(f"cannot read config {path}: {exc}") from None
