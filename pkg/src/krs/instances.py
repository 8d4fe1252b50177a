"""Instance files and seeded random instance generators.

Plain instances are stored as ``{"machines": m, "jobs": [{"p", "w", "r"}]}``.
Grouped instances use ``{"b": .., "classes": [{"e", "n", "eps"}]}`` with the
class counts written as decimal strings, since they routinely exceed 64 bits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import GroupClass, GroupedInstance, Instance, InstanceError, validate

__all__ = [
    "GeneratorSpec",
    "instance_to_dict",
    "instance_from_dict",
    "grouped_to_dict",
    "grouped_from_dict",
    "load_instance",
    "dump_instance",
    "load_grouped",
    "dump_grouped",
    "generate",
    "random_instance",
]


def instance_to_dict(instance: Instance) -> dict:
    return {
        "machines": instance.machines,
        "jobs": [{"p": j.p, "w": j.w, "r": j.r} for j in instance.jobs],
    }


def instance_from_dict(data) -> Instance:
    if not isinstance(data, dict) or not isinstance(data.get("jobs"), list):
        raise InstanceError("malformed instance: expected an object with a 'jobs' list")
    jobs = []
    for k, item in enumerate(data["jobs"], start=1):
        if not isinstance(item, dict) or "p" not in item:
            raise InstanceError(f"malformed instance: job {k} needs a 'p' field")
        try:
            jobs.append((float(item["p"]), float(item.get("w", 1.0)), float(item.get("r", 0.0))))
        except (TypeError, ValueError) as exc:
            raise InstanceError(f"malformed instance: job {k}: {exc}") from None
    m = data.get("machines", 1)
    if isinstance(m, bool) or not isinstance(m, int):
        raise InstanceError("malformed instance: 'machines' must be an integer")
    return validate(jobs, machines=m)


def grouped_to_dict(grouped: GroupedInstance) -> dict:
    return {
        "b": grouped.base,
        "classes": [{"e": c.e, "n": str(c.n), "eps": c.eps, "w": c.w} for c in grouped.classes],
    }


def grouped_from_dict(data) -> GroupedInstance:
    if not isinstance(data, dict) or "b" not in data or not isinstance(data.get("classes"), list):
        raise InstanceError("malformed grouped instance")
    classes = []
    for c in data["classes"]:
        try:
            n = int(str(c["n"]))
            classes.append(GroupClass(float(c["e"]), n, float(c.get("eps", 0.0)),
                                      float(c.get("w", 1.0))))
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"malformed grouped class: {exc}") from None
    return GroupedInstance(float(data["b"]), tuple(classes))


def _read_json(path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed JSON in {path}: {exc}") from None


def load_instance(path) -> Instance:
    return instance_from_dict(_read_json(path))


def dump_instance(instance: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1) + "\n", encoding="utf-8")


def load_grouped(path) -> GroupedInstance:
    return grouped_from_dict(_read_json(path))


def dump_grouped(grouped: GroupedInstance, path) -> None:
    Path(path).write_text(json.dumps(grouped_to_dict(grouped), indent=1) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a reproducible batch of random instances.

    ``sizes`` is one of ``loguniform`` (spread over ``decades`` powers of
    ten), ``uniform`` on ``[1, 10**decades]`` or ``lognormal`` with
    ``sigma``. Release dates are uniform on ``[0, release_density * sum p / m]``;
    a density of zero gives no release dates.
    """

    count: int = 100
    n_min: int = 1
    n_max: int = 30
    sizes: str = "loguniform"
    decades: float = 6.0
    sigma: float = 1.0
    weighted: bool = False
    release_density: float = 0.0
    machines: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be nonnegative")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError("need 1 <= n_min <= n_max")
        if self.sizes not in ("loguniform", "uniform", "lognormal"):
            raise ValueError(f"unknown size distribution {self.sizes!r}")
        if self.machines < 1 or self.release_density < 0 or self.decades <= 0:
            raise ValueError("invalid generator parameters")


def _sizes(rng: np.random.Generator, spec: GeneratorSpec, n: int) -> np.ndarray:
    if spec.sizes == "loguniform":
        return 10.0 ** rng.uniform(0, spec.decades, n)
    if spec.sizes == "uniform":
        return rng.uniform(1, 10.0 ** spec.decades, n)
    return rng.lognormal(0.0, spec.sigma, n)


def random_instance(rng: np.random.Generator, spec: GeneratorSpec) -> Instance:
    n = int(rng.integers(spec.n_min, spec.n_max + 1))
    p = _sizes(rng, spec, n)
    w = 10.0 ** rng.uniform(-1, 1, n) if spec.weighted else np.ones(n)
    if spec.release_density > 0:
        horizon = spec.release_density * math.fsum(p) / spec.machines
        r = rng.uniform(0, horizon, n)
    else:
        r = np.zeros(n)
    return validate(list(zip(p.tolist(), w.tolist(), r.tolist())), machines=spec.machines)


def generate(spec: GeneratorSpec) -> list[Instance]:
    """Instances ``0..count-1``; instance ``i`` depends only on ``(seed, i)``."""
    children = np.random.SeedSequence(spec.seed).spawn(spec.count)
    return [random_instance(np.random.default_rng(s), spec) for s in children]
