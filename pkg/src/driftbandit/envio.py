"""Lossless plain-text serialization of environments.

Exact rational grid parameters (bases, amplitudes) are stored as "p/q"
strings and fixed context sequences as C99 hex floats, so a dump/load
round trip reproduces the environment structurally bit for bit.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from .environments import Bump, Environment, Phase, RewardFunction

__all__ = ["env_to_dict", "env_from_dict", "dump_env", "load_env"]

_FORMAT = "driftbandit-env"
_VERSION = 1


def _frac(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def _parse_frac(s) -> Fraction:
    return Fraction(s)


def env_to_dict(env: Environment) -> dict:
    doc = {
        "format": _FORMAT,
        "version": _VERSION,
        "T": env.T,
        "K": env.K,
        "d": env.d,
        "noise": env.noise,
        "context": {"kind": env.context_kind},
        "phases": [
            {
                "start": p.start,
                "arms": [
                    {
                        "base": _frac(f.base),
                        "bumps": [
                            {
                                "scale": b.scale,
                                "cell": list(b.cell),
                                "sign": b.sign,
                                "amplitude": _frac(b.amplitude),
                            }
                            for b in f.bumps
                        ],
                    }
                    for f in p.arms
                ],
            }
            for p in env.phases
        ],
        "meta": dict(env.meta),
    }
    if env.context_kind == "fixed":
        doc["context"]["values"] = [
            [float(v).hex() for v in row] for row in np.asarray(env.fixed_contexts)
        ]
    return doc


def env_from_dict(doc: dict) -> Environment:
    if doc.get("format") != _FORMAT:
        raise ValueError("not a driftbandit environment document")
    if doc.get("version") != _VERSION:
        raise ValueError(f"unsupported environment format version {doc.get('version')!r}")
    phases = tuple(
        Phase(
            start=int(p["start"]),
            arms=tuple(
                RewardFunction(
                    base=_parse_frac(f["base"]),
                    bumps=tuple(
                        Bump(
                            scale=int(b["scale"]),
                            cell=tuple(int(c) for c in b["cell"]),
                            sign=int(b["sign"]),
                            amplitude=_parse_frac(b["amplitude"]),
                        )
                        for b in f.get("bumps", [])
                    ),
                )
                for f in p["arms"]
            ),
        )
        for p in doc["phases"]
    )
    ctx = doc.get("context", {"kind": "uniform"})
    fixed = None
    if ctx["kind"] == "fixed":
        fixed = np.array([[float.fromhex(v) for v in row] for row in ctx["values"]])
    return Environment(
        T=int(doc["T"]),
        K=int(doc["K"]),
        d=int(doc["d"]),
        phases=phases,
        noise=doc.get("noise", "bernoulli"),
        context_kind=ctx["kind"],
        fixed_contexts=fixed,
        meta=doc.get("meta", {}),
    )


def dump_env(env: Environment, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(env_to_dict(env), sort_keys=False))


def load_env(path: str | Path) -> Environment:
    return env_from_dict(yaml.safe_load(Path(path).read_text()))
