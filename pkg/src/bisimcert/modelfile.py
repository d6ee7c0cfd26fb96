"""JSON model files: subsystems, systems, certificates, interconnections
and simulation scenarios, with all expressions embedded as DSL strings.

The schema is documented in docs/model.schema.json.  Every name reference
is resolved and every dimension constraint checked at load time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from . import expr as ex
from .certify import Certificate
from .errors import BisimError, ModelError
from .model import Subsystem, System


@dataclass(frozen=True)
class InterconnectionSpec:
    left: str
    right: str
    alphas: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class Scenario:
    system: str
    x0: tuple[float, ...]
    x0p: tuple[float, ...]
    u: tuple[str, ...]
    up: tuple[str, ...]
    h: float
    T: float


@dataclass
class Model:
    subsystems: dict[str, Subsystem] = field(default_factory=dict)
    systems: dict[str, System] = field(default_factory=dict)
    certificates: dict[str, tuple[str, Certificate]] = field(default_factory=dict)
    interconnections: dict[str, InterconnectionSpec] = field(default_factory=dict)
    scenarios: dict[str, Scenario] = field(default_factory=dict)

    def target_of(self, cert_name: str):
        """Resolve a certificate's target to a Subsystem or System."""
        target, _ = self.certificates[cert_name]
        if target in self.systems:
            return self.systems[target]
        return self.subsystems[target]

    def certificates_for(self, target: str) -> list[str]:
        return [name for name, (tgt, _) in self.certificates.items() if tgt == target]


def _require(cond, msg):
    if not cond:
        raise ModelError(msg)


def _parse_subsystem(name, rec) -> Subsystem:
    _require(isinstance(rec, dict), f"subsystem '{name}' must be an object")
    for key in ("n", "p", "q", "field"):
        _require(key in rec, f"subsystem '{name}' is missing '{key}'")
    n, p, q = int(rec["n"]), int(rec["p"]), int(rec["q"])
    fams = {"x": n, "v": p, "w": q}
    field_exprs = tuple(ex.parse(src, fams) for src in rec["field"])
    return Subsystem(name=name, n=n, p=p, q=q, field=field_exprs)


def _parse_system(name, rec) -> System:
    _require(isinstance(rec, dict), f"system '{name}' must be an object")
    for key in ("n", "m", "field"):
        _require(key in rec, f"system '{name}' is missing '{key}'")
    n, m = int(rec["n"]), int(rec["m"])
    fams = {"x": n, "u": m}
    field_exprs = tuple(ex.parse(src, fams) for src in rec["field"])
    return System(name=name, n=n, m=m, field=field_exprs,
                  provenance=rec.get("provenance", "atomic"))


def load_model(path) -> Model:
    """Load and fully validate a model file; any defect raises ModelError."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ModelError(f"cannot read model file: {err}") from err
    except json.JSONDecodeError as err:
        raise ModelError(f"model file is not valid JSON: {err}") from err
    return model_from_dict(raw)


def model_from_dict(raw: dict) -> Model:
    _require(isinstance(raw, dict), "model file must contain a JSON object")
    m = Model()
    try:
        for name, rec in raw.get("subsystems", {}).items():
            m.subsystems[name] = _parse_subsystem(name, rec)
        for name, rec in raw.get("systems", {}).items():
            _require(name not in m.subsystems,
                     f"name '{name}' used for both a subsystem and a system")
            m.systems[name] = _parse_system(name, rec)

        for name, rec in raw.get("certificates", {}).items():
            for key in ("target", "V", "lambda", "gamma"):
                _require(key in rec, f"certificate '{name}' is missing '{key}'")
            target = rec["target"]
            if target in m.systems:
                tn, tm = m.systems[target].n, m.systems[target].m
            elif target in m.subsystems:
                sub = m.subsystems[target]
                tn, tm = sub.n, sub.m
            else:
                raise ModelError(
                    f"certificate '{name}' targets unknown name '{target}'"
                )
            v = ex.parse(rec["V"], {"x": tn, "xp": tn})
            cert = Certificate(V=v, lam=float(rec["lambda"]),
                               gamma=float(rec["gamma"]), n=tn, m=tm)
            m.certificates[name] = (target, cert)

        for name, rec in raw.get("interconnections", {}).items():
            for key in ("left", "right"):
                _require(key in rec, f"interconnection '{name}' is missing '{key}'")
                _require(rec[key] in m.subsystems,
                         f"interconnection '{name}': '{rec[key]}' is not a subsystem")
            alphas = rec.get("alphas")
            if alphas is not None:
                _require(len(alphas) == 2,
                         f"interconnection '{name}': alphas must be a pair")
                alphas = (float(alphas[0]), float(alphas[1]))
            left, right = m.subsystems[rec["left"]], m.subsystems[rec["right"]]
            _require(left.p == right.n and right.p == left.n,
                     f"interconnection '{name}': dimension mismatch "
                     f"(left.p={left.p} vs right.n={right.n}, "
                     f"right.p={right.p} vs left.n={left.n})")
            m.interconnections[name] = InterconnectionSpec(
                left=rec["left"], right=rec["right"], alphas=alphas
            )

        for name, rec in raw.get("scenarios", {}).items():
            for key in ("system", "x0", "x0p", "u", "up", "h", "T"):
                _require(key in rec, f"scenario '{name}' is missing '{key}'")
            sysname = rec["system"]
            _require(sysname in m.systems,
                     f"scenario '{name}': unknown system '{sysname}'")
            s = m.systems[sysname]
            _require(len(rec["x0"]) == s.n and len(rec["x0p"]) == s.n,
                     f"scenario '{name}': x0/x0p must have length n={s.n}")
            _require(len(rec["u"]) == s.m and len(rec["up"]) == s.m,
                     f"scenario '{name}': u/up must have {s.m} components")
            for src in list(rec["u"]) + list(rec["up"]):
                ex.parse(src, {"t": 1})
            m.scenarios[name] = Scenario(
                system=sysname,
                x0=tuple(float(v) for v in rec["x0"]),
                x0p=tuple(float(v) for v in rec["x0p"]),
                u=tuple(rec["u"]),
                up=tuple(rec["up"]),
                h=float(rec["h"]),
                T=float(rec["T"]),
            )
    except ModelError:
        raise
    except BisimError as err:
        raise ModelError(str(err)) from err
    return m


def system_to_dict(s: System) -> dict:
    return {
        "n": s.n,
        "m": s.m,
        "field": [ex.pretty(e) for e in s.field],
        "provenance": s.provenance,
    }


def subsystem_to_dict(s: Subsystem) -> dict:
    return {"n": s.n, "p": s.p, "q": s.q, "field": [ex.pretty(e) for e in s.field]}


def certificate_to_dict(target: str, c: Certificate) -> dict:
    return {
        "target": target,
        "V": ex.pretty(c.V),
        "lambda": c.lam,
        "gamma": c.gamma,
    }


def save_model(path, subsystems=None, systems=None, certificates=None) -> dict:
    """Write a model file containing the given pieces; returns the dict.

    ``certificates`` maps name -> (target, Certificate).
    """
    out: dict = {}
    if subsystems:
        out["subsystems"] = {k: subsystem_to_dict(v) for k, v in subsystems.items()}
    if systems:
        out["systems"] = {k: system_to_dict(v) for k, v in systems.items()}
    if certificates:
        out["certificates"] = {
            k: certificate_to_dict(t, c) for k, (t, c) in certificates.items()
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out
