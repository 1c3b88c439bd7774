"""Run configuration files: schema, validation, resolution.

Configs are YAML mappings (JSON is a YAML subset, so .json files work too).
``load_config`` reads and parses; ``resolve_config`` validates the schema and
cross-field constraints, fills defaults, and returns a plain dict with
everything an experiment needs, plus constructed domain objects. Validation
failures raise :class:`ConfigInvalidError` naming the offending field.

Schema (fields marked * are required for at least one experiment kind)::

    experiment: one of forward-ness | dual-hitting | harmonic | duality-check
                | equilibrium-check | poisson-check | conditional-lte
                | sticking-tail                                          *
    domain:                                                              *
      shape: interval | rectangle | ball
      bounds: [a, b]            # interval; rectangle uses [[a,b], ...]
      center: [cx, cy]          # ball
      radius: r                 # ball
    scale: L                    # positive number                        *
    temperature:
      kind: constant | endpoints | linear
      value: c                  # constant
      left: Tl / right: Tr      # endpoints (interval domains)
      base: b / slope: m / axis: i   # linear: T(x) = b + m * x[axis]
    particles: M                # or density: a  (M = round(a * n_sites))
    seed: integer (any sign; used modulo 2^64)                           *
    replicas: R
    burn_in_events / sample_events / thinning / batches
    orders: [[...], ...]        # moment multi-indices
    packets: [{site: [...]       # dual placements
               | particle: j | bath: [...]}]
    placement: {x: [...], offsets: [[...]], exponent: theta}  # mesoscopic
    energies: {sites: val|list, particles: val|list}          # duality-check
    t_events: integer           # duality-check
    site: [...]                 # conditional-lte / harmonic cross-check
    count_sites: [[...], ...]   # poisson-check
    alpha: a                    # poisson-check reference mean
    K: k                        # conditional-lte
    episodes: n                 # sticking-tail
    start: [...]                # sticking-tail start site
    record_energies: bool       # forward-ness series on/off
    tol: t                      # harmonic solver tolerance
    step_cap: n                 # dual chains
    workers: n                  # replica thread pool
    output: {dir: path}
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np
import yaml

from .dual import AtBath, AtSite, CarriedBy, PacketLocation
from .errors import ConfigInvalidError, IoFailureError
from .lattice import (
    BoundaryTemperature,
    DomainSpec,
    LatticeDomain,
    build_lattice,
    nearest_lattice_point,
)
from .rng import canonical_seed

EXPERIMENT_KINDS = (
    "forward-ness",
    "dual-hitting",
    "harmonic",
    "duality-check",
    "equilibrium-check",
    "poisson-check",
    "conditional-lte",
    "sticking-tail",
)

FORWARD_KINDS = ("forward-ness", "equilibrium-check", "poisson-check",
                 "conditional-lte")


def load_config(path: str) -> dict:
    """Read and parse a config file. IO problems raise IoFailureError,
    unparseable content raises ConfigInvalidError."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot read config file {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalidError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigInvalidError("config must be a mapping at the top level")
    return raw


def _require(raw: dict, field: str, kind_note: str = ""):
    if field not in raw or raw[field] is None:
        note = f" (required for {kind_note})" if kind_note else ""
        raise ConfigInvalidError(f"missing field '{field}'{note}", field=field)
    return raw[field]


def _as_number(value, field: str, *, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigInvalidError(f"'{field}' must be a number", field=field)
    v = float(value)
    if positive and not v > 0:
        raise ConfigInvalidError(f"'{field}' must be positive", field=field)
    if nonneg and v < 0:
        raise ConfigInvalidError(f"'{field}' must be >= 0", field=field)
    return v


def _as_int(value, field: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalidError(f"'{field}' must be an integer", field=field)
    if minimum is not None and value < minimum:
        raise ConfigInvalidError(f"'{field}' must be >= {minimum}", field=field)
    return value


def _as_point(value, field: str) -> tuple:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (value,)
    if isinstance(value, list) and all(
        isinstance(c, (int, float)) and not isinstance(c, bool) for c in value
    ):
        return tuple(value)
    raise ConfigInvalidError(
        f"'{field}' must be a number or a list of numbers", field=field
    )


def _parse_domain(raw: dict) -> DomainSpec:
    dom = _require(raw, "domain")
    if not isinstance(dom, dict):
        raise ConfigInvalidError("'domain' must be a mapping", field="domain")
    shape = dom.get("shape")
    try:
        if shape == "interval":
            a, b = dom.get("bounds", (None, None))
            return DomainSpec.interval(float(a), float(b))
        if shape == "rectangle":
            bounds = dom.get("bounds")
            if not isinstance(bounds, list) or not bounds:
                raise ValueError("rectangle needs 'bounds' as [[a,b], ...]")
            if all(isinstance(x, (int, float)) for x in bounds):
                bounds = [bounds]  # single axis written flat
            return DomainSpec.rectangle([(float(a), float(b)) for a, b in bounds])
        if shape == "ball":
            return DomainSpec.ball(
                [float(c) for c in dom.get("center", ())],
                float(dom.get("radius", 0.0)),
            )
    except (TypeError, ValueError) as exc:
        raise ConfigInvalidError(
            f"invalid domain parameters: {exc}", field="domain"
        ) from exc
    raise ConfigInvalidError(
        "domain.shape must be interval, rectangle, or ball", field="domain.shape"
    )


def _parse_temperature(raw: dict, spec: DomainSpec) -> tuple[BoundaryTemperature, dict]:
    tdef = raw.get("temperature", {"kind": "constant", "value": 1.0})
    if not isinstance(tdef, dict):
        raise ConfigInvalidError(
            "'temperature' must be a mapping", field="temperature"
        )
    kind = tdef.get("kind")
    try:
        if kind == "constant":
            value = _as_number(tdef.get("value"), "temperature.value", nonneg=True)
            return BoundaryTemperature.constant(value), {
                "kind": "constant", "value": value,
            }
        if kind == "endpoints":
            if spec.kind != "interval":
                raise ConfigInvalidError(
                    "endpoint temperatures require an interval domain",
                    field="temperature.kind",
                )
            left = _as_number(tdef.get("left"), "temperature.left", nonneg=True)
            right = _as_number(tdef.get("right"), "temperature.right", nonneg=True)
            return BoundaryTemperature.endpoints(left, right), {
                "kind": "endpoints", "left": left, "right": right,
            }
        if kind == "linear":
            base = _as_number(tdef.get("base"), "temperature.base")
            slope = _as_number(tdef.get("slope", 1.0), "temperature.slope")
            axis = _as_int(tdef.get("axis", 0), "temperature.axis", minimum=0)
            if axis >= spec.dimension:
                raise ConfigInvalidError(
                    f"temperature.axis {axis} outside dimension {spec.dimension}",
                    field="temperature.axis",
                )
            fn = lambda x, b=base, m=slope, a=axis: b + m * x[a]  # noqa: E731
            return BoundaryTemperature.from_callable(fn), {
                "kind": "linear", "base": base, "slope": slope, "axis": axis,
            }
    except ValueError as exc:
        raise ConfigInvalidError(str(exc), field="temperature") from exc
    raise ConfigInvalidError(
        "temperature.kind must be constant, endpoints, or linear",
        field="temperature.kind",
    )


def _interior_site(lattice: LatticeDomain, value, field: str) -> tuple:
    site = tuple(int(c) for c in _as_point(value, field))
    if site not in lattice.site_index:
        raise ConfigInvalidError(
            f"'{field}': {list(site)} is not an interior site", field=field
        )
    return site


def _parse_packets(raw: dict, lattice: LatticeDomain, M: int) -> list[PacketLocation]:
    packets_def = raw.get("packets")
    placement = raw.get("placement")
    if (packets_def is None) == (placement is None):
        raise ConfigInvalidError(
            "exactly one of 'packets' or 'placement' must be given",
            field="packets",
        )
    out: list[PacketLocation] = []
    if packets_def is not None:
        if not isinstance(packets_def, list) or not packets_def:
            raise ConfigInvalidError(
                "'packets' must be a nonempty list", field="packets"
            )
        for i, p in enumerate(packets_def):
            fieldname = f"packets[{i}]"
            if not isinstance(p, dict) or len(p) != 1:
                raise ConfigInvalidError(
                    f"'{fieldname}' must be one of {{site: …}}, "
                    f"{{particle: …}}, {{bath: …}}",
                    field=fieldname,
                )
            (tag, val), = p.items()
            if tag == "site":
                out.append(AtSite(_interior_site(lattice, val, fieldname)))
            elif tag == "bath":
                point = tuple(int(c) for c in _as_point(val, fieldname))
                if point not in lattice.bath_index:
                    raise ConfigInvalidError(
                        f"'{fieldname}': {list(point)} is not a bath vertex",
                        field=fieldname,
                    )
                out.append(AtBath(point))
            elif tag == "particle":
                j = _as_int(val, fieldname, minimum=0)
                if j >= M:
                    raise ConfigInvalidError(
                        f"'{fieldname}': particle {j} >= M={M}", field=fieldname
                    )
                out.append(CarriedBy(j))
            else:
                raise ConfigInvalidError(
                    f"'{fieldname}': unknown packet tag '{tag}'", field=fieldname
                )
        return out

    if not isinstance(placement, dict):
        raise ConfigInvalidError("'placement' must be a mapping", field="placement")
    x = _as_point(_require(placement, "x"), "placement.x")
    if len(x) != lattice.dimension:
        raise ConfigInvalidError(
            f"placement.x must have {lattice.dimension} components",
            field="placement.x",
        )
    offsets = placement.get("offsets")
    if not isinstance(offsets, list) or not offsets:
        raise ConfigInvalidError(
            "'placement.offsets' must be a nonempty list of offset vectors",
            field="placement.offsets",
        )
    theta = _as_number(placement.get("exponent", 0.5), "placement.exponent")
    if not (0.0 < theta < 1.0):
        raise ConfigInvalidError(
            f"placement.exponent must lie strictly inside (0, 1), got {theta}",
            field="placement.exponent",
        )
    L = lattice.scale
    for i, off in enumerate(offsets):
        v = _as_point(off, f"placement.offsets[{i}]")
        if len(v) != lattice.dimension:
            raise ConfigInvalidError(
                f"placement.offsets[{i}] must have {lattice.dimension} components",
                field="placement.offsets",
            )
        target = nearest_lattice_point(
            tuple(xc * L + (L**theta) * vc for xc, vc in zip(x, v))
        )
        if target not in lattice.site_index:
            raise ConfigInvalidError(
                f"placement.offsets[{i}] lands on {list(target)}, "
                f"not an interior site",
                field="placement.offsets",
            )
        out.append(AtSite(target))
    return out


def resolve_config(raw: dict) -> dict:
    """Validate a parsed config and return the resolved view.

    The result holds plain resolved values under string keys (suitable to
    echo as JSON) plus constructed objects under ``objects``.
    """
    if not isinstance(raw, dict):
        raise ConfigInvalidError("config must be a mapping")
    unknown_ok = {
        "experiment", "domain", "scale", "temperature", "particles", "density",
        "seed", "replicas", "burn_in_events", "sample_events", "thinning",
        "batches", "orders", "packets", "placement", "energies", "t_events",
        "site", "count_sites", "alpha", "K", "episodes", "start",
        "record_energies", "tol", "step_cap", "workers", "output",
    }
    for key in raw:
        if key not in unknown_ok:
            raise ConfigInvalidError(f"unknown field '{key}'", field=str(key))

    kind = _require(raw, "experiment")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigInvalidError(
            f"experiment must be one of {', '.join(EXPERIMENT_KINDS)}; "
            f"got '{kind}'",
            field="experiment",
        )

    spec = _parse_domain(raw)
    L = _as_number(_require(raw, "scale"), "scale", positive=True)
    temp, temp_echo = _parse_temperature(raw, spec)
    lattice = build_lattice(spec, L)

    # particle count: explicit or by density
    if ("particles" in raw) == ("density" in raw) and kind != "harmonic":
        raise ConfigInvalidError(
            "exactly one of 'particles' or 'density' must be given",
            field="particles",
        )
    if "particles" in raw:
        M = _as_int(raw["particles"], "particles", minimum=1)
        density = M / lattice.n_sites
    elif "density" in raw:
        density = _as_number(raw["density"], "density", positive=True)
        M = max(1, round(density * lattice.n_sites))
    else:  # harmonic runs need no particles
        M, density = 1, 1.0 / lattice.n_sites

    seed_raw = _require(raw, "seed")
    if isinstance(seed_raw, bool) or not isinstance(seed_raw, int):
        raise ConfigInvalidError("'seed' must be an integer", field="seed")
    seed = canonical_seed(seed_raw)

    replicas = _as_int(raw.get("replicas", 1), "replicas", minimum=1)
    if kind in FORWARD_KINDS and replicas != 1:
        raise ConfigInvalidError(
            f"'{kind}' runs a single chain with batched errors; "
            "replicas must be 1",
            field="replicas",
        )
    if kind in ("dual-hitting", "duality-check") and replicas < 2:
        raise ConfigInvalidError(
            f"'{kind}' needs replicas >= 2 for standard errors",
            field="replicas",
        )

    resolved: dict[str, Any] = {
        "experiment": kind,
        "domain": {
            "shape": spec.kind,
            **({"bounds": list(spec.bounds[0])} if spec.kind == "interval" else
               {"bounds": [list(b) for b in spec.bounds]}
               if spec.kind == "rectangle" else
               {"center": list(spec.center), "radius": spec.radius}),
        },
        "scale": L,
        "temperature": temp_echo,
        "particles": M,
        "density": density,
        "seed": seed,
        "replicas": replicas,
        "workers": _as_int(raw.get("workers", 1), "workers", minimum=1),
        "output": {"dir": str((raw.get("output") or {}).get("dir", "out"))},
    }
    objects: dict[str, Any] = {"spec": spec, "lattice": lattice, "temp": temp}

    if kind in FORWARD_KINDS:
        resolved["sample_events"] = _as_int(
            _require(raw, "sample_events", kind), "sample_events", minimum=1
        )
        burn = raw.get("burn_in_events")
        resolved["burn_in_events"] = (
            _as_int(burn, "burn_in_events", minimum=0) if burn is not None
            else 200 * lattice.n_sites * M
        )
        thin = raw.get("thinning")
        resolved["thinning"] = (
            _as_int(thin, "thinning", minimum=1) if thin is not None else M
        )
        resolved["batches"] = _as_int(
            raw.get("batches", 30), "batches", minimum=2
        )

    if kind in ("dual-hitting", "duality-check", "sticking-tail"):
        resolved["step_cap"] = _as_int(
            raw.get("step_cap", 10**9), "step_cap", minimum=1
        )

    if kind == "dual-hitting":
        objects["packets"] = _parse_packets(raw, lattice, M)
        resolved["packets"] = [
            _echo_packet(p) for p in objects["packets"]
        ]

    if kind == "duality-check":
        objects["packets"] = _parse_packets(raw, lattice, M)
        resolved["packets"] = [_echo_packet(p) for p in objects["packets"]]
        resolved["t_events"] = _as_int(
            _require(raw, "t_events", kind), "t_events", minimum=0
        )
        energies = raw.get("energies") or {}
        if not isinstance(energies, dict):
            raise ConfigInvalidError(
                "'energies' must be a mapping", field="energies"
            )
        site_e = energies.get("sites", 1.0)
        part_e = energies.get("particles", 1.0)
        objects["energies"] = (
            _energy_vector(site_e, lattice.n_sites, "energies.sites"),
            _energy_vector(part_e, M, "energies.particles"),
        )
        resolved["energies"] = {"sites": site_e, "particles": part_e}

    if kind in ("equilibrium-check", "conditional-lte"):
        orders = raw.get("orders")
        if orders is None and kind == "equilibrium-check":
            orders = [[1], [2], [3]]
        if orders is not None:
            if not isinstance(orders, list) or not orders or not all(
                isinstance(o, list) and o and all(
                    isinstance(c, int) and not isinstance(c, bool) and c >= 0
                    for c in o
                )
                for o in orders
            ):
                raise ConfigInvalidError(
                    "'orders' must be a nonempty list of nonnegative-integer "
                    "multi-indices",
                    field="orders",
                )
        resolved["orders"] = orders

    if kind == "equilibrium-check":
        if temp_echo["kind"] != "constant":
            raise ConfigInvalidError(
                "equilibrium-check requires a constant temperature",
                field="temperature.kind",
            )
        if not temp_echo["value"] > 0:
            raise ConfigInvalidError(
                "equilibrium-check needs a strictly positive temperature",
                field="temperature.value",
            )
        if any(len(o) != 1 for o in resolved["orders"]):
            raise ConfigInvalidError(
                "equilibrium-check orders are per-site (length-1 multi-indices)",
                field="orders",
            )

    if kind == "poisson-check":
        sites_def = raw.get("count_sites")
        if sites_def is None:
            sites = [_center_site(lattice)]
        else:
            if not isinstance(sites_def, list) or not sites_def:
                raise ConfigInvalidError(
                    "'count_sites' must be a nonempty list of sites",
                    field="count_sites",
                )
            sites = [
                _interior_site(lattice, s, f"count_sites[{i}]")
                for i, s in enumerate(sites_def)
            ]
        objects["count_sites"] = sites
        resolved["count_sites"] = [list(s) for s in sites]
        alpha = raw.get("alpha")
        resolved["alpha"] = (
            _as_number(alpha, "alpha", positive=True) if alpha is not None
            else M / lattice.n_sites
        )

    if kind == "conditional-lte":
        site = _interior_site(lattice, _require(raw, "site", kind), "site")
        objects["site"] = site
        resolved["site"] = list(site)
        resolved["K"] = _as_int(_require(raw, "K", kind), "K", minimum=0)
        if resolved["orders"] is None:
            resolved["orders"] = [[1] * (resolved["K"] + 1)]
        for o in resolved["orders"]:
            if len(o) != resolved["K"] + 1:
                raise ConfigInvalidError(
                    f"conditional orders must have K+1={resolved['K'] + 1} "
                    f"components, got {o}",
                    field="orders",
                )

    if kind == "harmonic":
        resolved["tol"] = _as_number(
            raw.get("tol", 1e-10), "tol", positive=True
        )
        if raw.get("site") is not None:
            site = _interior_site(lattice, raw["site"], "site")
            objects["site"] = site
            resolved["site"] = list(site)
            if replicas < 2:
                raise ConfigInvalidError(
                    "the random-walk cross-check at 'site' needs replicas >= 2",
                    field="replicas",
                )

    if kind == "sticking-tail":
        resolved["episodes"] = _as_int(
            raw.get("episodes", 10_000), "episodes", minimum=1
        )
        if raw.get("start") is not None:
            start = _interior_site(lattice, raw["start"], "start")
            objects["start"] = start
            resolved["start"] = list(start)

    if kind == "forward-ness":
        rec = raw.get("record_energies")
        if rec is not None and not isinstance(rec, bool):
            raise ConfigInvalidError(
                "'record_energies' must be a boolean", field="record_energies"
            )
        resolved["record_energies"] = (
            rec if rec is not None else lattice.n_sites <= 64
        )

    resolved["derived"] = {
        "n_sites": lattice.n_sites,
        "n_bath": lattice.n_bath,
        "dimension": lattice.dimension,
    }
    resolved["objects"] = objects
    return resolved


def _echo_packet(p: PacketLocation) -> dict:
    if isinstance(p, AtSite):
        return {"site": list(p.site)}
    if isinstance(p, AtBath):
        return {"bath": list(p.point)}
    return {"particle": p.particle}


def _energy_vector(value, length: int, field: str):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value < 0:
            raise ConfigInvalidError(f"'{field}' must be >= 0", field=field)
        return np.full(length, float(value))
    if isinstance(value, list):
        if len(value) != length:
            raise ConfigInvalidError(
                f"'{field}' must have {length} entries", field=field
            )
        arr = np.array([float(v) for v in value])
        if (arr < 0).any():
            raise ConfigInvalidError(f"'{field}' must be >= 0", field=field)
        return arr
    raise ConfigInvalidError(
        f"'{field}' must be a number or a list of numbers", field=field
    )


def _center_site(lattice: LatticeDomain) -> tuple:
    lo, hi = lattice.spec.bounding_box()
    center = np.array([(a + b) / 2 * lattice.scale for a, b in zip(lo, hi)])
    d2 = ((lattice.site_coords - center) ** 2).sum(axis=1)
    return lattice.sites[int(np.argmin(d2))]


def config_hash(resolved: dict) -> str:
    """Stable hash over the result-determining part of a resolved config."""
    payload = {
        k: v for k, v in resolved.items() if k not in ("output", "objects")
    }
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
