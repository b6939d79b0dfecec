"""Device catalog, room layout, and live environment snapshot.

The catalog drives prompt construction (layout for reasoning, full interface
listings for grounding) and grounding validation. It is immutable after
load; the mutable state store lives in the engine.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

CATALOG_SCHEMA = {
    "type": "object",
    "required": ["rooms", "devices"],
    "properties": {
        "rooms": {"type": "array", "items": {"type": "string"}},
        "devices": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["target", "room", "position", "interfaces"],
                "properties": {
                    "target": {"type": "string", "minLength": 1},
                    "room": {"type": "string"},
                    "position": {"type": "string"},
                    "interfaces": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["name", "kind", "params", "returns", "description"],
                            "properties": {
                                "name": {"type": "string", "minLength": 1},
                                "kind": {"enum": ["query", "operation"]},
                                "params": {"type": "array"},
                                "returns": {"type": ["object", "null"]},
                                "description": {"type": "string", "minLength": 1},
                            },
                        },
                    },
                },
            },
        },
    },
}

_DOMAIN_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["enum", "numeric", "text"]}},
}


class CatalogError(ValueError):
    """Catalog file rejected; message carries a JSON-pointer-style path."""


class DomainKind(enum.Enum):
    ENUM = "enum"
    NUMERIC = "numeric"
    TEXT = "text"


@dataclass(frozen=True)
class ValueDomain:
    """Value space for an interface parameter or query return."""

    kind: DomainKind
    values: tuple[str, ...] = ()          # enum members
    low: float | None = None              # numeric range bounds
    high: float | None = None

    def describe(self) -> str:
        if self.kind is DomainKind.ENUM:
            return "one of " + ", ".join(self.values)
        if self.kind is DomainKind.NUMERIC:
            return f"a number from {_fmt_num(self.low)} to {_fmt_num(self.high)}"
        return "free text"

    def contains(self, literal: str) -> bool:
        literal = literal.strip()
        if self.kind is DomainKind.ENUM:
            return literal.lower() in {v.lower() for v in self.values}
        if self.kind is DomainKind.NUMERIC:
            try:
                value = float(literal)
            except ValueError:
                return False
            return (self.low is None or value >= self.low) and (
                self.high is None or value <= self.high
            )
        return bool(literal)


def _fmt_num(value: float | None) -> str:
    if value is None:
        return "?"
    return str(int(value)) if float(value).is_integer() else str(value)


@dataclass(frozen=True)
class InterfaceParam:
    name: str
    domain: ValueDomain


@dataclass(frozen=True)
class DeviceInterface:
    name: str
    kind: str  # "query" | "operation"
    description: str
    params: tuple[InterfaceParam, ...] = ()
    returns: ValueDomain | None = None


@dataclass(frozen=True)
class Device:
    target: str
    room: str
    position: str
    interfaces: tuple[DeviceInterface, ...]

    def interface(self, name: str, kind: str) -> DeviceInterface | None:
        wanted = name.strip().lower()
        for itf in self.interfaces:
            if itf.name.lower() == wanted and itf.kind == kind:
                return itf
        return None


class LookupResult(enum.Enum):
    """Typed absence for interface lookups, consumed by the validator."""

    FOUND = "found"
    UNKNOWN_TARGET = "unknown_target"
    UNKNOWN_INTERFACE = "unknown_interface"
    WRONG_KIND = "wrong_kind"


@dataclass(frozen=True)
class DeviceCatalog:
    rooms: tuple[str, ...]
    devices: tuple[Device, ...]

    def device(self, target: str) -> Device | None:
        wanted = target.strip().lower()
        for dev in self.devices:
            if dev.target.lower() == wanted:
                return dev
        return None

    def query_interfaces(self) -> list[tuple[Device, DeviceInterface]]:
        return [(d, i) for d in self.devices for i in d.interfaces if i.kind == "query"]


def lookup_interface(
    catalog: DeviceCatalog, target: str, interface: str, kind: str
) -> tuple[LookupResult, DeviceInterface | None]:
    """Resolve (target, interface, kind), distinguishing why a miss missed."""
    device = catalog.device(target)
    if device is None:
        return LookupResult.UNKNOWN_TARGET, None
    found = device.interface(interface, kind)
    if found is not None:
        return LookupResult.FOUND, found
    other = "operation" if kind == "query" else "query"
    if device.interface(interface, other) is not None:
        return LookupResult.WRONG_KIND, None
    return LookupResult.UNKNOWN_INTERFACE, None


def _parse_domain(doc: dict, path: str) -> ValueDomain:
    try:
        jsonschema.validate(doc, _DOMAIN_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise CatalogError(f"{path}: {exc.message}") from None
    kind = DomainKind(doc["kind"])
    if kind is DomainKind.ENUM:
        values = tuple(str(v) for v in doc.get("values", ()))
        if not values:
            raise CatalogError(f"{path}: enum domain needs values")
        return ValueDomain(kind, values=values)
    if kind is DomainKind.NUMERIC:
        return ValueDomain(kind, low=doc.get("low"), high=doc.get("high"))
    return ValueDomain(kind)


def catalog_from_dict(doc: dict) -> DeviceCatalog:
    try:
        jsonschema.validate(doc, CATALOG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise CatalogError(f"/{'/'.join(str(p) for p in exc.absolute_path)}: {exc.message}") from None

    rooms = tuple(doc["rooms"])
    devices = []
    seen: set[str] = set()
    for di, dev in enumerate(doc["devices"]):
        key = dev["target"].strip().lower()
        if key in seen:
            raise CatalogError(f"/devices/{di}/target: duplicate target {dev['target']!r}")
        seen.add(key)
        if dev["room"] not in rooms:
            raise CatalogError(f"/devices/{di}/room: unknown room {dev['room']!r}")
        interfaces = []
        for ii, itf in enumerate(dev["interfaces"]):
            path = f"/devices/{di}/interfaces/{ii}"
            params = tuple(
                InterfaceParam(p["name"], _parse_domain(p["domain"], f"{path}/params/{pi}"))
                for pi, p in enumerate(itf["params"])
            )
            returns = None if itf["returns"] is None else _parse_domain(itf["returns"], f"{path}/returns")
            if itf["kind"] == "query" and returns is None:
                raise CatalogError(f"{path}: query interfaces must declare returns")
            if itf["kind"] == "operation" and not params:
                raise CatalogError(f"{path}: operation interfaces must declare params")
            interfaces.append(
                DeviceInterface(itf["name"], itf["kind"], itf["description"], params, returns)
            )
        devices.append(Device(dev["target"], dev["room"], dev["position"], tuple(interfaces)))
    return DeviceCatalog(rooms, tuple(devices))


def catalog_to_dict(catalog: DeviceCatalog) -> dict:
    def domain(d: ValueDomain | None):
        if d is None:
            return None
        if d.kind is DomainKind.ENUM:
            return {"kind": "enum", "values": list(d.values)}
        if d.kind is DomainKind.NUMERIC:
            return {"kind": "numeric", "low": d.low, "high": d.high}
        return {"kind": "text"}

    return {
        "rooms": list(catalog.rooms),
        "devices": [
            {
                "target": dev.target,
                "room": dev.room,
                "position": dev.position,
                "interfaces": [
                    {
                        "name": itf.name,
                        "kind": itf.kind,
                        "params": [{"name": p.name, "domain": domain(p.domain)} for p in itf.params],
                        "returns": domain(itf.returns),
                        "description": itf.description,
                    }
                    for itf in dev.interfaces
                ],
            }
            for dev in catalog.devices
        ],
    }


def load_catalog(path: str | Path) -> DeviceCatalog:
    with open(path, encoding="utf-8") as fh:
        return catalog_from_dict(json.load(fh))


def save_catalog(catalog: DeviceCatalog, path: str | Path) -> None:
    Path(path).write_text(json.dumps(catalog_to_dict(catalog), indent=2) + "\n", encoding="utf-8")


def bundled_catalog_path() -> Path:
    return Path(str(resources.files("awareauto").joinpath("data/catalog.json")))


def load_bundled_catalog() -> DeviceCatalog:
    return load_catalog(bundled_catalog_path())


@dataclass(frozen=True)
class ContextSnapshot:
    """Environment state at expression time: clock, weather, device values."""

    time: str = "12:00"
    weekday: str = "Monday"
    temperature: float = 22.0
    humidity: float = 50.0
    device_states: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ContextSnapshot":
        return cls(
            time=str(doc.get("time", "12:00")),
            weekday=str(doc.get("weekday", "Monday")),
            temperature=float(doc.get("temperature", 22.0)),
            humidity=float(doc.get("humidity", 50.0)),
            device_states=dict(doc.get("device_states", {})),
        )

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "weekday": self.weekday,
            "temperature": self.temperature,
            "humidity": self.humidity,
            "device_states": self.device_states,
        }


def render_scenario_text(
    catalog: DeviceCatalog, snapshot: ContextSnapshot | None, detail: str = "layout_only"
) -> str:
    """Describe the home for a prompt, deterministically.

    detail="layout_only" lists rooms and device locations; the reasoning
    stage must not see interface names. detail="layout_and_interfaces" adds
    every interface with parameters, return domains, and descriptions.
    """
    if detail not in ("layout_only", "layout_and_interfaces"):
        raise ValueError(f"bad detail {detail!r}")
    lines = ["Rooms: " + (", ".join(catalog.rooms) if catalog.rooms else "(none)") + "."]
    lines.append("Devices:" if catalog.devices else "Devices: (none).")
    for dev in catalog.devices:
        lines.append(f"- {dev.target} ({dev.room}): {dev.position}.")
        if detail == "layout_and_interfaces":
            for itf in dev.interfaces:
                if itf.kind == "query":
                    lines.append(
                        f"    query {itf.name} -> {itf.returns.describe()}: {itf.description}"
                    )
                else:
                    args = ", ".join(f"{p.name}: {p.domain.describe()}" for p in itf.params)
                    lines.append(f"    operation {itf.name}({args}): {itf.description}")
    if snapshot is not None:
        lines.append(
            f"Current context: time={snapshot.time} {snapshot.weekday}, "
            f"temperature={_fmt_num(snapshot.temperature)}C, humidity={_fmt_num(snapshot.humidity)}%."
        )
    return "\n".join(lines) + "\n"
