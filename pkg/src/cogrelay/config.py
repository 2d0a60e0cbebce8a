"""Line-oriented scenario files.

Grammar::

    # comment
    [section]
    key = value [unit]
    key = v1, v2, v3 [unit]

Sections are ``system``, ``rf``, ``fso``, ``sweep`` and ``mc``, plus one
``[variant LABEL]`` section per curve whose keys override the base
parameters.  Keys are case-insensitive.  Units: ``dB`` and ``dBW`` on power
and SNR keys, ``mph`` or ``mps`` on speed keys (bare speeds are m/s).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .channels import MPH
from .perf import MODULATIONS
from .scenarios import TURBULENCE, FigurePreset, SystemConfig, Variant

__all__ = ["ConfigError", "KEYS", "RunOptions", "parse_config", "serialize", "parse_assignment",
           "parse_sweep_values"]

METHODS = ("closed", "quadrature", "mc")


class ConfigError(ValueError):
    """Malformed or invalid configuration; carries the line number and key when known."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line, self.key = line, key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class Key:
    section: str
    field: str
    kind: str  # int, float, dB, dBW, speed, str


def _keys() -> dict[str, Key]:
    table = {
        "system": [
            ("j", "J", "int"), ("n_b", "N_b", "int"), ("n_a", "N_a", "int"),
            ("b", "B", "int"), ("t", "T", "int"), ("l", "L", "int"),
            ("p_a", "P_A_dB", "dB"), ("p_m", "P_M_dBW", "dBW"), ("eta0", "eta0", "float"),
            ("gamma_th", "gamma_th_dB", "dB"),
        ],
        "rf": [
            ("n_s", "N_S", "int"), ("n_r", "N_R", "int"), ("n_p", "N_P", "int"),
            ("delta2_sr", "delta2_SR", "float"), ("delta2_sp", "delta2_SP", "float"),
            ("d_sr", "d_SR", "float"), ("d_sp", "d_SP", "float"),
            ("path_loss_exp", "path_loss_exp", "float"),
            ("sigma2_eps_sr", "sigma2_eps_SR", "float"),
            ("sigma2_eps_sp", "sigma2_eps_SP", "float"),
            ("sigma2_innov", "sigma2_innov", "float"),
            ("speed_sr", "speed_SR", "speed"), ("speed_sp", "speed_SP", "speed"),
            ("f_c", "f_c", "float"), ("r_s", "R_s", "float"),
        ],
        "fso": [
            ("alpha", "alpha", "float"), ("beta", "beta", "float"), ("xi", "xi", "float"),
            ("h_l", "H_l", "float"), ("theta", "theta", "int"), ("mu", "mu_dB", "dB"),
        ],
        "mc": [
            ("p_u", "P_U_dBW", "dBW"), ("eta_pri", "eta_pri", "float"),
            ("primary_target", "primary_outage_target", "float"),
            ("constraint", "constraint", "str"), ("interference", "interference", "str"),
        ],
    }
    return {k: Key(sec, f, kind) for sec, rows in table.items() for k, f, kind in rows}


KEYS = _keys()
_BY_FIELD = {k.field: name for name, k in KEYS.items()}
_UNITS = {"dB": ("dB",), "dBW": ("dBW",), "speed": ("mph", "mps")}
_NUMBER = re.compile(r"^([^\s]+)(?:\s+([A-Za-z]+))?$")

# keys that control the run rather than the scenario
_META = {
    "system": {"preset", "id", "title", "metric", "modulations", "notes", "turbulence"},
    "rf": {"speed"},
    "fso": {"turbulence"},
    "sweep": {"name", "values"},
    "mc": {"frames", "seed", "methods"},
}


@dataclass(frozen=True)
class RunOptions:
    methods: tuple[str, ...] | None = None
    frames: int | None = None
    seed: int | None = None


def _convert(key: str, kind: str, token: str, line: int | None):
    m = _NUMBER.match(token.strip())
    if not m:
        raise ConfigError(f"cannot parse value {token!r}", line, key)
    raw, unit = m.group(1), m.group(2)
    if kind == "str":
        if unit:
            raise ConfigError(f"unexpected text after value {token!r}", line, key)
        return raw
    if unit is not None:
        allowed = _UNITS.get(kind, ())
        if unit.lower() not in {a.lower() for a in allowed}:
            expect = " or ".join(allowed) or "no unit"
            raise ConfigError(f"unit mismatch: got {unit!r}, expected {expect}", line, key)
    try:
        if kind == "int":
            v = float(raw)
            if not v.is_integer():
                raise ValueError
            return int(v)
        v = float(raw)
    except ValueError:
        raise ConfigError(f"not a valid {'integer' if kind == 'int' else 'number'}: {raw!r}",
                          line, key) from None
    if not math.isfinite(v):
        raise ConfigError("value must be finite", line, key)
    if kind == "speed" and unit is not None and unit.lower() == "mph":
        v *= MPH
    return v


def _split_list(value: str) -> tuple[list[str], str | None]:
    """Split ``"0, 5, 10 dB"`` into items, moving a trailing unit onto every item."""
    items = [v.strip() for v in value.split(",")]
    if any(not v for v in items):
        raise ValueError("empty list element")
    last = items[-1].split()
    unit = last[1] if len(last) == 2 else None
    if unit is not None and all(len(v.split()) == 1 for v in items[:-1]):
        items = [v if len(v.split()) == 2 else f"{v} {unit}" for v in items]
    return items, unit


def _lookup(key: str, line: int | None, section: str | None = None) -> Key:
    k = KEYS.get(key)
    if k is None:
        raise ConfigError("unknown key", line, key)
    if section is not None and section.startswith("variant"):
        return k
    if section is not None and k.section != section:
        raise ConfigError(f"key belongs in section [{k.section}], not [{section}]", line, key)
    return k


def parse_assignment(text: str) -> tuple[str, object]:
    """Parse a stand-alone ``key=value`` override into ``(field, value)``."""
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, value = (s.strip() for s in text.split("=", 1))
    k = _lookup(key.lower(), None)
    return k.field, _convert(key.lower(), k.kind, value, None)


def parse_sweep_values(field: str, text: str, line: int | None = None) -> tuple[float, ...]:
    """Parse ``"0, 5, 10 dB"`` for the parameter ``field`` into floats in its stored unit."""
    try:
        items, _ = _split_list(text)
    except ValueError as exc:
        raise ConfigError(str(exc), line, "values") from None
    kind = KEYS[_BY_FIELD[field]].kind
    return tuple(float(_convert("values", kind, it, line)) for it in items)


def parse_config(text: str) -> tuple[FigurePreset, RunOptions]:
    """Parse a scenario file into a preset and run options."""
    from .scenarios import preset as named_preset

    section = None
    seen: dict[str, dict[str, int]] = {}
    base: dict[str, object] = {}
    meta: dict[str, tuple[str, int]] = {}
    variants: list[tuple[str, dict[str, object]]] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", no)
            name = " ".join(line[1:-1].split())
            low = name.lower()
            if low.startswith("variant "):
                label = name.split(" ", 1)[1]
                if any(label == v[0] for v in variants):
                    raise ConfigError(f"duplicate variant {label!r}", no)
                variants.append((label, {}))
                section = "variant " + label
            elif low in ("system", "rf", "fso", "sweep", "mc"):
                section = low
            else:
                raise ConfigError(f"unknown section [{name}]", no)
            seen.setdefault(section, {})
            continue
        if section is None:
            raise ConfigError("assignment outside of any section", no)
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", no)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if not key or not value:
            raise ConfigError("empty key or value", no, key or None)
        if key in seen[section]:
            raise ConfigError(f"duplicate key (first set on line {seen[section][key]})", no, key)
        seen[section][key] = no
        if key in _META.get(section, ()):
            meta[key] = (value, no)
            continue
        k = _lookup(key, no, section)
        v = _convert(key, k.kind, value, no)
        if section.startswith("variant"):
            variants[-1][1][k.field] = v
        else:
            base[k.field] = v

    start = SystemConfig()
    title, notes, metric, mods, pid = "custom scenario", "", "outage", (), "custom"
    sweep_name, sweep_values = None, None
    default_variants: tuple[Variant, ...] = (Variant("default"),)
    methods: tuple[str, ...] = ("closed",)
    if "preset" in meta:
        pid, no = meta["preset"]
        try:
            ref = named_preset(pid)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]), no, "preset") from None
        start, title, notes, metric = ref.base, ref.title, ref.notes, ref.metric
        mods, methods = ref.modulations, ref.methods
        sweep_name, sweep_values = ref.sweep_name, ref.sweep_values
        default_variants = ref.variants
    if "turbulence" in meta:
        name, no = meta["turbulence"]
        if name not in TURBULENCE:
            raise ConfigError(f"turbulence must be one of {sorted(TURBULENCE)}", no, "turbulence")
        t = TURBULENCE[name]
        start = start.replace(**{f: t[f] for f in ("alpha", "beta", "xi", "H_l")})
    if "speed" in meta:
        value, no = meta["speed"]
        v = _convert("speed", "speed", value, no)
        start = start.replace(speed_SR=v, speed_SP=v)
    if "id" in meta:
        pid = meta["id"][0]
    if "title" in meta:
        title = meta["title"][0]
    if "notes" in meta:
        notes = meta["notes"][0]
    if "metric" in meta:
        metric = meta["metric"][0]
    if "modulations" in meta:
        value, no = meta["modulations"]
        mods = tuple(m.strip().upper() for m in value.split(","))
        for m in mods:
            if m not in MODULATIONS:
                raise ConfigError(f"unknown modulation {m!r}", no, "modulations")
    if "methods" in meta:
        value, no = meta["methods"]
        methods = _parse_methods(value, no)

    try:
        cfg = start.replace(**base)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    if "name" in meta:
        key, no = meta["name"]
        sweep_name = _lookup(key.lower(), no).field
    if "values" in meta:
        value, no = meta["values"]
        if sweep_name is None:
            raise ConfigError("sweep values given without a sweep name", no, "values")
        sweep_values = parse_sweep_values(sweep_name, value, no)
    opts = RunOptions(
        methods=methods if "methods" in meta else None,
        frames=_int_meta(meta, "frames"),
        seed=_int_meta(meta, "seed"),
    )
    if sweep_name is None or sweep_values is None:
        raise ConfigError("missing required [sweep] keys 'name' and 'values'", None, "name")

    if variants:
        vs = tuple(Variant(label, tuple(ov.items())) for label, ov in variants)
    else:
        vs = default_variants
    try:
        fp = FigurePreset(pid, title, cfg, sweep_name, sweep_values, vs, metric, mods,
                          methods, notes)
        fp.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None

    return fp, opts


def _parse_methods(value: str, line: int | None) -> tuple[str, ...]:
    out = tuple(m.strip().lower() for m in value.split(","))
    bad = [m for m in out if m not in METHODS]
    if bad or not out:
        raise ConfigError(f"methods must be a subset of {', '.join(METHODS)}", line, "methods")
    return out


def _int_meta(meta, key):
    if key not in meta:
        return None
    value, no = meta[key]
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(f"not a number: {value!r}", no, key) from None
    if not v.is_integer() or v < 0:
        raise ConfigError("expected a non-negative integer", no, key)
    return int(v)


def _fmt(kind: str, v) -> str:
    if kind == "int":
        return str(int(v))
    if kind == "str":
        return str(v)
    s = repr(float(v))
    if kind in ("dB", "dBW"):
        return f"{s} {kind}"
    if kind == "speed":
        return f"{s} mps"
    return s


def serialize(fp: FigurePreset, opts: RunOptions | None = None) -> str:
    """Render a preset as a scenario file that parses back to an equal preset."""
    out = [f"# {fp.title}"]
    by_section: dict[str, list[str]] = {"system": [], "rf": [], "fso": [], "mc": []}
    for name, k in KEYS.items():
        by_section[k.section].append(f"{name} = {_fmt(k.kind, getattr(fp.base, k.field))}")
    out += ["[system]", f"id = {fp.id}", f"title = {fp.title}", f"metric = {fp.metric}"]
    if fp.notes:
        out.append(f"notes = {fp.notes}")
    if fp.modulations:
        out.append(f"modulations = {', '.join(fp.modulations)}")
    out += by_section["system"]
    out += ["", "[rf]"] + by_section["rf"]
    out += ["", "[fso]"] + by_section["fso"]
    sk = _BY_FIELD[fp.sweep_name]
    kind = KEYS[sk].kind
    vals = ", ".join(_fmt("float" if kind == "int" else kind, v) for v in fp.sweep_values)
    out += ["", "[sweep]", f"name = {sk}", f"values = {vals}"]
    methods = opts.methods if opts is not None and opts.methods else fp.methods
    out += ["", "[mc]", f"methods = {', '.join(methods)}"] + by_section["mc"]
    if opts is not None:
        if opts.frames is not None:
            out.append(f"frames = {opts.frames}")
        if opts.seed is not None:
            out.append(f"seed = {opts.seed}")
    for v in fp.variants:
        out += ["", f"[variant {v.label}]"]
        for f, val in v.overrides:
            name = _BY_FIELD[f]
            out.append(f"{name} = {_fmt(KEYS[name].kind, val)}")
    return "\n".join(out) + "\n"
