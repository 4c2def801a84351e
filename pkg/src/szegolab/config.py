"""Run configuration: a YAML document validated into typed pieces.

Top-level keys::

    kernel:      KernelSpec fields (family, beta, alpha, gamma, delta1, delta2, G, anchor, truncated_flag)
    nmax:        number of retained modes
    initial:     exactly one of modes | l1 | blowup_family | ld | stationary | two_mode
    controls:    IntegratorControls fields
    diagnostics: s_list, modes (|alpha_n| columns), store_states, floor
    sweep:       beta_grid, x0_grid, lambda, b          (sweep only)
    lax:         probe_count, pair, every               (lax-check only)
    manifold:    t_end, checkpoint_dt                   (manifold only)

Complex numbers may be written as a number, ``[re, im]``, ``{re: .., im: ..}``
or a string such as ``"1-0.5j"``.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import yaml

from .flow import IntegratorControls
from .kernels import KernelSpec
from .manifold import LDParams, ManifoldState, blowup_family, lift_L1, lift_LD, stationary_szego
from .state import DEFAULT_SOBOLEV, ModeState

INITIAL_VARIANTS = ("modes", "l1", "blowup_family", "ld", "stationary", "two_mode")


class ConfigError(ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def parse_complex(value, path):
    if isinstance(value, bool):
        raise ConfigError(path, "expected a complex number")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_real(value[0], f"{path}[0]"), _real(value[1], f"{path}[1]"))
    if isinstance(value, dict) and set(value) <= {"re", "im"}:
        return complex(_real(value.get("re", 0.0), f"{path}.re"), _real(value.get("im", 0.0), f"{path}.im"))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            pass
    raise ConfigError(path, f"cannot read {value!r} as a complex number")


def _real(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a real number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    return float(value)


def _int(value, path, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return value


def _section(doc, key, path=""):
    sub = doc.get(key, {})
    if sub is None:
        sub = {}
    if not isinstance(sub, dict):
        raise ConfigError(f"{path}{key}", "expected a mapping")
    return sub


def _reject_unknown(d, allowed, path):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], f"unknown field (allowed: {', '.join(sorted(allowed))})")


@dataclass
class Initial:
    variant: str
    params: dict

    def build(self, nmax):
        v, p = self.variant, self.params
        if v == "modes":
            a = np.zeros(nmax, dtype=complex)
            vals = p["values"]
            if len(vals) > nmax:
                raise ConfigError("initial.modes", f"{len(vals)} amplitudes exceed nmax={nmax}")
            a[: len(vals)] = vals
            return ModeState(a)
        if v == "l1":
            return lift_L1(ManifoldState(p["b"], p["a"], p["p"]), nmax)
        if v == "blowup_family":
            return lift_L1(self.manifold_state(), nmax)
        if v == "ld":
            return lift_LD(LDParams(p["b"], p["poles"]), nmax)
        if v == "stationary":
            return stationary_szego(p["p"], 0.0, nmax)
        if v == "two_mode":
            a = np.zeros(nmax, dtype=complex)
            a[0], a[1] = p["a0"], p["a1"]
            return ModeState(a)
        raise AssertionError(v)

    def manifold_state(self):
        """(b, a, p) for the L(1) variants, else None."""
        p = self.params
        if self.variant == "l1":
            return ManifoldState(p["b"], p["a"], p["p"])
        if self.variant == "blowup_family":
            a = blowup_family(p["beta"], p["b"], p["p"], p["lambda"])
            return ManifoldState(p["b"], a, p["p"])
        if self.variant == "stationary":
            from .manifold import stationary_manifold_state

            return stationary_manifold_state(p["p"])
        return None


def _parse_initial(doc):
    init = _section(doc, "initial")
    present = [k for k in INITIAL_VARIANTS if k in init]
    _reject_unknown(init, INITIAL_VARIANTS, "initial")
    if len(present) != 1:
        if not present:
            raise ConfigError("initial", f"exactly one of {', '.join(INITIAL_VARIANTS)} is required")
        raise ConfigError("initial", "exactly one initial-condition variant allowed, got " + " and ".join(f"initial.{k}" for k in present))
    v = present[0]
    body = init[v]
    path = f"initial.{v}"
    if v == "modes":
        if not isinstance(body, list) or not body:
            raise ConfigError(path, "expected a nonempty list of amplitudes")
        return Initial(v, {"values": [parse_complex(z, f"{path}[{i}]") for i, z in enumerate(body)]})
    if not isinstance(body, dict):
        raise ConfigError(path, "expected a mapping")
    if v == "l1":
        _reject_unknown(body, ("b", "a", "p"), path)
        vals = {k: parse_complex(body.get(k, 0.0), f"{path}.{k}") for k in ("b", "a", "p")}
        if abs(vals["p"]) >= 1:
            raise ConfigError(f"{path}.p", "|p| must be < 1")
        return Initial(v, vals)
    if v == "blowup_family":
        _reject_unknown(body, ("beta", "b", "p", "lambda"), path)
        for k in ("beta", "p"):
            if k not in body:
                raise ConfigError(f"{path}.{k}", "required")
        vals = {
            "beta": _real(body["beta"], f"{path}.beta"),
            "b": parse_complex(body.get("b", 1.0), f"{path}.b"),
            "p": parse_complex(body["p"], f"{path}.p"),
            "lambda": _real(body.get("lambda", 0.0), f"{path}.lambda"),
        }
        try:
            blowup_family(vals["beta"], vals["b"], vals["p"], vals["lambda"])
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
        return Initial(v, vals)
    if v == "ld":
        _reject_unknown(body, ("b", "poles"), path)
        poles = body.get("poles")
        if not isinstance(poles, list):
            raise ConfigError(f"{path}.poles", "expected a list of {c, p} mappings")
        parsed = []
        for i, pole in enumerate(poles):
            pp = f"{path}.poles[{i}]"
            if not isinstance(pole, dict):
                raise ConfigError(pp, "expected a mapping with c and p")
            _reject_unknown(pole, ("c", "p"), pp)
            parsed.append((parse_complex(pole.get("c"), f"{pp}.c"), parse_complex(pole.get("p"), f"{pp}.p")))
        vals = {"b": parse_complex(body.get("b", 0.0), f"{path}.b"), "poles": parsed}
        try:
            LDParams(vals["b"], vals["poles"])
        except ValueError as exc:
            raise ConfigError(f"{path}.poles", str(exc)) from None
        return Initial(v, vals)
    if v == "stationary":
        _reject_unknown(body, ("p",), path)
        val = parse_complex(body.get("p"), f"{path}.p")
        if abs(val) >= 1:
            raise ConfigError(f"{path}.p", "|p| must be < 1")
        return Initial(v, {"p": val})
    if v == "two_mode":
        _reject_unknown(body, ("a0", "a1"), path)
        return Initial(v, {k: parse_complex(body.get(k, 1.0), f"{path}.{k}") for k in ("a0", "a1")})
    raise AssertionError(v)


@dataclass
class Diagnostics:
    s_list: tuple = DEFAULT_SOBOLEV
    modes: tuple = (0, 1, 2)
    store_states: bool = True
    floor: float = 1e-13


@dataclass
class SweepSpec:
    beta_grid: list
    x0_grid: list
    lam: float = 0.0
    b: complex = 1.0


@dataclass
class RunConfig:
    kernel: KernelSpec
    nmax: int
    initial: Initial
    controls: IntegratorControls
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    sweep: SweepSpec = None
    lax: dict = field(default_factory=lambda: {"probe_count": 8, "pair": "K", "every": 1})
    manifold: dict = field(default_factory=lambda: {"t_end": None, "checkpoint_dt": None})
    raw: dict = field(default_factory=dict)

    def initial_state(self):
        return self.initial.build(self.nmax)


TOP_LEVEL = ("kernel", "nmax", "initial", "controls", "diagnostics", "sweep", "lax", "manifold")


def parse_config(doc, need_initial=True):
    if not isinstance(doc, dict):
        raise ConfigError("", "config must be a mapping at top level")
    _reject_unknown(doc, TOP_LEVEL, "")
    kd = _section(doc, "kernel")
    if "family" not in kd:
        raise ConfigError("kernel.family", "required")
    try:
        kernel = KernelSpec.from_dict(kd)
    except ValueError as exc:
        raise ConfigError("kernel", str(exc)) from None
    nmax = _int(doc.get("nmax", 256), "nmax", lo=2)

    cd = _section(doc, "controls")
    for k in cd:
        if k not in IntegratorControls.__dataclass_fields__:
            raise ConfigError(f"controls.{k}", "unknown field")
    try:
        controls = IntegratorControls.from_dict(cd)
    except (TypeError, ValueError) as exc:
        raise ConfigError("controls", str(exc)) from None

    dd = _section(doc, "diagnostics")
    _reject_unknown(dd, ("s_list", "modes", "store_states", "floor"), "diagnostics")
    s_list = tuple(_real(s, f"diagnostics.s_list[{i}]") for i, s in enumerate(dd.get("s_list", DEFAULT_SOBOLEV)))
    modes = tuple(_int(m, f"diagnostics.modes[{i}]", lo=0) for i, m in enumerate(dd.get("modes", (0, 1, 2))))
    if any(m >= nmax for m in modes):
        raise ConfigError("diagnostics.modes", f"mode index must be < nmax={nmax}")
    diag = Diagnostics(s_list, modes, bool(dd.get("store_states", True)), _real(dd.get("floor", 1e-13), "diagnostics.floor"))
    if "s_list" not in cd:
        controls.s_list = s_list

    initial = _parse_initial(doc) if (need_initial or "initial" in doc) else None
    if initial is not None and initial.variant == "modes" and len(initial.params["values"]) > nmax:
        raise ConfigError("initial.modes", f"{len(initial.params['values'])} amplitudes exceed nmax={nmax}")

    sweep = None
    if "sweep" in doc:
        sd = _section(doc, "sweep")
        _reject_unknown(sd, ("beta_grid", "x0_grid", "lambda", "b"), "sweep")
        grids = {}
        for g in ("beta_grid", "x0_grid"):
            vals = sd.get(g)
            if isinstance(vals, dict):
                _reject_unknown(vals, ("start", "stop", "num"), f"sweep.{g}")
                vals = list(np.linspace(_real(vals["start"], f"sweep.{g}.start"), _real(vals["stop"], f"sweep.{g}.stop"), _int(vals["num"], f"sweep.{g}.num", lo=1)))
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"sweep.{g}", "expected a nonempty list or {start, stop, num}")
            grids[g] = [_real(float(v), f"sweep.{g}[{i}]") for i, v in enumerate(vals)]
        for i, x0 in enumerate(grids["x0_grid"]):
            if not 0.0 <= x0 < 1.0:
                raise ConfigError(f"sweep.x0_grid[{i}]", "x0 must lie in [0, 1)")
        sweep = SweepSpec(grids["beta_grid"], grids["x0_grid"], _real(sd.get("lambda", 0.0), "sweep.lambda"), parse_complex(sd.get("b", 1.0), "sweep.b"))

    lax = {"probe_count": 8, "pair": "K", "every": 1}
    ld = _section(doc, "lax")
    _reject_unknown(ld, tuple(lax), "lax")
    lax.update(ld)
    _int(lax["probe_count"], "lax.probe_count", lo=1)
    _int(lax["every"], "lax.every", lo=1)
    if lax["pair"] not in ("K", "H"):
        raise ConfigError("lax.pair", "must be K or H")

    md = _section(doc, "manifold")
    _reject_unknown(md, ("t_end", "checkpoint_dt"), "manifold")
    man = {"t_end": md.get("t_end"), "checkpoint_dt": md.get("checkpoint_dt")}

    return RunConfig(kernel, nmax, initial, controls, diag, sweep, lax, man, raw=doc)


def load_config(path, need_initial=True):
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("", f"invalid YAML: {exc}") from None
    return parse_config(doc, need_initial=need_initial)
