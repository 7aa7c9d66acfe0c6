"""Run configuration: a flat ``section.key = value`` text format.

Syntax, one setting per line::

    # comment
    plant.omega_v = 16.0
    controller.controller_poles = -8, -8, -8
    scenario.schedule = 0:27, 2:59, 4:91, 6:59, 8:27

Lists are comma separated; schedule entries are ``time:pressure``; complex
poles use Python notation (``-4+3j``).  Keys not listed in ``KEYS`` are
rejected, and every invariant violation is reported at once.
"""

from dataclasses import dataclass, field, fields, replace
from importlib import resources

from .controller import ControllerConfig
from .errors import ConfigParseError, ConfigValidationError, NonPositiveForce
from .plant import BrakeState, Envelope, PlantParams
from .sim import Scenario

CONTROLLER_CHOICES = ("fbl", "baseline", "both")


@dataclass(frozen=True)
class ForcePressureMap:
    """Affine brake-force to supply-pressure map (bar per kN, bar).

    The defaults fit the three force/pressure pairs 5/27, 10/59, 15/91
    exactly.
    """

    slope: float = 6.4
    intercept: float = -5.0


def force_to_pressure(force, fmap=None):
    fmap = fmap or ForcePressureMap()
    if not force > 0:
        raise NonPositiveForce(f"force must be > 0 kN, got {force}")
    return fmap.slope * force + fmap.intercept


@dataclass(frozen=True)
class RunConfig:
    plant: PlantParams = field(default_factory=PlantParams)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    scenario: Scenario = field(default_factory=Scenario)
    output_path: str = "out"
    controller_kind: str = "fbl"
    force_map: ForcePressureMap = field(default_factory=ForcePressureMap)
    sweep_factors: tuple = (0.9, 0.95, 1.05, 1.1)

    def violations(self):
        out = list(self.plant.violations("plant"))
        out += self.controller.violations("controller")
        out += self.scenario.violations(self.plant.envelope, "scenario")
        if self.controller_kind not in CONTROLLER_CHOICES:
            out.append(("run.controller_kind", f"must be one of {CONTROLLER_CHOICES}"))
        if not self.output_path:
            out.append(("run.output_path", "must not be empty"))
        if not self.force_map.slope > 0:
            out.append(("force.slope", "must be > 0"))
        if not self.sweep_factors or any(not f > 0 for f in self.sweep_factors):
            out.append(("sweep.factors", "need at least one factor, all > 0"))
        return out


# --- value codecs ---------------------------------------------------------------

def _split(text):
    return [p.strip() for p in text.split(",") if p.strip()]


def _float(text):
    return float(text)


def _int(text):
    return int(text)


def _str(text):
    return text


def _floats(text):
    return tuple(float(p) for p in _split(text))


def _poles(text):
    out = []
    for p in _split(text):
        c = complex(p.replace(" ", ""))
        out.append(c.real if c.imag == 0 else c)
    return tuple(out)


def _schedule(text):
    out = []
    for p in _split(text):
        t, _, v = p.partition(":")
        if not _:
            raise ValueError(f"schedule entry {p!r} is not time:value")
        out.append((float(t), float(v)))
    return tuple(out)


def _optional_float(text):
    return None if text.lower() == "none" else float(text)


def _fmt_num(v):
    if isinstance(v, complex):
        return repr(v).strip("()")
    return repr(float(v))


def _fmt_list(vals):
    return ", ".join(_fmt_num(v) for v in vals)


def _fmt_schedule(sched):
    return ", ".join(f"{_fmt_num(t)}:{_fmt_num(p)}" for t, p in sched)


# key -> (parser, formatter, getter, section, attribute)
_PLANT_KEYS = [f.name for f in fields(PlantParams) if f.name != "envelope"]
_ENV_KEYS = [f.name for f in fields(Envelope)]


def _schema():
    s = {}
    for k in _PLANT_KEYS:
        s[f"plant.{k}"] = (_float, _fmt_num)
    for k in _ENV_KEYS:
        s[f"plant.envelope.{k}"] = (_float, _fmt_num)
    s.update({
        "controller.controller_poles": (_poles, _fmt_list),
        "controller.observer_poles": (_poles, _fmt_list),
        "controller.u_sat": (_float, _fmt_num),
        "controller.baseline_gain": (_float, _fmt_num),
        "controller.regime_source": (_str, str),
        "controller.eta_hat0": (_optional_float, lambda v: "none" if v is None else _fmt_num(v)),
        "controller.max_hold_steps": (_int, str),
        "scenario.schedule": (_schedule, _fmt_schedule),
        "scenario.schedule_unit": (_str, str),
        "scenario.duration": (_float, _fmt_num),
        "scenario.dt": (_float, _fmt_num),
        "scenario.initial_state": (_floats, _fmt_list),
        "scenario.perturbation": (_floats, _fmt_list),
        "run.output_path": (_str, str),
        "run.controller_kind": (_str, str),
        "force.slope": (_float, _fmt_num),
        "force.intercept": (_float, _fmt_num),
        "sweep.factors": (_floats, _fmt_list),
    })
    return s


KEYS = _schema()


def _tokenize(text):
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise ConfigParseError(lineno, f"expected 'key = value', got {raw.strip()!r}")
        if key in seen:
            raise ConfigParseError(lineno, f"duplicate key {key!r} (first on line {seen[key][0]})")
        seen[key] = (lineno, value)
    return seen


def parse_config(text):
    """Parse and validate configuration text into a :class:`RunConfig`.

    Raises:
        ConfigParseError: malformed line, duplicate key or unparsable value.
        ConfigValidationError: unknown keys or broken invariants (all listed).
    """
    entries = _tokenize(text)
    problems = [(k, "unknown key") for k in entries if k not in KEYS]
    values = {}
    for key, (lineno, raw) in entries.items():
        if key not in KEYS:
            continue
        try:
            values[key] = KEYS[key][0](raw)
        except ValueError as exc:
            raise ConfigParseError(lineno, f"{key}: {exc}") from None

    plant_kw = {k: values[f"plant.{k}"] for k in _PLANT_KEYS if f"plant.{k}" in values}
    env_kw = {k: values[f"plant.envelope.{k}"] for k in _ENV_KEYS if f"plant.envelope.{k}" in values}
    plant = PlantParams(envelope=Envelope(**env_kw), **plant_kw)

    ctrl_kw = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("controller.")}
    controller = ControllerConfig(**ctrl_kw)

    fmap = ForcePressureMap(values.get("force.slope", ForcePressureMap.slope),
                            values.get("force.intercept", ForcePressureMap.intercept))

    sc_kw = {}
    unit = values.get("scenario.schedule_unit", "bar")
    if unit not in ("bar", "kN"):
        problems.append(("scenario.schedule_unit", "must be 'bar' or 'kN'"))
    if "scenario.schedule" in values:
        sched = values["scenario.schedule"]
        if unit == "kN":
            try:
                sched = tuple((t, force_to_pressure(f, fmap)) for t, f in sched)
            except NonPositiveForce as exc:
                problems.append(("scenario.schedule", str(exc)))
        sc_kw["schedule"] = sched
    for k in ("duration", "dt"):
        if f"scenario.{k}" in values:
            sc_kw[k] = values[f"scenario.{k}"]
    if "scenario.initial_state" in values:
        st = values["scenario.initial_state"]
        if len(st) != 4:
            problems.append(("scenario.initial_state", "need 4 values: p_L, p_sup, v_v, x_v"))
        else:
            sc_kw["initial_state"] = BrakeState(*st)
    if "scenario.perturbation" in values:
        pert = values["scenario.perturbation"]
        if len(pert) != 2:
            problems.append(("scenario.perturbation", "need 2 factors: case A, case B"))
        else:
            sc_kw["perturbation"] = pert
    scenario = Scenario(**sc_kw)

    rc = RunConfig(
        plant=plant,
        controller=controller,
        scenario=scenario,
        output_path=values.get("run.output_path", RunConfig.output_path),
        controller_kind=values.get("run.controller_kind", RunConfig.controller_kind),
        force_map=fmap,
        sweep_factors=values.get("sweep.factors", RunConfig.sweep_factors),
    )
    problems += rc.violations()
    if problems:
        raise ConfigValidationError(problems)
    return rc


def dump_config(rc):
    """Serialize a :class:`RunConfig`; ``parse_config`` reads it back equal."""
    v = {}
    for k in _PLANT_KEYS:
        v[f"plant.{k}"] = getattr(rc.plant, k)
    for k in _ENV_KEYS:
        v[f"plant.envelope.{k}"] = getattr(rc.plant.envelope, k)
    for f in fields(ControllerConfig):
        v[f"controller.{f.name}"] = getattr(rc.controller, f.name)
    sc = rc.scenario
    v.update({
        "scenario.schedule": sc.schedule,
        "scenario.schedule_unit": "bar",
        "scenario.duration": sc.duration,
        "scenario.dt": sc.dt,
        "scenario.initial_state": tuple(sc.initial_state),
        "scenario.perturbation": sc.perturbation,
        "run.output_path": rc.output_path,
        "run.controller_kind": rc.controller_kind,
        "force.slope": rc.force_map.slope,
        "force.intercept": rc.force_map.intercept,
        "sweep.factors": rc.sweep_factors,
    })
    lines = []
    section = None
    for key, val in v.items():
        head = key.split(".", 1)[0]
        if head != section:
            if section is not None:
                lines.append("")
            section = head
        lines.append(f"{key} = {KEYS[key][1](val)}")
    return "\n".join(lines) + "\n"


def default_config_text():
    return resources.files("sebrake").joinpath("data/nominal.cfg").read_text()


def load_config(path=None):
    """Parse the file at ``path``, or the shipped nominal config."""
    if path is None:
        return parse_config(default_config_text())
    with open(path) as fh:
        return parse_config(fh.read())


def with_dt(rc, dt):
    return replace(rc, scenario=replace(rc.scenario, dt=dt))
