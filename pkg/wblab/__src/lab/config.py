import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from wblab.__src.utils.errors import ConfigError
from wblab.__src.utils.persistence import sha256_text

logger = logging.getLogger(__name__)

MODULES = ("scalar", "device", "vfp", "waterwave", "serre")


@dataclass(frozen=True)
class Option:
    """
    One typed key of a configuration section.

    Attributes:
        name (str): Key inside the section.
        kind (str): 'real', 'int', 'bool', 'tag', 'reals', 'tags' or 'path'.
        default (Any): Value used when the key is absent.
        rule (Callable, optional): Constraint on the parsed value.
        rule_text (str): Constraint as shown in error messages, e.g. 'alpha ≥ 1'.
        choices (Tuple[str, ...]): Allowed tags.
        only_when (Callable, optional): Guard on the other values of the section;
            the key is rejected when it evaluates to False.
        only_when_text (str): Guard as shown in error messages.
        help (str): One-line description.
    """
    name: str
    kind: str
    default: Any
    rule: Optional[Callable[[Any], bool]] = None
    rule_text: str = ""
    choices: Tuple[str, ...] = ()
    only_when: Optional[Callable[[Dict[str, Any]], bool]] = None
    only_when_text: str = ""
    help: str = ""


def _when(key: str, *values):
    shown = " | ".join(str(v).lower() if isinstance(v, bool) else str(v) for v in values)
    return (lambda v: v.get(key) in values), f"{key} = {shown}"


def _opt(name, kind, default, rule=None, rule_text="", choices=(), when=None, help=""):
    guard, guard_text = when if when is not None else (None, "")
    return Option(name, kind, default, rule, rule_text, tuple(choices), guard, guard_text, help)


_positive = (lambda x: x > 0, "> 0")
_nonnegative = (lambda x: x >= 0, ">= 0")
_courant = (lambda x: 0 < x <= 1, "in (0, 1]")
_cells = (lambda n: n >= 4, ">= 4")

SCHEMAS: Dict[str, List[Option]] = {
    "scalar": [
        _opt("action", "tag", "run", choices=("run", "bressan"), help="run a scenario or the lane-drop demo"),
        _opt("flux", "tag", "burgers", choices=("burgers", "traffic"), when=_when("action", "run")),
        _opt("source", "tag", "damping", choices=("none", "unit", "damping"), when=_when("flux", "burgers"),
             help="g(u) = 0, 1 or -u"),
        _opt("k_value", "real", 1.0, *_nonnegative, when=_when("flux", "burgers"), help="k on its support"),
        _opt("k_support", "reals", [-1.0, 1.0], lambda s: len(s) == 2 and s[0] < s[1], "two increasing values",
             when=_when("flux", "burgers")),
        _opt("lanes", "reals", [2.0, 1.0], lambda s: len(s) == 2 and s[0] > s[1] > 0, "a_left > a_right > 0",
             when=(lambda v: v.get("flux") == "traffic" or v.get("action") == "bressan",
                   "flux = traffic or action = bressan")),
        _opt("u0", "real", 3.0, lambda x: math.isfinite(x), "finite", when=_when("action", "run")),
        _opt("margin", "real", 1e-3, lambda x: 0 < x < 1, "in (0, 1)", when=_when("action", "bressan")),
        _opt("delta", "real", 1e-6, *_positive, when=_when("action", "bressan")),
        _opt("domain", "reals", [-2.0, 2.0], lambda s: len(s) == 2 and s[0] < s[1], "two increasing values"),
        _opt("n_cells", "int", 200, *_cells),
        _opt("t_end", "real", 2.0, *_nonnegative),
        _opt("cfl", "real", 0.9, *_courant),
        _opt("boundary", "tag", "outflow", choices=("outflow", "periodic"), when=_when("action", "run")),
        _opt("snapshots", "reals", [], lambda s: all(t >= 0 for t in s), "times >= 0",
             when=_when("action", "run")),
    ],
    "device": [
        _opt("action", "tag", "run", choices=("run", "iv")),
        _opt("n_cells", "int", 64, *_cells),
        _opt("bias", "real", 0.0, *_nonnegative, when=_when("action", "run")),
        _opt("biases", "reals", [0.0, 0.05, 0.1, 0.15, 0.2], lambda s: all(b >= 0 for b in s), "biases >= 0",
             when=_when("action", "iv")),
        _opt("continuation", "bool", True, when=_when("action", "iv")),
        _opt("debye", "real", 0.15, *_positive, help="Debye length λ"),
        _opt("damping_tau", "real", math.inf, *_positive, help="momentum relaxation time τ, inf for none"),
        _opt("literal_damping", "bool", False),
        _opt("cfl", "real", 0.5, *_courant),
        _opt("steady", "bool", True, when=_when("action", "run")),
        _opt("t_end", "real", 1.0, *_nonnegative, when=_when("steady", False)),
        _opt("tol", "real", 1e-8, *_positive),
        _opt("max_steps", "int", 400_000, *_positive),
    ],
    "vfp": [
        _opt("action", "tag", "eigen", choices=("eigen", "relax")),
        _opt("u", "real", 0.5, lambda x: math.isfinite(x), "finite"),
        _opt("kappa", "real", 1.0, *_positive),
        _opt("n_modes", "int", 4, lambda n: n >= 1, ">= 1"),
        _opt("length", "real", 1.0, *_positive, when=_when("action", "eigen")),
        _opt("n_ordinates", "int", 32, lambda n: n >= 4, ">= 4"),
        _opt("n_cells", "int", 64, *_cells, when=_when("action", "relax")),
        _opt("amplitude", "real", 0.1, *_nonnegative, when=_when("action", "relax")),
        _opt("t_end", "real", 0.5, *_nonnegative, when=_when("action", "relax")),
        _opt("cfl", "real", 0.9, *_courant, when=_when("action", "relax")),
        _opt("kinetic", "tag", "split", choices=("split", "scattering"), when=_when("action", "relax")),
    ],
    "waterwave": [
        _opt("action", "tag", "solitary", choices=("solitary", "evolve")),
        _opt("initial", "tag", "solitary", choices=("solitary", "linear"), when=_when("action", "evolve")),
        _opt("amplitude", "real", 0.1, lambda a: 0 < a <= 0.75, "0 < amplitude ≤ 0.75",
             when=(lambda v: v.get("action") == "solitary" or v.get("initial") == "solitary",
                   "action = solitary or initial = solitary")),
        _opt("n_points", "int", 0, lambda n: n == 0 or n >= 16, "0 (automatic) or >= 16"),
        _opt("length", "real", 2.0 * math.pi, *_positive, when=_when("initial", "linear")),
        _opt("wavenumber", "int", 1, lambda k: k >= 1, ">= 1", when=_when("initial", "linear")),
        _opt("eps", "real", 0.01, *_positive, when=_when("initial", "linear")),
        _opt("depth", "real", 1.0, *_positive, when=_when("initial", "linear")),
        _opt("kind", "tag", "travelling", choices=("travelling", "standing"), when=_when("initial", "linear")),
        _opt("t_end", "real", 10.0, *_nonnegative, when=_when("action", "evolve")),
        _opt("dt", "real", 0.05, *_positive, when=_when("action", "evolve")),
        _opt("filter", "bool", False, when=_when("action", "evolve")),
        _opt("snapshots", "reals", [], lambda s: all(t >= 0 for t in s), "times >= 0",
             when=_when("action", "evolve")),
    ],
    "serre": [
        _opt("action", "tag", "sweep", choices=("dispersion", "solitary", "sweep")),
        _opt("alpha", "real", 1.2, lambda a: a >= 1, "alpha ≥ 1"),
        _opt("kd", "reals", [0.01 * i for i in range(501)], lambda s: all(k >= 0 for k in s), "kd >= 0",
             when=_when("action", "dispersion")),
        _opt("model", "tag", "esgn", choices=("sgn", "esgn"), when=_when("action", "solitary")),
        _opt("amplitude", "real", 0.45, *_positive, when=_when("action", "solitary")),
        _opt("n_points", "int", 0, lambda n: n == 0 or n >= 16, "0 (automatic) or >= 16",
             when=_when("action", "solitary")),
        _opt("amplitudes", "reals", [0.1, 0.45, 0.7],
             lambda s: all(a > 0 for a in s) and all(b > a for a, b in zip(s, s[1:])),
             "positive and strictly increasing", when=_when("action", "sweep")),
        _opt("models", "tags", ["sgn", "esgn", "euler"], choices=("sgn", "esgn", "euler"),
             when=_when("action", "sweep")),
    ],
}


@dataclass
class ScenarioConfig:
    """
    Validated scenario: module tag, section values with defaults filled in, output
    directory and metadata (tool version, SHA-256 of the resolved text).
    """
    module: str
    parameters: Dict[str, Any]
    output: str = "out"
    metadata: Dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.parameters[key]

    def resolved_text(self) -> str:
        """Canonical `key = value` text of every value in effect, sorted by key."""
        lines = [f"module = {self.module}", f"output = {self.output}"]
        for name in sorted(self.parameters):
            lines.append(f"{self.module}.{name} = {format_value(self.parameters[name])}")
        return "\n".join(lines) + "\n"


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(v) for v in value)
    return str(value)


def expand_range(text: str) -> List[float]:
    """
    `start:stop:step` -> [start, start + step, ...] up to and including `stop`
    (within a relative tolerance of 1e-9 of the step).
    """
    start, stop, step = (float(p) for p in text.split(":"))
    if not step > 0 or stop < start:
        raise ValueError(f"range '{text}' needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def _parse_value(option: Option, text: str) -> Any:
    text = text.strip()
    if option.kind == "real":
        return float(text)
    if option.kind == "int":
        return int(text)
    if option.kind == "bool":
        lowered = text.lower()
        if lowered not in ("true", "false"):
            raise ValueError(f"expected true or false, got '{text}'")
        return lowered == "true"
    if option.kind == "tag":
        if text not in option.choices:
            raise ValueError(f"expected one of {', '.join(option.choices)}, got '{text}'")
        return text
    if option.kind == "reals":
        if not text:
            return []
        if ":" in text:
            return expand_range(text)
        return [float(p) for p in text.split(",")]
    if option.kind == "tags":
        tags = [p.strip() for p in text.split(",") if p.strip()]
        bad = [t for t in tags if t not in option.choices]
        if bad:
            raise ValueError(f"unknown tags {', '.join(bad)}; expected {', '.join(option.choices)}")
        return tags
    return text


def _entries(text: str, origin: str) -> Tuple[List[Tuple[str, str, str]], List[Tuple[str, str]]]:
    entries, problems = [], []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append((f"{origin}:{number}", f"expected 'key = value', got '{raw.strip()}'"))
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        entries.append((key, value, f"{origin}:{number}"))
    return entries, problems


def parse_config(text: str, overrides: Sequence[str] = (), module: Optional[str] = None) -> ScenarioConfig:
    """
    Parses and validates a scenario configuration.

    The format is one `key = value` per line with `#` comments; section keys are dotted
    (`serre.alpha = 1.2`). `overrides` are extra `key=value` strings applied after the
    file. Every problem found (unknown keys, type mismatches, constraint violations,
    keys that do not apply given another key's value) is reported in one `ConfigError`.

    Args:
        text (str): Configuration text.
        overrides (Sequence[str]): `key=value` strings taking precedence over `text`.
        module (str, optional): Required module tag; a file naming another module is an
            error, a file naming none gets this one.

    Returns:
        ScenarioConfig: Validated configuration with defaults filled in.

    Example usage:
    ```
        >>> config = parse_config("module = serre\\nserre.action = sweep\\nserre.alpha = 1.2")
        >>> config["amplitudes"]
        [0.1, 0.45, 0.7]
    ```
    """
    entries, problems = _entries(text, "config")
    for i, item in enumerate(overrides):
        extra, extra_problems = _entries(item, f"--set[{i}]")
        entries += [(k, v, origin) for k, v, origin in extra]
        problems += extra_problems

    values: Dict[str, Tuple[str, str]] = {}
    seen_in_file = set()
    for key, value, origin in entries:
        if origin.startswith("config") and key in seen_in_file:
            problems.append((key, f"duplicate key at {origin}"))
        if origin.startswith("config"):
            seen_in_file.add(key)
        values[key] = (value, origin)

    declared = values.pop("module", (module, ""))[0]
    if declared is None:
        problems.append(("module", "missing; expected one of " + ", ".join(MODULES)))
        raise ConfigError(problems)
    if declared not in MODULES:
        problems.append(("module", f"unknown module '{declared}'; expected one of {', '.join(MODULES)}"))
        raise ConfigError(problems)
    if module is not None and declared != module:
        problems.append(("module", f"configuration is for '{declared}', not '{module}'"))
    output = values.pop("output", ("out", ""))[0]

    schema = {option.name: option for option in SCHEMAS[declared]}
    given: Dict[str, Any] = {}
    for key, (value, origin) in values.items():
        section, _, name = key.partition(".")
        if not name:
            problems.append((key, "unknown top-level key"))
            continue
        if section != declared:
            problems.append((key, f"section '{section}' does not match module '{declared}'"))
            continue
        option = schema.get(name)
        if option is None:
            problems.append((key, f"unknown key in section '{declared}'"))
            continue
        try:
            given[name] = _parse_value(option, value)
        except ValueError as err:
            problems.append((key, f"expected {option.kind}: {err}"))

    resolved = {name: given.get(name, option.default) for name, option in schema.items()}
    active: Dict[str, Any] = {}
    for name, option in schema.items():
        applies = option.only_when is None or option.only_when(resolved)
        if not applies:
            if name in given:
                problems.append((f"{declared}.{name}", f"only allowed when {option.only_when_text}"))
            continue
        value = resolved[name]
        if option.rule is not None and name in given and not _check(option, value):
            problems.append((f"{declared}.{name}", f"constraint violated: {option.rule_text} (got {format_value(value)})"))
        active[name] = value

    if problems:
        raise ConfigError(problems)
    config = ScenarioConfig(declared, active, output)
    config.metadata = {"version": _version(), "config_sha256": sha256_text(config.resolved_text())}
    logger.debug("resolved configuration:\n%s", config.resolved_text())
    return config


def _check(option: Option, value: Any) -> bool:
    try:
        return bool(option.rule(value))
    except (TypeError, ValueError, IndexError):
        return False


def _version() -> str:
    from wblab import __version__
    return __version__


def default_config(module: str, **values: Any) -> ScenarioConfig:
    """Configuration of `module` with defaults, overridden by keyword values."""
    lines = [f"module = {module}"] + [f"{module}.{k} = {format_value(v)}" for k, v in values.items()]
    return parse_config("\n".join(lines))
