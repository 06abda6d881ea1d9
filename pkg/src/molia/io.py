"""Scenario and times files.

Both formats are plain ``key = value`` lines; ``#`` starts a comment.

Scenario keys (all optional, missing keys take the reference defaults)::

    tx1 = 0, 0, 0 um        rx1 = 0, 150, 0 um       # "m" or "um" suffix
    D1 = 1e-8               D2 = 5e-8                # m^2/s
    flow = 0, 0, 0                                   # m/s
    rx_radius = 15 um
    zeta0 = 2e6             zeta1 = 4e6
    c1 = 2                  c2 = 2          c3 = 2
    Ts = 10
    noise1 = 0              noise2 = 0

Times files carry the twelve keys ``rel{j}_{l}`` and ``smp{i}_{l}`` in
seconds.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .errors import ScenarioError
from .model import TABLE1, UM, Scenario, TimingSchedule

__all__ = [
    "parse_scenario",
    "load_scenario",
    "dump_scenario",
    "parse_times",
    "load_times",
    "dump_times",
    "TIME_KEYS",
    "TABLE2",
    "preset_times",
    "preset_problem",
    "OPTIMA",
]

TIME_KEYS = tuple(f"rel{j}_{l}" for j in (1, 2, 3) for l in (1, 2)) + tuple(
    f"smp{i}_{l}" for i in (1, 2, 3) for l in (1, 2)
)

# Printed optimum schedules (seconds, rounded to 1 ms), in TIME_KEYS order.
TABLE2 = {
    "r-spec": (0, 0, 0.232, 0.232, 0.332, 0.332, 0.410, 0.410, 0.466, 0.466, 1.051, 1.051),
    "r-gen": (0.012, 0, 0.335, 0.396, 0.329, 0.323, 0.411, 0.411, 0.471, 0.471, 1.055, 1.055),
    "nr-spec": (0.592, 0.592, 0, 0, 0.623, 0.623, 0.674, 0.674, 0.666, 0.666, 1.758, 1.758),
    "nr-gen": (1.262, 0.004, 0, 1.079, 1.102, 1.555, 1.636, 1.575, 1.392, 2.385, 1.877, 1.814),
}

_UNITS = {"m": 1.0, "um": UM}


def _key_values(text: str, source: str):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ScenarioError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _numbers(value: str, key: str, count: int):
    parts = value.replace(",", " ").split()
    scale = 1.0
    if parts and parts[-1] in _UNITS:
        scale = _UNITS[parts.pop()]
    try:
        nums = [float(p) * scale for p in parts]
    except ValueError:
        raise ScenarioError(f"{key}: cannot parse {value!r}") from None
    if len(nums) != count:
        raise ScenarioError(f"{key}: expected {count} number(s), got {len(nums)}")
    return nums


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """Build a :class:`Scenario` from scenario-file text."""
    kv = _key_values(text, source)
    fields = dict(TABLE1)
    tx = [list(p) for p in TABLE1["tx_positions"]]
    rx = [list(p) for p in TABLE1["rx_positions"]]
    c = list(TABLE1["reaction_coeffs"])
    diff = list(TABLE1["diffusion"])
    amp = list(TABLE1["amplitudes"])
    noise = list(TABLE1["env_noise"])
    for key, value in kv.items():
        if key[:2] in ("tx", "rx") and key[2:] in ("1", "2", "3"):
            (tx if key[:2] == "tx" else rx)[int(key[2]) - 1] = _numbers(value, key, 3)
        elif key in ("D1", "D2"):
            diff[int(key[1]) - 1] = _numbers(value, key, 1)[0]
        elif key == "flow":
            fields["flow"] = tuple(_numbers(value, key, 3))
        elif key == "rx_radius":
            fields["rx_radius"] = _numbers(value, key, 1)[0]
        elif key in ("zeta0", "zeta1"):
            amp[int(key[-1])] = _numbers(value, key, 1)[0]
        elif key in ("c1", "c2", "c3"):
            c[int(key[1]) - 1] = _numbers(value, key, 1)[0]
        elif key == "Ts":
            fields["slot_duration"] = _numbers(value, key, 1)[0]
        elif key in ("noise1", "noise2"):
            noise[int(key[-1]) - 1] = _numbers(value, key, 1)[0]
        else:
            raise ScenarioError(f"{source}: unknown key {key!r}")
    fields.update(
        tx_positions=tx,
        rx_positions=rx,
        reaction_coeffs=tuple(c),
        diffusion=tuple(diff),
        amplitudes=tuple(amp),
        env_noise=tuple(noise),
    )
    return Scenario(**fields)


def load_scenario(path) -> Scenario:
    """Read a scenario file; a missing file raises :class:`ScenarioError`."""
    p = Path(path)
    if not p.is_file():
        raise ScenarioError(f"scenario file not found: {p}")
    return parse_scenario(p.read_text(), str(p))


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def dump_scenario(scn: Scenario) -> str:
    lines = []
    for name, arr in (("tx", scn.tx_positions), ("rx", scn.rx_positions)):
        for k, pos in enumerate(arr, 1):
            lines.append(f"{name}{k} = " + ", ".join(_fmt(v / UM) for v in pos) + " um")
    lines += [
        f"D1 = {_fmt(scn.diffusion[0])}",
        f"D2 = {_fmt(scn.diffusion[1])}",
        "flow = " + ", ".join(_fmt(v) for v in scn.flow),
        f"rx_radius = {_fmt(scn.rx_radius / UM)} um",
        f"zeta0 = {_fmt(scn.amplitudes[0])}",
        f"zeta1 = {_fmt(scn.amplitudes[1])}",
    ]
    lines += [f"c{k} = {_fmt(v)}" for k, v in enumerate(scn.reaction_coeffs, 1)]
    lines += [
        f"Ts = {_fmt(scn.slot_duration)}",
        f"noise1 = {_fmt(scn.env_noise[0])}",
        f"noise2 = {_fmt(scn.env_noise[1])}",
    ]
    return "\n".join(lines) + "\n"


def parse_times(text: str, source: str = "<times>") -> TimingSchedule:
    kv = _key_values(text, source)
    missing = [k for k in TIME_KEYS if k not in kv]
    extra = [k for k in kv if k not in TIME_KEYS]
    if missing or extra:
        raise ScenarioError(f"{source}: missing keys {missing}, unknown keys {extra}")
    return TimingSchedule.from_vector([_numbers(kv[k], k, 1)[0] for k in TIME_KEYS])


OPTIMA = ("r-spec", "r-gen", "nr-spec", "nr-gen")


def preset_problem(name) -> str | None:
    """Problem key of a preset name (``table2-r-spec`` -> ``r-spec``), else None."""
    name = str(name)
    for prefix in ("table2-", "optimum-"):
        if name.startswith(prefix) and name.removeprefix(prefix) in OPTIMA:
            return name.removeprefix(prefix)
    return name if name in TABLE2 else None


def preset_times(name: str) -> TimingSchedule:
    """A shipped schedule: the printed optimum rows (``r-spec``, ``r-gen``,
    ``nr-spec``, ``nr-gen``, optionally prefixed ``table2-``) or this
    package's own optima (``optimum-r-spec`` etc.)."""
    name = str(name)
    if name.startswith("optimum-") and preset_problem(name):
        return parse_times(bundled(name + ".times"), name)
    key = name.removeprefix("table2-")
    if key not in TABLE2:
        raise ScenarioError(
            f"unknown times preset {name!r}; choose from {sorted(TABLE2)} "
            f"or optimum-{{{','.join(OPTIMA)}}}"
        )
    return TimingSchedule.from_vector(TABLE2[key])


def load_times(path_or_preset) -> TimingSchedule:
    """Read a times file, or resolve a preset name such as ``table2-r-spec``."""
    p = Path(path_or_preset)
    if p.is_file():
        return parse_times(p.read_text(), str(p))
    if preset_problem(path_or_preset):
        return preset_times(str(path_or_preset))
    raise ScenarioError(f"times file not found: {p}")


def dump_times(ts: TimingSchedule) -> str:
    """Times file text; values are written with round-trip precision so the
    equality conditions survive a save/load cycle."""
    vec = ts.as_vector()
    return "".join(f"{k} = {float(v)!r}\n" for k, v in zip(TIME_KEYS, vec))


def bundled(name: str) -> str:
    """Text of a data file shipped with the package."""
    return resources.files("molia").joinpath("data", name).read_text()

