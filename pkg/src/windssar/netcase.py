"""Static network case and study configuration.

A study is one structured text document with sections [case], [buses],
[branches], [loads], [generators], [wind], [agc], [uncertainty] and
[tolerances]. Device lines are whitespace-separated key=value tokens, e.g.

    [branches]
    from=1 to=2 r=0.0035 x=0.0411 b=0.6987

Numeric fields are per-unit on base_mva by default; a trailing ``MW`` (or
``pu``) suffix tags the unit explicitly. Comments start with '#'. Unknown
keys are rejected with a line locus. ``dump_case`` emits a canonical pu
document whose floats round-trip bit-exactly through ``load_case``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import CaseFormatError
from .uncertainty import BetaMarginal, calibrate_marginal


@dataclass(frozen=True)
class Bus:
    id: int
    name: str = ""


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0
    tap: float = 1.0


@dataclass(frozen=True)
class LoadSpec:
    bus: int
    p: float      # pu
    q: float      # pu


@dataclass(frozen=True)
class SgSpec:
    """Synchronous generator: classic (2 states) or third_order_exciter (6).

    v_set is the scheduled terminal voltage magnitude used by the power flow;
    the exciter voltage reference is back-solved per equilibrium. x_q defaults
    to x_d for the third-order model and to x_d_prime for the classic one.
    """

    bus: int
    model: str                      # "classic" | "third_order_exciter"
    t_j: float                      # s (2H)
    d: float                        # pu damping on speed deviation
    x_d_prime: float                # pu
    v_set: float                    # pu
    p_min: float                    # pu
    p_max: float                    # pu
    p_set: float                    # pu scheduled active output
    x_d: Optional[float] = None
    x_q: Optional[float] = None
    t_d0_prime: Optional[float] = None
    k_a: Optional[float] = None
    t_a: Optional[float] = None
    t_b: Optional[float] = None
    t_c: Optional[float] = None
    t_r: Optional[float] = None

    @property
    def n_states(self) -> int:
        return 6 if self.model == "third_order_exciter" else 2

    @property
    def xq_eff(self) -> float:
        if self.x_q is not None:
            return self.x_q
        return self.x_d if self.model == "third_order_exciter" else self.x_d_prime


@dataclass(frozen=True)
class WindFarmSpec:
    bus: int
    capacity: float                 # pu
    forecast: float                 # pu
    marginal: BetaMarginal
    power_factor: float = 1.0

    @property
    def q_injection(self) -> float:
        """Reactive injection at the forecast (constant power factor)."""
        return _wind_q(self.forecast, self.power_factor)


def _wind_q(p, power_factor):
    if power_factor >= 1.0:
        return 0.0
    return p * np.tan(np.arccos(power_factor))


@dataclass(frozen=True)
class AgcPolicy:
    """Per-SG contribution factors for redistributing wind deviations."""

    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gamma",
                           np.asarray(self.gamma, dtype=float))


@dataclass(frozen=True)
class Tolerances:
    pf_tol: float = 1e-8
    pf_max_iter: int = 30
    eq_tol: float = 1e-9
    fd_check_tol: float = 1e-6
    sib_tol: float = 1e-12
    margin_tol: float = 1e-6
    eig_sep_tol: float = 1e-4
    sens_step: float = 1e-5
    ray_tol: float = 1e-4
    boundary_tol: float = 1e-6
    resid_cap: float = 1e-3


@dataclass(frozen=True)
class StudyConfig:
    agc: AgcPolicy
    alpha_conf: float = 0.95
    n_samples: int = 10000
    seed: int = 0
    rank_corr: np.ndarray = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.rank_corr is not None:
            object.__setattr__(self, "rank_corr",
                               np.asarray(self.rank_corr, dtype=float))


@dataclass(frozen=True)
class NetworkCase:
    name: str
    base_mva: float
    frequency_hz: float
    slack_bus: int
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    loads: tuple[LoadSpec, ...]
    sg_units: tuple[SgSpec, ...]
    wind_farms: tuple[WindFarmSpec, ...]

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_sg(self) -> int:
        return len(self.sg_units)

    @property
    def n_wind(self) -> int:
        return len(self.wind_farms)

    @property
    def omega_s(self) -> float:
        """Synchronous speed in rad/s."""
        return 2.0 * np.pi * self.frequency_hz

    @property
    def total_load(self) -> float:
        return sum(ld.p for ld in self.loads)

    def bus_index(self, bus_id: int) -> int:
        try:
            return self._bus_lookup[bus_id]
        except AttributeError:
            lookup = {b.id: i for i, b in enumerate(self.buses)}
            object.__setattr__(self, "_bus_lookup", lookup)
            return lookup[bus_id]

    def has_infinite_bus(self) -> bool:
        """True when the slack bus carries no machine (ideal source)."""
        return all(sg.bus != self.slack_bus for sg in self.sg_units)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_SECTIONS = ("case", "buses", "branches", "loads", "generators", "wind",
             "agc", "uncertainty", "tolerances")

_CASE_KEYS = {"name", "base_mva", "frequency_hz", "slack_bus"}
_BUS_KEYS = {"id", "name"}
_BRANCH_KEYS = {"from", "to", "r", "x", "b", "tap"}
_LOAD_KEYS = {"bus", "p", "q"}
_GEN_KEYS = {"bus", "model", "t_j", "d", "x_d", "x_d_prime", "x_q",
             "t_d0_prime", "k_a", "t_a", "t_b", "t_c", "t_r", "v_set",
             "p_min", "p_max", "p_set"}
_WIND_KEYS = {"bus", "capacity", "forecast", "sigma", "power_factor",
              "shape_a", "shape_b", "err_lower", "err_upper"}
_AGC_KEYS = {"gamma"}
_UNC_KEYS = {"alpha_conf", "n_samples", "seed", "rho"}
_TOL_KEYS = {f.lower() for f in Tolerances.__dataclass_fields__}

_GEN_MODELS = ("classic", "third_order_exciter")
_THIRD_ORDER_REQUIRED = ("x_d", "t_d0_prime", "k_a", "t_a", "t_b", "t_c", "t_r")


def _parse_number(token, base_mva, line_no, key):
    """Parse a numeric token honoring a pu/MW unit suffix."""
    text = token.strip()
    scale = 1.0
    low = text.lower()
    if low.endswith("mw") or low.endswith("mva") or low.endswith("mvar"):
        cut = -2 if low.endswith("mw") else (-3 if low.endswith("mva") else -4)
        text = text[:cut]
        if base_mva is None:
            raise CaseFormatError("MW value before base_mva is known",
                                  line=line_no, field=key)
        scale = 1.0 / base_mva
    elif low.endswith("pu"):
        text = text[:-2]
    try:
        return float(text) * scale
    except ValueError:
        raise CaseFormatError(f"bad number '{token}'", line=line_no, field=key)


def _split_kv(line, line_no, allowed):
    out = {}
    for tok in line.split():
        if "=" not in tok:
            raise CaseFormatError(f"expected key=value, got '{tok}'",
                                  line=line_no)
        key, _, val = tok.partition("=")
        key = key.strip().lower()
        if key not in allowed:
            raise CaseFormatError(f"unknown key '{key}'", line=line_no,
                                  field=key)
        if key in out:
            raise CaseFormatError(f"duplicate key '{key}'", line=line_no,
                                  field=key)
        out[key] = val.strip()
    return out


def load_case(text: str) -> tuple[NetworkCase, StudyConfig]:
    """Parse a case document into (NetworkCase, StudyConfig).

    Returns fully populated but unvalidated objects; call ``validate_case``
    afterwards. Raises CaseFormatError with a line locus for malformed input,
    duplicate ids and missing required fields.
    """
    section = None
    case_kv = {}
    buses, branches, loads, gens, winds = [], [], [], [], []
    gamma_text = None
    unc_kv = {}
    tol_kv = {}
    base_mva = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise CaseFormatError(f"unknown section '{section}'",
                                      line=line_no)
            continue
        if section is None:
            raise CaseFormatError("content before any section header",
                                  line=line_no)

        if section == "case":
            kv = _split_kv(line, line_no, _CASE_KEYS)
            for k, v in kv.items():
                if k in case_kv:
                    raise CaseFormatError(f"duplicate case key '{k}'",
                                          line=line_no, field=k)
                case_kv[k] = (v, line_no)
            if "base_mva" in kv:
                base_mva = _parse_number(kv["base_mva"], None, line_no,
                                         "base_mva")
        elif section == "buses":
            kv = _split_kv(line, line_no, _BUS_KEYS)
            if "id" not in kv:
                raise CaseFormatError("bus line needs id=", line=line_no,
                                      field="id")
            buses.append((Bus(id=int(kv["id"]), name=kv.get("name", "")),
                          line_no))
        elif section == "branches":
            kv = _split_kv(line, line_no, _BRANCH_KEYS)
            for req in ("from", "to", "r", "x"):
                if req not in kv:
                    raise CaseFormatError("branch line missing field",
                                          line=line_no, field=req)
            branches.append(Branch(
                from_bus=int(kv["from"]), to_bus=int(kv["to"]),
                r=_parse_number(kv["r"], base_mva, line_no, "r"),
                x=_parse_number(kv["x"], base_mva, line_no, "x"),
                b=_parse_number(kv.get("b", "0"), base_mva, line_no, "b"),
                tap=float(kv.get("tap", "1.0"))))
        elif section == "loads":
            kv = _split_kv(line, line_no, _LOAD_KEYS)
            for req in ("bus", "p", "q"):
                if req not in kv:
                    raise CaseFormatError("load line missing field",
                                          line=line_no, field=req)
            loads.append(LoadSpec(
                bus=int(kv["bus"]),
                p=_parse_number(kv["p"], base_mva, line_no, "p"),
                q=_parse_number(kv["q"], base_mva, line_no, "q")))
        elif section == "generators":
            kv = _split_kv(line, line_no, _GEN_KEYS)
            gens.append((kv, line_no))
        elif section == "wind":
            kv = _split_kv(line, line_no, _WIND_KEYS)
            winds.append((kv, line_no))
        elif section == "agc":
            kv = _split_kv(line, line_no, _AGC_KEYS)
            if "gamma" in kv:
                # Gamma components are comma separated so the vector stays on
                # one key=value token.
                gamma_text = (kv["gamma"], line_no)
        elif section == "uncertainty":
            kv = _split_kv(line, line_no, _UNC_KEYS)
            for k, v in kv.items():
                unc_kv[k] = (v, line_no)
        elif section == "tolerances":
            kv = _split_kv(line, line_no, _TOL_KEYS)
            for k, v in kv.items():
                tol_kv[k] = (v, line_no)

    for req in ("base_mva", "slack_bus"):
        if req not in case_kv:
            raise CaseFormatError(f"[case] section missing '{req}'", field=req)

    name = case_kv.get("name", ("unnamed", 0))[0]
    frequency_hz = float(case_kv.get("frequency_hz", ("60", 0))[0])
    slack_bus = int(case_kv["slack_bus"][0])

    seen_ids = set()
    for bus, line_no in buses:
        if bus.id in seen_ids:
            raise CaseFormatError(f"duplicate bus id {bus.id}", line=line_no,
                                  field="id")
        seen_ids.add(bus.id)

    sg_units = [_build_sg(kv, base_mva, line_no) for kv, line_no in gens]
    seen_sg = set()
    for sg, (kv, line_no) in zip(sg_units, gens):
        if sg.bus in seen_sg:
            raise CaseFormatError(f"duplicate generator at bus {sg.bus}",
                                  line=line_no, field="bus")
        seen_sg.add(sg.bus)

    wind_farms = [_build_wind(kv, base_mva, line_no) for kv, line_no in winds]
    seen_w = set()
    for wf, (kv, line_no) in zip(wind_farms, winds):
        if wf.bus in seen_w:
            raise CaseFormatError(f"duplicate wind farm at bus {wf.bus}",
                                  line=line_no, field="bus")
        seen_w.add(wf.bus)

    if gamma_text is None:
        raise CaseFormatError("[agc] section missing 'gamma'", field="gamma")
    gamma = np.array([float(tok) for tok in gamma_text[0].split(",") if tok],
                     dtype=float)

    rho = None
    if "rho" in unc_kv:
        rho_rows = [[float(tok) for tok in row.split(",") if tok]
                    for row in unc_kv["rho"][0].split("|")]
        rho = np.asarray(rho_rows, dtype=float)
    elif wind_farms:
        rho = np.eye(len(wind_farms))

    tol_fields = {}
    for k, (v, line_no) in tol_kv.items():
        want = Tolerances.__dataclass_fields__[k].type
        tol_fields[k] = int(v) if want == "int" else float(v)

    case = NetworkCase(
        name=name, base_mva=base_mva, frequency_hz=frequency_hz,
        slack_bus=slack_bus, buses=tuple(b for b, _ in buses),
        branches=tuple(branches), loads=tuple(loads),
        sg_units=tuple(sg_units), wind_farms=tuple(wind_farms))
    cfg = StudyConfig(
        agc=AgcPolicy(gamma=gamma),
        alpha_conf=float(unc_kv.get("alpha_conf", ("0.95", 0))[0]),
        n_samples=int(unc_kv.get("n_samples", ("10000", 0))[0]),
        seed=int(unc_kv.get("seed", ("0", 0))[0]),
        rank_corr=rho,
        tolerances=Tolerances(**tol_fields))
    return case, cfg


def _build_sg(kv, base_mva, line_no):
    for req in ("bus", "model", "t_j", "d", "x_d_prime", "v_set", "p_min",
                "p_max", "p_set"):
        if req not in kv:
            raise CaseFormatError("generator line missing field",
                                  line=line_no, field=req)
    model = kv["model"]
    if model not in _GEN_MODELS:
        raise CaseFormatError(f"unknown generator model '{model}'",
                              line=line_no, field="model")
    if model == "third_order_exciter":
        for req in _THIRD_ORDER_REQUIRED:
            if req not in kv:
                raise CaseFormatError(
                    "third_order_exciter generator missing field",
                    line=line_no, field=req)

    def num(key, default=None):
        if key not in kv:
            return default
        return _parse_number(kv[key], base_mva, line_no, key)

    sg = SgSpec(
        bus=int(kv["bus"]), model=model, t_j=num("t_j"), d=num("d"),
        x_d_prime=num("x_d_prime"), v_set=num("v_set"), p_min=num("p_min"),
        p_max=num("p_max"), p_set=num("p_set"), x_d=num("x_d"),
        x_q=num("x_q"), t_d0_prime=num("t_d0_prime"), k_a=num("k_a"),
        t_a=num("t_a"), t_b=num("t_b"), t_c=num("t_c"), t_r=num("t_r"))
    if sg.x_q is None:
        sg = replace(sg, x_q=sg.xq_eff)
    return sg


def _build_wind(kv, base_mva, line_no):
    for req in ("bus", "capacity", "forecast"):
        if req not in kv:
            raise CaseFormatError("wind line missing field", line=line_no,
                                  field=req)

    def num(key, default=None):
        if key not in kv:
            return default
        return _parse_number(kv[key], base_mva, line_no, key)

    capacity = num("capacity")
    forecast = num("forecast")
    if "shape_a" in kv or "shape_b" in kv:
        for req in ("shape_a", "shape_b", "err_lower", "err_upper"):
            if req not in kv:
                raise CaseFormatError("explicit marginal missing field",
                                      line=line_no, field=req)
        marginal = BetaMarginal(shape_a=float(kv["shape_a"]),
                                shape_b=float(kv["shape_b"]),
                                lower=num("err_lower"),
                                upper=num("err_upper"))
    elif "sigma" in kv:
        # Default error support: the injection can neither go negative nor
        # exceed the installed capacity.
        lower = num("err_lower", -forecast)
        upper = num("err_upper", capacity - forecast)
        marginal = calibrate_marginal(sigma=num("sigma"), lower=lower,
                                      upper=upper, mean=0.0)
    else:
        raise CaseFormatError("wind line needs sigma= or explicit shapes",
                              line=line_no, field="sigma")
    return WindFarmSpec(bus=int(kv["bus"]), capacity=capacity,
                        forecast=forecast, marginal=marginal,
                        power_factor=float(kv.get("power_factor", "1.0")))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def dump_case(case: NetworkCase, cfg: StudyConfig) -> str:
    """Serialize to the canonical pu document (bit-exact round-trip)."""
    out = []
    out.append("[case]")
    out.append(f"name={case.name} base_mva={_fmt(case.base_mva)} "
               f"frequency_hz={_fmt(case.frequency_hz)} "
               f"slack_bus={case.slack_bus}")
    out.append("")
    out.append("[buses]")
    for b in case.buses:
        line = f"id={b.id}"
        if b.name:
            line += f" name={b.name}"
        out.append(line)
    out.append("")
    out.append("[branches]")
    for br in case.branches:
        out.append(f"from={br.from_bus} to={br.to_bus} r={_fmt(br.r)} "
                   f"x={_fmt(br.x)} b={_fmt(br.b)} tap={_fmt(br.tap)}")
    out.append("")
    out.append("[loads]")
    for ld in case.loads:
        out.append(f"bus={ld.bus} p={_fmt(ld.p)} q={_fmt(ld.q)}")
    out.append("")
    out.append("[generators]")
    for sg in case.sg_units:
        parts = [f"bus={sg.bus}", f"model={sg.model}", f"t_j={_fmt(sg.t_j)}",
                 f"d={_fmt(sg.d)}", f"x_d_prime={_fmt(sg.x_d_prime)}"]
        for key in ("x_d", "x_q", "t_d0_prime", "k_a", "t_a", "t_b", "t_c",
                    "t_r"):
            val = getattr(sg, key)
            if val is not None:
                parts.append(f"{key}={_fmt(val)}")
        parts += [f"v_set={_fmt(sg.v_set)}", f"p_min={_fmt(sg.p_min)}",
                  f"p_max={_fmt(sg.p_max)}", f"p_set={_fmt(sg.p_set)}"]
        out.append(" ".join(parts))
    out.append("")
    out.append("[wind]")
    for wf in case.wind_farms:
        out.append(
            f"bus={wf.bus} capacity={_fmt(wf.capacity)} "
            f"forecast={_fmt(wf.forecast)} "
            f"shape_a={_fmt(wf.marginal.shape_a)} "
            f"shape_b={_fmt(wf.marginal.shape_b)} "
            f"err_lower={_fmt(wf.marginal.lower)} "
            f"err_upper={_fmt(wf.marginal.upper)} "
            f"power_factor={_fmt(wf.power_factor)}")
    out.append("")
    out.append("[agc]")
    out.append("gamma=" + ",".join(_fmt(g) for g in cfg.agc.gamma))
    out.append("")
    out.append("[uncertainty]")
    out.append(f"alpha_conf={_fmt(cfg.alpha_conf)} n_samples={cfg.n_samples} "
               f"seed={cfg.seed}")
    if cfg.rank_corr is not None:
        rows = "|".join(",".join(_fmt(v) for v in row)
                        for row in np.asarray(cfg.rank_corr))
        out.append(f"rho={rows}")
    out.append("")
    out.append("[tolerances]")
    tol = cfg.tolerances
    toks = []
    for name_ in Tolerances.__dataclass_fields__:
        val = getattr(tol, name_)
        toks.append(f"{name_}={val if isinstance(val, int) else _fmt(val)}")
    out.append(" ".join(toks))
    out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_case(case: NetworkCase, cfg: StudyConfig) -> list[str]:
    """Check every structural invariant; returns diagnostics (empty = valid).

    Pure: identical inputs yield identical diagnostics, and nothing raises.
    """
    diags = []
    bus_ids = {b.id for b in case.buses}

    if case.base_mva <= 0:
        diags.append("base_mva must be positive")
    if case.frequency_hz <= 0:
        diags.append("frequency_hz must be positive")
    if case.slack_bus not in bus_ids:
        diags.append(f"slack bus {case.slack_bus} is not a declared bus")

    for br in case.branches:
        if br.from_bus not in bus_ids or br.to_bus not in bus_ids:
            diags.append(f"branch {br.from_bus}-{br.to_bus} references an "
                         f"unknown bus")
        if br.x == 0.0:
            diags.append(f"branch {br.from_bus}-{br.to_bus} has zero reactance")

    for ld in case.loads:
        if ld.bus not in bus_ids:
            diags.append(f"load at unknown bus {ld.bus}")

    for i, sg in enumerate(case.sg_units):
        tag = f"generator {i} (bus {sg.bus})"
        if sg.bus not in bus_ids:
            diags.append(f"{tag}: unknown bus")
        if sg.t_j <= 0:
            diags.append(f"{tag}: t_j must be positive")
        if sg.d < 0:
            diags.append(f"{tag}: damping must be nonnegative")
        if sg.x_d_prime <= 0:
            diags.append(f"{tag}: x_d_prime must be positive")
        if sg.p_min > sg.p_max:
            diags.append(f"{tag}: p_min exceeds p_max")
        if not (sg.p_min <= sg.p_set <= sg.p_max):
            diags.append(f"{tag}: p_set outside [p_min, p_max]")
        if sg.model == "third_order_exciter":
            for key in ("t_d0_prime", "t_a", "t_b", "t_c", "t_r"):
                val = getattr(sg, key)
                if val is None or val <= 0:
                    diags.append(f"{tag}: {key} must be positive")
            if sg.k_a is None or sg.k_a <= 0:
                diags.append(f"{tag}: k_a must be positive")
            if sg.x_d is None or sg.x_d < sg.x_d_prime:
                diags.append(f"{tag}: x_d must be >= x_d_prime")

    for j, wf in enumerate(case.wind_farms):
        tag = f"wind farm {j} (bus {wf.bus})"
        if wf.bus not in bus_ids:
            diags.append(f"{tag}: unknown bus")
        if not 0.0 <= wf.forecast <= wf.capacity:
            diags.append(f"{tag}: forecast outside [0, capacity]")
        if not 0.0 < wf.power_factor <= 1.0:
            diags.append(f"{tag}: power_factor outside (0, 1]")

    gamma = cfg.agc.gamma
    if gamma.size != case.n_sg:
        diags.append(f"gamma has {gamma.size} entries for {case.n_sg} "
                     f"generators")
    if np.any(gamma < 0):
        diags.append("gamma components must be nonnegative")
    if abs(float(np.sum(gamma)) - 1.0) > 1e-9:
        diags.append(f"gamma components sum to {float(np.sum(gamma))!r}, "
                     f"expected 1 within 1e-9")

    if not 0.0 < cfg.alpha_conf < 1.0:
        diags.append("alpha_conf must lie in (0, 1)")
    if cfg.n_samples <= 0:
        diags.append("n_samples must be positive")

    rho = cfg.rank_corr
    if case.n_wind:
        if rho is None or rho.shape != (case.n_wind, case.n_wind):
            diags.append("rank correlation matrix shape mismatch")
        else:
            if not np.allclose(rho, rho.T, atol=1e-12):
                diags.append("correlation matrix not symmetric")
            if not np.allclose(np.diag(rho), 1.0, atol=1e-12):
                diags.append("correlation diagonal must be 1")
            if np.any(np.abs(rho) > 1.0 + 1e-12):
                diags.append("correlation out of range [-1, 1]")
            elif np.linalg.eigvalsh(0.5 * (rho + rho.T)).min() < -1e-10:
                diags.append("correlation matrix not positive semidefinite")

    if case.buses and _island_count(case) > 1:
        diags.append("island detected: network graph is not connected")

    return diags


def _island_count(case: NetworkCase) -> int:
    """Connected components of the bus graph (BFS)."""
    ids = [b.id for b in case.buses]
    adj = {i: [] for i in ids}
    for br in case.branches:
        if br.from_bus in adj and br.to_bus in adj:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
    seen = set()
    comps = 0
    for start in ids:
        if start in seen:
            continue
        comps += 1
        stack = [start]
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            stack.extend(n for n in adj[node] if n not in seen)
    return comps
