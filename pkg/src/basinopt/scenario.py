"""Problem instances for the irrigation allocation models.

A scenario bundles everything that defines one planning problem: the crop
roster (prices, yields, variable costs, monthly crop coefficients, minimum
areas), the hydrology of each representative year type (rainfall, reference
evapotranspiration, river inflow, target-environmental-flow fractions),
water costs, and system limits (annual pumping cap, cultivable area, canal
capacity).

Internal units are fixed: water volumes in GL, areas in ha, money in Tk.
Rainfall and ET are depths per area (GL/ha). Source files may declare the
depth unit "1e-4 GL/ha" (the scale the regional tables are printed in);
normalization to GL/ha happens exactly once, at load time.

Months are calendar-indexed: position 0 is January, 11 is December.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

N_MONTHS = 12
MONTHS = ("jan", "feb", "mar", "apr", "may", "jun",
          "jul", "aug", "sep", "oct", "nov", "dec")
JANUARY, FEBRUARY, MARCH, APRIL, MAY, JUNE, JULY, AUGUST, SEPTEMBER, \
    OCTOBER, NOVEMBER, DECEMBER = range(12)

YEAR_LABELS = ("dry", "avg", "wet")
_YEAR_ALIASES = {"average": "avg", "normal": "avg"}

CLAMP_MODES = ("none", "monthly", "per_crop")

# Accepted unit declarations for rainfall / ET depth series -> factor to GL/ha.
DEPTH_UNITS = {"GL/ha": 1.0, "1e-4 GL/ha": 1e-4}
VOLUME_UNITS = {"GL": 1.0}


class ScenarioError(ValueError):
    """A scenario file could not be parsed, or its contents are invalid."""


def canonical_year_label(label: str) -> str:
    label = label.strip().lower()
    return _YEAR_ALIASES.get(label, label)


def _as_series(value, path: str) -> tuple[float, ...]:
    """Validate a 12-entry monthly series and return it as a float tuple."""
    if not isinstance(value, (list, tuple)):
        raise ScenarioError(f"{path}: expected a 12-entry monthly series")
    if len(value) != N_MONTHS:
        raise ScenarioError(
            f"{path}: series length {len(value)} != 12 (one entry per month)")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: non-numeric entry ({exc})") from None


@dataclass(frozen=True)
class CropSpec:
    """One crop: economics plus its monthly water-demand coefficients."""

    name: str
    price: float       # Tk per ton of produce
    crop_yield: float  # ton per ha
    var_cost: float    # Tk per ha, all non-water variable costs
    kc: tuple[float, ...]  # 12 dimensionless crop coefficients, Jan..Dec
    min_area: float    # ha that must be planted at minimum

    def gross_margin(self) -> float:
        """Tk per ha before any water cost: price * yield - var_cost."""
        return self.price * self.crop_yield - self.var_cost


@dataclass(frozen=True)
class HydroYear:
    """Hydrology of one representative year type (12 monthly values each)."""

    label: str
    rainfall: tuple[float, ...]      # GL per ha
    et0: tuple[float, ...]           # GL per ha, reference evapotranspiration
    inflow: tuple[float, ...]        # GL, river inflow available at the canal head
    tef_fraction: tuple[float, ...]  # share of inflow reserved as target env. flow

    def tef(self) -> tuple[float, ...]:
        """Target environmental flow per month, GL."""
        return tuple(f * q for f, q in zip(self.tef_fraction, self.inflow))


@dataclass(frozen=True)
class EconomicParams:
    cw: float  # Tk per GL, surface-water conveyance cost
    cp: float  # Tk per GL, groundwater pumping cost


@dataclass(frozen=True)
class SystemLimits:
    t_pump: float     # GL per year, total pumping capacity
    t_area: float     # ha, total cultivable area
    canal_cap: float  # GL per month, canal carrying capacity


@dataclass(frozen=True)
class ModelOptions:
    """Model-reading switches that are not physical data.

    requirement_clamp controls how the monthly crop water requirement
    W_m = sum_c (kc_cm * et_m - rain_m) * area_c enters costs and pumping:

    - "none":     signed W_m used verbatim (surplus rain in one month can
                  show up as a negative requirement);
    - "monthly":  max(0, W_m), the aggregate clamped at zero (default);
    - "per_crop": sum_c max(0, kc_cm * et_m - rain_m) * area_c, surplus rain
                  on one crop's fields cannot irrigate another crop.
    """

    requirement_clamp: str = "monthly"


@dataclass(frozen=True)
class ValidationFinding:
    severity: str  # "error" | "warning"
    path: str      # dotted location, e.g. "crops.Potato.price"
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[ValidationFinding, ...]

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    @property
    def errors(self) -> tuple[ValidationFinding, ...]:
        return tuple(f for f in self.findings if f.severity == "error")

    @property
    def warnings(self) -> tuple[ValidationFinding, ...]:
        return tuple(f for f in self.findings if f.severity == "warning")

    def summary(self) -> str:
        lines = ["ok" if self.ok else "INVALID"]
        for f in self.findings:
            lines.append(f"  [{f.severity}] {f.path}: {f.message}")
        return "\n".join(lines)


class CropTable:
    """Ordered collection of crops, addressable by position or by name."""

    def __init__(self, crops):
        self._crops = tuple(crops)
        self._by_name = {c.name: c for c in self._crops}

    def __iter__(self):
        return iter(self._crops)

    def __len__(self):
        return len(self._crops)

    def __getitem__(self, key):
        if isinstance(key, (int, slice)):
            return self._crops[key]
        return self._by_name[key]

    def __contains__(self, name) -> bool:
        return name in self._by_name

    def __eq__(self, other):
        if isinstance(other, CropTable):
            return self._crops == other._crops
        return NotImplemented

    def __repr__(self):
        return f"CropTable({[c.name for c in self._crops]})"

    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self._crops)


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance. Safe to share across concurrent solves."""

    crops: CropTable
    years: dict[str, HydroYear]
    economics: EconomicParams
    limits: SystemLimits
    options: ModelOptions = field(default_factory=ModelOptions)
    provenance: dict = field(default_factory=dict)  # free-form source notes

    def year(self, label: str) -> HydroYear:
        key = canonical_year_label(label)
        if key not in self.years:
            raise KeyError(
                f"unknown year label {label!r}; have {sorted(self.years)}")
        return self.years[key]

    def year_labels(self) -> tuple[str, ...]:
        return tuple(self.years)

    def crop_names(self) -> tuple[str, ...]:
        return self.crops.names()

    def min_areas(self) -> tuple[float, ...]:
        return tuple(c.min_area for c in self.crops)

    def with_options(self, **kwargs) -> "Scenario":
        return replace(self, options=replace(self.options, **kwargs))

    def with_limits(self, **kwargs) -> "Scenario":
        return replace(self, limits=replace(self.limits, **kwargs))

    def with_tef_fraction(self, label: str, fraction) -> "Scenario":
        """Copy of the scenario with one year's TEF fractions replaced."""
        key = canonical_year_label(label)
        years = dict(self.years)
        years[key] = replace(years[key],
                             tef_fraction=_as_series(fraction, "tef_fraction"))
        return replace(self, years=years)


# ---------------------------------------------------------------------------
# validation

def validate(s: Scenario) -> ValidationReport:
    """Check every invariant of the instance; findings never raise."""
    out: list[ValidationFinding] = []

    def err(path, msg):
        out.append(ValidationFinding("error", path, msg))

    def warn(path, msg):
        out.append(ValidationFinding("warning", path, msg))

    if len(s.crops) == 0:
        err("crops", "at least one crop is required")
    names = [c.name for c in s.crops]
    if len(set(names)) != len(names):
        err("crops", "crop names must be unique")

    for c in s.crops:
        base = f"crops.{c.name}"
        if c.price < 0:
            err(f"{base}.price", f"negative price {c.price}")
        if c.crop_yield < 0:
            err(f"{base}.crop_yield", f"negative yield {c.crop_yield}")
        if c.var_cost < 0:
            err(f"{base}.var_cost", f"negative variable cost {c.var_cost}")
        if c.min_area < 0:
            err(f"{base}.min_area", f"negative minimum area {c.min_area}")
        if len(c.kc) != N_MONTHS:
            err(f"{base}.kc", f"kc has {len(c.kc)} entries, expected 12")
        else:
            for m, k in enumerate(c.kc):
                if not (0.0 <= k <= 2.0):
                    err(f"{base}.kc[{MONTHS[m]}]",
                        f"crop coefficient {k} outside [0, 2]")
        if c.gross_margin() < 0:
            warn(f"{base}", f"negative gross margin "
                 f"{c.gross_margin():.0f} Tk/ha (price*yield < var_cost)")

    if not s.years:
        err("years", "at least one hydrological year is required")
    for label, y in s.years.items():
        base = f"years.{label}"
        for field_name in ("rainfall", "et0", "inflow", "tef_fraction"):
            series = getattr(y, field_name)
            if len(series) != N_MONTHS:
                err(f"{base}.{field_name}",
                    f"series length {len(series)} != 12")
                continue
            if field_name != "tef_fraction" and any(v < 0 for v in series):
                err(f"{base}.{field_name}", "negative entries not allowed")
        if len(y.tef_fraction) == N_MONTHS:
            for m, f in enumerate(y.tef_fraction):
                if not (0.0 <= f <= 1.0):
                    err(f"{base}.tef_fraction[{MONTHS[m]}]",
                        f"fraction {f} out of range [0, 1]")

    if s.economics.cw < 0:
        err("economics.cw", f"negative conveyance cost {s.economics.cw}")
    if s.economics.cp < 0:
        err("economics.cp", f"negative pumping cost {s.economics.cp}")
    if s.economics.cp < s.economics.cw:
        warn("economics", "pumping cheaper than surface water; the net-benefit "
             "objective is then not concave in the usual direction")

    if s.limits.t_pump <= 0:
        err("limits.t_pump", f"pumping capacity must be positive, got {s.limits.t_pump}")
    if s.limits.t_area <= 0:
        err("limits.t_area", f"total area must be positive, got {s.limits.t_area}")
    if s.limits.canal_cap <= 0:
        err("limits.canal_cap", f"canal capacity must be positive, got {s.limits.canal_cap}")

    total_min = sum(c.min_area for c in s.crops)
    if total_min > s.limits.t_area:
        err("crops", f"min areas exceed total area: sum of minimum areas "
            f"{total_min} ha > cultivable area {s.limits.t_area} ha")

    if s.options.requirement_clamp not in CLAMP_MODES:
        err("options.requirement_clamp",
            f"unknown clamp mode {s.options.requirement_clamp!r}; "
            f"expected one of {CLAMP_MODES}")

    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# TOML scenario files

def load_scenario(path, fmt: str = "auto") -> Scenario:
    """Load a scenario from a TOML file or a CSV bundle directory.

    The returned scenario has units normalized (GL, ha, Tk) and passes
    validate(); a ScenarioError carrying the findings is raised otherwise.
    """
    path = os.fspath(path)
    if fmt == "auto":
        fmt = "csv" if os.path.isdir(path) else "toml"
    if fmt == "toml":
        s = _load_toml(path)
    elif fmt == "csv":
        s = _load_csv_bundle(path)
    else:
        raise ScenarioError(f"unknown scenario format {fmt!r}")

    report = validate(s)
    if not report.ok:
        raise ScenarioError(
            f"{path}: scenario failed validation\n{report.summary()}")
    return s


def _load_toml(path: str) -> Scenario:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"{path}: not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: parse error: {exc}") from None

    units = doc.get("units")
    if not isinstance(units, dict):
        raise ScenarioError(
            f"{path}: missing [units] section; rainfall/et0 unit "
            "declarations are mandatory")
    depth_factor = {}
    for key in ("rainfall", "et0"):
        unit = units.get(key)
        if unit is None:
            raise ScenarioError(f"{path}: [units] must declare {key}")
        if unit not in DEPTH_UNITS:
            raise ScenarioError(
                f"{path}: [units].{key}: unknown unit {unit!r}; "
                f"accepted: {sorted(DEPTH_UNITS)}")
        depth_factor[key] = DEPTH_UNITS[unit]
    inflow_unit = units.get("inflow", "GL")
    if inflow_unit not in VOLUME_UNITS:
        raise ScenarioError(
            f"{path}: [units].inflow: unknown unit {inflow_unit!r}")

    crops_doc = doc.get("crops")
    if not isinstance(crops_doc, dict) or not crops_doc:
        raise ScenarioError(f"{path}: missing or empty [crops.*] sections")
    crops = []
    for key, cd in crops_doc.items():
        base = f"crops.{key}"
        try:
            crops.append(CropSpec(
                name=str(cd.get("name", key)),
                price=float(cd["price"]),
                crop_yield=float(cd["crop_yield"]),
                var_cost=float(cd["var_cost"]),
                kc=_as_series(cd["kc"], f"{base}.kc"),
                min_area=float(cd["min_area"]),
            ))
        except KeyError as exc:
            raise ScenarioError(f"{path}: {base}: missing field {exc}") from None

    years_doc = doc.get("year")
    if not isinstance(years_doc, dict) or not years_doc:
        raise ScenarioError(f"{path}: missing [year.<label>] sections")
    years = {}
    for label, yd in years_doc.items():
        key = canonical_year_label(label)
        base = f"year.{label}"
        try:
            rainfall = _as_series(yd["rainfall"], f"{base}.rainfall")
            et0 = _as_series(yd["et0"], f"{base}.et0")
            inflow = _as_series(yd["inflow"], f"{base}.inflow")
            tef_fraction = _as_series(yd["tef_fraction"], f"{base}.tef_fraction")
        except KeyError as exc:
            raise ScenarioError(f"{path}: {base}: missing series {exc}") from None
        years[key] = HydroYear(
            label=key,
            rainfall=tuple(v * depth_factor["rainfall"] for v in rainfall),
            et0=tuple(v * depth_factor["et0"] for v in et0),
            inflow=tuple(v * VOLUME_UNITS[inflow_unit] for v in inflow),
            tef_fraction=tef_fraction,
        )

    try:
        econ_doc = doc["economics"]
        economics = EconomicParams(cw=float(econ_doc["cw"]),
                                   cp=float(econ_doc["cp"]))
        lim_doc = doc["limits"]
        limits = SystemLimits(t_pump=float(lim_doc["t_pump"]),
                              t_area=float(lim_doc["t_area"]),
                              canal_cap=float(lim_doc["canal_cap"]))
    except KeyError as exc:
        raise ScenarioError(f"{path}: missing section/field {exc}") from None

    opt_doc = doc.get("options", {})
    options = ModelOptions(
        requirement_clamp=str(opt_doc.get("requirement_clamp", "monthly")))

    provenance = dict(doc.get("provenance", {}))
    return Scenario(crops=CropTable(crops), years=years, economics=economics,
                    limits=limits, options=options, provenance=provenance)


def _fmt_value(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float) and (math.isinf(v) or math.isnan(v)):
        raise ScenarioError(f"cannot serialize non-finite value {v}")
    return repr(v)


def _fmt_series(values) -> str:
    return "[" + ", ".join(_fmt_value(float(v)) for v in values) + "]"


def dumps_scenario(s: Scenario) -> str:
    """Serialize a scenario as TOML at full float precision.

    Depth series are written in GL/ha (the internal unit) and declared as
    such, so a load-save-load cycle applies no further scaling.
    """
    lines = []
    note = s.provenance.get("note")
    if note:
        for ln in str(note).splitlines():
            lines.append(f"# {ln}")
    lines += [
        "schema = 1",
        "",
        "[units]",
        'rainfall = "GL/ha"',
        'et0 = "GL/ha"',
        'inflow = "GL"',
        "",
    ]
    for c in s.crops:
        key = c.name.lower().replace(" ", "_").replace("-", "_")
        lines += [
            f"[crops.{key}]",
            f"name = {_fmt_value(c.name)}",
            f"price = {_fmt_value(c.price)}",
            f"crop_yield = {_fmt_value(c.crop_yield)}",
            f"var_cost = {_fmt_value(c.var_cost)}",
            f"min_area = {_fmt_value(c.min_area)}",
            f"kc = {_fmt_series(c.kc)}",
            "",
        ]
    for label, y in s.years.items():
        lines += [
            f"[year.{label}]",
            f"rainfall = {_fmt_series(y.rainfall)}",
            f"et0 = {_fmt_series(y.et0)}",
            f"inflow = {_fmt_series(y.inflow)}",
            f"tef_fraction = {_fmt_series(y.tef_fraction)}",
            "",
        ]
    lines += [
        "[economics]",
        f"cw = {_fmt_value(s.economics.cw)}",
        f"cp = {_fmt_value(s.economics.cp)}",
        "",
        "[limits]",
        f"t_pump = {_fmt_value(s.limits.t_pump)}",
        f"t_area = {_fmt_value(s.limits.t_area)}",
        f"canal_cap = {_fmt_value(s.limits.canal_cap)}",
        "",
        "[options]",
        f"requirement_clamp = {_fmt_value(s.options.requirement_clamp)}",
        "",
    ]
    if s.provenance:
        lines.append("[provenance]")
        for k, v in s.provenance.items():
            lines.append(f"{k} = {_fmt_value(str(v))}")
        lines.append("")
    return "\n".join(lines)


def save_scenario(s: Scenario, path) -> None:
    """Write a scenario as TOML, at full precision (round-trip safe)."""
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(dumps_scenario(s))
    os.replace(tmp, path)


def scenario_digest(s: Scenario) -> str:
    """Short stable content hash identifying the instance."""
    import hashlib
    return hashlib.sha256(dumps_scenario(s).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# CSV bundle (one file per source table)

_BUNDLE_FILES = ("crop_econ.csv", "min_area.csv", "kc.csv",
                 "weather.csv", "inflow.csv", "tef_fraction.csv",
                 "system.csv")


def _read_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except FileNotFoundError:
        raise ScenarioError(f"{path}: not found") from None


def _row_series(row, path, factor=1.0):
    try:
        return tuple(float(row[m]) * factor for m in MONTHS)
    except KeyError as exc:
        raise ScenarioError(f"{path}: missing month column {exc}") from None
    except ValueError as exc:
        raise ScenarioError(f"{path}: bad numeric value ({exc})") from None


def _load_csv_bundle(dirpath: str) -> Scenario:
    """Load a directory of CSV files mirroring the source-table layouts.

    crop_econ.csv: crop,price,crop_yield,var_cost
    min_area.csv:  crop,min_area
    kc.csv:        crop,jan,...,dec
    weather.csv:   year,series,unit,jan,...,dec   (series: rainfall|et0)
    inflow.csv:    year,unit,jan,...,dec
    tef_fraction.csv: year,jan,...,dec
    system.csv:    key,value  (cw, cp, t_pump, t_area, canal_cap,
                               requirement_clamp, optional provenance notes)
    """
    p = lambda name: os.path.join(dirpath, name)

    econ_rows = _read_csv(p("crop_econ.csv"))
    min_rows = {r["crop"]: float(r["min_area"]) for r in _read_csv(p("min_area.csv"))}
    kc_rows = {r["crop"]: r for r in _read_csv(p("kc.csv"))}

    crops = []
    for r in econ_rows:
        name = r["crop"]
        if name not in min_rows:
            raise ScenarioError(f"{p('min_area.csv')}: no row for crop {name!r}")
        if name not in kc_rows:
            raise ScenarioError(f"{p('kc.csv')}: no row for crop {name!r}")
        crops.append(CropSpec(
            name=name,
            price=float(r["price"]),
            crop_yield=float(r["crop_yield"]),
            var_cost=float(r["var_cost"]),
            kc=_row_series(kc_rows[name], p("kc.csv")),
            min_area=min_rows[name],
        ))

    weather = {}
    for r in _read_csv(p("weather.csv")):
        unit = r.get("unit")
        if unit not in DEPTH_UNITS:
            raise ScenarioError(
                f"{p('weather.csv')}: unit declaration missing or unknown: {unit!r}")
        label = canonical_year_label(r["year"])
        weather.setdefault(label, {})[r["series"]] = _row_series(
            r, p("weather.csv"), DEPTH_UNITS[unit])

    inflows = {}
    for r in _read_csv(p("inflow.csv")):
        unit = r.get("unit", "GL")
        if unit not in VOLUME_UNITS:
            raise ScenarioError(f"{p('inflow.csv')}: unknown unit {unit!r}")
        inflows[canonical_year_label(r["year"])] = _row_series(
            r, p("inflow.csv"), VOLUME_UNITS[unit])

    tefs = {canonical_year_label(r["year"]): _row_series(r, p("tef_fraction.csv"))
            for r in _read_csv(p("tef_fraction.csv"))}

    years = {}
    for label, series in weather.items():
        if "rainfall" not in series or "et0" not in series:
            raise ScenarioError(
                f"{p('weather.csv')}: year {label!r} needs both rainfall and et0 rows")
        if label not in inflows:
            raise ScenarioError(f"{p('inflow.csv')}: no inflow row for year {label!r}")
        if label not in tefs:
            raise ScenarioError(
                f"{p('tef_fraction.csv')}: no row for year {label!r}")
        years[label] = HydroYear(label=label, rainfall=series["rainfall"],
                                 et0=series["et0"], inflow=inflows[label],
                                 tef_fraction=tefs[label])

    sys_kv = {r["key"]: r["value"] for r in _read_csv(p("system.csv"))}
    try:
        economics = EconomicParams(cw=float(sys_kv["cw"]), cp=float(sys_kv["cp"]))
        limits = SystemLimits(t_pump=float(sys_kv["t_pump"]),
                              t_area=float(sys_kv["t_area"]),
                              canal_cap=float(sys_kv["canal_cap"]))
    except KeyError as exc:
        raise ScenarioError(f"{p('system.csv')}: missing key {exc}") from None
    options = ModelOptions(
        requirement_clamp=sys_kv.get("requirement_clamp", "monthly"))
    provenance = {k: v for k, v in sys_kv.items()
                  if k not in ("cw", "cp", "t_pump", "t_area", "canal_cap",
                               "requirement_clamp")}
    return Scenario(crops=CropTable(crops), years=years, economics=economics,
                    limits=limits, options=options, provenance=provenance)


# ---------------------------------------------------------------------------
# bundled dataset

def _data_path(name: str) -> str:
    return os.path.join(os.path.dirname(__file__), "data", name)


def builtin_rajshahi() -> Scenario:
    """The bundled Rajshahi Barind Tract instance (nine crops, three years).

    Everything except the river inflow series is transcribed verbatim from
    published regional tables; the inflow series is a reconstructed example
    (flagged in the file's provenance section) because monthly inflow was
    never published as numbers. Results that depend on inflow therefore
    depend on this reconstruction.
    """
    return load_scenario(_data_path("rajshahi.toml"), fmt="toml")


def builtin_rajshahi_csv() -> Scenario:
    """Same instance loaded from the CSV bundle mirror."""
    return load_scenario(_data_path("rajshahi_csv"), fmt="csv")
