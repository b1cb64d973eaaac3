"""Refractive indices, group indices and poling period of a poled crystal.

Wavelengths are in nm at the API boundary and converted to µm internally,
where the coefficient tables are defined. Temperatures are in °C.

The default material is flux-grown KTP: the Kato-Takaoka Sellmeier equations
(stated at 20 °C), the linear thermo-optic coefficients of Emanueli and Arie
for 532-1585 nm, and a fixed dn_y/dT = 28e-6 /°C at and below 532 nm where the
thermo-optic fit does not apply.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DomainError

AXES = ("Y", "Z")
GROUP_INDEX_STEP_NM = 0.1
SUPPORTED_FORMS = ("kato", "cauchy")
FORMAT_VERSION = 1


@dataclass(frozen=True)
class MaterialModel:
    """Coefficient tables for a biaxial crystal, restricted to the Y and Z axes.

    ``index_form`` selects how the Sellmeier coefficients are read (λ in µm):

    * ``"kato"``:   n² = A + B/(λ² − C) + D/(λ² − E)
    * ``"cauchy"``: n = c0 + c1/λ² + c2/λ⁴ + ...  (used for analytic test models)

    ``dn_dT_y``/``dn_dT_z`` are coefficients a_m of Σ a_m/λ^m giving dn/dT in
    1/°C, applied linearly in (T − sellmeier_reference_temperature).
    """

    name: str
    sellmeier_y: tuple
    sellmeier_z: tuple
    dn_dT_y: tuple = (0.0,)
    dn_dT_z: tuple = (0.0,)
    dn_dT_y_pump_override: float | None = None
    pump_override_max_nm: float = 532.0
    thermal_expansion: tuple = (0.0, 0.0)
    valid_range: tuple = (380.0, 1600.0)
    index_form: str = "kato"
    sellmeier_reference_temperature: float = 20.0
    expansion_reference_temperature: float = 25.0
    citations: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.index_form not in SUPPORTED_FORMS:
            raise ValueError(f"unknown index_form {self.index_form!r}, expected one of {SUPPORTED_FORMS}")
        lo, hi = self.valid_range
        if not 0 < lo < hi:
            raise ValueError(f"invalid valid_range {self.valid_range}")

    def sellmeier(self, axis):
        return self.sellmeier_y if _axis(axis) == "Y" else self.sellmeier_z

    def dn_dT(self, axis):
        return self.dn_dT_y if _axis(axis) == "Y" else self.dn_dT_z


@dataclass(frozen=True)
class CrystalSpec:
    """A periodically poled crystal.

    ``axes`` assigns crystal axes to (pump, signal, idler). The default is the
    type-II X-cut PPKTP process: pump and signal on Y, idler on Z.
    """

    length_mm: float
    poling_period_um: float
    material: MaterialModel
    reference_temperature: float = 25.0
    axes: tuple = ("Y", "Y", "Z")

    def __post_init__(self):
        if not self.length_mm > 0:
            raise ValueError(f"crystal length must be positive, got {self.length_mm}")
        if not self.poling_period_um > 0:
            raise ValueError(f"poling period must be positive, got {self.poling_period_um}")
        for a in self.axes:
            _axis(a)

    @property
    def length_um(self):
        return self.length_mm * 1e3

    def with_length(self, length_mm):
        return CrystalSpec(length_mm, self.poling_period_um, self.material,
                           self.reference_temperature, self.axes)


def _axis(axis):
    a = str(axis).upper()
    if a not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    return a


def _check_range(material, wavelength_nm):
    lo, hi = material.valid_range
    wl = np.asarray(wavelength_nm, dtype=float)
    if np.any(~np.isfinite(wl)) or np.any(wl < lo) or np.any(wl > hi):
        bad = wl[(wl < lo) | (wl > hi) | ~np.isfinite(wl)] if wl.ndim else wl
        raise DomainError(
            f"wavelength {np.ravel(bad)[0]:g} nm outside the valid range "
            f"[{lo:g}, {hi:g}] nm of material {material.name}")
    return wl


def _index_at_reference(material, axis, lam_um):
    c = material.sellmeier(axis)
    if material.index_form == "kato":
        A, B, C, D, E = c
        l2 = lam_um * lam_um
        return np.sqrt(A + B / (l2 - C) + D / (l2 - E))
    # cauchy: powers of 1/λ²
    inv2 = 1.0 / (lam_um * lam_um)
    return sum(ck * inv2 ** k for k, ck in enumerate(c))


def thermo_optic_coefficient(material, axis, wavelength):
    """dn/dT in 1/°C at ``wavelength`` (nm), including the pump override."""
    axis = _axis(axis)
    wl = _check_range(material, wavelength)
    lam_um = wl * 1e-3
    slope = sum(a / lam_um ** m for m, a in enumerate(material.dn_dT(axis)))
    if axis == "Y" and material.dn_dT_y_pump_override is not None:
        slope = np.where(wl <= material.pump_override_max_nm,
                         material.dn_dT_y_pump_override, slope)
    return slope if np.ndim(slope) else float(slope)


def refractive_index(material, axis, wavelength, temperature):
    """Refractive index for light polarized along ``axis``.

    Accepts scalar or array ``wavelength`` (nm). Raises DomainError for
    wavelengths outside ``material.valid_range``.
    """
    axis = _axis(axis)
    wl = _check_range(material, wavelength)
    n0 = _index_at_reference(material, axis, wl * 1e-3)
    dT = temperature - material.sellmeier_reference_temperature
    n = n0 + thermo_optic_coefficient(material, axis, wl) * dT
    return n if np.ndim(n) else float(n)


def group_index(material, axis, wavelength, temperature, step=GROUP_INDEX_STEP_NM):
    """Group index n − λ dn/dλ.

    The derivative is a fourth-order central difference with spacing ``step``
    (nm); the stencil spans ±2·step and must stay inside the valid range.
    """
    wl = np.asarray(wavelength, dtype=float)
    lo, hi = material.valid_range
    if np.any(wl - 2 * step < lo) or np.any(wl + 2 * step > hi):
        raise DomainError(
            f"group index stencil ±{2 * step:g} nm around {np.ravel(wl)[0]:g} nm "
            f"leaves the valid range [{lo:g}, {hi:g}] nm")

    def n(x):
        return refractive_index(material, axis, x, temperature)

    dn = (n(wl - 2 * step) - 8 * n(wl - step) + 8 * n(wl + step) - n(wl + 2 * step)) / (12 * step)
    ng = n(wl) - wl * dn
    return ng if np.ndim(ng) else float(ng)


def poling_period(crystal, temperature):
    """Thermally expanded poling period Λ(T) in µm."""
    a, b = crystal.material.thermal_expansion
    dT = np.asarray(temperature, dtype=float) - crystal.material.expansion_reference_temperature
    period = crystal.poling_period_um * (1.0 + a * dT + b * dT * dT)
    return period if np.ndim(period) else float(period)


def material_from_dict(data):
    """Build a MaterialModel from the structured coefficient-table layout."""
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported material table format_version {version!r}")
    axes = data["axes"]
    override = data.get("pump_override") or {}
    if override and override.get("axis", "Y").upper() != "Y":
        raise ValueError("pump_override is only supported on axis Y")
    expansion = data.get("thermal_expansion", {})
    return MaterialModel(
        name=data["name"],
        sellmeier_y=tuple(axes["Y"]["sellmeier"]),
        sellmeier_z=tuple(axes["Z"]["sellmeier"]),
        dn_dT_y=tuple(axes["Y"].get("dn_dT", (0.0,))),
        dn_dT_z=tuple(axes["Z"].get("dn_dT", (0.0,))),
        dn_dT_y_pump_override=override.get("dn_dT"),
        pump_override_max_nm=float(override.get("max_wavelength_nm", 532.0)),
        thermal_expansion=(float(expansion.get("linear", 0.0)), float(expansion.get("quadratic", 0.0))),
        valid_range=tuple(data["valid_range_nm"]),
        index_form=data.get("index_form", "kato"),
        sellmeier_reference_temperature=float(data.get("sellmeier_reference_temperature_C", 20.0)),
        expansion_reference_temperature=float(expansion.get("reference_temperature_C", 25.0)),
        citations=dict(data.get("citations", {})),
    )


def load_material(path):
    """Load a material coefficient table from a JSON file."""
    with open(Path(path), encoding="utf-8") as fh:
        return material_from_dict(json.load(fh))


def _builtin(name):
    text = resources.files("ppktp_source").joinpath("data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return material_from_dict(json.loads(text))


KTP = _builtin("ktp")

MATERIALS = {"KTP": KTP}


def get_material(name_or_path):
    """Return a built-in material by name, or load one from a JSON path."""
    if name_or_path in MATERIALS:
        return MATERIALS[name_or_path]
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return load_material(path)
    raise ValueError(f"unknown material {name_or_path!r}; built-ins: {sorted(MATERIALS)}")


def default_crystal(length_mm=25.0, poling_period_um=10.0):
    """The 10 µm PPKTP crystal used for 405 nm → 810 nm type-II conversion."""
    return CrystalSpec(length_mm=length_mm, poling_period_um=poling_period_um, material=KTP)
