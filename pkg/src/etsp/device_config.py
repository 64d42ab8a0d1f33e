"""
Device description, validation and unit scaling.

All external interfaces (config files, CSV output) are SI. Internally every
solver works in a scaled system -- lengths in nm, energies in eV, potentials
in V, temperatures in K -- because the raw SI numbers span ~40 orders of
magnitude and wreck the conditioning of the assembled operators.
``ScaledDevice`` carries the converted values plus the derived constants the
solvers need (2D density of states, Poisson coupling, contact surface
density, relaxation prefactor).

Config files are flat ``key = value`` text; the full key table is in
``CONFIG_KEYS`` (and in the README). Keys omitted from the file fall back to
the defaults below, which describe the reference device: a 50 nm double-gate
MOSFET with a 5 nm silicon film between two 3 nm oxide layers, 10 nm highly
doped source/drain regions and a 30 nm channel.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "PhysicalConstants",
    "Tolerances",
    "DeviceSpec",
    "DopingProfile",
    "ScaledDevice",
    "ConfigError",
    "CONSTANTS",
    "CONFIG_KEYS",
    "default_spec",
    "load_config",
    "save_config",
    "scale_device",
    "build_doping",
    "default_phi0",
]


class ConfigError(ValueError):
    """Malformed or invalid configuration; ``key`` names the offender."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants, SI."""

    hbar: float = 1.054571817e-34       # reduced Planck constant (J s)
    e_charge: float = 1.602176634e-19   # elementary charge (C)
    k_B: float = 1.380649e-23           # Boltzmann constant (J/K)
    eps0: float = 8.8541878128e-12      # vacuum permittivity (F/m)
    m_e: float = 9.1093837015e-31       # electron rest mass (kg)

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) <= 0.0:
                raise ConfigError(f.name, "physical constants must be positive")


CONSTANTS = PhysicalConstants()

# Elastic scattering coefficient from the low-field mobility calibration
# phi0 = 1/(mu0 * n_i), mu0 in m^2/(V s), n_i the intrinsic surface density
# in m^-2.
_MU0 = 0.12       # m^2 V^-1 s^-1
_NI_2D = 1.0e10   # m^-2


def default_phi0(mu0: float = _MU0, n_i: float = _NI_2D) -> float:
    """Elastic scattering coefficient 1/(mu0*n_i) (V s)."""
    return 1.0 / (mu0 * n_i)


@dataclass(frozen=True)
class Tolerances:
    """Iteration controls for the nested solvers."""

    tol_gummel: float = 1.0e-6    # outer loop: ||V_old - V_new||_inf (V)
    tol_newton: float = 1.0e-10   # transport Newton: scaled residual inf-norm
    max_gummel: int = 200
    max_newton: int = 50
    tail_tol: float = 1.0e-12     # subband-truncation warning threshold


@dataclass(frozen=True)
class DeviceSpec:
    """
    Full device + run description, SI units.

    Geometry: transport direction x in [0, L_S+L_C+L_D], confinement
    direction z in [0, ell_Si + 2*ell_ox]; the silicon film sits between the
    two oxide layers, gate contacts cover the channel on both z boundaries.
    """

    # geometry (m)
    L_S: float = 10e-9
    L_C: float = 30e-9
    L_D: float = 10e-9
    ell_ox: float = 3e-9
    ell_Si: float = 5e-9
    # materials
    U_c: float = 3.0 * CONSTANTS.e_charge   # Si/SiO2 barrier energy (J)
    eps_Si: float = 11.7                    # relative permittivity
    eps_ox: float = 3.9
    m_eff_Si: float = 0.19 * CONSTANTS.m_e  # effective masses (kg)
    m_eff_ox: float = 0.5 * CONSTANTS.m_e   # not fixed by the model; common choice
    # doping (m^-3)
    N_plus: float = 1e26
    N_minus: float = 1e21
    # transport / scattering
    T_L: float = 300.0                      # lattice temperature (K)
    phi0: float = default_phi0()            # elastic scattering coefficient (V s)
    phi_ph: float = 1e-4 / default_phi0()   # phonon scattering coefficient
    eps_ph: float = 0.063 * CONSTANTS.e_charge  # phonon energy (J); Si optical phonon
    s_exp: float = 0.5                      # cross-section energy exponent
    # bias program (V)
    V_G: float = 0.0
    V_DS_max: float = 0.5
    dV_DS: float = 0.02
    # numerics
    N_x: int = 50
    N_z: int = 50
    n_modes: int = 8
    workers: int = 1                        # slice eigensolves run in parallel if > 1
    tol: Tolerances = Tolerances()
    constants: PhysicalConstants = CONSTANTS

    @property
    def L(self) -> float:
        return self.L_S + self.L_C + self.L_D

    @property
    def ell(self) -> float:
        return self.ell_Si + 2.0 * self.ell_ox

    @property
    def gate_span(self) -> tuple[float, float]:
        """Gate contacts occupy x in [L_S, L_S+L_C] on both z boundaries."""
        return (self.L_S, self.L_S + self.L_C)

    def validate(self) -> "DeviceSpec":
        pos = {
            "geometry.L_S": self.L_S, "geometry.L_C": self.L_C,
            "geometry.L_D": self.L_D, "geometry.ell_ox": self.ell_ox,
            "geometry.ell_Si": self.ell_Si,
            "materials.eps_Si": self.eps_Si, "materials.eps_ox": self.eps_ox,
            "materials.m_eff_Si": self.m_eff_Si, "materials.m_eff_ox": self.m_eff_ox,
            "transport.T_L": self.T_L, "transport.phi0": self.phi0,
            "bias.dV_DS": self.dV_DS,
            "numerics.tol_gummel": self.tol.tol_gummel,
            "numerics.tol_newton": self.tol.tol_newton,
        }
        for key, val in pos.items():
            if not (val > 0.0) or not math.isfinite(val):
                raise ConfigError(key, f"must be positive and finite, got {val!r}")
        nonneg = {
            "materials.U_c": self.U_c, "doping.N_plus": self.N_plus,
            "doping.N_minus": self.N_minus, "transport.phi_ph": self.phi_ph,
            "transport.eps_ph": self.eps_ph, "bias.V_DS_max": self.V_DS_max,
        }
        for key, val in nonneg.items():
            if val < 0.0 or not math.isfinite(val):
                raise ConfigError(key, f"must be nonnegative and finite, got {val!r}")
        if not (-2.0 < self.s_exp < 2.0):
            raise ConfigError("transport.s_exp", f"requires -2 < s < 2, got {self.s_exp!r}")
        if self.N_x < 2:
            raise ConfigError("numerics.N_x", f"needs at least 2 intervals, got {self.N_x}")
        if self.N_z < 2:
            raise ConfigError("numerics.N_z", f"needs at least 2 intervals, got {self.N_z}")
        if not (1 <= self.n_modes <= self.N_z - 1):
            raise ConfigError(
                "numerics.n_modes",
                f"must satisfy 1 <= n_modes <= N_z-1 = {self.N_z - 1}, got {self.n_modes}",
            )
        if self.workers < 1:
            raise ConfigError("numerics.workers", f"must be >= 1, got {self.workers}")
        if self.tol.max_gummel < 1 or self.tol.max_newton < 1:
            raise ConfigError("numerics.max_gummel", "iteration caps must be >= 1")
        return self


# key -> (target field, python type). Tolerance fields are routed into the
# nested Tolerances record.
CONFIG_KEYS: dict[str, tuple[str, type]] = {
    "geometry.L_S": ("L_S", float),
    "geometry.L_C": ("L_C", float),
    "geometry.L_D": ("L_D", float),
    "geometry.ell_ox": ("ell_ox", float),
    "geometry.ell_Si": ("ell_Si", float),
    "materials.U_c": ("U_c", float),
    "materials.eps_Si": ("eps_Si", float),
    "materials.eps_ox": ("eps_ox", float),
    "materials.m_eff_Si": ("m_eff_Si", float),
    "materials.m_eff_ox": ("m_eff_ox", float),
    "doping.N_plus": ("N_plus", float),
    "doping.N_minus": ("N_minus", float),
    "transport.T_L": ("T_L", float),
    "transport.phi0": ("phi0", float),
    "transport.phi_ph": ("phi_ph", float),
    "transport.eps_ph": ("eps_ph", float),
    "transport.s_exp": ("s_exp", float),
    "bias.V_G": ("V_G", float),
    "bias.V_DS_max": ("V_DS_max", float),
    "bias.dV_DS": ("dV_DS", float),
    "numerics.N_x": ("N_x", int),
    "numerics.N_z": ("N_z", int),
    "numerics.n_modes": ("n_modes", int),
    "numerics.workers": ("workers", int),
    "numerics.tol_gummel": ("tol.tol_gummel", float),
    "numerics.tol_newton": ("tol.tol_newton", float),
    "numerics.max_gummel": ("tol.max_gummel", int),
    "numerics.max_newton": ("tol.max_newton", int),
    "numerics.tail_tol": ("tol.tail_tol", float),
}


def default_spec() -> DeviceSpec:
    return DeviceSpec().validate()


def _parse_value(key: str, raw: str, caster: type):
    try:
        if caster is int:
            as_float = float(raw)
            as_int = int(as_float)
            if as_int != as_float:
                raise ValueError("not an integer")
            return as_int
        return caster(raw)
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse value {raw!r}: {exc}") from None


def load_config(path: str | Path) -> DeviceSpec:
    """
    Read a flat key=value config file and return a validated DeviceSpec.

    Unknown keys, unparseable values and invariant violations raise
    ConfigError naming the offending key. Omitted keys keep their defaults.
    """
    path = Path(path)
    text = path.read_text()
    fields: dict[str, object] = {}
    tol_fields: dict[str, object] = {}
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path.name}:{lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown configuration key")
        if key in seen:
            raise ConfigError(key, "duplicate configuration key")
        seen.add(key)
        field, caster = CONFIG_KEYS[key]
        value = _parse_value(key, raw, caster)
        if field.startswith("tol."):
            tol_fields[field[4:]] = value
        else:
            fields[field] = value
    if tol_fields:
        fields["tol"] = dataclasses.replace(Tolerances(), **tol_fields)
    return dataclasses.replace(DeviceSpec(), **fields).validate()


def save_config(spec: DeviceSpec, path: str | Path) -> None:
    """Write every config key; reloading reproduces the spec bit-for-bit."""
    lines = ["# device configuration (SI units)"]
    for key, (field, caster) in CONFIG_KEYS.items():
        if field.startswith("tol."):
            value = getattr(spec.tol, field[4:])
        else:
            value = getattr(spec, field)
        lines.append(f"{key} = {value!r}" if caster is float else f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# scaled (internal) representation
# ---------------------------------------------------------------------------

_NM = 1e-9  # m per nm


@dataclass(frozen=True)
class ScaledDevice:
    """
    Device data in internal units (nm, eV, V, K) plus derived constants.

    dos2d    : 2*pi*m*/hbar^2 in 1/(eV nm^2); the 2D density-of-states step.
    e_over_eps0 : e/eps0 in V nm, the Poisson coupling constant.
    relax_const : 4*pi^2 * eps_ph * (phi_ph*phi0) * (m*/hbar^2)^3. The
        transport system is phi0-normalised, so only the product
        phi_ph*phi0 enters; the (m*/hbar^2)^3 factor reinstates the
        kinetic density-of-states constants that the closed-form
        diffusion/relaxation expressions absorb ((m*/hbar^2)^2 from the
        squared density of states in the relaxation integral, hbar^2/m*
        in the diffusion matrix), evaluated in the internal eV/nm units.
        Without it the relaxation-to-diffusion balance would be an
        arbitrary function of the unit convention.
    current_unit: multiplying a phi0-normalised current (eV moments, nm grid)
        by this constant evaluates the current formulas in SI (J, m); see
        README on current units.
    """

    spec: DeviceSpec
    L: float                 # nm
    ell: float               # nm
    L_S: float
    L_C: float
    L_D: float
    ell_ox: float
    ell_Si: float
    kTL: float               # eV
    v_b: float               # -1/kTL (1/eV)
    U_c: float               # eV
    kin_Si: float            # hbar^2/(2 m_Si) (eV nm^2)
    kin_ox: float            # hbar^2/(2 m_ox) (eV nm^2)
    dos2d: float             # 1/(eV nm^2)
    Nsb: float               # contact surface density N+ * ell_Si (nm^-2)
    n_plus: float            # nm^-3
    n_minus: float           # nm^-3
    e_over_eps0: float       # V nm
    V_ref: float             # kTL/e (V)
    relax_const: float       # eV * (dimensionless coupling)
    s: float
    current_unit: float

    @property
    def gate_span(self) -> tuple[float, float]:
        return (self.L_S, self.L_S + self.L_C)


def scale_device(spec: DeviceSpec) -> ScaledDevice:
    c = spec.constants
    q = c.e_charge
    kTL_eV = c.k_B * spec.T_L / q
    # hbar^2/(2m) from J m^2 to eV nm^2
    j_m2_to_ev_nm2 = 1.0e18 / q
    kin_si = c.hbar**2 / (2.0 * spec.m_eff_Si) * j_m2_to_ev_nm2
    kin_ox = c.hbar**2 / (2.0 * spec.m_eff_ox) * j_m2_to_ev_nm2
    # 2 pi m* / hbar^2: 1/(J m^2) -> 1/(eV nm^2)
    dos2d = 2.0 * math.pi * spec.m_eff_Si / c.hbar**2 * q * 1.0e-18
    eps_ph_eV = spec.eps_ph / q
    dos_factor = 1.0 / (2.0 * kin_si)  # m*/hbar^2 in 1/(eV nm^2)
    return ScaledDevice(
        spec=spec,
        L=spec.L / _NM,
        ell=spec.ell / _NM,
        L_S=spec.L_S / _NM,
        L_C=spec.L_C / _NM,
        L_D=spec.L_D / _NM,
        ell_ox=spec.ell_ox / _NM,
        ell_Si=spec.ell_Si / _NM,
        kTL=kTL_eV,
        v_b=-1.0 / kTL_eV,
        U_c=spec.U_c / q,
        kin_Si=kin_si,
        kin_ox=kin_ox,
        dos2d=dos2d,
        Nsb=spec.N_plus * spec.ell_Si * 1.0e-18,
        n_plus=spec.N_plus * 1.0e-27,
        n_minus=spec.N_minus * 1.0e-27,
        e_over_eps0=q / c.eps0 * 1.0e9,
        V_ref=kTL_eV,
        relax_const=4.0 * math.pi**2 * eps_ph_eV * (spec.phi_ph * spec.phi0)
        * dos_factor**3,
        s=spec.s_exp,
        current_unit=q ** (2.0 - spec.s_exp) * 1.0e9 / spec.phi0,
    )


# ---------------------------------------------------------------------------
# doping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DopingProfile:
    """Piecewise-constant prescribed doping, one value per mesh element (m^-3)."""

    values: np.ndarray

    @property
    def values_nm3(self) -> np.ndarray:
        return self.values * 1.0e-27


def build_doping(spec: DeviceSpec, mesh2d) -> DopingProfile:
    """
    Abrupt doping map: N+ in source/drain silicon, N- in channel silicon,
    zero in the oxide. Assignment is by element centroid.
    """
    sc = scale_device(spec)
    cx, cz = mesh2d.centroids()
    in_si = (cz > sc.ell_ox) & (cz < sc.ell_ox + sc.ell_Si)
    in_channel = (cx >= sc.L_S) & (cx <= sc.L_S + sc.L_C)
    values = np.where(in_si, np.where(in_channel, spec.N_minus, spec.N_plus), 0.0)
    return DopingProfile(values=values)
