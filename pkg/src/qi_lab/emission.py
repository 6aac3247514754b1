"""Spontaneous emission of a shaped free electron and a two-level bound
electron sharing one cavity mode, including their interference.

Model
-----
A free electron (velocity v0 z, kinetic energy E_K, density modulation at
omega_mod with bunching factor b = |b| e^{i Psi_b}) crosses a cavity of
length L supporting a single longitudinal mode (omega_cav, wavevector
q = omega_cav/c along z, mode volume V). A bound electron sits at z_a with
transition frequency omega_a and dipole |d| along the mode axis; its pure
state is parameterized on the Bloch sphere:
rho_ee = cos^2(theta_a/2), rho_eg = (e^{i phi_a}/2) sin(theta_a).

First-order (weak-coupling) rates over the interaction duration
tau = L / v0, with sinc(x) = sin(x)/x:

    rate_a  = rho_ee (tau/hbar) (omega_a^2 |d|^2 / (2 eps0 V omega_cav))
              sinc^2[(omega_cav - omega_a) tau / 2]
    rate_e  = (tau/hbar) (e^2 v0^2 / (2 eps0 V omega_cav))
              sinc^2[(beta0 omega_cav - omega_mod) tau / 2]
              sinc^2[(omega_cav - omega_mod) tau / 2]
    rate_ae = (tau/hbar) (e v0 omega_a |d| / (eps0 V omega_cav))
              |rho_eg| |b| cos(xi) sinc[...] sinc[...] sinc[...]

with the same three sinc arguments and
xi = phi_a - omega_cav z_a / c - pi/2 + Psi_b. The cross term is exactly
linear in |b| and |rho_eg| and bounded by 2 sqrt(rate_a rate_e); it
vanishes for an unshaped electron (b = 0) or an atom without coherence.

rate_a and rate_e are this library's declared first-order model, pinned so
that the interference cross term of the underlying amplitudes reproduces
rate_ae exactly; the numerical time-integration oracle quarantines that
reconstruction.

Everything is strict SI; unit conversions happen at the CLI boundary.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError

SINC_SERIES_CUTOFF = 1e-4
RATE_FLOOR = 1e-300          # below this, the figure of merit is undefined


class DegenerateOptimumWarning(UserWarning):
    """The length-scan objective was flat; the reported optimum is arbitrary."""


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA-2018 values, frozen; echoed into every output header."""

    hbar: float = 1.054571817e-34       # J s
    eps0: float = 8.8541878128e-12      # C^2 N^-1 m^-2
    e_charge: float = 1.602176634e-19   # C, e > 0
    c: float = 299792458.0              # m/s
    m_e: float = 9.1093837015e-31       # kg

    @property
    def electron_rest_energy_ev(self) -> float:
        return self.m_e * self.c ** 2 / self.e_charge

    def as_dict(self) -> dict:
        return {"hbar_J_s": self.hbar, "eps0_F_m": self.eps0,
                "e_C": self.e_charge, "c_m_s": self.c, "m_e_kg": self.m_e}


CODATA2018 = PhysicalConstants()


def sinc(x):
    """Unnormalized sin(x)/x with sinc(0) = 1; series below |x| < 1e-4."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SINC_SERIES_CUTOFF
    out = np.empty_like(x)
    xs = x[small]
    out[small] = 1.0 - xs * xs / 6.0 + (xs * xs) * (xs * xs) / 120.0
    xl = x[~small]
    out[~small] = np.sin(xl) / xl
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ElectronKinematics:
    """Relativistic kinematics derived from the kinetic energy."""

    v0: float       # m/s
    beta0: float    # v0 / c

    def tau(self, length: float) -> float:
        """Interaction duration tau = L / v0 for a cavity of length L (m)."""
        return length / self.v0


def velocity_from_kinetic(constants: PhysicalConstants, kinetic_energy_ev: float) -> ElectronKinematics:
    """beta0 = sqrt(1 - (1 + E_K / m_e c^2)^-2); exact relativistic form."""
    if kinetic_energy_ev <= 0:
        raise ValidationError("kinetic energy must be positive")
    gamma = 1.0 + kinetic_energy_ev / constants.electron_rest_energy_ev
    beta0 = math.sqrt(1.0 - 1.0 / (gamma * gamma))
    return ElectronKinematics(v0=beta0 * constants.c, beta0=beta0)


@dataclass(frozen=True)
class FreeElectronParams:
    """Shaped free electron: kinetic energy, modulation frequency, bunching."""

    kinetic_energy_ev: float
    omega_mod: float                    # rad/s
    bunching_abs: float                 # |b| in [0, 1]
    bunching_phase: float = 0.0         # Psi_b, rad

    def __post_init__(self):
        if self.kinetic_energy_ev <= 0:
            raise ValidationError("kinetic energy must be positive")
        if not (0.0 <= self.bunching_abs <= 1.0):
            raise ValidationError(f"|b| must lie in [0, 1], got {self.bunching_abs}")
        if self.omega_mod < 0:
            raise ValidationError("omega_mod must be >= 0")


@dataclass(frozen=True)
class BoundElectronParams:
    """Two-level emitter at z_a with Bloch-sphere initial state."""

    omega_a: float                      # rad/s
    dipole: float                       # |d|, C m, along the mode axis
    z_a: float = 0.0                    # m
    theta_a: float = math.pi / 2        # rad; rho_ee = cos^2(theta_a/2)
    phi_a: float = math.pi / 2          # rad; coherence phase

    def __post_init__(self):
        if self.omega_a <= 0 or self.dipole <= 0:
            raise ValidationError("omega_a and dipole must be positive")
        if not (0.0 <= self.theta_a <= math.pi):
            raise ValidationError("theta_a must lie in [0, pi]")

    @property
    def rho_ee(self) -> float:
        if self.theta_a == math.pi:    # exact pole, not sin/cos rounding
            return 0.0
        return math.cos(self.theta_a / 2.0) ** 2

    @property
    def rho_eg_abs(self) -> float:
        if self.theta_a in (0.0, math.pi):
            return 0.0
        return math.sin(self.theta_a) / 2.0


@dataclass(frozen=True)
class CavityParams:
    """Single-mode cavity; q = omega_cav / c is derived, never stored.

    ``mode_volume=None`` applies the documented convention
    V = L * (lambda_cav / 2)^2 with lambda_cav = 2 pi c / omega_cav.
    """

    omega_cav: float                    # rad/s
    length: float                       # m
    mode_volume: float | None = None    # m^3

    def __post_init__(self):
        if self.omega_cav <= 0 or self.length <= 0:
            raise ValidationError("omega_cav and length must be positive")
        if self.mode_volume is not None and self.mode_volume <= 0:
            raise ValidationError("mode_volume must be positive")

    def volume(self, constants: PhysicalConstants) -> float:
        if self.mode_volume is not None:
            return self.mode_volume
        half_wavelength = math.pi * constants.c / self.omega_cav
        return self.length * half_wavelength ** 2


def optimal_atom_position(constants: PhysicalConstants, phi_a: float, omega_cav: float) -> float:
    """z_a with phi_a - omega_cav z_a / c = pi/2, maximizing the cross term."""
    return (phi_a - math.pi / 2.0) * constants.c / omega_cav


@dataclass(frozen=True)
class EmissionRates:
    """Rate bundle; ``fom`` is the signed interference fraction
    rate_ae / (rate_a + rate_e), NaN when the denominator underflows."""

    gamma_a: float
    gamma_e: float
    gamma_ae: float

    @property
    def total(self) -> float:
        return self.gamma_a + self.gamma_e + self.gamma_ae

    @property
    def fom(self) -> float:
        denom = self.gamma_a + self.gamma_e
        if denom < RATE_FLOOR:
            return math.nan
        return self.gamma_ae / denom


def _phase_matching(constants, kin, fe, be, cav):
    """The three shared sinc factors at interaction duration tau = L/v0."""
    tau = kin.tau(cav.length)
    s_atom = sinc((cav.omega_cav - be.omega_a) * tau / 2.0)
    s_velocity = sinc((kin.beta0 * cav.omega_cav - fe.omega_mod) * tau / 2.0)
    s_frequency = sinc((cav.omega_cav - fe.omega_mod) * tau / 2.0)
    return tau, s_atom, s_velocity, s_frequency


def rate_qi(constants: PhysicalConstants, fe: FreeElectronParams,
            be: BoundElectronParams, cav: CavityParams) -> float:
    """Signed interference rate between the two emission paths (1/s)."""
    kin = velocity_from_kinetic(constants, fe.kinetic_energy_ev)
    tau, s_atom, s_velocity, s_frequency = _phase_matching(constants, kin, fe, be, cav)
    xi = be.phi_a - cav.omega_cav * be.z_a / constants.c - math.pi / 2.0 + fe.bunching_phase
    v = cav.volume(constants)
    prefactor = (tau / constants.hbar) * (
        constants.e_charge * kin.v0 * be.omega_a * be.dipole
        / (constants.eps0 * v * cav.omega_cav))
    return (prefactor * be.rho_eg_abs * fe.bunching_abs * math.cos(xi)
            * s_atom * s_velocity * s_frequency)


def companion_rates(constants: PhysicalConstants, fe: FreeElectronParams,
                    be: BoundElectronParams, cav: CavityParams) -> tuple:
    """(rate_a, rate_e): the two isolated emission rates of the declared model."""
    kin = velocity_from_kinetic(constants, fe.kinetic_energy_ev)
    tau, s_atom, s_velocity, s_frequency = _phase_matching(constants, kin, fe, be, cav)
    v = cav.volume(constants)
    gamma_a = be.rho_ee * (tau / constants.hbar) * (
        be.omega_a ** 2 * be.dipole ** 2 / (2.0 * constants.eps0 * v * cav.omega_cav)
    ) * s_atom ** 2
    gamma_e = (tau / constants.hbar) * (
        constants.e_charge ** 2 * kin.v0 ** 2 / (2.0 * constants.eps0 * v * cav.omega_cav)
    ) * s_velocity ** 2 * s_frequency ** 2
    return gamma_a, gamma_e


def rates(constants: PhysicalConstants, fe: FreeElectronParams,
          be: BoundElectronParams, cav: CavityParams) -> EmissionRates:
    """Full bundle: both isolated rates plus the signed cross term."""
    gamma_a, gamma_e = companion_rates(constants, fe, be, cav)
    gamma_ae = rate_qi(constants, fe, be, cav)
    return EmissionRates(gamma_a=gamma_a, gamma_e=gamma_e, gamma_ae=gamma_ae)


def _fom_of_length(constants, fe, be, omega_cav, lengths, omega_mod):
    """Vectorized signed figure of merit; lengths and omega_mod broadcast.

    The mode volume cancels in the ratio, so none is taken.
    """
    kin = velocity_from_kinetic(constants, fe.kinetic_energy_ev)
    lengths = np.asarray(lengths, dtype=float)
    tau = lengths / kin.v0
    s_atom = sinc((omega_cav - be.omega_a) * tau / 2.0)
    s_velocity = sinc((kin.beta0 * omega_cav - omega_mod) * tau / 2.0)
    s_frequency = sinc((omega_cav - omega_mod) * tau / 2.0)
    xi = be.phi_a - omega_cav * be.z_a / constants.c - math.pi / 2.0 + fe.bunching_phase
    x_atom = be.omega_a * be.dipole * s_atom
    y_elec = constants.e_charge * kin.v0 * s_velocity * s_frequency
    num = 2.0 * x_atom * y_elec * be.rho_eg_abs * fe.bunching_abs * math.cos(xi)
    den = be.rho_ee * x_atom ** 2 + y_elec ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    return out


@dataclass(frozen=True)
class LengthOptimum:
    """Result of the |fom| search over interaction length."""

    l_opt: float
    gamma_max: float        # signed fom at the optimum
    omega_mod: float        # modulation frequency used at the optimum
    degenerate: bool = False


def _golden_max(f, lo: float, hi: float, rel_tol: float) -> float:
    """Deterministic golden-section maximizer of f on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol * max(abs(a), abs(b), 1e-300):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimize_length(constants: PhysicalConstants, fe: FreeElectronParams,
                    be: BoundElectronParams, omega_cav: float,
                    l_range: tuple, mode_volume: float | None = None,
                    omega_mod_policy: str = "cavity",
                    scan_points: int = 2000) -> LengthOptimum:
    """argmax over L of |fom|: dense log-spaced scan refined by golden section.

    omega_mod_policy:
      "cavity" - omega_mod = omega_cav (zeroes the frequency-matching sinc)
      "fixed"  - keep fe.omega_mod as given
      "joint"  - per length, also optimize omega_mod (2-D search)
    """
    l_min, l_max = float(l_range[0]), float(l_range[1])
    if not (0 < l_min < l_max):
        raise ValidationError("l_range must be positive with l_min < l_max")
    if omega_mod_policy not in ("cavity", "fixed", "joint"):
        raise ValidationError(f"unknown omega_mod_policy {omega_mod_policy!r}")

    lengths = np.logspace(math.log10(l_min), math.log10(l_max), scan_points)

    def fom_at(length: float, omega_mod: float) -> float:
        return float(_fom_of_length(constants, fe, be, omega_cav,
                                    np.asarray([length]), omega_mod)[0])

    if omega_mod_policy == "joint":
        kin = velocity_from_kinetic(constants, fe.kinetic_energy_ev)

        def best_over_mod(length: float) -> tuple:
            span = 40.0 * math.pi * kin.v0 / length
            lo = min(kin.beta0 * omega_cav, omega_cav) - span
            hi = max(kin.beta0 * omega_cav, omega_cav) + span
            grid = np.linspace(max(lo, 0.0), hi, 512)
            vals = np.abs(_fom_of_length(constants, fe, be, omega_cav,
                                         np.asarray([length]), grid))
            k = int(np.argmax(vals))
            a = float(grid[max(k - 1, 0)])
            b = float(grid[min(k + 1, grid.size - 1)])
            w = _golden_max(lambda x: abs(fom_at(length, x)), a, b, 1e-6)
            return abs(fom_at(length, w)), w

        scan_abs = np.empty(scan_points)
        scan_mod = np.empty(scan_points)
        for i, length in enumerate(lengths):
            scan_abs[i], scan_mod[i] = best_over_mod(float(length))
    else:
        omega_mod = omega_cav if omega_mod_policy == "cavity" else fe.omega_mod
        scan_abs = np.abs(_fom_of_length(constants, fe, be, omega_cav,
                                         lengths, omega_mod))
        scan_mod = np.full(scan_points, omega_mod)

    scan_abs = np.nan_to_num(scan_abs, nan=-1.0)   # undefined fom never wins
    degenerate = bool(scan_abs.max() - scan_abs.min() < 1e-15)
    if degenerate:
        warnings.warn("flat |fom| over the length scan; optimum is degenerate",
                      DegenerateOptimumWarning, stacklevel=2)
        i = int(np.argmax(scan_abs))
        return LengthOptimum(float(lengths[i]), fom_at(float(lengths[i]), float(scan_mod[i])),
                             float(scan_mod[i]), degenerate=True)

    i = int(np.argmax(scan_abs))
    lo = float(lengths[max(i - 1, 0)])
    hi = float(lengths[min(i + 1, scan_points - 1)])
    w_i = float(scan_mod[i])
    l_opt = _golden_max(lambda L: abs(fom_at(L, w_i)), lo, hi, 1e-4)
    if abs(fom_at(l_opt, w_i)) < scan_abs[i]:
        l_opt = float(lengths[i])    # refinement may lose a multi-modal bracket
    return LengthOptimum(l_opt, fom_at(l_opt, w_i), w_i, degenerate=False)


@dataclass(frozen=True)
class BunchingCell:
    bunching_abs: float
    bunching_phase: float
    l_opt: float
    gamma_max: float


def bunching_sensitivity(constants: PhysicalConstants, be: BoundElectronParams,
                         omega_cav: float, b_grid: Sequence[float],
                         psi_grid: Sequence[float], kinetic_energy_ev: float,
                         l_range: tuple = (1e-9, 1e-3),
                         omega_mod_policy: str = "cavity",
                         scan_points: int = 2000) -> Iterator[BunchingCell]:
    """Per-(|b|, Psi_b) length optimization, streamed row-major."""
    for b_abs in b_grid:
        for psi in psi_grid:
            fe = FreeElectronParams(kinetic_energy_ev=kinetic_energy_ev,
                                    omega_mod=omega_cav, bunching_abs=float(b_abs),
                                    bunching_phase=float(psi))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateOptimumWarning)
                opt = optimize_length(constants, fe, be, omega_cav, l_range,
                                      omega_mod_policy=omega_mod_policy,
                                      scan_points=scan_points)
            yield BunchingCell(float(b_abs), float(psi), opt.l_opt, opt.gamma_max)


@dataclass(frozen=True)
class BlochCell:
    theta_a: float
    phi_a: float
    abs_fom: float


def bloch_map(constants: PhysicalConstants, fe: FreeElectronParams,
              be_template: BoundElectronParams, cav: CavityParams,
              theta_grid: Sequence[float], phi_grid: Sequence[float]) -> Iterator[BlochCell]:
    """|fom| over the atom's initial Bloch sphere at fixed geometry."""
    for theta in theta_grid:
        if not (0.0 <= theta <= math.pi):
            raise ValidationError("theta_a must lie in [0, pi]")
        for phi in phi_grid:
            be = BoundElectronParams(omega_a=be_template.omega_a, dipole=be_template.dipole,
                                     z_a=be_template.z_a, theta_a=float(theta),
                                     phi_a=float(phi))
            r = rates(constants, fe, be, cav)
            f = r.fom
            yield BlochCell(float(theta), float(phi), abs(f) if not math.isnan(f) else math.nan)


@dataclass(frozen=True)
class ResonanceCell:
    length: float
    omega_cav: float
    gamma_a: float
    gamma_e: float
    gamma_ae: float
    total: float


def resonance_sweep(constants: PhysicalConstants, fe: FreeElectronParams,
                    be: BoundElectronParams, l_grid: Sequence[float],
                    omega_cav_grid: Sequence[float],
                    mode_volume: float | None = None) -> Iterator[ResonanceCell]:
    """Rate bundle on an (L, omega_cav) grid, streamed row-major."""
    for length in l_grid:
        for omega_cav in omega_cav_grid:
            cav = CavityParams(omega_cav=float(omega_cav), length=float(length),
                               mode_volume=mode_volume)
            r = rates(constants, fe, be, cav)
            yield ResonanceCell(float(length), float(omega_cav),
                                r.gamma_a, r.gamma_e, r.gamma_ae, r.total)
