"""Independent brute-force verifiers for the closed forms and conventions
used by qi_core, pinem, and emission.

Every oracle avoids the code path of the quantity it checks:

- ladder-shift matrix elements: dense matrix exponential of the banded
  generator (conj(g) on the raising band, -g on the lowering band) versus
  the analytic Bessel form;
- Bessel values themselves: Miller downward recurrence normalized by
  J_0 + 2 sum J_2k = 1, plus the ascending power series at tiny argument;
- the interference decomposition: a plain unfactored double sum over
  initial multi-indices, nothing shared with the grouped engine;
- emission rates: composite-Simpson time integration of the first-order
  window integrals, Richardson-extrapolated;
- statistical averaging: a counter-based Monte Carlo over uniform random
  phases, reproducible bit for bit from (seed, trials).

Oracles favor trustworthiness over speed and may be far slower than the
paths they check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import qi_core
from .emission import (BoundElectronParams, CavityParams, FreeElectronParams,
                       PhysicalConstants, velocity_from_kinetic)
from .errors import TruncationError, UnresolvedOscillationError, ValidationError
from .pinem import InteractionCoupling
from .qi_core import FinalSelector, ProductState, QIBreakdown, ScatteringOperator, SystemState


# ---------------------------------------------------------------------------
# ladder-shift operator via matrix exponential


@dataclass(frozen=True)
class TruncatedOperatorMatrix:
    """Numerically exponentiated ladder operator on a finite window.

    Only the interior two-thirds of the window is trustworthy; outside it
    the truncated ladder reflects amplitude off the window edge.
    """

    labels: np.ndarray
    entries: np.ndarray

    @property
    def interior(self) -> np.ndarray:
        half = int(self.labels.max())
        return np.abs(self.labels) <= (2 * half) // 3

    def element(self, n_final: int, n_initial: int) -> complex:
        i = int(np.nonzero(self.labels == n_final)[0][0])
        j = int(np.nonzero(self.labels == n_initial)[0][0])
        return complex(self.entries[i, j])

    def interior_column_norm_defect(self) -> float:
        cols = self.entries[:, self.interior]
        return float(np.abs(np.linalg.norm(cols, axis=0) - 1.0).max())


def matrix_exponential_elements(coupling: InteractionCoupling,
                                half_width: int) -> TruncatedOperatorMatrix:
    """exp of the banded ladder generator on labels [-half_width, half_width].

    Requires window width >= 8|g| + 40 so the interior stays free of edge
    reflection. The generator is anti-Hermitian, so the result is unitary
    to machine precision; agreement with the analytic Bessel elements is
    the actual test.
    """
    g = coupling.g
    width = 2 * half_width + 1
    if width < 8.0 * abs(g) + 40.0:
        needed = int(math.ceil((8.0 * abs(g) + 40.0 - 1) / 2))
        raise TruncationError(
            f"window half-width {half_width} too small for |g| = {abs(g)}; need >= {needed}",
            suggested_half_width=needed)
    raising = np.diag(np.ones(width - 1), -1).astype(complex)   # label n -> n+1
    lowering = np.diag(np.ones(width - 1), +1).astype(complex)  # label n -> n-1
    generator = np.conj(g) * raising - g * lowering
    return TruncatedOperatorMatrix(labels=np.arange(-half_width, half_width + 1),
                                   entries=expm(generator))


# ---------------------------------------------------------------------------
# Bessel J reference (Miller downward recurrence + ascending series)


def bessel_j_reference(n_max: int, x: float) -> np.ndarray:
    """J_0(x) .. J_{n_max}(x) for x >= 0, independent of scipy.special.

    Downward recurrence J_{k-1} = (2k/x) J_k - J_{k+1} is the stable
    direction; the run is normalized with J_0 + 2 sum_{k>=1} J_{2k} = 1.
    For x below 1e-6 the ascending series truncated at second order is
    already at double precision.
    """
    if x < 0:
        raise ValidationError("x must be >= 0")
    if n_max < 0:
        raise ValidationError("n_max must be >= 0")
    if x == 0.0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    if x < 1e-6:
        out = np.empty(n_max + 1)
        for n in range(n_max + 1):
            half = 0.5 * x
            term = half ** n / math.factorial(n)
            out[n] = term * (1.0 - half * half / (n + 1.0)
                             + half ** 4 / (2.0 * (n + 1.0) * (n + 2.0)))
        return out

    start = int(max(n_max, x) + 20 + 12 * math.sqrt(max(n_max, x)))
    if start % 2:
        start += 1
    vals = np.zeros(start + 1)
    j_above, j_here = 0.0, 1e-305
    vals[start] = j_here
    for k in range(start, 0, -1):
        j_below = (2.0 * k / x) * j_here - j_above
        j_above, j_here = j_here, j_below
        vals[k - 1] = j_here
        if abs(j_here) > 1e250:
            vals *= 1e-250
            j_above *= 1e-250
            j_here *= 1e-250
    norm = vals[0] + 2.0 * np.sum(vals[2::2])
    return vals[:n_max + 1] / norm


def bessel_j_signed(n: int, x: float) -> float:
    """Reference J_n for any integer order via J_{-n} = (-1)^n J_n."""
    if n >= 0:
        return float(bessel_j_reference(n, x)[n])
    return float((-1) ** (-n) * bessel_j_reference(-n, x)[-n])


# ---------------------------------------------------------------------------
# unfactored direct sum against the grouped decomposition


def _direct_probability_plain(state: ProductState, op: ScatteringOperator,
                              fixed: dict) -> float:
    """|sum_a (prod C) S|^2 summed over free finals, by naive nested loops."""
    import itertools

    init_lists = [list(s.labels) for s in state.systems]
    amp_lookup = [dict(zip(s.labels, s.amplitudes)) for s in state.systems]
    final_lists = [[fixed[j]] if j in fixed else [int(v) for v in op.windows[j]]
                   for j in range(state.n_systems)]
    total = 0.0
    for final in itertools.product(*final_lists):
        amp = 0.0 + 0.0j
        for initial in itertools.product(*init_lists):
            w = 1.0 + 0.0j
            for j, a in enumerate(initial):
                w *= amp_lookup[j][a]
            amp += w * op.amplitude(initial, final)
        total += abs(amp) ** 2
    return total


def direct_sum_check(state: ProductState, op: ScatteringOperator,
                     sel: FinalSelector) -> float:
    """Worst |sum_D terms[D] - direct| over the selector's label scan.

    The fixed systems' labels are swept across their full windows (the
    marginalized systems stay marginalized), so a selector fixing one
    system checks the whole marginal spectrum. The direct side is an
    independent nested-loop sum sharing no accumulator with decompose().
    """
    import itertools

    if sel.fixed:
        fixed_systems = sorted(sel.fixed)
        scan_lists = [[int(v) for v in op.windows[j]] for j in fixed_systems]
        assignments = [dict(zip(fixed_systems, combo))
                       for combo in itertools.product(*scan_lists)]
    else:
        assignments = [{}]
    worst = 0.0
    for fixed in assignments:
        grouped = qi_core.decompose(state, op, FinalSelector(fixed)).total()
        plain = _direct_probability_plain(state, op, fixed)
        worst = max(worst, abs(grouped - plain))
    return worst


# ---------------------------------------------------------------------------
# random-phase Monte Carlo


@dataclass(frozen=True)
class MonteCarloReport:
    """Phase-scramble statistics; reproducible bit for bit from (seed, trials)."""

    trials: int
    seed: int
    system_index: int
    mean_terms: QIBreakdown
    standard_error: dict
    empty_term_variation: float   # max |per-trial no-QI term - first trial|

    def scrambled_subsets(self):
        return [d for d in self.mean_terms.terms if self.system_index in d]

    def worst_mean_to_se(self) -> float:
        """max over scrambled subsets of |mean| / standard error."""
        worst = 0.0
        for d in self.scrambled_subsets():
            se = self.standard_error[d]
            mean = abs(self.mean_terms.terms[d])
            if se == 0.0:
                if mean > 0.0:
                    return math.inf
                continue
            worst = max(worst, mean / se)
        return worst


def phase_scramble(state: ProductState, op: ScatteringOperator, sel: FinalSelector,
                   system_index: int, trials: int, seed: int) -> MonteCarloReport:
    """Average decompose() over i.i.d. uniform phase scrambles of one system.

    Each trial multiplies the chosen system's amplitudes by independent
    uniform phases drawn from a Philox counter stream keyed by (seed,
    trial), so trials are splittable and the report is deterministic.
    """
    if trials < 100:
        raise ValidationError("need at least 100 trials for meaningful statistics")
    if not (0 <= system_index < state.n_systems):
        raise ValidationError(f"system_index {system_index} out of range")
    target = state.systems[system_index]
    dim = target.dim
    base = np.asarray(target.amplitudes, dtype=complex)

    sums = None
    sq_sums = None
    empty_first = None
    empty_var = 0.0
    keys = None
    for trial in range(trials):
        bits = np.random.Philox(key=seed, counter=trial << 64)
        phases = np.random.Generator(bits).uniform(0.0, 2.0 * math.pi, size=dim)
        scrambled = base * np.exp(1j * phases)
        systems = list(state.systems)
        systems[system_index] = SystemState(target.labels, scrambled.tolist())
        breakdown = qi_core.decompose(ProductState(systems), op, sel)
        if keys is None:
            keys = sorted(breakdown.terms, key=lambda d: (len(d), sorted(d)))
            sums = np.zeros(len(keys))
            sq_sums = np.zeros(len(keys))
        vals = np.asarray([breakdown.terms[d] for d in keys])
        sums += vals
        sq_sums += vals * vals
        empty = breakdown.terms[frozenset()]
        if empty_first is None:
            empty_first = empty
        else:
            empty_var = max(empty_var, abs(empty - empty_first))

    means = sums / trials
    variance = np.maximum(sq_sums / trials - means ** 2, 0.0)
    se = np.sqrt(variance / trials)
    return MonteCarloReport(
        trials=trials, seed=seed, system_index=system_index,
        mean_terms=QIBreakdown({d: float(m) for d, m in zip(keys, means)}),
        standard_error={d: float(s) for d, s in zip(keys, se)},
        empty_term_variation=float(empty_var))


# ---------------------------------------------------------------------------
# first-order time integration of the emission amplitudes


def _simpson(values: np.ndarray, h: float) -> complex:
    """Composite Simpson on an odd-length uniformly sampled array."""
    return (h / 3.0) * (values[0] + values[-1]
                        + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-1:2].sum())


def _window_integral(delta: float, tau: float, panels: int) -> complex:
    """integral_{-tau/2}^{tau/2} e^{i delta t} dt by Simpson + Richardson."""
    def simpson_at(n: int) -> complex:
        t = np.linspace(-tau / 2.0, tau / 2.0, n + 1)
        return _simpson(np.exp(1j * delta * t), tau / n)

    coarse = simpson_at(panels)
    fine = simpson_at(2 * panels)
    return (16.0 * fine - coarse) / 15.0


def perturbation_integrator(constants: PhysicalConstants, fe: FreeElectronParams,
                            be: BoundElectronParams, cav: CavityParams,
                            steps: int) -> tuple:
    """(rate_a, rate_e, rate_ae) from numerically integrated amplitudes.

    The declared model: over the centered interaction window the atom path
    accumulates A_a = i g_a e^{-i q z_a} I(omega_cav - omega_a) and the
    electron path A_e = -g_e I(beta0 omega_cav - omega_mod)
    I(omega_cav - omega_mod) / tau, where I(delta) is the plain window
    integral of e^{i delta t} and

        g_a = (|d| omega_a / omega_cav) sqrt(omega_cav / (2 hbar eps0 V)),
        g_e = e v0 sqrt(1 / (2 hbar omega_cav eps0 V)).

    Rates follow as rho_ee |A_a|^2 / tau, |A_e|^2 / tau, and
    2 Re[A_a conj(A_e) rho_eg b] / tau with rho_eg = |rho_eg| e^{i phi_a}
    and b = |b| e^{i Psi_b}. Refuses with the required panel count when
    any integrand has fewer than 20 panels per oscillation period.
    """
    if steps < 1_000:
        raise ValidationError("steps must be >= 1000")
    kin = velocity_from_kinetic(constants, fe.kinetic_energy_ev)
    tau = kin.tau(cav.length)
    deltas = (cav.omega_cav - be.omega_a,
              kin.beta0 * cav.omega_cav - fe.omega_mod,
              cav.omega_cav - fe.omega_mod)
    periods = max(abs(d) * tau / (2.0 * math.pi) for d in deltas)
    required = int(math.ceil(20.0 * periods))
    if steps < required:
        raise UnresolvedOscillationError(
            f"{steps} panels resolve the integrands at fewer than 20 per period; "
            f"need >= {required}", required_steps=required)
    panels = steps + (steps % 2)

    i_atom = _window_integral(deltas[0], tau, panels)
    i_velocity = _window_integral(deltas[1], tau, panels)
    i_frequency = _window_integral(deltas[2], tau, panels)

    v = cav.volume(constants)
    g_atom = (be.dipole * be.omega_a / cav.omega_cav) * math.sqrt(
        cav.omega_cav / (2.0 * constants.hbar * constants.eps0 * v))
    g_elec = constants.e_charge * kin.v0 * math.sqrt(
        1.0 / (2.0 * constants.hbar * cav.omega_cav * constants.eps0 * v))

    q_z = cav.omega_cav * be.z_a / constants.c
    amp_atom = 1j * g_atom * np.exp(-1j * q_z) * i_atom
    amp_elec = -g_elec * i_velocity * i_frequency / tau

    rho_eg = be.rho_eg_abs * np.exp(1j * be.phi_a)
    bunching = fe.bunching_abs * np.exp(1j * fe.bunching_phase)

    rate_a = be.rho_ee * abs(amp_atom) ** 2 / tau
    rate_e = abs(amp_elec) ** 2 / tau
    rate_ae = 2.0 * (amp_atom * np.conj(amp_elec) * rho_eg * bunching).real / tau
    return float(rate_a), float(rate_e), float(rate_ae)
