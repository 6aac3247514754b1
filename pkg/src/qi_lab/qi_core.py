"""Final-state scattering probabilities for N unentangled systems and their
decomposition into a no-interference part plus all R-process interference
contributions.

Conventions
-----------
- Each system is described by integer eigenlabels ``a`` with complex
  amplitudes ``C_a``; populations are ``p_a = |C_a|^2`` and coherences
  ``rho_{aa'} = C_a * conj(C_{a'})``.
- A scattering operator supplies joint amplitudes
  ``S(final | initial) = <final|S|initial>`` on a declared finite label
  window per system; within the window it is numerically unitary up to a
  documented truncation tolerance.
- The probability of a (partially marginalized) final outcome splits over
  subsets ``D`` of system indices: ordered pairs of initial multi-indices
  ``(a, a')`` that differ exactly on ``D`` contribute
  ``prod_{j in D} rho_j * prod_{j not in D} p_j * S(a) * conj(S(a'))``.
  ``D = {}`` is the no-interference term; ``|D| = R`` is an R-process term.

All operations are pure functions of their inputs and accumulate in a
deterministic index order, so results are reproducible bit for bit.
"""
from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvariantViolation, ValidationError

NORMALIZATION_TOL = 1e-12
# Dense pair enumeration is O(K^2) in the number of multi-indices; fail fast
# instead of grinding on inputs this desk-scale engine was not meant for.
DEFAULT_MULTI_INDEX_CAP = 10_000


@dataclass(frozen=True)
class SystemState:
    """Pure state of one system: distinct integer labels with amplitudes."""

    labels: tuple
    amplitudes: tuple

    def __init__(self, labels: Sequence[int], amplitudes: Sequence[complex]):
        labels = tuple(int(l) for l in labels)
        amplitudes = tuple(complex(a) for a in amplitudes)
        if len(labels) != len(amplitudes):
            raise ValidationError(
                f"labels ({len(labels)}) and amplitudes ({len(amplitudes)}) differ in length")
        if len(labels) == 0:
            raise ValidationError("a system needs at least one eigenstate")
        if len(set(labels)) != len(labels):
            raise ValidationError("labels within one system must be distinct")
        norm = sum(abs(a) ** 2 for a in amplitudes)
        if abs(norm - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(
                f"state not normalized: sum |C|^2 = {norm!r} (tolerance {NORMALIZATION_TOL})")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dim(self) -> int:
        return len(self.labels)

    def population(self, label: int) -> float:
        """p_a = |C_a|^2 (0 for labels the state does not contain)."""
        try:
            i = self.labels.index(label)
        except ValueError:
            return 0.0
        return abs(self.amplitudes[i]) ** 2

    def amplitude_array(self) -> np.ndarray:
        return np.asarray(self.amplitudes, dtype=complex)

    @classmethod
    def single(cls, label: int) -> "SystemState":
        """A one-eigenstate (unshaped) system."""
        return cls((label,), (1.0 + 0.0j,))


@dataclass(frozen=True)
class ProductState:
    """Unentangled joint state: an ordered tuple of SystemState."""

    systems: tuple

    def __init__(self, systems: Sequence[SystemState]):
        systems = tuple(systems)
        if len(systems) == 0:
            raise ValidationError("need at least one system")
        for s in systems:
            if not isinstance(s, SystemState):
                raise ValidationError(f"not a SystemState: {s!r}")
        object.__setattr__(self, "systems", systems)

    @property
    def n_systems(self) -> int:
        return len(self.systems)


class ScatteringOperator(ABC):
    """Amplitude map from initial to final joint labels on a finite window.

    Subclasses declare one label window per system (``windows``) and a
    truncation tolerance: within the window, ``sum_final |amplitude|^2`` is
    1 up to that tolerance for any initial multi-index.
    """

    truncation_tol: float = 1e-8

    @property
    @abstractmethod
    def windows(self) -> tuple:
        """Tuple of sorted 1-D int arrays, one label window per system."""

    @abstractmethod
    def amplitude(self, initial: Sequence[int], final: Sequence[int]) -> complex:
        """<final|S|initial> for one pair of multi-indices."""

    @property
    def n_systems(self) -> int:
        return len(self.windows)

    def amplitude_block(self, initials: np.ndarray, finals: np.ndarray) -> np.ndarray:
        """Dense (K, F) block of amplitudes; default loops over amplitude().

        ``initials`` and ``finals`` are int arrays of shape (K, N), (F, N).
        Subclasses with a closed form or a backing matrix override this.
        """
        out = np.empty((initials.shape[0], finals.shape[0]), dtype=complex)
        for i, a in enumerate(initials):
            ta = tuple(int(x) for x in a)
            for j, f in enumerate(finals):
                out[i, j] = self.amplitude(ta, tuple(int(x) for x in f))
        return out

    def unitarity_defect(self, initial: Sequence[int]) -> float:
        """|sum_final |amplitude|^2 - 1| over the full declared window."""
        finals = _enumerate_multi_indices([np.asarray(w) for w in self.windows])
        block = self.amplitude_block(np.asarray([initial], dtype=int), finals)
        return abs(float(np.sum(np.abs(block) ** 2)) - 1.0)


class IdentityOperator(ScatteringOperator):
    """S = 1 on the given windows."""

    truncation_tol = 0.0

    def __init__(self, windows: Sequence[Sequence[int]]):
        self._windows = tuple(np.asarray(sorted(w), dtype=int) for w in windows)

    @property
    def windows(self):
        return self._windows

    def amplitude(self, initial, final):
        return 1.0 + 0.0j if tuple(initial) == tuple(final) else 0.0j

    def amplitude_block(self, initials, finals):
        eq = (initials[:, None, :] == finals[None, :, :]).all(axis=2)
        return eq.astype(complex)


class MatrixOperator(ScatteringOperator):
    """Operator backed by a dense joint matrix over the window product space.

    ``matrix[row, col] = <final_row|S|initial_col>`` where rows/columns
    enumerate the cartesian product of the per-system windows in row-major
    (last system fastest) order.
    """

    def __init__(self, windows: Sequence[Sequence[int]], matrix: np.ndarray,
                 truncation_tol: float = 1e-10):
        self._windows = tuple(np.asarray(sorted(w), dtype=int) for w in windows)
        dim = int(np.prod([len(w) for w in self._windows]))
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (dim, dim):
            raise ValidationError(
                f"matrix shape {matrix.shape} does not match window product dim {dim}")
        self._matrix = matrix
        self.truncation_tol = truncation_tol
        self._strides = _row_major_strides([len(w) for w in self._windows])
        self._label_to_pos = [
            {int(l): i for i, l in enumerate(w)} for w in self._windows]

    @property
    def windows(self):
        return self._windows

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def _flat(self, multi: np.ndarray) -> np.ndarray:
        """Map (M, N) label rows to flat matrix indices."""
        idx = np.zeros(multi.shape[0], dtype=int)
        for j, table in enumerate(self._label_to_pos):
            col = multi[:, j]
            try:
                pos = np.asarray([table[int(v)] for v in col])
            except KeyError as exc:
                raise ValidationError(f"label {exc} outside window of system {j}") from None
            idx += pos * self._strides[j]
        return idx

    def amplitude(self, initial, final):
        i = self._flat(np.asarray([initial], dtype=int))[0]
        f = self._flat(np.asarray([final], dtype=int))[0]
        return complex(self._matrix[f, i])

    def amplitude_block(self, initials, finals):
        cols = self._flat(initials)
        rows = self._flat(finals)
        return self._matrix[np.ix_(rows, cols)].T.copy()


def random_unitary_operator(windows: Sequence[Sequence[int]], seed: int) -> MatrixOperator:
    """Haar-random joint unitary on the window product space (QR of Ginibre)."""
    rng = np.random.default_rng(seed)
    dim = int(np.prod([len(w) for w in windows]))
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    q *= np.sign(np.diagonal(r))  # fix phase ambiguity for reproducibility
    return MatrixOperator(windows, q, truncation_tol=1e-12)


def swap_operator(labels: Sequence[int]) -> MatrixOperator:
    """Two-system operator exchanging the systems' labels: S|a,b> = |b,a>."""
    labels = sorted(int(l) for l in labels)
    m = len(labels)
    mat = np.zeros((m * m, m * m))
    for a in range(m):
        for b in range(m):
            mat[b * m + a, a * m + b] = 1.0
    return MatrixOperator((labels, labels), mat, truncation_tol=0.0)


@dataclass(frozen=True)
class FinalSelector:
    """Partial assignment of final labels; unassigned systems are marginalized."""

    fixed: Mapping[int, int] = field(default_factory=dict)

    def __init__(self, fixed: Mapping[int, int] | None = None):
        fixed = dict(fixed or {})
        for j, l in fixed.items():
            if not isinstance(j, int) or j < 0:
                raise ValidationError(f"system index must be a non-negative int, got {j!r}")
            fixed[j] = int(l)
        object.__setattr__(self, "fixed", fixed)

    @classmethod
    def marginal(cls) -> "FinalSelector":
        return cls({})


@dataclass(frozen=True)
class QIBreakdown:
    """Probability contributions keyed by the interfering subset of systems.

    ``terms[frozenset()]`` is the no-interference term; a key of size R is an
    R-process interference term. The values sum to the direct probability.
    """

    terms: Mapping[frozenset, float]

    @property
    def no_qi(self) -> float:
        return self.terms[frozenset()]

    def total(self) -> float:
        return float(sum(self.terms.values()))

    def qi_total(self) -> float:
        return self.total() - self.no_qi

    def order_terms(self, r: int) -> dict:
        return {d: v for d, v in self.terms.items() if len(d) == r}


def _row_major_strides(dims: Sequence[int]) -> list:
    strides = [1] * len(dims)
    for j in range(len(dims) - 2, -1, -1):
        strides[j] = strides[j + 1] * dims[j + 1]
    return strides


def _enumerate_multi_indices(label_lists: Sequence[np.ndarray]) -> np.ndarray:
    """(K, N) int array of the cartesian product, last system fastest."""
    grids = np.meshgrid(*label_lists, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _validate_problem(state: ProductState, op: ScatteringOperator, sel: FinalSelector,
                      cap: int) -> tuple:
    """Common validation; returns (initials, init_weights, finals)."""
    if state.n_systems != op.n_systems:
        raise ValidationError(
            f"state has {state.n_systems} systems but operator declares {op.n_systems}")
    n = state.n_systems
    window_sets = [set(int(l) for l in w) for w in op.windows]
    for j, sys in enumerate(state.systems):
        missing = set(sys.labels) - window_sets[j]
        if missing:
            raise ValidationError(
                f"initial labels {sorted(missing)} of system {j} outside the operator window")
    for j, l in sel.fixed.items():
        if j >= n:
            raise ValidationError(f"selector fixes system {j} but only {n} systems exist")
        if l not in window_sets[j]:
            raise ValidationError(f"fixed final label {l} outside window of system {j}")

    init_lists = [np.asarray(sys.labels, dtype=int) for sys in state.systems]
    final_lists = [np.asarray([sel.fixed[j]], dtype=int) if j in sel.fixed
                   else np.asarray(op.windows[j], dtype=int) for j in range(n)]
    k = int(np.prod([len(l) for l in init_lists]))
    f = int(np.prod([len(l) for l in final_lists]))
    if max(k, f) > cap:
        raise ValidationError(
            f"multi-index count {max(k, f)} exceeds the dense-enumeration cap {cap}; "
            "raise `cap` explicitly if you really want this")

    initials = _enumerate_multi_indices(init_lists)
    amps = [sys.amplitude_array() for sys in state.systems]
    grids = np.meshgrid(*amps, indexing="ij")
    weights = np.multiply.reduce([g.ravel() for g in grids])
    finals = _enumerate_multi_indices(final_lists)
    return initials, weights, finals


def direct_probability(state: ProductState, op: ScatteringOperator, sel: FinalSelector,
                       cap: int = DEFAULT_MULTI_INDEX_CAP) -> float:
    """P = sum over marginalized finals of |sum_a (prod_j C) S(a -> final)|^2."""
    initials, weights, finals = _validate_problem(state, op, sel, cap)
    block = op.amplitude_block(initials, finals)
    amp_per_final = weights @ block
    return float(np.sum(np.abs(amp_per_final) ** 2))


def decompose(state: ProductState, op: ScatteringOperator, sel: FinalSelector,
              cap: int = DEFAULT_MULTI_INDEX_CAP) -> QIBreakdown:
    """Split the direct probability over interfering subsets of systems.

    Enumerates ordered pairs (a, a') of initial multi-indices, classifies
    each pair by the mismatch set D = {j : a_j != a'_j}, and accumulates
    weight(a) * conj(weight(a')) * sum_final S(a) conj(S(a')) into
    ``terms[D]``. Conjugate pairs cancel the imaginary parts, so every
    stored term is real; all 2^N subsets are always present in the result.
    """
    initials, weights, finals = _validate_problem(state, op, sel, cap)
    n = state.n_systems
    k = initials.shape[0]
    block = op.amplitude_block(initials, finals)          # (K, F)

    sums = np.zeros(2 ** n, dtype=complex)
    # Row-chunked K x K pair sweep keeps memory at O(chunk * K).
    chunk = max(1, min(k, 4_000_000 // max(k, 1)))
    for lo in range(0, k, chunk):
        hi = min(k, lo + chunk)
        gram = block[lo:hi] @ block.conj().T              # sum_f S(a,f) conj(S(a',f))
        pair_w = weights[lo:hi, None] * weights.conj()[None, :]
        pattern = np.zeros((hi - lo, k), dtype=np.intp)
        for j in range(n):
            pattern += (initials[lo:hi, j, None] != initials[None, :, j]) << j
        contrib = (pair_w * gram).ravel()
        sums += np.bincount(pattern.ravel(), weights=contrib.real, minlength=2 ** n)
        sums += 1j * np.bincount(pattern.ravel(), weights=contrib.imag, minlength=2 ** n)

    terms = {}
    for bits in range(2 ** n):
        subset = frozenset(j for j in range(n) if bits & (1 << j))
        value = sums[bits]
        scale = max(1.0, abs(value))
        if abs(value.imag) > 1e-12 * scale:
            raise InvariantViolation(
                f"imaginary residue {value.imag!r} on term {sorted(subset)} "
                "exceeds the conjugate-pairing bound")
        terms[subset] = float(value.real)
    if terms[frozenset()] < -1e-12:
        raise InvariantViolation(f"negative no-QI term: {terms[frozenset()]!r}")
    return QIBreakdown(terms)


def marginal_spectrum(state: ProductState, op: ScatteringOperator, system_index: int,
                      label_range: Iterable[int],
                      cap: int = DEFAULT_MULTI_INDEX_CAP) -> dict:
    """Batch decompose: fix one system's final label, marginalize the rest.

    Returns {label: QIBreakdown} for each label in ``label_range``.
    """
    if not (0 <= system_index < state.n_systems):
        raise ValidationError(f"system_index {system_index} out of range")
    out = {}
    for label in label_range:
        sel = FinalSelector({system_index: int(label)})
        out[int(label)] = decompose(state, op, sel, cap=cap)
    return out
