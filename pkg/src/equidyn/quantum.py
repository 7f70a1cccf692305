"""Two-spin states as 2x2 complex matrices, Takagi factorization and SU(2) invariants.

A state ``X`` splits as ``S + A`` with ``S`` symmetric and ``A = a J`` skew,
``J = [[0, -1], [1, 0]]``. SU(2) acts by ``X -> g X g^T``; it preserves the
split, fixes ``A`` (because det g = 1) and acts on ``S`` through its Takagi
factorization ``S = e^{i omega} H diag(delta1, delta2) H^T``.

The phase ``omega`` of a full-rank ``S`` is only determined modulo pi: if
``(omega, H)`` factors ``S`` then so does ``(omega + pi, -i H diag(1, -1))``.
The invariant quantity is ``det S = e^{2 i omega} delta1 delta2``, so we
report ``omega`` in [0, pi). For rank-one ``S`` (delta2 = 0) we instead fix
``H[0, 0]`` real and nonnegative and read ``omega`` in [0, 2 pi) off ``S``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegeneracyError
from .lie import TAU, Configuration, Scenario, flat_to_complex

J = np.array([[0, -1], [1, 0]], dtype=complex)

# delta2 / delta1 below this is treated as an exactly rank-one symmetric part
_RANK_ONE = 1e-13


def degenerate_mask(delta1, delta2):
    """True where the singular values are too close for a unique factorization."""
    return delta1 - delta2 <= 1e-8 * (delta1 + delta2 + 1)


@dataclass(frozen=True, eq=False)
class TakagiResult:
    omega: float
    delta1: float
    delta2: float
    H: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return np.exp(1j * self.omega) * self.H @ np.diag([self.delta1, self.delta2]) @ self.H.T


@dataclass(frozen=True, eq=False)
class QState:
    """A 2x2 complex state with its symmetric/skew split cached."""

    X: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=complex)
        if X.shape != (2, 2):
            raise ConfigError("a quantum state is a 2x2 complex matrix")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    @classmethod
    def from_configuration(cls, x: Configuration) -> "QState":
        if x.scenario is not Scenario.SU2_QUANTUM:
            raise ConfigError("not a SU2_QUANTUM configuration")
        return cls(flat_to_complex(x.coords))

    @property
    def S(self) -> np.ndarray:
        return (self.X + self.X.T) / 2

    @property
    def A(self) -> np.ndarray:
        return (self.X - self.X.T) / 2

    @property
    def a(self) -> complex:
        return complex(self.A[1, 0])


def _batched_takagi(S):
    """Takagi data for a stack (..., 2, 2) of symmetric matrices.

    Returns ``omega, delta (..., 2), H (..., 2, 2)`` and a degeneracy mask.
    Degenerate entries carry meaningless values.
    """
    S = np.asarray(S, dtype=complex)
    U, sv, _ = np.linalg.svd(S)
    d1, d2 = sv[..., 0], sv[..., 1]
    degenerate = degenerate_mask(d1, d2)
    rank_one = d2 <= _RANK_ONE * d1

    # Full rank: columns of U rotated by half the phase of U^H S conj(U).
    diag = np.einsum("...ki,...kl,...li->...i", U.conj(), S, U.conj())
    mag = np.abs(diag)
    phase = np.where(mag > 0, diag / np.where(mag > 0, mag, 1), 1.0)
    W = U * np.sqrt(phase)[..., None, :]
    detW = np.linalg.det(W)
    omega_full = np.mod(np.angle(detW), np.pi)
    H_full = W * np.exp(-0.5j * omega_full)[..., None, None]
    flip = np.real(np.linalg.det(H_full)) < 0
    H_full[..., :, 1] = np.where(flip[..., None], -H_full[..., :, 1], H_full[..., :, 1])

    # Rank one: S = e^{i omega} delta1 h h^T with h[0] real and nonnegative.
    h = U[..., :, 0]
    lead = np.where(np.abs(h[..., 0]) > 1e-15, h[..., 0], h[..., 1])
    h = h * np.exp(-1j * np.angle(lead))[..., None]
    proj = np.einsum("...i,...ij,...j->...", h.conj(), S, h.conj())
    omega_one = np.mod(np.angle(proj), TAU)
    H_one = np.stack([
        np.stack([h[..., 0], -h[..., 1].conj()], axis=-1),
        np.stack([h[..., 1], h[..., 0].conj()], axis=-1),
    ], axis=-2)

    omega = np.where(rank_one, omega_one, omega_full)
    omega = np.where(omega >= TAU, 0.0, omega)
    H = np.where(rank_one[..., None, None], H_one, H_full)
    h00 = H[..., 0, 0]
    negate = (h00.real < 0) | ((h00.real == 0) & (h00.imag < 0))
    H = np.where(negate[..., None, None], -H, H)
    return omega, sv, H, degenerate


def takagi(S) -> TakagiResult:
    """Factor a complex symmetric 2x2 matrix as e^{i omega} H diag(delta) H^T."""
    S = np.asarray(S, dtype=complex)
    if S.shape != (2, 2):
        raise ConfigError("takagi expects a 2x2 matrix")
    if abs(S[0, 1] - S[1, 0]) > 1e-12 * (1 + np.abs(S).max()):
        raise ConfigError("takagi expects a symmetric matrix")
    omega, sv, H, degenerate = _batched_takagi(S)
    if degenerate:
        raise DegeneracyError(
            f"singular values {sv[0]:.3g} and {sv[1]:.3g} are not distinct; "
            "the Takagi factorization is not unique")
    return TakagiResult(float(omega), float(sv[0]), float(sv[1]), H)


def symmetric_skew_split(X):
    """Stack (..., 2, 2) -> (S, a) with X = S + a J."""
    X = np.asarray(X, dtype=complex)
    XT = np.swapaxes(X, -1, -2)
    return (X + XT) / 2, (X[..., 1, 0] - X[..., 0, 1]) / 2


def invariant_arrays(X):
    """Vectorized (omega, delta1, delta2, re_a, im_a) and degeneracy mask."""
    S, a = symmetric_skew_split(X)
    omega, sv, _, degenerate = _batched_takagi(S)
    return (omega, sv[..., 0], sv[..., 1], a.real, a.imag), degenerate


def quantum_invariants(X) -> tuple[float, float, float, float, float]:
    """(omega, delta1, delta2, Re a, Im a): a complete set of SU(2) invariants."""
    if isinstance(X, Configuration):
        X = QState.from_configuration(X).X
    elif isinstance(X, QState):
        X = X.X
    S, a = symmetric_skew_split(X)
    t = takagi(S)
    return (t.omega, t.delta1, t.delta2, float(a.real), float(a.imag))
