"""Exact 4x4 Dirac matrix algebra and spectral projector symbols.

Everything in this module is plain dense complex arithmetic on 4x4 matrices.
The matrices carry integer or half-integer entries, so the anticommutation
identities hold to machine precision and the projector identities to ~1e-15.
Operator norms are computed from singular values, which at this size is both
exact and cheap.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "PAULI",
    "GAMMA",
    "ALPHA",
    "BETA",
    "gamma",
    "alpha",
    "beta",
    "bracket",
    "angle_between",
    "check_clifford",
    "check_alpha_beta",
    "projector",
    "projector_completeness_residual",
    "projector_idempotency_residual",
    "projector_orthogonality_residual",
    "projector_hermiticity_residual",
    "commutation_residual",
    "null_product_norm",
    "pipi_angle",
    "cap_bilinear_bound",
    "CapDistanceError",
]

_I2 = np.eye(2, dtype=np.complex128)
_Z2 = np.zeros((2, 2), dtype=np.complex128)

#: Pauli matrices sigma^1, sigma^2, sigma^3.
PAULI = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)

#: Dirac matrices gamma^0..gamma^3 in the standard (Dirac) representation.
GAMMA = (
    np.block([[_I2, _Z2], [_Z2, -_I2]]),
    np.block([[_Z2, PAULI[0]], [-PAULI[0], _Z2]]),
    np.block([[_Z2, PAULI[1]], [-PAULI[1], _Z2]]),
    np.block([[_Z2, PAULI[2]], [-PAULI[2], _Z2]]),
)

#: alpha^j = gamma^0 gamma^j  and  beta = gamma^0.
ALPHA = tuple(GAMMA[0] @ GAMMA[j] for j in (1, 2, 3))
BETA = GAMMA[0]

#: Minkowski metric diag(1,-1,-1,-1).
METRIC = np.diag([1.0, -1.0, -1.0, -1.0])


def gamma(mu: int) -> np.ndarray:
    """Return the Dirac matrix gamma^mu for mu in 0..3."""
    if mu not in (0, 1, 2, 3):
        raise IndexError(f"gamma index must be in 0..3, got {mu}")
    return GAMMA[mu].copy()


def alpha(j: int) -> np.ndarray:
    """Return alpha^j = gamma^0 gamma^j for j in 1..3."""
    if j not in (1, 2, 3):
        raise IndexError(f"alpha index must be in 1..3, got {j}")
    return ALPHA[j - 1].copy()


def beta() -> np.ndarray:
    """Return beta = gamma^0."""
    return BETA.copy()


def bracket(xi, mass: float) -> np.ndarray:
    """Japanese bracket sqrt(mass^2 + |xi|^2) of a 3-vector (or batch)."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(mass * mass + np.sum(xi * xi, axis=-1))


def angle_between(a, b) -> float:
    """Angle between two 3-vectors via atan2(|a x b|, a.b).

    atan2 is accurate near both 0 and pi, unlike acos of the normalized dot.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("angle undefined for zero vector")
    cross = np.linalg.norm(np.cross(a, b))
    dot = float(np.dot(a, b))
    return float(np.arctan2(cross, dot))


def _max_abs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m)))


def op_norm(m: np.ndarray) -> float:
    """Operator 2-norm (largest singular value) of a small matrix."""
    return float(np.linalg.norm(m, 2))


def check_clifford() -> float:
    """Max residual of gamma^a gamma^b + gamma^b gamma^a = 2 g^{ab} I_4."""
    res = 0.0
    for a in range(4):
        for b in range(4):
            lhs = GAMMA[a] @ GAMMA[b] + GAMMA[b] @ GAMMA[a]
            res = max(res, _max_abs(lhs - 2.0 * METRIC[a, b] * np.eye(4)))
    return res


def check_alpha_beta() -> float:
    """Max residual of alpha^j beta + beta alpha^j = 0 and
    alpha^j alpha^k + alpha^k alpha^j = 2 delta^{jk} I_4."""
    res = 0.0
    for j in range(3):
        res = max(res, _max_abs(ALPHA[j] @ BETA + BETA @ ALPHA[j]))
        for k in range(3):
            lhs = ALPHA[j] @ ALPHA[k] + ALPHA[k] @ ALPHA[j]
            res = max(res, _max_abs(lhs - 2.0 * (j == k) * np.eye(4)))
    return res


def _sign_value(sign) -> float:
    if sign in (+1, 1.0, "+", "plus"):
        return 1.0
    if sign in (-1, -1.0, "-", "minus"):
        return -1.0
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def projector(sign, mass: float, xi) -> np.ndarray:
    """Half-wave projector symbol (1/2)[I +/- <xi>_M^{-1} (xi.alpha + M beta)]."""
    if mass < 0:
        raise ValueError("mass must be nonnegative")
    s = _sign_value(sign)
    xi = np.asarray(xi, dtype=float)
    br = bracket(xi, mass)
    h = xi[0] * ALPHA[0] + xi[1] * ALPHA[1] + xi[2] * ALPHA[2] + mass * BETA
    return 0.5 * (np.eye(4, dtype=np.complex128) + (s / br) * h)


def projector_completeness_residual(mass: float, xi) -> float:
    """sup-norm of Pi_+ + Pi_- - I at one frequency."""
    return _max_abs(projector("+", mass, xi) + projector("-", mass, xi) - np.eye(4))


def projector_idempotency_residual(sign, mass: float, xi) -> float:
    p = projector(sign, mass, xi)
    return _max_abs(p @ p - p)


def projector_orthogonality_residual(mass: float, xi) -> float:
    return _max_abs(projector("+", mass, xi) @ projector("-", mass, xi))


def projector_hermiticity_residual(sign, mass: float, xi) -> float:
    p = projector(sign, mass, xi)
    return _max_abs(p - p.conj().T)


def commutation_residual(sign, mass: float, xi) -> float:
    """Residual of the swap identity Pi_s beta = beta Pi_{-s} + s M <xi>^{-1} I.

    The correction term is a multiple of the identity matrix: conjugating
    beta past the projector flips the sign branch and leaves the fixed
    scalar remainder s*M/<xi>_M.
    """
    s = _sign_value(sign)
    xi = np.asarray(xi, dtype=float)
    p_s = projector(sign, mass, xi)
    p_ms = projector(-int(s), mass, xi)
    corr = s * mass / bracket(xi, mass) * np.eye(4, dtype=np.complex128)
    return _max_abs(p_s @ BETA - BETA @ p_ms - corr)


def null_product_norm(s1, s2, mass: float, xi, eta) -> float:
    """Operator 2-norm of Pi_{s1}(xi) Pi_{s2}(eta).

    The caller compares against C * (angle + <xi>^{-1} + <eta>^{-1}) where
    the relevant angle is `pipi_angle(s1, s2, xi, eta)`.
    """
    return op_norm(projector(s1, mass, xi) @ projector(s2, mass, eta))


def pipi_angle(s1, s2, xi, eta) -> float:
    """Angle controlling the product bound: angle(xi,eta) for opposite
    signs, angle(-xi,eta) for equal signs."""
    if _sign_value(s1) == _sign_value(s2):
        return angle_between(-np.asarray(xi, dtype=float), eta)
    return angle_between(xi, eta)


class CapDistanceError(ValueError):
    """Signed cap centers are farther apart than the stated 2^{-l} scale."""


def signed_cap_distance(s1, s2, w1, w2) -> float:
    """Angular distance between the signed directions s1*w1 and s2*w2."""
    return angle_between(_sign_value(s1) * np.asarray(w1, float),
                         _sign_value(s2) * np.asarray(w2, float))


def cap_bilinear_bound(s1, s2, k1: int, k2: int, l: int, w1, w2,
                       mass: float = 1.0, check: bool = False) -> float:
    """Sharp constant of the pairing (v1, v2) -> <Pi_{s1}(2^k1 w1) v1, beta Pi_{s2}(2^k2 w2) v2>.

    Returns ||Pi_{s2}(2^{k2} w2) beta Pi_{s1}(2^{k1} w1)||_2.  With
    ``check=True`` the signed-cap closeness precondition
    dist(s1 w1, s2 w2) <= 4 * 2^{-l} is enforced; by default the norm is
    returned for any configuration so that off-hypothesis values can be
    inspected too.
    """
    if not (1 <= l <= min(k1, k2) + 10):
        raise ValueError(f"need 1 <= l <= min(k1,k2)+10, got l={l}")
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    for w in (w1, w2):
        if abs(np.linalg.norm(w) - 1.0) > 1e-12:
            raise ValueError("cap centers must be unit vectors")
    if check and signed_cap_distance(s1, s2, w1, w2) > 4.0 * 2.0 ** (-l):
        raise CapDistanceError(
            f"dist(s1*w1, s2*w2) = {signed_cap_distance(s1, s2, w1, w2):.3g} "
            f"exceeds 4*2^-{l}")
    p1 = projector(s1, mass, (2.0 ** k1) * w1)
    p2 = projector(s2, mass, (2.0 ** k2) * w2)
    return op_norm(p2 @ BETA @ p1)
