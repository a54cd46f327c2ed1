"""Periodic-box discretization, FFT transforms, and Fourier multipliers.

Conventions
-----------
The box is [0, L)^3 sampled on an n^3 grid.  Dual frequencies are
xi = 2*pi*k/L with k in FFT (wrap-around) order.  The Fourier coefficient
convention is

    fhat(xi) = (2*pi)^{-3/2} * dV * sum_x f(x) exp(-i xi.x),

so the discrete Parseval identity

    sum_x |f|^2 dV  =  sum_xi |fhat|^2 dXi          (dXi = (2*pi/L)^3)

holds exactly; both sides are what `l2_norm` returns in the respective
representation.

Fields are lightweight containers (values + lattice + representation flag).
The solver works on raw arrays internally and wraps results back into
fields at its API boundary.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import fft as _fft

__all__ = [
    "FrequencyLattice",
    "MassParams",
    "SpinorField",
    "ScalarField",
    "RepresentationError",
    "fft_forward",
    "fft_inverse",
    "apply_scalar_multiplier",
    "apply_matrix_multiplier",
    "apply_projector",
    "sobolev_norm",
    "save_field",
    "load_field",
    "export_spectrum_csv",
]

_WORKERS = int(os.environ.get("DKG_THREADS", "0")) or None


class RepresentationError(ValueError):
    """Operation applied to a field in the wrong representation."""


class MassConditionError(ValueError):
    """Masses violate the non-resonance condition 2M > m > 0."""


@dataclass(frozen=True)
class MassParams:
    """Dirac mass M and Klein-Gordon mass m.

    The non-resonance condition 2M > m > 0 is enforced unless
    ``allow_resonant`` is set (used for deliberately resonant experiments).
    """
    M: float = 1.0
    m: float = 1.0
    allow_resonant: bool = False

    def __post_init__(self):
        if not self.allow_resonant:
            if not (self.m > 0.0 and 2.0 * self.M > self.m):
                raise MassConditionError(
                    f"mass condition 2M > m > 0 violated: M={self.M}, m={self.m}")


class FrequencyLattice:
    """Cubic periodic lattice and its dual frequency grid.

    Parameters
    ----------
    n_per_dim : power-of-two number of points per axis
    box_length : side length L of the periodic box
    """

    def __init__(self, n_per_dim: int, box_length: float):
        if n_per_dim < 2 or (n_per_dim & (n_per_dim - 1)) != 0:
            raise ValueError(f"n_per_dim must be a power of two >= 2, got {n_per_dim}")
        if box_length <= 0:
            raise ValueError("box_length must be positive")
        self.n = int(n_per_dim)
        self.L = float(box_length)
        self.dx = self.L / self.n
        self.dV = self.dx ** 3
        self.dXi = (2.0 * np.pi / self.L) ** 3
        # 1d dual frequencies in FFT order, 2*pi*fftfreq
        self.xi_1d = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        # derivative-safe variant: Nyquist mode zeroed (odd symbols on real data)
        self.xi_1d_deriv = self.xi_1d.copy()
        self.xi_1d_deriv[self.n // 2] = 0.0
        shape = (self.n, self.n, self.n)
        self.xi = np.meshgrid(self.xi_1d, self.xi_1d, self.xi_1d,
                              indexing="ij", sparse=True)
        self.xi_sq = sum(x * x for x in self.xi)
        self.xi_mag = np.sqrt(self.xi_sq)
        self.shape = shape
        self._brackets: dict[float, np.ndarray] = {}
        self.x_1d = np.arange(self.n) * self.dx
        # forward-FFT scale making Parseval exact in the module convention
        self._fwd_scale = self.dV / (2.0 * np.pi) ** 1.5
        self._inv_scale = 1.0 / self._fwd_scale

    def bracket(self, mass: float) -> np.ndarray:
        """<xi>_mass = sqrt(mass^2 + |xi|^2) on the full grid (cached)."""
        key = float(mass)
        if key not in self._brackets:
            self._brackets[key] = np.sqrt(key * key + self.xi_sq)
        return self._brackets[key]

    def max_frequency(self) -> float:
        return float(np.max(np.abs(self.xi_1d)))

    def fftn(self, values: np.ndarray) -> np.ndarray:
        """Physical -> Fourier on the trailing three axes."""
        axes = tuple(range(values.ndim - 3, values.ndim))
        return _fft.fftn(values, axes=axes, workers=_WORKERS) * self._fwd_scale

    def ifftn(self, values: np.ndarray) -> np.ndarray:
        """Fourier -> physical on the trailing three axes."""
        axes = tuple(range(values.ndim - 3, values.ndim))
        return _fft.ifftn(values, axes=axes, workers=_WORKERS) * self._inv_scale

    def __eq__(self, other):
        return (isinstance(other, FrequencyLattice)
                and other.n == self.n and other.L == self.L)

    def __hash__(self):
        return hash((self.n, self.L))

    def __repr__(self):
        return f"FrequencyLattice(n={self.n}, L={self.L:g})"


@dataclass
class _Field:
    lattice: FrequencyLattice
    values: np.ndarray
    representation: str = "physical"   # "physical" | "fourier"

    _NCOMP = None  # set in subclasses

    def __post_init__(self):
        if self.representation not in ("physical", "fourier"):
            raise RepresentationError(f"unknown representation {self.representation!r}")
        self.values = np.asarray(self.values, dtype=np.complex128)
        expect = self._expected_shape()
        if self.values.shape != expect:
            raise ValueError(f"values shape {self.values.shape} != expected {expect}")

    def _expected_shape(self):
        if self._NCOMP is None:
            return self.lattice.shape
        return (self._NCOMP,) + self.lattice.shape

    def copy(self):
        return type(self)(self.lattice, self.values.copy(), self.representation)

    def to_fourier(self):
        if self.representation == "fourier":
            return self.copy()
        return type(self)(self.lattice, self.lattice.fftn(self.values), "fourier")

    def to_physical(self):
        if self.representation == "physical":
            return self.copy()
        return type(self)(self.lattice, self.lattice.ifftn(self.values), "physical")

    def l2_norm(self) -> float:
        """L^2 norm; by Parseval equal in either representation."""
        w = self.lattice.dV if self.representation == "physical" else self.lattice.dXi
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * w))

    def __add__(self, other):
        self._check_compatible(other)
        return type(self)(self.lattice, self.values + other.values, self.representation)

    def __sub__(self, other):
        self._check_compatible(other)
        return type(self)(self.lattice, self.values - other.values, self.representation)

    def __mul__(self, scalar):
        return type(self)(self.lattice, self.values * scalar, self.representation)

    __rmul__ = __mul__

    def _check_compatible(self, other):
        if not isinstance(other, type(self)):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.lattice != self.lattice:
            raise ValueError("lattice mismatch")
        if other.representation != self.representation:
            raise RepresentationError("representation mismatch")


class ScalarField(_Field):
    """Complex scalar field on the lattice (houses phi and phi_+)."""
    _NCOMP = None

    @classmethod
    def zeros(cls, lattice, representation="physical"):
        return cls(lattice, np.zeros(lattice.shape, dtype=np.complex128), representation)


class SpinorField(_Field):
    """C^4-valued field on the lattice, component-major layout (4, n, n, n)."""
    _NCOMP = 4

    @classmethod
    def zeros(cls, lattice, representation="physical"):
        return cls(lattice, np.zeros((4,) + lattice.shape, dtype=np.complex128),
                   representation)


def fft_forward(field):
    """Physical -> Fourier; errors if the field is already spectral."""
    if field.representation != "physical":
        raise RepresentationError("fft_forward expects a physical-representation field")
    return field.to_fourier()


def fft_inverse(field):
    """Fourier -> physical; errors if the field is already physical."""
    if field.representation != "fourier":
        raise RepresentationError("fft_inverse expects a fourier-representation field")
    return field.to_physical()


def _eval_scalar_symbol(lattice, symbol) -> np.ndarray:
    """Evaluate a scalar symbol: ndarray passthrough or callable of (xi1,xi2,xi3)."""
    if isinstance(symbol, np.ndarray):
        return symbol
    vals = symbol(lattice.xi[0], lattice.xi[1], lattice.xi[2])
    return np.broadcast_to(vals, lattice.shape)


def apply_scalar_multiplier(field, symbol):
    """Apply a scalar Fourier multiplier; the symbol is an ndarray on the
    frequency grid or a callable symbol(xi1, xi2, xi3) (sparse-broadcast).

    Works for both scalar and spinor fields (spinors componentwise) and in
    either representation (round-trips through Fourier as needed).
    """
    four = field.to_fourier()
    sym = _eval_scalar_symbol(field.lattice, symbol)
    four.values = four.values * sym
    return four if field.representation == "fourier" else four.to_physical()


def apply_matrix_multiplier(spinor, symbol):
    """Apply a matrix-valued Fourier multiplier to a spinor field.

    ``symbol`` is either an ndarray of shape (4, 4, n, n, n) or a callable
    symbol(xi) -> (4,4) evaluated pointwise on the frequency grid.  The
    callable path is meant for small verification grids; hot paths should
    use :func:`apply_projector` or a precomputed symbol array.
    """
    if not isinstance(spinor, SpinorField):
        raise TypeError("apply_matrix_multiplier expects a SpinorField")
    lat = spinor.lattice
    if callable(symbol):
        n = lat.n
        sym = np.empty((4, 4, n, n, n), dtype=np.complex128)
        x1 = np.broadcast_to(lat.xi[0], lat.shape)
        x2 = np.broadcast_to(lat.xi[1], lat.shape)
        x3 = np.broadcast_to(lat.xi[2], lat.shape)
        for idx in np.ndindex(n, n, n):
            sym[(slice(None), slice(None)) + idx] = symbol(
                np.array([x1[idx], x2[idx], x3[idx]]))
    else:
        sym = symbol
    four = spinor.to_fourier()
    four.values = np.einsum("ab...,b...->a...", sym, four.values)
    return four if spinor.representation == "fourier" else four.to_physical()


def _sign_value(sign) -> float:
    if sign in (+1, 1.0, "+", "plus"):
        return 1.0
    if sign in (-1, -1.0, "-", "minus"):
        return -1.0
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def apply_sigma_dot(xi, two_spinor_pair):
    """(xi.sigma) acting on a stacked pair of 2-spinor component arrays."""
    a, b = two_spinor_pair
    x1, x2, x3 = xi
    return (x3 * a + (x1 - 1j * x2) * b,
            (x1 + 1j * x2) * a - x3 * b)


def projector_apply_values(lattice, values, sign, mass: float) -> np.ndarray:
    """Apply Pi_s^M(D) to Fourier-representation spinor values (4, n, n, n).

    Uses the componentwise form of the symbol: with d = <xi>_M^{-1},

        Pi_s = 1/2 [ I + s d (xi.alpha + M beta) ],
        xi.alpha = [[0, xi.sigma], [xi.sigma, 0]].
    """
    s = _sign_value(sign)
    inv_br = 1.0 / lattice.bracket(mass)
    x1, x2, x3 = lattice.xi
    u0, u1, u2, u3 = values
    # xi.sigma on the upper/lower 2-spinors
    t0, t1 = apply_sigma_dot((x1, x2, x3), (u2, u3))
    t2, t3 = apply_sigma_dot((x1, x2, x3), (u0, u1))
    out = np.empty_like(values)
    out[0] = 0.5 * (u0 + s * inv_br * (t0 + mass * u0))
    out[1] = 0.5 * (u1 + s * inv_br * (t1 + mass * u1))
    out[2] = 0.5 * (u2 + s * inv_br * (t2 - mass * u2))
    out[3] = 0.5 * (u3 + s * inv_br * (t3 - mass * u3))
    return out


def apply_projector(spinor, sign, mass: float):
    """Apply the half-wave projector Pi_s^M(D) to a spinor field."""
    four = spinor.to_fourier()
    four.values = projector_apply_values(spinor.lattice, four.values, sign, mass)
    return four if spinor.representation == "fourier" else four.to_physical()


def sobolev_norm(field, s: float, mass: float = 1.0) -> float:
    """H^s norm ||<xi>_mass^s fhat||_{l^2(dXi)} of a scalar or spinor field."""
    four = field.to_fourier()
    w = field.lattice.bracket(mass) ** s
    return float(np.sqrt(np.sum((np.abs(four.values) ** 2) * w * w)
                         * field.lattice.dXi))


# ----------------------------------------------------------------------------
# serialization: flat binary + JSON sidecar, CSV spectra
# ----------------------------------------------------------------------------

def save_field(field, basepath: str) -> None:
    """Write `<basepath>.bin` (raw C-order complex128) + `<basepath>.json` sidecar."""
    kind = "spinor" if isinstance(field, SpinorField) else "scalar"
    field.values.astype(np.complex128).tofile(basepath + ".bin")
    meta = {
        "kind": kind,
        "dims": list(field.values.shape),
        "n_per_dim": field.lattice.n,
        "box_length": field.lattice.L,
        "representation": field.representation,
        "dtype": "complex128",
    }
    with open(basepath + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_field(basepath: str):
    """Inverse of :func:`save_field`."""
    with open(basepath + ".json") as fh:
        meta = json.load(fh)
    raw = np.fromfile(basepath + ".bin", dtype=np.complex128)
    values = raw.reshape(meta["dims"])
    lattice = FrequencyLattice(meta["n_per_dim"], meta["box_length"])
    cls = SpinorField if meta["kind"] == "spinor" else ScalarField
    return cls(lattice, values, meta["representation"])


def shell_energies(field, k_max: int | None = None):
    """l^2 energy per dyadic shell 2^{k-1} <= |xi| < 2^k (k=0 lump: |xi| < 1)."""
    four = field.to_fourier()
    mag = np.broadcast_to(field.lattice.xi_mag, field.lattice.shape)
    if k_max is None:
        mx = field.lattice.max_frequency()
        k_max = max(1, int(np.ceil(np.log2(max(mx, 1.0)))) + 1)
    dens = np.abs(four.values) ** 2
    if dens.ndim == 4:
        dens = dens.sum(axis=0)
    rows = []
    for k in range(k_max + 1):
        if k == 0:
            mask = mag < 1.0
        else:
            mask = (mag >= 2.0 ** (k - 1)) & (mag < 2.0 ** k)
        rows.append((k, int(mask.sum()),
                     float(np.sum(dens[mask]) * field.lattice.dXi)))
    return rows


def export_spectrum_csv(field, path: str, k_max: int | None = None) -> None:
    """CSV spectrum export: one row per dyadic shell."""
    rows = shell_energies(field, k_max)
    with open(path, "w") as fh:
        fh.write("k,n_modes,l2_energy\n")
        for k, cnt, en in rows:
            fh.write(f"{k},{cnt},{en:.17g}\n")
