"""Littlewood-Paley shells, frequency cubes, spherical caps, and modulation cutoffs.

All decompositions are built from one smooth even bump rho0 (= 1 on [-1,1],
supported in (-2,2)), constructed from the canonical smooth step

    S(x) = e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)}),   S = 0 left of 0, 1 right of 1.

Partition identities (shells, cubes, caps, modulations) hold pointwise on the
discrete frequency grid up to roundoff because every family telescopes or is
normalized explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from .grid import FrequencyLattice, ScalarField, SpinorField

__all__ = [
    "smooth_step",
    "build_rho0",
    "Rho0",
    "DyadicScheme",
    "shell_bounds",
    "Cap",
    "CapCover",
    "build_cap_cover",
    "SpaceTimeField",
    "ModulationResolutionError",
    "modulation_project",
    "modulation_project_leq",
]


def smooth_step(x):
    """Canonical C^inf step: 0 for x <= 0, 1 for x >= 1, strictly increasing between."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    lo = x <= 0.0
    hi = x >= 1.0
    mid = ~(lo | hi)
    out[lo] = 0.0
    out[hi] = 1.0
    xm = x[mid]
    a = np.exp(-1.0 / xm)
    b = np.exp(-1.0 / (1.0 - xm))
    out[mid] = a / (a + b)
    return out


class Rho0:
    """Smooth even cutoff: 1 on [-1,1], supported in (-2,2), values in [0,1]."""

    def __init__(self, transition=None):
        # transition: smooth step on [0,1] (0 at 0, 1 at 1); default canonical
        self.transition = transition if transition is not None else smooth_step

    def __call__(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        return self.transition(2.0 - s)


def build_rho0(transition_profile=None) -> Rho0:
    """Base cutoff rho0 from a transition profile (default: canonical smooth step)."""
    return Rho0(transition_profile)


def shell_bounds(k: int, tilde: bool = False):
    """Support band of the (tilde) shell symbol: [2^{k-1}, 2^{k+1}] for k >= 1,
    widened by one dyadic step on each side for the tilde variant; the k = 0
    lump is [0, 2] (tilde: [0, 4])."""
    pad = 1 if tilde else 0
    hi = 2.0 ** (k + 1 + pad)
    lo = 0.0 if k - pad <= 0 else 2.0 ** (k - 1 - pad)
    return lo, hi


@dataclass(frozen=True)
class Cap:
    """Spherical cap: unit center direction and angular radius."""
    center: tuple
    radius: float

    def center_array(self):
        return np.asarray(self.center, dtype=float)


def _icosahedron_vertices():
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    return v / np.linalg.norm(v, axis=1)[:, None]


_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=int)


def _geodesic_grid(freq: int) -> np.ndarray:
    """Vertices of the icosahedral geodesic grid at subdivision frequency `freq`."""
    base = _icosahedron_vertices()
    pts = []
    for face in _ICO_FACES:
        a, b, c = base[face]
        for i in range(freq + 1):
            for j in range(freq + 1 - i):
                w = (freq - i - j, i, j)
                p = (w[0] * a + w[1] * b + w[2] * c) / freq
                pts.append(p / np.linalg.norm(p))
    pts = np.array(pts)
    # dedup shared edge/vertex points
    key = np.round(pts * 1e8).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return pts[np.sort(idx)]


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    th = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)


def _covering_radius(centers: np.ndarray, probes: np.ndarray) -> float:
    """Max over probe directions of the angle to the nearest center."""
    best = np.full(len(probes), -1.0)
    block = 4096
    for start in range(0, len(probes), block):
        dots = probes[start:start + block] @ centers.T
        best[start:start + block] = dots.max(axis=1)
    return float(np.max(np.arccos(np.clip(best, -1.0, 1.0))))


class CapCover:
    """Covering of S^2 by caps of radius 2^{-l} with a smooth angular partition.

    eta_kappa = u_kappa / sum(u) with u_kappa a bump of the angular distance to
    the cap center; supports stay inside the doubled cap and the measured
    overlap (caps nonzero at a direction) stays <= 8 by construction.
    """

    def __init__(self, l: int, centers: np.ndarray, support_radius: float,
                 covering_radius: float, subdivision: int):
        self.l = int(l)
        self.radius = 2.0 ** (-l)
        self.centers = centers
        self.support_radius = float(support_radius)
        self.covering_radius = float(covering_radius)
        self.subdivision = int(subdivision)
        self.caps = [Cap(tuple(c), self.radius) for c in centers]

    def __len__(self):
        return len(self.centers)

    def _angles_to_centers(self, directions: np.ndarray) -> np.ndarray:
        dots = np.clip(directions @ self.centers.T, -1.0, 1.0)
        return np.arccos(dots)

    def weights(self, directions: np.ndarray) -> np.ndarray:
        """Partition weights eta_kappa(direction): shape (npts, ncaps)."""
        ang = self._angles_to_centers(directions)
        # bump: 1 inside half the support radius, 0 outside it
        t = ang / self.support_radius
        u = smooth_step(2.0 * (1.0 - t))
        tot = u.sum(axis=1, keepdims=True)
        return u / tot

    def overlap_counts(self, directions: np.ndarray) -> np.ndarray:
        ang = self._angles_to_centers(directions)
        return (ang < self.support_radius).sum(axis=1)

    def cap_symbol(self, index: int, lattice: FrequencyLattice) -> np.ndarray:
        """eta_kappa on the full frequency grid (origin mode gets 1/ncaps)."""
        return self._symbols_on_lattice(lattice)[index]

    def _symbols_on_lattice(self, lattice: FrequencyLattice) -> np.ndarray:
        cache = getattr(lattice, "_cap_symbol_cache", None)
        if cache is None:
            cache = {}
            lattice._cap_symbol_cache = cache
        if self.l in cache:
            return cache[self.l]
        mag = np.broadcast_to(lattice.xi_mag, lattice.shape)
        nz = mag > 0
        dirs = np.stack([np.broadcast_to(x, lattice.shape)[nz] for x in lattice.xi],
                        axis=1) / mag[nz][:, None]
        w = self.weights(dirs)
        ncaps = len(self)
        out = np.empty((ncaps,) + lattice.shape)
        for i in range(ncaps):
            sym = np.full(lattice.shape, 1.0 / ncaps)
            sym[nz] = w[:, i]
            out[i] = sym
        cache[self.l] = out
        return out


_COVER_CACHE: dict[int, CapCover] = {}


def build_cap_cover(l: int, probes: int = 20000) -> CapCover:
    """Cover S^2 with ~4^l * C caps of radius 2^{-l} (icosahedral grid).

    The subdivision frequency is the smallest one whose measured covering
    radius (dense direction sampling) is below 2^{-l}.
    """
    if l < 1:
        raise ValueError("cap covers are built for l >= 1 (l = 0 is the identity)")
    if l in _COVER_CACHE:
        return _COVER_CACHE[l]
    target = 2.0 ** (-l)
    probe_dirs = _fibonacci_sphere(probes)
    freq = max(1, int(np.floor(0.6524 / target)))
    while True:
        centers = _geodesic_grid(freq)
        rho = _covering_radius(centers, probe_dirs)
        if rho <= target:
            break
        freq += 1
    support = min(1.35 * rho, 2.0 * target)
    if support <= rho:
        support = 0.5 * (rho + 2.0 * target)
    cover = CapCover(l, centers, support, rho, freq)
    _COVER_CACHE[l] = cover
    return cover


class DyadicScheme:
    """Bundles the cutoff rho0 with shell, cube, and cap symbol evaluation.

    Shell symbols: P_k has symbol rho_k for k >= 1 and P_0 = I - sum_{k>=1} P_k,
    which telescopes to rho0(|xi|).  Cube symbols gamma_{k',n} come from a 1d
    partition gamma1 (even, supported in [-2/3, 2/3], sums to 1 over integer
    shifts).  Cap symbols come from :class:`CapCover`.
    """

    def __init__(self, transition_profile=None):
        self.rho0 = build_rho0(transition_profile)

    # -- shells ---------------------------------------------------------------

    def shell_symbol(self, k: int, r) -> np.ndarray:
        """P_k symbol at radii r (k = 0 is the low-frequency lump)."""
        if k < 0:
            raise ValueError("shell index must be >= 0")
        r = np.asarray(r, dtype=float)
        if k == 0:
            return self.rho0(r)
        return self.rho0(r / 2.0 ** k) - self.rho0(r / 2.0 ** (k - 1))

    def shell_symbol_leq(self, k: int, r) -> np.ndarray:
        """P_{<=k} symbol; telescopes to rho0(|r|/2^k)."""
        return self.rho0(np.asarray(r, dtype=float) / 2.0 ** k)

    def shell_symbol_tilde(self, k: int, r) -> np.ndarray:
        """tilde-P_k = P_{k-1} + P_k + P_{k+1} (with the k = 0 lump convention)."""
        lo = max(k - 1, 0)
        out = np.zeros(np.shape(np.asarray(r, dtype=float)))
        for kk in range(lo, k + 2):
            out = out + self.shell_symbol(kk, r)
        return out

    # -- cubes ----------------------------------------------------------------

    def _gamma1_raw(self, x):
        # bump equal to 1 on |x| <= 1/3, supported in |x| <= 2/3
        x = np.abs(np.asarray(x, dtype=float))
        return smooth_step((2.0 / 3.0 - x) * 3.0)

    def gamma1(self, x) -> np.ndarray:
        """1d cube profile: even, supp in [-2/3, 2/3], sum_n gamma1(x - n) = 1."""
        x = np.asarray(x, dtype=float)
        base = np.floor(x)
        tot = np.zeros_like(x)
        for shift in (-1.0, 0.0, 1.0, 2.0):
            tot = tot + self._gamma1_raw(x - (base + shift))
        return self._gamma1_raw(x) / tot

    def cube_symbol_1d(self, kprime: int, n_component: float, x) -> np.ndarray:
        return self.gamma1((np.asarray(x, dtype=float) - n_component) / 2.0 ** kprime)

    def cube_symbol(self, kprime: int, n, xi_components) -> np.ndarray:
        """gamma_{k',n}(xi) = prod_d gamma1((xi_d - n_d)/2^{k'}); n in 2^{k'} Z^3."""
        n = np.asarray(n, dtype=float)
        step = 2.0 ** kprime
        if np.any(np.abs(n / step - np.round(n / step)) > 1e-9):
            raise ValueError(f"cube center {n} is not on the lattice 2^{kprime} Z^3")
        sym = None
        for d in range(3):
            s = self.cube_symbol_1d(kprime, n[d], xi_components[d])
            sym = s if sym is None else sym * s
        return sym

    def cube_centers(self, kprime: int, max_radius: float) -> np.ndarray:
        """All cube centers n in 2^{k'} Z^3 whose cube can meet |xi| <= max_radius."""
        step = 2.0 ** kprime
        m = int(np.floor(max_radius / step)) + 1
        rng = np.arange(-m, m + 1) * step
        g = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
        keep = np.linalg.norm(g, axis=1) <= max_radius + step
        return g[keep]

    # -- projections on fields --------------------------------------------------

    def littlewood_paley(self, field, k: int, variant: str = "plain"):
        """P_k (or P_{<=k} / tilde-P_k) applied to a field."""
        lat = field.lattice
        if variant == "plain":
            sym = self.shell_symbol(k, lat.xi_mag)
        elif variant == "leq":
            sym = self.shell_symbol_leq(k, lat.xi_mag)
        elif variant == "tilde":
            sym = self.shell_symbol_tilde(k, lat.xi_mag)
        else:
            raise ValueError(f"unknown variant {variant!r}")
        four = field.to_fourier()
        four.values = four.values * np.broadcast_to(sym, lat.shape)
        return four if field.representation == "fourier" else four.to_physical()

    def cube_project(self, field, kprime: int, n):
        """Gamma_{k',n} applied to a field (separable 1d symbols)."""
        lat = field.lattice
        n = np.asarray(n, dtype=float)
        step = 2.0 ** kprime
        if np.any(np.abs(n / step - np.round(n / step)) > 1e-9):
            raise ValueError(f"cube center {n} is not on the lattice 2^{kprime} Z^3")
        s0 = self.cube_symbol_1d(kprime, n[0], lat.xi_1d)[:, None, None]
        s1 = self.cube_symbol_1d(kprime, n[1], lat.xi_1d)[None, :, None]
        s2 = self.cube_symbol_1d(kprime, n[2], lat.xi_1d)[None, None, :]
        four = field.to_fourier()
        four.values = four.values * s0 * s1 * s2
        return four if field.representation == "fourier" else four.to_physical()

    def cap_project(self, field, l: int, index: int = 0, cover: CapCover | None = None):
        """P_kappa applied to a field; l = 0 is the identity (single-cap family)."""
        if l == 0:
            return field.copy()
        cover = cover or build_cap_cover(l)
        sym = cover.cap_symbol(index, field.lattice)
        four = field.to_fourier()
        four.values = four.values * sym
        return four if field.representation == "fourier" else four.to_physical()


# ----------------------------------------------------------------------------
# space-time fields and modulation projections
# ----------------------------------------------------------------------------

class ModulationResolutionError(ValueError):
    """Requested modulation band is below the discrete tau resolution."""


class SpaceTimeField:
    """Uniform time samples of a spatial field on the window [0, T).

    frames has shape (n_t, ...) with trailing spatial axes ((n,n,n) scalar or
    (4,n,n,n) spinor).  Time samples sit at t_i = i*T/n_t, matching the FFT's
    periodic convention; the dual modulation grid is tau_j = 2*pi*j/T.
    """

    def __init__(self, lattice: FrequencyLattice, frames: np.ndarray, T: float):
        self.lattice = lattice
        self.frames = np.asarray(frames, dtype=np.complex128)
        self.T = float(T)
        self.n_t = self.frames.shape[0]
        if self.frames.shape[-3:] != lattice.shape:
            raise ValueError("trailing axes of frames must match the lattice")
        self.dt = self.T / self.n_t
        self.tau = 2.0 * np.pi * np.fft.fftfreq(self.n_t, d=self.dt)

    @property
    def is_spinor(self) -> bool:
        return self.frames.ndim == 5

    def copy(self) -> "SpaceTimeField":
        return SpaceTimeField(self.lattice, self.frames.copy(), self.T)

    def times(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt

    def tau_resolution(self) -> float:
        return 2.0 * np.pi / self.T

    def full_transform(self) -> np.ndarray:
        """Space-time Fourier transform (time axis 0, space on trailing axes)."""
        spat = self.lattice.fftn(self.frames)
        return _fft.fft(spat, axis=0) * (self.dt / np.sqrt(2.0 * np.pi))

    @classmethod
    def from_full_transform(cls, lattice, transform: np.ndarray, T: float):
        n_t = transform.shape[0]
        dt = T / n_t
        spat = _fft.ifft(transform, axis=0) / (dt / np.sqrt(2.0 * np.pi))
        return cls(lattice, lattice.ifftn(spat), T)

    def l2_norm(self) -> float:
        """L^2(dt dx) over the window (uniform-weight time sum)."""
        return float(np.sqrt(np.sum(np.abs(self.frames) ** 2)
                             * self.lattice.dV * self.dt))


def _modulation_argument(stf: SpaceTimeField, sign, mass: float) -> np.ndarray:
    s = 1.0 if sign in (1, "+", "plus") else -1.0
    br = stf.lattice.bracket(mass)
    tau = stf.tau.reshape((stf.n_t,) + (1,) * 3)
    if stf.is_spinor:
        tau = tau[:, None, ...]
        br = br[None, ...]
    return tau + s * br


def _apply_tau_symbol(stf: SpaceTimeField, sym: np.ndarray) -> SpaceTimeField:
    tr = stf.full_transform()
    tr = tr * sym
    return SpaceTimeField.from_full_transform(stf.lattice, tr, stf.T)


def modulation_project(stf: SpaceTimeField, sign, mass: float, j: int,
                       scheme: DyadicScheme | None = None,
                       tilde: bool = False) -> SpaceTimeField:
    """Q_j^{±,mass}: multiply the space-time transform by rho_j(tau ± <xi>_mass)."""
    if 2.0 ** j < stf.tau_resolution():
        raise ModulationResolutionError(
            f"2^{j} = {2.0**j:g} below tau resolution {stf.tau_resolution():g}; "
            "extend the time window")
    scheme = scheme or DyadicScheme()
    u = np.abs(_modulation_argument(stf, sign, mass))
    r0 = scheme.rho0
    if tilde:
        sym = r0(u / 2.0 ** (j + 1)) - r0(u / 2.0 ** (j - 2))
    else:
        sym = r0(u / 2.0 ** j) - r0(u / 2.0 ** (j - 1))
    return _apply_tau_symbol(stf, sym)


def modulation_project_leq(stf: SpaceTimeField, sign, mass: float, j: int,
                           scheme: DyadicScheme | None = None) -> SpaceTimeField:
    """Q_{<=j}^{±,mass} with the telescoped symbol rho0(2^{-j}|tau ± <xi>|)."""
    scheme = scheme or DyadicScheme()
    u = np.abs(_modulation_argument(stf, sign, mass))
    sym = scheme.rho0(u / 2.0 ** j)
    return _apply_tau_symbol(stf, sym)


def modulation_project_range(stf: SpaceTimeField, sign, mass: float,
                             j_range, scheme: DyadicScheme | None = None) -> SpaceTimeField:
    """Q_{j in [jmin, jmax]} = Q_{<=jmax} - Q_{<=jmin-1} (exact telescoping)."""
    jmin, jmax = j_range
    scheme = scheme or DyadicScheme()
    u = np.abs(_modulation_argument(stf, sign, mass))
    sym = scheme.rho0(u / 2.0 ** jmax) - scheme.rho0(u / 2.0 ** (jmin - 1))
    return _apply_tau_symbol(stf, sym)


def resolvable_modulation_range(stf: SpaceTimeField, mass: float) -> tuple[int, int]:
    """Dyadic j range resolvable on the window: from the tau resolution up to
    the largest |tau ± <xi>| representable."""
    jmin = int(np.ceil(np.log2(stf.tau_resolution())))
    umax = float(np.max(np.abs(stf.tau))) + float(np.max(stf.lattice.bracket(mass)))
    jmax = int(np.ceil(np.log2(umax))) + 1
    return jmin, jmax
