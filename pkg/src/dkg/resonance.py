"""Resonance function evaluation, lower-bound certification, and the
support-emptiness logic behind the modulation lemma.

The resonance function for signs s1, s2 and masses (M, m) is

    mu(xi1, xi2) = <xi1 - xi2>_m + s1 <xi1>_M - s2 <xi2>_M.

Under 2M > m > 0 it is bounded away from zero in the weighted sense of the
non-resonance estimate; the certifier measures the implied constants by
sampling (log-uniform radii, uniform angles) plus Nelder-Mead refinement
around the worst samples, and reports the infimum ratio per bound.

Dyadic conventions ("A ll B" means A < 2^{-10} B, "j prec k" means
2^j ll 2^k) follow the fixed 2^{-10} smallness threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .grid import MassParams

__all__ = [
    "LL_FACTOR",
    "mu",
    "angle_signed",
    "case_label",
    "check_d_identity",
    "BoundCertificate",
    "certify_bounds",
    "vanishing_support_check",
    "cap_vanishing_check",
    "SupportDecision",
]

# "much smaller" threshold: A ll B  iff  A < LL_FACTOR * B
LL_FACTOR = 2.0 ** (-10)

_SIGNS = {"+": 1.0, "-": -1.0, 1: 1.0, -1: -1.0, 1.0: 1.0, -1.0: -1.0}


def _sgn(s) -> float:
    try:
        return _SIGNS[s]
    except KeyError:
        raise ValueError(f"sign must be '+' or '-', got {s!r}") from None


def _bracket(v, mass):
    v = np.asarray(v, dtype=float)
    return np.sqrt(mass * mass + np.sum(v * v, axis=-1))


def mu(s1, s2, xi1, xi2, masses: MassParams | None = None) -> float:
    """Resonance function <xi1-xi2>_m + s1 <xi1>_M - s2 <xi2>_M."""
    masses = masses or MassParams()
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    return float(_bracket(xi1 - xi2, masses.m)
                 + _sgn(s1) * _bracket(xi1, masses.M)
                 - _sgn(s2) * _bracket(xi2, masses.M))


def _mu_batch(s1, s2, xi1, xi2, masses) -> np.ndarray:
    return (_bracket(xi1 - xi2, masses.m)
            + _sgn(s1) * _bracket(xi1, masses.M)
            - _sgn(s2) * _bracket(xi2, masses.M))


def angle_signed(s1, s2, xi1, xi2) -> np.ndarray:
    """angle(s1*xi1, s2*xi2) via atan2, batched over leading axes."""
    a = _sgn(s1) * np.asarray(xi1, dtype=float)
    b = _sgn(s2) * np.asarray(xi2, dtype=float)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)


def case_label(s1, s2, xi1, xi2, masses: MassParams | None = None) -> str:
    """Classify an interaction into 1a / 1b / 2a / 2b.

    1a: (+,-).  2a: equal signs.  For (-,+): 1b when <xi1-xi2>_m is much
    smaller than min(<xi1>_M, <xi2>_M) (2^{-10} convention), else 2b.
    """
    masses = masses or MassParams()
    v1, v2 = _sgn(s1), _sgn(s2)
    if v1 > 0 and v2 < 0:
        return "1a"
    if v1 == v2:
        return "2a"
    dm = _bracket(np.asarray(xi1, float) - np.asarray(xi2, float), masses.m)
    mn = min(_bracket(xi1, masses.M), _bracket(xi2, masses.M))
    return "1b" if dm < LL_FACTOR * mn else "2b"


def check_d_identity(xi1, xi2, M: float) -> float:
    """Relative residual of the product-difference identity

        <xi1>_M <xi2>_M - (|xi1||xi2| + M^2)
            = M^2 (|xi1|-|xi2|)^2 / (<xi1>_M <xi2>_M + |xi1||xi2| + M^2).
    """
    r1 = float(np.linalg.norm(np.asarray(xi1, float)))
    r2 = float(np.linalg.norm(np.asarray(xi2, float)))
    b1 = np.hypot(M, r1)
    b2 = np.hypot(M, r2)
    lhs = b1 * b2 - (r1 * r2 + M * M)
    rhs = M * M * (r1 - r2) ** 2 / (b1 * b2 + r1 * r2 + M * M)
    scale = max(abs(lhs), abs(rhs), 1.0)
    return abs(lhs - rhs) / scale


# ----------------------------------------------------------------------------
# bound certification
# ----------------------------------------------------------------------------

_BOUND_NAMES = ("high_mod", "mod_angle", "gen_lb", "non_res")


def _bound_rhs(name: str, xi1, xi2, s1, s2) -> np.ndarray:
    """Right-hand side of the named lower bound (unit-mass brackets)."""
    b1 = _bracket(xi1, 1.0)
    b2 = _bracket(xi2, 1.0)
    bd = _bracket(np.asarray(xi1, float) - np.asarray(xi2, float), 1.0)
    if name == "high_mod":
        return np.maximum(bd, np.maximum(b1, b2))
    if name == "non_res":
        return 1.0 / np.minimum(bd, np.minimum(b1, b2))
    ang = angle_signed(s1, s2, xi1, xi2)
    if name == "mod_angle":
        return b1 * b2 / bd * ang ** 2
    if name == "gen_lb":
        return np.minimum(b1, b2) * ang ** 2
    raise ValueError(name)


def _bound_applies(name: str, label: str) -> bool:
    if name == "high_mod":
        return label in ("1a", "1b")
    if name == "mod_angle":
        return label in ("2a", "2b")
    return True


@dataclass
class BoundCertificate:
    """Measured worst constant for one lower bound."""
    name: str
    inf_ratio: float
    worst_sample: tuple | None
    n_effective: int
    passed: bool = True


def _degenerate_candidates(rng) -> list[tuple[np.ndarray, np.ndarray]]:
    """Hand-picked near-degenerate configurations, always included."""
    z = np.zeros(3)
    e = np.array([0.0, 0.0, 1.0])
    cands = [(z, z), (e, e), (e, -e), (2.0 * e, e), (z, e), (e, z)]
    for r in (2.0 ** 6, 2.0 ** 10):
        cands.append((r * e, r * e))
        cands.append((r * e, -r * e))
        cands.append((r * e, (r + 1.0) * e))
        cands.append(((r + 1.0) * e, r * e))
    return cands


def _sample_pairs(rng, n: int, lo: float = 2.0 ** -6, hi: float = 2.0 ** 12):
    """Log-uniform radii, uniform directions, with a bias toward nearly
    collinear and nearly equal-radius pairs (where the bounds degenerate)."""
    r1 = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    r2 = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    # half the samples: tie the radii together (worst configurations)
    tie = rng.random(n) < 0.5
    r2[tie] = r1[tie] * np.exp(rng.normal(0.0, 0.1, tie.sum()))
    w1 = rng.normal(size=(n, 3))
    w1 /= np.linalg.norm(w1, axis=1)[:, None]
    w2 = rng.normal(size=(n, 3))
    w2 /= np.linalg.norm(w2, axis=1)[:, None]
    # bias half toward (anti-)alignment
    mode = rng.integers(0, 4, n)
    ali = mode == 0
    w2[ali] = w1[ali]
    anti = mode == 1
    w2[anti] = -w1[anti]
    jitter = rng.normal(0.0, 0.05, (n, 3))
    w2 = w2 + jitter * ((ali | anti)[:, None])
    w2 /= np.linalg.norm(w2, axis=1)[:, None]
    return r1[:, None] * w1, r2[:, None] * w2


def certify_bounds(masses: MassParams | None = None, n_samples: int = 100_000,
                   seed: int = 0, refine_top: int = 8,
                   sign_pairs=(("+", "-"), ("-", "+"), ("+", "+"), ("-", "-")),
                   ) -> dict[str, BoundCertificate]:
    """Measure the worst constant of each resonance lower bound by sampling.

    Returns a certificate per bound with the infimum of |mu| / rhs over all
    samples whose case hypothesis matches the bound.  After the sweep the
    worst samples are polished with Nelder-Mead (penalized to stay inside
    the hypothesis set).  A certificate fails when its infimum is ~0, which
    is exactly what happens at the resonant mass boundary m = 2M where
    mu^{-,+}(0,0) = 0.
    """
    masses = masses or MassParams()
    if n_samples < 10_000:
        raise ValueError("need at least 1e4 samples for a meaningful certificate")
    rng = np.random.default_rng(seed)
    per_pair = n_samples // len(sign_pairs)

    best = {name: (np.inf, None) for name in _BOUND_NAMES}
    counts = {name: 0 for name in _BOUND_NAMES}

    for (s1, s2) in sign_pairs:
        xi1, xi2 = _sample_pairs(rng, per_pair)
        for (a, b) in _degenerate_candidates(rng):
            xi1 = np.vstack([xi1, a[None, :]])
            xi2 = np.vstack([xi2, b[None, :]])
        mu_abs = np.abs(_mu_batch(s1, s2, xi1, xi2, masses))
        dm = _bracket(xi1 - xi2, masses.m)
        b1m = _bracket(xi1, masses.M)
        b2m = _bracket(xi2, masses.M)
        if _sgn(s1) > 0 and _sgn(s2) < 0:
            labels = np.full(len(xi1), "1a")
        elif _sgn(s1) == _sgn(s2):
            labels = np.full(len(xi1), "2a")
        else:
            labels = np.where(dm < LL_FACTOR * np.minimum(b1m, b2m), "1b", "2b")
        for name in _BOUND_NAMES:
            applies = np.array([_bound_applies(name, lb) for lb in labels])
            if name in ("mod_angle", "gen_lb"):
                nz = (np.linalg.norm(xi1, axis=1) > 0) & (np.linalg.norm(xi2, axis=1) > 0)
                applies &= nz
            if not applies.any():
                continue
            rhs = np.full(len(xi1), np.inf)
            rhs[applies] = _bound_rhs(name, xi1[applies], xi2[applies], s1, s2)
            with np.errstate(invalid="ignore"):
                ratio = np.where(rhs > 0, mu_abs / np.where(rhs > 0, rhs, 1.0), np.inf)
            ratio[~applies] = np.inf
            counts[name] += int(applies.sum())
            # polish the worst samples without touching the shared arrays
            cand_val = np.inf
            cand_pt = None
            for idx in np.argsort(ratio)[:refine_top]:
                if not np.isfinite(ratio[idx]):
                    continue
                if ratio[idx] < cand_val:
                    cand_val = float(ratio[idx])
                    cand_pt = (xi1[idx].copy(), xi2[idx].copy())
                val, pt = _refine(name, s1, s2, xi1[idx], xi2[idx], masses)
                if val < cand_val:
                    cand_val = val
                    cand_pt = pt
            if cand_pt is not None and cand_val < best[name][0]:
                best[name] = (cand_val,
                              (s1, s2, np.asarray(cand_pt[0]), np.asarray(cand_pt[1])))

    out = {}
    for name in _BOUND_NAMES:
        inf_ratio, worst = best[name]
        out[name] = BoundCertificate(
            name=name, inf_ratio=inf_ratio, worst_sample=worst,
            n_effective=counts[name], passed=bool(inf_ratio > 1e-6))
    return out


def _refine(name, s1, s2, xi1, xi2, masses):
    """Nelder-Mead polish of the ratio around one sample."""
    def objective(z):
        a, b = z[:3], z[3:]
        lb = case_label(s1, s2, a, b, masses)
        if not _bound_applies(name, lb):
            return 1e6
        if name in ("mod_angle", "gen_lb"):
            if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
                return 1e6
        rhs = float(_bound_rhs(name, a[None, :], b[None, :], s1, s2)[0])
        if not np.isfinite(rhs) or rhs <= 0:
            return 1e6
        return abs(mu(s1, s2, a, b, masses)) / rhs

    z0 = np.concatenate([xi1, xi2])
    res = optimize.minimize(objective, z0, method="Nelder-Mead",
                            options={"maxiter": 200, "xatol": 1e-8, "fatol": 1e-12})
    z = res.x
    return float(res.fun), (z[:3], z[3:])


# ----------------------------------------------------------------------------
# support emptiness (modulation lemma)
# ----------------------------------------------------------------------------

@dataclass
class SupportDecision:
    """Outcome of a support-emptiness search."""
    empty: bool
    witness: tuple | None = None   # (xi1, xi2) with an attainable mu value
    mu_at_witness: float | None = None

    def __bool__(self):  # truthiness == "nonempty"
        return not self.empty


def _tilde_band(k: int) -> tuple[float, float]:
    # support of the widened (tilde) shell symbol
    hi = 2.0 ** (k + 2)
    lo = 0.0 if k <= 1 else 2.0 ** (k - 2)
    return lo, hi


def _mod_band(j: int) -> tuple[float, float]:
    # "|u| approx 2^j" widened per the tilde modulation supports
    return 2.0 ** (j - 2), 2.0 ** (j + 2)


def _attainable_intervals(j, j1, j2):
    """Intervals attainable by u + v - w with |u|~2^j, |v|~2^j1, |w|~2^j2
    (each of either sign)."""
    a1, b1 = _mod_band(j)
    a2, b2 = _mod_band(j1)
    a3, b3 = _mod_band(j2)
    out = []
    for su in (1.0, -1.0):
        for sv in (1.0, -1.0):
            for sw in (1.0, -1.0):
                lo = min(su * a1, su * b1) + min(sv * a2, sv * b2) - max(sw * a3, sw * b3)
                hi = max(su * a1, su * b1) + max(sv * a2, sv * b2) - min(sw * a3, sw * b3)
                out.append((lo, hi))
    return out


def _membership(values: np.ndarray, intervals) -> np.ndarray:
    ok = np.zeros(values.shape, dtype=bool)
    for lo, hi in intervals:
        ok |= (values >= lo) & (values <= hi)
    return ok


def prec(a: float, b: float) -> bool:
    """Dyadic 'much less': 2^a << 2^b with the 2^{-10} convention."""
    return 2.0 ** a < LL_FACTOR * 2.0 ** b


def _grid_search(k, k1, k2, j, j1, j2, s1, s2, masses,
                 theta_range=(0.0, np.pi), n_r=48, n_theta=96):
    """Dense search over radii in the tilde shells and the relative angle.

    mu depends on (|xi1|, |xi2|, angle) only, so the search space is 3d.
    Returns a witness (xi1, xi2) if some sampled configuration satisfies the
    shell constraint on xi2 - xi1 and has mu attainable from the modulation
    bands; otherwise reports empty.
    """
    lo1, hi1 = _tilde_band(k1)
    lo2, hi2 = _tilde_band(k2)
    lok, hik = _tilde_band(k)
    r1 = np.linspace(max(lo1, 1e-8), hi1, n_r)
    r2 = np.linspace(max(lo2, 1e-8), hi2, n_r)
    th = np.linspace(theta_range[0], theta_range[1], n_theta)
    R1, R2, TH = np.meshgrid(r1, r2, th, indexing="ij")
    diff_sq = R1 * R1 + R2 * R2 - 2.0 * R1 * R2 * np.cos(TH)
    diff = np.sqrt(np.maximum(diff_sq, 0.0))
    feasible = (diff >= lok) & (diff <= hik)
    if not feasible.any():
        return SupportDecision(empty=True)
    # mu with xi_phi = xi2 - xi1 (same magnitude as xi1 - xi2)
    mu_val = (np.sqrt(masses.m ** 2 + diff_sq)
              + _sgn(s1) * np.sqrt(masses.M ** 2 + R1 * R1)
              - _sgn(s2) * np.sqrt(masses.M ** 2 + R2 * R2))
    ok = feasible & _membership(mu_val, _attainable_intervals(j, j1, j2))
    if not ok.any():
        return SupportDecision(empty=True)
    i = np.unravel_index(np.argmax(ok), ok.shape)
    rr1, rr2, tt = float(R1[i]), float(R2[i]), float(TH[i])
    xi1 = np.array([0.0, 0.0, rr1])
    xi2 = rr2 * np.array([np.sin(tt), 0.0, np.cos(tt)])
    return SupportDecision(empty=False, witness=(xi1, xi2),
                           mu_at_witness=float(mu_val[i]))


def vanishing_support_check(k, k1, k2, j, j1, j2, s1, s2,
                            masses: MassParams | None = None) -> SupportDecision:
    """Decide emptiness of the joint space-time support constraint set.

    The set is { (xi1, xi2, tau1, tau2) : xi_i in tilde-A_{k_i},
    xi2 - xi1 in tilde-A_k, |tau2 - tau1 + <xi2-xi1>_m| ~ 2^j,
    |tau_i + s_i <xi_i>_M| ~ 2^{j_i} }.  Eliminating the free taus reduces
    membership to: mu = <xi2-xi1>_m + s1 <xi1>_M - s2 <xi2>_M lies in the
    set of values u + v - w attainable from the three modulation bands.
    """
    masses = masses or MassParams()
    for kk in (k, k1, k2):
        if kk < 0:
            raise ValueError("shell indices must be >= 0")
    return _grid_search(k, k1, k2, j, j1, j2, s1, s2, masses)


def cap_vanishing_check(k, k1, k2, l, kappa1, kappa2, j, j1, j2, s1, s2,
                        masses: MassParams | None = None) -> SupportDecision:
    """Support check with additional angular localization to separated caps.

    kappa1, kappa2 are caps (center, radius 2^{-l}); the doubled supports of
    the cap cutoffs constrain the relative angle of (xi1, xi2).  Requires
    dist(s1 kappa1, s2 kappa2) >= 2^{-l} (separated caps).
    """
    masses = masses or MassParams()
    if l < 1:
        raise ValueError("cap-localized check needs l >= 1")
    w1 = _sgn(s1) * np.asarray(kappa1.center, dtype=float)
    w2 = _sgn(s2) * np.asarray(kappa2.center, dtype=float)
    gap = float(np.arctan2(np.linalg.norm(np.cross(w1, w2)), np.dot(w1, w2)))
    # separation must survive the doubled cap supports that actually enter
    # the localized integrand, so measure the set distance after doubling
    sep = gap - 2.0 * (kappa1.radius + kappa2.radius)
    if sep < 2.0 ** (-l):
        raise ValueError(
            f"caps not separated: doubled-support distance {sep:.3g} < 2^-{l}")
    # relative angle between xi1 and xi2 ranges over the doubled caps
    c_angle = float(np.arctan2(
        np.linalg.norm(np.cross(kappa1.center_array(), kappa2.center_array())),
        np.dot(kappa1.center_array(), kappa2.center_array())))
    pad = 2.0 * (kappa1.radius + kappa2.radius)
    theta_range = (max(0.0, c_angle - pad), min(np.pi, c_angle + pad))
    return _grid_search(k, k1, k2, j, j1, j2, s1, s2, masses,
                        theta_range=theta_range)
