"""Continuum-limit machinery: effective potential and stationary profiles.

The coupled recursion's continuum limit reduces to a one-dimensional
conservative system in the normal coordinate ut = g(u), where
g'(u) = sqrt(B(u)), B(u) = phi'(u)/3 and phi(u) = 1/(sigma_n^2 - u).
phi' has the closed form 1/(sigma_n^2 - u)^2, so g integrates exactly to

    g(u) = (1/sqrt(3)) ln((sigma_n^2 + beta) / (sigma_n^2 - u)),

anchored at g(-beta) = 0.  The effective potential U(ut) = V(g^{-1}(ut))
shares its stationary points with V.  Non-uniform stationary profiles with
boundary value ut_r solve the quadrature relation

    F(ut(0)) = 1/gamma,  F(x) = int_x^{ut_r} dy / sqrt(2 (U(y) - U(ut(0))))

and are reconstructed from F(ut(x)) = (1 - |x|)/gamma.  F is finite inside
(ut_l, ut_un) and diverges at both ends, which yields the trapped branch
(center near ut_l) and the separatrix branch (center near ut_un, the point
where U returns to the height U(ut_r)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, minimize_scalar

from .density_evolution import uncoupled_fixed_points
from .errors import DomainError, MonostableRegime
from .scalar_channel import ScalarChannelTable, default_table
from .thresholds import free_energy, potential_from_snr

_EDGE_FRACTION = 1e-8   # bracket inset for F-root solving, times the span


@dataclass
class EffectivePotential:
    """U(ut) with its landmarks; built parametrically through the SNR grid."""

    beta: float
    sigma_n_sq: float
    ut_l: float                 # image of the left stable solution
    ut_r: float                 # image of the right stable solution
    ut_barrier: float           # image of the unstable solution
    ut_un: float | None         # U(ut_un) = U(ut_r), None when right is global
    _interp: PchipInterpolator = field(repr=False)
    _roots: np.ndarray = field(repr=False)

    def g(self, u):
        u = np.asarray(u, dtype=float)
        return (np.log((self.sigma_n_sq + self.beta)
                       / (self.sigma_n_sq - u)) / np.sqrt(3.0))

    def g_inv(self, ut):
        ut = np.asarray(ut, dtype=float)
        return (self.sigma_n_sq
                - (self.sigma_n_sq + self.beta) * np.exp(-np.sqrt(3.0) * ut))

    def value(self, ut):
        return self._interp(ut)

    def derivative(self, ut):
        return self._interp.derivative()(ut)

    @property
    def trapped_exists(self) -> bool:
        return self.ut_un is not None


def build_effective_potential(beta: float, sigma_n_sq: float,
                              table: ScalarChannelTable | None = None,
                              n_grid: int = 4000) -> EffectivePotential:
    """Construct U and locate the landmarks ut_l, ut_r, ut_un.

    Raises MonostableRegime if the uncoupled fixed-point equation has a
    single root (no left minimum to speak of).
    """
    table = table or default_table()
    fps = uncoupled_fixed_points(beta, sigma_n_sq, table)
    if len(fps) < 3:
        raise MonostableRegime("effective-potential landmarks need the "
                               "bistable regime")
    s_roots = fps.roots

    # parametric grid in s: global coverage plus refinement at each root
    pieces = [np.array([0.0]), np.geomspace(1e-5, table.s_max, n_grid)]
    for s0 in s_roots:
        local = s0 + np.linspace(-1.0, 1.0, 81) * max(0.02 * s0, 1e-3)
        pieces.append(local[(local > 0) & (local < table.s_max)])
        pieces.append(np.array([s0]))
    s_grid = np.unique(np.concatenate(pieces))

    u_grid = -beta * table.xi(s_grid)
    v_vals = potential_from_snr(s_grid, beta, sigma_n_sq, table)
    sqrt3 = np.sqrt(3.0)
    ut_grid = np.log((sigma_n_sq + beta) / (sigma_n_sq - u_grid)) / sqrt3
    ut_grid, keep = np.unique(ut_grid, return_index=True)
    interp = PchipInterpolator(ut_grid, v_vals[keep], extrapolate=False)

    u_roots = -beta * table.xi(s_roots)
    ut_roots = np.log((sigma_n_sq + beta) / (sigma_n_sq - u_roots)) / sqrt3
    ut_l, ut_barrier, ut_r = (float(ut_roots[0]), float(ut_roots[1]),
                              float(ut_roots[2]))

    u_r_height = float(interp(ut_r))
    gap_l = float(interp(ut_l)) - u_r_height
    ut_un = None
    if abs(gap_l) < 1e-12:
        ut_un = ut_l
    elif gap_l < 0:
        # trapped regime: U crosses the right-minimum height between
        # the left minimum and the barrier top
        ut_un = float(brentq(lambda t: float(interp(t)) - u_r_height,
                             ut_l, ut_barrier, xtol=1e-14))
    return EffectivePotential(beta=beta, sigma_n_sq=sigma_n_sq, ut_l=ut_l,
                              ut_r=ut_r, ut_barrier=ut_barrier, ut_un=ut_un,
                              _interp=interp, _roots=ut_roots)


def barrier_integral_F(u0: float, ep: EffectivePotential,
                       with_error: bool = False):
    """F(u0) = int_{u0}^{ut_r} dy / sqrt(2 (U(y) - U(u0))).

    Finite for u0 strictly inside (ut_l, ut_un); diverges (logarithmically)
    toward both endpoints.  The integrable singularity at y = u0 is removed
    by the substitution y = u0 + t^2; the remainder is adaptive quadrature
    in y with a hint at the ut_r end, where the integrand peaks when u0
    approaches ut_un.
    """
    if not ep.trapped_exists:
        raise MonostableRegime("no barrier interval: right minimum is global")
    if not ep.ut_l < u0 < ep.ut_un:
        raise DomainError("u0 must lie strictly inside (ut_l, ut_un)")
    U0 = float(ep.value(u0))
    dU0 = float(ep.derivative(u0))
    m1 = ep.ut_barrier

    def lower(t):
        y = u0 + t * t
        diff = float(ep.value(y)) - U0
        if diff <= 0.0:
            return math.sqrt(2.0 / max(dU0, 1e-300))
        return 2.0 * t / math.sqrt(2.0 * diff)

    def upper(y):
        return 1.0 / math.sqrt(2.0 * max(float(ep.value(y)) - U0, 1e-300))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=IntegrationWarning)
        v1, e1 = quad(lower, 0.0, math.sqrt(m1 - u0), limit=400)
        v2, e2 = quad(upper, m1, ep.ut_r, limit=800,
                      points=[0.5 * (m1 + ep.ut_r), ep.ut_r - 1e-6 *
                              (ep.ut_r - m1)])
    total, err = v1 + v2, e1 + e2
    return (total, err) if with_error else total


@dataclass
class StationaryProfile:
    """Even stationary solution sampled on x in [-1, 1]."""

    gamma: float
    branch: str                  # uniform / trapped / separatrix
    center: float                # ut(0)
    x: np.ndarray
    ut: np.ndarray
    u: np.ndarray

    def efficiency(self, table: ScalarChannelTable, sigma_n_sq: float,
                   beta: float) -> np.ndarray:
        """eta(x) = sigma_n^2 * xi^{-1}(-u/beta) along the profile."""
        return np.array([sigma_n_sq * table.xi_inverse(
            min(max(-uu / beta, 0.0), 1.0)) for uu in self.u])


def _reconstruct_profile(ep: EffectivePotential, u0: float, gamma: float,
                         branch: str, n_samples: int,
                         n_grid: int = 40001) -> StationaryProfile:
    """Invert F(ut(x)) = (1 - |x|)/gamma from the center value outward.

    The cumulative quadrature G(z) = int_{u0}^{z} dy/sqrt(2(U - U0)) runs
    in the substituted variable t = sqrt(y - u0) on a grid clustered at
    both ends (the lower end carries the removed singularity; the upper
    end peaks for the separatrix branch, whose height gap is small).
    """
    U0 = float(ep.value(u0))
    span = ep.ut_r - u0
    shape = 0.5 * (1.0 - np.cos(np.pi * np.linspace(0.0, 1.0, n_grid)))
    t_grid = np.sqrt(span) * np.sqrt(shape)
    z = np.minimum(u0 + t_grid**2, ep.ut_r)
    diff = np.maximum(ep.value(z) - U0, 0.0)
    integrand = np.empty_like(t_grid)
    good = diff > 0
    integrand[good] = 2.0 * t_grid[good] / np.sqrt(2.0 * diff[good])
    dU0 = float(ep.derivative(u0))
    integrand[~good] = math.sqrt(2.0 / max(dU0, 1e-300))
    G = np.concatenate([[0.0], np.cumsum(
        0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t_grid))])
    F_u0 = G[-1]
    x_half = np.linspace(0.0, 1.0, n_samples // 2 + 1)
    phi_target = np.clip((1.0 - x_half) / gamma, 0.0, F_u0)
    ut_half = np.interp(F_u0 - phi_target, G, z)
    x = np.concatenate([-x_half[:0:-1], x_half])
    ut = np.concatenate([ut_half[:0:-1], ut_half])
    return StationaryProfile(gamma=gamma, branch=branch, center=u0, x=x,
                             ut=ut, u=np.asarray(ep.g_inv(ut)))


def nonuniform_profiles(gamma: float, beta: float, sigma_n_sq: float,
                        table: ScalarChannelTable | None = None,
                        n_samples: int = 801) -> list:
    """Stationary profiles at coupling strength gamma.

    Always includes the uniform profile ut = ut_r.  When the right minimum
    is metastable and 1/gamma exceeds the interior minimum of F, the two
    non-uniform branches (trapped near ut_l, separatrix near ut_un) are
    solved from F(u0) = 1/gamma and reconstructed.
    """
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    table = table or default_table()
    ep = build_effective_potential(beta, sigma_n_sq, table)
    x = np.linspace(-1.0, 1.0, n_samples)
    uniform = StationaryProfile(
        gamma=gamma, branch="uniform", center=ep.ut_r, x=x,
        ut=np.full_like(x, ep.ut_r),
        u=np.full_like(x, float(ep.g_inv(ep.ut_r))))
    out = [uniform]
    if not ep.trapped_exists or ep.ut_un <= ep.ut_l:
        return out

    span = ep.ut_un - ep.ut_l
    eps = _EDGE_FRACTION * span
    lo, hi = ep.ut_l + eps, ep.ut_un - eps
    opt = minimize_scalar(lambda u: barrier_integral_F(u, ep),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * span})
    f_min = float(opt.fun)
    u_min = float(opt.x)
    target = 1.0 / gamma
    if target < f_min:
        return out

    def f_shift(u):
        return barrier_integral_F(u, ep) - target

    u_trap = lo if f_shift(lo) <= 0 else brentq(f_shift, lo, u_min,
                                                xtol=1e-15)
    u_sep = hi if f_shift(hi) <= 0 else brentq(f_shift, u_min, hi,
                                               xtol=1e-15)
    out.append(_reconstruct_profile(ep, float(u_trap), gamma, "trapped",
                                    n_samples))
    out.append(_reconstruct_profile(ep, float(u_sep), gamma, "separatrix",
                                    n_samples))
    return out


def asymptotic_me(beta: float, sigma_n_sq: float,
                  table: ScalarChannelTable | None = None) -> float:
    """Middle-point efficiency in the L, W -> inf, gamma -> 0 limit.

    Equals sigma_n^2 times the largest root while the right minimum is
    global (load at or below the potential threshold), and the left stable
    root's efficiency beyond it.
    """
    table = table or default_table()
    fps = uncoupled_fixed_points(beta, sigma_n_sq, table)
    if len(fps) < 3:
        return sigma_n_sq * fps.largest
    s_l = fps.smallest_stable
    s_r = fps.largest
    gap = float(free_energy(s_l, beta, sigma_n_sq, table)
                - free_energy(s_r, beta, sigma_n_sq, table))
    return sigma_n_sq * (s_r if gap >= 0 else s_l)
