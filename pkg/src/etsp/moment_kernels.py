"""
Closed-form energy-space moments for the subband energy-transport system.

Everything here reduces to tail integrals

    T(a, theta, v) = int_theta^inf  eps^a * exp(v*eps) d(eps)
                   = (-v)^-(a+1) * Gamma(a+1, -v*theta),        v < 0,

evaluated with an erfc-seeded upward recurrence when a+1 is a positive
(half-)integer and with adaptive quadrature otherwise. On top of them:

* diffusion moments D_p, p = 0..3, built by telescoping the per-subband sum
  over the steps of the counting function N(eps) = #{n : E_n <= eps}; the
  2x2 diffusion matrix of the transport system is [[D0,D1],[D1,D2]] and the
  p=3 moment feeds its exact Jacobian (d/dv shifts p by one);
* the phonon relaxation coefficients W0 (and W1 = dW0/dv), with N^2(eps)
  telescoped by weights (2m-1); the full relaxation value is
  W = -W0 * (1 + kT_L * v);
* carrier/energy densities, the contact boundary values (u_b, v_b) of the
  entropy variables u = mu/kT, v = -1/kT, and the effective potential of the
  drift-diffusion limit.

Energies are positive after an additive reference shift (`reference_shift`);
the shift is exactly neutral for s = 0 and is the adopted energy origin of
the eps^s cross-section weight otherwise. Shifting E_n by E_ref while
mapping u -> u - E_ref*v leaves every Boltzmann factor exp(u + E_n v)
unchanged.

All functions are pure and broadcast over a leading axis (evaluation
points); energies carry the trailing axis (modes).
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc, logsumexp

__all__ = [
    "DomainError",
    "TruncationWarning",
    "tail_moment",
    "diffusion_moments",
    "relaxation",
    "densities",
    "boundary_values",
    "effective_potential",
    "reference_shift",
]


class DomainError(ValueError):
    """Moment evaluated outside its domain (v >= 0 or nonpositive energy)."""


class TruncationWarning(UserWarning):
    """The retained subband tail is not negligible; raise n_modes."""


def _check_negative_v(v: np.ndarray) -> None:
    if not np.all(np.isfinite(v)) or np.any(v >= 0.0):
        raise DomainError("inverse-temperature variable v must be finite and < 0")


def _upper_gamma_recurrence(alpha: float, x: np.ndarray) -> np.ndarray:
    """Gamma(alpha, x) for x > 0 and alpha a positive multiple of 1/2."""
    two_alpha = round(2.0 * alpha)
    emx = np.exp(-x)
    if two_alpha % 2 == 1:
        c = 0.5
        g = math.sqrt(math.pi) * erfc(np.sqrt(x))
    else:
        c = 1.0
        g = emx.copy()
    while c < alpha - 0.25:
        g = c * g + x**c * emx
        c += 1.0
    return g


def tail_moment(a: float, theta, v, quad_tol: float = 1e-12):
    """
    int_theta^inf eps^a exp(v*eps) d(eps) for v < 0, theta > 0.

    Half-integer and integer a+1 use the exact erfc/exp-seeded upward
    recurrence Gamma(c+1,x) = c*Gamma(c,x) + x^c e^{-x}; other exponents
    fall back to adaptive quadrature at relative tolerance `quad_tol`.
    Scalar inputs return a scalar; arrays broadcast.
    """
    theta_arr = np.asarray(theta, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    _check_negative_v(v_arr)
    if not np.all(theta_arr > 0.0):
        raise DomainError("tail moment requires theta > 0")
    alpha = a + 1.0
    theta_b, v_b = np.broadcast_arrays(theta_arr, v_arr)
    x = -v_b * theta_b
    if abs(2.0 * alpha - round(2.0 * alpha)) < 1e-12 and alpha >= 0.5 - 1e-12:
        out = (-v_b) ** (-alpha) * _upper_gamma_recurrence(alpha, x)
    else:
        flat_t, flat_v = theta_b.ravel(), v_b.ravel()
        vals = np.empty(flat_t.shape)
        for k in range(flat_t.size):
            vals[k], _ = quad(
                lambda e, aa=a, vv=flat_v[k]: e**aa * math.exp(vv * e),
                flat_t[k], np.inf, epsabs=1e-300, epsrel=quad_tol, limit=200,
            )
        out = vals.reshape(theta_b.shape)
    if out.ndim == 0 and np.isscalar(theta) and np.isscalar(v):
        return float(out)
    return out


def _telescope_coefficients(energies: np.ndarray) -> np.ndarray:
    """
    Weights S_{m-1}/(m-1) - S_m/m of the telescoped subband sum, with the
    convention S_0/0 = 0; S_m is the cumulative sum of the sorted ladder.
    """
    S = np.cumsum(energies, axis=-1)
    m = np.arange(1, energies.shape[-1] + 1, dtype=float)
    coeff = np.empty_like(energies)
    coeff[..., 0] = -energies[..., 0]
    if energies.shape[-1] > 1:
        coeff[..., 1:] = S[..., :-1] / (m[1:] - 1.0) - S[..., 1:] / m[1:]
    return coeff


def _check_energies(energies: np.ndarray) -> None:
    if np.any(energies[..., 0] <= 0.0):
        raise DomainError("ladder energies must be positive after the reference shift")


def _warn_truncation(last_term: np.ndarray, total: np.ndarray, tail_tol: float,
                     what: str) -> None:
    bound = tail_tol * np.maximum(np.abs(total), np.finfo(float).tiny)
    if np.any(np.abs(last_term) > bound):
        warnings.warn(
            f"{what}: last retained subband term exceeds {tail_tol:g} of the sum; "
            "increase n_modes", TruncationWarning, stacklevel=3,
        )


def diffusion_moments(u, v, energies, s: float, phi0: float = 1.0,
                      tail_tol: float = 1e-12, check_tail: bool = True) -> np.ndarray:
    """
    Diffusion moments D_p, p = 0..3, of the elastic-scattering closure:

        D_p = e^u/phi0 * [ T(p+1-s, E_1, v)
                           + sum_m (S_{m-1}/(m-1) - S_m/m) T(p-s, E_m, v) ].

    `energies` has the subband axis last and must be sorted ascending with
    E_1 > 0 (shift first: `reference_shift`). Returns shape (..., 4).
    """
    E = np.asarray(energies, dtype=float)
    u_arr = np.asarray(u, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    _check_negative_v(v_arr)
    _check_energies(E)
    coeff = _telescope_coefficients(E)
    eu = np.exp(u_arr) / phi0
    v_modes = v_arr[..., None] if v_arr.ndim else v_arr
    out_shape = np.broadcast_shapes(u_arr.shape, v_arr.shape, E.shape[:-1]) + (4,)
    D = np.empty(out_shape)
    for p in range(4):
        lead = tail_moment(p + 1.0 - s, E[..., 0], v_arr)
        tails = tail_moment(p - s, E, v_modes)
        terms = coeff * tails
        total = lead + terms.sum(axis=-1)
        if check_tail and p == 0:
            _warn_truncation(terms[..., -1], total, tail_tol, "diffusion moments")
        D[..., p] = eu * total
    return D


def relaxation(u, v, energies, s: float, prefactor: float,
               tail_tol: float = 1e-12, check_tail: bool = True):
    """
    Phonon relaxation coefficients

        W0 = prefactor * e^u * sum_m (2m-1) T(s,   E_m, v),
        W1 = prefactor * e^u * sum_m (2m-1) T(s+1, E_m, v)  (= dW0/dv),

    with `prefactor` = 4 pi^2 eps_ph phi_ph (times phi0 when the transport
    system is phi0-normalised). The energy-balance source is
    W = -W0*(1 + kT_L*v), which vanishes at v = -1/kT_L and relaxes the
    carrier temperature toward the lattice.
    """
    E = np.asarray(energies, dtype=float)
    u_arr = np.asarray(u, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    _check_negative_v(v_arr)
    _check_energies(E)
    weights = 2.0 * np.arange(1, E.shape[-1] + 1, dtype=float) - 1.0
    v_modes = v_arr[..., None] if v_arr.ndim else v_arr
    eu = prefactor * np.exp(u_arr)
    out = []
    for exponent in (s, s + 1.0):
        terms = weights * tail_moment(exponent, E, v_modes)
        total = terms.sum(axis=-1)
        if check_tail and exponent == s:
            _warn_truncation(terms[..., -1], total, tail_tol, "relaxation moment")
        out.append(eu * total)
    return out[0], out[1]


def densities(u, v, energies, dos2d: float):
    """
    Sheet density and energy density of the confined gas under Boltzmann
    statistics, per transport node:

        rho    = dos2d * kT * sum_n exp(u + E_n v),
        rho_E  = dos2d * kT * sum_n (E_n + kT) exp(u + E_n v),

    with kT = -1/v. dos2d = 2 pi m*/hbar^2 in 1/(eV nm^2) gives rho in nm^-2.
    The energy weight is (E_n + kT); writing it with a bare temperature
    instead of kT does not survive a dimensional check of the defining
    integral, and the quadrature oracle confirms the kT form.
    """
    E = np.asarray(energies, dtype=float)
    u_arr = np.asarray(u, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    _check_negative_v(v_arr)
    u_modes = u_arr[..., None] if u_arr.ndim else u_arr
    v_modes = v_arr[..., None] if v_arr.ndim else v_arr
    boltz = np.exp(u_modes + E * v_modes)
    kT = -1.0 / v_arr
    kT_modes = kT[..., None] if v_arr.ndim else kT
    rho = dos2d * kT * boltz.sum(axis=-1)
    rhoE = dos2d * kT * ((E + kT_modes) * boltz).sum(axis=-1)
    if np.isscalar(u) and np.isscalar(v):
        return float(rho), float(rhoE)
    return rho, rhoE


def boundary_values(energies_contact, Nsb: float, dos2d: float, kTL: float):
    """
    Entropy-variable boundary data at an ohmic contact: the lattice
    temperature fixes v_b = -1/kT_L, and pinning the contact sheet density
    to Nsb = N+ * ell_Si fixes

        u_b = log( Nsb / (dos2d * kT_L * sum_n exp(-E_n/kT_L)) ),

    with the local contact ladder. Nsb = 0 yields u_b = -inf (empty device).
    """
    E = np.asarray(energies_contact, dtype=float)
    v_b = -1.0 / kTL
    denom = dos2d * kTL * np.exp(E * v_b).sum()
    if Nsb <= 0.0:
        return -math.inf, v_b
    return math.log(Nsb / denom), v_b


def effective_potential(energies, kTL: float):
    """
    Effective confinement potential of the drift-diffusion limit:
    V_s = -kT_L log sum_n exp(-E_n/kT_L), broadcast over leading axes (eV).
    """
    E = np.asarray(energies, dtype=float)
    return -kTL * logsumexp(-E / kTL, axis=-1)


def reference_shift(min_energy: float, kTL: float) -> float:
    """
    Additive energy shift E_ref >= 0 placing the lowest subband at least
    kT_L above zero, so the eps^s weights stay in-domain.
    """
    return max(0.0, kTL - min_energy)
