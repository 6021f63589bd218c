"""Shell geometry and trap frequencies of the dressed m_F = +2 potential.

Analytic estimates (transverse frequency from the local gradient, pendulum
frequencies of the shell bottom) sit next to a purely numerical check: the
eigenfrequencies of the finite-difference Hessian at the located minimum.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.optimize.elementwise import find_root

from .dressed import DressedPotential
from .errors import CharacterizationError, DomainError, NoShellError, SaddlePointError
from .field import BOX_HALF_X, BOX_RHO, RB87, PhysicalConstants, TrapPotential, check_in_box

ROOT_XTOL = 1e-9
ALPHA_STEP = 100e-9
HESSIAN_STEPS = (10e-6, 1e-6, 50e-9)  # x, y, z


@dataclass(frozen=True)
class TrapCharacterization:
    Delta: float
    Omega: float
    z0: float
    alpha: float
    omega_trans: float
    omega_1: float
    omega_2: float
    hessian_freqs: tuple
    r_min: tuple
    sag: float
    shell_gap: float

    def as_dict(self):
        return asdict(self)


def resonance_height(trap: TrapPotential, Delta) -> float:
    """Lowest point z0 < 0 on the z axis where V_trap(0, 0, z0) = hbar Delta."""
    if not Delta > 0:
        raise NoShellError(f"Delta = {Delta:.4g} rad/s: no resonant shell for Delta <= 0")
    target = trap.constants.hbar * Delta

    def f(z):
        return (trap.value(np.array([0.0, 0.0, z])) - target) / target

    if f(-BOX_RHO) < 0:
        raise DomainError(f"resonance for Delta/2pi = {Delta / 2 / np.pi:.4g} Hz lies below z = -{BOX_RHO} m")
    return brentq(f, -BOX_RHO, 0.0, xtol=ROOT_XTOL * 1e-2, rtol=1e-15)


def local_gradient_alpha(trap: TrapPotential, z0, step=ALPHA_STEP) -> float:
    """|dV_trap/dz| at (0, 0, z0) by central difference, per unit m_F (J/m)."""
    if abs(z0) > BOX_RHO - 3 * step:
        raise DomainError(f"z0 = {z0:.4g} m within 3 steps of the validity-box edge")
    up = trap.value(np.array([0.0, 0.0, z0 + step]))
    down = trap.value(np.array([0.0, 0.0, z0 - step]))
    return float(abs(up - down) / (2 * step))


def transverse_frequency(alpha, Omega, constants: PhysicalConstants = RB87) -> float:
    """omega_trans = |alpha| sqrt(2 / (m hbar Omega))."""
    if not Omega > 0:
        raise DomainError("transverse frequency needs Omega > 0")
    return abs(alpha) * np.sqrt(2.0 / (constants.m_atom * constants.hbar * Omega))


def pendulum_frequencies(z0, omega_x, omega_z, constants: PhysicalConstants = RB87):
    """(omega_1, omega_2) of the shell bottom: sqrt(g/|z0|), scaled by omega_x/omega_z along x."""
    if z0 == 0:
        raise DomainError("pendulum frequency singular at z0 = 0")
    omega_2 = np.sqrt(constants.g_grav / abs(z0))
    return omega_2 * omega_x / omega_z, omega_2


def shell_width(dressed: DressedPotential) -> float:
    """hbar Omega / alpha near the shell bottom: spatial scale of the avoided crossing."""
    trap = dressed.trap
    z0 = resonance_height(trap, dressed.Delta)
    return dressed.constants.hbar * dressed.Omega / local_gradient_alpha(trap, z0)


def _newton_refine(dressed: DressedPotential, r, steps, iterations=6):
    r = np.array(r, dtype=float)
    for _ in range(iterations):
        H = _hessian(dressed, r, steps)
        g = -dressed.force(r)
        try:
            dr = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        # never step further than a few Hessian steps per iteration
        limit = 20 * np.asarray(steps)
        dr = np.clip(dr, -limit, limit)
        r = r - dr
        if np.all(np.abs(dr) < 1e-3 * np.asarray(steps)):
            break
    return r


def trap_minimum(dressed: DressedPotential, n_scan=20001, refine=True) -> np.ndarray:
    """Global minimum of the total potential on the z axis, refined in 3D."""
    if dressed.Omega <= 0:
        raise DomainError("trap_minimum needs Omega > 0")
    zs = np.linspace(-BOX_RHO, BOX_RHO, n_scan)
    pts = np.zeros((n_scan, 3))
    pts[:, 2] = zs
    U = dressed.total(pts)
    i = int(np.argmin(U))
    if i == 0 or i == n_scan - 1:
        raise CharacterizationError("total potential has no interior minimum on the z axis", profile=(zs, U))
    # resolve minima narrower than the scan grid
    lo, hi = zs[i - 1], zs[i + 1]
    res = minimize_scalar(
        lambda z: float(dressed.total(np.array([0.0, 0.0, z]))),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    r = np.array([0.0, 0.0, res.x])
    if refine:
        r = _newton_refine(dressed, r, hessian_steps(dressed))
        check_in_box(r)
    return r


def _z_width(dressed):
    try:
        return shell_width(dressed)
    except Exception:
        return np.inf


def hessian_steps(dressed: DressedPotential):
    """Default steps, with the z step shrunk if the shell is thinner than ~2.5 um."""
    sx, sy, sz = HESSIAN_STEPS
    width = _z_width(dressed)
    return (sx, sy, min(sz, width / 50))


def _hessian(dressed: DressedPotential, r, steps):
    r = np.asarray(r, dtype=float)
    h = np.asarray(steps, dtype=float)
    E = np.eye(3) * h
    # all 1 + 6 + 12 stencil points in one vectorised call
    pts = [r]
    for i in range(3):
        pts += [r + E[i], r - E[i]]
    pairs = [(0, 1), (0, 2), (1, 2)]
    for i, j in pairs:
        pts += [r + E[i] + E[j], r + E[i] - E[j], r - E[i] + E[j], r - E[i] - E[j]]
    U = dressed.total(np.array(pts))
    U0 = U[0]
    H = np.empty((3, 3))
    for i in range(3):
        H[i, i] = (U[1 + 2 * i] - 2 * U0 + U[2 + 2 * i]) / h[i] ** 2
    for k, (i, j) in enumerate(pairs):
        a, b, c, d = U[7 + 4 * k: 11 + 4 * k]
        H[i, j] = H[j, i] = (a - b - c + d) / (4 * h[i] * h[j])
    return H


def hessian_matrix(dressed: DressedPotential, r_min, steps=None):
    check_in_box(r_min)
    return _hessian(dressed, r_min, hessian_steps(dressed) if steps is None else steps)


def hessian_frequencies(dressed: DressedPotential, r_min, steps=None) -> np.ndarray:
    """sqrt(lambda_i / m) of the finite-difference Hessian at r_min, ascending."""
    lam = np.linalg.eigvalsh(hessian_matrix(dressed, r_min, steps))
    if np.any(lam <= 0):
        raise SaddlePointError(f"Hessian eigenvalues {lam} not all positive: not a minimum")
    return np.sqrt(lam / dressed.constants.m_atom)


def shell_radius(trap: TrapPotential, Delta, directions, origin=(0.0, 0.0, 0.0)):
    """Distance t > 0 along each unit direction u with V_trap(origin + t u) = hbar Delta.

    ``origin`` is one point or one point per direction. Returns (t, inside);
    inside is False for rays that leave the validity box before reaching the
    shell (their t is nan).
    """
    u = np.atleast_2d(np.asarray(directions, dtype=float))
    o = np.broadcast_to(np.asarray(origin, dtype=float), u.shape)
    target = trap.constants.hbar * Delta
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(u[:, 0] != 0, (BOX_HALF_X - np.sign(u[:, 0]) * o[:, 0]) / np.abs(u[:, 0]), np.inf)
        # |p + t q| = BOX_RHO in the yz plane
        pq = o[:, 1] * u[:, 1] + o[:, 2] * u[:, 2]
        qq = u[:, 1] ** 2 + u[:, 2] ** 2
        pp = o[:, 1] ** 2 + o[:, 2] ** 2
        trho = np.where(qq > 0, (-pq + np.sqrt(pq**2 - qq * (pp - BOX_RHO**2))) / qq, np.inf)
    tmax = np.minimum(tx, trho) * (1 - 1e-12)
    far = trap.value(o + tmax[:, None] * u)
    inside = (far >= target) & (trap.value(o) < target)
    t = np.full(len(u), np.nan)
    if np.any(inside):
        ui, oi = u[inside], o[inside]

        def f(s, ux, uy, uz, ox, oy, oz):
            pts = np.stack([ox + s * ux, oy + s * uy, oz + s * uz], axis=-1)
            return trap.value(pts) / target - 1.0

        res = find_root(
            f,
            (np.zeros(inside.sum()), tmax[inside]),
            args=(ui[:, 0], ui[:, 1], ui[:, 2], oi[:, 0], oi[:, 1], oi[:, 2]),
            tolerances=dict(xatol=1e-12, xrtol=1e-14),
        )
        t[inside] = res.x
    return t, inside


def _sphere_directions(n):
    """n unit vectors: both z poles first, then a Fibonacci lattice."""
    if n == 1:
        return np.array([[0.0, 0.0, -1.0]])
    poles = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]])
    m = n - 2
    if m <= 0:
        return poles[:n]
    k = np.arange(m) + 0.5
    cz = 1 - 2 * k / m
    phi = np.pi * (1 + 5**0.5) * k
    s = np.sqrt(1 - cz**2)
    return np.vstack([poles, np.stack([s * np.cos(phi), s * np.sin(phi), cz], axis=-1)])


def _plane_directions(n, plane):
    ang = 2 * np.pi * np.arange(n) / n - np.pi / 2  # starts at -z, hits +z for even n
    c, s = np.cos(ang), np.sin(ang)
    zero = np.zeros(n)
    if plane == "yz":
        return np.stack([zero, c, s], axis=-1)
    if plane == "xz":
        return np.stack([c, zero, s], axis=-1)
    raise ValueError(f"unknown plane {plane!r}")


def shell_surface_sample(trap: TrapPotential, Delta, n: int, plane=None) -> np.ndarray:
    """n points on the resonant iso-B shell, by polar angle around the trap centre.

    ``plane`` = "yz" or "xz" restricts the sample to a cross-section. Rays that
    leave the validity box are dropped with a warning.
    """
    if not Delta > 0:
        raise NoShellError("no shell for Delta <= 0")
    if n < 1:
        raise DomainError("n must be >= 1")
    u = _sphere_directions(n) if plane is None else _plane_directions(n, plane)
    t, inside = shell_radius(trap, Delta, u)
    if not np.all(inside):
        warnings.warn(
            f"shell leaves the validity box: {np.count_nonzero(~inside)} of {n} sample points clipped",
            RuntimeWarning,
            stacklevel=2,
        )
    return u[inside] * t[inside, None]


def _upper_shell_gap(dressed: DressedPotential, r_min, z0):
    width = shell_width(dressed)
    zt = abs(z0)
    res = minimize_scalar(
        lambda z: float(dressed.total(np.array([0.0, 0.0, z]))),
        bounds=(zt - 20 * width, zt + 20 * width),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.fun - dressed.total(np.asarray(r_min)))


def characterize(trap: TrapPotential, Delta, Omega, omega_x=None, omega_z=None) -> TrapCharacterization:
    """Fill every TrapCharacterization field for one (Delta, Omega).

    The pendulum estimate along x uses omega_x/omega_z, by default the bare
    trap's own harmonic frequencies for m_F = 2.
    """
    if not Omega > 0:
        raise DomainError("characterize needs Omega > 0")
    c = trap.constants
    if omega_x is None or omega_z is None:
        wx, wr = trap.field.harmonic_frequencies(2, c)
        omega_x = wx if omega_x is None else omega_x
        omega_z = wr if omega_z is None else omega_z
    z0 = resonance_height(trap, Delta)
    alpha = local_gradient_alpha(trap, z0)
    w_trans = transverse_frequency(alpha, Omega, c)
    w1, w2 = pendulum_frequencies(z0, omega_x, omega_z, c)
    dressed = DressedPotential.from_detuning(trap, Delta, Omega, mF=2, include_gravity=True)
    r_min = trap_minimum(dressed)
    freqs = hessian_frequencies(dressed, r_min)
    return TrapCharacterization(
        Delta=float(Delta),
        Omega=float(Omega),
        z0=float(z0),
        alpha=float(alpha),
        omega_trans=float(w_trans),
        omega_1=float(w1),
        omega_2=float(w2),
        hessian_freqs=tuple(float(f) for f in freqs),
        r_min=tuple(float(v) for v in r_min),
        sag=float(z0 - r_min[2]),
        shell_gap=_upper_shell_gap(dressed, r_min, z0),
    )
