"""Discrete open curves pinned to two vertical lines, and their geometry.

A curve is a polyline of n+1 nodes whose endpoints sit exactly on the
boundary lines x = line_left and x = line_right.  All geometry (curvature
and its arc-length derivatives up to fifth order) is computed from
tangent-angle differences on a mirror-extended node set, so that the
odd-order derivative conditions at the boundary hold by stencil symmetry.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

GHOSTS = 3  # widest stencil is the 7-point fifth derivative: 3 ghosts per side

TWO_PI = 2.0 * np.pi

# one-sided estimates of f', f''', f''''' at s=0 from samples at h..(m+2)h,
# second-order accurate; used for boundary residuals where the mirrored
# stencils vanish identically and would hide a violated contact condition
_ONESIDED_1 = np.array([-2.5, 4.0, -1.5])
_ONESIDED_3 = np.array([-3.5, 13.0, -18.0, 11.0, -2.5])
_ONESIDED_5 = np.array([-4.5, 26.0, -62.5, 80.0, -57.5, 22.0, -3.5])

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


class CurveError(ValueError):
    """Base class for geometric rejections."""


class DegenerateCurveError(CurveError):
    """Two consecutive nodes coincide."""

    def __init__(self, index: int):
        self.index = int(index)
        super().__init__(f"degenerate segment: nodes {index} and {index + 1} coincide")


class SpacingError(CurveError):
    """Node spacing is not uniform enough; resample before computing geometry."""


class ResolutionError(CurveError):
    """Tangent angle jumps by more than pi/2 between neighbours; refine the curve."""


@dataclass(frozen=True)
class DiscreteCurve:
    """Polyline with endpoints pinned exactly to two vertical lines."""

    points: np.ndarray          # (n+1, 2) float64 node positions
    line_left: float
    line_right: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must have shape (n+1, 2), got {pts.shape}")
        if pts.shape[0] < 17:
            raise ValueError(f"need at least 17 nodes (n >= 16), got {pts.shape[0]}")
        if not np.isfinite(pts).all():
            raise ValueError("points contain non-finite values")
        if not (np.isfinite(self.line_left) and np.isfinite(self.line_right)):
            raise ValueError("boundary lines must be finite")
        if not self.line_right > self.line_left:
            raise ValueError(
                f"line_right ({self.line_right}) must exceed line_left ({self.line_left})"
            )
        if pts[0, 0] != self.line_left or pts[-1, 0] != self.line_right:
            raise ValueError("endpoints must lie exactly on their boundary lines")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        """Number of segments."""
        return self.points.shape[0] - 1


@dataclass(frozen=True)
class GeometryProfile:
    """Arc-length geometry of a curve: spacing, angles, curvature and derivatives."""

    s: np.ndarray               # (n+1,) node arc-length positions, s[0] = 0
    ds: np.ndarray              # (n,) segment lengths
    h: float                    # mean spacing; stencils assume near-uniform nodes
    phi: np.ndarray             # (n,) chord tangent angles, continuously unwrapped
    theta: np.ndarray           # (n+1,) node tangent angles (mirror-consistent)
    k: np.ndarray               # (n+1,) curvature = turning rate of theta
    k_derivs: np.ndarray        # (5, n+1) arc-length derivatives of k, orders 1..5
    length: float
    branch_left: int = field(default=0)   # pi-multiple of the left contact angle
    branch_right: int = field(default=0)  # pi-multiple of the right contact angle

    @property
    def k_s(self) -> np.ndarray:
        return self.k_derivs[0]

    @property
    def k_ss(self) -> np.ndarray:
        return self.k_derivs[1]

    @property
    def k_sss(self) -> np.ndarray:
        return self.k_derivs[2]

    @property
    def k_s4(self) -> np.ndarray:
        return self.k_derivs[3]

    @property
    def k_s5(self) -> np.ndarray:
        return self.k_derivs[4]


def _segment_data(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Segment lengths and raw chord angles; rejects coincident neighbours."""
    d = points[1:] - points[:-1]
    ds = np.hypot(d[:, 0], d[:, 1])
    if not (ds > 0.0).all():
        raise DegenerateCurveError(int(np.argmin(ds)))
    return ds, np.arctan2(d[:, 1], d[:, 0])


def _unwrap_angles(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Continuous angle branch and the wrapped node turns."""
    turns = raw[1:] - raw[:-1]
    turns = (turns + np.pi) % TWO_PI - np.pi
    phi = np.empty_like(raw)
    phi[0] = raw[0]
    turns.cumsum(out=phi[1:])
    phi[1:] += raw[0]
    return phi, turns


@lru_cache(maxsize=8)
def _fractions(m: int) -> np.ndarray:
    f = np.linspace(0.0, 1.0, m + 1)
    f.setflags(write=False)
    return f


def mirror_extend(curve: DiscreteCurve, ghosts: int = GHOSTS) -> np.ndarray:
    """Node set extended by reflection across each boundary line.

    Ghost j steps beyond the left endpoint is the reflection of node j across
    x = line_left (x -> 2*line_left - x, y unchanged), and likewise on the
    right.  Returns an array of n+1+2*ghosts points; row `ghosts` is node 0.
    """
    pts = curve.points
    n = pts.shape[0] - 1
    if not 1 <= ghosts <= n:
        raise ValueError(f"ghost count must be in [1, {n}], got {ghosts}")
    left = pts[ghosts:0:-1].copy()
    left[:, 0] = 2.0 * curve.line_left - left[:, 0]
    right = pts[n - 1:n - 1 - ghosts:-1].copy()
    right[:, 0] = 2.0 * curve.line_right - right[:, 0]
    return np.concatenate([left, pts, right])


def compute_geometry(curve: DiscreteCurve, spacing_tol: float = 0.01) -> GeometryProfile:
    """Curvature and derivatives of a near-uniformly sampled curve.

    Chord angles are extended across each endpoint by the exact reflection
    identity of mirror ghosts, which makes the discrete curvature an even
    sequence about both boundary nodes.  Derivatives then come from central
    stencils on that even extension, so odd orders vanish exactly at the
    boundary nodes.

    Raises SpacingError when spacing deviates from uniform by more than
    spacing_tol (resample first), and ResolutionError when the tangent angle
    turns by more than pi/2 between neighbours.
    """
    pts = curve.points
    ds, raw = _segment_data(pts)
    h = float(ds.mean())
    dev = float(np.abs(ds - h).max())
    if dev > spacing_tol * h:
        raise SpacingError(
            f"spacing deviates {dev / h:.3%} from uniform (tolerance {spacing_tol:.1%}); "
            "resample the curve first"
        )

    phi, turns = _unwrap_angles(raw)
    m_left = int(round(phi[0] / np.pi))
    m_right = int(round(phi[-1] / np.pi))
    # mirror ghosts reflect chord angles through the contact branch:
    # one ghost angle per side is enough to evaluate curvature at every node
    phi_ghost_l = TWO_PI * m_left - phi[0]
    phi_ghost_r = TWO_PI * m_right - phi[-1]
    worst = max(float(np.abs(turns).max(initial=0.0)),
                abs(phi[0] - phi_ghost_l), abs(phi[-1] - phi_ghost_r))
    if worst > 0.5 * np.pi:
        raise ResolutionError(
            f"tangent angle jumps by {worst:.3f} rad (> pi/2); curve is under-resolved "
            "or violates perpendicular contact"
        )

    phi_e = np.empty(phi.size + 2)
    phi_e[0] = phi_ghost_l
    phi_e[1:-1] = phi
    phi_e[-1] = phi_ghost_r
    ds_e = np.empty(ds.size + 2)
    ds_e[0] = ds[0]
    ds_e[1:-1] = ds
    ds_e[-1] = ds[-1]

    w = 0.5 * (ds_e[:-1] + ds_e[1:])
    k = (phi_e[1:] - phi_e[:-1]) / w
    theta = 0.5 * (phi_e[:-1] + phi_e[1:])

    # even extension reproduces curvature of the mirror-extended node set exactly
    k_e = np.concatenate([k[GHOSTS:0:-1], k, k[-2:-2 - GHOSTS:-1]])
    h2 = h * h
    h3 = h2 * h
    k_derivs = np.empty((5, k.size))
    k_derivs[0] = (k_e[4:-2] - k_e[2:-4]) / (2.0 * h)
    k_derivs[1] = (k_e[4:-2] - 2.0 * k_e[3:-3] + k_e[2:-4]) / h2
    # Odd-order stencils difference mirrored pairs first so that the even
    # extension cancels bitwise at the endpoints.
    k_derivs[2] = ((k_e[5:-1] - k_e[1:-5]) - 2.0 * (k_e[4:-2] - k_e[2:-4])) / (2.0 * h3)
    k_derivs[3] = (k_e[5:-1] - 4.0 * k_e[4:-2] + 6.0 * k_e[3:-3]
                   - 4.0 * k_e[2:-4] + k_e[1:-5]) / (h2 * h2)
    k_derivs[4] = ((k_e[6:] - k_e[:-6]) - 4.0 * (k_e[5:-1] - k_e[1:-5])
                   + 5.0 * (k_e[4:-2] - k_e[2:-4])) / (2.0 * h2 * h3)

    s = np.empty(pts.shape[0])
    s[0] = 0.0
    ds.cumsum(out=s[1:])
    for arr in (s, ds, phi, theta, k, k_derivs):
        arr.setflags(write=False)
    return GeometryProfile(
        s=s, ds=ds, h=h, phi=phi, theta=theta, k=k, k_derivs=k_derivs,
        length=float(s[-1]), branch_left=m_left, branch_right=m_right,
    )


def integrate(values: np.ndarray, profile: GeometryProfile) -> float:
    """Trapezoid rule of a node field against the arc element."""
    v = np.asarray(values, dtype=float)
    if v.shape != profile.k.shape:
        raise ValueError(f"field shape {v.shape} does not match node count {profile.k.shape}")
    return 0.5 * float(np.dot(v[:-1] + v[1:], profile.ds))


def boundary_residuals(profile: GeometryProfile) -> dict[str, float]:
    """One-sided estimates of the contact conditions at both endpoints.

    The mirrored stencils force odd curvature derivatives to vanish at the
    boundary nodes by construction, so genuine violations are measured from
    interior curvature values only: one-sided differences for k_s, k_sss and
    k_s5 at each endpoint, plus the deviation of the end chords from
    perpendicular contact (|sin| of the chord angle).
    """
    k = profile.k
    h = profile.h
    h2 = h * h
    left = {
        "ks": _ONESIDED_1 @ k[1:4] / h,
        "ksss": _ONESIDED_3 @ k[1:6] / (h * h2),
        "ks5": _ONESIDED_5 @ k[1:8] / (h * h2 * h2),
    }
    kr = k[::-1]
    right = {
        "ks": _ONESIDED_1 @ kr[1:4] / h,
        "ksss": _ONESIDED_3 @ kr[1:6] / (h * h2),
        "ks5": _ONESIDED_5 @ kr[1:8] / (h * h2 * h2),
    }
    return {
        "ks_left": abs(float(left["ks"])),
        "ks_right": abs(float(right["ks"])),
        "ksss_left": abs(float(left["ksss"])),
        "ksss_right": abs(float(right["ksss"])),
        "ks5_left": abs(float(left["ks5"])),
        "ks5_right": abs(float(right["ks5"])),
        "perp_left": abs(float(np.sin(profile.phi[0]))),
        "perp_right": abs(float(np.sin(profile.phi[-1]))),
    }


def _lagrange_positions(t: np.ndarray, pts: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Evaluate the piecewise 4-point Lagrange interpolant at parameters tau."""
    N = t.size - 1
    seg = (np.searchsorted(t, tau) - 1).clip(0, N - 1)
    b = (seg - 1).clip(0, N - 3)
    t0, t1, t2, t3 = t[b], t[b + 1], t[b + 2], t[b + 3]
    d0, d1, d2, d3 = tau - t0, tau - t1, tau - t2, tau - t3
    w0 = d1 * d2 * d3 / ((t0 - t1) * (t0 - t2) * (t0 - t3))
    w1 = d0 * d2 * d3 / ((t1 - t0) * (t1 - t2) * (t1 - t3))
    w2 = d0 * d1 * d3 / ((t2 - t0) * (t2 - t1) * (t2 - t3))
    w3 = d0 * d1 * d2 / ((t3 - t0) * (t3 - t1) * (t3 - t2))
    return (w0[:, None] * pts[b] + w1[:, None] * pts[b + 1]
            + w2[:, None] * pts[b + 2] + w3[:, None] * pts[b + 3])


def _lagrange_velocity(t: np.ndarray, pts: np.ndarray, tau: np.ndarray,
                       seg: np.ndarray) -> np.ndarray:
    """Derivative of the piecewise cubic interpolant at tau inside given segments."""
    N = t.size - 1
    b = np.clip(seg - 1, 0, N - 3)
    tk = np.stack([t[b], t[b + 1], t[b + 2], t[b + 3]])
    out = np.zeros((tau.size, 2))
    for j in range(4):
        denom = np.ones_like(tau)
        for l in range(4):
            if l != j:
                denom *= tk[j] - tk[l]
        others = [l for l in range(4) if l != j]
        num = np.zeros_like(tau)
        for skip in others:
            term = np.ones_like(tau)
            for l in others:
                if l != skip:
                    term *= tau - tk[l]
            num += term
        out += (num / denom)[:, None] * pts[b + j]
    return out


def arc_length(points: np.ndarray) -> float:
    """Arc length of the piecewise-cubic interpolant through the nodes.

    Five-point Gauss quadrature of the interpolant speed on every chord
    interval; accurate far beyond the interpolation error itself.
    """
    pts = np.asarray(points, dtype=float)
    ds, _ = _segment_data(pts)
    t = np.empty(pts.shape[0])
    t[0] = 0.0
    np.cumsum(ds, out=t[1:])
    N = pts.shape[0] - 1
    mid = 0.5 * (t[:-1] + t[1:])
    half = 0.5 * ds
    tau = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    seg = np.repeat(np.arange(N), _GL_NODES.size)
    vel = _lagrange_velocity(t, pts, tau, seg)
    speed = np.hypot(vel[:, 0], vel[:, 1]).reshape(N, _GL_NODES.size)
    return float(np.sum(speed @ _GL_WEIGHTS * half))


def resample_uniform(curve: DiscreteCurve, m: int) -> DiscreteCurve:
    """Resample to m+1 nodes at equal arc spacing along the cubic interpolant.

    Per-segment arc is estimated from the chord with the circle-arc turning
    correction chord*(1 + turn^2/24); targets equidistribute that arc and are
    pulled back to the chord parameter, where the piecewise 4-point Lagrange
    interpolant is evaluated.  Endpoints are preserved exactly.
    """
    if m < 16:
        raise ValueError(f"resample target must satisfy m >= 16, got {m}")
    pts = curve.points
    ds, raw = _segment_data(pts)
    _, turns = _unwrap_angles(raw)
    psi = np.empty_like(ds)
    if turns.size:
        psi[1:-1] = 0.5 * (turns[:-1] + turns[1:])
        psi[0] = turns[0]
        psi[-1] = turns[-1]
    else:
        psi[:] = 0.0
    arc = ds * (1.0 + psi * psi / 24.0)
    s = np.empty(ds.size + 1)
    s[0] = 0.0
    arc.cumsum(out=s[1:])
    t = np.empty_like(s)
    t[0] = 0.0
    ds.cumsum(out=t[1:])
    tau = np.interp(_fractions(m) * s[-1], s, t)
    out = _lagrange_positions(t, pts, tau)
    out[0] = pts[0]
    out[-1] = pts[-1]
    out[0, 0] = curve.line_left
    out[-1, 0] = curve.line_right
    return DiscreteCurve(out, curve.line_left, curve.line_right)
