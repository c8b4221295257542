"""Painlevé IV for a single endpoint, J = (-inf, xi].

With r = dT/dxi the first integral is

    (r'')^2 - 4 (xi r' - r)^2 + 4 (r')^2 (r' + 2n) = 0.

Differentiating and dividing by 2 r'' gives the explicit third-order ODE

    r''' = 4 xi (xi r' - r) - 6 (r')^2 - 8 n r',

which is regular at r'' = 0, so zeros of r'' are recorded but do not stop
the integration.  Initial data always come from Fredholm data.

The flow is violently unstable in both directions: toward large xi the
e^{xi^2} companion mode swamps the decaying solution, and inside the bulk
a fast mode with rate ~ sqrt(4 xi^2 - 12 r' - 8n) amplifies seed errors.
:func:`integrate_p4_span` therefore seeds at the interior point whose flow
map amplifies relative seed errors least and integrates outward.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .fredholm import DEFAULT_NUMERICS, Numerics, point_data
from .geometry import LEFT_J, make_endpoint_config
from .jets import DEFAULT_JET_SETTINGS, JetSettings, jet_T


def p4_terms(r, rp, rpp, xi, n):
    return rpp * rpp, -4.0 * (xi * rp - r) ** 2, 4.0 * rp * rp * (rp + 2.0 * n)


def p4_residual(r: float, rp: float, rpp: float, xi: float, n: int) -> float:
    """Normalized first-integral residual; 0 for r = r' = r'' = 0."""
    terms = p4_terms(r, rp, rpp, xi, n)
    return abs(math.fsum(terms)) / max(1.0, math.fsum(abs(t) for t in terms))


def p4_rhs(xi: float, y, n: int):
    r, rp, rpp = y
    return [rp, rpp, 4.0 * xi * (xi * rp - r) - 6.0 * rp * rp - 8.0 * n * rp]


def single_endpoint(xi: float):
    return make_endpoint_config([xi], LEFT_J)


def p4_jacobian(xi: float, y, n: int) -> np.ndarray:
    r, rp, _ = y
    return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0],
                     [-4.0 * xi, 4.0 * xi * xi - 12.0 * rp - 8.0 * n, 0.0]])


def project_rpp(r: float, rp: float, rpp_guess: float, xi: float, n: int) -> float:
    """r'' on the first integral, on the branch selected by the sign of the guess."""
    disc = 4.0 * (xi * rp - r) ** 2 - 4.0 * rp * rp * (rp + 2.0 * n)
    return math.copysign(math.sqrt(max(disc, 0.0)), rpp_guess)


def seed(n: int, xi: float, settings: JetSettings = DEFAULT_JET_SETTINGS,
         numerics: Numerics = DEFAULT_NUMERICS, project: bool = True) -> tuple[float, float, float]:
    """(r, r', r'') at xi for J = (-inf, xi].

    With ``project`` r and r' come from the resolvent identities and r'' is
    placed on the first integral, the jet only choosing the branch; the
    differenced third derivative is ~1e-9 relative, the projection is at
    rounding level.  Without it all three are read off the T-jet.
    """
    jet = jet_T(n, single_endpoint(xi), 3, settings, numerics)
    r, rp, rpp = jet[(0,)], jet[(0, 0)], jet[(0, 0, 0)]
    if project:
        d = point_data(n, single_endpoint(xi), numerics)
        r, rp = float(d.grad_T[0]), float(d.hess_T[0, 0])
        rpp = project_rpp(r, rp, rpp, xi, n)
    return r, rp, rpp


@dataclass
class P4Trajectory:
    n: int
    xi: np.ndarray
    y: np.ndarray  # rows (r, r', r'')
    direction: int
    stats: dict = field(default_factory=dict)
    inflections: list = field(default_factory=list)
    failure: str = ""

    @property
    def completed(self) -> bool:
        return not self.failure

    @property
    def residuals(self) -> np.ndarray:
        return np.array([p4_residual(*row, x, self.n) for x, row in zip(self.xi, self.y)])

    @property
    def r(self) -> np.ndarray:
        return self.y[:, 0]

    def samples(self):
        return [(float(x), *map(float, row)) for x, row in zip(self.xi, self.y)]

    def conserved(self) -> bool:
        res = self.residuals
        return bool(np.all(res <= 10.0 * res[0] + 1e-9))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["xi", "r", "rp", "rpp", "residual"])
        for (x, r, rp, rpp), res in zip(self.samples(), self.residuals):
            w.writerow([format(v, ".17g") for v in (x, r, rp, rpp, res)])
        return buf.getvalue()


def integrate_p4(n: int, xi_start: float, xi_end: float, init=None, samples: int = 25,
                 rtol: float = 1e-13, atol: float = 1e-300, settings: JetSettings = DEFAULT_JET_SETTINGS,
                 numerics: Numerics = DEFAULT_NUMERICS, t_eval=None) -> P4Trajectory:
    """Integrate the explicit ODE from xi_start to xi_end with DOP853.

    ``samples`` equally spaced output points include both ends (or pass
    ``t_eval``).  Error control is purely relative since r spans many
    decades.  On solver failure the partial trajectory is returned with
    the location recorded.
    """
    y0 = np.array(init if init is not None else seed(n, xi_start, settings, numerics), dtype=float)
    direction = int(np.sign(xi_end - xi_start))
    if direction == 0:
        return P4Trajectory(n, np.array([xi_start]), y0[None, :], 0, {"nfev": 0})

    def inflection(x, y, n):
        return y[2]

    grid = np.linspace(xi_start, xi_end, max(samples, 2)) if t_eval is None else np.asarray(t_eval, float)
    sol = solve_ivp(p4_rhs, (xi_start, xi_end), y0, method="DOP853", t_eval=grid, args=(n,),
                    rtol=rtol, atol=atol, events=inflection)
    stats = {"nfev": int(sol.nfev), "status": int(sol.status), "message": sol.message}
    y = np.asarray(sol.y, dtype=float).T.reshape(-1, 3)  # empty when it fails before the first sample
    traj = P4Trajectory(n, np.asarray(sol.t, dtype=float), y, direction, stats)
    traj.inflections = [float(x) for x in sol.t_events[0]]
    if sol.status < 0:
        last = sol.t[-1] if len(sol.t) else xi_start
        traj.failure = f"solver failed past xi={last:.6g}: {sol.message}"
    return traj


def _augmented(xi, z, n):
    y, Phi = z[:3], z[3:].reshape(3, 3)
    return np.concatenate([p4_rhs(xi, y, n), (p4_jacobian(xi, y, n) @ Phi).ravel()])


def amplification(n: int, xi0: float, y0, targets, rtol: float = 1e-10) -> float:
    """max over targets of |dr(target)| per unit relative perturbation of the seed.

    Read off the variational equation.  Seed errors in r and r' are free,
    the one in r'' follows from staying on the first integral, so the two
    tangent directions of that surface are used.  Multiplied by the seed's
    relative accuracy this estimates the trajectory error.
    """
    worst = 0.0
    y0 = np.asarray(y0, dtype=float)
    r, rp, rpp = y0
    if rpp == 0.0:
        return math.inf
    c_r = 8.0 * (xi0 * rp - r)
    c_rp = -8.0 * xi0 * (xi0 * rp - r) + 12.0 * rp * rp + 16.0 * n * rp
    tangents = np.array([[r, 0.0, -c_r * r / (2 * rpp)], [0.0, rp, -c_rp * rp / (2 * rpp)]]).T
    for end in (min(targets), max(targets)):
        if end == xi0:
            continue
        pts = sorted(t for t in targets if min(xi0, end) <= t <= max(xi0, end))
        z0 = np.concatenate([y0, np.eye(3).ravel()])
        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.simplefilter("ignore", RuntimeWarning)
            sol = solve_ivp(_augmented, (xi0, end), z0, method="DOP853",
                            t_eval=pts if end > xi0 else pts[::-1], args=(n,), rtol=rtol, atol=1e-300)
        if sol.status < 0 or not np.all(np.isfinite(sol.y)):
            return math.inf
        for z in sol.y.T:
            row = z[3:6]  # d r / d y0
            worst = max(worst, float(np.sum(np.abs(row @ tangents))))
    return worst


def choose_seed_point(n: int, lo: float, hi: float, candidates: int = 25, checkpoints: int = 25,
                      settings: JetSettings = DEFAULT_JET_SETTINGS, numerics: Numerics = DEFAULT_NUMERICS):
    """Candidate seed point with the smallest amplification over [lo, hi]."""
    targets = list(np.linspace(lo, hi, checkpoints))
    best = None
    for x0 in np.linspace(lo, hi, candidates):
        y0 = seed(n, float(x0), settings, numerics)
        amp = amplification(n, float(x0), y0, targets)
        if best is None or amp < best[1]:
            best = (float(x0), amp, y0)
    return best


def integrate_p4_span(n: int, lo: float, hi: float, seed_at: float | None = None, samples: int = 25,
                      rtol: float = 1e-13, settings: JetSettings = DEFAULT_JET_SETTINGS,
                      numerics: Numerics = DEFAULT_NUMERICS) -> P4Trajectory:
    """One solution of the ODE covering [lo, hi], seeded once and integrated outward.

    ``seed_at`` None picks the least amplifying of the output points.
    """
    if seed_at is None:
        x0, amp, y0 = choose_seed_point(n, lo, hi, samples, samples, settings=settings, numerics=numerics)
    else:
        x0 = float(seed_at)
        y0 = seed(n, x0, settings, numerics)
        amp = amplification(n, x0, y0, list(np.linspace(lo, hi, samples)))
    grid = np.linspace(lo, hi, samples)
    down = integrate_p4(n, x0, lo, y0, samples=0, rtol=rtol, t_eval=[x for x in grid[::-1] if x <= x0])
    up = integrate_p4(n, x0, hi, y0, samples=0, rtol=rtol, t_eval=[x for x in grid if x >= x0])
    xs, ys = [], []
    for part in (down, up):
        for x, y in zip(part.xi, part.y):
            if not any(abs(x - e) < 1e-14 for e in xs):
                xs.append(float(x))
                ys.append(y)
    order = np.argsort(xs)
    traj = P4Trajectory(n, np.array(xs)[order], np.array(ys)[order], 0,
                        {"seed": x0, "amplification": amp,
                         "nfev": down.stats.get("nfev", 0) + up.stats.get("nfev", 0)})
    traj.inflections = sorted(down.inflections + up.inflections)
    traj.failure = "; ".join(f for f in (down.failure, up.failure) if f)
    return traj


def fredholm_r(n: int, xi: float, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """r = dT/dxi = s_1 R(xi, xi), straight from the resolvent."""
    return float(point_data(n, single_endpoint(xi), numerics).grad_T[0])


def compare_to_fredholm(traj: P4Trajectory, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """Max |r_traj - r_fredholm| over the trajectory samples."""
    if len(traj.xi) == 0:
        raise ValueError("empty trajectory")
    return max(abs(r - fredholm_r(traj.n, x, numerics)) for x, r in zip(traj.xi, traj.r))


def p4_along_fredholm(n: int, xis, settings: JetSettings = DEFAULT_JET_SETTINGS,
                      numerics: Numerics = DEFAULT_NUMERICS) -> np.ndarray:
    """Normalized P4 residual with (r, r', r'') read off the T-jet at each xi.

    No projection here, otherwise the residual would vanish by construction.
    """
    return np.array([p4_residual(*seed(n, x, settings, numerics, project=False), x, n) for x in xis])
