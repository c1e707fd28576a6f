"""Hamiltonian flow of normal extremals and cotangent-lift utilities.

The normal extremals of a degenerate cometric are projections of solutions
of the Hamiltonian system

    xdot^k = g^{kj}(x) xi_j,      xidot_k = -1/2 (d_k g^{pq}) xi_p xi_q

for H = (1/2) <g xi, xi>.  H is a first integral, so the causal character
of the lift is constant along the flow; the natural parameter and energy
of an extremal reduce to |2 H|^{1/2} and |2 H| times elapsed time.

Integration runs over the active numeric backend (see
:mod:`ssgeo.backends`): classical fixed-step RK4 by default, or an
embedded Cash-Karp 4(5) pair when an adaptive tolerance is requested.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator, Sequence

import numpy as np
from scipy.integrate import simpson

from ssgeo.backends import get_backend
from ssgeo.christoffel import christoffel_at, gamma_contract
from ssgeo.field import (
    CausalClass,
    CausalKind,
    CometricField,
    annihilator_basis,
    causal_character,
    cometric_gradient,
    cometric_matrix,
    metric_from_cometric,
)
from ssgeo.models import HEISENBERG, frame_at, get_model

__all__ = [
    "PhaseState",
    "Trajectory",
    "BlowUpError",
    "DriftError",
    "DriftWarning",
    "CanonicalLiftError",
    "hamiltonian",
    "hamiltonian_rhs",
    "integrate_extremal",
    "natural_parameter",
    "energy",
    "canonical_cotangent_lift",
    "time_orientation",
    "hyperbolic_angle",
    "export_trajectory_csv",
]

#: Absolute coordinate bound beyond which integration counts as blown up.
BLOWUP_BOUND = 1e12

#: Hamiltonian drift thresholds: warn above the first, fail above the second.
DRIFT_WARN = 1e-9
DRIFT_FAIL = 1e-6


class BlowUpError(RuntimeError):
    """The state left the admissible region; integration was aborted."""

    def __init__(self, message: str, last_valid_time: float):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class DriftError(RuntimeError):
    """A conserved quantity drifted beyond the failure threshold."""


class DriftWarning(UserWarning):
    """A conserved quantity drifted measurably but below failure."""


class CanonicalLiftError(RuntimeError):
    """The per-sample lift system is not uniquely solvable."""


@dataclass(frozen=True, eq=False)
class PhaseState:
    """A cotangent-bundle point: base coordinates and covector components."""

    x: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled lift of a curve: times, base points, covectors, Hamiltonians.

    Built by :func:`integrate_extremal` (which enforces conservation) or
    :meth:`from_samples` for externally produced curves-with-lifts, where
    H may legitimately vary (reparameterizations, non-extremal curves).
    """

    ts: np.ndarray
    xs: np.ndarray
    xis: np.ndarray
    hs: np.ndarray
    h0: float
    causal: CausalClass

    def __len__(self) -> int:
        return self.ts.size

    def states(self) -> Iterator[tuple[float, PhaseState]]:
        for i in range(self.ts.size):
            yield float(self.ts[i]), PhaseState(self.xs[i], self.xis[i])

    @classmethod
    def from_samples(
        cls,
        field: CometricField,
        ts: Sequence[float],
        xs: np.ndarray,
        xis: np.ndarray,
    ) -> Trajectory:
        ts = np.asarray(ts, dtype=np.float64)
        xs = np.asarray(xs, dtype=np.float64)
        xis = np.asarray(xis, dtype=np.float64)
        if not (ts.ndim == 1 and xs.shape == (ts.size, field.dim) == xis.shape):
            raise ValueError("inconsistent sample shapes")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("sample times must be strictly increasing")
        backend = get_backend()
        g = backend.cometric(field.pack, xs)
        hs = 0.5 * np.einsum("ijk,ij,ik->i", g, xis, xis)
        causal = causal_character(field, xs[0], xis[0])
        return cls(ts=ts, xs=xs, xis=xis, hs=hs, h0=float(hs[0]), causal=causal)


def _state_arrays(
    field: CometricField, x: Sequence[float], xi: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if x.shape != (field.dim,) or xi.shape != (field.dim,):
        raise ValueError(
            f"state components must have shape ({field.dim},), "
            f"got {x.shape} and {xi.shape}"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
        raise ValueError("state components must be finite")
    return x, xi


def hamiltonian(field: CometricField, state: PhaseState) -> float:
    """H = (1/2) <g(x) xi, xi>."""
    x, xi = _state_arrays(field, state.x, state.xi)
    return 0.5 * float(xi @ cometric_matrix(field, x) @ xi)


def hamiltonian_rhs(field: CometricField, state: PhaseState) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side (xdot, xidot) of the Hamiltonian system."""
    x, xi = _state_arrays(field, state.x, state.xi)
    backend = get_backend()
    xdot, xidot = backend.hamiltonian_rhs(field.pack, x[None, :], xi[None, :])
    return xdot[0], xidot[0]


# ---------------------------------------------------------------------------
# Integration.
# ---------------------------------------------------------------------------

# Cash-Karp embedded 4(5) tableau.
_CK_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_CK_B5 = (37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771)
_CK_B4 = (2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4)


def _integrate_adaptive(
    pack, x0: np.ndarray, xi0: np.ndarray, t_end: float, rel_tol: float
):
    backend = get_backend()

    def rhs(x, xi):
        xdot, xidot = backend.hamiltonian_rhs(pack, x[None, :], xi[None, :])
        return xdot[0], xidot[0]

    ts = [0.0]
    xs = [x0]
    xis = [xi0]
    t, x, xi = 0.0, x0, xi0
    h = min(1e-2, t_end)
    safety, shrink, grow = 0.9, 0.2, 5.0
    while t < t_end - 1e-15:
        h = min(h, t_end - t)
        kx, kxi = [], []
        for stage in range(6):
            dx = sum(a * k for a, k in zip(_CK_A[stage], kx)) if stage else 0.0
            dxi = sum(a * k for a, k in zip(_CK_A[stage], kxi)) if stage else 0.0
            fx, fxi = rhs(x + h * dx, xi + h * dxi)
            kx.append(fx)
            kxi.append(fxi)
        x5 = x + h * sum(b * k for b, k in zip(_CK_B5, kx))
        xi5 = xi + h * sum(b * k for b, k in zip(_CK_B5, kxi))
        x4 = x + h * sum(b * k for b, k in zip(_CK_B4, kx))
        xi4 = xi + h * sum(b * k for b, k in zip(_CK_B4, kxi))
        scale = rel_tol * max(
            1.0, float(np.max(np.abs(x))), float(np.max(np.abs(xi)))
        )
        err = max(float(np.max(np.abs(x5 - x4))), float(np.max(np.abs(xi5 - xi4))))
        if not math.isfinite(err):
            raise BlowUpError(
                f"state became nonfinite near t = {t:.6g}", last_valid_time=t
            )
        if err <= scale:
            t += h
            x, xi = x5, xi5
            ts.append(t)
            xs.append(x)
            xis.append(xi)
            factor = grow if err == 0.0 else min(grow, safety * (scale / err) ** 0.2)
            h *= factor
        else:
            h *= max(shrink, safety * (scale / err) ** 0.25)
            if h < 1e-14:
                raise BlowUpError(
                    f"step size underflow near t = {t:.6g}", last_valid_time=t
                )
    return np.array(ts), np.array(xs), np.array(xis)


def integrate_extremal(
    field: CometricField,
    x0: Sequence[float],
    xi0: Sequence[float],
    t_end: float,
    step: float = 1e-3,
    adaptive_tol: float | None = None,
) -> Trajectory:
    """Integrate the Hamiltonian system from (x0, xi0) over [0, t_end].

    With ``adaptive_tol=None`` a classical RK4 run with fixed step
    (``step``, shrunk slightly so the grid lands exactly on ``t_end``);
    otherwise an embedded Cash-Karp 4(5) pair with the given relative
    tolerance.  Raises :class:`BlowUpError` when a coordinate leaves
    [-1e12, 1e12] or turns nonfinite, and :class:`DriftError` when the
    Hamiltonian drifts by more than 1e-6 (a warning above 1e-9).
    """
    x0, xi0 = _state_arrays(field, x0, xi0)
    if not (t_end > 0 and math.isfinite(t_end)):
        raise ValueError(f"t_end must be positive and finite, got {t_end}")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    backend = get_backend()
    if adaptive_tol is None:
        nsteps = max(1, math.ceil(t_end / step - 1e-9))
        history_x, history_xi = backend.rk4_flow(
            field.pack, x0[None, :], xi0[None, :], t_end, nsteps
        )
        ts = np.linspace(0.0, t_end, nsteps + 1)
        xs, xis = history_x[0], history_xi[0]
    else:
        if adaptive_tol <= 0:
            raise ValueError(f"adaptive_tol must be positive, got {adaptive_tol}")
        ts, xs, xis = _integrate_adaptive(field.pack, x0, xi0, t_end, adaptive_tol)

    with np.errstate(invalid="ignore"):
        bad = ~(
            np.all(np.isfinite(xs), axis=1)
            & np.all(np.isfinite(xis), axis=1)
            & (np.max(np.abs(xs), axis=1) < BLOWUP_BOUND)
        )
    if np.any(bad):
        first = int(np.argmax(bad))
        last_valid = float(ts[first - 1]) if first > 0 else 0.0
        raise BlowUpError(
            f"trajectory left the admissible region at t = {ts[first]:.6g}; "
            f"last valid time {last_valid:.6g}",
            last_valid_time=last_valid,
        )

    trajectory = Trajectory.from_samples(field, ts, xs, xis)
    drift = float(np.max(np.abs(trajectory.hs - trajectory.h0)))
    if drift > DRIFT_FAIL:
        raise DriftError(
            f"Hamiltonian drift {drift:.3e} exceeds {DRIFT_FAIL:.0e}; "
            "reduce the step size"
        )
    if drift > DRIFT_WARN:
        warnings.warn(
            f"Hamiltonian drift {drift:.3e} above {DRIFT_WARN:.0e}",
            DriftWarning,
            stacklevel=2,
        )
    scalars = 2.0 * trajectory.hs
    kind = trajectory.causal.kind
    tol = 1e-9
    flipped = (
        (kind is CausalKind.TIMELIKE and float(scalars.max()) > tol)
        or (kind is CausalKind.SPACELIKE and float(scalars.min()) < -tol)
        or (
            kind in (CausalKind.NULL, CausalKind.ANNIHILATOR)
            and float(np.max(np.abs(scalars))) > tol
        )
    )
    if flipped:
        raise DriftError(
            f"causal scalar changed sign along a {kind.value} extremal"
        )
    return trajectory


# ---------------------------------------------------------------------------
# Curve functionals.
# ---------------------------------------------------------------------------


def natural_parameter(field: CometricField, trajectory: Trajectory) -> float:
    """L = integral of |Q(cdot, cdot)|^{1/2} = integral of |2 H|^{1/2}."""
    return float(
        simpson(np.sqrt(np.abs(2.0 * trajectory.hs)), x=trajectory.ts)
    )


def energy(field: CometricField, trajectory: Trajectory) -> float:
    """E = integral of |Q(cdot, cdot)| = integral of |2 H|."""
    return float(simpson(np.abs(2.0 * trajectory.hs), x=trajectory.ts))


# ---------------------------------------------------------------------------
# Canonical cotangent lift.
# ---------------------------------------------------------------------------


def _time_derivative(values: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Second-order finite differences of a sampled path (central inside,
    one-sided at the ends); assumes a uniform or smoothly varying grid."""
    result = np.empty_like(values)
    result[1:-1] = (values[2:] - values[:-2]) / (ts[2:] - ts[:-2])[:, None]
    result[0] = (-3 * values[0] + 4 * values[1] - values[2]) / (ts[2] - ts[0])
    result[-1] = (3 * values[-1] - 4 * values[-2] + values[-3]) / (ts[-1] - ts[-3])
    return result


def canonical_cotangent_lift(
    field: CometricField,
    ts: Sequence[float],
    xs: np.ndarray,
    velocities: np.ndarray,
    eta0: Sequence[float],
    tol: float = 1e-8,
) -> np.ndarray:
    """The unique lift xi(t) of a horizontal curve with canonical defect.

    Among the lifts with ``g xi = xdot``, the canonical one makes the
    defect covector ``omega = xidot + (1/2) dg(xi, xi)`` pair to zero with
    every ``Gamma(xi, v)``, v an annihilator.  The annihilator components
    solve a per-sample linear system with matrix 2 Q(Gamma(eta, v^(k)),
    Gamma(eta, v^(l))) -- the defect condition contains no derivative of
    the unknown coefficients, so no ODE stepping is involved.  ``eta0``
    must be a lift of the initial velocity (consistency check only: the
    result does not depend on it).
    """
    ts = np.asarray(ts, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    velocities = np.asarray(velocities, dtype=np.float64)
    eta0 = np.asarray(eta0, dtype=np.float64)
    count = ts.size
    if count < 3:
        raise ValueError("need at least 3 samples to differentiate the lift")
    if xs.shape != (count, field.dim) or velocities.shape != (count, field.dim):
        raise ValueError("inconsistent sample shapes")

    g0 = cometric_matrix(field, xs[0])
    if np.linalg.norm(g0 @ eta0 - velocities[0]) > tol * max(
        1.0, float(np.linalg.norm(velocities[0]))
    ):
        raise ValueError("eta0 is not a lift of the initial velocity")

    # Reference lift: minimal-norm solution of g eta = xdot per sample.
    # The pseudo-inverse is smooth along a constant-rank field, so finite
    # differences of eta are legitimate.
    etas = np.empty_like(xs)
    kernels = []
    for i in range(count):
        g = cometric_matrix(field, xs[i])
        eta, *_ = np.linalg.lstsq(g, velocities[i], rcond=None)
        if np.linalg.norm(g @ eta - velocities[i]) > tol * max(
            1.0, float(np.linalg.norm(velocities[i]))
        ):
            raise ValueError(f"curve is not horizontal at sample {i}")
        etas[i] = eta
        kernels.append(annihilator_basis(field, xs[i]))
    eta_dots = _time_derivative(etas, ts)

    lifts = np.empty_like(xs)
    for i in range(count):
        tensor = christoffel_at(field, xs[i])
        kernel = kernels[i]
        images = np.array(
            [gamma_contract(tensor, etas[i], v) for v in kernel]
        )  # (n-m, n): Gamma(eta, v^(k))
        gram = np.array(
            [
                [
                    2.0 * metric_from_cometric(field, xs[i], images[k], images[l])
                    for k in range(kernel.shape[0])
                ]
                for l in range(kernel.shape[0])
            ]
        )
        singular = np.linalg.svd(gram, compute_uv=False)
        if singular.min() <= 1e-12 * max(1.0, singular.max()):
            raise CanonicalLiftError(
                f"lift system is singular at sample {i} (t = {ts[i]:.6g}); "
                "the field must be 2-step bracket generating along the "
                "curve with nondegenerate Gamma images"
            )
        dg = np.einsum(
            "jpq,p,q->j", cometric_gradient(field, xs[i]), etas[i], etas[i]
        )
        defect = eta_dots[i] + 0.5 * dg
        rhs = -np.array([float(defect @ images[l]) for l in range(kernel.shape[0])])
        coefficients = np.linalg.solve(gram, rhs)
        lifts[i] = etas[i] + kernel.T @ coefficients
    return lifts


# ---------------------------------------------------------------------------
# Index-1 helpers.
# ---------------------------------------------------------------------------


def time_orientation(
    model_id: str, x: Sequence[float], w: Sequence[float], tol: float = 1e-9
) -> str:
    """Future/past label of a nonspacelike horizontal vector.

    Only defined for the index-1 Heisenberg model, where the timelike
    frame X provides the orientation; ``w`` is future-directed when
    Q(X, w) < 0 (aligned with X, which has Q(X, X) = -1).
    """
    if model_id != HEISENBERG:
        raise ValueError(
            "time orientation requires an index-1 model with a designated "
            f"timelike frame; only {HEISENBERG!r} qualifies here"
        )
    field = get_model(model_id)
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if metric_from_cometric(field, x, w, w) > tol:
        raise ValueError("vector is spacelike; no time orientation")
    orientation = frame_at(model_id, x)[0]
    pairing = metric_from_cometric(field, x, orientation, w)
    if abs(pairing) <= tol:
        raise ValueError("vector is orthogonal to the orientation field")
    return "future" if pairing < 0 else "past"


def hyperbolic_angle(
    field: CometricField,
    x: Sequence[float],
    v: Sequence[float],
    w: Sequence[float],
    tol: float = 1e-9,
) -> float:
    """Fiberwise hyperbolic angle between two timelike horizontal vectors:
    arccosh(|Q(v,w)| / (|Q(v,v)| |Q(w,w)|)^{1/2})."""
    qvv = metric_from_cometric(field, x, v, v)
    qww = metric_from_cometric(field, x, w, w)
    if qvv >= -tol or qww >= -tol:
        raise ValueError("hyperbolic angle requires two timelike vectors")
    qvw = metric_from_cometric(field, x, v, w)
    argument = abs(qvw) / math.sqrt(qvv * qww)
    return math.acosh(max(1.0, argument))


# ---------------------------------------------------------------------------
# Export.
# ---------------------------------------------------------------------------


def export_trajectory_csv(trajectory: Trajectory, destination: str | Path | IO[str]) -> None:
    """Write samples as CSV: t, x1..xn, xi1..xin, H; 17 significant digits."""
    n = trajectory.xs.shape[1]
    header = (
        "t,"
        + ",".join(f"x{i+1}" for i in range(n))
        + ","
        + ",".join(f"xi{i+1}" for i in range(n))
        + ",H"
    )

    def rows() -> Iterator[str]:
        yield header
        for i in range(len(trajectory)):
            values = (
                [trajectory.ts[i]]
                + list(trajectory.xs[i])
                + list(trajectory.xis[i])
                + [trajectory.hs[i]]
            )
            yield ",".join(f"{value:.17g}" for value in values)

    if hasattr(destination, "write"):
        for line in rows():
            destination.write(line + "\n")
    else:
        with open(destination, "w", encoding="utf-8") as handle:
            for line in rows():
                handle.write(line + "\n")
