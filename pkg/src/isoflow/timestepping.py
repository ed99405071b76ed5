"""Integrating-factor Runge-Kutta stepping shared by both solvers.

The stiff linear part is a horizontal heat operator applied exactly in
spectral space; the remaining tendency is advanced by the classical
four-stage scheme in the variables transformed by the heat propagator
(Lawson's method). The scheme is fourth order and reduces to plain RK4 when
every diffusivity is zero.
"""

from .errors import CFLError, SolverError, StratificationError

__all__ = ["if_rk4_step", "Trajectory", "run_loop"]

_GUARDS = ((StratificationError, "stratification"), (CFLError, "cfl"), (SolverError, "solver"))


def _axpy(a, x, y):
    return tuple(yi + a * xi for xi, yi in zip(x, y))


def if_rk4_step(y, dt, tendency, propagate):
    """Advance a tuple of arrays by one integrating-factor RK4 step.

    Parameters
    ----------
    y : tuple of ndarray
        Current prognostic arrays.
    dt : float
        Time step.
    tendency : callable
        ``tendency(y) -> tuple`` of explicit right-hand sides.
    propagate : callable
        ``propagate(y, tau) -> tuple`` applying the exact linear propagator
        over a time ``tau``.

    Returns
    -------
    tuple of ndarray
    """
    half = 0.5 * dt
    k1 = tendency(y)
    y_half = propagate(y, half)
    k2 = tendency(propagate(_axpy(half, k1, y), half))
    k3 = tendency(_axpy(half, k2, y_half))
    k4 = tendency(_axpy(dt, propagate(k3, half), propagate(y, dt)))
    e1 = propagate(k1, dt)
    e23 = propagate(tuple(a + b for a, b in zip(k2, k3)), half)
    incr = tuple(a + 2.0 * b + c for a, b, c in zip(e1, e23, k4))
    return _axpy(dt / 6.0, incr, propagate(y, dt))


class Trajectory:
    """States and diagnostics records collected at output times.

    Attributes
    ----------
    states : list
        States at every output time, starting with the initial state.
    records : list of dict
        Observer output for each stored state.
    termination : dict or None
        Labeled reason when the run halted early.
    """

    def __init__(self):
        self.states = []
        self.records = []
        self.termination = None
        self.error = None

    @property
    def final(self):
        return self.states[-1]

    @property
    def completed(self):
        return self.termination is None


def run_loop(state, steps, stride, step, observe=None, sink=None):
    """Drive ``step`` for ``steps`` iterations, recording every ``stride`` steps.

    Guard failures raised by ``step`` end the loop; the failure is stored as
    ``Trajectory.termination`` with ``reason`` in ``{"stratification", "cfl",
    "solver"}`` and also passed to ``sink``.
    """
    traj = Trajectory()

    def emit(s, n):
        traj.states.append(s)
        if observe is not None:
            rec = observe(s, n)
            traj.records.append(rec)
            if sink is not None:
                sink(rec)

    emit(state, 0)
    for n in range(1, steps + 1):
        try:
            state = step(state)
        except tuple(cls for cls, _ in _GUARDS) as exc:
            label = next(name for cls, name in _GUARDS if isinstance(exc, cls))
            traj.termination = {
                "kind": "termination",
                "reason": label,
                "step": n,
                "t": float(state.t),
                "message": str(exc),
            }
            traj.error = exc
            if sink is not None:
                sink(dict(traj.termination))
            break
        if n % stride == 0 or n == steps:
            emit(state, n)
    return traj
