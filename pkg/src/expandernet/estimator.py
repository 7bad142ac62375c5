"""Estimator-style front end: ``ExpanderNetwork(...).fit(cone)``."""

from __future__ import annotations

from dataclasses import replace

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_cone, check_positive, check_schedule, check_template
from .complex import extract_junctions
from .solver import SolveConfig, continue_in_radius, solve_template
from .verify import ToleranceProfile, full_report


class ExpanderNetwork(BaseEstimator):
    """Discrete self-expanding network spanning a cone.

    ``fit`` instantiates ``template`` for the cone at ``radius`` (or at every
    radius of ``radius_schedule``, warm-started outward), minimises the
    weighted area and, with ``verify=True``, builds a verification report.

    Fitted attributes: ``complex_``, ``state_``, ``states_``, ``energy_``
    (unshifted weighted area), ``n_iter_``, ``status_``, ``junctions_`` and
    ``report_`` (``None`` without verification).
    """

    def __init__(self, template="y-sheet", radius=4.0, edge_length=0.1, radius_schedule=None,
                 max_iters=2000, grad_tol=1e-8, quasi_newton=True, memory=10, motion="normal",
                 coarse_levels=2, max_rebuilds=3, seed=0, perturb=0.0, allow_nonregular=None,
                 verify=True, k_ring=2, core_fraction=1.0):
        self.template = template
        self.radius = radius
        self.edge_length = edge_length
        self.radius_schedule = radius_schedule
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.quasi_newton = quasi_newton
        self.memory = memory
        self.motion = motion
        self.coarse_levels = coarse_levels
        self.max_rebuilds = max_rebuilds
        self.seed = seed
        self.perturb = perturb
        self.allow_nonregular = allow_nonregular
        self.verify = verify
        self.k_ring = k_ring
        self.core_fraction = core_fraction

    def _config(self) -> SolveConfig:
        check_positive(self.radius, "radius")
        check_positive(self.edge_length, "edge_length")
        check_positive(self.max_iters, "max_iters", integer=True, allow_zero=True)
        check_positive(self.grad_tol, "grad_tol")
        check_positive(self.memory, "memory", integer=True)
        check_positive(self.coarse_levels, "coarse_levels", integer=True, allow_zero=True)
        check_positive(self.max_rebuilds, "max_rebuilds", integer=True, allow_zero=True)
        check_positive(self.perturb, "perturb", allow_zero=True)
        check_positive(self.k_ring, "k_ring", integer=True, allow_zero=True)
        if not 0 < self.core_fraction <= 1:
            raise ValueError("core_fraction must lie in (0, 1]")
        sched = () if self.radius_schedule is None else check_schedule(self.radius_schedule)
        return SolveConfig(max_iters=int(self.max_iters), grad_tol=float(self.grad_tol),
                           quasi_newton=bool(self.quasi_newton), memory=int(self.memory),
                           radius_schedule=sched, edge_length=float(self.edge_length),
                           seed=int(self.seed), perturb=float(self.perturb),
                           k_ring=int(self.k_ring), coarse_levels=int(self.coarse_levels),
                           max_rebuilds=int(self.max_rebuilds), motion=self.motion)

    def fit(self, X, y=None):
        """Solve for the cone ``X`` (ConeSpec, stock name or cone file path)."""
        template = check_template(self.template)
        allow = template.nonregular if self.allow_nonregular is None else self.allow_nonregular
        spec = check_cone(X, allow_nonregular=allow)
        config = self._config()
        if config.radius_schedule:
            states = continue_in_radius(spec, template, config, allow)
        else:
            states = [solve_template(spec, template, float(self.radius), config, allow)[0]]
        state = states[-1]
        self.spec_ = spec
        self.config_ = config
        self.states_ = states
        self.state_ = state
        self.complex_ = state.complex
        self.energy_ = state.true_energy()
        self.n_iter_ = state.iterations
        self.status_ = state.status
        self.junctions_ = extract_junctions(state.complex)
        self.report_ = None
        if self.verify:
            profile = replace(ToleranceProfile(), core_fraction=float(self.core_fraction))
            self.report_ = full_report(
                state.complex, spec, profile, h=config.edge_length, k_ring=config.k_ring,
                states=[s.complex for s in states] if len(states) > 1 else None)
        return self

    def score(self, X=None, y=None) -> float:
        """Negative weighted area of the fitted network (higher is better)."""
        check_is_fitted(self, "complex_")
        return -self.energy_

    def __sklearn_is_fitted__(self):
        return hasattr(self, "complex_")
