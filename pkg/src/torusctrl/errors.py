"""Exception hierarchy shared by all torusctrl modules."""


class TorusCtrlError(Exception):
    """Base class for all package errors."""


class AliasingBudgetExceeded(TorusCtrlError):
    """Discarded spectral tail carries more mass than the configured budget."""

    def __init__(self, tail_fraction: float, budget: float):
        self.tail_fraction = tail_fraction
        self.budget = budget
        super().__init__(
            f"aliasing tail fraction {tail_fraction:.3e} exceeds budget {budget:.3e}"
        )


class BlowupDetected(TorusCtrlError):
    """Solution norm crossed the blow-up guard during time integration."""

    def __init__(self, t: float, norm: float, guard: float):
        self.t = t
        self.norm = norm
        self.guard = guard
        super().__init__(f"norm {norm:.3e} exceeded guard {guard:.3e} at t={t:.6g}")


class BudgetExceeded(TorusCtrlError):
    """Symbolic construction left the configured frequency/term budget."""


class ToleranceNotMet(TorusCtrlError):
    """A steering search exhausted its budget before reaching the tolerance.

    Carries the best plan found so far in ``best_plan``.
    """

    def __init__(self, message: str, best_plan=None, achieved: float | None = None):
        self.best_plan = best_plan
        self.achieved = achieved
        super().__init__(message)


class SignMismatch(TorusCtrlError):
    """Initial and target states violate the strict same-sign hypothesis."""


class CertificateFailed(TorusCtrlError):
    """A spectrum certificate (sector/counting/gap) failed numerically."""


class IllConditioned(TorusCtrlError):
    """Biorthogonal solve defect stayed above tolerance at maximum precision."""


class HypothesisViolated(TorusCtrlError):
    """A control profile failed its pairing hypothesis flags."""


class SingularGramian(TorusCtrlError):
    """The truncated controllability Gramian is numerically singular."""


class NoContraction(TorusCtrlError):
    """Fixed-point sweeps diverged: observed ratio >= 1 repeatedly."""

    def __init__(self, message: str, history=None):
        self.history = list(history or [])
        super().__init__(message)


class RadiusNotReached(TorusCtrlError):
    """Approximate phase could not enter the local-exactness basin."""


class ConfigError(TorusCtrlError):
    """Scenario configuration is malformed or out of range."""
