"""Exception hierarchy shared across the package."""


class BdkError(Exception):
    """Base class for all package errors."""


class InvalidKernelError(BdkError):
    """Rate kernel violates strict positivity or lacks a required entry."""


class SupercriticalMassError(BdkError):
    """Requested mass exceeds the critical mass; no finite activity matches it.

    Callers hitting this should evaluate at the critical activity instead.
    """

    def __init__(self, rho, rho_s, zs):
        self.rho = rho
        self.rho_s = rho_s
        self.zs = zs
        super().__init__(
            f"mass {rho} exceeds the critical mass {rho_s}; "
            f"no activity z < {zs} reaches it, use the critical activity z_s = {zs}"
        )


class SeriesCertificationError(BdkError):
    """Series summation reached the term cap without a convergence or divergence certificate."""


class ProfileOverflowError(BdkError):
    """Equilibrium coefficient overflows double precision."""

    def __init__(self, i, log_value):
        self.i = i
        self.log_value = log_value
        super().__init__(
            f"equilibrium coefficient at size {i} overflows (log value {log_value:.3g})"
        )


class DivergentReferenceError(BdkError):
    """Reference equilibrium series diverges at the requested activity."""


class InfeasibleJumpError(BdkError):
    """Jump preconditions violated; signals a propensity bug upstream."""


class AbsorbingStateError(BdkError):
    """No reaction is feasible from this configuration (total rate zero)."""


class StateSpaceTooLargeError(BdkError):
    """Exact enumeration requested above the configured cap."""

    def __init__(self, n, cap, estimate):
        self.n = n
        self.cap = cap
        self.estimate = estimate
        super().__init__(
            f"state space for n={n} has ~{estimate} states, above the cap n<={cap}"
        )


class SimulationCorruptionError(BdkError):
    """Internal invariant violated during simulation (should be unreachable)."""


class StiffnessError(BdkError):
    """Integrator step size underflowed; try a smaller truncation or rates."""


class IntegrationFailureError(BdkError):
    """Integrator produced an invalid state (e.g. negativity beyond the clip tolerance)."""


class InvalidThresholdsError(BdkError):
    """Superlinear-weight threshold sequence violates the monotone-gap condition."""


class InvalidStateError(BdkError):
    """Configuration does not belong to the table's state space."""


class InternalInconsistencyError(BdkError):
    """Cross-checked identity failed beyond tolerance; indicates a bug, not bad input."""


class TruncationInadequateError(BdkError):
    """ODE truncation leaks mass; rerun with a larger truncation size."""

    def __init__(self, truncation, leaked):
        self.truncation = truncation
        self.leaked = leaked
        super().__init__(
            f"truncation I={truncation} leaks tail mass {leaked:.3g}; rerun with larger I"
        )


class ConfigError(BdkError):
    """Malformed experiment configuration."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        prefix = ""
        if field is not None:
            prefix += f"field '{field}': "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)
