"""
Exceptions raised by the scheme, the monitors, the residual verifier and the loaders.
"""


class SchemeError(Exception):
    """
    Base class for every error raised by this package.
    """


class ConfigurationError(SchemeError):
    """
    Invalid parameters, malformed files or inconsistent run settings.
    """

    def __init__(self, message, field=None, term_index=None):
        super().__init__(message)
        self.field = field
        self.term_index = term_index


class CflViolation(SchemeError):
    def __init__(self, cell, step, value):
        super().__init__(
            f"CFL condition violated at cell {cell}, step {step}: r*|phi| = {value:.6g} > 1"
        )
        self.cell = cell
        self.step = step
        self.value = value


class Blowup(SchemeError):
    """
    Non-finite values or magnitudes above the blow-up cap.

    last_state holds the last valid StateField so callers can save it.
    """

    def __init__(self, t, max_u, max_v, step=None, cell=None, reason="", last_state=None):
        where = f" at cell {cell}" if cell is not None else ""
        super().__init__(
            f"Blow-up at t={t:.6g} (step {step}){where}: max|u|={max_u:.6g}, "
            f"max|v|={max_v:.6g}" + (f" ({reason})" if reason else "")
        )
        self.t = t
        self.max_u = max_u
        self.max_v = max_v
        self.step = step
        self.cell = cell
        self.reason = reason
        self.last_state = last_state


class CflExhausted(SchemeError):
    def __init__(self, restarts, last_r):
        super().__init__(f"CFL still violated after {restarts} restarts (last r = {last_r:.6g})")
        self.restarts = restarts
        self.last_r = last_r


class InsufficientData(SchemeError):
    pass


class OrderIndeterminate(SchemeError):
    """
    Every residual value fell below the noise floor; no slope can be fitted.
    """
