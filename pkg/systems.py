"""
Split systems u_t + [u*phi(u,v)]_x = [A(u,v)]_x, v_t + [v*phi(u,v)]_x = [B(u,v)]_x
and the built-in instances.

Evaluators take numpy arrays (or scalars) and work elementwise.
"""
import math
from dataclasses import dataclass
from numbers import Integral, Real
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from errors import ConfigurationError

FLUX_KEYS = ('phi', 'a', 'b')


@dataclass(frozen=True)
class SystemDefinition:
    name: str
    phi: Callable
    a_flux: Callable
    b_flux: Callable
    # Unsplit fluxes of the two equations, when known
    flux_u: Optional[Callable] = None
    flux_v: Optional[Callable] = None
    table: Optional[Dict[str, List[Tuple[float, int, int]]]] = None

    def recombined_fluxes(self, u, v):
        """
        Return (u*phi - A, v*phi - B), the fluxes of the unsplit system.
        """
        phi = self.phi(u, v)
        return u * phi - self.a_flux(u, v), v * phi - self.b_flux(u, v)


@dataclass(frozen=True)
class RiemannData:
    u_l: float
    v_l: float
    u_r: float
    v_r: float
    jump_x: float = 0.0

    @classmethod
    def parse(cls, text, jump_x=0.0):
        """
        Parse "u_l,v_l,u_r,v_r" into RiemannData.
        """
        parts = [p.strip() for p in str(text).split(',') if p.strip()]
        if len(parts) != 4:
            raise ConfigurationError(f"Riemann data needs 4 comma-separated values, got {text!r}", field='ic')
        try:
            values = [float(p) for p in parts]
        except ValueError as e:
            raise ConfigurationError(f"Invalid Riemann data {text!r}: {e}", field='ic')
        return cls(*values, jump_x=jump_x)

    def to_dict(self):
        return {'u_l': self.u_l, 'v_l': self.v_l, 'u_r': self.u_r, 'v_r': self.v_r, 'jump_x': self.jump_x}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(float(data['u_l']), float(data['v_l']), float(data['u_r']), float(data['v_r']),
                       float(data.get('jump_x', 0.0)))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid Riemann data {data!r}: {e}", field='riemann')


# Keyfitz-Kranzer: u_t + (u^2 - v)_x = 0, v_t + (u^3/3 - u)_x = 0

def _identity_u(u, v):
    return u


def _kk_a(u, v):
    return v


def _kk_b(u, v):
    return v * u - u ** 3 / 3.0 + u


def _kk_flux_u(u, v):
    return u ** 2 - v


def _kk_flux_v(u, v):
    return u ** 3 / 3.0 - u


# Korchinski: u_t + (u^2)_x = 0, v_t + (uv)_x = 0

def _zero(u, v):
    return np.zeros_like(np.asarray(u, dtype=np.float64))


def _korchinski_flux_u(u, v):
    return u ** 2


def _korchinski_flux_v(u, v):
    return u * v


KK_TABLE = {
    'phi': [(1.0, 1, 0)],
    'a': [(1.0, 0, 1)],
    'b': [(1.0, 1, 1), (-1.0 / 3.0, 3, 0), (1.0, 1, 0)]
}

KORCHINSKI_TABLE = {
    'phi': [(1.0, 1, 0)],
    'a': [],
    'b': []
}


def system_keyfitz_kranzer():
    """
    phi = u, A = v, B = v*u - u^3/3 + u.
    """
    return SystemDefinition(
        name='kk',
        phi=_identity_u,
        a_flux=_kk_a,
        b_flux=_kk_b,
        flux_u=_kk_flux_u,
        flux_v=_kk_flux_v,
        table=KK_TABLE
    )


def system_korchinski():
    """
    phi = u, A = B = 0. Produces delta shocks in v.
    """
    return SystemDefinition(
        name='korchinski',
        phi=_identity_u,
        a_flux=_zero,
        b_flux=_zero,
        flux_u=_korchinski_flux_u,
        flux_v=_korchinski_flux_v,
        table=KORCHINSKI_TABLE
    )


class PolynomialFlux:
    """
    Bivariate polynomial sum of c * u^p * v^q terms, evaluated by nested Horner
    accumulation: outer in u, inner in v.
    """

    def __init__(self, terms):
        self.terms = [(float(c), int(p), int(q)) for c, p, q in terms]
        coefficients = {}
        for c, p, q in self.terms:
            row = coefficients.setdefault(p, {})
            row[q] = row.get(q, 0.0) + c
        self._coefficients = coefficients
        self._max_p = max(coefficients) if coefficients else -1

    def _inner(self, p, v):
        row = self._coefficients.get(p)
        if not row:
            return 0.0
        result = 0.0
        for q in range(max(row), -1, -1):
            result = result * v + row.get(q, 0.0)
        return result

    def __call__(self, u, v):
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        if self._max_p < 0:
            return np.zeros(np.broadcast(u, v).shape)
        result = np.zeros(np.broadcast(u, v).shape)
        for p in range(self._max_p, -1, -1):
            result = result * u + self._inner(p, v)
        return result

    def __repr__(self):
        return f"PolynomialFlux({self.terms!r})"


def validate_flux_table(table):
    """
    Check a {"phi": [[c,p,q],...], "a": [...], "b": [...]} table.
    Raises ConfigurationError naming the flux and term index of the first bad term.
    """
    if not isinstance(table, dict):
        raise ConfigurationError("Flux table must be a JSON object with keys phi, a, b")

    unknown = set(table) - set(FLUX_KEYS) - {'name'}
    if unknown:
        raise ConfigurationError(f"Unknown flux table keys: {', '.join(sorted(unknown))}")

    for key in FLUX_KEYS:
        terms = table.get(key, [])
        if not isinstance(terms, (list, tuple)):
            raise ConfigurationError(f"Flux '{key}' must be a list of [c, p, q] terms", field=key)
        for index, term in enumerate(terms):
            if not isinstance(term, (list, tuple)) or len(term) != 3:
                raise ConfigurationError(
                    f"Flux '{key}' term {index}: expected [c, p, q], got {term!r}",
                    field=key, term_index=index
                )
            c, p, q = term
            if isinstance(c, bool) or not isinstance(c, Real) or not math.isfinite(c):
                raise ConfigurationError(
                    f"Flux '{key}' term {index}: coefficient must be a finite number",
                    field=key, term_index=index
                )
            for exponent in (p, q):
                if isinstance(exponent, bool) or not isinstance(exponent, Integral) or exponent < 0:
                    raise ConfigurationError(
                        f"Flux '{key}' term {index}: exponents must be integers >= 0",
                        field=key, term_index=index
                    )


def system_custom(table, name=None):
    """
    Build a system from a polynomial coefficient table.
    Missing flux keys mean a zero flux.
    """
    validate_flux_table(table)
    normalized = {key: [(float(c), int(p), int(q)) for c, p, q in table.get(key, [])] for key in FLUX_KEYS}
    return SystemDefinition(
        name=name or table.get('name', 'custom'),
        phi=PolynomialFlux(normalized['phi']),
        a_flux=PolynomialFlux(normalized['a']),
        b_flux=PolynomialFlux(normalized['b']),
        table=normalized
    )


def system_to_table(system):
    """
    Serializable form of a system: {"name": ..., "phi": [[c,p,q],...], "a": ..., "b": ...}.
    """
    if system.table is None:
        raise ConfigurationError(f"System '{system.name}' has no polynomial table")
    data = {'name': system.name}
    for key in FLUX_KEYS:
        data[key] = [[c, p, q] for c, p, q in system.table.get(key, [])]
    return data


BUILTIN_SYSTEMS = {
    'kk': system_keyfitz_kranzer,
    'keyfitz-kranzer': system_keyfitz_kranzer,
    'korchinski': system_korchinski
}


def get_builtin_system(name):
    factory = BUILTIN_SYSTEMS.get(name)
    if factory is None:
        raise ConfigurationError(
            f"Unknown system '{name}'. Options: {', '.join(sorted(BUILTIN_SYSTEMS))} or custom:<path>",
            field='system'
        )
    return factory()


def recombination_error(system, u, v):
    """
    Largest relative deviation between the recombined split fluxes and the
    unsplit fluxes over the sample points (u, v).
    """
    if system.flux_u is None or system.flux_v is None:
        raise ConfigurationError(f"System '{system.name}' does not declare its unsplit fluxes")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    first, second = system.recombined_fluxes(u, v)
    expected_first = system.flux_u(u, v)
    expected_second = system.flux_v(u, v)

    # Scale by the magnitude of the terms entering the subtraction
    phi = system.phi(u, v)
    scale_first = np.maximum(1.0, np.abs(u * phi) + np.abs(system.a_flux(u, v)))
    scale_second = np.maximum(1.0, np.abs(v * phi) + np.abs(system.b_flux(u, v)))
    error_first = np.max(np.abs(first - expected_first) / scale_first)
    error_second = np.max(np.abs(second - expected_second) / scale_second)
    return float(max(error_first, error_second))
