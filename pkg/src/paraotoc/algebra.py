"""Single-site clock matrices and multi-site operator strings.

Operators on a chain of three-state sites are represented sparsely as a
scalar phase times one 3x3 factor per non-identity site.  Products of
strings are again strings, so all the exchange algebra can be carried
out exactly; dense matrices are only materialized on demand for small
chains.

Parafermion modes live on top of the clock chain.  Mode ``p`` (1-based,
two modes per site) acts on spin site ``(p + 1) // 2`` and carries a
clock-matrix tail on every site to its left, which is what makes widely
separated modes pick up a fixed phase when exchanged.
"""

from __future__ import annotations

import numpy as np

OMEGA = np.exp(2j * np.pi / 3)

# omega**k with k reduced mod 3, tabulated once so repeated powers do
# not accumulate rounding drift
_OMEGA_POWERS = (1.0 + 0.0j, complex(OMEGA), complex(OMEGA * OMEGA))


def omega_power(k: int) -> complex:
    """Return omega**k for an integer k of either sign."""
    return _OMEGA_POWERS[k % 3]


#: cyclic lowering matrix: maps weight state n to n - 1 (mod 3)
SHIFT = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=np.complex128)

#: weight-phase matrix diag(1, omega, omega**2)
CLOCK = np.diag([1.0 + 0.0j, OMEGA, OMEGA * OMEGA]).astype(np.complex128)

IDENTITY3 = np.eye(3, dtype=np.complex128)

_IDENTITY_DROP_TOL = 1e-12


def site_of(p: int) -> int:
    """Spin site hosting parafermion mode p (two modes per site)."""
    return (p + 1) // 2


class OperatorString:
    """A scalar phase times a product of single-site 3x3 factors.

    ``factors`` maps 1-based site index to its matrix; sites absent from
    the map carry the identity.  Site 1 is the leftmost (most
    significant) tensor factor in the dense representation.
    """

    __slots__ = ("n_sites", "factors", "phase")

    def __init__(self, n_sites: int, factors: dict[int, np.ndarray] | None = None,
                 phase: complex = 1.0 + 0.0j):
        n_sites = int(n_sites)
        if n_sites < 1:
            raise ValueError(f"need at least one site, got {n_sites}")
        self.n_sites = n_sites
        self.factors = {} if factors is None else dict(factors)
        self.phase = complex(phase)
        for site, mat in self.factors.items():
            if not 1 <= site <= n_sites:
                raise ValueError(f"factor site {site} outside 1..{n_sites}")
            if np.shape(mat) != (3, 3):
                raise ValueError(f"factor at site {site} is not 3x3")

    @property
    def support(self) -> tuple[int, ...]:
        """Sites carrying a non-identity factor, in increasing order."""
        return tuple(sorted(self.factors))

    def dagger(self) -> "OperatorString":
        """Hermitian adjoint of the string."""
        flipped = {s: m.conj().T for s, m in self.factors.items()}
        return OperatorString(self.n_sites, flipped, np.conj(self.phase))

    def scaled(self, scalar: complex) -> "OperatorString":
        """Same string with the phase multiplied by ``scalar``."""
        return OperatorString(self.n_sites, self.factors, self.phase * scalar)

    def to_dense(self) -> np.ndarray:
        """Dense 3**n_sites matrix.  Only sensible for short chains."""
        out = np.array([[self.phase]], dtype=np.complex128)
        for site in range(1, self.n_sites + 1):
            out = np.kron(out, self.factors.get(site, IDENTITY3))
        return out

    def __repr__(self) -> str:
        return (f"OperatorString(n_sites={self.n_sites}, "
                f"support={self.support}, phase={self.phase:+.6g})")


def string_product(a: OperatorString, b: OperatorString) -> OperatorString:
    """Operator product a @ b (b acts first on states).

    Factors landing on the same site are multiplied in that order.  Any
    resulting factor that is a scalar multiple of the identity is folded
    back into the phase, so strings stay as short as the algebra allows.
    """
    if a.n_sites != b.n_sites:
        raise ValueError(f"chain length mismatch: {a.n_sites} vs {b.n_sites}")
    phase = a.phase * b.phase
    factors: dict[int, np.ndarray] = {}
    for site in set(a.factors) | set(b.factors):
        fa = a.factors.get(site, IDENTITY3)
        fb = b.factors.get(site, IDENTITY3)
        prod = fa @ fb
        scale = np.trace(prod) / 3.0
        norm = np.linalg.norm(prod)
        if norm > 0 and np.linalg.norm(prod - scale * IDENTITY3) <= _IDENTITY_DROP_TOL * norm:
            phase *= scale
        else:
            factors[site] = prod
    return OperatorString(a.n_sites, factors, phase)


def parafermion(p: int, n_sites: int) -> OperatorString:
    """Parafermion mode p on a chain of ``n_sites`` three-state sites.

    Modes are numbered 1..2*n_sites.  Both modes of a pair act on site
    (p + 1) // 2 through a shift matrix; the even mode additionally
    applies the on-site clock matrix and a fixed phase so the whole
    family satisfies the cubic exchange algebra.
    """
    if not 1 <= p <= 2 * n_sites:
        raise ValueError(f"mode index {p} outside 1..{2 * n_sites}")
    m = site_of(p)
    factors: dict[int, np.ndarray] = {k: CLOCK.copy() for k in range(1, m)}
    if p % 2:
        factors[m] = SHIFT.copy()
        phase = 1.0 + 0.0j
    else:
        factors[m] = SHIFT @ CLOCK
        phase = complex(OMEGA)
    return OperatorString(n_sites, factors, phase)


def parity_string(n_sites: int) -> OperatorString:
    """Global charge operator: the product of clock matrices on every site."""
    return OperatorString(n_sites, {k: CLOCK.copy() for k in range(1, n_sites + 1)})


def dual_parafermion(p: int, n_sites: int,
                     symmetry: OperatorString | None = None) -> OperatorString:
    """Image of mode p under attachment of the inverse global charge.

    Returns ``symmetry.dagger() @ parafermion(p)``.  With the default
    global charge the clock tail to the left of site (p + 1) // 2
    cancels exactly, so the dual mode is supported on the right part of
    the chain only.  Conjugating a mode by the charge multiplies it by a
    cube root of unity, so dressed and bare modes generate the same
    squared-commutator growth while having complementary supports.
    """
    sym = parity_string(n_sites) if symmetry is None else symmetry
    return string_product(sym.dagger(), parafermion(p, n_sites))


def commutation_residual(a: OperatorString, b: OperatorString, power: int) -> float:
    """Frobenius norm of A @ B - omega**power * B @ A, via dense matrices."""
    da = a.to_dense()
    db = b.to_dense()
    return float(np.linalg.norm(da @ db - omega_power(power) * db @ da))
