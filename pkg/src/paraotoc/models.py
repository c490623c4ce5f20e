"""Chain Hamiltonians in clock form and their Trotter gate compilation.

Two models are provided.  The hopping chain couples parafermion modes at
unit and double mode distance with tunable phases; the alternating chain
couples modes pairwise with two alternating strengths, which is the
setting where boundary zero modes can survive.  Both are stored as
per-bond 9x9 Hermitian blocks acting on neighboring three-state sites,
with on-site pieces absorbed into the adjacent bonds, ready for
second-order Trotter splitting.

The clock form used here is the Jordan-Wigner image of the mode
Hamiltonians; the dense-equivalence tests pin the two representations
against each other term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from paraotoc.algebra import CLOCK, IDENTITY3, OMEGA, SHIFT
from paraotoc.errors import ConfigError

_HERMITICITY_TOL = 1e-12


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value}")
    return value


@dataclass(frozen=True)
class HoppingChain:
    """Mode chain with nearest and next-nearest hopping.

    ``t1`` is the energy unit (nearest-neighbor strength), ``t2`` the
    next-nearest strength, ``theta`` and ``phi`` their hopping phases.
    ``n_spins`` counts three-state sites; the chain carries twice as
    many parafermion modes.
    """

    n_spins: int
    t1: float = 1.0
    t2: float = 0.0
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if int(self.n_spins) != self.n_spins or self.n_spins < 2:
            raise ConfigError(f"need at least 2 spin sites, got {self.n_spins}")
        object.__setattr__(self, "n_spins", int(self.n_spins))
        for name in ("t1", "t2", "theta", "phi"):
            object.__setattr__(self, name, _require_finite(name, getattr(self, name)))

    @property
    def n_modes(self) -> int:
        return 2 * self.n_spins

    @classmethod
    def from_modes(cls, n_modes: int, **kwargs) -> "HoppingChain":
        if n_modes % 2 or n_modes < 4:
            raise ConfigError(f"mode count must be even and >= 4, got {n_modes}")
        return cls(n_spins=n_modes // 2, **kwargs)


@dataclass(frozen=True)
class AlternatingChain:
    """Mode chain with alternating pair couplings.

    ``j1`` couples the even-odd mode pairs straddling neighboring sites
    (with chirality angle ``varphi``); ``j2`` couples the two modes
    sharing a site.  At ``j2 = 0`` the outermost modes drop out of the
    Hamiltonian entirely.
    """

    n_spins: int
    j1: float = 1.0
    j2: float = 0.0
    varphi: float = 0.0

    def __post_init__(self):
        if int(self.n_spins) != self.n_spins or self.n_spins < 2:
            raise ConfigError(f"need at least 2 spin sites, got {self.n_spins}")
        object.__setattr__(self, "n_spins", int(self.n_spins))
        for name in ("j1", "j2", "varphi"):
            object.__setattr__(self, name, _require_finite(name, getattr(self, name)))

    @property
    def n_modes(self) -> int:
        return 2 * self.n_spins

    @classmethod
    def from_modes(cls, n_modes: int, **kwargs) -> "AlternatingChain":
        if n_modes % 2 or n_modes < 4:
            raise ConfigError(f"mode count must be even and >= 4, got {n_modes}")
        return cls(n_spins=n_modes // 2, **kwargs)


@dataclass(frozen=True)
class BondTerms:
    """Per-bond 9x9 Hermitian blocks with on-site pieces absorbed.

    Block ``b`` (0-based) acts on spin sites ``b+1`` and ``b+2``.  The
    embedded sum of blocks equals the full Hamiltonian.
    """

    n_spins: int
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.blocks) != self.n_spins - 1:
            raise ConfigError(
                f"expected {self.n_spins - 1} bond blocks, got {len(self.blocks)}")
        for b, block in enumerate(self.blocks):
            if block.shape != (9, 9):
                raise ConfigError(f"bond block {b} is not 9x9")
            if np.linalg.norm(block - block.conj().T) > _HERMITICITY_TOL * max(
                    1.0, np.linalg.norm(block)):
                raise ConfigError(f"bond block {b} is not Hermitian")


def _assemble(n_spins: int, onsite: np.ndarray, bond: np.ndarray) -> BondTerms:
    """Spread a uniform on-site term over the bond blocks.

    Interior sites contribute half of their on-site term to each
    adjacent bond; the two end sites give full weight to their only
    bond.
    """
    blocks = [bond.copy() for _ in range(n_spins - 1)]
    for site in range(1, n_spins + 1):
        if site == 1:
            blocks[0] += np.kron(onsite, IDENTITY3)
        elif site == n_spins:
            blocks[-1] += np.kron(IDENTITY3, onsite)
        else:
            blocks[site - 2] += 0.5 * np.kron(IDENTITY3, onsite)
            blocks[site - 1] += 0.5 * np.kron(onsite, IDENTITY3)
    return BondTerms(n_spins, tuple(blocks))


def _hermitize(mat: np.ndarray) -> np.ndarray:
    return mat + mat.conj().T


def clock_hamiltonian(model: HoppingChain) -> BondTerms:
    """Bond blocks for the hopping chain in clock variables.

    The nearest-neighbor mode hopping contributes a clock field on every
    site and a shift-shift bond coupling, both weighted by omega; the
    next-nearest hopping contributes the two mixed three-operator bond
    terms.  Open boundaries throughout.
    """
    t1 = model.t1 * np.exp(1j * model.theta)
    t2 = model.t2 * np.exp(1j * model.phi)
    onsite = _hermitize(-t1 * OMEGA * CLOCK)
    sd = SHIFT.conj().T
    bond = _hermitize(
        -t1 * OMEGA * np.kron(sd, SHIFT)
        + t2 * np.kron(sd, CLOCK @ SHIFT)
        + t2 * np.kron(sd @ CLOCK, SHIFT))
    return _assemble(model.n_spins, onsite, bond)


def alternating_hamiltonian(model: AlternatingChain) -> BondTerms:
    """Bond blocks for the alternating chain in clock variables.

    The cross-site pair coupling becomes a shift-shift bond term with
    chirality phase; the on-site pair coupling becomes a clock field.
    """
    j1 = model.j1 * np.exp(1j * model.varphi)
    onsite = _hermitize(-model.j2 * OMEGA * CLOCK)
    bond = _hermitize(-j1 * OMEGA * np.kron(SHIFT.conj().T, SHIFT))
    return _assemble(model.n_spins, onsite, bond)


def bond_terms(model: HoppingChain | AlternatingChain) -> BondTerms:
    """Dispatch to the right Hamiltonian builder for the model type."""
    if isinstance(model, HoppingChain):
        return clock_hamiltonian(model)
    if isinstance(model, AlternatingChain):
        return alternating_hamiltonian(model)
    raise ConfigError(f"unknown model type: {type(model).__name__}")


@dataclass(frozen=True)
class GateLayer:
    """One layer of commuting two-site gates.

    ``bonds`` holds 1-based bond indices (bond b couples sites b and
    b+1); ``gates`` the matching 9x9 unitaries for the top (output)
    physical legs.  Heisenberg conjugation applies the adjoint of each
    gate to the bottom legs, so only the top-leg unitary is stored.
    """

    bonds: tuple[int, ...]
    gates: tuple[np.ndarray, ...]
    duration: float
    direction: str

    def __post_init__(self):
        if len(self.bonds) != len(self.gates):
            raise ConfigError("bond/gate count mismatch")


def _bond_gate(block: np.ndarray, step: float, sign: int) -> np.ndarray:
    # exp(1j * sign * block * step) through the eigenbasis; block is Hermitian
    energies, states = eigh(block)
    phases = np.exp(1j * sign * energies * step)
    return (states * phases) @ states.conj().T


def _layer(terms: BondTerms, bonds: list[int], step: float, sign: int,
           direction: str) -> GateLayer:
    gates = tuple(_bond_gate(terms.blocks[b - 1], step, sign) for b in bonds)
    return GateLayer(tuple(bonds), gates, step, direction)


def trotter_layers(terms: BondTerms, dt: float,
                   direction: str = "forward") -> tuple[GateLayer, ...]:
    """Second-order splitting of one time step into three gate layers.

    Returns (odd half-step, even full-step, odd half-step).  Forward
    direction means the top-leg gates are exp(+i h dt), which advances a
    Heisenberg-picture operator by +dt; backward swaps the sign.
    """
    dt = float(dt)
    if dt == 0 or not math.isfinite(dt):
        raise ConfigError(f"time step must be nonzero and finite, got {dt}")
    if direction not in ("forward", "backward"):
        raise ConfigError(f"direction must be forward or backward, got {direction!r}")
    sign = 1 if direction == "forward" else -1
    odd = [b for b in range(1, terms.n_spins) if b % 2 == 1]
    even = [b for b in range(1, terms.n_spins) if b % 2 == 0]
    half = _layer(terms, odd, dt / 2, sign, direction)
    full = _layer(terms, even, dt, sign, direction)
    return (half, full, half)


def step_sequence(terms: BondTerms, dt: float, n_steps: int,
                  direction: str = "forward") -> list[GateLayer]:
    """Gate layers for ``n_steps`` consecutive second-order steps.

    Adjacent odd half-steps between steps are merged into full steps
    (exact telescoping), cutting the gate count by a third for long
    stretches.
    """
    if n_steps < 1:
        raise ConfigError(f"need at least one step, got {n_steps}")
    half_odd, full_even, _ = trotter_layers(terms, dt, direction)
    if n_steps == 1:
        return [half_odd, full_even, half_odd]
    sign = 1 if direction == "forward" else -1
    odd_bonds = list(half_odd.bonds)
    full_odd = _layer(terms, odd_bonds, dt, sign, direction)
    layers: list[GateLayer] = [half_odd, full_even]
    for _ in range(n_steps - 1):
        layers.append(full_odd)
        layers.append(full_even)
    layers.append(half_odd)
    return layers
