"""Correlator drivers: evolve one operator of a mode pair as an MPO
(or both, in the split-time variant) and trace against the static
partner at every record time.

Branch selection keeps the static operator's string outside the
evolving light cone.  For j < k the plain mode-j operator evolves and
the charge-dressed mode-k partner, whose string runs to the right
edge, stays static; every site left of it is skipped through the
left-canonical form.  For j >= k the roles mirror: the dressed mode-j
operator evolves and the plain mode-k string, running from the left
edge, stays static.  Either way the sandwich trace times a fixed cube
root of unity reproduces the plain correlator, an identity pinned
against exact diagonalization in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from paraotoc import ed
from paraotoc.algebra import dual_parafermion, omega_power, parafermion
from paraotoc.errors import ConfigError, NumericalError
from paraotoc.models import bond_terms, step_sequence
from paraotoc.mpo import (
    Mpo,
    TruncationReport,
    apply_heisenberg_step,
    frobenius_unitarity,
    left_canonicalize,
    otoc_sandwich_mpo,
    otoc_sandwich_string,
    right_canonicalize,
)

METHODS = ("direct", "timesplit", "ed")

_RATIO_TOL = 1e-9


def _integer_ratio(num: float, den: float, what: str) -> int:
    ratio = num / den
    steps = round(ratio)
    if steps < 1 or abs(ratio - steps) > _RATIO_TOL * max(1.0, steps):
        raise ConfigError(f"{what} must be a positive integer multiple, got {ratio}")
    return steps


def squared_commutator(f_values: np.ndarray) -> np.ndarray:
    """Graded-commutator weight 2(1 - Re F)."""
    return 2.0 * (1.0 - np.real(np.asarray(f_values)))


def _weight(unitarity: float) -> float:
    """Surviving Frobenius weight used to normalize the sandwich trace.

    Truncation sheds operator weight, which would otherwise leak into
    the correlator as a spurious global decay; dividing by the kept
    weight cancels it exactly wherever the static partner sits outside
    the evolved window, and keeps the correlator an average over what
    the tensors actually retain everywhere else.
    """
    if not unitarity > 1e-12:
        raise NumericalError(
            f"evolved operator weight collapsed to {unitarity:.3e}; "
            f"the run is far past any usable bond dimension")
    return unitarity


@dataclass(frozen=True)
class OtocRequest:
    """Validated description of one correlator run."""

    model: Any
    j: int
    k: int
    t_max: float
    dt: float = 0.01
    stride: float = 0.1
    chi: int = 48
    cutoff: float = 1e-12
    trunc_budget: float = 1e-6
    method: str = "direct"

    def __post_init__(self):
        n_modes = 2 * self.model.n_spins
        for name, mode in (("j", self.j), ("k", self.k)):
            if not isinstance(mode, (int, np.integer)) or not 1 <= mode <= n_modes:
                raise ConfigError(f"mode {name}={mode} outside 1..{n_modes}")
        if not (math.isfinite(self.t_max) and self.t_max >= 0):
            raise ConfigError(f"t_max must be finite and >= 0, got {self.t_max}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (math.isfinite(self.stride) and self.stride > 0):
            raise ConfigError(f"stride must be positive, got {self.stride}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not isinstance(self.chi, (int, np.integer)) or self.chi < 1:
            raise ConfigError(f"chi must be a positive integer, got {self.chi}")
        if not (math.isfinite(self.cutoff) and self.cutoff >= 0):
            raise ConfigError(f"cutoff must be >= 0, got {self.cutoff}")
        if not self.trunc_budget > 0:
            raise ConfigError(f"trunc_budget must be > 0, got {self.trunc_budget}")
        if self.method != "ed":
            _integer_ratio(self.stride, self.dt, "stride / dt")
            if self.method == "timesplit":
                _integer_ratio(self.stride, 2 * self.dt, "stride / (2 dt)")

    @property
    def record_times(self) -> np.ndarray:
        n_records = int(math.floor(self.t_max / self.stride + _RATIO_TOL))
        return self.stride * np.arange(n_records + 1)

    def describe(self) -> dict:
        model_info = asdict(self.model)
        model_info["kind"] = type(self.model).__name__
        return {
            "model": model_info,
            "j": self.j, "k": self.k, "t_max": self.t_max, "dt": self.dt,
            "stride": self.stride, "chi": self.chi, "cutoff": self.cutoff,
            "trunc_budget": self.trunc_budget, "method": self.method,
        }


@dataclass(frozen=True)
class OtocSeries:
    """Correlator time series with its numerical health columns.

    ``f`` is already normalized by the surviving operator weight;
    ``unitarity`` reports that weight (1 means no truncation loss) and
    ``trunc_weight`` the accumulated relative discard.
    """

    times: np.ndarray
    f: np.ndarray
    trunc_weight: np.ndarray
    unitarity: np.ndarray
    budget_exceeded: bool
    meta: dict = field(default_factory=dict)

    @property
    def c(self) -> np.ndarray:
        return squared_commutator(self.f)


@dataclass(frozen=True)
class LightConeGrid:
    """Correlators for one evolved mode against many static partners.

    ``f`` is the weight-normalized estimate; ``unitarity`` holds the
    surviving Frobenius weight of the evolved operator behind each
    column, so ``f * unitarity`` recovers the raw truncated trace.
    """

    times: np.ndarray
    ks: tuple[int, ...]
    f: np.ndarray  # shape (n_times, n_ks)
    trunc_weight: np.ndarray
    unitarity: np.ndarray  # shape (n_times, n_ks)
    budget_exceeded: bool
    meta: dict = field(default_factory=dict)

    @property
    def c(self) -> np.ndarray:
        return squared_commutator(self.f)


def _branch(j: int, k: int, n_spins: int):
    """Evolving string, static string, contraction side, and phase."""
    sign = int(np.sign(j - k))
    if j < k:
        return (parafermion(j, n_spins), dual_parafermion(k, n_spins),
                "left", omega_power(sign + 1))
    return (dual_parafermion(j, n_spins), parafermion(k, n_spins),
            "right", omega_power(sign - 1))


def _canonicalize_for(side: str, mpo: Mpo) -> None:
    if side == "left":
        left_canonicalize(mpo)
    else:
        right_canonicalize(mpo)


def _run_ed(request: OtocRequest) -> OtocSeries:
    times = request.record_times
    f = ed.otoc_exact(request.model, request.j, request.k, times)
    return OtocSeries(times, f, np.zeros(times.size), np.ones(times.size),
                      False, request.describe())


def _run_direct(request: OtocRequest) -> OtocSeries:
    n = request.model.n_spins
    w_str, v_str, side, phase = _branch(request.j, request.k, n)
    terms = bond_terms(request.model)
    steps = _integer_ratio(request.stride, request.dt, "stride / dt")
    layers = step_sequence(terms, request.dt, steps)
    w = Mpo.from_string(w_str)
    report = TruncationReport()
    times = request.record_times
    f = np.empty(times.size, dtype=np.complex128)
    trunc = np.empty(times.size)
    unitarity = np.empty(times.size)
    for i in range(times.size):
        if i:
            report.merge(apply_heisenberg_step(w, layers, request.chi,
                                               request.cutoff))
        _canonicalize_for(side, w)
        u = frobenius_unitarity(w)
        f[i] = phase * otoc_sandwich_string(w, v_str, side) / _weight(u)
        trunc[i] = report.discarded_total
        unitarity[i] = u
    return OtocSeries(times, f, trunc, unitarity,
                      bool(trunc[-1] > request.trunc_budget),
                      request.describe())


def _run_timesplit(request: OtocRequest) -> OtocSeries:
    n = request.model.n_spins
    w_str, v_str, side, phase = _branch(request.j, request.k, n)
    terms = bond_terms(request.model)
    half_steps = _integer_ratio(request.stride, 2 * request.dt, "stride / (2 dt)")
    fwd = step_sequence(terms, request.dt, half_steps, "forward")
    bwd = step_sequence(terms, request.dt, half_steps, "backward")
    w = Mpo.from_string(w_str)
    v = Mpo.from_string(v_str)
    report = TruncationReport()
    times = request.record_times
    f = np.empty(times.size, dtype=np.complex128)
    trunc = np.empty(times.size)
    unitarity = np.empty(times.size)
    for i in range(times.size):
        if i:
            report.merge(apply_heisenberg_step(w, fwd, request.chi,
                                               request.cutoff))
            report.merge(apply_heisenberg_step(v, bwd, request.chi,
                                               request.cutoff))
        _canonicalize_for(side, w)
        u_w = frobenius_unitarity(w)
        u_v = frobenius_unitarity(v)
        f[i] = phase * otoc_sandwich_mpo(w, v, side) / (
            _weight(u_w) * _weight(u_v))
        trunc[i] = report.discarded_total
        unitarity[i] = min(u_w, u_v)
    return OtocSeries(times, f, trunc, unitarity,
                      bool(trunc[-1] > request.trunc_budget),
                      request.describe())


def run_otoc(request: OtocRequest) -> OtocSeries:
    """Dispatch one correlator run by its requested method."""
    if request.method == "ed":
        return _run_ed(request)
    if request.method == "direct":
        return _run_direct(request)
    return _run_timesplit(request)


def lightcone_scan(model, j: int, ks, t_max: float, dt: float = 0.01,
                   stride: float = 0.1, chi: int = 48, cutoff: float = 1e-12,
                   trunc_budget: float = 1e-6,
                   method: str = "direct") -> LightConeGrid:
    """Correlators of mode j against every mode in ``ks``.

    With the direct method both evolution branches are shared across
    their static partners, so a whole cone costs two evolutions no
    matter how many probe modes are requested.
    """
    ks = tuple(sorted(set(int(k) for k in ks)))
    if not ks:
        raise ConfigError("need at least one probe mode")
    base = OtocRequest(model=model, j=j, k=ks[0], t_max=t_max, dt=dt,
                       stride=stride, chi=chi, cutoff=cutoff,
                       trunc_budget=trunc_budget, method=method)
    n_modes = 2 * model.n_spins
    for k in ks:
        if not 1 <= k <= n_modes:
            raise ConfigError(f"mode k={k} outside 1..{n_modes}")
    times = base.record_times
    meta = base.describe()
    del meta["k"]
    meta["ks"] = list(ks)

    if method != "direct":
        f = np.empty((times.size, len(ks)), dtype=np.complex128)
        unit = np.empty((times.size, len(ks)))
        trunc = np.zeros(times.size)
        exceeded = False
        for col, k in enumerate(ks):
            series = run_otoc(OtocRequest(
                model=model, j=j, k=k, t_max=t_max, dt=dt, stride=stride,
                chi=chi, cutoff=cutoff, trunc_budget=trunc_budget,
                method=method))
            f[:, col] = series.f
            unit[:, col] = series.unitarity
            trunc += series.trunc_weight
            exceeded = exceeded or series.budget_exceeded
        return LightConeGrid(times, ks, f, trunc, unit, exceeded, meta)

    n = model.n_spins
    terms = bond_terms(model)
    steps = _integer_ratio(stride, dt, "stride / dt")
    layers = step_sequence(terms, dt, steps)
    groups = []  # (evolving MPO, side, [(column, static string, phase)])
    plain_cols = [(col, k) for col, k in enumerate(ks) if k > j]
    dual_cols = [(col, k) for col, k in enumerate(ks) if k <= j]
    if plain_cols:
        members = [(col, dual_parafermion(k, n), omega_power(int(np.sign(j - k)) + 1))
                   for col, k in plain_cols]
        groups.append([Mpo.from_string(parafermion(j, n)), "left", members])
    if dual_cols:
        members = [(col, parafermion(k, n), omega_power(int(np.sign(j - k)) - 1))
                   for col, k in dual_cols]
        groups.append([Mpo.from_string(dual_parafermion(j, n)), "right", members])

    f = np.empty((times.size, len(ks)), dtype=np.complex128)
    unit = np.empty((times.size, len(ks)))
    trunc = np.empty(times.size)
    report = TruncationReport()
    for i in range(times.size):
        for group in groups:
            w, side, members = group
            if i:
                report.merge(apply_heisenberg_step(w, layers, chi, cutoff))
            _canonicalize_for(side, w)
            u = _weight(frobenius_unitarity(w))
            for col, v_str, phase in members:
                f[i, col] = phase * otoc_sandwich_string(w, v_str, side) / u
                unit[i, col] = u
        trunc[i] = report.discarded_total
    exceeded = bool(trunc[-1] > trunc_budget)
    return LightConeGrid(times, ks, f, trunc, unit, exceeded, meta)
