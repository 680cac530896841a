"""Elementary qubus gates (controlled-path and merging) with exact outcome
enumeration and feed-forward, plus the composite two-qubit and multi-qubit
constructions built from them.

Every gate returns a `GateResult`: one `Record` per measurement outcome with
its probability, its corrected post-state, the corrections that were applied
and the recycled resources (the surviving qubus amplitude and, after a
merging, the location of the measured ancilla photon, which the next merging
can reuse).  Probabilities across the records of a gate sum to one.

Feed-forward tables (derived from the ±β phase structure of the interfering
qubus components; validated end to end by the gate fidelity tests):

* controlled path, outcome n ≠ 0: swap the two target paths, then a π phase
  on the second path iff n is odd (the two components carry (∓i)ⁿ).
* merging entangler, outcome n ≠ 0: bit flip on the ancilla, then a π phase
  on its V mode iff n is odd; a |−⟩ ancilla input contributes one extra sign
  flip (XOR with the parity rule).
* merging localization: a sign fix on the partner system when the photon is
  found on a path fed by the interferometer's minus port, and on the new
  carrier when the detected polarization is |−⟩.

Measurements default to exact Fock enumeration of the measured beam; a
realistic QND readout (with its explicit ambiguous failure records) is
opt-in via `QndMode`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .detection import (
    DetectorParams,
    draw_index,
    enumerate_fock_outcomes,
    qnd_gate_outcomes,
)
from .elements import ANY, ModeSelector, pbs_diag, phase_shift, photon_bs, qubus_bs, qubus_phase, xpm
from .errors import PreconditionViolation
from .kak import (
    HADAMARD,
    MAGIC,
    PAULI_I,
    PAULI_X,
    check_unitary,
    controlled_diag_pair,
    kak_decompose,
)
from .state import Branch, HybridState

_SQ2 = math.sqrt(2)


# -- measurement modes --------------------------------------------------------

@dataclass(frozen=True)
class ExactMode:
    """Exact Fock enumeration of measured beams (the default)."""
    tail: float = 1e-12


@dataclass(frozen=True)
class QndMode:
    """Realistic QND readout; introduces explicit ambiguous records."""
    det: DetectorParams
    k_max: Optional[int] = None
    tail: float = 1e-12


@dataclass
class SampleMode:
    """Draw a single outcome per measurement from the exact distribution."""
    rng: np.random.Generator
    tail: float = 1e-12


MeasureMode = Union[ExactMode, QndMode, SampleMode]


def _measure_beam(state: HybridState, beam: int, mode: MeasureMode):
    """(inferred n, label, probability, post-state) for each outcome."""
    if isinstance(mode, ExactMode):
        return [(n, ("n", n), p, post) for n, p, post in
                enumerate_fock_outcomes(state, beam, tail=mode.tail,
                                        vacuum_pointer=True)]
    if isinstance(mode, SampleMode):
        outs = enumerate_fock_outcomes(state, beam, tail=mode.tail,
                                       vacuum_pointer=True)
        i = draw_index([p for _, p, _ in outs], mode.rng)
        n, _, post = outs[i]
        return [(n, ("n", n), 1.0, post)]
    if isinstance(mode, QndMode):
        return qnd_gate_outcomes(state, beam, mode.det, mode.k_max, mode.tail)
    raise PreconditionViolation(f"unknown measurement mode {mode!r}")


# -- resource accounting ------------------------------------------------------

@dataclass(frozen=True)
class ResourceReport:
    c_path_count: int
    merging_count: int
    ancilla_photons_concurrent: int
    xpm_coupling_count: int
    qubus_uses: int
    cumulative_qubus_attenuation: float


@dataclass
class ResourceTrace:
    """Mutable accumulator threaded through gate invocations."""

    c_path_count: int = 0
    merging_count: int = 0
    xpm_coupling_count: int = 0
    qubus_uses: int = 0
    attenuation: float = 1.0
    ancilla_live: int = 0
    ancilla_peak: int = 0

    def log_elementary(self, kind: str, theta: float, couplings: int) -> None:
        if kind == "c_path":
            self.c_path_count += 1
        elif kind == "merging":
            self.merging_count += 1
        else:
            raise PreconditionViolation(f"unknown elementary gate {kind!r}")
        self.xpm_coupling_count += couplings
        self.qubus_uses += 1
        self.attenuation *= math.cos(theta)

    def log_ancilla_new(self) -> None:
        self.ancilla_live += 1
        self.ancilla_peak = max(self.ancilla_peak, self.ancilla_live)

    def report(self) -> ResourceReport:
        return ResourceReport(
            c_path_count=self.c_path_count,
            merging_count=self.merging_count,
            ancilla_photons_concurrent=self.ancilla_peak,
            xpm_coupling_count=self.xpm_coupling_count,
            qubus_uses=self.qubus_uses,
            cumulative_qubus_attenuation=self.attenuation,
        )


def resource_report(trace: ResourceTrace) -> ResourceReport:
    """Snapshot of a gate invocation trace."""
    return trace.report()


class _NullTrace(ResourceTrace):
    """Sink for re-enumerations of a gate that was already counted."""

    def log_elementary(self, kind, theta, couplings):
        pass

    def log_ancilla_new(self):
        pass


_NULL_TRACE = _NullTrace()


def _stage_traces(trace: ResourceTrace) -> Callable[[], ResourceTrace]:
    """One physical gate in a chain is re-run once per upstream record; only
    the first run may log resources."""
    box = {"first": True}

    def next_trace() -> ResourceTrace:
        if box["first"]:
            box["first"] = False
            return trace
        return _NULL_TRACE

    return next_trace


# -- outcome records ----------------------------------------------------------

@dataclass(frozen=True)
class Record:
    """One enumerated measurement record of a gate (or gate chain)."""

    labels: tuple
    probability: float
    state: HybridState
    corrections: tuple[str, ...] = ()
    recycled_qubus: Optional[complex] = None
    ancilla: Optional[tuple[str, int, int]] = None  # (photon, path, ±1)
    multiplicity: int = 1


@dataclass(frozen=True)
class GateResult:
    outcomes: tuple[Record, ...]
    resources: ResourceReport

    @property
    def total_probability(self) -> float:
        return sum(r.probability for r in self.outcomes)

    @property
    def recycled_qubus(self) -> Optional[complex]:
        amps = [r.recycled_qubus for r in self.outcomes if r.recycled_qubus is not None]
        if not amps:
            return None
        return min(amps, key=abs)

    @property
    def recycled_ancilla(self) -> Optional[int]:
        paths = {r.ancilla[1] for r in self.outcomes if r.ancilla is not None}
        return next(iter(paths)) if len(paths) == 1 else None


def initial_records(state: HybridState) -> list[Record]:
    return [Record(labels=(), probability=1.0, state=state)]


def chain(records: Sequence[Record],
          stage: Callable[[Record], Union[GateResult, Sequence[Record]]],
          ) -> list[Record]:
    """Feed every record through a gate stage and flatten the outcome tree."""
    out: list[Record] = []
    for rec in records:
        sub = stage(rec)
        sub_records = sub.outcomes if isinstance(sub, GateResult) else sub
        for s in sub_records:
            out.append(Record(
                labels=rec.labels + s.labels,
                probability=rec.probability * s.probability,
                state=s.state,
                corrections=rec.corrections + s.corrections,
                recycled_qubus=(s.recycled_qubus if s.recycled_qubus is not None
                                else rec.recycled_qubus),
                ancilla=s.ancilla if s.ancilla is not None else rec.ancilla,
                multiplicity=rec.multiplicity * s.multiplicity,
            ))
    return out


def map_records(records: Sequence[Record],
                fn: Callable[[HybridState], HybridState]) -> list[Record]:
    return [replace(rec, state=fn(rec.state)) for rec in records]


def _phase_canonical(state: HybridState) -> HybridState:
    st = state.canonicalize(1e-12)
    if not st.branches:
        return st
    ref = max(st.branches, key=lambda b: abs(b.amp))
    phase = ref.amp / abs(ref.amp)
    return st.scaled(phase.conjugate())


def _states_match(a: HybridState, b: HybridState, tol: float) -> bool:
    if len(a.branches) != len(b.branches) or a.photons != b.photons:
        return False
    for ba, bb in zip(a.branches, b.branches):
        if ba.config != bb.config or abs(ba.amp - bb.amp) > tol:
            return False
        if any(abs(x - y) > tol for x, y in zip(ba.qubus, bb.qubus)):
            return False
    return True


def coalesce(records: Sequence[Record], tol: float = 1e-9) -> list[Record]:
    """Merge records whose post-states agree up to a global phase.

    A record's global phase is classical bookkeeping (the measurement
    outcome already happened), so merging keeps the enumeration tree small
    through gate chains without touching the physics.
    """
    out: list[Record] = []
    canon: list[HybridState] = []
    for rec in records:
        c = _phase_canonical(rec.state)
        for i, ref in enumerate(canon):
            if (out[i].ancilla == rec.ancilla and _states_match(ref, c, tol)):
                out[i] = replace(
                    out[i],
                    probability=out[i].probability + rec.probability,
                    multiplicity=out[i].multiplicity + rec.multiplicity)
                break
        else:
            canon.append(c)
            out.append(replace(rec, state=c))
    return out


# -- controlled-path gate -----------------------------------------------------

def _detach_if_uniform(state: HybridState, beam: int):
    try:
        return state.detach_beam(beam)
    except PreconditionViolation:
        return state, None


def _c_path_core(state: HybridState, target: str, path_h: int, path_v: int,
                 v_modes: Sequence[ModeSelector], h_modes: Sequence[ModeSelector],
                 alpha: float, theta: float, mode: MeasureMode,
                 trace: ResourceTrace) -> list[Record]:
    """Shared pipeline of the standard and multi-control controlled-path gate.

    The first qubus beam couples to the target on `path_h` and to the
    `v_modes`; the second to the target on `path_v` and to the `h_modes`.
    Outcome n = 0 leaves H-flagged components on `path_h`; n ≠ 0 records are
    corrected by the path swap plus the odd-n π phase.
    """
    b1 = state.n_beams
    b2 = b1 + 1
    s = state.attach_beams((alpha, alpha))
    s = photon_bs(s, path_h, path_v)
    s = xpm(s, ModeSelector(path_h, ANY, target), b1, theta)
    for sel in v_modes:
        s = xpm(s, sel, b1, theta)
    s = xpm(s, ModeSelector(path_v, ANY, target), b2, theta)
    for sel in h_modes:
        s = xpm(s, sel, b2, theta)
    s = qubus_phase(s, b1, -theta)
    s = qubus_phase(s, b2, -theta)
    s = qubus_bs(s, b1, b2)
    trace.log_elementary("c_path", theta, couplings=4)

    records = []
    for n_hat, label, prob, post in _measure_beam(s, b1, mode):
        corrections = []
        if n_hat is not None and n_hat != 0:
            post = post.swap_paths(path_h, path_v)
            corrections.append(f"swap paths {path_h}<->{path_v}")
            if n_hat % 2 == 1:
                post = phase_shift(post, ModeSelector(path_v, ANY, target), math.pi)
                corrections.append(f"pi phase on path {path_v}")
        post, recycled = _detach_if_uniform(post, b1)
        records.append(Record(labels=(label,), probability=prob,
                              state=post.canonicalize(1e-12),
                              corrections=tuple(corrections),
                              recycled_qubus=recycled))
    return records


def c_path(state: HybridState, control: str, target: str,
           target_paths: tuple[int, int], alpha: float, theta: float, *,
           mode: Optional[MeasureMode] = None,
           trace: Optional[ResourceTrace] = None) -> GateResult:
    """Route the target photon by the control polarization.

    The target (entering on the first of `target_paths`) leaves on the first
    path in control-H components and on the second in control-V components;
    every enumerated record is corrected back to that same output.  The
    unmeasured qubus beam survives with amplitude √2·α·cosθ (√2·α in the
    quiet record) and is reported for recycling.
    """
    mode = mode or ExactMode()
    trace = trace if trace is not None else ResourceTrace()
    p1, p2 = target_paths
    state = state.add_paths([p1, p2])
    cpaths = state.paths_of(control)
    if len(cpaths) != 1:
        raise PreconditionViolation("control photon must sit on a single path")
    (cpath,) = cpaths
    if any(m is None or m[0] != p1 for m in state.photon_modes(target)):
        raise PreconditionViolation("target photon must enter on the first target path")
    if state.occupants(p2):
        raise PreconditionViolation("second target path must be empty")
    records = _c_path_core(
        state, target, p1, p2,
        v_modes=[ModeSelector(cpath, "V", control)],
        h_modes=[ModeSelector(cpath, "H", control)],
        alpha=alpha, theta=theta, mode=mode, trace=trace)
    return GateResult(tuple(records), trace.report())


# -- merging gate -------------------------------------------------------------

@dataclass(frozen=True)
class FreshAncilla:
    """Inject a new ancilla photon in |+⟩ (sign=+1) or |−⟩ (sign=−1)."""
    photon: str = "ancilla"
    sign: int = 1


@dataclass(frozen=True)
class ParkedAncilla:
    """Reuse the photon a previous merging parked on a localization path."""
    photon: str
    path: int
    sign: int


AncillaSpec = Union[FreshAncilla, ParkedAncilla]


def _locate_photon(state: HybridState, photon: str, paths: Sequence[int],
                   mode: MeasureMode):
    """Project which of `paths` carries the photon.

    Exact mode enumerates the four clean outcomes.  QND mode adds the
    detector responses: per-path clean detections, a global no-click record
    and per-path ambiguous responses, all flagged for no correction.
    """
    idx = state.photon_index(photon)

    def projected(path):
        kept = tuple(br for br in state.branches
                     if br.config[idx] is not None and br.config[idx][0] == path)
        sub = replace(state, branches=kept)
        p = sub.inner(sub).real
        return p, sub

    clean = []
    for t in paths:
        p, sub = projected(t)
        if p > 1e-300:
            clean.append((t, p, sub.scaled(1 / math.sqrt(p)).canonicalize(1e-12)))

    if isinstance(mode, (ExactMode, SampleMode)):
        results = [(t, ("qnd_path", t), p, sub, True) for t, p, sub in clean]
        if isinstance(mode, SampleMode):
            i = draw_index([p for _, _, p, _, _ in results], mode.rng)
            t, label, _, sub, ok = results[i]
            return [(t, label, 1.0, sub, ok)]
        return results

    if isinstance(mode, QndMode):
        from .detection import povm_bins, response_matrix
        det = mode.det
        bins = povm_bins(det, 1)
        resp = response_matrix(det, bins, 1)
        w_peak = resp[1][("peak", 1)]
        w_vac = resp[1][("vacuum", None)]
        w_amb = resp[1][("ambiguous", None)]
        results = []
        for t, p, sub in clean:
            results.append((t, ("qnd_path", t), p * w_peak, sub, True))
        total = sum(p for _, p, _ in clean)
        if total * w_vac > 1e-300:
            results.append((None, ("qnd_path", "no_click"), total * w_vac,
                            state.canonicalize(1e-12), False))
        for t, p, sub in clean:
            if p * w_amb > 1e-300:
                results.append((None, ("qnd_path_ambiguous", t), p * w_amb,
                                sub, False))
        return results

    raise PreconditionViolation(f"unknown measurement mode {mode!r}")


def merging(state: HybridState, photon: str, source_paths: tuple[int, int],
            dest_path: int, alpha: float, theta: float, *,
            ancilla: AncillaSpec, companion_flip: ModeSelector,
            mode: Optional[MeasureMode] = None,
            trace: Optional[ResourceTrace] = None) -> GateResult:
    """Coherently merge a photon's two path modes onto `dest_path`.

    The ancilla photon sits on the destination path; the entangler writes
    the split photon's polarization onto it, the interferometer and the
    diagonal-basis splitters fan the split photon out over four localization
    paths, and the QND modules find it there.  After feed-forward the
    destination photon carries the merged qubit and the localized photon is
    reported as the recycled ancilla for the next merging.

    `companion_flip` names the mode whose occupancy marks the components
    that entered from the second source path; those pick up the sign fix
    when the photon is localized on a minus-port path (for the standalone
    gate this is the entangled companion photon's V mode).
    """
    mode = mode or ExactMode()
    trace = trace if trace is not None else ResourceTrace()
    p, q = source_paths
    state = state.add_paths([p, q, dest_path])
    idx = state.photon_index(photon)
    for br in state.branches:
        m = br.config[idx]
        if m is None or m[0] not in (p, q):
            raise PreconditionViolation(
                "photon to merge must occupy one of the source paths")
    for path in (p, q):
        extra = state.occupants(path) - {photon}
        if extra:
            raise PreconditionViolation(f"path {path} holds other photons: {extra}")

    if isinstance(ancilla, FreshAncilla):
        if state.occupants(dest_path):
            raise PreconditionViolation("destination path must be empty")
        state = state.add_photon(ancilla.photon, dest_path,
                                 "+" if ancilla.sign > 0 else "-")
        trace.log_ancilla_new()
    else:
        if ancilla.path != dest_path:
            if state.occupants(dest_path):
                raise PreconditionViolation("destination path must be empty")
            state = state.swap_paths(ancilla.path, dest_path)
        if state.occupants(dest_path) != {ancilla.photon}:
            raise PreconditionViolation("parked ancilla is not where recorded")
    anc = ancilla.photon
    sign = ancilla.sign

    state, qnd_paths = state.fresh_paths(4)
    t_p_plus, t_p_minus, t_q_plus, t_q_minus = qnd_paths
    minus_port_paths = {t_q_plus, t_q_minus}
    minus_pol_paths = {t_p_minus, t_q_minus}

    b1 = state.n_beams
    b2 = b1 + 1
    s = state.attach_beams((alpha, alpha))
    s = xpm(s, ModeSelector(p, "V"), b1, theta)
    s = xpm(s, ModeSelector(q, "V"), b1, theta)
    s = xpm(s, ModeSelector(dest_path, "H", anc), b1, theta)
    s = xpm(s, ModeSelector(p, "H"), b2, theta)
    s = xpm(s, ModeSelector(q, "H"), b2, theta)
    s = xpm(s, ModeSelector(dest_path, "V", anc), b2, theta)
    s = qubus_phase(s, b1, -theta)
    s = qubus_phase(s, b2, -theta)
    s = qubus_bs(s, b1, b2)
    trace.log_elementary("merging", theta, couplings=4)

    records = []
    for n_hat, label, prob, post in _measure_beam(s, b1, mode):
        if n_hat is None:
            # ambiguous entangler readout: surfaced as a failure record
            post, recycled = _detach_if_uniform(post, b1)
            records.append(Record(labels=(label,), probability=prob,
                                  state=post.canonicalize(1e-12),
                                  corrections=("none (ambiguous)",),
                                  recycled_qubus=recycled))
            continue
        corrections = []
        if n_hat != 0:
            post = post.apply_photon_unitary(anc, (dest_path, "H"),
                                             (dest_path, "V"), PAULI_X)
            corrections.append("ancilla bit flip")
        if (n_hat % 2 == 1) != (sign < 0):
            post = phase_shift(post, ModeSelector(dest_path, "V", anc), math.pi)
            corrections.append("pi phase on ancilla V mode")
        post, recycled = _detach_if_uniform(post, b1)
        post = photon_bs(post, p, q)
        post = pbs_diag(post, transmit={p: t_p_plus, q: t_q_plus},
                        reflect={p: t_p_minus, q: t_q_minus})
        for t, sub_label, sub_prob, sub, correctable in _locate_photon(
                post, photon, qnd_paths, mode):
            sub_corr = list(corrections)
            if correctable:
                if t in minus_port_paths:
                    sub = phase_shift(sub, companion_flip, math.pi)
                    sub_corr.append("sign flip on companion sector")
                if t in minus_pol_paths:
                    sub = phase_shift(sub, ModeSelector(dest_path, "V", anc),
                                      math.pi)
                    sub_corr.append("sign flip on merged photon")
                pol_sign = -1 if t in minus_pol_paths else 1
                sub = sub.swap_photon_labels(photon, anc)
                parked = (anc, t, pol_sign)
            else:
                sub_corr.append("none (ambiguous)")
                parked = None
            records.append(Record(
                labels=(label, sub_label), probability=prob * sub_prob,
                state=sub.canonicalize(1e-12), corrections=tuple(sub_corr),
                recycled_qubus=recycled, ancilla=parked))
    return GateResult(tuple(records), trace.report())


# -- composite two-qubit gates -------------------------------------------------

def _home_path(state: HybridState, photon: str) -> int:
    paths = state.paths_of(photon)
    if len(paths) != 1:
        raise PreconditionViolation(f"photon {photon!r} is not on a single path")
    return next(iter(paths))


def _apply_local(state: HybridState, photon: str, u: np.ndarray) -> HybridState:
    home = _home_path(state, photon)
    return state.apply_photon_unitary(photon, (home, "H"), (home, "V"), u)


def controlled_pair(state: HybridState, control: str, target: str,
                    u1: np.ndarray, u2: np.ndarray, alpha: float, theta: float, *,
                    mode: Optional[MeasureMode] = None,
                    trace: Optional[ResourceTrace] = None,
                    ancilla: Optional[AncillaSpec] = None) -> GateResult:
    """|H⟩⟨H|⊗U1 + |V⟩⟨V|⊗U2 on (control, target).

    One controlled-path gate routes the target, U1/U2 act on the two paths,
    and one merging gate brings the paths back together; the ancilla photon
    used by the merging is recycled and its parked location reported.
    """
    mode = mode or ExactMode()
    trace = trace if trace is not None else ResourceTrace()
    u1 = check_unitary(np.asarray(u1, dtype=complex))
    u2 = check_unitary(np.asarray(u2, dtype=complex))
    c_home = _home_path(state, control)
    t_home = _home_path(state, target)
    state, (aux, seat) = state.fresh_paths(2)

    recs = chain(initial_records(state), lambda rec: c_path(
        rec.state, control, target, (t_home, aux), alpha, theta,
        mode=mode, trace=trace))
    recs = coalesce(recs)
    if not np.allclose(u1, PAULI_I):
        recs = map_records(recs, lambda s: s.apply_photon_unitary(
            target, (t_home, "H"), (t_home, "V"), u1))
    if not np.allclose(u2, PAULI_I):
        recs = map_records(recs, lambda s: s.apply_photon_unitary(
            target, (aux, "H"), (aux, "V"), u2))

    merge_trace = _stage_traces(trace)

    def merge_stage(rec: Record) -> GateResult:
        spec = ancilla
        if spec is None:
            spec = (ParkedAncilla(*rec.ancilla) if rec.ancilla is not None
                    else FreshAncilla())
        return merging(rec.state, target, (t_home, aux), seat, alpha, theta,
                       ancilla=spec, companion_flip=ModeSelector(c_home, "V", control),
                       mode=mode, trace=merge_trace())

    recs = chain(recs, merge_stage)
    recs = map_records(recs, lambda s: s.swap_paths(seat, t_home))
    recs = coalesce(recs)
    return GateResult(tuple(recs), trace.report())


def cnot(state: HybridState, control: str, target: str, alpha: float,
         theta: float, **kw) -> GateResult:
    """Bit flip of the target conditioned on the control being V."""
    return controlled_pair(state, control, target, PAULI_I, PAULI_X,
                           alpha, theta, **kw)


def cz(state: HybridState, control: str, target: str, alpha: float,
       theta: float, **kw) -> GateResult:
    return controlled_pair(state, control, target, PAULI_I,
                           np.diag([1, -1]).astype(complex), alpha, theta, **kw)


def c_phase(state: HybridState, control: str, target: str, phi: float,
            alpha: float, theta: float, **kw) -> GateResult:
    return controlled_pair(state, control, target, PAULI_I,
                           np.diag([1, np.exp(1j * phi)]), alpha, theta, **kw)


# -- arbitrary U(4) synthesis ---------------------------------------------------

_MAGIC_DECOMP = None


def _magic_as_gates():
    """Magic basis change as locals plus one controlled phase pair.

    The magic transformation is Weyl-equivalent to exp(iπ/4 σx⊗σx), which
    Hadamards turn into the controlled diagonal diag(e^{iπ/4}, e^{−iπ/4})
    pair, so it costs exactly one elementary gate pair.
    """
    global _MAGIC_DECOMP
    if _MAGIC_DECOMP is None:
        params = kak_decompose(MAGIC)
        if not (math.isclose(params.ax, math.pi / 4, abs_tol=1e-9)
                and abs(params.ay) < 1e-9 and abs(params.az) < 1e-9):
            raise PreconditionViolation("magic transformation has unexpected class")
        # N(π/4,0,0) = exp(iπ/4 σx⊗σx) = (Hd⊗Hd)·exp(iπ/4 σz⊗σz)·(Hd⊗Hd)
        phase = cmath.exp(1j * math.pi / 4)
        u1 = np.diag([phase, phase.conjugate()])
        u2 = np.diag([phase.conjugate(), phase])
        left = (params.a1 @ HADAMARD, params.a2 @ HADAMARD)
        right = (HADAMARD @ params.a3, HADAMARD @ params.a4)
        _MAGIC_DECOMP = (left, (u1, u2), right)
    return _MAGIC_DECOMP


def synth_two_qubit(state: HybridState, control: str, target: str,
                    u: np.ndarray, alpha: float, theta: float, *,
                    mode: Optional[MeasureMode] = None,
                    trace: Optional[ResourceTrace] = None,
                    ancilla: Optional[AncillaSpec] = None) -> GateResult:
    """Arbitrary U ∈ U(4) on (control, target) via the canonical form.

    U = (A1⊗A2)·N·(A3⊗A4); N is diagonalized by the magic transformation
    into a polarization-controlled pair of diagonal phase gates, and the
    magic transformation itself costs one more controlled pair on each side,
    so the synthesis runs three controlled-path/merging rounds with one
    recycled ancilla photon.
    """
    mode = mode or ExactMode()
    trace = trace if trace is not None else ResourceTrace()
    u = check_unitary(np.asarray(u, dtype=complex))
    params = kak_decompose(u)
    d1, d2 = controlled_diag_pair(params.ax, params.ay, params.az)
    (m_l1, m_l2), (m_u1, m_u2), (m_r1, m_r2) = _magic_as_gates()

    def locals_stage(recs, a, b):
        recs = map_records(recs, lambda s: _apply_local(s, control, a))
        return map_records(recs, lambda s: _apply_local(s, target, b))

    def cp_stage(recs, ua, ub):
        get_trace = _stage_traces(trace)
        out = []
        for rec in recs:
            spec = ancilla
            if rec.ancilla is not None:
                spec = ParkedAncilla(*rec.ancilla)
            elif spec is None:
                spec = FreshAncilla()
            res = controlled_pair(rec.state, control, target, ua, ub,
                                  alpha, theta, mode=mode, trace=get_trace(),
                                  ancilla=spec)
            out.extend(chain([rec], lambda _rec, res=res: res.outcomes))
        return coalesce(out)

    recs = initial_records(state)
    recs = locals_stage(recs, params.a3, params.a4)
    # magic-inverse: locals, controlled pair, locals
    recs = locals_stage(recs, m_l1.conj().T, m_l2.conj().T)
    recs = cp_stage(recs, m_u1.conj().T, m_u2.conj().T)
    recs = locals_stage(recs, m_r1.conj().T, m_r2.conj().T)
    # the diagonalized canonical gate
    recs = cp_stage(recs, d1, d2)
    # magic: locals, controlled pair, locals
    recs = locals_stage(recs, m_r1, m_r2)
    recs = cp_stage(recs, m_u1, m_u2)
    recs = locals_stage(recs, m_l1, m_l2)
    recs = locals_stage(recs, params.a1, params.a2)
    recs = coalesce(recs)
    return GateResult(tuple(recs), trace.report())


# -- multi-qubit gates -----------------------------------------------------------

def _relabel_if_on_path(state: HybridState, a: str, b: str, trigger: int) -> HybridState:
    """Swap the labels of photons a and b in branches where a sits on
    `trigger` (identical-particle bookkeeping after a path exchange)."""
    ia, ib = state.photon_index(a), state.photon_index(b)
    out = []
    for br in state.branches:
        cfg = list(br.config)
        if cfg[ia] is not None and cfg[ia][0] == trigger:
            cfg[ia], cfg[ib] = cfg[ib], cfg[ia]
        out.append(Branch(br.amp, tuple(cfg), br.qubus))
    return replace(state, branches=tuple(out))


def fredkin(state: HybridState, control: str, target1: str, target2: str,
            alpha: float, theta: float, *, mode: Optional[MeasureMode] = None,
            trace: Optional[ResourceTrace] = None,
            ancilla: Optional[AncillaSpec] = None) -> GateResult:
    """Swap the two target qubits when the control is V.

    Two controlled-path gates split the targets, the V-side paths are
    exchanged (with the identical-photon labels rebound), and two merging
    gates undo the splits; one ancilla photon serves both mergings.
    """
    mode = mode or ExactMode()
    trace = trace if trace is not None else ResourceTrace()
    c_home = _home_path(state, control)
    h1 = _home_path(state, target1)
    h2 = _home_path(state, target2)
    state, (o1, o2, seat1, seat2) = state.fresh_paths(4)
    flip = ModeSelector(c_home, "V", control)

    recs = initial_records(state)
    trace1 = _stage_traces(trace)
    recs = chain(recs, lambda rec: c_path(rec.state, control, target1,
                                          (h1, o1), alpha, theta,
                                          mode=mode, trace=trace1()))
    recs = coalesce(recs)
    trace2 = _stage_traces(trace)
    recs = chain(recs, lambda rec: c_path(rec.state, control, target2,
                                          (h2, o2), alpha, theta,
                                          mode=mode, trace=trace2()))
    recs = coalesce(recs)
    recs = map_records(recs, lambda s: s.swap_paths(o1, o2))
    recs = map_records(recs, lambda s: _relabel_if_on_path(s, target1, target2, o2))

    def merge_stage(photon, pair, seat, home):
        get_trace = _stage_traces(trace)

        def stage(rec: Record) -> GateResult:
            spec = ancilla if rec.ancilla is None else ParkedAncilla(*rec.ancilla)
            if spec is None:
                spec = FreshAncilla()
            res = merging(rec.state, photon, pair, seat, alpha, theta,
                          ancilla=spec, companion_flip=flip, mode=mode,
                          trace=get_trace())
            out = [replace(r, state=r.state.swap_paths(seat, home))
                   for r in res.outcomes]
            return GateResult(tuple(out), res.resources)
        return stage

    recs = chain(recs, merge_stage(target1, (h1, o1), seat1, h1))
    recs = coalesce(recs)
    recs = chain(recs, merge_stage(target2, (h2, o2), seat2, h2))
    recs = coalesce(recs)
    return GateResult(tuple(recs), trace.report())


def multi_toffoli(state: HybridState, controls: Sequence[str], target: str,
                  alpha: float, theta: float, *,
                  mode: Optional[MeasureMode] = None,
                  trace: Optional[ResourceTrace] = None,
                  ancilla: Optional[AncillaSpec] = None) -> GateResult:
    """Bit flip of the target when every control is V.

    A chain of k controlled-path gates routes each successive photon by the
    all-V flag accumulated on the odd paths (one beam couples the new V
    flag, the other couples every earlier H flag, which a branch can fire at
    most once), the flip acts on the all-V target path alone, and k merging
    gates undo the routing while reusing a single ancilla photon.
    """
    mode = mode or ExactMode()
    trace = trace if trace is not None else ResourceTrace()
    k = len(controls)
    if k < 2:
        raise PreconditionViolation("need at least two control photons")
    homes = [_home_path(state, c) for c in controls]
    t_home = _home_path(state, target)
    state, fresh = state.fresh_paths(2 * k)
    odd = fresh[:k]          # odd[j]: all-V path created by stage j+1
    seats = fresh[k:]        # merge destinations
    flags = [homes[0]] + list(odd)

    recs = initial_records(state)
    stage_targets = list(controls[1:]) + [target]
    stage_homes = homes[1:] + [t_home]
    for j, (photon, home) in enumerate(zip(stage_targets, stage_homes)):
        v_modes = [ModeSelector(flags[j], "V")]
        h_modes = [ModeSelector(f, "H") for f in flags[:j + 1]]
        get_trace = _stage_traces(trace)

        def stage(rec: Record, photon=photon, home=home, j=j,
                  v_modes=v_modes, h_modes=h_modes,
                  get_trace=get_trace) -> list[Record]:
            return _c_path_core(rec.state, photon, home, odd[j],
                                v_modes, h_modes, alpha, theta, mode,
                                get_trace())

        recs = chain(recs, stage)
        recs = coalesce(recs)

    recs = map_records(recs, lambda s: s.apply_photon_unitary(
        target, (odd[k - 1], "H"), (odd[k - 1], "V"), PAULI_X))

    def merge_stage(photon, pair, seat, home, flip):
        get_trace = _stage_traces(trace)

        def stage(rec: Record) -> GateResult:
            spec = ancilla if rec.ancilla is None else ParkedAncilla(*rec.ancilla)
            if spec is None:
                spec = FreshAncilla()
            res = merging(rec.state, photon, pair, seat, alpha, theta,
                          ancilla=spec, companion_flip=flip, mode=mode,
                          trace=get_trace())
            out = [replace(r, state=r.state.swap_paths(seat, home))
                   for r in res.outcomes]
            return GateResult(tuple(out), res.resources)
        return stage

    merge_specs = [(target, (t_home, odd[k - 1]), seats[k - 1], t_home,
                    ModeSelector(flags[k - 1], "V"))]
    for j in range(k - 2, -1, -1):
        merge_specs.append((stage_targets[j], (stage_homes[j], odd[j]),
                            seats[j], stage_homes[j],
                            ModeSelector(flags[j], "V")))
    for photon, pair, seat, home, flip in merge_specs:
        recs = chain(recs, merge_stage(photon, pair, seat, home, flip))
        recs = coalesce(recs)
    return GateResult(tuple(recs), trace.report())


def toffoli(state: HybridState, control1: str, control2: str, target: str,
            alpha: float, theta: float, **kw) -> GateResult:
    """Doubly-V-controlled bit flip (the two-control case of the chain)."""
    return multi_toffoli(state, [control1, control2], target, alpha, theta, **kw)
