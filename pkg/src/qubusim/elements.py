"""Linear-optical elements and weak-Kerr couplings on hybrid states.

Conventions fixed here and used everywhere else:

* photon 50:50 BS on paths (a, b): |a⟩ → (|a⟩+|b⟩)/√2, |b⟩ → (|a⟩−|b⟩)/√2,
  independently per polarization (the real Hadamard-like convention, its own
  inverse);
* qubus 50:50 BS on beams (i, j): (αi, αj) → ((αi−αj)/√2, (αi+αj)/√2),
  exact on coherent amplitudes;
* cross-phase modulation is an ideal conditional phase: a branch whose
  selected photon mode is occupied has its beam amplitude rotated by e^{iθ}
  (no self-phase modulation, no decoherence).

All elements are pure functions preserving the norm.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Union

from .errors import MultiPhotonCollision, PreconditionViolation, UnknownPath
from .state import Branch, HybridState, H, V, parse_pol

_SQ2 = math.sqrt(2)

ANY = "ANY"


@dataclass(frozen=True)
class ModeSelector:
    """Selects at most one occupied photon mode per branch.

    `photon` restricts the match to one photon id (None: any photon);
    `pol` is "H", "V" or ANY.
    """

    path: int
    pol: Union[int, str] = ANY
    photon: Optional[str] = None

    def _pol_index(self):
        return None if self.pol == ANY else parse_pol(self.pol)

    def matches(self, state: HybridState, branch: Branch) -> bool:
        pol = self._pol_index()
        hits = 0
        for pid, mode in zip(state.photons, branch.config):
            if mode is None or mode[0] != self.path:
                continue
            if self.photon is not None and pid != self.photon:
                continue
            if pol is not None and mode[1] != pol:
                continue
            hits += 1
        if hits > 1:
            raise MultiPhotonCollision(
                f"selector {self} matches {hits} photons in one branch")
        return hits == 1


def photon_bs(state: HybridState, path_a: int, path_b: int) -> HybridState:
    """50:50 beam splitter between two spatial paths."""
    state.require_path(path_a)
    state.require_path(path_b)
    out = []
    for br in state.branches:
        involved = [i for i, m in enumerate(br.config)
                    if m is not None and m[0] in (path_a, path_b)]
        if len(involved) > 1:
            raise MultiPhotonCollision(
                f"two photons meet at the beam splitter on paths {path_a},{path_b}")
        if not involved:
            out.append(br)
            continue
        idx = involved[0]
        path, pol = br.config[idx]
        sign = 1.0 if path == path_a else -1.0
        for target, coef in (((path_a, pol), 1 / _SQ2), ((path_b, pol), sign / _SQ2)):
            cfg = list(br.config)
            cfg[idx] = target
            out.append(Branch(br.amp * coef, tuple(cfg), br.qubus))
    return replace(state, branches=tuple(out)).canonicalize(1e-12)


def _route(state: HybridState, transmit: Mapping[int, int], reflect: Mapping[int, int],
           coeffs) -> HybridState:
    inputs = set(transmit) | set(reflect)
    for p in inputs | set(transmit.values()) | set(reflect.values()):
        state.require_path(p)
    out = []
    for br in state.branches:
        terms = [(1 + 0j, br.config)]
        for idx, mode in enumerate(br.config):
            if mode is None or mode[0] not in inputs:
                continue
            path, pol = mode
            images = coeffs(path, pol, transmit, reflect)
            new_terms = []
            for amp, cfg in terms:
                for target, coef in images:
                    if coef == 0:
                        continue
                    c = list(cfg)
                    c[idx] = target
                    new_terms.append((amp * coef, tuple(c)))
            terms = new_terms
        for amp, cfg in terms:
            occupied = [m for m in cfg if m is not None]
            if len(set(occupied)) != len(occupied):
                raise MultiPhotonCollision("two photons routed onto one mode")
            out.append(Branch(br.amp * amp, cfg, br.qubus))
    return replace(state, branches=tuple(out)).canonicalize(1e-12)


def pbs_hv(state: HybridState, transmit: Mapping[int, int],
           reflect: Mapping[int, int]) -> HybridState:
    """Polarizing beam splitter: H follows `transmit`, V follows `reflect`.

    Both maps are keyed by input path; an occupied input without a route for
    its polarization is an error.
    """
    def coeffs(path, pol, transmit, reflect):
        table = transmit if pol == H else reflect
        if path not in table:
            raise UnknownPath(f"no route for polarization on input path {path}")
        return (((table[path], pol), 1 + 0j),)

    return _route(state, transmit, reflect, coeffs)


def pbs_diag(state: HybridState, transmit: Mapping[int, int],
             reflect: Mapping[int, int]) -> HybridState:
    """Diagonal-basis PBS: |+⟩ components transmit, |−⟩ components reflect.

    Internally rotates H/V into the ± basis, routes, and rotates back, so the
    state stays expressed over H/V modes.
    """
    def coeffs(path, pol, transmit, reflect):
        if path not in transmit or path not in reflect:
            raise UnknownPath(f"no ± routes for input path {path}")
        t, r = transmit[path], reflect[path]
        s = 1.0 if pol == H else -1.0
        # |H/V⟩ = (|+⟩ ± |−⟩)/√2; route and expand back to H/V.
        return (((t, H), 0.5), ((t, V), 0.5), ((r, H), s * 0.5), ((r, V), -s * 0.5))

    return _route(state, transmit, reflect, coeffs)


def phase_shift(state: HybridState, selector: ModeSelector, phi: float) -> HybridState:
    """Multiply branches whose selected mode is occupied by e^{iφ}."""
    state.require_path(selector.path)
    factor = cmath.exp(1j * phi)
    out = tuple(
        Branch(br.amp * factor, br.config, br.qubus)
        if selector.matches(state, br) else br
        for br in state.branches)
    return replace(state, branches=out)


def qubus_phase(state: HybridState, beam: int, phi: float) -> HybridState:
    """Unconditional phase-space rotation α → α·e^{iφ} of one beam."""
    state.require_beam(beam)
    factor = cmath.exp(1j * phi)
    out = tuple(
        Branch(br.amp, br.config,
               br.qubus[:beam] + (br.qubus[beam] * factor,) + br.qubus[beam + 1:])
        for br in state.branches)
    return replace(state, branches=out)


def qubus_bs(state: HybridState, beam_i: int, beam_j: int) -> HybridState:
    """50:50 BS on two qubus beams: (αi, αj) → ((αi−αj)/√2, (αi+αj)/√2)."""
    state.require_beam(beam_i)
    state.require_beam(beam_j)
    if beam_i == beam_j:
        raise PreconditionViolation("qubus BS needs two distinct beams")
    out = []
    for br in state.branches:
        q = list(br.qubus)
        ai, aj = q[beam_i], q[beam_j]
        q[beam_i] = (ai - aj) / _SQ2
        q[beam_j] = (ai + aj) / _SQ2
        out.append(Branch(br.amp, br.config, tuple(q)))
    return replace(state, branches=tuple(out))


def xpm(state: HybridState, selector: ModeSelector, beam: int, theta: float) -> HybridState:
    """Cross-phase modulation: rotate one beam by e^{iθ} in branches whose
    selected photon mode is occupied."""
    state.require_beam(beam)
    state.require_path(selector.path)
    factor = cmath.exp(1j * theta)
    out = []
    for br in state.branches:
        if selector.matches(state, br):
            q = br.qubus[:beam] + (br.qubus[beam] * factor,) + br.qubus[beam + 1:]
            out.append(Branch(br.amp, br.config, q))
        else:
            out.append(br)
    return replace(state, branches=tuple(out))


# -- declarative element instructions (shared by the circuit front end and
#    the truncated-Fock oracle, which implements its own matrix action) -----

@dataclass(frozen=True)
class PhotonBS:
    path_a: int
    path_b: int


@dataclass(frozen=True)
class PbsHV:
    transmit: tuple[tuple[int, int], ...]
    reflect: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class PbsDiag:
    transmit: tuple[tuple[int, int], ...]
    reflect: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class PhaseShift:
    selector: ModeSelector
    phi: float


@dataclass(frozen=True)
class QubusPhase:
    beam: int
    phi: float


@dataclass(frozen=True)
class QubusBS:
    beam_i: int
    beam_j: int


@dataclass(frozen=True)
class Xpm:
    selector: ModeSelector
    beam: int
    theta: float


Instruction = Union[PhotonBS, PbsHV, PbsDiag, PhaseShift, QubusPhase, QubusBS, Xpm]


def apply_instruction(state: HybridState, instr: Instruction) -> HybridState:
    if isinstance(instr, PhotonBS):
        return photon_bs(state, instr.path_a, instr.path_b)
    if isinstance(instr, PbsHV):
        return pbs_hv(state, dict(instr.transmit), dict(instr.reflect))
    if isinstance(instr, PbsDiag):
        return pbs_diag(state, dict(instr.transmit), dict(instr.reflect))
    if isinstance(instr, PhaseShift):
        return phase_shift(state, instr.selector, instr.phi)
    if isinstance(instr, QubusPhase):
        return qubus_phase(state, instr.beam, instr.phi)
    if isinstance(instr, QubusBS):
        return qubus_bs(state, instr.beam_i, instr.beam_j)
    if isinstance(instr, Xpm):
        return xpm(state, instr.selector, instr.beam, instr.theta)
    raise PreconditionViolation(f"unsupported instruction {instr!r}")
