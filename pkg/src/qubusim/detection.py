"""Measurement layer: Fock projection of a qubus beam and the indirect
photon-number (QND) readout with a realistic detector POVM.

The QND readout chain is: attach probe beams |γ⟩|γ⟩, rotate the first probe
by e^{inθp} per signal Fock component n, interfere the probes on a 50:50 BS
and detect the difference mode |γ(e^{inθp}−1)/√2⟩ with a detector of quantum
efficiency η whose diagonal POVM elements are

    Π0      = Σ (1−η)^m |m⟩⟨m|                      (no response),
    Π_{n_k} = Σ_{m=n_k}^{n_k'} [1 − (1−η)^m] |m⟩⟨m|  (k-th Poisson peak),
    Π_E     = 1 − Π0 − Σ_k Π_{n_k}                   (ambiguous response).

Outcome probabilities are computed exactly (including interference between
non-orthogonal branches through the discarded probe modes).  Post-measurement
states are kept pure by weighting each branch with the root of its POVM
response, which is exact whenever branches with distinct signal amplitudes
are orthogonal on the photon side — true in every gate pipeline here.

Direct Fock projection removes the measured beam from the registry (a Fock
state is not representable by a coherent label).  By default the collapse is
the literal Born rule; gates opt into the idealized pointer collapse where a
zero-photon outcome selects exactly the zero-amplitude branches, the reading
under which the feed-forward corrections restore the target state exactly
(see `vacuum_pointer`).  The weight this idealization reassigns is precisely
the misidentification probability returned by `detection_error_exact`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BinsOverlap,
    CutoffTooSmall,
    PreconditionViolation,
)
from .state import Branch, HybridState, coherent_overlap

VACUUM = "vacuum"
PEAK = "peak"
AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class DetectorParams:
    """Detector model: quantum efficiency η, probe amplitude γ and probe
    cross-phase step θp."""

    eta: float
    gamma: float
    theta_p: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise PreconditionViolation("quantum efficiency must lie in [0, 1]")


@dataclass(frozen=True)
class PovmBins:
    """Fock ranges of the difference-mode detector backing each outcome.

    `bins` holds (k, n_k, n_k') with disjoint increasing ranges; k = 0 is the
    vacuum window around the dark response, bins k ≥ 1 straddle the Poisson
    mean |γ(e^{ikθp}−1)/√2|² = |γ|²(1−cos kθp).
    """

    gamma: float
    theta_p: float
    bins: tuple[tuple[int, int, int], ...]

    @property
    def k_max(self) -> int:
        return self.bins[-1][0]


@dataclass(frozen=True)
class PovmOutcome:
    tag: str                    # VACUUM, PEAK or AMBIGUOUS
    k: Optional[int]            # peak index for PEAK outcomes
    probability: float

    @property
    def inferred_n(self) -> Optional[int]:
        if self.tag == VACUUM:
            return 0
        if self.tag == PEAK:
            return self.k
        return None


# -- Poisson utilities --------------------------------------------------------

def poisson_pmf(n: int, mean: float) -> float:
    if mean <= 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-mean + n * math.log(mean) - math.lgamma(n + 1))


def poisson_cutoff(mean: float, tail: float) -> int:
    """Smallest N with P(n > N) < tail (conservative upward scan)."""
    if mean <= 0:
        return 0
    n = 0
    cum = 0.0
    limit = int(mean + 30 * math.sqrt(mean) + 60)
    while n <= limit:
        cum += poisson_pmf(n, mean)
        if 1.0 - cum < tail and n >= mean:
            return n
        n += 1
    return limit


def _fock_amp(beta: complex, n: int) -> complex:
    """⟨n|β⟩ = e^{−|β|²/2} βⁿ/√n!, evaluated stably for large |β|."""
    r = abs(beta)
    if r == 0:
        return 1.0 + 0j if n == 0 else 0j
    mag = math.exp(-0.5 * r * r + n * math.log(r) - 0.5 * math.lgamma(n + 1))
    return mag * cmath.exp(1j * n * cmath.phase(beta))


# -- direct Fock projection ---------------------------------------------------

def _fock_collapse(state: HybridState, beam: int, n: int,
                   vacuum_pointer: bool, zero_tol: float = 1e-9):
    """Unnormalized post-state for outcome n plus its (honest) probability."""
    projected = state.remove_beam_weighted(
        beam, lambda br: _fock_amp(br.qubus[beam], n))
    prob = projected.inner(projected).real
    post = projected
    if vacuum_pointer and n == 0 and any(
            abs(br.qubus[beam]) <= zero_tol for br in state.branches):
        post = state.remove_beam_weighted(
            beam, lambda br: _fock_amp(br.qubus[beam], 0)
            if abs(br.qubus[beam]) <= zero_tol else 0j)
    return post, prob


def enumerate_fock_outcomes(state: HybridState, beam: int,
                            cutoff: Optional[int] = None,
                            tail: float = 1e-12,
                            vacuum_pointer: bool = False,
                            ) -> list[tuple[int, float, HybridState]]:
    """Project a beam onto |n⟩⟨n| for every n up to the Poisson tail.

    Returns (n, probability, normalized post-state) triples.  The measured
    beam leaves the registry; probabilities are the squared norms of the
    projected states and sum to 1 up to the truncation tail.
    """
    state.require_beam(beam)
    means = [abs(br.qubus[beam]) ** 2 for br in state.branches]
    needed = max((poisson_cutoff(m, tail) for m in means), default=0)
    n_max = needed if cutoff is None else cutoff
    if n_max < needed and any(
            sum(poisson_pmf(n, m) for n in range(n_max + 1)) < 1 - 1e-9
            for m in means):
        raise CutoffTooSmall(
            f"cutoff {n_max} leaves a Poisson tail above 1e-9 (need {needed})")
    out = []
    for n in range(n_max + 1):
        post, prob = _fock_collapse(state, beam, n, vacuum_pointer)
        if prob <= 0:
            continue
        out.append((n, prob, post.scaled(1 / post.norm()).canonicalize(1e-12)))
    return out


def draw_index(probabilities: Sequence[float], rng: np.random.Generator) -> int:
    """Inverse-CDF draw; deterministic for a fixed generator state."""
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probabilities):
        acc += p
        if u < acc:
            return i
    return len(probabilities) - 1


def sample_fock(state: HybridState, beam: int, rng: np.random.Generator,
                tail: float = 1e-12, vacuum_pointer: bool = False,
                ) -> tuple[int, HybridState]:
    """Draw one Fock outcome from the exact distribution; the post-state is
    identical to the enumerated one for that n."""
    outcomes = enumerate_fock_outcomes(state, beam, tail=tail,
                                       vacuum_pointer=vacuum_pointer)
    i = draw_index([p for _, p, _ in outcomes], rng)
    n, _, post = outcomes[i]
    return n, post


# -- POVM construction --------------------------------------------------------

def peak_mean(det: DetectorParams, k: int) -> float:
    """Difference-mode Poisson mean |γ|²(1−cos kθp) for signal Fock k."""
    return abs(det.gamma) ** 2 * (1.0 - math.cos(k * det.theta_p))


def povm_bins(det: DetectorParams, k_max: int) -> PovmBins:
    """Place bin boundaries at midpoints between adjacent Poisson means.

    Raises BinsOverlap when adjacent means are closer than the sum of three
    standard deviations (√mean each) — the negligible-overlap assumption
    behind the binning would then be violated.
    """
    if k_max < 1:
        raise PreconditionViolation("k_max must be at least 1")
    if (k_max + 1) * abs(det.theta_p) > math.pi:
        raise BinsOverlap(
            "probe phase wraps beyond π; Poisson means are no longer monotone")
    means = [peak_mean(det, k) for k in range(k_max + 2)]
    for k in range(k_max + 1):
        gap = means[k + 1] - means[k]
        if gap < 3.0 * (math.sqrt(means[k]) + math.sqrt(means[k + 1])):
            raise BinsOverlap(
                f"Poisson peaks {k} and {k + 1} overlap beyond the 3σ guard")
    bounds = [0.5 * (means[k] + means[k + 1]) for k in range(k_max + 1)]
    bins = [(0, 0, int(bounds[0]))]
    for k in range(1, k_max + 1):
        lo = int(bounds[k - 1]) + 1
        hi = int(bounds[k])
        bins.append((k, lo, hi))
    return PovmBins(gamma=det.gamma, theta_p=det.theta_p, bins=tuple(bins))


def povm_diagonals(det: DetectorParams, bins: PovmBins, dim: int) -> dict:
    """Diagonal entries of Π0, every Π_{n_k} and Π_E on a truncated space."""
    m = np.arange(dim)
    pi0 = (1.0 - det.eta) ** m
    peaks = {}
    for k, lo, hi in bins.bins:
        if k == 0:
            continue
        diag = np.zeros(dim)
        sel = (m >= lo) & (m <= min(hi, dim - 1))
        diag[sel] = 1.0 - (1.0 - det.eta) ** m[sel]
        peaks[k] = diag
    pie = 1.0 - pi0 - sum(peaks.values())
    return {"pi0": pi0, "peaks": peaks, "pie": pie}


def _response_weights(det: DetectorParams, bins: PovmBins, probe_mean: float) -> dict:
    """P(outcome | difference mode in a coherent state of mean `probe_mean`)."""
    w = {(VACUUM, None): math.exp(-det.eta * probe_mean)}
    total = w[(VACUUM, None)]
    for k, lo, hi in bins.bins:
        if k == 0:
            continue
        if probe_mean > 0:
            sigma = math.sqrt(probe_mean)
            lo_eff = max(lo, int(probe_mean - 40 * sigma - 10))
            hi_eff = min(hi, int(probe_mean + 40 * sigma + 10))
        else:
            lo_eff, hi_eff = lo, hi
        s = 0.0
        for mm in range(lo_eff, hi_eff + 1):
            s += poisson_pmf(mm, probe_mean) * (1.0 - (1.0 - det.eta) ** mm)
        w[(PEAK, k)] = s
        total += s
    w[(AMBIGUOUS, None)] = max(0.0, 1.0 - total)
    return w


def response_matrix(det: DetectorParams, bins: PovmBins, n_max: int) -> dict:
    """P(outcome | signal Fock n) for n = 0..n_max."""
    table = {}
    for n in range(n_max + 1):
        table[n] = _response_weights(det, bins, peak_mean(det, n))
    return table


# -- the QND module -----------------------------------------------------------

def _qnd_analysis(state: HybridState, beam: int, det: DetectorParams,
                  k_max: Optional[int], tail: float):
    """Shared outcome-probability analysis for the QND readout.

    Probabilities are exact: cross terms between branches that are not
    orthogonal in the photon/other-beam sector are carried through the
    detector response.
    """
    state.require_beam(beam)
    means = [abs(br.qubus[beam]) ** 2 for br in state.branches]
    n_max = max((poisson_cutoff(m, tail) for m in means), default=0)
    if k_max is None:
        k_max = max(n_max, 1)
    bins = povm_bins(det, k_max)
    resp = response_matrix(det, bins, n_max)
    outcomes = [(VACUUM, None)] + [(PEAK, k) for k in range(1, k_max + 1)] \
        + [(AMBIGUOUS, None)]
    probs = {o: 0.0 for o in outcomes}
    rest = [Branch(br.amp, br.config, br.qubus[:beam] + br.qubus[beam + 1:])
            for br in state.branches]
    for i, bi in enumerate(state.branches):
        for j, bj in enumerate(state.branches):
            if rest[i].config != rest[j].config:
                continue
            ov = rest[j].amp.conjugate() * rest[i].amp
            for qa, qb in zip(rest[j].qubus, rest[i].qubus):
                ov *= coherent_overlap(qa, qb)
            if ov == 0:
                continue
            for o in outcomes:
                s = 0j
                for n in range(n_max + 1):
                    s += (_fock_amp(bi.qubus[beam], n)
                          * _fock_amp(bj.qubus[beam], n).conjugate() * resp[n][o])
                probs[o] += (ov * s).real
    return bins, resp, n_max, outcomes, probs


def qnd_detect(state: HybridState, beam: int, det: DetectorParams,
               mode: str = "enumerate", rng: Optional[np.random.Generator] = None,
               k_max: Optional[int] = None, tail: float = 1e-12):
    """Indirect photon-number readout of one beam.

    Returns a list of (PovmOutcome, post-state) pairs covering the full
    outcome alphabet {vacuum, peak k, ambiguous} (probabilities sum to 1), or
    a single sampled pair for mode="sample".  The measured beam is removed;
    each branch is reweighted by the root of its POVM response.
    """
    _, resp, n_max, outcomes, probs = _qnd_analysis(state, beam, det, k_max, tail)

    def branch_weight(br: Branch, o) -> float:
        total = 0.0
        for n in range(n_max + 1):
            total += abs(_fock_amp(br.qubus[beam], n)) ** 2 * resp[n][o]
        return math.sqrt(max(total, 0.0))

    results = []
    for o in outcomes:
        p = max(probs[o], 0.0)
        outcome = PovmOutcome(tag=o[0], k=o[1], probability=p)
        if p <= 1e-300:
            results.append((outcome, None))
            continue
        post = state.remove_beam_weighted(beam, lambda br, o=o: branch_weight(br, o))
        results.append((outcome, post.scaled(1 / post.norm()).canonicalize(1e-12)))

    if mode == "enumerate":
        return results
    if mode == "sample":
        if rng is None:
            raise PreconditionViolation("sampling requires a random generator")
        i = draw_index([oc.probability for oc, _ in results], rng)
        return results[i]
    raise PreconditionViolation(f"unknown mode {mode!r}")


def qnd_gate_outcomes(state: HybridState, beam: int, det: DetectorParams,
                      k_max: Optional[int] = None, tail: float = 1e-12):
    """QND readout as used inside a gate: (inferred n, label, probability,
    post-state) tuples.

    Probabilities come from the exact POVM analysis; the post-state is the
    collapse conditioned on the *inferred* photon number (vacuum → the
    zero-amplitude pointer component, peak k → the Fock-k weighting), which
    is what the classically fed-forward corrections act on.  Ambiguous
    records carry the uncorrectable response-weighted state and n = None.
    """
    _, resp, n_max, outcomes, probs = _qnd_analysis(state, beam, det, k_max, tail)
    results = []
    for o in outcomes:
        p = max(probs[o], 0.0)
        if p <= 1e-300:
            continue
        tag, k = o
        if tag == VACUUM:
            n_hat = 0
            post, _ = _fock_collapse(state, beam, 0, vacuum_pointer=True)
            label = ("qnd", "vacuum")
        elif tag == PEAK:
            n_hat = k
            post, _ = _fock_collapse(state, beam, k, vacuum_pointer=False)
            label = ("qnd_peak", k)
        else:
            n_hat = None

            def w_amb(br: Branch) -> float:
                total = 0.0
                for n in range(n_max + 1):
                    total += abs(_fock_amp(br.qubus[beam], n)) ** 2 * resp[n][o]
                return math.sqrt(max(total, 0.0))

            post = state.remove_beam_weighted(beam, w_amb)
            label = ("qnd", "ambiguous")
        norm = post.norm()
        if norm == 0:
            continue
        results.append((n_hat, label, p, post.scaled(1 / norm).canonicalize(1e-12)))
    return results


def misclassification_probability(det: DetectorParams, signal_mean: float,
                                  k_max: Optional[int] = None,
                                  tail: float = 1e-12) -> float:
    """P(readout label ≠ true Fock n) for a coherent signal of given mean.

    The correct label for n = 0 is the vacuum response and for n ≥ 1 the
    k = n peak; residual Poisson mass beyond k_max counts as error.
    """
    n_max = poisson_cutoff(signal_mean, tail)
    if k_max is None:
        k_max = max(n_max, 1)
    bins = povm_bins(det, k_max)
    resp = response_matrix(det, bins, n_max)
    correct = 0.0
    for n in range(n_max + 1):
        want = (VACUUM, None) if n == 0 else (PEAK, n)
        if n > k_max:
            continue
        correct += poisson_pmf(n, signal_mean) * resp[n][want]
    return 1.0 - correct


def simulate_readout(det: DetectorParams, signal_mean: float, shots: int,
                     rng: np.random.Generator, k_max: Optional[int] = None,
                     tail: float = 1e-12) -> list[tuple[int, str, Optional[int]]]:
    """Monte-Carlo (true n, outcome tag, outcome k) triples for a coherent
    signal: latent Fock draws followed by detector responses."""
    n_max = poisson_cutoff(signal_mean, tail)
    if k_max is None:
        k_max = max(n_max, 1)
    bins = povm_bins(det, k_max)
    resp = response_matrix(det, bins, n_max)
    pois = [poisson_pmf(n, signal_mean) for n in range(n_max + 1)]
    outcome_lists = {n: list(resp[n].items()) for n in range(n_max + 1)}
    records = []
    for _ in range(shots):
        n = draw_index(pois, rng)
        keys = [k for k, _ in outcome_lists[n]]
        ps = [p for _, p in outcome_lists[n]]
        o = keys[draw_index(ps, rng)]
        records.append((n, o[0], o[1]))
    return records


# -- detection-error formulas ---------------------------------------------------

def signal_mean_from_gate(alpha: float, theta: float) -> float:
    """|β|² of the measured qubus component, with β = i√2·α·sinθ."""
    return 2.0 * (alpha * math.sin(theta)) ** 2


def detection_error_exact(alpha: float, theta: float, det: DetectorParams,
                          tail: float = 1e-15) -> float:
    """Probability that a nonzero-n signal is reported as vacuum.

    Exact summation of Σ_{n≥1} Pois(n; |β|²) · e^{−η|γ|²(1−cos nθp)} with
    the Poisson tail below `tail`.  The n = 0 term is a correct
    classification, not an error, so it is excluded; θ = 0 therefore gives 0.
    """
    mean = signal_mean_from_gate(alpha, theta)
    if mean == 0:
        return 0.0
    n_max = poisson_cutoff(mean, tail)
    total = 0.0
    for n in range(1, n_max + 1):
        total += poisson_pmf(n, mean) * math.exp(-det.eta * peak_mean(det, n))
    return total


def vacuum_response_probability(alpha: float, theta: float, det: DetectorParams,
                                tail: float = 1e-15) -> float:
    """Σ_{n≥0} Pois(n; |β|²) · e^{−η|γ|²(1−cos nθp)}: the total probability
    that the detector stays silent on the ±β signal (the n = 0 term, a
    correct classification, included)."""
    mean = signal_mean_from_gate(alpha, theta)
    n_max = poisson_cutoff(mean, tail)
    total = 0.0
    for n in range(n_max + 1):
        total += poisson_pmf(n, mean) * math.exp(-det.eta * peak_mean(det, n))
    return total


def detection_error_eq11(alpha: float, theta: float, det: DetectorParams) -> float:
    """Closed-form approximation exp{−2(1−e^{−ηγ²θp²/2})·α²sin²θ}.

    Degenerates to 1 at θ = 0 (the exact error is 0 there); useful only in
    the near-deterministic regime |α|sinθ ≫ 1.
    """
    inner = 1.0 - math.exp(-0.5 * det.eta * det.gamma ** 2 * det.theta_p ** 2)
    return math.exp(-2.0 * inner * (alpha * math.sin(theta)) ** 2)
