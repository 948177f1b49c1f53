"""The attack catalog.

Best-pixel searches (A, B, C) invert one pixel sampled from each grid
cell, query the oracle for each candidate, and keep the inversions that
hurt the true-class confidence most. Checkerboard attacks (D, E, F)
perturb every pixel with band-limited alternating-sign noise in a single
shot. G chains D into B. FGSM walks an ascending epsilon grid along the
sign of the white-box loss gradient until the prediction flips, and the
escalation probe raises the noise magnitude round by round until the
image is misclassified.

Query accounting is part of each attack's contract:

    A: 57 (baseline + 56 candidates)
    B: 57 (56 candidates + the joint two-pixel image; the baseline is
       taken as an argument; measuring it here costs one more)
    C: 114 (two full A-style passes)
    D/E/F: 2 (baseline + perturbed)
    G: 59 (baseline + D image + B's 57, reusing the D measurement as
       B's baseline)
    FGSM: 1 baseline + one query per epsilon tried

All attacks are deterministic functions of (image, label, oracle
behavior, config). Candidate selection reduces by confidence then cell
index, never by arrival order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .image import (
    GrayscaleImage,
    PixelCoordinate,
    apply_checkerboard_noise,
    invert_pixel,
    partition_grid,
)
from .oracle import ClassProbabilities, Oracle, SoftmaxModel
from .report import conf_decrease
from .rng import Pcg32

KINDS = ("A", "B", "C", "D", "E", "F", "G", "FGSM", "ESCALATION")

KIND_SUMMARIES = {
    "A": "invert the best 1 of 56 sampled pixels (57 queries)",
    "B": "invert the best 2 of 56 sampled pixels jointly (57 queries)",
    "C": "greedy: best pixel, then best pixel again on the result (114 queries)",
    "D": "checkerboard noise, magnitudes 30-60 (2 queries)",
    "E": "checkerboard noise, magnitudes 60-90 (2 queries)",
    "F": "checkerboard noise, magnitudes 120-150 (2 queries)",
    "G": "dual attack: D then B on the result (59 queries)",
    "FGSM": "white-box gradient-sign search over an epsilon grid",
    "ESCALATION": "raise uniform checkerboard magnitude until misclassified",
}

CHECKERBOARD_BANDS = {"D": (30, 60), "E": (60, 90), "F": (120, 150)}

DEFAULT_FGSM_GRID = tuple(round(0.01 * k, 2) for k in range(1, 51))

# Grid geometry of the reference 168x192 layout: 7 cell columns, 8 rows.
GRID_COLUMNS = 7
GRID_ROWS = 8


@dataclass(frozen=True)
class AttackConfig:
    """Parameters shared by all attack kinds. The seed is mandatory."""

    kind: str
    seed: int
    cell_side: int | None = None
    magnitude_lo: int | None = None
    magnitude_hi: int | None = None
    fgsm_epsilon_grid: tuple[float, ...] = DEFAULT_FGSM_GRID
    escalation_step: int = 10
    max_magnitude: int = 250

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if (self.magnitude_lo is None) != (self.magnitude_hi is None):
            raise ValueError("magnitude_lo and magnitude_hi go together")
        if self.magnitude_lo is not None:
            if not (0 <= self.magnitude_lo <= self.magnitude_hi <= 255):
                raise ValueError(
                    f"invalid band [{self.magnitude_lo}, {self.magnitude_hi}]"
                )
            fixed = CHECKERBOARD_BANDS.get(self.kind)
            if fixed is not None and (self.magnitude_lo, self.magnitude_hi) != fixed:
                raise ValueError(
                    f"attack {self.kind} uses the fixed band {fixed}, "
                    f"got [{self.magnitude_lo}, {self.magnitude_hi}]"
                )
        if self.escalation_step < 1:
            raise ValueError(f"escalation step must be >= 1, got {self.escalation_step}")

    def band(self) -> tuple[int, int]:
        """Magnitude band for checkerboard-style kinds."""
        fixed = CHECKERBOARD_BANDS.get(self.kind)
        if fixed is not None:
            return fixed
        if self.magnitude_lo is not None:
            return (self.magnitude_lo, self.magnitude_hi)
        if self.kind == "G":
            return CHECKERBOARD_BANDS["D"]
        raise ValueError(f"attack kind {self.kind} has no magnitude band")

    def resolve_cell_side(self, image: GrayscaleImage) -> int:
        """Explicit cell side, or one derived to keep the 7x8 cell layout."""
        if self.cell_side is not None:
            side = self.cell_side
        elif image.width % GRID_COLUMNS == 0 and image.height % GRID_ROWS == 0:
            side = image.width // GRID_COLUMNS
        else:
            raise ValueError(
                f"no default cell side for {image.width}x{image.height}; "
                f"pass cell_side explicitly"
            )
        if side < 1 or image.width % side or image.height % side:
            raise ValueError(
                f"cell side {side} does not divide {image.width}x{image.height}"
            )
        return side


@dataclass(frozen=True)
class AttackOutcome:
    """One attack run: the perturbed image plus everything the metrics need."""

    kind: str
    original: GrayscaleImage
    perturbed: GrayscaleImage
    true_label: int
    baseline_probs: ClassProbabilities
    attacked_probs: ClassProbabilities
    queries_used: int
    pixels_changed: int
    changed_coordinates: tuple[PixelCoordinate, ...]
    misclassified: bool
    epsilon: float | None = None


@dataclass(frozen=True)
class CandidateEvaluation:
    """Effect of inverting one sampled pixel on the true-class confidence."""

    coordinate: PixelCoordinate
    cell_index: int
    resulting_actual_confidence: float
    probs: ClassProbabilities


@dataclass(frozen=True)
class EscalationRound:
    """One escalation step: the band used and what it did."""

    magnitude: int
    conf_decrease: float
    misclassified: bool


def _outcome(
    kind: str,
    original: GrayscaleImage,
    perturbed: GrayscaleImage,
    true_label: int,
    baseline: ClassProbabilities,
    attacked: ClassProbabilities,
    queries: int,
    changed: tuple[PixelCoordinate, ...] = (),
    epsilon: float | None = None,
) -> AttackOutcome:
    diff = int(np.count_nonzero(original.to_array() != perturbed.to_array()))
    return AttackOutcome(
        kind=kind,
        original=original,
        perturbed=perturbed,
        true_label=true_label,
        baseline_probs=baseline,
        attacked_probs=attacked,
        queries_used=queries,
        pixels_changed=diff,
        changed_coordinates=changed,
        misclassified=attacked.argmax() != true_label,
        epsilon=epsilon,
    )


def sample_candidates(
    image: GrayscaleImage, cell_side: int, rng: Pcg32
) -> list[PixelCoordinate]:
    """One uniformly placed pixel per grid cell, in cell row-major order."""
    cells = partition_grid(image, cell_side)
    out = []
    for cell in cells:
        dx = rng.randbelow(cell.side)
        dy = rng.randbelow(cell.side)
        out.append(PixelCoordinate(cell.origin.x + dx, cell.origin.y + dy))
    return out


def _evaluate_candidates(
    oracle: Oracle,
    image: GrayscaleImage,
    true_label: int,
    candidates: list[PixelCoordinate],
) -> list[CandidateEvaluation]:
    """Query the oracle once per single-pixel inversion."""
    evals = []
    for cell_index, coord in enumerate(candidates):
        probs = oracle.classify(invert_pixel(image, coord))
        evals.append(
            CandidateEvaluation(coord, cell_index, probs[true_label], probs)
        )
    return evals


def _ranked(evals: list[CandidateEvaluation]) -> list[CandidateEvaluation]:
    """Lowest resulting confidence first; ties go to the lowest cell index."""
    return sorted(evals, key=lambda e: (e.resulting_actual_confidence, e.cell_index))


def attack_a(
    oracle: Oracle, image: GrayscaleImage, true_label: int, cfg: AttackConfig
) -> AttackOutcome:
    """Invert the single sampled pixel that hurts the true class most."""
    rng = Pcg32(cfg.seed)
    side = cfg.resolve_cell_side(image)
    baseline = oracle.classify(image)
    evals = _evaluate_candidates(
        oracle, image, true_label, sample_candidates(image, side, rng)
    )
    best = _ranked(evals)[0]
    return _outcome(
        "A",
        image,
        invert_pixel(image, best.coordinate),
        true_label,
        baseline,
        best.probs,
        queries=1 + len(evals),
        changed=(best.coordinate,),
    )


def attack_b(
    oracle: Oracle,
    image: GrayscaleImage,
    true_label: int,
    cfg: AttackConfig,
    baseline: ClassProbabilities | None = None,
) -> AttackOutcome:
    """Invert the two individually best sampled pixels jointly.

    Candidates are ranked one at a time, the top two are applied together,
    and the joint image is measured with one final query: 56 + 1 = 57
    queries when the caller supplies the baseline it already measured.
    Without one, the attack spends an extra query on it.
    """
    rng = Pcg32(cfg.seed)
    side = cfg.resolve_cell_side(image)
    queries = 0
    if baseline is None:
        baseline = oracle.classify(image)
        queries += 1
    candidates = sample_candidates(image, side, rng)
    if len(candidates) < 2:
        raise ValueError("the grid must yield at least 2 cells to pick 2 pixels")
    evals = _evaluate_candidates(oracle, image, true_label, candidates)
    queries += len(evals)
    first, second = _ranked(evals)[:2]
    perturbed = invert_pixel(invert_pixel(image, first.coordinate), second.coordinate)
    attacked = oracle.classify(perturbed)
    queries += 1
    return _outcome(
        "B",
        image,
        perturbed,
        true_label,
        baseline,
        attacked,
        queries,
        changed=(first.coordinate, second.coordinate),
    )


def attack_c(
    oracle: Oracle, image: GrayscaleImage, true_label: int, cfg: AttackConfig
) -> AttackOutcome:
    """Greedy two-round best-pixel attack.

    Round one is attack A. Round two re-measures the round-one image,
    samples fresh candidates from the continuing RNG stream, and applies
    the best of them unconditionally - even if none improves.
    """
    rng = Pcg32(cfg.seed)
    side = cfg.resolve_cell_side(image)
    baseline = oracle.classify(image)
    evals1 = _evaluate_candidates(
        oracle, image, true_label, sample_candidates(image, side, rng)
    )
    best1 = _ranked(evals1)[0]
    round1 = invert_pixel(image, best1.coordinate)

    oracle.classify(round1)  # round-two reference measurement
    evals2 = _evaluate_candidates(
        oracle, round1, true_label, sample_candidates(round1, side, rng)
    )
    best2 = _ranked(evals2)[0]
    perturbed = invert_pixel(round1, best2.coordinate)
    return _outcome(
        "C",
        image,
        perturbed,
        true_label,
        baseline,
        best2.probs,
        queries=2 + len(evals1) + len(evals2),
        changed=(best1.coordinate, best2.coordinate),
    )


def attack_checkerboard(
    oracle: Oracle,
    image: GrayscaleImage,
    true_label: int,
    cfg: AttackConfig,
    band: tuple[int, int] | None = None,
) -> AttackOutcome:
    """Single-shot alternating-sign noise over all pixels (kinds D, E, F).

    Exactly two queries: the clean baseline and the perturbed image. No
    feedback is used, which is what makes this family transferable in
    principle to oracles that expose nothing but labels.
    """
    lo, hi = band if band is not None else cfg.band()
    rng = Pcg32(cfg.seed)
    baseline = oracle.classify(image)
    perturbed = apply_checkerboard_noise(image, lo, hi, rng)
    attacked = oracle.classify(perturbed)
    return _outcome(cfg.kind, image, perturbed, true_label, baseline, attacked, 2)


def attack_g(
    oracle: Oracle, image: GrayscaleImage, true_label: int, cfg: AttackConfig
) -> AttackOutcome:
    """Dual attack: checkerboard D, then B on the noisy image.

    The classification of the D image doubles as B's baseline, so the
    total is 1 + 1 + 57 = 59 queries. Both phases seed their own RNG from
    cfg.seed, which makes running D and B by hand with the same seed
    reproduce this output exactly.
    """
    lo, hi = cfg.band()
    baseline = oracle.classify(image)
    noisy = apply_checkerboard_noise(image, lo, hi, Pcg32(cfg.seed))
    noisy_probs = oracle.classify(noisy)
    inner = attack_b(
        oracle, noisy, true_label, replace(cfg, kind="B"), baseline=noisy_probs
    )
    return _outcome(
        "G",
        image,
        inner.perturbed,
        true_label,
        baseline,
        inner.attacked_probs,
        queries=2 + inner.queries_used,
        changed=inner.changed_coordinates,
    )


def attack_fgsm(
    model: SoftmaxModel, image: GrayscaleImage, true_label: int, cfg: AttackConfig
) -> AttackOutcome:
    """Gradient-sign attack with a breaking-point search over epsilon.

    The perturbation direction is sign(dLoss/dInput), with sign(0) = 0.
    Epsilons are tried in ascending order; each candidate is the original
    plus round(eps * 255) in that direction, clamped. The first epsilon
    that flips the prediction wins; if none does, the largest is returned.
    Requires white-box access, so only the built-in model qualifies.
    """
    grid = cfg.fgsm_epsilon_grid
    if not grid:
        raise ValueError("epsilon grid is empty")
    if any(e < 0 for e in grid) or any(a >= b for a, b in zip(grid, grid[1:])):
        raise ValueError("epsilon grid must be ascending and non-negative")
    baseline = model.classify(image)
    direction = np.sign(model.loss_input_gradient(image, true_label)).astype(np.int64)
    base = image.to_array().astype(np.int64)
    queries = 1
    perturbed, attacked, chosen = image, baseline, None
    for eps in grid:
        delta = int(round(eps * 255.0))
        candidate = GrayscaleImage.from_array(np.clip(base + delta * direction, 0, 255))
        probs = model.classify(candidate)
        queries += 1
        perturbed, attacked, chosen = candidate, probs, eps
        if probs.argmax() != true_label:
            break
    return _outcome(
        "FGSM", image, perturbed, true_label, baseline, attacked, queries,
        epsilon=chosen,
    )


def _escalate(
    oracle: Oracle,
    image: GrayscaleImage,
    true_label: int,
    step: int,
    max_magnitude: int,
    rng: Pcg32,
) -> tuple[ClassProbabilities, list[EscalationRound], GrayscaleImage, ClassProbabilities]:
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    baseline = oracle.classify(image)
    base_conf = baseline[true_label]
    trace: list[EscalationRound] = []
    final_image, final_probs = image, baseline
    magnitude = step
    while magnitude <= max_magnitude:
        perturbed = apply_checkerboard_noise(image, magnitude, magnitude, rng)
        probs = oracle.classify(perturbed)
        missed = probs.argmax() != true_label
        trace.append(
            EscalationRound(magnitude, conf_decrease(base_conf, probs[true_label]), missed)
        )
        final_image, final_probs = perturbed, probs
        if missed:
            break
        magnitude += step
    return baseline, trace, final_image, final_probs


def escalate_until_misclassified(
    oracle: Oracle,
    image: GrayscaleImage,
    true_label: int,
    step: int,
    max_magnitude: int,
    rng: Pcg32,
) -> list[EscalationRound]:
    """Raise uniform checkerboard magnitude until the prediction flips.

    Rounds use bands [m, m] for m = step, 2*step, ... up to max_magnitude,
    each with fresh noise drawn from the continuing RNG stream. Stops at
    the first misclassification and returns the whole trace.
    """
    _, trace, _, _ = _escalate(oracle, image, true_label, step, max_magnitude, rng)
    return trace


def run_attack(
    oracle: Oracle, image: GrayscaleImage, true_label: int, cfg: AttackConfig
) -> AttackOutcome:
    """Dispatch one attack by cfg.kind and return its outcome."""
    if cfg.kind == "A":
        return attack_a(oracle, image, true_label, cfg)
    if cfg.kind == "B":
        baseline = oracle.classify(image)
        return attack_b(oracle, image, true_label, cfg, baseline=baseline)
    if cfg.kind == "C":
        return attack_c(oracle, image, true_label, cfg)
    if cfg.kind in CHECKERBOARD_BANDS:
        return attack_checkerboard(oracle, image, true_label, cfg)
    if cfg.kind == "G":
        return attack_g(oracle, image, true_label, cfg)
    if cfg.kind == "FGSM":
        if not isinstance(oracle, SoftmaxModel):
            raise ValueError("FGSM needs white-box access to the built-in model")
        return attack_fgsm(oracle, image, true_label, cfg)
    if cfg.kind == "ESCALATION":
        # Materialize the stopping round as an outcome so escalation flows
        # through the same reporting pipeline as everything else.
        baseline, trace, final_image, final_probs = _escalate(
            oracle, image, true_label, cfg.escalation_step, cfg.max_magnitude,
            Pcg32(cfg.seed),
        )
        return _outcome(
            "ESCALATION", image, final_image, true_label, baseline, final_probs,
            queries=1 + len(trace),
        )
    raise ValueError(f"unknown attack kind {cfg.kind!r}")
