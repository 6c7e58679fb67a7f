"""Trust assessment: abnormal-packet detection, malicious scoring,
adaptive banning, and confusion-rate evaluation.

Each unit's malicious score is accumulating tampering evidence minus a
weighted credit for completed service minus a time decay shared by all
units.  A unit is banned the moment its score exceeds the global
threshold; banned units drop out of association until the ledger is
reset.  The threshold adapts once per episode from that episode's
banning outcomes.

Information flow: nothing in the scoring path reads ground-truth
malicious labels.  Labels enter only through
:func:`confusion_from_sets`, the evaluator that grades the ban set, and
the resulting rates feed threshold adaptation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import TrustConfig


@dataclass(frozen=True)
class ConfusionCounts:
    """Ban decisions graded against ground truth."""

    tp: int  # malicious and banned
    tn: int  # honest and spared
    fp: int  # honest but banned
    fn: int  # malicious but spared

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)


def detect_abnormal(abnormal_count: int, threshold: int) -> int:
    """1 when the abnormal-packet count strictly exceeds the threshold."""
    if abnormal_count < 0 or threshold < 0:
        raise ValueError("counts must be >= 0")
    return 1 if abnormal_count > threshold else 0


def confusion_from_sets(banned, malicious_flags) -> ConfusionCounts:
    """Grade a ban set against the ground-truth malicious flags."""
    banned = set(banned)
    tp = tn = fp = fn = 0
    for rsu_id, is_malicious in enumerate(malicious_flags):
        if rsu_id in banned:
            if is_malicious:
                tp += 1
            else:
                fp += 1
        else:
            if is_malicious:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def confusion_rates(counts: ConfusionCounts) -> tuple[float, float]:
    """(false banning rate, banning rate); zero denominators yield 0."""
    fbr = counts.fp / (counts.fp + counts.tn) if (counts.fp + counts.tn) else 0.0
    br = counts.tp / (counts.tp + counts.fn) if (counts.tp + counts.fn) else 0.0
    return fbr, br


class TrustEngine:
    """Single-owner ledger of per-unit trust state plus the ban threshold.

    ``reset_each_episode`` controls whether per-unit evidence carries
    across episodes; the threshold always persists for the lifetime of
    the engine.
    """

    def __init__(self, rsu_count: int, params: TrustConfig,
                 abnormal_threshold: int = 2):
        params.validate()
        self.params = params
        self.rsu_count = rsu_count
        self.abnormal_threshold = abnormal_threshold
        self.threshold = params.initial_threshold
        self._banned: set[int] = set()
        self._reset_evidence()

    def _reset_evidence(self) -> None:
        n = self.rsu_count
        self.detections = [0] * n            # cumulative indicator sum per unit
        self.weighted_completion = [0.0] * n  # cumulative connections * rate
        self.completions_ok = [0] * n
        self.completions_total = [0] * n
        self.slot = 0                         # 1-based after first observe_slot
        self.decay_sum = 0                    # sum of slot indices so far

    # -- lifecycle -----------------------------------------------------------

    def start_episode(self) -> None:
        self._banned = set()
        if self.params.reset_each_episode:
            self._reset_evidence()

    @property
    def banned(self) -> frozenset[int]:
        return frozenset(self._banned)

    # -- per-slot ledger updates ----------------------------------------------

    def record_completion(self, rsu_id: int, total_latency: float,
                          latency_threshold: float) -> None:
        """Count one served migration; on-time completions earn credit."""
        self.completions_total[rsu_id] += 1
        if total_latency <= latency_threshold:
            self.completions_ok[rsu_id] += 1

    def completion_rate(self, rsu_id: int) -> float:
        """Share of on-time completions; 0 before any history exists."""
        total = self.completions_total[rsu_id]
        return self.completions_ok[rsu_id] / total if total else 0.0

    def malicious_score(self, rsu_id: int) -> float:
        """Evidence minus service credit minus the shared time decay."""
        p = self.params
        return (
            p.detection_weight * self.detections[rsu_id]
            - p.completion_weight * self.weighted_completion[rsu_id]
            - p.decay_weight * self.decay_sum
        )

    def observe_slot(self, abnormal_counts, completions, connection_counts) -> None:
        """Fold one slot of evidence into the ledger and apply the ban rule.

        ``completions`` is a list of (rsu_id, total_latency, threshold)
        for every migration served this slot; ``connection_counts`` is
        per-unit served connections.
        """
        self.slot += 1
        self.decay_sum += self.slot
        for rsu_id, latency, threshold in completions:
            self.record_completion(rsu_id, latency, threshold)
        for rsu_id in range(self.rsu_count):
            self.detections[rsu_id] += detect_abnormal(
                int(abnormal_counts[rsu_id]), self.abnormal_threshold
            )
            self.weighted_completion[rsu_id] += (
                connection_counts[rsu_id] * self.completion_rate(rsu_id)
            )
        for rsu_id in range(self.rsu_count):
            if rsu_id not in self._banned and self.malicious_score(rsu_id) > self.threshold:
                self._banned.add(rsu_id)

    # -- per-episode threshold adaptation --------------------------------------

    def adapt_threshold(self, confusion: ConfusionCounts,
                        mode: str | None = None) -> float:
        """Move the ban threshold based on the episode's outcomes.

        ``corrected`` (default) loosens when too few malicious units get
        banned and tightens when honest units get banned too often,
        consistent with banning above the threshold.  ``paper_verbatim``
        applies the printed rule with the opposite directions.
        """
        mode = self.params.mode if mode is None else mode
        fbr, br = confusion_rates(confusion)
        step = self.params.adapt_step
        if mode == "corrected":
            if br <= self.params.br_target:
                self.threshold -= step
            elif fbr > self.params.fbr_limit:
                self.threshold += step
        elif mode == "paper_verbatim":
            if br <= self.params.br_target:
                self.threshold += step
            elif fbr > self.params.fbr_limit:
                self.threshold -= step
        else:
            raise ValueError(f"unknown trust mode {mode!r}")
        return self.threshold
