"""Trial lists, cosine scoring, EER and minDCF.

Operating points are taken at every unique score used as a threshold, plus
a reject-all point above the maximum. A trial is accepted when its score is
>= the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from pathlib import Path

import numpy as np

from mcasv.formats import EmbeddingSet
from mcasv.rng import make_rng

TARGET, NONTARGET = "target", "nontarget"


class TrialFormatError(ValueError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path, self.line_no = str(path), line_no


@dataclass
class TrialList:
    enroll: list
    test: list
    labels: np.ndarray  # bool, True = target

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=bool)
        if not len(self.enroll) == len(self.test) == self.labels.size:
            raise ValueError("enroll, test and label columns differ in length")
        keys = list(zip(self.enroll, self.test))
        if len(set(keys)) != len(keys):
            raise ValueError("trial list has duplicate (enroll, test) rows")

    def __len__(self):
        return self.labels.size

    def write(self, path) -> None:
        lines = [f"{e} {t} {TARGET if lab else NONTARGET}\n"
                 for e, t, lab in zip(self.enroll, self.test, self.labels)]
        Path(path).write_text("".join(lines))

    @classmethod
    def read(cls, path) -> "TrialList":
        enroll, test, labels = [], [], []
        for k, line in enumerate(Path(path).read_text().splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3 or parts[2] not in (TARGET, NONTARGET):
                raise TrialFormatError(path, k, f"expected 'enroll test target|nontarget', got {line!r}")
            enroll.append(parts[0])
            test.append(parts[1])
            labels.append(parts[2] == TARGET)
        try:
            return cls(enroll, test, labels)
        except ValueError as exc:
            raise TrialFormatError(path, 0, str(exc)) from None


def read_scores(path, trials: TrialList | None = None) -> np.ndarray:
    """Read "enroll test score" lines; aligned to ``trials`` when given."""
    table, order = {}, []
    for k, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            if len(parts) != 3:
                raise ValueError
            value = float(parts[2])
        except ValueError:
            raise TrialFormatError(path, k, f"expected 'enroll test score', got {line!r}") from None
        if not np.isfinite(value):
            raise TrialFormatError(path, k, f"non-finite score {parts[2]!r}")
        table[(parts[0], parts[1])] = value
        order.append((parts[0], parts[1]))
    if trials is None:
        return np.array([table[key] for key in order])
    missing = [key for key in zip(trials.enroll, trials.test) if key not in table]
    if missing:
        raise TrialFormatError(path, 0, f"no score for trial {missing[0][0]} {missing[0][1]}")
    return np.array([table[key] for key in zip(trials.enroll, trials.test)])


def write_scores(path, trials: TrialList, scores) -> None:
    Path(path).write_text("".join(
        f"{e} {t} {s!r}\n" for e, t, s in zip(trials.enroll, trials.test, map(float, scores))))


def generate_trials(embeddings: EmbeddingSet, n_trials: int = 10000, seed: int = 0) -> TrialList:
    """Half same-speaker, half different-speaker utterance pairs, no self-pairs.

    Pairs are ordered: (a, b) and (b, a) are distinct trials.
    """
    if n_trials < 2 or n_trials % 2:
        raise ValueError("n_trials must be a positive even number")
    half = n_trials // 2
    spk = np.asarray(embeddings.speakers)
    if np.unique(spk).size < 2:
        raise ValueError("trial generation needs at least two speakers")
    rng = make_rng(seed)

    same = [pair for s in np.unique(spk) for pair in permutations(np.flatnonzero(spk == s), 2)]
    if len(same) < half:
        raise ValueError(f"only {len(same)} same-speaker pairs available, need {half}")
    targets = [same[k] for k in rng.choice(len(same), size=half, replace=False)]

    n = spk.size
    n_diff = n * (n - 1) - len(same)
    if n_diff < half:
        raise ValueError(f"only {n_diff} different-speaker pairs available, need {half}")
    if n_diff <= 2_000_000:
        diff = [(i, j) for i, j in permutations(range(n), 2) if spk[i] != spk[j]]
        nontargets = [diff[k] for k in rng.choice(len(diff), size=half, replace=False)]
    else:
        seen, nontargets = set(), []
        while len(nontargets) < half:
            i, j = rng.choice(n, size=2, replace=False).tolist()
            if spk[i] != spk[j] and (i, j) not in seen:
                seen.add((i, j))
                nontargets.append((i, j))

    rows = [(i, j, True) for i, j in targets] + [(i, j, False) for i, j in nontargets]
    rows = [rows[k] for k in rng.permutation(len(rows))]
    utt = embeddings.utterances
    return TrialList([utt[i] for i, _, _ in rows], [utt[j] for _, j, _ in rows],
                     [lab for _, _, lab in rows])


def cosine_score(trials: TrialList, embeddings: EmbeddingSet) -> np.ndarray:
    index = embeddings.index_of()
    for u in set(trials.enroll) | set(trials.test):
        if u not in index:
            raise KeyError(f"trial utterance {u!r} has no embedding")
    x = embeddings.vectors.astype(np.float64)
    norms = np.linalg.norm(x, axis=1)
    e = np.array([index[u] for u in trials.enroll], dtype=int)
    t = np.array([index[u] for u in trials.test], dtype=int)
    zero = [embeddings.utterances[k] for k in np.union1d(e, t) if norms[k] == 0]
    if zero:
        raise ValueError(f"zero-norm embedding for {zero[0]!r}")
    return np.einsum("ij,ij->i", x[e], x[t]) / (norms[e] * norms[t])


def _labels(trials_or_labels) -> np.ndarray:
    if isinstance(trials_or_labels, TrialList):
        return trials_or_labels.labels
    return np.asarray(trials_or_labels, dtype=bool)


def error_rates(scores, labels):
    """(thresholds, FAR, FRR) at each unique score plus a final reject-all point."""
    s = np.asarray(scores, dtype=np.float64)
    y = _labels(labels)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores for {y.size} trials")
    n_tar, n_non = int(y.sum()), int((~y).sum())
    if n_tar == 0 or n_non == 0:
        raise ValueError("metrics need both target and nontarget trials")
    thresholds = np.unique(s)
    # counts of scores strictly below each threshold
    tar_below = np.searchsorted(np.sort(s[y]), thresholds, side="left")
    non_below = np.searchsorted(np.sort(s[~y]), thresholds, side="left")
    far = np.append((n_non - non_below) / n_non, 0.0)
    frr = np.append(tar_below / n_tar, 1.0)
    return np.append(thresholds, np.inf), far, frr


def eer(scores, trials) -> float:
    """Equal error rate, linearly interpolated between adjacent operating points."""
    _, far, frr = error_rates(scores, trials)
    gap = far - frr  # starts at 1, ends at -1, nonincreasing
    k = int(np.argmax(gap <= 0))
    if gap[k] == 0:
        return float(far[k])
    alpha = gap[k - 1] / (gap[k - 1] - gap[k])
    return float(far[k - 1] + alpha * (far[k] - far[k - 1]))


def min_dcf(scores, trials, p_target: float = 0.05, c_miss: float = 1.0,
            c_fa: float = 1.0) -> float:
    """Minimum normalized detection cost over all thresholds."""
    _, far, frr = error_rates(scores, trials)
    cost = p_target * c_miss * frr + (1.0 - p_target) * c_fa * far
    return float(cost.min() / min(p_target * c_miss, (1.0 - p_target) * c_fa))
