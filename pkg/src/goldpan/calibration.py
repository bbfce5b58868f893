"""Per-position TPR/FPR estimation from recorded citation trials.

Trial log (JSON lines), one object per line::

    {"trial_id": "t0", "gold_position": 3, "cited_position": 3, "n_positions": 10}

``cited_position`` may be ``null`` when the model gave no citation; such a trial
counts as "did not cite" for every position.

Profile file (JSON)::

    {"n_positions": 10,
     "positions": [{"position": 0, "tpr": 0.7, "fpr": 0.1,
                    "n_gold_trials": 10, "n_nongold_trials": 90,
                    "n_gold_cited": 7, "n_nongold_cited": 9}, ...]}

``tpr``/``fpr`` are ``null`` when their denominator is zero.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core_model import DetectorProfile

DEFAULT_GOLD_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


class CalibrationError(ValueError):
    """Malformed trial log or profile file. ``lineno`` is 1-based when known."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: str
    gold_position: int
    cited_position: int | None
    n_positions: int

    def __post_init__(self):
        if self.n_positions < 1:
            raise ValueError(f"n_positions must be >= 1, got {self.n_positions}")
        if not 0 <= self.gold_position < self.n_positions:
            raise ValueError(f"gold_position {self.gold_position} out of range")
        if self.cited_position is not None and not 0 <= self.cited_position < self.n_positions:
            raise ValueError(f"cited_position {self.cited_position} out of range")


@dataclass
class PositionEstimate:
    position: int
    tpr: float | None
    fpr: float | None
    n_gold_trials: int
    n_nongold_trials: int
    n_gold_cited: int = 0
    n_nongold_cited: int = 0

    @property
    def diagnosticity(self) -> float | None:
        if self.tpr is None or self.fpr is None:
            return None
        return abs(self.tpr - self.fpr)


@dataclass
class ProfileFile:
    n_positions: int
    positions: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n_positions": self.n_positions, "positions": [asdict(p) for p in self.positions]}

    def detector_profiles(self, fill=None) -> list:
        out = []
        for p in self.positions:
            tpr, fpr = p.tpr, p.fpr
            if tpr is None or fpr is None:
                if fill is None:
                    raise CalibrationError(
                        f"position {p.position} has an undefined estimate; pass a fill value to default it")
                tpr = fill if tpr is None else tpr
                fpr = fill if fpr is None else fpr
            out.append(DetectorProfile(tpr, fpr))
        return out


def estimate_profiles(records, smoothing: bool = False) -> ProfileFile:
    """Count-based TPR/FPR per position.

    ``smoothing`` applies add-one (Laplace) smoothing, which keeps rates off 0 and 1.
    """
    records = list(records)
    if not records:
        raise CalibrationError("no trial records")
    sizes = {r.n_positions for r in records}
    if len(sizes) != 1:
        raise CalibrationError(f"records disagree on n_positions: {sorted(sizes)}")
    n = sizes.pop()
    gold = np.array([r.gold_position for r in records])
    cited = np.array([-1 if r.cited_position is None else r.cited_position for r in records])

    n_gold = np.bincount(gold, minlength=n)
    n_nongold = len(records) - n_gold
    hits = gold == cited
    gold_cited = np.bincount(gold[hits], minlength=n)
    miss = (~hits) & (cited >= 0)
    nongold_cited = np.bincount(cited[miss], minlength=n)

    positions = []
    for j in range(n):
        tpr = _ratio(gold_cited[j], n_gold[j], smoothing)
        fpr = _ratio(nongold_cited[j], n_nongold[j], smoothing)
        positions.append(PositionEstimate(j, tpr, fpr, int(n_gold[j]), int(n_nongold[j]),
                                          int(gold_cited[j]), int(nongold_cited[j])))
    return ProfileFile(n, positions)


def _ratio(num, den, smoothing):
    if smoothing:
        return (float(num) + 1.0) / (float(den) + 2.0)
    if den == 0:
        return None
    return float(num) / float(den)


def read_trial_log(path) -> list:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CalibrationError(f"invalid JSON ({exc.msg})", lineno) from None
            records.append(_parse_record(obj, lineno))
    return records


def _parse_record(obj, lineno) -> TrialRecord:
    if not isinstance(obj, dict):
        raise CalibrationError("record is not an object", lineno)
    for key in ("trial_id", "gold_position", "n_positions"):
        if key not in obj:
            raise CalibrationError(f"missing field {key!r}", lineno)
    cited = obj.get("cited_position")
    for key, val in (("gold_position", obj["gold_position"]), ("n_positions", obj["n_positions"]),
                     ("cited_position", cited)):
        if val is not None and (isinstance(val, bool) or not isinstance(val, int)):
            raise CalibrationError(f"field {key!r} must be an integer, got {val!r}", lineno)
    try:
        return TrialRecord(str(obj["trial_id"]), obj["gold_position"], cited, obj["n_positions"])
    except ValueError as exc:
        raise CalibrationError(str(exc), lineno) from None


def write_trial_log(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r)) + "\n")


def save_profiles(profile_file: ProfileFile, path) -> None:
    Path(path).write_text(json.dumps(profile_file.to_dict(), indent=2) + "\n")


def read_profile_file(path) -> ProfileFile:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"invalid JSON ({exc.msg})", exc.lineno) from None
    if not isinstance(doc, dict) or "positions" not in doc:
        raise CalibrationError("profile file needs a 'positions' list")
    entries = doc["positions"]
    if not isinstance(entries, list) or not entries:
        raise CalibrationError("'positions' must be a non-empty list")
    n = doc.get("n_positions", len(entries))
    if n != len(entries):
        raise CalibrationError(f"n_positions={n} but {len(entries)} positions listed")
    positions = []
    for idx, e in enumerate(entries):
        where = f"positions[{idx}]"
        if not isinstance(e, dict):
            raise CalibrationError(f"{where} is not an object")
        rates = {}
        for key in ("tpr", "fpr"):
            if key not in e:
                raise CalibrationError(f"{where}.{key} missing")
            v = e[key]
            if v is not None:
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
                    raise CalibrationError(f"{where}.{key}={v!r} is not a probability in [0, 1]")
                v = float(v)
            rates[key] = v
        counts = {}
        for key in ("n_gold_trials", "n_nongold_trials", "n_gold_cited", "n_nongold_cited"):
            v = e.get(key, 0)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise CalibrationError(f"{where}.{key}={v!r} must be a non-negative integer")
            counts[key] = v
        positions.append(PositionEstimate(e.get("position", idx), rates["tpr"], rates["fpr"], **counts))
    return ProfileFile(n, positions)


def load_profiles(path, fill: float | None = None) -> list:
    """Detector profiles from a profile file; undefined estimates need ``fill``."""
    return read_profile_file(path).detector_profiles(fill)


def grid_positions(n_positions: int, grid=DEFAULT_GOLD_GRID) -> list:
    """Gold placements at fractional depths of the context (deduplicated, sorted)."""
    return sorted({int(round(f * (n_positions - 1))) for f in grid})


def synthetic_trial_log(profiles, trials_per_position: int, rng: np.random.Generator,
                        gold_positions=None) -> list:
    """Simulate a calibration run from known per-position rates.

    With gold at ``g`` the model cites ``g`` with probability ``tpr_g``, each other
    position ``j`` with probability ``fpr_j``, and nothing otherwise. This needs
    ``tpr_g + sum_{j != g} fpr_j <= 1`` for every gold placement.
    """
    tpr = np.array([p.tpr for p in profiles])
    fpr = np.array([p.fpr for p in profiles])
    n = tpr.size
    if gold_positions is None:
        gold_positions = grid_positions(n)
    records = []
    tid = 0
    for g in gold_positions:
        probs = fpr.copy()
        probs[g] = tpr[g]
        none = 1.0 - probs.sum()
        if none < -1e-12:
            raise ValueError(f"citation probabilities exceed 1 with gold at {g}")
        p = np.append(probs, max(none, 0.0))
        draws = rng.choice(n + 1, size=trials_per_position, p=p / p.sum())
        for c in draws:
            records.append(TrialRecord(f"t{tid}", int(g), None if c == n else int(c), n))
            tid += 1
    return records
