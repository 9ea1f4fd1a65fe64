"""Run results and their CSV form."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_HEADER = ("Slots", "SumUtility")
FINAL_WINDOW = 0.2


@dataclass
class RunResult:
    """Output of one simulated run.

    ``sum_utility[k]`` is the sum over users of ``U_i`` applied to the running
    average rate over the first ``slots[k]`` slots.
    """

    algorithm: str
    slots: np.ndarray
    sum_utility: np.ndarray
    final_rates: np.ndarray
    params: dict = field(default_factory=dict)
    trace: dict | None = None
    occupancy: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def final_window_mean(self, fraction: float = FINAL_WINDOW) -> float:
        """Mean recorded sum utility over the last ``fraction`` of the horizon."""
        horizon = self.slots[-1]
        keep = self.slots >= horizon * (1.0 - fraction)
        return float(self.sum_utility[keep].mean())

    def to_csv(self, path) -> None:
        write_curve(path, self.slots, self.sum_utility)

    def trace_to_csv(self, path) -> None:
        if self.trace is None:
            raise ValueError("run was executed without trace recording")
        tr = self.trace
        n = tr["actions"].shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["Slot", "State"] + [f"{k}{i}" for k in ("a", "r", "q", "K") for i in range(n)])
            for t in range(len(tr["state"])):
                w.writerow([t + 1, int(tr["state"][t])]
                           + [int(x) for x in tr["actions"][t]]
                           + [repr(float(x)) for x in tr["rates"][t]]
                           + [int(x) for x in tr["q"][t]]
                           + [int(x) for x in tr["K"][t]])


def write_curve(path, slots, values) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for x, y in zip(slots, values):
            w.writerow([int(x), repr(float(y))])


def read_curve(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return data[:, 0].astype(np.int64), data[:, 1]


def record_points(horizon: int, record_every: int | None) -> np.ndarray:
    if record_every is None:
        record_every = max(1, horizon // 1000)
    pts = np.arange(record_every, horizon + 1, record_every, dtype=np.int64)
    if pts.size == 0 or pts[-1] != horizon:
        pts = np.append(pts, horizon)
    return pts
