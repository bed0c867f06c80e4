"""Grouped regression data: rows tagged with a group id in 1..K."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class GroupedDataset:
    """Observations sorted by group, with CSR-style group offsets.

    ``X`` holds the raw covariates only; models prepend their own
    intercept/offset column. Group ids are 1..K and every group is
    non-empty.
    """

    y: np.ndarray          # (n,)
    X: np.ndarray          # (n, n_x)
    group: np.ndarray      # (n,) ints in 1..K, non-decreasing
    offsets: np.ndarray = field(repr=False)  # (K+1,) row ranges per group

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_x(self) -> int:
        return self.X.shape[1]

    @property
    def n_groups(self) -> int:
        return self.offsets.shape[0] - 1

    @property
    def group_sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def group_index(self) -> np.ndarray:
        """Zero-based group index per row."""
        return self.group - 1

    @staticmethod
    def from_arrays(y, X, group) -> "GroupedDataset":
        y = np.asarray(y, dtype=np.float64)
        X = np.asarray(X, dtype=np.float64)
        group = np.asarray(group, dtype=np.int64)
        if y.ndim != 1 or X.ndim != 2 or group.ndim != 1:
            raise ValueError("y and group must be 1-d, X must be 2-d")
        if not (y.shape[0] == X.shape[0] == group.shape[0]):
            raise ValueError("y, X and group must have equal row counts")
        if group.min() < 1:
            raise ValueError("group ids must be positive integers")
        k = int(group.max())
        counts = np.bincount(group, minlength=k + 1)[1:]
        if np.any(counts == 0):
            missing = np.nonzero(counts == 0)[0][0] + 1
            raise ValueError(f"group {missing} is empty; ids must cover 1..K")
        order = np.argsort(group, kind="stable")
        offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        return GroupedDataset(y[order], X[order], group[order], offsets)

    def rows_of_group(self, gid: int) -> slice:
        return slice(int(self.offsets[gid - 1]), int(self.offsets[gid]))

    def to_csv(self, path, header_comment: str | None = None) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            cols = ",".join(f"x{j + 1}" for j in range(self.n_x))
            fh.write(f"group,y,{cols}\n" if self.n_x else "group,y\n")
            buf = io.StringIO()
            body = np.column_stack([self.group.astype(np.float64), self.y, self.X])
            np.savetxt(buf, body, delimiter=",",
                       fmt=["%d", "%.17g"] + ["%.17g"] * self.n_x)
            fh.write(buf.getvalue())

    @staticmethod
    def from_csv(path) -> "GroupedDataset":
        path = Path(path)
        with path.open() as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
        header = lines[0].strip().split(",")
        if header[:2] != ["group", "y"]:
            raise ValueError(f"{path}: expected header group,y,x1,..., got {header[:2]}")
        body = np.loadtxt(io.StringIO("".join(lines[1:])), delimiter=",", ndmin=2)
        return GroupedDataset.from_arrays(
            body[:, 1], body[:, 2:], body[:, 0].astype(np.int64)
        )
