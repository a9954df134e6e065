"""Constellation geometries and bit labelings.

All constellations are peak-normalized: coordinates live in [0, 1] per real
dimension and the peak amplitude 1 is always attained, so the noise level is
set by the peak SNR alone. QAM constellations are treated as two real
dimensions on the [0, 1] x [0, 1] grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Constellation",
    "InputDistribution",
    "pam_constellation",
    "cross_qam32",
    "framed_cross_qam32",
    "qam36",
    "write_constellation",
    "read_constellation",
    "brgc",
    "pas_amplitude_labels",
]


def brgc(m: int) -> list[str]:
    """Binary reflected Gray code of length m, as a list of 2**m bit strings."""
    if m < 1:
        raise ValueError("need m >= 1")
    return [format(i ^ (i >> 1), f"0{m}b") for i in range(2**m)]


def pas_amplitude_labels(M: int) -> list[str]:
    """(m-1)-bit labels of the M/2 amplitude levels, lowest level first.

    The labels are the last M/2 codewords of the length-(m-1) binary
    reflected Gray code; the first 2**(m-1) - M/2 codewords are dropped.
    For M = 6 this gives 01, 11, 10.
    """
    m = math.ceil(math.log2(M))
    if m == 1:
        return [""]
    code = brgc(m - 1)
    skip = 2 ** (m - 1) - M // 2
    return code[skip:]


@dataclass(frozen=True)
class Constellation:
    """Immutable set of signal points with optional bit labels.

    points are tuples of per-dimension coordinates in [0, 1]; labels is
    either empty (unlabeled, symbol-metric use only) or holds one bit
    string of identical length per point.
    """

    dimension: int
    points: tuple[tuple[float, ...], ...]
    labels: tuple[str, ...]
    name: str

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if not self.points:
            raise ValueError("constellation has no points")
        for pt in self.points:
            if len(pt) != self.dimension:
                raise ValueError(f"point {pt} does not have {self.dimension} coordinates")
            for c in pt:
                if not (-1e-12 <= c <= 1 + 1e-12):
                    raise ValueError(f"coordinate {c} outside [0, 1]")
        peak = max(max(pt) for pt in self.points)
        if abs(peak - 1.0) > 1e-12:
            raise ValueError(f"peak amplitude {peak} != 1 (missing peak normalization)")
        if len(set(self.points)) != len(self.points):
            raise ValueError("points are not pairwise distinct")
        if self.labels:
            if len(self.labels) != len(self.points):
                raise ValueError("label count does not match point count")
            m = self.bits_per_symbol
            for lab in self.labels:
                if len(lab) != m or set(lab) - {"0", "1"}:
                    raise ValueError(f"bad label {lab!r}: want {m} bits")
            if len(set(self.labels)) != len(self.labels):
                raise ValueError("labels are not pairwise distinct")

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        """Label length m = ceil(log2 of the point count)."""
        return math.ceil(math.log2(len(self.points)))

    @property
    def is_labeled(self) -> bool:
        return bool(self.labels)

    def label_bits(self) -> "np.ndarray":
        """(size, m) array of label bits as uint8; requires labels."""
        if not self.labels:
            raise ValueError(f"constellation {self.name!r} is unlabeled")
        import numpy as np

        return np.array([[int(b) for b in lab] for lab in self.labels], dtype=np.uint8)

    def coords(self) -> "np.ndarray":
        """(size, dimension) float array of point coordinates."""
        import numpy as np

        return np.array(self.points, dtype=float)


@dataclass(frozen=True)
class InputDistribution:
    """Probability mass over the points of one constellation."""

    probs: tuple[float, ...]

    def __post_init__(self):
        if any(p < 0 for p in self.probs):
            raise ValueError("negative probability")
        s = math.fsum(self.probs)
        if abs(s - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {s}, not 1")

    @classmethod
    def uniform(cls, n: int) -> "InputDistribution":
        return cls(tuple([1.0 / n] * n))

    def entropy(self) -> float:
        """Entropy in bits."""
        return -math.fsum(p * math.log2(p) for p in self.probs if p > 0)

    def check_matches(self, c: Constellation) -> None:
        if len(self.probs) != c.size:
            raise ValueError(
                f"distribution over {len(self.probs)} masses does not match "
                f"{c.size}-point constellation {c.name!r}"
            )


def pam_constellation(M: int, labeling: str = "pas") -> Constellation:
    """Uniformly spaced M-point PAM on [0, 1].

    labeling "brgc" assigns the standard binary reflected Gray code in point
    order. labeling "pas" prefixes a half-selection bit to the (m-1)-bit
    amplitude labels of pas_amplitude_labels, so point i and its mirror
    M-1-i share the amplitude bits and differ only in the first bit.
    For M a power of two both labelings coincide.
    """
    if M < 2 or M % 2:
        raise ValueError(f"M must be even and >= 2, got {M}")
    points = tuple((i / (M - 1),) for i in range(M))
    if labeling == "brgc":
        m = math.ceil(math.log2(M))
        labels = tuple(brgc(m)[:M])
    elif labeling == "pas":
        amp = pas_amplitude_labels(M)
        lower = ["0" + amp[i] for i in range(M // 2)]
        upper = ["1" + amp[M - 1 - i] for i in range(M // 2, M)]
        labels = tuple(lower + upper)
    else:
        raise ValueError(f"unknown labeling {labeling!r}")
    return Constellation(1, points, labels, name=f"{M}pam")


# Grid label tables for the two 32-point constellations, keyed by integer
# grid position (x, y) with x, y in 0..5 and spacing 1/5. Shipped verbatim
# as data; not regenerated algorithmically.
_CROSS_QAM32_LABELS = {
    (1, 0): "00100", (2, 0): "00110", (3, 0): "10110", (4, 0): "10100",
    (0, 1): "00111", (1, 1): "00011", (2, 1): "00010", (3, 1): "10010",
    (4, 1): "10011", (5, 1): "10111",
    (0, 2): "00101", (1, 2): "00001", (2, 2): "00000", (3, 2): "10000",
    (4, 2): "10001", (5, 2): "10101",
    (0, 3): "01101", (1, 3): "01001", (2, 3): "01000", (3, 3): "11000",
    (4, 3): "11001", (5, 3): "11101",
    (0, 4): "01111", (1, 4): "01011", (2, 4): "01010", (3, 4): "11010",
    (4, 4): "11011", (5, 4): "11111",
    (1, 5): "01100", (2, 5): "01110", (3, 5): "11110", (4, 5): "11100",
}

_FRAMED_CROSS_QAM32_LABELS = {
    (0, 0): "00000", (1, 0): "00001", (2, 0): "00011", (3, 0): "01011",
    (4, 0): "01001", (5, 0): "01000",
    (0, 1): "00100", (2, 1): "00010", (3, 1): "01010", (5, 1): "01100",
    (0, 2): "00101", (1, 2): "00111", (2, 2): "00110", (3, 2): "01110",
    (4, 2): "01111", (5, 2): "01101",
    (0, 3): "10101", (1, 3): "10111", (2, 3): "10110", (3, 3): "11110",
    (4, 3): "11111", (5, 3): "11101",
    (0, 4): "10100", (2, 4): "10010", (3, 4): "11010", (5, 4): "11100",
    (0, 5): "10000", (1, 5): "10001", (2, 5): "10011", (3, 5): "11011",
    (4, 5): "11001", (5, 5): "11000",
}


def _grid_constellation(label_table: dict, name: str) -> Constellation:
    keys = sorted(label_table, key=lambda xy: (xy[1], xy[0]))
    points = tuple((x / 5, y / 5) for x, y in keys)
    labels = tuple(label_table[k] for k in keys)
    return Constellation(2, points, labels, name=name)


def cross_qam32() -> Constellation:
    """Cross-shaped QAM-32: the 6x6 grid minus its four corners, with the
    quasi-SU labeling table."""
    return _grid_constellation(_CROSS_QAM32_LABELS, "cross_32qam")


def framed_cross_qam32() -> Constellation:
    """Framed-cross QAM-32: the 6x6 grid minus the four inner-diagonal
    points (1,1), (4,1), (1,4), (4,4), Gray-labeled with quadrant bits."""
    return _grid_constellation(_FRAMED_CROSS_QAM32_LABELS, "framed_cross_32qam")


def qam36() -> Constellation:
    """Unlabeled 36-point product alphabet of two 6-PAM axes."""
    pam6 = [i / 5 for i in range(6)]
    points = tuple((a, b) for b in pam6 for a in pam6)
    return Constellation(2, points, (), name="36qam")


def write_constellation(c: Constellation, path) -> None:
    """Write a constellation in the line-oriented text format.

    Header line `dim=<1|2> n=<count>`, then one line per point:
    whitespace-separated coordinates followed by the label bit string
    (`-` when unlabeled).
    """
    lines = [f"dim={c.dimension} n={c.size}"]
    for i, pt in enumerate(c.points):
        coords = " ".join(format(v, ".12g") for v in pt)
        lab = c.labels[i] if c.labels else "-"
        lines.append(f"{coords} {lab}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_constellation(path, name: str | None = None) -> Constellation:
    """Read a constellation written by write_constellation.

    Raises ValueError on malformed files or invariant violations.
    """
    with open(path) as f:
        raw = [ln.strip() for ln in f if ln.strip()]
    if not raw:
        raise ValueError(f"{path}: empty constellation file")
    header = raw[0].split()
    try:
        fields = dict(kv.split("=") for kv in header)
        dim = int(fields["dim"])
        n = int(fields["n"])
    except (ValueError, KeyError) as e:
        raise ValueError(f"{path}: bad header {raw[0]!r}") from e
    if len(raw) - 1 != n:
        raise ValueError(f"{path}: header says {n} points, file has {len(raw) - 1}")
    points, labels = [], []
    for ln in raw[1:]:
        parts = ln.split()
        if len(parts) != dim + 1:
            raise ValueError(f"{path}: bad point line {ln!r}")
        points.append(tuple(float(v) for v in parts[:dim]))
        labels.append(parts[dim])
    unlabeled = all(l == "-" for l in labels)
    if not unlabeled and any(l == "-" for l in labels):
        raise ValueError(f"{path}: mixed labeled and unlabeled points")
    return Constellation(
        dim,
        tuple(points),
        () if unlabeled else tuple(labels),
        name=name or str(path),
    )
