"""Labelled feature datasets: synthetic generation, bias subsampling and CSV I/O.

Synthetic data mimics a two-attribute image collection (gender x profession)
with bag-of-words style histograms.  Every (gender, profession) cell has a
center built from coordinate blocks: a shared background, one block per
gender and one per profession.  Optionally items also carry one of a few
sparse "style" prototypes shared by all cells, and a fraction of a cell can
be generic: nearly flat histograms with a faint style and little noise.
Rows are nonnegative and normalized by their L2 or L1 norm.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from fairdpp.errors import DatasetParseError, InputError
from fairdpp.kernel import FeatureMatrix, Kernel, Normalization, build_gram_kernel
from fairdpp.partitions import LabelDimension, product_dimension


def _grid(name, value, counts):
    if isinstance(value, (int, float)):
        return float(value)
    value = tuple(tuple(float(v) for v in row) for row in value)
    if [len(r) for r in value] != [len(r) for r in counts]:
        raise InputError(f"{name} grid must match the shape of counts")
    return value


def _cells(value):
    return [value] if isinstance(value, float) else [v for row in value for v in row]


def _at(value, g, r):
    return value if isinstance(value, float) else value[g][r]


@dataclass(frozen=True)
class SyntheticConfig:
    """Generation parameters for :func:`generate_synthetic`.

    ``counts[g][r]`` is the number of items of gender ``g`` and profession
    ``r``.  ``spread`` is the within-cell noise scale, either one number or a
    grid shaped like ``counts``; ``noise_tau`` adds a lognormal per-item
    factor to it.  ``separation`` scales the profession blocks (and the
    gender blocks unless ``gender_separation`` is set) relative to
    ``background``.

    With ``n_styles > 0`` each item adds ``style_weight`` times a random
    prototype that has ``style_active`` nonzero coordinates.  ``generic``
    (number or grid) is the per-cell probability that an item is generic;
    generic items scale both their style and their noise by
    ``generic_weight``.  ``row_norm`` is ``"l2"`` or ``"l1"``.
    """

    counts: tuple[tuple[int, ...], ...] = ((20, 20), (20, 20))
    d: int = 24
    spread: float | tuple[tuple[float, ...], ...] = 0.5
    separation: float = 1.0
    seed: int = 0
    background: float = 1.0
    genders: tuple[str, ...] = ("male", "female")
    professions: tuple[str, ...] = ("scientist", "artist")
    gender_separation: float | None = None
    n_styles: int = 0
    style_active: int = 4
    style_weight: float = 1.0
    generic: float | tuple[tuple[float, ...], ...] = 0.0
    generic_weight: float = 0.05
    noise_tau: float = 0.0
    row_norm: str = "l2"

    def __post_init__(self) -> None:
        counts = tuple(tuple(int(c) for c in row) for row in self.counts)
        if not counts or len({len(r) for r in counts}) != 1 or not counts[0]:
            raise InputError("counts must be a non-empty rectangular grid")
        if min(min(r) for r in counts) < 1:
            raise InputError("every cell needs at least one item")
        spread = _grid("spread", self.spread, counts)
        if min(_cells(spread)) <= 0:
            raise InputError("spread must be positive")
        generic = _grid("generic", self.generic, counts)
        if not all(0.0 <= f <= 1.0 for f in _cells(generic)):
            raise InputError("generic fractions must lie in [0, 1]")
        if self.n_styles < 0 or not 1 <= self.style_active <= self.d:
            raise InputError("need n_styles >= 0 and 1 <= style_active <= d")
        if min(self.style_weight, self.generic_weight, self.noise_tau, self.separation,
               self.background, self.gender_separation or 0.0) < 0:
            raise InputError("weights, separations and noise_tau must be nonnegative")
        if self.row_norm not in ("l1", "l2"):
            raise InputError(f"row_norm must be 'l1' or 'l2', got {self.row_norm!r}")
        n_gender, n_prof = len(counts), len(counts[0])
        if len(self.genders) < n_gender or len(self.professions) < n_prof:
            raise InputError("not enough gender/profession names for the counts grid")
        if self.d < n_gender + n_prof + 1:
            raise InputError(f"d={self.d} leaves no room for {n_gender + n_prof + 1} blocks")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "spread", spread)
        object.__setattr__(self, "generic", generic)
        object.__setattr__(self, "genders", tuple(self.genders[:n_gender]))
        object.__setattr__(self, "professions", tuple(self.professions[:n_prof]))

    def cell_spread(self, g: int, r: int) -> float:
        return _at(self.spread, g, r)

    def cell_generic(self, g: int, r: int) -> float:
        return _at(self.generic, g, r)

    @classmethod
    def from_dict(cls, data: dict) -> SyntheticConfig:
        data = dict(data)
        if "counts" in data:
            data["counts"] = tuple(tuple(r) for r in data["counts"])
        for key in ("spread", "generic"):
            if isinstance(data.get(key), list):
                data[key] = tuple(tuple(r) for r in data[key])
        for key in ("genders", "professions"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: FeatureMatrix
    dimensions: tuple[LabelDimension, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise InputError(f"duplicate dimension names {names}")
        for dim in self.dimensions:
            if dim.n != self.features.n:
                raise InputError(
                    f"dimension {dim.name!r} has {dim.n} labels for {self.features.n} items"
                )
        object.__setattr__(self, "dimensions", tuple(self.dimensions))

    @property
    def n(self) -> int:
        return self.features.n

    def dimension(self, name: str) -> LabelDimension:
        for dim in self.dimensions:
            if dim.name == name:
                return dim
        raise InputError(f"no label dimension {name!r}; have {[d.name for d in self.dimensions]}")

    def kernel(self, normalize: Normalization = "l2") -> Kernel:
        return build_gram_kernel(self.features, normalize)

    def take(self, indices: ArrayLike) -> LabeledDataset:
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(FeatureMatrix(self.features.values[idx]),
                              tuple(d.take(idx) for d in self.dimensions),
                              dict(self.provenance))


def _cell_centers(cfg: SyntheticConfig) -> np.ndarray:
    n_gender, n_prof = len(cfg.counts), len(cfg.counts[0])
    n_blocks = n_gender + n_prof + 1
    width = cfg.d // n_blocks
    centers = np.full((n_gender, n_prof, cfg.d), cfg.background)
    gsep = cfg.separation if cfg.gender_separation is None else cfg.gender_separation
    for g in range(n_gender):
        centers[g, :, g * width:(g + 1) * width] += gsep
    for r in range(n_prof):
        start = (n_gender + r) * width
        centers[:, r, start:start + width] += cfg.separation
    return centers


def _style_prototypes(cfg: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    protos = np.zeros((cfg.n_styles, cfg.d))
    for s in range(cfg.n_styles):
        cols = rng.choice(cfg.d, cfg.style_active, replace=False)
        protos[s, cols] = rng.exponential(1.0, cfg.style_active) + 0.5
    return protos


def generate_synthetic(cfg: SyntheticConfig) -> LabeledDataset:
    """Draw a gender x profession dataset; deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    centers = _cell_centers(cfg)
    protos = _style_prototypes(cfg, rng)
    rows, genders, profs = [], [], []
    for g, row in enumerate(cfg.counts):
        for r, count in enumerate(row):
            items = np.repeat(centers[g, r][None, :], count, axis=0)
            generic = rng.random(count) < cfg.cell_generic(g, r)
            damp = np.where(generic, cfg.generic_weight, 1.0)[:, None]
            if cfg.n_styles:
                styles = rng.integers(cfg.n_styles, size=count)
                items += damp * cfg.style_weight * protos[styles]
            scale = np.exp(rng.normal(0.0, cfg.noise_tau, size=(count, 1)))
            noise = rng.normal(0.0, cfg.cell_spread(g, r), size=(count, cfg.d))
            clean = items.copy()
            items = np.maximum(items + noise * scale * damp, 0.0)
            # A fully clipped row would have no direction; give it its noiseless value.
            dead = ~items.any(axis=1)
            items[dead] = clean[dead]
            rows.append(items)
            genders += [g] * count
            profs += [r] * count
    values = np.vstack(rows)
    if cfg.row_norm == "l1":
        values /= values.sum(axis=1, keepdims=True)
    else:
        values /= np.linalg.norm(values, axis=1, keepdims=True)
    gender = LabelDimension("gender", np.asarray(genders), len(cfg.genders), cfg.genders)
    dims = [gender]
    if len(cfg.professions) > 1:
        profession = LabelDimension("profession", np.asarray(profs), len(cfg.professions),
                                    cfg.professions)
        dims += [profession, product_dimension(gender, profession)]
    return LabeledDataset(FeatureMatrix(values), tuple(dims), {"synthetic": cfg.to_dict()})


def biased_size(others: int, target_fraction: float) -> int:
    """Items of the targeted part to keep so it makes up ``target_fraction``."""
    if target_fraction >= 1.0:
        return -1 if others else 0
    m = int(np.floor(others * target_fraction / (1.0 - target_fraction) + 0.5))
    return max(m, 1)


def bias_subsample(
    ds: LabeledDataset,
    dim: str | LabelDimension,
    part: int,
    target_fraction: float,
    rng: np.random.Generator,
) -> tuple[LabeledDataset, np.ndarray]:
    """Shrink one part uniformly at random so it forms ``target_fraction`` of the data.

    Items outside the part are all kept and the original order is preserved.
    Returns the new dataset and the retained indices into ``ds``.
    """
    dimension = ds.dimension(dim) if isinstance(dim, str) else dim
    if not 0.0 < target_fraction <= 1.0:
        raise InputError(f"target fraction must be in (0, 1], got {target_fraction}")
    members = dimension.members(part)
    others = ds.n - members.size
    keep = biased_size(others, target_fraction)
    if keep < 0 or keep > members.size:
        raise InputError(
            f"cannot make part {part} of {dimension.name!r} {target_fraction:.0%} of the data: "
            f"needs {'all items' if keep < 0 else keep} but it has {members.size} "
            f"next to {others} others"
        )
    chosen = rng.choice(members, size=keep, replace=False)
    mask = dimension.labels != part
    mask[chosen] = True
    retained = np.flatnonzero(mask)
    return ds.take(retained), retained


def _parse_float(text: str, path: Path, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise DatasetParseError(f"{path}:{line}: {text!r} is not a number") from None


def read_features_csv(path: str | Path) -> FeatureMatrix:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
            start = 2
        else:
            start = 1
    if not rows:
        raise DatasetParseError(f"{path}: no feature rows")
    width = len(rows[0])
    values = []
    for line, row in enumerate(rows, start=start):
        if len(row) != width:
            raise DatasetParseError(f"{path}:{line}: ragged row with {len(row)} values, expected {width}")
        vals = [_parse_float(c, path, line) for c in row]
        if any(v < 0 for v in vals):
            raise DatasetParseError(f"{path}:{line}: negative feature value")
        values.append(vals)
    try:
        return FeatureMatrix(np.asarray(values))
    except InputError as exc:
        raise DatasetParseError(f"{path}: {exc}") from None


def read_labels_csv(path: str | Path) -> list[LabelDimension]:
    """Read a header row of dimension names followed by one label row per item."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise DatasetParseError(f"{path}: expected a header row and at least one label row")
    header = [h.strip() for h in rows[0]]
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DatasetParseError(f"{path}:{line}: ragged row with {len(row)} columns, expected {len(header)}")
    columns = list(zip(*[[c.strip() for c in r] for r in rows[1:]]))
    return [LabelDimension.from_values(name, col) for name, col in zip(header, columns)]


def load_dataset(features_path: str | Path, labels_path: str | Path) -> LabeledDataset:
    features = read_features_csv(features_path)
    dims = read_labels_csv(labels_path)
    n_labels = dims[0].n
    if n_labels != features.n:
        raise DatasetParseError(
            f"{features_path} has {features.n} feature rows but {labels_path} has {n_labels} label rows"
        )
    if len(dims) >= 2:
        dims.append(product_dimension(dims[0], dims[1]))
    return LabeledDataset(features, tuple(dims),
                          {"features": str(features_path), "labels": str(labels_path)})


def write_dataset(ds: LabeledDataset, features_path: str | Path, labels_path: str | Path,
                  factors: Sequence[str] | None = None) -> None:
    """Write features and label CSVs.  Only factor dimensions are written; products are rederived."""
    if factors is None:
        factors = [d.name for d in ds.dimensions if "_x_" not in d.name]
    with Path(features_path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in ds.features.values:
            writer.writerow([repr(float(v)) for v in row])
    dims = [ds.dimension(name) for name in factors]
    with Path(labels_path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(factors)
        for x in range(ds.n):
            writer.writerow([d.part_names[d.labels[x]] if d.part_names else int(d.labels[x])
                             for d in dims])
