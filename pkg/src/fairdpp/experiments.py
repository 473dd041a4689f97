"""Experiment runners comparing UNIF, k-DPP, k_i-DPP and P-DPP.

* Experiment 1: balanced quotas on a two-part dimension, sweep over ``k``.
* Experiment 2: balanced quotas on gender only, fairness measured over the
  finer gender x profession partition, sweep over ``k``.
* Experiment 3: like 2 but the dataset is re-biased every repetition by
  subsampling one gender; sweep over the bias fraction at fixed ``k``.

Seeds: every draw uses a generator seeded from
``(master_seed, experiment, sampler, x_index, repetition)``; the biased
dataset of a repetition uses sampler slot ``DATASET_STREAM`` so all samplers
of one pairing cell see the same data.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Callable, Sequence

import numpy as np

from fairdpp.datasets import LabeledDataset, SyntheticConfig, bias_subsample, generate_synthetic, load_dataset
from fairdpp.errors import FairDPPError, InputError
from fairdpp.kernel import SINGULAR, Kernel, log_det_submatrix, spectral_decompose
from fairdpp.partitions import QuotaConstraint, check_quota, effective_diversity, fairness_entropy
from fairdpp.samplers import (
    BURN_IN_FACTOR,
    part_spectra,
    sample_kdpp_exact,
    sample_kidpp,
    sample_pdpp_mcmc,
    sample_uniform,
)
from fairdpp.stats import mean_sem, paired_one_sided_t_test

log = logging.getLogger(__name__)

SAMPLERS = ("P-DPP", "k-DPP", "k_i-DPP", "UNIF")
CONSTRAINED = frozenset({"P-DPP", "k_i-DPP"})
METRICS = ("entropy_bits", "effective_diversity", "ln_G", "constrained_effective_diversity")
DATASET_STREAM = 99


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment run.

    ``x_values`` holds the ``k`` grid (experiments 1 and 2) or the bias grid
    (experiment 3, with the fixed sample size in ``k``).
    """

    experiment: int
    x_values: tuple[float, ...]
    synthetic: SyntheticConfig | None = None
    features_path: str | None = None
    labels_path: str | None = None
    k: int | None = None
    repetitions: int = 100
    samplers: tuple[str, ...] = SAMPLERS
    constrained_dimension: str = "gender"
    measured_dimension: str = "gender_x_profession"
    biased_part: int = 0
    burn_in_factor: int = BURN_IN_FACTOR
    master_seed: int = 0
    normalize: str = "l2"
    record_timing: bool = True
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if self.experiment not in (1, 2, 3):
            raise InputError(f"experiment must be 1, 2 or 3, got {self.experiment}")
        if self.repetitions < 2:
            raise InputError("repetitions must be >= 2 for a standard error")
        if (self.synthetic is None) == (self.features_path is None):
            raise InputError("give exactly one of a synthetic config or a features file")
        if self.features_path is not None and self.labels_path is None:
            raise InputError("a features file needs a labels file")
        unknown = set(self.samplers) - set(SAMPLERS)
        if unknown:
            raise InputError(f"unknown samplers {sorted(unknown)}; choose from {SAMPLERS}")
        if not self.x_values:
            raise InputError("x_values must not be empty")
        if self.experiment == 3:
            if self.k is None:
                raise InputError("experiment 3 needs a fixed k")
            if any(not 0 < b <= 0.5 for b in self.x_values):
                raise InputError(f"bias grid must lie in (0, 0.5], got {self.x_values}")
        elif any(int(x) != x or x < 0 for x in self.x_values):
            raise InputError(f"k values must be nonnegative integers, got {self.x_values}")
        if self.burn_in_factor < 0:
            raise InputError("burn_in_factor must be nonnegative")
        object.__setattr__(self, "x_values", tuple(self.x_values))
        object.__setattr__(self, "samplers", tuple(self.samplers))

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        data = dict(data)
        if isinstance(data.get("synthetic"), dict):
            data["synthetic"] = SyntheticConfig.from_dict(data["synthetic"])
        for key in ("x_values", "samplers"):
            if key in data:
                data[key] = tuple(data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise InputError(f"bad experiment config: {exc}") from None

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def load_dataset(self) -> LabeledDataset:
        if self.synthetic is not None:
            return generate_synthetic(self.synthetic)
        return load_dataset(self.features_path, self.labels_path)


def default_config(experiment: int) -> ExperimentConfig:
    """The packaged desk-scale configuration of an experiment."""
    text = resources.files("fairdpp.configs").joinpath(f"exp{experiment}.json").read_text()
    return ExperimentConfig.from_dict(json.loads(text))


@dataclass(frozen=True)
class ResultRecord:
    experiment: int
    sampler: str
    x_value: float
    repetition: int
    entropy_bits: float
    effective_diversity: float
    ln_G: float
    seconds: float
    subset: tuple[int, ...] = ()
    constrained_effective_diversity: float = float("nan")
    error: str | None = None

    @property
    def singular(self) -> bool:
        return self.ln_G == SINGULAR


@dataclass(frozen=True)
class SummaryRow:
    sampler: str
    x_value: float
    metric: str
    mean: float
    sem: float
    count: int
    excluded: int
    p_values: dict[str, float] = field(default_factory=dict)


def rng_for(master_seed: int, experiment: int, stream: int, x_index: int, repetition: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, experiment, stream, x_index, repetition]))


class _Instance:
    """Kernel, spectra and quota for one dataset at one sample size."""

    def __init__(self, ds: LabeledDataset, kernel: Kernel, cfg: ExperimentConfig):
        self.ds = ds
        self.kernel = kernel
        self.cfg = cfg
        self.constrained = ds.dimension(cfg.constrained_dimension)
        self.measured = ds.dimension(cfg.measured_dimension)
        self._spectrum = None
        self._part_spectra = None

    @property
    def spectrum(self):
        if self._spectrum is None:
            self._spectrum = spectral_decompose(self.kernel)
        return self._spectrum

    @property
    def part_spectra(self):
        if self._part_spectra is None:
            self._part_spectra = part_spectra(self.kernel, self.constrained)
        return self._part_spectra

    def draw(self, sampler: str, k: int, rng: np.random.Generator) -> np.ndarray:
        n = self.kernel.n
        if sampler == "UNIF":
            return sample_uniform(n, k, rng)
        if sampler == "k-DPP":
            return sample_kdpp_exact(self.spectrum, k, rng)
        quota = QuotaConstraint.balanced(self.constrained, k)
        if sampler == "k_i-DPP":
            subset = sample_kidpp(self.kernel, quota, rng, self.part_spectra)
        else:
            iterations = self.cfg.burn_in_factor * k * (n - k)
            subset = sample_pdpp_mcmc(self.kernel, quota, rng, iterations)
        if not check_quota(subset, quota):
            raise AssertionError(f"{sampler} returned {subset.tolist()} violating quotas {quota.quotas}")
        return subset


def _record(cfg, inst: _Instance, sampler, x, rep, subset, seconds, index_map) -> ResultRecord:
    return ResultRecord(
        experiment=cfg.experiment,
        sampler=sampler,
        x_value=x,
        repetition=rep,
        entropy_bits=fairness_entropy(subset, inst.measured),
        effective_diversity=effective_diversity(subset, inst.measured),
        ln_G=log_det_submatrix(inst.kernel, subset),
        seconds=seconds if cfg.record_timing else 0.0,
        subset=tuple(int(index_map[s]) for s in subset),
        constrained_effective_diversity=effective_diversity(subset, inst.constrained),
    )


def _failed(cfg, sampler, x, rep, exc: Exception) -> ResultRecord:
    nan = float("nan")
    return ResultRecord(cfg.experiment, sampler, x, rep, nan, nan, nan, 0.0, error=str(exc))


def _sample_cell(cfg, inst, x, x_index, rep, k, index_map) -> list[ResultRecord]:
    out = []
    for sampler in cfg.samplers:
        rng = rng_for(cfg.master_seed, cfg.experiment, SAMPLERS.index(sampler), x_index, rep)
        start = time.perf_counter()
        try:
            subset = inst.draw(sampler, k, rng)
        except FairDPPError as exc:
            log.warning("experiment %d, %s, x=%s, repetition %d: %s", cfg.experiment, sampler, x, rep, exc)
            out.append(_failed(cfg, sampler, x, rep, exc))
            continue
        out.append(_record(cfg, inst, sampler, x, rep, subset, time.perf_counter() - start, index_map))
    return out


def _check_k(cfg: ExperimentConfig, ds: LabeledDataset, ks: Sequence[float]) -> None:
    p = ds.dimension(cfg.constrained_dimension).p
    ds.dimension(cfg.measured_dimension)
    for k in ks:
        if k > ds.n:
            raise InputError(f"k={int(k)} exceeds the {ds.n} items of the dataset")
        if int(k) % p:
            raise InputError(f"k={int(k)} cannot be split evenly over {p} parts of {cfg.constrained_dimension!r}")


def _run_k_sweep(cfg: ExperimentConfig, progress: Callable[[str], None] | None) -> list[ResultRecord]:
    ds = cfg.load_dataset()
    _check_k(cfg, ds, cfg.x_values)
    kernel = ds.kernel(cfg.normalize)
    inst = _Instance(ds, kernel, cfg)
    identity = np.arange(ds.n)
    records: list[ResultRecord] = []
    for x_index, x in enumerate(cfg.x_values):
        k = int(x)
        for rep in range(cfg.repetitions):
            records += _sample_cell(cfg, inst, k, x_index, rep, k, identity)
        if progress:
            progress(f"experiment {cfg.experiment}: k={k} done")
    return records


def run_experiment_1(cfg: ExperimentConfig, progress=None) -> list[ResultRecord]:
    """Balanced two-part quotas; fairness measured on the constrained dimension."""
    if cfg.measured_dimension != cfg.constrained_dimension:
        cfg = replace(cfg, measured_dimension=cfg.constrained_dimension)
    return _run_k_sweep(replace(cfg, experiment=1), progress)


def run_experiment_2(cfg: ExperimentConfig, progress=None) -> list[ResultRecord]:
    """Quotas on the constrained dimension only; fairness on the finer measured dimension."""
    return _run_k_sweep(replace(cfg, experiment=2), progress)


def run_experiment_3(cfg: ExperimentConfig, progress=None) -> list[ResultRecord]:
    """Bias sweep: one part of the constrained dimension is subsampled afresh per repetition."""
    cfg = replace(cfg, experiment=3)
    full = cfg.load_dataset()
    _check_k(cfg, full, (cfg.k,))
    full_kernel = full.kernel(cfg.normalize)
    k = int(cfg.k)
    records: list[ResultRecord] = []
    for x_index, bias in enumerate(cfg.x_values):
        for rep in range(cfg.repetitions):
            data_rng = rng_for(cfg.master_seed, 3, DATASET_STREAM, x_index, rep)
            ds, retained = bias_subsample(full, cfg.constrained_dimension, cfg.biased_part, bias, data_rng)
            inst = _Instance(ds, full_kernel.restrict(retained), cfg)
            records += _sample_cell(cfg, inst, bias, x_index, rep, k, retained)
        if progress:
            progress(f"experiment 3: bias={bias} done")
    return records


RUNNERS = {1: run_experiment_1, 2: run_experiment_2, 3: run_experiment_3}


def run_experiment(cfg: ExperimentConfig, progress=None) -> list[ResultRecord]:
    return RUNNERS[cfg.experiment](cfg, progress)


def metric_values(records: Sequence[ResultRecord], sampler: str, x: float, metric: str) -> dict[int, float]:
    """Per-repetition values of one metric; failed and singular draws are left out."""
    out = {}
    for r in records:
        if r.sampler == sampler and r.x_value == x and r.error is None:
            v = getattr(r, metric)
            if np.isfinite(v):
                out[r.repetition] = v
    return out


def compare(records: Sequence[ResultRecord], a: str, b: str, x: float, metric: str) -> float:
    """One-sided paired p-value for ``a > b`` over repetitions both samplers completed."""
    va = metric_values(records, a, x, metric)
    vb = metric_values(records, b, x, metric)
    reps = sorted(set(va) & set(vb))
    return paired_one_sided_t_test([va[r] for r in reps], [vb[r] for r in reps])


def summarize(records: Sequence[ResultRecord], metrics: Sequence[str] = METRICS) -> list[SummaryRow]:
    """Mean, SEM and pairwise one-sided p-values per (sampler, x, metric).

    Singular ``ln_G`` draws and failed draws are excluded and counted in
    ``excluded``.  Cells with fewer than two usable values get NaN statistics.
    """
    samplers = [s for s in SAMPLERS if any(r.sampler == s for r in records)]
    xs = sorted({r.x_value for r in records})
    rows = []
    for metric in metrics:
        for sampler in samplers:
            for x in xs:
                cell = [r for r in records if r.sampler == sampler and r.x_value == x]
                if not cell:
                    continue
                values = metric_values(records, sampler, x, metric)
                excluded = len(cell) - len(values)
                if len(values) >= 2:
                    mean, sem = mean_sem(list(values.values()))
                else:
                    mean = sem = float("nan")
                p_values = {}
                for other in samplers:
                    if other == sampler:
                        continue
                    try:
                        p_values[other] = compare(records, sampler, other, x, metric)
                    except InputError:
                        p_values[other] = float("nan")
                rows.append(SummaryRow(sampler, x, metric, mean, sem, len(values), excluded, p_values))
    return rows

