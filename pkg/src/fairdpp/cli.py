"""Command line entry point: ``fairdpp {generate,exp1,exp2,exp3,sample,validate}``.

Experiment settings start from the packaged defaults, then command line
flags are applied, then a ``--config`` JSON file, whose keys win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from fairdpp import __version__
from fairdpp.datasets import SyntheticConfig, generate_synthetic, load_dataset, write_dataset
from fairdpp.errors import FairDPPError, InfeasibleQuotaError, InputError
from fairdpp.experiments import SAMPLERS, ExperimentConfig, default_config, run_experiment, summarize
from fairdpp.kernel import FeatureMatrix, Kernel, build_gram_kernel, log_det_submatrix, spectral_decompose
from fairdpp.oracle import empirical_distribution, enumerate_kdpp, enumerate_pdpp, tv_distance
from fairdpp.outputs import emit_outputs
from fairdpp.partitions import LabelDimension, QuotaConstraint, effective_diversity
from fairdpp.samplers import (
    sample_kdpp_exact,
    sample_kidpp,
    sample_pdpp_mcmc,
    sample_pdpp_mcmc_batch,
    sample_uniform,
)

EXIT_OK, EXIT_CONFIG, EXIT_QUOTA, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("fairdpp")


def _read_json(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data


def _add_experiment_parser(sub, number: int) -> None:
    p = sub.add_parser(f"exp{number}", help=f"run experiment {number}")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; overrides flags")
    p.add_argument("--out", "--output-dir", dest="output_dir", help="directory for CSV, manifest and plots")
    p.add_argument("--x-values", type=float, nargs="+", help="k grid, or bias grid for exp3")
    p.add_argument("--k", type=int, help="fixed sample size (exp3)")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--samplers", nargs="+", choices=SAMPLERS)
    p.add_argument("--constrained-dimension")
    p.add_argument("--measured-dimension")
    p.add_argument("--burn-in-factor", type=int)
    p.add_argument("--master-seed", type=int)
    p.add_argument("--normalize", choices=("l2", "l1", "none"))
    p.add_argument("--features", dest="features_path")
    p.add_argument("--labels", dest="labels_path")
    p.add_argument("--synthetic", help="JSON file with a SyntheticConfig")
    p.set_defaults(experiment=number)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairdpp", description="Fair and diverse subset sampling.")
    parser.add_argument("--version", action="version", version=f"fairdpp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset as features/labels CSV")
    g.add_argument("--config", help="JSON file with SyntheticConfig fields")
    g.add_argument("--preset", type=int, choices=(1, 2, 3),
                   help="use the dataset of a packaged experiment config")
    g.add_argument("--seed", type=int)
    g.add_argument("--features", required=True)
    g.add_argument("--labels", required=True)

    for number in (1, 2, 3):
        _add_experiment_parser(sub, number)

    s = sub.add_parser("sample", help="draw one subset")
    s.add_argument("--features", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--sampler", choices=SAMPLERS, default="P-DPP")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--dimension", default=None, help="label dimension for quotas (default: first)")
    s.add_argument("--quotas", type=int, nargs="+", help="per-part counts (default: balanced)")
    s.add_argument("--normalize", choices=("l2", "l1", "none"), default="l2")
    s.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("validate", help="compare samplers with exact enumeration on small instances")
    v.add_argument("--instances", type=int, default=3)
    v.add_argument("--draws", type=int, default=20000)
    v.add_argument("--seed", type=int, default=0)
    return parser


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    data = default_config(args.experiment).to_dict()
    flags = {
        "x_values": args.x_values, "k": args.k, "repetitions": args.repetitions,
        "samplers": args.samplers, "constrained_dimension": args.constrained_dimension,
        "measured_dimension": args.measured_dimension, "burn_in_factor": args.burn_in_factor,
        "master_seed": args.master_seed, "normalize": args.normalize, "output_dir": args.output_dir,
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    if args.features_path or args.labels_path:
        data.update(features_path=args.features_path, labels_path=args.labels_path, synthetic=None)
    if args.synthetic:
        data.update(synthetic=_read_json(args.synthetic), features_path=None, labels_path=None)
    if args.config:
        data.update(_read_json(args.config))
    data["experiment"] = args.experiment
    return ExperimentConfig.from_dict(data)


def cmd_experiment(args) -> int:
    cfg = experiment_config(args)
    out_dir = cfg.output_dir or f"exp{cfg.experiment}-out"
    records = run_experiment(cfg, progress=log.info)
    summary = summarize(records)
    for path in emit_outputs(summary, records, cfg, out_dir):
        print(path)
    failed = sum(r.error is not None for r in records)
    if failed:
        print(f"{failed} draws failed; see the error column of records.csv", file=sys.stderr)
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.config and args.preset:
        raise InputError("give either --config or --preset, not both")
    if args.config:
        data = _read_json(args.config)
    elif args.preset:
        data = default_config(args.preset).synthetic.to_dict()
    else:
        data = {}
    if args.seed is not None:
        data["seed"] = args.seed
    ds = generate_synthetic(SyntheticConfig.from_dict(data))
    write_dataset(ds, args.features, args.labels)
    print(f"wrote {ds.n} items to {args.features} and {args.labels}")
    return EXIT_OK


def cmd_sample(args) -> int:
    ds = load_dataset(args.features, args.labels)
    kernel = ds.kernel(args.normalize)
    dim: LabelDimension = ds.dimension(args.dimension) if args.dimension else ds.dimensions[0]
    rng = np.random.default_rng(args.seed)
    if args.sampler == "UNIF":
        subset = sample_uniform(ds.n, args.k, rng)
    elif args.sampler == "k-DPP":
        subset = sample_kdpp_exact(spectral_decompose(kernel), args.k, rng)
    else:
        quota = (QuotaConstraint(dim, tuple(args.quotas)) if args.quotas
                 else QuotaConstraint.balanced(dim, args.k))
        if quota.k != args.k:
            raise InputError(f"quotas {quota.quotas} sum to {quota.k}, not k={args.k}")
        sampler = sample_kidpp if args.sampler == "k_i-DPP" else sample_pdpp_mcmc
        subset = sampler(kernel, quota, rng)
    print(json.dumps({
        "sampler": args.sampler,
        "subset": [int(i) for i in subset],
        "effective_diversity": effective_diversity(subset, dim),
        "ln_G": log_det_submatrix(kernel, subset),
    }))
    return EXIT_OK


def cmd_validate(args) -> int:
    """Total variation between sampler output and enumeration on random 10-item instances."""
    rng = np.random.default_rng(args.seed)
    dim = LabelDimension("half", np.repeat([0, 1], 5), 2)
    quota = QuotaConstraint(dim, (2, 2))
    worst = 0.0
    for i in range(args.instances):
        features = rng.random((10, 6))
        kernel: Kernel = build_gram_kernel(FeatureMatrix(features))
        kdpp = tv_distance(
            empirical_distribution(sample_kdpp_exact(spectral_decompose(kernel), 3, rng)
                                   for _ in range(args.draws)),
            enumerate_kdpp(kernel, 3))
        pdpp = tv_distance(
            empirical_distribution(sample_pdpp_mcmc_batch(kernel, quota, args.draws, rng)),
            enumerate_pdpp(kernel, quota))
        worst = max(worst, kdpp, pdpp)
        print(f"instance {i}: TV k-DPP={kdpp:.4f}  TV P-DPP={pdpp:.4f}")
    print(f"worst TV {worst:.4f} over {args.draws} draws per sampler")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "sample": cmd_sample, "validate": cmd_validate,
            "exp1": cmd_experiment, "exp2": cmd_experiment, "exp3": cmd_experiment}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InfeasibleQuotaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_QUOTA
    except (InputError, FairDPPError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
