"""Command line interface for memo-qcd."""
import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from .codec import circuit_metrics
from .config import command_defaults, get_config, resolve_threads
from .console import bcolors, print_box, printc
from .data import GENERATORS, DatasetFormatException, generate, read_csv, scale_to_interval, write_csv
from .dmkde import DMKDEModel, ModelFileException, density_grid, estimate_exact, estimate_shots
from .evaluation import evaluate_model_kld
from .manifest import RunManifest, store_log
from .optimize import GRADIENT_METHODS, SEARCH_MODES, NumericalDivergenceException, SearchConfig
from .qfm import KernelSpec
from .sim import SimulationResourceException
from .sweep import SWEEP_KINDS, dataset_sweep, layout_sweep, qfm_sweep, search_feature_map, summarize
from .trainstate import OBJECTIVES, HEALayout, train_state_circuit

RUNTIME_ERRORS = (
    NumericalDivergenceException,
    SimulationResourceException,
    ModelFileException,
    DatasetFormatException,
    ValueError,
)


def _add_common(parser: argparse.ArgumentParser, out_required: bool = True) -> None:
    parser.add_argument(
        "--seed",
        dest="seed",
        type=int,
        help="seed of all random streams of the run",
        required=False,
        default=0,
    )

    parser.add_argument(
        "--out",
        dest="out",
        type=str,
        help="output file",
        required=out_required,
        default=None,
    )

    parser.add_argument(
        "--threads",
        dest="threads",
        type=int,
        help="maximum number of worker threads (default: $MEMOQCD_THREADS or 1)",
        required=False,
        default=None,
    )

    parser.add_argument(
        "--verbose",
        dest="verbose",
        action="store_true",
        help="Be verbose",
        required=False,
        default=False,
    )

    parser.add_argument(
        "--log-path",
        dest="log_path",
        type=str,
        help="log file path - if supplied, the run manifest is also written as .xlsx and .md table",
        required=False,
        default=None,
    )


def build_parser(config: Optional[Dict] = None) -> argparse.ArgumentParser:
    """
    Build the argument parser with one sub-command per pipeline stage.

    :param config: Configuration file content, its sections override the flag defaults
    :return: ArgumentParser
    """
    parser = argparse.ArgumentParser(
        description="Quantum density estimation with memetic circuit design",
        formatter_class=argparse.RawTextHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    search = subparsers.add_parser("qfm-search", help="search a feature map circuit for the Gaussian kernel")
    search.add_argument("--mode", dest="mode", choices=SEARCH_MODES, default="memetic", help="search method")
    search.add_argument("--qubits", dest="qubits", type=int, default=2, help="qubits per feature n_x")
    search.add_argument("--gamma", dest="gamma", type=float, default=0.1, help="kernel bandwidth")
    search.add_argument("--pairs", dest="pairs", type=int, default=10_000, help="number of training pairs")
    search.add_argument(
        "--interval", dest="interval", type=float, nargs=2, default=[-3.0, 3.0], metavar=("A", "B"),
        help="interval the training pairs are drawn from",
    )
    search.add_argument("--generations", dest="generations", type=int, default=30, help="generations")
    search.add_argument("--population", dest="population", type=int, default=15, help="individuals per generation")
    search.add_argument("--epochs", dest="epochs", type=int, default=2000, help="gradient descent epochs")
    search.add_argument("--lr", dest="lr", type=float, default=0.2, help="learning rate")
    search.add_argument("--gates", dest="gates", type=int, default=8, help="genes per chromosome")
    search.add_argument("--hea-layers", dest="hea_layers", type=int, default=1, help="HEA layers (mode hea)")
    search.add_argument(
        "--gradient", dest="gradient", choices=GRADIENT_METHODS, default="parameter-shift", help="gradient method"
    )
    search.add_argument("--trace", dest="trace", type=str, default=None, help="trace CSV (default: <out>.trace.csv)")
    _add_common(search)

    train = subparsers.add_parser("train", help="train the training state circuit of a model stub")
    train.add_argument("--model", dest="model", type=str, required=True, help="model stub from qfm-search")
    train.add_argument("--data", dest="data", type=str, required=True, help="dataset CSV")
    train.add_argument("--layers", dest="layers", type=int, default=2, help="HEA layers n_l")
    train.add_argument("--aux", dest="aux", type=int, default=1, help="auxiliary qubits n_a")
    train.add_argument("--epochs", dest="epochs", type=int, default=5000, help="gradient ascent epochs")
    train.add_argument("--lr", dest="lr", type=float, default=0.4, help="learning rate")
    train.add_argument("--objective", dest="objective", choices=OBJECTIVES, default="log-sum", help="log-likelihood form")
    train.add_argument(
        "--gradient", dest="gradient", choices=GRADIENT_METHODS, default="parameter-shift", help="gradient method"
    )
    train.add_argument(
        "--no-scale", dest="no_scale", action="store_true", default=False,
        help="use the data as is instead of scaling it onto the kernel interval",
    )
    train.add_argument(
        "--norm-resolution", dest="norm_resolution", type=int, default=64,
        help="grid cells per dimension for the normalisation constant (0 to skip)",
    )
    train.add_argument("--trace", dest="trace", type=str, default=None, help="trace CSV (default: <out>.trace.csv)")
    _add_common(train, out_required=False)

    estimate = subparsers.add_parser("estimate", help="estimate the density at a point or on a grid")
    estimate.add_argument("--model", dest="model", type=str, required=True, help="trained model")
    target = estimate.add_mutually_exclusive_group(required=True)
    target.add_argument(
        "--point", dest="point", type=str, default=None,
        help='query point "x,y" (write --point=-1,2 if the first coordinate is negative)',
    )
    target.add_argument("--grid", dest="grid", type=int, default=None, help="grid cells per dimension")
    estimate.add_argument(
        "--bounds", dest="bounds", type=str, default=None, metavar="MIN,MAX,...",
        help="grid range as MIN,MAX per dimension, e.g. --bounds=-3,3,-2,2 (default: padded data bounding box)",
    )
    estimate.add_argument("--mode", dest="mode", choices=("exact", "shots"), default="exact", help="estimation mode")
    estimate.add_argument("--shots", dest="shots", type=int, default=10_000, help="measurements per point")
    _add_common(estimate, out_required=False)

    kld = subparsers.add_parser("kld", help="estimate the KLD between a dataset and a model")
    kld.add_argument("--model", dest="model", type=str, required=True, help="trained model")
    kld.add_argument("--data", dest="data", type=str, required=True, help="dataset CSV")
    kld.add_argument("--seeds", dest="seeds", type=int, default=50, help="number of sampling seeds")
    kld.add_argument("--k", dest="k", type=int, default=5, help="neighbour rank")
    kld.add_argument("--padding", dest="padding", type=float, default=3.0, help="sampling padding in 1/sqrt(gamma)")
    _add_common(kld)

    datagen = subparsers.add_parser("datagen", help="generate a synthetic dataset")
    datagen.add_argument("--name", dest="name", choices=sorted(GENERATORS), default="two-moons", help="generator")
    datagen.add_argument("--n", dest="n", type=int, default=1000, help="number of points")
    datagen.add_argument("--noise", dest="noise", type=float, default=None, help="noise level")
    _add_common(datagen)

    sweep = subparsers.add_parser("sweep", help="compare search methods, model layouts or datasets")
    sweep.add_argument("--kind", dest="kind", choices=SWEEP_KINDS, required=True, help="sweep to run")
    sweep.add_argument(
        "--qubits", dest="qubits", type=int, nargs="+", default=None,
        help="qubits per feature n_x (default: 2 3 4, kind datasets: 2)",
    )
    sweep.add_argument(
        "--layers", dest="layers", type=int, nargs="+", default=None,
        help="training circuit layers n_l (default: 2 3 4 5, kind datasets: 5)",
    )
    sweep.add_argument("--runs", dest="runs", type=int, default=5, help="seeds per qubit count (kind qfm)")
    sweep.add_argument(
        "--datasets", dest="datasets", nargs="+", choices=sorted(GENERATORS), default=sorted(GENERATORS),
        help="generators (kind datasets)",
    )
    sweep.add_argument(
        "--data", dest="data", type=str, default=None, help="dataset CSV (kind layout, default: generated two-moons)"
    )
    sweep.add_argument(
        "--n", dest="n", type=int, default=None,
        help="points per generated dataset (default: 1000, kind datasets: 2000)",
    )
    sweep.add_argument("--gamma", dest="gamma", type=float, default=0.1, help="kernel bandwidth")
    sweep.add_argument("--pairs", dest="pairs", type=int, default=10_000, help="number of training pairs")
    sweep.add_argument("--generations", dest="generations", type=int, default=30, help="generations")
    sweep.add_argument("--population", dest="population", type=int, default=15, help="individuals per generation")
    sweep.add_argument("--epochs", dest="epochs", type=int, default=2000, help="search gradient descent epochs")
    sweep.add_argument("--lr", dest="lr", type=float, default=0.2, help="search learning rate")
    sweep.add_argument("--gates", dest="gates", type=int, default=8, help="genes per chromosome")
    sweep.add_argument(
        "--gradient", dest="gradient", choices=GRADIENT_METHODS, default="parameter-shift", help="gradient method"
    )
    sweep.add_argument("--train-epochs", dest="train_epochs", type=int, default=5000, help="training epochs")
    sweep.add_argument("--train-lr", dest="train_lr", type=float, default=0.4, help="training learning rate")
    sweep.add_argument("--aux", dest="aux", type=int, default=1, help="auxiliary qubits n_a")
    sweep.add_argument(
        "--resolution", dest="resolution", type=int, default=32, help="grid cells per dimension of the KDE comparison"
    )
    sweep.add_argument("--kld-seeds", dest="kld_seeds", type=int, default=50, help="sampling seeds of the KLD")
    sweep.add_argument("--k", dest="k", type=int, default=5, help="neighbour rank")
    _add_common(sweep)

    for name, subparser in subparsers.choices.items():
        subparser.set_defaults(**command_defaults(config or dict(), name))

    return parser


def _companion(out: str, suffix: str) -> Path:
    return Path(str(Path(out).with_suffix("")) + suffix)


def _check_file(parser: argparse.ArgumentParser, path: str, what: str) -> None:
    if not Path(path).is_file():
        parser.error(f"{what} {path} does not exist")


def _parse_floats(parser: argparse.ArgumentParser, text: str, what: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        parser.error(f'{what} must be comma separated numbers, got "{text}"')
        raise


def _validate(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    positive = {
        "qfm-search": ("qubits", "pairs", "generations", "population", "epochs", "gates", "hea_layers"),
        "train": ("layers", "aux", "epochs"),
        "estimate": ("shots",),
        "kld": ("seeds", "k"),
        "datagen": ("n",),
        "sweep": (
            "runs", "pairs", "generations", "population", "epochs", "gates",
            "train_epochs", "aux", "resolution", "kld_seeds", "k",
        ),
    }[args.command]
    for name in positive:
        if getattr(args, name) < 1:
            parser.error(f"--{name.replace('_', '-')} must be positive, got {getattr(args, name)}")

    if args.command == "sweep":
        for name in ("qubits", "layers"):
            values = getattr(args, name)
            if values is not None and min(values) < 1:
                parser.error(f"--{name} must be positive, got {values}")
        if args.kind == "datasets" and any(len(v or []) > 1 for v in (args.qubits, args.layers)):
            parser.error("--kind datasets takes a single --qubits and --layers value")
        if args.n is not None and args.n < 1:
            parser.error(f"--n must be positive, got {args.n}")
    if args.command in ("qfm-search", "sweep") and not args.gamma > 0:
        parser.error(f"--gamma must be positive, got {args.gamma}")

    if args.threads is not None and args.threads < 1:
        parser.error(f"--threads must be positive, got {args.threads}")
    if args.command == "estimate" and args.grid is not None and args.grid < 1:
        parser.error(f"--grid must be positive, got {args.grid}")
    if args.command == "qfm-search" and not args.interval[0] < args.interval[1]:
        parser.error(f"--interval must satisfy A < B, got {args.interval}")
    for name in ("model", "data"):
        if getattr(args, name, None) is not None:
            _check_file(parser, getattr(args, name), name.capitalize() + " file")


def run_qfm_search(args: argparse.Namespace, manifest: RunManifest) -> pd.DataFrame:
    """
    Search a feature map circuit and write the model stub and the trace.

    :param args: Parsed arguments
    :param manifest: Manifest of the run
    :return: generation (or epoch) trace
    """
    kernel = KernelSpec(gamma=args.gamma, interval=tuple(args.interval), n_pairs=args.pairs)
    config = SearchConfig(
        generations=args.generations,
        population=args.population,
        epochs=args.epochs,
        learning_rate=args.lr,
        n_gates=args.gates,
        n_qubits=args.qubits,
        seed=args.seed,
        mode=args.mode,
        hea_layers=args.hea_layers,
        gradient_method=args.gradient,
        threads=resolve_threads(args.threads),
    )
    manifest.config.update(config.to_dict())
    manifest.config.update(kernel.to_dict())

    print_box(f"Running {args.mode} search on {args.qubits} qubits")

    model, trace = search_feature_map(config, kernel, verbose=args.verbose)
    final_mse = model.search["final_mse"]
    metrics = circuit_metrics(model.qfm_circuit())

    printc(f"Final kernel MSE: {final_mse:.6g} (depth {metrics.depth}, gates {metrics.counts})", col=bcolors.OKGREEN)

    trace_path = Path(args.trace) if args.trace else _companion(args.out, ".trace.csv")
    model.save(args.out)
    trace.to_csv(trace_path, index=False, float_format="%.17g")
    manifest.add_artifact(args.out)
    manifest.add_artifact(trace_path)
    manifest.seeds["search"] = args.seed
    return trace


def run_train(args: argparse.Namespace, manifest: RunManifest) -> pd.DataFrame:
    """
    Train the training state circuit and complete the model.

    :param args: Parsed arguments
    :param manifest: Manifest of the run
    :return: log-likelihood trace
    """
    model = DMKDEModel.load(args.model)
    data = read_csv(args.data)
    a, b = model.kernel.interval

    if args.no_scale:
        train_data = data
        scale_transform = None
    else:
        train_data = scale_to_interval(data, a, b)
        scale_transform = train_data.scale_transform

    layout = HEALayout(n_x=model.n_x, d=data.d, n_a=args.aux, n_layers=args.layers)
    manifest.config.update(
        {"layout": layout.to_dict(), "epochs": args.epochs, "learning_rate": args.lr, "objective": args.objective}
    )

    print_box(f"Training the {layout.n_qubits}-qubit training circuit on {data.n} points")
    report = train_state_circuit(
        layout, model.feature_map(), train_data,
        epochs=args.epochs, learning_rate=args.lr, seed=args.seed,
        objective=args.objective, gradient_method=args.gradient, verbose=args.verbose,
    )
    printc(f"Log-likelihood: {report.initial:.6g} -> {report.final:.6g}", col=bcolors.OKGREEN)

    low, high = train_data.bounds()
    model = dataclasses.replace(
        model,
        d=data.d,
        layout=layout,
        hea_params=report.params,
        norm_constant=None,
        scale_transform=scale_transform,
        data_bounds=[(float(lo), float(hi)) for lo, hi in zip(low, high)],
        seeds={**model.seeds, "train": args.seed},
        training={**report.to_dict(), "data": str(args.data), "n_points": data.n},
    )

    if args.norm_resolution > 0:
        print_box("Computing the normalisation constant")
        density_grid(model, resolution=args.norm_resolution)
        printc(f"Normalisation constant: {model.norm_constant:.6g}", col=bcolors.OKGREEN)

    out = args.out or args.model
    trace_path = Path(args.trace) if args.trace else _companion(out, ".trace.csv")
    model.save(out)
    report.to_frame().to_csv(trace_path, index=False, float_format="%.17g")
    manifest.add_artifact(out)
    manifest.add_artifact(trace_path)
    manifest.seeds["train"] = args.seed
    return report.to_frame()


def run_estimate(args: argparse.Namespace, parser: argparse.ArgumentParser, manifest: RunManifest) -> pd.DataFrame:
    """
    Estimate the density at a point or on a grid.

    :param args: Parsed arguments
    :param parser: Parser (for usage errors)
    :param manifest: Manifest of the run
    :return: result table
    """
    model = DMKDEModel.load(args.model)
    if not model.is_trained:
        parser.error(f"Model {args.model} is a stub, run train first")
    manifest.config.update({"mode": args.mode, "shots": args.shots if args.mode == "shots" else None})

    if args.point is not None:
        point = _parse_floats(parser, args.point, "--point")
        if len(point) != model.d:
            parser.error(f"--point needs {model.d} coordinates, got {len(point)}")

        if args.mode == "exact":
            value = estimate_exact(model, point)
        else:
            value = estimate_shots(model, point, args.shots, args.seed)
        result = pd.DataFrame([point + [value]], columns=[f"x{j}" for j in range(model.d)] + ["estimate"])
        if model.norm_constant is not None:
            result["density"] = model.norm_constant * value

        print_box(f"Estimate at {args.point}")
        print(result.to_markdown(index=False))
        if args.out:
            result.to_csv(args.out, index=False, float_format="%.17g")
            manifest.add_artifact(args.out)
        return result

    bounds = None
    if args.bounds is not None:
        values = _parse_floats(parser, args.bounds, "--bounds")
        bounds = list(zip(values[0::2], values[1::2]))
        if len(values) != 2 * model.d or any(not lo < hi for lo, hi in bounds):
            parser.error(f"--bounds needs {model.d} ranges MIN,MAX with MIN < MAX")

    print_box(f"Evaluating the density on a {args.grid}^{model.d} grid ({args.mode})")
    grid = density_grid(model, bounds, args.grid, mode=args.mode, shots=args.shots, seed=args.seed)
    printc(f"Grid mass: {grid.mass():.6g}", col=bcolors.OKGREEN)

    if args.out:
        if Path(args.out).suffix.lower() == ".pgm":
            grid.to_pgm(args.out)
        else:
            grid.to_csv(args.out)
        manifest.add_artifact(args.out)
    return grid.to_frame()


def run_kld(args: argparse.Namespace, parser: argparse.ArgumentParser, manifest: RunManifest) -> pd.DataFrame:
    """
    Estimate the KLD between a dataset and a model over sampling seeds.

    :param args: Parsed arguments
    :param parser: Parser (for usage errors)
    :param manifest: Manifest of the run
    :return: per-seed table
    """
    model = DMKDEModel.load(args.model)
    if not model.is_trained:
        parser.error(f"Model {args.model} is a stub, run train first")
    data = read_csv(args.data)
    manifest.config.update({"seeds": args.seeds, "k": args.k, "padding": args.padding})

    print_box(f"Estimating the KLD over {args.seeds} seeds")
    report = evaluate_model_kld(
        model, data, n_seeds=args.seeds, k=args.k, seed=args.seed,
        padding=args.padding, threads=resolve_threads(args.threads),
    )
    printc(f"KLD: {report.mean:.6g} +- {report.std_dev:.6g}", col=bcolors.OKGREEN)

    report.to_csv(args.out)
    manifest.add_artifact(args.out)
    manifest.seeds["kld"] = args.seed
    return report.to_frame()


def run_datagen(args: argparse.Namespace, manifest: RunManifest) -> pd.DataFrame:
    """
    Generate a synthetic dataset.

    :param args: Parsed arguments
    :param manifest: Manifest of the run
    :return: generated points
    """
    manifest.config.update({"name": args.name, "n": args.n, "noise": args.noise})
    print_box(f"Generating {args.n} points of {args.name}")
    dataset = generate(args.name, args.n, args.noise, args.seed)
    write_csv(dataset, args.out)
    manifest.add_artifact(args.out)
    manifest.seeds["datagen"] = args.seed
    return dataset.to_frame()


def run_sweep(args: argparse.Namespace, manifest: RunManifest) -> pd.DataFrame:
    """
    Run a parameter sweep and write one result row per run.

    :param args: Parsed arguments
    :param manifest: Manifest of the run
    :return: sweep result
    """
    kernel = KernelSpec(gamma=args.gamma, n_pairs=args.pairs)
    threads = resolve_threads(args.threads)
    search = SearchConfig(
        generations=args.generations,
        population=args.population,
        epochs=args.epochs,
        learning_rate=args.lr,
        n_gates=args.gates,
        gradient_method=args.gradient,
        threads=threads,
    )
    single = args.kind == "datasets"
    qubits = args.qubits or ([2] if single else [2, 3, 4])
    layers = args.layers or ([5] if single else [2, 3, 4, 5])
    manifest.config.update(
        {
            "kind": args.kind,
            "qubits": qubits,
            "layers": layers,
            "kernel": kernel.to_dict(),
            "search": search.to_dict(),
            "train_epochs": args.train_epochs,
            "train_learning_rate": args.train_lr,
            "aux": args.aux,
        }
    )

    print_box(f"Running the {args.kind} sweep")
    if args.kind == "qfm":
        results = qfm_sweep(qubits, kernel, range(args.seed, args.seed + args.runs), search, verbose=args.verbose)
        summary = summarize(results, ["n_qubits", "method"], "mse")
    elif args.kind == "layout":
        dataset = read_csv(args.data) if args.data else generate("two-moons", args.n or 1000, seed=args.seed)
        manifest.config.update({"data": args.data or "two-moons", "n": dataset.n, "resolution": args.resolution})
        results = layout_sweep(
            dataset, kernel, qubits, layers, args.aux, search,
            args.train_epochs, args.train_lr, args.seed, args.resolution, args.verbose,
        )
        summary = results
    else:
        manifest.config.update({"datasets": args.datasets, "n": args.n or 2000, "kld_seeds": args.kld_seeds, "k": args.k})
        results = dataset_sweep(
            args.datasets, kernel, args.n or 2000, qubits[0], layers[0], args.aux, search,
            args.train_epochs, args.train_lr, args.seed, args.kld_seeds, args.k, threads, args.verbose,
        )
        summary = results

    print(summary.to_markdown(index=False))
    results.to_csv(args.out, index=False, float_format="%.17g")
    manifest.add_artifact(args.out)
    manifest.seeds["sweep"] = args.seed
    return results


def main(argv: Optional[List[str]] = None) -> None:
    """
    memo-qcd command line interface main.

    Exit codes: 0 on success, 1 on numerical or runtime failures, 2 on usage errors.

    :param argv: Arguments (default: sys.argv)
    :return: None
    """
    parser = build_parser(get_config(Path.cwd()))

    args = parser.parse_args(argv)
    _validate(parser, args)

    manifest = RunManifest(command=args.command)
    try:
        if args.command == "qfm-search":
            results = run_qfm_search(args, manifest)
        elif args.command == "train":
            results = run_train(args, manifest)
        elif args.command == "estimate":
            results = run_estimate(args, parser, manifest)
        elif args.command == "kld":
            results = run_kld(args, parser, manifest)
        elif args.command == "sweep":
            results = run_sweep(args, manifest)
        else:
            results = run_datagen(args, manifest)
    except RUNTIME_ERRORS as e:
        print_box(f"{args.command} failed: {e}", col=bcolors.FAIL)
        sys.exit(1)

    manifest.finish()
    out = args.out or getattr(args, "model", None)
    if manifest.artifacts and out is not None:
        manifest.save(_companion(out, ".manifest.json"))
    if args.log_path is not None:
        store_log(manifest, Path(args.log_path), results)

    print_box(f"{args.command} finished", col=bcolors.OKGREEN)
    sys.exit(0)


if __name__ == "__main__":
    main()
