"""Command-line front end for the experiment suite.

Four subcommands: "gradcheck" (finite-difference audit of the smoothed
backward pass), "toy" (single-neuron study), "sweep" (learning-rate cross
with the reset-gradient term on and off), and "mnist" (dense digit
classifier on IDX files).  Every run writes CSV tables plus a manifest.json
whose "command" entry, replayed against a fresh output directory, reproduces
the CSVs byte for byte.

Exit codes: 0 success, 1 a numerical check failed, 2 usage error, 3 dataset
file missing or unreadable.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .backprop import GradConfig
from .data import IdxError, load_idx
from .gradcheck import DEFAULT_FD_STEP, run_suite
from .neurons import LifParams
from .training import (
    TrainConfig,
    lr_sweep,
    run_toy_trial,
    train_classifier,
)

__all__ = ["build_parser", "main"]

OUT_ENV_VAR = "SPIKEGRAD_OUT"
DEFAULT_OUT = "spikegrad-out"
DEFAULT_SWEEP_LRS = "0.001,0.005,0.01,0.02"


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _lr_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad learning-rate list: {text!r}")
    if not values or any(not v > 0 for v in values):
        raise argparse.ArgumentTypeError(f"bad learning-rate list: {text!r}")
    return values


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--out",
        default=None,
        help=f"output directory (default ${OUT_ENV_VAR} or ./{DEFAULT_OUT})",
    )
    parser.add_argument(
        "--config",
        default=None,
        help="JSON file of flag defaults; explicit flags win",
    )
    parser.add_argument("--seed", type=int, default=0, help="base random seed")
    parser.add_argument("--svg", action="store_true", help="also write SVG figures")


def _add_neuron(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tau-m", type=_positive_float, default=6.0,
                        help="membrane time constant (steps)")
    parser.add_argument("--tau-s", type=_positive_float, default=2.0,
                        help="synaptic filter time constant (steps)")
    parser.add_argument("--theta", type=_positive_float, default=1.0,
                        help="firing threshold")
    parser.add_argument("--temp", type=_positive_float, default=0.3,
                        help="surrogate sigmoid temperature")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikegrad",
        description="Spiking-network training experiments with a switchable "
        "reset-mechanism gradient term.",
    )
    parser.add_argument("--version", action="version", version=f"spikegrad {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gradcheck", help="compare analytic gradients of the "
                       "smoothed network against central finite differences")
    _add_common(p)
    p.add_argument("--instances", type=_positive_int, default=100,
                   help="number of random instances")
    p.add_argument("--tol", type=_positive_float, default=1e-5,
                   help="max relative error allowed per instance")
    p.add_argument("--temp", type=_positive_float, default=0.3,
                   help="surrogate sigmoid temperature")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("toy", help="train one neuron on 50 random inputs")
    _add_common(p)
    _add_neuron(p)
    p.add_argument("--lr", type=_positive_float, default=0.005, help="learning rate")
    p.add_argument("--seeds", type=_positive_int, default=1, metavar="N",
                   help="number of trials, seeded seed, seed+1, ...")
    p.add_argument("--iterations", type=_positive_int, default=200,
                   help="training iterations per trial")
    p.add_argument("--no-reset-term", action="store_true",
                   help="drop the reset contribution from the temporal gradient")
    p.add_argument("--phases", action="store_true",
                   help="also write the four backward phases of the first "
                   "seed's final iteration")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("sweep", help="learning-rate cross, reset term on vs off")
    _add_common(p)
    _add_neuron(p)
    p.add_argument("--lrs", type=_lr_list, default=None,
                   help=f"comma-separated learning rates (default {DEFAULT_SWEEP_LRS})")
    p.add_argument("--seeds", type=_positive_int, default=20, metavar="N",
                   help="paired trials per cell, seeded seed, seed+1, ...")
    p.add_argument("--iterations", type=_positive_int, default=200,
                   help="training iterations per trial")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mnist", help="dense spiking classifier on IDX digit files")
    _add_common(p)
    _add_neuron(p)
    p.add_argument("--mnist-images", required=True, help="IDX image file")
    p.add_argument("--mnist-labels", required=True, help="IDX label file")
    p.add_argument("--subset", type=_positive_int, default=1000,
                   help="train on the first N images, test on the next N")
    p.add_argument("--epochs", type=_positive_int, default=10)
    p.add_argument("--batch", type=_positive_int, default=32, help="mini-batch size")
    p.add_argument("--lr", type=_positive_float, default=0.005, help="learning rate")
    p.add_argument("--hidden", type=_positive_int, default=100,
                   help="hidden layer width")
    p.add_argument("--steps", type=_positive_int, default=30,
                   help="simulation steps per image")
    p.set_defaults(func=cmd_mnist)

    return parser


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace,
                  argv: list[str]) -> None:
    """Fill unset flags from the JSON config file; flags given on the command
    line keep their values."""
    if args.config is None:
        return
    try:
        with open(args.config) as f:
            loaded = json.load(f)
    except OSError as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    except json.JSONDecodeError as exc:
        parser.error(f"bad JSON in {args.config}: {exc}")
    if not isinstance(loaded, dict):
        parser.error(f"config {args.config} must be a JSON object")
    given = {token.split("=", 1)[0] for token in argv if token.startswith("--")}
    for key, value in loaded.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or attr in ("config", "func", "command"):
            continue
        if f"--{key}" in given:
            continue
        if isinstance(value, list):
            value = [float(v) for v in value]
        setattr(args, attr, value)


def _resolve_out(args: argparse.Namespace) -> Path:
    out = args.out or os.environ.get(OUT_ENV_VAR) or DEFAULT_OUT
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump_manifest(outdir: Path, manifest: dict) -> None:
    with open(outdir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _begin_manifest(outdir: Path, command: list[str]) -> None:
    """Provisional manifest so an interrupted run still records its command."""
    _dump_manifest(outdir, {
        "tool": "spikegrad",
        "version": __version__,
        "command": command,
        "status": "running",
    })


def _write_manifest(outdir: Path, command: list[str], csv_names: list[str],
                    figure_names: list[str]) -> None:
    _dump_manifest(outdir, {
        "tool": "spikegrad",
        "version": __version__,
        "command": command,
        "status": "complete",
        "outputs": {name: _sha256(outdir / name) for name in csv_names},
        "figures": figure_names,
    })


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "spikegrad"
    import matplotlib.pyplot as plt

    return plt


def _save_figure(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def _lif_from(args: argparse.Namespace) -> LifParams:
    return LifParams(tau_m=args.tau_m, tau_s=args.tau_s, theta=args.theta,
                     temp=args.temp)


def _common_argv(args: argparse.Namespace) -> list[str]:
    argv = ["--seed", str(args.seed)]
    if args.svg:
        argv.append("--svg")
    return argv


def _neuron_argv(args: argparse.Namespace) -> list[str]:
    return [
        "--tau-m", _fmt(args.tau_m),
        "--tau-s", _fmt(args.tau_s),
        "--theta", _fmt(args.theta),
        "--temp", _fmt(args.temp),
    ]


def cmd_gradcheck(args: argparse.Namespace) -> int:
    outdir = _resolve_out(args)
    command = (["gradcheck"] + _common_argv(args)
               + ["--instances", str(args.instances), "--tol", _fmt(args.tol),
                  "--temp", _fmt(args.temp)])
    _begin_manifest(outdir, command)
    rows = run_suite(args.instances, base_seed=args.seed, temp=args.temp,
                     h=DEFAULT_FD_STEP)
    _write_csv(outdir / "gradcheck.csv",
               ["instance_id", "seed", "layers", "max_rel_err"], rows)
    figures = []
    if args.svg:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        errs = [row[3] for row in rows]
        ax.semilogy(range(len(errs)), errs, ".", markersize=4)
        ax.axhline(args.tol, color="red", linewidth=1)
        ax.set_xlabel("instance")
        ax.set_ylabel("max relative error")
        _save_figure(fig, outdir / "gradcheck.svg")
        plt.close(fig)
        figures.append("gradcheck.svg")
    _write_manifest(outdir, command, ["gradcheck.csv"], figures)
    worst = max(row[3] for row in rows)
    ok = worst <= args.tol
    print(f"gradcheck: {args.instances} instances, max rel err {worst:.3e} "
          f"(tol {args.tol:.1e}): {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_toy(args: argparse.Namespace) -> int:
    outdir = _resolve_out(args)
    variant = "reset_off" if args.no_reset_term else "reset_on"
    command = (["toy"] + _common_argv(args) + _neuron_argv(args)
               + ["--lr", _fmt(args.lr), "--seeds", str(args.seeds),
                  "--iterations", str(args.iterations)])
    if args.no_reset_term:
        command.append("--no-reset-term")
    if args.phases:
        command.append("--phases")
    _begin_manifest(outdir, command)
    cfg = TrainConfig(
        lr=args.lr,
        iterations=args.iterations,
        lif=_lif_from(args),
        grad=GradConfig(with_reset_term=not args.no_reset_term, temp=args.temp),
    )
    rows = []
    first_result = None
    converged = []
    for i in range(args.seeds):
        seed = args.seed + i
        result = run_toy_trial(replace(cfg, seed=seed))
        if first_result is None:
            first_result = result
        converged.append(result.converged_at)
        for it, loss in enumerate(result.losses):
            rows.append((it, seed, variant, loss))
    _write_csv(outdir / "toy.csv", ["iteration", "seed", "variant", "loss"], rows)

    csvs = ["toy.csv"]
    if args.phases:
        report = first_result.final_report
        n_steps = report.phase_a.shape[1]
        phase_rows = [
            (t, report.phase_a[0, t], report.phase_b[0, t],
             report.phase_c[0, t], report.phase_d[0, t])
            for t in range(n_steps)
        ]
        _write_csv(outdir / "phases.csv",
                   ["step", "phase_a", "phase_b", "phase_c", "phase_d"],
                   phase_rows)
        csvs.append("phases.csv")

    figures = []
    if args.svg:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        curves = np.array(
            [[loss for it, s, _, loss in rows if s == args.seed + i]
             for i in range(args.seeds)]
        )
        mean = curves.mean(axis=0)
        ax.plot(mean, "-", color="tab:blue", linewidth=1.5, label=f"mean ({variant})")
        if args.seeds > 1:
            std = curves.std(axis=0)
            ax.plot(mean + std, "--", color="tab:blue", linewidth=0.8)
            ax.plot(mean - std, "--", color="tab:blue", linewidth=0.8)
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
        ax.legend()
        _save_figure(fig, outdir / "toy.svg")
        plt.close(fig)
        figures.append("toy.svg")

    _write_manifest(outdir, command, csvs, figures)

    n_conv = sum(1 for c in converged if c is not None)
    med = (int(np.median([c for c in converged if c is not None]))
           if n_conv else None)
    print(f"toy ({variant}): {n_conv}/{args.seeds} trials matched the target "
          f"exactly; median first-match iteration {med}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    outdir = _resolve_out(args)
    lrs = args.lrs if args.lrs is not None else _lr_list(DEFAULT_SWEEP_LRS)
    command = (["sweep"] + _common_argv(args) + _neuron_argv(args)
               + ["--lrs", ",".join(_fmt(lr) for lr in lrs),
                  "--seeds", str(args.seeds),
                  "--iterations", str(args.iterations)])
    _begin_manifest(outdir, command)
    seeds = [args.seed + i for i in range(args.seeds)]
    cfg = TrainConfig(
        iterations=args.iterations,
        lif=_lif_from(args),
        grad=GradConfig(temp=args.temp),
    )
    sweep = lr_sweep(lrs, seeds, cfg)
    rows = []
    for lr in lrs:
        for name, with_reset in (("reset_on", True), ("reset_off", False)):
            cell = sweep.cells[(lr, with_reset)]
            for it in range(args.iterations):
                rows.append((lr, it, name, cell.mean_loss[it], cell.std_loss[it]))
    _write_csv(outdir / "sweep.csv",
               ["lr", "iteration", "variant", "mean_loss", "std_loss"], rows)

    figures = []
    if args.svg:
        # mean solid, mean +/- one std dashed, one panel per learning rate
        plt = _figure()
        fig, axes = plt.subplots(1, len(lrs), figsize=(3.2 * len(lrs), 3.4),
                                 sharey=True, squeeze=False)
        for ax, lr in zip(axes[0], lrs):
            for name, with_reset, color in (("reset on", True, "tab:blue"),
                                            ("reset off", False, "tab:orange")):
                cell = sweep.cells[(lr, with_reset)]
                ax.plot(cell.mean_loss, "-", color=color, linewidth=1.4,
                        label=name)
                ax.plot(cell.mean_loss + cell.std_loss, "--", color=color,
                        linewidth=0.7)
                ax.plot(cell.mean_loss - cell.std_loss, "--", color=color,
                        linewidth=0.7)
            ax.set_title(f"lr={lr}", fontsize=9)
            ax.set_xlabel("iteration")
        axes[0][0].set_ylabel("loss")
        axes[0][0].legend(fontsize=8)
        fig.tight_layout()
        _save_figure(fig, outdir / "sweep.svg")
        plt.close(fig)
        figures.append("sweep.svg")

    _write_manifest(outdir, command, ["sweep.csv"], figures)

    for lr in lrs:
        on = sweep.cells[(lr, True)].mean_loss[-1]
        off = sweep.cells[(lr, False)].mean_loss[-1]
        print(f"sweep lr={lr}: final mean loss reset_on={on:.4f} "
              f"reset_off={off:.4f}")
    return 0


def cmd_mnist(args: argparse.Namespace) -> int:
    outdir = _resolve_out(args)
    command = (["mnist"] + _common_argv(args) + _neuron_argv(args)
               + ["--mnist-images", args.mnist_images,
                  "--mnist-labels", args.mnist_labels,
                  "--subset", str(args.subset),
                  "--epochs", str(args.epochs),
                  "--batch", str(args.batch),
                  "--lr", _fmt(args.lr),
                  "--hidden", str(args.hidden),
                  "--steps", str(args.steps)])
    _begin_manifest(outdir, command)
    for path in (args.mnist_images, args.mnist_labels):
        if not os.path.exists(path):
            print(f"error: dataset file not found: {path}", file=sys.stderr)
            return 3
    try:
        images = load_idx(args.mnist_images, args.mnist_labels)
    except IdxError as exc:
        print(f"error: cannot load dataset: {exc}", file=sys.stderr)
        return 3
    if len(images) < 2 * args.subset:
        print(f"error: need {2 * args.subset} images for --subset "
              f"{args.subset}, file has {len(images)}", file=sys.stderr)
        return 2
    train = images.subset(0, args.subset)
    test = images.subset(args.subset, 2 * args.subset)
    cfg = TrainConfig(
        lr=args.lr,
        lif=_lif_from(args),
        grad=GradConfig(temp=args.temp),
        seed=args.seed,
    )
    results = train_classifier(
        train, test,
        hidden_sizes=(args.hidden,),
        cfg=cfg,
        epochs=args.epochs,
        batch_size=args.batch,
        n_steps=args.steps,
    )
    rows = []
    for name in ("reset_on", "reset_off"):
        result = results[name]
        for epoch in range(len(result.train_acc)):
            rows.append((epoch, args.seed, name,
                         result.train_acc[epoch], result.test_acc[epoch]))
    _write_csv(outdir / "mnist.csv",
               ["epoch", "seed", "variant", "train_acc", "test_acc"], rows)

    figures = []
    if args.svg:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, style in (("reset_on", "-"), ("reset_off", "--")):
            result = results[name]
            ax.plot(result.train_acc, style, color="tab:blue",
                    label=f"train {name}")
            ax.plot(result.test_acc, style, color="tab:orange",
                    label=f"test {name}")
        ax.set_xlabel("epoch")
        ax.set_ylabel("accuracy")
        ax.legend(fontsize=8)
        _save_figure(fig, outdir / "mnist.svg")
        plt.close(fig)
        figures.append("mnist.svg")

    _write_manifest(outdir, command, ["mnist.csv"], figures)

    for name in ("reset_on", "reset_off"):
        result = results[name]
        print(f"mnist {name}: final train acc {result.train_acc[-1]:.4f}, "
              f"test acc {result.test_acc[-1]:.4f}")
    return 0


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_config(parser, args, list(argv))
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
