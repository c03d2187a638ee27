"""Command-line interface.

Subcommands cover the full workflow: ``simulate`` builds a measurement
bundle, ``train`` fits an estimator, ``evaluate`` scores a checkpoint,
``compare`` tabulates several checkpoints, ``featselect`` runs greedy
forward feature selection, and ``opp`` solves PMU placement.

Every command takes ``--config FILE`` plus override flags, echoes its fully
resolved configuration into the output directory, and guards that
directory with a lock file.  Exit codes: 0 success, 1 usage or
configuration error, 2 data-format error, 3 numerical failure.
"""

import argparse
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .bundle import bundle_fingerprint, load_bundle, save_bundle, save_trace
from .config import default_config_text, resolve_config
from .errors import (AssemblyError, BundleFormatError, CaseFormatError,
                     CheckpointFormatError, ConfigError, GridInertiaError,
                     PipelineError, PlacementError, SelectionError,
                     SimulationError, TrainingDiverged)
from .featselect import greedy_forward_selection, make_dataset_scorer
from .grid import load_case
from .models import (DEFAULT_BASE_LR, TrainConfig, build_model, evaluate,
                     load_model, make_spec, observed_adjacency, predict,
                     save_model, train)
from .opp import (OBJECTIVE_MAX_OBSERVABILITY, OBJECTIVE_MIN_PMUS_FULL,
                  detect_zgib, solve_opp)
from .pipeline import SimConfig, assemble_dataset
from .report import (write_csv, write_error_hist_svg, write_history_csv,
                     write_learning_curve_svg, write_metrics_csv,
                     write_observability_csv, write_placement_csv,
                     write_predictions_csv, write_scatter_svg,
                     write_selection_csv)
from .rts24 import build_ieee24

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

LOCK_NAME = ".lock"
CONFIG_ECHO_NAME = "config.txt"


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


@contextmanager
def _output_dir(path):
    """Create the output directory, guarded by an exclusive lock file."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {out} is already in use by another invocation "
            f"(lock file {lock}); remove it if that run is gone") from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode("ascii"))
        os.close(fd)
        yield out
    finally:
        try:
            lock.unlink()
        except OSError:
            pass


def _load_system(cfg):
    case = cfg["case"]
    if case == "ieee24":
        return build_ieee24()
    if Path(case).exists():
        return load_case(case)
    raise ConfigError(f"unknown case {case!r}: not 'ieee24' and not a file")


def _resolve_buses(cfg, system):
    text = cfg["buses"]
    if text == "generators":
        return tuple(system.generator_buses())
    if text == "all":
        return tuple(b.id for b in system.buses)
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad buses value {text!r}: {exc}") from None


def _resolve_probe_bus(cfg):
    text = cfg["probe_bus"]
    if text == "auto":
        return None
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"bad probe_bus value {text!r}") from exc


def _base_lr(cfg):
    lr = cfg["base_lr"]
    return DEFAULT_BASE_LR[cfg["family"]] if lr is None else lr


def _train_config(cfg):
    return TrainConfig(max_epochs=cfg["epochs"], batch_size=cfg["batch_size"],
                       base_lr=_base_lr(cfg), momentum=cfg["momentum"],
                       lr_factor=cfg["lr_factor"],
                       lr_patience=cfg["lr_patience"], min_lr=cfg["min_lr"],
                       early_stop_patience=cfg["early_stop"],
                       seed=cfg["seed"])


def _check_bundle_case(dataset, system):
    if dataset.case_name != system.name:
        raise BundleFormatError(
            f"bundle was built from case {dataset.case_name!r} but the "
            f"configured case is {system.name!r}")


def _checkpoint_compat(meta, dataset, path):
    want = meta.get("data.fingerprint", "-")
    have = bundle_fingerprint(dataset)
    if want not in ("-", "") and want != have:
        raise BundleFormatError(
            f"checkpoint {path} is incompatible with this bundle: "
            f"trained on fingerprint {want}, bundle has {have}")


def _metrics_line(label, metrics):
    r2 = "n/a" if metrics.r2 is None else f"{metrics.r2:.4f}"
    return (f"{label:8s} n={metrics.n:4d} mu={metrics.mu:g} "
            f"acc={metrics.acc:.4f} mse={metrics.mse:.6f} r2={r2}")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_simulate(cfg, out):
    system = _load_system(cfg)
    buses = _resolve_buses(cfg, system)
    sink = None
    if cfg["raw_traces"]:
        raw_dir = out / "raw_traces"
        raw_dir.mkdir(exist_ok=True)
        bus_index = {}

        def sink(index, h, p_e, trace):
            if not bus_index:
                bus_index.update({b: i for i, b in enumerate(trace.bus_ids)})
                (raw_dir / "manifest.txt").write_text(
                    "format INRTDS01 single-record trace files\n"
                    f"rate {trace.rate!r}\n"
                    f"buses {' '.join(str(b) for b in buses)}\n"
                    "features delta_omega rocof v_mag\n"
                    "label system_inertia_s\n", encoding="ascii")
            rows = [bus_index[b] for b in buses]
            tensor = np.stack([trace.delta_omega[rows], trace.rocof[rows],
                               trace.v_mag[rows]], axis=1)
            save_trace(raw_dir / f"trace_{index:04d}.bin", h, tensor)

    sim = SimConfig(dt=cfg["dt"], duration=cfg["duration"],
                    droop_gain=cfg["droop_gain"],
                    governor_tc=cfg["governor_tc"], seed=cfg["seed"])
    dataset = assemble_dataset(
        system, sweep_h=cfg["h_sweep"], sweep_pe=cfg["pe_sweep"], buses=buses,
        features=cfg["features"], window=cfg["window"], snr_db=cfg["snr_db"],
        seed=cfg["seed"], probe_bus=_resolve_probe_bus(cfg),
        probe_kind=cfg["probe_kind"], probe_start=cfg["probe_start"],
        probe_width=cfg["probe_width"], probe_period=cfg["probe_period"],
        pmu_rate=cfg["pmu_rate"], target_rate=cfg["target_rate"],
        sim=sim, train_fraction=cfg["train_fraction"], trace_sink=sink)
    save_bundle(dataset, out)
    print(f"case {dataset.case_name}: {dataset.n_samples} samples "
          f"({len(dataset.sweep_h)} inertia values x "
          f"{len(dataset.sweep_pe)} amplitudes), "
          f"{len(dataset.train_idx)}/{len(dataset.val_idx)} train/val")
    print(f"buses {','.join(str(b) for b in dataset.buses)} | features "
          f"{','.join(f.value for f in dataset.features)} | rate "
          f"{dataset.rate:g} /s | window {dataset.window[0]:g}-"
          f"{dataset.window[1]:g} s | snr "
          f"{'clean' if dataset.snr_db is None else f'{dataset.snr_db:g} dB'}")
    print(f"bundle written to {out} (fingerprint "
          f"{bundle_fingerprint(dataset)[:16]})")
    return EXIT_OK


def cmd_train(cfg, out, bundle_path):
    dataset = load_bundle(bundle_path)
    family = cfg["family"]
    adjacency = None
    if family == "gcn":
        system = _load_system(cfg)
        _check_bundle_case(dataset, system)
        adjacency = observed_adjacency(system, dataset.buses)
    spec = make_spec(family, dataset, seed=cfg["seed"],
                     lstm_variant=cfg["lstm_variant"])
    model = build_model(spec, adjacency=adjacency)
    result = train(model, dataset, _train_config(cfg))
    ck_path = out / "checkpoint.bin"
    save_model(ck_path, model, spec, adjacency=adjacency,
               best_epoch=result.best_epoch,
               bundle_fingerprint=bundle_fingerprint(dataset),
               train_seed=cfg["seed"],
               extra_meta={"best_val_mse": repr(result.best_val_mse),
                           "initial_val_mse": repr(result.initial_val_mse),
                           "epochs_run": result.epochs_run,
                           "base_lr": repr(_base_lr(cfg))})
    write_history_csv(out / "history.csv", result.history)
    write_learning_curve_svg(out / "learning_curve.svg", result.history)
    stop = "early stop" if result.stopped_early else "epoch budget"
    print(f"{family}: {result.epochs_run} epochs ({stop}), best val mse "
          f"{result.best_val_mse:.6f} at epoch {result.best_epoch}, "
          f"initial {result.initial_val_mse:.6f}, "
          f"{result.flagged_batches} flagged batches")
    print(f"checkpoint {ck_path}")
    return EXIT_OK


def cmd_evaluate(cfg, out, checkpoint_path, bundle_path):
    model, spec, meta, _ = load_model(checkpoint_path)
    dataset = load_bundle(bundle_path)
    _checkpoint_compat(meta, dataset, checkpoint_path)
    shape = dataset.samples[0].tensor.shape
    if shape != (spec.n_buses, spec.n_features, spec.n_steps):
        raise BundleFormatError(
            f"checkpoint expects tensors {(spec.n_buses, spec.n_features, spec.n_steps)}, "
            f"bundle has {shape}")
    split = cfg["split"]
    metrics = evaluate(model, dataset, split, mu=cfg["mu"])
    _, y_true = dataset.tensors(split)
    y_pred = predict(model, dataset, split)
    write_metrics_csv(out / "metrics.csv", [(spec.family, metrics)])
    write_predictions_csv(out / "predictions.csv", y_true, y_pred)
    write_scatter_svg(out / "scatter.svg", y_true, y_pred)
    write_error_hist_svg(out / "error_hist.svg", np.abs(y_pred - y_true))
    print(_metrics_line(spec.family, metrics))
    return EXIT_OK


def cmd_compare(cfg, out, checkpoint_paths, bundle_path,
                checkpoint_paths_2=None, bundle_path_2=None):
    dataset = load_bundle(bundle_path)
    two_sided = bundle_path_2 is not None
    if two_sided and not checkpoint_paths_2:
        raise ConfigError("--bundle2 needs --checkpoints2")
    if not two_sided and len(checkpoint_paths) < 2:
        raise ConfigError("compare needs at least two checkpoints")

    def load_side(paths, ds):
        rows = []
        for path in paths:
            model, spec, meta, _ = load_model(path)
            _checkpoint_compat(meta, ds, path)
            rows.append((spec.family, evaluate(model, ds, cfg["split"],
                                               mu=cfg["mu"])))
        return rows

    rows = load_side(checkpoint_paths, dataset)
    if not two_sided:
        write_metrics_csv(out / "compare.csv", rows)
        for label, metrics in rows:
            print(_metrics_line(label, metrics))
        return EXIT_OK

    dataset2 = load_bundle(bundle_path_2)
    rows2 = load_side(checkpoint_paths_2, dataset2)
    if [f for f, _ in rows] != [f for f, _ in rows2]:
        raise ConfigError(
            "two-sided compare needs matching family order on both sides: "
            f"{[f for f, _ in rows]} vs {[f for f, _ in rows2]}")

    def snr_label(ds):
        return "clean" if ds.snr_db is None else f"{ds.snr_db:g}dB"

    header = ("family", f"acc_{snr_label(dataset)}", f"acc_{snr_label(dataset2)}")
    table = [(fam, m1.acc, m2.acc)
             for (fam, m1), (_, m2) in zip(rows, rows2)]
    write_csv(out / "compare_acc.csv", header, table)
    print(f"{'family':8s} {header[1]:>12s} {header[2]:>12s}")
    for fam, a1, a2 in table:
        print(f"{fam:8s} {a1:12.4f} {a2:12.4f}")
    return EXIT_OK


def cmd_featselect(cfg, out, bundle_path):
    dataset = load_bundle(bundle_path)
    family = cfg["family"]
    system = _load_system(cfg) if family == "gcn" else None
    if system is not None:
        _check_bundle_case(dataset, system)
    train_cfg = TrainConfig(max_epochs=cfg["fs_epochs"],
                            batch_size=cfg["batch_size"],
                            base_lr=_base_lr(cfg), momentum=cfg["momentum"],
                            lr_factor=cfg["lr_factor"],
                            lr_patience=cfg["lr_patience"],
                            min_lr=cfg["min_lr"],
                            early_stop_patience=cfg["early_stop"],
                            seed=cfg["seed"])
    scorer = make_dataset_scorer(dataset, family, system=system,
                                 train_cfg=train_cfg, mu=cfg["mu"],
                                 seeds=cfg["fs_seeds"])
    result = greedy_forward_selection(scorer, candidates=dataset.features)
    write_selection_csv(out / "selection.csv", result.trace)
    chain = " -> ".join(f.value for f in result.selected)
    print(f"{family}: selected {chain} "
          f"(acc {result.best_acc:.4f}, mse {result.best_mse:.6f})")
    return EXIT_OK


def cmd_opp(cfg, out, restrict_bundle=None):
    system = _load_system(cfg)
    zgib = detect_zgib(system, cfg["zgib_mode"]) if cfg["zgib"] else None
    if zgib is not None:
        print(f"zgib buses ({len(zgib.buses)}): "
              f"{','.join(str(b) for b in zgib.buses)}")
    rows = []
    if cfg["objective"] == "full":
        placement, report = solve_opp(system, zgib=zgib,
                                      objective=OBJECTIVE_MIN_PMUS_FULL)
        rows.append((len(placement.selected_buses), placement, report))
    else:
        for budget in cfg["budgets"]:
            placement, report = solve_opp(system, budget, zgib=zgib,
                                          objective=OBJECTIVE_MAX_OBSERVABILITY)
            rows.append((budget, placement, report))
    write_placement_csv(out / "placements.csv", rows)
    print(f"{'budget':>6s} {'selected buses':24s} {'score':>5s} full")
    for budget, placement, report in rows:
        buses_text = ",".join(str(b) for b in placement.selected_buses)
        print(f"{budget:6d} {buses_text:24s} {report.score:5d} "
              f"{'yes' if report.fully_observable else 'no'}")
        write_observability_csv(out / f"observability_budget{budget}.csv",
                                report)
    if restrict_bundle is not None:
        dataset = load_bundle(restrict_bundle)
        _check_bundle_case(dataset, system)
        budget = rows[0][0]
        placement, report = solve_opp(system, budget, zgib=zgib,
                                      objective=OBJECTIVE_MAX_OBSERVABILITY,
                                      candidates=dataset.buses)
        restricted = dataset.restrict_buses(placement.selected_buses)
        restricted_dir = out / "restricted_bundle"
        save_bundle(restricted, restricted_dir)
        print(f"restricted bundle: buses "
              f"{','.join(str(b) for b in placement.selected_buses)} "
              f"(budget {budget}, score {report.score}) -> {restricted_dir}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument wiring
# --------------------------------------------------------------------------

_OVERRIDE_FLAGS = (
    # (flag, config key, help)
    ("--case", "case", "power-system case name or case-file path"),
    ("--seed", "seed", "global seed"),
    ("--snr", "snr_db", "measurement SNR in dB, or 'none'"),
    ("--window", "window", "extraction window t0:t1 in seconds"),
    ("--features", "features", "comma list: delta_omega,rocof,v_mag"),
    ("--family", "family", "estimator family: dnn, cnn, lrcn, gcn"),
    ("--budget", "budgets", "PMU budget(s), comma separated"),
    ("--mu", "mu", "accuracy tolerance in seconds, or 'inf'"),
    ("--epochs", "epochs", "maximum training epochs"),
    ("--batch-size", "batch_size", "minibatch size"),
    ("--lr", "base_lr", "initial learning rate, or 'auto'"),
    ("--momentum", "momentum", "SGD momentum"),
    ("--lstm-variant", "lstm_variant", "standard or single_gate"),
    ("--split", "split", "evaluation split: train, val, all"),
    ("--buses", "buses", "observed buses: generators, all, or id list"),
    ("--objective", "objective", "opp objective: max or full"),
    ("--zgib-mode", "zgib_mode", "neighbor_pairs or zgib_links"),
    ("--fs-seeds", "fs_seeds", "comma list of model seeds for featselect"),
    ("--fs-epochs", "fs_epochs", "epochs per featselect candidate"),
    ("--h-sweep", "h_sweep", "inertia sweep min:max:count"),
    ("--pe-sweep", "pe_sweep", "amplitude sweep min:max:count"),
    ("--duration", "duration", "simulated seconds"),
    ("--probe-bus", "probe_bus", "probe injection bus id or 'auto'"),
    ("--probe-kind", "probe_kind", "step, pulse, or prbs"),
    ("--pmu-rate", "pmu_rate", "PMU reporting rate"),
    ("--target-rate", "target_rate", "post-downsample rate"),
)


def _add_common(parser):
    parser.add_argument("--config", help="config file path")
    parser.add_argument("--out", help="output directory")
    for flag, key, help_text in _OVERRIDE_FLAGS:
        parser.add_argument(flag, dest=f"cfg_{key}", metavar="V",
                            help=help_text)
    parser.add_argument("--zgib", action=argparse.BooleanOptionalAction,
                        default=None,
                        help="toggle zero-generation-injection augmentation")
    parser.add_argument("--raw-traces", action="store_true", default=None,
                        help="save full-resolution per-run traces")
    parser.add_argument("--print-config", action="store_true",
                        help="print the resolved configuration and exit")


def _collect_overrides(args):
    overrides = {}
    for _, key, _ in _OVERRIDE_FLAGS:
        value = getattr(args, f"cfg_{key}")
        if value is not None:
            overrides[key] = value
    if args.zgib is not None:
        overrides["zgib"] = "true" if args.zgib else "false"
    if getattr(args, "raw_traces", None):
        overrides["raw_traces"] = "true"
    return overrides


def build_parser():
    parser = _Parser(prog="gridinertia",
                     description="Power-system inertia estimation toolkit: "
                                 "simulate PMU data, train estimators, "
                                 "select features, place PMUs.")
    parser.add_argument("--print-config", action="store_true",
                        help="print the documented default configuration")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("simulate", help="build a measurement bundle",
                       description="Simulate the sweep and write a bundle.")
    _add_common(p)

    p = sub.add_parser("train", help="train an estimator on a bundle")
    _add_common(p)
    p.add_argument("--bundle", required=True, help="input bundle directory")

    p = sub.add_parser("evaluate", help="score a checkpoint on a bundle")
    _add_common(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--bundle", required=True, help="input bundle directory")

    p = sub.add_parser("compare", help="tabulate several checkpoints")
    _add_common(p)
    p.add_argument("--checkpoints", required=True,
                   help="comma-separated checkpoint files")
    p.add_argument("--bundle", required=True, help="bundle for all checkpoints")
    p.add_argument("--checkpoints2",
                   help="second checkpoint list (two-column ACC mode)")
    p.add_argument("--bundle2",
                   help="second bundle (two-column ACC mode)")

    p = sub.add_parser("featselect", help="greedy forward feature selection")
    _add_common(p)
    p.add_argument("--bundle", required=True, help="input bundle directory")

    p = sub.add_parser("opp", help="optimal PMU placement")
    _add_common(p)
    p.add_argument("--restrict-bundle", metavar="BUNDLE",
                   help="also write a copy of BUNDLE restricted to the "
                        "first budget's optimal buses")
    return parser


def _default_out(command):
    return Path("runs") / command


def _main(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        if args.print_config:
            print(default_config_text())
            return EXIT_OK
        parser.print_help()
        return EXIT_USAGE
    cfg = resolve_config(args.config, _collect_overrides(args))
    if args.print_config:
        print(cfg.echo(), end="")
        return EXIT_OK
    out_path = args.out or _default_out(args.command)
    with _output_dir(out_path) as out:
        (out / CONFIG_ECHO_NAME).write_text(cfg.echo(), encoding="utf-8")
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "train":
            return cmd_train(cfg, out, args.bundle)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, out, args.checkpoint, args.bundle)
        if args.command == "compare":
            paths = [p for p in args.checkpoints.split(",") if p]
            paths2 = ([p for p in args.checkpoints2.split(",") if p]
                      if args.checkpoints2 else None)
            return cmd_compare(cfg, out, paths, args.bundle, paths2,
                               args.bundle2)
        if args.command == "featselect":
            return cmd_featselect(cfg, out, args.bundle)
        return cmd_opp(cfg, out, args.restrict_bundle)


def main(argv=None):
    try:
        return _main(argv)
    except (ConfigError, PlacementError, SelectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CaseFormatError, BundleFormatError, CheckpointFormatError,
            PipelineError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDiverged, SimulationError, AssemblyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GridInertiaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
