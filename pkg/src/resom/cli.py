"""Command line front end.

Exit codes: 2 for configuration problems, 3 for data problems, 4 for failed
verification (e.g. ig-verify finding a mismatch); 0 on success.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import association as assoc
from . import experiments as exp
from . import grid as ig
from . import inference, labeling
from . import som as som_mod
from .data import DataFormatError, load_features, pair_by_class

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_VERIFY = 4


class VerificationError(RuntimeError):
    pass


def _parse_grid_arg(text: str) -> tuple[int, int]:
    return exp._parse_grid(text)


def _load(path, labels=None):
    return load_features(path, labels)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    data = _load(args.modality, args.labels)
    width, height = _parse_grid_arg(args.grid)
    schedule = som_mod.TrainSchedule(
        args.epochs, args.lr_start, args.lr_end, args.sigma_start, args.sigma_end
    )
    grid_som = som_mod.make_som(width, height, data.n_features, args.seed)
    grid_som = som_mod.train(
        grid_som, data.values, schedule, args.seed, args.grid_metric
    )
    som_mod.save_som(grid_som, args.out)
    print(f"trained {width}x{height} map on {data.n_samples} samples -> {args.out}")
    return 0


def cmd_label(args) -> int:
    grid_som = som_mod.load_som(args.som)
    data = _load(args.data, args.labels)
    subset = labeling.select_label_subset(data, args.subset_frac, args.seed)
    labeled = labeling.label_som(grid_som, subset, args.alpha)
    som_mod.save_som(labeled, args.out)
    print(f"labeled {labeled.n_neurons} neurons from {subset.n_samples} samples -> {args.out}")
    return 0


def cmd_alpha_sweep(args) -> int:
    spec = exp.load_spec(args.spec)
    rows = exp.alpha_sweep(
        spec, tuple(float(a) for a in args.alphas.split(",")), args.modality
    )
    exp.write_rows_csv(rows, args.out)
    for row in rows:
        print(f"alpha={row['alpha']} accuracy={row['accuracy_mean']:.4f}")
    return 0


def cmd_associate(args) -> int:
    som_x = som_mod.load_som(args.som_x)
    som_y = som_mod.load_som(args.som_y)
    x = _load(args.pairs_x, args.labels_x)
    y = _load(args.pairs_y, args.labels_y)
    pairs = pair_by_class(x, y, args.pair_seed)
    syn_xy, syn_yx = assoc.associate(
        som_x, som_y, pairs, args.rule, args.eta, args.assoc_epochs
    )
    pre = (syn_xy.n_synapses, syn_yx.n_synapses)
    if args.keep < 1.0:
        syn_xy = assoc.prune(syn_xy, args.keep)
        syn_yx = assoc.prune(syn_yx, args.keep)
    assoc.save_synapses(syn_xy, args.out_xy, "XY")
    assoc.save_synapses(syn_yx, args.out_yx, "YX")
    print(
        f"synapses x->y {pre[0]} -> {syn_xy.n_synapses}, "
        f"y->x {pre[1]} -> {syn_yx.n_synapses}"
    )
    return 0


def cmd_diverge_label(args) -> int:
    som_x = som_mod.load_som(args.som_x)
    if som_x.labels is None:
        raise exp.SpecError("--som-x must be a labeled checkpoint")
    som_y = som_mod.load_som(args.som_y)
    syn_xy, _ = assoc.load_synapses(args.syn_xy)
    data = _load(args.data_x, args.labels_x)
    subset = labeling.select_label_subset(data, args.subset_frac, args.seed)
    labeled = inference.diverge_label(som_x, som_y, syn_xy, subset, args.beta)
    som_mod.save_som(labeled, args.out)
    n_disc = int(inference.disconnected_targets(syn_xy).sum())
    print(f"diverge-labeled {labeled.n_neurons} neurons ({n_disc} disconnected) -> {args.out}")
    return 0


def cmd_converge(args) -> int:
    som_x = som_mod.load_som(args.som_x)
    som_y = som_mod.load_som(args.som_y)
    if som_x.labels is None or som_y.labels is None:
        raise exp.SpecError("--som-x and --som-y must be labeled checkpoints")
    syn_xy, _ = assoc.load_synapses(args.syn_xy)
    syn_yx, _ = assoc.load_synapses(args.syn_yx)
    x = _load(args.test_x, args.test_labels_x)
    y = _load(args.test_y, args.test_labels_y)
    pairs = pair_by_class(x, y, args.pair_seed)
    n_classes = max(x.n_classes, int(som_x.labels.max()) + 1)
    cfg = inference.ConvergenceConfig(
        update=args.update,
        activities=args.activities,
        neurons=args.neurons,
        kernel_width_x=args.beta_x,
        kernel_width_y=args.beta_y,
        disconnected=args.disconnected,
    )
    result = inference.evaluate_convergence(
        som_x, som_y, syn_xy, syn_yx, pairs, cfg, n_classes
    )
    uni_x = inference.evaluate_unimodal(som_x, pairs.x, n_classes)
    uni_y = inference.evaluate_unimodal(som_y, pairs.y, n_classes)
    metrics = {
        "variant": cfg.name(),
        "accuracy": result.accuracy,
        "unimodal_x": uni_x.accuracy,
        "unimodal_y": uni_y.accuracy,
        "gain_over_best_unimodal": result.accuracy - max(uni_x.accuracy, uni_y.accuracy),
        "no_decision": result.n_no_decision,
        "samples": pairs.n_samples,
    }
    exp.write_metrics(metrics, args.metrics if args.metrics else sys.stdout)
    if args.confusion_csv:
        np.savetxt(args.confusion_csv, result.confusion, fmt="%d", delimiter=",")
    if args.gain_csv:
        gain = inference.gain_matrix(
            result.confusion,
            (uni_x if uni_x.accuracy >= uni_y.accuracy else uni_y).confusion,
        )
        np.savetxt(args.gain_csv, gain, fmt="%.6f", delimiter=",")
    if args.metrics:
        print(f"accuracy={result.accuracy:.4f} (metrics -> {args.metrics})")
    return 0


def cmd_ig_verify(args) -> int:
    width, height = _parse_grid_arg(args.grid)
    rng = np.random.default_rng(args.seed)
    mismatches = 0
    for trial in range(args.trials):
        acts = rng.random((height, width))
        wave = ig.winner_wave(acts)
        flat = acts.ravel()
        bmu, wmu = int(np.argmax(flat)), int(np.argmin(flat))
        rows, cols = np.divmod(np.arange(flat.size), width)
        manhattan = (np.abs(rows - rows[bmu]) + np.abs(cols - cols[bmu])).reshape(
            height, width
        )
        ok = (
            wave.bmu_index == bmu
            and wave.wmu_index == wmu
            and np.array_equal(wave.distance_to_bmu, manhattan)
        )
        if not ok:
            mismatches += 1
        if args.trace and trial == 0:
            with open(args.trace, "w", newline="") as f:
                rows_out = ig.wave_trace(acts)
                writer = csv.DictWriter(f, fieldnames=list(rows_out[0]))
                writer.writeheader()
                writer.writerows(rows_out)
    print(
        f"grid={width}x{height} trials={args.trials} t_p={ig.propagation_steps(height, width)} "
        f"mismatches={mismatches}"
    )
    if mismatches:
        raise VerificationError(f"{mismatches} wave/oracle mismatches")
    return 0


def cmd_pipeline(args) -> int:
    spec = exp.load_spec(args.spec)
    cache = exp.StageCache(args.cache) if args.cache else exp.StageCache.from_env()
    record = exp.run_pipeline(
        spec, cache, jobs=args.jobs, artifact_dir=args.artifacts
    )
    exp.write_record_csv(record, args.out)
    print(
        f"convergence accuracy {100 * record.mean:.2f} +/- {100 * record.std:.2f} "
        f"over {len(record.results)} seeds (record -> {args.out})"
    )
    return 0


def cmd_prune_sweep(args) -> int:
    spec = exp.load_spec(args.spec)
    fractions = tuple(float(f) for f in args.fractions.split(","))
    rows = exp.prune_sweep(spec, fractions)
    exp.write_rows_csv(rows, args.out)
    for row in rows:
        print(
            f"keep={row['keep_fraction']} divergence={row['divergence_mean']:.4f} "
            f"convergence={row['convergence_mean']:.4f}"
        )
    return 0


def cmd_report(args) -> int:
    digest, rows = exp.read_record_csv(args.records)
    conv = np.array([float(r["convergence"]) for r in rows])
    metrics = {
        "spec_hash": digest,
        "seeds": len(rows),
        "convergence_mean": conv.mean(),
        "convergence_std": conv.std(),
        "unimodal_x_mean": np.mean([float(r["uni_x"]) for r in rows]),
        "unimodal_y_mean": np.mean([float(r["uni_y"]) for r in rows]),
    }
    exp.write_metrics(metrics, sys.stdout)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resom", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one unimodal map")
    t.add_argument("--modality", required=True, help="feature file (IDX or RSM1)")
    t.add_argument("--labels", help="IDX label file when --modality is IDX images")
    t.add_argument("--grid", required=True, help="map size, e.g. 10x10")
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--lr-start", type=float, default=1.0)
    t.add_argument("--lr-end", type=float, default=0.01)
    t.add_argument("--sigma-start", type=float, default=5.0)
    t.add_argument("--sigma-end", type=float, default=0.01)
    t.add_argument("--grid-metric", choices=som_mod.GRID_METRICS, default="euclidean")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    l = sub.add_parser("label", help="label neurons from a labeled subset")
    l.add_argument("--som", required=True)
    l.add_argument("--data", required=True)
    l.add_argument("--labels")
    l.add_argument("--subset-frac", type=float, default=0.01)
    l.add_argument("--alpha", type=float, default=1.0, help="labeling kernel width")
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("--out", required=True)
    l.set_defaults(func=cmd_label)

    asw = sub.add_parser("alpha-sweep", help="labeling kernel width grid search")
    asw.add_argument("--spec", required=True)
    asw.add_argument("--modality", choices=("x", "y"), default="x")
    asw.add_argument("--alphas", default="0.1,0.5,1.0,2.0,5.0,10,20")
    asw.add_argument("--out", required=True)
    asw.set_defaults(func=cmd_alpha_sweep)

    a = sub.add_parser("associate", help="learn lateral synapses between two maps")
    a.add_argument("--som-x", required=True)
    a.add_argument("--som-y", required=True)
    a.add_argument("--pairs-x", required=True, help="x-modality training features")
    a.add_argument("--pairs-y", required=True, help="y-modality training features")
    a.add_argument("--labels-x")
    a.add_argument("--labels-y")
    a.add_argument("--pair-seed", type=int, default=0)
    a.add_argument("--rule", choices=assoc.RULES, default="hebb")
    a.add_argument("--eta", type=float, default=1.0)
    a.add_argument("--assoc-epochs", type=int, default=1)
    a.add_argument("--keep", type=float, default=1.0, help="keep fraction after pruning")
    a.add_argument("--out-xy", required=True)
    a.add_argument("--out-yx", required=True)
    a.set_defaults(func=cmd_associate)

    d = sub.add_parser("diverge-label", help="label map y through x->y synapses")
    d.add_argument("--som-x", required=True, help="labeled x checkpoint")
    d.add_argument("--som-y", required=True)
    d.add_argument("--syn-xy", required=True)
    d.add_argument("--data-x", required=True)
    d.add_argument("--labels-x")
    d.add_argument("--subset-frac", type=float, default=0.01)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--beta", type=float, default=1.0, help="divergence kernel width")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_diverge_label)

    c = sub.add_parser("converge", help="multimodal classification on test pairs")
    c.add_argument("--som-x", required=True)
    c.add_argument("--som-y", required=True)
    c.add_argument("--syn-xy", required=True)
    c.add_argument("--syn-yx", required=True)
    c.add_argument("--test-x", required=True)
    c.add_argument("--test-y", required=True)
    c.add_argument("--test-labels-x")
    c.add_argument("--test-labels-y")
    c.add_argument("--pair-seed", type=int, default=0)
    c.add_argument("--update", choices=inference.UPDATES, default="max")
    c.add_argument("--activities", choices=inference.ACTIVITY_MODES, default="norm")
    c.add_argument("--neurons", choices=inference.NEURON_MODES, default="bmu")
    c.add_argument("--beta-x", type=float, default=1.0)
    c.add_argument("--beta-y", type=float, default=1.0)
    c.add_argument("--disconnected", choices=inference.DISCONNECTED_MODES, default="zero")
    c.add_argument("--metrics", help="key=value metrics file (stdout if omitted)")
    c.add_argument("--confusion-csv")
    c.add_argument("--gain-csv")
    c.set_defaults(func=cmd_converge)

    g = sub.add_parser("ig-verify", help="check the cellular wave against the oracle")
    g.add_argument("--grid", required=True)
    g.add_argument("--trials", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--trace", help="CSV per-step state dump of the first trial")
    g.set_defaults(func=cmd_ig_verify)

    pl = sub.add_parser("pipeline", help="run a full spec over its seeds")
    pl.add_argument("--spec", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--jobs", type=int, default=1)
    pl.add_argument("--cache", help=f"stage cache dir (default ${exp.CACHE_ENV_VAR})")
    pl.add_argument("--artifacts", help="directory for per-seed checkpoint/synapse files")
    pl.set_defaults(func=cmd_pipeline)

    ps = sub.add_parser("prune-sweep", help="accuracy vs remaining synapses")
    ps.add_argument("--spec", required=True)
    ps.add_argument("--fractions", default="0.05,0.1,0.25,0.5,1.0")
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_prune_sweep)

    r = sub.add_parser("report", help="aggregate a pipeline record CSV")
    r.add_argument("--records", required=True)
    r.set_defaults(func=cmd_report)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except exp.SpecError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except VerificationError as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
