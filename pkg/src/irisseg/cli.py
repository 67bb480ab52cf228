"""Command-line entry point wiring the library into reproducible runs.

Subcommands: merge, budget, datagen, augment, train, infer, eval.

Every run that writes files also writes a manifest (JSON: the resolved
configuration, seeds, library versions, and SHA-256 digests of the
inputs) next to the outputs, so a run can be re-executed exactly.
Manifests contain no timestamps: re-running a command with identical
inputs and seed reproduces identical bytes.

Exit codes: 0 success, 2 usage errors, 1 I/O or data errors.

`--threads` caps the per-item worker pool on the commands that process
many independent images (datagen, augment, infer, eval); results do not
depend on the pool size because every item derives from its own seed or
file. The IRISSEG_THREADS environment variable sets the default.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .augment import TARGET_SIZE, augment_image
from .budget import (
    DEFAULT_RULE,
    assign_channels,
    budget_polynomial,
    count_params,
    count_segnet_basic,
    solve_channel_base,
    symbolic_template,
)
from .builtins import named_spec, paper_merged_graph, paper_parent_graphs
from .engine import (
    TrainConfig,
    binarize,
    build_network,
    load_weights,
    predict,
    save_weights,
    train,
)
from .errors import IrissegError, ParseError, ShapeMismatch
from .graphs import (
    ArchGraph,
    graph_from_dict,
    graph_to_json,
    graph_to_network,
    parse_parent_set,
    spdnn_merge,
)
from .metrics import METRIC_NAMES, aggregate, confusion, format_report, metrics
from .netspec import NetworkSpec
from .pgm import read_mask, read_pgm, write_mask, write_pgm
from .synth import generate_one

THREADS_ENV = "IRISSEG_THREADS"
BUILTIN_SPECS = ("paper-merged", "segnet-basic")

# suffixes ordered most specific first; file kind is the first that matches
SUFFIXES = (".pred.pgm", ".mask.pgm", ".aug.pgm", ".pgm")


class UsageError(Exception):
    pass


# ---- shared plumbing ----


def _thread_count(args) -> int:
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError as exc:
        raise UsageError(f"{THREADS_ENV}={env!r} is not an integer") from exc
    return max(1, n)


def _pmap(fn, items, threads: int) -> list:
    """Map preserving order; a pool only changes wall time, never results."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _config_of(args) -> dict:
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        cfg[key] = str(value) if isinstance(value, Path) else value
    return cfg


def _write_manifest(target: Path, args, inputs: list[Path]) -> None:
    """Next to a file output as <file>.manifest.json, inside a directory
    output as run-manifest.json."""
    doc = {
        "tool": "irisseg",
        "version": __version__,
        "config": _config_of(args),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "inputs": {str(p): _sha256(p) for p in sorted(inputs)},
    }
    if target.is_dir():
        path = target / "run-manifest.json"
    else:
        path = target.with_name(target.name + ".manifest.json")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _size_arg(text: str) -> tuple[int, int]:
    try:
        w, h = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must be WIDTHxHEIGHT, got {text!r}")
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("size components must be positive")
    return w, h


def _read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_graph(spec_arg: str) -> ArchGraph:
    if spec_arg == "paper-merged":
        return paper_merged_graph()
    if spec_arg in BUILTIN_SPECS:
        raise UsageError(f"{spec_arg!r} has no graph form; use paper-merged or a file")
    return graph_from_dict(_parse_json(_read_text(spec_arg)))


def _parse_json(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc


def _load_spec(spec_arg: str, chp: int) -> NetworkSpec:
    """A builtin name, a sized network document, or a bare graph sized
    with the kernel-multiplier rule at the given channel base."""
    if spec_arg in BUILTIN_SPECS:
        return named_spec(spec_arg, chp)
    doc = _parse_json(_read_text(spec_arg))
    if "channels" in doc:
        return NetworkSpec.from_dict(doc)
    graph = graph_from_dict(doc)
    return graph_to_network(graph, assign_channels(graph, DEFAULT_RULE, chp))


def _collect_pairs(root: Path) -> list[tuple[str, Path, Path]]:
    """(stem, image, mask) triples under root; augmented images win over
    raw ones for the same stem."""
    masks = sorted(root.rglob("*.mask.pgm"))
    pairs = []
    for mask_path in masks:
        base = mask_path.name[: -len(".mask.pgm")]
        stem = str(mask_path.parent.relative_to(root) / base)
        for suffix in (".aug.pgm", ".pgm"):
            image_path = mask_path.with_name(base + suffix)
            if image_path.exists():
                pairs.append((stem, image_path, mask_path))
                break
        else:
            raise FileNotFoundError(f"no image found for mask {mask_path}")
    if not pairs:
        raise FileNotFoundError(f"no *.mask.pgm files under {root}")
    return pairs


def _list_images(root: Path) -> list[Path]:
    found = [
        p
        for p in sorted(root.rglob("*.pgm"))
        if not p.name.endswith(".mask.pgm") and not p.name.endswith(".pred.pgm")
    ]
    if not found:
        raise FileNotFoundError(f"no input images under {root}")
    return found


def _stem_of(name: str) -> str:
    for suffix in SUFFIXES:
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


# ---- subcommands ----


def cmd_merge(args) -> int:
    if args.parents == "paper-parents":
        parents = paper_parent_graphs()
        inputs: list[Path] = []
    else:
        parents = parse_parent_set(_read_text(args.parents))
        inputs = [Path(args.parents)]
    merged = spdnn_merge(parents)
    out = Path(args.out)
    out.write_text(graph_to_json(merged) + "\n")
    _write_manifest(out, args, inputs)
    print(f"merged {len(parents)} parents into {len(merged.internal_ids())} nodes -> {out}")
    return 0


def cmd_budget(args) -> int:
    if args.target == "segnet-basic":
        budget = count_segnet_basic()
    else:
        try:
            budget = int(args.target)
        except ValueError:
            raise UsageError(
                f"--target must be 'segnet-basic' or an integer, got {args.target!r}"
            )
        if budget <= 0:
            raise UsageError("--target budget must be positive")
    graph = _load_graph(args.spec)
    template = symbolic_template(graph, DEFAULT_RULE)
    poly = budget_polynomial(template)
    root, chosen = solve_channel_base(poly, budget)
    sized = graph_to_network(graph, assign_channels(graph, DEFAULT_RULE, chosen))
    total = count_params(sized)
    layer_rows = [
        {
            "id": ls.id,
            "kernel": ls.kernel,
            "in": int(ls.in_channels),
            "out": int(ls.out_channels),
            "weights": int(ls.in_channels) * int(ls.out_channels) * ls.kernel**2,
        }
        for ls in sized.layers
    ]
    if args.json:
        print(
            json.dumps(
                {
                    "budget": budget,
                    "polynomial": {"a": poly.a, "b": poly.b},
                    "root": root,
                    "chosen": chosen,
                    "weights_at_chosen": total,
                    "layers": layer_rows,
                },
                indent=2,
            )
        )
        return 0
    print(f"budget {budget} ({args.target})")
    print(f"polynomial {poly.a}*x^2 + {poly.b}*x")
    print(f"root {root:.4f}")
    print(f"chosen {chosen}")
    print(f"weights at chosen {total}")
    print()
    width = max(len(row["id"]) for row in layer_rows)
    print(f"{'layer':<{width}}  kernel   in  out   weights")
    for row in layer_rows:
        print(
            f"{row['id']:<{width}}  {row['kernel']:>6}  {row['in']:>3}  "
            f"{row['out']:>3}  {row['weights']:>8}"
        )
    return 0


def cmd_datagen(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(args.count - 1)))

    def one(index: int) -> None:
        sample = generate_one(args.seed, index, args.size)
        name = f"img_{index:0{digits}d}"
        write_pgm(out / f"{name}.pgm", sample.image)
        write_mask(out / f"{name}.mask.pgm", sample.mask)

    _pmap(one, range(args.count), _thread_count(args))
    _write_manifest(out, args, [])
    print(f"wrote {args.count} image/mask pairs to {out}")
    return 0


def cmd_augment(args) -> int:
    src = Path(args.indir)
    dst = Path(args.out)
    pairs = _collect_pairs(src)
    dst.mkdir(parents=True, exist_ok=True)

    def one(item: tuple[int, tuple[str, Path, Path]]) -> None:
        index, (stem, image_path, mask_path) = item
        image = read_pgm(image_path)
        mask = read_mask(mask_path)
        aug_image, aug_mask = augment_image(image, mask, args.seed, index)
        target = dst / stem
        target.parent.mkdir(parents=True, exist_ok=True)
        write_pgm(target.with_name(target.name + ".aug.pgm"), aug_image)
        write_mask(target.with_name(target.name + ".mask.pgm"), aug_mask)

    # the per-pair seed index is the rank in the sorted listing, so the
    # result is independent of enumeration order and thread count
    _pmap(one, list(enumerate(pairs)), _thread_count(args))
    _write_manifest(dst, args, [p for _, img, msk in pairs for p in (img, msk)])
    print(f"augmented {len(pairs)} pairs from {src} to {dst} ({TARGET_SIZE[0]}x{TARGET_SIZE[1]})")
    return 0


def cmd_train(args) -> int:
    spec = _load_spec(args.spec, args.chp)
    dtype = np.float64 if args.precision == "f64" else np.float32
    pairs = _collect_pairs(Path(args.data))
    images = [read_pgm(img) for _, img, _ in pairs]
    masks = [read_mask(msk) for _, _, msk in pairs]
    shapes = {a.shape for a in images}
    if len(shapes) > 1:
        raise ShapeMismatch(f"training images disagree on size: {sorted(shapes)}")
    if any(i.shape != m.shape for i, m in zip(images, masks)):
        raise ShapeMismatch("image and mask sizes disagree")
    net = build_network(spec, seed=args.seed, dtype=dtype)
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        momentum=args.momentum,
        seed=args.seed,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    def progress(epoch: int, loss: float) -> None:
        print(f"epoch {epoch} loss {loss:.6f}", file=sys.stderr)

    log = train(
        net,
        np.stack(images),
        np.stack(masks),
        cfg,
        log_path=out.with_name(out.name + ".log"),
        progress=progress,
    )
    save_weights(out, net)
    inputs = [p for _, img, msk in pairs for p in (img, msk)]
    if args.spec not in BUILTIN_SPECS:
        inputs.append(Path(args.spec))
    _write_manifest(out, args, inputs)
    print(
        f"trained {len(log)} epochs on {len(pairs)} pairs; "
        f"loss {log[0][1]:.6f} -> {log[-1][1]:.6f}; weights -> {out}"
    )
    return 0


def cmd_infer(args) -> int:
    spec = _load_spec(args.spec, args.chp)
    dtype = np.float64 if args.precision == "f64" else np.float32
    net = load_weights(args.weights, build_network(spec, seed=0, dtype=dtype))
    src = Path(args.indir)
    dst = Path(args.out)
    images = _list_images(src)
    dst.mkdir(parents=True, exist_ok=True)

    def one(image_path: Path) -> None:
        probabilities = predict(net, read_pgm(image_path))
        mask = binarize(probabilities, args.threshold)
        stem = _stem_of(image_path.name)
        target = dst / image_path.parent.relative_to(src) / f"{stem}.pred.pgm"
        target.parent.mkdir(parents=True, exist_ok=True)
        write_mask(target, mask)

    _pmap(one, images, _thread_count(args))
    _write_manifest(dst, args, [Path(args.weights), *images])
    print(f"wrote {len(images)} predicted masks to {dst}")
    return 0


def cmd_eval(args) -> int:
    def index_dir(root: Path) -> dict[str, Path]:
        table: dict[str, Path] = {}
        ranked = sorted(
            root.rglob("*.pgm"),
            key=lambda p: (str(p.parent), _stem_of(p.name), SUFFIXES.index(
                next(s for s in SUFFIXES if p.name.endswith(s)))),
        )
        for path in ranked:
            stem = str(path.parent.relative_to(root) / _stem_of(path.name))
            table.setdefault(stem, path)
        return table

    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    pred_files = index_dir(pred_dir)
    gt_files = index_dir(gt_dir)
    shared = sorted(set(pred_files) & set(gt_files))
    if not shared:
        raise FileNotFoundError(f"no shared stems between {pred_dir} and {gt_dir}")

    def one(stem: str) -> dict:
        pred = read_mask(pred_files[stem])
        gt = read_mask(gt_files[stem])
        if pred.shape != gt.shape:
            raise ShapeMismatch(f"{stem}: prediction {pred.shape} vs truth {gt.shape}")
        return metrics(confusion(pred, gt))

    rows = _pmap(one, shared, _thread_count(args))
    report = aggregate(rows)
    if args.json:
        print(
            json.dumps(
                {
                    "pairs": len(shared),
                    "mean": report.mean,
                    "std": report.std,
                    "undefined": report.undefined,
                    "rows": [{"stem": s, **row} for s, row in zip(shared, rows)],
                },
                indent=2,
            )
        )
        return 0
    print(f"{len(shared)} pairs")
    for line in format_report(report):
        print(line)
    return 0


# ---- parser ----


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irisseg",
        description="Merge convolutional architectures, size them to a budget, "
        "and train/evaluate binary iris segmentation.",
    )
    parser.add_argument("--version", action="version", version=f"irisseg {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="COMMAND")

    def add_threads(p):
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help=f"worker pool size (default: ${THREADS_ENV} or 1); results "
            "are identical for every value",
        )

    p = sub.add_parser("merge", help="contract parent architectures into one graph")
    p.add_argument("--parents", required=True,
                   help="parent-set JSON file, or the builtin 'paper-parents'")
    p.add_argument("--out", required=True, help="merged graph JSON path")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("budget", help="size a graph's channel base to a weight budget")
    p.add_argument("--spec", required=True,
                   help="graph JSON file, or the builtin 'paper-merged'")
    p.add_argument("--target", default="segnet-basic",
                   help="weight budget: integer or 'segnet-basic' (default)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("datagen", help="write synthetic image/mask PGM pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--size", type=_size_arg, default=(256, 192),
                   help="WIDTHxHEIGHT (default 256x192)")
    add_threads(p)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser(
        "augment",
        help=f"degrade image/mask pairs to {TARGET_SIZE[0]}x{TARGET_SIZE[1]}",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", dest="indir", required=True, help="input directory")
    p.add_argument("--out", required=True, help="output directory")
    add_threads(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="fit a network to image/mask pairs")
    p.add_argument("--data", required=True, help="directory of image/mask pairs")
    p.add_argument("--spec", required=True,
                   help="network JSON, graph JSON, 'paper-merged', or 'segnet-basic'")
    p.add_argument("--chp", type=int, default=10,
                   help="channel base when sizing a bare graph (default 10)")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", choices=("f32", "f64"), default="f64",
                   help="training arithmetic width (default f64)")
    p.add_argument("--out", default="weights.bin", help="weights file path")
    add_threads(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="predict binary masks for a directory of images")
    p.add_argument("--weights", required=True)
    p.add_argument("--spec", required=True,
                   help="network JSON, graph JSON, 'paper-merged', or 'segnet-basic'")
    p.add_argument("--chp", type=int, default=10)
    p.add_argument("--in", dest="indir", required=True, help="input directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threshold", type=float, default=0.45)
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    add_threads(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted masks")
    p.add_argument("--gt", required=True, help="directory of ground-truth masks")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    add_threads(p)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"irisseg {args.subcommand}: {exc}", file=sys.stderr)
        return 2
    except (IrissegError, OSError, ValueError) as exc:
        print(f"irisseg {args.subcommand}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
