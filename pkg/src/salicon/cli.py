"""Command-line entry points.

Exit codes: 0 success, 1 gradient check failed, 2 input/IO error,
3 training divergence, 4 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import gradcheck, imaging, kernels
from .engine import Salicon, shipped_netspec
from .errors import DivergenceError, SaliconError
from .netgraph import Network, infer_shapes, load_netspec
from .solver import CsvProgress, SolverConfig, build_dataset, train, write_run_metadata
from .weights import import_raw, load, save, transplant_vgg

EXIT_OK, EXIT_CHECK_FAILED, EXIT_IO, EXIT_DIVERGED, EXIT_USAGE = 0, 1, 2, 3, 4

log = logging.getLogger("salicon")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _header(command: str, args: argparse.Namespace) -> None:
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
                if k not in ("func", "command")}
    resolved["kernels"] = kernels.BACKEND
    print(f"# salicon {command} " + json.dumps(resolved, sort_keys=True, default=str), file=sys.stderr)


def _require_file(path, what):
    if not Path(path).is_file():
        raise FileNotFoundError(f"{what} not found: {path}")


def cmd_compute_saliency(args) -> int:
    _require_file(args.model, "model file")
    _require_file(args.netspec, "netspec file")
    _require_file(args.image, "image")
    model = Salicon(args.model, args.netspec)
    sal = model.compute_saliency(args.image, threshold=args.threshold)
    imaging.save_saliency_png(sal, args.out)
    if args.raw_out:
        imaging.save_raw(sal, args.raw_out)
    print(f"wrote {args.out} ({sal.shape[1]}x{sal.shape[0]})", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    for path, what in ((args.netspec, "netspec file"), (args.weights, "weights file")):
        _require_file(path, what)
    spec = load_netspec(args.netspec)
    if not spec.loss_layers:
        raise SaliconError(f"netspec {args.netspec} has no loss layer; use a training spec")
    weights = load(args.weights)
    means = tuple(args.means) if args.means else imaging.VGG_BGR_MEANS
    preproc = imaging.PreprocConfig.for_spec(spec, channel_means=means, swap_rgb_to_bgr=not args.no_bgr)
    loss_hw = spec.input_dims["ground_truth"][2:]
    samples = build_dataset(args.images, args.fixations, preproc, loss_hw)
    cfg = SolverConfig(
        base_lr=args.base_lr,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        time_budget=args.time_budget,
        max_updates=args.max_updates,
        rng_seed=args.seed,
        train_fraction=args.train_fraction,
        snapshot_path=str(args.out),
        interp_backward_mode=args.interp_backward,
    )
    progress_path = args.progress or Path(str(args.out) + ".progress.csv")
    write_run_metadata(Path(str(args.out) + ".meta.json"), cfg, preproc=vars(preproc), netspec=args.netspec,
                       weights=args.weights, samples=len(samples), kernels=kernels.BACKEND)
    net = Network(spec, weights)
    with open(progress_path, "w") as fh:
        sink = CsvProgress(fh)
        try:
            store = train(net, samples, cfg, sink)
        except DivergenceError as exc:
            print(f"diverged: {exc}; pre-divergence weights written to {args.out}", file=sys.stderr)
            return EXIT_DIVERGED
    print(f"wrote {args.out} after {store.metadata['updates']} updates", file=sys.stderr)
    return EXIT_OK


def cmd_transplant(args) -> int:
    if args.vgg_manifest:
        _require_file(args.vgg_manifest, "VGG manifest")
        vgg = import_raw(args.vgg_manifest)
    else:
        _require_file(args.vgg, "VGG weights")
        vgg = load(args.vgg)
    _require_file(args.netspec, "netspec file")
    spec = load_netspec(args.netspec)
    store = transplant_vgg(vgg, spec, rng_seed=args.seed, gaussian_std=args.std, bias_const=args.bias)
    save(store, args.out)
    print(f"wrote {args.out} ({len(store)} entries)", file=sys.stderr)
    return EXIT_OK


def cmd_import_weights(args) -> int:
    _require_file(args.manifest, "manifest")
    store = import_raw(args.manifest)
    save(store, args.out)
    print(f"wrote {args.out} ({len(store)} entries)", file=sys.stderr)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = gradcheck.run_suite(args.scale, args.mode, args.seed, args.instances)
    tol = report["tolerance"]
    ok = True
    print(f"gradcheck scale={args.scale} mode={args.mode} seed={args.seed} tolerance={tol:g}")
    for name, err in report["layers"].items():
        status = "ok" if err < tol else "FAIL"
        ok &= err < tol
        print(f"  layer {name:<24} max_rel_err={err:.3e}  {status}")
    for key, err in report["end_to_end"].items():
        print(f"  param {key:<24} max_rel_err={err:.3e}")
    coords = report["coordinates"]
    print(f"  coordinates checked={coords['checked']} refined_step={coords['refined_step']} "
          f"unresolved={coords['unresolved']}")
    e2e = report["end_to_end_max"]
    if args.mode == "adjoint":
        status = "ok" if e2e < tol and coords["unresolved"] == 0 else "FAIL"
        ok &= status == "ok"
        print(f"end-to-end max_rel_err={e2e:.3e}  {status}")
    else:
        adj = report["adjoint_end_to_end_max"]
        ok &= adj < tol
        flag = "FLAG: above adjoint" if e2e > adj else "not above adjoint"
        print(f"end-to-end max_rel_err={e2e:.3e} (adjoint {adj:.3e})  {flag}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_inspect(args) -> int:
    if not args.netspec and not args.weights:
        raise UsageError("inspect: give --netspec and/or --weights")
    if args.netspec:
        _require_file(args.netspec, "netspec file")
        spec = load_netspec(args.netspec)
        shapes = infer_shapes(spec)
        print(f"net {spec.name}: {len(spec.layers)} layers")
        for lay in spec.layers:
            frozen = "  frozen" if lay.kind == "conv" and lay.lr_mult == 0 else ""
            print(f"  {lay.name:<28} {lay.kind:<16} {'x'.join(map(str, shapes[lay.tops[0]]))}{frozen}")
    if args.weights:
        _require_file(args.weights, "weights file")
        store = load(args.weights)
        print(f"weights {args.weights}: {len(store)} entries")
        for name, arr in store.items():
            print(f"  {name:<32} {'x'.join(map(str, arr.shape))}")
    return EXIT_OK


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="salicon", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compute-saliency", help="saliency map for one image")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--netspec", type=Path, default=shipped_netspec("salicon.netspec"))
    p.add_argument("--image", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--threshold", type=float)
    p.add_argument("--raw-out", type=Path)
    p.set_defaults(func=cmd_compute_saliency)

    p = sub.add_parser("train", help="fine-tune on image/fixation-map pairs")
    p.add_argument("--netspec", type=Path, default=shipped_netspec("finetune.netspec"))
    p.add_argument("--weights", required=True, type=Path)
    p.add_argument("--images", required=True, type=Path)
    p.add_argument("--fixations", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--base-lr", type=float, default=1e-7)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--time-budget", type=float, default=150 * 60.0, help="seconds of wall-clock training")
    p.add_argument("--max-updates", type=int, help="stop after exactly this many updates instead")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--interp-backward", choices=("adjoint", "paper-resize"), default="adjoint")
    p.add_argument("--progress", type=Path, help="CSV progress log (default: <out>.progress.csv)")
    p.add_argument("--means", type=float, nargs=3, metavar=("B", "G", "R"))
    p.add_argument("--no-bgr", action="store_true", help="keep RGB channel order")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transplant", help="build two-stream weights from single-stream VGG-16")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--vgg-manifest", type=Path)
    src.add_argument("--vgg", type=Path, help="VGG weights already in NTW1 format")
    p.add_argument("--netspec", type=Path, default=shipped_netspec("salicon.netspec"))
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--std", type=float, default=0.01)
    p.add_argument("--bias", type=float, default=0.0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_transplant)

    p = sub.add_parser("import-weights", help="raw float32 files + manifest -> NTW1")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_import_weights)

    p = sub.add_parser("gradcheck", help="finite-difference verification suites")
    p.add_argument("--scale", choices=("tiny", "small"), default="tiny")
    p.add_argument("--mode", choices=("adjoint", "paper-resize"), default="adjoint")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--instances", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect", help="print blob shapes of a netspec and/or entries of a weight file")
    p.add_argument("--netspec", type=Path)
    p.add_argument("--weights", type=Path)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        _header(args.command, args)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, SaliconError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
