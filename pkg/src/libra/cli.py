"""Command-line entry point: ``libra <subcommand> ...`` or ``python -m libra``.

Exit codes: 0 success, 1 usage or I/O error, 2 QA or verification failure,
3 divergence.
"""
import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import io as lio
from .errors import DivergenceDetected, FormatError, LibraError, SingularResolvent

EXIT_OK, EXIT_USAGE, EXIT_QA, EXIT_DIVERGED = 0, 1, 2, 3
WINDOW = 5

log = logging.getLogger("libra")

DEFAULT_SIZES = "256x256,512x512,720x1280,1024x1024,2048x2048,2160x3840"


class CliError(Exception):
    """Usage or I/O problem reported with exit code 1."""


def _threads(n):
    if n is None:
        env = os.environ.get("LIBRA_THREADS")
        n = int(env) if env else None
    if n is not None:
        from . import set_threads
        set_threads(max(1, n))


def _require(paths, what):
    for p in paths:
        if not Path(p).is_file():
            raise CliError(f"missing {what} file: {p}")


def _frame_name(k):
    return f"{k:04d}"


def cmd_synthesize(manifest_path, out_dir, config_path=None, seed=0):
    from .asm import HazeParams
    from .synthpipe import FlowField, SynthConfig, build_sequence, qa_checks

    m = lio.read_manifest(manifest_path)
    if not m.clean:
        raise CliError("manifest lists no clean frames")
    if len(m.depth) != len(m.clean):
        raise CliError(f"manifest lists {len(m.clean)} clean frames but {len(m.depth)} depth files")
    _require(m.clean, "clean frame")
    _require(m.depth, "depth")
    _require(m.flow, "flow")
    if m.beta is None or m.a_inf is None:
        raise CliError("manifest must set beta and a_inf")
    params = HazeParams(m.beta, m.a_inf)
    cfg = SynthConfig()
    if config_path:
        cfg = SynthConfig.from_text(Path(config_path).read_text(), str(config_path))

    clean = [lio.read_frame(p) for p in m.clean]
    raw = [lio.read_field(p) for p in m.depth]
    flows = [FlowField.from_array(lio.read_field(p)) for p in m.flow]
    if len(flows) != len(clean) - 1:
        raise CliError(f"{len(clean)} frames need {len(clean) - 1} flow files, got {len(flows)}")
    bundle = build_sequence(clean, raw, flows, params, cfg)

    out = Path(out_dir)
    for sub in ("clean", "depth", "flow", "hazy", "trans"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    res = lio.Manifest(beta=params.beta, a_inf=params.A_inf, fps=m.fps)
    for k in range(len(bundle)):
        name = _frame_name(k)
        lio.write_frame(out / "clean" / f"{name}.png", bundle.clean[k])
        lio.write_frame(out / "hazy" / f"{name}.png", bundle.hazy[k])
        lio.write_field(out / "depth" / f"{name}.lbf", bundle.depth[k])
        lio.write_field(out / "trans" / f"{name}.lbf", bundle.trans[k])
        res.clean.append(out / "clean" / f"{name}.png")
        res.hazy.append(out / "hazy" / f"{name}.png")
        res.depth.append(out / "depth" / f"{name}.lbf")
        res.trans.append(out / "trans" / f"{name}.lbf")
    for k, f in enumerate(bundle.flow):
        path = out / "flow" / f"{_frame_name(k)}.lbf"
        lio.write_field(path, f.stack())
        res.flow.append(path)
    lio.write_manifest(out / "manifest.txt", res)
    report = qa_checks(bundle, cfg.theta_d, cfg.theta_i)
    (out / "qa.txt").write_text(report.to_text())
    print(report.to_text(), end="")
    return EXIT_OK if report.passed else EXIT_QA


def window_indices(k, n, size=WINDOW):
    """Indices of the ``size`` frames centred on ``k``, replicated at the ends."""
    half = size // 2
    return [min(max(j, 0), n - 1) for j in range(k - half, k + half + 1)]


def cmd_dehaze_fit(manifest_path, config_path, out_dir, resume=False):
    from .fit import FitConfig, fit_grids, pipeline_forward
    from .metrics import evaluate

    m = lio.read_manifest(manifest_path)
    if not m.hazy or len(m.hazy) != len(m.clean):
        raise CliError("manifest needs matching hazy and clean frame lists")
    _require(m.hazy, "hazy frame")
    _require(m.clean, "clean frame")
    config = lio.load_fit_config(config_path) if config_path else FitConfig()
    hazy = [lio.read_frame(p) for p in m.hazy]
    clean = [lio.read_frame(p) for p in m.clean]
    flows = [lio.read_field(p) for p in m.flow] if m.flow else None

    out = Path(out_dir)
    (out / "grids").mkdir(parents=True, exist_ok=True)
    (out / "dehazed").mkdir(parents=True, exist_ok=True)
    preds = []
    with open(out / "loss_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "iteration", "data", "identity", "spatial", "temporal", "guide", "total"])
        for k in range(len(hazy)):
            name = _frame_name(k)
            paths = [out / "grids" / f"{name}_{s}.lbg" for s in ("R", "G", "T")]
            init = None
            if resume and all(p.exists() for p in paths):
                init = [lio.read_grid(p) for p in paths]
            window = [hazy[j] for j in window_indices(k, len(hazy))]
            result = fit_grids(window, clean[k], config, init=init)
            for p, g in zip(paths, result.grids):
                lio.write_grid(p, g)
            for e in result.loss_trace:
                w.writerow([k, e.iteration, f"{e.data_term:.9g}", *(f"{r:.9g}" for r in e.reg_terms),
                            f"{e.total:.9g}"])
            _, J = pipeline_forward(*result.grids, window, p=config.p)
            preds.append(J)
            lio.write_frame(out / "dehazed" / f"{name}.png", J)
            log.info("frame %d: psnr %.2f dB after %d iterations", k, result.final_psnr,
                     result.iterations)
    report = evaluate(preds, clean, flows if flows and len(flows) == len(preds) - 1 else None)
    (out / "metrics.txt").write_text(report.to_keyvalue())
    (out / "metrics.csv").write_text(report.to_csv())
    print(report.to_keyvalue(), end="")
    return EXIT_OK


def parse_sizes(text):
    sizes = []
    for item in text.split(","):
        item = item.strip().lower()
        if not item:
            continue
        try:
            h, w = item.split("x") if "x" in item else (item, item)
            sizes.append((int(h), int(w)))
        except ValueError:
            raise CliError(f"bad size {item!r}; expected HxW") from None
    if not sizes:
        raise CliError("no sizes given")
    return sizes


def cmd_bench(sizes, repeats, out_csv, seed=0):
    from . import bench

    if repeats < 3:
        raise CliError("--repeats must be at least 3")
    pixels = [h * w for h, w in sizes]
    if pixels != sorted(pixels):
        raise CliError("--sizes must be sorted by ascending pixel count")
    records = bench.run_bench(sizes, repeats, seed=seed)
    if out_csv:
        bench.write_csv(out_csv, records)
    bench.write_csv(sys.stdout, records)
    return EXIT_OK


def cmd_verify(suite, seed=0):
    from .verify import SUITES, run_suite

    names = list(SUITES) if suite == "all" else [suite]
    if any(n not in SUITES for n in names):
        raise CliError(f"unknown suite {suite!r}; valid suites: {', '.join(SUITES)}, all")
    ok = True
    for n in names:
        checks, secs = run_suite(n, seed)
        print(f"[{n}] {secs:.2f} s")
        for c in checks:
            print("  " + c.line())
            ok &= c.passed
    return EXIT_OK if ok else EXIT_QA


def _sorted_files(d, pattern):
    files = sorted(Path(d).glob(pattern))
    if not files:
        raise CliError(f"no {pattern} files in {d}")
    return files


def cmd_metrics(pred_dir, ref_dir, flow_dir=None, out=None):
    from .metrics import evaluate

    pred = [lio.read_frame(p) for p in _sorted_files(pred_dir, "*.png")]
    ref = [lio.read_frame(p) for p in _sorted_files(ref_dir, "*.png")]
    if len(pred) != len(ref):
        raise CliError(f"{len(pred)} predicted frames vs {len(ref)} reference frames")
    flows = [lio.read_field(p) for p in _sorted_files(flow_dir, "*.lbf")] if flow_dir else None
    report = evaluate(pred, ref, flows)
    if out:
        Path(out).write_text(report.to_keyvalue())
    print(report.to_keyvalue(), end="")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="libra", description="Bilateral-grid video dehazing toolkit.")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker thread cap (default: $LIBRA_THREADS or all cores)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", help="render hazy frames and run the QA checks")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="synthesis settings as key = value lines")
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("dehaze-fit", help="fit grids per frame and write dehazed frames")
    s.add_argument("--manifest", required=True)
    s.add_argument("--config", help="fit settings as key = value lines")
    s.add_argument("--out", required=True)
    s.add_argument("--resume", action="store_true", help="start from grids already in --out")

    s = sub.add_parser("bench", help="time the grid pipeline across output sizes")
    s.add_argument("--sizes", default=DEFAULT_SIZES, help="comma-separated HxW list")
    s.add_argument("--repeats", type=int, default=5)
    s.add_argument("--out", help="CSV file for the records")
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("verify", help="run a property suite")
    s.add_argument("--suite", required=True)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("metrics", help="PSNR, SSIM and tOF between two frame directories")
    s.add_argument("pred")
    s.add_argument("ref")
    s.add_argument("--flow", help="directory of LBF1 forward flows")
    s.add_argument("--out", help="write the key=value report here")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _threads(args.threads)
        if args.command == "synthesize":
            return cmd_synthesize(args.manifest, args.out, args.config, args.seed)
        if args.command == "dehaze-fit":
            return cmd_dehaze_fit(args.manifest, args.config, args.out, args.resume)
        if args.command == "bench":
            return cmd_bench(parse_sizes(args.sizes), args.repeats, args.out, args.seed)
        if args.command == "verify":
            return cmd_verify(args.suite, args.seed)
        if args.command == "metrics":
            return cmd_metrics(args.pred, args.ref, args.flow, args.out)
    except (DivergenceDetected, SingularResolvent) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CliError, FormatError, LibraError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
