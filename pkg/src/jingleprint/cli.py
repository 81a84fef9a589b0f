"""``jingleprint`` command line.

Exit codes: 0 success, 1 usage or invalid input, 2 I/O or malformed
file, 3 parameter or catalogue mismatch.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .calibration import calibrate_catalogue
from .catalogue import (Catalogue, CatalogueEntry, CatalogueError, DuplicateEntry,
                        InsufficientEvidence, load_catalogue, save_catalogue)
from .config import Config, ConfigError, layered
from .corpus import CorpusSpec, generate_corpus, read_truth
from .frameio import FrameFormatError, open_frame_source, write_pgm
from .identifier import (ParameterMismatch, ScanConfig, scan_stream, signature_threshold,
                         write_report)
from .preprocess import median_filter_3x3, quantize
from .signature import SignatureError, sign_segment
from .srm import SrmParams, segment

log = logging.getLogger("jingleprint")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_MISMATCH = 0, 1, 2, 3

_D = Config()


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _descriptor_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("descriptor parameters")
    g.add_argument("--n-colors", dest="n_color", type=int,
                   help=f"grey buckets for the CCV (default: {_D.n_color})")
    g.add_argument("--tau", type=int,
                   help="coherence threshold in pixels (default: 1%% of the frame)")
    g.add_argument("--q", type=float, help=f"SRM granularity Q (default: {_D.q:g})")
    g.add_argument("--harris-k", dest="k", type=float,
                   help=f"Harris detector constant (default: {_D.k:g})")
    g.add_argument("--sigma", type=float,
                   help=f"structure tensor smoothing scale (default: {_D.sigma:g})")
    g.add_argument("--n-poi", type=int, help=f"points of interest per frame (default: {_D.n_poi})")
    g.add_argument("--nms", type=int, help=f"non-maximum suppression radius (default: {_D.nms})")


def _decision_flags(p: argparse.ArgumentParser, what: str) -> None:
    g = p.add_argument_group("fusion weights and thresholds")
    g.add_argument("--th-ccv", type=float, help=f"CCV threshold {what} (default: {_D.th_ccv:g})")
    g.add_argument("--th-poi", type=float, help=f"POI threshold {what} (default: {_D.th_poi:g})")
    g.add_argument("--w-ccv", type=float, help=f"CCV weight {what} (default: {_D.w_ccv:g})")
    g.add_argument("--w-poi", type=float, help=f"POI weight {what} (default: {_D.w_poi:g})")


def _scan_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scanning")
    g.add_argument("--stride", type=int, help=f"offset step in frames (default: {_D.stride})")
    g.add_argument("--jobs", type=int, help=f"worker processes (default: {_D.jobs})")
    g.add_argument("--thre-dist", type=float,
                   help=f"POI match distance in pixels (default: {_D.thre_dist:g})")
    g.add_argument("--thre-harris", type=float,
                   help=f"POI match response tolerance (default: {_D.thre_harris:g})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jingleprint", description=__doc__.splitlines()[0].strip("`"),
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--config", type=Path,
                        help="key=value file read before command-line flags")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sign", help="sign a jingle and add it to a catalogue")
    p.add_argument("--frames", required=True, type=Path,
                   help="frame directory (PPM/PGM) or .y4m file")
    p.add_argument("--format", choices=("ppm-sequence", "pgm-sequence", "y4m"),
                   help="container format (default: inferred from the path)")
    p.add_argument("--id", required=True, dest="program_id", help="programme identifier")
    p.add_argument("--channel", required=True, help="channel name")
    p.add_argument("--start", type=int, default=0, help="first sampled frame (default: 0)")
    p.add_argument("--nframes", dest="n_frame", type=int,
                   help=f"sampled frames N_frame (default: {_D.n_frame})")
    p.add_argument("--tstep", dest="t_step", type=int,
                   help=f"frames between samples T_step (default: {_D.t_step})")
    p.add_argument("--catalogue", required=True, type=Path,
                   help="catalogue file, created if missing")
    p.add_argument("--replace", action="store_true", help="overwrite an existing entry")
    _descriptor_flags(p)
    _decision_flags(p, "stored with the entry")
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("scan", help="locate catalogued jingles in a stream")
    p.add_argument("--stream", required=True, type=Path, help="frame directory or .y4m file")
    p.add_argument("--format", choices=("ppm-sequence", "pgm-sequence", "y4m"),
                   help="container format (default: inferred from the path)")
    p.add_argument("--catalogue", required=True, type=Path, help="catalogue file")
    p.add_argument("--report", required=True, type=Path, help="detection CSV to write")
    p.add_argument("--plot", action="store_true",
                   help="also write a similarity timeline PNG beside the report")
    p.add_argument("--nframes", dest="n_frame", type=int,
                   help="require entries signed with this N_frame")
    p.add_argument("--tstep", dest="t_step", type=int,
                   help="require entries signed with this T_step")
    p.add_argument("--no-cache", action="store_true",
                   help="recompute frame signatures for every window")
    p.add_argument("--emit-undefined", action="store_true",
                   help="log offsets where no entry matched")
    _descriptor_flags(p)
    _decision_flags(p, "overriding every entry")
    _scan_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("calibrate", help="derive per-channel descriptor weights from truth")
    p.add_argument("--catalogue", required=True, type=Path, help="catalogue file, rewritten")
    p.add_argument("--truth", required=True, type=Path,
                   help="CSV with header stream_path,offset,program_id")
    p.add_argument("--streams-root", type=Path,
                   help="base for relative stream paths (default: the truth file's directory)")
    p.add_argument("--report", type=Path, help="write the weight table as CSV")
    p.add_argument("--plot", action="store_true", help="also write a PNG beside --report")
    _scan_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("catalogue", help="inspect or edit a catalogue")
    csub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    q = csub.add_parser("list", help="list entries")
    q.add_argument("--catalogue", required=True, type=Path)
    q.set_defaults(func=cmd_catalogue_list)
    q = csub.add_parser("remove", help="remove an entry")
    q.add_argument("--catalogue", required=True, type=Path)
    q.add_argument("--id", required=True, dest="program_id")
    q.set_defaults(func=cmd_catalogue_remove)

    p = sub.add_parser("gen-corpus", help="write a seeded synthetic test corpus")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--jingles", type=int, default=10, help="distinct jingles (default: 10)")
    p.add_argument("--streams", type=int, default=5, help="streams (default: 5)")
    p.add_argument("--rng-seed", "--seed", dest="seed", type=int, default=7,
                   help="random seed (default: 7)")
    p.add_argument("--length", type=int, default=2000, help="frames per stream (default: 2000)")
    p.add_argument("--jingle-length", type=int, default=60,
                   help="frames per jingle (default: 60)")
    p.add_argument("--plants", type=int, default=2,
                   help="occurrences of each jingle (default: 2)")
    p.add_argument("--width", type=int, default=64, help="frame width (default: 64)")
    p.add_argument("--height", type=int, default=48, help="frame height (default: 48)")
    p.add_argument("--noise-amp", type=int, default=0,
                   help="uniform noise amplitude added to streams (default: 0)")
    p.add_argument("--blur", action="store_true", help="3x3 box blur streams before noise")
    p.add_argument("--confusers", type=int, default=0,
                   help="near-duplicate jingles planted outside the truth (default: 0)")
    p.add_argument("--catalogue", type=Path, help="also sign every jingle into this catalogue")
    p.add_argument("--nframes", dest="n_frame", type=int,
                   help=f"sampled frames when signing (default: {_D.n_frame})")
    p.add_argument("--tstep", dest="t_step", type=int,
                   help=f"frames between samples when signing (default: {_D.t_step})")
    _descriptor_flags(p)
    _decision_flags(p, "stored with each signed entry")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("segment-image", help="SRM debug view of one image")
    p.add_argument("--image", required=True, type=Path, help="PGM or PPM image")
    p.add_argument("--out", required=True, type=Path,
                   help="PGM painted with region means; regions go to <out>.csv")
    p.add_argument("--q", type=float, default=32.0, help="SRM granularity Q (default: 32)")
    p.add_argument("--n-colors", dest="n_color", type=int, default=64,
                   help="grey buckets before segmenting; 256 keeps raw luma (default: 64)")
    p.add_argument("--no-median", action="store_true", help="skip the 3x3 median filter")
    p.add_argument("--quadrature", action="store_true",
                   help="combine region bounds as sqrt(b^2 + b'^2) instead of b + b'")
    p.set_defaults(func=cmd_segment_image)
    return parser


def _config(args) -> Config:
    return layered(args.config, vars(args))


def _load_or_new(path: Path) -> Catalogue:
    return load_catalogue(path) if path.exists() else Catalogue()


def cmd_sign(args) -> int:
    cfg = _config(args)
    with open_frame_source(args.frames, args.format) as src:
        vsig = sign_segment(src, args.start, cfg.n_frame, cfg.t_step, cfg.descriptor_params())
    catalogue = _load_or_new(args.catalogue)
    entry = CatalogueEntry(args.program_id, args.channel, vsig, cfg.w_ccv, cfg.w_poi,
                           cfg.th_ccv, cfg.th_poi)
    catalogue.add(entry, replace=args.replace)
    save_catalogue(catalogue, args.catalogue)
    p = vsig.params
    print(f"{entry.program_id} ({entry.channel}): n_frame={vsig.n_frame} t_step={vsig.t_step} "
          f"frames {vsig.start}..{vsig.frames[-1].source_index} n_color={p.n_color} tau={p.tau} "
          f"q={p.q:g} k={p.k:g} sigma={p.sigma:g} n_poi={p.n_poi} nms={p.nms}")
    return EXIT_OK


def _explicit(args, *names) -> dict:
    """Flags given on the command line or in the config file, not defaults."""
    from .config import read_config
    values = read_config(args.config) if args.config else {}
    values.update({n: getattr(args, n) for n in names if getattr(args, n, None) is not None})
    return {n: values[n] for n in names if n in values}


def _scan_config(args, cfg: Config, **extra) -> ScanConfig:
    desc = _explicit(args, "n_color", "tau", "q", "k", "sigma", "n_poi", "nms")
    params = cfg.descriptor_params() if desc else None
    return ScanConfig(stride=cfg.stride, jobs=cfg.jobs, params=params,
                      thre_dist=cfg.thre_dist, thre_harris=cfg.thre_harris, **extra)


def _override_entries(catalogue: Catalogue, overrides: dict) -> Catalogue:
    if not overrides:
        return catalogue
    return Catalogue({pid: replace(e, **overrides) for pid, e in catalogue.entries.items()})


def cmd_scan(args) -> int:
    cfg = _config(args)
    catalogue = load_catalogue(args.catalogue)
    catalogue = _override_entries(catalogue, _explicit(args, "th_ccv", "th_poi", "w_ccv", "w_poi"))
    frame_limits = _explicit(args, "n_frame", "t_step")
    scan_cfg = _scan_config(args, cfg, cache=not args.no_cache,
                            emit_undefined=args.emit_undefined, trace=args.plot,
                            report_path=args.report, **frame_limits)
    t0 = time.perf_counter()
    with open_frame_source(args.stream, args.format) as src:
        result = scan_stream(src, catalogue, scan_cfg)
    elapsed = time.perf_counter() - t0
    write_report(result.detections, args.report)
    if args.plot:
        from .plotting import plot_scan
        th = {e.program_id: signature_threshold(e.th_ccv, e.th_poi, e.w_ccv, e.w_poi)
              for e in catalogue}
        plot_scan(result.trace, result.detections, th, args.report.with_suffix(".png"),
                  title=args.stream.name)
    for offset in result.undefined:
        log.info("offset %d: undefined", offset)
    print(f"scanned {result.frames_read} frames against {len(catalogue)} entries: "
          f"{len(result.detections)} detections in {elapsed:.1f}s -> {args.report}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    catalogue = load_catalogue(args.catalogue)
    truth = read_truth(args.truth)
    if not truth:
        raise InsufficientEvidence("insufficient training evidence: truth file is empty")
    base = args.streams_root or args.truth.parent
    updated, reports = calibrate_catalogue(catalogue, truth, _scan_config(args, cfg), base)
    save_catalogue(updated, args.catalogue)

    header = f"{'channel':<12} {'R ccv':>6} {'R poi':>6} {'P ccv':>6} {'P poi':>6} {'w_ccv':>6} {'w_poi':>6}"
    print(header)
    rows = []
    for ch, rep in reports.items():
        c, p = rep["ccv"], rep["poi"]
        print(f"{ch:<12} {c.recall:6.2f} {p.recall:6.2f} {c.precision:6.2f} {p.precision:6.2f} "
              f"{c.weight:6.2f} {p.weight:6.2f}")
        rows.append((ch, c.ci, c.mi, c.fi, p.ci, p.mi, p.fi, f"{c.recall:.4f}", f"{p.recall:.4f}",
                     f"{c.precision:.4f}", f"{p.precision:.4f}", f"{c.weight:.4f}", f"{p.weight:.4f}"))
    if args.report:
        import csv
        with open(args.report, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("channel", "ci_ccv", "mi_ccv", "fi_ccv", "ci_poi", "mi_poi", "fi_poi",
                        "recall_ccv", "recall_poi", "precision_ccv", "precision_poi",
                        "w_ccv", "w_poi"))
            w.writerows(rows)
        if args.plot:
            from .plotting import plot_calibration
            plot_calibration(reports, args.report.with_suffix(".png"))
    return EXIT_OK


def cmd_catalogue_list(args) -> int:
    catalogue = load_catalogue(args.catalogue)
    for e in catalogue:
        print(f"{e.program_id}\t{e.channel}\tn_frame={e.vsig.n_frame}\tt_step={e.vsig.t_step}\t"
              f"w=({e.w_ccv:g},{e.w_poi:g})\tth=({e.th_ccv:g},{e.th_poi:g})")
    return EXIT_OK


def cmd_catalogue_remove(args) -> int:
    catalogue = load_catalogue(args.catalogue)
    try:
        catalogue.remove(args.program_id)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    save_catalogue(catalogue, args.catalogue)
    print(f"removed {args.program_id}")
    return EXIT_OK


def cmd_gen_corpus(args) -> int:
    spec = CorpusSpec(jingles=args.jingles, streams=args.streams, seed=args.seed,
                      width=args.width, height=args.height, stream_length=args.length,
                      jingle_length=args.jingle_length, plants_per_jingle=args.plants,
                      noise_amp=args.noise_amp, blur=args.blur, confusers=args.confusers)
    try:
        corpus = generate_corpus(args.out, spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"{len(corpus.jingles)} jingles, {len(corpus.stream_paths())} streams, "
          f"{len(corpus.truth)} planted occurrences -> {args.out}")
    if args.catalogue:
        from .corpus import sign_jingles
        cfg = _config(args)
        catalogue = sign_jingles(args.out, cfg.descriptor_params(), cfg.n_frame, cfg.t_step,
                                 w_ccv=cfg.w_ccv, w_poi=cfg.w_poi,
                                 th_ccv=cfg.th_ccv, th_poi=cfg.th_poi)
        save_catalogue(catalogue, args.catalogue)
        print(f"signed {len(catalogue)} jingles -> {args.catalogue}")
    return EXIT_OK


def cmd_segment_image(args) -> int:
    with open_frame_source(args.image) as src:
        frame = src.next_frame()
    if not args.no_median:
        frame = median_filter_3x3(frame)
    try:
        qf = quantize(frame, args.n_color)
        regions = segment(qf, SrmParams(q=args.q, quadrature=args.quadrature))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_pgm(args.out, regions.mean_image())
    sidecar = args.out.with_suffix(args.out.suffix + ".csv")
    with open(sidecar, "w") as fh:
        fh.write("region_id,size,mean\n")
        for rid, (size, mean) in enumerate(zip(regions.region_size, regions.region_mean)):
            fh.write(f"{rid},{size},{mean:.6f}\n")
    print(f"{regions.region_count} regions -> {args.out}, {sidecar}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParameterMismatch, DuplicateEntry) as exc:
        print(f"jingleprint: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (OSError, FrameFormatError, CatalogueError) as exc:
        print(f"jingleprint: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ConfigError, SignatureError, InsufficientEvidence, ValueError) as exc:
        print(f"jingleprint: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
