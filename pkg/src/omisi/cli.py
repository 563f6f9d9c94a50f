"""Command-line interface: ``omisi {analyze,synthesize,separate,stream,metrics}``.

Exit codes: 0 success, 1 usage error, 2 data or shape error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import files
from .dsp import StftConfig, istft, stft
from .inversion import check_magnitudes, distribute_time_residual
from .metrics import evaluate, oracle_magnitudes
from .phase_init import PHASE_INITS
from .pipeline import ALGORITHMS, make_label, score, separate
from .streaming import StreamConfig, latency_samples, stream_open
from .synth import speech_like

log = logging.getLogger("omisi")

REPORT_SCHEMA_VERSION = 1
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _stft_args(p):
    g = p.add_argument_group("STFT")
    g.add_argument("--win-ms", type=float, default=16.0, help="window length in ms (default 16)")
    g.add_argument("--hop-ratio", type=float, default=0.5, help="hop as a fraction of the window (default 0.5)")
    g.add_argument("--zpf", type=int, default=2, help="zero-padding factor (default 2)")
    g.add_argument("--window", choices=("hann", "sqrt_hann"), default="hann")


def _config(args, sample_rate) -> StftConfig:
    try:
        return StftConfig.from_ms(args.win_ms, args.hop_ratio, args.zpf, sample_rate, args.window)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _write_stems(out_dir: Path, estimates, sample_rate, normalize=False, pcm16=False):
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for j, est in enumerate(estimates):
        peak = np.max(np.abs(est)) if est.size else 0.0
        if normalize and peak > 0:
            est = est / peak * 0.99
        elif peak > 1.0:
            log.warning("%s source %d peaks at %.2f; stem will clip (use --normalize)",
                        out_dir.name, j, peak)
        path = out_dir / f"source{j}.wav"
        files.write_wav(path, est, sample_rate, pcm16=pcm16)
        paths.append(str(path))
    return paths


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _write_json(path: Path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_sources(paths):
    signals, rates = zip(*(files.read_wav(p) for p in paths))
    if len(set(rates)) != 1:
        raise ValueError(f"sample rates differ across inputs: {sorted(set(rates))}")
    n = min(len(s) for s in signals)
    if any(len(s) != n for s in signals):
        log.warning("trimming sources to the shortest length (%d samples)", n)
    return np.stack([s[:n] for s in signals]), rates[0]


def cmd_analyze(args):
    x, rate = files.read_wav(args.wav)
    cfg = _config(args, rate)
    spec = stft(x, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.wav).stem
    files.write_magnitudes(out / f"{stem}.mspc", np.abs(spec)[None])
    if not args.no_phase:
        np.save(out / f"{stem}.phase.npy", np.angle(spec)[None])
    print(json.dumps({"n_bins": cfg.n_bins, "n_frames": spec.shape[1],
                      "sample_rate": rate, "magnitudes": str(out / f"{stem}.mspc")}))


def cmd_synthesize(args):
    v = files.read_magnitudes(args.magnitudes)
    phase = np.load(args.phase)
    if phase.ndim == 2:
        phase = phase[None]
    if phase.shape != v.shape:
        raise ValueError(f"phase {phase.shape} does not match magnitudes {v.shape}")
    cfg = _config(args, args.sample_rate)
    if v.shape[1] != cfg.n_bins:
        raise ValueError(f"magnitude file has {v.shape[1]} bins, config expects {cfg.n_bins}")
    signals = istft(v * np.exp(1j * phase), cfg)
    _write_stems(Path(args.out), signals, args.sample_rate, pcm16=args.pcm16)


def _load_experiment(args):
    """Return (mixture, magnitudes, references or None, sample_rate, scenario)."""
    scenario = args.scenario
    if scenario is None:
        scenario = "external" if args.magnitudes else "oracle"
    if scenario == "oracle":
        if args.sources:
            refs, rate = _read_sources(args.sources)
        elif args.synthetic:
            rng = np.random.default_rng(args.seed)
            rate = 16000
            refs = np.stack([speech_like(rng, args.duration, rate) for _ in range(args.synthetic)])
        else:
            raise UsageError("oracle scenario needs --sources or --synthetic")
        if args.snr is not None and len(refs) > 1:
            e0 = np.sum(refs[0] ** 2)
            for j in range(1, len(refs)):
                ej = np.sum(refs[j] ** 2)
                if ej > 0:
                    refs[j] *= np.sqrt(e0 / ej * 10 ** (-args.snr / 10))
        mixture = refs.sum(axis=0)
        cfg = _config(args, rate)
        return mixture, oracle_magnitudes(refs, cfg), refs, rate, scenario, cfg

    if not (args.mixture and args.magnitudes):
        raise UsageError("external scenario needs --mixture and --magnitudes")
    mixture, rate = files.read_wav(args.mixture)
    magnitudes = files.read_magnitudes(args.magnitudes)
    refs = None
    if args.references:
        refs, ref_rate = _read_sources(args.references)
        if ref_rate != rate:
            raise ValueError("reference and mixture sample rates differ")
    cfg = _config(args, rate)
    check_magnitudes(magnitudes, stft(mixture, cfg))
    return mixture, magnitudes, refs, rate, scenario, cfg


def cmd_separate(args):
    mixture, magnitudes, refs, rate, scenario, cfg = _load_experiment(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if np.max(np.abs(mixture), initial=0.0) > 1.0:
        log.warning("mixture peaks at %.2f; mixture.wav will clip", np.max(np.abs(mixture)))
    files.write_wav(out / "mixture.wav", mixture, rate, pcm16=args.pcm16)

    runs = []
    for algo in args.algorithms:
        if algo == "am":
            runs.append(dict(algorithm="am"))
            continue
        for init in args.phase_init:
            if algo == "misi":
                runs.append(dict(algorithm="misi", phase_init=init))
            else:
                runs.extend(dict(algorithm="omisi", phase_init=init, lookahead=k)
                            for k in args.lookahead)

    results = []
    for run in runs:
        sep = separate(run["algorithm"], mixture, magnitudes, cfg, n_iter=args.iters,
                       lookahead=run.get("lookahead", 1), iters_per_frame=args.omisi_iters,
                       phase_init=run.get("phase_init", "mixture"),
                       drain_iters=args.drain_iters)
        entry = {"label": sep.label, "algorithm": sep.algorithm,
                 "lookahead": sep.lookahead, "phase_init": sep.phase_init,
                 "n_iter": sep.n_iter, "latency_samples": sep.latency_samples}
        entry["stems"] = _write_stems(out / sep.label, sep.estimates, rate,
                                      normalize=args.normalize, pcm16=args.pcm16)
        if sep.algorithm == "misi":
            path = out / f"{sep.label}_loss.csv"
            _write_csv(path, ["iteration", "loss"], enumerate(sep.loss_trace))
            entry["loss_csv"] = str(path)
        elif sep.algorithm == "omisi":
            path = out / f"{sep.label}_loss.csv"
            _write_csv(path, ["frame", "iteration", "loss"], sep.loss_trace)
            entry["loss_csv"] = str(path)
        if refs is not None:
            rep = score(sep, refs, mixture)
            entry.update(si_sdr=rep.si_sdr, si_sdri=rep.si_sdri, mean_si_sdri=rep.mean_si_sdri)
        results.append(entry)
        if "mean_si_sdri" in entry:
            log.info("%-14s mean SI-SDRi %6.2f dB", sep.label, entry["mean_si_sdri"])

    report = {"schema_version": REPORT_SCHEMA_VERSION, "command": "separate",
              "scenario": scenario, "n_sources": int(magnitudes.shape[0]),
              "stft": cfg.to_dict(), "seed": args.seed, "results": results}
    _write_json(out / "report.json", report)


def cmd_stream(args):
    mixture, rate = files.read_wav(args.mixture)
    magnitudes = files.read_magnitudes(args.magnitudes)
    cfg = _config(args, rate)
    mix_spec = stft(mixture, cfg)
    if magnitudes.shape[1:] != mix_spec.shape:
        raise ValueError(
            f"magnitude file has {magnitudes.shape[1:]} (F, T), mixture STFT has {mix_spec.shape}"
        )
    scfg = StreamConfig(cfg, n_sources=magnitudes.shape[0], lookahead=args.lookahead,
                        iters_per_frame=args.iters, phase_init=args.phase_init,
                        drain_iters=args.drain_iters)
    stream = stream_open(scfg)
    blocks, timing = [], []
    for t in range(mix_spec.shape[1]):
        t0 = time.perf_counter()
        block = stream.push(mix_spec[:, t], magnitudes[:, :, t])
        timing.append((t, time.perf_counter() - t0, block is not None))
        if block is not None:
            blocks.append(block)
    t0 = time.perf_counter()
    blocks.append(stream.close())
    close_time = time.perf_counter() - t0
    estimates = distribute_time_residual(np.concatenate(blocks, axis=1), mixture)

    out = Path(args.out)
    label = make_label("omisi", args.lookahead, args.phase_init)
    stems = _write_stems(out / label, estimates, rate, normalize=args.normalize, pcm16=args.pcm16)
    _write_csv(out / f"{label}_frame_times.csv", ["frame", "seconds", "emitted"],
               [(t, s, int(e)) for t, s, e in timing])
    _write_csv(out / f"{label}_loss.csv", ["frame", "iteration", "loss"], stream.loss_log)

    hop_seconds = cfg.hop / rate
    per_frame = np.array([s for _, s, _ in timing])
    report = {"schema_version": REPORT_SCHEMA_VERSION, "command": "stream",
              "label": label, "stft": cfg.to_dict(), "lookahead": args.lookahead,
              "iters_per_frame": scfg.iters_per_frame, "phase_init": args.phase_init,
              "latency_samples": latency_samples(scfg),
              "latency_ms": 1e3 * latency_samples(scfg) / rate,
              "n_frames": int(mix_spec.shape[1]), "stems": stems,
              "mean_frame_seconds": float(per_frame.mean()),
              "max_frame_seconds": float(per_frame.max()),
              "close_seconds": close_time, "hop_seconds": hop_seconds}
    if args.references:
        refs, _ = _read_sources(args.references)
        rep = evaluate(label, estimates, refs, mixture, latency_samples(scfg))
        report.update(si_sdr=rep.si_sdr, si_sdri=rep.si_sdri, mean_si_sdri=rep.mean_si_sdri)
    # wall-clock numbers make this report non-deterministic by design
    _write_json(out / f"{label}_report.json", report)
    log.info("%s: mean %.2f ms per frame (hop is %.2f ms)", label,
             1e3 * per_frame.mean(), 1e3 * hop_seconds)


def cmd_metrics(args):
    if len(args.references) != len(args.estimates):
        raise UsageError("need as many --estimates as --references")
    refs, rate = _read_sources(args.references)
    ests, est_rate = _read_sources(args.estimates)
    if rate != est_rate:
        raise ValueError("reference and estimate sample rates differ")
    mixture = files.read_wav(args.mixture)[0] if args.mixture else refs.sum(axis=0)
    rep = evaluate("metrics", ests, refs, mixture)
    out = {"schema_version": REPORT_SCHEMA_VERSION, "command": "metrics",
           "si_sdr": rep.si_sdr, "si_sdri": rep.si_sdri, "mean_si_sdri": rep.mean_si_sdri}
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


def build_parser():
    parser = _Parser(prog="omisi", description="Offline and online multiple-input spectrogram inversion.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="write STFT magnitudes (and phases) of a WAV")
    p.add_argument("wav")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-phase", action="store_true", help="skip the phase sidecar")
    _stft_args(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synthesize", help="inverse STFT of magnitudes + phases")
    p.add_argument("--magnitudes", required=True)
    p.add_argument("--phase", required=True, help=".npy phase array (J, F, T) or (F, T)")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--out", required=True)
    p.add_argument("--pcm16", action="store_true")
    _stft_args(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("separate", help="run AM / MISI / oMISI and write stems and a report")
    src = p.add_argument_group("inputs")
    src.add_argument("--sources", nargs="+", help="ground-truth source WAVs (oracle scenario)")
    src.add_argument("--synthetic", type=int, metavar="J",
                     help="generate J speech-like sources instead of reading WAVs")
    src.add_argument("--duration", type=float, default=2.0, help="synthetic source length in s")
    src.add_argument("--mixture", help="mixture WAV (external scenario)")
    src.add_argument("--magnitudes", help="magnitude file (external scenario)")
    src.add_argument("--references", nargs="+", help="reference WAVs for scoring (external scenario)")
    p.add_argument("--scenario", choices=("oracle", "external"))
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    p.add_argument("--lookahead", nargs="+", type=int, default=[0, 1, 2], metavar="K")
    p.add_argument("--iters", type=int, default=15, help="MISI iterations (default 15)")
    p.add_argument("--omisi-iters", type=int, help="oMISI iterations per frame (default round(15/(K+1)))")
    p.add_argument("--drain-iters", type=int, help="oMISI iterations per end-of-stream window")
    p.add_argument("--phase-init", nargs="+", choices=PHASE_INITS, default=["mixture"])
    p.add_argument("--snr", type=float, help="rescale sources 2.. to this SNR (dB) against source 1")
    p.add_argument("--normalize", action="store_true", help="peak-normalize stems")
    p.add_argument("--pcm16", action="store_true", help="write PCM16 instead of float32 WAVs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _stft_args(p)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("stream", help="run oMISI frame by frame with timing")
    p.add_argument("--mixture", required=True)
    p.add_argument("--magnitudes", required=True)
    p.add_argument("--lookahead", type=int, default=1, metavar="K")
    p.add_argument("--iters", type=int, help="iterations per frame (default round(15/(K+1)))")
    p.add_argument("--drain-iters", type=int)
    p.add_argument("--phase-init", choices=PHASE_INITS, default="mixture")
    p.add_argument("--references", nargs="+")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--pcm16", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.add_argument("--out", required=True)
    _stft_args(p)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("metrics", help="SI-SDR / SI-SDRi of estimates against references")
    p.add_argument("--references", nargs="+", required=True)
    p.add_argument("--estimates", nargs="+", required=True)
    p.add_argument("--mixture", help="mixture WAV (default: sum of references)")
    p.add_argument("--out", help="also write the JSON here")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except UsageError as e:
        print(f"omisi: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as e:
        print(f"omisi: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
