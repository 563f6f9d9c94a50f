"""Oracle-magnitude benchmark: AM vs MISI vs oMISI for several lookaheads.

Prints one row per method with latency and mean SI-SDRi over a set of
speech-like synthetic mixtures, optionally writing the rows as JSON.

    python scripts/oracle_benchmark.py --mixtures 10 --duration 2
"""
import argparse
import json
import time

import numpy as np

from omisi.dsp import StftConfig
from omisi.metrics import oracle_magnitudes
from omisi.pipeline import score, separate
from omisi.synth import speech_like_mixture


def run(args):
    cfg = StftConfig()
    rng = np.random.default_rng(args.seed)
    suite = []
    for _ in range(args.mixtures):
        refs, mix = speech_like_mixture(rng, n_sources=args.sources, duration=args.duration)
        suite.append((refs, mix, oracle_magnitudes(refs, cfg)))

    methods = [("am", {})]
    for init in args.phase_init:
        methods.append(("misi", dict(n_iter=args.iters, phase_init=init)))
        methods.extend(("omisi", dict(lookahead=k, phase_init=init)) for k in args.lookahead)

    rows = []
    for algo, kwargs in methods:
        t0 = time.perf_counter()
        sdri, label, latency = [], None, None
        for refs, mix, v in suite:
            sep = separate(algo, mix, v, cfg, **kwargs)
            sdri.append(score(sep, refs, mix).mean_si_sdri)
            label, latency = sep.label, sep.latency_samples
        rows.append(dict(label=label, latency_ms=None if latency is None else 1e3 * latency / cfg.sample_rate,
                         mean_si_sdri=float(np.mean(sdri)), std_si_sdri=float(np.std(sdri)),
                         seconds=time.perf_counter() - t0))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mixtures", type=int, default=10)
    p.add_argument("--sources", type=int, default=2)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--iters", type=int, default=15)
    p.add_argument("--lookahead", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--phase-init", nargs="+", default=["mixture", "sinusoidal"],
                   choices=["mixture", "sinusoidal"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="write rows to this file")
    args = p.parse_args()

    rows = run(args)
    print(f"{'method':<16}{'latency':>10}{'SI-SDRi':>10}{'std':>8}{'time':>8}")
    for r in rows:
        lat = "offline" if r["latency_ms"] is None else f"{r['latency_ms']:.0f} ms"
        print(f"{r['label']:<16}{lat:>10}{r['mean_si_sdri']:>10.2f}{r['std_si_sdri']:>8.2f}"
              f"{r['seconds']:>7.1f}s")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()
