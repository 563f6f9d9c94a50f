"""Spectral loss and SI-SDRi of MISI over iterations, averaged over mixtures.

Writes a CSV with one row per iteration:
``iteration,loss_mixture,sdri_mixture,loss_sinusoidal,sdri_sinusoidal``.

    python scripts/misi_convergence.py --iters 50 --out convergence.csv
"""
import argparse
import csv
import sys

import numpy as np

from omisi.dsp import StftConfig
from omisi.inversion import distribute_time_residual, misi
from omisi.metrics import oracle_magnitudes, si_sdr_improvement
from omisi.synth import speech_like_mixture

INITS = ("mixture", "sinusoidal")


def trace(mix, refs, v, cfg, n_iter, init):
    sdri = []

    def on_iter(k, signals):
        est = distribute_time_residual(signals, mix)
        sdri.append(np.mean([si_sdr_improvement(e, r, mix) for e, r in zip(est, refs)]))

    res = misi(mix, v, cfg, n_iter=n_iter, init=init, callback=on_iter)
    return np.asarray(res.loss_trace), np.asarray(sdri)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mixtures", type=int, default=5)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default: stdout)")
    args = p.parse_args()

    cfg = StftConfig()
    rng = np.random.default_rng(args.seed)
    loss = {i: 0.0 for i in INITS}
    sdri = {i: 0.0 for i in INITS}
    for _ in range(args.mixtures):
        refs, mix = speech_like_mixture(rng, duration=args.duration)
        v = oracle_magnitudes(refs, cfg)
        for init in INITS:
            lt, st = trace(mix, refs, v, cfg, args.iters, init)
            # normalize so every mixture weighs the same
            loss[init] = loss[init] + lt / lt[0] / args.mixtures
            sdri[init] = sdri[init] + st / args.mixtures

    f = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["iteration"] + [f"{k}_{i}" for i in INITS for k in ("loss", "sdri")])
    for k in range(args.iters + 1):
        w.writerow([k] + [f"{d[i][k]:.6g}" for i in INITS for d in (loss, sdri)])
    if args.out:
        f.close()


if __name__ == "__main__":
    main()
