"""Sweep the evoked-response amplitude and chart closed-loop accuracy.

This is the calibration procedure behind the default subject amplitude: for
each amplitude, run the two-phase evaluation (train, select under a timing
mismatch, retrain on the logged selections, select again) across a few seeds
and print the phase accuracies.  Larger bumps make both phases easier; the
default sits where retrained accuracy saturates with margin to spare.

With the default three repetitions per object this takes a minute or so.
"""
import argparse

import numpy as np

from p300loop import session, subject


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--amplitudes", type=float, nargs="+",
                    default=[6.0, 8.0, 10.0, 12.0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--reps", type=int, default=3,
                    help="selections per object and phase")
    ap.add_argument("--mismatch", type=float, default=0.1,
                    help="evoked-latency shift during selection, seconds")
    args = ap.parse_args()

    total = 12 * args.reps
    print(f"mismatch {args.mismatch:g} s, {total} selections per phase")
    print("\n  amp    seed   phase 1       phase 2")
    for amp in args.amplitudes:
        p1_all, p2_all = [], []
        for seed in args.seeds:
            params = subject.SubjectParams(p300_amp=amp)
            report = session.run_full_evaluation(
                params, seed=seed, reps_per_object=args.reps,
                mismatch=args.mismatch)
            p1 = report["phase1"]["correct"]
            p2 = report["phase2"]["correct"]
            p1_all.append(p1)
            p2_all.append(p2)
            print(f"  {amp:4.1f}   {seed:4d}   {p1:3d}/{total}       "
                  f"{p2:3d}/{total}")
        print(f"  {amp:4.1f}   mean   {np.mean(p1_all):5.1f}/{total}     "
              f"{np.mean(p2_all):5.1f}/{total}")


if __name__ == "__main__":
    main()
