"""Amplitude x centre phase map of blow-up, printed as a character grid.

    python scripts/phase_sweep.py --config configs/sweep.cfg --out runs/sweep
"""

import argparse

from blowup_lab import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/sweep.cfg")
    ap.add_argument("--out", default="runs/sweep")
    args = ap.parse_args()

    cfg = cli.load_config(args.config, "sweep")
    record = cli.execute(cfg, args.out)
    rows = record["sweep"]
    centres = cfg["sweep_centers"]
    print("amplitude \\ centre " + " ".join(f"{c:>7g}" for c in centres))
    for amp in cfg["sweep_amplitudes"]:
        cells = [r for r in rows if r["amplitude"] == amp]
        marks = []
        for r in cells:
            if r["status"] != "ok":
                marks.append("err")
            elif r["blew_up"]:
                marks.append(f"{r['T_est']:.1f}")
            else:
                marks.append(".")
        print(f"{amp:>18g} " + " ".join(f"{m:>7}" for m in marks))
    print(f"(number = estimated blow-up time, '.' = bounded up to t_end={cfg['t_end']:g}); csv in {args.out}")


if __name__ == "__main__":
    main()
