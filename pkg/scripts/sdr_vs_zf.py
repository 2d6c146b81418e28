"""Achieved direction CRB and sum rate of the SDR and ZF designs over the SINR threshold or the user count.

    python scripts/sdr_vs_zf.py --sweep gamma --out results/sdr_vs_zf_gamma.csv
    python scripts/sdr_vs_zf.py --sweep n_c --nlos --out results/sdr_vs_zf_nc.csv
"""

import argparse
import csv
from pathlib import Path

from etisac import default_scenario, design_sdr, design_zf
from etisac.errors import Infeasible


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sweep", choices=["gamma", "n_c"], default="gamma")
    ap.add_argument("--nlos", action="store_true", help="blocked line of sight for every user")
    ap.add_argument("--channel-seed", type=int, default=0)
    ap.add_argument("--out", default="results/sdr_vs_zf.csv")
    args = ap.parse_args()

    base = default_scenario(channel_seed=args.channel_seed, los_fraction=None if args.nlos else 0.9)
    if args.sweep == "gamma":
        key, values = "gamma_db", [float(g) for g in range(0, 15, 2)]
    else:
        key, values = "n_c", [1, 2, 3, 4]

    rows = []
    for v in values:
        system = base.with_value(key, v).build()
        row = {key: v}
        for name, fn in (("sdr", design_sdr), ("zf", design_zf)):
            try:
                res = fn(system)
                row[f"{name}_crb_phi"] = res.report.crb_phi
                row[f"{name}_sum_rate"] = res.sum_rate
            except Infeasible as exc:
                row[f"{name}_crb_phi"] = row[f"{name}_sum_rate"] = f"infeasible:{exc.constraint_class}"
        rows.append(row)
        print(row)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
