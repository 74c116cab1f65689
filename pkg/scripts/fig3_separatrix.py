"""Separatrix onset on Bloch-sphere shells, balanced and asymmetric cases.

Searches the smallest radius with a divergent cell (radius step 0.01,
48 x 96 angular grid) and writes the verdict map at the onset.
"""
import math

from _common import outdir, parser
from asymbec.io import write_csv
from asymbec.scan import ClassifierConfig, UNDECIDED, onset_radius
from asymbec.two_mode import TwoModeParams, stationary_norm


def main():
    ap = parser(__doc__, "results/fig3")
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--resolution", type=int, nargs=2, default=(48, 96))
    args = ap.parse_args()
    out = outdir(args.out)
    cfg = ClassifierConfig(dt=args.dt)
    cases = {
        "pt": (TwoModeParams(0.7, U=1.0), None),
        "asym": (TwoModeParams(0.7, a_I=-0.2, a_R=-0.15, U=1.0), None),
    }
    cases["asym"] = (cases["asym"][0], stationary_norm(cases["asym"][0]))
    for name, (params, attractor) in cases.items():
        res = onset_radius(params, attractor, tuple(args.resolution), cfg)
        m = res.onset_map
        th, ph = m.divergent_cells()[0]
        print(f"{name}: onset R={res.radius}  first divergent cell theta={th / math.pi:.3f}pi "
              f"phi={ph / math.pi:.3f}pi  mirror-symmetric={m.is_mirror_symmetric()}  "
              f"undecided={m.count(UNDECIDED)}/{m.verdicts.size}  monotonicity violations={res.monotonicity_violations}")
        rows = [(m.R, float(t), float(p), str(m.verdicts[i, j]), float(m.decision_times[i, j]))
                for i, t in enumerate(m.theta) for j, p in enumerate(m.phi)]
        write_csv(out / f"onset_{name}.csv", ("R", "theta", "phi", "verdict", "decision_time"), rows)
        if args.plot:
            import matplotlib.pyplot as plt
            import numpy as np
            code = {"convergent": 0, "undecided": 1, "divergent": 2}
            img = np.vectorize(code.get)(m.verdicts)
            fig, ax = plt.subplots(figsize=(5, 3))
            ax.imshow(img, origin="lower", extent=(0, 2, 0, 1), aspect="auto", cmap="coolwarm", vmin=0, vmax=2)
            ax.set_xlabel("phi / pi"); ax.set_ylabel("theta / pi"); ax.set_title(f"{name}, R={m.R}")
            fig.tight_layout()
            fig.savefig(out / f"fig3_{name}.png", dpi=150)


if __name__ == "__main__":
    main()
