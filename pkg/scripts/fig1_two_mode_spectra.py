"""Two-mode nonlinear spectra and BdG stability along the crossing branch.

Prints the gamma at which the ground-state branch becomes stationary for
U = 0, 0.5, 1, 1.5 and both barrier settings, and writes the full unit-norm
spectra and BdG eigenvalues as CSV.
"""
import numpy as np

from _common import outdir, parser
from asymbec.io import write_csv
from asymbec.scan import SweepSpec, sweep_spectrum
from asymbec.two_mode import bdg_two_mode, nonlinear_crossing

A_I = -0.2
US = (0.0, 0.5, 1.0, 1.5)


def main():
    args = parser(__doc__, "results/fig1").parse_args()
    out = outdir(args.out)
    for a_R in (0.0, -0.15):
        print(f"a_I={A_I}, a_R={a_R}")
        for U in US:
            st = nonlinear_crossing(A_I, a_R, U)
            sp = bdg_two_mode(st)
            print(f"  U={U:3.1f}: crossing gamma={st.params.gamma:.6f}  stability={sp.classification:9s}"
                  f"  max Im w={sp.nontrivial.imag.max():+.4f}")
        rows, bdg_rows = [], []
        for U in US:
            spec = SweepSpec(0.5, 1.2, 141, a_I=A_I, a_R=a_R, interaction=U)
            sweep, states = sweep_spectrum(spec, return_states=True)
            rows += [(U, r.gamma, r.branch, r.mu_re, r.mu_im) for r in sweep]
            for (g, label), st in sorted(states.items()):
                if label == "s0":
                    sp = bdg_two_mode(st)
                    bdg_rows += [(U, g, w.real, w.imag, sp.classification) for w in sp.omegas]
        tag = f"aR{a_R:+.2f}"
        write_csv(out / f"spectrum_{tag}.csv", ("U", "gamma", "branch", "mu_re", "mu_im"), rows)
        write_csv(out / f"bdg_{tag}.csv", ("U", "gamma", "omega_re", "omega_im", "class"), bdg_rows)
        if args.plot:
            import matplotlib.pyplot as plt
            fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
            for U in US:
                sel = [r for r in rows if r[0] == U and r[2] == "s0"]
                ax1.plot([r[1] for r in sel], [r[4] for r in sel], label=f"U={U}")
                sel = [r for r in bdg_rows if r[0] == U]
                ax2.plot([r[1] for r in sel], [r[3] for r in sel], ".", ms=2)
            ax1.axhline(0, color="k", lw=0.5)
            ax1.set_xlabel("gamma"); ax1.set_ylabel("Im mu"); ax1.legend()
            ax2.set_xlabel("gamma"); ax2.set_ylabel("Im omega")
            fig.tight_layout()
            fig.savefig(out / f"fig1_{tag}.png", dpi=150)


if __name__ == "__main__":
    main()
