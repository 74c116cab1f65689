"""Extended model: stationary norm against gamma and BdG eigenvalues along the branch.

Traces the ground-state branch in the norm (through the fold), then
computes the four smallest BdG eigenvalues (by |Im w|) plus the norm and
oscillation modes of every traced state.
"""
import numpy as np

from _common import outdir, parser
from asymbec.extended import ExtendedParams, bdg_extended, trace_branch
from asymbec.io import write_csv

PARAMS = ExtendedParams(0.0, a_R=-0.01, a_I=-0.08, g=0.1)


def main():
    args = parser(__doc__, "results/fig4").parse_args()
    out = outdir(args.out)
    branch = trace_branch(PARAMS, norms=np.arange(1, 45) * 0.05)
    n_f, g_f = branch.fold
    print(f"linear crossing gamma={branch.linear_gamma:.6f}; fold at N={n_f:.4f}, gamma={g_f:.6f}")
    rows, modes = [], []
    for st in branch.states:
        side = "upper" if st.norm > n_f else "lower"
        sp = bdg_extended(st)
        rows.append((st.params.gamma, side, st.mu, st.norm, sp.classification))
        modes += [(st.params.gamma, st.norm, side, "smallest", w.real, w.imag) for w in sp.smallest(4)]
        modes.append((st.params.gamma, st.norm, side, "norm", sp.norm_mode().real, sp.norm_mode().imag))
        w = sp.oscillation_mode()
        modes.append((st.params.gamma, st.norm, side, "oscillation", w.real, w.imag))
        print(f"  N={st.norm:.2f} gamma={st.params.gamma:.6f} {side:5s} {sp.classification:9s} "
              f"norm mode {sp.norm_mode().imag:+.5f}i  oscillation {w:.4f}")
    write_csv(out / "branch.csv", ("gamma", "side", "mu", "norm", "class"), rows)
    write_csv(out / "bdg_modes.csv", ("gamma", "norm", "side", "kind", "omega_re", "omega_im"), modes)
    if args.plot:
        import matplotlib.pyplot as plt
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        for side, style in (("lower", "-"), ("upper", ":")):
            sel = [r for r in rows if r[1] == side]
            ax1.plot([r[0] for r in sel], [r[3] for r in sel], style, color="k")
            sel = [m for m in modes if m[2] == side and m[3] == "norm"]
            ax2.plot([m[0] for m in sel], [m[5] for m in sel], style, color="C0")
        ax1.set_xlabel("gamma"); ax1.set_ylabel("norm")
        ax2.axhline(0, color="k", lw=0.5)
        ax2.set_xlabel("gamma"); ax2.set_ylabel("Im omega (norm mode)")
        fig.tight_layout()
        fig.savefig(out / "fig4.png", dpi=150)


if __name__ == "__main__":
    main()
