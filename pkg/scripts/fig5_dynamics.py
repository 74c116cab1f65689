"""Extended model: each stationary state evolved under the other's gamma.

psi_1 has norm 1 and psi_2 norm sqrt(2) on the lower branch. Each is
evolved under the gamma of the other and projected onto the Bloch basis
(e1 = target state, e2 = Gram-Schmidt of the linear excited state).
"""
import math

import numpy as np

from _common import outdir, parser
from asymbec.extended import (
    ExtendedParams, bdg_extended, bloch_project, evolve_extended, gram_schmidt_basis, linear_states,
    project_trajectory, state_at_norm, trace_branch,
)
from asymbec.io import write_csv
from asymbec.two_mode import BlochPoint

PARAMS = ExtendedParams(0.0, a_R=-0.01, a_I=-0.08, g=0.1)


def run(branch, target_norm, start_norm, t_final, dt):
    target = state_at_norm(branch, target_norm)
    start = state_at_norm(branch, start_norm)
    sp = bdg_extended(target)
    osc = sp.oscillation_mode()
    _, (_, excited) = linear_states(target.grid, target.params)
    basis = gram_schmidt_basis(target.psi, excited)
    anchor, _ = bloch_project(target.psi, basis)
    tr = evolve_extended(start.psi, target.params, t_final, dt, stride=200)
    R, th, ph, res = project_trajectory(tr, basis)
    d = np.array([BlochPoint(R[i], th[i], ph[i]).distance(anchor) for i in range(len(R))])
    far = np.nonzero(d >= 1e-2)[0]
    settle = float(tr.times[far[-1]]) if far.size else 0.0
    period = 2 * math.pi / abs(osc.real)
    print(f"N={start_norm:.4f} -> gamma(N={target_norm:.4f})={target.params.gamma:.6f}: "
          f"norm mode {sp.norm_mode().imag:+.5f}i, oscillation {osc:.4f}, "
          f"distance<1e-2 after t={settle:.0f} = {settle / period:.2f} periods")
    return list(zip(tr.times, R, th, ph, tr.norms, d)), (anchor.R, anchor.theta, anchor.phi)


def main():
    ap = parser(__doc__, "results/fig5")
    ap.add_argument("--t-final", type=float, default=1500.0)
    ap.add_argument("--dt", type=float, default=0.005)
    args = ap.parse_args()
    out = outdir(args.out)
    branch = trace_branch(PARAMS, norms=np.arange(1, 33) * 0.05)
    panels = {"left": (1.0, math.sqrt(2)), "right": (math.sqrt(2), 1.0)}
    results = {}
    for name, (target, start) in panels.items():
        rows, anchor = run(branch, target, start, args.t_final, args.dt)
        write_csv(out / f"bloch_{name}.csv", ("t", "R", "theta", "phi", "norm", "distance"), rows)
        results[name] = (rows, anchor)
    if args.plot:
        import matplotlib.pyplot as plt
        fig, axes = plt.subplots(3, 2, sharex=True, figsize=(9, 6))
        for col, name in enumerate(panels):
            rows, anchor = results[name]
            t = [r[0] for r in rows]
            for row, (k, label) in enumerate(((1, "R"), (2, "theta"), (3, "phi"))):
                axes[row, col].plot(t, [r[k] for r in rows], lw=0.8)
                axes[row, col].axhline(anchor[k - 1], color="k", lw=0.5, ls="--")
                axes[row, col].set_ylabel(label)
            axes[-1, col].set_xlabel("t")
        fig.tight_layout()
        fig.savefig(out / "fig5.png", dpi=150)


if __name__ == "__main__":
    main()
