"""Walk the needle through the tissue stack and plot the resistance curves.

Shows the piecewise-polynomial force landscape for two patient body masses:
the layers of a lighter patient are shallower and stiffer, but the peak
force in each layer is identical, and in both cases the force collapses to
zero on entering the epidural space (the loss of resistance).
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from epidusim import PunctureState, build_patient_model, lor_force, touhy_force

OUT = "demos/output"


def force_sweep(model, step=0.02):
    """Forces along a monotone insertion, updating puncture flags as we go."""
    state = PunctureState()
    depths = np.arange(0.0, model.total_depth + 4.0, step)
    f_touhy, f_lor = [], []
    for d in depths:
        state.update_for_depth(model, d)
        f_touhy.append(touhy_force(model, d, state))
        f_lor.append(lor_force(model, d, state))
    return depths, np.array(f_touhy), np.array(f_lor)


def main():
    import pathlib

    pathlib.Path(OUT).mkdir(parents=True, exist_ok=True)
    fig, axes = plt.subplots(1, 2, figsize=(12, 4.5), sharey=True)
    for ax, mass in zip(axes, (55.0, 115.0)):
        model = build_patient_model(mass)
        depths, f_touhy, f_lor = force_sweep(model)
        for region in model.regions:
            ax.axvspan(region.start, region.end, alpha=0.12)
        ax.plot(depths, f_touhy, "k--", label="Touhy needle")
        ax.plot(depths, f_lor, "k-", label="LOR syringe")
        start, end = model.epidural_window
        ax.axvspan(start, end, color="tab:green", alpha=0.25, label="epidural window")
        ax.set_title(f"{mass:.0f} kg patient (thickness ratio {model.thickness_ratio:.3f})")
        ax.set_xlabel("needle depth [mm]")
        ax.legend(loc="upper left")
        print(f"{mass:.0f} kg: epidural window {start:.2f}-{end:.2f} mm, "
              f"LOR drop {2 * model.dura_wall_force:.2f} N on the syringe")
    axes[0].set_ylabel("resistive force [N]")
    fig.tight_layout()
    path = f"{OUT}/tissue_forces.png"
    fig.savefig(path, dpi=130)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
