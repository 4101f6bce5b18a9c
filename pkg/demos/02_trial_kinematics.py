"""Run one synthetic trial and dissect its kinematics.

A seeded expert agent inserts the needle while probing the syringe plunger.
We re-derive the adjusted plunger trajectory from the committed record,
detect the probing movements on it, and plot both device tracks with the
detected peaks and the layer map.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from epidusim import PROFILES, Trial, adjust_lor, build_patient_model, detect_probes, replay
from epidusim.agent import drive_trial

OUT = "demos/output"


def main():
    import pathlib

    pathlib.Path(OUT).mkdir(parents=True, exist_ok=True)
    model = build_patient_model(71.0)
    trial = Trial(model, participant="demo-expert")
    drive_trial(PROFILES["expert"], trial, seed=42)
    record = trial.commit()
    print(f"outcome: {record.outcome.kind.value} "
          f"(error {record.outcome.signed_error:+.2f} mm, "
          f"final depth {record.final_depth:.2f} mm)")

    # the record is self-contained: replaying it reproduces it bit-exactly
    assert replay(record) == record
    print("replay check: bit-exact")

    traj = adjust_lor(record)
    events = detect_probes(traj, model=model)
    print(f"{len(events)} probing movements, "
          f"mean depth {np.mean([e.depth for e in events]):.2f} mm")

    t = [s.t for s in record.samples]
    depth = [s.p_touhy for s in record.samples]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
    for region in model.regions:
        top.axhspan(region.start, region.end, alpha=0.10)
    top.plot(t, depth, "k")
    top.set_ylabel("needle depth [mm]")
    top.invert_yaxis()
    bottom.plot(traj.t, traj.p_adj, "k", lw=0.8)
    bottom.plot([e.t_peak for e in events], [e.depth for e in events], "rv", ms=6)
    bottom.set_ylabel("plunger excursion [mm]")
    bottom.set_xlabel("time [s]")
    fig.tight_layout()
    path = f"{OUT}/trial_kinematics.png"
    fig.savefig(path, dpi=130)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
