"""Compare the reduced and the whole generator as adiabatic transport rules.

Runs the phase-damping qubit around a circular loop for several durations and
prints the largest trace distance between the exact reduced state and each
transported state, together with the eigenspace leakage of the exact state.

    python3 demos/adiabatic_comparison.py [T ...]
"""

import sys

import numpy as np

from cstarphase import ParameterPath, QubitModel, adiabatic_transport, leakage, schrodinger_integrate, transport_error
from cstarphase.qubit import circle_curve


def run(model, T, substeps=10):
    path = ParameterPath(circle_curve(0.5, T), T, max(1000, int(10 * T)))
    fine = path.fine_grid(substeps)
    sec = model.section(fine, points=path.points(fine.axes[0]))
    exact = schrodinger_integrate(model.hamiltonian, sec.phi[0], path, substeps)
    row = {"leakage": leakage(exact.psi, sec.projector[:: 2 * substeps]).max()}
    for gen in ("reduced", "full"):
        tr = adiabatic_transport(sec, gen, substeps=substeps, adiabatic_threshold=np.inf)
        row[gen] = transport_error(exact, tr, 2, 2)["max_trace_distance"]
    return row


def main(durations):
    model = QubitModel()
    print(f"{'T':>8} {'reduced':>10} {'full':>10} {'leakage':>10}")
    for T in durations:
        r = run(model, T)
        print(f"{T:8g} {r['reduced']:10.4f} {r['full']:10.4f} {r['leakage']:10.2e}")


if __name__ == "__main__":
    main([float(a) for a in sys.argv[1:]] or [10.0, 30.0, 100.0, 300.0])
