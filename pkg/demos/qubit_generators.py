"""Numeric generators of the phase-damping qubit against their closed forms.

Solves the eigenoperator problem on a small parameter grid, builds the
generator and its split from finite differences, and reports how far they
are from the exact expressions on the range of the reduced state.
"""

import numpy as np

from cstarphase import Grid, QubitModel, generator_forms
from cstarphase.connection import curvature_identities
from cstarphase.eigen import solve_section_on_grid
from cstarphase.qubit import qubit_rotation


def main():
    model = QubitModel()
    grid = Grid.box([0.3, 0.2], [0.32, 0.22], [21, 21], [0, 1], np.array([0.0, 0.0, 0.25]))
    sec = solve_section_on_grid(model.hamiltonian, model.seed, grid, -1)
    # the solver picks its own phase at each point; align it with the closed form
    overlap = np.einsum("...i,...i->...", model.star_eigenvector(grid.points()).conj(), sec.phi)
    sec = sec.with_phase(-np.angle(overlap))
    full, pot, rem = generator_forms(sec)
    closed_full, closed_pot = model.analytic_generators(grid.points(), grid.directions)
    ket1 = qubit_rotation(grid.points()) @ np.array([0, 1])
    for m, mu in enumerate(grid.directions):
        gap_full = np.abs(np.einsum("...ij,...j->...i", full[m] - closed_full[m], ket1)).max()
        gap_pot = np.abs(np.einsum("...ij,...j->...i", pot[m] - closed_pot[m], ket1)).max()
        print(f"direction {mu + 1}: generator gap {gap_full:.2e}, potential gap {gap_pot:.2e}")
    for key, val in curvature_identities(full, pot, rem, sec.rho).items():
        print(f"{key}: {val:.2e}")


if __name__ == "__main__":
    main()
