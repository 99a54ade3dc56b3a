"""
kinlaw: numerical experiments on kinetic formulations of 2x2 systems.

The package is organised by task:

- :mod:`kinlaw.systems`: charts, eigenstructure, Riemann invariants.
- :mod:`kinlaw.goursat`: singular entropy families and strip constants.
- :mod:`kinlaw.viscous`: viscous solver and energy ledger.
- :mod:`kinlaw.kinetic`: kinetic fields and defect measures.
- :mod:`kinlaw.lagrangian`: characteristic curves and the interaction functional.
- :mod:`kinlaw.diagnostics`: jump set and mean-oscillation profiles.
- :mod:`kinlaw.cli`: the ``kinlaw`` command line.
"""

__version__ = "0.1.0"
