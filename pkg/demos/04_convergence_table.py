"""A convergence study, as produced by the ``hdgfrac`` command.

Each level halves h, chooses delta = sqrt(c h^(k+2)) and records L2 errors
of u_h, q_h and u* at the final time together with observed rates.
"""
from __future__ import annotations

from hdgfrac import RunConfig, convergence_study, emit_table

for k, levels in ((0, [4, 8, 16, 32, 64]), (1, [4, 8, 16, 32])):
    table = convergence_study(RunConfig(alpha=0.7, degree=k, levels=levels))
    print(emit_table(table, "md"))

# the same table from a shell:
#   hdgfrac --alpha 0.7 --degree 1 --levels 4,8,16,32 --format md
