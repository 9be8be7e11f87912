"""
Load matrices of the builtin networks
=====================================

Every network reduces to one matrix that maps user rates to node
utilizations. Here we build the three builtin shapes and probe them.
"""

import numpy as np

from aimd_arena import check_stability, compute_load_matrix, klimov, reentrant, single_server

# one bottleneck shared by three users: every rate counts against 1/p
lm = compute_load_matrix(single_server(50, 3))
print(lm.xi)

# one server split into dedicated links, one per user
print(compute_load_matrix(klimov([10, 20, 40])).xi)

# a re-entrant line: traffic visits node 1, then node 2, then node 1 again
top = reentrant(4, 2, 4, 1)
print(top.routing)
print(compute_load_matrix(top).xi)  # node 1 sees 1/4 + 1/4

# stability is a componentwise check on those utilizations
for rate in (1.5, 2.0, 2.5):
    rep = check_stability(compute_load_matrix(top), [rate])
    print(rate, rep.stable, np.round(rep.utilizations, 3), sorted(rep.binding_rows))
