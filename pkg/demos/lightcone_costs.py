"""How the light cone sets the entanglement bill.

A brickwork circuit keeps every family small, so the number of port
teleportation resources grows like N^3 instead of N^(number of gates).
We then compare against teleporting the whole input through one big
port-based teleportation, which pays 2^(4n).
"""

import math

from nlqc_lightcone import corpus
from nlqc_lightcone.circuit import family, lightcone_volume
from nlqc_lightcone.costmodel import (
    whole_register_cost,
    cost_report,
    entanglement_cost,
    ports_required,
)

cs = corpus.brickwork(8, 2)
print("brickwork n=8, depth 2")
for g in cs.gates():
    print(f"  gate {g.id} on {g.support}: |fm| = {len(family(cs, g.id))}")
print(f"  light-cone volume V = {lightcone_volume(cs)}\n")

# exact bill at a target accuracy; integers never overflow
report = cost_report(cs, target=0.5)
print(report.to_table())
print()

# the depth-Theta(n) shift pays for its light cone, the ancilla version does not
print("cyclic shift: exponent 4V of the generic bound")
for n in (4, 8, 16):
    chain = lightcone_volume(corpus.cyclic_shift_chain(n))
    anc = lightcone_volume(corpus.cyclic_shift_with_ancillas(n))
    print(f"  n={n:>2}: chain 4V = {4 * chain:>3}   with ancillas 4V = {4 * anc}")
print()

print("factorized log2(n)-qubit blocks vs a single n-qubit gate, eps = 1")
print(f"  {'n':>4} {'log2 E (blocks)':>16} {'log2 E (single)':>16}")
for n in (8, 16, 32, 64, 128):
    blocks = corpus.factorized_blocks(n, two_layer=True)
    ours = entanglement_cost(blocks, ports_required(blocks, 1.0)).E
    print(f"  {n:>4} {math.log2(ours):>16.1f} {math.log2(whole_register_cost(n, 1.0)):>16.1f}")
