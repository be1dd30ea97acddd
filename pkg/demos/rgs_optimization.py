"""Searching for the best repeater-graph-state shape under a photon budget.

Bigger trees survive more loss but take longer to generate and tie up more
end-node memory qubits; the sweet spot shifts with the repeater count. Writes
the optimizer frontier to CSV and prints where the chain starts beating
direct transmission.
"""

from pathlib import Path

from repeatersim import ApeParams, ChainTopology, optimize_frontier, repeaterless_rate
from repeatersim.cli import main

HERE = Path(__file__).resolve().parent

for budget in (300, 900):
    main([
        "optimize", "--budget", str(budget), "--distances", "50",
        "--repeaters", "1-10", "--out", str(HERE / f"frontier_{budget}.csv"),
    ])

ape = ApeParams()
topo = ChainTopology(n_repeaters=0, chain_length_km=50.0)
baseline = repeaterless_rate(ape, topo)
print(f"repeaterless baseline at 50 km: {baseline:.1f} Hz")
for budget in (300, 900):
    result = optimize_frontier(ape, topo, budget, range(1, 11))
    print(f"\nbudget {budget} photons (crossover at n={result.crossover_n}):")
    for entry in result.frontier:
        mark = "*" if entry.egr > baseline else " "
        print(f"  n={entry.n_repeaters:2d}: best {str(entry.rgs.as_tuple()):>12} "
              f"({entry.photons:3d} photons)  EGR {entry.egr:8.1f} Hz {mark}")
