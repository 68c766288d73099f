"""
Will the alarm be up when the leak happens?
===========================================

Every hardware element in a detector's chain has to be up for that alarm
to exist, so uptime is a product over the chain and chains with fewer
elements win.  The three stock chains (mass flow, pressure comparison,
acoustic) span 11, 13, and 7 elements; at 99% per-unit availability the
products differ by whole percentage points of downtime.  Duplexing the
weakest element buys the most.
"""

from linewatch.availability import (
    availability_report,
    chain_availability,
    compare_configurations,
    reference_chains,
)

chains = reference_chains({"default": 0.99, "comm_link": 0.97})
rows = compare_configurations(list(chains.values()))

print("%-10s %-9s %-9s %-13s %-14s" % ("chain", "elements", "rank", "uptime", "downtime h/yr"))
for row in rows:
    print("%-10s %-9d %-9d %-13.5f %-14.0f"
          % (row["name"], row["elements"], row["rank"], row["availability"],
             8760 * (1 - row["availability"])))

print("\nexact product vs summed-downtime approximation:")
for name, chain in chains.items():
    rep = availability_report(chain)
    print("  %-10s product %.5f approximate %.5f" % (name, rep["product"], rep["approximate"]))

print("\nbest single duplex upgrade per chain:")
for row in rows:
    kind, gain = max(row["duplex_gains"].items(), key=lambda kv: kv[1])
    upgraded = chains[row["name"]].with_duplex(kind)
    print("  %-10s duplex the %-12s -> %.5f (+%.5f)"
          % (row["name"], kind, chain_availability(upgraded), gain))
