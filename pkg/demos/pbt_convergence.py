"""Port-based teleportation error against the number of ports.

The pretty-good measurement is built exactly, the channel it induces is
turned into a Choi matrix, and the distance to the identity channel is
bracketed from both sides. The analytic bound 4 * 4^k / sqrt(N) holds with
room to spare: the measured lower bound falls close to 1/N.
"""

from nlqc_lightcone.teleport import covariance_defect, pbt_bound_report, pbt_error_channel

print(f"{'N':>5} {'lower':>9} {'upper':>9} {'bound':>9} {'avg F':>8}")
for N in (2, 4, 8, 16, 32, 64, 128, 256):
    r = pbt_bound_report(1, N)
    print(f"{N:>5} {r.lower:>9.5f} {r.upper:>9.5f} {r.analytic_bound:>9.4f} {r.avg_fidelity:>8.5f}")

# the channel commutes with every unitary, so it is a depolarizing channel
print(f"\ncovariance defect at N=8: {covariance_defect(pbt_error_channel(1, 8)):.1e}")
