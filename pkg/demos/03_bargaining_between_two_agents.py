"""How much should the second mover offer for the first mover's item?

With privately known values, the offer trades off a better acceptance chance
against paying more.  This script traces the acceptance curve, the expected
payoff of different offers, the optimal offer as the potential gain grows, and
finally the first mover's expected utility from either initial pick.
"""

import numpy as np

from rsd_market import (
    Uniform,
    acceptance_probability,
    first_mover_expected_utility,
    offer_distribution,
    optimal_offer,
    seller_expected_payoff,
    simulate_first_mover_game,
)

unit = Uniform(0.0, 1.0)

print("=== acceptance probability of an offer t (both values uniform) ===")
for t in (0.0, 0.25, 0.5, 0.75, 1.0):
    print(f"  t={t:4.2f}: accepted with probability "
          f"{acceptance_probability(unit, unit, t):.3f}")

print()
print("=== expected payoff of offering t when holding the worse item ===")
v_wanted, v_held = 0.9, 0.1
for t in np.linspace(0.0, 0.5, 6):
    payoff = seller_expected_payoff(v_wanted, v_held, unit, unit, float(t))
    print(f"  t={t:4.2f}: expected payoff {payoff:.4f}")

best = optimal_offer(v_wanted, v_held, unit, unit)
print(f"optimal offer t*={best.t_star:.5f} with payoff {best.expected_payoff:.5f} "
      f"(accepted with probability {best.acceptance:.3f})")

print()
print("=== the optimal offer rises with the potential gain ===")
for gap in (0.2, 0.4, 0.6, 0.8):
    offer = optimal_offer(0.1 + gap, 0.1, unit, unit)
    print(f"  gain {gap:.1f}: t* = {offer.t_star:.5f}")
print("small gains are best pursued with a free-swap offer (t* = 0).")

print()
print("=== what offers actually arrive, and the first mover's problem ===")
offers = offer_distribution(unit, unit, unit, unit, "B", 100_000, seed=12)
print(f"no offer arrives with probability {offers.no_offer_probability:.3f}; "
      f"conditional mean offer {offers.offers.mean():.4f}")

v1a, v1b = 0.9, 0.2
result = first_mover_expected_utility(v1a, v1b, unit, unit, unit, unit, 100_000, seed=34)
print(f"first mover values (A={v1a}, B={v1b}):")
print(f"  choose A -> EU {result.eu_choose_a:.4f}")
print(f"  choose B -> EU {result.eu_choose_b:.4f}   (pick, get bought out)")
print(f"  best initial pick: {result.best_choice}")

sim_eu, sim_se = simulate_first_mover_game(v1a, v1b, unit, unit, unit, unit, "B", 100_000, seed=56)
print(f"cross-check by direct game rollout (choose B): {sim_eu:.4f} +- {3 * sim_se:.4f}")
