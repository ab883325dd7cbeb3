"""Optimized P_k1 P_k2 against the degenerate and separated limits.

Also prints the ceiling the analytic single-channel bound puts on the
degenerate product: with identical spectra the pair acts as one channel with
g_eff^2 = g1^2 + g2^2, so P1 P2 = (g1^2 g2^2 / g_eff^4) P^2.
"""
import argparse
import math

from photonlimits.analytic_bounds import upper_bound
from photonlimits.model import (CavityChannel, SystemParams, degenerate_product_limit,
                                separated_product_limit)
from photonlimits.optimizer import OptimizationTarget, optimize

G1, G2, GAMMA = math.sqrt(1 / 3), -math.sqrt(4 / 15), 0.6


def system(dz):
    return SystemParams(1.0, GAMMA, (CavityChannel(G1, dz / 2), CavityChannel(G2, -dz / 2))).centered()


def degenerate_ceiling(T):
    ge2 = G1 ** 2 + G2 ** 2
    single = SystemParams.lambda_system(1.0, GAMMA, math.sqrt(ge2))
    return G1 ** 2 * G2 ** 2 / ge2 ** 2 * upper_bound(single, T).P_upper ** 2


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=float, default=12.5)
    ap.add_argument("--splittings", type=float, nargs="+", default=[0.0, 1.0, 5.0, 20.0])
    args = ap.parse_args()
    print(f"degenerate limit {degenerate_product_limit(system(0.0)):.6f}, "
          f"separated limit {separated_product_limit(system(0.0)):.6f}, "
          f"degenerate ceiling at T={args.T:g}: {degenerate_ceiling(args.T):.6f}")
    for dz in args.splittings:
        sol = optimize(system(dz), OptimizationTarget.emission(args.T, 1, 2))
        print(f"dZ={dz:g}: P1={sol.term_values[0]:.6f} P2={sol.term_values[1]:.6f} "
              f"product={sol.objective:.6f} converged={sol.converged}")
