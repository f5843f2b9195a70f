"""
Complete Boundary-Damped Wave Simulation Example

This example demonstrates the full workflow of pyphsim:
1. Build a wave model and audit its boundary passivity
2. Evaluate the transfer function G(lambda)
3. Discretize with summation-by-parts operators
4. Close the loop with a sector-bounded damper and simulate
5. Fit the energy decay rate
6. Check the sufficient stability conditions
7. Export the energy trace
"""

import numpy as np

from pyphsim.blocks import BlockDiagonal, PiecewiseLinear, ZeroMap, verify_sector
from pyphsim.core import (
    ClosedLoop,
    FeedbackPorts,
    build_discrete,
    check_boundary_bound,
    estimate_decay,
    sample_passivity,
    transfer_at,
)
from pyphsim.scenarios import wave_model

print("=" * 70)
print("Boundary-Damped Wave Simulation - pyphsim")
print("=" * 70)
print()

# ==============================================================================
# Step 1: Build the Wave Model
# ==============================================================================
print("Step 1: Building wave model (clamped left end, free right end)...")
print("-" * 70)

wave = wave_model(rho=1.0, EI=1.0, left="dirichlet")
passivity = sample_passivity(wave, seed=0)

print(f"  Created: {wave.name}  (N={wave.N}, d={wave.d}, ports={wave.n_ports})")
print(f"  Passivity audit: {passivity}")
print()

# ==============================================================================
# Step 2: Transfer Function
# ==============================================================================
print("Step 2: Evaluating G(lambda) on the right half plane...")
print("-" * 70)

for lam in (0.5, 1.0, 2.0 + 1.0j):
    ev = transfer_at(wave, lam)
    print(f"  lambda={lam!s:>8}: min eig Re G = {ev.min_sym_eig:.6f}")
print()

# ==============================================================================
# Step 3: Discretize
# ==============================================================================
print("Step 3: Discretizing with SBP operators...")
print("-" * 70)

system = build_discrete(wave, 64)

print(f"  Cells: {system.n_cells}")
print(f"  State size: {system.size}")
print()

# ==============================================================================
# Step 4: Close the Loop and Simulate
# ==============================================================================
print("Step 4: Closing the loop with a two-slope damper...")
print("-" * 70)

kappa = 2.0
damper = PiecewiseLinear(kappa, 1.0 / kappa, 1.0)
feedback = BlockDiagonal([ZeroMap(1), damper])
loop = ClosedLoop(system, feedback, stepper="midpoint", dt=1.0 / 256, T=5.0, name="wave-demo")

trace = loop.run(seed=7)

print(f"  Simulation completed!")
print(f"  Steps: {loop.n_steps}  (dt = {loop.dt:.6f})")
print(f"  Energy: {trace.E_total[0]:.6e} -> {trace.E_total[-1]:.6e}")
print(f"  Max power residual: {np.max(trace.power_residual):.3e}")
print()

# ==============================================================================
# Step 5: Decay Rate
# ==============================================================================
print("Step 5: Fitting the energy decay rate...")
print("-" * 70)

M_hat, omega_hat, quality = estimate_decay(trace)

print(f"  M_hat     = {M_hat:.4f}")
print(f"  omega_hat = {omega_hat:.4f}")
print(f"  R^2       = {quality:.6f}")
print()

# ==============================================================================
# Step 6: Stability Conditions
# ==============================================================================
print("Step 6: Checking sufficient conditions...")
print("-" * 70)

sector = verify_sector(damper, kappa, seed=0)
bound = check_boundary_bound(wave, FeedbackPorts(output_projection=np.diag([0.0, 1.0])), "N1")

print(f"  Sector bound (kappa={kappa}): ok={sector.ok}, kappa_tilde={sector.kappa_tilde}")
print(f"  Boundary bound: c={bound.lhs:.4f}, passed={bound.passed}")
print()

# ==============================================================================
# Step 7: Export
# ==============================================================================
print("Step 7: Exporting the energy trace...")
print("-" * 70)

df = trace.to_dataframe()
trace.to_csv("wave_demo_trace.csv")

print(f"  Columns: {list(df.columns)}")
print(f"  Rows: {len(df)}")
print(f"  Written: wave_demo_trace.csv")
print()

# ==============================================================================
# Summary
# ==============================================================================
print("=" * 70)
print("Simulation Complete!")
print("=" * 70)
print()
print("Summary of Features Demonstrated:")
print("  [OK] Wave model with port wiring and passivity audit")
print("  [OK] Transfer function evaluation with positivity data")
print("  [OK] Summation-by-parts discretization")
print("  [OK] Implicit midpoint closed loop with a monotone damper")
print("  [OK] Decay-rate fit on the energy trace")
print("  [OK] Sector and boundary-bound checks")
print("  [OK] CSV export through pandas")
print()
print("Next Steps:")
print("  - Try the relay damper: Relay(0.5, viscous=1.0)")
print("  - Run a catalog scenario: python -m pyphsim run --scenario eb-beam-damped")
print("  - Sweep kappa with the sweep subcommand")
print()
