"""Recover rise and fall times from a noisy averaged trace."""
import numpy as np

from xpmeit import PhaseTrace, TimeGrid
from xpmeit.fitting import FitParams, fit_phase_profile, profile_model, rise_fall_times

truth = FitParams(3e-8, 40e-9, 1.1e-6, 0.0, 2e-4)
grid = TimeGrid.spanning(-1e-6, 9.5e-6, 67e-9)
clean = profile_model(grid.times, truth)
sigma = 0.05 * clean.max() / np.sqrt(2500)
noisy = clean + np.random.default_rng(1).normal(0, sigma, grid.n_samples)

fit = fit_phase_profile(PhaseTrace(grid, noisy, stderr=np.full(grid.n_samples, sigma)))
rf = rise_fall_times(fit)
print(f"converged={fit.converged} after {fit.n_iterations} iterations")
print(f"tau_s = {fit.tau_s * 1e9:.1f} +- {fit.errors.tau_s * 1e9:.1f} ns (true 40)")
print(f"tau   = {fit.tau * 1e9:.0f} +- {fit.errors.tau * 1e9:.0f} ns (true 1100)")
print(f"rise/fall summary: {rf}")
