"""Linear-response phase profile: how the transparency window sets the decay.

Narrowing the window lengthens the response time and raises the integrated
phase, while the rise stays pinned to the signal pulse.
"""
import numpy as np

from xpmeit import SpectralWindow
from xpmeit import harness, lti

cfg = harness.get_preset("fig2")
medium = cfg.medium
pulse = cfg.pulse(0)
coupling = harness.lti_coupling_const(cfg, 0)
print(f"signal pulse carries {pulse.n_ph:.3g} photons")

print(f"{'window (MHz)':>12} {'tau (ns)':>9} {'peak (mrad)':>12} {'integrated (rad s)':>19} {'rise (ns)':>9}")
for f in (3.8e6, 2.0e6, 1.0e6, 0.6e6, 0.38e6):
    w = SpectralWindow.from_hz(f)
    tau = lti.response_time(w, medium)
    kernel = lti.LtiKernel(lti.integrated_phase_per_photon(w, medium, coupling), tau)
    s = lti.summarize(kernel, pulse)
    print(f"{f / 1e6:12.2f} {tau * 1e9:9.0f} {s.peak_phase * 1e3:12.3f} {s.integrated_phase:19.3e} {s.rise_time * 1e9:9.1f}")

t = np.linspace(-0.2e-6, 4e-6, 9)
w = SpectralWindow.from_hz(0.38e6)
kernel = lti.LtiKernel(lti.integrated_phase_per_photon(w, medium, coupling), lti.response_time(w, medium))
print("\nprofile samples at 0.38 MHz (t in us, phase in mrad):")
for ti, p in zip(t, lti.phase_profile(t, kernel, pulse)):
    print(f"  {ti * 1e6:6.2f}  {p * 1e3:8.4f}")
