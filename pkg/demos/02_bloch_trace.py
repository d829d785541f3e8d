"""Full four-level master-equation trace, thin medium and sliced medium."""
import numpy as np

from xpmeit import FieldParams, MediumParams, SignalPulse, TimeGrid
from xpmeit import bloch
from xpmeit.spectroscopy import coupling_for_window
from xpmeit.model import TWO_PI

medium = MediumParams(d0=3.0)
omega_c = coupling_for_window(TWO_PI * 1e6, medium)
fields = FieldParams(omega_p=min(TWO_PI * 50e3, omega_c / 20), omega_c=omega_c)
pulse = SignalPulse.from_peak_power(0.8e-6, 40e-9)
grid = TimeGrid.spanning(-0.5e-6, 3e-6, 1e-9)

trace = bloch.evolve(medium, fields, pulse, grid, check_grid=False)
print("diagnostics:", {k: f"{v:.2e}" for k, v in trace.diagnostics.items()})
calib = bloch.calibrate_thin_medium(medium, fields)
thin = bloch.probe_response(trace, calib, fields)

slabs = bloch.propagate_slabs(medium, fields, pulse, grid, n_slabs=6)
for name, tr in (("thin", thin), ("slabs", slabs)):
    phase = tr.phase - tr.phase[0]
    i = int(np.argmax(np.abs(phase)))
    print(f"{name:>6}: peak {phase[i] * 1e3:.3f} mrad at {grid.times[i] * 1e9:.0f} ns")
