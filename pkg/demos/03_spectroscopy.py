"""Steady-state scans: window width and the AC Stark shift of the centre."""
from xpmeit import FieldParams, MediumParams
from xpmeit.model import TWO_PI
from xpmeit.spectroscopy import coupling_for_window, stark_shift, transmission_scan, window_fwhm

medium = MediumParams(d0=1.0)
for target in (0.5e6, 1e6, 2e6):
    fields = FieldParams(omega_p=TWO_PI * 20e3, omega_c=coupling_for_window(TWO_PI * target, medium))
    measured = window_fwhm(transmission_scan(medium, fields))
    print(f"nominal window {target / 1e6:.2f} MHz -> measured FWHM {measured.delta_eit / TWO_PI / 1e6:.3f} MHz")

fields = FieldParams(omega_p=TWO_PI * 20e3, omega_c=coupling_for_window(TWO_PI * 1e6, medium))
shift = stark_shift(medium, fields, TWO_PI * 2e6)
print(f"CW signal at 2 MHz Rabi frequency shifts the window by {shift / TWO_PI / 1e3:.2f} kHz")
