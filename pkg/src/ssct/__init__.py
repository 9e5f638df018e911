"""Desk-scale laboratory for point-source Helmholtz scattering with
singular potentials: outgoing resolvent, Lippmann-Schwinger solves,
layer potentials, Runge fitting, CGO machinery, and Fourier-mode
recovery, each instrumented with analytic oracles."""

__version__ = "0.1.0"
