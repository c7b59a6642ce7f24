# Shared errors, settings and output helpers for the PINN Lab packages
