# MCP tool server for the sinusoidal-feature PINN lab
