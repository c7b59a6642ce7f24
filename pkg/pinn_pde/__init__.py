# Benchmark PDE problems, residual operators and reference solvers
