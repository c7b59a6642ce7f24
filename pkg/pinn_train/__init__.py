# Collocation sampling, loss assembly, optimisation and evaluation
