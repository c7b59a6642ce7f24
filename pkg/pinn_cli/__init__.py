# Experiment runner: configuration, runs, sweeps and reports
