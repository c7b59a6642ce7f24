# Taylor-mode jets and the reverse sweep for parameter gradients
