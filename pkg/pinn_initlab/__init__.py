# Initialisation analysis: input-gradient variance bounds and Monte-Carlo checks
