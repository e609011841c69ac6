"""Linear regression under covariate shift."""
