"""Monte Carlo experiment driver and command-line interface."""
