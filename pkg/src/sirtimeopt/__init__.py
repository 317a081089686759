"""Time-optimal bang-bang control of SIR epidemics."""
