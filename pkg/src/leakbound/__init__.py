"""leakbound: quantitative information-flow checking by bounded model checking.

The pipeline reads a small C dialect, builds a self-composition driver for a
policy "at most N distinctions", unwinds and converts it to SSA, bit-blasts
to CNF and solves with a built-in CDCL solver.  A concrete interpreter and an
exhaustive enumerator provide ground truth for the same programs.
"""

__version__ = "0.1.0"
