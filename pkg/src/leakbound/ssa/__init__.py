"""Loop-free single-assignment form of typed programs."""
