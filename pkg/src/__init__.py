"""singtraj: certified parallel-singularity checks along robot trajectories."""
