"""Temporal-coherence unsupervised learning (C++ core)."""

from ._core import (  # noqa: F401
    Error,
    UlLayer,
    batch_gradient,
    batch_objective,
    cholesky,
    closed_form_embedding,
    decode_angle,
    eig_gen_sym,
    eig_sym,
    gen_moving_square,
    gen_rotating_points,
    gradcheck,
    inv_sqrt_sym,
    least_squares,
    log_det_pd,
    markov_stats,
    objective_on_chain,
    solve,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
