"""Core modules: discrete diffusion, graph transformer, training, guidance, sampling."""
