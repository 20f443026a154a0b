"""molguide: classifier-guided discrete diffusion for molecular graphs."""

__version__ = "1.0.0"
__app_name__ = "molguide"
