"""Degradation analysis: fingerprint clustering, cluster tables, fused-ring statistics."""
