"""Decoherence of a Bose-Einstein condensate in a double well.

Submodules: core_model, lindblad, semiclassical, bosonic, trap, noise_rates, cli.
"""
