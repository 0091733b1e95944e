"""
aot-diffusion

Diffusion models trained on noise paired to data by approximated optimal
transport, with samplers, diagnostics and discriminator guidance.
"""
