# Diffusion package
