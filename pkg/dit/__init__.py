# DiT package
