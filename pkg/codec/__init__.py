# Codec package
