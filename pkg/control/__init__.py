# Attention control package
