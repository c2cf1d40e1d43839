# Planning package
