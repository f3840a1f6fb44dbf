# nnxp_runs tool package
