# nnxp_training tool package
