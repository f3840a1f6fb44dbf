# nnxp_bench tool package
