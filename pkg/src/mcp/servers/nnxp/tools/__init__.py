# tools package for the nnxp server
