# Package root for the nnxp engine and its MCP server
