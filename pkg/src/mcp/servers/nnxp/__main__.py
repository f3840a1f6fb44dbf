"""Entry point when running as: python -m servers.nnxp <train|eval|bench|serve> ..."""
from .cli import run

if __name__ == "__main__":
    run()
