# core/__main__.py
from core.cli.commands import cli

if __name__ == "__main__":
    cli()
