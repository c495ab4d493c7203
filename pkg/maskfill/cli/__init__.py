from .commands import cli, main
